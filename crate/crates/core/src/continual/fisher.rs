use crate::error::{Error, Result};
use crate::grad::ParamVector;

/// Anything that yields a per-sample loss gradient at its current parameters.
pub trait SampleGradient {
    type Sample;

    fn parameters(&self) -> &ParamVector;

    fn sample_gradient(&self, sample: &Self::Sample) -> Result<ParamVector>;
}

/// Diagonal of the empirical Fisher, aligned with the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDiag(Vec<f64>);

impl FisherDiag {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "Fisher entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean over `dataset` of the squared per-sample gradient, entry by entry.
///
/// Cross terms of the outer product are dropped; only its diagonal is kept.
pub fn estimate_fisher_diag<M: SampleGradient>(
    model: &M,
    dataset: &[M::Sample],
) -> Result<FisherDiag> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let params = model.parameters();
    let mut acc = vec![0.0; params.len()];
    for sample in dataset {
        let g = model.sample_gradient(sample)?;
        params.check_aligned(&g)?;
        for (a, gi) in acc.iter_mut().zip(g.values()) {
            *a += gi * gi;
        }
    }
    let n = dataset.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    FisherDiag::new(acc)
}

/// `alpha·new + (1 − alpha)·old`, elementwise.
pub fn update_fisher(old: &FisherDiag, new: &FisherDiag, alpha_interp: f64) -> Result<FisherDiag> {
    if old.len() != new.len() {
        return Err(Error::Layout(format!(
            "Fisher lengths differ: {} vs {}",
            old.len(),
            new.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha_interp) {
        return Err(Error::Config(format!(
            "alpha_interp {alpha_interp} outside [0, 1]"
        )));
    }
    FisherDiag::new(
        old.0
            .iter()
            .zip(&new.0)
            .map(|(o, n)| alpha_interp * n + (1.0 - alpha_interp) * o)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// l(θ) = θ·y for scalar θ.
    struct Linear(ParamVector);

    impl SampleGradient for Linear {
        type Sample = f64;

        fn parameters(&self) -> &ParamVector {
            &self.0
        }

        fn sample_gradient(&self, y: &f64) -> Result<ParamVector> {
            self.0.with_values(vec![*y])
        }
    }

    fn theta() -> ParamVector {
        ParamVector::zeros_with_layout([("theta", vec![1])])
    }

    #[test]
    fn two_sample_expectation() {
        let f = estimate_fisher_diag(&Linear(theta()), &[1.0, 2.0]).unwrap();
        assert_eq!(f.values(), &[2.5]);
    }

    #[test]
    fn constant_loss_gives_zero_fisher() {
        let f = estimate_fisher_diag(&Linear(theta()), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.values(), &[0.0]);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            estimate_fisher_diag(&Linear(theta()), &[]),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let old = FisherDiag::new(vec![2.0]).unwrap();
        let new = FisherDiag::new(vec![4.0]).unwrap();
        assert_eq!(update_fisher(&old, &new, 1.0).unwrap(), new);
        assert_eq!(update_fisher(&old, &new, 0.0).unwrap(), old);
        assert_eq!(update_fisher(&old, &new, 0.25).unwrap().values(), &[2.5]);
        assert!(update_fisher(&old, &FisherDiag::zeros(2), 0.5).is_err());
        assert!(update_fisher(&old, &new, 1.5).is_err());
    }

    #[test]
    fn negative_entries_are_rejected() {
        assert!(FisherDiag::new(vec![-1.0]).is_err());
    }
}
