//! Recurrent magnitude-spectrum enhancer.
//!
//! A stack of unidirectional LSTM layers followed by a fully connected layer
//! maps noisy magnitude frames to enhanced magnitude frames. Frame `t` is divided
//! by the mean magnitude of frames `0..=t` before the network and the softplus
//! output is multiplied back by the same value, so the whole map stays causal.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};
use crate::grad::{ParamVector, Tape, Tensor, Var};

const CHECKPOINT_MAGIC: &[u8; 8] = b"SERILMDL";
const CHECKPOINT_VERSION: u32 = 1;

/// Lower bound on the normalizing mean, so silent input stays finite.
const MIN_NORM: f64 = 1e-8;

/// Mean magnitude of frames `0..=t`, for each `t`.
fn running_means(values: &[f64], feat: usize) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .chunks(feat)
        .enumerate()
        .map(|(t, row)| {
            sum += row.iter().sum::<f64>();
            (sum / ((t + 1) * feat) as f64).max(MIN_NORM)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhancerConfig {
    pub num_lstm_layers: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for EnhancerConfig {
    /// Desk-scale network: 2 LSTM layers of 64 units.
    fn default() -> Self {
        Self {
            num_lstm_layers: 2,
            hidden_dim: 64,
            feature_dim: 257,
            seed: 0,
        }
    }
}

impl EnhancerConfig {
    /// Full-size network: 3 LSTM layers of 257 units.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            num_lstm_layers: 3,
            hidden_dim: 257,
            feature_dim: 257,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_lstm_layers == 0 || self.hidden_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config(format!(
                "enhancer needs at least one layer and positive sizes, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Handles to the parameter leaves of one tape recording.
pub struct ParamVars(Vec<Var>);

impl ParamVars {
    pub fn all(&self) -> &[Var] {
        &self.0
    }
}

/// Anything that maps a noisy magnitude matrix to an enhanced one.
pub trait Enhancer {
    fn enhance(&self, noisy_mag: &Tensor) -> Result<Tensor>;
}

/// Passes the noisy input through untouched; scores the unprocessed signal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bypass;

impl Enhancer for Bypass {
    fn enhance(&self, noisy_mag: &Tensor) -> Result<Tensor> {
        Ok(noisy_mag.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancerModel {
    config: EnhancerConfig,
    params: ParamVector,
}

fn layout_for(cfg: &EnhancerConfig) -> ParamVector {
    let h = cfg.hidden_dim;
    let mut blocks = Vec::new();
    for l in 0..cfg.num_lstm_layers {
        let input = if l == 0 { cfg.feature_dim } else { h };
        blocks.push((format!("lstm{l}.w_ih"), vec![4 * h, input]));
        blocks.push((format!("lstm{l}.w_hh"), vec![4 * h, h]));
        blocks.push((format!("lstm{l}.bias"), vec![4 * h]));
    }
    blocks.push(("out.weight".to_string(), vec![cfg.feature_dim, h]));
    blocks.push(("out.bias".to_string(), vec![cfg.feature_dim]));
    ParamVector::zeros_with_layout(blocks)
}

impl EnhancerModel {
    /// Seeded initialization.
    ///
    /// Weights are uniform in `±1/√fan_in`. Biases are zero except the LSTM
    /// forget gate, which starts at 1. Gates are stacked as input, forget,
    /// output, cell.
    pub fn init(cfg: EnhancerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut params = layout_for(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let h = cfg.hidden_dim;
        for i in 0..params.layout().len() {
            let spec = params.layout()[i].clone();
            let block = params.block_mut(i);
            if spec.name.ends_with("bias") {
                if spec.name.starts_with("lstm") {
                    block[h..2 * h].fill(1.0);
                }
            } else {
                let bound = 1.0 / (spec.shape[1] as f64).sqrt();
                for v in block.iter_mut() {
                    *v = rng.gen_range(-bound..=bound);
                }
            }
        }
        Ok(Self {
            config: cfg,
            params,
        })
    }

    pub fn config(&self) -> &EnhancerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn snapshot(&self) -> ParamVector {
        self.params.clone()
    }

    /// Replaces all parameters; the layout must match exactly.
    pub fn restore(&mut self, params: ParamVector) -> Result<()> {
        self.params.check_aligned(&params)?;
        self.params = params;
        Ok(())
    }

    /// Mutable access for optimizers.
    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    /// Records all parameters on `tape`.
    pub fn register(&self, tape: &mut Tape) -> Result<ParamVars> {
        Ok(ParamVars(tape.params(&self.params)?))
    }

    /// Runs the network on a `T × feature_dim` magnitude matrix.
    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, noisy_mag: &Tensor) -> Result<Var> {
        let (frames, feat) = noisy_mag.dims2()?;
        if feat != self.config.feature_dim {
            return Err(Error::Shape(format!(
                "expected {} features per frame, got {feat}",
                self.config.feature_dim
            )));
        }
        let h = self.config.hidden_dim;
        let norms = running_means(noisy_mag.values(), feat);
        let scaled = noisy_mag
            .values()
            .chunks(feat)
            .zip(&norms)
            .flat_map(|(row, n)| row.iter().map(move |v| v / n))
            .collect();
        let mut input = tape.constant(Tensor::matrix(frames, feat, scaled)?);

        let v = vars.all();
        for l in 0..self.config.num_lstm_layers {
            let (w_ih, w_hh, bias) = (v[3 * l], v[3 * l + 1], v[3 * l + 2]);
            let proj = tape.matmul_nt(input, w_ih)?;
            let proj = tape.add_row(proj, bias)?;
            let mut hidden: Option<Var> = None;
            let mut cell: Option<Var> = None;
            let mut outputs = Vec::with_capacity(frames);
            for t in 0..frames {
                let mut pre = tape.slice(proj, t * 4 * h, 4 * h)?;
                if let Some(hp) = hidden {
                    let rec = tape.matvec(w_hh, hp)?;
                    pre = tape.add(pre, rec)?;
                }
                let sig_part = tape.slice(pre, 0, 3 * h)?;
                let gates = tape.sigmoid(sig_part);
                let in_gate = tape.slice(gates, 0, h)?;
                let out_gate = tape.slice(gates, 2 * h, h)?;
                let cand_part = tape.slice(pre, 3 * h, h)?;
                let cand = tape.tanh(cand_part);
                let write = tape.mul(in_gate, cand)?;
                let c = match cell {
                    Some(cp) => {
                        let forget = tape.slice(gates, h, h)?;
                        let keep = tape.mul(forget, cp)?;
                        tape.add(keep, write)?
                    }
                    None => write,
                };
                let squashed = tape.tanh(c);
                let ht = tape.mul(out_gate, squashed)?;
                cell = Some(c);
                hidden = Some(ht);
                outputs.push(ht);
            }
            let stacked = tape.concat(&outputs)?;
            input = tape.reshape(stacked, vec![frames, h])?;
        }

        let n = v.len();
        let out = tape.matmul_nt(input, v[n - 2])?;
        let out = tape.add_row(out, v[n - 1])?;
        let out = tape.softplus(out);
        let gain = norms
            .iter()
            .flat_map(|n| std::iter::repeat_n(*n, feat))
            .collect();
        let gain = tape.constant(Tensor::matrix(frames, feat, gain)?);
        tape.mul(out, gain)
    }

    /// Writes the versioned binary checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        codec::put_u32(&mut w, CHECKPOINT_VERSION)?;
        codec::put_u32(&mut w, self.config.num_lstm_layers as u32)?;
        codec::put_u32(&mut w, self.config.hidden_dim as u32)?;
        codec::put_u32(&mut w, self.config.feature_dim as u32)?;
        codec::put_u64(&mut w, self.config.seed)?;
        codec::put_layout(&mut w, self.params.layout())?;
        codec::put_f64s(&mut w, self.params.values())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        codec::expect_magic(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let config = EnhancerConfig {
            num_lstm_layers: codec::get_u32(&mut r)? as usize,
            hidden_dim: codec::get_u32(&mut r)? as usize,
            feature_dim: codec::get_u32(&mut r)? as usize,
            seed: codec::get_u64(&mut r)?,
        };
        config.validate()?;
        let layout = codec::get_layout(&mut r)?;
        let expected = layout_for(&config);
        if layout != expected.layout() {
            return Err(Error::Checkpoint(
                "layout table does not match the stored config".into(),
            ));
        }
        let values = codec::get_f64s(&mut r, expected.len())?;
        Ok(Self {
            config,
            params: ParamVector::from_parts(layout, values)?,
        })
    }
}

impl Enhancer for EnhancerModel {
    fn enhance(&self, noisy_mag: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new(&self.params);
        let vars = self.register(&mut tape)?;
        let out = self.forward(&mut tape, &vars, noisy_mag)?;
        Ok(tape.value(out).clone())
    }
}
