//! Minimal reverse-mode automatic differentiation in double precision.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::{finite_diff_check, relative_error, GradCheckConfig, GradCheckReport};
pub use params::{ParamSpec, ParamVector};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
