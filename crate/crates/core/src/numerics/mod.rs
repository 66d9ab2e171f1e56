//! Dense double-precision matrices with a recording tape for reverse-mode
//! gradients, a constant sparse operand, Adam, and finite-difference checks.

mod gradcheck;
mod optim;
mod params;
mod sparse;
mod tape;

pub use gradcheck::{
    analytic_grads, gradcheck, relative_error, GradReport, ParamCheck, FD_STEP, REL_FLOOR,
};
pub use optim::Adam;
pub use params::{glorot_uniform, ParamId, ParamStore};
pub use sparse::Csr;
pub use tape::{sigmoid, Tape, Var};
