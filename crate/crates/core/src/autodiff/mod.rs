//! Dense tensors and a reverse-mode tape with a surrogate-gradient spike
//! primitive. This is the only numerical substrate the model and trainer use.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::finite_difference_check;
pub use tape::{Gradients, Tape, TapeMode, Var};
pub(crate) use tape::softplus as tape_softplus;
pub use tensor::Tensor;
