//! Activations, losses, the two-layer student and multiple-index teachers.

mod activation;
mod loss;
mod net;
mod teacher;

pub use activation::{Activation, ActivationBounds};
pub use loss::{huber, Loss, LossEval, LossKind, LOGISTIC_SCALE};
pub use net::{init_student, init_symmetric, StudentNet};
pub use teacher::{Link, LinkFunction, Noise, Sample, TeacherModel};
