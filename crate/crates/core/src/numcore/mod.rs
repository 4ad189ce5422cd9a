//! Dense tensors, seeded randomness, reverse-mode differentiation and the
//! finite-difference gradient check every differentiable piece of the
//! crate is tested against.

mod gradcheck;
mod optim;
mod parallel;
mod params;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, rel_err, GradCheckReport};
pub use optim::Adam;
pub use parallel::{par_map, worker_threads};
pub use params::{seeded_init, Bound, InitScheme, Params};
pub use rng::{Rng, RNG_ALGORITHM};
pub use tape::{sigmoid, Adjacency, Grads, Tape, Var};
pub use tensor::{exact_sum, logsumexp, lse_iter, Tensor};
