//! Link prediction on dynamic networks with a deep dynamic network embedding
//! model, and time-aware gradient attacks against it.

pub mod attack;
pub mod ddne;
pub mod diffcomp;
pub mod dynnet;
pub mod evalharness;
pub mod par;
pub mod rng;

pub use par::Parallelism;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diff(#[from] diffcomp::DiffError),
    #[error(transparent)]
    Net(#[from] dynnet::NetError),
    #[error(transparent)]
    Model(#[from] ddne::ModelError),
    #[error(transparent)]
    Attack(#[from] attack::AttackError),
    #[error(transparent)]
    Eval(#[from] evalharness::EvalError),
}
