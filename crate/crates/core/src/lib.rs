//! Tensor-train operator inference.

pub mod cross;
pub mod error;
pub mod fullorder;
pub mod harness;
pub mod integrate;
pub mod linalg;
pub mod lstsq;
pub mod pde;
pub mod rom;
pub mod snapshot;
pub mod tensor;
pub mod tt;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
pub use tt::{quantize, Core, FactorPolicy, TruncationTol, TtTensor};
pub use cross::{tt_cross, CrossConfig, CrossResult, CrossStatus, EntryOracle, FnOracle};
pub use fullorder::{FullOperators, OperatorTensor12, QuadraticMethod};
pub use harness::{run, run_or_fail, Method, Metric, Problem, RunConfig, RunOutcome, RunReport};
pub use integrate::{rk45, IntegratorConfig, RoundingMode, Trajectory};
pub use lstsq::{tt_ls_solve, tt_pinv, TtPinvResult};
pub use pde::{GridSpec, InitialCondition, PdeKind, PdeProblem};
pub use rom::{PodBasis, ReducedOperators, Regularization, SnapshotMatrix, Stencil, TtRomBasis, TtRomModel};
pub use snapshot::{Layout, SnapshotSet};
