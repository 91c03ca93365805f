//! Almost-sure couplings of weakly convergent laws on finite metric spaces.
//!
//! Given a limit law `P∞` and a family `P_1, …, P_N` on a finite metric space,
//! the crate builds a nested partition of the space into P∞-continuity cells,
//! a single probability measure ν on `S × S^N` whose coordinate laws are
//! `P∞, P_1, …, P_N`, and exact and Monte Carlo checks of the resulting
//! coupling. A real-line module covers the quantile coupling `F_n^{-1}(U)`.
//!
//! | module | contents |
//! |---|---|
//! | [`metric`] | spaces, measures, balls, total variation, conditioning |
//! | [`partition`] | the nested continuity partition tree |
//! | [`coupling`] | ratio tables, ℓ(α), remainder measures, kernels, ν |
//! | [`quantile`] | step CDFs, generalized inverse, quantile coupling |
//! | [`verification`] | marginal, event-bound and tail checks, DKW |
//! | [`instance`], [`cli`] | file formats and the `skorohod` binary |

pub mod cli;
pub mod coupling;
pub mod error;
pub mod instance;
pub mod metric;
pub mod partition;
pub mod quantile;
pub mod verification;

pub use coupling::{build_plan, BetaSchedule, CoupledSample, CouplingPlan, Ell};
pub use error::{Error, Result};
pub use metric::{DiscreteMeasure, FiniteMetricSpace, PointSet};
pub use partition::{build_partition_tree, PartitionTree};
pub use quantile::StepCdf;
