//! Single-resource admission control with heterogeneous no-shows.
//!
//! Customers of `k` types arrive one per period over a horizon of `T`
//! periods. Each accepted customer pays `v_j` up front and later shows up
//! with probability `p_j`; every unit of demand that cannot be served by the
//! capacity `B` costs one unit of compensation. The crate provides:
//!
//! * [`instance`]: instances, canonical critical-ratio ordering, arrivals;
//! * [`pbin`]: exact (weighted) Poisson-binomial laws and overage;
//! * [`offline`]: clairvoyant solvers and local-optimality checks;
//! * [`policies`]: the online index policy and the LP / DP baselines;
//! * [`sim`]: sampling, scoring, coupling diagnostics and replications.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix it
//! to `f64` (or `f32` with the `F32` suffix).

mod error;
mod num;

pub mod instance;
pub mod offline;
pub mod pbin;
pub mod policies;
pub mod sim;

pub use error::{Error, Result};
pub use instance::{AcceptanceVector, ArrivalSequence};
pub use num::Scalar;

pub type Instance = instance::Instance<f64>;
pub type InstanceSpec = instance::InstanceSpec<f64>;
pub type CountDistribution = pbin::CountDistribution<f64>;
pub type DistributionCache = pbin::DistributionCache<f64>;
pub type SolveContext<'a> = offline::SolveContext<'a, f64>;
pub type DpdTable = policies::DpdTable<f64>;

pub type InstanceF32 = instance::Instance<f32>;
pub type InstanceSpecF32 = instance::InstanceSpec<f32>;
pub type CountDistributionF32 = pbin::CountDistribution<f32>;
pub type DistributionCacheF32 = pbin::DistributionCache<f32>;
pub type SolveContextF32<'a> = offline::SolveContext<'a, f32>;
pub type DpdTableF32 = policies::DpdTable<f32>;
