//! Two-stage robust co-scheduling of production equipment and energy
//! dispatch under decision-dependent uncertainty.

pub mod ddccg;
pub mod ddu;
pub mod factory;
pub mod optkernel;
pub mod parallel;
pub mod scenario;

pub use parallel::Parallelism;
