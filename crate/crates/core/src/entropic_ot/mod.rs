//! Entropic optimal transport on cell grids: Gibbs kernels, Sinkhorn
//! distances, the KL proximal operator of the free energy, and the Dykstra
//! solver for one JKO step.

mod dykstra;
mod kernel;
mod sinkhorn;

pub use dykstra::{dykstra_jko_step, kl_prox, DykstraOutcome, DykstraParams, ScalingState};
pub use kernel::{gibbs_kernel, GibbsKernel, Representation};
pub use sinkhorn::{sinkhorn_distance, sinkhorn_from, SinkhornSolution};
