//! Benchmark objectives with analytic Euclidean gradients.

pub mod biquad;
pub mod cryoem;
pub mod hp1;
pub mod stability;

pub use biquad::{biquad_make, biquad_problem, BiquadCase, BiquadTensor};
pub use cryoem::{
    complete_all, complete_rotation, cryoem_generate, cryoem_problem, eigs_init, handedness_mse,
    procrustes_mse, CryoEmInstance,
};
pub use hp1::hp1_problem;
pub use stability::{parse_dimacs, stability_estimate, stability_problem, write_dimacs, Graph};
