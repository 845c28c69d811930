//! Global optimization with orthogonality constraints by noisy gradient flow
//! on Stiefel manifolds.
//!
//! The crate is organised bottom-up:
//!
//! * [`manifold`]: Stiefel geometry under the canonical metric and the
//!   orthogonality-preserving Cayley update.
//! * [`sde`]: projected-noise SDE integrator, Brownian increments and
//!   diffusion schedules.
//! * [`local`]: curvilinear Barzilai–Borwein local solver and the
//!   random-restart baseline.
//! * [`iddm`]: the intermittent diminishing diffusion driver.
//! * [`problems`]: benchmark objectives (homogeneous polynomial,
//!   biquadratic, Motzkin–Straus stability number, cryo-EM common lines).
//! * [`verify`]: Monte-Carlo and oracle checks of the geometric and
//!   stochastic identities the integrator relies on.
//! * [`experiment`]: configuration, repetition sweeps and CSV/JSON output
//!   used by the `iddm` command line tool.
//!
//! Monte-Carlo loops and repetition sweeps run on rayon when the `parallel`
//! feature is enabled (the default) and sequentially otherwise. Both paths
//! produce bit-identical results; see [`par`].

pub mod error;
pub mod experiment;
pub mod iddm;
pub mod local;
pub mod manifold;
pub mod par;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod sde;
pub mod verify;

pub use error::{Error, Result};
pub use manifold::{Matrix, ProductPoint, StiefelPoint, TangentVector};
pub use problem::Problem;
pub use rng::RngStream;
