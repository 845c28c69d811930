//! Keyed random streams.
//!
//! A stream is identified by a base seed, a lane (what the numbers are for)
//! and a `(run, cycle, step)` key. Each distinct identity maps to its own
//! ChaCha8 generator, so draws never depend on scheduling order and
//! parallel repetitions stay reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::manifold::Matrix;

/// What a stream is used for. Keeps e.g. initial points and Brownian
/// increments of the same `(run, cycle, step)` independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lane {
    Brownian,
    InitialPoint,
    Instance,
    Auxiliary,
}

impl Lane {
    fn salt(self) -> u64 {
        match self {
            Lane::Brownian => 0x42_524f_574e,
            Lane::InitialPoint => 0x49_4e49_5450,
            Lane::Instance => 0x49_4e53_5441,
            Lane::Auxiliary => 0x41_5558_494c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub run: u64,
    pub cycle: u64,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub lane: Lane,
    pub key: StreamKey,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            lane: Lane::Brownian,
            key: StreamKey {
                run: 0,
                cycle: 0,
                step: 0,
            },
        }
    }

    pub fn lane(self, lane: Lane) -> Self {
        RngStream { lane, ..self }
    }

    pub fn run(mut self, run: u64) -> Self {
        self.key.run = run;
        self
    }

    pub fn cycle(mut self, cycle: u64) -> Self {
        self.key.cycle = cycle;
        self
    }

    pub fn step(mut self, step: u64) -> Self {
        self.key.step = step;
        self
    }

    /// The generator for this exact stream identity.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ self.lane.salt();
        let mut bytes = [0u8; 32];
        let words = [
            splitmix64(&mut state),
            {
                state ^= self.key.run.wrapping_mul(0xD6E8_FEB8_6659_FD93);
                splitmix64(&mut state)
            },
            {
                state ^= self.key.cycle.wrapping_mul(0xA076_1D64_78BD_642F);
                splitmix64(&mut state)
            },
            {
                state ^= self.key.step.wrapping_mul(0xE703_7ED1_A0B4_28DB);
                splitmix64(&mut state)
            },
        ];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }

    /// An `rows × cols` matrix of independent standard normals (ziggurat,
    /// exact distribution), filled in column-major order.
    pub fn standard_normal_matrix(&self, rows: usize, cols: usize) -> Matrix {
        let mut rng = self.generator();
        fill_standard_normal(&mut rng, rows, cols)
    }
}

pub(crate) fn fill_standard_normal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}
