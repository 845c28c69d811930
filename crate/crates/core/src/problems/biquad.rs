//! Biquadratic forms `b(x,y) = Σ b_ijkl x_i y_j x_k y_l` over two unit
//! spheres.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::Matrix;
use crate::problem::Problem;
use crate::rng::{Lane, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiquadCase {
    /// `b_ijkl = (−1)^{i+j+k+l} |c|`, `c` standard normal.
    Alternating,
    /// `b_ijkl = |c₁| 1{c₂ > η}`, `c₁` standard normal, `c₂` uniform.
    Sparse { eta: f64 },
}

impl BiquadCase {
    pub const DEFAULT_ETA: f64 = 0.5;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiquadTensor {
    n: usize,
    coef: Vec<f64>,
}

impl BiquadTensor {
    /// Builds a tensor from raw coefficients (index `((i·n+j)·n+k)·n+l`),
    /// symmetrizing them.
    pub fn from_raw(n: usize, coef: Vec<f64>) -> Result<Self> {
        if coef.len() != n.pow(4) {
            return Err(Error::Dimension {
                context: "biquad coefficients",
                expected: (n.pow(4), 1),
                actual: (coef.len(), 1),
            });
        }
        let mut t = BiquadTensor { n, coef };
        t.symmetrize();
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.coef[self.idx(i, j, k, l)]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Replaces every orbit `{(i,j,k,l),(k,j,i,l),(i,l,k,j),(k,l,i,j)}` by
    /// its mean. Each orbit is averaged once and written to all members,
    /// so the symmetry holds bit-for-bit.
    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let orbit = [(i, j, k, l), (k, j, i, l), (i, l, k, j), (k, l, i, j)];
                        if orbit.iter().any(|&o| o < (i, j, k, l)) {
                            continue;
                        }
                        let ids = orbit.map(|(a, b, c, d)| self.idx(a, b, c, d));
                        let mean = ids.iter().map(|&t| self.coef[t]).sum::<f64>() / 4.0;
                        for t in ids {
                            self.coef[t] = mean;
                        }
                    }
                }
            }
        }
    }

    /// `M(y)_{ik} = Σ_{jl} b_ijkl y_j y_l`, so that `b(x,y) = xᵀ M(y) x`.
    fn contract_y(&self, y: &[f64]) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |i, k| {
            let mut s = 0.0;
            for j in 0..n {
                for l in 0..n {
                    s += self.get(i, j, k, l) * y[j] * y[l];
                }
            }
            s
        })
    }

    /// `N(x)_{jl} = Σ_{ik} b_ijkl x_i x_k`, so that `b(x,y) = yᵀ N(x) y`.
    fn contract_x(&self, x: &[f64]) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |j, l| {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += self.get(i, j, k, l) * x[i] * x[k];
                }
            }
            s
        })
    }
}

pub fn biquad_make(n: usize, case: BiquadCase, rng: &RngStream) -> Result<BiquadTensor> {
    if n < 2 {
        return Err(Error::config(format!("biquad needs n >= 2, got {n}")));
    }
    if let BiquadCase::Sparse { eta } = case {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::config(format!("biquad eta must be in (0,1), got {eta}")));
        }
    }
    let mut g = rng.lane(Lane::Instance).generator();
    let mut coef = Vec::with_capacity(n.pow(4));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c: f64 = g.sample::<f64, _>(StandardNormal).abs();
                    let v = match case {
                        BiquadCase::Alternating => {
                            if (i + j + k + l) % 2 == 0 {
                                c
                            } else {
                                -c
                            }
                        }
                        BiquadCase::Sparse { eta } => {
                            if g.random::<f64>() > eta {
                                c
                            } else {
                                0.0
                            }
                        }
                    };
                    coef.push(v);
                }
            }
        }
    }
    BiquadTensor::from_raw(n, coef)
}

pub struct Biquad {
    tensor: BiquadTensor,
    dims: [(usize, usize); 2],
}

pub fn biquad_problem(tensor: BiquadTensor) -> Biquad {
    let n = tensor.n;
    Biquad {
        tensor,
        dims: [(n, 1), (n, 1)],
    }
}

impl Biquad {
    pub fn tensor(&self) -> &BiquadTensor {
        &self.tensor
    }
}

impl Problem for Biquad {
    fn name(&self) -> &str {
        "biquad"
    }

    fn block_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        let m = self.tensor.contract_y(blocks[1].as_slice());
        blocks[0].dot(&(&m * &blocks[0]))
    }

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix> {
        self.value_and_gradient(blocks).1
    }

    fn value_and_gradient(&self, blocks: &[Matrix]) -> (f64, Vec<Matrix>) {
        let (x, y) = (&blocks[0], &blocks[1]);
        let mx = &self.tensor.contract_y(y.as_slice()) * x;
        let ny = &self.tensor.contract_x(x.as_slice()) * y;
        (x.dot(&mx), vec![mx * 2.0, ny * 2.0])
    }
}
