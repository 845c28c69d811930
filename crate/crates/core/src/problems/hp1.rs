//! `F(x) = Σ x_i⁶ + Σ x_i³ x_{i+1}³` on the unit sphere.

use crate::error::{Error, Result};
use crate::manifold::Matrix;
use crate::problem::Problem;

pub struct Hp1 {
    dims: [(usize, usize); 1],
}

pub fn hp1_problem(n: usize) -> Result<Hp1> {
    if n < 2 {
        return Err(Error::config(format!("hp1 needs n >= 2, got {n}")));
    }
    Ok(Hp1 { dims: [(n, 1)] })
}

impl Problem for Hp1 {
    fn name(&self) -> &str {
        "hp1"
    }

    fn block_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        let x = blocks[0].as_slice();
        let sextic: f64 = x.iter().map(|v| v.powi(6)).sum();
        let cross: f64 = x.windows(2).map(|w| (w[0] * w[1]).powi(3)).sum();
        sextic + cross
    }

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix> {
        let x = blocks[0].as_slice();
        let n = x.len();
        let g = Matrix::from_fn(n, 1, |i, _| {
            let mut d = 6.0 * x[i].powi(5);
            if i + 1 < n {
                d += 3.0 * x[i] * x[i] * x[i + 1].powi(3);
            }
            if i > 0 {
                d += 3.0 * x[i - 1].powi(3) * x[i] * x[i];
            }
            d
        });
        vec![g]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_vector_and_uniform_point() {
        let p = hp1_problem(7).unwrap();
        let mut e1 = Matrix::zeros(7, 1);
        e1[0] = 1.0;
        assert_eq!(p.value(&[e1]), 1.0);
        let n = 7.0_f64;
        let u = Matrix::from_element(7, 1, 1.0 / n.sqrt());
        assert!((p.value(&[u]) - (2.0 * n - 1.0) / n.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn rejects_n_below_two() {
        assert!(hp1_problem(1).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = hp1_problem(5).unwrap();
        let x = Matrix::from_column_slice(5, 1, &[0.3, -0.5, 0.2, 0.6, -0.1]);
        let g = &p.euclidean_gradient(&[x.clone()])[0];
        let h = 1e-6;
        for i in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.value(&[xp]) - p.value(&[xm])) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-8 * (1.0 + g[i].abs()));
        }
    }
}
