//! The objective interface shared by the solvers.

use crate::manifold::{Matrix, ProductPoint};

/// An objective over a product of Stiefel blocks.
///
/// Both callbacks receive the block matrices of a [`ProductPoint`] (see
/// [`ProductPoint::blocks`]) and are evaluated on the ambient space, so the
/// gradient is the plain partial derivative `∂F/∂X_b` of each block. Finite
/// difference checks rely on this and step off the manifold.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// `(n_i, p_i)` of every block, in order.
    fn block_dims(&self) -> &[(usize, usize)];

    fn value(&self, blocks: &[Matrix]) -> f64;

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix>;

    fn value_and_gradient(&self, blocks: &[Matrix]) -> (f64, Vec<Matrix>) {
        (self.value(blocks), self.euclidean_gradient(blocks))
    }

    fn value_of(&self, x: &ProductPoint) -> f64 {
        self.value(x.blocks())
    }
}

type ValueFn = dyn Fn(&[Matrix]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[Matrix]) -> Vec<Matrix> + Send + Sync;

/// A problem assembled from closures.
pub struct FnProblem {
    name: String,
    dims: Vec<(usize, usize)>,
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl FnProblem {
    pub fn new(
        name: impl Into<String>,
        dims: Vec<(usize, usize)>,
        value: impl Fn(&[Matrix]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[Matrix]) -> Vec<Matrix> + Send + Sync + 'static,
    ) -> Self {
        FnProblem {
            name: name.into(),
            dims,
            value: Box::new(value),
            grad: Box::new(grad),
        }
    }

    /// `F ≡ 0` on the given blocks.
    pub fn zero(dims: Vec<(usize, usize)>) -> Self {
        let d = dims.clone();
        FnProblem::new(
            "zero",
            dims,
            |_| 0.0,
            move |_| d.iter().map(|&(n, p)| Matrix::zeros(n, p)).collect(),
        )
    }

    /// Single-block Rayleigh quotient `xᵀ diag(d) x` on the sphere.
    pub fn rayleigh(diag: Vec<f64>) -> Self {
        let n = diag.len();
        let d2 = diag.clone();
        FnProblem::new(
            "rayleigh",
            vec![(n, 1)],
            move |b| (0..n).map(|i| diag[i] * b[0][i] * b[0][i]).sum(),
            move |b| vec![Matrix::from_fn(n, 1, |i, _| 2.0 * d2[i] * b[0][i])],
        )
    }

    /// Single-block linear objective `tr(CᵀX)`.
    pub fn linear(c: Matrix) -> Self {
        let dims = vec![c.shape()];
        let c2 = c.clone();
        FnProblem::new(
            "linear",
            dims,
            move |b| c.dot(&b[0]),
            move |_| vec![c2.clone()],
        )
    }
}

impl Problem for FnProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn block_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        (self.value)(blocks)
    }

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix> {
        (self.grad)(blocks)
    }
}
