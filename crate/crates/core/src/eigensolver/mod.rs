//! Symmetric eigensolvers.
//!
//! [`lowest_eigenpairs`] is a matrix-free Krylov-Schur (thick-restart Lanczos)
//! solver with full reorthogonalization. On large operators with a known
//! spectral upper bound it runs on a Chebyshev polynomial of the operator that
//! damps the unwanted part of the spectrum, and it finishes with a
//! Rayleigh-Ritz step on the original operator so that every reported
//! residual is an explicit `‖Av − λv‖`.
//!
//! [`dense_eigen`] diagonalizes a full symmetric matrix and serves as the
//! oracle for small instances.

mod dense;
mod krylov;

pub use dense::{dense_eigen, dense_eigen_with_cap, DenseOperator, DEFAULT_DENSE_CAP};
pub use krylov::{lowest_eigenpairs, lowest_eigenpairs_with, EigenOptions, FilterMode};

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative asymmetry accepted by [`check_symmetry`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A real symmetric operator known only through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// A guaranteed upper bound on the spectrum, if cheaply available.
    fn upper_bound(&self) -> Option<f64> {
        None
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn upper_bound(&self) -> Option<f64> {
        (**self).upper_bound()
    }
}

/// Eigenpairs in ascending order of eigenvalue.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Unit vectors in the Euclidean norm.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v_i − λ_i v_i‖` for each returned pair.
    pub residuals: Vec<f64>,
    /// False when the iteration budget ran out before every residual met the
    /// tolerance; the pairs are then the best available.
    pub converged: bool,
    /// Number of operator applications used.
    pub matvecs: usize,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn ensure_converged(self, tol: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { residual: self.max_residual(), tol })
        }
    }
}

/// Spot-checks `⟨x|Ay⟩ = ⟨Ax|y⟩` with two random probes and returns the
/// relative asymmetry. Fails with [`Error::NotSymmetric`] above
/// [`SYMMETRY_TOL`].
pub fn check_symmetry(op: &dyn LinearOperator, seed: u64) -> Result<f64> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    op.apply(&x, &mut ax);
    op.apply(&y, &mut ay);
    let lhs = dot(&x, &ay);
    let rhs = dot(&ax, &y);
    let scale = norm(&x) * norm(&ay) + norm(&ax) * norm(&y);
    let rel = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    if rel > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(rel));
    }
    Ok(rel)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}
