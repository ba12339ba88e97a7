use super::{EigenResult, LinearOperator};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest dimension accepted by [`dense_eigen`].
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Full spectrum of a symmetric matrix, ascending.
pub fn dense_eigen(matrix: &DMatrix<f64>) -> Result<EigenResult> {
    dense_eigen_with_cap(matrix, DEFAULT_DENSE_CAP)
}

pub fn dense_eigen_with_cap(matrix: &DMatrix<f64>, cap: usize) -> Result<EigenResult> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::ShapeMismatch { expected: n * n, actual: matrix.len() });
    }
    if n > cap {
        return Err(Error::DenseCapExceeded { dim: n, cap });
    }
    let asym = relative_asymmetry(matrix);
    if asym > super::SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(EigenResult {
            values: vec![],
            vectors: vec![],
            residuals: vec![],
            converged: true,
            matvecs: 0,
        });
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for &i in &order {
        let lam = eig.eigenvalues[i];
        let v: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let r = (matrix * &v - &v * lam).norm();
        values.push(lam);
        vectors.push(v.as_slice().to_vec());
        residuals.push(r);
    }
    Ok(EigenResult { values, vectors, residuals, converged: true, matvecs: 0 })
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// A dense symmetric matrix as a [`LinearOperator`].
#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    bound: f64,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::ShapeMismatch {
                expected: matrix.nrows() * matrix.nrows(),
                actual: matrix.len(),
            });
        }
        let asym = relative_asymmetry(&matrix);
        if asym > super::SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        // Gershgorin
        let bound = matrix
            .row_iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter().enumerate().map(|(j, &x)| if i == j { x } else { x.abs() }).sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { matrix, bound })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        y.iter_mut().for_each(|v| *v = 0.0);
        // column-major storage: accumulate columns
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj != 0.0 {
                let col = self.matrix.column(j);
                for (yi, &a) in y.iter_mut().zip(col.iter()) {
                    *yi += a * xj;
                }
            }
        }
    }

    fn upper_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}
