//! Bare single-electron eigenstates and their matrix elements.

use crate::eigensolver::{lowest_eigenpairs_with, EigenOptions, LinearOperator};
use crate::grid::{gradient_accumulate, Grid2D, GridHamiltonian};
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use std::ops::Range;

/// Energies closer than this are treated as one degenerate multiplet.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Default residual tolerance for bare eigenpairs.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Unit vector along the diagonal, the benchmark polarization direction.
pub const DIAGONAL: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Matrix elements between basis orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct MatterElements {
    /// Unit direction used for `dipole_sq`.
    pub direction: [f64; 2],
    /// `⟨φ_j|∂_x|φ_n⟩`, `⟨φ_j|∂_y|φ_n⟩`; antisymmetric.
    pub momentum: [DMatrix<f64>; 2],
    /// `⟨φ_j|x|φ_n⟩`, `⟨φ_j|y|φ_n⟩`; symmetric.
    pub dipole: [DMatrix<f64>; 2],
    /// `⟨φ_j|(e·r)²|φ_n⟩`.
    pub dipole_sq: DMatrix<f64>,
}

impl MatterElements {
    /// `⟨φ_j|v·∇|φ_n⟩`.
    pub fn momentum_along(&self, v: [f64; 2]) -> DMatrix<f64> {
        &self.momentum[0] * v[0] + &self.momentum[1] * v[1]
    }

    /// `⟨φ_j|v·r|φ_n⟩`.
    pub fn dipole_along(&self, v: [f64; 2]) -> DMatrix<f64> {
        &self.dipole[0] * v[0] + &self.dipole[1] * v[1]
    }
}

/// The lowest bare eigenstates on a grid, orbitals normalized so that
/// `Σ φ_j φ_n dx^d = δ_jn`.
#[derive(Clone, Debug)]
pub struct ElectronicBasis {
    pub grid: Grid2D,
    pub count: usize,
    pub energies: Vec<f64>,
    pub orbitals: Vec<Vec<f64>>,
    /// Grid-norm residuals `‖Hφ − Eφ‖`.
    pub residuals: Vec<f64>,
    pub elements: Option<MatterElements>,
}

impl ElectronicBasis {
    /// Builds a basis from given orbitals, checking shapes and orthonormality.
    pub fn from_parts(grid: Grid2D, energies: Vec<f64>, orbitals: Vec<Vec<f64>>) -> Result<Self> {
        if energies.len() != orbitals.len() {
            return Err(Error::ShapeMismatch { expected: energies.len(), actual: orbitals.len() });
        }
        for o in &orbitals {
            if o.len() != grid.len() {
                return Err(Error::ShapeMismatch { expected: grid.len(), actual: o.len() });
            }
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("energies must be nondecreasing".into()));
        }
        let count = energies.len();
        let residuals = vec![0.0; count];
        let basis = Self { grid, count, energies, orbitals, residuals, elements: None };
        let err = basis.orthonormality_error();
        if err > 1e-10 {
            return Err(Error::InvalidParameter(format!("orbitals not orthonormal (error {err:.2e})")));
        }
        Ok(basis)
    }

    /// Largest deviation of the overlap matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.count {
            for n in 0..=j {
                let s = self.grid.dot(&self.orbitals[j], &self.orbitals[n]);
                let target = if j == n { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    pub fn gap(&self) -> Option<f64> {
        (self.count > 1).then(|| self.energies[1] - self.energies[0])
    }

    /// Index ranges of degenerate multiplets (singletons included).
    pub fn multiplets(&self) -> Vec<Range<usize>> {
        multiplets(&self.energies, DEGENERACY_TOL)
    }

    /// Keeps the first `count` states. Matrix elements are truncated too.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.count {
            return Err(Error::OutOfRange(format!("cannot keep {count} of {} states", self.count)));
        }
        let sub = |m: &DMatrix<f64>| m.view((0, 0), (count, count)).into_owned();
        Ok(Self {
            grid: self.grid.clone(),
            count,
            energies: self.energies[..count].to_vec(),
            orbitals: self.orbitals[..count].to_vec(),
            residuals: self.residuals[..count].to_vec(),
            elements: self.elements.as_ref().map(|e| MatterElements {
                direction: e.direction,
                momentum: [sub(&e.momentum[0]), sub(&e.momentum[1])],
                dipole: [sub(&e.dipole[0]), sub(&e.dipole[1])],
                dipole_sq: sub(&e.dipole_sq),
            }),
        })
    }

    /// Applies the rotation `[[c, −s], [s, c]]` to orbitals `i` and `j`.
    /// Matrix elements, if present, are dropped and must be recomputed.
    pub fn rotate_pair(&mut self, i: usize, j: usize, angle: f64) -> Result<()> {
        if i >= self.count || j >= self.count || i == j {
            return Err(Error::OutOfRange(format!("bad pair ({i}, {j})")));
        }
        let (s, c) = angle.sin_cos();
        let (a, b) = (self.orbitals[i].clone(), self.orbitals[j].clone());
        self.orbitals[i] = a.iter().zip(&b).map(|(x, y)| c * x - s * y).collect();
        self.orbitals[j] = a.iter().zip(&b).map(|(x, y)| s * x + c * y).collect();
        self.elements = None;
        Ok(())
    }

    pub fn elements(&self) -> Result<&MatterElements> {
        self.elements
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("matter elements not computed".into()))
    }
}

/// Splits a sorted spectrum into runs whose neighbours differ by at most `tol`.
pub fn multiplets(energies: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i == energies.len() || energies[i] - energies[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// The `k` lowest eigenpairs of `−½∇² + V`, extended so that no degenerate
/// multiplet is cut, with the gauge of each multiplet fixed along the
/// diagonal.
pub fn solve_electronic(grid: &Grid2D, potential: &[f64], k: usize, tol: f64) -> Result<ElectronicBasis> {
    solve_electronic_with(grid, potential, k, tol, DIAGONAL, 0)
}

pub fn solve_electronic_with(
    grid: &Grid2D,
    potential: &[f64],
    k: usize,
    tol: f64,
    gauge_direction: [f64; 2],
    seed: u64,
) -> Result<ElectronicBasis> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one state".into()));
    }
    if k + 2 >= grid.len() {
        return Err(Error::InvalidParameter(format!(
            "{k} states requested on a grid of {} points",
            grid.len()
        )));
    }
    let op = GridHamiltonian::new(grid, potential)?;
    let w = grid.weight();
    // Euclidean residual of the unit vector equals the grid-norm residual
    // of the normalized orbital.
    let mut request = k + 2;
    loop {
        let mut opts = EigenOptions::new(request.min(op.dim() - 1), tol);
        opts.seed = seed;
        let res = lowest_eigenpairs_with(&op, &opts)?.ensure_converged(tol)?;
        let mut count = k;
        while count < res.values.len()
            && res.values[count] - res.values[count - 1] <= DEGENERACY_TOL
        {
            count += 1;
        }
        if count == res.values.len() && request + 1 < op.dim() {
            request += 4;
            continue;
        }
        let inv = 1.0 / w.sqrt();
        let orbitals: Vec<Vec<f64>> = res.vectors[..count]
            .iter()
            .map(|v| v.iter().map(|x| x * inv).collect())
            .collect();
        let mut basis = ElectronicBasis {
            grid: grid.clone(),
            count,
            energies: res.values[..count].to_vec(),
            orbitals,
            residuals: res.residuals[..count].to_vec(),
            elements: None,
        };
        fix_gauge(&mut basis, gauge_direction);
        return Ok(basis);
    }
}

/// Within each multiplet, rotate to the eigenvectors of `(e·r)²` restricted
/// to the multiplet (ascending). When that matrix is itself degenerate,
/// fall back to pivoting on the multiplet density. Finally every orbital
/// is made positive at its first near-maximal grid point.
fn fix_gauge(basis: &mut ElectronicBasis, e: [f64; 2]) {
    let grid = basis.grid.clone();
    let proj = grid.projection(e);
    let proj_sq: Vec<f64> = proj.iter().map(|p| p * p).collect();
    for mult in basis.multiplets() {
        let s = mult.len();
        if s < 2 {
            continue;
        }
        let phis: Vec<&Vec<f64>> = basis.orbitals[mult.clone()].iter().collect();
        let m = DMatrix::from_fn(s, s, |i, j| {
            phis[i].iter().zip(phis[j]).zip(&proj_sq).map(|((a, b), p)| a * b * p).sum::<f64>()
                * grid.weight()
        });
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        let separated =
            order.windows(2).all(|w| eig.eigenvalues[w[1]] - eig.eigenvalues[w[0]] > 1e-8 * scale);
        let coeffs = if separated {
            DMatrix::from_fn(s, s, |r, c| eig.eigenvectors[(r, order[c])])
        } else {
            pivot_gauge(&phis)
        };
        let rotated: Vec<Vec<f64>> = (0..s)
            .map(|c| {
                let mut out = vec![0.0; grid.len()];
                for (r, phi) in phis.iter().enumerate() {
                    let w = coeffs[(r, c)];
                    for (o, x) in out.iter_mut().zip(phi.iter()) {
                        *o += w * x;
                    }
                }
                out
            })
            .collect();
        for (i, v) in mult.zip(rotated) {
            basis.orbitals[i] = v;
        }
    }
    for phi in &mut basis.orbitals {
        fix_sign(phi);
    }
}

/// Orthonormal coefficient columns chosen greedily: each new member takes
/// all the remaining weight at the point of largest remaining density.
fn pivot_gauge(phis: &[&Vec<f64>]) -> DMatrix<f64> {
    let s = phis.len();
    let npts = phis[0].len();
    // q: current orthonormal basis of the remaining coefficient subspace
    let mut q = DMatrix::<f64>::identity(s, s);
    let mut out = DMatrix::<f64>::zeros(s, s);
    for t in 0..s {
        let r = s - t;
        let value = |x: usize, c: usize| (0..s).map(|j| phis[j][x] * q[(j, c)]).sum::<f64>();
        let dens: Vec<f64> = (0..npts).map(|x| (0..r).map(|c| value(x, c).powi(2)).sum()).collect();
        let dmax = dens.iter().cloned().fold(0.0, f64::max);
        let x0 = dens.iter().position(|&d| d >= dmax * (1.0 - 1e-9)).unwrap_or(0);
        let g: Vec<f64> = (0..r).map(|c| value(x0, c)).collect();
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = (0..s).map(|j| (0..r).map(|c| q[(j, c)] * g[c] / gn).sum()).collect();
        for j in 0..s {
            out[(j, t)] = u[j];
        }
        // remaining subspace: complement of u inside span(q)
        let mut rest: Vec<Vec<f64>> = Vec::new();
        for c in 0..r {
            let mut v: Vec<f64> = (0..s).map(|j| q[(j, c)]).collect();
            for b in std::iter::once(&u).chain(rest.iter()) {
                let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
            }
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv > 1e-8 && rest.len() < r - 1 {
                v.iter_mut().for_each(|a| *a /= nv);
                rest.push(v);
            }
        }
        let mut nq = DMatrix::<f64>::zeros(s, s);
        for (c, v) in rest.iter().enumerate() {
            for j in 0..s {
                nq[(j, c)] = v[j];
            }
        }
        q = nq;
    }
    out
}

fn fix_sign(phi: &mut [f64]) {
    let max = phi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(x) = phi.iter().find(|x| x.abs() >= max * (1.0 - 1e-6)) {
        if *x < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Computes `⟨φ_j|∇|φ_n⟩` (fourth-order differences), `⟨φ_j|r|φ_n⟩` and
/// `⟨φ_j|(e·r)²|φ_n⟩` by grid quadrature. `direction` is normalized here.
pub fn matter_elements(mut basis: ElectronicBasis, direction: [f64; 2]) -> Result<ElectronicBasis> {
    let len = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !(len > 0.0) {
        return Err(Error::InvalidParameter("direction must be non-zero".into()));
    }
    let e = [direction[0] / len, direction[1] / len];
    let grid = &basis.grid;
    let n = basis.count;
    let pts: Vec<[f64; 2]> = grid.points().collect();
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let ers: Vec<f64> = pts.iter().map(|p| (e[0] * p[0] + e[1] * p[1]).powi(2)).collect();

    let mut grad = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut dip = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut dsq = DMatrix::zeros(n, n);
    let mut buf = vec![0.0; grid.len()];
    for col in 0..n {
        let phi = &basis.orbitals[col];
        for (axis, g) in grad.iter_mut().enumerate() {
            if axis == 1 && grid.is_line() {
                continue;
            }
            buf.iter_mut().for_each(|v| *v = 0.0);
            let dir = if axis == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            gradient_accumulate(grid, dir, phi, &mut buf, 1.0);
            for row in 0..n {
                g[(row, col)] = grid.dot(&basis.orbitals[row], &buf);
            }
        }
        for row in 0..=col {
            let psi = &basis.orbitals[row];
            let w = grid.weight();
            let (mut sx, mut sy, mut sq) = (0.0, 0.0, 0.0);
            for i in 0..grid.len() {
                let pp = psi[i] * phi[i];
                sx += pp * xs[i];
                sy += pp * ys[i];
                sq += pp * ers[i];
            }
            let [dx_m, dy_m] = &mut dip;
            for (m, v) in [(dx_m, sx), (dy_m, sy), (&mut dsq, sq)] {
                m[(row, col)] = v * w;
                m[(col, row)] = v * w;
            }
        }
    }
    // The difference stencil is exactly antisymmetric; remove rounding.
    for g in &mut grad {
        *g = (&*g - g.transpose()) * 0.5;
    }
    basis.elements = Some(MatterElements { direction: e, momentum: grad, dipole: dip, dipole_sq: dsq });
    Ok(basis)
}
