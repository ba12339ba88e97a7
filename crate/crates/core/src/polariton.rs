//! The explicit-polariton truncated basis: bare electronic eigenstates
//! `φ_n` (n ≤ n_max) times Fock states `|l⟩` (every mode occupation ≤ l_max).
//!
//! The coefficient matrix `c_{nl}` is stored flattened as
//! `m = n·(L + 1) + l`, with `L + 1` the number of retained Fock states
//! (`l_max + 1` for one mode).

use crate::eigensolver::{dense_eigen, lowest_eigenpairs_with, DenseOperator, EigenOptions};
use crate::electronic::ElectronicBasis;
use crate::photon::{build_coupling_table, CouplingTable, PhotonMode};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Above this dimension the polariton matrix is diagonalized with the
/// Krylov solver instead of a full dense decomposition.
const DENSE_LIMIT: usize = 4000;

/// Relative antisymmetry violation tolerated in the coupling inputs.
const ANTISYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PolaritonBasisSpec {
    /// Highest electronic index; `n_max + 1` states are kept.
    pub n_max: usize,
    /// Highest occupation of each mode.
    pub l_max: usize,
}

impl PolaritonBasisSpec {
    pub fn new(n_max: usize, l_max: usize) -> Self {
        Self { n_max, l_max }
    }

    pub fn electronic_count(&self) -> usize {
        self.n_max + 1
    }

    /// True when every basis function of `self` is also in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.n_max <= other.n_max && self.l_max <= other.l_max
    }
}

/// Retained Fock states of a coupling table, as table indices.
fn retained_fock(table: &CouplingTable, l_max: usize) -> Vec<usize> {
    (0..table.dim())
        .filter(|&f| (0..table.space.modes()).all(|a| table.space.occupation(f, a) <= l_max))
        .collect()
}

/// `n·(L + 1) + l` for the single-mode case (`L = l_max`).
pub fn flatten_index(n: usize, l: usize, spec: &PolaritonBasisSpec) -> Result<usize> {
    if n > spec.n_max || l > spec.l_max {
        return Err(Error::OutOfRange(format!(
            "(n, l) = ({n}, {l}) outside n_max = {}, l_max = {}",
            spec.n_max, spec.l_max
        )));
    }
    Ok(n * (spec.l_max + 1) + l)
}

/// Inverse of [`flatten_index`].
pub fn unflatten_index(m: usize, spec: &PolaritonBasisSpec) -> Result<(usize, usize)> {
    let (n, l) = (m / (spec.l_max + 1), m % (spec.l_max + 1));
    if n > spec.n_max {
        return Err(Error::OutOfRange(format!("flat index {m} out of range")));
    }
    Ok((n, l))
}

fn antisymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Assembles `M_{(j,l),(n,k)} = (E_n + ε_l) δ_jn δ_lk + ∇_e^{jn}·∇^{kl} − ½ δ_jn Δ^{kl}`.
///
/// Rejects momentum or photonic gradient matrices that are not
/// antisymmetric, since the result would not be symmetric.
pub fn assemble_polariton_matrix(
    basis: &ElectronicBasis,
    table: &CouplingTable,
    spec: &PolaritonBasisSpec,
) -> Result<DMatrix<f64>> {
    let ne = spec.electronic_count();
    if ne > basis.count {
        return Err(Error::OutOfRange(format!(
            "n_max = {} needs {ne} electronic states, basis has {}",
            spec.n_max, basis.count
        )));
    }
    if table.space.cutoffs().iter().any(|&c| c < spec.l_max) {
        return Err(Error::OutOfRange(format!(
            "l_max = {} exceeds the coupling-table cutoff",
            spec.l_max
        )));
    }
    let el = basis.elements()?;
    for c in 0..2 {
        let a = antisymmetry(&el.momentum[c]);
        if a > ANTISYMMETRY_TOL {
            return Err(Error::NotSymmetric(a));
        }
        let a = antisymmetry(&table.grad[c]);
        if a > ANTISYMMETRY_TOL {
            return Err(Error::NotSymmetric(a));
        }
    }
    let fock = retained_fock(table, spec.l_max);
    let nf = fock.len();
    let dim = ne * nf;
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..ne {
        for (li, &l) in fock.iter().enumerate() {
            let row = j * nf + li;
            for n in 0..ne {
                let ge = [el.momentum[0][(j, n)], el.momentum[1][(j, n)]];
                for (ki, &k) in fock.iter().enumerate() {
                    let col = n * nf + ki;
                    let mut v = ge[0] * table.grad[0][(k, l)] + ge[1] * table.grad[1][(k, l)];
                    if j == n {
                        v -= 0.5 * table.lap[(k, l)];
                        if l == k {
                            v += basis.energies[n] + table.photon_energies[l];
                        }
                    }
                    m[(row, col)] = v;
                }
            }
        }
    }
    // exact symmetry (the two triangles differ only by rounding)
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    Ok(m)
}

/// One eigenstate of the truncated problem.
#[derive(Clone, Debug)]
pub struct PolaritonState {
    pub energy: f64,
    /// `c[(n, l)]` over electronic index and retained Fock index.
    pub coeffs: DMatrix<f64>,
    pub spec: PolaritonBasisSpec,
    /// Occupations of each retained Fock index (one entry per mode).
    pub fock_occupations: Vec<Vec<usize>>,
}

impl PolaritonState {
    /// Flattened coefficients in basis order.
    pub fn flat_coeffs(&self) -> Vec<f64> {
        let (ne, nf) = self.coeffs.shape();
        (0..ne * nf).map(|m| self.coeffs[(m / nf, m % nf)]).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Weight outside the photon vacuum.
    pub fn photonic_weight(&self) -> f64 {
        let mut w = 0.0;
        for (l, occ) in self.fock_occupations.iter().enumerate() {
            if occ.iter().any(|&k| k > 0) {
                w += self.coeffs.column(l).iter().map(|c| c * c).sum::<f64>();
            }
        }
        w
    }
}

/// Lowest `k` polariton states.
pub fn solve_polariton(
    basis: &ElectronicBasis,
    table: &CouplingTable,
    spec: &PolaritonBasisSpec,
    k: usize,
) -> Result<Vec<PolaritonState>> {
    let m = assemble_polariton_matrix(basis, table, spec)?;
    let dim = m.nrows();
    if k == 0 || k > dim {
        return Err(Error::InvalidParameter(format!("cannot take {k} states of dimension {dim}")));
    }
    let eig = if dim <= DENSE_LIMIT {
        dense_eigen(&m)?
    } else {
        let mut opts = EigenOptions::new(k, 1e-11);
        opts.filter = crate::eigensolver::FilterMode::Never;
        lowest_eigenpairs_with(&DenseOperator::new(m)?, &opts)?.ensure_converged(1e-11)?
    };
    let fock = retained_fock(table, spec.l_max);
    let nf = fock.len();
    let ne = spec.electronic_count();
    let fock_occupations: Vec<Vec<usize>> =
        fock.iter().map(|&f| table.space.index(f).occupations).collect();
    Ok(eig
        .values
        .iter()
        .zip(&eig.vectors)
        .take(k)
        .map(|(&energy, v)| {
            let mut v = v.clone();
            fix_sign(&mut v);
            PolaritonState {
                energy,
                coeffs: DMatrix::from_fn(ne, nf, |n, l| v[n * nf + l]),
                spec: *spec,
                fock_occupations: fock_occupations.clone(),
            }
        })
        .collect())
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(x) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if *x < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// One line of a convergence scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub spec: PolaritonBasisSpec,
    pub lambda: f64,
    pub de01: f64,
    pub de13: f64,
    /// Ground-state occupation of mode 0.
    pub occupation: f64,
    /// Set when the row could not be computed; numeric fields are NaN.
    pub error: Option<String>,
}

/// Ground-state occupation `Σ_{n,l} c_{nl}² l_α` of `mode`.
pub fn polariton_occupation(state: &PolaritonState, mode: usize) -> f64 {
    let mut occ = 0.0;
    for (l, o) in state.fock_occupations.iter().enumerate() {
        let k = o.get(mode).copied().unwrap_or(0) as f64;
        if k > 0.0 {
            occ += k * state.coeffs.column(l).iter().map(|c| c * c).sum::<f64>();
        }
    }
    occ
}

/// Scans `(spec, λ)` pairs for a single mode of frequency `omega` and
/// polarization `polarization` (coupling vector `λ·polarization`).
/// Rows follow the order of `lambdas` (outer) and `specs` (inner).
pub fn convergence_scan(
    basis: &ElectronicBasis,
    omega: f64,
    polarization: [f64; 2],
    specs: &[PolaritonBasisSpec],
    lambdas: &[f64],
) -> Vec<ScanRow> {
    let mut rows = Vec::with_capacity(specs.len() * lambdas.len());
    for &lambda in lambdas {
        for spec in specs {
            let res = (|| -> Result<(f64, f64, f64)> {
                let mode =
                    PhotonMode::new(omega, [lambda * polarization[0], lambda * polarization[1]], spec.l_max)?;
                let table = build_coupling_table(&[mode]);
                let states = solve_polariton(basis, &table, spec, 4)?;
                Ok((
                    states[1].energy - states[0].energy,
                    states[3].energy - states[1].energy,
                    polariton_occupation(&states[0], 0),
                ))
            })();
            rows.push(match res {
                Ok((de01, de13, occupation)) => {
                    ScanRow { spec: *spec, lambda, de01, de13, occupation, error: None }
                }
                Err(e) => ScanRow {
                    spec: *spec,
                    lambda,
                    de01: f64::NAN,
                    de13: f64::NAN,
                    occupation: f64::NAN,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    rows
}
