//! Photon modes, Fock multi-indices, ladder operators and the analytic
//! photonic coupling elements.
//!
//! Fock multi-indices are flattened row-major: mode 0 varies slowest. For a
//! single mode the flat index is the occupation itself.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// One cavity mode in the long-wavelength limit.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonMode {
    pub omega: f64,
    /// Coupling strength times polarization, `λ_α e_α`.
    pub lambda_vec: [f64; 2],
    /// Highest retained occupation.
    pub cutoff: usize,
}

impl PhotonMode {
    pub fn new(omega: f64, lambda_vec: [f64; 2], cutoff: usize) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("mode frequency must be positive, got {omega}")));
        }
        if !lambda_vec.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("coupling vector must be finite".into()));
        }
        Ok(Self { omega, lambda_vec, cutoff })
    }

    /// `λ(e_x + e_y)`, the diagonal polarization of the ring benchmark.
    pub fn diagonal(omega: f64, lambda: f64, cutoff: usize) -> Result<Self> {
        Self::new(omega, [lambda, lambda], cutoff)
    }

    pub fn lambda_sq(&self) -> f64 {
        self.lambda_vec[0].powi(2) + self.lambda_vec[1].powi(2)
    }

    /// `λ/√(2ω)` as a 2-vector.
    pub fn scaled_lambda(&self) -> [f64; 2] {
        let s = 1.0 / (2.0 * self.omega).sqrt();
        [self.lambda_vec[0] * s, self.lambda_vec[1] * s]
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self { cutoff, ..self.clone() }
    }
}

/// Occupation numbers, one per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FockIndex {
    pub occupations: Vec<usize>,
}

impl FockIndex {
    pub fn new(occupations: Vec<usize>) -> Self {
        Self { occupations }
    }

    pub fn total(&self) -> usize {
        self.occupations.iter().sum()
    }
}

/// The truncated product Fock space of a set of modes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl FockSpace {
    pub fn new(cutoffs: &[usize]) -> Self {
        let mut strides = vec![1; cutoffs.len()];
        for a in (0..cutoffs.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * (cutoffs[a + 1] + 1);
        }
        let len = cutoffs.iter().map(|c| c + 1).product();
        Self { cutoffs: cutoffs.to_vec(), strides, len }
    }

    pub fn for_modes(modes: &[PhotonMode]) -> Self {
        Self::new(&modes.iter().map(|m| m.cutoff).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    pub fn flat(&self, index: &FockIndex) -> Result<usize> {
        if index.occupations.len() != self.cutoffs.len() {
            return Err(Error::ShapeMismatch {
                expected: self.cutoffs.len(),
                actual: index.occupations.len(),
            });
        }
        let mut f = 0;
        for (a, (&k, &c)) in index.occupations.iter().zip(&self.cutoffs).enumerate() {
            if k > c {
                return Err(Error::OutOfRange(format!("occupation {k} of mode {a} exceeds cutoff {c}")));
            }
            f += k * self.strides[a];
        }
        Ok(f)
    }

    pub fn index(&self, flat: usize) -> FockIndex {
        FockIndex::new(self.occupation_list(flat))
    }

    fn occupation_list(&self, flat: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.cutoffs).map(|(&s, &c)| (flat / s) % (c + 1)).collect()
    }

    /// Occupation of `mode` in flat state `flat`.
    pub fn occupation(&self, flat: usize, mode: usize) -> usize {
        (flat / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }
}

/// `Σ_α ω_α (k_α + ½)`.
pub fn photon_energy(index: &FockIndex, modes: &[PhotonMode]) -> Result<f64> {
    if index.occupations.len() != modes.len() {
        return Err(Error::ShapeMismatch { expected: modes.len(), actual: index.occupations.len() });
    }
    Ok(index.occupations.iter().zip(modes).map(|(&k, m)| m.omega * (k as f64 + 0.5)).sum())
}

/// Photonic coupling elements over a truncated Fock space.
///
/// `grad[c][(l, k)]` is component `c` of `∇^{lk} = −Σ_α (λ_α/√(2ω_α)) ⟨l|a_α† − a_α|k⟩`
/// and `lap[(l, k)]` is `Δ^{lk}`: the analytic single-mode terms
/// `(λ_α·λ_α/(2ω_α)) ⟨l|a_α†² + a_α² − (2a_α†a_α + 1)|k⟩` plus the cross-mode
/// products `Σ_{α≠β} ∇^α·∇^β`.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    pub space: FockSpace,
    pub grad: [DMatrix<f64>; 2],
    pub lap: DMatrix<f64>,
    pub photon_energies: Vec<f64>,
}

impl CouplingTable {
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    /// `Σ_c v_c ∇^{lk}_c`.
    pub fn grad_along(&self, v: [f64; 2]) -> DMatrix<f64> {
        &self.grad[0] * v[0] + &self.grad[1] * v[1]
    }
}

/// `⟨l|a† − a|k⟩` for one mode with cutoff `c`.
fn single_mode_a(c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(c + 1, c + 1, |l, k| {
        if l == k + 1 {
            ((k + 1) as f64).sqrt()
        } else if l + 1 == k {
            -(k as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// `⟨l|a†² + a² − (2a†a + 1)|k⟩` for one mode, analytic (no truncation).
fn single_mode_a_sq(c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(c + 1, c + 1, |l, k| {
        let kf = k as f64;
        if l == k {
            -(2.0 * kf + 1.0)
        } else if l == k + 2 {
            ((kf + 1.0) * (kf + 2.0)).sqrt()
        } else if l + 2 == k {
            (kf * (kf - 1.0)).sqrt()
        } else {
            0.0
        }
    })
}

/// Embeds a single-mode matrix acting on `mode` into the product space.
fn embed(space: &FockSpace, mode: usize, single: &DMatrix<f64>) -> DMatrix<f64> {
    let n = space.len();
    let mut out = DMatrix::zeros(n, n);
    let stride = space.stride(mode);
    for k in 0..n {
        let kk = space.occupation(k, mode);
        let base = k - kk * stride;
        for ll in 0..single.nrows() {
            let v = single[(ll, kk)];
            if v != 0.0 {
                out[(base + ll * stride, k)] = v;
            }
        }
    }
    out
}

pub fn build_coupling_table(modes: &[PhotonMode]) -> CouplingTable {
    let space = FockSpace::for_modes(modes);
    let n = space.len();
    let mut grad = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut lap = DMatrix::zeros(n, n);
    let mut per_mode = Vec::with_capacity(modes.len());
    for (a, m) in modes.iter().enumerate() {
        let s = m.scaled_lambda();
        let amat = embed(&space, a, &single_mode_a(m.cutoff));
        grad[0] -= &amat * s[0];
        grad[1] -= &amat * s[1];
        lap += embed(&space, a, &single_mode_a_sq(m.cutoff)) * (m.lambda_sq() / (2.0 * m.omega));
        per_mode.push((s, amat));
    }
    for (a, (sa, aa)) in per_mode.iter().enumerate() {
        for (b, (sb, ab)) in per_mode.iter().enumerate() {
            if a != b {
                // ∇^α·∇^β = (s_α·s_β) A_α A_β
                let c = sa[0] * sb[0] + sa[1] * sb[1];
                lap += aa * ab * c;
            }
        }
    }
    let photon_energies = (0..n)
        .map(|f| {
            modes.iter().enumerate().map(|(a, m)| m.omega * (space.occupation(f, a) as f64 + 0.5)).sum()
        })
        .collect();
    CouplingTable { space, grad, lap, photon_energies }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
    Number,
}

/// Result of a ladder operation: the new state and the squared norm of the
/// component raised beyond the cutoff and dropped.
#[derive(Clone, Debug)]
pub struct LadderOutput {
    pub state: Vec<f64>,
    pub truncated_norm_sq: f64,
}

/// Applies `a†`, `a` or `a†a` of `mode` to a state over the Fock space.
pub fn ladder_apply(kind: Ladder, mode: usize, space: &FockSpace, state: &[f64]) -> Result<LadderOutput> {
    ladder_apply_blocks(kind, mode, space, state, 1)
}

/// As [`ladder_apply`] for a state stored as `space.len()` consecutive
/// blocks of `block` amplitudes each (e.g. one grid-function per Fock state).
pub fn ladder_apply_blocks(
    kind: Ladder,
    mode: usize,
    space: &FockSpace,
    state: &[f64],
    block: usize,
) -> Result<LadderOutput> {
    if mode >= space.modes() {
        return Err(Error::OutOfRange(format!("mode {mode} of {}", space.modes())));
    }
    if state.len() != space.len() * block {
        return Err(Error::ShapeMismatch { expected: space.len() * block, actual: state.len() });
    }
    let mut out = vec![0.0; state.len()];
    let mut lost = 0.0;
    let stride = space.stride(mode);
    let cut = space.cutoffs()[mode];
    for f in 0..space.len() {
        let k = space.occupation(f, mode);
        let src = &state[f * block..(f + 1) * block];
        match kind {
            Ladder::Number => {
                let dst = &mut out[f * block..(f + 1) * block];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d = k as f64 * s);
            }
            Ladder::Raise => {
                let amp = ((k + 1) as f64).sqrt();
                if k == cut {
                    lost += src.iter().map(|s| (amp * s).powi(2)).sum::<f64>();
                } else {
                    let t = f + stride;
                    let dst = &mut out[t * block..(t + 1) * block];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += amp * s);
                }
            }
            Ladder::Lower => {
                if k > 0 {
                    let amp = (k as f64).sqrt();
                    let t = f - stride;
                    let dst = &mut out[t * block..(t + 1) * block];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += amp * s);
                }
            }
        }
    }
    Ok(LadderOutput { state: out, truncated_norm_sq: lost })
}
