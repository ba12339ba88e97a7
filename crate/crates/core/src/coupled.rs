//! Exact solver on the grid ⊗ Fock tensor space.
//!
//! Amplitudes are stored in Fock-major blocks: `amplitudes[f·n_grid + g]`
//! with `f` the flat [`FockSpace`] index.

use crate::eigensolver::{lowest_eigenpairs_with, EigenOptions, FilterMode, LinearOperator};
use crate::grid::{gradient_accumulate, kinetic_accumulate, kinetic_upper_bound, Grid2D, MexicanHatParams};
use crate::photon::{FockIndex, FockSpace, PhotonMode};
use crate::{Error, Result};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CouplingForm {
    /// Dipole coupling `−√(ω/2)(λ·r)(a + a†)` plus self-polarization.
    Length,
    /// Minimal coupling `½(−i∇ − Σ (λ/ω) p̂)²`.
    Momentum,
}

impl CouplingForm {
    pub fn tag(&self) -> &'static str {
        match self {
            CouplingForm::Length => "length",
            CouplingForm::Momentum => "momentum",
        }
    }
}

impl std::str::FromStr for CouplingForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" | "dE" | "ex-dE" => Ok(CouplingForm::Length),
            "momentum" | "pA" | "ex-pA" => Ok(CouplingForm::Momentum),
            _ => Err(Error::InvalidParameter(format!("unknown coupling form `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledHamiltonianConfig {
    pub grid: Grid2D,
    pub potential: Vec<f64>,
    pub modes: Vec<PhotonMode>,
    pub form: CouplingForm,
    /// Only read by the length form.
    pub include_self_polarization: bool,
}

impl CoupledHamiltonianConfig {
    pub fn new(grid: Grid2D, potential: Vec<f64>, modes: Vec<PhotonMode>, form: CouplingForm) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), actual: potential.len() });
        }
        if modes.is_empty() || modes.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "the exact solver takes one or two modes, got {}",
                modes.len()
            )));
        }
        Ok(Self { grid, potential, modes, form, include_self_polarization: true })
    }

    pub fn from_params(
        grid: Grid2D,
        params: &MexicanHatParams,
        modes: Vec<PhotonMode>,
        form: CouplingForm,
    ) -> Result<Self> {
        let v = crate::grid::potential_on_grid(&grid, params);
        Self::new(grid, v, modes, form)
    }

    pub fn fock_space(&self) -> FockSpace {
        FockSpace::for_modes(&self.modes)
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.fock_space().len()
    }
}

/// The matrix-free Hamiltonian of a [`CoupledHamiltonianConfig`].
pub struct CoupledHamiltonian<'a> {
    config: &'a CoupledHamiltonianConfig,
    space: FockSpace,
    photon: Vec<f64>,
    /// Per mode `−√(ω/2) λ·r` (length form).
    dipole: Vec<Vec<f64>>,
    /// `V` plus, in the length form, `½Σ(λ·r)²`.
    local: Vec<f64>,
    bound: f64,
}

impl<'a> CoupledHamiltonian<'a> {
    pub fn new(config: &'a CoupledHamiltonianConfig) -> Self {
        let space = config.fock_space();
        let photon = (0..space.len())
            .map(|f| {
                let occ = space.index(f).occupations;
                config.modes.iter().zip(&occ).map(|(m, &k)| m.omega * (k as f64 + 0.5)).sum()
            })
            .collect::<Vec<f64>>();
        let grid = &config.grid;
        let proj: Vec<Vec<f64>> = config.modes.iter().map(|m| grid.projection(m.lambda_vec)).collect();
        let mut local = config.potential.clone();
        let mut dipole = Vec::new();
        if config.form == CouplingForm::Length {
            for (m, p) in config.modes.iter().zip(&proj) {
                let c = -(m.omega / 2.0).sqrt();
                dipole.push(p.iter().map(|x| c * x).collect());
                if config.include_self_polarization {
                    local.iter_mut().zip(p).for_each(|(v, x)| *v += 0.5 * x * x);
                }
            }
        }
        let bound = Self::estimate_bound(config, &space, &local, &proj);
        Self { config, space, photon, dipole, local, bound }
    }

    fn estimate_bound(config: &CoupledHamiltonianConfig, space: &FockSpace, local: &[f64], proj: &[Vec<f64>]) -> f64 {
        let grid = &config.grid;
        let vmax = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut b = kinetic_upper_bound(grid) + vmax;
        for (m, p) in config.modes.iter().zip(proj) {
            let c = m.cutoff as f64;
            b += m.omega * (c + 0.5);
            // ‖a + a†‖, ‖a − a†‖ ≤ 2√c on the truncated space
            let ladder = 2.0 * c.sqrt();
            match config.form {
                CouplingForm::Length => {
                    let rmax = p.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                    b += (m.omega / 2.0).sqrt() * rmax * ladder;
                }
                CouplingForm::Momentum => {
                    let lam = m.lambda_vec[0].abs() + m.lambda_vec[1].abs();
                    let dnorm = (4.0 / 3.0 * 2.0 + 2.0 / 12.0) / grid.dx;
                    b += lam * dnorm / (2.0 * m.omega).sqrt() * ladder;
                    b += m.lambda_sq() / (4.0 * m.omega) * (4.0 * c + 2.0);
                }
            }
        }
        if config.form == CouplingForm::Momentum && config.modes.len() == 2 {
            let (a, bm) = (&config.modes[0], &config.modes[1]);
            let dotl = a.lambda_vec[0] * bm.lambda_vec[0] + a.lambda_vec[1] * bm.lambda_vec[1];
            b += dotl.abs() / (2.0 * (a.omega * bm.omega).sqrt()) * 4.0 * ((a.cutoff * bm.cutoff) as f64).sqrt();
        }
        let _ = space;
        b
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// Adds the action on block `f` of `x` into `out`.
    fn apply_block(&self, f: usize, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let grid = &self.config.grid;
        let ng = grid.len();
        let block = |i: usize| &x[i * ng..(i + 1) * ng];
        let xf = block(f);
        let e = self.photon[f];
        for ((o, v), xi) in out.iter_mut().zip(&self.local).zip(xf) {
            *o = (v + e) * xi;
        }
        kinetic_accumulate(grid, xf, out, 1.0);
        let occ = self.space.index(f).occupations;
        let neighbour = |mode: usize, delta: isize| -> Option<usize> {
            let k = occ[mode] as isize + delta;
            if k < 0 || k as usize > self.space.cutoffs()[mode] {
                return None;
            }
            let mut o = occ.clone();
            o[mode] = k as usize;
            Some(self.space.flat(&FockIndex::new(o)).expect("in range"))
        };
        for (a, mode) in self.config.modes.iter().enumerate() {
            let k = occ[a] as f64;
            let down = neighbour(a, -1);
            let up = neighbour(a, 1);
            match self.config.form {
                CouplingForm::Length => {
                    // (a + a†): ⟨k|·|k−1⟩ = √k, ⟨k|·|k+1⟩ = √(k+1)
                    let d = &self.dipole[a];
                    if let Some(i) = down {
                        let s = k.sqrt();
                        for ((o, di), xi) in out.iter_mut().zip(d).zip(block(i)) {
                            *o += s * di * xi;
                        }
                    }
                    if let Some(i) = up {
                        let s = (k + 1.0).sqrt();
                        for ((o, di), xi) in out.iter_mut().zip(d).zip(block(i)) {
                            *o += s * di * xi;
                        }
                    }
                }
                CouplingForm::Momentum => {
                    // A = a† − a: ⟨k|A|k−1⟩ = √k, ⟨k|A|k+1⟩ = −√(k+1)
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    let mut any = false;
                    if let Some(i) = down {
                        axpy_into(scratch, k.sqrt(), block(i));
                        any = true;
                    }
                    if let Some(i) = up {
                        axpy_into(scratch, -(k + 1.0).sqrt(), block(i));
                        any = true;
                    }
                    if any {
                        gradient_accumulate(grid, mode.lambda_vec, scratch, out, -1.0 / (2.0 * mode.omega).sqrt());
                    }
                    // λ²/(4ω)(2k + 1 − a² − a†²)
                    let c = mode.lambda_sq() / (4.0 * mode.omega);
                    axpy_into(out, c * (2.0 * k + 1.0), xf);
                    if let Some(i) = neighbour(a, -2) {
                        axpy_into(out, -c * (k * (k - 1.0)).sqrt(), block(i));
                    }
                    if let Some(i) = neighbour(a, 2) {
                        axpy_into(out, -c * ((k + 1.0) * (k + 2.0)).sqrt(), block(i));
                    }
                }
            }
        }
        if self.config.form == CouplingForm::Momentum && self.config.modes.len() == 2 {
            let (m0, m1) = (&self.config.modes[0], &self.config.modes[1]);
            let dotl = m0.lambda_vec[0] * m1.lambda_vec[0] + m0.lambda_vec[1] * m1.lambda_vec[1];
            let c = -dotl / (2.0 * (m0.omega * m1.omega).sqrt());
            if c != 0.0 {
                // ⟨k|A₀A₁|k'⟩ = A₀[k₀,k'₀]·A₁[k₁,k'₁]
                let amp = |k: usize, kp: usize| -> f64 {
                    if kp + 1 == k {
                        (k as f64).sqrt()
                    } else if k + 1 == kp {
                        -(kp as f64).sqrt()
                    } else {
                        0.0
                    }
                };
                for d0 in [-1isize, 1] {
                    for d1 in [-1isize, 1] {
                        let k0 = occ[0] as isize + d0;
                        let k1 = occ[1] as isize + d1;
                        if k0 < 0 || k1 < 0 || k0 as usize > m0.cutoff || k1 as usize > m1.cutoff {
                            continue;
                        }
                        let i = self.space.flat(&FockIndex::new(vec![k0 as usize, k1 as usize])).expect("in range");
                        let s = c * amp(occ[0], k0 as usize) * amp(occ[1], k1 as usize);
                        axpy_into(out, s, block(i));
                    }
                }
            }
        }
    }
}

fn axpy_into(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

impl LinearOperator for CoupledHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.config.grid.len() * self.space.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ng = self.config.grid.len();
        y.par_chunks_mut(ng).enumerate().for_each_init(
            || vec![0.0; ng],
            |scratch, (f, out)| self.apply_block(f, x, out, scratch),
        );
    }

    fn upper_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

/// `H x` for one form; errors on a shape mismatch.
pub fn apply_coupled(config: &CoupledHamiltonianConfig, x: &[f64]) -> Result<Vec<f64>> {
    let h = CoupledHamiltonian::new(config);
    if x.len() != h.dim() {
        return Err(Error::ShapeMismatch { expected: h.dim(), actual: x.len() });
    }
    let mut y = vec![0.0; x.len()];
    h.apply(x, &mut y);
    Ok(y)
}

/// Length-form action, whatever the form tag of `config`.
pub fn apply_length_form(config: &CoupledHamiltonianConfig, x: &[f64]) -> Result<Vec<f64>> {
    let c = CoupledHamiltonianConfig { form: CouplingForm::Length, ..config.clone() };
    apply_coupled(&c, x)
}

/// Momentum-form action, whatever the form tag of `config`.
pub fn apply_momentum_form(config: &CoupledHamiltonianConfig, x: &[f64]) -> Result<Vec<f64>> {
    let c = CoupledHamiltonianConfig { form: CouplingForm::Momentum, ..config.clone() };
    apply_coupled(&c, x)
}

/// One eigenstate of the coupled problem, normalized under grid quadrature.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub amplitudes: Vec<f64>,
    pub form: CouplingForm,
    pub energy: f64,
    pub residual: f64,
    pub grid: Grid2D,
    pub space: FockSpace,
}

impl CoupledState {
    pub fn block(&self, fock: usize) -> &[f64] {
        let ng = self.grid.len();
        &self.amplitudes[fock * ng..(fock + 1) * ng]
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.dot(&self.amplitudes, &self.amplitudes)
    }

    /// `⟨a†a⟩` of `mode` in this state's own form.
    pub fn occupation(&self, mode: usize) -> f64 {
        (0..self.space.len())
            .map(|f| {
                let b = self.block(f);
                self.space.occupation(f, mode) as f64 * self.grid.dot(b, b)
            })
            .sum()
    }

    /// Weight in Fock states with `mode` at its cutoff.
    pub fn top_fock_weight(&self, mode: usize) -> f64 {
        let top = self.space.cutoffs()[mode];
        (0..self.space.len())
            .filter(|&f| self.space.occupation(f, mode) == top)
            .map(|f| {
                let b = self.block(f);
                self.grid.dot(b, b)
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct CoupledSolveOptions {
    pub tol: f64,
    pub seed: u64,
    pub filter: FilterMode,
}

impl Default for CoupledSolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, seed: 0, filter: FilterMode::Auto }
    }
}

/// Bytes held by a `k`-state solve: the Krylov basis plus work vectors.
pub fn memory_estimate(config: &CoupledHamiltonianConfig, k: usize) -> u64 {
    let nev = k + (k / 4).max(2);
    let m = (2 * nev + 10).max(40).min(config.dim());
    (config.dim() as u64) * 8 * (m as u64 + 8)
}

pub fn solve_coupled(config: &CoupledHamiltonianConfig, k: usize) -> Result<Vec<CoupledState>> {
    solve_coupled_with(config, k, &CoupledSolveOptions::default())
}

pub fn solve_coupled_with(
    config: &CoupledHamiltonianConfig,
    k: usize,
    opts: &CoupledSolveOptions,
) -> Result<Vec<CoupledState>> {
    let h = CoupledHamiltonian::new(config);
    let mut eo = EigenOptions::new(k, opts.tol);
    eo.seed = opts.seed;
    eo.filter = opts.filter;
    let res = lowest_eigenpairs_with(&h, &eo)?.ensure_converged(opts.tol)?;
    let s = 1.0 / config.grid.weight().sqrt();
    let space = h.space().clone();
    Ok(res
        .values
        .iter()
        .zip(res.vectors)
        .zip(&res.residuals)
        .take(k)
        .map(|((&energy, v), &residual)| {
            let mut amplitudes: Vec<f64> = v.into_iter().map(|a| a * s).collect();
            fix_sign(&mut amplitudes);
            CoupledState {
                amplitudes,
                form: config.form,
                energy,
                residual,
                grid: config.grid.clone(),
                space: space.clone(),
            }
        })
        .collect())
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(x) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-6)) {
        if *x < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}
