//! Closed-form single-photon polariton: one electronic excitation, at most
//! one photon, `N_e` identical emitters.
//!
//! Levels are measured without the photon zero-point energy `ω/2`; the
//! explicit matrix from [`spp_matrix`] includes it.

use crate::electronic::ElectronicBasis;
use crate::{Error, Result};
use nalgebra::Matrix4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SppInputs {
    pub e0: f64,
    pub e1: f64,
    pub omega: f64,
    pub lambda_vec: [f64; 2],
    /// Transition dipole `⟨0|r|1⟩`.
    pub r01: [f64; 2],
    /// Transition momentum `⟨0|∇|1⟩`, for the momentum-form Rabi frequency.
    pub p01: Option<[f64; 2]>,
    pub n_e: f64,
}

impl SppInputs {
    pub fn new(e0: f64, e1: f64, omega: f64, lambda_vec: [f64; 2], r01: [f64; 2], n_e: f64) -> Result<Self> {
        let s = Self { e0, e1, omega, lambda_vec, r01, p01: None, n_e };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.n_e >= 1.0) || !self.n_e.is_finite() {
            return Err(Error::InvalidParameter(format!("N_e must be >= 1, got {}", self.n_e)));
        }
        let all = [self.e0, self.e1, self.lambda_vec[0], self.lambda_vec[1], self.r01[0], self.r01[1]];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model input".into()));
        }
        Ok(())
    }

    /// Ground state and the member of the first excited multiplet with the
    /// largest `|λ·r_0n|` (the bright partner). Needs matter elements.
    pub fn from_basis(basis: &ElectronicBasis, omega: f64, lambda_vec: [f64; 2], n_e: f64) -> Result<Self> {
        let el = basis.elements()?;
        let first = basis
            .multiplets()
            .into_iter()
            .nth(1)
            .ok_or_else(|| Error::OutOfRange("basis has no excited state".into()))?;
        let coupling = |n: usize| (lambda_vec[0] * el.dipole[0][(0, n)] + lambda_vec[1] * el.dipole[1][(0, n)]).abs();
        let n = first.clone().max_by(|&a, &b| coupling(a).total_cmp(&coupling(b))).expect("non-empty");
        let mut s = Self::new(
            basis.energies[0],
            basis.energies[n],
            omega,
            lambda_vec,
            [el.dipole[0][(0, n)], el.dipole[1][(0, n)]],
            n_e,
        )?;
        s.p01 = Some([el.momentum[0][(0, n)], el.momentum[1][(0, n)]]);
        Ok(s)
    }

    /// `ΔE_e = E_1 − E_0`.
    pub fn excitation(&self) -> f64 {
        self.e1 - self.e0
    }

    /// `δ = ω − ΔE_e`.
    pub fn detuning(&self) -> f64 {
        self.omega - self.excitation()
    }

    fn lambda_dot(&self, v: [f64; 2]) -> f64 {
        self.lambda_vec[0] * v[0] + self.lambda_vec[1] * v[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RabiConvention {
    /// `2(ω − δ)/√(2ω) |λ·r01|`.
    Dipole,
    /// `2/√(2ω) |λ·p01|`.
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SppSpectrum {
    pub e0p: f64,
    pub e1m: f64,
    pub e1p: f64,
    pub e2p: f64,
    pub delta_tilde: f64,
    pub omega_tilde: f64,
    pub l: f64,
    pub big_delta_tilde: f64,
    pub ebar: f64,
}

impl SppSpectrum {
    pub fn levels(&self) -> [f64; 4] {
        [self.e0p, self.e1m, self.e1p, self.e2p]
    }
}

/// `L = N_e |λ|² / (2ω)`.
pub fn collective_shift(inputs: &SppInputs) -> f64 {
    let l2 = inputs.lambda_vec[0].powi(2) + inputs.lambda_vec[1].powi(2);
    inputs.n_e * l2 / (2.0 * inputs.omega)
}

/// Collective Rabi frequency `Ω̃`.
pub fn rabi_frequency(inputs: &SppInputs, convention: RabiConvention) -> Result<f64> {
    let s = inputs.n_e.sqrt() * 2.0 / (2.0 * inputs.omega).sqrt();
    match convention {
        RabiConvention::Dipole => Ok(s * (inputs.omega - inputs.detuning()) * inputs.lambda_dot(inputs.r01).abs()),
        RabiConvention::Momentum => {
            let p = inputs
                .p01
                .ok_or_else(|| Error::InvalidParameter("momentum convention needs p01".into()))?;
            Ok(s * inputs.lambda_dot(p).abs())
        }
    }
}

/// `(δ̃, Ω̃, √(δ̃² + Ω̃²))` in the dipole convention.
pub fn rabi_splitting(inputs: &SppInputs) -> (f64, f64, f64) {
    let dt = inputs.detuning() + collective_shift(inputs);
    let om = rabi_frequency(inputs, RabiConvention::Dipole).expect("dipole convention is total");
    (dt, om, dt.hypot(om))
}

/// As [`rabi_splitting`] with the chosen Rabi convention.
pub fn rabi_splitting_with(inputs: &SppInputs, convention: RabiConvention) -> Result<(f64, f64, f64)> {
    let dt = inputs.detuning() + collective_shift(inputs);
    let om = rabi_frequency(inputs, convention)?;
    Ok((dt, om, dt.hypot(om)))
}

/// Detuning `δ` that minimizes the splitting at fixed `Ω̃` and `L`.
pub fn shifted_resonance(inputs: &SppInputs) -> f64 {
    -collective_shift(inputs)
}

pub fn spp_levels(inputs: &SppInputs) -> SppSpectrum {
    spp_levels_with(inputs, RabiConvention::Dipole).expect("dipole convention is total")
}

pub fn spp_levels_with(inputs: &SppInputs, convention: RabiConvention) -> Result<SppSpectrum> {
    let de = inputs.excitation();
    let l = collective_shift(inputs);
    let (dt, om, split) = rabi_splitting_with(inputs, convention)?;
    let big = de + inputs.omega + l;
    let ebar = inputs.e0 + 0.5 * (de + inputs.omega) + l;
    let outer = big.hypot(om);
    Ok(SppSpectrum {
        e0p: ebar - 0.5 * outer,
        e1m: ebar - 0.5 * split,
        e1p: ebar + 0.5 * split,
        e2p: ebar + 0.5 * outer,
        delta_tilde: dt,
        omega_tilde: om,
        l,
        big_delta_tilde: big,
        ebar,
    })
}

/// `E_1^− − E_0'` without cancellation:
/// `2 ΔE_e (ω + L) / (√(Δ̃² + Ω̃²) + √(δ̃² + Ω̃²))`.
pub fn polariton_gap(inputs: &SppInputs) -> f64 {
    let s = spp_levels(inputs);
    let de = inputs.excitation();
    2.0 * de * (inputs.omega + s.l) / (s.big_delta_tilde.hypot(s.omega_tilde) + s.delta_tilde.hypot(s.omega_tilde))
}

/// The explicit matrix over `(j, l) ∈ {(0,0), (0,1), (1,0), (1,1)}`,
/// zero-point energy included.
pub fn spp_matrix(inputs: &SppInputs) -> Matrix4<f64> {
    let w = inputs.omega;
    let l = collective_shift(inputs);
    let g = 0.5 * rabi_frequency(inputs, RabiConvention::Dipole).expect("dipole convention is total");
    let mut m = Matrix4::zeros();
    m[(0, 0)] = inputs.e0 + 0.5 * (w + l);
    m[(1, 1)] = inputs.e0 + 1.5 * (w + l);
    m[(2, 2)] = inputs.e1 + 0.5 * (w + l);
    m[(3, 3)] = inputs.e1 + 1.5 * (w + l);
    m[(0, 3)] = g;
    m[(3, 0)] = g;
    m[(1, 2)] = g;
    m[(2, 1)] = g;
    m
}

/// `√(δ² + (√N_e √(2ω) λ_s)²)` with `λ_s = |λ·r01|`.
pub fn tavis_cummings_splitting(inputs: &SppInputs) -> f64 {
    let ls = inputs.lambda_dot(inputs.r01).abs();
    let c = inputs.n_e.sqrt() * (2.0 * inputs.omega).sqrt() * ls;
    inputs.detuning().hypot(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(lam: f64, delta: f64, n_e: f64) -> SppInputs {
        SppInputs::new(-1.0, -0.8, 0.2 + delta, [lam, 0.5 * lam], [0.9, -0.3], n_e).unwrap()
    }

    #[test]
    fn collective_shift_values() {
        assert_eq!(collective_shift(&inputs(0.0, 0.0, 1.0)), 0.0);
        // ω = 0.1, √N_e λ = 0.1 with the coupling along one axis
        let s = SppInputs::new(0.0, 0.1, 0.1, [0.01, 0.0], [1.0, 0.0], 100.0).unwrap();
        assert!((collective_shift(&s) - 0.05).abs() < 1e-15);
        let a = inputs(0.3, 0.01, 3.0);
        let b = SppInputs { n_e: 6.0, ..a };
        assert!((collective_shift(&b) - 2.0 * collective_shift(&a)).abs() < 1e-15);
    }

    #[test]
    fn decoupled_resonant_levels() {
        let s = spp_levels(&inputs(0.0, 0.0, 1.0));
        let e = [-1.0, -0.8, -0.8, -0.6];
        for (a, b) in s.levels().iter().zip(e) {
            assert!((a - b).abs() < 1e-15);
        }
        let (_, _, split) = rabi_splitting(&inputs(0.0, 0.07, 1.0));
        assert!((split - 0.07).abs() < 1e-15);
        assert!((tavis_cummings_splitting(&inputs(0.0, -0.07, 1.0)) - 0.07).abs() < 1e-15);
    }

    #[test]
    fn on_shifted_resonance_splitting_is_rabi_frequency() {
        let mut s = inputs(0.05, 0.0, 2.0);
        // L depends on ω, so iterate to the fixed point
        for _ in 0..100 {
            s.omega = s.excitation() - collective_shift(&s);
        }
        let (dt, om, split) = rabi_splitting(&s);
        assert!(dt.abs() < 1e-14);
        assert!((split - om).abs() < 1e-14);
    }

    #[test]
    fn tavis_cummings_matches_rabi_on_resonance() {
        let s = inputs(0.05, 0.0, 4.0);
        let tc = tavis_cummings_splitting(&s);
        let om = rabi_frequency(&s, RabiConvention::Dipole).unwrap();
        assert!((tc - om).abs() < 1e-15 * tc.max(1.0));
        // off resonance the couplings differ by (ω − δ)/ω
        let d = inputs(0.05, 0.03, 4.0);
        let tc_coupling = (tavis_cummings_splitting(&d).powi(2) - d.detuning().powi(2)).sqrt();
        let ratio = rabi_frequency(&d, RabiConvention::Dipole).unwrap() / tc_coupling;
        assert!((ratio - (d.omega - d.detuning()) / d.omega).abs() < 1e-12);
    }

    #[test]
    fn matrix_spectrum_matches_levels() {
        let s = inputs(0.3, -0.02, 5.0);
        let mut ev: Vec<f64> = spp_matrix(&s).symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(spp_levels(&s).levels()) {
            assert!((a - 0.5 * s.omega - b).abs() < 1e-13);
        }
    }

    #[test]
    fn gap_formula_is_stable() {
        let s = inputs(1.0, 0.0, 1e6);
        let lv = spp_levels(&s);
        let g = polariton_gap(&s);
        assert!(g > 0.0);
        assert!((g - (lv.e1m - lv.e0p)).abs() <= 1e-9 * lv.e2p.abs());
    }

    #[test]
    fn momentum_convention_needs_p01() {
        let s = inputs(0.1, 0.0, 1.0);
        assert!(rabi_frequency(&s, RabiConvention::Momentum).is_err());
        // p01 = ΔE r01 reproduces the dipole value
        let de = s.excitation();
        let p = SppInputs { p01: Some([de * s.r01[0], de * s.r01[1]]), ..s };
        let a = rabi_frequency(&p, RabiConvention::Momentum).unwrap();
        let b = rabi_frequency(&p, RabiConvention::Dipole).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(SppInputs::new(0.0, 1.0, 0.0, [0.1, 0.0], [1.0, 0.0], 1.0).is_err());
        assert!(SppInputs::new(0.0, 1.0, 1.0, [0.1, 0.0], [1.0, 0.0], 0.5).is_err());
        assert!(SppInputs::new(0.0, f64::NAN, 1.0, [0.1, 0.0], [1.0, 0.0], 1.0).is_err());
    }
}
