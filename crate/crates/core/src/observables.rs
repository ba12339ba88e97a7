//! Densities, mode occupations, excitation energies and the anisotropy
//! proxy `Δ⟨(e·r)²⟩`, plus density exports.

use crate::coupled::CoupledState;
use crate::electronic::ElectronicBasis;
use crate::grid::Grid2D;
use crate::polariton::{polariton_occupation, PolaritonState};
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Electronic density `n(r) = Σ_{n,n'} φ_n φ_n' Σ_l c_{nl} c_{n'l}`.
pub fn density_from_polariton(state: &PolaritonState, basis: &ElectronicBasis) -> Result<Vec<f64>> {
    let (ne, _) = state.coeffs.shape();
    if ne > basis.count {
        return Err(Error::ShapeMismatch { expected: basis.count, actual: ne });
    }
    // reduced density matrix in the electronic basis
    let rho = &state.coeffs * state.coeffs.transpose();
    let npts = basis.grid.len();
    let mut out = vec![0.0; npts];
    for n in 0..ne {
        for m in 0..ne {
            let r = rho[(n, m)];
            if r == 0.0 {
                continue;
            }
            let (a, b) = (&basis.orbitals[n], &basis.orbitals[m]);
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o += r * x * y;
            }
        }
    }
    Ok(out)
}

/// Traces out the photons: `n(r) = Σ_k |ψ(r, k)|²`.
pub fn density_from_coupled(state: &CoupledState) -> Vec<f64> {
    let ng = state.grid.len();
    let mut out = vec![0.0; ng];
    for block in state.amplitudes.chunks(ng) {
        out.iter_mut().zip(block).for_each(|(o, x)| *o += x * x);
    }
    out
}

/// `⟨a†a⟩` of one mode.
pub trait ModeOccupation {
    fn mode_occupation(&self, mode: usize) -> f64;
}

impl ModeOccupation for PolaritonState {
    fn mode_occupation(&self, mode: usize) -> f64 {
        polariton_occupation(self, mode)
    }
}

impl ModeOccupation for CoupledState {
    fn mode_occupation(&self, mode: usize) -> f64 {
        self.occupation(mode)
    }
}

/// Weight outside the photon vacuum.
pub trait PhotonicWeight {
    fn photonic_weight(&self) -> f64;
}

impl PhotonicWeight for PolaritonState {
    fn photonic_weight(&self) -> f64 {
        PolaritonState::photonic_weight(self)
    }
}

impl PhotonicWeight for CoupledState {
    fn photonic_weight(&self) -> f64 {
        let b = self.block(0);
        self.norm_sq() - self.grid.dot(b, b)
    }
}

/// Index of the lower polariton: of states 1 and 2, the one with the larger
/// photonic weight (the first on a tie).
pub fn lower_polariton_index<S: PhotonicWeight>(states: &[S]) -> Result<usize> {
    match states.len() {
        0 | 1 => Err(Error::OutOfRange("need at least two states".into())),
        2 => Ok(1),
        _ => Ok(if states[2].photonic_weight() > states[1].photonic_weight() { 2 } else { 1 }),
    }
}

/// `n − n_ref`.
pub fn density_difference(density: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if density.len() != reference.len() {
        return Err(Error::ShapeMismatch { expected: reference.len(), actual: density.len() });
    }
    Ok(density.iter().zip(reference).map(|(a, b)| a - b).collect())
}

/// `∫ (n − n_ref)(e·r)²` with `e` normalized.
pub fn anisotropy(grid: &Grid2D, density: &[f64], reference: &[f64], direction: [f64; 2]) -> Result<f64> {
    if density.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), actual: density.len() });
    }
    let d = density_difference(density, reference)?;
    let len = direction[0].hypot(direction[1]);
    if !(len > 0.0) {
        return Err(Error::InvalidParameter("direction must be non-zero".into()));
    }
    let e = [direction[0] / len, direction[1] / len];
    let proj = grid.projection(e);
    Ok(grid.dot(&d, &proj.iter().map(|p| p * p).collect::<Vec<_>>()))
}

/// The quantities reported per run.
#[derive(Clone, Debug)]
pub struct ObservableReport {
    pub de01: f64,
    pub de13: f64,
    /// Ground-state occupation per mode.
    pub occupation: Vec<f64>,
    /// Ground-state density.
    pub density: Vec<f64>,
    pub density_reference: Option<Vec<f64>>,
    pub anisotropy: Option<f64>,
}

impl ObservableReport {
    fn energies(e: &[f64]) -> Result<(f64, f64)> {
        if e.len() < 4 {
            return Err(Error::OutOfRange(format!("need four states, got {}", e.len())));
        }
        Ok((e[1] - e[0], e[3] - e[1]))
    }

    pub fn from_coupled(states: &[CoupledState], modes: usize) -> Result<Self> {
        let (de01, de13) = Self::energies(&states.iter().map(|s| s.energy).collect::<Vec<_>>())?;
        Ok(Self {
            de01,
            de13,
            occupation: (0..modes).map(|m| states[0].occupation(m)).collect(),
            density: density_from_coupled(&states[0]),
            density_reference: None,
            anisotropy: None,
        })
    }

    pub fn from_polariton(states: &[PolaritonState], basis: &ElectronicBasis) -> Result<Self> {
        let (de01, de13) = Self::energies(&states.iter().map(|s| s.energy).collect::<Vec<_>>())?;
        let modes = states[0].fock_occupations.first().map_or(0, |o| o.len());
        Ok(Self {
            de01,
            de13,
            occupation: (0..modes).map(|m| polariton_occupation(&states[0], m)).collect(),
            density: density_from_polariton(&states[0], basis)?,
            density_reference: None,
            anisotropy: None,
        })
    }

    /// Attaches a reference density and the anisotropy against it.
    pub fn with_reference(mut self, grid: &Grid2D, reference: Vec<f64>, direction: [f64; 2]) -> Result<Self> {
        self.anisotropy = Some(anisotropy(grid, &self.density, &reference, direction)?);
        self.density_reference = Some(reference);
        Ok(self)
    }
}

/// `x,y,value` rows, nine significant digits.
pub fn write_density_csv(path: &Path, grid: &Grid2D, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), actual: values.len() });
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y,value")?;
    for (p, v) in grid.points().zip(values) {
        writeln!(w, "{:.8e},{:.8e},{:.8e}", p[0], p[1], v)?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major little-endian f64 dump with a JSON sidecar at `<path>.json`
/// holding the grid and the given provenance entries.
pub fn write_density_raw(path: &Path, grid: &Grid2D, values: &[f64], provenance: &[(&str, String)]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), actual: values.len() });
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    let mut prov = serde_json::Map::new();
    for (k, v) in provenance {
        prov.insert((*k).to_string(), serde_json::Value::String(v.clone()));
    }
    let sidecar = serde_json::json!({
        "format": "f64-le-row-major",
        "nx": grid.nx,
        "ny": grid.ny,
        "dx": grid.dx,
        "origin": grid.origin,
        "provenance": prov,
    });
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    std::fs::write(side, serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(())
}

/// Reads a dump written by [`write_density_raw`].
pub fn read_density_raw(path: &Path, grid: &Grid2D) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::ShapeMismatch { expected: grid.len() * 8, actual: bytes.len() });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}
