//! On-disk eigenpair cache (`EPC1`).
//!
//! Layout, all little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `EPC1` | 4 bytes |
//! | version | u32 |
//! | nx, ny | u64 |
//! | dx, ξ1, ξ2, ξ3 | f64 |
//! | count | u64 |
//! | energies | count × f64 |
//! | orbitals | count × nx·ny × f64 |
//! | residuals | count × f64 |
//!
//! Files are named by a SHA-256 digest over every parameter that affects
//! the solve, so a changed parameter never hits a stale entry.

use crate::electronic::{solve_electronic_with, ElectronicBasis};
use crate::grid::{potential_on_grid, Grid2D, MexicanHatParams};
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"EPC1";
const VERSION: u32 = 1;

/// Everything that determines a cached electronic solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheKey {
    pub grid: Grid2D,
    pub params: MexicanHatParams,
    pub count: usize,
    pub tol: f64,
    pub seed: u64,
    pub gauge_direction: [f64; 2],
}

impl CacheKey {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(MAGIC);
        h.update(VERSION.to_le_bytes());
        h.update((self.grid.nx as u64).to_le_bytes());
        h.update((self.grid.ny as u64).to_le_bytes());
        for v in [
            self.grid.dx,
            self.grid.origin[0],
            self.grid.origin[1],
            self.params.xi1,
            self.params.xi2,
            self.params.xi3,
            self.tol,
            self.gauge_direction[0],
            self.gauge_direction[1],
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.count as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn file_name(&self) -> String {
        format!("epc1-{}.bin", &self.digest()[..24])
    }

    /// Runs the solve this key describes.
    pub fn solve(&self) -> Result<ElectronicBasis> {
        let v = potential_on_grid(&self.grid, &self.params);
        solve_electronic_with(&self.grid, &v, self.count, self.tol, self.gauge_direction, self.seed)
    }
}

pub fn write_basis(path: &Path, key: &CacheKey, basis: &ElectronicBasis) -> Result<()> {
    let g = &basis.grid;
    let mut out = Vec::with_capacity(64 + 8 * basis.count * (g.len() + 2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny as u64).to_le_bytes());
    for v in [g.dx, key.params.xi1, key.params.xi2, key.params.xi3] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(basis.count as u64).to_le_bytes());
    let floats = basis.energies.iter().chain(basis.orbitals.iter().flatten()).chain(&basis.residuals);
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    // write-then-rename so a crash never leaves a truncated entry
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, out)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("cache file truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Reads a cache file and checks its header against `key`.
pub fn read_basis(path: &Path, key: &CacheKey) -> Result<ElectronicBasis> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not an EPC1 file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let (nx, ny) = (r.u64()? as usize, r.u64()? as usize);
    let dx = r.f64()?;
    let xi = [r.f64()?, r.f64()?, r.f64()?];
    let count = r.u64()? as usize;
    let k = &key.grid;
    if nx != k.nx || ny != k.ny || dx != k.dx || xi != [key.params.xi1, key.params.xi2, key.params.xi3] {
        return Err(Error::Format("cache header does not match the requested parameters".into()));
    }
    if count < key.count {
        return Err(Error::Format(format!("cache holds {count} states, {} requested", key.count)));
    }
    let npts = nx * ny;
    let expected = r.pos + 8 * count * (npts + 2);
    if bytes.len() != expected {
        return Err(Error::Format(format!("cache file has {} bytes, expected {expected}", bytes.len())));
    }
    let energies = r.f64s(count)?;
    let orbitals = (0..count).map(|_| r.f64s(npts)).collect::<Result<Vec<_>>>()?;
    let residuals = r.f64s(count)?;
    let mut basis = ElectronicBasis::from_parts(key.grid.clone(), energies, orbitals)?;
    basis.residuals = residuals;
    Ok(basis)
}

/// A directory of cache entries.
#[derive(Clone, Debug)]
pub struct ElectronicCache {
    dir: PathBuf,
}

impl ElectronicCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Returns the cached basis, or solves and stores it. The flag is true
    /// on a cache hit.
    pub fn load_or_solve(&self, key: &CacheKey) -> Result<(ElectronicBasis, bool)> {
        let path = self.path_for(key);
        if path.exists() {
            if let Ok(b) = read_basis(&path, key) {
                return Ok((b, true));
            }
        }
        let basis = key.solve()?;
        write_basis(&path, key, &basis)?;
        Ok((basis, false))
    }
}
