//! Uniform real-space grids, the Mexican-hat potential and the
//! fourth-order finite-difference single-electron Hamiltonian.
//!
//! Grid-functions are stored row-major: the flat index of point `(ix, iy)` is
//! `iy * nx + ix`. Values outside the box are taken to be zero (Dirichlet),
//! so every stencil is simply truncated at the edges. Inner products use the
//! plain Riemann weight `dx^d`, where `d` is 2 for a square grid and 1 for a
//! line grid.

use crate::eigensolver::LinearOperator;
use crate::{Error, Result};

/// Second-derivative stencil `(-1/12, 4/3, -5/2, 4/3, -1/12) / dx²`.
const D2: [f64; 3] = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// First-derivative stencil `(1/12, -2/3, 0, 2/3, -1/12) / dx`, listed for
/// offsets `+1, +2` (the negative offsets carry the opposite sign).
const D1: [f64; 2] = [2.0 / 3.0, -1.0 / 12.0];

/// A uniform grid centered on the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    /// `ny == 1` marks a one-dimensional line grid along x.
    pub ny: usize,
    pub dx: f64,
    /// Coordinates of point `(0, 0)`.
    pub origin: [f64; 2],
}

impl Grid2D {
    /// Square-lattice grid with odd point counts so that the center point
    /// sits exactly on the origin.
    pub fn centered(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        if nx % 2 == 0 || ny % 2 == 0 || nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid point counts must be odd and >= 3, got {nx}x{ny}"
            )));
        }
        Self::check_dx(dx)?;
        Ok(Self {
            nx,
            ny,
            dx,
            origin: [-((nx - 1) as f64) * dx / 2.0, -((ny - 1) as f64) * dx / 2.0],
        })
    }

    /// Square grid covering `[-half_width, half_width]²`.
    pub fn square_box(half_width: f64, dx: f64) -> Result<Self> {
        Self::check_dx(dx)?;
        let half = (half_width / dx).round() as usize;
        Self::centered(2 * half + 1, 2 * half + 1, dx)
    }

    /// One-dimensional grid of `n` points along x, symmetric about the
    /// origin. Used for small oracle instances.
    pub fn line(n: usize, dx: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("line grid needs >= 3 points, got {n}")));
        }
        Self::check_dx(dx)?;
        Ok(Self { nx: n, ny: 1, dx, origin: [-((n - 1) as f64) * dx / 2.0, 0.0] })
    }

    fn check_dx(dx: f64) -> Result<()> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {dx}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_line(&self) -> bool {
        self.ny == 1
    }

    pub fn dimensions(&self) -> usize {
        if self.is_line() {
            1
        } else {
            2
        }
    }

    /// Quadrature weight of a single grid point.
    pub fn weight(&self) -> f64 {
        self.dx.powi(self.dimensions() as i32)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        [self.origin[0] + ix as f64 * self.dx, self.origin[1] + iy as f64 * self.dx]
    }

    /// Iterator over all point coordinates in storage order.
    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Half-width of the box along x.
    pub fn half_width(&self) -> f64 {
        (self.nx - 1) as f64 * self.dx / 2.0
    }

    /// `Σ a b dx^d`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.weight()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.weight()
    }

    /// Grid-function of `e·r` for a (not necessarily unit) direction `e`.
    pub fn projection(&self, e: [f64; 2]) -> Vec<f64> {
        self.points().map(|p| e[0] * p[0] + e[1] * p[1]).collect()
    }

    fn check_shape(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), actual: f.len() });
        }
        Ok(())
    }
}

/// Parameters of `V(r) = ξ1/2 r² + ξ2 exp(-r²/ξ3²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MexicanHatParams {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

impl MexicanHatParams {
    pub fn new(xi1: f64, xi2: f64, xi3: f64) -> Result<Self> {
        if xi3 == 0.0 || !xi3.is_finite() {
            return Err(Error::InvalidParameter("xi3 must be finite and non-zero".into()));
        }
        Ok(Self { xi1, xi2, xi3 })
    }

    /// The GaAs quantum-ring parameters.
    pub fn gaas_ring() -> Self {
        Self { xi1: 0.7827, xi2: 17.70, xi3: 0.997 }
    }

    /// Pure isotropic harmonic trap `ω²r²/2` (no central bump).
    pub fn harmonic(omega: f64) -> Self {
        Self { xi1: omega * omega, xi2: 0.0, xi3: 1.0 }
    }

    pub fn value(&self, r: [f64; 2]) -> f64 {
        let r2 = r[0] * r[0] + r[1] * r[1];
        0.5 * self.xi1 * r2 + self.xi2 * (-r2 / (self.xi3 * self.xi3)).exp()
    }
}

/// Evaluates the potential at every grid point.
pub fn potential_on_grid(grid: &Grid2D, params: &MexicanHatParams) -> Vec<f64> {
    grid.points().map(|p| params.value(p)).collect()
}

/// Accumulates `scale · (-½∇²) x` into `y`.
pub(crate) fn kinetic_accumulate(grid: &Grid2D, x: &[f64], y: &mut [f64], scale: f64) {
    let nx = grid.nx;
    let ny = grid.ny;
    let c = -0.5 * scale / (grid.dx * grid.dx);
    let (c0, c1, c2) = (c * D2[0], c * D2[1], c * D2[2]);
    let diag = c0 * grid.dimensions() as f64;

    for iy in 0..ny {
        let row = iy * nx;
        let xr = &x[row..row + nx];
        let yr = &mut y[row..row + nx];
        // x direction
        for ix in 0..nx {
            let mut acc = diag * xr[ix];
            if ix >= 1 {
                acc += c1 * xr[ix - 1];
            }
            if ix + 1 < nx {
                acc += c1 * xr[ix + 1];
            }
            if ix >= 2 {
                acc += c2 * xr[ix - 2];
            }
            if ix + 2 < nx {
                acc += c2 * xr[ix + 2];
            }
            yr[ix] += acc;
        }
    }
    if ny == 1 {
        return;
    }
    // y direction: whole-row axpys
    for iy in 0..ny {
        let row = iy * nx;
        for (off, coef) in [(1usize, c1), (2usize, c2)] {
            if iy >= off {
                let src = (iy - off) * nx;
                for ix in 0..nx {
                    y[row + ix] += coef * x[src + ix];
                }
            }
            if iy + off < ny {
                let src = (iy + off) * nx;
                for ix in 0..nx {
                    y[row + ix] += coef * x[src + ix];
                }
            }
        }
    }
}

/// Accumulates `scale · (e·∇) x` into `y` with the fourth-order central
/// difference. The resulting matrix is exactly antisymmetric.
pub(crate) fn gradient_accumulate(grid: &Grid2D, e: [f64; 2], x: &[f64], y: &mut [f64], scale: f64) {
    let nx = grid.nx;
    let ny = grid.ny;
    let ax = scale * e[0] / grid.dx;
    if ax != 0.0 {
        let (a1, a2) = (ax * D1[0], ax * D1[1]);
        for iy in 0..ny {
            let row = iy * nx;
            for ix in 0..nx {
                let mut acc = 0.0;
                if ix + 1 < nx {
                    acc += a1 * x[row + ix + 1];
                }
                if ix >= 1 {
                    acc -= a1 * x[row + ix - 1];
                }
                if ix + 2 < nx {
                    acc += a2 * x[row + ix + 2];
                }
                if ix >= 2 {
                    acc -= a2 * x[row + ix - 2];
                }
                y[row + ix] += acc;
            }
        }
    }
    let ay = scale * e[1] / grid.dx;
    if ay != 0.0 && ny > 1 {
        let (a1, a2) = (ay * D1[0], ay * D1[1]);
        for iy in 0..ny {
            let row = iy * nx;
            for (off, coef) in [(1usize, a1), (2usize, a2)] {
                if iy + off < ny {
                    let src = (iy + off) * nx;
                    for ix in 0..nx {
                        y[row + ix] += coef * x[src + ix];
                    }
                }
                if iy >= off {
                    let src = (iy - off) * nx;
                    for ix in 0..nx {
                        y[row + ix] -= coef * x[src + ix];
                    }
                }
            }
        }
    }
}

/// `(-½∇² + V) x`.
pub fn apply_hamiltonian(grid: &Grid2D, potential: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    grid.check_shape(potential)?;
    grid.check_shape(x)?;
    let mut y: Vec<f64> = potential.iter().zip(x).map(|(v, xi)| v * xi).collect();
    kinetic_accumulate(grid, x, &mut y, 1.0);
    Ok(y)
}

/// `(e·∇) x` for a direction `e`.
pub fn apply_gradient(grid: &Grid2D, e: [f64; 2], x: &[f64]) -> Result<Vec<f64>> {
    grid.check_shape(x)?;
    let mut y = vec![0.0; x.len()];
    gradient_accumulate(grid, e, x, &mut y, 1.0);
    Ok(y)
}

/// Upper bound on the spectrum of `-½∇²` from the stencil symbol at the
/// zone edge.
pub(crate) fn kinetic_upper_bound(grid: &Grid2D) -> f64 {
    let per_axis = 0.5 * (-D2[0] + 2.0 * D2[1].abs() + 2.0 * D2[2].abs()) / (grid.dx * grid.dx);
    per_axis * grid.dimensions() as f64
}

/// The bare single-electron Hamiltonian as a matrix-free operator.
#[derive(Clone, Debug)]
pub struct GridHamiltonian<'a> {
    grid: &'a Grid2D,
    potential: &'a [f64],
}

impl<'a> GridHamiltonian<'a> {
    pub fn new(grid: &'a Grid2D, potential: &'a [f64]) -> Result<Self> {
        grid.check_shape(potential)?;
        Ok(Self { grid, potential })
    }
}

impl LinearOperator for GridHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, v), xi) in y.iter_mut().zip(self.potential).zip(x) {
            *yi = v * xi;
        }
        kinetic_accumulate(self.grid, x, y, 1.0);
    }

    fn upper_bound(&self) -> Option<f64> {
        let vmax = self.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(kinetic_upper_bound(self.grid) + vmax)
    }
}
