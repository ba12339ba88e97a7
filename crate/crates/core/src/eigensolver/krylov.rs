use super::{axpy, dot, norm, scale, EigenResult, LinearOperator};
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::{Cell, RefCell};

/// Below this dimension [`FilterMode::Auto`] runs plain Lanczos.
const FILTER_MIN_DIM: usize = 4096;
const MAX_DEGREE: usize = 400;
const FIRST_STAGE_DEGREE: usize = 100;
const MAX_RETUNES: usize = 8;
const CHUNK: usize = 4096;

/// Whether to accelerate with a Chebyshev polynomial filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterMode {
    /// Filter when the operator is large.
    Auto,
    Never,
    Always,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Number of lowest eigenpairs wanted.
    pub k: usize,
    /// Residual tolerance `‖Av − λv‖` for unit `v`.
    pub tol: f64,
    /// Maximum number of thick restarts per Krylov run.
    pub max_iter: usize,
    pub seed: u64,
    pub filter: FilterMode,
    /// Run deflated passes from fresh random vectors to pick up members of
    /// exactly degenerate eigenspaces that a single Krylov sequence misses.
    pub complete_degeneracies: bool,
    /// Extra Ritz pairs carried above the wanted ones. Defaults to
    /// `max(2, k/4)`.
    pub guard: Option<usize>,
    pub check_symmetry: bool,
}

impl EigenOptions {
    pub fn new(k: usize, tol: f64) -> Self {
        Self {
            k,
            tol,
            max_iter: 1000,
            seed: 0,
            filter: FilterMode::Auto,
            complete_degeneracies: true,
            guard: None,
            check_symmetry: true,
        }
    }
}

/// The `k` lowest eigenpairs of a symmetric operator.
///
/// ```
/// use cavity_polariton::eigensolver::{lowest_eigenpairs, DenseOperator};
/// use nalgebra::DMatrix;
///
/// let a = DMatrix::from_fn(100, 100, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
/// let r = lowest_eigenpairs(&DenseOperator::new(a).unwrap(), 3, 1e-10, 500, 7).unwrap();
/// assert!((r.values[2] - 3.0).abs() < 1e-10);
/// ```
pub fn lowest_eigenpairs(
    op: &dyn LinearOperator,
    k: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let opts = EigenOptions { max_iter, seed, ..EigenOptions::new(k, tol) };
    lowest_eigenpairs_with(op, &opts)
}

pub fn lowest_eigenpairs_with(op: &dyn LinearOperator, opts: &EigenOptions) -> Result<EigenResult> {
    let n = op.dim();
    let k = opts.k;
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k < dimension, got k={k} for dimension {n}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.check_symmetry {
        super::check_symmetry(op, opts.seed)?;
    }

    let a = Counted { op, count: Cell::new(0) };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let guard = opts.guard.unwrap_or((k / 4).max(2));
    let nev = (k + guard).min(n - 1);
    let m = (2 * nev + 10).max(40).min(n);
    let cycles = opts.max_iter.max(1);
    let use_filter = match opts.filter {
        FilterMode::Auto => n >= FILTER_MIN_DIM,
        FilterMode::Never => false,
        FilterMode::Always => true,
    } && nev + 2 < m;

    let start = random_unit(&mut rng, n, &[]);
    let (tr, out) = if use_filter {
        filtered_solve(&a, k, nev, m, opts.tol, cycles, start, &mut rng)
    } else {
        let tr = Transform::Negate;
        let out = krylov_solve(&a, &tr, k, nev, m, opts.tol, cycles, start, &[], &mut rng, None);
        (tr, out)
    };

    let out = if opts.complete_degeneracies {
        complete_degeneracies(&a, &tr, out, k, opts.tol, cycles, &mut rng)
    } else {
        out
    };

    let converged = out.residuals.iter().take(k).all(|&r| r <= opts.tol);
    Ok(EigenResult {
        values: out.values.into_iter().take(k).collect(),
        vectors: out.vectors.into_iter().take(k).collect(),
        residuals: out.residuals.into_iter().take(k).collect(),
        converged,
        matvecs: a.count.get(),
    })
}

struct Counted<'a> {
    op: &'a dyn LinearOperator,
    count: Cell<usize>,
}

impl Counted<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.count.set(self.count.get() + 1);
        self.op.apply(x, y);
    }
}

/// The operator whose largest eigenvalues the Krylov iteration targets.
#[derive(Clone, Debug)]
enum Transform {
    Negate,
    /// `T_d(ℓ(A))` with `ℓ` mapping `[a, b]` onto `[-1, 1]`; `d` even.
    Chebyshev { a: f64, b: f64, d: usize, scratch: RefCell<[Vec<f64>; 2]> },
}

impl Transform {
    fn chebyshev(a: f64, b: f64, d: usize) -> Self {
        Transform::Chebyshev { a, b, d, scratch: RefCell::new([Vec::new(), Vec::new()]) }
    }

    fn apply(&self, op: &Counted, x: &[f64], y: &mut [f64]) {
        match self {
            Transform::Negate => {
                op.apply(x, y);
                scale(-1.0, y);
            }
            Transform::Chebyshev { a, b, d, scratch } => {
                let e = 0.5 * (b - a);
                let c = 0.5 * (b + a);
                let mut s = scratch.borrow_mut();
                let [t0, t1] = &mut *s;
                t0.clear();
                t0.extend_from_slice(x);
                t1.resize(x.len(), 0.0);
                op.apply(x, t1);
                for (t, xi) in t1.iter_mut().zip(x) {
                    *t = (*t - c * xi) / e;
                }
                // y holds the next term; then rotate (t0, t1) <- (t1, y)
                for _ in 2..=*d {
                    op.apply(t1, y);
                    for ((yi, a1), a0) in y.iter_mut().zip(t1.iter()).zip(t0.iter()) {
                        *yi = 2.0 * (*yi - c * a1) / e - a0;
                    }
                    std::mem::swap(t0, t1);
                    t1.copy_from_slice(y);
                }
                y.copy_from_slice(t1);
            }
        }
    }

    fn relative(&self) -> bool {
        matches!(self, Transform::Chebyshev { .. })
    }
}

/// Filter degree giving the least wanted state a log-amplification near 3,
/// without amplifying the ground state beyond `e^12`.
fn degree(a: f64, b: f64, lowest: f64, least_wanted: f64, cap: usize) -> usize {
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let q = |t: f64| ((c - t) / e).max(1.0).acosh();
    let (q0, qk) = (q(lowest), q(least_wanted));
    let mut d = if qk > 0.0 { 3.0 / qk } else { f64::INFINITY };
    if q0 > 0.0 {
        d = d.min(12.0 / q0);
    }
    let d = if d.is_finite() { d.ceil() as usize } else { cap };
    let d = d.clamp(8, cap.max(8));
    d + d % 2
}

struct Outcome {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Krylov-Schur state: `A V_p = V_p H_p + β f e_pᵀ` with `V` orthonormal.
struct KrylovSchur {
    n: usize,
    m: usize,
    avail: usize,
    v: Vec<Vec<f64>>,
    h: DMatrix<f64>,
    p: usize,
    beta: f64,
    theta: Vec<f64>,
    y: DMatrix<f64>,
}

impl KrylovSchur {
    fn new(n: usize, m: usize, avail: usize, start: Vec<f64>) -> Self {
        let m = m.min(avail).max(1);
        Self {
            n,
            m,
            avail,
            v: vec![start],
            h: DMatrix::zeros(m, m),
            p: 0,
            beta: 0.0,
            theta: vec![],
            y: DMatrix::zeros(0, 0),
        }
    }

    fn expand(
        &mut self,
        apply: &mut dyn FnMut(&[f64], &mut [f64]),
        locked: &[Vec<f64>],
        rng: &mut ChaCha8Rng,
    ) {
        for j in self.p..self.m {
            let mut w = vec![0.0; self.n];
            apply(&self.v[j], &mut w);
            let wn = norm(&w);
            let h = orthogonalize(&mut w, &self.v[..=j], locked);
            for (i, &hi) in h.iter().enumerate() {
                self.h[(i, j)] = hi;
                self.h[(j, i)] = hi;
            }
            let mut beta = norm(&w);
            if j + 1 >= self.avail {
                w.iter_mut().for_each(|x| *x = 0.0);
                beta = 0.0;
            } else if beta <= 1e-10 * wn || beta == 0.0 {
                // invariant subspace: continue with a fresh direction
                w = random_unit(rng, self.n, &[locked, &self.v[..=j]].concat());
                beta = 0.0;
            } else {
                scale(1.0 / beta, &mut w);
            }
            if j + 1 < self.m {
                self.h[(j + 1, j)] = beta;
                self.h[(j, j + 1)] = beta;
            }
            if self.v.len() > j + 1 {
                self.v[j + 1] = w;
            } else {
                self.v.push(w);
            }
            self.beta = beta;
        }
        self.p = self.m;
    }

    /// Ritz values in descending order.
    fn analyze(&mut self) {
        let eig = SymmetricEigen::new(self.h.clone());
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        self.theta = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        self.y = DMatrix::from_fn(self.m, self.m, |r, c| eig.eigenvectors[(r, order[c])]);
    }

    fn residual(&self, i: usize) -> f64 {
        (self.beta * self.y[(self.m - 1, i)]).abs()
    }

    /// Keeps the leading `p` Ritz vectors plus the residual direction.
    fn compress(&mut self, p: usize) {
        let p = p.min(self.m - 1).max(1);
        combine_in_place(&mut self.v, &self.y, self.m, p);
        self.v.swap(p, self.m);
        self.v.truncate(p + 1);
        self.h.fill(0.0);
        for i in 0..p {
            self.h[(i, i)] = self.theta[i];
            let b = self.beta * self.y[(self.m - 1, i)];
            self.h[(p, i)] = b;
            self.h[(i, p)] = b;
        }
        self.p = p;
    }
}

/// `v[i] <- Σ_j v[j] Y[j, i]` for `i < p`, reading the first `m` vectors.
fn combine_in_place(v: &mut [Vec<f64>], y: &DMatrix<f64>, m: usize, p: usize) {
    let n = v[0].len();
    let mut tmp = vec![0.0; p * CHUNK];
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + CHUNK).min(n);
        let len = r1 - r0;
        tmp[..p * len].iter_mut().for_each(|x| *x = 0.0);
        for j in 0..m {
            let src = &v[j][r0..r1];
            for i in 0..p {
                let c = y[(j, i)];
                if c != 0.0 {
                    axpy(c, src, &mut tmp[i * len..(i + 1) * len]);
                }
            }
        }
        for i in 0..p {
            v[i][r0..r1].copy_from_slice(&tmp[i * len..(i + 1) * len]);
        }
        r0 = r1;
    }
}

/// Two passes of classical Gram-Schmidt; returns the coefficients on `basis`.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], locked: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; basis.len()];
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
        let c: Vec<f64> = basis.iter().map(|q| dot(q, w)).collect();
        for (q, &ci) in basis.iter().zip(&c) {
            axpy(-ci, q, w);
        }
        for (hi, ci) in h.iter_mut().zip(c) {
            *hi += ci;
        }
    }
    h
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, against: &[Vec<f64>]) -> Vec<f64> {
    for _ in 0..4 {
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut w, against, &[]);
        let nw = norm(&w);
        if nw > 1e-8 * (n as f64).sqrt() {
            scale(1.0 / nw, &mut w);
            return w;
        }
    }
    vec![0.0; n]
}

/// Rayleigh-Ritz of `A` on an orthonormal set: ascending values and the
/// coefficient matrix.
fn rayleigh_ritz(a: &Counted, vs: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let p = vs.len();
    let mut g = DMatrix::zeros(p, p);
    let mut w = vec![0.0; a.dim()];
    for i in 0..p {
        a.apply(&vs[i], &mut w);
        for j in 0..=i {
            let x = dot(&vs[j], &w);
            g[(i, j)] = x;
            g[(j, i)] = x;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, y)
}

fn ritz_vectors(vs: &[Vec<f64>], y: &DMatrix<f64>, q: usize) -> Vec<Vec<f64>> {
    (0..q)
        .map(|i| {
            let mut x = vec![0.0; vs[0].len()];
            for (j, v) in vs.iter().enumerate() {
                axpy(y[(j, i)], v, &mut x);
            }
            let nx = norm(&x);
            scale(1.0 / nx, &mut x);
            x
        })
        .collect()
}

fn residual_norms(a: &Counted, xs: &[Vec<f64>], vals: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; a.dim()];
    xs.iter()
        .zip(vals)
        .map(|(x, &lam)| {
            a.apply(x, &mut w);
            axpy(-lam, x, &mut w);
            norm(&w)
        })
        .collect()
}

/// Thick-restart iteration on `tr(A)` followed by Rayleigh-Ritz on `A`.
/// `retune` carries `(b, max stage degree)` when the filter may be
/// re-centred as the Ritz estimates improve.
#[allow(clippy::too_many_arguments)]
fn krylov_solve(
    a: &Counted,
    tr: &Transform,
    k: usize,
    nev: usize,
    m: usize,
    tol: f64,
    max_cycles: usize,
    start: Vec<f64>,
    locked: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
    mut retune: Option<&mut dyn FnMut(&[f64]) -> Option<Transform>>,
) -> Outcome {
    let n = a.dim();
    let avail = n - locked.len();
    let mut tr = tr.clone();
    let mut ks = KrylovSchur::new(n, m, avail, start);
    let nev = nev.min(ks.m.saturating_sub(1)).max(k.min(ks.m));
    let mut tol_b = if tr.relative() { 1e-10 } else { 0.5 * tol };
    let mut cycles = 0;
    loop {
        ks.expand(&mut |x, y| tr.apply(a, x, y), locked, rng);
        ks.analyze();
        let rel = tr.relative();
        let nconv = (0..k.min(ks.m))
            .take_while(|&i| {
                let s = if rel { ks.theta[i].abs() } else { 1.0 };
                ks.residual(i) <= tol_b * s
            })
            .count();
        cycles += 1;
        let done = nconv >= k.min(ks.m) || ks.beta == 0.0;
        let exhausted = cycles >= max_cycles;
        let p = if done || exhausted { nev } else { nev + (ks.m - nev) / 2 };
        ks.compress(p);

        if !done && !exhausted && ks.p > nev {
            if let Some(f) = retune.as_mut() {
                let (th, y) = rayleigh_ritz(a, &ks.v[..ks.p]);
                if let Some(new_tr) = f(&th) {
                    let xs = ritz_vectors(&ks.v[..ks.p], &y, nev);
                    let mut s = vec![0.0; n];
                    for x in &xs {
                        axpy(1.0, x, &mut s);
                    }
                    orthogonalize(&mut s, &[], locked);
                    let ns = norm(&s);
                    scale(1.0 / ns, &mut s);
                    tr = new_tr;
                    ks = KrylovSchur::new(n, m, avail, s);
                    continue;
                }
            }
        }

        if done || exhausted {
            let q = ks.p.min(nev.max(k));
            let (vals, y) = rayleigh_ritz(a, &ks.v[..q]);
            let xs = ritz_vectors(&ks.v[..q], &y, q);
            let res = residual_norms(a, &xs, &vals);
            let ok = res.iter().take(k).all(|&r| r <= tol);
            if ok || exhausted || tol_b < 1e-15 || ks.beta == 0.0 {
                return Outcome { values: vals, vectors: xs, residuals: res };
            }
            tol_b *= 0.01;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn filtered_solve(
    a: &Counted,
    k: usize,
    nev: usize,
    m: usize,
    tol: f64,
    max_cycles: usize,
    start: Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> (Transform, Outcome) {
    let n = a.dim();
    // Short plain run for bounds.
    let mut ks = KrylovSchur::new(n, m, n, start);
    let mut neg = |x: &[f64], y: &mut [f64]| Transform::Negate.apply(a, x, y);
    ks.expand(&mut neg, &[], rng);
    ks.analyze();
    let top = -ks.theta[ks.m - 1] + ks.beta.abs();
    let b_est = top + 0.01 * (top + ks.theta[0]).abs();
    let b = a.op.upper_bound().unwrap_or(b_est);
    for _ in 0..3 {
        ks.compress(nev + (ks.m - nev) / 2);
        ks.expand(&mut neg, &[], rng);
        ks.analyze();
    }
    ks.compress(nev + (ks.m - nev) / 2);
    let (th, y) = rayleigh_ritz(a, &ks.v[..ks.p]);
    let mut a_lo = th[nev];
    if !(b > a_lo) {
        let tr = Transform::Negate;
        let out = krylov_solve(a, &tr, k, nev, m, tol, max_cycles, ks.v[0].clone(), &[], rng, None);
        return (tr, out);
    }
    let xs = ritz_vectors(&ks.v[..ks.p], &y, nev);
    let mut s = vec![0.0; n];
    for x in &xs {
        axpy(1.0, x, &mut s);
    }
    let ns = norm(&s);
    scale(1.0 / ns, &mut s);
    drop(ks);

    let d0 = degree(a_lo, b, th[0], th[k - 1], FIRST_STAGE_DEGREE);
    let tr = Transform::chebyshev(a_lo, b, d0);
    let mut retunes = 0;
    let mut last = tr.clone();
    let mut retune = |th: &[f64]| -> Option<Transform> {
        if retunes >= MAX_RETUNES || th.len() <= nev {
            return None;
        }
        let new_a = th[nev];
        let lk = th[k - 1];
        if a_lo - new_a <= 0.25 * (a_lo - lk) {
            return None;
        }
        retunes += 1;
        a_lo = new_a;
        let cap = if retunes >= 2 { MAX_DEGREE } else { FIRST_STAGE_DEGREE * 2 };
        last = Transform::chebyshev(new_a, b, degree(new_a, b, th[0], lk, cap));
        Some(last.clone())
    };
    let out = krylov_solve(a, &tr, k, nev, m, tol, max_cycles, s, &[], rng, Some(&mut retune));
    let final_tr = if retunes > 0 { last } else { tr };
    (final_tr, out)
}

/// Deflated passes: search the complement of the found vectors for anything
/// lower than the highest found eigenvalue, and merge it in.
fn complete_degeneracies(
    a: &Counted,
    tr: &Transform,
    mut out: Outcome,
    k: usize,
    tol: f64,
    max_cycles: usize,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    let n = a.dim();
    let mut merged = false;
    for _ in 0..(k + 2) {
        let locked = &out.vectors;
        let avail = n - locked.len();
        if avail < 2 {
            break;
        }
        let thr = out.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mv = 20.min(avail);
        let start = random_unit(rng, n, locked);
        let mut ks = KrylovSchur::new(n, mv, avail, start);
        ks.expand(&mut |x, y| tr.apply(a, x, y), locked, rng);
        ks.analyze();
        let q = (ks.m / 2).max(1);
        ks.compress(q);
        let (th, _) = rayleigh_ritz(a, &ks.v[..q]);
        let slack = 1e-12 * thr.abs().max(1.0);
        let c = th.iter().filter(|&&t| t < thr - slack).count();
        if c == 0 {
            break;
        }
        let nev_c = (c + 2).min(avail - 1).max(c);
        let m_c = (2 * nev_c + 10).max(40).min(avail);
        let found = krylov_solve(a, tr, c, nev_c, m_c, tol, max_cycles, ks.v[0].clone(), locked, rng, None);
        for ((v, x), r) in found.values.into_iter().zip(found.vectors).zip(found.residuals).take(c) {
            out.values.push(v);
            out.vectors.push(x);
            out.residuals.push(r);
        }
        merged = true;
    }
    if !merged {
        return out;
    }
    // Re-orthonormalize the union and redo Rayleigh-Ritz on it.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(out.vectors.len());
    for mut v in out.vectors {
        orthogonalize(&mut v, &basis, &[]);
        let nv = norm(&v);
        if nv > 1e-8 {
            scale(1.0 / nv, &mut v);
            basis.push(v);
        }
    }
    let (vals, y) = rayleigh_ritz(a, &basis);
    let xs = ritz_vectors(&basis, &y, basis.len());
    let res = residual_norms(a, &xs, &vals);
    Outcome { values: vals, vectors: xs, residuals: res }
}
