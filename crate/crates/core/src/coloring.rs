//! Entropy and energy of color types, the constrained optimizations over
//! doubly stochastic matrices, and the separation inequalities built on them.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CspError, Result};
use crate::rng::{stream_rng, CspRng};

const SIMPLEX_TOL: f64 = 1e-12;
const ENERGY_FLOOR: f64 = 1e-300;

fn check_simplex(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || *v < -SIMPLEX_TOL) {
        return Err(CspError::Validation("type entries must be finite and nonnegative".into()));
    }
    let s: f64 = x.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(CspError::Validation(format!("type entries sum to {s}, not 1")));
    }
    Ok(())
}

/// Color frequencies of one assignment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeVector {
    w: Vec<f64>,
}

impl TypeVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(CspError::Validation("type vector needs q >= 2".into()));
        }
        check_simplex(&w)?;
        Ok(Self { w })
    }

    pub fn uniform(q: usize) -> Self {
        Self { w: vec![1.0 / q as f64; q] }
    }

    pub fn q(&self) -> usize {
        self.w.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// `||w - w̄||^2`.
    pub fn sq_dev(&self) -> f64 {
        let u = 1.0 / self.q() as f64;
        self.w.iter().map(|x| (x - u).powi(2)).sum()
    }
}

/// Joint color frequencies of a pair of assignments, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeMatrix {
    q: usize,
    v: Vec<f64>,
}

impl TypeMatrix {
    pub fn new(q: usize, v: Vec<f64>) -> Result<Self> {
        if q < 2 || v.len() != q * q {
            return Err(CspError::Validation(format!("type matrix needs q*q = {} entries", q * q)));
        }
        check_simplex(&v)?;
        Ok(Self { q, v })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(CspError::Validation("type matrix must be square".into()));
        }
        Self::new(q, rows.concat())
    }

    /// `v̄`, all entries `1/q^2`.
    pub fn uniform(q: usize) -> Self {
        Self { q, v: vec![1.0 / (q * q) as f64; q * q] }
    }

    /// `I / q`.
    pub fn diagonal(q: usize) -> Self {
        let mut v = vec![0.0; q * q];
        for i in 0..q {
            v[i * q + i] = 1.0 / q as f64;
        }
        Self { q, v }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.q + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.v.chunks(self.q).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.q).map(|j| (0..self.q).map(|i| self.get(i, j)).sum()).collect()
    }

    /// `||v - v̄||^2`.
    pub fn sq_dev(&self) -> f64 {
        let u = 1.0 / (self.q * self.q) as f64;
        self.v.iter().map(|x| (x - u).powi(2)).sum()
    }

    /// `||(v - v̄) 1||^2`.
    pub fn row_dev(&self) -> f64 {
        marginal_dev(&self.row_sums())
    }

    /// `||1^t (v - v̄)||^2`.
    pub fn col_dev(&self) -> f64 {
        marginal_dev(&self.col_sums())
    }

    /// Simultaneous row and column permutation.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let q = self.q;
        let mut v = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                v[perm[i] * q + perm[j]] = self.get(i, j);
            }
        }
        Self { q, v }
    }

    pub fn distance(&self, other: &TypeMatrix) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

fn marginal_dev(sums: &[f64]) -> f64 {
    let u = 1.0 / sums.len() as f64;
    sums.iter().map(|s| (s - u).powi(2)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Functionals {
    pub entropy: f64,
    /// `-inf` when the log argument is not positive.
    pub energy: f64,
}

impl Functionals {
    /// `H + c E`, with `c * (-inf) = -inf` for `c > 0` and `0` for `c = 0`.
    pub fn objective(&self, c: f64) -> f64 {
        if c == 0.0 {
            self.entropy
        } else {
            self.entropy + c * self.energy
        }
    }
}

fn entropy(x: &[f64]) -> f64 {
    -x.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

fn safe_log(arg: f64) -> f64 {
    if arg <= ENERGY_FLOOR {
        f64::NEG_INFINITY
    } else {
        arg.ln()
    }
}

pub fn vector_functionals(w: &TypeVector) -> Functionals {
    let sq: f64 = w.w.iter().map(|x| x * x).sum();
    Functionals { entropy: entropy(&w.w), energy: safe_log(1.0 - sq) }
}

fn energy_arg(q: usize, v: &[f64]) -> f64 {
    let mut rows = 0.0;
    let mut cols = 0.0;
    for i in 0..q {
        let r: f64 = v[i * q..(i + 1) * q].iter().sum();
        let c: f64 = (0..q).map(|j| v[j * q + i]).sum();
        rows += r * r;
        cols += c * c;
    }
    let sq: f64 = v.iter().map(|x| x * x).sum();
    1.0 - rows - cols + sq
}

pub fn matrix_functionals(v: &TypeMatrix) -> Functionals {
    Functionals { entropy: entropy(&v.v), energy: safe_log(energy_arg(v.q, &v.v)) }
}

/// `H(v̄) + c E(v̄) = 2 log q + 2c log(1 - 1/q)`.
pub fn flat_objective(q: usize, c: f64) -> f64 {
    let qf = q as f64;
    2.0 * qf.ln() + 2.0 * c * (1.0 - 1.0 / qf).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorMembership {
    pub sq_dev: f64,
    pub far: bool,
    pub member: bool,
}

/// `w` in the set of simplex vectors with `||w - w̄||^2 > eps`.
pub fn vector_membership(w: &TypeVector, eps: f64) -> VectorMembership {
    let sq_dev = w.sq_dev();
    let far = sq_dev > eps;
    VectorMembership { sq_dev, far, member: far }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatrixMembership {
    pub row_dev: f64,
    pub col_dev: f64,
    pub sq_dev: f64,
    pub rows_ok: bool,
    pub cols_ok: bool,
    pub far_ok: bool,
    pub member: bool,
}

/// Marginal deviations at most `delta` and total deviation at least `eps`.
pub fn matrix_membership(v: &TypeMatrix, delta: f64, eps: f64) -> MatrixMembership {
    let (row_dev, col_dev, sq_dev) = (v.row_dev(), v.col_dev(), v.sq_dev());
    let rows_ok = row_dev <= delta + SIMPLEX_TOL;
    let cols_ok = col_dev <= delta + SIMPLEX_TOL;
    let far_ok = sq_dev >= eps - SIMPLEX_TOL;
    MatrixMembership { row_dev, col_dev, sq_dev, rows_ok, cols_ok, far_ok, member: rows_ok && cols_ok && far_ok }
}

fn check_param(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(CspError::Domain(format!("{name} = {x} must be finite and >= 0")));
    }
    Ok(())
}

/// Scales rows and columns of a positive matrix until both marginals are
/// `1/q`.
pub fn sinkhorn(q: usize, v: &mut [f64]) {
    let target = 1.0 / q as f64;
    let mut prev = f64::INFINITY;
    for _ in 0..10_000 {
        for i in 0..q {
            let s: f64 = v[i * q..(i + 1) * q].iter().sum();
            v[i * q..(i + 1) * q].iter_mut().for_each(|x| *x *= target / s);
        }
        let mut err: f64 = 0.0;
        for j in 0..q {
            let s: f64 = (0..q).map(|i| v[i * q + j]).sum();
            err = err.max((s - target).abs());
            (0..q).for_each(|i| v[i * q + j] *= target / s);
        }
        if err < 1e-16 || err >= prev {
            break;
        }
        prev = err;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub restart: usize,
    pub iter: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffResult {
    pub q: usize,
    pub alpha: f64,
    pub value: f64,
    pub argmax: TypeMatrix,
    /// `H(v̄) + alpha E(v̄)`.
    pub flat_value: f64,
    /// Frobenius distance of the argmax from `v̄`.
    pub distance_to_flat: f64,
    /// Every restart reached the stopping tolerance.
    pub converged: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("restart,iter,value\n");
    for t in trace {
        out.push_str(&format!("{},{},{}\n", t.restart, t.iter, t.value));
    }
    out
}

const MIRROR_MAX_ITERS: usize = 20_000;
const TRACE_EVERY: usize = 25;

fn start_point(q: usize, restart: usize, rng: &mut CspRng) -> Vec<f64> {
    let n_perm = q.min(6);
    let mut v = if restart == 0 {
        vec![1.0; q * q]
    } else if restart <= n_perm {
        // a shifted permutation, blended slightly towards flat
        let shift = restart - 1;
        let mut v = vec![0.05; q * q];
        for i in 0..q {
            v[i * q + (i + shift) % q] = 1.0;
        }
        v
    } else {
        random_type_matrix(q, rng).v
    };
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x = (*x / s).max(1e-300));
    sinkhorn(q, &mut v);
    v
}

fn mirror_ascent(
    q: usize,
    alpha: f64,
    mut v: Vec<f64>,
    restart: usize,
    trace: &mut Vec<TraceRow>,
) -> (f64, Vec<f64>, bool) {
    let value = |v: &[f64]| Functionals { entropy: entropy(v), energy: safe_log(energy_arg(q, v)) }.objective(alpha);
    let mut f = value(&v);
    let mut eta = 0.5;
    let mut grad = vec![0.0; q * q];
    let mut converged = false;
    for iter in 0..MIRROR_MAX_ITERS {
        if iter % TRACE_EVERY == 0 {
            trace.push(TraceRow { restart, iter, value: f });
        }
        let arg = energy_arg(q, &v);
        let rows: Vec<f64> = (0..q).map(|i| v[i * q..(i + 1) * q].iter().sum()).collect();
        let cols: Vec<f64> = (0..q).map(|j| (0..q).map(|i| v[i * q + j]).sum()).collect();
        for i in 0..q {
            for j in 0..q {
                let x = v[i * q + j];
                let de = 2.0 * (x - rows[i] - cols[j]) / arg;
                grad[i * q + j] = -x.max(1e-300).ln() + alpha * de;
            }
        }
        let mut moved = false;
        while eta > 1e-14 {
            let mut cand: Vec<f64> = v.iter().zip(&grad).map(|(x, g)| (x * (eta * g).exp()).max(1e-300)).collect();
            let s: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|x| *x /= s);
            sinkhorn(q, &mut cand);
            let fc = value(&cand);
            if fc > f {
                let step: f64 = cand.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let gain = fc - f;
                v = cand;
                f = fc;
                eta = (eta * 1.5).min(50.0);
                moved = true;
                if step < 1e-13 || gain < 1e-16 {
                    converged = true;
                }
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            converged = true;
        }
        if converged {
            trace.push(TraceRow { restart, iter: iter + 1, value: f });
            break;
        }
    }
    (f, v, converged)
}

fn lex_better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    a.1.partial_cmp(b.1) == Some(std::cmp::Ordering::Less)
}

/// `sup H(v) + alpha E(v)` over `v` with `q v` doubly stochastic, by entropic
/// mirror ascent from `v̄`, blended permutation corners and random starts.
pub fn birkhoff_sup(q: usize, alpha: f64, n_restarts: usize, seed: u64) -> Result<BirkhoffResult> {
    if q < 3 {
        return Err(CspError::Domain(format!("q = {q} must be at least 3")));
    }
    check_param("alpha", alpha)?;
    let n_restarts = n_restarts.max(1);
    let runs: Vec<(f64, Vec<f64>, bool, Vec<TraceRow>)> = (0..n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let start = start_point(q, r, &mut rng);
            let mut trace = vec![];
            let (f, v, ok) = mirror_ascent(q, alpha, start, r, &mut trace);
            (f, v, ok, trace)
        })
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        if lex_better((runs[i].0, &runs[i].1), (runs[best].0, &runs[best].1)) {
            best = i;
        }
    }
    let argmax = TypeMatrix { q, v: runs[best].1.clone() };
    let distance_to_flat = argmax.distance(&TypeMatrix::uniform(q));
    Ok(BirkhoffResult {
        q,
        alpha,
        value: runs[best].0,
        flat_value: flat_objective(q, alpha),
        distance_to_flat,
        converged: runs.iter().all(|r| r.2),
        argmax,
        trace: runs.into_iter().flat_map(|r| r.3).collect(),
    })
}

/// Orthonormal basis of zero-sum vectors in `R^q`.
fn zero_sum_basis(q: usize) -> Vec<Vec<f64>> {
    (1..q)
        .map(|m| {
            let norm = ((m * (m + 1)) as f64).sqrt();
            let mut e = vec![0.0; q];
            e[..m].iter_mut().for_each(|x| *x = 1.0 / norm);
            e[m] = -(m as f64) / norm;
            e
        })
        .collect()
}

/// Coordinates for matrices near `v̄`: a direction of the zero-marginal
/// part plus row and column marginal shifts; every constraint of the
/// deviation set is then an interval in the zero-marginal radius.
struct ShellParam {
    q: usize,
    delta: f64,
    eps: f64,
    c: f64,
    basis: Vec<Vec<f64>>,
}

impl ShellParam {
    fn dims(&self) -> usize {
        let m = self.q - 1;
        m * m + if self.delta > 0.0 { 2 * m } else { 0 }
    }

    /// Marginal shift of norm at most `sqrt(delta)`; coordinates in the unit
    /// ball map linearly onto it.
    fn shift(&self, coords: &[f64]) -> Vec<f64> {
        let n = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = self.delta.sqrt() / n.max(1.0);
        (0..self.q).map(|i| self.basis.iter().zip(coords).map(|(e, c)| e[i] * c * scale).sum()).collect()
    }

    /// Best radius along the direction encoded by `p`; `-inf` when the
    /// direction admits no member of the set.
    fn eval(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let q = self.q;
        let qf = q as f64;
        let m = q - 1;
        let mut dir = vec![0.0; q * q];
        for a in 0..m {
            for b in 0..m {
                let w = p[a * m + b];
                for i in 0..q {
                    for j in 0..q {
                        dir[i * q + j] += w * self.basis[a][i] * self.basis[b][j];
                    }
                }
            }
        }
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (INFEASIBLE - 10.0, vec![]);
        }
        dir.iter_mut().for_each(|x| *x /= norm);
        let mut base = vec![1.0 / (qf * qf); q * q];
        let mut shift_sq = 0.0;
        if self.delta > 0.0 {
            let a = self.shift(&p[m * m..m * m + m]);
            let b = self.shift(&p[m * m + m..]);
            shift_sq = (a.iter().map(|x| x * x).sum::<f64>() + b.iter().map(|x| x * x).sum::<f64>()) / qf;
            for i in 0..q {
                for j in 0..q {
                    base[i * q + j] += (a[i] + b[j]) / qf;
                }
            }
        }
        let neg: f64 = base.iter().filter(|x| **x < 0.0).map(|x| -x).sum();
        if neg > 0.0 {
            return (INFEASIBLE - 1.0 - neg, vec![]);
        }
        let lo = (self.eps - shift_sq).max(0.0).sqrt();
        let hi = base.iter().zip(&dir).filter(|(_, d)| **d < 0.0).map(|(x, d)| x / -d).fold(f64::INFINITY, f64::min);
        if lo > hi {
            // outside the set: a penalty that shrinks towards feasible directions
            return (INFEASIBLE - (lo - hi), vec![]);
        }
        let at = |r: f64| -> Vec<f64> { base.iter().zip(&dir).map(|(x, d)| (x + r * d).max(0.0)).collect() };
        let f = |r: f64| {
            let v = at(r);
            Functionals { entropy: entropy(&v), energy: safe_log(energy_arg(q, &v)) }.objective(self.c)
        };
        let (val, r) = ray_max(&f, lo, hi);
        (val, at(r))
    }
}

const INFEASIBLE: f64 = -1e6;

/// Compass search on the shell coordinates from one start. The direction
/// block stays on the unit sphere so trial points remain bounded. Stops
/// early once the value exceeds `stop_above`.
fn compass(param: &ShellParam, mut p: Vec<f64>, stop_above: f64) -> (f64, Vec<f64>) {
    let m = (param.q - 1) * (param.q - 1);
    let normalize = |p: &mut Vec<f64>| {
        let n = p[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            p[..m].iter_mut().for_each(|x| *x /= n);
        }
    };
    normalize(&mut p);
    let (mut f, mut v) = param.eval(&p);
    let mut step = 0.25;
    let mut evals = 0;
    while step > COMPASS_MIN_STEP && evals < COMPASS_MAX_EVALS && f <= stop_above {
        let mut improved = false;
        for d in 0..p.len() {
            for sgn in [1.0, -1.0] {
                let mut c = p.clone();
                c[d] += sgn * step;
                normalize(&mut c);
                let (fc, vc) = param.eval(&c);
                evals += 1;
                if fc > f + 1e-15 * f.abs().max(1.0) {
                    p = c;
                    f = fc;
                    v = vc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (f, v)
}

const COMPASS_MIN_STEP: f64 = 1e-8;
const COMPASS_MAX_EVALS: usize = 20_000;

/// Grid then golden section on a ray.
fn ray_max(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const N: usize = 16;
    if hi <= lo {
        return (f(lo), lo);
    }
    let h = (hi - lo) / N as f64;
    let (mut best, mut arg, mut j) = (f64::NEG_INFINITY, lo, 0);
    for i in 0..=N {
        let t = if i == N { hi } else { lo + h * i as f64 };
        let v = f(t);
        if v > best {
            (best, arg, j) = (v, t, i);
        }
    }
    let (mut a, mut b) = (lo + h * j.saturating_sub(1) as f64, (lo + h * (j + 1) as f64).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-11 {
        if fc >= fd {
            (b, d, fd) = (d, c, fc);
            c = b - g * (b - a);
            fc = f(c);
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    for (v, t) in [(fc, c), (fd, d)] {
        if v > best {
            (best, arg) = (v, t);
        }
    }
    (best, arg)
}

pub const DEFAULT_RESTARTS: usize = 64;

/// `sup H(v) + c E(v)` over type matrices with marginal deviations at most
/// `delta` and total deviation at least `eps`. `None` when the set is empty
/// as far as the search can tell.
pub fn constrained_sup(
    q: usize,
    c: f64,
    delta: f64,
    eps: f64,
    n_restarts: usize,
    seed: u64,
) -> Result<Option<(f64, TypeMatrix)>> {
    shell_search(q, c, delta, eps, n_restarts, seed, f64::INFINITY)
}

fn shell_search(
    q: usize,
    c: f64,
    delta: f64,
    eps: f64,
    n_restarts: usize,
    seed: u64,
    stop_above: f64,
) -> Result<Option<(f64, TypeMatrix)>> {
    if q < 2 {
        return Err(CspError::Domain(format!("q = {q} must be at least 2")));
    }
    check_param("c", c)?;
    check_param("delta", delta)?;
    check_param("eps", eps)?;
    let param = ShellParam { q, delta, eps, c, basis: zero_sum_basis(q) };
    let dims = param.dims();
    let runs: Vec<(f64, Vec<f64>)> = (0..n_restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let m = (q - 1) * (q - 1);
            // direction uniform in a cube, marginal shifts inside the ball
            let p: Vec<f64> = (0..dims)
                .map(|d| (rng.random::<f64>() * 2.0 - 1.0) * if d < m { 1.0 } else { 0.5 / (q as f64).sqrt() })
                .collect();
            let (f, v) = compass(&param, p, stop_above);
            (f, v)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (f, v) in runs {
        if f <= INFEASIBLE {
            continue;
        }
        if best.as_ref().map_or(true, |b| lex_better((f, &v), (b.0, &b.1))) {
            best = Some((f, v));
        }
    }
    Ok(best.map(|(f, v)| {
        let s: f64 = v.iter().sum();
        (f, TypeMatrix { q, v: v.into_iter().map(|x| x / s).collect() })
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaResult {
    pub q: usize,
    pub delta: f64,
    pub eps: f64,
    /// Largest feasible `c` found.
    pub kappa: f64,
    /// Smallest infeasible `c` found.
    pub upper: f64,
    /// No infeasible `c` in the bracket.
    pub bracket_saturated: bool,
}

const FEASIBILITY_TOL: f64 = 1e-7;

/// Upper end of the interval of `c` with
/// `sup_B H(v) + c E(v) <= H(v̄) + c E(v̄)`, by bisection on `[0, 4 q log q]`.
pub fn kappa(q: usize, delta: f64, eps: f64, tol: f64) -> Result<KappaResult> {
    kappa_with(q, delta, eps, tol, DEFAULT_RESTARTS, 0)
}

pub fn kappa_with(q: usize, delta: f64, eps: f64, tol: f64, n_restarts: usize, seed: u64) -> Result<KappaResult> {
    if !(tol > 0.0) {
        return Err(CspError::Domain("tolerance must be positive".into()));
    }
    let feasible = |c: f64| -> Result<bool> {
        let flat = flat_objective(q, c);
        match shell_search(q, c, delta, eps, n_restarts, seed, flat + FEASIBILITY_TOL)? {
            None => Err(CspError::Domain(format!("no type matrix with deviations (delta={delta}, eps={eps})"))),
            Some((v, _)) => Ok(v <= flat + FEASIBILITY_TOL),
        }
    };
    let mut lo = 0.0;
    let mut hi = 4.0 * q as f64 * (q as f64).ln();
    if !feasible(lo)? {
        return Ok(KappaResult { q, delta, eps, kappa: 0.0, upper: 0.0, bracket_saturated: false });
    }
    if feasible(hi)? {
        return Ok(KappaResult { q, delta, eps, kappa: hi, upper: hi, bracket_saturated: true });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KappaResult { q, delta, eps, kappa: lo, upper: hi, bracket_saturated: false })
}

/// Halves `delta` from `eps / 4` until the constrained threshold reaches
/// `alpha`; returns the witness `(delta, kappa)`.
pub fn local_delta(q: usize, alpha: f64, eps: f64, tol: f64, max_halvings: usize) -> Result<Option<(f64, f64)>> {
    let mut delta = eps / 4.0;
    for _ in 0..max_halvings {
        let k = kappa(q, delta, eps, tol)?;
        if k.kappa >= alpha {
            return Ok(Some((delta, k.kappa)));
        }
        delta *= 0.5;
    }
    Ok(None)
}

/// `[H(w̄) + alpha E(w̄)] - [H(w) + alpha E(w)] - alpha eps / (2 (1 - 1/q))`,
/// expected nonnegative when `||w - w̄||^2 >= eps`.
pub fn vector_gap_slack(w: &TypeVector, alpha: f64, eps: f64) -> Result<f64> {
    check_param("alpha", alpha)?;
    check_param("eps", eps)?;
    if w.sq_dev() < eps - SIMPLEX_TOL {
        return Err(CspError::Validation(format!("||w - w̄||^2 = {} is below eps = {eps}", w.sq_dev())));
    }
    let q = w.q() as f64;
    let flat = vector_functionals(&TypeVector::uniform(w.q())).objective(alpha);
    let here = vector_functionals(w).objective(alpha);
    if here == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(flat - here - alpha * eps / (2.0 * (1.0 - 1.0 / q)))
}

/// `[H(v̄) + alpha E(v̄)] - [H(v) + alpha E(v)] - (kappa - alpha)(eps - 2 delta) / (2 (1 - 1/q)^2)`
/// for `v` in the deviation set, `eps > 2 delta` and `alpha < kappa`.
pub fn matrix_gap_slack(v: &TypeMatrix, alpha: f64, kappa: f64, delta: f64, eps: f64) -> Result<f64> {
    check_param("alpha", alpha)?;
    if eps <= 2.0 * delta {
        return Err(CspError::Validation(format!("need eps > 2 delta, got eps={eps}, delta={delta}")));
    }
    if alpha >= kappa {
        return Err(CspError::Validation(format!("need alpha < kappa, got {alpha} >= {kappa}")));
    }
    if !matrix_membership(v, delta, eps).member {
        return Err(CspError::Validation("matrix outside the deviation set".into()));
    }
    let q = v.q() as f64;
    let here = matrix_functionals(v).objective(alpha);
    if here == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(flat_objective(v.q(), alpha) - here - (kappa - alpha) * (eps - 2.0 * delta) / (2.0 * (1.0 - 1.0 / q).powi(2)))
}

/// `E(v̄) + log(1 + [||v-v̄||^2 - ||(v-v̄)1||^2 - ||1^t(v-v̄)||^2] / (1-1/q)^2)`;
/// equal to `E(v)`.
pub fn energy_by_deviation(v: &TypeMatrix) -> f64 {
    let q = v.q() as f64;
    let flat = 2.0 * (1.0 - 1.0 / q).ln();
    flat + safe_log(1.0 + (v.sq_dev() - v.row_dev() - v.col_dev()) / (1.0 - 1.0 / q).powi(2))
}

/// Random type matrix: exponential entries raised to a random power, so
/// draws range from near-flat to nearly concentrated.
pub fn random_type_matrix(q: usize, rng: &mut impl Rng) -> TypeMatrix {
    let p = 0.2 + 4.0 * rng.random::<f64>();
    let mut v: Vec<f64> = (0..q * q).map(|_| Exp1.sample(rng)).map(|x: f64| x.powf(p)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    TypeMatrix { q, v }
}

/// Draw from the deviation set by rejection. Each draw is scaled to uniform
/// marginals and, when `delta > 0`, its rows and columns are then tilted by
/// random factors so the marginal deviations spread over `[0, delta]`.
pub fn random_member(q: usize, delta: f64, eps: f64, rng: &mut impl Rng, max_tries: usize) -> Option<TypeMatrix> {
    for _ in 0..max_tries {
        let mut v = random_type_matrix(q, rng);
        v.v.iter_mut().for_each(|x| *x = x.max(1e-300));
        sinkhorn(q, &mut v.v);
        if delta > 0.0 {
            let spread = 4.0 * delta.sqrt() * rng.random::<f64>();
            let rows: Vec<f64> = (0..q).map(|_| (spread * (rng.random::<f64>() - 0.5)).exp()).collect();
            let cols: Vec<f64> = (0..q).map(|_| (spread * (rng.random::<f64>() - 0.5)).exp()).collect();
            for (idx, x) in v.v.iter_mut().enumerate() {
                *x *= rows[idx / q] * cols[idx % q];
            }
        }
        let s: f64 = v.v.iter().sum();
        v.v.iter_mut().for_each(|x| *x /= s);
        if matrix_membership(&v, delta, eps).member {
            return Some(v);
        }
    }
    None
}

/// Random simplex vector with `||w - w̄||^2 = eps` exactly, when reachable.
pub fn random_vector_at(q: usize, eps: f64, rng: &mut impl Rng) -> Option<TypeVector> {
    let u = 1.0 / q as f64;
    let mut d: Vec<f64> = (0..q).map(|_| rng.random::<f64>() - 0.5).collect();
    let mean = d.iter().sum::<f64>() / q as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return None;
    }
    let w: Vec<f64> = d.iter().map(|x| u + x * eps.sqrt() / n).collect();
    if w.iter().any(|x| *x < 0.0) {
        return None;
    }
    Some(TypeVector { w })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functional_examples() {
        let q = 3;
        let f = matrix_functionals(&TypeMatrix::uniform(q));
        assert!((f.entropy - 2.0 * 3f64.ln()).abs() < 1e-15);
        assert!((f.energy - 2.0 * (2.0f64 / 3.0).ln()).abs() < 1e-15);
        let f = vector_functionals(&TypeVector::new(vec![1.0, 0.0, 0.0]).unwrap());
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.energy, f64::NEG_INFINITY);
        assert_eq!(f.objective(1.0), f64::NEG_INFINITY);
        assert_eq!(f.objective(0.0), 0.0);
        let f = matrix_functionals(&TypeMatrix::diagonal(q));
        assert!((f.entropy - 3f64.ln()).abs() < 1e-15);
        assert!((f.energy - (2.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(TypeMatrix::new(2, vec![0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(TypeVector::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn membership_examples() {
        let m = matrix_membership(&TypeMatrix::uniform(3), 0.0, 1e-9);
        assert!(m.rows_ok && m.cols_ok && !m.far_ok);
        let m = matrix_membership(&TypeMatrix::diagonal(3), 0.0, 0.1);
        assert!(m.member);
        assert!((m.sq_dev - 2.0 / 9.0).abs() < 1e-15);
        assert!(!vector_membership(&TypeVector::uniform(3), 1e-9).member);
    }

    #[test]
    fn energy_identity() {
        let mut rng = stream_rng(5, 0);
        for q in [3, 4, 5] {
            for _ in 0..500 {
                let v = random_type_matrix(q, &mut rng);
                let e = matrix_functionals(&v).energy;
                assert!((e - energy_by_deviation(&v)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = stream_rng(6, 0);
        let v = random_type_matrix(4, &mut rng);
        let p = v.permuted(&[2, 0, 3, 1]);
        let (a, b) = (matrix_functionals(&v), matrix_functionals(&p));
        assert!((a.entropy - b.entropy).abs() < 1e-12 && (a.energy - b.energy).abs() < 1e-12);
    }

    #[test]
    fn birkhoff_examples() {
        let r = birkhoff_sup(3, 1.0, 16, 0).unwrap();
        assert!((r.value - 1.386294).abs() < 1e-6, "{}", r.value);
        assert!(r.distance_to_flat < 1e-4);
        let r = birkhoff_sup(3, 0.0, 8, 0).unwrap();
        assert!((r.value - 2.0 * 3f64.ln()).abs() < 1e-9);
        let r = birkhoff_sup(3, 10.0, 16, 0).unwrap();
        assert!(r.distance_to_flat > 0.1);
        assert!(r.value > flat_objective(3, 10.0));
        assert!(birkhoff_sup(2, 1.0, 4, 0).is_err());
    }

    #[test]
    fn constrained_sup_below_flat_at_zero() {
        let (v, m) = constrained_sup(3, 0.0, 0.0, 0.1, 16, 0).unwrap().unwrap();
        assert!(v < flat_objective(3, 0.0));
        let mem = matrix_membership(&m, 0.0, 0.1);
        assert!(mem.member, "{mem:?}");
        assert!(constrained_sup(3, 1.0, 0.0, 0.9, 8, 0).unwrap().is_none());
    }

    #[test]
    fn kappa_bounds() {
        let k = kappa_with(3, 0.0, 0.1, 1e-3, 16, 0).unwrap();
        assert!(k.kappa >= 2.0 * 2f64.ln() - 1e-3, "{k:?}");
        assert!(k.kappa < k.upper);
        let wider = kappa_with(3, 0.01, 0.1, 1e-3, 16, 0).unwrap();
        assert!(wider.kappa <= k.kappa + 2e-3);
    }

    #[test]
    fn vector_slack() {
        let mut rng = stream_rng(9, 0);
        for q in [3, 4, 5] {
            for _ in 0..200 {
                if let Some(w) = random_vector_at(q, 0.1, &mut rng) {
                    assert!(vector_gap_slack(&w, 1.0, 0.1).unwrap() >= 0.0);
                }
            }
        }
        let w = TypeVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(vector_gap_slack(&w, 1.0, 0.1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sinkhorn_marginals() {
        let mut rng = stream_rng(2, 0);
        let mut v = random_type_matrix(4, &mut rng).v;
        sinkhorn(4, &mut v);
        let m = TypeMatrix { q: 4, v };
        assert!(m.row_dev() < 1e-28 && m.col_dev() < 1e-28);
    }
}
