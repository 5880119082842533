//! Tree recursions: the naive-reconstruction iteration, its tangency
//! threshold, and the upper-bound dynamics that certify non-reconstruction.

use serde::Serialize;

use crate::clause::eval_levels;
use crate::ensemble::{omega, ClauseDistribution};
use crate::error::{CspError, Result};
use crate::fsum;

/// Below this the iterate is declared to have reached the zero fixed point.
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursionState {
    pub alpha: f64,
    /// `z_0 = 1, z_1, ...`
    pub z: Vec<f64>,
    pub converged: bool,
    pub limit: f64,
}

/// `1 - exp(-c z^{k-1})` without cancellation for small arguments.
fn naive_step(c: f64, k: usize, z: f64) -> f64 {
    -(-c * z.powi(k as i32 - 1)).exp_m1()
}

/// Iterates `z <- 1 - exp(-k alpha z^{k-1} / omega)` from `z = 1`.
pub fn naive_recursion_limit(
    dist: &ClauseDistribution,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RecursionState> {
    naive_recursion(dist.k(), omega(dist), alpha, tol, max_iter)
}

pub fn naive_recursion(k: usize, omega: f64, alpha: f64, tol: f64, max_iter: usize) -> Result<RecursionState> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(CspError::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    if !(tol > 0.0) {
        return Err(CspError::Domain("tolerance must be positive".into()));
    }
    let c = k as f64 * alpha / omega;
    let mut z = vec![1.0];
    let mut cur = 1.0;
    for _ in 0..max_iter {
        let next = naive_step(c, k, cur);
        z.push(next);
        if next < ZERO_FLOOR {
            return Ok(RecursionState { alpha, z, converged: true, limit: 0.0 });
        }
        if (cur - next).abs() < tol {
            return Ok(RecursionState { alpha, z, converged: true, limit: next });
        }
        cur = next;
    }
    Ok(RecursionState { alpha, z, converged: false, limit: cur })
}

/// Positive root of `u = (k-1) log(1+u)` for `k >= 3` (0 for `k = 2`).
pub fn tangency_root(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(CspError::Domain(format!("k = {k} must be at least 2")));
    }
    if k == 2 {
        return Ok(0.0);
    }
    let km1 = (k - 1) as f64;
    let g = |u: f64| km1 * u.ln_1p() - u;
    let dg = |u: f64| km1 / (1.0 + u) - 1.0;
    // g is concave with g(0) = 0 and g(1) > 0 for k >= 3.
    let mut lo = 1.0;
    let mut hi = 2.0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut u = hi;
    for _ in 0..200 {
        let step = g(u) / dg(u);
        let mut next = u - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if g(next) > 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        if (next - u).abs() <= 1e-15 * next.max(1.0) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        u = next;
    }
    Ok(u)
}

/// Density at which `z = 1 - exp(-k alpha z^{k-1}/omega)` first acquires a
/// positive fixed point: `omega u (1+1/u)^{k-1} / (k(k-1))`.
pub fn tangency_alpha(k: usize, omega: f64) -> Result<f64> {
    let u = tangency_root(k)?;
    let kf = k as f64;
    // u (1+1/u)^{k-1} -> 1 as u -> 0 when k = 2
    let shape = if k == 2 { 1.0 } else { u * ((kf - 1.0) * (1.0 / u).ln_1p()).exp() };
    Ok(omega * shape / (kf * (kf - 1.0)))
}

/// The closed form `omega (1 + u (1+1/u)^{k-2}) / (k(k-1))` as printed in the
/// literature this tool follows; it differs from [`tangency_alpha`] at
/// finite `k` and agrees to leading order.
pub fn printed_tree_formula(k: usize, omega: f64) -> Result<f64> {
    let u = tangency_root(k)?;
    let kf = k as f64;
    let shape = if k == 2 { 0.0 } else { u * ((kf - 2.0) * (1.0 / u).ln_1p()).exp() };
    Ok(omega * (1.0 + shape) / (kf * (kf - 1.0)))
}

pub fn tree_threshold_paper_formula(dist: &ClauseDistribution) -> Result<f64> {
    printed_tree_formula(dist.k(), omega(dist))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TreeThreshold {
    pub closed_form: f64,
    /// `None` for `k = 2`, where the transition is transcritical and the
    /// iteration converges too slowly near threshold for bisection.
    pub bisection: Option<f64>,
    pub root_u: f64,
}

impl TreeThreshold {
    pub fn value(&self) -> f64 {
        self.closed_form
    }
}

/// Largest-fixed-point test by direct iteration from `z = 1`.
fn recursion_survives(k: usize, omega: f64, alpha: f64) -> bool {
    let c = k as f64 * alpha / omega;
    let mut z: f64 = 1.0;
    for _ in 0..50_000_000u64 {
        let next = naive_step(c, k, z);
        if next < ZERO_FLOOR {
            return false;
        }
        if z - next <= 1e-15 * z {
            return true;
        }
        z = next;
    }
    true
}

/// Bisection on the density at which the naive recursion stops collapsing
/// to zero; independent of the tangency algebra.
pub fn tree_threshold_bisection(k: usize, omega: f64, tol: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi = omega;
    while !recursion_survives(k, omega, hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if recursion_survives(k, omega, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn tree_threshold_numeric(dist: &ClauseDistribution, tol: f64) -> Result<TreeThreshold> {
    tree_threshold_for(dist.k(), omega(dist), tol)
}

pub fn tree_threshold_for(k: usize, omega: f64, tol: f64) -> Result<TreeThreshold> {
    if !(tol > 0.0) {
        return Err(CspError::Domain("tolerance must be positive".into()));
    }
    let root_u = tangency_root(k)?;
    let closed_form = tangency_alpha(k, omega)?;
    if k == 2 {
        return Ok(TreeThreshold { closed_form, bisection: None, root_u });
    }
    let b = tree_threshold_bisection(k, omega, tol)?;
    if (b - closed_form).abs() > tol && !(b.is_infinite() && closed_form.is_infinite()) {
        return Err(CspError::Disagreement {
            what: "tree threshold (tangency vs bisection)",
            first: closed_form,
            second: b,
        });
    }
    Ok(TreeThreshold { closed_form, bisection: Some(b), root_u })
}

/// The two functions driving the non-reconstruction bound dynamics.
pub fn iter_bound_functions(dist: &ClauseDistribution, theta: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(CspError::Domain(format!("theta = {theta} outside [0, 1]")));
    }
    Ok(BoundFunctions::new(dist).eval(theta))
}

pub struct BoundFunctions {
    terms: Vec<(f64, Vec<f64>, Vec<f64>, f64, f64)>,
}

impl BoundFunctions {
    pub fn new(dist: &ClauseDistribution) -> Self {
        let terms = dist
            .summary()
            .iter()
            .map(|e| (e.weight, e.deriv_levels.clone(), e.deriv_abs_levels.clone(), e.norm_sq, e.influence))
            .collect();
        Self { terms }
    }

    /// `(F(theta), R(theta))`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let f = fsum(self.terms.iter().map(|(w, dl, _, n, _)| 2.0 * w * eval_levels(dl, theta) / n));
        let r = fsum(self.terms.iter().map(|(w, _, al, n, inf)| {
            let s: f64 = al.iter().enumerate().map(|(j, a)| a * theta.powi(j.max(2) as i32)).sum();
            2.0 * w * (2.0 * inf / n) * s
        }));
        (f, r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTrajectory {
    pub alpha: f64,
    /// Upper bounds on `E h` at depths `1, 2, ...`.
    pub h_ave: Vec<f64>,
    /// Upper bounds on `E[h | one root clause]` at depths `2, 3, ...`.
    pub h_hat_ave: Vec<f64>,
    pub certified_nonrecon: bool,
}

pub const CERTIFY_FLOOR: f64 = 1e-12;

/// Runs the upper-bound recursion for `ell_max` depths. Certification needs
/// the bound to fall below [`CERTIFY_FLOOR`] and keep contracting for ten
/// more steps.
pub fn certify_nonreconstruction(dist: &ClauseDistribution, alpha: f64, ell_max: usize) -> Result<BoundTrajectory> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(CspError::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    let k = dist.k() as f64;
    let om = omega(dist);
    let funcs = BoundFunctions::new(dist);
    let mut h = -(-k * alpha * (1.0 - 1.0 / om)).exp_m1();
    let mut out = BoundTrajectory { alpha, h_ave: vec![h], h_hat_ave: vec![], certified_nonrecon: false };
    let mut below_since = None;
    let mut contracting = true;
    loop {
        let depth = out.h_ave.len();
        if below_since.is_none() && h < CERTIFY_FLOOR {
            below_since = Some(depth);
        }
        match below_since {
            Some(s) if depth >= s + 10 => break,
            None if depth >= ell_max.max(1) => break,
            _ => {}
        }
        let hat = if depth == 1 {
            // the depth-1 bias only takes the values 0 and 1
            funcs.eval(h).0
        } else {
            0.5 * funcs.eval(h).0 + 0.5 * funcs.eval(h.sqrt()).1
        };
        let next = -(-2.0 * k * alpha * hat).exp_m1();
        if below_since.is_some() && next > h {
            contracting = false;
        }
        out.h_hat_ave.push(hat);
        out.h_ave.push(next);
        h = next;
    }
    out.certified_nonrecon = below_since.is_some() && contracting;
    Ok(out)
}
