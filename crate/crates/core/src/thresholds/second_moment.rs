//! First and second moment exponents.

use serde::Serialize;

use crate::clause::eval_levels;
use crate::ensemble::{omega, omega_hat, ClauseDistribution};
use crate::error::{CspError, Result};
use crate::fsum;

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `-(1+t)/2 log(1+t) - (1-t)/2 log(1-t)`; zero at `t = 0`, `-log 2` at `t = ±1`.
pub fn pair_entropy(theta: f64) -> f64 {
    -0.5 * (xlogx(1.0 + theta) + xlogx(1.0 - theta))
}

/// Entropy of a `±1` variable with mean `theta`.
pub fn magnetization_entropy(theta: f64) -> f64 {
    -(xlogx((1.0 + theta) / 2.0) + xlogx((1.0 - theta) / 2.0))
}

fn check(alpha: f64, theta: f64, lo: f64) -> Result<()> {
    if !(lo..=1.0).contains(&theta) {
        return Err(CspError::Domain(format!("theta = {theta} outside [{lo}, 1]")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(CspError::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    Ok(())
}

/// Per-variable growth rate of the expected number of solutions with
/// magnetization `theta`.
pub fn first_moment_exponent(dist: &ClauseDistribution, alpha: f64, theta: f64) -> Result<f64> {
    check(alpha, theta, -1.0)?;
    let h = magnetization_entropy(theta);
    if alpha == 0.0 {
        return Ok(h);
    }
    Ok(h + alpha * dist.mean_log_biased_norm_sq(theta))
}

/// Exponent of the number of balanced solution pairs at overlap `theta`,
/// normalized by the squared first moment:
/// `H(theta) + alpha E log[(phi, T_theta phi) / ||phi||^4]`.
pub fn phi(dist: &ClauseDistribution, alpha: f64, theta: f64) -> Result<f64> {
    check(alpha, theta, 0.0)?;
    Ok(PhiEvaluator::new(dist).eval(alpha, theta))
}

/// Caches the per-clause polynomials so grid sweeps are cheap.
pub struct PhiEvaluator {
    terms: Vec<(f64, Vec<f64>, f64)>,
}

impl PhiEvaluator {
    pub fn new(dist: &ClauseDistribution) -> Self {
        let terms = dist.summary().iter().map(|e| (e.weight, e.weight_levels.clone(), e.norm_sq * e.norm_sq)).collect();
        Self { terms }
    }

    pub fn eval(&self, alpha: f64, theta: f64) -> f64 {
        let h = pair_entropy(theta);
        if alpha == 0.0 {
            return h;
        }
        let e = fsum(self.terms.iter().map(|(w, levels, n4)| {
            let c = eval_levels(levels, theta);
            debug_assert!(c > 0.0, "self-correlation of a satisfiable clause is positive");
            w * (c / n4).ln()
        }));
        h + alpha * e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiSup {
    pub alpha: f64,
    pub delta: f64,
    /// `sup` over `[delta, 1]`.
    pub sup: f64,
    pub argmax: f64,
    /// `sup` over `(0, 1]`, for checking that the maximum sits at 0.
    pub sup_open: f64,
    pub argmax_open: f64,
    pub grid_points: usize,
}

pub const DEFAULT_PHI_GRID: usize = 10_000;

/// Supremum of `phi` over `[delta, 1]` (and `(0, 1]`) by a dense grid followed
/// by golden-section refinement around the best grid point.
pub fn phi_sup(dist: &ClauseDistribution, alpha: f64, delta: f64, grid_points: usize) -> Result<PhiSup> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CspError::Domain(format!("delta = {delta} must lie in (0, 1]")));
    }
    check(alpha, delta, 0.0)?;
    let grid_points = grid_points.max(2);
    let ev = PhiEvaluator::new(dist);
    let f = |t: f64| ev.eval(alpha, t);
    let (sup, argmax) = maximize_on(&f, delta, 1.0, grid_points);
    let (sup_open, argmax_open) = {
        let lo = 1.0 / grid_points as f64;
        let (v, t) = maximize_on(&f, lo.min(delta), 1.0, grid_points);
        let (v2, t2) = maximize_on(&f, 1e-9, lo.min(delta), 64);
        if v2 > v {
            (v2, t2)
        } else {
            (v, t)
        }
    };
    Ok(PhiSup { alpha, delta, sup, argmax, sup_open, argmax_open, grid_points })
}

/// Grid maximum on `[lo, hi]` refined by golden section on the neighbouring
/// cells.
pub(crate) fn maximize_on(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    if hi <= lo {
        return (f(lo), lo);
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    let mut best_j = 0;
    for j in 0..n {
        let t = if j + 1 == n { hi } else { lo + step * j as f64 };
        let v = f(t);
        if v > best.0 {
            best = (v, t);
            best_j = j;
        }
    }
    let a = lo + step * best_j.saturating_sub(1) as f64;
    let b = (lo + step * (best_j + 1) as f64).min(hi);
    let (v, t) = golden_max(f, a, b, 1e-13);
    if v > best.0 {
        (v, t)
    } else {
        best
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (f(t), t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SatBounds {
    pub lower: f64,
    pub upper: f64,
    /// `phi_sup` at `0.9 * lower`; a negative `sup` certifies the second
    /// moment bound at that density.
    pub certificate: PhiSup,
    pub certified: bool,
}

pub const SAT_CERTIFICATE_DELTA: f64 = 0.02;

pub fn sat_bounds(dist: &ClauseDistribution) -> Result<SatBounds> {
    let ln2 = std::f64::consts::LN_2;
    let lower = omega(dist) * ln2;
    let upper = omega_hat(dist) * ln2;
    let certificate = phi_sup(dist, 0.9 * lower, SAT_CERTIFICATE_DELTA, DEFAULT_PHI_GRID)?;
    Ok(SatBounds { lower, upper, certified: certificate.sup < 0.0, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{builtin, Builtin};

    fn hyp(k: usize) -> ClauseDistribution {
        builtin(Builtin::Hyp2col, k).unwrap()
    }

    #[test]
    fn first_moment_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(first_moment_exponent(&hyp(3), 0.0, 0.0).unwrap(), ln2);
        let a = ln2 / -(0.75f64).ln();
        assert!((a - 2.40942).abs() < 1e-5);
        assert!(first_moment_exponent(&hyp(3), a, 0.0).unwrap().abs() < 1e-12);
        let x = builtin(Builtin::Xor, 4).unwrap();
        assert!(first_moment_exponent(&x, 1.0, 0.0).unwrap().abs() < 1e-15);
        assert!(first_moment_exponent(&x, -1.0, 0.0).is_err());
        assert!(first_moment_exponent(&x, 1.0, 1.1).is_err());
    }

    #[test]
    fn phi_examples() {
        for d in [hyp(3), builtin(Builtin::Nae, 4).unwrap(), builtin(Builtin::Xor, 6).unwrap()] {
            for a in [0.1, 1.0, 10.0] {
                assert_eq!(phi(&d, a, 0.0).unwrap(), 0.0);
            }
        }
        let v = phi(&hyp(3), 1.0, 1.0).unwrap();
        assert!((v - (-2f64.ln() - 0.75f64.ln())).abs() < 1e-12);
        assert!((v + 0.405465).abs() < 1e-6);
        // H(0.5) = -0.130812, (phi, T_.5 phi) = 0.609375
        let v = phi(&hyp(3), 1.0, 0.5).unwrap();
        let oracle = pair_entropy(0.5) + (0.609375f64 / 0.5625).ln();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v + 0.0507693).abs() < 1e-6);
        assert!(phi(&hyp(3), 1.0, -0.1).is_err());
    }

    #[test]
    fn phi_sup_examples() {
        let a = 0.9 * 15.0 * std::f64::consts::LN_2;
        assert!(phi_sup(&hyp(5), a, 0.02, DEFAULT_PHI_GRID).unwrap().sup < 0.0);
        let s = phi_sup(&hyp(3), 0.0, 0.1, 1000).unwrap();
        assert!((s.sup - pair_entropy(0.1)).abs() < 1e-12 && s.sup < 0.0);
        assert!(phi_sup(&hyp(3), 10.0, 0.5, 1000).unwrap().sup > 0.0);
        assert!(phi_sup(&hyp(3), 1.0, 0.0, 1000).is_err());
    }

    #[test]
    fn phi_sup_is_grid_stable() {
        for k in 3..=8 {
            let d = hyp(k);
            let a = 0.9 * omega(&d) * std::f64::consts::LN_2;
            let s1 = phi_sup(&d, a, 0.02, 2000).unwrap();
            let s2 = phi_sup(&d, a, 0.02, 4000).unwrap();
            assert!((s1.sup - s2.sup).abs() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn sat_bound_examples() {
        let b = sat_bounds(&hyp(3)).unwrap();
        assert!((b.lower - 2.079442).abs() < 1e-6);
        assert!((b.upper - 2.409420).abs() < 1e-6);
        let b = sat_bounds(&builtin(Builtin::Xor, 4).unwrap()).unwrap();
        assert!((b.lower - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((b.upper - 1.0).abs() < 1e-12);
        for k in 3..=10 {
            let b = sat_bounds(&hyp(k)).unwrap();
            let lead = (1u64 << (k - 1)) as f64 * std::f64::consts::LN_2;
            assert!(b.lower <= b.upper);
            assert!((b.lower / lead - 1.0).abs() < 2.0 / (1u64 << (k - 1)) as f64);
            assert!((b.upper / lead - 1.0).abs() < 2.0 / (1u64 << (k - 1)) as f64);
        }
    }

    #[test]
    fn entropies() {
        assert_eq!(pair_entropy(0.0), 0.0);
        assert!((pair_entropy(1.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((pair_entropy(0.5) + 0.130812).abs() < 1e-6);
        assert!((magnetization_entropy(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(magnetization_entropy(1.0), 0.0);
    }
}
