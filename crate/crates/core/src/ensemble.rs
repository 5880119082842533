//! Clause distributions, the structural conditions on them, and the two
//! ensemble constants `omega` and `omega_hat`.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clause::{
    derivative, eval_levels, fourier_transform, inverse_fourier, noise_apply, not_all_equal, parity, BiasVector,
    ClauseTable, FourierSpectrum,
};
use crate::error::{CspError, Result};
use crate::fsum;

/// Explicit NAE supports are built up to this arity; above it a single
/// representative stands for the whole sign orbit.
pub const NAE_EXPLICIT_MAX_K: usize = 10;

const WEIGHT_TOL: f64 = 1e-12;

/// One support clause. With `sign_orbit` set the entry stands for the
/// uniform mixture of `x -> table(x ∘ s)` over all sign vectors `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportClause {
    pub table: ClauseTable,
    pub weight: f64,
    pub sign_orbit: bool,
}

/// A concrete clause drawn from a distribution: support entry plus the
/// sign flip applied to it (always 0 for plain entries).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClauseRef {
    pub index: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub flip: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

/// Per-entry quantities reused by the threshold evaluators. Level vectors
/// are indexed by subset size.
#[derive(Clone, Debug)]
pub(crate) struct EntrySummary {
    pub weight: f64,
    pub sign_orbit: bool,
    pub norm_sq: f64,
    pub influence: f64,
    /// `sum_{|Q|=j} phi_Q`; gives `||phi||_theta^2` for Boolean tables.
    pub levels: Vec<f64>,
    /// `sum_{|Q|=j} phi_Q^2`.
    pub weight_levels: Vec<f64>,
    /// `sum_{|Q|=j} (phi^(1)_Q)^2`.
    pub deriv_levels: Vec<f64>,
    /// `sum_{|Q|=j} |phi^(1)_Q|`.
    pub deriv_abs_levels: Vec<f64>,
    pub spectrum: Option<FourierSpectrum>,
}

#[derive(Clone, Debug)]
pub struct ClauseDistribution {
    k: usize,
    support: Vec<SupportClause>,
    name: Option<String>,
    symmetry_note: Option<String>,
    summary: OnceLock<Vec<EntrySummary>>,
}

impl PartialEq for ClauseDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.support == other.support
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Hyp2col,
    Nae,
    Xor,
}

impl FromStr for Builtin {
    type Err = CspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hyp2col" => Ok(Self::Hyp2col),
            "nae" => Ok(Self::Nae),
            "xor" => Ok(Self::Xor),
            other => Err(CspError::Validation(format!("unknown ensemble {other:?} (expected hyp2col, nae or xor)"))),
        }
    }
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Hyp2col => "hyp2col",
            Self::Nae => "nae",
            Self::Xor => "xor",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    k: usize,
    clauses: Vec<ClauseEntryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ClauseEntryFile {
    truth_table: String,
    weight: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    sign_orbit: bool,
}

impl ClauseDistribution {
    pub fn new(k: usize, support: Vec<(ClauseTable, f64)>) -> Result<Self> {
        Self::from_entries(
            k,
            support.into_iter().map(|(table, weight)| SupportClause { table, weight, sign_orbit: false }).collect(),
        )
    }

    pub fn from_entries(k: usize, support: Vec<SupportClause>) -> Result<Self> {
        if support.is_empty() {
            return Err(CspError::Validation("distribution has empty support".into()));
        }
        let mut total = 0.0;
        for (j, c) in support.iter().enumerate() {
            if c.table.k() != k {
                return Err(CspError::Validation(format!(
                    "clause {j} has arity {}, distribution has k = {k}",
                    c.table.k()
                )));
            }
            if !c.table.is_boolean() {
                return Err(CspError::Validation(format!("clause {j} is not 0/1 valued")));
            }
            if c.table.values().iter().all(|&v| v == 0.0) {
                return Err(CspError::Validation(format!("clause {j} is never satisfied")));
            }
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(CspError::Validation(format!("clause {j} has non-positive weight {}", c.weight)));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(CspError::Validation(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { k, support, name: None, symmetry_note: None, summary: OnceLock::new() })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_symmetry_note(mut self, note: impl Into<String>) -> Self {
        self.symmetry_note = Some(note.into());
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> &[SupportClause] {
        &self.support
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn symmetry_note(&self) -> Option<&str> {
        self.symmetry_note.as_deref()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(s)?;
        let entries = file
            .clauses
            .into_iter()
            .map(|c| {
                Ok(SupportClause {
                    table: ClauseTable::from_bit_string(file.k, &c.truth_table)?,
                    weight: c.weight,
                    sign_orbit: c.sign_orbit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = Self::from_entries(file.k, entries)?;
        Ok(match file.name {
            Some(n) => dist.with_name(n),
            None => dist,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = DistributionFile {
            k: self.k,
            name: self.name.clone(),
            clauses: self
                .support
                .iter()
                .map(|c| ClauseEntryFile {
                    truth_table: c.table.to_bit_string().expect("support is Boolean"),
                    weight: c.weight,
                    sign_orbit: c.sign_orbit,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Draws a clause according to the weights (and a uniform sign flip for
    /// orbit entries).
    pub fn sample_clause<R: Rng + ?Sized>(&self, sampler: &ClauseSampler, rng: &mut R) -> ClauseRef {
        let index = if self.support.len() == 1 { 0 } else { sampler.index.sample(rng) };
        let flip = if self.support[index].sign_orbit { rng.random::<u32>() & ((1u64 << self.k) - 1) as u32 } else { 0 };
        ClauseRef { index, flip }
    }

    pub fn sampler(&self) -> ClauseSampler {
        let index = WeightedIndex::new(self.support.iter().map(|c| c.weight)).expect("validated weights");
        ClauseSampler { index }
    }

    /// Value of a drawn clause at an assignment.
    pub fn eval(&self, clause: ClauseRef, bits: u32) -> bool {
        self.support[clause.index].table.value(bits ^ clause.flip) != 0.0
    }

    /// The concrete table of a drawn clause.
    pub fn table_of(&self, clause: ClauseRef) -> ClauseTable {
        let t = &self.support[clause.index].table;
        if clause.flip == 0 {
            return t.clone();
        }
        ClauseTable::from_fn(self.k, |a| t.value(a.bits() ^ clause.flip)).expect("same arity")
    }

    pub(crate) fn summary(&self) -> &[EntrySummary] {
        self.summary.get_or_init(|| self.support.iter().map(summarize).collect())
    }

    /// `E_phi ||phi||^2`.
    pub fn mean_norm_sq(&self) -> f64 {
        fsum(self.summary().iter().map(|e| e.weight * e.norm_sq))
    }

    /// `E_phi ||phi||_theta^2`; the orbit average kills every level but the
    /// empty set.
    pub fn mean_biased_norm_sq(&self, theta: f64) -> f64 {
        fsum(self.summary().iter().map(|e| {
            let v = if e.sign_orbit { e.levels[0] } else { eval_levels(&e.levels, theta) };
            e.weight * v.max(0.0)
        }))
    }

    /// `E_phi log ||phi||_theta^2`, `-inf` if some clause has zero mass.
    pub fn mean_log_biased_norm_sq(&self, theta: f64) -> f64 {
        let mut terms = Vec::with_capacity(self.support.len());
        for e in self.summary() {
            let v = if e.sign_orbit {
                orbit_mean_log_biased_norm(e.spectrum.as_ref().expect("orbit keeps spectrum"), theta)
            } else {
                let n = eval_levels(&e.levels, theta);
                if n <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    n.ln()
                }
            };
            if v == f64::NEG_INFINITY {
                return v;
            }
            terms.push(e.weight * v);
        }
        fsum(terms)
    }
}

pub struct ClauseSampler {
    index: WeightedIndex<f64>,
}

/// `E_s log (T_theta phi)(s)`: for Boolean `phi`, `||phi_s||_theta^2` is the
/// noisy table evaluated at `s`.
fn orbit_mean_log_biased_norm(spec: &FourierSpectrum, theta: f64) -> f64 {
    let h = BiasVector::constant(spec.k(), theta).expect("theta validated by caller");
    let noisy = inverse_fourier(&noise_apply(spec, &h).expect("matching arity"));
    let n = noisy.values().len() as f64;
    let mut acc = 0.0;
    for &v in noisy.values() {
        if v <= 1e-300 {
            return f64::NEG_INFINITY;
        }
        acc += v.ln();
    }
    acc / n
}

fn summarize(c: &SupportClause) -> EntrySummary {
    let k = c.table.k();
    let spec = fourier_transform(&c.table);
    let mut levels = vec![0.0; k + 1];
    for (m, &v) in spec.coeffs().iter().enumerate() {
        levels[m.count_ones() as usize] += v;
    }
    let weight_levels = spec.weight_levels();
    let deriv_levels = spec.derivative_weight_levels(1);
    let mut deriv_abs_levels = vec![0.0; k.max(1)];
    for (m, &v) in spec.coeffs().iter().enumerate() {
        if m & 1 == 1 {
            deriv_abs_levels[m.count_ones() as usize - 1] += v.abs();
        }
    }
    let influence = deriv_levels.iter().sum();
    EntrySummary {
        weight: c.weight,
        sign_orbit: c.sign_orbit,
        norm_sq: c.table.norm_sq(),
        influence,
        levels,
        weight_levels,
        deriv_levels,
        deriv_abs_levels,
        spectrum: c.sign_orbit.then_some(spec),
    }
}

/// Builds one of the named ensembles.
pub fn builtin(kind: Builtin, k: usize) -> Result<ClauseDistribution> {
    if k < 2 {
        return Err(CspError::Validation(format!("{} needs k >= 2, got {k}", kind.name())));
    }
    let full = ((1u64 << k) - 1) as u32;
    let dist = match kind {
        Builtin::Hyp2col => ClauseDistribution::new(k, vec![(not_all_equal(k, full)?, 1.0)])?,
        Builtin::Nae if k > NAE_EXPLICIT_MAX_K => ClauseDistribution::from_entries(
            k,
            vec![SupportClause { table: not_all_equal(k, full)?, weight: 1.0, sign_orbit: true }],
        )?
        .with_symmetry_note(
            "one representative for all 2^k literal-sign patterns; they share norms, influences and |coefficients|",
        ),
        Builtin::Nae => {
            let w = 1.0 / (1u64 << k) as f64;
            let support = (0..=full).map(|s| Ok((not_all_equal(k, s)?, w))).collect::<Result<Vec<_>>>()?;
            ClauseDistribution::new(k, support)?.with_symmetry_note("all support clauses share norms and influences")
        }
        Builtin::Xor => {
            if k % 2 == 1 {
                return Err(CspError::Validation(format!(
                    "xor needs even k (odd parity clauses are not balanced), got {k}"
                )));
            }
            ClauseDistribution::new(k, vec![(parity(k, 1)?, 0.5), (parity(k, -1)?, 0.5)])?
        }
    };
    Ok(dist.with_name(format!("{}({k})", kind.name())))
}

pub fn load_distribution(path: impl AsRef<Path>) -> Result<ClauseDistribution> {
    ClauseDistribution::from_json_str(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleConstants {
    pub omega: f64,
    pub omega_hat: f64,
    /// `omega <= omega_hat` (up to rounding).
    pub ordered: bool,
}

/// `1 / E_phi[2 I_1(phi) / ||phi||^2]`; `+inf` when no clause has influence.
pub fn omega(dist: &ClauseDistribution) -> f64 {
    let s = fsum(dist.summary().iter().map(|e| e.weight * 2.0 * e.influence / e.norm_sq));
    if s <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / s
    }
}

/// `-1 / E_phi log ||phi||^2`; `+inf` when every clause is constant 1.
pub fn omega_hat(dist: &ClauseDistribution) -> f64 {
    let s = fsum(dist.summary().iter().map(|e| e.weight * e.norm_sq.ln()));
    if s >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / s
    }
}

pub fn constants(dist: &ClauseDistribution) -> EnsembleConstants {
    let (o, oh) = (omega(dist), omega_hat(dist));
    EnsembleConstants { omega: o, omega_hat: oh, ordered: o <= oh * (1.0 + 1e-12) }
}

/// `(phi^(i), T_theta phi^(i)) / ||phi^(i)||^2`, or `None` if `phi^(i) = 0`.
pub fn derivative_decay_ratio(table: &ClauseTable, i: usize, theta: f64) -> Result<Option<f64>> {
    let d = fourier_transform(&derivative(table, i)?);
    let w = d.weight_levels();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Ok(None);
    }
    crate::clause::self_correlation(&d, theta).map(|v| Some(v / total))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub pass: bool,
    /// `"all"` when every permutation was tried, `"generators"` when a
    /// transposition and a full cycle were (which suffices).
    pub mode: &'static str,
    pub witness: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceCheck {
    pub pass: bool,
    /// `(support index, assignment bits)` with `phi(x) != phi(-x)`.
    pub witness: Option<(usize, u32)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub pass: bool,
    /// `(support index, position, bits of the other k-1 coordinates)`.
    pub witness: Option<(usize, usize, u32)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub pass: bool,
    pub worst_theta: f64,
    /// `max_{theta != 0} E log||phi||_theta^2 - E log||phi||^2`.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub permutation_symmetric: SymmetryCheck,
    pub balanced: BalanceCheck,
    pub feasible: FeasibilityCheck,
    pub dominance: DominanceCheck,
    pub norm_floor: f64,
    pub l1_exponent_a: f64,
    /// Smallest `-log(||T_theta phi^(i)||^2/||phi^(i)||^2) / (k(1-theta))`.
    pub decay_constant_c: f64,
    pub decay_constant_c_theta: f64,
    /// Same with `(phi^(i), T_theta phi^(i))` in the numerator; this is the
    /// form that bounds the iteration function `F_k`.
    pub decay_constant_c_inner: f64,
    pub decay_constant_c_inner_theta: f64,
    /// Every influence equals `(1 - ||phi||^2)/2`.
    pub influences_uniform: bool,
    /// Per `l = 1..k`: largest over the support of the share of non-constant
    /// Fourier weight sitting on levels `1..=l`.
    pub low_level_weight_share: Vec<f64>,
    pub grid_resolution: usize,
}

/// Symmetric grid on `[-1, 1]` with both endpoints.
pub fn theta_grid(size: usize) -> Vec<f64> {
    (0..size).map(|j| -1.0 + 2.0 * j as f64 / (size - 1) as f64).collect()
}

pub fn check_conditions(dist: &ClauseDistribution, grid_size: usize) -> Result<ConditionReport> {
    if grid_size < 3 {
        return Err(CspError::Validation("theta grid needs at least 3 points".into()));
    }
    let k = dist.k();
    let grid = theta_grid(grid_size);

    let balanced = check_balance(dist);
    let feasible = check_feasibility(dist);
    let permutation_symmetric = check_permutation_symmetry(dist);

    let base = dist.mean_log_biased_norm_sq(0.0);
    let mut dominance = DominanceCheck { pass: true, worst_theta: f64::NAN, worst_margin: f64::NEG_INFINITY };
    for &t in &grid {
        if t.abs() < 1e-15 {
            continue;
        }
        let margin = dist.mean_log_biased_norm_sq(t) - base;
        if margin > dominance.worst_margin || dominance.worst_theta.is_nan() {
            dominance.worst_margin = margin;
            dominance.worst_theta = t;
        }
    }
    dominance.pass = dominance.worst_margin <= 1e-10;

    let interior: Vec<f64> = grid.iter().copied().filter(|&t| t > 0.0 && t < 1.0).collect();
    let mut a = f64::NEG_INFINITY;
    let mut c = (f64::INFINITY, f64::NAN);
    let mut c4 = (f64::INFINITY, f64::NAN);
    let mut influences_uniform = true;
    let mut shares = vec![0.0f64; k];
    let mut norm_floor = f64::INFINITY;
    for entry in dist.support() {
        let table = &entry.table;
        let norm = table.norm_sq();
        norm_floor = norm_floor.min(norm);
        let spec = fourier_transform(table);
        for i in 1..=k {
            let w = spec.derivative_weight_levels(i);
            let total: f64 = w.iter().sum();
            if (total - (1.0 - norm) / 2.0).abs() > 1e-12 {
                influences_uniform = false;
            }
            let bit = 1usize << (i - 1);
            let l1: f64 = spec.coeffs().iter().enumerate().filter(|(m, _)| m & bit != 0).map(|(_, v)| v.abs()).sum();
            if l1 > 0.0 {
                a = a.max(l1.ln() / (k as f64).ln());
            }
            if total <= 0.0 {
                continue;
            }
            for &t in &interior {
                let denom = k as f64 * (1.0 - t);
                let sq = eval_levels(&w, t * t) / total;
                let inner = eval_levels(&w, t) / total;
                let cs = -sq.ln() / denom;
                let ci = -inner.ln() / denom;
                if cs < c.0 {
                    c = (cs, t);
                }
                if ci < c4.0 {
                    c4 = (ci, t);
                }
            }
        }
        let levels = spec.weight_levels();
        let nonconst: f64 = levels[1..].iter().sum();
        if nonconst > 0.0 {
            let mut acc = 0.0;
            for l in 1..=k {
                acc += levels[l];
                shares[l - 1] = shares[l - 1].max(acc / nonconst);
            }
        }
    }

    Ok(ConditionReport {
        permutation_symmetric,
        balanced,
        feasible,
        dominance,
        norm_floor,
        l1_exponent_a: a,
        decay_constant_c: c.0,
        decay_constant_c_theta: c.1,
        decay_constant_c_inner: c4.0,
        decay_constant_c_inner_theta: c4.1,
        influences_uniform,
        low_level_weight_share: shares,
        grid_resolution: grid_size,
    })
}

fn check_balance(dist: &ClauseDistribution) -> BalanceCheck {
    let full = ((1u64 << dist.k()) - 1) as u32;
    for (j, c) in dist.support().iter().enumerate() {
        for x in 0..=full {
            if c.table.value(x) != c.table.value(!x & full) {
                return BalanceCheck { pass: false, witness: Some((j, x)) };
            }
        }
    }
    BalanceCheck { pass: true, witness: None }
}

fn check_feasibility(dist: &ClauseDistribution) -> FeasibilityCheck {
    let k = dist.k();
    for (j, c) in dist.support().iter().enumerate() {
        for pos in 0..k {
            for y in 0..1u32 << (k - 1) {
                let lo = crate::clause::insert_bit(y, pos, 0);
                let hi = crate::clause::insert_bit(y, pos, 1);
                if c.table.value(lo) == 0.0 && c.table.value(hi) == 0.0 {
                    return FeasibilityCheck { pass: false, witness: Some((j, pos + 1, y)) };
                }
            }
        }
    }
    FeasibilityCheck { pass: true, witness: None }
}

/// Canonical key of a support entry: the packed table, or for sign orbits
/// the smallest packed member that vanishes at index 0.
fn canonical_key(entry_table: &ClauseTable, orbit: bool) -> (bool, Vec<u64>) {
    if !orbit {
        return (false, entry_table.packed());
    }
    let zeros: Vec<u32> = (0..entry_table.values().len() as u32).filter(|&x| entry_table.value(x) == 0.0).collect();
    let best = zeros
        .iter()
        .map(|&z| {
            ClauseTable::from_fn(entry_table.k(), |a| entry_table.value(a.bits() ^ z)).expect("same arity").packed()
        })
        .min()
        .unwrap_or_else(|| entry_table.packed());
    (true, best)
}

fn weight_map(dist: &ClauseDistribution, perm: Option<&[usize]>) -> HashMap<(bool, Vec<u64>), f64> {
    let mut m: HashMap<(bool, Vec<u64>), f64> = HashMap::new();
    for c in dist.support() {
        let t = match perm {
            Some(p) => c.table.permuted(p).expect("permutation has length k"),
            None => c.table.clone(),
        };
        *m.entry(canonical_key(&t, c.sign_orbit)).or_default() += c.weight;
    }
    m
}

fn same_weights(a: &HashMap<(bool, Vec<u64>), f64>, b: &HashMap<(bool, Vec<u64>), f64>) -> bool {
    a.len() == b.len() && a.iter().all(|(key, w)| b.get(key).is_some_and(|v| (v - w).abs() <= 1e-12))
}

fn check_permutation_symmetry(dist: &ClauseDistribution) -> SymmetryCheck {
    let k = dist.k();
    let base = weight_map(dist, None);
    let factorial: f64 = (1..=k).map(|j| j as f64).product();
    let exhaustive = dist.support().len() as f64 * factorial <= 1e6;
    let perms: Vec<Vec<usize>> = if exhaustive {
        all_permutations(k)
    } else {
        let mut swap: Vec<usize> = (0..k).collect();
        swap.swap(0, 1);
        let cycle: Vec<usize> = (0..k).map(|i| (i + 1) % k).collect();
        vec![swap, cycle]
    };
    let mode = if exhaustive { "all" } else { "generators" };
    for p in perms {
        if !same_weights(&base, &weight_map(dist, Some(&p))) {
            return SymmetryCheck { pass: false, mode, witness: Some(p) };
        }
    }
    SymmetryCheck { pass: true, mode, witness: None }
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm
    let mut a: Vec<usize> = (0..k).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::influence;

    #[test]
    fn builtin_examples() {
        let h = builtin(Builtin::Hyp2col, 3).unwrap();
        assert_eq!(h.support().len(), 1);
        assert_eq!(h.support()[0].table.norm_sq(), 0.75);
        let x = builtin(Builtin::Xor, 4).unwrap();
        assert_eq!(x.support().len(), 2);
        for c in x.support() {
            assert_eq!(c.table.norm_sq(), 0.5);
        }
        assert!(builtin(Builtin::Xor, 3).is_err());
        assert!("sat".parse::<Builtin>().is_err());
        assert_eq!(builtin(Builtin::Nae, 4).unwrap().support().len(), 16);
        let big = builtin(Builtin::Nae, 12).unwrap();
        assert_eq!(big.support().len(), 1);
        assert!(big.symmetry_note().is_some());
    }

    #[test]
    fn load_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        std::fs::write(&p, r#"{"k":3,"clauses":[{"truth_table":"01111110","weight":1.0}]}"#).unwrap();
        assert_eq!(load_distribution(&p).unwrap(), builtin(Builtin::Hyp2col, 3).unwrap());
        std::fs::write(&p, r#"{"k":3,"clauses":[{"truth_table":"01111110","weight":0.9}]}"#).unwrap();
        assert!(matches!(load_distribution(&p), Err(CspError::Validation(_))));
        std::fs::write(&p, r#"{"k":3,"clauses":[]}"#).unwrap();
        assert!(matches!(load_distribution(&p), Err(CspError::Validation(_))));
        std::fs::write(&p, r#"{"k":3,"clauses":[{"truth_table":"0111","weight":1.0}]}"#).unwrap();
        assert!(load_distribution(&p).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let d = builtin(Builtin::Xor, 4).unwrap();
        let back = ClauseDistribution::from_json_str(&d.to_json_string().unwrap()).unwrap();
        assert_eq!(back, d);
        let d = builtin(Builtin::Nae, 11).unwrap();
        let back = ClauseDistribution::from_json_str(&d.to_json_string().unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn omega_examples() {
        for k in 3..=10 {
            let expect = (1u64 << (k - 1)) as f64 - 1.0;
            assert!((omega(&builtin(Builtin::Hyp2col, k).unwrap()) - expect).abs() < 1e-12);
            assert!((omega(&builtin(Builtin::Nae, k).unwrap()) - expect).abs() < 1e-12);
        }
        for k in [2, 4, 6, 8, 10] {
            let x = builtin(Builtin::Xor, k).unwrap();
            assert!((omega(&x) - 1.0).abs() < 1e-12);
            assert!((omega_hat(&x) - 1.0 / 2f64.ln()).abs() < 1e-12);
        }
        let h = builtin(Builtin::Hyp2col, 3).unwrap();
        assert!((omega_hat(&h) - 3.476059).abs() < 1e-6);
        let one = ClauseDistribution::new(3, vec![(ClauseTable::constant(3, 1.0).unwrap(), 1.0)]).unwrap();
        assert_eq!(omega(&one), f64::INFINITY);
        assert_eq!(omega_hat(&one), f64::INFINITY);
    }

    #[test]
    fn constants_are_ordered_for_builtins() {
        for k in 2..=12 {
            for kind in [Builtin::Hyp2col, Builtin::Nae, Builtin::Xor] {
                if kind == Builtin::Xor && k % 2 == 1 {
                    continue;
                }
                let c = constants(&builtin(kind, k).unwrap());
                assert!(c.ordered, "{kind:?} k={k}: {c:?}");
            }
        }
    }

    #[test]
    fn hyp2col_passes_all_conditions() {
        let r = check_conditions(&builtin(Builtin::Hyp2col, 3).unwrap(), 201).unwrap();
        assert!(r.permutation_symmetric.pass && r.permutation_symmetric.mode == "all");
        assert!(r.balanced.pass && r.feasible.pass && r.dominance.pass);
        assert!(r.influences_uniform);
        assert!(r.norm_floor >= 0.5);
        assert!(r.dominance.worst_margin < 0.0);
    }

    #[test]
    fn asymmetric_clause_fails_balance() {
        let f = ClauseTable::from_fn(3, |a| if a.spin(1) == 1 { 1.0 } else { 0.0 }).unwrap();
        let d = ClauseDistribution::new(3, vec![(f, 1.0)]).unwrap();
        let r = check_conditions(&d, 11).unwrap();
        assert!(!r.balanced.pass);
        let (_, x) = r.balanced.witness.unwrap();
        assert_ne!(x & 1, (!x) & 1);
        assert!(!r.permutation_symmetric.pass);
        assert!(!r.feasible.pass);
    }

    #[test]
    fn hyp2col_decay_ratio_closed_form() {
        for k in 3..=8 {
            let f = not_all_equal(k, (1 << k) - 1).unwrap();
            for j in 0..=100 {
                let t = j as f64 / 100.0;
                let r = derivative_decay_ratio(&f, 1, t).unwrap().unwrap();
                let expect = ((1.0 + t) / 2.0).powi(k as i32 - 1) - ((1.0 - t) / 2.0).powi(k as i32 - 1);
                assert!((r - expect).abs() < 1e-10);
                // (1+t)/2 <= exp(-(1-t)/2) bounds the first term
                assert!(r <= (-((k - 1) as f64) * (1.0 - t) / 2.0).exp() + 1e-12);
            }
        }
    }

    #[test]
    fn xor_decay_constant_at_least_one() {
        for k in [2, 4, 6, 8] {
            let r = check_conditions(&builtin(Builtin::Xor, k).unwrap(), 201).unwrap();
            assert!(r.decay_constant_c >= 1.0 - 1e-9, "k={k}: {}", r.decay_constant_c);
        }
    }

    #[test]
    fn influences_match_norms() {
        for kind in [Builtin::Hyp2col, Builtin::Nae, Builtin::Xor] {
            for k in [2, 4, 6] {
                let d = builtin(kind, k).unwrap();
                for c in d.support() {
                    for i in 1..=k {
                        let inf = influence(&c.table, i).unwrap();
                        assert!((inf - (1.0 - c.table.norm_sq()) / 2.0).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn nae_dominance_chain() {
        for k in 3..=6 {
            let d = builtin(Builtin::Nae, k).unwrap();
            let base = d.mean_log_biased_norm_sq(0.0);
            for t in theta_grid(41) {
                let lhs = d.mean_log_biased_norm_sq(t);
                let mid = d.mean_biased_norm_sq(t).ln();
                assert!(lhs <= mid + 1e-10);
                assert!((mid - base).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orbit_representative_matches_explicit_support() {
        let k = 6;
        let full = (1u32 << k) - 1;
        let explicit = builtin(Builtin::Nae, k).unwrap();
        let orbit = ClauseDistribution::from_entries(
            k,
            vec![SupportClause { table: not_all_equal(k, full).unwrap(), weight: 1.0, sign_orbit: true }],
        )
        .unwrap();
        assert!((omega(&orbit) - omega(&explicit)).abs() < 1e-12);
        assert!((omega_hat(&orbit) - omega_hat(&explicit)).abs() < 1e-12);
        for t in theta_grid(21) {
            let a = orbit.mean_log_biased_norm_sq(t);
            let b = explicit.mean_log_biased_norm_sq(t);
            assert!(a == b || (a - b).abs() < 1e-12, "theta {t}: {a} vs {b}");
            assert!((orbit.mean_biased_norm_sq(t) - explicit.mean_biased_norm_sq(t)).abs() < 1e-12);
        }
        let r = check_conditions(&orbit, 21).unwrap();
        assert!(r.permutation_symmetric.pass && r.balanced.pass && r.feasible.pass);
    }

    #[test]
    fn nae_symmetry_uses_generators_when_large() {
        let r = check_conditions(&builtin(Builtin::Nae, 8).unwrap(), 11).unwrap();
        assert_eq!(r.permutation_symmetric.mode, "generators");
        assert!(r.permutation_symmetric.pass);
    }

    #[test]
    fn heap_permutations_are_distinct() {
        let p = all_permutations(5);
        assert_eq!(p.len(), 120);
        let set: std::collections::HashSet<_> = p.into_iter().collect();
        assert_eq!(set.len(), 120);
    }

    #[test]
    fn sampled_flips_evaluate_consistently() {
        let d = builtin(Builtin::Nae, 11).unwrap();
        let s = d.sampler();
        let mut rng = crate::rng::stream_rng(3, 0);
        for _ in 0..20 {
            let c = d.sample_clause(&s, &mut rng);
            let t = d.table_of(c);
            for x in [0u32, 5, 77, 2047] {
                assert_eq!(d.eval(c, x), t.value(x) == 1.0);
            }
        }
    }
}
