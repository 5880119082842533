//! Finite random instances: sampling, exhaustive solution counts, overlap
//! and joint-type statistics, and exact correlation decay.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ClauseDistribution, ClauseRef};
use crate::error::{CspError, Result};
use crate::limits::{MAX_BINARY_VARS, MAX_COLORINGS, MAX_LISTED_SOLUTIONS};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceClause {
    pub dist_index: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub flip: u32,
    pub vars: Vec<usize>,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl InstanceClause {
    fn clause_ref(&self) -> ClauseRef {
        ClauseRef { index: self.dist_index, flip: self.flip }
    }
}

#[derive(Clone, Debug)]
pub struct FactorGraphInstance {
    dist: Arc<ClauseDistribution>,
    pub n: usize,
    pub alpha: f64,
    pub clauses: Vec<InstanceClause>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    alpha: f64,
    clauses: Vec<InstanceClause>,
}

impl FactorGraphInstance {
    pub fn new(dist: &ClauseDistribution, n: usize, alpha: f64, clauses: Vec<InstanceClause>) -> Result<Self> {
        for (a, c) in clauses.iter().enumerate() {
            if c.dist_index >= dist.support().len() {
                return Err(CspError::Validation(format!("clause {a} refers to missing support entry")));
            }
            if c.vars.len() != dist.k() || c.vars.iter().any(|&v| v >= n) {
                return Err(CspError::Validation(format!("clause {a} has bad variable list")));
            }
            if c.flip != 0 && !dist.support()[c.dist_index].sign_orbit {
                return Err(CspError::Validation(format!("clause {a} flips a plain support entry")));
            }
        }
        Ok(Self { dist: Arc::new(dist.clone()), n, alpha, clauses })
    }

    pub fn distribution(&self) -> &ClauseDistribution {
        &self.dist
    }

    /// Fraction of clauses drawn from each support entry.
    pub fn empirical_clause_freq(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.dist.support().len()];
        for c in &self.clauses {
            f[c.dist_index] += 1.0;
        }
        let m = self.clauses.len().max(1) as f64;
        f.iter_mut().for_each(|v| *v /= m);
        f
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile { n: self.n, alpha: self.alpha, clauses: self.clauses.clone() })?)
    }

    pub fn from_json_str(s: &str, dist: &ClauseDistribution) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(s)?;
        Self::new(dist, f.n, f.alpha, f.clauses)
    }

    fn satisfies(&self, x: u32) -> bool {
        self.clauses.iter().all(|c| {
            let mut idx = 0u32;
            for (j, &v) in c.vars.iter().enumerate() {
                idx |= (x >> v & 1) << j;
            }
            self.dist.eval(c.clause_ref(), idx)
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(CspError::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    Ok(())
}

/// `round(alpha n)` clauses, each on `k` i.i.d. uniform variables.
pub fn sample_instance(dist: &ClauseDistribution, n: usize, alpha: f64, seed: u64) -> Result<FactorGraphInstance> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(CspError::Validation("instance needs n >= 1".into()));
    }
    let m = (alpha * n as f64).round() as usize;
    let sampler = dist.sampler();
    let mut rng = stream_rng(seed, 0);
    let clauses = (0..m)
        .map(|_| {
            let c = dist.sample_clause(&sampler, &mut rng);
            let vars = (0..dist.k()).map(|_| rng.random_range(0..n)).collect();
            InstanceClause { dist_index: c.index, flip: c.flip, vars }
        })
        .collect();
    FactorGraphInstance::new(dist, n, alpha, clauses)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionStats {
    pub z: u64,
    /// Solutions with `|sum_i x_i| <= 1`.
    pub z_balanced: u64,
    /// `x` is a solution iff `-x` is.
    pub antipodal_symmetric: bool,
    /// Solution bit patterns (bit `i` set means `x_i = +1`), when at most
    /// the listing cap.
    #[serde(skip)]
    pub solutions: Option<Vec<u32>>,
}

const CHUNK: u64 = 1 << 14;

pub fn solve_exhaustive(inst: &FactorGraphInstance) -> Result<SolutionStats> {
    let n = inst.n;
    if n > MAX_BINARY_VARS {
        return Err(CspError::SizeCap { what: "binary variables", requested: n as f64, cap: MAX_BINARY_VARS as f64 });
    }
    let total = 1u64 << n;
    let chunks: Vec<(u64, u64, Vec<u32>)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut z = 0;
            let mut zb = 0;
            let mut sols = vec![];
            for x in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let x = x as u32;
                if inst.satisfies(x) {
                    z += 1;
                    let plus = x.count_ones() as i64;
                    if (2 * plus - n as i64).abs() <= 1 {
                        zb += 1;
                    }
                    sols.push(x);
                }
            }
            (z, zb, sols)
        })
        .collect();
    let z: u64 = chunks.iter().map(|c| c.0).sum();
    let z_balanced = chunks.iter().map(|c| c.1).sum();
    let all: Vec<u32> = chunks.into_iter().flat_map(|c| c.2).collect();
    let full = if n == 32 { u32::MAX } else { ((1u64 << n) - 1) as u32 };
    let antipodal_symmetric = all.iter().all(|&x| all.binary_search(&(!x & full)).is_ok());
    let solutions = (z <= MAX_LISTED_SOLUTIONS).then_some(all);
    Ok(SolutionStats { z, z_balanced, antipodal_symmetric, solutions })
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// `log E Z` by summing over magnetizations.
pub fn expected_z_ln(dist: &ClauseDistribution, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 || n > 10_000 {
        return Err(CspError::Range(format!("n = {n} must be in 1..=10000")));
    }
    let m = (alpha * n as f64).round();
    let lf = ln_factorials(n);
    let terms: Vec<f64> = (0..=n)
        .map(|j| {
            let theta = (2.0 * j as f64 - n as f64) / n as f64;
            let p = dist.mean_biased_norm_sq(theta);
            let clause_part = if m == 0.0 {
                0.0
            } else if p <= 0.0 {
                f64::NEG_INFINITY
            } else {
                m * p.ln()
            };
            lf[n] - lf[j] - lf[n - j] + clause_part
        })
        .collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(top);
    }
    Ok(top + crate::fsum(terms.iter().map(|t| (t - top).exp())).ln())
}

pub fn expected_z(dist: &ClauseDistribution, n: usize, alpha: f64) -> Result<f64> {
    expected_z_ln(dist, n, alpha).map(f64::exp)
}

/// Weighted histogram as `(value, weight)` rows sorted by value.
pub type Histogram = Vec<(f64, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinaryOverlapStats {
    pub exact: bool,
    pub pairs: u64,
    pub overlap_histogram: Histogram,
    pub balanced_pair_histogram: Histogram,
    pub mean_overlap: f64,
    pub mean_sq_overlap: f64,
}

fn to_hist(map: BTreeMap<i64, f64>, n: usize) -> Histogram {
    map.into_iter().map(|(k, w)| (k as f64 / n as f64, w)).collect()
}

fn need_solutions(stats: &SolutionStats) -> Result<&[u32]> {
    if stats.z == 0 {
        return Err(CspError::NoSolutions);
    }
    stats.solutions.as_deref().ok_or(CspError::SizeCap {
        what: "listed solutions",
        requested: stats.z as f64,
        cap: MAX_LISTED_SOLUTIONS as f64,
    })
}

const EXACT_PAIR_CAP: f64 = 1e6;

/// Overlap `Q_12 = x1·x2 / n` of two independent uniform solutions; all
/// pairs when `Z^2 <= 10^6`, otherwise `n_pairs` sampled pairs.
pub fn overlap_stats(inst: &FactorGraphInstance, n_pairs: usize, seed: u64) -> Result<BinaryOverlapStats> {
    let stats = solve_exhaustive(inst)?;
    let sols = need_solutions(&stats)?;
    let n = inst.n;
    let half = n as i64;
    let balanced = |x: u32| (2 * x.count_ones() as i64 - half).abs() <= 1;
    let q = |a: u32, b: u32| n as i64 - 2 * (a ^ b).count_ones() as i64;
    let z = sols.len();
    let mut hist: BTreeMap<i64, f64> = BTreeMap::new();
    let mut bal: BTreeMap<i64, f64> = BTreeMap::new();
    let exact = (z as f64).powi(2) <= EXACT_PAIR_CAP;
    let mut pairs = 0u64;
    let mut add = |a: u32, b: u32| {
        let v = q(a, b);
        *hist.entry(v).or_default() += 1.0;
        if balanced(a) && balanced(b) {
            *bal.entry(v).or_default() += 1.0;
        }
    };
    if exact {
        for &a in sols {
            for &b in sols {
                add(a, b);
            }
        }
        pairs = (z * z) as u64;
    } else {
        let mut rng = stream_rng(seed, 2);
        for _ in 0..n_pairs {
            let a = sols[rng.random_range(0..z)];
            let b = sols[rng.random_range(0..z)];
            add(a, b);
            pairs += 1;
        }
    }
    let total: f64 = hist.values().sum();
    let mean_overlap = hist.iter().map(|(k, w)| *k as f64 / n as f64 * w).sum::<f64>() / total;
    let mean_sq_overlap = hist.iter().map(|(k, w)| (*k as f64 / n as f64).powi(2) * w).sum::<f64>() / total;
    Ok(BinaryOverlapStats {
        exact,
        pairs,
        overlap_histogram: to_hist(hist, n),
        balanced_pair_histogram: to_hist(bal, n),
        mean_overlap,
        mean_sq_overlap,
    })
}

/// CSV rows `value,count`.
pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("value,count\n");
    for (v, c) in h {
        out.push_str(&format!("{v},{c}\n"));
    }
    out
}

/// Largest `|c(v) - c(-v)| / sqrt(c(v) + c(-v))` over the bins of a
/// histogram; under exact symmetry it is 0, under sampling it is a z-score.
pub fn histogram_asymmetry(h: &Histogram) -> f64 {
    let map: HashMap<i64, f64> = h.iter().map(|(v, w)| ((v * 1e9).round() as i64, *w)).collect();
    map.iter()
        .map(|(k, w)| {
            let other = map.get(&-k).copied().unwrap_or(0.0);
            if w + other == 0.0 {
                0.0
            } else {
                (w - other).abs() / (w + other).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// Variable-graph distances from `i`: two variables are adjacent when they
/// share a clause. Unreachable variables get `usize::MAX`.
pub fn variable_distances(inst: &FactorGraphInstance, i: usize) -> Vec<usize> {
    let mut adj = vec![vec![]; inst.n];
    for c in &inst.clauses {
        for &a in &c.vars {
            for &b in &c.vars {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    let mut dist = vec![usize::MAX; inst.n];
    dist[i] = 0;
    let mut queue = std::collections::VecDeque::from([i]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Exact `|| mu_{i,B} - mu_i mu_B ||_TV` for `B = {j : d(i,j) >= r}` under
/// the uniform measure on solutions.
pub fn correlation_decay(inst: &FactorGraphInstance, i: usize, r: usize) -> Result<f64> {
    if i >= inst.n {
        return Err(CspError::Range(format!("variable {i} not in 0..{}", inst.n)));
    }
    if r == 0 {
        return Err(CspError::Validation("radius must be at least 1".into()));
    }
    let stats = solve_exhaustive(inst)?;
    let sols = need_solutions(&stats)?;
    let d = variable_distances(inst, i);
    let mask: u32 = (0..inst.n).filter(|&j| d[j] >= r).fold(0, |m, j| m | 1 << j);
    if mask == 0 {
        return Ok(0.0);
    }
    let z = sols.len() as f64;
    // boundary pattern -> (count with x_i = -1, count with x_i = +1)
    let mut joint: BTreeMap<u32, [f64; 2]> = BTreeMap::new();
    let mut plus = 0.0;
    for &x in sols {
        let s = (x >> i & 1) as usize;
        joint.entry(x & mask).or_insert([0.0; 2])[s] += 1.0;
        plus += s as f64;
    }
    let pi = [(z - plus) / z, plus / z];
    let tv: f64 = joint
        .values()
        .map(|c| {
            let pb = (c[0] + c[1]) / z;
            (c[0] / z - pi[0] * pb).abs() + (c[1] / z - pi[1] * pb).abs()
        })
        .sum();
    Ok(0.5 * tv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColoringInstance {
    pub n: usize,
    pub q: usize,
    pub edges: Vec<(usize, usize)>,
}

impl ColoringInstance {
    pub fn new(n: usize, q: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if q < 2 {
            return Err(CspError::Validation("need at least two colors".into()));
        }
        if edges.iter().any(|&(u, v)| u == v || u >= n || v >= n) {
            return Err(CspError::Validation("edges must join distinct vertices in range".into()));
        }
        Ok(Self { n, q, edges })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: ColoringInstance = serde_json::from_str(s)?;
        Self::new(c.n, c.q, c.edges)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `round(alpha n)` edges, each a uniform unordered pair of distinct vertices.
pub fn sample_coloring_instance(n: usize, q: usize, alpha: f64, seed: u64) -> Result<ColoringInstance> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(CspError::Validation("coloring instance needs n >= 2".into()));
    }
    let m = (alpha * n as f64).round() as usize;
    let mut rng = stream_rng(seed, 0);
    let edges = (0..m)
        .map(|_| {
            let u = rng.random_range(0..n);
            let mut v = rng.random_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            (u.min(v), u.max(v))
        })
        .collect();
    ColoringInstance::new(n, q, edges)
}

/// Probability that a uniform pair of distinct vertices is bichromatic
/// under a coloring with class sizes `counts`.
pub fn bichromatic_probability(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let nf = n as f64;
    let s: f64 = counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum();
    nf / (nf - 1.0) * (1.0 - s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColoringStats {
    pub z: u64,
    /// Color frequencies averaged over solutions.
    pub color_counts: Vec<f64>,
    #[serde(skip)]
    pub solutions: Option<Vec<Vec<u8>>>,
}

pub fn solve_coloring(inst: &ColoringInstance) -> Result<ColoringStats> {
    let space = (inst.q as f64).powi(inst.n as i32);
    if space > MAX_COLORINGS {
        return Err(CspError::SizeCap { what: "colorings", requested: space, cap: MAX_COLORINGS });
    }
    let mut nbrs = vec![vec![]; inst.n];
    for &(u, v) in &inst.edges {
        // only constraints towards earlier vertices are checked in the search
        nbrs[u.max(v)].push(u.min(v));
    }
    // split on the first vertex's color for parallelism, merge in color order
    let parts: Vec<(u64, Vec<f64>, Vec<Vec<u8>>)> = (0..inst.q as u8)
        .into_par_iter()
        .map(|c0| {
            let mut x = vec![0u8; inst.n];
            x[0] = c0;
            let mut z = 0u64;
            let mut counts = vec![0.0; inst.q];
            let mut sols = vec![];
            search(inst, &nbrs, &mut x, 1, &mut z, &mut counts, &mut sols);
            (z, counts, sols)
        })
        .collect();
    let z: u64 = parts.iter().map(|p| p.0).sum();
    let mut color_counts = vec![0.0; inst.q];
    for p in &parts {
        for (a, b) in color_counts.iter_mut().zip(&p.1) {
            *a += b;
        }
    }
    if z > 0 {
        let denom = z as f64 * inst.n as f64;
        color_counts.iter_mut().for_each(|v| *v /= denom);
    }
    let solutions = (z <= MAX_LISTED_SOLUTIONS).then(|| parts.into_iter().flat_map(|p| p.2).collect());
    Ok(ColoringStats { z, color_counts, solutions })
}

fn search(
    inst: &ColoringInstance,
    nbrs: &[Vec<usize>],
    x: &mut [u8],
    v: usize,
    z: &mut u64,
    counts: &mut [f64],
    sols: &mut Vec<Vec<u8>>,
) {
    if v == inst.n {
        *z += 1;
        for &c in x.iter() {
            counts[c as usize] += 1.0;
        }
        if *z <= MAX_LISTED_SOLUTIONS {
            sols.push(x.to_vec());
        }
        return;
    }
    for c in 0..inst.q as u8 {
        if nbrs[v].iter().all(|&u| x[u] != c) {
            x[v] = c;
            search(inst, nbrs, x, v + 1, z, counts, sols);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphericityStats {
    pub z: u64,
    /// `E ||nu - v̄||^2` over independent uniform solution pairs (exact).
    pub mean_sq_dev: f64,
    /// `E ||(nu - v̄) 1||^2` and `E ||1^t (nu - v̄)||^2` (equal by symmetry).
    pub mean_row_dev: f64,
    pub mean_col_dev: f64,
    /// `||nu - v̄||^2` of sampled (or all) pairs.
    pub sq_dev_samples: Vec<f64>,
}

/// Joint type of two colorings: `nu[a][b] = #{v : x1_v = a, x2_v = b} / n`.
pub fn joint_type(x1: &[u8], x2: &[u8], q: usize) -> Vec<Vec<f64>> {
    let n = x1.len() as f64;
    let mut nu = vec![vec![0.0; q]; q];
    for (a, b) in x1.iter().zip(x2) {
        nu[*a as usize][*b as usize] += 1.0 / n;
    }
    nu
}

pub fn sq_dev_from_flat(nu: &[Vec<f64>]) -> f64 {
    let q = nu.len() as f64;
    nu.iter().flatten().map(|v| (v - 1.0 / (q * q)).powi(2)).sum()
}

/// Exact sphericity moments from the pair-coincidence matrix
/// `M_ts = P(x_t = x_s)`: `E||nu||^2 = n^{-2} sum M_ts^2`, so
/// `E||nu - v̄||^2 = n^{-2} sum M_ts^2 - 1/q^2`.
pub fn sphericity(inst: &ColoringInstance, n_pairs: usize, seed: u64) -> Result<SphericityStats> {
    let stats = solve_coloring(inst)?;
    if stats.z == 0 {
        return Err(CspError::NoSolutions);
    }
    let sols = stats.solutions.as_ref().ok_or(CspError::SizeCap {
        what: "listed solutions",
        requested: stats.z as f64,
        cap: MAX_LISTED_SOLUTIONS as f64,
    })?;
    let n = inst.n;
    let q = inst.q;
    let z = sols.len() as f64;
    let mut coincide = vec![0.0f64; n * n];
    for x in sols {
        for t in 0..n {
            for s in 0..n {
                if x[t] == x[s] {
                    coincide[t * n + s] += 1.0;
                }
            }
        }
    }
    let nf = n as f64;
    let qf = q as f64;
    let sum_m2: f64 = coincide.iter().map(|c| (c / z).powi(2)).sum();
    let mean_sq_dev = sum_m2 / (nf * nf) - 1.0 / (qf * qf);
    // row a of nu sums to (#{x1 = a})/n; its mean square deviation from 1/q
    // depends on one solution only
    let mut row = 0.0;
    for x in sols {
        let mut cnt = vec![0.0; q];
        for &c in x {
            cnt[c as usize] += 1.0;
        }
        row += cnt.iter().map(|c| (c / nf - 1.0 / qf).powi(2)).sum::<f64>() / qf;
    }
    let mean_row_dev = row / z;
    let mut rng = stream_rng(seed, 3);
    let exact = z * z <= EXACT_PAIR_CAP;
    let sq_dev_samples = if exact {
        sols.iter()
            .flat_map(|a| sols.iter().map(move |b| (a, b)))
            .map(|(a, b)| sq_dev_from_flat(&joint_type(a, b, q)))
            .collect()
    } else {
        (0..n_pairs)
            .map(|_| {
                let a = &sols[rng.random_range(0..sols.len())];
                let b = &sols[rng.random_range(0..sols.len())];
                sq_dev_from_flat(&joint_type(a, b, q))
            })
            .collect()
    };
    Ok(SphericityStats { z: stats.z, mean_sq_dev, mean_row_dev, mean_col_dev: mean_row_dev, sq_dev_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{builtin, Builtin};

    fn hyp3() -> ClauseDistribution {
        builtin(Builtin::Hyp2col, 3).unwrap()
    }

    #[test]
    fn sample_instance_examples() {
        let d = hyp3();
        assert!(sample_instance(&d, 10, 0.0, 0).unwrap().clauses.is_empty());
        assert_eq!(sample_instance(&d, 3, 1.0 / 3.0, 0).unwrap().clauses.len(), 1);
        let x = builtin(Builtin::Xor, 4).unwrap();
        let inst = sample_instance(&x, 100, 100.0, 4).unwrap();
        let f = inst.empirical_clause_freq();
        let se = (0.25f64 / 10_000.0).sqrt();
        assert!((f[0] - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn single_clause_counts() {
        let d = hyp3();
        let inst = FactorGraphInstance::new(
            &d,
            3,
            1.0 / 3.0,
            vec![InstanceClause { dist_index: 0, flip: 0, vars: vec![0, 1, 2] }],
        )
        .unwrap();
        let s = solve_exhaustive(&inst).unwrap();
        assert_eq!((s.z, s.z_balanced), (6, 6));
        assert!(s.antipodal_symmetric);
        let empty = FactorGraphInstance::new(&d, 5, 0.0, vec![]).unwrap();
        assert_eq!(solve_exhaustive(&empty).unwrap().z, 32);
    }

    #[test]
    fn instance_json_roundtrip() {
        let d = builtin(Builtin::Nae, 3).unwrap();
        let inst = sample_instance(&d, 6, 1.0, 3).unwrap();
        let back = FactorGraphInstance::from_json_str(&inst.to_json_string().unwrap(), &d).unwrap();
        assert_eq!(back.clauses, inst.clauses);
        assert!(FactorGraphInstance::from_json_str(
            r#"{"n":2,"alpha":1,"clauses":[{"dist_index":0,"vars":[0,1,5]}]}"#,
            &d
        )
        .is_err());
    }

    #[test]
    fn expected_z_examples() {
        let d = hyp3();
        assert!((expected_z(&d, 2, 0.5).unwrap() - 1.5).abs() < 1e-12);
        assert!((expected_z(&d, 7, 0.0).unwrap() - 128.0).abs() < 1e-9);
    }

    #[test]
    fn expected_z_brute_force() {
        // average the exact count over every instance with one clause on n=3
        let d = hyp3();
        let n = 3;
        let mut total = 0.0;
        let mut count = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let inst = FactorGraphInstance::new(
                        &d,
                        n,
                        1.0 / 3.0,
                        vec![InstanceClause { dist_index: 0, flip: 0, vars: vec![a, b, c] }],
                    )
                    .unwrap();
                    total += solve_exhaustive(&inst).unwrap().z as f64;
                    count += 1.0;
                }
            }
        }
        assert!((expected_z(&d, n, 1.0 / 3.0).unwrap() - total / count).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let d = hyp3();
        let inst = sample_instance(&d, 8, 0.5, 1).unwrap();
        let o = overlap_stats(&inst, 1000, 0).unwrap();
        assert!(o.exact);
        assert_eq!(histogram_asymmetry(&o.overlap_histogram), 0.0);
        assert!(o.overlap_histogram.iter().any(|&(v, _)| v == 1.0));
        assert!(o.overlap_histogram.iter().any(|&(v, _)| v == -1.0));
        assert!(o.mean_overlap.abs() < 1e-12);
    }

    #[test]
    fn decay_examples() {
        let d = hyp3();
        let inst =
            FactorGraphInstance::new(&d, 5, 0.2, vec![InstanceClause { dist_index: 0, flip: 0, vars: vec![0, 1, 2] }])
                .unwrap();
        assert_eq!(correlation_decay(&inst, 4, 1).unwrap(), 0.0);
        assert_eq!(correlation_decay(&inst, 0, 5).unwrap(), 0.0);
        assert!(correlation_decay(&inst, 0, 1).unwrap() > 0.0);
        let inst = sample_instance(&d, 12, 0.5, 7).unwrap();
        for i in 0..3 {
            let mut prev = f64::INFINITY;
            for r in 1..=5 {
                let tv = correlation_decay(&inst, i, r).unwrap();
                assert!(tv <= prev + 1e-15);
                prev = tv;
            }
        }
    }

    #[test]
    fn triangle_has_six_colorings() {
        let t = ColoringInstance::new(3, 3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(solve_coloring(&t).unwrap().z, 6);
        let empty = ColoringInstance::new(4, 3, vec![]).unwrap();
        let s = solve_coloring(&empty).unwrap();
        assert_eq!(s.z, 81);
        assert!((s.color_counts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ColoringInstance::new(3, 3, vec![(1, 1)]).is_err());
    }

    #[test]
    fn joint_type_marginals() {
        let x1 = [0u8, 1, 2, 2, 0, 1, 1];
        let x2 = [2u8, 2, 0, 1, 1, 0, 2];
        let nu = joint_type(&x1, &x2, 3);
        for a in 0..3 {
            let row: f64 = nu[a].iter().sum();
            let col: f64 = (0..3).map(|b| nu[b][a]).sum();
            let w1 = x1.iter().filter(|&&c| c as usize == a).count() as f64 / 7.0;
            let w2 = x2.iter().filter(|&&c| c as usize == a).count() as f64 / 7.0;
            assert!((row - w1).abs() < 1e-15 && (col - w2).abs() < 1e-15);
        }
        let same = joint_type(&x1, &x1, 3);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(same[a][b], 0.0);
                }
            }
        }
    }

    #[test]
    fn sphericity_matches_pair_average() {
        let inst = sample_coloring_instance(7, 3, 1.0, 2).unwrap();
        let s = sphericity(&inst, 0, 0).unwrap();
        let direct = s.sq_dev_samples.iter().sum::<f64>() / s.sq_dev_samples.len() as f64;
        assert!((s.mean_sq_dev - direct).abs() < 1e-12);
    }

    #[test]
    fn bichromatic_fraction_matches_formula() {
        let counts = [5usize, 3, 4];
        let mut x = vec![];
        for (c, &m) in counts.iter().enumerate() {
            x.extend(std::iter::repeat(c as u8).take(m));
        }
        let inst = sample_coloring_instance(12, 3, 5000.0, 8).unwrap();
        let hits = inst.edges.iter().filter(|&&(u, v)| x[u] != x[v]).count() as f64;
        let m = inst.edges.len() as f64;
        let p = bichromatic_probability(&counts);
        assert!((hits / m - p).abs() < 3.0 * (p * (1.0 - p) / m).sqrt());
    }
}
