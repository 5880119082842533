//! Galton-Watson factor trees, the broadcast process on them, and exact
//! root biases given the boundary values.
//!
//! Every function node sees its parent variable in clause position 1 and
//! its `k-1` children in positions `2..=k`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::clause::partial_sets;
use crate::ensemble::{ClauseDistribution, ClauseRef, ClauseSampler};
use crate::error::{CspError, Result};
use crate::limits::node_cap;
use crate::rng::{poisson, stream_rng};

/// Tolerance for declaring a bias frozen at `±1`.
pub const FROZEN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarNode {
    pub generation: usize,
    /// Function node above this variable (`None` for the root).
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuncNode {
    pub parent: usize,
    pub children: Vec<usize>,
    pub clause: ClauseRef,
}

#[derive(Clone, Debug)]
pub struct TreeInstance {
    dist: Arc<ClauseDistribution>,
    pub depth: usize,
    pub vars: Vec<VarNode>,
    pub funcs: Vec<FuncNode>,
}

impl TreeInstance {
    pub fn root_degree(&self) -> usize {
        self.vars[0].children.len()
    }

    pub fn distribution(&self) -> &ClauseDistribution {
        &self.dist
    }

    /// Variables at the boundary generation, in index order.
    pub fn boundary(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&v| self.vars[v].generation == self.depth).collect()
    }
}

/// Partial solution sets of every support clause, indexed by the value of
/// position 1: `[S^-, S^+]`.
pub(crate) struct Catalog {
    sets: Vec<[Vec<u32>; 2]>,
}

impl Catalog {
    pub fn new(dist: &ClauseDistribution) -> Result<Self> {
        if dist.k() < 2 {
            return Err(CspError::Domain("tree ensembles need k >= 2".into()));
        }
        let sets = dist
            .support()
            .iter()
            .map(|c| {
                let p = partial_sets(&c.table)?;
                Ok([p.s_minus, p.s_plus])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sets })
    }

    /// `S^{x}(phi)` for the drawn clause, as masks over positions `2..=k`.
    /// A sign flip `f` maps it to `S^{x ^ f_1}(phi) ^ (f >> 1)`.
    fn completions(&self, c: ClauseRef, parent_plus: bool) -> (&[u32], u32) {
        let side = (parent_plus as u32 ^ (c.flip & 1)) as usize;
        (&self.sets[c.index][side], c.flip >> 1)
    }

    fn sample_children<R: Rng + ?Sized>(&self, c: ClauseRef, parent_plus: bool, rng: &mut R) -> Result<u32> {
        let (set, mask) = self.completions(c, parent_plus);
        if set.is_empty() {
            return Err(CspError::Domain("clause has no completion for the parent value".into()));
        }
        Ok(set[rng.random_range(0..set.len())] ^ mask)
    }

    /// `m(x) = |S^x|^{-1} sum_{y in S^x} prod_j w_j(y_j)` for `x = -1, +1`.
    fn message(&self, c: ClauseRef, child_pairs: &[[f64; 2]]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (side, slot) in out.iter_mut().enumerate() {
            let (set, mask) = self.completions(c, side == 1);
            if set.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for &y in set {
                let y = y ^ mask;
                let mut p = 1.0;
                for (j, w) in child_pairs.iter().enumerate() {
                    p *= w[(y >> j & 1) as usize];
                    if p == 0.0 {
                        break;
                    }
                }
                acc += p;
            }
            *slot = acc / set.len() as f64;
        }
        out
    }
}

/// Expected number of nodes (variables plus clauses) in a depth-`depth` tree.
pub fn expected_tree_size(k: usize, alpha: f64, depth: usize) -> f64 {
    let deg = k as f64 * alpha;
    let growth = deg * (k as f64 - 1.0);
    let mut inner = 0.0;
    let mut gen = 1.0;
    for _ in 0..depth {
        inner += gen;
        gen *= growth;
    }
    // variables of every generation plus `deg` clauses under each inner one
    inner + gen + deg * inner
}

fn check_size(k: usize, alpha: f64, depth: usize) -> Result<()> {
    let cap = node_cap();
    let need = expected_tree_size(k, alpha, depth);
    if need > cap {
        return Err(CspError::SizeCap { what: "expected tree nodes", requested: need, cap });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(CspError::Domain(format!("alpha = {alpha} must be finite and >= 0")));
    }
    Ok(())
}

pub fn sample_tree(dist: &ClauseDistribution, alpha: f64, depth: usize, seed: u64) -> Result<TreeInstance> {
    sample_tree_with_root_degree(dist, alpha, depth, None, seed)
}

/// As [`sample_tree`], optionally fixing the number of clauses at the root.
pub fn sample_tree_with_root_degree(
    dist: &ClauseDistribution,
    alpha: f64,
    depth: usize,
    root_degree: Option<usize>,
    seed: u64,
) -> Result<TreeInstance> {
    check_alpha(alpha)?;
    let k = dist.k();
    if k < 2 {
        return Err(CspError::Domain("tree ensembles need k >= 2".into()));
    }
    check_size(k, alpha, depth)?;
    let cap = node_cap();
    let sampler = dist.sampler();
    let mut rng = stream_rng(seed, 0);
    let lambda = k as f64 * alpha;
    let mut vars = vec![VarNode { generation: 0, parent: None, children: vec![] }];
    let mut funcs: Vec<FuncNode> = vec![];
    let mut frontier = vec![0usize];
    for gen in 0..depth {
        let mut next = vec![];
        for &v in &frontier {
            let d = match (gen, root_degree) {
                (0, Some(d)) => d as u64,
                _ => poisson(&mut rng, lambda),
            };
            for _ in 0..d {
                let clause = dist.sample_clause(&sampler, &mut rng);
                let f = funcs.len();
                let first_child = vars.len();
                for _ in 1..k {
                    vars.push(VarNode { generation: gen + 1, parent: Some(f), children: vec![] });
                }
                let children: Vec<usize> = (first_child..vars.len()).collect();
                next.extend_from_slice(&children);
                funcs.push(FuncNode { parent: v, children, clause });
                vars[v].children.push(f);
                if (vars.len() + funcs.len()) as f64 > cap {
                    return Err(CspError::SizeCap {
                        what: "tree nodes",
                        requested: (vars.len() + funcs.len()) as f64,
                        cap,
                    });
                }
            }
        }
        frontier = next;
    }
    Ok(TreeInstance { dist: Arc::new(dist.clone()), depth, vars, funcs })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BroadcastSample {
    pub root_value: i8,
    pub assignment: Vec<i8>,
    /// `(variable index, value)` at the boundary generation.
    pub leaf_slice: Vec<(usize, i8)>,
}

/// Samples a satisfying assignment top-down from a fixed root value.
pub fn broadcast(tree: &TreeInstance, root_value: i8, seed: u64) -> Result<BroadcastSample> {
    if root_value != 1 && root_value != -1 {
        return Err(CspError::Domain(format!("root value {root_value} is not ±1")));
    }
    let catalog = Catalog::new(&tree.dist)?;
    let mut rng = stream_rng(seed, 1);
    let mut x = vec![0i8; tree.vars.len()];
    x[0] = root_value;
    // variables are stored parents-first
    for f in &tree.funcs {
        let y = catalog.sample_children(f.clause, x[f.parent] == 1, &mut rng)?;
        for (j, &c) in f.children.iter().enumerate() {
            x[c] = if y >> j & 1 == 1 { 1 } else { -1 };
        }
    }
    let leaf_slice = tree.boundary().into_iter().map(|v| (v, x[v])).collect();
    Ok(BroadcastSample { root_value, assignment: x, leaf_slice })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompatibleSet {
    Plus,
    Minus,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasResult {
    pub h: f64,
    pub compatible_set: CompatibleSet,
    /// Sum of the logs of the per-node normalizers.
    pub message_scale: f64,
}

impl BiasResult {
    fn from_pair(w: [f64; 2], message_scale: f64) -> Result<Self> {
        let total = w[0] + w[1];
        if !(total > 0.0) {
            return Err(CspError::Validation("boundary values are inconsistent with the tree".into()));
        }
        let h = (w[1] - w[0]) / total;
        let compatible_set = if w[0] == 0.0 || h >= 1.0 - FROZEN_TOL {
            CompatibleSet::Plus
        } else if w[1] == 0.0 || h <= -1.0 + FROZEN_TOL {
            CompatibleSet::Minus
        } else {
            CompatibleSet::Both
        };
        Ok(Self { h, compatible_set, message_scale })
    }
}

fn normalize(w: &mut [f64; 2], scale: &mut f64) {
    let m = w[0].max(w[1]);
    if m > 0.0 {
        w[0] /= m;
        w[1] /= m;
        *scale += m.ln();
    }
}

/// Exact conditional mean of the root given the boundary values, by one
/// upward sweep of pair messages `(w(-1), w(+1))`.
pub fn root_bias(tree: &TreeInstance, leaves: &[(usize, i8)]) -> Result<BiasResult> {
    let catalog = Catalog::new(&tree.dist)?;
    let mut fixed = vec![0i8; tree.vars.len()];
    for &(v, s) in leaves {
        if v >= tree.vars.len() || tree.vars[v].generation != tree.depth {
            return Err(CspError::Validation(format!("variable {v} is not on the boundary")));
        }
        fixed[v] = s;
    }
    let mut pairs = vec![[1.0f64; 2]; tree.vars.len()];
    let mut scale = 0.0;
    for v in (0..tree.vars.len()).rev() {
        let node = &tree.vars[v];
        if node.generation == tree.depth {
            pairs[v] = match fixed[v] {
                1 => [0.0, 1.0],
                -1 => [1.0, 0.0],
                _ => return Err(CspError::Validation(format!("boundary variable {v} has no value"))),
            };
            continue;
        }
        let mut w = [1.0, 1.0];
        for &f in &node.children {
            let func = &tree.funcs[f];
            let child: Vec<[f64; 2]> = func.children.iter().map(|&c| pairs[c]).collect();
            let m = catalog.message(func.clause, &child);
            w[0] *= m[0];
            w[1] *= m[1];
            normalize(&mut w, &mut scale);
        }
        pairs[v] = w;
    }
    BiasResult::from_pair(pairs[0], scale)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconStats {
    pub alpha: f64,
    pub depth: usize,
    pub n: usize,
    pub mean_abs_h: f64,
    pub mean_h_plus: f64,
    pub z_rate: f64,
    pub se_abs_h: f64,
    pub se_h_plus: f64,
    pub se_z_rate: f64,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = crate::fsum(xs.clone()) / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = crate::fsum(xs.map(|x| (x - mean) * (x - mean))) / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

impl ReconStats {
    /// Aggregates biases sampled under root value `+1`, in the given order.
    pub fn from_samples(alpha: f64, depth: usize, h: &[f64]) -> Result<Self> {
        if h.is_empty() {
            return Err(CspError::Validation("no samples".into()));
        }
        let n = h.len();
        let (mean_abs_h, se_abs_h) = mean_se(h.iter().map(|v| v.abs()), n);
        let (mean_h_plus, se_h_plus) = mean_se(h.iter().copied(), n);
        let (z_rate, se_z_rate) = mean_se(h.iter().map(|&v| if v >= 1.0 - FROZEN_TOL { 1.0 } else { 0.0 }), n);
        Ok(Self { alpha, depth, n, mean_abs_h, mean_h_plus, z_rate, se_abs_h, se_h_plus, se_z_rate })
    }
}

/// Samples `h_T(x^+)` for `n_samples` independent trees. Sample `i` uses
/// stream `i` of `seed`, so the output does not depend on the thread count.
pub fn reconstruction_samples(
    dist: &ClauseDistribution,
    alpha: f64,
    depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    reconstruction_samples_from(dist, alpha, depth, n_samples, seed, 1)
}

/// As [`reconstruction_samples`] with an arbitrary root value.
pub fn reconstruction_samples_from(
    dist: &ClauseDistribution,
    alpha: f64,
    depth: usize,
    n_samples: usize,
    seed: u64,
    root_value: i8,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n_samples == 0 {
        return Err(CspError::Validation("need at least one sample".into()));
    }
    check_size(dist.k(), alpha, depth)?;
    let catalog = Catalog::new(dist)?;
    let sampler = dist.sampler();
    let cap = node_cap();
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut run = LazyRun {
                dist,
                catalog: &catalog,
                sampler: &sampler,
                rng: stream_rng(seed, i),
                lambda: dist.k() as f64 * alpha,
                depth,
                nodes: 0,
                cap,
            };
            let w = run.explore(root_value == 1, 0)?;
            Ok(BiasResult::from_pair(w, 0.0)?.h)
        })
        .collect()
}

pub fn reconstruction_estimate(
    dist: &ClauseDistribution,
    alpha: f64,
    depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ReconStats> {
    let h = reconstruction_samples(dist, alpha, depth, n_samples, seed)?;
    ReconStats::from_samples(alpha, depth, &h)
}

/// Samples tree, broadcast and messages in one depth-first pass. A subtree
/// is abandoned as soon as its root pair is frozen, since further clauses
/// cannot move a frozen value.
struct LazyRun<'a> {
    dist: &'a ClauseDistribution,
    catalog: &'a Catalog,
    sampler: &'a ClauseSampler,
    rng: crate::rng::CspRng,
    lambda: f64,
    depth: usize,
    nodes: u64,
    cap: f64,
}

impl LazyRun<'_> {
    fn explore(&mut self, plus: bool, gen: usize) -> Result<[f64; 2]> {
        self.nodes += 1;
        if self.nodes as f64 > self.cap {
            return Err(CspError::SizeCap { what: "tree nodes", requested: self.nodes as f64, cap: self.cap });
        }
        if gen == self.depth {
            return Ok(if plus { [0.0, 1.0] } else { [1.0, 0.0] });
        }
        let k = self.dist.k();
        let d = poisson(&mut self.rng, self.lambda);
        let mut w = [1.0, 1.0];
        let mut scale = 0.0;
        let mut child = vec![[0.0; 2]; k - 1];
        for _ in 0..d {
            let clause = self.dist.sample_clause(self.sampler, &mut self.rng);
            let y = self.catalog.sample_children(clause, plus, &mut self.rng)?;
            for (j, slot) in child.iter_mut().enumerate() {
                *slot = self.explore(y >> j & 1 == 1, gen + 1)?;
            }
            let m = self.catalog.message(clause, &child);
            w[0] *= m[0];
            w[1] *= m[1];
            normalize(&mut w, &mut scale);
            if w[0] == 0.0 || w[1] == 0.0 {
                break;
            }
        }
        Ok(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub n: usize,
    /// `E X - E X^2` and its standard error.
    pub mean_minus_square: f64,
    pub se_mean_minus_square: f64,
    /// `E sqrt((1-X)/(1+X)) - E sqrt(1-X^2)` and its standard error.
    pub ratio_minus_root: f64,
    pub se_ratio_minus_root: f64,
    pub pass: bool,
}

/// Checks two identities satisfied by any consistent bias variable.
pub fn consistency_diagnostics(samples: &[f64]) -> Result<ConsistencyReport> {
    if samples.is_empty() {
        return Err(CspError::Validation("no samples".into()));
    }
    let n = samples.len();
    let (d1, se1) = mean_se(samples.iter().map(|&x| x - x * x), n);
    let ratio = |x: f64| {
        if x.abs() >= 1.0 - FROZEN_TOL {
            0.0
        } else {
            ((1.0 - x) / (1.0 + x)).sqrt()
        }
    };
    let (d2, se2) = mean_se(samples.iter().map(|&x| ratio(x) - (1.0 - x * x).max(0.0).sqrt()), n);
    let ok = |d: f64, se: f64| d.abs() <= 3.0 * se || d.abs() < 1e-15;
    Ok(ConsistencyReport {
        n,
        mean_minus_square: d1,
        se_mean_minus_square: se1,
        ratio_minus_root: d2,
        se_ratio_minus_root: se2,
        pass: ok(d1, se1) && ok(d2, se2),
    })
}
