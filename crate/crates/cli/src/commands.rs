//! Subcommand bodies. Each returns a JSON report and its CSV rendering.

use csplab_core::coloring::{
    birkhoff_sup, kappa, matrix_gap_slack, random_member, random_vector_at, trace_csv, vector_gap_slack,
    DEFAULT_RESTARTS,
};
use csplab_core::ensemble::{check_conditions, constants};
use csplab_core::graph::{
    correlation_decay, expected_z, histogram_csv, overlap_stats, sample_coloring_instance, sample_instance,
    solve_exhaustive, sphericity,
};
use csplab_core::rng::{derive_seed, stream_rng};
use csplab_core::thresholds::{
    certify_nonreconstruction, first_moment_exponent, naive_recursion_limit, phi, phi_sup, sat_bounds,
    threshold_report, PhiEvaluator, DEFAULT_PHI_GRID, LEADING_ORDER, PAPER_FORMULA,
};
use csplab_core::tree::{consistency_diagnostics, reconstruction_samples, ReconStats};
use csplab_core::{ClauseDistribution, CspError, Result};
use serde_json::{json, Value};

use crate::config::{CommandKind, Flags};

const NUMERIC: &str = "numeric";
const MONTE_CARLO: &str = "monte-carlo ± se";
const EXACT: &str = "exact enumeration";
const OPTIMIZER: &str = "numeric optimizer (multistart)";

pub struct Report {
    pub json: Value,
    pub csv: String,
}

fn tag(value: f64, provenance: &str) -> Value {
    json!({ "value": value, "provenance": provenance })
}

fn mc(mean: f64, se: f64) -> Value {
    json!({ "value": mean, "se": se, "provenance": MONTE_CARLO })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = csplab_core::fsum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = csplab_core::fsum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ensemble_label(dist: &ClauseDistribution) -> String {
    dist.name().unwrap_or("custom").to_string()
}

pub fn run(kind: CommandKind, flags: &Flags) -> Result<Report> {
    match kind {
        CommandKind::Analyze => analyze(flags),
        CommandKind::Thresholds => thresholds(flags),
        CommandKind::TreeRecon => tree_recon(flags),
        CommandKind::SecondMoment => second_moment(flags),
        CommandKind::Instances => instances(flags),
        CommandKind::ColoringOpt => coloring_opt(flags),
    }
}

fn analyze(flags: &Flags) -> Result<Report> {
    let dist = flags.distribution()?;
    let grid = flags.grid.unwrap_or(101);
    let c = constants(&dist);
    let cond = check_conditions(&dist, grid)?;
    let cond_tag = format!("{NUMERIC} (support enumeration, theta grid of {grid})");
    let json = json!({
        "command": "analyze",
        "ensemble": ensemble_label(&dist),
        "k": dist.k(),
        "omega": tag(c.omega, PAPER_FORMULA),
        "omega_hat": tag(c.omega_hat, PAPER_FORMULA),
        "omega_le_omega_hat": c.ordered,
        "conditions": cond,
        "conditions_provenance": cond_tag,
    });
    let mut csv = String::from("field,value,provenance\n");
    csv.push_str(&format!("omega,{},{PAPER_FORMULA}\n", c.omega));
    csv.push_str(&format!("omega_hat,{},{PAPER_FORMULA}\n", c.omega_hat));
    for (name, v) in [
        ("norm_floor", cond.norm_floor),
        ("l1_exponent_a", cond.l1_exponent_a),
        ("decay_constant_c", cond.decay_constant_c),
        ("decay_constant_c_inner", cond.decay_constant_c_inner),
    ] {
        csv.push_str(&format!("{name},{v},{cond_tag}\n"));
    }
    for (name, pass) in [
        ("permutation_symmetric", cond.permutation_symmetric.pass),
        ("balanced", cond.balanced.pass),
        ("feasible", cond.feasible.pass),
        ("dominance", cond.dominance.pass),
    ] {
        csv.push_str(&format!("{name},{pass},{cond_tag}\n"));
    }
    Ok(Report { json, csv })
}

fn table_row(dist: &ClauseDistribution) -> Value {
    let c = constants(dist);
    let k = dist.k() as f64;
    let ln2 = std::f64::consts::LN_2;
    json!({
        "ensemble": ensemble_label(dist),
        "k": dist.k(),
        "reconstruction_clustering": tag(c.omega / k * k.ln(), LEADING_ORDER),
        "sat_lower": tag(c.omega * ln2, LEADING_ORDER),
        "sat_upper": tag(c.omega_hat * ln2, PAPER_FORMULA),
    })
}

fn thresholds(flags: &Flags) -> Result<Report> {
    if flags.table {
        let dists: Vec<ClauseDistribution> = if flags.k.is_some()
            || flags.ensemble.as_deref().is_some_and(|e| e.parse::<csplab_core::Builtin>().is_err())
        {
            vec![flags.distribution()?]
        } else {
            let name =
                flags.ensemble.as_deref().ok_or_else(|| CspError::Validation("--ensemble is required".into()))?;
            let kind: csplab_core::Builtin = name.parse()?;
            (3..=10)
                .filter(|k| kind != csplab_core::Builtin::Xor || k % 2 == 0)
                .map(|k| csplab_core::ensemble::builtin(kind, k))
                .collect::<Result<_>>()?
        };
        let rows: Vec<Value> = dists.iter().map(table_row).collect();
        let mut csv = String::from("ensemble,k,reconstruction_clustering,sat_lower,sat_upper\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r["ensemble"].as_str().unwrap_or(""),
                r["k"],
                r["reconstruction_clustering"]["value"],
                r["sat_lower"]["value"],
                r["sat_upper"]["value"]
            ));
        }
        return Ok(Report { json: json!({ "command": "thresholds", "table": rows }), csv });
    }
    let dist = flags.distribution()?;
    let report = threshold_report(&dist, 1e-9)?;
    let mut csv = String::from("field,value,provenance\n");
    for (name, t) in [
        ("omega", report.omega),
        ("omega_hat", report.omega_hat),
        ("alpha_sat_lower", report.alpha_sat_lower),
        ("alpha_sat_upper", report.alpha_sat_upper),
        ("alpha_cluster_leading", report.alpha_cluster_leading),
        ("alpha_recon_leading", report.alpha_recon_leading),
        ("alpha_tree_numeric", report.alpha_tree_numeric),
        ("alpha_tree_paper_formula", report.alpha_tree_paper_formula),
        ("second_moment_sup", report.second_moment_sup),
    ] {
        csv.push_str(&format!("{name},{},{}\n", t.value, t.provenance));
    }
    Ok(Report { json: json!({ "command": "thresholds", "report": report }), csv })
}

fn tree_recon(flags: &Flags) -> Result<Report> {
    let dist = flags.distribution()?;
    let alphas = flags.alphas()?;
    let depth = flags.depth.unwrap_or(6);
    let samples = flags.samples.unwrap_or(10_000);
    if depth == 0 {
        return Err(CspError::Validation("--depth must be at least 1".into()));
    }
    let mut rows = vec![];
    let mut csv = String::from(
        "alpha,depth,n,mean_abs_h,se_abs_h,mean_h_plus,se_h_plus,z_rate,se_z_rate,z_recursion,consistency_pass\n",
    );
    for (ai, &alpha) in alphas.iter().enumerate() {
        let rec = naive_recursion_limit(&dist, alpha, 1e-15, depth)?;
        let bound = certify_nonreconstruction(&dist, alpha, 200)?;
        for ell in 1..=depth {
            let seed = derive_seed(flags.seed(), (ai as u64) << 16 | ell as u64);
            let h = reconstruction_samples(&dist, alpha, ell, samples, seed)?;
            let s = ReconStats::from_samples(alpha, ell, &h)?;
            let cons = consistency_diagnostics(&h)?;
            let z_rec = rec.z.get(ell).copied().unwrap_or(0.0);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                alpha,
                ell,
                s.n,
                s.mean_abs_h,
                s.se_abs_h,
                s.mean_h_plus,
                s.se_h_plus,
                s.z_rate,
                s.se_z_rate,
                z_rec,
                cons.pass
            ));
            rows.push(json!({
                "alpha": alpha,
                "depth": ell,
                "n": s.n,
                "mean_abs_h": mc(s.mean_abs_h, s.se_abs_h),
                "mean_h_plus": mc(s.mean_h_plus, s.se_h_plus),
                "z_rate": mc(s.z_rate, s.se_z_rate),
                "z_recursion": tag(z_rec, NUMERIC),
                "consistency": {
                    "mean_minus_square": mc(cons.mean_minus_square, cons.se_mean_minus_square),
                    "ratio_minus_root": mc(cons.ratio_minus_root, cons.se_ratio_minus_root),
                    "pass": cons.pass,
                },
            }));
        }
        rows.push(json!({
            "alpha": alpha,
            "bound_h_ave_final": tag(*bound.h_ave.last().unwrap_or(&f64::NAN), NUMERIC),
            "certified_nonreconstruction": bound.certified_nonrecon,
        }));
    }
    Ok(Report {
        json: json!({
            "command": "tree-recon",
            "ensemble": ensemble_label(&dist),
            "k": dist.k(),
            "seed": flags.seed(),
            "samples": samples,
            "rows": rows,
        }),
        csv,
    })
}

fn second_moment(flags: &Flags) -> Result<Report> {
    let dist = flags.distribution()?;
    let grid = flags.grid.unwrap_or(101).max(2);
    let alphas = match flags.alphas() {
        Ok(a) => a,
        Err(_) if flags.alpha.is_none() && flags.alpha_range.is_none() => vec![0.9 * sat_bounds(&dist)?.lower],
        Err(e) => return Err(e),
    };
    let ev = PhiEvaluator::new(&dist);
    let mut sections = vec![];
    let mut csv = String::from("alpha,theta,phi\n");
    for &alpha in &alphas {
        // validates alpha
        phi(&dist, alpha, 0.0)?;
        let thetas: Vec<f64> = (0..grid).map(|j| j as f64 / (grid - 1) as f64).collect();
        let values: Vec<f64> = thetas.iter().map(|&t| ev.eval(alpha, t)).collect();
        for (t, v) in thetas.iter().zip(&values) {
            csv.push_str(&format!("{alpha},{t},{v}\n"));
        }
        let sup = phi_sup(&dist, alpha, 0.02, DEFAULT_PHI_GRID)?;
        sections.push(json!({
            "alpha": alpha,
            "theta": thetas,
            "phi": values,
            "phi_provenance": NUMERIC,
            "sup": tag(sup.sup, "grid certificate"),
            "sup_detail": sup,
            "certified": sup.sup < 0.0,
            "first_moment_exponent_at_0": tag(first_moment_exponent(&dist, alpha, 0.0)?, NUMERIC),
        }));
    }
    Ok(Report {
        json: json!({
            "command": "second-moment",
            "ensemble": ensemble_label(&dist),
            "k": dist.k(),
            "results": sections,
        }),
        csv,
    })
}

fn instances(flags: &Flags) -> Result<Report> {
    let alpha = flags.alpha.ok_or_else(|| CspError::Validation("--alpha is required".into()))?;
    let count = flags.samples.unwrap_or(100).max(1);
    match (flags.ensemble.is_some(), flags.q) {
        (true, Some(_)) => Err(CspError::Validation("give either --ensemble or --q".into())),
        (false, None) => Err(CspError::Validation("--ensemble or --q is required".into())),
        (true, None) => binary_instances(flags, alpha, count),
        (false, Some(q)) => coloring_instances(flags, q, alpha, count),
    }
}

fn binary_instances(flags: &Flags, alpha: f64, count: usize) -> Result<Report> {
    let dist = flags.distribution()?;
    let n = flags.n.unwrap_or(12);
    let mut zs = vec![];
    let mut csv = String::from("instance,z,z_balanced,antipodal_symmetric\n");
    let mut per = vec![];
    for i in 0..count {
        let inst = sample_instance(&dist, n, alpha, derive_seed(flags.seed(), i as u64))?;
        let s = solve_exhaustive(&inst)?;
        csv.push_str(&format!("{i},{},{},{}\n", s.z, s.z_balanced, s.antipodal_symmetric));
        zs.push(s.z as f64);
        per.push(s);
    }
    let (mz, se) = mean_se(&zs);
    let first = sample_instance(&dist, n, alpha, derive_seed(flags.seed(), 0))?;
    let overlap = match overlap_stats(&first, 100_000, flags.seed()) {
        Ok(o) => {
            csv.push_str("\noverlap,count\n");
            csv.push_str(histogram_csv(&o.overlap_histogram).trim_start_matches("value,count\n"));
            json!({
                "provenance": if o.exact { EXACT } else { MONTE_CARLO },
                "stats": o,
            })
        }
        Err(CspError::NoSolutions) => Value::Null,
        Err(e) => return Err(e),
    };
    let decay = if per[0].z > 0 {
        let tv: Vec<Value> = (1..=4)
            .map(|r| correlation_decay(&first, 0, r).map(|v| json!({ "radius": r, "tv": tag(v, EXACT) })))
            .collect::<Result<_>>()?;
        Value::Array(tv)
    } else {
        Value::Null
    };
    Ok(Report {
        json: json!({
            "command": "instances",
            "ensemble": ensemble_label(&dist),
            "k": dist.k(),
            "n": n,
            "alpha": alpha,
            "instances": count,
            "z_per_instance": per,
            "z_per_instance_provenance": EXACT,
            "mean_z": mc(mz, se),
            "expected_z": tag(expected_z(&dist, n, alpha)?, PAPER_FORMULA),
            "first_instance_overlap": overlap,
            "first_instance_correlation_decay": decay,
        }),
        csv,
    })
}

fn coloring_instances(flags: &Flags, q: usize, alpha: f64, count: usize) -> Result<Report> {
    let n = flags.n.unwrap_or(10);
    let mut devs = vec![];
    let mut rows = vec![];
    let mut csv = String::from("instance,z,mean_sq_dev,mean_row_dev\n");
    for i in 0..count {
        let inst = sample_coloring_instance(n, q, alpha, derive_seed(flags.seed(), i as u64))?;
        match sphericity(&inst, 2000, derive_seed(flags.seed(), (i as u64) << 32 | 1)) {
            Ok(s) => {
                csv.push_str(&format!("{i},{},{},{}\n", s.z, s.mean_sq_dev, s.mean_row_dev));
                devs.push(s.mean_sq_dev);
                rows.push(
                    json!({ "instance": i, "z": s.z, "mean_sq_dev": s.mean_sq_dev, "mean_row_dev": s.mean_row_dev }),
                );
            }
            Err(CspError::NoSolutions) => {
                csv.push_str(&format!("{i},0,,\n"));
                rows.push(json!({ "instance": i, "z": 0 }));
            }
            Err(e) => return Err(e),
        }
    }
    let summary = if devs.is_empty() {
        Value::Null
    } else {
        let (m, se) = mean_se(&devs);
        mc(m, se)
    };
    Ok(Report {
        json: json!({
            "command": "instances",
            "q": q,
            "n": n,
            "alpha": alpha,
            "instances": count,
            "per_instance": rows,
            "per_instance_provenance": EXACT,
            "mean_sq_dev_over_instances": summary,
        }),
        csv,
    })
}

fn coloring_opt(flags: &Flags) -> Result<Report> {
    let q = flags.q.unwrap_or(3);
    let alpha = flags.alpha.ok_or_else(|| CspError::Validation("--alpha is required".into()))?;
    let delta = flags.delta.unwrap_or(0.0);
    let eps = flags.eps.unwrap_or(0.1);
    let draws = flags.samples.unwrap_or(10_000);
    let seed = flags.seed();
    let b = birkhoff_sup(q, alpha, DEFAULT_RESTARTS, seed)?;
    let k = kappa(q, delta, eps, 1e-4)?;
    let mut rng = stream_rng(seed, 7);
    let mut vec_min = f64::INFINITY;
    let mut vec_draws = 0;
    while vec_draws < draws {
        if let Some(w) = random_vector_at(q, eps, &mut rng) {
            vec_min = vec_min.min(vector_gap_slack(&w, alpha, eps)?);
            vec_draws += 1;
        }
    }
    let matrix = if eps > 2.0 * delta && alpha < k.kappa {
        let mut min = f64::INFINITY;
        let mut got = 0;
        for _ in 0..draws {
            if let Some(v) = random_member(q, delta, eps, &mut rng, 1000) {
                min = min.min(matrix_gap_slack(&v, alpha, k.kappa, delta, eps)?);
                got += 1;
            }
        }
        json!({ "draws": got, "min_slack": tag(min, NUMERIC) })
    } else {
        json!({ "skipped": "needs eps > 2 delta and alpha < kappa" })
    };
    Ok(Report {
        json: json!({
            "command": "coloring-opt",
            "q": q,
            "alpha": alpha,
            "delta": delta,
            "eps": eps,
            "birkhoff": {
                "value": tag(b.value, OPTIMIZER),
                "flat_value": tag(b.flat_value, PAPER_FORMULA),
                "distance_to_flat": tag(b.distance_to_flat, OPTIMIZER),
                "converged": b.converged,
                "argmax": b.argmax,
            },
            "kappa": {
                "value": tag(k.kappa, "numeric optimizer + bisection"),
                "upper": tag(k.upper, "numeric optimizer + bisection"),
                "bracket_saturated": k.bracket_saturated,
            },
            "vector_gap": { "draws": vec_draws, "min_slack": tag(vec_min, NUMERIC) },
            "matrix_gap": matrix,
        }),
        csv: trace_csv(&b.trace),
    })
}
