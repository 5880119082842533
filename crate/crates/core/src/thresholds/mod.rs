//! Threshold formulas and their numerical certificates.

mod recursion;
pub(crate) mod second_moment;

pub use recursion::*;
pub use second_moment::*;

use serde::Serialize;

use crate::ensemble::{omega, omega_hat, ClauseDistribution};
use crate::error::{CspError, Result};

/// A reported number together with where it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tagged {
    pub value: f64,
    pub provenance: &'static str,
}

impl Tagged {
    pub fn new(value: f64, provenance: &'static str) -> Self {
        Self { value, provenance }
    }
}

pub const PAPER_FORMULA: &str = "paper formula";
pub const LEADING_ORDER: &str = "paper formula, leading order (o/O terms dropped)";
pub const NUMERIC_TANGENCY: &str = "numeric tangency";
pub const GRID_CERTIFICATE: &str = "grid certificate";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub ensemble: String,
    pub k: usize,
    pub omega: Tagged,
    pub omega_hat: Tagged,
    pub alpha_sat_lower: Tagged,
    pub alpha_sat_upper: Tagged,
    pub alpha_cluster_leading: Tagged,
    pub alpha_recon_leading: Tagged,
    pub alpha_tree_numeric: Tagged,
    pub alpha_tree_paper_formula: Tagged,
    pub second_moment_sup: Tagged,
    pub notes: Vec<String>,
}

pub fn threshold_report(dist: &ClauseDistribution, tol: f64) -> Result<ThresholdReport> {
    let k = dist.k();
    let om = omega(dist);
    let sat = sat_bounds(dist)?;
    let lead = om / k as f64 * (k as f64).ln();
    let mut notes = Vec::new();
    let tree = tree_threshold_numeric(dist, tol)?;
    match tree.bisection {
        Some(b) => {
            notes.push(format!("tree threshold: tangency {:.9} vs recursion bisection {:.9}", tree.closed_form, b))
        }
        None => notes.push("tree threshold for k = 2 is transcritical (omega/2); bisection skipped".into()),
    }
    notes.push(format!(
        "second moment at alpha = 0.9*lower: sup over [{}, 1] of Phi = {:.3e} at theta = {:.4} ({})",
        sat.certificate.delta,
        sat.certificate.sup,
        sat.certificate.argmax,
        if sat.certified { "certified" } else { "not certified" }
    ));
    notes.push("cluster and reconstruction thresholds share the leading form (omega/k) log k".into());
    Ok(ThresholdReport {
        ensemble: dist.name().unwrap_or("custom").to_string(),
        k,
        omega: Tagged::new(om, PAPER_FORMULA),
        omega_hat: Tagged::new(omega_hat(dist), PAPER_FORMULA),
        alpha_sat_lower: Tagged::new(sat.lower, LEADING_ORDER),
        alpha_sat_upper: Tagged::new(sat.upper, PAPER_FORMULA),
        alpha_cluster_leading: Tagged::new(lead, LEADING_ORDER),
        alpha_recon_leading: Tagged::new(lead, LEADING_ORDER),
        alpha_tree_numeric: Tagged::new(tree.closed_form, NUMERIC_TANGENCY),
        alpha_tree_paper_formula: Tagged::new(tree_threshold_paper_formula(dist)?, PAPER_FORMULA),
        second_moment_sup: Tagged::new(sat.certificate.sup, GRID_CERTIFICATE),
        notes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ColoringThresholds {
    pub q: usize,
    pub alpha_s: Tagged,
    pub alpha_d: Tagged,
    pub alpha_r: Tagged,
}

/// Leading-order colorability, clustering and reconstruction densities.
pub fn coloring_thresholds(q: usize) -> Result<ColoringThresholds> {
    if q < 3 {
        return Err(CspError::Domain(format!("q = {q} must be at least 3")));
    }
    let qf = q as f64;
    let l = qf.ln();
    Ok(ColoringThresholds {
        q,
        alpha_s: Tagged::new(qf * l, LEADING_ORDER),
        alpha_d: Tagged::new(qf / 2.0 * l, LEADING_ORDER),
        alpha_r: Tagged::new(qf / 2.0 * (l + l.ln()), LEADING_ORDER),
    })
}
