//! Analysis kernels for random constraint satisfaction problems.

pub mod clause;
pub mod coloring;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod limits;
pub mod rng;
pub mod thresholds;
pub mod tree;

pub use clause::{Assignment, BiasVector, ClauseTable, FourierSpectrum, PartialSets};
pub use ensemble::{Builtin, ClauseDistribution, ClauseRef, ConditionReport, EnsembleConstants};
pub use error::{CspError, Result};

/// Compensated (Neumaier) summation; expectations over large supports of
/// identical terms otherwise drift by many ulps.
pub fn fsum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
