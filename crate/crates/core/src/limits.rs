//! Size caps shared by the simulators.

/// Environment variable overriding [`DEFAULT_NODE_CAP`].
pub const NODE_CAP_ENV: &str = "CSPLAB_MAX_NODES";

pub const DEFAULT_NODE_CAP: f64 = 1e7;

/// Largest `n` for exhaustive enumeration of binary instances.
pub const MAX_BINARY_VARS: usize = 30;

/// Largest `q^n` for exhaustive enumeration of colorings.
pub const MAX_COLORINGS: f64 = 1e8;

/// Solution lists are kept only up to this many solutions.
pub const MAX_LISTED_SOLUTIONS: u64 = 1_000_000;

/// Node cap for trees, from the environment when set.
pub fn node_cap() -> f64 {
    std::env::var(NODE_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| *v > 0.0)
        .unwrap_or(DEFAULT_NODE_CAP)
}
