//! Seeding and small samplers shared by the Monte-Carlo modules.
//!
//! Every random quantity is drawn from a ChaCha stream selected by
//! `(master seed, stream index)`. Sample `i` of a sweep always uses stream
//! `i`, so results do not depend on how samples are spread over threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub type CspRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> CspRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a purpose tag into a master seed so that independent experiments
/// sharing one seed do not reuse streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Poisson draw; inversion for small means, `rand_distr` above 30.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > 30.0 {
        let d = Poisson::new(lambda).expect("positive finite mean");
        return d.sample(rng) as u64;
    }
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut n = 0u64;
    while u > cdf {
        n += 1;
        p *= lambda / n as f64;
        cdf += p;
        if p < 1e-300 && cdf >= 1.0 - 1e-15 {
            break;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |stream| {
            let mut r = stream_rng(7, stream);
            (0..4).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        let (a, b, c) = (draw(3), draw(3), draw(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_mean_and_variance() {
        for &lambda in &[0.5, 2.0, 12.0, 45.0] {
            let mut rng = stream_rng(11, 0);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| poisson(&mut rng, lambda) as f64).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 4.0 * se, "lambda {lambda}: mean {mean}");
            assert!((var / lambda - 1.0).abs() < 0.03, "lambda {lambda}: var {var}");
        }
        assert_eq!(poisson(&mut stream_rng(0, 0), 0.0), 0);
    }
}
