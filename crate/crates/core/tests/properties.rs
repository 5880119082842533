use csplab_core::clause::{
    derivative, fourier_transform, influence, inverse_fourier, noise_apply, not_all_equal, partial_sets,
};
use csplab_core::coloring::{
    energy_by_deviation, matrix_functionals, random_type_matrix, vector_gap_slack, TypeVector,
};
use csplab_core::ensemble::{builtin, check_conditions, omega, omega_hat, Builtin};
use csplab_core::graph::{sample_instance, solve_exhaustive};
use csplab_core::rng::stream_rng;
use csplab_core::tree::{broadcast, root_bias, sample_tree};
use csplab_core::{BiasVector, ClauseDistribution, ClauseTable};
use proptest::prelude::*;

fn gamma(q: u32, x: u32) -> f64 {
    // bit set means +1, so a -1 coordinate in Q flips the sign
    if (q & !x).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn direct_coeff(f: &ClauseTable, q: u32) -> f64 {
    let n = 1u32 << f.k();
    (0..n).map(|x| f.value(x) * gamma(q, x)).sum::<f64>() / n as f64
}

fn table() -> impl Strategy<Value = ClauseTable> {
    (1usize..=8).prop_flat_map(|k| {
        prop::collection::vec(prop::bool::ANY, 1 << k)
            .prop_map(move |bits| ClauseTable::new(k, bits.iter().map(|&b| b as u8 as f64).collect()).unwrap())
    })
}

fn balanced_table() -> impl Strategy<Value = ClauseTable> {
    (2usize..=8).prop_flat_map(|k| {
        prop::collection::vec(prop::bool::ANY, 1 << (k - 1)).prop_map(move |half| {
            let full = (1u32 << k) - 1;
            // x and its complement share the entry of whichever has the top bit clear
            ClauseTable::from_fn(k, |a| half[a.bits().min(!a.bits() & full) as usize] as u8 as f64).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transform_matches_direct_sum(f in table()) {
        let s = fourier_transform(&f);
        for q in 0..1u32 << f.k() {
            prop_assert!((s.coeff(q) - direct_coeff(&f, q)).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_and_roundtrip(f in table()) {
        let s = fourier_transform(&f);
        let energy: f64 = s.coeffs().iter().map(|c| c * c).sum();
        prop_assert!((energy - f.norm_sq()).abs() < 1e-12);
        let back = inverse_fourier(&s);
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_shifts_spectrum(f in table().prop_filter("k >= 2", |f| f.k() >= 2), i_raw in 0usize..8) {
        let k = f.k();
        let i = i_raw % k + 1;
        let s = fourier_transform(&f);
        let d = fourier_transform(&derivative(&f, i).unwrap());
        let pos = i - 1;
        for q in 0..1u32 << (k - 1) {
            let low = q & ((1 << pos) - 1);
            let lifted = ((q >> pos) << (pos + 1)) | low | (1 << pos);
            prop_assert!((d.coeff(q) - s.coeff(lifted)).abs() < 1e-12);
        }
        let inf = influence(&f, i).unwrap();
        let by_spectrum: f64 = (0..1u32 << k).filter(|q| q >> pos & 1 == 1).map(|q| s.coeff(q).powi(2)).sum();
        prop_assert!((inf - by_spectrum).abs() < 1e-12);
    }

    #[test]
    fn noise_is_a_semigroup(f in table(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let k = f.k();
        let s = fourier_transform(&f);
        let twice = noise_apply(&noise_apply(&s, &BiasVector::constant(k, a).unwrap()).unwrap(), &BiasVector::constant(k, b).unwrap()).unwrap();
        let once = noise_apply(&s, &BiasVector::constant(k, a * b).unwrap()).unwrap();
        for (x, y) in twice.coeffs().iter().zip(once.coeffs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_clauses_have_even_spectrum(f in balanced_table()) {
        let s = fourier_transform(&f);
        for q in 0..1u32 << f.k() {
            if q.count_ones() % 2 == 1 {
                prop_assert!(s.coeff(q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_sets_partition_solutions(signs in 0u32..16) {
        let f = not_all_equal(4, signs).unwrap();
        let p = partial_sets(&f).unwrap();
        let sols = f.values().iter().filter(|v| **v == 1.0).count();
        prop_assert_eq!(p.s_plus.len() + p.s_minus.len(), sols);
    }

    #[test]
    fn type_functionals_permutation_invariant(seed in 0u64..1000, q in 3usize..=5) {
        let mut rng = stream_rng(seed, 0);
        let v = random_type_matrix(q, &mut rng);
        let perm: Vec<usize> = (0..q).map(|i| (i * 2 + 1) % q).collect();
        let perm = if perm.iter().collect::<std::collections::HashSet<_>>().len() == q { perm } else { (0..q).rev().collect() };
        let (a, b) = (matrix_functionals(&v), matrix_functionals(&v.permuted(&perm)));
        prop_assert!((a.entropy - b.entropy).abs() < 1e-12);
        prop_assert!((a.energy - b.energy).abs() < 1e-12 || (a.energy == b.energy));
        prop_assert!((a.energy - energy_by_deviation(&v)).abs() < 1e-10);
    }

    #[test]
    fn vector_gap_nonnegative(w in prop::collection::vec(0.0f64..1.0, 3..=5), eps_frac in 0.0f64..1.0) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 0.0);
        let w = TypeVector::new(w.iter().map(|x| x / s).collect()).unwrap();
        let eps = w.sq_dev() * eps_frac;
        prop_assert!(vector_gap_slack(&w, 1.5, eps).unwrap() >= -1e-12);
    }
}

fn small_dists() -> Vec<ClauseDistribution> {
    vec![builtin(Builtin::Hyp2col, 3).unwrap(), builtin(Builtin::Nae, 4).unwrap(), builtin(Builtin::Xor, 4).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn balanced_instances_are_antipodal(seed in 0u64..10_000, n in 3usize..=10, alpha in 0.0f64..1.5) {
        for d in small_dists() {
            let inst = sample_instance(&d, n, alpha, seed).unwrap();
            let s = solve_exhaustive(&inst).unwrap();
            prop_assert!(s.antipodal_symmetric);
            prop_assert!(s.z_balanced <= s.z);
            prop_assert_eq!(inst.clauses.len(), (alpha * n as f64).round() as usize);
        }
    }

    #[test]
    fn root_bias_is_a_probability_gap(seed in 0u64..10_000, alpha in 0.1f64..1.5) {
        let d = builtin(Builtin::Hyp2col, 3).unwrap();
        let tree = sample_tree(&d, alpha, 2, seed).unwrap();
        let b = broadcast(&tree, 1, seed).unwrap();
        let r = root_bias(&tree, &b.leaf_slice).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r.h));
    }
}

#[test]
fn builtin_constants_are_ordered() {
    for k in 3..=8 {
        for kind in [Builtin::Hyp2col, Builtin::Nae] {
            let d = builtin(kind, k).unwrap();
            assert!(omega(&d) <= omega_hat(&d) + 1e-12);
            let r = check_conditions(&d, 101).unwrap();
            assert!(r.permutation_symmetric.pass && r.balanced.pass && r.feasible.pass);
        }
    }
}
