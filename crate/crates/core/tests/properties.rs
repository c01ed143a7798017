mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soft_edit::{
    distance_matrix, levenshtein, sed, sed_brute_force, sed_unbiased, Alphabet, SedParams,
    SequenceEncoding, encode_one_hot,
};

use common::{random_one_hot, random_stochastic};

fn p(tau: f64) -> SedParams {
    SedParams::new(tau).unwrap()
}

/// One-hot or interior encoding of length `0..=max_len` over `g` symbols.
fn encoding(max_len: usize, g: usize) -> impl Strategy<Value = SequenceEncoding> {
    (0..=max_len, any::<u64>(), any::<bool>()).prop_map(move |(len, seed, soft)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if soft {
            random_stochastic(&mut rng, len, g)
        } else {
            random_one_hot(&mut rng, len, g)
        }
    })
}

fn pair(max_len: usize) -> impl Strategy<Value = (SequenceEncoding, SequenceEncoding)> {
    prop_oneof![Just(2usize), Just(4), Just(20)]
        .prop_flat_map(move |g| (encoding(max_len, g), encoding(max_len, g)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unbiased_self_distance_is_zero(x in encoding(20, 4), tau in -16.0f64..-0.05) {
        prop_assert!(sed_unbiased(&x, &x, p(tau)).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn symmetric((x, y) in pair(20), tau in -16.0f64..-0.05) {
        let a = sed(&x, &y, p(tau)).unwrap();
        let b = sed(&y, &x, p(tau)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn bounded_below_by_levenshtein(s in "[ACGT]{0,20}", t in "[ACGT]{0,20}", tau in -16.0f64..-0.05) {
        let dna = Alphabet::dna();
        let v = sed(&encode_one_hot(&s, &dna).unwrap(), &encode_one_hot(&t, &dna).unwrap(), p(tau)).unwrap();
        prop_assert!(v >= levenshtein(&s, &t) as f64 - 1e-9, "{v} for {s:?} {t:?}");
    }

    #[test]
    fn nondecreasing_in_tau((x, y) in pair(20), t1 in -16.0f64..-0.05, t2 in -16.0f64..-0.05) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = sed(&x, &y, p(lo)).unwrap();
        let b = sed(&x, &y, p(hi)).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12) + 1e-12, "{a} at {lo} > {b} at {hi}");
    }

    #[test]
    fn matches_brute_force((x, y) in pair(5), tau in prop_oneof![Just(-1.0), Just(-3.0), Just(-6.0)]) {
        let fast = sed(&x, &y, p(tau)).unwrap();
        let oracle = sed_brute_force(&x, &y, p(tau)).unwrap();
        prop_assert!((fast - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{fast} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_is_symmetric_with_zero_diagonal(seqs in proptest::collection::vec("[ACGT]{0,12}", 1..8)) {
        let dna = Alphabet::dna();
        let xs: Vec<_> = seqs.iter().map(|s| encode_one_hot(s, &dna).unwrap()).collect();
        let n = xs.len();
        let m = distance_matrix(&xs, p(-4.0), true).unwrap();
        for i in 0..n {
            prop_assert!(m[i * n + i].abs() <= 1e-9);
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], m[j * n + i]);
            }
        }
    }
}

#[test]
fn long_sequences_at_cold_temperature_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x = random_one_hot(&mut rng, 10_000, 4);
    let y = random_one_hot(&mut rng, 9_000, 4);
    let v = sed(&x, &y, p(-16.0)).unwrap();
    assert!(v.is_finite() && v > 0.0, "{v}");
    let u = sed_unbiased(&x, &x, p(-16.0)).unwrap();
    assert!(u.abs() <= 1e-6, "{u}");
}
