#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use soft_edit::data::{gen_bases, gen_noisy, NoiseSpec, SyntheticDataset};
use soft_edit::{encode_one_hot, levenshtein, Alphabet, SequenceEncoding};

pub fn random_one_hot(rng: &mut ChaCha8Rng, len: usize, g: usize) -> SequenceEncoding {
    let mut data = vec![0.0; len * g];
    for i in 0..len {
        data[i * g + rng.gen_range(0..g)] = 1.0;
    }
    SequenceEncoding::from_rows(data, g).unwrap()
}

/// Rows drawn uniformly from the simplex interior (normalized exponentials).
pub fn random_stochastic(rng: &mut ChaCha8Rng, len: usize, g: usize) -> SequenceEncoding {
    let mut data = Vec::with_capacity(len * g);
    for _ in 0..len {
        let row: Vec<f64> = (0..g).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / s));
    }
    SequenceEncoding::from_raw(data, g).unwrap()
}

pub struct ClusterInstance {
    pub data: SyntheticDataset,
    pub encoded: Vec<SequenceEncoding>,
}

/// Bases of length `length` with pairwise distance at least `min_dist`
/// (exactly `min_dist` when `exact` and k = 2), plus noisy copies.
pub fn cluster_instance(
    k: usize,
    length: usize,
    min_dist: usize,
    exact: bool,
    per_base: usize,
    noise: usize,
    seed: u64,
) -> ClusterInstance {
    let dna = Alphabet::dna();
    let mut attempt = 0;
    let bases = loop {
        let b = gen_bases(k, length, min_dist, &dna, seed * 1000 + attempt).unwrap();
        attempt += 1;
        if !exact || levenshtein(&b[0], &b[1]) == min_dist {
            break b;
        }
    };
    let data = gen_noisy(&bases, per_base, &NoiseSpec::new(noise, seed + 7777), &dna);
    let encoded = data.strings.iter().map(|s| encode_one_hot(s, &dna).unwrap()).collect();
    ClusterInstance { data, encoded }
}
