//! Evaluation metrics: R² between SED and Levenshtein, clustering accuracy
//! under optimal label matching, and consensus quality.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{encode_one_hot, Alphabet};
use crate::error::{Error, Result};
use crate::metric::{levenshtein, sed_unchecked, SedParams};

/// How the SED values are mapped onto Levenshtein before measuring residuals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fit {
    /// Least-squares line `y = a + b·x`.
    Affine,
    /// The SED value itself is the prediction.
    Identity,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_mean_consensus_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_ideal_fraction: Option<f64>,
}

/// Coefficient of determination of the best affine fit of the second
/// component on the first.
pub fn r_squared(pairs: &[(f64, f64)]) -> Result<f64> {
    r_squared_with(pairs, Fit::Affine)
}

pub fn r_squared_with(pairs: &[(f64, f64)], fit: Fit) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "R² needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = pairs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::DegenerateInput("target values have zero variance".into()));
    }
    let ss_res: f64 = match fit {
        Fit::Identity => pairs.iter().map(|p| (p.1 - p.0).powi(2)).sum(),
        Fit::Affine => {
            let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
            if sxx == 0.0 {
                // constant predictor: the best line is the mean
                ss_tot
            } else {
                let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
                let slope = sxy / sxx;
                let icept = mean_y - slope * mean_x;
                pairs.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum()
            }
        }
    };
    Ok(1.0 - ss_res / ss_tot)
}

/// Fraction of points labelled correctly under the best one-to-one mapping
/// of predicted labels onto true labels.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut counts = Matrix::new(k, k, 0i64);
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::InvalidParameter(format!(
                "label {} out of range for k = {k}",
                p.max(t)
            )));
        }
        counts[(p, t)] += 1;
    }
    let (matched, _) = kuhn_munkres(&counts);
    Ok(matched as f64 / pred.len() as f64)
}

/// Matches consensuses to bases by minimum total Levenshtein distance and
/// returns `(mean matched distance, fraction matched exactly)`.
pub fn consensus_quality(consensuses: &[String], bases: &[String]) -> Result<(f64, f64)> {
    if consensuses.len() != bases.len() {
        return Err(Error::CountMismatch {
            left: consensuses.len(),
            right: bases.len(),
        });
    }
    let k = bases.len();
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let dist: Vec<Vec<i64>> = consensuses
        .iter()
        .map(|c| bases.iter().map(|b| levenshtein(c, b) as i64).collect())
        .collect();
    let weights = Matrix::from_fn(k, k, |(i, j)| -dist[i][j]);
    let (_, assignment) = kuhn_munkres(&weights);
    let matched: Vec<i64> = assignment.iter().enumerate().map(|(i, &j)| dist[i][j]).collect();
    let delta = matched.iter().sum::<i64>() as f64 / k as f64;
    let exact = matched.iter().filter(|&&d| d == 0).count() as f64 / k as f64;
    Ok((delta, exact))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub tau: f64,
    /// SED⁰ taken directly as a prediction of the Levenshtein distance.
    pub r_squared: f64,
    /// Best affine fit of Levenshtein on the biased SED.
    pub r_squared_affine: f64,
}

/// Random one-hot string pairs with independent uniform lengths in
/// `1..=max_len` and uniform symbols.
pub fn random_pairs(n: usize, max_len: usize, alphabet: &Alphabet, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let syms = alphabet.symbols();
    let draw = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.gen_range(1..=max_len.max(1));
        (0..len).map(|_| syms[rng.gen_range(0..syms.len())]).collect()
    };
    (0..n).map(|_| (draw(&mut rng), draw(&mut rng))).collect()
}

/// R² between SED and Levenshtein over `n_pairs` random DNA pairs of lengths
/// 1 to 20, one row per temperature.
pub fn table1(n_pairs: usize, taus: &[f64], seed: u64) -> Result<Vec<Table1Row>> {
    if n_pairs < 2 {
        return Err(Error::DegenerateInput(format!(
            "R² needs at least 2 pairs, got {n_pairs}"
        )));
    }
    let dna = Alphabet::dna();
    let pairs = random_pairs(n_pairs, 20, &dna, seed);
    let encoded = pairs
        .iter()
        .map(|(a, b)| Ok((encode_one_hot(a, &dna)?, encode_one_hot(b, &dna)?)))
        .collect::<Result<Vec<_>>>()?;
    let lev: Vec<f64> = pairs.iter().map(|(a, b)| levenshtein(a, b) as f64).collect();
    taus.iter()
        .map(|&tau| {
            let p = SedParams::new(tau)?;
            let values: Vec<(f64, f64)> = encoded
                .par_iter()
                .map(|(x1, x2)| {
                    let biased = sed_unchecked(x1, x2, p);
                    let s1 = sed_unchecked(x1, x1, p);
                    let s2 = sed_unchecked(x2, x2, p);
                    (biased, biased - 0.5 * (s1 + s2))
                })
                .collect();
            let unbiased: Vec<(f64, f64)> = values.iter().zip(&lev).map(|(v, &l)| (v.1, l)).collect();
            let biased: Vec<(f64, f64)> = values.iter().zip(&lev).map(|(v, &l)| (v.0, l)).collect();
            Ok(Table1Row {
                tau,
                r_squared: r_squared_with(&unbiased, Fit::Identity)?,
                r_squared_affine: r_squared_with(&biased, Fit::Affine)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_squared_on_a_line() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64)).collect();
        assert!((r_squared(&pairs).unwrap() - 1.0).abs() < 1e-12);
        assert!((r_squared_with(&pairs, Fit::Identity).unwrap() - 1.0).abs() < 1e-12);
        let shifted: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0 * 2.0 + 3.0, p.1)).collect();
        assert!((r_squared(&shifted).unwrap() - 1.0).abs() < 1e-12);
        assert!(r_squared_with(&shifted, Fit::Identity).unwrap() < 1.0);
    }

    #[test]
    fn r_squared_degenerate() {
        assert!(matches!(r_squared(&[(1.0, 1.0)]), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            r_squared(&[(1.0, 2.0), (3.0, 2.0)]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn accuracy_examples() {
        let truth = [0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&truth, &truth, 2).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[1, 1, 0, 0], &truth, 2).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 1, 1, 1], &truth, 2).unwrap(), 0.75);
        assert!(matches!(
            clustering_accuracy(&[0, 1], &truth, 2),
            Err(Error::LengthMismatch { left: 2, right: 4 })
        ));
        assert!(clustering_accuracy(&[0, 5, 1, 1], &truth, 2).is_err());
    }

    #[test]
    fn consensus_quality_examples() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let bases = s(&["ACGTACGT", "TTTTGGGG", "CACACACA"]);
        assert_eq!(consensus_quality(&bases, &bases).unwrap(), (0.0, 1.0));
        let shuffled = s(&["CACACACA", "ACGTACGT", "TTTTGGGG"]);
        assert_eq!(consensus_quality(&shuffled, &bases).unwrap(), (0.0, 1.0));
        let two = s(&["ACGT", "TTTT"]);
        let off = s(&["ACGA", "TTTT"]);
        assert_eq!(consensus_quality(&off, &two).unwrap(), (0.5, 0.5));
        assert!(matches!(
            consensus_quality(&two, &bases),
            Err(Error::CountMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn table1_rejects_single_pair() {
        assert!(matches!(table1(1, &[-4.0], 0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn table1_small_run_is_reproducible() {
        let a = table1(300, &[-2.0, -4.0], 9).unwrap();
        let b = table1(300, &[-2.0, -4.0], 9).unwrap();
        assert_eq!(a, b);
        assert!(a[1].r_squared > a[0].r_squared);
    }

    proptest! {
        #[test]
        fn accuracy_is_permutation_invariant(
            labels in proptest::collection::vec((0usize..4, 0usize..4), 1..60),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let pred: Vec<usize> = labels.iter().map(|l| l.0).collect();
            let truth: Vec<usize> = labels.iter().map(|l| l.1).collect();
            let base = clustering_accuracy(&pred, &truth, 4).unwrap();
            let relabeled: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            prop_assert_eq!(clustering_accuracy(&relabeled, &truth, 4).unwrap(), base);
            let retruth: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
            prop_assert_eq!(clustering_accuracy(&pred, &retruth, 4).unwrap(), base);
        }

        #[test]
        fn constant_prediction_gets_at_least_one_over_k(k in 1usize..6, per in 1usize..20) {
            let truth: Vec<usize> = (0..k * per).map(|i| i % k).collect();
            let pred = vec![0; truth.len()];
            prop_assert!(clustering_accuracy(&pred, &truth, k).unwrap() >= 1.0 / k as f64 - 1e-12);
        }

        #[test]
        fn exact_iff_zero_delta(cons in proptest::collection::vec("[ACGT]{1,6}", 1..5), seed in 0u64..1000) {
            let mut bases = cons.clone();
            if seed % 2 == 0 {
                bases[0].push('A');
            }
            let (delta, eps) = consensus_quality(&cons, &bases).unwrap();
            prop_assert_eq!(eps == 1.0, delta == 0.0);
        }
    }
}
