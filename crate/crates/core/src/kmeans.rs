//! Minibatch k-means over sequences with SED⁰ as the distance and
//! gradient-optimized soft centroids.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, SequenceEncoding};
use crate::consensus::{median_length, self_distances, CentroidLogits, CentroidState, OptimizerConfig};
use crate::error::{Error, Result};
use crate::metric::{sed_unchecked, SedParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    /// `None` uses the median data length.
    pub centroid_length: Option<usize>,
    pub max_rounds: usize,
    /// Stop once the decoded consensuses stay unchanged this many rounds in a row.
    pub stable_rounds: usize,
    pub assign_batch: usize,
    /// Independent runs from different seedings; the one with the lowest
    /// final objective is kept.
    pub restarts: usize,
    pub opt: OptimizerConfig,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            centroid_length: None,
            max_rounds: 100,
            stable_rounds: 3,
            assign_batch: 256,
            restarts: 3,
            opt: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        if self.stable_rounds == 0 {
            return bad("stable_rounds must be at least 1");
        }
        if self.assign_batch == 0 {
            return bad("assign_batch must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.centroid_length == Some(0) {
            return bad("centroid length must be at least 1");
        }
        self.opt.validate()
    }
}

#[derive(Clone, Debug)]
pub struct ClusterReport {
    pub labels: Vec<usize>,
    pub consensuses: Vec<String>,
    pub centroids: Vec<SequenceEncoding>,
    /// Mean SED⁰ of each round's assignment batch to its nearest centroid.
    pub objective_trace: Vec<f64>,
    /// Mean SED⁰ of the full dataset to the final centroids.
    pub objective: f64,
    pub rounds_run: usize,
    /// Which restart produced this result.
    pub restart: usize,
}

struct Centroids {
    encodings: Vec<SequenceEncoding>,
    self_dist: Vec<f64>,
}

impl Centroids {
    fn from_states(states: &[CentroidState], p: SedParams) -> Self {
        let encodings: Vec<SequenceEncoding> = states.iter().map(|s| s.logits.encoding()).collect();
        let self_dist = encodings.iter().map(|c| sed_unchecked(c, c, p)).collect();
        Self { encodings, self_dist }
    }

    /// Nearest centroid and its SED⁰; ties go to the lowest index.
    fn nearest(&self, x: &SequenceEncoding, x_self: f64, p: SedParams) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, (enc, cs)) in self.encodings.iter().zip(&self.self_dist).enumerate() {
            let d = sed_unchecked(x, enc, p) - 0.5 * (x_self + cs);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    fn assign_all(&self, items: &[usize], data: &[SequenceEncoding], self_dist: &[f64], p: SedParams) -> Vec<(usize, f64)> {
        items
            .par_iter()
            .map(|&i| self.nearest(&data[i], self_dist[i], p))
            .collect()
    }
}

/// Labels each sequence with its nearest centroid under SED⁰.
pub fn assign(batch: &[SequenceEncoding], centroids: &[CentroidLogits], p: SedParams) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::InvalidParameter("no centroids".into()));
    }
    for x in batch {
        if x.alphabet_size() != centroids[0].alphabet_size() {
            return Err(Error::AlphabetMismatch {
                left: x.alphabet_size(),
                right: centroids[0].alphabet_size(),
            });
        }
    }
    let encodings: Vec<SequenceEncoding> = centroids.iter().map(CentroidLogits::encoding).collect();
    let self_dist = encodings.iter().map(|c| sed_unchecked(c, c, p)).collect();
    let cs = Centroids { encodings, self_dist };
    let xs = self_distances(batch, p);
    let items: Vec<usize> = (0..batch.len()).collect();
    Ok(cs.assign_all(&items, batch, &xs, p).into_iter().map(|(l, _)| l).collect())
}

/// Mean SED⁰ of every sequence to its assigned centroid.
pub fn mean_assigned_distance(
    data: &[SequenceEncoding],
    labels: &[usize],
    centroids: &[SequenceEncoding],
    p: SedParams,
) -> f64 {
    let selfs: Vec<f64> = centroids.iter().map(|c| sed_unchecked(c, c, p)).collect();
    let values: Vec<f64> = data
        .par_iter()
        .zip(labels)
        .map(|(x, &l)| sed_unchecked(x, &centroids[l], p) - 0.5 * (sed_unchecked(x, x, p) + selfs[l]))
        .collect();
    values.iter().sum::<f64>() / data.len().max(1) as f64
}

/// Picks `k` distinct seed members by greedy D² sampling under SED⁰
/// (k-means++ with several candidates per pick, keeping the one that lowers
/// the total squared distance most).
fn seed_members(
    data: &[SequenceEncoding],
    self_dist: &[f64],
    k: usize,
    p: SedParams,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = data.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let distances_to = |c: usize| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let d = sed_unchecked(&data[i], &data[c], p) - 0.5 * (self_dist[i] + self_dist[c]);
                d.max(0.0)
            })
            .collect()
    };
    let first = rng.gen_range(0..n);
    let mut picked = vec![first];
    let mut nearest = distances_to(first);
    while picked.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            let rest: Vec<usize> = (0..n).filter(|i| !picked.contains(i)).collect();
            picked.push(rest[rng.gen_range(0..rest.len())]);
            continue;
        }
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for _ in 0..trials {
            let mut target = rng.gen_range(0.0..total);
            let mut cand = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    cand = i;
                    break;
                }
                target -= w;
            }
            let merged: Vec<f64> = nearest
                .iter()
                .zip(distances_to(cand))
                .map(|(a, b)| a.min(b))
                .collect();
            let potential: f64 = merged.iter().map(|d| d * d).sum();
            if best.as_ref().map_or(true, |b| potential < b.1) {
                best = Some((cand, potential, merged));
            }
        }
        let (cand, _, merged) = best.expect("at least one trial");
        picked.push(cand);
        nearest = merged;
    }
    picked
}

/// Moves one member from the largest group into every empty group.
/// Returns the reseeded cluster indices with their new seed members.
fn reseed_empty(groups: &mut [Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut reseeded = Vec::new();
    for c in 0..groups.len() {
        if !groups[c].is_empty() {
            continue;
        }
        let donor = (0..groups.len())
            .max_by_key(|&g| (groups[g].len(), std::cmp::Reverse(g)))
            .expect("k >= 1");
        if groups[donor].len() < 2 {
            continue;
        }
        let pick = rng.gen_range(0..groups[donor].len());
        let member = groups[donor].swap_remove(pick);
        groups[c].push(member);
        reseeded.push((c, member));
    }
    reseeded
}

/// Minibatch k-means. Deterministic for a fixed config, seed and data,
/// independent of the worker count.
pub fn kmeans(data: &[SequenceEncoding], alphabet: &Alphabet, cfg: &KMeansConfig) -> Result<ClusterReport> {
    cfg.validate()?;
    if data.len() < cfg.k {
        return Err(Error::TooFewSequences {
            have: data.len(),
            need: cfg.k,
        });
    }
    for x in data {
        if x.alphabet_size() != alphabet.size() {
            return Err(Error::AlphabetMismatch {
                left: x.alphabet_size(),
                right: alphabet.size(),
            });
        }
    }
    let p = cfg.opt.params()?;
    let length = cfg.centroid_length.unwrap_or_else(|| median_length(data));
    let self_dist = self_distances(data, p);
    // restart 0 runs on the configured seed itself
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<ClusterReport> = None;
    for r in 0..cfg.restarts {
        let seed = if r == 0 { cfg.seed } else { seeds.gen() };
        let mut run = single_run(data, alphabet, cfg, p, length, &self_dist, seed);
        run.restart = r;
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn single_run(
    data: &[SequenceEncoding],
    alphabet: &Alphabet,
    cfg: &KMeansConfig,
    p: SedParams,
    length: usize,
    self_dist: &[f64],
    seed: u64,
) -> ClusterReport {
    let n = data.len();
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let seeds = seed_members(data, self_dist, k, p, &mut rng);
    let mut states: Vec<CentroidState> = seeds
        .iter()
        .map(|&i| CentroidState::new(CentroidLogits::seeded_from(&data[i], length)))
        .collect();
    // the first round partitions around the hard seed members themselves
    let mut hard_seeds = Some(Centroids {
        encodings: seeds.iter().map(|&i| data[i].clone()).collect(),
        self_dist: seeds.iter().map(|&i| self_dist[i]).collect(),
    });

    let mut previous: Vec<String> = states.iter().map(|s| s.logits.decode(alphabet)).collect();
    let mut stable = 0;
    let mut objective_trace = Vec::new();
    let mut rounds_run = 0;

    for _ in 0..cfg.max_rounds {
        rounds_run += 1;
        let batch: Vec<usize> = if n <= cfg.assign_batch {
            (0..n).collect()
        } else {
            let mut b = index::sample(&mut rng, n, cfg.assign_batch).into_vec();
            b.sort_unstable();
            b
        };
        let centroids = hard_seeds
            .take()
            .unwrap_or_else(|| Centroids::from_states(&states, p));
        let assigned = centroids.assign_all(&batch, data, self_dist, p);
        objective_trace.push(assigned.iter().map(|(_, d)| d).sum::<f64>() / batch.len() as f64);

        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (&i, &(label, _)) in batch.iter().zip(&assigned) {
            groups[label].push(i);
        }
        for (c, member) in reseed_empty(&mut groups, &mut rng) {
            states[c] = CentroidState::new(CentroidLogits::seeded_from(&data[member], length));
        }

        let seeds: Vec<u64> = (0..k).map(|_| rng.gen()).collect();
        states
            .par_iter_mut()
            .zip(&groups)
            .zip(&seeds)
            .for_each(|((state, members), &seed)| {
                let mut local = ChaCha8Rng::seed_from_u64(seed);
                state.optimize(data, self_dist, members, &cfg.opt, &mut local);
            });

        let decoded: Vec<String> = states.iter().map(|s| s.logits.decode(alphabet)).collect();
        if decoded == previous {
            stable += 1;
        } else {
            stable = 0;
        }
        previous = decoded;
        if stable >= cfg.stable_rounds {
            break;
        }
    }

    let centroids = Centroids::from_states(&states, p);
    let all: Vec<usize> = (0..n).collect();
    let assigned = centroids.assign_all(&all, data, self_dist, p);
    let objective = assigned.iter().map(|(_, d)| d).sum::<f64>() / n as f64;
    ClusterReport {
        labels: assigned.into_iter().map(|(l, _)| l).collect(),
        consensuses: previous,
        centroids: centroids.encodings,
        objective_trace,
        objective,
        rounds_run,
        restart: 0,
    }
}
