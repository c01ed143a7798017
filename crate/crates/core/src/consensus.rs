//! Soft consensus search: minimize the mean SED⁰ between a centroid and a
//! set of sequences with ADAM over softmax logits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{decode_argmax, soften, Alphabet, SequenceEncoding};
use crate::error::{Error, Result};
use crate::gradient::{second_arg_grad, self_grad};
use crate::kernel::Temperature;
use crate::metric::{sed_unbiased, sed_unchecked, SedParams, DEFAULT_TAU};

/// Weight of the seed member kept when initializing a centroid; the rest is
/// spread uniformly. A nearly uniform start avoids the shifted-copy local
/// minima a sharp start falls into.
pub const INIT_KEEP: f64 = 0.04;

/// Unconstrained `L x |G|` logits; the centroid is their row-wise softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidLogits {
    logits: Vec<f64>,
    len: usize,
    alphabet_size: usize,
}

impl CentroidLogits {
    pub fn new(logits: Vec<f64>, alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 || logits.len() % alphabet_size != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} logits do not form rows of width {alphabet_size}",
                logits.len()
            )));
        }
        Ok(Self {
            len: logits.len() / alphabet_size,
            logits,
            alphabet_size,
        })
    }

    /// Element-wise log of an encoding. Zero entries become `-inf`, which the
    /// softmax maps back to exact zeros.
    pub fn from_encoding(x: &SequenceEncoding) -> Self {
        Self {
            logits: x.as_slice().iter().map(|v| v.ln()).collect(),
            len: x.len(),
            alphabet_size: x.alphabet_size(),
        }
    }

    /// `log(soften(x))` after stretching `x` to `len` rows, keeping
    /// [`INIT_KEEP`] of the one-hot mass.
    pub fn seeded_from(x: &SequenceEncoding, len: usize) -> Self {
        let fitted = fit_length(x, len);
        let eps = (1.0 - INIT_KEEP) / x.alphabet_size() as f64;
        Self::from_encoding(&soften(&fitted, eps))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Row-wise softmax.
    pub fn encoding(&self) -> SequenceEncoding {
        let mut out = Vec::with_capacity(self.logits.len());
        for row in self.logits.chunks_exact(self.alphabet_size) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            out.extend(row.iter().map(|z| (z - max).exp()));
            let sum: f64 = out[start..].iter().sum();
            for v in &mut out[start..] {
                *v /= sum;
            }
        }
        SequenceEncoding::from_raw(out, self.alphabet_size).expect("shape preserved")
    }

    pub fn decode(&self, alphabet: &Alphabet) -> String {
        decode_argmax(&self.encoding(), alphabet)
    }

    /// Pulls a gradient with respect to the softmax output back to the logits.
    fn chain_softmax(&self, probs: &SequenceEncoding, grad: &[f64]) -> Vec<f64> {
        let g = self.alphabet_size;
        let mut out = vec![0.0; grad.len()];
        for (r, p) in probs.rows().enumerate() {
            let gr = &grad[r * g..(r + 1) * g];
            let dot: f64 = p.iter().zip(gr).map(|(a, b)| a * b).sum();
            for k in 0..g {
                out[r * g + k] = p[k] * (gr[k] - dot);
            }
        }
        out
    }
}

/// Stretches or shrinks `x` to `len` rows by nearest-row resampling.
/// An empty `x` yields uniform rows.
pub fn fit_length(x: &SequenceEncoding, len: usize) -> SequenceEncoding {
    let g = x.alphabet_size();
    if x.len() == len {
        return x.clone();
    }
    let mut data = Vec::with_capacity(len * g);
    for r in 0..len {
        if x.is_empty() {
            data.extend(std::iter::repeat(1.0 / g as f64).take(g));
        } else {
            data.extend_from_slice(x.row(r * x.len() / len));
        }
    }
    SequenceEncoding::from_raw(data, g).expect("shape preserved")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub steps_per_update: usize,
    pub batch_size: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            steps_per_update: 200,
            batch_size: 64,
            tau: DEFAULT_TAU,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.eps_adam > 0.0) {
            return bad(format!("eps_adam must be positive, got {}", self.eps_adam));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        self.params().map(|_| ())
    }

    pub fn params(&self) -> Result<SedParams> {
        SedParams::new(self.tau)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &OptimizerConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.eps_adam);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConsensusResult {
    pub centroid: SequenceEncoding,
    pub consensus: String,
    /// `(step, mean SED⁰ over the step's batch)`, recorded before each update.
    pub objective_trace: Vec<(usize, f64)>,
}

/// Mean SED⁰ between the batch and `softmax(c)`.
pub fn consensus_objective(
    c: &CentroidLogits,
    batch: &[SequenceEncoding],
    p: SedParams,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let enc = c.encoding();
    let values = batch
        .iter()
        .map(|x| sed_unbiased(x, &enc, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(values.iter().sum::<f64>() / batch.len() as f64)
}

/// Mean SED⁰ objective and its gradient with respect to the logits.
///
/// `self_dist[i]` must hold `SED(batch[i], batch[i])`.
pub(crate) fn objective_and_grad(
    c: &CentroidLogits,
    batch: &[&SequenceEncoding],
    self_dist: &[f64],
    t: &Temperature,
) -> (f64, Vec<f64>) {
    let enc = c.encoding();
    let (cc, cc_grad) = self_grad(&enc, t);
    let parts: Vec<(f64, Vec<f64>)> = batch.par_iter().map(|x| second_arg_grad(x, &enc, t)).collect();
    let n = batch.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; enc.as_slice().len()];
    for ((v, g), sx) in parts.iter().zip(self_dist) {
        value += v - 0.5 * (sx + cc);
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    for (acc, s) in grad.iter_mut().zip(&cc_grad) {
        *acc = *acc / n - 0.5 * s;
    }
    (value / n, c.chain_softmax(&enc, &grad))
}

/// Logits plus the optimizer state that moves them.
#[derive(Clone, Debug)]
pub(crate) struct CentroidState {
    pub logits: CentroidLogits,
    adam: Adam,
}

impl CentroidState {
    pub(crate) fn new(logits: CentroidLogits) -> Self {
        let n = logits.logits.len();
        Self {
            logits,
            adam: Adam::new(n),
        }
    }

    /// Runs `cfg.steps_per_update` ADAM steps, each on a with-replacement
    /// sample of `members`. Returns the pre-update objective of every step.
    pub(crate) fn optimize(
        &mut self,
        data: &[SequenceEncoding],
        self_dist: &[f64],
        members: &[usize],
        cfg: &OptimizerConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let t = Temperature::new(cfg.tau);
        let mut trace = Vec::with_capacity(cfg.steps_per_update);
        if members.is_empty() {
            return trace;
        }
        for _ in 0..cfg.steps_per_update {
            let picks: Vec<usize> = (0..cfg.batch_size)
                .map(|_| *members.choose(rng).expect("nonempty"))
                .collect();
            let batch: Vec<&SequenceEncoding> = picks.iter().map(|&i| &data[i]).collect();
            let selfs: Vec<f64> = picks.iter().map(|&i| self_dist[i]).collect();
            let (value, grad) = objective_and_grad(&self.logits, &batch, &selfs, &t);
            self.adam.update(&mut self.logits.logits, &grad, cfg);
            trace.push(value);
        }
        trace
    }
}

/// Median sequence length (lower middle for even counts), at least 1.
pub fn median_length(data: &[SequenceEncoding]) -> usize {
    let mut lens: Vec<usize> = data.iter().map(|x| x.len()).collect();
    lens.sort_unstable();
    lens.get(lens.len().saturating_sub(1) / 2).copied().unwrap_or(1).max(1)
}

pub(crate) fn self_distances(data: &[SequenceEncoding], p: SedParams) -> Vec<f64> {
    data.par_iter().map(|x| sed_unchecked(x, x, p)).collect()
}

/// Finds a soft centroid of `data` with `length` rows by stochastic gradient
/// descent on the mean SED⁰.
pub fn optimize_consensus(
    data: &[SequenceEncoding],
    alphabet: &Alphabet,
    length: usize,
    cfg: &OptimizerConfig,
) -> Result<ConsensusResult> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if length == 0 {
        return Err(Error::InvalidParameter("centroid length must be at least 1".into()));
    }
    cfg.validate()?;
    for x in data {
        if x.alphabet_size() != alphabet.size() {
            return Err(Error::AlphabetMismatch {
                left: x.alphabet_size(),
                right: alphabet.size(),
            });
        }
    }
    let p = cfg.params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seed_member = rng.gen_range(0..data.len());
    let mut state = CentroidState::new(CentroidLogits::seeded_from(&data[seed_member], length));
    let self_dist = self_distances(data, p);
    let members: Vec<usize> = (0..data.len()).collect();
    let trace = state.optimize(data, &self_dist, &members, cfg, &mut rng);
    let centroid = state.logits.encoding();
    Ok(ConsensusResult {
        consensus: decode_argmax(&centroid, alphabet),
        centroid,
        objective_trace: trace.into_iter().enumerate().collect(),
    })
}
