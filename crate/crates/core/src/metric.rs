//! Levenshtein distance and the soft edit distance (SED).
//!
//! SED is the softmin (Gibbs) average, at temperature `tau < 0`, of the
//! alignment cost over every pair of equal-length row subsets of the two
//! encodings. [`sed`] evaluates it with the polynomial recurrence in scaled
//! form; [`sed_brute_force`] enumerates the subsets directly.

use rayon::prelude::*;

use crate::alphabet::SequenceEncoding;
use crate::error::{Error, Result};
use crate::kernel::{self, Temperature};

/// Default softmin temperature.
pub const DEFAULT_TAU: f64 = -4.0;

/// Most negative temperature accepted; keeps every scaled cell in the normal range.
pub const MIN_TAU: f64 = -64.0;

/// Longest sequence accepted by [`sed_brute_force`].
pub const BRUTE_FORCE_MAX_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SedParams {
    tau: f64,
}

impl SedParams {
    pub fn new(tau: f64) -> Result<Self> {
        if !(MIN_TAU..0.0).contains(&tau) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in [{MIN_TAU}, 0), got {tau}"
            )));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for SedParams {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU }
    }
}

/// Retained DP state for one pair.
///
/// `alpha(i, j) = alpha_sig * 2^scale_exp` and likewise for `beta`.
#[derive(Clone, Debug)]
pub struct SedTables {
    rows: usize,
    cols: usize,
    pub alpha_sig: Vec<f64>,
    pub beta_sig: Vec<f64>,
    pub scale_exp: Vec<i64>,
    /// Row-major `L1 x L2` mismatch costs.
    pub delta: Vec<f64>,
}

impl SedTables {
    /// `(L1 + 1, L2 + 1)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows + 1, self.cols + 1)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.cols + 1) + j
    }

    /// `alpha(i, j) / beta(i, j)`, the soft distance between the two prefixes.
    pub fn prefix_ratio(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        self.alpha_sig[k] / self.beta_sig[k]
    }

    /// Natural log of `beta(i, j)`.
    pub fn log_beta(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        self.beta_sig[k].ln() + self.scale_exp[k] as f64 * std::f64::consts::LN_2
    }

    pub fn delta(&self, i: usize, j: usize) -> f64 {
        self.delta[(i - 1) * self.cols + (j - 1)]
    }

    pub fn sed(&self) -> f64 {
        self.prefix_ratio(self.rows, self.cols)
    }
}

fn check_alphabets(x1: &SequenceEncoding, x2: &SequenceEncoding) -> Result<()> {
    if x1.alphabet_size() != x2.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: x1.alphabet_size(),
            right: x2.alphabet_size(),
        });
    }
    Ok(())
}

/// Classic unit-cost edit distance, two-row Wagner-Fischer.
pub fn levenshtein(s1: &str, s2: &str) -> usize {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    levenshtein_slices(&a, &b)
}

pub fn levenshtein_slices<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Mismatch cost between row `i` of `x1` and row `j` of `x2` (1-based).
pub fn mismatch_cost(x1: &SequenceEncoding, x2: &SequenceEncoding, i: usize, j: usize) -> f64 {
    kernel::row_mismatch(x1.row(i - 1), x2.row(j - 1))
}

pub fn sed_tables(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams) -> Result<SedTables> {
    check_alphabets(x1, x2)?;
    let grid = kernel::fill_grid(x1, x2, &Temperature::new(p.tau));
    let n = grid.cells.len();
    let mut alpha_sig = Vec::with_capacity(n);
    let mut beta_sig = Vec::with_capacity(n);
    let mut scale_exp = Vec::with_capacity(n);
    for c in &grid.cells {
        alpha_sig.push(c.a);
        beta_sig.push(c.b);
        scale_exp.push(c.e);
    }
    Ok(SedTables {
        rows: grid.rows,
        cols: grid.cols,
        alpha_sig,
        beta_sig,
        scale_exp,
        delta: grid.delta,
    })
}

pub fn sed(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams) -> Result<f64> {
    check_alphabets(x1, x2)?;
    Ok(sed_unchecked(x1, x2, p))
}

pub(crate) fn sed_unchecked(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams) -> f64 {
    kernel::final_cell(x1, x2, &Temperature::new(p.tau)).ratio()
}

/// `SED(x1, x2) - (SED(x1, x1) + SED(x2, x2)) / 2`; zero on the diagonal.
pub fn sed_unbiased(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams) -> Result<f64> {
    check_alphabets(x1, x2)?;
    let cross = sed_unchecked(x1, x2, p);
    let s1 = sed_unchecked(x1, x1, p);
    let s2 = sed_unchecked(x2, x2, p);
    Ok(cross - 0.5 * (s1 + s2))
}

/// Exhaustive softmin over all equal-length row-subset pairs. Exponential; validation only.
pub fn sed_brute_force(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams) -> Result<f64> {
    check_alphabets(x1, x2)?;
    for len in [x1.len(), x2.len()] {
        if len > BRUTE_FORCE_MAX_LEN {
            return Err(Error::TooLong {
                len,
                max: BRUTE_FORCE_MAX_LEN,
            });
        }
    }
    let (n1, n2) = (x1.len(), x2.len());
    let delta: Vec<Vec<f64>> = (1..=n1)
        .map(|i| (1..=n2).map(|j| mismatch_cost(x1, x2, i, j)).collect())
        .collect();

    // group subsets by cardinality; only equal-size subsets pair up
    let by_size = |n: usize| {
        let mut groups: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n + 1];
        for mask in 0u32..(1 << n) {
            let rows: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
            groups[rows.len()].push(rows);
        }
        groups
    };
    let g1 = by_size(n1);
    let g2 = by_size(n2);

    let mut costs = Vec::new();
    for l in 0..=n1.min(n2) {
        let indel = (n1 - l + n2 - l) as f64;
        for s1 in &g1[l] {
            for s2 in &g2[l] {
                let sub: f64 = s1.iter().zip(s2).map(|(&i, &j)| delta[i][j]).sum();
                costs.push(sub + indel);
            }
        }
    }
    let r_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for r in costs {
        let w = (p.tau * (r - r_min)).exp();
        num += r * w;
        den += w;
    }
    Ok(num / den)
}

/// Symmetric all-pairs matrix of `sed` or `sed_unbiased`, row-major `n x n`.
///
/// Cells are computed independently in parallel; the result does not depend
/// on the worker count.
pub fn distance_matrix(xs: &[SequenceEncoding], p: SedParams, unbiased: bool) -> Result<Vec<f64>> {
    let n = xs.len();
    if let Some(first) = xs.first() {
        for x in xs {
            check_alphabets(first, x)?;
        }
    }
    let selfs: Vec<f64> = xs.par_iter().map(|x| sed_unchecked(x, x, p)).collect();
    let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = upper
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                if unbiased {
                    0.0
                } else {
                    selfs[i]
                }
            } else {
                let v = sed_unchecked(&xs[i], &xs[j], p);
                if unbiased {
                    v - 0.5 * (selfs[i] + selfs[j])
                } else {
                    v
                }
            }
        })
        .collect();
    let mut m = vec![0.0; n * n];
    for (&(i, j), v) in upper.iter().zip(values) {
        m[i * n + j] = v;
        m[j * n + i] = v;
    }
    Ok(m)
}
