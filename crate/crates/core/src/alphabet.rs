//! Alphabets and the matrix encoding of sequences.
//!
//! A sequence of length `L` over an alphabet of `n` symbols is represented
//! by an `L x n` row-stochastic matrix. Hard strings map to one-hot rows;
//! centroids produced by the optimizer are soft.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DNA_SYMBOLS: &str = "ACGT";
pub const PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Ordered set of distinct printable symbols.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if c.is_control() || c.is_whitespace() {
                return Err(Error::InvalidAlphabet(format!(
                    "symbol {c:?} is not printable"
                )));
            }
            if index.insert(c, i).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn dna() -> Self {
        Self::new(DNA_SYMBOLS).expect("valid preset")
    }

    pub fn protein() -> Self {
        Self::new(PROTEIN_SYMBOLS).expect("valid preset")
    }

    /// Looks up a shipped preset (`dna`, `protein`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "dna" => Some(Self::dna()),
            "protein" => Some(Self::protein()),
            _ => None,
        }
    }

    /// Collects the distinct symbols of `seqs` in order of first appearance.
    pub fn infer<'a, I>(seqs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = String::new();
        for s in seqs {
            for c in s.chars() {
                if !seen.contains(c) {
                    seen.push(c);
                }
            }
        }
        Self::new(&seen)
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, i: usize) -> char {
        self.symbols[i]
    }

    /// Returns the first position of `s` holding a symbol outside the alphabet.
    pub fn first_unknown(&self, s: &str) -> Option<(usize, char)> {
        s.chars()
            .enumerate()
            .find(|(_, c)| !self.index.contains_key(c))
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.symbols.iter().collect();
        f.debug_tuple("Alphabet").field(&s).finish()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    /// Accepts a preset name or a literal symbol list.
    fn from_str(s: &str) -> Result<Self> {
        match Self::preset(s) {
            Some(a) => Ok(a),
            None => Self::new(s),
        }
    }
}

/// `L x n` matrix stored row-major. Rows of a valid encoding are probability vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEncoding {
    data: Vec<f64>,
    len: usize,
    alphabet_size: usize,
}

impl SequenceEncoding {
    /// Wraps a row-major matrix, checking that every row is a probability vector.
    pub fn from_rows(data: Vec<f64>, alphabet_size: usize) -> Result<Self> {
        let enc = Self::from_raw(data, alphabet_size)?;
        for (i, row) in enc.rows().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(enc)
    }

    /// Wraps a row-major matrix without the stochastic-row check.
    ///
    /// Used for perturbed inputs when differentiating the unconstrained function.
    pub fn from_raw(data: Vec<f64>, alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 || data.len() % alphabet_size != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form rows of width {alphabet_size}",
                data.len()
            )));
        }
        Ok(Self {
            len: data.len() / alphabet_size,
            data,
            alphabet_size,
        })
    }

    pub fn empty(alphabet_size: usize) -> Self {
        Self {
            data: Vec::new(),
            len: 0,
            alphabet_size,
        }
    }

    /// Number of rows (symbols).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.alphabet_size..(i + 1) * self.alphabet_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact on an empty slice yields nothing, as required for L = 0
        self.data.chunks_exact(self.alphabet_size)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One-hot encodes `s` over `alphabet`.
pub fn encode_one_hot(s: &str, alphabet: &Alphabet) -> Result<SequenceEncoding> {
    let n = alphabet.size();
    let mut data = Vec::with_capacity(s.len() * n);
    for (position, symbol) in s.chars().enumerate() {
        let k = alphabet
            .index(symbol)
            .ok_or(Error::UnknownSymbol { position, symbol })?;
        let start = data.len();
        data.resize(start + n, 0.0);
        data[start + k] = 1.0;
    }
    Ok(SequenceEncoding {
        len: data.len() / n,
        data,
        alphabet_size: n,
    })
}

/// Decodes each row to its most probable symbol. Ties go to the lowest index.
pub fn decode_argmax(x: &SequenceEncoding, alphabet: &Alphabet) -> String {
    debug_assert_eq!(x.alphabet_size(), alphabet.size());
    x.rows().map(|row| alphabet.symbol(argmax(row))).collect()
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Mixes every row with the uniform distribution: `(1 - eps*n) * x + eps`.
pub fn soften(x: &SequenceEncoding, eps: f64) -> SequenceEncoding {
    let n = x.alphabet_size() as f64;
    debug_assert!(eps > 0.0 && eps < 1.0 / n, "eps must lie in (0, 1/n)");
    let keep = 1.0 - eps * n;
    SequenceEncoding {
        data: x.as_slice().iter().map(|&v| keep * v + eps).collect(),
        len: x.len(),
        alphabet_size: x.alphabet_size(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_hot_basic() {
        let dna = Alphabet::dna();
        let x = encode_one_hot("AC", &dna).unwrap();
        assert_eq!(x.as_slice(), &[1., 0., 0., 0., 0., 1., 0., 0.]);
        assert_eq!(x.len(), 2);

        let e = encode_one_hot("", &dna).unwrap();
        assert_eq!(e.len(), 0);
        assert_eq!(e.alphabet_size(), 4);
        assert_eq!(e.rows().count(), 0);
    }

    #[test]
    fn one_hot_unknown_symbol() {
        match encode_one_hot("AZ", &Alphabet::dna()) {
            Err(Error::UnknownSymbol { position, symbol }) => {
                assert_eq!((position, symbol), (1, 'Z'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn argmax_decoding() {
        let dna = Alphabet::dna();
        let x = SequenceEncoding::from_rows(vec![1., 0., 0., 0., 0., 1., 0., 0.], 4).unwrap();
        assert_eq!(decode_argmax(&x, &dna), "AC");
        let x = SequenceEncoding::from_rows(vec![0.4, 0.3, 0.2, 0.1], 4).unwrap();
        assert_eq!(decode_argmax(&x, &dna), "A");
        let x = SequenceEncoding::from_rows(vec![0.25; 4], 4).unwrap();
        assert_eq!(decode_argmax(&x, &dna), "A");
        let x = SequenceEncoding::from_rows(vec![0.1, 0.4, 0.4, 0.1], 4).unwrap();
        assert_eq!(decode_argmax(&x, &dna), "C");
    }

    #[test]
    fn soften_values() {
        let x = SequenceEncoding::from_rows(vec![1., 0., 0., 0.], 4).unwrap();
        let s = soften(&x, 0.05);
        for (a, b) in s.as_slice().iter().zip([0.85, 0.05, 0.05, 0.05]) {
            assert!((a - b).abs() < 1e-15);
        }
        let u = SequenceEncoding::from_rows(vec![0.25; 4], 4).unwrap();
        let su = soften(&u, 0.05);
        for v in su.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let tiny = soften(&x, 1e-12);
        for (a, b) in tiny.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new("A").is_err());
        assert!(Alphabet::new("AA").is_err());
        assert!(Alphabet::new("A C").is_err());
        assert_eq!(Alphabet::protein().size(), 20);
        assert_eq!("dna".parse::<Alphabet>().unwrap(), Alphabet::dna());
        assert_eq!("XY".parse::<Alphabet>().unwrap().size(), 2);
        let inferred = Alphabet::infer(["GATT", "ACA"]).unwrap();
        assert_eq!(inferred.to_string(), "GATC");
    }

    #[test]
    fn from_rows_rejects_non_stochastic() {
        assert!(SequenceEncoding::from_rows(vec![0.5, 0.6], 2).is_err());
        assert!(SequenceEncoding::from_rows(vec![1.5, -0.5], 2).is_err());
        assert!(SequenceEncoding::from_rows(vec![1.0, 0.0, 1.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn decode_inverts_one_hot(s in "[ACGT]{0,40}") {
            let dna = Alphabet::dna();
            let x = encode_one_hot(&s, &dna).unwrap();
            prop_assert_eq!(decode_argmax(&x, &dna), s);
        }

        #[test]
        fn soften_keeps_rows_stochastic(
            raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..10),
            eps in 1e-6f64..0.2499,
        ) {
            let data: Vec<f64> = raw
                .iter()
                .flat_map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-9;
                    r.iter().map(move |v| (v + 1e-9 / 4.0) / s).collect::<Vec<_>>()
                })
                .collect();
            let x = SequenceEncoding::from_raw(data, 4).unwrap();
            let y = soften(&x, eps);
            for (rx, ry) in x.rows().zip(y.rows()) {
                let sx: f64 = rx.iter().sum();
                let sy: f64 = ry.iter().sum();
                prop_assert!((sx - sy).abs() <= 1e-12);
                prop_assert!(ry.iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}
