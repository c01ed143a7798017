//! Synthetic dataset generation, sequence file parsing and report export.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::metric::levenshtein;

/// Attempt budget for rejection sampling of bases.
pub const BASIS_ATTEMPTS: usize = 100_000;

/// FASTA line width on write.
pub const FASTA_WIDTH: usize = 70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Insertion,
    Deletion,
    Substitution,
}

impl EditOp {
    pub const ALL: [EditOp; 3] = [EditOp::Insertion, EditOp::Deletion, EditOp::Substitution];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Maximum number of edits applied to one generated string.
    pub rate: usize,
    pub ops: Vec<EditOp>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(rate: usize, seed: u64) -> Self {
        Self {
            rate,
            ops: EditOp::ALL.to_vec(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub strings: Vec<String>,
    pub true_labels: Vec<usize>,
    pub bases: Vec<String>,
}

fn random_string(rng: &mut ChaCha8Rng, len: usize, a: &Alphabet) -> String {
    (0..len)
        .map(|_| a.symbol(rng.gen_range(0..a.size())))
        .collect()
}

/// `k` random strings of length `length` with pairwise Levenshtein distance
/// at least `min_dist`, by rejection sampling.
pub fn gen_bases(
    k: usize,
    length: usize,
    min_dist: usize,
    a: &Alphabet,
    seed: u64,
) -> Result<Vec<String>> {
    // equal-length strings are never further apart than their length
    if k > 1 && min_dist > length {
        return Err(Error::Unsatisfiable { attempts: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases: Vec<String> = Vec::with_capacity(k);
    let mut attempts = 0;
    while bases.len() < k {
        if attempts == BASIS_ATTEMPTS {
            return Err(Error::Unsatisfiable { attempts });
        }
        attempts += 1;
        let cand = random_string(&mut rng, length, a);
        if bases.iter().all(|b| levenshtein(b, &cand) >= min_dist) {
            bases.push(cand);
        }
    }
    Ok(bases)
}

fn mutate(base: &str, noise: &NoiseSpec, a: &Alphabet, rng: &mut ChaCha8Rng) -> String {
    let mut s: Vec<char> = base.chars().collect();
    if noise.ops.is_empty() {
        return base.to_string();
    }
    let count = rng.gen_range(0..=noise.rate);
    for _ in 0..count {
        match *noise.ops.choose(rng).expect("nonempty") {
            EditOp::Insertion => {
                let pos = rng.gen_range(0..=s.len());
                s.insert(pos, a.symbol(rng.gen_range(0..a.size())));
            }
            // an empty string has nothing to delete or substitute; the edit is skipped
            EditOp::Deletion if !s.is_empty() => {
                let pos = rng.gen_range(0..s.len());
                s.remove(pos);
            }
            EditOp::Substitution if !s.is_empty() => {
                let pos = rng.gen_range(0..s.len());
                let old = a.index(s[pos]).unwrap_or(0);
                let shift = rng.gen_range(1..a.size());
                s[pos] = a.symbol((old + shift) % a.size());
            }
            _ => {}
        }
    }
    s.into_iter().collect()
}

/// `per_base` noisy copies of every basis, grouped by basis.
pub fn gen_noisy(bases: &[String], per_base: usize, noise: &NoiseSpec, a: &Alphabet) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut strings = Vec::with_capacity(bases.len() * per_base);
    let mut true_labels = Vec::with_capacity(bases.len() * per_base);
    for (label, base) in bases.iter().enumerate() {
        for _ in 0..per_base {
            strings.push(mutate(base, noise, a, &mut rng));
            true_labels.push(label);
        }
    }
    SyntheticDataset {
        strings,
        true_labels,
        bases: bases.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqFormat {
    Fasta,
    Lines,
}

impl FromStr for SeqFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fasta" | "fa" => Ok(Self::Fasta),
            "lines" | "txt" => Ok(Self::Lines),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

impl SeqFormat {
    /// Guesses from the extension; anything but `.fa`/`.fasta`/`.fna`/`.faa` is `Lines`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fa" | "fasta" | "fna" | "faa") => Self::Fasta,
            _ => Self::Lines,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqRecord {
    pub name: String,
    pub seq: String,
}

/// Parses FASTA (records in order, unwrapped or wrapped) or one sequence per line.
///
/// Every sequence must be over `a`; lines-format records are named `seq_<i>`.
pub fn parse_sequences<R: Read>(reader: R, format: SeqFormat, a: &Alphabet) -> Result<Vec<SeqRecord>> {
    let mut records: Vec<SeqRecord> = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let lineno = n + 1;
        match format {
            SeqFormat::Lines => {
                let seq = line.trim();
                if seq.is_empty() {
                    continue;
                }
                records.push(SeqRecord {
                    name: format!("seq_{}", records.len()),
                    seq: seq.to_string(),
                });
            }
            SeqFormat::Fasta => {
                if let Some(header) = line.strip_prefix('>') {
                    records.push(SeqRecord {
                        name: header.trim().to_string(),
                        seq: String::new(),
                    });
                } else if line.trim().is_empty() {
                    continue;
                } else if let Some(rec) = records.last_mut() {
                    rec.seq.push_str(line.trim());
                } else {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "sequence data before the first '>' header".into(),
                    });
                }
            }
        }
    }
    for rec in &records {
        if let Some((position, _)) = a.first_unknown(&rec.seq) {
            return Err(Error::UnknownSymbolInRecord {
                record: rec.name.clone(),
                position,
            });
        }
    }
    Ok(records)
}

pub fn read_sequences(path: &Path, format: SeqFormat, a: &Alphabet) -> Result<Vec<SeqRecord>> {
    parse_sequences(fs::File::open(path)?, format, a)
}

/// Reads the raw strings without alphabet validation, for alphabet inference.
pub fn read_raw(path: &Path, format: SeqFormat) -> Result<Vec<SeqRecord>> {
    // every printable char is accepted by an alphabet built from the file itself
    let text = fs::read_to_string(path)?;
    let probe: Vec<&str> = text
        .lines()
        .filter(|l| format == SeqFormat::Lines || !l.starts_with('>'))
        .collect();
    let alphabet = Alphabet::infer(probe.iter().map(|l| l.trim()))?;
    parse_sequences(text.as_bytes(), format, &alphabet)
}

pub fn format_fasta<'a, I>(records: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut out = String::new();
    for (name, seq) in records {
        let _ = writeln!(out, ">{name}");
        let chars: Vec<char> = seq.chars().collect();
        if chars.is_empty() {
            out.push('\n');
        }
        for chunk in chars.chunks(FASTA_WIDTH) {
            out.extend(chunk);
            out.push('\n');
        }
    }
    out
}

pub fn format_labels_tsv(names: &[String], labels: &[usize]) -> String {
    let mut out = String::from("name\tlabel\n");
    for (name, label) in names.iter().zip(labels) {
        let _ = writeln!(out, "{name}\t{label}");
    }
    out
}

/// Parses a `name\tlabel` file with header row.
pub fn parse_labels_tsv(text: &str) -> Result<Vec<(String, usize)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 {
            if line != "name\tlabel" {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header \"name\\tlabel\"".into(),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (name, label) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
            line: n + 1,
            message: "expected two tab-separated columns".into(),
        })?;
        let label = label.parse().map_err(|_| Error::Parse {
            line: n + 1,
            message: format!("invalid label {label:?}"),
        })?;
        out.push((name.to_string(), label));
    }
    Ok(out)
}

/// Plain decimal CSV, one row per sequence; shortest round-trip formatting.
pub fn format_matrix_csv(matrix: &[f64], n: usize) -> String {
    let mut out = String::new();
    for row in matrix.chunks(n.max(1)).take(n) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Files written by [`write_report`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub labels: PathBuf,
    pub consensus: PathBuf,
    pub matrix: Option<PathBuf>,
    pub summary: PathBuf,
}

/// Writes `labels.tsv`, `consensus.fasta`, optionally `matrix.csv`, and
/// `summary.json` into `out_dir`.
pub fn write_report<S: Serialize>(
    report: &crate::kmeans::ClusterReport,
    names: &[String],
    out_dir: &Path,
    matrix: Option<(&[f64], usize)>,
    summary: &S,
) -> Result<ReportFiles> {
    if names.len() != report.labels.len() {
        return Err(Error::LengthMismatch {
            left: names.len(),
            right: report.labels.len(),
        });
    }
    fs::create_dir_all(out_dir)?;
    let labels = out_dir.join("labels.tsv");
    fs::write(&labels, format_labels_tsv(names, &report.labels))?;

    let consensus = out_dir.join("consensus.fasta");
    let centroid_names: Vec<String> = (0..report.consensuses.len())
        .map(|i| format!("centroid_{i}"))
        .collect();
    fs::write(
        &consensus,
        format_fasta(
            centroid_names
                .iter()
                .map(String::as_str)
                .zip(report.consensuses.iter().map(String::as_str)),
        ),
    )?;

    let matrix = match matrix {
        Some((m, n)) => {
            let path = out_dir.join("matrix.csv");
            fs::write(&path, format_matrix_csv(m, n))?;
            Some(path)
        }
        None => None,
    };

    let summary_path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&summary_path, text)?;
    Ok(ReportFiles {
        labels,
        consensus,
        matrix,
        summary: summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dna() -> Alphabet {
        Alphabet::dna()
    }

    #[test]
    fn bases_respect_distance() {
        let one = gen_bases(1, 7, 100, &dna(), 3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 7);

        let two = gen_bases(2, 10, 5, &dna(), 11).unwrap();
        assert!(levenshtein(&two[0], &two[1]) >= 5);

        let five = gen_bases(5, 10, 5, &dna(), 2).unwrap();
        for i in 0..5 {
            for j in i + 1..5 {
                assert!(levenshtein(&five[i], &five[j]) >= 5);
            }
        }
        assert!(matches!(
            gen_bases(2, 3, 10, &dna(), 0),
            Err(Error::Unsatisfiable { .. })
        ));
    }

    #[test]
    fn noisy_counts_and_zero_rate() {
        let bases = gen_bases(2, 10, 5, &dna(), 1).unwrap();
        let ds = gen_noisy(&bases, 1000, &NoiseSpec::new(2, 9), &dna());
        assert_eq!(ds.strings.len(), 2000);
        assert_eq!(ds.true_labels.iter().filter(|&&l| l == 0).count(), 1000);
        assert_eq!(ds.true_labels.iter().filter(|&&l| l == 1).count(), 1000);
        for (s, &l) in ds.strings.iter().zip(&ds.true_labels) {
            assert!(levenshtein(s, &bases[l]) <= 2);
        }

        let clean = gen_noisy(&bases, 10, &NoiseSpec::new(0, 9), &dna());
        for (s, &l) in clean.strings.iter().zip(&clean.true_labels) {
            assert_eq!(s, &bases[l]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_bases(3, 12, 6, &dna(), 5).unwrap();
        let b = gen_bases(3, 12, 6, &dna(), 5).unwrap();
        assert_eq!(a, b);
        let na = gen_noisy(&a, 50, &NoiseSpec::new(4, 8), &dna());
        let nb = gen_noisy(&b, 50, &NoiseSpec::new(4, 8), &dna());
        assert_eq!(na, nb);
    }

    #[test]
    fn parse_examples() {
        let r = parse_sequences(">r1\nACGT\n".as_bytes(), SeqFormat::Fasta, &dna()).unwrap();
        assert_eq!(r, vec![SeqRecord { name: "r1".into(), seq: "ACGT".into() }]);

        let r = parse_sequences("ACGT\n\nGGTA\n".as_bytes(), SeqFormat::Lines, &dna()).unwrap();
        let seqs: Vec<_> = r.iter().map(|r| r.seq.as_str()).collect();
        assert_eq!(seqs, ["ACGT", "GGTA"]);
        assert_eq!(r[1].name, "seq_1");

        match parse_sequences(">r1\nACZT\n".as_bytes(), SeqFormat::Fasta, &dna()) {
            Err(Error::UnknownSymbolInRecord { record, position }) => {
                assert_eq!((record.as_str(), position), ("r1", 2));
            }
            other => panic!("unexpected {other:?}"),
        }

        assert!(matches!(
            parse_sequences("ACGT\n>r1\n".as_bytes(), SeqFormat::Fasta, &dna()),
            Err(Error::Parse { line: 1, .. })
        ));

        let wrapped = ">a b\nAC\nGT\n>empty\n>c\r\nTT\r\n";
        let r = parse_sequences(wrapped.as_bytes(), SeqFormat::Fasta, &dna()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].seq, "ACGT");
        assert_eq!(r[0].name, "a b");
        assert_eq!(r[1].seq, "");
        assert_eq!(r[2].seq, "TT");
    }

    #[test]
    fn fasta_wraps_at_width() {
        let long = "A".repeat(150);
        let text = format_fasta([("x", long.as_str())]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines, [">x", &"A".repeat(70), &"A".repeat(70), &"A".repeat(10)]);
    }

    #[test]
    fn labels_tsv_round_trip() {
        let names = vec!["a".to_string(), "b c".to_string()];
        let text = format_labels_tsv(&names, &[1, 0]);
        assert_eq!(text, "name\tlabel\na\t1\nb c\t0\n");
        let parsed = parse_labels_tsv(&text).unwrap();
        assert_eq!(parsed, vec![("a".into(), 1), ("b c".into(), 0)]);
        assert!(parse_labels_tsv("nope\n").is_err());
        assert!(parse_labels_tsv("name\tlabel\nx\ty\n").is_err());
    }

    #[test]
    fn matrix_csv_layout() {
        let text = format_matrix_csv(&[0.0, 1.5, 1.5, 0.0], 2);
        assert_eq!(text, "0,1.5\n1.5,0\n");
    }

    proptest! {
        #[test]
        fn noisy_within_rate(seed in any::<u64>(), rate in 0usize..6) {
            let a = dna();
            let bases = gen_bases(2, 8, 3, &a, seed).unwrap();
            let ds = gen_noisy(&bases, 20, &NoiseSpec::new(rate, seed ^ 1), &a);
            for (s, &l) in ds.strings.iter().zip(&ds.true_labels) {
                prop_assert!(levenshtein(s, &ds.bases[l]) <= rate);
            }
        }

        #[test]
        fn fasta_round_trip(
            recs in prop::collection::vec(("[a-z][a-z0-9_ ]{0,12}", "[ACGT]{0,200}"), 0..6)
        ) {
            let text = format_fasta(recs.iter().map(|(n, s)| (n.trim(), s.as_str())));
            let back = parse_sequences(text.as_bytes(), SeqFormat::Fasta, &dna()).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (b, (n, s)) in back.iter().zip(&recs) {
                prop_assert_eq!(&b.name, n.trim());
                prop_assert_eq!(&b.seq, s);
            }
        }
    }
}
