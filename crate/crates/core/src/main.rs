use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use soft_edit::data::{
    format_fasta, format_labels_tsv, format_matrix_csv, gen_bases, gen_noisy, parse_labels_tsv,
    read_raw, read_sequences, write_report, NoiseSpec, SeqFormat, SeqRecord,
};
use soft_edit::eval::{clustering_accuracy, consensus_quality, table1, EvalSummary};
use soft_edit::metric::DEFAULT_TAU;
use soft_edit::{
    consensus::median_length, distance_matrix, encode_one_hot, kmeans, levenshtein,
    optimize_consensus, sed, sed_unbiased, Alphabet, Error, KMeansConfig, OptimizerConfig, Result,
    SedParams, SequenceEncoding,
};

#[derive(Parser)]
#[command(name = "soft-edit", version, about = "Soft edit distance, consensus search and sequence clustering")]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "SED_THREADS", default_value_t = 0)]
    threads: usize,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Preset name (dna, protein) or a literal list of symbols.
    #[arg(long, global = true, default_value = "dna")]
    alphabet: String,

    /// Build the alphabet from the symbols present in the input.
    #[arg(long, global = true)]
    infer_alphabet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Soft edit distance between sequences.
    Dist(DistArgs),
    /// Generate a synthetic clustering dataset.
    Gen(GenArgs),
    /// Find the consensus of a set of sequences.
    Consensus(ConsensusArgs),
    /// Cluster sequences with minibatch k-means.
    Cluster(ClusterArgs),
    /// R² between SED and Levenshtein on random DNA pairs.
    Table1(Table1Args),
}

#[derive(Args)]
struct DistArgs {
    /// Two sequences to compare.
    seqs: Vec<String>,

    /// Tab-separated file with one pair of sequences per line.
    #[arg(long, conflicts_with = "input")]
    pairs: Option<PathBuf>,

    /// Sequence file whose all-pairs matrix is written with --matrix.
    #[arg(long = "in", requires = "matrix")]
    input: Option<PathBuf>,

    /// Write the all-pairs distance matrix here.
    #[arg(long)]
    matrix: Option<PathBuf>,

    #[arg(long, allow_hyphen_values = true, default_value_t = DEFAULT_TAU)]
    tau: f64,

    #[arg(long)]
    unbiased: bool,

    /// Also print the Levenshtein distance.
    #[arg(long)]
    with_ed: bool,

    /// Input format (fasta or lines); guessed from the extension by default.
    #[arg(long)]
    format: Option<SeqFormat>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    length: usize,
    #[arg(long, default_value_t = 5)]
    min_dist: usize,
    #[arg(long, default_value_t = 1000)]
    per_base: usize,
    #[arg(long, default_value_t = 2)]
    noise_rate: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct OptArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
}

impl OptArgs {
    fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.learning_rate,
            steps_per_update: self.steps,
            batch_size: self.batch_size,
            tau: self.tau,
            seed,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Consensus length; the median input length by default.
    #[arg(long)]
    length: Option<usize>,
    #[command(flatten)]
    opt: OptArgs,
    /// Directory for consensus.fasta and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<SeqFormat>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Centroid length; the median input length by default.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, default_value_t = 100)]
    max_rounds: usize,
    #[arg(long, default_value_t = 3)]
    stable_rounds: usize,
    #[arg(long, default_value_t = 256)]
    assign_batch: usize,
    /// Independent runs; the lowest final objective wins.
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[command(flatten)]
    opt: OptArgs,
    /// True labels (name, label TSV) for scoring accuracy.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Reference bases for scoring the consensuses.
    #[arg(long)]
    bases: Option<PathBuf>,
    /// Also write the unbiased distance matrix of the input.
    #[arg(long)]
    matrix: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<SeqFormat>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 10_000)]
    n_pairs: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, -2.0, -3.0, -4.0])]
    taus: Vec<f64>,
    /// Write the rows as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Ctx {
    seed: u64,
    alphabet: String,
    infer: bool,
}

impl Ctx {
    fn fixed_alphabet(&self) -> Result<Alphabet> {
        self.alphabet.parse()
    }

    /// Reads a sequence file and returns its records with their alphabet.
    fn load(&self, path: &Path, format: Option<SeqFormat>) -> Result<(Vec<SeqRecord>, Alphabet)> {
        let format = format.unwrap_or_else(|| SeqFormat::from_path(path));
        if self.infer {
            let records = read_raw(path, format)?;
            let alphabet = Alphabet::infer(records.iter().map(|r| r.seq.as_str()))?;
            Ok((records, alphabet))
        } else {
            let alphabet = self.fixed_alphabet()?;
            Ok((read_sequences(path, format, &alphabet)?, alphabet))
        }
    }

    fn alphabet_for(&self, seqs: &[&str]) -> Result<Alphabet> {
        if self.infer {
            Alphabet::infer(seqs.iter().copied())
        } else {
            self.fixed_alphabet()
        }
    }
}

fn encode_all(records: &[SeqRecord], a: &Alphabet) -> Result<Vec<SequenceEncoding>> {
    records.iter().map(|r| encode_one_hot(&r.seq, a)).collect()
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn parse_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => out.push((a.trim().to_string(), b.trim().to_string())),
            _ => {
                return Err(Error::Parse {
                    line: n + 1,
                    message: "expected two tab-separated sequences".into(),
                })
            }
        }
    }
    Ok(out)
}

fn cmd_dist(ctx: &Ctx, args: &DistArgs) -> Result<()> {
    let p = SedParams::new(args.tau)?;
    let distance = |x1: &SequenceEncoding, x2: &SequenceEncoding| {
        if args.unbiased {
            sed_unbiased(x1, x2, p)
        } else {
            sed(x1, x2, p)
        }
    };

    if let Some(input) = &args.input {
        if !args.seqs.is_empty() {
            return Err(Error::InvalidParameter("--in takes no positional sequences".into()));
        }
        let (records, a) = ctx.load(input, args.format)?;
        let xs = encode_all(&records, &a)?;
        let m = distance_matrix(&xs, p, args.unbiased)?;
        fs::write(args.matrix.as_ref().expect("required by clap"), format_matrix_csv(&m, xs.len()))?;
        return Ok(());
    }

    let pairs = match (&args.pairs, args.seqs.as_slice()) {
        (Some(path), []) => parse_pairs(path)?,
        (None, [a, b]) => vec![(a.clone(), b.clone())],
        (Some(_), _) => return Err(Error::InvalidParameter("--pairs takes no positional sequences".into())),
        (None, _) => {
            return Err(Error::InvalidParameter(
                "give exactly two sequences, --pairs FILE, or --in FILE --matrix OUT".into(),
            ))
        }
    };
    let all: Vec<&str> = pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let a = ctx.alphabet_for(&all)?;

    if let Some(matrix) = &args.matrix {
        // the matrix covers every distinct sequence in order of first appearance
        let mut seen = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for s in &all {
            if seen.insert(*s, ()).is_none() {
                order.push(s);
            }
        }
        let xs = order
            .iter()
            .map(|s| encode_one_hot(s, &a))
            .collect::<Result<Vec<_>>>()?;
        let m = distance_matrix(&xs, p, args.unbiased)?;
        fs::write(matrix, format_matrix_csv(&m, xs.len()))?;
        return Ok(());
    }

    let encoded = pairs
        .iter()
        .map(|(s1, s2)| Ok((encode_one_hot(s1, &a)?, encode_one_hot(s2, &a)?)))
        .collect::<Result<Vec<_>>>()?;
    let values = encoded
        .par_iter()
        .map(|(x1, x2)| distance(x1, x2))
        .collect::<Result<Vec<f64>>>()?;
    let single = args.pairs.is_none();
    for ((s1, s2), v) in pairs.iter().zip(values) {
        let mut line = if single {
            format!("{v:.6}")
        } else {
            format!("{s1}\t{s2}\t{v:.6}")
        };
        if args.with_ed {
            line.push_str(&format!("\t{}", levenshtein(s1, s2)));
        }
        println!("{line}");
    }
    Ok(())
}

#[derive(Serialize)]
struct GenSummary {
    k: usize,
    length: usize,
    min_dist: usize,
    per_base: usize,
    noise_rate: usize,
    seed: u64,
    alphabet: String,
    sequences: usize,
}

fn cmd_gen(ctx: &Ctx, args: &GenArgs) -> Result<()> {
    if args.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let a = ctx.fixed_alphabet()?;
    let bases = gen_bases(args.k, args.length, args.min_dist, &a, ctx.seed)?;
    // the noise stream is decorrelated from the basis stream
    let noise = NoiseSpec::new(args.noise_rate, ctx.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let ds = gen_noisy(&bases, args.per_base, &noise, &a);

    fs::create_dir_all(&args.out)?;
    let names: Vec<String> = (0..ds.strings.len()).map(|i| format!("seq_{i}")).collect();
    fs::write(
        args.out.join("sequences.fasta"),
        format_fasta(names.iter().map(String::as_str).zip(ds.strings.iter().map(String::as_str))),
    )?;
    fs::write(args.out.join("labels.tsv"), format_labels_tsv(&names, &ds.true_labels))?;
    let base_names: Vec<String> = (0..bases.len()).map(|i| format!("base_{i}")).collect();
    fs::write(
        args.out.join("bases.fasta"),
        format_fasta(base_names.iter().map(String::as_str).zip(bases.iter().map(String::as_str))),
    )?;
    write_json(
        &args.out.join("summary.json"),
        &GenSummary {
            k: args.k,
            length: args.length,
            min_dist: args.min_dist,
            per_base: args.per_base,
            noise_rate: args.noise_rate,
            seed: ctx.seed,
            alphabet: a.to_string(),
            sequences: ds.strings.len(),
        },
    )?;
    for (i, b) in bases.iter().enumerate() {
        let count = ds.true_labels.iter().filter(|&&l| l == i).count();
        println!("base_{i}\t{b}\t{count}");
    }
    Ok(())
}

#[derive(Serialize)]
struct ConsensusSummary {
    consensus: String,
    length: usize,
    sequences: usize,
    final_objective: f64,
    config: OptimizerConfig,
}

fn cmd_consensus(ctx: &Ctx, args: &ConsensusArgs) -> Result<()> {
    let cfg = args.opt.config(ctx.seed);
    cfg.validate()?;
    let (records, a) = ctx.load(&args.input, args.format)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let xs = encode_all(&records, &a)?;
    let length = args.length.unwrap_or_else(|| median_length(&xs));
    let res = optimize_consensus(&xs, &a, length, &cfg)?;
    let final_objective = res.objective_trace.last().map_or(f64::NAN, |t| t.1);
    println!("{}", res.consensus);
    println!("objective\t{final_objective:.6}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("consensus.fasta"), format_fasta([("consensus", res.consensus.as_str())]))?;
        write_json(
            &out.join("summary.json"),
            &ConsensusSummary {
                consensus: res.consensus.clone(),
                length,
                sequences: xs.len(),
                final_objective,
                config: cfg,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary {
    consensuses: Vec<String>,
    cluster_sizes: Vec<usize>,
    rounds_run: usize,
    restart: usize,
    objective: f64,
    objective_trace: Vec<f64>,
    metrics: EvalSummary,
    config: KMeansConfig,
}

/// Truth labels aligned to `names`, relabelled densely from 0 in order of first appearance.
fn load_truth(path: &Path, names: &[String]) -> Result<(Vec<usize>, usize)> {
    let rows = parse_labels_tsv(&fs::read_to_string(path)?)?;
    if rows.len() != names.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: names.len(),
        });
    }
    let mut dense = BTreeMap::new();
    let mut labels = Vec::with_capacity(rows.len());
    for ((name, label), expected) in rows.iter().zip(names) {
        if name != expected {
            return Err(Error::InvalidParameter(format!(
                "truth row {name:?} does not match sequence {expected:?}"
            )));
        }
        let next = dense.len();
        labels.push(*dense.entry(*label).or_insert(next));
    }
    Ok((labels, dense.len()))
}

fn cmd_cluster(ctx: &Ctx, args: &ClusterArgs) -> Result<()> {
    let cfg = KMeansConfig {
        k: args.k,
        centroid_length: args.length,
        max_rounds: args.max_rounds,
        stable_rounds: args.stable_rounds,
        assign_batch: args.assign_batch,
        restarts: args.restarts,
        opt: args.opt.config(ctx.seed),
        seed: ctx.seed,
    };
    cfg.validate()?;
    let (records, a) = ctx.load(&args.input, args.format)?;
    let names: Vec<String> = records.iter().map(|r| r.name.clone()).collect();
    let truth = args.truth.as_deref().map(|p| load_truth(p, &names)).transpose()?;
    let bases = match &args.bases {
        Some(p) => {
            let recs = ctx.load(p, args.format.or(Some(SeqFormat::from_path(p))))?.0;
            let seqs: Vec<String> = recs.into_iter().map(|r| r.seq).collect();
            if seqs.len() != args.k {
                return Err(Error::CountMismatch {
                    left: args.k,
                    right: seqs.len(),
                });
            }
            Some(seqs)
        }
        None => None,
    };

    let xs = encode_all(&records, &a)?;
    let report = kmeans(&xs, &a, &cfg)?;

    let mut metrics = EvalSummary::default();
    if let Some((labels, truth_k)) = &truth {
        metrics.accuracy = Some(clustering_accuracy(&report.labels, labels, args.k.max(*truth_k))?);
    }
    if let Some(bases) = &bases {
        let (delta, eps) = consensus_quality(&report.consensuses, bases)?;
        metrics.delta_mean_consensus_error = Some(delta);
        metrics.epsilon_ideal_fraction = Some(eps);
    }
    let matrix = if args.matrix {
        Some(distance_matrix(&xs, cfg.opt.params()?, true)?)
    } else {
        None
    };
    let mut sizes = vec![0; args.k];
    for &l in &report.labels {
        sizes[l] += 1;
    }
    let summary = ClusterSummary {
        consensuses: report.consensuses.clone(),
        cluster_sizes: sizes.clone(),
        rounds_run: report.rounds_run,
        restart: report.restart,
        objective: report.objective,
        objective_trace: report.objective_trace.clone(),
        metrics: metrics.clone(),
        config: cfg,
    };
    write_report(&report, &names, &args.out, matrix.as_deref().map(|m| (m, xs.len())), &summary)?;

    for (i, (c, n)) in report.consensuses.iter().zip(&sizes).enumerate() {
        println!("centroid_{i}\t{c}\t{n}");
    }
    println!("rounds\t{}", report.rounds_run);
    println!("objective\t{:.6}", report.objective);
    if let Some(acc) = metrics.accuracy {
        println!("accuracy\t{acc:.6}");
    }
    if let (Some(d), Some(e)) = (metrics.delta_mean_consensus_error, metrics.epsilon_ideal_fraction) {
        println!("delta\t{d:.6}");
        println!("epsilon\t{e:.6}");
    }
    Ok(())
}

fn cmd_table1(ctx: &Ctx, args: &Table1Args) -> Result<()> {
    if args.taus.is_empty() {
        return Err(Error::InvalidParameter("no temperatures given".into()));
    }
    let rows = table1(args.n_pairs, &args.taus, ctx.seed)?;
    println!("tau\tr_squared\tr_squared_affine");
    for r in &rows {
        println!("{:.6}\t{:.6}\t{:.6}", r.tau, r.r_squared, r.r_squared_affine);
    }
    if let Some(out) = &args.out {
        write_json(out, &rows)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let ctx = Ctx {
        seed: cli.seed,
        alphabet: cli.alphabet,
        infer: cli.infer_alphabet,
    };
    match &cli.command {
        Command::Dist(a) => cmd_dist(&ctx, a),
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Consensus(a) => cmd_consensus(&ctx, a),
        Command::Cluster(a) => cmd_cluster(&ctx, a),
        Command::Table1(a) => cmd_table1(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
