use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pclda::chain::SamplerKind;
use pclda::corpus::{read_uci_files, Corpus};
use pclda::diagnostics::{
    cost_model, enumerate_posterior, inefficiency_experiment, write_inefficiency_csv, InefficiencyConfig,
};
use pclda::experiment::{prune, run_experiment, ExperimentConfig};
use pclda::pclda::DocProposal;
use pclda::{Error, HyperParams, Result};

#[derive(Parser)]
#[command(name = "pclda", version, about = "Parallel partially collapsed Gibbs sampling for LDA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampler and write its trace.
    Run(RunArgs),
    /// Prune a corpus and write it back in UCI bag-of-words format.
    Prune(PruneArgs),
    /// Exact posterior over all topic assignments of a tiny corpus.
    Enumerate(EnumerateArgs),
    /// Inefficiency factors of the collapsed and partially collapsed samplers.
    Inefficiency(InefficiencyArgs),
    /// Predicted z-phase and Φ-phase costs.
    CostModel(CostModelArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// UCI docword file (optionally gzipped).
    #[arg(long)]
    docword: PathBuf,
    /// UCI vocabulary file.
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Args)]
struct PruneMode {
    /// Drop word types occurring fewer than this many times.
    #[arg(long, conflicts_with = "tfidf_v_max")]
    min_count: Option<u64>,
    /// Keep the this many word types with the highest TF-IDF.
    #[arg(long)]
    tfidf_v_max: Option<usize>,
}

impl PruneMode {
    fn resolve(&self) -> (Option<u64>, Option<usize>) {
        match (self.min_count, self.tfidf_v_max) {
            (None, None) => (Some(1), None),
            other => other,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    prune: PruneMode,
    #[arg(long, default_value = "pclda")]
    sampler: SamplerKind,
    #[arg(long, short = 'k', default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Inclusion prior of the variable-selection sampler.
    #[arg(long)]
    vs_pi: Option<f64>,
    /// Document proposal of the light sampler: full, exclude-current or full-printed-ratio.
    #[arg(long, default_value = "full", value_parser = parse_doc_proposal)]
    doc_proposal: DocProposal,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    snapshot_every: u64,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    prune: PruneMode,
    #[arg(long)]
    out_docword: PathBuf,
    #[arg(long)]
    out_vocab: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, short = 'k')]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InefficiencyArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    prune: PruneMode,
    #[arg(long, short = 'k', default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 1000)]
    top_words: usize,
    #[arg(long, default_value_t = 1000)]
    random_docs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CostModelArgs {
    /// Corpus size in tokens.
    #[arg(long)]
    n: f64,
    /// Heaps' law coefficient.
    #[arg(long)]
    xi: f64,
    /// Heaps' law exponent.
    #[arg(long)]
    heaps_exp: f64,
    /// Dirichlet-process precision for the topic-count growth.
    #[arg(long)]
    gamma_dp: f64,
    /// Measured sum of K_d over tokens (defaults to N).
    #[arg(long)]
    sum_kd: Option<f64>,
}

fn parse_doc_proposal(s: &str) -> std::result::Result<DocProposal, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown document proposal {s:?}; expected full, exclude-current or full-printed-ratio")
    })
}

fn load(args: &CorpusArgs) -> Result<Corpus> {
    read_uci_files(&args.docword, &args.vocab)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<()> {
    let (min_count, tfidf_v_max) = args.prune.resolve();
    let cfg = ExperimentConfig {
        docword: args.corpus.docword,
        vocab: args.corpus.vocab,
        sampler: args.sampler,
        k: args.k,
        alpha: args.alpha,
        beta: args.beta,
        iterations: args.iterations,
        burn_in: args.burn_in,
        seed: args.seed,
        workers: args.workers,
        min_count,
        tfidf_v_max,
        vs_pi: args.vs_pi,
        doc_proposal: args.doc_proposal,
        trace: args.trace,
        snapshot_dir: args.snapshot_dir,
        snapshot_every: args.snapshot_every,
    };
    let out = run_experiment(&cfg)?;
    let last = out.trace.last().expect("trace has the initialization row");
    let stats = out.corpus.stats();
    println!(
        "sampler={} D={} V={} N={} iterations={} log_likelihood={:.4}",
        cfg.sampler, stats.d, stats.v, stats.n, last.iteration, last.log_likelihood
    );
    Ok(())
}

fn prune_cmd(args: PruneArgs) -> Result<()> {
    let (min_count, tfidf_v_max) = args.prune.resolve();
    let cfg = ExperimentConfig {
        min_count,
        tfidf_v_max,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    let raw = load(&args.corpus)?;
    let c = prune(&cfg, &raw)?;
    let mut dw = create(&args.out_docword)?;
    let mut vo = create(&args.out_vocab)?;
    c.write_uci(&mut dw, &mut vo)?;
    dw.flush()?;
    vo.flush()?;
    let (s, r) = (c.stats(), c.report());
    println!(
        "D={} V={} N={} dropped_types={} dropped_docs={}",
        s.d, s.v, s.n, r.dropped_types, r.dropped_docs
    );
    Ok(())
}

fn enumerate(args: EnumerateArgs) -> Result<()> {
    let h = HyperParams::new(args.alpha, args.beta, args.k)?;
    let c = load(&args.corpus)?;
    let post = enumerate_posterior(&c, &h)?;
    let mut out = output(&args.out)?;
    writeln!(out, "index,z,probability")?;
    for (idx, p) in post.probs().iter().enumerate() {
        let z: Vec<String> = post.decode(idx).iter().map(u32::to_string).collect();
        writeln!(out, "{idx},{},{p:e}", z.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn inefficiency(args: InefficiencyArgs) -> Result<()> {
    let h = HyperParams::new(args.alpha, args.beta, args.k)?;
    let (min_count, tfidf_v_max) = args.prune.resolve();
    let pcfg = ExperimentConfig {
        min_count,
        tfidf_v_max,
        ..ExperimentConfig::default()
    };
    pcfg.validate()?;
    let c = prune(&pcfg, &load(&args.corpus)?)?;
    let cfg = InefficiencyConfig {
        burn_in: args.burn_in,
        n_draws: args.draws,
        n_top_words: args.top_words,
        n_random_docs: args.random_docs,
        sweeps_between_draws: 1,
        seed: args.seed,
        workers: args.workers,
    };
    if cfg.workers == 0 {
        return Err(Error::Config {
            field: "workers",
            msg: "must be at least 1".into(),
        });
    }
    let report = inefficiency_experiment(&c, &h, &cfg)?;
    write_inefficiency_csv(&report, output(&args.out)?)
}

fn cost(args: CostModelArgs) -> Result<()> {
    let m = cost_model(args.n, args.xi, args.heaps_exp, args.gamma_dp, args.sum_kd.unwrap_or(args.n))?;
    println!("{}", serde_json::to_string(&m)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Prune(a) => prune_cmd(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Inefficiency(a) => inefficiency(a),
        Command::CostModel(a) => cost(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
