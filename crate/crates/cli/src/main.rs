use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hieralign::alignment::{read_pharaoh, write_pharaoh};
use hieralign::corpus::{
    load_joined_corpus, load_parallel_corpus, ParallelText, DEFAULT_SEPARATOR,
};
use hieralign::eval::{self, load_gold, Counts};
use hieralign::model::sweep;
use hieralign::phrase::{PhraseOptions, PhraseTable};
use hieralign::symmetrize::{symmetrize, Heuristic};
use hieralign::{AlignerConfig, Alignment, Corpus, LoadOptions, Model};

const THREADS_ENV: &str = "HIERALIGN_THREADS";

#[derive(Parser)]
#[command(
    name = "hieralign",
    version,
    about = "Hierarchical sub-sentential word aligner"
)]
struct Cli {
    /// Worker threads (default: all cores). HIERALIGN_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train both lexical tables and write a model directory.
    Train {
        #[command(flatten)]
        input: CorpusArgs,
        /// Output model directory.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Align a corpus with a trained model; Pharaoh format to stdout.
    Align {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(short, long)]
        model: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train and align in one go.
    Pipeline {
        #[command(flatten)]
        input: CorpusArgs,
        /// Alignment output file (default: stdout).
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Combine two directional alignments.
    Symmetrize {
        /// Source-to-target links as source-target.
        #[arg(long)]
        fwd: PathBuf,
        /// Target-to-source links, also written source-target.
        #[arg(long)]
        rev: PathBuf,
        #[arg(long, default_value = "gdfa")]
        heuristic: Heuristic,
        /// Corpus used for sentence lengths; without it lengths come from
        /// the largest link index.
        #[command(flatten)]
        input: OptionalCorpusArgs,
    },
    /// Precision, recall and AER against a gold file.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        /// Also print per-line TSV metrics.
        #[arg(long)]
        per_sentence: bool,
    },
    /// Count distinct consistent phrase pairs.
    Extract {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long = "align")]
        alignments: PathBuf,
        #[arg(long, default_value_t = 7)]
        max_len: usize,
        /// Write `src phrase<TAB>tgt phrase` lines here.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        no_unaligned_extension: bool,
        #[arg(long)]
        lowercase: bool,
    },
    /// Grid σ_θ × σ_δ against a gold file and print metrics per cell.
    Sweep {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Comma-separated σ_θ values.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        thetas: Vec<f64>,
        /// Comma-separated σ_δ values.
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9")]
        deltas: Vec<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Source side, one sentence per line.
    #[arg(short, long, requires = "target", conflicts_with = "joined")]
    source: Option<PathBuf>,
    /// Target side, one sentence per line.
    #[arg(short, long, requires = "source")]
    target: Option<PathBuf>,
    /// Single file with `source ||| target` lines.
    #[arg(short, long)]
    joined: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    separator: String,
}

impl CorpusArgs {
    fn load(&self, opts: &LoadOptions) -> Result<ParallelText> {
        let text = match (&self.source, &self.target, &self.joined) {
            (Some(s), Some(t), None) => load_parallel_corpus(s, t, opts)?,
            (None, None, Some(j)) => load_joined_corpus(j, &self.separator, opts)?,
            _ => bail!("give either --source and --target, or --joined"),
        };
        let stats = &text.stats;
        log::info!(
            "read {} lines, kept {} ({} empty, {} too long)",
            stats.lines,
            stats.kept(),
            stats.empty_skipped,
            stats.too_long_skipped
        );
        Ok(text)
    }
}

#[derive(Args)]
struct OptionalCorpusArgs {
    #[arg(short, long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(short, long, requires = "source")]
    target: Option<PathBuf>,
}

/// Hyperparameter flags; unset values keep the default (train) or the
/// model's stored value (align, sweep).
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    em_iters: Option<usize>,
    /// Dirichlet prior for the VB M-step.
    #[arg(long)]
    alpha: Option<f64>,
    /// Plain maximum-likelihood M-step.
    #[arg(long)]
    no_vb: bool,
    #[arg(long)]
    no_null: bool,
    /// Re-estimate tables from gdfa-symmetrized Viterbi links after EM.
    #[arg(long)]
    vbh: bool,
    #[arg(long)]
    sigma_theta: Option<f64>,
    #[arg(long)]
    sigma_delta: Option<f64>,
    #[arg(long)]
    no_distortion: bool,
    #[arg(long)]
    distortion_threshold: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_sentence_len: Option<usize>,
    #[arg(long)]
    lowercase: bool,
}

impl ConfigArgs {
    fn apply(&self, c: &mut AlignerConfig) {
        if let Some(v) = self.em_iters {
            c.em.iterations = v;
        }
        if let Some(v) = self.alpha {
            c.em.alpha = v;
        }
        if self.no_vb {
            c.em.vb = false;
        }
        if self.no_null {
            c.em.use_null = false;
        }
        if self.vbh {
            c.vbh = true;
        }
        if let Some(v) = self.sigma_theta {
            c.matrix.sigma_theta = v;
        }
        if let Some(v) = self.sigma_delta {
            c.matrix.sigma_delta = v;
        }
        if self.no_distortion {
            c.matrix.distortion_enabled = false;
        }
        if let Some(v) = self.distortion_threshold {
            c.matrix.threshold = v;
        }
        if let Some(v) = self.p0 {
            c.matrix.p0 = v;
        }
        if let Some(v) = self.beam {
            c.beam = v;
        }
        if let Some(v) = self.max_sentence_len {
            c.max_sentence_len = v;
        }
        if self.lowercase {
            c.lowercase = true;
        }
    }

    fn touches_training(&self) -> bool {
        self.em_iters.is_some() || self.alpha.is_some() || self.no_vb || self.no_null || self.vbh
    }
}

#[derive(Args)]
struct RunArgs {
    /// Report wall-clock time and throughput on stderr.
    #[arg(long)]
    stats: bool,
    /// Write each aligned pair's weight matrix as TSV, blank-line separated.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?,
        ),
        _ => flag,
    };
    if threads == Some(0) {
        bail!("thread count must be >= 1");
    }
    Ok(threads)
}

fn run(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| dispatch(cli.command, threads))
}

fn dispatch(command: Command, threads: Option<usize>) -> Result<()> {
    match command {
        Command::Train { input, out, config } => {
            let config = new_config(&config, threads)?;
            let text = input.load(&config.load_options())?;
            let model = train(&text, &config)?;
            model.save(&out)?;
            log::info!("model written to {}", out.display());
            Ok(())
        }
        Command::Align {
            input,
            model,
            config,
            run,
        } => {
            let mut model = Model::load(&model)
                .with_context(|| format!("loading model {}", model.display()))?;
            if config.touches_training() {
                log::warn!("training flags have no effect on align");
            }
            config.apply(&mut model.config);
            model.config.validate()?;
            let text = input.load(&model.config.load_options())?;
            align_to(&model, &text, &run, &mut stdout())
        }
        Command::Pipeline {
            input,
            out,
            config,
            run,
        } => {
            let config = new_config(&config, threads)?;
            let text = input.load(&config.load_options())?;
            let trained = train(&text, &config)?;
            let dir = tempfile::tempdir().context("creating temporary model directory")?;
            trained.save(dir.path())?;
            let model = Model::load(dir.path())?;
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    align_to(&model, &text, &run, &mut w)?;
                    w.flush()
                        .with_context(|| format!("writing {}", path.display()))
                }
                None => align_to(&model, &text, &run, &mut stdout()),
            }
        }
        Command::Symmetrize {
            fwd,
            rev,
            heuristic,
            input,
        } => symmetrize_files(&fwd, &rev, heuristic, &input),
        Command::Eval {
            gold,
            hyp,
            per_sentence,
        } => {
            let gold = load_gold(&gold)?;
            let hyp = read_alignments(&hyp)?;
            let counts = eval::per_sentence(&hyp, &gold)?;
            let mut w = stdout();
            writeln!(w, "{}", counts.iter().copied().sum::<Counts>().metrics())?;
            if per_sentence {
                writeln!(w, "line\tprecision\trecall\taer")?;
                for (k, c) in counts.iter().enumerate() {
                    let m = c.metrics();
                    let aer = m
                        .aer
                        .map_or_else(|| "undefined".to_string(), |a| format!("{a:.4}"));
                    writeln!(w, "{}\t{:.4}\t{:.4}\t{aer}", k + 1, m.precision, m.recall)?;
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::Extract {
            input,
            alignments,
            max_len,
            dump,
            no_unaligned_extension,
            lowercase,
        } => {
            if max_len == 0 {
                bail!("--max-len must be >= 1");
            }
            let opts = PhraseOptions {
                max_len,
                unaligned_extension: !no_unaligned_extension,
            };
            extract(&input, &alignments, lowercase, &opts, dump.as_deref())
        }
        Command::Sweep {
            input,
            model,
            gold,
            thetas,
            deltas,
            config,
        } => {
            let mut model = Model::load(&model)
                .with_context(|| format!("loading model {}", model.display()))?;
            config.apply(&mut model.config);
            model.config.validate()?;
            let text = input.load(&model.config.load_options())?;
            let corpus = model.encode(&text);
            let gold = load_gold(&gold)?;
            let cells = sweep(&model, &corpus, &gold, &thetas, &deltas)?;
            let mut w = stdout();
            writeln!(w, "sigma_theta\tsigma_delta\tprecision\trecall\taer")?;
            for cell in cells {
                let m = cell.metrics;
                let aer = m
                    .aer
                    .map_or_else(|| "undefined".to_string(), |a| format!("{a:.4}"));
                writeln!(
                    w,
                    "{}\t{}\t{:.4}\t{:.4}\t{aer}",
                    cell.sigma_theta, cell.sigma_delta, m.precision, m.recall
                )?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn new_config(args: &ConfigArgs, threads: Option<usize>) -> Result<AlignerConfig> {
    let mut config = AlignerConfig {
        threads,
        ..AlignerConfig::default()
    };
    args.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn train(text: &ParallelText, config: &AlignerConfig) -> Result<Model> {
    if text.pairs.is_empty() {
        bail!("no usable sentence pairs in the input");
    }
    let started = Instant::now();
    let model = Model::train(text, config)?;
    log::info!(
        "trained on {} pairs in {:.2}s",
        text.pairs.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(model)
}

fn stdout() -> BufWriter<io::StdoutLock<'static>> {
    BufWriter::new(io::stdout().lock())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn align_to<W: Write>(model: &Model, text: &ParallelText, run: &RunArgs, w: &mut W) -> Result<()> {
    let started = Instant::now();
    let corpus: Corpus = model.encode(text);
    let aligned = model.align(&corpus)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_pharaoh(&mut *w, aligned.iter().map(Option::as_ref))?;
    w.flush()?;
    if let Some(path) = &run.dump_matrix {
        let mut d = create(path)?;
        for pair in &corpus.pairs {
            model.soft_matrix(pair, &model.config.matrix).dump(&mut d)?;
            writeln!(d)?;
        }
        d.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if run.stats {
        let pairs = corpus.pairs.len();
        let rate = if elapsed > 0.0 {
            pairs as f64 / elapsed
        } else {
            f64::INFINITY
        };
        eprintln!("aligned {pairs} pairs in {elapsed:.3}s ({rate:.1} pairs/s)");
    }
    Ok(())
}

fn read_alignments(path: &Path) -> Result<Vec<Alignment>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_pharaoh(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn sentence_lengths(input: &OptionalCorpusArgs) -> Result<Option<Vec<(usize, usize)>>> {
    let (Some(s), Some(t)) = (&input.source, &input.target) else {
        return Ok(None);
    };
    let count = |p: &Path| -> Result<Vec<usize>> {
        let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        BufReader::new(file)
            .lines()
            .map(|l| Ok(l?.split_whitespace().count()))
            .collect()
    };
    let (src, tgt) = (count(s)?, count(t)?);
    if src.len() != tgt.len() {
        bail!("source has {} lines, target has {}", src.len(), tgt.len());
    }
    Ok(Some(src.into_iter().zip(tgt).collect()))
}

fn symmetrize_files(
    fwd: &Path,
    rev: &Path,
    heuristic: Heuristic,
    input: &OptionalCorpusArgs,
) -> Result<()> {
    let fwd = read_alignments(fwd)?;
    let rev = read_alignments(rev)?;
    if fwd.len() != rev.len() {
        bail!("--fwd has {} lines, --rev has {}", fwd.len(), rev.len());
    }
    let lengths = sentence_lengths(input)?;
    if let Some(l) = &lengths {
        if l.len() != fwd.len() {
            bail!(
                "corpus has {} lines, alignments have {}",
                l.len(),
                fwd.len()
            );
        }
    }
    let mut out = Vec::with_capacity(fwd.len());
    for (k, (f, r)) in fwd.iter().zip(&rev).enumerate() {
        let (n, m) = match lengths.as_ref().map(|l| l[k]) {
            Some(nm) => nm,
            None => f.iter().chain(r.iter()).fold((0, 0), |(n, m), l| {
                (n.max(l.source + 1), m.max(l.target + 1))
            }),
        };
        if !f.within(n, m) || !r.within(n, m) {
            bail!("line {}: link outside a {n}x{m} sentence pair", k + 1);
        }
        out.push(symmetrize(f, r, n, m, heuristic));
    }
    let mut w = stdout();
    write_pharaoh(&mut w, out.iter().map(Some))?;
    w.flush()?;
    Ok(())
}

fn extract(
    input: &CorpusArgs,
    alignments: &Path,
    lowercase: bool,
    opts: &PhraseOptions,
    dump: Option<&Path>,
) -> Result<()> {
    let load = LoadOptions {
        lowercase,
        max_len: usize::MAX,
    };
    let text = input.load(&load)?;
    let links = read_alignments(alignments)?;
    if links.len() != text.stats.lines {
        bail!(
            "alignment file has {} lines, corpus has {}",
            links.len(),
            text.stats.lines
        );
    }
    let mut table = PhraseTable::new();
    for pair in &text.pairs {
        let a = &links[pair.index];
        if !a.within(pair.source.len(), pair.target.len()) {
            bail!(
                "line {}: alignment exceeds sentence lengths",
                pair.index + 1
            );
        }
        table.add_sentence(&pair.source, &pair.target, a, opts);
    }
    if let Some(path) = dump {
        let mut entries: Vec<_> = table.entries().collect();
        entries.sort();
        let mut d = create(path)?;
        for (s, t) in entries {
            writeln!(d, "{}\t{}", s.join(" "), t.join(" "))?;
        }
        d.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut w = stdout();
    writeln!(w, "entries={}", table.len())?;
    w.flush()?;
    Ok(())
}
