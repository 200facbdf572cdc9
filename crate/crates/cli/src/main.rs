//! `seqeval` command-line driver.
//!
//! Exit codes: 0 on success, 1 when a metric cell failed (unless
//! `--allow-errors`), 2 on configuration or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqeval::diagnostics::{knn_feature_alignment, pca_project, spearman_alignment, SpearmanAlignmentParams};
use seqeval::io::config::write_outputs;
use seqeval::io::{load_embeddings, load_properties, parse_records, save_binary, PrepareOptions, RunConfig};
use seqeval::report::{self, ChartKind, ChartSpec, RenderOptions, TableFormat};
use seqeval::{kmer_embed, KmerSpec, ReportTable, SequenceSet};

const CACHE_ENV: &str = "SEQEVAL_CACHE_DIR";

#[derive(Parser)]
#[command(name = "seqeval", version, about = "Evaluate sets of generated biological sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every group against every metric of a run config.
    Evaluate(EvaluateArgs),
    /// Check how well an embedding reflects labels or a property.
    Diagnose(DiagnoseArgs),
    /// Write k-mer frequency embeddings in the binary matrix format.
    Embed(EmbedArgs),
    /// Evaluate an iteration manifest and plot metric trajectories.
    Iterate(IterateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for metric cells (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Report failed cells as warnings and exit 0.
    #[arg(long)]
    allow_errors: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IterateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Directory for the trajectory table and chart.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["k", "spearman"])))]
struct DiagnoseArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Property CSV row-aligned with the embeddings.
    #[arg(long)]
    properties: PathBuf,
    /// Label column for the k-NN feature-alignment score.
    #[arg(long, conflicts_with = "property")]
    labels: Option<String>,
    /// Numeric column for the Spearman alignment score.
    #[arg(long)]
    property: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    spearman: bool,
    /// Also write a PCA scatter, coloured by `--labels` if given.
    #[arg(long)]
    pca: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("vocab_source").required(true).args(["alphabet", "vocab"])))]
struct EmbedArgs {
    #[arg(long)]
    sequences: PathBuf,
    #[arg(long)]
    kmer: usize,
    /// Symbol string, or one of `protein`, `dna`, `rna`.
    #[arg(long)]
    alphabet: Option<String>,
    /// File with one k-mer per line.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn set_jobs(jobs: Option<usize>) -> CliResult {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(Failure::input)?;
    }
    Ok(())
}

fn prepare_options(seed: Option<u64>) -> PrepareOptions {
    PrepareOptions {
        seed,
        cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Warns about every failed cell; fails unless errors are allowed.
fn check_cells(tables: &[(Option<u64>, &ReportTable)], allow_errors: bool) -> CliResult {
    let mut failed = 0;
    for (iteration, table) in tables {
        for (g, row) in table.groups.iter().zip(&table.cells) {
            for (m, cell) in table.metrics.iter().zip(row) {
                if let seqeval::CellResult::Error { message } = cell {
                    failed += 1;
                    let at = iteration.map(|i| format!("iteration {i}, ")).unwrap_or_default();
                    log::warn!("{at}{g} / {}: {message}", m.name);
                    eprintln!("warning: {at}{g} / {}: {message}", m.name);
                }
            }
        }
    }
    if failed > 0 && !allow_errors {
        return Err(Failure {
            code: 1,
            message: format!("{failed} metric cell(s) failed"),
        });
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    set_jobs(args.run.jobs)?;
    let config = RunConfig::from_path(&args.run.config).map_err(Failure::input)?;
    let run = config.prepare(&prepare_options(args.run.seed)).map_err(Failure::input)?;
    let table = run.evaluate().map_err(Failure::input)?;
    create_dir(&args.out_dir)?;
    write_outputs(&table, &run.outputs, &args.out_dir, &RenderOptions::default()).map_err(Failure::input)?;
    print!("{}", report::render_table(&table, TableFormat::Markdown));
    check_cells(&[(None, &table)], args.run.allow_errors)
}

fn iterate(args: IterateArgs) -> CliResult {
    set_jobs(args.run.jobs)?;
    let config = RunConfig::from_path(&args.run.config).map_err(Failure::input)?;
    let run = config
        .prepare_iterations(&prepare_options(args.run.seed))
        .map_err(Failure::input)?;
    let trajectory = run.evaluate().map_err(Failure::input)?;
    create_dir(&args.out)?;
    let opts = RenderOptions::default();
    for (format, name) in [
        (TableFormat::Markdown, "trajectory.md"),
        (TableFormat::Csv, "trajectory.csv"),
        (TableFormat::Json, "trajectory.json"),
    ] {
        write(&args.out.join(name), &report::render_trajectory(&trajectory, format, &opts))?;
    }
    let svg = report::trajectory_chart(&trajectory, &ChartSpec::new(ChartKind::Trajectory)).map_err(Failure::input)?;
    write(&args.out.join("trajectory.svg"), &svg)?;
    for o in &config.outputs {
        if let Some(spec) = &o.chart {
            let svg = report::trajectory_chart(&trajectory, spec).map_err(Failure::input)?;
            write(&args.out.join(&o.path), &svg)?;
        }
    }
    print!("{}", report::render_trajectory(&trajectory, TableFormat::Markdown, &opts));
    let tables: Vec<_> = trajectory
        .iterations
        .iter()
        .zip(&trajectory.tables)
        .map(|(&i, t)| (Some(i), t))
        .collect();
    check_cells(&tables, args.run.allow_errors)
}

fn diagnose(args: DiagnoseArgs) -> CliResult {
    let x = load_embeddings(&args.embeddings, None).map_err(Failure::input)?;
    let props = load_properties(&args.properties, Some(x.rows())).map_err(Failure::input)?;
    let labels = args
        .labels
        .as_deref()
        .map(|c| props.categorical(c))
        .transpose()
        .map_err(Failure::input)?;

    if let Some(k) = args.k {
        let labels = labels
            .as_ref()
            .ok_or_else(|| Failure::input("--k needs a --labels column"))?;
        let fas = knn_feature_alignment(&x, labels, k).map_err(Failure::input)?;
        println!("knn-feature-alignment (k={k}): {fas:.4}");
    }
    if args.spearman {
        let column = args
            .property
            .as_deref()
            .ok_or_else(|| Failure::input("--spearman needs a --property column"))?;
        let rows = props.numeric_rows(&[column.to_string()]).map_err(Failure::input)?;
        let rho = spearman_alignment(&x, &rows, SpearmanAlignmentParams::default()).map_err(Failure::input)?;
        println!("spearman-alignment: {rho:.4}");
    }
    if let Some(path) = &args.pca {
        let projection = pca_project(&x, 2).map_err(Failure::input)?;
        if let Some(w) = &projection.warning {
            eprintln!("warning: {w}");
        }
        let svg = report::pca_scatter(&projection, labels.as_deref(), 480, 480).map_err(Failure::input)?;
        write(path, &svg)?;
    }
    Ok(())
}

fn embed(args: EmbedArgs) -> CliResult {
    let text = fs::read_to_string(&args.sequences)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.sequences.display())))?;
    let records = parse_records(&text).map_err(|e| Failure::input(format!("{}: {e}", args.sequences.display())))?;
    if let Some(r) = records.iter().find(|r| r.sequence.chars().count() < args.kmer) {
        return Err(Failure::input(format!(
            "{}: line {}: sequence of length {} is shorter than k = {}",
            args.sequences.display(),
            r.line,
            r.sequence.chars().count(),
            args.kmer
        )));
    }
    let spec = match (&args.alphabet, &args.vocab) {
        (Some(a), _) => {
            let symbols = match a.as_str() {
                "protein" => seqeval::Alphabet::Protein.symbols().unwrap_or_default(),
                "dna" => seqeval::Alphabet::Dna.symbols().unwrap_or_default(),
                "rna" => seqeval::Alphabet::Rna.symbols().unwrap_or_default(),
                other => other,
            };
            KmerSpec::all_over(args.kmer, symbols)
        }
        (None, Some(path)) => {
            let vocab = fs::read_to_string(path)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            KmerSpec::new(
                args.kmer,
                vocab.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
            )
        }
        (None, None) => unreachable!("clap requires a vocabulary source"),
    }
    .map_err(Failure::input)?;
    let set = SequenceSet::new_allow_empty("input", records.into_iter().map(|r| r.sequence));
    let m = kmer_embed(&set, &spec).map_err(Failure::input)?;
    save_binary(&args.out, &m).map_err(Failure::input)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Embed(a) => embed(a),
        Command::Iterate(a) => iterate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
