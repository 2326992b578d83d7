use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use flipcert::bits::StructureVector;
use flipcert::classifiers::{ClassifierContext, ClassifierSpec};
use flipcert::error::{Error, Result};
use flipcert::harness::{
    certified_accuracy_curve, curve_csv, exit_code, read_records, run_certify_command, run_verify, CertRecord,
    CertifyConfig, Task,
};
use flipcert::protocol;
use flipcert::region::{prob_x_region, prob_y_region, BackendChoice, Probability};
use flipcert::NoiseSpec;

#[derive(Parser)]
#[command(name = "flipcert", version, about = "Certified robustness under bit-flip randomized smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify nodes of a graph (or whole graphs) and write records plus the accuracy curve.
    Certify(CertifyArgs),
    /// Check closed-form region probabilities against exhaustive enumeration.
    Verify {
        #[arg(long, default_value_t = 10)]
        max_n: usize,
        /// Comma-separated β values.
        #[arg(long, default_value = "0.6,0.7,0.8")]
        grid: String,
    },
    /// Rebuild the accuracy curve from a records file.
    Curve {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_size: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Pr(X ∈ R(m)) and Pr(Y ∈ R(m)) for every m.
    RegionProbs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "0.7")]
        beta: String,
        #[arg(long, default_value = "exact")]
        backend: String,
    },
    /// Serve a built-in classifier over the line protocol on stdin/stdout.
    #[command(hide = true)]
    Serve {
        classifier: String,
        /// Exit abruptly after answering this many requests.
        #[arg(long)]
        exit_after: Option<u64>,
    },
}

#[derive(clap::Args)]
struct CertifyArgs {
    #[arg(long, default_value = "0.7")]
    beta: String,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "auto")]
    backend: String,
    /// Built-in classifier name or `proto:<command>`.
    #[arg(long)]
    classifier: String,
    #[arg(long, default_value = "node")]
    task: String,
    /// Edge-list file; repeat for the graph task.
    #[arg(long, required = true)]
    graph: Vec<PathBuf>,
    /// `id label` file with true labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// File of item ids to certify (default: all).
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = flipcert::smoothing::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 20)]
    max_size: usize,
    /// Seconds to wait for an external classifier's reply.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

fn certify(args: CertifyArgs) -> Result<()> {
    let mut config = CertifyConfig::new(args.classifier.parse()?, args.graph, args.out);
    config.beta = args.beta.parse()?;
    config.alpha = args.alpha;
    config.samples = args.samples;
    config.seed = args.seed;
    config.backend = args.backend.parse()?;
    config.task = args.task.parse::<Task>()?;
    config.labels = args.labels;
    config.nodes = args.nodes;
    config.batch_size = args.batch_size;
    config.max_size = args.max_size;
    config.timeout = Duration::from_secs(args.timeout);
    let out = run_certify_command(&config)?;
    let certified = out.records.iter().filter(|r| matches!(r, CertRecord::Certificate { .. })).count();
    eprintln!(
        "certified {certified} of {} items; records in {}",
        out.records.len(),
        config.out.display()
    );
    Ok(())
}

fn verify(max_n: usize, grid: &str) -> Result<bool> {
    let grid = grid.split(',').map(|b| b.trim().parse()).collect::<Result<Vec<NoiseSpec>>>()?;
    let report = run_verify(max_n, &grid)?;
    for m in &report.mismatches {
        println!("FAIL {m}");
    }
    println!(
        "{} cases, {} mismatches (n <= {max_n}, beta in {})",
        report.cases,
        report.mismatches.len(),
        grid.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    );
    Ok(report.passed())
}

fn curve(records: PathBuf, max_size: usize, out: Option<PathBuf>) -> Result<()> {
    let evals: Vec<_> = read_records(&records)?.iter().map(CertRecord::evaluation).collect();
    let sizes: Vec<usize> = (0..=max_size).collect();
    let csv = curve_csv(&certified_accuracy_curve(&evals, &sizes)?);
    match out {
        Some(p) => std::fs::write(p, csv)?,
        None => io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn fmt_prob(p: &Probability) -> String {
    match p {
        Probability::Exact(r) => r.to_string(),
        Probability::Bounded(iv) => format!("[{:e}, {:e}]", iv.lo, iv.hi),
    }
}

fn region_probs(n: usize, k: usize, beta: &str, backend: &str) -> Result<()> {
    let beta: NoiseSpec = beta.parse()?;
    let backend = backend.parse::<BackendChoice>()?.resolve(n);
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "m\tpr_x\tpr_y")?;
    for m in -(n as i64)..=(n as i64) {
        let x = prob_x_region(n, k, &beta, m, backend)?;
        let y = prob_y_region(n, k, &beta, m, backend)?;
        writeln!(stdout, "{m}\t{}\t{}", fmt_prob(&x), fmt_prob(&y))?;
    }
    Ok(())
}

fn serve(name: &str, exit_after: Option<u64>) -> Result<()> {
    let spec: ClassifierSpec = name.parse()?;
    if matches!(spec, ClassifierSpec::Protocol(_) | ClassifierSpec::MajorityNeighbor) {
        return Err(Error::UnknownClassifier(format!("{name} cannot be served")));
    }
    let mut answered = 0u64;
    protocol::serve(io::stdin().lock(), io::stdout().lock(), |v, labels| {
        if exit_after.is_some_and(|limit| answered >= limit) {
            std::process::exit(0);
        }
        answered += 1;
        let ctx = ClassifierContext { n: v.len(), num_labels: labels, node: None, labels: None, timeout: Duration::ZERO };
        spec.build(&ctx)
            .and_then(|f| f.classify(&[StructureVector::new(v.clone())]))
            .map(|l| l[0].0)
            .unwrap_or(u32::MAX)
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(args) => certify(args).map(|_| true),
        Command::Verify { max_n, grid } => verify(max_n, &grid),
        Command::Curve { records, max_size, out } => curve(records, max_size, out).map(|_| true),
        Command::RegionProbs { n, k, beta, backend } => region_probs(n, k, &beta, &backend).map(|_| true),
        Command::Serve { classifier, exit_after } => serve(&classifier, exit_after).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e).clamp(1, 255) as u8)
        }
    }
}
