//! Batch certification over graph items and the certified-accuracy curve.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{Label, NoiseSpec, StructureVector};
use crate::classifiers::{ClassifierContext, ClassifierSpec};
use crate::error::{Error, Result};
use crate::graph::{load_graph, load_ids, load_labels, structure_vector_for_graph, structure_vector_for_node, Graph};
use crate::oracle::enumerate_region_probs;
use crate::region::{
    density_ratio, prob_x_region, prob_y_region, BackendChoice, NumericBackend, Probability,
};
use crate::smoothing::{certify_example, BaseClassifier, SmoothingConfig, Verdict, DEFAULT_BATCH_SIZE};

pub const RECORDS_FILE: &str = "certificates.jsonl";
pub const CURVE_FILE: &str = "curve.csv";
pub const CURVE_HEADER: &str = "size,certified_accuracy";

/// Exit status for unreadable or invalid inputs and configuration.
pub const EXIT_PARSE: i32 = 2;
/// Exit status for failures while certifying.
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::InvalidBits(_)
        | Error::InvalidNoise(_)
        | Error::InvalidProbability(_)
        | Error::OutOfRange(_)
        | Error::UnknownClassifier(_)
        | Error::EmptyLabelSet
        | Error::TooLarge { .. } => EXIT_PARSE,
        _ => EXIT_RUNTIME,
    }
}

/// One line of the certificate records file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CertRecord {
    Certificate {
        id: usize,
        true_label: Option<u32>,
        label: u32,
        correct: bool,
        k: usize,
        n: usize,
        beta: String,
        alpha: f64,
        samples: u64,
        seed: u64,
        backend: NumericBackend,
        pa_lower: f64,
        pb_upper: f64,
        monotone: bool,
        tie: bool,
        counts: Vec<u64>,
    },
    Abstain {
        id: usize,
        true_label: Option<u32>,
        prediction: u32,
        n: usize,
        beta: String,
        alpha: f64,
        samples: u64,
        seed: u64,
        pa_lower: f64,
        pb_upper: f64,
        tie: bool,
        counts: Vec<u64>,
    },
}

impl CertRecord {
    pub fn id(&self) -> usize {
        match self {
            CertRecord::Certificate { id, .. } | CertRecord::Abstain { id, .. } => *id,
        }
    }

    pub fn evaluation(&self) -> EvaluationRecord {
        match self {
            CertRecord::Certificate { id, true_label, label, k, .. } => EvaluationRecord {
                id: *id,
                true_label: true_label.map(Label),
                predicted: Some(Label(*label)),
                k_certified: Some(*k),
            },
            CertRecord::Abstain { id, true_label, .. } => EvaluationRecord {
                id: *id,
                true_label: true_label.map(Label),
                predicted: None,
                k_certified: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationRecord {
    pub id: usize,
    pub true_label: Option<Label>,
    /// Certified label, `None` on abstention.
    pub predicted: Option<Label>,
    pub k_certified: Option<usize>,
}

impl EvaluationRecord {
    pub fn correct(&self) -> bool {
        matches!((self.predicted, self.true_label), (Some(p), Some(t)) if p == t)
    }
}

/// Fraction of records that are correct with `K ≥ k`, for each `k`.
pub fn certified_accuracy_curve(records: &[EvaluationRecord], sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    if records.is_empty() {
        return Err(Error::OutOfRange("no evaluation records".into()));
    }
    let total = records.len() as f64;
    Ok(sizes
        .iter()
        .map(|&k| {
            let hits = records
                .iter()
                .filter(|r| r.correct() && r.k_certified.is_some_and(|kc| kc >= k))
                .count();
            (k, hits as f64 / total)
        })
        .collect())
}

pub fn curve_csv(rows: &[(usize, f64)]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for (k, acc) in rows {
        out.push_str(&format!("{k},{acc}\n"));
    }
    out
}

pub fn read_records(path: &Path) -> Result<Vec<CertRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Node,
    Graph,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Task::Node),
            "graph" => Ok(Task::Graph),
            other => Err(Error::OutOfRange(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub beta: NoiseSpec,
    pub alpha: f64,
    pub samples: u64,
    pub seed: u64,
    pub backend: BackendChoice,
    pub classifier: ClassifierSpec,
    pub task: Task,
    pub graphs: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub out: PathBuf,
    pub batch_size: usize,
    /// Curve rows cover sizes `0..=max_size`.
    pub max_size: usize,
    pub timeout: Duration,
}

impl CertifyConfig {
    pub fn new(classifier: ClassifierSpec, graphs: Vec<PathBuf>, out: PathBuf) -> Self {
        Self {
            beta: NoiseSpec::new(7, 10).expect("valid default"),
            alpha: 0.001,
            samples: 10_000,
            seed: 0,
            backend: BackendChoice::Auto,
            classifier,
            task: Task::Node,
            graphs,
            labels: None,
            nodes: None,
            out,
            batch_size: DEFAULT_BATCH_SIZE,
            max_size: 20,
            timeout: crate::protocol::DEFAULT_TIMEOUT,
        }
    }
}

/// Seed for item `id`, decorrelated from neighbouring ids.
pub fn item_seed(seed: u64, id: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - id as u64);
    rng.next_u64()
}

struct Item {
    id: usize,
    s: StructureVector,
    true_label: Option<Label>,
}

fn label_count(labels: &[Option<Label>]) -> usize {
    labels.iter().flatten().map(|l| l.index() + 1).max().unwrap_or(0)
}

pub struct CertifyOutput {
    pub records: Vec<CertRecord>,
    pub curve: Vec<(usize, f64)>,
}

/// Certifies every selected item and writes `certificates.jsonl` and
/// `curve.csv` into `config.out`.
pub fn run_certify_command(config: &CertifyConfig) -> Result<CertifyOutput> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidProbability(config.alpha));
    }
    if config.samples == 0 {
        return Err(Error::OutOfRange("--samples must be at least 1".into()));
    }
    if config.graphs.is_empty() {
        return Err(Error::OutOfRange("at least one --graph is required".into()));
    }
    let smoothing = SmoothingConfig { batch_size: config.batch_size.max(1), ..SmoothingConfig::new(config.beta, config.samples, config.seed) };

    let (items, labels, node_task_n) = match config.task {
        Task::Node => {
            if config.graphs.len() != 1 {
                return Err(Error::OutOfRange("the node task takes exactly one --graph".into()));
            }
            let g = load_graph(&config.graphs[0])?;
            if g.num_nodes() < 2 {
                return Err(Error::OutOfRange("the node task needs at least two nodes".into()));
            }
            let labels = match &config.labels {
                Some(p) => Some(load_labels(p, g.num_nodes())?),
                None => None,
            };
            let ids = select_ids(config, g.num_nodes())?;
            let items = ids
                .into_iter()
                .map(|u| {
                    Ok(Item {
                        id: u,
                        s: structure_vector_for_node(&g, u)?,
                        true_label: labels.as_ref().and_then(|l| l[u]),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (items, labels, Some(g.num_nodes() - 1))
        }
        Task::Graph => {
            let graphs = config.graphs.iter().map(load_graph).collect::<Result<Vec<Graph>>>()?;
            let labels = match &config.labels {
                Some(p) => Some(load_labels(p, graphs.len())?),
                None => None,
            };
            let ids = select_ids(config, graphs.len())?;
            let items = ids
                .into_iter()
                .map(|i| Item {
                    id: i,
                    s: structure_vector_for_graph(&graphs[i]),
                    true_label: labels.as_ref().and_then(|l| l[i]),
                })
                .collect();
            (items, labels, None)
        }
    };

    let num_labels = labels.as_deref().map(label_count).unwrap_or(0).max(2);
    let context = |n: usize, node: Option<usize>| ClassifierContext {
        n,
        num_labels,
        node,
        labels: labels.as_deref(),
        timeout: config.timeout,
    };
    let shared: Option<Box<dyn BaseClassifier>> = match (node_task_n, config.classifier.per_item()) {
        (Some(n), false) => Some(config.classifier.build(&context(n, None))?),
        _ => None,
    };

    let certify_item = |item: &Item| -> Result<CertRecord> {
        let owned;
        let base: &dyn BaseClassifier = match &shared {
            Some(b) => b.as_ref(),
            None => {
                let node = (config.task == Task::Node).then_some(item.id);
                owned = config.classifier.build(&context(item.s.dim(), node))?;
                owned.as_ref()
            }
        };
        let item_config = SmoothingConfig { seed: item_seed(config.seed, item.id), ..smoothing };
        let report = certify_example(base, &item.s, &item_config, config.alpha, config.backend)?;
        let counts = report.run.counts.as_slice().to_vec();
        let true_label = item.true_label.map(|l| l.0);
        Ok(match report.verdict {
            Verdict::Certified(c) => CertRecord::Certificate {
                id: item.id,
                true_label,
                label: c.label.0,
                correct: item.true_label == Some(c.label),
                k: c.k_certified,
                n: c.n,
                beta: c.beta.to_string(),
                alpha: c.alpha,
                samples: c.samples,
                seed: c.seed,
                backend: c.backend,
                pa_lower: c.pa_lower,
                pb_upper: c.pb_upper,
                monotone: c.monotone,
                tie: c.tie,
                counts,
            },
            Verdict::Abstain => CertRecord::Abstain {
                id: item.id,
                true_label,
                prediction: report.run.prediction.0,
                n: item.s.dim(),
                beta: config.beta.to_string(),
                alpha: config.alpha,
                samples: config.samples,
                seed: item_config.seed,
                pa_lower: report.bounds.pa_lower,
                pb_upper: report.bounds.pb_upper,
                tie: report.bounds.tie,
                counts,
            },
        })
    };

    let mut records = items.par_iter().map(certify_item).collect::<Result<Vec<_>>>()?;
    records.sort_by_key(CertRecord::id);
    drop(shared);

    let evals: Vec<EvaluationRecord> = records.iter().map(CertRecord::evaluation).collect();
    let sizes: Vec<usize> = (0..=config.max_size).collect();
    let curve = certified_accuracy_curve(&evals, &sizes)?;

    fs::create_dir_all(&config.out)?;
    let mut f = fs::File::create(config.out.join(RECORDS_FILE))?;
    for r in &records {
        writeln!(f, "{}", serde_json::to_string(r).map_err(|e| Error::Internal(e.to_string()))?)?;
    }
    fs::write(config.out.join(CURVE_FILE), curve_csv(&curve))?;
    Ok(CertifyOutput { records, curve })
}

fn select_ids(config: &CertifyConfig, count: usize) -> Result<Vec<usize>> {
    let Some(path) = &config.nodes else {
        return Ok((0..count).collect());
    };
    let mut ids = load_ids(path)?;
    if let Some(bad) = ids.iter().find(|&&i| i >= count) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("id {bad} out of range for {count} items"),
        });
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Summary of one `verify` run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub cases: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks closed-form region probabilities against enumeration for every
/// `n ≤ max_n`, `k ≤ n` and `β` in `grid`, plus normalization, the ratio
/// identity, and that the float backend brackets the exact values.
pub fn run_verify(max_n: usize, grid: &[NoiseSpec]) -> Result<VerifyReport> {
    let cases: Vec<(usize, usize, NoiseSpec)> = grid
        .iter()
        .flat_map(|b| (1..=max_n).flat_map(move |n| (0..=n).map(move |k| (n, k, *b))))
        .collect();
    let results = cases
        .par_iter()
        .map(|&(n, k, b)| verify_case(n, k, &b))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { cases: cases.len(), mismatches: results.into_iter().flatten().collect() })
}

/// Problems found for one `(n, k, β)`; empty when everything agrees.
pub fn verify_case(n: usize, k: usize, beta: &NoiseSpec) -> Result<Vec<String>> {
    let table = enumerate_region_probs(n, k, beta)?;
    let mut bad = Vec::new();
    let (mut sum_x, mut sum_y) = (BigRational::zero(), BigRational::zero());
    let zero = (BigRational::zero(), BigRational::zero());
    for m in -(n as i64)..=(n as i64) {
        let (ex, ey) = table.get(&m).unwrap_or(&zero);
        let tag = format!("n={n} k={k} beta={beta} m={m}");
        let px = prob_x_region(n, k, beta, m, NumericBackend::ExactRational)?;
        let py = prob_y_region(n, k, beta, m, NumericBackend::ExactRational)?;
        let (Probability::Exact(px), Probability::Exact(py)) = (px, py) else {
            return Err(Error::Internal("exact backend returned an interval".into()));
        };
        if px != *ex || py != *ey {
            bad.push(format!("{tag}: closed form differs from enumeration"));
        }
        if px != &density_ratio(beta, m) * &py {
            bad.push(format!("{tag}: ratio identity fails"));
        }
        for (exact, fl) in [
            (&px, prob_x_region(n, k, beta, m, NumericBackend::ConservativeFloat)?),
            (&py, prob_y_region(n, k, beta, m, NumericBackend::ConservativeFloat)?),
        ] {
            let Probability::Bounded(iv) = fl else {
                return Err(Error::Internal("float backend returned an exact value".into()));
            };
            let lo = crate::region::f64_to_rational(iv.lo);
            let hi = crate::region::f64_to_rational(iv.hi);
            if !(lo <= *exact && *exact <= hi) {
                bad.push(format!("{tag}: float interval [{}, {}] misses exact value", iv.lo, iv.hi));
            }
        }
        sum_x += px;
        sum_y += py;
    }
    if !sum_x.is_one() || !sum_y.is_one() {
        bad.push(format!("n={n} k={k} beta={beta}: masses do not sum to 1"));
    }
    Ok(bad)
}
