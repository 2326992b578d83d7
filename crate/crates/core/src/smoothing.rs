//! Monte-Carlo smoothing: run a base classifier on noisy copies of `s`,
//! count the labels, and turn the counts into a certificate.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{sample_noise, noise_stream, xor_apply, Label, NoiseSpec, StructureVector};
use crate::certifier::{certified_perturbation_size, Certificate, Certification};
use crate::confidence::{simultaneous_bounds, ConfidenceBounds, LabelCounts};
use crate::error::{Error, Result};
use crate::region::BackendChoice;

pub const DEFAULT_BATCH_SIZE: usize = 128;

/// A deterministic classifier over binary vectors.
///
/// Implementations must return the same label for the same input for the
/// lifetime of a session; randomness is supplied solely by the noise.
pub trait BaseClassifier: Send + Sync {
    fn num_labels(&self) -> usize;

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>>;

    /// Announces the clean vector whose noisy copies follow.
    fn set_reference(&self, _s: &StructureVector) -> Result<()> {
        Ok(())
    }

    /// Whether `classify` may be driven from several threads at once.
    fn parallel(&self) -> bool {
        true
    }
}

/// Adapts a plain function into a [`BaseClassifier`].
pub struct FnClassifier<F> {
    num_labels: usize,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&StructureVector) -> Label + Send + Sync,
{
    pub fn new(num_labels: usize, f: F) -> Self {
        Self { num_labels, f }
    }
}

impl<F> BaseClassifier for FnClassifier<F>
where
    F: Fn(&StructureVector) -> Label + Send + Sync,
{
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(batch.iter().map(&self.f).collect())
    }
}

impl<T: BaseClassifier + ?Sized> BaseClassifier for Box<T> {
    fn num_labels(&self) -> usize {
        (**self).num_labels()
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        (**self).classify(batch)
    }

    fn set_reference(&self, s: &StructureVector) -> Result<()> {
        (**self).set_reference(s)
    }

    fn parallel(&self) -> bool {
        (**self).parallel()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmoothingConfig {
    pub spec: NoiseSpec,
    pub samples: u64,
    pub seed: u64,
    pub batch_size: usize,
}

impl SmoothingConfig {
    pub fn new(spec: NoiseSpec, samples: u64, seed: u64) -> Self {
        Self { spec, samples, seed, batch_size: DEFAULT_BATCH_SIZE }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothingRun {
    pub s: StructureVector,
    pub spec: NoiseSpec,
    pub samples: u64,
    pub seed: u64,
    pub counts: LabelCounts,
    pub prediction: Label,
    pub tie: bool,
    pub elapsed: Duration,
}

fn classify_batch(
    base: &dyn BaseClassifier,
    s: &StructureVector,
    config: &SmoothingConfig,
    start: u64,
    end: u64,
) -> Result<LabelCounts> {
    let noisy: Vec<StructureVector> = (start..end)
        .map(|i| {
            let mask = sample_noise(&config.spec, s.dim(), &mut noise_stream(config.seed, i));
            xor_apply(s, &mask)
        })
        .collect::<Result<_>>()?;
    let wrap = |e: Error| Error::Classifier { index: start as usize, source: Box::new(e) };
    let labels = base.classify(&noisy).map_err(wrap)?;
    if labels.len() != noisy.len() {
        return Err(wrap(Error::Internal(format!(
            "classifier returned {} labels for {} inputs",
            labels.len(),
            noisy.len()
        ))));
    }
    let mut counts = LabelCounts::zeros(base.num_labels())?;
    for (offset, label) in labels.into_iter().enumerate() {
        counts.record(label).map_err(|e| Error::Classifier {
            index: start as usize + offset,
            source: Box::new(e),
        })?;
    }
    Ok(counts)
}

/// Samples `d` noise masks (sample `i` drawn from substream `i` of the
/// seed), classifies `s ⊕ ε_i`, and returns the most frequent label.
///
/// Counts are identical for any thread count.
pub fn smoothed_predict(
    base: &dyn BaseClassifier,
    s: &StructureVector,
    config: &SmoothingConfig,
) -> Result<SmoothingRun> {
    if config.samples == 0 {
        return Err(Error::OutOfRange("sample count must be at least 1".into()));
    }
    let started = Instant::now();
    base.set_reference(s)?;
    let batch = config.batch_size.max(1) as u64;
    let starts: Vec<u64> = (0..config.samples).step_by(batch as usize).collect();
    let range = |start: u64| (start, (start + batch).min(config.samples));

    let partials: Vec<LabelCounts> = if base.parallel() {
        starts
            .par_iter()
            .map(|&st| {
                let (a, b) = range(st);
                classify_batch(base, s, config, a, b)
            })
            .collect::<Result<_>>()?
    } else {
        starts
            .iter()
            .map(|&st| {
                let (a, b) = range(st);
                classify_batch(base, s, config, a, b)
            })
            .collect::<Result<_>>()?
    };

    let mut counts = LabelCounts::zeros(base.num_labels())?;
    for p in &partials {
        counts.merge(p);
    }
    let (prediction, tie) = counts.top();
    Ok(SmoothingRun {
        s: s.clone(),
        spec: config.spec,
        samples: config.samples,
        seed: config.seed,
        counts,
        prediction,
        tie,
        elapsed: started.elapsed(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Certified(Certificate),
    Abstain,
}

#[derive(Clone, Debug)]
pub struct ExampleReport {
    pub run: SmoothingRun,
    pub bounds: ConfidenceBounds,
    pub verdict: Verdict,
}

impl ExampleReport {
    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.verdict {
            Verdict::Certified(c) => Some(c),
            Verdict::Abstain => None,
        }
    }
}

/// Full pipeline: sample, bound, certify.
pub fn certify_example(
    base: &dyn BaseClassifier,
    s: &StructureVector,
    config: &SmoothingConfig,
    alpha: f64,
    backend: BackendChoice,
) -> Result<ExampleReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProbability(alpha));
    }
    let run = smoothed_predict(base, s, config)?;
    let bounds = simultaneous_bounds(&run.counts, alpha)?;
    let n = s.dim();
    let backend = backend.resolve(n);
    let verdict = match certified_perturbation_size(n, &config.spec, bounds.pa_lower, bounds.pb_upper, backend)? {
        Certification::Abstain => Verdict::Abstain,
        Certification::Certified(radius) => Verdict::Certified(Certificate {
            label: bounds.c_a,
            k_certified: radius.k,
            n,
            beta: config.spec,
            alpha,
            samples: config.samples,
            seed: config.seed,
            backend,
            pa_lower: bounds.pa_lower,
            pb_upper: bounds.pb_upper,
            monotone: radius.monotone,
            tie: bounds.tie,
        }),
    };
    Ok(ExampleReport { run, bounds, verdict })
}
