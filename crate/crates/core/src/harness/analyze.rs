//! Event-file analysis: widths, histograms and model tests.

use std::fmt::Write as _;

use crate::backends::{Backend, BackendResult};
use crate::error::{Error, Result};
use crate::events::EventBatch;
use crate::grids::Density1D;
use crate::harness::report::{write_ks, write_sample, ACCEPT_P, REJECT_P};
use crate::stats::{
    histogram_of, ks_against_density, ks_two_sample, model_standard_errors, sample_widths,
    uniform_edges, Histogram, KsResult, SampleWidths,
};

/// Fewest coincidences an analysis will accept.
pub const MIN_COINCIDENCES: usize = 100;

const HISTOGRAM_BINS: usize = 100;

/// Sample moments of one quantity against a model density, in units of
/// the model's standard errors for the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthCheck {
    pub quantity: &'static str,
    pub model_mean: f64,
    pub model_rms: f64,
    pub mean_z: f64,
    pub rms_z: f64,
}

impl WidthCheck {
    fn new(quantity: &'static str, sample: &SampleWidths, model: &Density1D) -> Self {
        let (mean_se, rms_se) = model_standard_errors(model, sample.n);
        let (mean, rms) = (model.mean(), model.rms());
        WidthCheck {
            quantity,
            model_mean: mean,
            model_rms: rms,
            mean_z: (sample.mean - mean) / mean_se,
            rms_z: (sample.rms - rms) / rms_se,
        }
    }

    pub fn within(&self, z: f64) -> bool {
        self.mean_z.abs() < z && self.rms_z.abs() < z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTest {
    pub backend: Backend,
    /// Photon-2 times against the model's coincidence density.
    pub t2: KsResult,
    /// `t1`, `t2`, `t1-t2`.
    pub widths: [WidthCheck; 3],
}

impl ModelTest {
    /// Every sample mean and RMS within `z` standard errors of the model.
    pub fn widths_within(&self, z: f64) -> bool {
        self.widths.iter().all(|w| w.within(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub triggers: usize,
    pub coincidences: usize,
    pub t1: SampleWidths,
    pub t2: SampleWidths,
    pub difference: SampleWidths,
    pub histograms: [(&'static str, Histogram); 3],
    pub tests: Vec<ModelTest>,
}

impl AnalysisReport {
    /// Model with the largest p-value.
    pub fn favored(&self) -> Option<Backend> {
        self.tests
            .iter()
            .max_by(|a, b| a.t2.p_value.total_cmp(&b.t2.p_value))
            .map(|t| t.backend)
    }

    /// The favored model is accepted (`p > 0.01`) and every other model is
    /// rejected (`p < 1e-6`).
    pub fn decisive(&self) -> bool {
        let Some(best) = self.favored() else {
            return false;
        };
        self.tests.iter().all(|t| {
            if t.backend == best {
                t.t2.p_value > ACCEPT_P
            } else {
                t.t2.p_value < REJECT_P
            }
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# etsim analysis\n");
        let _ = writeln!(s, "triggers = {}", self.triggers);
        let _ = writeln!(s, "coincidences = {}", self.coincidences);
        write_sample(&mut s, "t1", &self.t1);
        write_sample(&mut s, "t2", &self.t2);
        write_sample(&mut s, "t1-t2", &self.difference);
        for t in &self.tests {
            let _ = writeln!(s);
            let _ = writeln!(s, "[model {}]", t.backend);
            for w in &t.widths {
                let q = w.quantity;
                let _ = writeln!(s, "{q}.model_mean = {} (z = {})", w.model_mean, w.mean_z);
                let _ = writeln!(s, "{q}.model_rms = {} (z = {})", w.model_rms, w.rms_z);
            }
            write_ks(&mut s, "t2", &t.t2);
        }
        if let Some(b) = self.favored() {
            let _ = writeln!(s);
            let _ = writeln!(s, "favored = {b}");
            let _ = writeln!(s, "decisive = {}", self.decisive());
        }
        s
    }

    /// `quantity,lo,hi,count` rows for the three histograms.
    pub fn histograms_csv(&self) -> String {
        let mut s = String::from("quantity,lo,hi,count\n");
        for (name, h) in &self.histograms {
            for (k, c) in h.counts.iter().enumerate() {
                let _ = writeln!(s, "{name},{},{},{c}", h.edges[k], h.edges[k + 1]);
            }
        }
        s
    }
}

fn coincidence_columns(batch: &EventBatch) -> Result<[Vec<f64>; 3]> {
    let pairs = batch.coincidences();
    if pairs.len() < MIN_COINCIDENCES {
        return Err(Error::InsufficientData {
            count: pairs.len(),
            needed: MIN_COINCIDENCES,
        });
    }
    Ok([
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
        pairs.iter().map(|p| p.0 - p.1).collect(),
    ])
}

fn span_histogram(samples: &[f64]) -> Result<Histogram> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 1e-9).max(f64::EPSILON * hi.abs().max(1.0));
    histogram_of(samples, &uniform_edges(lo, hi + pad, HISTOGRAM_BINS))
}

/// Widths and histograms of the coincidences in `batch`, and a KS test of
/// photon-2 times against each reference model.
pub fn analyze_events(batch: &EventBatch, references: &[BackendResult]) -> Result<AnalysisReport> {
    let [t1, t2, diff] = coincidence_columns(batch)?;
    let widths = [
        sample_widths(&t1)?,
        sample_widths(&t2)?,
        sample_widths(&diff)?,
    ];
    let tests = references
        .iter()
        .map(|r| {
            Ok(ModelTest {
                backend: r.backend,
                t2: ks_against_density(&t2, &r.p2)?,
                widths: [
                    WidthCheck::new("t1", &widths[0], &r.p1),
                    WidthCheck::new("t2", &widths[1], &r.p2),
                    WidthCheck::new("t1-t2", &widths[2], &r.difference),
                ],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let [w1, w2, wd] = widths;
    Ok(AnalysisReport {
        triggers: batch.trigger_count(),
        coincidences: t1.len(),
        t1: w1,
        t2: w2,
        difference: wd,
        histograms: [
            ("t1", span_histogram(&t1)?),
            ("t2", span_histogram(&t2)?),
            ("t1-t2", span_histogram(&diff)?),
        ],
        tests,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub coincidences: (usize, usize),
    pub t1: KsResult,
    pub t2: KsResult,
    pub difference: KsResult,
}

impl CompareReport {
    /// Photon-2 arrival distributions differ at `p < 1e-6`.
    pub fn distinguishable(&self) -> bool {
        self.t2.p_value < REJECT_P
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# etsim comparison\n");
        let _ = writeln!(s, "coincidences_a = {}", self.coincidences.0);
        let _ = writeln!(s, "coincidences_b = {}", self.coincidences.1);
        write_ks(&mut s, "t1", &self.t1);
        write_ks(&mut s, "t2", &self.t2);
        write_ks(&mut s, "t1-t2", &self.difference);
        let _ = writeln!(
            s,
            "verdict = {}",
            if self.distinguishable() {
                "different models"
            } else {
                "consistent"
            }
        );
        s
    }
}

/// Two-sample KS tests between the coincidences of two event files.
pub fn compare_events(a: &EventBatch, b: &EventBatch) -> Result<CompareReport> {
    let ca = coincidence_columns(a)?;
    let cb = coincidence_columns(b)?;
    Ok(CompareReport {
        coincidences: (ca[0].len(), cb[0].len()),
        t1: ks_two_sample(&ca[0], &cb[0])?,
        t2: ks_two_sample(&ca[1], &cb[1])?,
        difference: ks_two_sample(&ca[2], &cb[2])?,
    })
}
