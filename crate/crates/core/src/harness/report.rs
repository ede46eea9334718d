//! Plain-text and CSV rendering of run and analysis results.
//!
//! Every number is written with Rust's shortest round-trip float format, so
//! reports are byte-identical whenever the underlying values are.

use std::fmt::Write as _;

use crate::backends::Backend;
use crate::stats::{KsResult, SampleWidths, WidthReport};

/// Width summary of one density, tagged with what it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityWidths {
    /// `source`, `standard` or `collapse`
    pub model: String,
    /// `t1`, `t2`, `t2_unconditional` or `t1-t2`
    pub quantity: String,
    pub widths: WidthReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub backend: Backend,
    pub triggers: usize,
    pub coincidences: usize,
    pub t1: Option<SampleWidths>,
    pub t2: Option<SampleWidths>,
    pub difference: Option<SampleWidths>,
    pub event_file: String,
}

/// The machine-readable account of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    /// Resolved configuration, output directory omitted.
    pub config: String,
    pub seed: u64,
    pub tau_s_seconds: Option<f64>,
    pub survival: f64,
    /// `L1(p2_unconditional, pre-filter arm-2 marginal)`, standard backend.
    pub no_signaling_l1: Option<f64>,
    pub uncertainty_product: f64,
    pub densities: Vec<DensityWidths>,
    pub samples: Vec<SampleSummary>,
    /// Two-sample KS on photon-2 times between the backends' event samples.
    pub backend_ks: Option<KsResult>,
    pub warnings: Vec<String>,
}

/// p-value below which two samples are declared to come from different
/// models.
pub const REJECT_P: f64 = 1e-6;
/// p-value above which a sample is declared consistent with a model.
pub const ACCEPT_P: f64 = 0.01;

impl RunReport {
    pub fn widths(&self, model: &str, quantity: &str) -> Option<&WidthReport> {
        self.densities
            .iter()
            .find(|d| d.model == model && d.quantity == quantity)
            .map(|d| &d.widths)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# etsim run report");
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "config_sha256 = {}", self.config_hash);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s);
        let _ = writeln!(s, "[config]");
        s.push_str(&self.config);
        let _ = writeln!(s);
        let _ = writeln!(s, "[filter]");
        let _ = writeln!(s, "survival = {}", self.survival);
        let _ = writeln!(s, "uncertainty_product = {}", self.uncertainty_product);
        match self.no_signaling_l1 {
            Some(l1) => {
                let _ = writeln!(s, "no_signaling_l1 = {l1}");
            }
            None => {
                let _ = writeln!(s, "no_signaling_l1 = not computed");
            }
        }
        for d in &self.densities {
            let _ = writeln!(s);
            let _ = writeln!(s, "[density {} {}]", d.model, d.quantity);
            write_widths(&mut s, &d.widths, self.tau_s_seconds);
        }
        for m in &self.samples {
            let _ = writeln!(s);
            let _ = writeln!(s, "[events {}]", m.backend);
            let _ = writeln!(s, "file = {}", m.event_file);
            let _ = writeln!(s, "triggers = {}", m.triggers);
            let _ = writeln!(s, "coincidences = {}", m.coincidences);
            for (name, w) in [("t1", &m.t1), ("t2", &m.t2), ("t1-t2", &m.difference)] {
                if let Some(w) = w {
                    write_sample(&mut s, name, w);
                }
            }
        }
        if let Some(ks) = &self.backend_ks {
            let _ = writeln!(s);
            let _ = writeln!(s, "[backend comparison]");
            write_ks(&mut s, "t2", ks);
            let _ = writeln!(
                s,
                "verdict = {}",
                if ks.p_value < REJECT_P {
                    "distinguishable"
                } else {
                    "not distinguishable"
                }
            );
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "[warnings]");
            for w in &self.warnings {
                let _ = writeln!(s, "warning = {w}");
            }
        }
        s
    }

    /// One row per density: `model,quantity,mean,rms,fwhm,iqr,n_effective,multimodal,unresolved`.
    pub fn widths_csv(&self) -> String {
        let mut s =
            String::from("model,quantity,mean,rms,fwhm,iqr,n_effective,multimodal,unresolved\n");
        for d in &self.densities {
            let w = &d.widths;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                d.model,
                d.quantity,
                w.mean,
                w.rms,
                w.fwhm,
                w.iqr,
                w.n_effective,
                w.multimodal,
                w.unresolved
            );
        }
        s
    }

    /// One row per sampled quantity: `backend,quantity,n,mean,mean_se,rms,rms_se`.
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("backend,quantity,n,mean,mean_se,rms,rms_se\n");
        for m in &self.samples {
            for (name, w) in [("t1", &m.t1), ("t2", &m.t2), ("t1-t2", &m.difference)] {
                if let Some(w) = w {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        m.backend, name, w.n, w.mean, w.mean_se, w.rms, w.rms_se
                    );
                }
            }
        }
        s
    }
}

pub(crate) fn write_widths(s: &mut String, w: &WidthReport, seconds: Option<f64>) {
    let _ = writeln!(s, "mean = {}", w.mean);
    let _ = writeln!(s, "rms = {}", w.rms);
    let _ = writeln!(s, "fwhm = {}", w.fwhm);
    let _ = writeln!(s, "iqr = {}", w.iqr);
    let _ = writeln!(s, "n_effective = {}", w.n_effective);
    if let Some(unit) = seconds {
        let _ = writeln!(s, "rms_seconds = {}", w.rms * unit);
        let _ = writeln!(s, "fwhm_seconds = {}", w.fwhm * unit);
    }
    if w.multimodal {
        let _ = writeln!(s, "multimodal = true");
    }
    if w.unresolved {
        let _ = writeln!(s, "unresolved = true");
    }
}

pub(crate) fn write_sample(s: &mut String, name: &str, w: &SampleWidths) {
    let _ = writeln!(s, "{name}.mean = {} +- {}", w.mean, w.mean_se);
    let _ = writeln!(s, "{name}.rms = {} +- {}", w.rms, w.rms_se);
}

pub(crate) fn write_ks(s: &mut String, name: &str, ks: &KsResult) {
    let _ = writeln!(s, "ks_{name}.statistic = {}", ks.statistic);
    let _ = writeln!(s, "ks_{name}.p_value = {:e}", ks.p_value);
}
