//! Browser demo: arrival-time densities of photon 2 under both backends, the
//! filter's transmission curve, and Monte Carlo histograms.
//!
//! All logic lives in [`Demo`] and plain functions so it can be tested
//! natively; the wasm-bindgen attributes only expose it to JavaScript.

use wasm_bindgen::prelude::*;

use etsim::backends::{sample_events, Backend};
use etsim::grids::Density1D;
use etsim::harness::config::parse_config;
use etsim::harness::{build_experiment, Experiment};
use etsim::stats::{histogram_of, uniform_edges};

/// Points per curve handed to the page.
const PLOT_POINTS: usize = 600;

fn js_error(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// A computed experiment at one `(tau_g, tau_fp)` setting, with `tau_s = 1`.
#[wasm_bindgen]
pub struct Demo {
    exp: Experiment,
    pair_probability: f64,
}

/// Coarser grid than the CLI defaults so a slider drag stays interactive.
fn demo_config(tau_g: f64, tau_fp: f64) -> String {
    format!(
        "source.tau_g = {tau_g}\nfilter.tau_fp = {tau_fp}\ngrid.dt = 0.5\n\
         grid.tail_lifetimes = 8\nrun.backend = both\nallow_weak_hierarchy = true\n"
    )
}

impl Demo {
    pub fn build(tau_g: f64, tau_fp: f64) -> etsim::Result<Demo> {
        let cfg = parse_config(&demo_config(tau_g, tau_fp))?;
        Ok(Demo {
            exp: build_experiment(&cfg)?,
            pair_probability: cfg.source.pair_probability,
        })
    }

    fn density(&self, backend: Backend, which: &str) -> &Density1D {
        let r = self.exp.result(backend).expect("both backends are built");
        match which {
            "t1" => &r.p1,
            _ => &r.p2,
        }
    }

    /// Histogram of photon-2 times from `triggers` simulated gate windows,
    /// as `[lo, hi, count density per bin...]`.
    pub fn histogram(&self, backend: Backend, triggers: u32, seed: u64, bins: usize) -> Vec<f64> {
        let r = self.exp.result(backend).expect("both backends are built");
        let batch = sample_events(r, u64::from(triggers), self.pair_probability, seed);
        let t2: Vec<f64> = batch.coincidences().into_iter().map(|p| p.1).collect();
        let (lo, hi) = plot_range(&r.p2);
        let mut out = vec![lo, hi];
        let Ok(h) = histogram_of(&t2, &uniform_edges(lo, hi, bins.max(1))) else {
            return out;
        };
        let width = (hi - lo) / h.counts.len() as f64;
        let n = t2.len().max(1) as f64;
        out.extend(h.counts.iter().map(|&c| c as f64 / (n * width)));
        out
    }
}

/// The central span holding all but 1e-4 of the mass on each side.
fn plot_range(d: &Density1D) -> (f64, f64) {
    let cdf = d.cdf();
    let axis = d.axis();
    let lo = cdf.iter().position(|&c| c > 1e-4).unwrap_or(0);
    let hi = cdf
        .iter()
        .position(|&c| c > 1.0 - 1e-4)
        .unwrap_or(cdf.len() - 1);
    (axis.point(lo), axis.point(hi.max(lo + 1)))
}

/// `[t..., value...]` at most `points` samples of `d` over `range`.
fn resample(d: &Density1D, range: (f64, f64), points: usize) -> Vec<f64> {
    let axis = d.axis();
    let at = |t: f64| {
        let x = (t - axis.start) / axis.step;
        let k = x.floor();
        if k < 0.0 || k as usize + 1 >= d.values().len() {
            return 0.0;
        }
        let (k, f) = (k as usize, x - k);
        d.values()[k] * (1.0 - f) + d.values()[k + 1] * f
    };
    let ts: Vec<f64> = (0..points)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (points - 1) as f64)
        .collect();
    let vs: Vec<f64> = ts.iter().map(|&t| at(t)).collect();
    ts.into_iter().chain(vs).collect()
}

/// Intensity transmission `|t(omega)|²` of a Lorentzian filter with
/// lifetime `tau_fp`, as `[omega..., value...]` over `± 6 kappa`.
pub fn lorentzian_curve(tau_fp: f64, points: usize) -> etsim::Result<Vec<f64>> {
    let f = etsim::cavity::lorentzian_response(tau_fp.recip(), 0.0)?;
    let span = 6.0 * f.linewidth();
    let ws: Vec<f64> = (0..points)
        .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
        .collect();
    let vs: Vec<f64> = ws.iter().map(|&w| f.intensity_transmission(w)).collect();
    Ok(ws.into_iter().chain(vs).collect())
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(tau_g: f64, tau_fp: f64) -> Result<Demo, JsError> {
        Demo::build(tau_g, tau_fp).map_err(js_error)
    }

    /// `[t..., standard p2..., collapse p2..., p1...]`, `PLOT_POINTS` each,
    /// over the range of the collapse photon-2 density.
    pub fn densities(&self) -> Vec<f64> {
        let range = plot_range(self.density(Backend::Collapse, "t2"));
        let std = resample(self.density(Backend::Standard, "t2"), range, PLOT_POINTS);
        let col = resample(self.density(Backend::Collapse, "t2"), range, PLOT_POINTS);
        let p1 = resample(self.density(Backend::Standard, "t1"), range, PLOT_POINTS);
        let (t, s) = std.split_at(PLOT_POINTS);
        [t, s, &col[PLOT_POINTS..], &p1[PLOT_POINTS..]].concat()
    }

    /// `[rms t2 standard, rms t2 collapse, rms t1, coincidence probability]`.
    pub fn summary(&self) -> Vec<f64> {
        vec![
            self.density(Backend::Standard, "t2").rms(),
            self.density(Backend::Collapse, "t2").rms(),
            self.density(Backend::Standard, "t1").rms(),
            self.exp.filtered.survival() * self.pair_probability,
        ]
    }

    /// Monte Carlo photon-2 histogram; `collapse` picks the backend.
    pub fn sample(&self, collapse: bool, triggers: u32, seed: u32, bins: usize) -> Vec<f64> {
        let backend = if collapse {
            Backend::Collapse
        } else {
            Backend::Standard
        };
        self.histogram(backend, triggers, u64::from(seed), bins)
    }
}

/// `[omega..., |t|²...]` for the filter panel.
#[wasm_bindgen(js_name = filterCurve)]
pub fn filter_curve(tau_fp: f64) -> Result<Vec<f64>, JsError> {
    lorentzian_curve(tau_fp, PLOT_POINTS).map_err(js_error)
}
