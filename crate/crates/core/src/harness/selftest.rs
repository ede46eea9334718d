//! Oracle and invariant checks behind the `selftest` command.

use std::fmt;

use crate::backends::{uncertainty_product, Backend};
use crate::cavity::{airy_response, impulse_response, lorentzian_response, SpectralFilter};
use crate::error::Result;
use crate::grids::TimeGrid;
use crate::harness::config::ExperimentConfig;
use crate::harness::run::build_experiment;
use crate::oracle::{
    l1_against, lorentzian_impulse_quadrature, source_difference, source_marginal,
    survival_frequency_domain, GaussianLorentzian,
};
use crate::stats::l1_distance;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    /// `None` when the check does not apply to this configuration.
    pub passed: Option<bool>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        write!(f, "{tag} {}: {:e} ({})", self.name, self.value, self.limit)
    }
}

fn below(name: &str, value: f64, limit: f64) -> Check {
    Check {
        name: name.into(),
        value,
        limit: format!("< {limit:e}"),
        passed: Some(value < limit),
    }
}

fn within(name: &str, value: f64, lo: f64, hi: f64) -> Check {
    Check {
        name: name.into(),
        value,
        limit: format!("in [{lo}, {hi}]"),
        passed: Some(value >= lo && value <= hi),
    }
}

/// Worst `| |t|² + |r|² - 1 |` over the DFT bins of `grid`.
pub fn unitarity_defect(filter: &SpectralFilter, grid: &TimeGrid) -> f64 {
    let (t, r) = filter.on_bins(grid);
    t.iter()
        .zip(&r)
        .map(|(t, r)| (t.norm_sqr() + r.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Worst relative deviation of the Lorentzian impulse response from the
/// Fourier-quadrature oracle over `(0, 5]` lifetimes.
pub fn impulse_defect(kappa: f64) -> Result<f64> {
    let filter = lorentzian_response(kappa, 0.0)?;
    let lifetime = 1.0 / kappa;
    let grid = TimeGrid::new(0.0, lifetime / 64.0, 1024)?;
    let h = impulse_response(&filter, &grid)?;
    Ok((1..=320)
        .map(|k| {
            let tau = grid.point(k);
            let q = lorentzian_impulse_quadrature(kappa, tau);
            (h.values()[k].re - q).abs() / q + h.values()[k].im.abs() / q
        })
        .fold(0.0, f64::max))
}

/// Run every check that applies to `config`.
pub fn run_selftest(config: &ExperimentConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    checks.push(below(
        "impulse response vs quadrature (relative)",
        impulse_defect(1.0 / 600.0)?,
        1e-6,
    ));

    let exp = build_experiment(config)?;
    let filtered = &exp.filtered;
    let filter = config.spectral_filter();
    let other = match filter.kind {
        crate::cavity::FilterKind::Lorentzian { .. } => airy_response(0.99, 2.0, 0.0)?,
        crate::cavity::FilterKind::Airy { .. } => lorentzian_response(1.0 / 600.0, 0.0)?,
    };
    let unitarity =
        unitarity_defect(&filter, filtered.grid1()).max(unitarity_defect(&other, filtered.grid1()));
    checks.push(below("|t|^2 + |r|^2 - 1 on arm-1 bins", unitarity, 1e-12));
    checks.push(below(
        "transmitted + reflected norm - 1",
        (filtered.survival() + filtered.reflected() - 1.0).abs(),
        1e-9,
    ));
    checks.push(below(
        "survival vs frequency-domain quadrature",
        (filtered.survival() - survival_frequency_domain(&exp.params, &filter)).abs(),
        1e-6,
    ));
    let p = exp.params;
    checks.push(below(
        "pre-filter arm-2 marginal vs closed form (L1)",
        l1_against(&exp.source_t2, 1, |t| source_marginal(&p, t))?,
        1e-3,
    ));
    checks.push(below(
        "pre-filter t1-t2 density vs closed form (L1)",
        l1_against(&exp.source_difference, 1, |u| source_difference(&p, u))?,
        1e-3,
    ));
    if let Some(std) = exp.result(Backend::Standard) {
        checks.push(below(
            "no-signaling L1",
            l1_distance(&std.p2_unconditional, &exp.source_t2)?,
            1e-6,
        ));
        match GaussianLorentzian::new(&p, &filter) {
            Ok(o) => {
                checks.push(below(
                    "p1 vs quadrature (L1)",
                    l1_against(&std.p1, 8, |t| o.p1(t))?,
                    1e-3,
                ));
                checks.push(below(
                    "p2 vs closed form (L1)",
                    l1_against(&std.p2, 1, |t| o.p2(t))?,
                    1e-3,
                ));
                checks.push(below(
                    "t1-t2 vs quadrature (L1)",
                    l1_against(&std.difference, 8, |u| o.difference(u))?,
                    1e-3,
                ));
                checks.push(below(
                    "RMS(p1) vs quadrature (relative)",
                    (std.p1.rms() / o.p1_rms() - 1.0).abs(),
                    0.05,
                ));
            }
            Err(_) => checks.push(Check {
                name: "closed-form coincidence oracle".into(),
                value: f64::NAN,
                limit: "Lorentzian at zero detuning only".into(),
                passed: None,
            }),
        }
    }
    checks.push(within(
        "uncertainty product",
        uncertainty_product(filtered)?,
        0.8,
        1.5,
    ));
    Ok(checks)
}
