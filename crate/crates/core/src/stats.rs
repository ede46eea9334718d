//! Width estimators, distances between densities, histograms, and the
//! two-sample Kolmogorov-Smirnov test.

use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grids::{normalize_density, trapezoid, Axis, Density1D};

/// Spread measures of a one-dimensional density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthReport {
    pub mean: f64,
    pub rms: f64,
    pub fwhm: f64,
    pub iqr: f64,
    /// Participation ratio `1 / sum (p_k dt)²`: roughly how many grid cells
    /// carry the mass.
    pub n_effective: f64,
    /// More than one contiguous region above half maximum; `fwhm` then spans
    /// the outermost crossings.
    pub multimodal: bool,
    /// FWHM below three grid steps.
    pub unresolved: bool,
}

pub fn width_report(density: &Density1D) -> WidthReport {
    let axis = density.axis();
    let values = density.values();
    let (fwhm, multimodal) = fwhm(values, axis);
    let cdf = density.cdf();
    let iqr = quantile(&cdf, axis, 0.75) - quantile(&cdf, axis, 0.25);
    let mass_sq: f64 = values.iter().map(|p| (p * axis.step).powi(2)).sum();
    WidthReport {
        mean: density.mean(),
        rms: density.rms(),
        fwhm,
        iqr,
        n_effective: mass_sq.recip(),
        multimodal,
        unresolved: fwhm < 3.0 * axis.step,
    }
}

/// Full width at half of the global maximum with linear interpolation
/// between bracketing samples.
fn fwhm(values: &[f64], axis: &Axis) -> (f64, bool) {
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * peak;
    let first = values.iter().position(|&v| v >= half).unwrap_or(0);
    let last = values.iter().rposition(|&v| v >= half).unwrap_or(0);
    let multimodal = values[first..=last].iter().any(|&v| v < half);

    let left = if first == 0 {
        axis.point(0)
    } else {
        let (a, b) = (values[first - 1], values[first]);
        axis.point(first - 1) + axis.step * (half - a) / (b - a)
    };
    let right = if last + 1 == values.len() {
        axis.point(last)
    } else {
        let (a, b) = (values[last], values[last + 1]);
        axis.point(last) + axis.step * (a - half) / (a - b)
    };
    (right - left, multimodal)
}

fn quantile(cdf: &[f64], axis: &Axis, q: f64) -> f64 {
    let total = *cdf.last().unwrap();
    let target = q * total;
    let k = cdf.partition_point(|&c| c < target);
    if k == 0 {
        return axis.point(0);
    }
    if k >= cdf.len() {
        return axis.last();
    }
    let (a, b) = (cdf[k - 1], cdf[k]);
    let frac = if b > a { (target - a) / (b - a) } else { 0.0 };
    axis.point(k - 1) + frac * axis.step
}

/// Moment estimates from raw samples with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWidths {
    pub n: usize,
    pub mean: f64,
    pub rms: f64,
    pub mean_se: f64,
    /// Large-sample standard error of the standard deviation,
    /// `sqrt((m4 - s⁴) / n) / (2 s)`.
    pub rms_se: f64,
}

pub fn sample_widths(samples: &[f64]) -> Result<SampleWidths> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let rms = var.sqrt();
    Ok(SampleWidths {
        n: samples.len(),
        mean,
        rms,
        mean_se: (var / n).sqrt(),
        rms_se: if rms > 0.0 {
            ((m4 - m2 * m2).max(0.0) / n).sqrt() / (2.0 * rms)
        } else {
            0.0
        },
    })
}

/// Standard errors of the sample mean and sample standard deviation for
/// `n` independent draws from `density`: `sigma / sqrt(n)` and
/// `sqrt((mu4 - sigma⁴) / n) / (2 sigma)`.
///
/// Unlike the errors in [`SampleWidths`], which are estimated from the
/// sample itself, these do not shrink when a heavy-tailed sample happens to
/// miss its tail.
pub fn model_standard_errors(density: &Density1D, n: usize) -> (f64, f64) {
    let n = n.max(1) as f64;
    let var = density.central_moment(2).max(0.0);
    let mu4 = density.central_moment(4).max(0.0);
    let sigma = var.sqrt();
    let rms_se = if sigma > 0.0 {
        ((mu4 - var * var).max(0.0) / n).sqrt() / (2.0 * sigma)
    } else {
        0.0
    };
    ((var / n).sqrt(), rms_se)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "KS test needs two nonempty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS test samples contain NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    b.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n_eff.sqrt() * d),
    })
}

/// One-sample Kolmogorov-Smirnov test of `samples` against a density.
///
/// The density is read as piecewise constant on cells centred at its grid
/// points, the same convention the backend samplers draw from, so the
/// reference CDF is piecewise linear through the cell edges.
pub fn ks_against_density(samples: &[f64], density: &Density1D) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "KS test needs a nonempty sample".into(),
        ));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS test samples contain NaN".into()));
    }
    let axis = density.axis();
    let total: f64 = density.values().iter().sum();
    let mut cum = Vec::with_capacity(density.values().len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for v in density.values() {
        acc += v / total;
        cum.push(acc);
    }
    let lo = axis.start - 0.5 * axis.step;
    let cdf = |x: f64| {
        let pos = (x - lo) / axis.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let k = pos.floor() as usize;
        if k >= axis.len {
            return 1.0;
        }
        cum[k] + (pos - k as f64) * (cum[k + 1] - cum[k])
    };
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n.sqrt() * d),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
///
/// Uses the alternating series above `lambda = 1.18` and the Jacobi-theta
/// form below it, each truncated at 100 terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = -PI * PI / (8.0 * lambda * lambda);
        let cdf = (2.0 * PI).sqrt() / lambda
            * (1..=100)
                .map(|k| {
                    let m = (2 * k - 1) as f64;
                    (c * m * m).exp()
                })
                .sum::<f64>();
        1.0 - cdf
    } else {
        2.0 * (1..=100)
            .map(|k| {
                let kf = k as f64;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * kf * kf * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// `∫ |a - b| dt` for densities on the same lattice.
pub fn l1_distance(a: &Density1D, b: &Density1D) -> Result<f64> {
    if !a.axis().matches(b.axis()) {
        return Err(Error::GridMismatch(
            "L1 distance needs both densities on the same axis".into(),
        ));
    }
    let diff: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(trapezoid(&diff, a.axis().step))
}

/// Counts over half-open bins `[e_k, e_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Bin centres and count densities (counts / (in-range total * width)).
    /// Requires uniform bins.
    pub fn to_density(&self) -> Result<Density1D> {
        let width = self.edges[1] - self.edges[0];
        let uniform = self
            .edges
            .windows(2)
            .all(|w| ((w[1] - w[0]) - width).abs() <= 1e-9 * width.abs());
        if !uniform {
            return Err(Error::InvalidArgument(
                "density view needs uniform bins".into(),
            ));
        }
        let axis = Axis::new(self.edges[0] + 0.5 * width, width, self.counts.len())?;
        normalize_density(self.counts.iter().map(|&c| c as f64).collect(), axis)
    }
}

pub fn histogram_of(samples: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::InvalidArgument(
            "histogram needs at least two edges".into(),
        ));
    }
    if edges
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        || edges.iter().any(|e| !e.is_finite())
    {
        return Err(Error::InvalidArgument(
            "histogram edges must be finite and strictly increasing".into(),
        ));
    }
    let mut h = Histogram {
        edges: edges.to_vec(),
        counts: vec![0; edges.len() - 1],
        underflow: 0,
        overflow: 0,
    };
    let last = *edges.last().unwrap();
    for &x in samples {
        if x < edges[0] {
            h.underflow += 1;
        } else if x >= last || x.is_nan() {
            h.overflow += 1;
        } else {
            // first edge strictly greater than x, minus one
            let k = edges.partition_point(|&e| e <= x) - 1;
            h.counts[k] += 1;
        }
    }
    Ok(h)
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..=bins).map(|k| lo + k as f64 * w).collect()
}
