//! Closed-form and quadrature reference values, computed without any FFT.
//!
//! For the Gaussian source and a Lorentzian filter centred on the
//! half-pump frequency the filtered amplitude has a closed form. Writing
//! `p = 1/(16 tau_g²)`, `q = 1/(4 tau_s²)`, `alpha = p + q`,
//! `k = (q - p)/alpha` and `beta = 4pq/alpha`,
//!
//! ```text
//! psi(t1, t2)   = N exp(-beta t2²) exp(-alpha (t1 - k t2)²)
//! psi_T(t1, t2) = N exp(-beta t2²) I(t1 - k t2)
//! I(s) = (kappa/2) ∫_0^∞ exp(-kappa tau / 2) exp(-alpha (s - tau)²) dtau
//!      = (kappa/4) sqrt(pi/alpha) exp(g²/4alpha - g s) erfc(sqrt(alpha) (g/2alpha - s)),  g = kappa/2
//! ```
//!
//! so `t2` and `s = t1 - k t2` are independent under `|psi_T|²`, and every
//! coincidence marginal is a one-dimensional integral of `I²`.

use std::f64::consts::PI;

use crate::cavity::{FilterKind, SpectralFilter};
use crate::error::{Error, Result};
use crate::grids::{normalize_density, Axis, Density1D};
use crate::source::SourceParams;

const TOL: f64 = 1e-13;

/// `∫ f` over consecutive breakpoints, each piece by double-exponential
/// quadrature.
pub fn integrate_piecewise(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| quadrature::integrate(&f, w[0], w[1], TOL).integral)
        .sum()
}

fn sorted_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&x| x > lo && x < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `exp(x²) erfc(x)` for `x >= 0` without overflow.
fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        let r = 1.0 / (x * x);
        (1.0 - 0.5 * r + 0.75 * r * r - 1.875 * r * r * r + 6.5625 * r.powi(4)) / (x * PI.sqrt())
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Pre-filter arrival density of either arm: Gaussian with RMS
/// `sqrt(tau_g² + tau_s²/4)`.
pub fn source_marginal(params: &SourceParams, t: f64) -> f64 {
    gaussian(t, params.marginal_rms())
}

/// Pre-filter `t1 - t2` density: Gaussian with RMS `tau_s`, whatever the
/// gate.
pub fn source_difference(params: &SourceParams, u: f64) -> f64 {
    gaussian(u, params.tau_s)
}

/// Sample `f` on `axis` and normalize.
pub fn density_on(axis: Axis, f: impl Fn(f64) -> f64) -> Result<Density1D> {
    normalize_density(axis.points().map(f).collect(), axis)
}

/// L1 distance between `density` and `f`, both restricted to every
/// `stride`-th lattice point and renormalized there.
///
/// Lets expensive oracles be checked against long lattices at a fraction
/// of the cost; `stride = 1` compares on the full lattice.
pub fn l1_against(density: &Density1D, stride: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    let stride = stride.max(1);
    let src = density.axis();
    let len = (src.len - 1) / stride + 1;
    let axis = Axis::new(src.start, src.step * stride as f64, len)?;
    let picked: Vec<f64> = density.values().iter().step_by(stride).copied().collect();
    let a = normalize_density(picked, axis)?;
    let b = density_on(axis, f)?;
    crate::stats::l1_distance(&a, &b)
}

/// Coincidence statistics of the Gaussian source behind a resonant
/// Lorentzian filter.
#[derive(Debug, Clone, Copy)]
pub struct GaussianLorentzian {
    alpha: f64,
    beta: f64,
    k: f64,
    gamma: f64,
    kappa: f64,
    /// `∫ I(s)² ds`
    i2: f64,
    mean_s: f64,
    var_s: f64,
}

impl GaussianLorentzian {
    pub fn new(params: &SourceParams, filter: &SpectralFilter) -> Result<Self> {
        let kappa = match filter.kind {
            FilterKind::Lorentzian { kappa } if filter.center == 0.0 => kappa,
            _ => {
                return Err(Error::InvalidArgument(
                    "closed-form oracle needs a Lorentzian filter at zero detuning".into(),
                ))
            }
        };
        let p = 1.0 / (16.0 * params.tau_g * params.tau_g);
        let q = 1.0 / (4.0 * params.tau_s * params.tau_s);
        let alpha = p + q;
        let o = GaussianLorentzian {
            alpha,
            beta: 4.0 * p * q / alpha,
            k: (q - p) / alpha,
            gamma: 0.5 * kappa,
            kappa,
            i2: 0.0,
            mean_s: 0.0,
            var_s: 0.0,
        };
        let breaks = o.s_breaks();
        let i2 = |s: f64| o.kernel(s).powi(2);
        let mass = integrate_piecewise(i2, &breaks);
        let mean = integrate_piecewise(|s| s * i2(s), &breaks) / mass;
        let var = integrate_piecewise(|s| (s - mean).powi(2) * i2(s), &breaks) / mass;
        Ok(GaussianLorentzian {
            i2: mass,
            mean_s: mean,
            var_s: var,
            ..o
        })
    }

    /// Breakpoints covering the support of `I²`: a Gaussian edge of width
    /// `1/sqrt(alpha)` below zero and an exponential tail of scale
    /// `1/kappa` above.
    fn s_breaks(&self) -> Vec<f64> {
        let a = self.alpha.sqrt().recip();
        let b = self.kappa.recip();
        let mut pts = vec![-12.0 * a, -4.0 * a, -a, 0.0, a, 4.0 * a, 12.0 * a];
        pts.extend([0.25, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 48.0].map(|m| m * b));
        sorted_breaks(pts, -12.0 * a, 12.0 * a + 48.0 * b)
    }

    /// Filtered `s`-profile `I(s)`.
    pub fn kernel(&self, s: f64) -> f64 {
        let (alpha, g) = (self.alpha, self.gamma);
        let pref = 0.25 * self.kappa * (PI / alpha).sqrt();
        let x = alpha.sqrt() * (g / (2.0 * alpha) - s);
        if x > 0.0 {
            pref * (-alpha * s * s).exp() * erfcx(x)
        } else {
            pref * (g * g / (4.0 * alpha) - g * s).exp() * libm::erfc(x)
        }
    }

    /// Transmission probability `∬ |psi_T|²`.
    pub fn survival(&self) -> f64 {
        self.i2 / (PI / (2.0 * self.alpha)).sqrt()
    }

    /// RMS of `exp(-2 beta t2²)`, i.e. of photon 2 in coincidence.
    fn sigma2(&self) -> f64 {
        (0.25 / self.beta).sqrt()
    }

    /// `∫ exp(-2 beta t2²) I(c + m t2)² dt2`, normalized by the coincidence
    /// mass.
    fn conditional(&self, c: f64, m: f64) -> f64 {
        let sd = self.sigma2();
        let lim = 12.0 * sd;
        let mut pts: Vec<f64> = [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0]
            .iter()
            .map(|f| f * sd)
            .collect();
        if m != 0.0 {
            let a = self.alpha.sqrt().recip() / m.abs();
            let edge = -c / m;
            pts.extend([-12.0, -4.0, -1.0, 0.0, 1.0, 4.0, 12.0].map(|f| edge + f * a));
        }
        let breaks = sorted_breaks(pts, -lim, lim);
        let mass = (PI / (2.0 * self.beta)).sqrt() * self.i2;
        integrate_piecewise(
            |t2| (-2.0 * self.beta * t2 * t2).exp() * self.kernel(c + m * t2).powi(2),
            &breaks,
        ) / mass
    }

    /// Photon-1 arrival density given transmission.
    pub fn p1(&self, t1: f64) -> f64 {
        self.conditional(t1, -self.k)
    }

    /// Photon-2 arrival density given coincidence (exactly Gaussian).
    pub fn p2(&self, t2: f64) -> f64 {
        gaussian(t2, self.sigma2())
    }

    /// `t1 - t2` density given coincidence.
    pub fn difference(&self, u: f64) -> f64 {
        self.conditional(u, 1.0 - self.k)
    }

    pub fn p1_mean(&self) -> f64 {
        self.mean_s
    }

    pub fn p1_rms(&self) -> f64 {
        (self.var_s + self.k * self.k * self.sigma2().powi(2)).sqrt()
    }

    pub fn p2_rms(&self) -> f64 {
        self.sigma2()
    }

    pub fn difference_rms(&self) -> f64 {
        (self.var_s + (1.0 - self.k).powi(2) * self.sigma2().powi(2)).sqrt()
    }
}

/// Transmission probability computed in the frequency domain: the arm-1
/// spectral marginal of the source is Gaussian with variance
/// `(1/(4 tau_g²) + 1/tau_s²) / 4`, weighted by `|t(w)|²`.
pub fn survival_frequency_domain(params: &SourceParams, filter: &SpectralFilter) -> f64 {
    let var = 0.25 * (0.25 / params.tau_g.powi(2) + 1.0 / params.tau_s.powi(2));
    let sd = var.sqrt();
    let lim = 12.0 * sd;
    let mut pts: Vec<f64> = (-12..=12).map(|m| m as f64 * sd).collect();
    let lw = filter.linewidth();
    let mut resonances = vec![filter.center];
    if let FilterKind::Airy { fsr, .. } = filter.kind {
        let m0 = ((-lim - filter.center) / fsr).floor() as i64;
        let m1 = ((lim - filter.center) / fsr).ceil() as i64;
        resonances = (m0..=m1).map(|m| filter.center + m as f64 * fsr).collect();
    }
    for c in resonances {
        for f in [0.0, 0.5, 2.0, 10.0, 50.0, 250.0, 1000.0] {
            pts.push(c - f * lw);
            pts.push(c + f * lw);
        }
    }
    let breaks = sorted_breaks(pts, -lim, lim);
    integrate_piecewise(
        |w| filter.intensity_transmission(w) * gaussian(w, sd),
        &breaks,
    )
}

/// Lorentzian impulse response at `tau > 0` by direct quadrature of the
/// inverse Fourier integral of `t(w) = a / (a + i w)`, `a = kappa/2`:
///
/// ```text
/// h(tau) = a/2 + (a/pi) ∫_0^∞ [cos(x y) - sin(x y)/y] / (1 + y²) dy,   x = a tau
/// ```
///
/// The range is cut at `y = 4000` and the remainder of the slowly decaying
/// cosine term added by one integration by parts.
pub fn lorentzian_impulse_quadrature(kappa: f64, tau: f64) -> f64 {
    assert!(tau > 0.0 && kappa > 0.0);
    let a = 0.5 * kappa;
    let x = a * tau;
    let g = |y: f64| {
        let sinc = if y == 0.0 { x } else { (x * y).sin() / y };
        ((x * y).cos() - sinc) / (1.0 + y * y)
    };
    let y_max = 4000.0;
    let half = PI / x;
    let mut pts: Vec<f64> = vec![0.25, 0.5, 1.0, 2.0, 4.0];
    let mut y = half;
    while y < y_max {
        pts.push(y);
        y += half;
    }
    let breaks = sorted_breaks(pts, 0.0, y_max);
    let body = integrate_piecewise(g, &breaks);
    let w = 1.0 / (1.0 + y_max * y_max);
    let tail = -(x * y_max).sin() * w / x;
    a * 0.5 + a / PI * (body + tail)
}
