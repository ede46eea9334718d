//! Fabry-Perot filter models.
//!
//! Two lossless models share one interface: a single-mode Lorentzian with
//! linewidth `kappa`, and the full Airy response of a symmetric two-mirror
//! cavity with intensity reflectivity `R` and free spectral range `fsr`
//! (both in angular-frequency units). Phases follow the
//! `exp(-i w t)` forward convention of [`crate::grids`], so transfer-function
//! poles lie in the upper half plane and impulse responses are causal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{TimeGrid, TimeSignal};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum impulse-response span, in intensity lifetimes.
pub const MIN_LIFETIMES: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Lorentzian { kappa: f64 },
    Airy { reflectivity: f64, fsr: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFilter {
    pub kind: FilterKind,
    /// Resonance detuning from the half-pump frequency.
    pub center: f64,
}

/// Single-mode filter: `t = (k/2) / (k/2 + i(w - wc))`, `r = 1 - t`.
pub fn lorentzian_response(kappa: f64, center: f64) -> Result<SpectralFilter> {
    if !(kappa > 0.0 && kappa.is_finite()) || !center.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Lorentzian filter needs kappa > 0 and a finite centre (kappa={kappa}, centre={center})"
        )));
    }
    Ok(SpectralFilter {
        kind: FilterKind::Lorentzian { kappa },
        center,
    })
}

/// Full Airy response of a symmetric lossless cavity.
pub fn airy_response(reflectivity: f64, fsr: f64, center: f64) -> Result<SpectralFilter> {
    if !(reflectivity > 0.0 && reflectivity < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mirror reflectivity must lie in (0, 1), got {reflectivity}"
        )));
    }
    if !(fsr > 0.0 && fsr.is_finite()) || !center.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "free spectral range must be positive and finite, got {fsr}"
        )));
    }
    Ok(SpectralFilter {
        kind: FilterKind::Airy { reflectivity, fsr },
        center,
    })
}

impl SpectralFilter {
    /// Amplitude transmission `t(w)`.
    pub fn transmission(&self, omega: f64) -> Complex64 {
        let detuning = omega - self.center;
        match self.kind {
            FilterKind::Lorentzian { kappa } => {
                let half = 0.5 * kappa;
                Complex64::new(half, 0.0) / Complex64::new(half, detuning)
            }
            FilterKind::Airy { reflectivity, fsr } => {
                let delta = 2.0 * PI * detuning / fsr;
                let round_trip = Complex64::from_polar(1.0, -delta);
                Complex64::from_polar(1.0 - reflectivity, -0.5 * delta)
                    / (1.0 - reflectivity * round_trip)
            }
        }
    }

    /// Amplitude reflection `r(w)`.
    pub fn reflection(&self, omega: f64) -> Complex64 {
        let detuning = omega - self.center;
        match self.kind {
            FilterKind::Lorentzian { kappa } => {
                Complex64::new(0.0, detuning) / Complex64::new(0.5 * kappa, detuning)
            }
            FilterKind::Airy { reflectivity, fsr } => {
                let delta = 2.0 * PI * detuning / fsr;
                let round_trip = Complex64::from_polar(1.0, -delta);
                reflectivity.sqrt() * (round_trip - 1.0) / (1.0 - reflectivity * round_trip)
            }
        }
    }

    /// `|t(w)|²`, evaluated in closed form.
    pub fn intensity_transmission(&self, omega: f64) -> f64 {
        let detuning = omega - self.center;
        match self.kind {
            FilterKind::Lorentzian { kappa } => {
                let h2 = 0.25 * kappa * kappa;
                h2 / (h2 + detuning * detuning)
            }
            FilterKind::Airy {
                reflectivity: r,
                fsr,
            } => {
                let delta = 2.0 * PI * detuning / fsr;
                (1.0 - r).powi(2) / (1.0 + r * r - 2.0 * r * delta.cos())
            }
        }
    }

    /// Coefficient of finesse `pi sqrt(R) / (1 - R)`; `None` for the
    /// single-mode model.
    pub fn finesse(&self) -> Option<f64> {
        match self.kind {
            FilterKind::Lorentzian { .. } => None,
            FilterKind::Airy {
                reflectivity: r, ..
            } => Some(PI * r.sqrt() / (1.0 - r)),
        }
    }

    /// Intensity-transmission FWHM of one resonance, angular frequency.
    pub fn linewidth(&self) -> f64 {
        match self.kind {
            FilterKind::Lorentzian { kappa } => kappa,
            FilterKind::Airy {
                reflectivity: r,
                fsr,
            } => {
                // |t|² = 1/2  <=>  cos d = (1 + R² - 2(1 - R)²) / 2R
                let c = (1.0 + r * r - 2.0 * (1.0 - r).powi(2)) / (2.0 * r);
                if c <= -1.0 {
                    // transmission never falls to one half
                    fsr
                } else {
                    2.0 * c.acos() * fsr / (2.0 * PI)
                }
            }
        }
    }

    /// Intensity lifetime `1 / linewidth`, the filter's `tau_FP`.
    pub fn lifetime(&self) -> f64 {
        self.linewidth().recip()
    }

    /// `t` and `r` sampled at the DFT bin frequencies of `grid`
    /// (standard FFT order).
    pub fn on_bins(&self, grid: &TimeGrid) -> (Vec<Complex64>, Vec<Complex64>) {
        (0..grid.len())
            .map(|k| {
                let w = grid.bin_frequency(k);
                (self.transmission(w), self.reflection(w))
            })
            .unzip()
    }
}

/// Inverse Fourier transform of `t(w)` sampled on `grid`.
///
/// The Lorentzian has a single pole at `wc + i kappa/2`, so
/// `h(tau) = (kappa/2) exp((i wc - kappa/2) tau)` for `tau >= 0` and zero
/// before; the sample at `tau = 0` takes the right-hand limit `kappa/2`.
/// The Airy transfer function expands into round trips,
/// `t = (1 - R) sum_m R^m exp(-i (m + 1/2) delta)`, i.e. a train of delayed
/// impulses; each is deposited on the nearest grid sample with weight
/// `1/dt`, which is the grid-resolution image of a delta.
pub fn impulse_response(filter: &SpectralFilter, grid: &TimeGrid) -> Result<TimeSignal> {
    let lifetime = filter.lifetime();
    if grid.dt() > lifetime {
        return Err(Error::Coverage(format!(
            "step {} does not resolve the filter lifetime {lifetime}",
            grid.dt()
        )));
    }
    if grid.t_end() < MIN_LIFETIMES * lifetime {
        return Err(Error::Coverage(format!(
            "grid ends at {} but the impulse response needs {} lifetimes ({})",
            grid.t_end(),
            MIN_LIFETIMES,
            MIN_LIFETIMES * lifetime
        )));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    match filter.kind {
        FilterKind::Lorentzian { kappa } => {
            let rate = Complex64::new(-0.5 * kappa, filter.center);
            for (k, z) in values.iter_mut().enumerate() {
                let tau = grid.point(k);
                if tau >= 0.0 {
                    *z = 0.5 * kappa * (rate * tau).exp();
                }
            }
        }
        FilterKind::Airy { reflectivity, fsr } => {
            let round_trip = 2.0 * PI / fsr;
            let mut weight = (1.0 - reflectivity) / grid.dt();
            let mut m = 0usize;
            while weight > 1e-17 * (1.0 - reflectivity) / grid.dt() {
                let delay = (m as f64 + 0.5) * round_trip;
                if delay >= grid.t_end() {
                    break;
                }
                let idx = ((delay - grid.t_min()) / grid.dt()).round();
                if idx >= 0.0 && (idx as usize) < grid.len() {
                    values[idx as usize] += Complex64::from_polar(weight, filter.center * delay);
                }
                weight *= reflectivity;
                m += 1;
            }
        }
    }
    TimeSignal::new(*grid, values)
}

/// Cavity timescales in SI units from finesse and mirror spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityTimescales {
    pub finesse: f64,
    pub length_m: f64,
    /// `sqrt(F) L / c`, seconds.
    pub tau_fp_sqrt_finesse: f64,
    /// Photon storage time `F L / (pi c)`, seconds.
    pub tau_lifetime: f64,
    /// `tau_lifetime / tau_fp_sqrt_finesse`.
    pub ratio: f64,
}

pub fn cavity_timescales(finesse: f64, length_m: f64) -> Result<CavityTimescales> {
    if !(finesse > 1.0 && finesse.is_finite()) || !(length_m > 0.0 && length_m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cavity needs finesse > 1 and positive length (F={finesse}, L={length_m})"
        )));
    }
    let transit = length_m / SPEED_OF_LIGHT;
    let tau_fp_sqrt_finesse = finesse.sqrt() * transit;
    let tau_lifetime = finesse * transit / PI;
    Ok(CavityTimescales {
        finesse,
        length_m,
        tau_fp_sqrt_finesse,
        tau_lifetime,
        ratio: tau_lifetime / tau_fp_sqrt_finesse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorentzian_points() {
        let f = lorentzian_response(0.2, 0.5).unwrap();
        assert!((f.transmission(0.5) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(f.reflection(0.5).norm() < 1e-15);
        assert!((f.transmission(0.6).norm_sqr() - 0.5).abs() < 1e-12);
        assert!(lorentzian_response(0.0, 0.0).is_err());
        assert!(lorentzian_response(-1.0, 0.0).is_err());
    }

    #[test]
    fn airy_points() {
        let f = airy_response(0.9, 2.0, 0.0).unwrap();
        assert!((f.transmission(0.0).norm_sqr() - 1.0).abs() < 1e-12);
        assert!(f.reflection(0.0).norm() < 1e-12);
        assert!((f.transmission(2.0).norm_sqr() - 1.0).abs() < 1e-12);
        let weak = airy_response(1e-9, 2.0, 0.0).unwrap();
        for w in [0.0, 0.3, 1.0, 1.7] {
            assert!((weak.intensity_transmission(w) - 1.0).abs() < 1e-8);
        }
        assert!(airy_response(1.0, 2.0, 0.0).is_err());
        assert!(airy_response(0.0, 2.0, 0.0).is_err());
        assert!(airy_response(0.5, -2.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_intensity_matches_amplitude() {
        for f in [
            lorentzian_response(0.3, -0.1).unwrap(),
            airy_response(0.95, 1.5, 0.2).unwrap(),
        ] {
            for k in 0..200 {
                let w = -3.0 + 0.03 * k as f64;
                assert!((f.transmission(w).norm_sqr() - f.intensity_transmission(w)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn timescales() {
        let c = cavity_timescales(1e6, 0.3).unwrap();
        // 1e3 * 0.3 m / c
        assert!((c.tau_fp_sqrt_finesse - 1.0e-6).abs() < 1e-9);
        assert!((c.tau_lifetime - 0.318e-3).abs() < 0.001e-3);
        let near = cavity_timescales(1.0 + 1e-9, 3.0).unwrap();
        let transit = 3.0 / SPEED_OF_LIGHT;
        assert!((near.tau_fp_sqrt_finesse / transit - 1.0).abs() < 1e-6);
        assert!((near.tau_lifetime / transit - 1.0 / PI).abs() < 1e-6);
        assert!(cavity_timescales(0.5, 1.0).is_err());
        assert!(cavity_timescales(10.0, 0.0).is_err());
    }

    #[test]
    fn impulse_coverage() {
        let f = lorentzian_response(0.1, 0.0).unwrap();
        let short = TimeGrid::new(-8.0, 0.5, 64).unwrap();
        assert!(matches!(
            impulse_response(&f, &short),
            Err(Error::Coverage(_))
        ));
        let coarse = TimeGrid::new(0.0, 20.0, 64).unwrap();
        assert!(matches!(
            impulse_response(&f, &coarse),
            Err(Error::Coverage(_))
        ));
    }
}
