//! Uniform sampling lattices, the Fourier transform convention, and
//! normalized densities.
//!
//! Natural units throughout: hbar = 1 and the pair-correlation time is the
//! unit of time, so angular frequencies are in inverse units of that time.
//! Amplitudes live in a rotating frame (detunings from the degenerate
//! half-pump frequency), which keeps optical carriers off the grid.
//!
//! The continuous transform pair is
//!
//! ```text
//! F(w) = ∫ f(t) exp(-i w t) dt,        f(t) = (1/2π) ∫ F(w) exp(+i w t) dw
//! ```
//!
//! and every module uses it. With this sign a causal impulse response has a
//! transfer function whose poles sit in the upper half plane.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform lattice `start + k * step`, `k in [0, len)`.
///
/// Densities use this rather than [`TimeGrid`] because derived axes (for
/// example time differences) need not have a power-of-two length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !start.is_finite() || !step.is_finite() || step <= 0.0 || len < 2 {
            return Err(Error::InvalidArgument(format!(
                "axis needs finite start, positive step and at least two points \
                 (start={start}, step={step}, len={len})"
            )));
        }
        Ok(Axis { start, step, len })
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.point(k))
    }

    pub fn last(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Same lattice up to floating-point noise in the origin and spacing.
    pub fn matches(&self, other: &Axis) -> bool {
        self.len == other.len
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && (self.start - other.start).abs() <= 1e-9 * self.step
    }
}

/// Time lattice with a power-of-two number of points.
///
/// The grid is treated as one period of a periodic signal, so it covers the
/// half-open span `[t_min, t_min + n * dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_min: f64,
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, dt: f64, n: usize) -> Result<Self> {
        if !t_min.is_finite() || !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs finite t_min and positive dt (t_min={t_min}, dt={dt})"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "time grid size must be a power of two >= 8, got {n}"
            )));
        }
        Ok(TimeGrid { t_min, dt, n })
    }

    /// Grid starting at `t_min` with spacing exactly `dt_target` whose span
    /// reaches at least `t_max`.
    ///
    /// The point count is rounded up to the next power of two by extending
    /// the span to the right; the requested resolution is never coarsened.
    pub fn covering(t_min: f64, t_max: f64, dt_target: f64) -> Result<Self> {
        if !t_min.is_finite() || !t_max.is_finite() || !dt_target.is_finite() {
            return Err(Error::InvalidArgument(
                "grid bounds and step must be finite".into(),
            ));
        }
        if t_max <= t_min {
            return Err(Error::InvalidArgument(format!(
                "empty interval [{t_min}, {t_max}]"
            )));
        }
        if dt_target <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "dt_target must be positive, got {dt_target}"
            )));
        }
        let steps = ((t_max - t_min) / dt_target * (1.0 - 1e-12)).ceil();
        if steps > (1u64 << 40) as f64 {
            return Err(Error::InvalidArgument(format!(
                "grid of {steps} points requested"
            )));
        }
        let n = (steps as usize).max(8).next_power_of_two();
        TimeGrid::new(t_min, dt_target, n)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exclusive end of the periodic span, `t_min + n * dt`.
    pub fn t_end(&self) -> f64 {
        self.t_min + self.n as f64 * self.dt
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.t_min + k as f64 * self.dt
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.point(k))
    }

    pub fn axis(&self) -> Axis {
        Axis {
            start: self.t_min,
            step: self.dt,
            len: self.n,
        }
    }

    /// Fourier-paired frequency grid, centred on zero.
    pub fn freq_grid(&self) -> FreqGrid {
        let d_omega = 2.0 * PI / (self.n as f64 * self.dt);
        FreqGrid {
            omega_min: -((self.n / 2) as f64) * d_omega,
            d_omega,
            n: self.n,
        }
    }

    /// Same origin and spacing, span extended to reach `t_max`.
    pub fn extended_to(&self, t_max: f64) -> Result<TimeGrid> {
        if t_max <= self.t_end() {
            return Ok(*self);
        }
        TimeGrid::covering(self.t_min, t_max, self.dt)
    }

    /// Angular frequency of DFT bin `k` in the standard (unshifted) order.
    #[inline]
    pub fn bin_frequency(&self, k: usize) -> f64 {
        let d_omega = 2.0 * PI / (self.n as f64 * self.dt);
        if k < self.n / 2 {
            k as f64 * d_omega
        } else {
            (k as f64 - self.n as f64) * d_omega
        }
    }
}

/// Centred angular-frequency lattice paired with a [`TimeGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    pub omega_min: f64,
    pub d_omega: f64,
    pub n: usize,
}

impl FreqGrid {
    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.omega_min + k as f64 * self.d_omega
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.point(k))
    }

    pub fn axis(&self) -> Axis {
        Axis {
            start: self.omega_min,
            step: self.d_omega,
            len: self.n,
        }
    }

    pub fn is_paired_with(&self, grid: &TimeGrid) -> bool {
        self.n == grid.len() && (self.d_omega * grid.dt() * self.n as f64 - 2.0 * PI).abs() < 1e-12
    }
}

/// Complex samples on a time or frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<G> {
    grid: G,
    values: Vec<Complex64>,
}

pub type TimeSignal = Signal<TimeGrid>;
pub type Spectrum = Signal<FreqGrid>;

impl<G> Signal<G> {
    pub fn grid(&self) -> &G {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

fn check_signal(len: usize, values: &[Complex64]) -> Result<()> {
    if values.len() != len {
        return Err(Error::GridMismatch(format!(
            "{} samples for a grid of {len} points",
            values.len()
        )));
    }
    if values
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::InvalidArgument(
            "signal has non-finite samples".into(),
        ));
    }
    Ok(())
}

impl TimeSignal {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        check_signal(grid.len(), &values)?;
        Ok(Signal { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values)
    }

    /// `∫ |f|² dt` as a rectangle sum, the periodic-grid quadrature.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dt()
    }
}

impl Spectrum {
    pub fn new(grid: FreqGrid, values: Vec<Complex64>) -> Result<Self> {
        check_signal(grid.n, &values)?;
        Ok(Signal { grid, values })
    }

    /// `(1/2π) ∫ |F|² dw`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.d_omega / (2.0 * PI)
    }
}

pub(crate) fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Discretized `F(w) = ∫ f(t) exp(-i w t) dt` onto the centred frequency
/// grid paired with the signal's time grid.
pub fn fourier_forward(signal: &TimeSignal) -> Spectrum {
    let grid = signal.grid;
    let freq = grid.freq_grid();
    let n = grid.len();
    let mut buf: Vec<Complex64> = signal
        .values
        .iter()
        .enumerate()
        .map(|(m, &z)| if m % 2 == 0 { z } else { -z })
        .collect();
    plan(n, false).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let omega = freq.point(k);
        *z *= Complex64::from_polar(grid.dt(), -omega * grid.t_min());
    }
    Signal {
        grid: freq,
        values: buf,
    }
}

/// Discretized `f(t) = (1/2π) ∫ F(w) exp(+i w t) dw` back onto `grid`.
pub fn fourier_inverse(spectrum: &Spectrum, grid: &TimeGrid) -> Result<TimeSignal> {
    let freq = spectrum.grid;
    if !freq.is_paired_with(grid) {
        return Err(Error::GridMismatch(
            "frequency grid is not the Fourier pair of the target time grid".into(),
        ));
    }
    let n = grid.len();
    let mut buf: Vec<Complex64> = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(k, &z)| z * Complex64::from_polar(1.0, freq.point(k) * grid.t_min()))
        .collect();
    plan(n, true).process(&mut buf);
    let scale = freq.d_omega / (2.0 * PI);
    for (m, z) in buf.iter_mut().enumerate() {
        *z *= if m % 2 == 0 { scale } else { -scale };
    }
    Ok(Signal {
        grid: *grid,
        values: buf,
    })
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] => 0.0,
        [_] => 0.0,
        [first, .., last] => (values.iter().sum::<f64>() - 0.5 * (first + last)) * step,
    }
}

/// Nonnegative real density on a uniform axis, normalized to unit
/// trapezoidal integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    axis: Axis,
    values: Vec<f64>,
}

impl Density1D {
    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.axis.step)
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .axis
            .points()
            .zip(&self.values)
            .map(|(t, p)| t * p)
            .collect();
        trapezoid(&weighted, self.axis.step)
    }

    /// Standard deviation about the mean.
    pub fn rms(&self) -> f64 {
        self.central_moment(2).max(0.0).sqrt()
    }

    /// `∫ (t - mean)^k p dt`.
    pub fn central_moment(&self, k: i32) -> f64 {
        let mean = self.mean();
        let weighted: Vec<f64> = self
            .axis
            .points()
            .zip(&self.values)
            .map(|(t, p)| (t - mean).powi(k) * p)
            .collect();
        trapezoid(&weighted, self.axis.step)
    }

    /// Cumulative distribution at every lattice point (trapezoidal).
    pub fn cdf(&self) -> Vec<f64> {
        let h = self.axis.step;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * h;
            out.push(acc);
        }
        out
    }
}

/// Clip roundoff-level negatives and scale to unit trapezoidal integral.
pub fn normalize_density(mut values: Vec<f64>, axis: Axis) -> Result<Density1D> {
    if values.len() != axis.len {
        return Err(Error::GridMismatch(format!(
            "{} values for an axis of {} points",
            values.len(),
            axis.len
        )));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::DegenerateDensity("non-finite value".into()));
        }
        if *v < 0.0 {
            if *v < -1e-12 * scale.max(1.0) {
                return Err(Error::DegenerateDensity(format!(
                    "negative mass {v:e} in density"
                )));
            }
            *v = 0.0;
        }
    }
    let total = trapezoid(&values, axis.step);
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateDensity("density has zero mass".into()));
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(Density1D { axis, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_exact_power_of_two() {
        let g = TimeGrid::covering(0.0, 8.0, 1.0).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.dt(), 1.0);
    }

    #[test]
    fn covering_extends_span() {
        let g = TimeGrid::covering(0.0, 10.0, 1.0).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.dt(), 1.0);
        assert_eq!(g.t_end(), 16.0);
    }

    #[test]
    fn covering_rejects_bad_input() {
        assert!(TimeGrid::covering(0.0, -1.0, 1.0).is_err());
        assert!(TimeGrid::covering(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::covering(0.0, f64::NAN, 1.0).is_err());
        assert!(TimeGrid::covering(f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(0.0, 1.0, 12).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 4).is_err());
        let g = TimeGrid::new(-3.0, 0.5, 16).unwrap();
        assert_eq!(g.point(4), -1.0);
        assert!(g.freq_grid().is_paired_with(&g));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let g = TimeGrid::new(-8.0, 1.0, 16).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[8] = Complex64::new(1.0, 0.0);
        let s = fourier_forward(&TimeSignal::new(g, v).unwrap());
        for z in s.values() {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn normalize_examples() {
        let axis = Axis::new(0.0, 1.0, 3).unwrap();
        let d = normalize_density(vec![0.0, 1.0, 0.0], axis).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-15);
        let axis4 = Axis::new(0.0, 1.0, 4).unwrap();
        let u = normalize_density(vec![1.0; 4], axis4).unwrap();
        assert!(u.values().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(
            normalize_density(vec![0.0; 3], axis),
            Err(Error::DegenerateDensity(_))
        ));
        assert!(normalize_density(vec![1.0, -0.5, 1.0], axis).is_err());
        let clipped = normalize_density(vec![1.0, -1e-14, 1.0], axis).unwrap();
        assert_eq!(clipped.values()[1], 0.0);
    }
}
