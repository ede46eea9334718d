//! Gated energy-time entangled pair source.
//!
//! The pair amplitude in the time domain is
//!
//! ```text
//! psi(t1, t2) = N g((t1 + t2) / 2) f(t1 - t2)
//! g(v) = exp(-v² / (4 tau_g²)),   f(u) = exp(-u² / (4 tau_s²))
//! ```
//!
//! so `|g|²` has RMS `tau_g` (when the pair is emitted relative to the
//! trigger) and `|f|²` has RMS `tau_s` (how tightly the two arrival times are
//! locked together). In frequency space this is a narrow function of
//! `w1 + w2` times a broad function of `(w1 - w2) / 2`: a finite-width
//! version of perfect energy anticorrelation around the pump frequency.

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grids::{normalize_density, Axis, Density1D, TimeGrid};

/// Minimum gate-to-correlation-time ratio unless overridden.
pub const DEFAULT_HIERARCHY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub tau_s: f64,
    pub tau_g: f64,
    pub pair_probability: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            tau_s: 1.0,
            tau_g: 30.0,
            pair_probability: 1.0,
        }
    }
}

impl SourceParams {
    pub fn new(tau_s: f64, tau_g: f64, pair_probability: f64) -> Result<Self> {
        Self::with_hierarchy(tau_s, tau_g, pair_probability, DEFAULT_HIERARCHY_FACTOR)
    }

    /// Like [`SourceParams::new`] with a custom minimum `tau_g / tau_s`.
    pub fn with_hierarchy(
        tau_s: f64,
        tau_g: f64,
        pair_probability: f64,
        factor: f64,
    ) -> Result<Self> {
        if !(tau_s > 0.0 && tau_s.is_finite() && tau_g > 0.0 && tau_g.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "source times must be positive and finite (tau_s={tau_s}, tau_g={tau_g})"
            )));
        }
        if tau_g < factor * tau_s {
            return Err(Error::InvalidArgument(format!(
                "gate window tau_g={tau_g} must be at least {factor} x tau_s={tau_s}"
            )));
        }
        if !(pair_probability > 0.0 && pair_probability <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pair probability must lie in (0, 1], got {pair_probability}"
            )));
        }
        Ok(SourceParams {
            tau_s,
            tau_g,
            pair_probability,
        })
    }

    /// Pair-generation-time envelope `g(v)`.
    #[inline]
    pub fn gate_envelope(&self, v: f64) -> f64 {
        (-v * v / (4.0 * self.tau_g * self.tau_g)).exp()
    }

    /// Relative-time envelope `f(u)`.
    #[inline]
    pub fn pair_envelope(&self, u: f64) -> f64 {
        (-u * u / (4.0 * self.tau_s * self.tau_s)).exp()
    }

    /// Unnormalized `g((t1 + t2)/2) f(t1 - t2)`.
    #[inline]
    pub fn envelope(&self, t1: f64, t2: f64) -> f64 {
        let v = 0.5 * (t1 + t2);
        let u = t1 - t2;
        (-v * v / (4.0 * self.tau_g * self.tau_g) - u * u / (4.0 * self.tau_s * self.tau_s)).exp()
    }

    /// RMS of either single-arm arrival time before filtering,
    /// `sqrt(tau_g² + tau_s²/4)`.
    pub fn marginal_rms(&self) -> f64 {
        (self.tau_g * self.tau_g + 0.25 * self.tau_s * self.tau_s).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    One,
    Two,
}

/// Complex two-photon temporal amplitude on a rectangular grid.
///
/// Storage is row-major with one row per arm-2 sample: `values[j * n1 + i]`
/// is `psi(t1_i, t2_j)`. Rows are the unit of work for filtering arm 1.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAmplitude {
    grid1: TimeGrid,
    grid2: TimeGrid,
    values: Vec<Complex64>,
}

impl JointAmplitude {
    pub fn from_values(grid1: TimeGrid, grid2: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid1.len() * grid2.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid1.len(),
                grid2.len()
            )));
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidArgument("non-finite joint amplitude".into()));
        }
        Ok(JointAmplitude {
            grid1,
            grid2,
            values,
        })
    }

    pub fn grid1(&self) -> &TimeGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &TimeGrid {
        &self.grid2
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.grid1.len() + i]
    }

    /// Amplitude along arm 1 at fixed `t2 = grid2.point(j)`.
    pub fn row(&self, j: usize) -> &[Complex64] {
        let n1 = self.grid1.len();
        &self.values[j * n1..(j + 1) * n1]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.values.chunks_exact(self.grid1.len())
    }

    /// `∬ |psi|² dt1 dt2` (rectangle rule, the periodic-grid quadrature).
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid1.dt() * self.grid2.dt()
    }
}

fn check_coverage(grid: &TimeGrid, half_width: f64, arm: &str) -> Result<()> {
    let last = grid.point(grid.len() - 1);
    if grid.t_min() > -half_width || last < half_width {
        return Err(Error::Coverage(format!(
            "arm-{arm} grid [{}, {last}] does not cover ±{half_width}",
            grid.t_min()
        )));
    }
    Ok(())
}

/// Sample the normalized pair amplitude on `grid1 x grid2`.
///
/// Each grid must span at least five gate widths on either side of the
/// trigger.
pub fn joint_temporal_amplitude(
    params: &SourceParams,
    grid1: &TimeGrid,
    grid2: &TimeGrid,
) -> Result<JointAmplitude> {
    let reach = 5.0 * params.tau_g;
    check_coverage(grid1, reach, "1")?;
    check_coverage(grid2, reach, "2")?;

    let n1 = grid1.len();
    let mut values = vec![Complex64::new(0.0, 0.0); n1 * grid2.len()];
    let fill = |(j, row): (usize, &mut [Complex64])| {
        let t2 = grid2.point(j);
        for (i, z) in row.iter_mut().enumerate() {
            z.re = params.envelope(grid1.point(i), t2);
        }
    };
    #[cfg(feature = "parallel")]
    values.par_chunks_mut(n1).enumerate().for_each(fill);
    #[cfg(not(feature = "parallel"))]
    values.chunks_mut(n1).enumerate().for_each(fill);

    let mut amp = JointAmplitude {
        grid1: *grid1,
        grid2: *grid2,
        values,
    };
    let scale = amp.norm_sqr().sqrt().recip();
    amp.values.iter_mut().for_each(|z| *z *= scale);
    Ok(amp)
}

/// Arrival-time density of one arm, `∫ |psi|² d(other arm)`, normalized.
pub fn marginal_density(amp: &JointAmplitude, arm: Arm) -> Result<Density1D> {
    let values: Vec<f64> = match arm {
        Arm::One => {
            let mut acc = vec![0.0; amp.grid1.len()];
            for row in amp.rows() {
                for (a, z) in acc.iter_mut().zip(row) {
                    *a += z.norm_sqr();
                }
            }
            acc
        }
        Arm::Two => amp
            .rows()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    };
    let axis = match arm {
        Arm::One => amp.grid1.axis(),
        Arm::Two => amp.grid2.axis(),
    };
    normalize_density(values, axis)
}

/// Axis of `u = t1 - t2` for two grids sharing a step.
pub(crate) fn difference_axis(grid1: &TimeGrid, grid2: &TimeGrid) -> Result<Axis> {
    let dt = grid1.dt();
    if (grid2.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::GridMismatch(format!(
            "difference density needs equal steps, got {dt} and {}",
            grid2.dt()
        )));
    }
    let n2 = grid2.len();
    Axis::new(
        grid1.t_min() - grid2.t_min() - (n2 - 1) as f64 * dt,
        dt,
        grid1.len() + n2 - 1,
    )
}

/// Add row `j` (fixed `t2`) of an intensity array into the diagonal sums
/// indexed along [`difference_axis`].
#[inline]
pub(crate) fn accumulate_difference(row: &[f64], j: usize, n2: usize, out: &mut [f64]) {
    let offset = n2 - 1 - j;
    for (a, &p) in out[offset..offset + row.len()].iter_mut().zip(row) {
        *a += p;
    }
}

/// Density of the arrival-time difference `t1 - t2`, integrating `|psi|²`
/// along the grid diagonals.
pub fn difference_time_density(amp: &JointAmplitude) -> Result<Density1D> {
    let axis = difference_axis(&amp.grid1, &amp.grid2)?;
    let n2 = amp.grid2.len();
    let mut acc = vec![0.0; axis.len];
    let mut intensity = vec![0.0; amp.grid1.len()];
    for (j, row) in amp.rows().enumerate() {
        for (p, z) in intensity.iter_mut().zip(row) {
            *p = z.norm_sqr();
        }
        accumulate_difference(&intensity, j, n2, &mut acc);
    }
    normalize_density(acc, axis)
}

/// Grid for either arm before filtering: at least `±span_gates * tau_g` at
/// step `dt`, centred on the trigger after power-of-two rounding.
pub fn source_grid(params: &SourceParams, span_gates: f64, dt: f64) -> Result<TimeGrid> {
    let half = span_gates * params.tau_g;
    let g = TimeGrid::covering(-half, half, dt)?;
    TimeGrid::new(-0.5 * g.len() as f64 * dt, dt, g.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (SourceParams, TimeGrid) {
        let p = SourceParams::new(1.0, 10.0, 1.0).unwrap();
        let g = source_grid(&p, 6.0, 0.25).unwrap();
        (p, g)
    }

    #[test]
    fn params_validation() {
        assert!(SourceParams::new(1.0, 5.0, 1.0).is_err());
        assert!(SourceParams::new(1.0, 30.0, 0.0).is_err());
        assert!(SourceParams::new(1.0, 30.0, 1.5).is_err());
        assert!(SourceParams::with_hierarchy(1.0, 5.0, 1.0, 2.0).is_ok());
    }

    #[test]
    fn normalized_and_symmetric() {
        let (p, g) = small();
        let amp = joint_temporal_amplitude(&p, &g, &g).unwrap();
        assert!((amp.norm_sqr() - 1.0).abs() < 1e-9);
        let m1 = marginal_density(&amp, Arm::One).unwrap();
        let m2 = marginal_density(&amp, Arm::Two).unwrap();
        for (a, b) in m1.values().iter().zip(m2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((m1.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_factors_reconstruct_amplitude() {
        let (p, g) = small();
        let amp = joint_temporal_amplitude(&p, &g, &g).unwrap();
        let c = g.len() / 2;
        let (i0, j0) = (c, c + 10);
        let scale = amp.at(i0, j0).re / p.envelope(g.point(i0), g.point(j0));
        for &(i, j) in &[(c, c), (c - 50, c - 45), (c + 100, c + 90), (c - 7, c + 11)] {
            let v = 0.5 * (g.point(i) + g.point(j));
            let u = g.point(i) - g.point(j);
            let rebuilt = scale * p.gate_envelope(v) * p.pair_envelope(u);
            assert!((amp.at(i, j).re - rebuilt).abs() < 1e-12);
        }
    }

    #[test]
    fn difference_density_peaks_at_zero() {
        let (p, g) = small();
        let amp = joint_temporal_amplitude(&p, &g, &g).unwrap();
        let d = difference_time_density(&amp).unwrap();
        let (k_max, _) =
            d.values().iter().enumerate().fold(
                (0, 0.0),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
        assert!(d.axis().point(k_max).abs() < 1e-9);
        assert!((d.rms() - 1.0).abs() < 0.02);
    }

    #[test]
    fn coverage_and_mismatch_errors() {
        let p = SourceParams::default();
        let narrow = TimeGrid::covering(-50.0, 50.0, 0.5).unwrap();
        assert!(matches!(
            joint_temporal_amplitude(&p, &narrow, &narrow),
            Err(Error::Coverage(_))
        ));
        let (p, g) = small();
        let coarse = TimeGrid::covering(-60.0, 60.0, 0.5).unwrap();
        let amp = joint_temporal_amplitude(&p, &g, &coarse).unwrap();
        assert!(matches!(
            difference_time_density(&amp),
            Err(Error::GridMismatch(_))
        ));
    }
}
