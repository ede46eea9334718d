//! The two measurement theories.
//!
//! *Standard*: photon 1 passes the filter, the joint amplitude is filtered
//! along `t1`, and every photon-2 statistic follows from `|psi_T|²` (or from
//! `|psi_T|² + |psi_R|²` when photon 1 is not post-selected).
//!
//! *Collapse*: transmission of photon 1 re-prepares photon 2 with the same
//! energy sharpness, so photon 2 arrives, relative to the trigger, with the
//! same spread as photon 1 and independently of it.
//!
//! Filtering streams over `t2` rows: each row is zero-padded onto the long
//! arm-1 grid, transformed, multiplied by `t(w1)` and `r(w1)`, and
//! transformed back. Only row reductions are kept; full rows are
//! regenerated on demand for sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use rustfft::Fft;

use crate::cavity::{SpectralFilter, MIN_LIFETIMES};
use crate::error::{Error, Result};
use crate::events::{Channel, EventBatch, EventRecord};
use crate::grids::{normalize_density, plan, Axis, Density1D, TimeGrid};
use crate::source::{accumulate_difference, difference_axis, JointAmplitude};
use crate::stats::width_report;

const ROW_CHUNK: usize = 64;

/// Arm-1 tail room used by [`apply_filter_arm1`], in filter lifetimes.
///
/// Filtering is a circular convolution over the arm-1 period `T`, so the
/// cavity tail re-enters the grid with relative amplitude
/// `exp(-T / (2 lifetime))` and interferes with the direct response. At 24
/// lifetimes (plus power-of-two rounding) that is about 1e-6.
pub const DEFAULT_TAIL_LIFETIMES: f64 = 24.0;

/// Source amplitude after photon 1 meets the filter.
///
/// Holds the transmitted and reflected branches implicitly (source rows plus
/// the filter) together with the reductions every backend needs.
pub struct FilteredJoint {
    source: Arc<JointAmplitude>,
    filter: SpectralFilter,
    grid1: TimeGrid,
    transmission: Vec<Complex64>,
    reflection: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    transmitted_rows: Vec<f64>,
    reflected_rows: Vec<f64>,
    transmitted_arm1: Vec<f64>,
    transmitted_difference: Vec<f64>,
    source_spectrum1: Vec<f64>,
    survival: f64,
    reflected: f64,
}

impl fmt::Debug for FilteredJoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilteredJoint")
            .field("filter", &self.filter)
            .field("grid1", &self.grid1)
            .field("grid2", self.source.grid2())
            .field("survival", &self.survival)
            .field("reflected", &self.reflected)
            .finish()
    }
}

struct Partial {
    rows_t: Vec<f64>,
    rows_r: Vec<f64>,
    arm1: Vec<f64>,
    difference: Vec<f64>,
    spectrum: Vec<f64>,
}

/// Filter arm 1 onto a grid extended by [`DEFAULT_TAIL_LIFETIMES`] filter
/// lifetimes past the end of the source grid.
pub fn apply_filter_arm1(
    amp: Arc<JointAmplitude>,
    filter: &SpectralFilter,
) -> Result<FilteredJoint> {
    apply_filter_arm1_with_tail(amp, filter, DEFAULT_TAIL_LIFETIMES)
}

/// As [`apply_filter_arm1`] with an explicit tail length (at least
/// [`MIN_LIFETIMES`]).
pub fn apply_filter_arm1_with_tail(
    amp: Arc<JointAmplitude>,
    filter: &SpectralFilter,
    tail_lifetimes: f64,
) -> Result<FilteredJoint> {
    let g = amp.grid1();
    let needed = g.point(g.len() - 1) + tail_lifetimes.max(MIN_LIFETIMES) * filter.lifetime();
    let out = g.extended_to(needed)?;
    apply_filter_arm1_on(amp, filter, out)
}

/// Filter arm 1 onto an explicit output grid, which must share the source
/// arm-1 origin and step and leave room for the cavity tail.
pub fn apply_filter_arm1_on(
    amp: Arc<JointAmplitude>,
    filter: &SpectralFilter,
    grid1: TimeGrid,
) -> Result<FilteredJoint> {
    let src = *amp.grid1();
    if (grid1.t_min() - src.t_min()).abs() > 1e-9 * src.dt()
        || (grid1.dt() - src.dt()).abs() > 1e-12 * src.dt()
    {
        return Err(Error::GridMismatch(
            "filter output grid must share the source arm-1 origin and step".into(),
        ));
    }
    let needed = src.point(src.len() - 1) + MIN_LIFETIMES * filter.lifetime();
    if grid1.len() < src.len() || grid1.t_end() < needed {
        return Err(Error::Coverage(format!(
            "arm-1 grid ends at {} but the filtered amplitude needs {needed} \
             ({MIN_LIFETIMES} lifetimes of {})",
            grid1.t_end(),
            filter.lifetime()
        )));
    }
    let (transmission, reflection) = filter.on_bins(&grid1);
    let n1 = grid1.len();
    let mut fj = FilteredJoint {
        filter: *filter,
        grid1,
        transmission,
        reflection,
        forward: plan(n1, false),
        inverse: plan(n1, true),
        transmitted_rows: Vec::new(),
        reflected_rows: Vec::new(),
        transmitted_arm1: Vec::new(),
        transmitted_difference: Vec::new(),
        source_spectrum1: Vec::new(),
        survival: 0.0,
        reflected: 0.0,
        source: amp,
    };
    fj.reduce()?;
    Ok(fj)
}

impl FilteredJoint {
    fn reduce(&mut self) -> Result<()> {
        let n2 = self.source.grid2().len();
        let n_chunks = n2.div_ceil(ROW_CHUNK);
        let diff_len = difference_axis(&self.grid1, self.source.grid2())?.len;
        let this = &*self;
        let work = |c: usize| this.reduce_chunk(c, diff_len);
        #[cfg(feature = "parallel")]
        let partials: Vec<Partial> = (0..n_chunks).into_par_iter().map(work).collect();
        #[cfg(not(feature = "parallel"))]
        let partials: Vec<Partial> = (0..n_chunks).map(work).collect();

        let n1 = self.grid1.len();
        let mut arm1 = vec![0.0; n1];
        let mut difference = vec![0.0; diff_len];
        let mut spectrum = vec![0.0; n1];
        let mut rows_t = Vec::with_capacity(n2);
        let mut rows_r = Vec::with_capacity(n2);
        for p in partials {
            add_into(&mut arm1, &p.arm1);
            add_into(&mut difference, &p.difference);
            add_into(&mut spectrum, &p.spectrum);
            rows_t.extend(p.rows_t);
            rows_r.extend(p.rows_r);
        }
        self.survival = rows_t.iter().sum();
        self.reflected = rows_r.iter().sum();
        self.transmitted_rows = rows_t;
        self.reflected_rows = rows_r;
        self.transmitted_arm1 = arm1;
        self.transmitted_difference = difference;
        self.source_spectrum1 = spectrum;
        Ok(())
    }

    fn reduce_chunk(&self, chunk: usize, diff_len: usize) -> Partial {
        let n1 = self.grid1.len();
        let n2 = self.source.grid2().len();
        let area = self.grid1.dt() * self.source.grid2().dt();
        let rows = chunk * ROW_CHUNK..((chunk + 1) * ROW_CHUNK).min(n2);
        let mut p = Partial {
            rows_t: Vec::with_capacity(rows.len()),
            rows_r: Vec::with_capacity(rows.len()),
            arm1: vec![0.0; n1],
            difference: vec![0.0; diff_len],
            spectrum: vec![0.0; n1],
        };
        let mut spec = vec![Complex64::new(0.0, 0.0); n1];
        let mut branch = vec![Complex64::new(0.0, 0.0); n1];
        let mut intensity = vec![0.0; n1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len()];
        for j in rows {
            self.row_spectrum(j, &mut spec, &mut scratch);
            for (acc, z) in p.spectrum.iter_mut().zip(&spec) {
                *acc += z.norm_sqr();
            }

            self.branch(&spec, &self.transmission, &mut branch, &mut scratch);
            for (q, z) in intensity.iter_mut().zip(&branch) {
                *q = z.norm_sqr() * area;
            }
            p.rows_t.push(intensity.iter().sum());
            add_into(&mut p.arm1, &intensity);
            accumulate_difference(&intensity, j, n2, &mut p.difference);

            self.branch(&spec, &self.reflection, &mut branch, &mut scratch);
            p.rows_r
                .push(branch.iter().map(|z| z.norm_sqr()).sum::<f64>() * area);
        }
        p
    }

    fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    fn row_spectrum(&self, j: usize, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let row = self.source.row(j);
        buf[..row.len()].copy_from_slice(row);
        buf[row.len()..].fill(Complex64::new(0.0, 0.0));
        self.forward.process_with_scratch(buf, scratch);
    }

    fn branch(
        &self,
        spectrum: &[Complex64],
        transfer: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let scale = (self.grid1.len() as f64).recip();
        for ((o, s), t) in out.iter_mut().zip(spectrum).zip(transfer) {
            *o = s * t * scale;
        }
        self.inverse.process_with_scratch(out, scratch);
    }

    fn row_branch(&self, j: usize, transfer: &[Complex64]) -> Vec<Complex64> {
        let n1 = self.grid1.len();
        let mut spec = vec![Complex64::new(0.0, 0.0); n1];
        let mut out = vec![Complex64::new(0.0, 0.0); n1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len()];
        self.row_spectrum(j, &mut spec, &mut scratch);
        self.branch(&spec, transfer, &mut out, &mut scratch);
        out
    }

    /// `psi_T(., t2_j)` on the arm-1 output grid.
    pub fn transmitted_row(&self, j: usize) -> Vec<Complex64> {
        self.row_branch(j, &self.transmission)
    }

    /// `psi_R(., t2_j)` on the arm-1 output grid.
    pub fn reflected_row(&self, j: usize) -> Vec<Complex64> {
        self.row_branch(j, &self.reflection)
    }

    /// Both branches as explicit (unnormalized) joint amplitudes. Memory is
    /// `2 * n1 * n2` complex values; meant for small grids.
    pub fn materialize(&self) -> Result<(JointAmplitude, JointAmplitude)> {
        let g2 = *self.source.grid2();
        let (mut t, mut r) = (Vec::new(), Vec::new());
        for j in 0..g2.len() {
            t.extend(self.transmitted_row(j));
            r.extend(self.reflected_row(j));
        }
        Ok((
            JointAmplitude::from_values(self.grid1, g2, t)?,
            JointAmplitude::from_values(self.grid1, g2, r)?,
        ))
    }

    pub fn source(&self) -> &JointAmplitude {
        &self.source
    }

    pub fn filter(&self) -> &SpectralFilter {
        &self.filter
    }

    pub fn grid1(&self) -> &TimeGrid {
        &self.grid1
    }

    pub fn grid2(&self) -> &TimeGrid {
        self.source.grid2()
    }

    /// `∬ |psi_T|²`.
    pub fn survival(&self) -> f64 {
        self.survival
    }

    /// `∬ |psi_R|²`.
    pub fn reflected(&self) -> f64 {
        self.reflected
    }

    /// Per-row transmitted weights `∫ |psi_T(t1, t2_j)|² dt1 dt2`.
    pub fn transmitted_rows(&self) -> &[f64] {
        &self.transmitted_rows
    }

    pub fn reflected_rows(&self) -> &[f64] {
        &self.reflected_rows
    }

    /// Photon-1 arrival density given transmission.
    pub fn transmitted_arm1_density(&self) -> Result<Density1D> {
        normalize_density(self.transmitted_arm1.clone(), self.grid1.axis())
    }

    /// Photon-2 arrival density when photon 1 is not post-selected.
    pub fn unconditional_arm2_density(&self) -> Result<Density1D> {
        let total: Vec<f64> = self
            .transmitted_rows
            .iter()
            .zip(&self.reflected_rows)
            .map(|(t, r)| t + r)
            .collect();
        normalize_density(total, self.source.grid2().axis())
    }

    /// Photon-1 spectral density given transmission,
    /// `|t(w1)|² ∫ |psi~(w1, w2)|² dw2`, on a frequency lattice fine enough
    /// to resolve the filter linewidth.
    ///
    /// The source part is smooth on the scale of the source bandwidth and
    /// is linearly interpolated from the row spectra; `|t|²` is evaluated
    /// exactly on the fine lattice.
    pub fn conditional_spectrum(&self) -> Result<Density1D> {
        let n = self.grid1.len();
        let coarse = self.grid1.freq_grid();
        let mut centred = vec![0.0; n];
        for (k, &v) in self.source_spectrum1.iter().enumerate() {
            centred[(k + n / 2) % n] = v;
        }
        let peak = centred.iter().cloned().fold(0.0, f64::max);
        if peak.is_nan() || peak <= 0.0 {
            return Err(Error::DegenerateDensity("source spectrum is empty".into()));
        }
        let first = centred.iter().position(|&v| v > 1e-10 * peak).unwrap();
        let last = centred.iter().rposition(|&v| v > 1e-10 * peak).unwrap();
        let lo = coarse.point(first.saturating_sub(1));
        let hi = coarse.point((last + 1).min(n - 1));

        let mut step = (self.filter.linewidth() / 20.0).min(coarse.d_omega);
        let max_points = 1usize << 21;
        if ((hi - lo) / step) as usize + 1 > max_points {
            step = (hi - lo) / (max_points - 1) as f64;
        }
        let len = ((hi - lo) / step) as usize + 1;
        let axis = Axis::new(lo, step, len)?;
        let values = axis
            .points()
            .map(|w| {
                let x = (w - coarse.omega_min) / coarse.d_omega;
                let k = (x.floor() as usize).min(n - 2);
                let frac = x - k as f64;
                let src = centred[k] * (1.0 - frac) + centred[k + 1] * frac;
                self.filter.intensity_transmission(w) * src
            })
            .collect();
        normalize_density(values, axis)
    }
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// Spectral FWHM of photon 1 given transmission times its temporal RMS
/// (hbar = 1).
pub fn uncertainty_product(filtered: &FilteredJoint) -> Result<f64> {
    let spectrum = width_report(&filtered.conditional_spectrum()?);
    let p1 = filtered.transmitted_arm1_density()?;
    Ok(spectrum.fwhm * p1.rms())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Standard,
    Collapse,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Standard => "standard",
            Backend::Collapse => "collapse",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inverse-CDF sampler over piecewise-constant cells centred on lattice
/// points, with uniform jitter inside the chosen cell.
#[derive(Debug, Clone)]
pub struct CellSampler {
    axis: Axis,
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(weights: &[f64], axis: Axis) -> Result<Self> {
        if weights.len() != axis.len {
            return Err(Error::GridMismatch("sampler weights vs axis".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        if acc.is_nan() || acc <= 0.0 {
            return Err(Error::DegenerateDensity(
                "sampler weights sum to zero".into(),
            ));
        }
        Ok(CellSampler { axis, cumulative })
    }

    pub fn from_density(density: &Density1D) -> Result<Self> {
        Self::new(density.values(), *density.axis())
    }

    #[inline]
    pub fn index(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }

    #[inline]
    pub fn position(&self, index: usize, jitter: f64) -> f64 {
        self.axis.point(index) + (jitter - 0.5) * self.axis.step
    }

    #[inline]
    pub fn sample(&self, u: f64, jitter: f64) -> f64 {
        self.position(self.index(u), jitter)
    }
}

/// Draws `(t1, t2)` pairs for one backend from four uniforms each.
#[derive(Debug, Clone)]
pub enum JointSampler {
    /// `t2` from the transmitted row weights, then `t1` from the chosen
    /// row's `|psi_T|²`.
    Conditional {
        filtered: Arc<FilteredJoint>,
        rows: CellSampler,
    },
    /// `t1` and `t2` drawn independently.
    Independent {
        arm1: CellSampler,
        arm2: CellSampler,
    },
}

impl JointSampler {
    /// Deterministic in `draws`: rows needed by the conditional sampler are
    /// computed once per distinct row, in parallel when enabled, and results
    /// are returned in input order.
    pub fn sample_batch(&self, draws: &[[f64; 4]]) -> Vec<(f64, f64)> {
        match self {
            JointSampler::Independent { arm1, arm2 } => draws
                .iter()
                .map(|u| (arm1.sample(u[2], u[3]), arm2.sample(u[0], u[1])))
                .collect(),
            JointSampler::Conditional { filtered, rows } => {
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (k, u) in draws.iter().enumerate() {
                    groups.entry(rows.index(u[0])).or_default().push(k);
                }
                let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
                let axis1 = filtered.grid1().axis();
                let per_row = |(j, members): &(usize, Vec<usize>)| {
                    let weights: Vec<f64> = filtered
                        .transmitted_row(*j)
                        .iter()
                        .map(|z| z.norm_sqr())
                        .collect();
                    let row = CellSampler::new(&weights, axis1)
                        .expect("row with positive transmitted weight");
                    members
                        .iter()
                        .map(|&k| {
                            let u = draws[k];
                            (k, row.sample(u[2], u[3]), rows.position(*j, u[1]))
                        })
                        .collect::<Vec<_>>()
                };
                #[cfg(feature = "parallel")]
                let done: Vec<Vec<(usize, f64, f64)>> = groups.par_iter().map(per_row).collect();
                #[cfg(not(feature = "parallel"))]
                let done: Vec<Vec<(usize, f64, f64)>> = groups.iter().map(per_row).collect();
                let mut out = vec![(0.0, 0.0); draws.len()];
                for (k, t1, t2) in done.into_iter().flatten() {
                    out[k] = (t1, t2);
                }
                out
            }
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let draws: Vec<[f64; 4]> = (0..n).map(|_| rng.gen()).collect();
        self.sample_batch(&draws)
    }
}

/// Arrival-time predictions of one backend.
#[derive(Debug, Clone)]
pub struct BackendResult {
    pub backend: Backend,
    /// Photon-1 arrival given transmission.
    pub p1: Density1D,
    /// Photon-2 arrival given coincidence.
    pub p2: Density1D,
    pub p2_unconditional: Density1D,
    /// `t1 - t2` given coincidence.
    pub difference: Density1D,
    pub survival: f64,
    pub sampler: JointSampler,
}

const MIN_SURVIVAL: f64 = 1e-12;

fn check_survival(filtered: &FilteredJoint) -> Result<()> {
    if filtered.survival < MIN_SURVIVAL {
        return Err(Error::VanishingCoincidence(filtered.survival));
    }
    Ok(())
}

/// Joint-amplitude quantum mechanics without state reduction at a
/// distance.
pub fn standard_backend(filtered: &Arc<FilteredJoint>) -> Result<BackendResult> {
    check_survival(filtered)?;
    let p1 = filtered.transmitted_arm1_density()?;
    let p2 = normalize_density(filtered.transmitted_rows.clone(), filtered.grid2().axis())?;
    let difference = normalize_density(
        filtered.transmitted_difference.clone(),
        difference_axis(&filtered.grid1, filtered.grid2())?,
    )?;
    let rows = CellSampler::new(&filtered.transmitted_rows, filtered.grid2().axis())?;
    Ok(BackendResult {
        backend: Backend::Standard,
        p1,
        p2,
        p2_unconditional: filtered.unconditional_arm2_density()?,
        difference,
        survival: filtered.survival,
        sampler: JointSampler::Conditional {
            filtered: Arc::clone(filtered),
            rows,
        },
    })
}

/// Nonlocal collapse: photon 2 copies photon 1's arrival spread, registered
/// to the trigger with no relative delay, drawn independently of photon 1.
pub fn collapse_backend(filtered: &FilteredJoint) -> Result<BackendResult> {
    check_survival(filtered)?;
    let p1 = filtered.transmitted_arm1_density()?;
    let difference = independent_difference(&p1)?;
    let arm = CellSampler::from_density(&p1)?;
    Ok(BackendResult {
        backend: Backend::Collapse,
        p2: p1.clone(),
        p2_unconditional: p1.clone(),
        p1,
        difference,
        survival: filtered.survival,
        sampler: JointSampler::Independent {
            arm1: arm.clone(),
            arm2: arm,
        },
    })
}

/// Density of `t1 - t2` for independent `t1, t2` both distributed as `p`.
fn independent_difference(p: &Density1D) -> Result<Density1D> {
    let n = p.values().len();
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = p
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(m)
        .collect();
    plan(m, false).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    plan(m, true).process(&mut buf);
    let step = p.axis().step;
    let values: Vec<f64> = (0..2 * n - 1)
        .map(|k| {
            let lag = k as isize - (n as isize - 1);
            let idx = if lag >= 0 {
                lag as usize
            } else {
                (m as isize + lag) as usize
            };
            buf[idx].re / m as f64 * step
        })
        .collect();
    let axis = Axis::new(-((n - 1) as f64) * step, step, 2 * n - 1)?;
    normalize_density(values, axis)
}

/// Monte Carlo detection records for `n_triggers` gate windows.
///
/// Per trigger, in order: a channel-0 record at time 0; one uniform decides
/// whether a pair is emitted; one more decides whether photon 1 is
/// transmitted (probability = survival); a transmitted pair consumes four
/// uniforms for `(t1, t2)` and yields channel-1 and channel-2 records. A
/// single ChaCha8 stream drives everything, so the batch is a pure function
/// of its inputs. The key is derived from `seed` with `seed_from_u64` and
/// each backend reads its own stream number (standard 0, collapse 1), so the
/// two backends never share random numbers for one seed.
pub fn sample_events(
    result: &BackendResult,
    n_triggers: u64,
    pair_probability: f64,
    seed: u64,
) -> EventBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(result.backend as u64);
    let mut coincident: Vec<u64> = Vec::new();
    let mut draws: Vec<[f64; 4]> = Vec::new();
    for trigger in 0..n_triggers {
        if rng.gen::<f64>() < pair_probability && rng.gen::<f64>() < result.survival {
            coincident.push(trigger);
            draws.push(rng.gen());
        }
    }
    let times = result.sampler.sample_batch(&draws);

    let mut records = Vec::with_capacity(n_triggers as usize + 2 * coincident.len());
    let mut next = coincident.iter().zip(&times).peekable();
    for trigger in 0..n_triggers {
        records.push(EventRecord {
            trigger_id: trigger,
            channel: Channel::Trigger,
            time: 0.0,
        });
        if let Some((_, &(t1, t2))) = next.next_if(|(&id, _)| id == trigger) {
            records.push(EventRecord {
                trigger_id: trigger,
                channel: Channel::Detector1,
                time: t1,
            });
            records.push(EventRecord {
                trigger_id: trigger,
                channel: Channel::Detector2,
                time: t2,
            });
        }
    }
    EventBatch::new(records).expect("records are generated in trigger order")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::{airy_response, lorentzian_response};
    use crate::source::{
        joint_temporal_amplitude, marginal_density, source_grid, Arm, SourceParams,
    };
    use crate::stats::l1_distance;

    // tau_s : tau_g : tau_FP = 1 : 10 : 100, small enough for unit tests
    fn small(kappa: f64) -> (Arc<JointAmplitude>, Arc<FilteredJoint>) {
        let p = SourceParams::new(1.0, 10.0, 1.0).unwrap();
        let g = source_grid(&p, 6.0, 0.25).unwrap();
        let amp = Arc::new(joint_temporal_amplitude(&p, &g, &g).unwrap());
        let f = lorentzian_response(kappa, 0.0).unwrap();
        let fj = Arc::new(apply_filter_arm1(Arc::clone(&amp), &f).unwrap());
        (amp, fj)
    }

    #[test]
    fn broad_filter_is_identity() {
        let (amp, fj) = small(1e4);
        assert!((fj.survival() - 1.0).abs() < 1e-3);
        let row = fj.transmitted_row(amp.grid2().len() / 2);
        let src = amp.row(amp.grid2().len() / 2);
        let worst = src
            .iter()
            .zip(&row)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let peak = src.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-3 * peak, "{worst} vs {peak}");
    }

    #[test]
    fn norms_add_to_one_for_both_models() {
        let (amp, fj) = small(0.01);
        assert!((fj.survival() + fj.reflected() - 1.0).abs() < 1e-9);
        let airy = airy_response(0.98, 3.0, 0.2).unwrap();
        let fa = apply_filter_arm1(amp, &airy).unwrap();
        assert!((fa.survival() + fa.reflected() - 1.0).abs() < 1e-9);
        assert!(fa.survival() > 0.0 && fa.survival() < 1.0);
    }

    #[test]
    fn materialized_rows_match_reductions() {
        let (_, fj) = small(0.01);
        let (t, r) = fj.materialize().unwrap();
        let dt = fj.grid1().dt() * fj.grid2().dt();
        assert!((t.norm_sqr() - fj.survival()).abs() < 1e-12);
        assert!((r.norm_sqr() - fj.reflected()).abs() < 1e-10);
        let j = fj.grid2().len() / 2 + 3;
        let direct: f64 = t.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
        assert!((direct - fj.transmitted_rows()[j]).abs() < 1e-12);
    }

    #[test]
    fn short_output_grid_is_a_coverage_error() {
        let (amp, _) = small(0.01);
        let f = lorentzian_response(0.01, 0.0).unwrap();
        let g = *amp.grid1();
        assert!(matches!(
            apply_filter_arm1_on(Arc::clone(&amp), &f, g),
            Err(Error::Coverage(_))
        ));
        let shifted = TimeGrid::new(g.t_min() + 0.1, g.dt(), 4 * g.len()).unwrap();
        assert!(matches!(
            apply_filter_arm1_on(amp, &f, shifted),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn standard_backend_keeps_photon_two_and_no_signaling() {
        let (amp, fj) = small(0.01);
        let std = standard_backend(&fj).unwrap();
        let pre = marginal_density(&amp, Arm::Two).unwrap();
        assert!(l1_distance(&pre, &std.p2_unconditional).unwrap() < 1e-10);
        // photon 2 stays gate-limited, photon 1 spreads to the cavity time
        assert!((std.p2.rms() / 10.0 - 1.0).abs() < 0.05);
        assert!(std.p1.rms() > 5.0 * std.p2.rms());
        for d in [&std.p1, &std.p2, &std.p2_unconditional, &std.difference] {
            assert!((d.integral() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn collapse_backend_copies_photon_one() {
        let (_, fj) = small(0.01);
        let std = standard_backend(&fj).unwrap();
        let col = collapse_backend(&fj).unwrap();
        assert_eq!(col.p1.values(), std.p1.values());
        assert_eq!(col.p2.values(), col.p1.values());
        assert!(col.p2.rms() / std.p2.rms() > 5.0);
        // independent draws: Var(t1 - t2) = 2 Var(p1)
        let expect = std::f64::consts::SQRT_2 * col.p1.rms();
        assert!((col.difference.rms() / expect - 1.0).abs() < 1e-6);
    }

    #[test]
    fn collapse_draws_are_uncorrelated() {
        let (_, fj) = small(0.01);
        let col = collapse_backend(&fj).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = col.sampler.sample(100_000, &mut rng);
        let n = pairs.len() as f64;
        let (m1, m2) = pairs
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
        let (mut c, mut v1, mut v2) = (0.0, 0.0, 0.0);
        for &(a, b) in &pairs {
            c += (a - m1) * (b - m2);
            v1 += (a - m1).powi(2);
            v2 += (b - m2).powi(2);
        }
        assert!((c / (v1 * v2).sqrt()).abs() < 0.01);
    }

    #[test]
    fn broad_filter_backends_agree() {
        let (_, fj) = small(50.0);
        let std = standard_backend(&fj).unwrap();
        let col = collapse_backend(&fj).unwrap();
        assert!((col.p2.rms() / std.p2.rms() - 1.0).abs() < 0.05);
    }

    #[test]
    fn vanishing_coincidence_is_an_error() {
        let p = SourceParams::new(1.0, 10.0, 1.0).unwrap();
        let g = source_grid(&p, 6.0, 0.25).unwrap();
        let amp = Arc::new(joint_temporal_amplitude(&p, &g, &g).unwrap());
        let f = lorentzian_response(0.01, 1e6).unwrap();
        let fj = Arc::new(apply_filter_arm1(amp, &f).unwrap());
        assert!(matches!(
            standard_backend(&fj),
            Err(Error::VanishingCoincidence(_))
        ));
        assert!(matches!(
            collapse_backend(&fj),
            Err(Error::VanishingCoincidence(_))
        ));
    }

    #[test]
    fn spectral_width_follows_the_filter() {
        let (_, fj) = small(0.01);
        let w = width_report(&fj.conditional_spectrum().unwrap());
        assert!((w.fwhm / 0.01 - 1.0).abs() < 0.05, "{}", w.fwhm);
    }

    #[test]
    fn uncertainty_product_is_scale_free() {
        let build = |s: f64| {
            let p = SourceParams::new(s, 10.0 * s, 1.0).unwrap();
            let g = source_grid(&p, 6.0, 0.25 * s).unwrap();
            let amp = Arc::new(joint_temporal_amplitude(&p, &g, &g).unwrap());
            let f = lorentzian_response(0.01 / s, 0.0).unwrap();
            uncertainty_product(&apply_filter_arm1(amp, &f).unwrap()).unwrap()
        };
        let (a, b) = (build(1.0), build(2.0));
        assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn cell_sampler_inverts_the_cdf() {
        let axis = Axis::new(0.0, 1.0, 4).unwrap();
        let s = CellSampler::new(&[1.0, 0.0, 3.0, 0.0], axis).unwrap();
        assert_eq!(s.index(0.0), 0);
        assert_eq!(s.index(0.24), 0);
        assert_eq!(s.index(0.26), 2);
        assert_eq!(s.index(0.999), 2);
        assert!((s.sample(0.1, 0.5) - 0.0).abs() < 1e-12);
        assert!((s.sample(0.5, 0.0) - 1.5).abs() < 1e-12);
        assert!(CellSampler::new(&[0.0; 4], axis).is_err());
    }

    #[test]
    fn events_are_deterministic_and_respect_pair_probability() {
        let (_, fj) = small(0.01);
        let std = standard_backend(&fj).unwrap();
        let none = sample_events(&std, 500, 0.0, 3);
        assert_eq!(none.len(), 500);
        assert!(none.coincidences().is_empty());
        let a = sample_events(&std, 20_000, 1.0, 3);
        let b = sample_events(&std, 20_000, 1.0, 3);
        assert_eq!(a, b);
        let expected = 20_000.0 * std.survival;
        let got = a.coincidences().len() as f64;
        assert!((got - expected).abs() < 5.0 * expected.sqrt());
        assert_ne!(a, sample_events(&std, 20_000, 1.0, 4));
    }
}
