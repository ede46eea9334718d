//! Source, filter, backends, sampling and artifacts for one configuration.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backends::{
    apply_filter_arm1_with_tail, collapse_backend, sample_events, standard_backend,
    uncertainty_product, Backend, BackendResult, FilteredJoint,
};
use crate::error::{Error, Result, ResultExt};
use crate::events::{parse_events, write_events, EventBatch, EventFormat, EventIoError, MAGIC};
use crate::grids::Density1D;
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{DensityWidths, RunReport, SampleSummary};
use crate::source::{
    difference_time_density, joint_temporal_amplitude, marginal_density, source_grid, Arm,
    SourceParams,
};
use crate::stats::{ks_two_sample, l1_distance, sample_widths, width_report};

/// Everything computed from a configuration before sampling.
#[derive(Debug)]
pub struct Experiment {
    pub params: SourceParams,
    pub filtered: Arc<FilteredJoint>,
    /// Pre-filter densities: arm 1, arm 2, `t1 - t2`.
    pub source_t1: Density1D,
    pub source_t2: Density1D,
    pub source_difference: Density1D,
    pub results: Vec<BackendResult>,
}

impl Experiment {
    pub fn result(&self, backend: Backend) -> Option<&BackendResult> {
        self.results.iter().find(|r| r.backend == backend)
    }
}

/// Build the source, filter it, and evaluate the requested backends.
pub fn build_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    let params = config.source_params().context("source")?;
    let grid =
        source_grid(&params, config.grid.span_gates, config.grid.dt).context("source grid")?;
    let amp = Arc::new(joint_temporal_amplitude(&params, &grid, &grid).context("source")?);
    let source_t1 = marginal_density(&amp, Arm::One).context("source")?;
    let source_t2 = marginal_density(&amp, Arm::Two).context("source")?;
    let source_difference = difference_time_density(&amp).context("source")?;

    let filter = config.spectral_filter();
    let filtered = Arc::new(
        apply_filter_arm1_with_tail(amp, &filter, config.grid.tail_lifetimes).context("filter")?,
    );
    let results = config
        .run
        .backend
        .backends()
        .iter()
        .map(|b| match b {
            Backend::Standard => standard_backend(&filtered).context("standard backend"),
            Backend::Collapse => collapse_backend(&filtered).context("collapse backend"),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment {
        params,
        filtered,
        source_t1,
        source_t2,
        source_difference,
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Densities, Monte Carlo events and the report.
    Simulate,
    /// Densities and the report only.
    DensitiesOnly,
}

/// Report plus the files written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub files: Vec<PathBuf>,
    pub events: Vec<(Backend, EventBatch)>,
}

/// Run `config` and write its artifacts under `config.output.dir`.
pub fn run_experiment(config: &ExperimentConfig, mode: RunMode) -> Result<RunArtifacts> {
    let exp = build_experiment(config)?;
    let dir = &config.output.dir;
    let dens_dir = dir.join("densities");
    fs::create_dir_all(&dens_dir).map_err(|e| Error::io(&dens_dir, e))?;
    let mut files = Vec::new();
    let mut densities = Vec::new();

    let mut emit = |model: &str, quantity: &str, arm: &str, d: &Density1D| -> Result<()> {
        let path = dens_dir.join(format!("{model}-{quantity}.csv"));
        write_file(&path, density_csv(model, arm, d).as_bytes())?;
        files.push(path);
        densities.push(DensityWidths {
            model: model.into(),
            quantity: quantity.into(),
            widths: width_report(d),
        });
        Ok(())
    };
    emit("source", "t1", "1", &exp.source_t1)?;
    emit("source", "t2", "2", &exp.source_t2)?;
    emit("source", "t1-t2", "1-2", &exp.source_difference)?;
    let mut no_signaling_l1 = None;
    for r in &exp.results {
        let name = r.backend.name();
        emit(name, "t1", "1", &r.p1)?;
        emit(name, "t2", "2", &r.p2)?;
        emit(
            name,
            "t2_unconditional",
            "2-unconditional",
            &r.p2_unconditional,
        )?;
        emit(name, "t1-t2", "1-2", &r.difference)?;
        if r.backend == Backend::Standard {
            no_signaling_l1 = Some(l1_distance(&r.p2_unconditional, &exp.source_t2)?);
        }
    }

    let mut samples = Vec::new();
    let mut events = Vec::new();
    if mode == RunMode::Simulate {
        for r in &exp.results {
            let batch = sample_events(
                r,
                config.run.n_triggers,
                config.source.pair_probability,
                config.run.seed,
            );
            let ext = match config.output.format {
                EventFormat::Binary => "etoa",
                EventFormat::Text => "csv",
            };
            let file_name = format!("events-{}.{ext}", r.backend);
            let path = dir.join(&file_name);
            write_event_file(&path, &batch, config.output.format)?;
            files.push(path);
            samples.push(summarize_samples(r.backend, &batch, file_name)?);
            events.push((r.backend, batch));
        }
    }
    let backend_ks = match events.as_slice() {
        [(_, a), (_, b)] => {
            let (ta, tb): (Vec<f64>, Vec<f64>) = (t2_of(a), t2_of(b));
            if ta.is_empty() || tb.is_empty() {
                None
            } else {
                Some(ks_two_sample(&ta, &tb)?)
            }
        }
        _ => None,
    };

    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config
            .canonical()
            .lines()
            .filter(|l| !l.starts_with("output.dir"))
            .flat_map(|l| [l, "\n"])
            .collect(),
        seed: config.run.seed,
        tau_s_seconds: config.tau_s_seconds,
        survival: exp.filtered.survival(),
        no_signaling_l1,
        uncertainty_product: uncertainty_product(&exp.filtered)?,
        densities,
        samples,
        backend_ks,
        warnings: config.warnings.clone(),
    };
    for (name, body) in [
        ("report.txt", report.to_text()),
        ("widths.csv", report.widths_csv()),
    ] {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        files.push(path);
    }
    if mode == RunMode::Simulate {
        let path = dir.join("samples.csv");
        write_file(&path, report.samples_csv().as_bytes())?;
        files.push(path);
    }
    Ok(RunArtifacts {
        report,
        files,
        events,
    })
}

fn t2_of(batch: &EventBatch) -> Vec<f64> {
    batch.coincidences().into_iter().map(|(_, t2)| t2).collect()
}

fn summarize_samples(backend: Backend, batch: &EventBatch, file: String) -> Result<SampleSummary> {
    let pairs = batch.coincidences();
    let widths = |f: &dyn Fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = pairs.iter().map(f).collect();
        sample_widths(&v).ok()
    };
    Ok(SampleSummary {
        backend,
        triggers: batch.trigger_count(),
        coincidences: pairs.len(),
        t1: widths(&|p| p.0),
        t2: widths(&|p| p.1),
        difference: widths(&|p| p.0 - p.1),
        event_file: file,
    })
}

/// `# backend=..., arm=...` then `t,value` rows.
pub fn density_csv(model: &str, arm: &str, d: &Density1D) -> String {
    let mut s = format!("# backend={model}, arm={arm}\nt,value\n");
    for (t, v) in d.axis().points().zip(d.values()) {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_event_file(path: &Path, batch: &EventBatch, format: EventFormat) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_events(batch, f, format).map_err(|e| Error::io(path, e))
}

/// Read an event file; with no explicit format, files starting with the
/// binary magic are read as binary and everything else as text.
pub fn read_event_file(path: &Path, format: Option<EventFormat>) -> Result<EventBatch> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let format = format.unwrap_or(if bytes.starts_with(MAGIC) {
        EventFormat::Binary
    } else {
        EventFormat::Text
    });
    parse_events(bytes.as_slice(), format).map_err(|e| match e {
        EventIoError::Io(e) => Error::io(path, e),
        EventIoError::Format(f) => Error::from(f).context(path.display().to_string()),
    })
}
