//! Command-line front end: manifests, experiment dispatch, CSV output and
//! the drum design calculators.

mod config;
mod experiments;

use std::io::Write;
use std::path::PathBuf;

pub use config::{ConfigSource, Experiment, ExperimentManifest, PsdSettings};
pub use experiments::{interference_spectra, render_csv, run_experiment, Table};

use crate::channel::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// Drum rotation rate `30 v / (pi R)` in rounds per minute.
pub fn rpm_from_speed(linear_speed: f64, radius: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("drum radius must be positive, got {radius}")));
    }
    if !(linear_speed >= 0.0) || !linear_speed.is_finite() {
        return Err(Error::invalid(format!("speed must be finite and >= 0, got {linear_speed}")));
    }
    Ok(30.0 * linear_speed / (std::f64::consts::PI * radius))
}

/// Drum speed that shifts a path at azimuth `theta` by `target_doppler`.
pub fn speed_for_target_doppler(target_doppler: f64, carrier: f64, azimuth_separation: f64) -> Result<f64> {
    if !(carrier > 0.0) || !carrier.is_finite() {
        return Err(Error::invalid(format!("carrier must be positive, got {carrier}")));
    }
    if !(target_doppler >= 0.0) || !target_doppler.is_finite() {
        return Err(Error::invalid(format!("target Doppler must be finite and >= 0, got {target_doppler}")));
    }
    let s = azimuth_separation.sin();
    if !(azimuth_separation > 0.0 && azimuth_separation <= std::f64::consts::FRAC_PI_2) || s <= 0.0 {
        return Err(Error::invalid(format!(
            "azimuth separation must be in (0, 90] degrees, got {}",
            azimuth_separation.to_degrees()
        )));
    }
    Ok(target_doppler * SPEED_OF_LIGHT / (carrier * s))
}

/// Physical operating point of one drum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub bandwidth: f64,
    pub carrier: f64,
    pub drum_radius: f64,
    pub linear_speed: f64,
    pub rpm: f64,
}

impl DesignPoint {
    pub fn new(bandwidth: f64, carrier: f64, drum_radius: f64, linear_speed: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !(carrier > 0.0) {
            return Err(Error::invalid("bandwidth and carrier must be positive"));
        }
        let rpm = rpm_from_speed(linear_speed, drum_radius)?;
        Ok(Self { bandwidth, carrier, drum_radius, linear_speed, rpm })
    }
}

/// One command-line invocation.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub experiment: String,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub overrides: Vec<String>,
}

/// Parses, runs and writes one experiment. The CSV goes to `out` when given
/// (with a summary table on stderr), otherwise to stdout.
pub fn execute(inv: &Invocation) -> Result<()> {
    let experiment: Experiment = inv.experiment.parse()?;
    let mut src = ConfigSource::from_file(&inv.config)?;
    for o in &inv.overrides {
        src.apply_override(o)?;
    }
    if let Some(seed) = inv.seed {
        src.set("experiment.seed", &seed.to_string())?;
    }
    let mut manifest = ExperimentManifest::build(experiment, &src)?;
    manifest.output_path = inv.out.clone();

    let workers = match inv.workers {
        Some(0) => return Err(Error::Config("--workers must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let table = pool.install(|| run_experiment(&manifest))?;
    let csv = render_csv(&manifest, &table);

    match &manifest.output_path {
        Some(path) => {
            std::fs::write(path, csv)?;
            eprint!("{}", table.summary());
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}
