//! Experiment manifests: INI files plus `key=value` overrides.
//!
//! Angles are given in degrees. Speeds are m/s, or multiples of
//! `v0 = lambda_c B_w` with a `v0` suffix (`5v0`). The canonical echo is a
//! whitespace-separated list of `section.key=value` tokens that parses back
//! into the same manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::array::{ArrayConfig, ArrayVariable, SpeedProfile};
use crate::channel::ScatterNormalization;
use crate::error::{Error, Result};
use crate::harness::{speed_for_target_doppler, DesignPoint};
use crate::link::{linear_to_db, LinkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Ber,
    SirTheta,
    SirOmega,
    SirSpeed,
    Psd,
    MaSir,
    Rpm,
    Energy,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Ber,
        Experiment::SirTheta,
        Experiment::SirOmega,
        Experiment::SirSpeed,
        Experiment::Psd,
        Experiment::MaSir,
        Experiment::Rpm,
        Experiment::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ber => "ber",
            Experiment::SirTheta => "sir-theta",
            Experiment::SirOmega => "sir-omega",
            Experiment::SirSpeed => "sir-speed",
            Experiment::Psd => "psd",
            Experiment::MaSir => "ma-sir",
            Experiment::Rpm => "rpm",
            Experiment::Energy => "energy",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            Experiment::Ber | Experiment::SirTheta | Experiment::SirOmega | Experiment::SirSpeed | Experiment::MaSir
        )
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("experiment", &["grid", "packets", "seed"]),
    (
        "link",
        &[
            "carrier",
            "sample_rate",
            "bandwidth",
            "packet_symbols",
            "pilot_symbols",
            "rolloff",
            "srrc_span",
            "drum_speed",
            "target_doppler",
            "sir_db",
            "snr_db",
            "k_factor_db",
            "k_factor",
            "desired_paths",
            "interferer_paths",
            "angle_spread_deg",
            "azimuth_separation_deg",
            "modulation_order",
            "scatter_normalization",
            "desired_phase_deg",
        ],
    ),
    ("array", &["speeds", "antennas", "element_spacing_deg", "variable", "profiles"]),
    ("psd", &["segment_length", "overlap"]),
    ("design", &["drum_radius", "speed"]),
];

// Keys that set the same quantity; the most recently set one wins.
const EXCLUSIVE: &[(&str, &str)] = &[
    ("link.drum_speed", "link.target_doppler"),
    ("link.k_factor_db", "link.k_factor"),
    ("array.speeds", "array.antennas"),
];

fn qualify(key: &str) -> Result<String> {
    let key = key.trim();
    if let Some((section, name)) = key.split_once('.') {
        let known = KEYS.iter().any(|(s, names)| *s == section && names.contains(&name));
        return if known { Ok(key.to_string()) } else { Err(Error::Config(format!("unknown key `{key}`"))) };
    }
    KEYS.iter()
        .find(|(_, names)| names.contains(&key))
        .map(|(s, _)| format!("{s}.{key}"))
        .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))
}

/// Raw configuration entries keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    entries: BTreeMap<String, String>,
}

impl ConfigSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        Self::from_ini(&ini)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    fn from_ini(ini: &Ini) -> Result<Self> {
        let mut out = Self::new();
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let full = match section {
                    Some(s) => format!("{s}.{key}"),
                    None => key.to_string(),
                };
                out.set(&full, value)?;
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = qualify(key)?;
        for (a, b) in EXCLUSIVE {
            if key == *a {
                self.entries.remove(*b);
            } else if key == *b {
                self.entries.remove(*a);
            }
        }
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, token: &str) -> Result<()> {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{token}` is not key=value")))?;
        self.set(k, v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(section) && k[section.len()..].starts_with('.'))
    }
}

fn config_err(key: &str, detail: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {detail}"))
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| config_err(key, format!("`{s}` is not a number")))?;
    if v.is_nan() {
        return Err(config_err(key, "NaN is not allowed"));
    }
    Ok(v)
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| config_err(key, format!("`{s}` is not a non-negative integer")))
}

fn parse_list<T>(key: &str, s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(item)
        .collect::<Result<Vec<T>>>()
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => config_err(key, other),
        })
}

/// Speed in m/s from `12.5` or `5v0`.
fn parse_speed(key: &str, s: &str, v0: f64) -> Result<f64> {
    let s = s.trim();
    let v = match s.strip_suffix("v0") {
        Some(mult) => parse_f64(key, mult)? * v0,
        None => parse_f64(key, s)?,
    };
    if !(v >= 0.0) || !v.is_finite() {
        return Err(config_err(key, format!("speed must be finite and >= 0, got `{s}`")));
    }
    Ok(v)
}

fn parse_multiple(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    parse_f64(key, s.strip_suffix("v0").unwrap_or(s))
}

/// Short round-trip float formatting.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Degrees with sub-1e-10 conversion noise removed.
fn fmt_deg(rad: f64) -> String {
    let s = format!("{:.10}", rad.to_degrees());
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdSettings {
    pub segment_length: usize,
    pub overlap: usize,
}

impl Default for PsdSettings {
    fn default() -> Self {
        Self { segment_length: 16384, overlap: 8192 }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub experiment: Experiment,
    pub link: LinkConfig,
    pub array: Option<ArrayConfig>,
    pub array_variable: ArrayVariable,
    /// Sweep values in interface units: dB, degrees, m/s or antenna counts.
    pub grid: Vec<f64>,
    pub packets_per_point: usize,
    pub psd: PsdSettings,
    pub design: DesignPoint,
    pub profiles: Vec<SpeedProfile>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentManifest {
    /// Builds and validates a manifest; every failure is a config error.
    pub fn build(experiment: Experiment, source: &ConfigSource) -> Result<Self> {
        Self::build_inner(experiment, source).map_err(|e| match e {
            Error::Config(_) | Error::Io(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn build_inner(experiment: Experiment, src: &ConfigSource) -> Result<Self> {
        let f = |key: &str, default: f64| src.get(key).map_or(Ok(default), |s| parse_f64(key, s));
        let u = |key: &str, default: usize| src.get(key).map_or(Ok(default), |s| parse_usize(key, s));
        let deg = |key: &str, default: f64| f(key, default.to_degrees()).map(f64::to_radians);

        let d = LinkConfig::default();
        let mut link = LinkConfig {
            carrier: f("link.carrier", d.carrier)?,
            sample_rate: f("link.sample_rate", d.sample_rate)?,
            bandwidth: f("link.bandwidth", d.bandwidth)?,
            packet_symbols: u("link.packet_symbols", d.packet_symbols)?,
            pilot_symbols: u("link.pilot_symbols", d.pilot_symbols)?,
            rolloff: f("link.rolloff", d.rolloff)?,
            srrc_span: u("link.srrc_span", d.srrc_span)?,
            drum_speed: 0.0,
            sir_db: f("link.sir_db", d.sir_db)?,
            snr_db: f("link.snr_db", d.snr_db)?,
            k_factor_db: d.k_factor_db,
            desired_paths: u("link.desired_paths", d.desired_paths)?,
            interferer_paths: u("link.interferer_paths", d.interferer_paths)?,
            angle_spread: deg("link.angle_spread_deg", d.angle_spread)?,
            azimuth_separation: deg("link.azimuth_separation_deg", d.azimuth_separation)?,
            seed: src.get("experiment.seed").map_or(Ok(d.seed), |s| {
                s.trim().parse().map_err(|_| config_err("experiment.seed", format!("`{s}` is not a u64")))
            })?,
            modulation_order: u("link.modulation_order", d.modulation_order)?,
            scatter_normalization: match src.get("link.scatter_normalization").map(str::trim) {
                None | Some("unit") => ScatterNormalization::UnitPower,
                Some("half") => ScatterNormalization::HalfPower,
                Some(other) => {
                    return Err(config_err("link.scatter_normalization", format!("`{other}` is not unit|half")))
                }
            },
            desired_dominant_phase: deg("link.desired_phase_deg", d.desired_dominant_phase)?,
        };
        if let Some(s) = src.get("link.k_factor") {
            let k = parse_f64("link.k_factor", s)?;
            if k < 0.0 {
                return Err(config_err("link.k_factor", format!("K must be >= 0, got {k}")));
            }
            link.k_factor_db = linear_to_db(k);
        } else {
            link.k_factor_db = f("link.k_factor_db", d.k_factor_db)?;
        }
        let v0 = link.reference_speed();
        if let Some(s) = src.get("link.target_doppler") {
            let fd = parse_f64("link.target_doppler", s)?;
            link.drum_speed = speed_for_target_doppler(fd, link.carrier, link.azimuth_separation)?;
        } else if let Some(s) = src.get("link.drum_speed") {
            link.drum_speed = parse_speed("link.drum_speed", s, v0)?;
        }
        link.validate()?;

        let grid = match src.get("experiment.grid") {
            Some(s) => match experiment {
                Experiment::SirSpeed => parse_list("experiment.grid", s, |t| parse_speed("experiment.grid", t, v0))?,
                _ => parse_list("experiment.grid", s, |t| parse_f64("experiment.grid", t))?,
            },
            None => Vec::new(),
        };
        if experiment.is_sweep() && grid.is_empty() {
            return Err(config_err("experiment.grid", format!("{} needs a non-empty grid", experiment.name())));
        }
        let packets_per_point = u("experiment.packets", 100)?;
        if packets_per_point < 1 {
            return Err(config_err("experiment.packets", "must be >= 1"));
        }

        let array_variable = match src.get("array.variable").map(str::trim) {
            None | Some("theta") => ArrayVariable::Theta,
            Some("antenna_count") => ArrayVariable::AntennaCount,
            Some(other) => return Err(config_err("array.variable", format!("`{other}` is not theta|antenna_count"))),
        };
        let array = if experiment == Experiment::MaSir || src.has_section("array") {
            let spacing = deg("array.element_spacing_deg", ArrayConfig::DEFAULT_SPACING)?;
            let speeds = match src.get("array.speeds") {
                Some(s) => parse_list("array.speeds", s, |t| parse_speed("array.speeds", t, v0))?,
                None => vec![link.drum_speed; u("array.antennas", 1)?],
            };
            Some(ArrayConfig::new(speeds, spacing)?)
        } else {
            None
        };
        if experiment == Experiment::MaSir && array_variable == ArrayVariable::AntennaCount {
            if let Some(bad) = grid.iter().find(|x| **x < 1.0 || x.fract() != 0.0) {
                return Err(config_err("experiment.grid", format!("antenna count {bad} is not a positive integer")));
            }
        }

        let profiles = match src.get("array.profiles") {
            Some(s) => s
                .split(';')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| SpeedProfile::new(parse_list("array.profiles", p, |t| parse_multiple("array.profiles", t))?))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        let psd = PsdSettings {
            segment_length: u("psd.segment_length", PsdSettings::default().segment_length)?,
            overlap: u("psd.overlap", PsdSettings::default().overlap)?,
        };
        if psd.segment_length < 2 || psd.overlap >= psd.segment_length {
            return Err(config_err("psd", "need segment_length >= 2 and overlap < segment_length"));
        }

        let design = DesignPoint::new(
            link.bandwidth,
            link.carrier,
            f("design.drum_radius", 0.2)?,
            parse_speed("design.speed", src.get("design.speed").unwrap_or("2v0"), v0)?,
        )?;

        Ok(Self {
            experiment,
            link,
            array,
            array_variable,
            grid,
            packets_per_point,
            psd,
            design,
            profiles,
            output_path: None,
        })
    }

    /// Loads `path`, applies overrides in order, and builds the manifest.
    pub fn load(experiment: Experiment, path: &Path, overrides: &[String]) -> Result<Self> {
        let mut src = ConfigSource::from_file(path)?;
        for o in overrides {
            src.apply_override(o)?;
        }
        Self::build(experiment, &src)
    }

    /// Parses a canonical echo back into a manifest.
    pub fn from_echo(echo: &str) -> Result<Self> {
        let mut experiment = None;
        let mut src = ConfigSource::new();
        for token in echo.split_whitespace() {
            match token.strip_prefix("experiment=") {
                Some(name) => experiment = Some(name.parse()?),
                None => src.apply_override(token)?,
            }
        }
        let experiment = experiment.ok_or_else(|| Error::Config("echo lacks experiment=".into()))?;
        Self::build(experiment, &src)
    }

    /// One-line canonical form of the effective settings.
    pub fn canonical(&self) -> String {
        let l = &self.link;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{k}={v}");
        };
        put("experiment", self.experiment.name().into());
        put("experiment.seed", l.seed.to_string());
        put("experiment.packets", self.packets_per_point.to_string());
        if !self.grid.is_empty() {
            put("experiment.grid", join(&self.grid));
        }
        put("link.carrier", fmt_f64(l.carrier));
        put("link.sample_rate", fmt_f64(l.sample_rate));
        put("link.bandwidth", fmt_f64(l.bandwidth));
        put("link.packet_symbols", l.packet_symbols.to_string());
        put("link.pilot_symbols", l.pilot_symbols.to_string());
        put("link.rolloff", fmt_f64(l.rolloff));
        put("link.srrc_span", l.srrc_span.to_string());
        put("link.drum_speed", fmt_f64(l.drum_speed));
        put("link.sir_db", fmt_f64(l.sir_db));
        put("link.snr_db", fmt_f64(l.snr_db));
        put("link.k_factor_db", fmt_f64(l.k_factor_db));
        put("link.desired_paths", l.desired_paths.to_string());
        put("link.interferer_paths", l.interferer_paths.to_string());
        put("link.angle_spread_deg", fmt_deg(l.angle_spread));
        put("link.azimuth_separation_deg", fmt_deg(l.azimuth_separation));
        put("link.modulation_order", l.modulation_order.to_string());
        put(
            "link.scatter_normalization",
            match l.scatter_normalization {
                ScatterNormalization::UnitPower => "unit".into(),
                ScatterNormalization::HalfPower => "half".into(),
            },
        );
        put("link.desired_phase_deg", fmt_deg(l.desired_dominant_phase));
        if let Some(a) = &self.array {
            put("array.speeds", join(&a.speeds));
            put("array.element_spacing_deg", fmt_deg(a.element_phase_spacing));
            put(
                "array.variable",
                match self.array_variable {
                    ArrayVariable::Theta => "theta".into(),
                    ArrayVariable::AntennaCount => "antenna_count".into(),
                },
            );
        }
        if !self.profiles.is_empty() {
            let p: Vec<String> = self.profiles.iter().map(|p| join(p.velocities())).collect();
            put("array.profiles", p.join(";"));
        }
        put("psd.segment_length", self.psd.segment_length.to_string());
        put("psd.overlap", self.psd.overlap.to_string());
        put("design.drum_radius", fmt_f64(self.design.drum_radius));
        put("design.speed", fmt_f64(self.design.linear_speed));
        s
    }
}
