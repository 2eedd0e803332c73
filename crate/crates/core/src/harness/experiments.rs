use std::fmt::Write as _;

use crate::array::{array_sir_sweep, profile_energy, ArrayVariable, SpeedProfile};
use crate::dsp::{self, Spectrum};
use crate::error::{Error, Result};
use crate::harness::config::{Experiment, ExperimentManifest, PsdSettings};
use crate::link::{ber_sweep, for_packets, sir_sweep, LinkConfig, LinkSimulator, SirVariable, SweepResult};
use crate::streams::PacketStreams;

/// Result table: one header row and string cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Column-aligned text rendering for the terminal.
    pub fn summary(&self) -> String {
        const MAX_ROWS: usize = 40;
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for row in self.rows.iter().take(MAX_ROWS) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&mut out, &self.header);
        for row in self.rows.iter().take(MAX_ROWS) {
            line(&mut out, row);
        }
        if self.rows.len() > MAX_ROWS {
            let _ = writeln!(out, "... {} more rows", self.rows.len() - MAX_ROWS);
        }
        out
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `# manifest:` line, header, then one line per row.
pub fn render_csv(manifest: &ExperimentManifest, table: &Table) -> String {
    let mut out = format!("# manifest: {}\n{}\n", manifest.canonical(), table.header.join(","));
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn sweep_table(x_name: &str, y_name: &str, xs: &[f64], sweep: &SweepResult) -> Table {
    let mut t = Table::new(&[x_name, y_name, "stderr", "packets"]);
    for (x, row) in xs.iter().zip(&sweep.rows) {
        t.push(vec![num(*x), num(row.mean), num(row.std_error), row.packets.to_string()]);
    }
    t
}

fn radians(grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|d| d.to_radians()).collect()
}

/// Averaged PSDs of the faded desired and interferer signals over
/// `packets` packets.
pub fn interference_spectra(link: &LinkConfig, packets: usize, psd: PsdSettings) -> Result<(Spectrum, Spectrum)> {
    if packets < 1 {
        return Err(Error::invalid("packet count must be >= 1"));
    }
    let sim = LinkSimulator::new(link)?;
    let per_packet = for_packets(packets, |p| {
        let packet = sim.faded_packet(&PacketStreams::new(link.seed, p))?;
        let d = dsp::averaged_periodogram(&packet.desired.samples, psd.segment_length, psd.overlap)?;
        let i = match &packet.interferer {
            Some(s) => dsp::averaged_periodogram(&s.samples, psd.segment_length, psd.overlap)?,
            None => vec![0.0; psd.segment_length],
        };
        Ok((d, i))
    })?;
    let mut d = vec![0.0; psd.segment_length];
    let mut i = vec![0.0; psd.segment_length];
    for (pd, pi) in &per_packet {
        d.iter_mut().zip(pd).for_each(|(a, b)| *a += b / packets as f64);
        i.iter_mut().zip(pi).for_each(|(a, b)| *a += b / packets as f64);
    }
    Ok((dsp::spectrum_from_linear(&d, link.sample_rate), dsp::spectrum_from_linear(&i, link.sample_rate)))
}

/// Runs the manifest's experiment on the current rayon pool.
pub fn run_experiment(m: &ExperimentManifest) -> Result<Table> {
    let link = &m.link;
    let packets = m.packets_per_point;
    Ok(match m.experiment {
        Experiment::Ber => sweep_table("snr_db", "ber", &m.grid, &ber_sweep(link, &m.grid, packets)?),
        Experiment::SirTheta => {
            let s = sir_sweep(link, SirVariable::Theta, &radians(&m.grid), packets)?;
            sweep_table("theta_deg", "sir_a_db", &m.grid, &s)
        }
        Experiment::SirOmega => {
            let s = sir_sweep(link, SirVariable::Omega, &radians(&m.grid), packets)?;
            sweep_table("omega_deg", "sir_a_db", &m.grid, &s)
        }
        Experiment::SirSpeed => {
            let s = sir_sweep(link, SirVariable::Speed, &m.grid, packets)?;
            sweep_table("speed_mps", "sir_a_db", &m.grid, &s)
        }
        Experiment::MaSir => {
            let array = m.array.as_ref().ok_or_else(|| Error::Config("ma-sir needs an [array] section".into()))?;
            match m.array_variable {
                ArrayVariable::Theta => {
                    let s = array_sir_sweep(link, array, ArrayVariable::Theta, &radians(&m.grid), packets)?;
                    sweep_table("theta_deg", "sir_a_db", &m.grid, &s)
                }
                ArrayVariable::AntennaCount => {
                    let s = array_sir_sweep(link, array, ArrayVariable::AntennaCount, &m.grid, packets)?;
                    sweep_table("antennas", "sir_a_db", &m.grid, &s)
                }
            }
        }
        Experiment::Psd => {
            let (d, i) = interference_spectra(link, packets, m.psd)?;
            let mut t = Table::new(&["frequency_hz", "desired_psd_db", "interferer_psd_db"]);
            for ((f, a), b) in d.frequencies.iter().zip(&d.power_density).zip(&i.power_density) {
                t.push(vec![num(*f), num(*a), num(*b)]);
            }
            t
        }
        Experiment::Rpm => {
            let d = &m.design;
            let mut t = Table::new(&["bandwidth_hz", "carrier_hz", "drum_radius_m", "linear_speed_mps", "rpm"]);
            t.push(vec![num(d.bandwidth), num(d.carrier), num(d.drum_radius), num(d.linear_speed), num(d.rpm)]);
            t
        }
        Experiment::Energy => {
            let defaults = [SpeedProfile::uniform_five(), SpeedProfile::staggered()];
            let profiles = if m.profiles.is_empty() { &defaults[..] } else { &m.profiles[..] };
            let base = profile_energy(&profiles[0]);
            let mut t = Table::new(&["profile", "velocities_v0", "energy_v0sq", "ratio"]);
            for (k, p) in profiles.iter().enumerate() {
                let e = profile_energy(p);
                let v: Vec<String> = p.velocities().iter().map(|x| num(*x)).collect();
                t.push(vec![format!("SP{}", k + 1), v.join(" "), num(e), num(e / base)]);
            }
            t
        }
    })
}
