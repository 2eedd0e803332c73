//! Stacked drum antennas with maximum ratio combining.
//!
//! All branches see the same wavefronts (one realization per packet); only
//! the drum speed and the element phase `(i-1) d cos(phi_n)` differ between
//! antennas. The Doppler of a path now depends on its elevation:
//! `f_n = v_i (f_c / C) sin(phi_n) sin(offset + beta_n)`.

use crate::channel::{self, apply_channel, path_weights, sum_of_sinusoids, ChannelParams, FadingSeries, MultipathRealization};
use crate::dsp::{Cplx, SampledSignal};
use crate::error::{Error, Result};
use crate::link::{for_packets, ratio_db_stats, LinkConfig, LinkSimulator, PacketResult, SweepResult, SweepRow};
use crate::modem::{self, ChannelEstimate};
use crate::streams::{PacketStreams, Role};

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub antenna_count: usize,
    /// Drum speed of each antenna in m/s.
    pub speeds: Vec<f64>,
    /// Electrical element spacing `d` in radians.
    pub element_phase_spacing: f64,
}

impl ArrayConfig {
    /// Half-wavelength spacing.
    pub const DEFAULT_SPACING: f64 = std::f64::consts::PI;

    pub fn new(speeds: Vec<f64>, element_phase_spacing: f64) -> Result<Self> {
        let cfg = Self { antenna_count: speeds.len(), speeds, element_phase_spacing };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `count` antennas all turning at `speed`.
    pub fn uniform(count: usize, speed: f64, element_phase_spacing: f64) -> Result<Self> {
        Self::new(vec![speed; count], element_phase_spacing)
    }

    pub fn from_profile(profile: &SpeedProfile, reference_speed: f64, element_phase_spacing: f64) -> Result<Self> {
        Self::new(profile.speeds(reference_speed), element_phase_spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antenna_count < 1 {
            return Err(Error::invalid("array needs at least one antenna"));
        }
        if self.speeds.len() != self.antenna_count {
            return Err(Error::LengthMismatch { expected: self.antenna_count, actual: self.speeds.len() });
        }
        if self.speeds.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("antenna speeds must be finite and >= 0"));
        }
        if !self.element_phase_spacing.is_finite() {
            return Err(Error::invalid("element spacing must be finite"));
        }
        Ok(())
    }
}

/// Per-antenna drum speeds in units of `v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    velocities: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(velocities: Vec<f64>) -> Result<Self> {
        if velocities.is_empty() {
            return Err(Error::invalid("speed profile must not be empty"));
        }
        if velocities.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("profile speeds must be finite and >= 0"));
        }
        Ok(Self { velocities })
    }

    /// Four antennas at `5 v0`.
    pub fn uniform_five() -> Self {
        Self { velocities: vec![5.0; 4] }
    }

    /// Four antennas at `3, 4, 5, 6 v0`.
    pub fn staggered() -> Self {
        Self { velocities: vec![3.0, 4.0, 5.0, 6.0] }
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn speeds(&self, reference_speed: f64) -> Vec<f64> {
        self.velocities.iter().map(|v| v * reference_speed).collect()
    }
}

/// Rotational energy `sum v_i^2` in units of `v0^2`.
pub fn profile_energy(profile: &SpeedProfile) -> f64 {
    profile.velocities.iter().map(|v| v * v).sum()
}

/// Fading seen by antenna `antenna_index` (1-based).
pub fn synthesize_array_fading(
    realization: &MultipathRealization,
    params: &ChannelParams,
    array: &ArrayConfig,
    antenna_index: usize,
    sample_count: usize,
    sample_rate: f64,
    carrier: f64,
) -> Result<FadingSeries> {
    array.validate()?;
    if antenna_index < 1 || antenna_index > array.antenna_count {
        return Err(Error::IndexOutOfRange { index: antenna_index, count: array.antenna_count });
    }
    if sample_count < 1 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let fm = channel::max_doppler(carrier, array.speeds[antenna_index - 1]);
    let shift = (antenna_index - 1) as f64 * array.element_phase_spacing;
    let weights = path_weights(realization, params);
    let freqs: Vec<f64> = realization
        .azimuths
        .iter()
        .zip(&realization.elevations)
        .map(|(&b, &phi)| fm * phi.sin() * (params.azimuth_offset + b).sin())
        .collect();
    let phases: Vec<f64> = realization
        .phases
        .iter()
        .zip(&realization.elevations)
        .map(|(&psi, &phi)| psi - shift * phi.cos())
        .collect();
    Ok(FadingSeries {
        coefficients: sum_of_sinusoids(&weights, &freqs, &phases, sample_count, sample_rate),
        sample_rate,
    })
}

/// `sum_i conj(h_i) r_i`, sample by sample.
pub fn mrc_combine<S: AsRef<[Cplx]>>(branch_signals: &[S], branch_estimates: &[ChannelEstimate]) -> Result<Vec<Cplx>> {
    if branch_signals.len() != branch_estimates.len() {
        return Err(Error::LengthMismatch { expected: branch_estimates.len(), actual: branch_signals.len() });
    }
    if branch_estimates.iter().all(|h| h.value.norm_sqr() == 0.0) {
        return Err(Error::AllZeroEstimates);
    }
    let len = branch_signals[0].as_ref().len();
    let mut out = vec![Cplx::new(0.0, 0.0); len];
    for (signal, h) in branch_signals.iter().zip(branch_estimates) {
        let signal = signal.as_ref();
        if signal.len() != len {
            return Err(Error::LengthMismatch { expected: len, actual: signal.len() });
        }
        let w = h.value.conj();
        out.iter_mut().zip(signal).for_each(|(o, r)| *o += w * r);
    }
    Ok(out)
}

/// Channel gain after combining, `sum_i |h_i|^2`.
pub fn effective_channel(branch_estimates: &[ChannelEstimate]) -> ChannelEstimate {
    ChannelEstimate::new(Cplx::new(branch_estimates.iter().map(|h| h.value.norm_sqr()).sum(), 0.0))
}

/// Per-packet array simulation on top of a [`LinkSimulator`].
#[derive(Debug, Clone)]
pub struct ArraySimulator {
    link: LinkSimulator,
    array: ArrayConfig,
}

struct Branch {
    desired: Vec<Cplx>,
    interferer: Option<Vec<Cplx>>,
    symbols: Vec<Cplx>,
    estimate: ChannelEstimate,
}

impl ArraySimulator {
    pub fn new(config: &LinkConfig, array: &ArrayConfig) -> Result<Self> {
        array.validate()?;
        Ok(Self { link: LinkSimulator::new(config)?, array: array.clone() })
    }

    pub fn array(&self) -> &ArrayConfig {
        &self.array
    }

    pub fn link(&self) -> &LinkSimulator {
        &self.link
    }

    fn branches(&self, streams: &PacketStreams) -> Result<(Vec<u8>, Vec<Branch>)> {
        let link = &self.link;
        let cfg = link.config();
        let fs = cfg.sample_rate;
        let (payload_bits, symbols) = link.desired_symbols(&mut streams.stream(Role::Payload))?;
        let tx = link.transmit(&symbols)?;
        let n = tx.len();

        let params = cfg.desired_params();
        let realization = channel::draw_realization(&params, &mut streams.stream(Role::DesiredChannel))?;
        let interferer = if link.has_interferer() {
            let itx = link.transmit(&link.interferer_symbols(&mut streams.stream(Role::InterfererData)))?;
            let (iparams, ireal) = link.interferer_channel(&mut streams.stream(Role::InterfererChannel))?;
            Some((itx, iparams, ireal))
        } else {
            None
        };

        let filter = link.fft_filter();
        let q = cfg.pilot_symbols;
        let mut branches = Vec::with_capacity(self.array.antenna_count);
        for i in 1..=self.array.antenna_count {
            let fading = synthesize_array_fading(&realization, &params, &self.array, i, n, fs, cfg.carrier)?;
            let desired = apply_channel(&tx, &fading)?;
            let mut received = desired.clone();
            let interferer_spec = match &interferer {
                Some((itx, iparams, ireal)) => {
                    let ifading = synthesize_array_fading(ireal, iparams, &self.array, i, n, fs, cfg.carrier)?;
                    let faded = apply_channel(itx, &ifading)?;
                    received.samples.iter_mut().zip(&faded.samples).for_each(|(r, x)| *r += x);
                    Some(filter.filtered_spectrum(&faded.samples))
                }
                None => None,
            };
            let branch_rng = &mut streams.stream(Role::Noise { branch: (i - 1) as u32 });
            let received: SampledSignal = link.add_noise(&received, branch_rng)?;
            let rx_symbols = link.receive_symbols(&received)?;
            let estimate = modem::ls_estimate(&rx_symbols[..q], link.pilots())?;
            branches.push(Branch {
                desired: filter.filtered_spectrum(&desired.samples),
                interferer: interferer_spec,
                symbols: rx_symbols,
                estimate,
            });
        }
        Ok((payload_bits, branches))
    }

    /// Combined desired and interferer powers of one packet.
    pub fn sir_packet(&self, streams: &PacketStreams) -> Result<(f64, f64)> {
        let (_, branches) = self.branches(streams)?;
        self.combined_powers(&branches)
    }

    fn combined_powers(&self, branches: &[Branch]) -> Result<(f64, f64)> {
        let estimates: Vec<ChannelEstimate> = branches.iter().map(|b| b.estimate).collect();
        // Every estimate can vanish only in a noiseless, fully faded packet; no power gets through.
        if estimates.iter().all(|h| h.value.norm_sqr() == 0.0) {
            return Ok((0.0, 0.0));
        }
        let filter = self.link.fft_filter();
        let norm = (self.link.config().packet_symbols * self.link.upsampling()) as f64;
        let desired: Vec<&[Cplx]> = branches.iter().map(|b| b.desired.as_slice()).collect();
        let d = filter.energy(&mrc_combine(&desired, &estimates)?) / norm;
        let i = match branches.iter().map(|b| b.interferer.as_deref()).collect::<Option<Vec<_>>>() {
            Some(spectra) => filter.energy(&mrc_combine(&spectra, &estimates)?) / norm,
            None => 0.0,
        };
        Ok((d, i))
    }

    /// Full receive chain with MRC detection.
    pub fn run_packet(&self, streams: &PacketStreams) -> Result<PacketResult> {
        let (payload_bits, branches) = self.branches(streams)?;
        let (desired_power, interferer_power) = self.combined_powers(&branches)?;
        let estimates: Vec<ChannelEstimate> = branches.iter().map(|b| b.estimate).collect();
        let q = self.link.config().pilot_symbols;
        let effective = effective_channel(&estimates);
        let bit_errors = match estimates.iter().all(|h| h.value.norm_sqr() == 0.0) {
            true => payload_bits.len(),
            false => {
                let payloads: Vec<&[Cplx]> = branches.iter().map(|b| &b.symbols[q..]).collect();
                let combined = mrc_combine(&payloads, &estimates)?;
                match modem::detect_ml(&combined, effective, self.link.constellation()) {
                    Ok(bits) => bits.iter().zip(&payload_bits).filter(|(a, b)| a != b).count(),
                    Err(Error::DegenerateEstimate) => payload_bits.len(),
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(PacketResult {
            bit_errors,
            payload_bits: payload_bits.len(),
            sir_after: if interferer_power > 0.0 { desired_power / interferer_power } else { f64::INFINITY },
            estimate: effective,
            desired_power,
            interferer_power,
        })
    }
}

/// Variable swept by [`array_sir_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayVariable {
    /// Azimuth separation, radians.
    Theta,
    /// Number of antennas, all at the link's drum speed.
    AntennaCount,
}

/// Post-combining `SIR_A` in dB per grid value.
pub fn array_sir_sweep(
    config: &LinkConfig,
    array: &ArrayConfig,
    variable: ArrayVariable,
    grid: &[f64],
    packets_per_point: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid must not be empty"));
    }
    if packets_per_point < 1 {
        return Err(Error::invalid("packets per point must be >= 1"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &x in grid {
        let (cfg, arr) = match variable {
            ArrayVariable::Theta => (LinkConfig { azimuth_separation: x, ..config.clone() }, array.clone()),
            ArrayVariable::AntennaCount => {
                if x < 1.0 || x.fract() != 0.0 {
                    return Err(Error::invalid(format!("antenna count must be a positive integer, got {x}")));
                }
                let arr = ArrayConfig::uniform(x as usize, config.drum_speed, array.element_phase_spacing)?;
                (config.clone(), arr)
            }
        };
        let sim = ArraySimulator::new(&cfg, &arr)?;
        let powers = for_packets(packets_per_point, |p| sim.sir_packet(&PacketStreams::new(cfg.seed, p)))?;
        let d: Vec<f64> = powers.iter().map(|p| p.0).collect();
        let i: Vec<f64> = powers.iter().map(|p| p.1).collect();
        let (mean, std_error) = ratio_db_stats(&d, &i);
        rows.push(SweepRow { x, mean, std_error, packets: packets_per_point });
    }
    Ok(SweepResult { rows })
}
