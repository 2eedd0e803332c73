//! End-to-end single-antenna packet simulation.
//!
//! One packet runs, in complex baseband: random payload behind a fixed pilot
//! block, QPSK mapping, SRRC shaping, block-fading desired and interferer
//! channels, AWGN, SRRC receive filtering, symbol-rate sampling, LS channel
//! estimation and minimum-distance detection. The post-filter SIR is measured
//! on the separately filtered desired and interferer components.
//!
//! Noise is calibrated at the matched-filter output: `snr_db` is the bit
//! energy to noise density ratio, so an interference-free static link has
//! QPSK bit error rate `Q(sqrt(2 snr))`.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{self, apply_channel, draw_realization, ChannelParams, ScatterNormalization, SPEED_OF_LIGHT};
use crate::dsp::{self, Cplx, FftFilter, FilterTaps, SampledSignal};
use crate::error::{Error, Result};
use crate::modem::{self, ChannelEstimate, Constellation, PilotBlock};
use crate::streams::{PacketStreams, Role, RngStream};

/// Every scalar parameter of one simulated link. Angles are in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub carrier: f64,
    pub sample_rate: f64,
    pub bandwidth: f64,
    pub packet_symbols: usize,
    pub pilot_symbols: usize,
    pub rolloff: f64,
    pub srrc_span: usize,
    /// Tangential drum speed in m/s.
    pub drum_speed: f64,
    /// `g_S / g_I` in dB; `+inf` removes the interferer.
    pub sir_db: f64,
    /// Bit-energy SNR in dB; `+inf` removes the noise.
    pub snr_db: f64,
    /// Rician K in dB; `+inf` is pure line of sight.
    pub k_factor_db: f64,
    pub desired_paths: usize,
    pub interferer_paths: usize,
    pub angle_spread: f64,
    pub azimuth_separation: f64,
    pub seed: u64,
    pub modulation_order: usize,
    pub scatter_normalization: ScatterNormalization,
    /// Fixed phase of the desired dominant path.
    pub desired_dominant_phase: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            carrier: 60e9,
            sample_rate: 1.5e6,
            bandwidth: 5e3,
            packet_symbols: 500,
            pilot_symbols: 8,
            rolloff: 0.2,
            srrc_span: 64,
            drum_speed: 0.0,
            sir_db: 0.0,
            snr_db: 10.0,
            k_factor_db: 10.0,
            desired_paths: 20,
            interferer_paths: 20,
            angle_spread: 10f64.to_radians(),
            azimuth_separation: 30f64.to_radians(),
            seed: 0,
            modulation_order: 4,
            scatter_normalization: ScatterNormalization::UnitPower,
            desired_dominant_phase: 0.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("carrier", self.carrier), ("sample_rate", self.sample_rate), ("bandwidth", self.bandwidth)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        self.upsampling()?;
        if self.pilot_symbols < 1 || self.packet_symbols <= self.pilot_symbols {
            return Err(Error::invalid(format!(
                "need packet_symbols > pilot_symbols >= 1, got {} and {}",
                self.packet_symbols, self.pilot_symbols
            )));
        }
        if !(self.drum_speed >= 0.0) || !self.drum_speed.is_finite() {
            return Err(Error::invalid(format!("drum speed must be >= 0, got {}", self.drum_speed)));
        }
        if self.sir_db.is_nan() || self.sir_db == f64::NEG_INFINITY {
            return Err(Error::invalid("sir_db must be a number or +inf"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db must be a number or +inf"));
        }
        if self.k_factor_db.is_nan() {
            return Err(Error::invalid("k_factor_db must be a number"));
        }
        if self.desired_paths < 1 || self.interferer_paths < 1 {
            return Err(Error::invalid("path counts must be >= 1"));
        }
        if !(0.0..std::f64::consts::PI).contains(&self.angle_spread) {
            return Err(Error::invalid("angle spread must be in [0, 180) degrees"));
        }
        if !self.azimuth_separation.is_finite() || !self.desired_dominant_phase.is_finite() {
            return Err(Error::invalid("angles must be finite"));
        }
        Constellation::from_modulation_order(self.modulation_order)?;
        dsp::design_srrc(self.rolloff, self.srrc_span, 2).map(|_| ())
    }

    /// Samples per symbol, `sample_rate / bandwidth`, which must be an integer.
    pub fn upsampling(&self) -> Result<usize> {
        let ratio = self.sample_rate / self.bandwidth;
        let rounded = ratio.round();
        if !ratio.is_finite() || rounded < 2.0 || (ratio - rounded).abs() > 1e-9 * ratio {
            return Err(Error::invalid(format!(
                "sample_rate / bandwidth must be an integer >= 2, got {ratio}"
            )));
        }
        Ok(rounded as usize)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// `v0 = lambda_c B_w`, the speed at which the maximum Doppler equals one bandwidth.
    pub fn reference_speed(&self) -> f64 {
        self.wavelength() * self.bandwidth
    }

    pub fn max_doppler(&self) -> f64 {
        channel::max_doppler(self.carrier, self.drum_speed)
    }

    /// Doppler of the interferer's dominant path, `f_m sin(theta)`.
    pub fn interferer_doppler(&self) -> f64 {
        channel::doppler_shift(self.max_doppler(), 0.0, self.azimuth_separation)
    }

    pub fn k_factor(&self) -> f64 {
        db_to_linear(self.k_factor_db)
    }

    /// `g_I` relative to `g_S = 1`; zero when the interferer is disabled.
    pub fn interferer_gain(&self) -> f64 {
        db_to_linear(-self.sir_db)
    }

    /// Per-sample complex noise variance giving the configured bit-energy SNR
    /// at the matched-filter output.
    pub fn noise_variance(&self) -> f64 {
        let bits = self.modulation_order.trailing_zeros() as f64;
        db_to_linear(-self.snr_db) / bits
    }

    pub fn desired_params(&self) -> ChannelParams {
        ChannelParams {
            k_factor: self.k_factor(),
            path_count: self.desired_paths,
            angle_spread: self.angle_spread,
            average_gain: 1.0,
            azimuth_offset: 0.0,
            dominant_phase: self.desired_dominant_phase,
            max_doppler: self.max_doppler(),
            normalization: self.scatter_normalization,
        }
    }

    pub fn interferer_params(&self, dominant_phase: f64) -> ChannelParams {
        ChannelParams {
            k_factor: self.k_factor(),
            path_count: self.interferer_paths,
            angle_spread: self.angle_spread,
            average_gain: self.interferer_gain(),
            azimuth_offset: self.azimuth_separation,
            dominant_phase,
            max_doppler: self.max_doppler(),
            normalization: self.scatter_normalization,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Outcome of one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketResult {
    pub bit_errors: usize,
    pub payload_bits: usize,
    /// Filtered desired power over filtered interferer power for this packet.
    pub sir_after: f64,
    pub estimate: ChannelEstimate,
    /// Mean filtered desired power per packet sample.
    pub desired_power: f64,
    /// Mean filtered interferer power per packet sample.
    pub interferer_power: f64,
}

impl PacketResult {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.payload_bits as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub mean: f64,
    pub std_error: f64,
    pub packets: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Variable swept by [`sir_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SirVariable {
    /// Azimuth separation, radians.
    Theta,
    /// Angle spread, radians.
    Omega,
    /// Drum speed, m/s.
    Speed,
}

impl SirVariable {
    pub fn apply(self, config: &LinkConfig, value: f64) -> LinkConfig {
        let mut cfg = config.clone();
        match self {
            SirVariable::Theta => cfg.azimuth_separation = value,
            SirVariable::Omega => cfg.angle_spread = value,
            SirVariable::Speed => cfg.drum_speed = value,
        }
        cfg
    }
}

/// Faded transmit components of one packet, before noise and filtering.
#[derive(Debug, Clone)]
pub struct FadedPacket {
    pub payload_bits: Vec<u8>,
    pub desired: SampledSignal,
    pub interferer: Option<SampledSignal>,
}

/// Precomputed filters and alphabets for one [`LinkConfig`].
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    config: LinkConfig,
    eta: usize,
    constellation: Constellation,
    pilots: PilotBlock,
    taps: FilterTaps,
    filter: FftFilter,
    tx_scale: f64,
}

impl LinkSimulator {
    pub fn new(config: &LinkConfig) -> Result<Self> {
        config.validate()?;
        let eta = config.upsampling()?;
        let constellation = Constellation::from_modulation_order(config.modulation_order)?;
        let pilots = PilotBlock::standard(config.pilot_symbols, &constellation)?;
        let taps = dsp::design_srrc(config.rolloff, config.srrc_span, eta)?;
        // Longest filter input is the shaped packet: L*eta + span*eta samples.
        let filter = FftFilter::new(taps.taps(), config.packet_symbols * eta + taps.len() - 1);
        // Unit-energy symbols through unit-energy taps give 1/eta per sample.
        let tx_scale = (constellation.mean_energy() * taps.energy()).sqrt().recip();
        Ok(Self { config: config.clone(), eta, constellation, pilots, taps, filter, tx_scale })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn upsampling(&self) -> usize {
        self.eta
    }

    pub fn taps(&self) -> &FilterTaps {
        &self.taps
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn pilots(&self) -> &PilotBlock {
        &self.pilots
    }

    pub(crate) fn fft_filter(&self) -> &FftFilter {
        &self.filter
    }

    /// Length of a shaped packet, `(L + span) * eta`.
    pub fn shaped_len(&self) -> usize {
        self.config.packet_symbols * self.eta + self.taps.len() - 1
    }

    /// Sample index of the first symbol after transmit and receive filtering.
    pub fn sampling_offset(&self) -> usize {
        self.config.srrc_span * self.eta
    }

    /// Upsamples and SRRC-shapes a symbol block.
    pub fn transmit(&self, symbols: &[Cplx]) -> Result<SampledSignal> {
        let up = dsp::upsample(symbols, self.eta, self.config.bandwidth)?;
        let mut samples = self.filter.apply(&up.samples);
        samples.iter_mut().for_each(|s| *s *= self.tx_scale);
        SampledSignal::new(samples, self.config.sample_rate)
    }

    /// Pilot block followed by random payload; returns `(payload bits, symbols)`.
    pub fn desired_symbols(&self, rng: &mut RngStream) -> Result<(Vec<u8>, Vec<Cplx>)> {
        let m = self.constellation.bits_per_symbol();
        let n_bits = (self.config.packet_symbols - self.config.pilot_symbols) * m;
        let bits: Vec<u8> = (0..n_bits).map(|_| rng.random_range(0..2u8)).collect();
        let mut symbols = self.pilots.symbols().to_vec();
        symbols.extend(modem::map_bits(&bits, &self.constellation)?);
        Ok((bits, symbols))
    }

    /// An independent packet of random symbols from the interferer.
    pub fn interferer_symbols(&self, rng: &mut RngStream) -> Vec<Cplx> {
        let pts = self.constellation.points();
        (0..self.config.packet_symbols).map(|_| pts[rng.random_range(0..pts.len())]).collect()
    }

    pub fn has_interferer(&self) -> bool {
        self.config.interferer_gain() > 0.0
    }

    /// Draws the interferer's dominant phase and realization.
    pub(crate) fn interferer_channel(&self, rng: &mut RngStream) -> Result<(ChannelParams, channel::MultipathRealization)> {
        let phase = rng.random_range(0.0..TAU);
        let params = self.config.interferer_params(phase);
        let realization = draw_realization(&params, rng)?;
        Ok((params, realization))
    }

    /// Shaped and faded desired and interferer signals for one packet.
    pub fn faded_packet(&self, streams: &PacketStreams) -> Result<FadedPacket> {
        let (payload_bits, symbols) = self.desired_symbols(&mut streams.stream(Role::Payload))?;
        let tx = self.transmit(&symbols)?;
        let n = tx.len();
        let fs = self.config.sample_rate;

        let params = self.config.desired_params();
        let realization = draw_realization(&params, &mut streams.stream(Role::DesiredChannel))?;
        let fading = channel::synthesize_fading(&realization, &params, n, fs)?;
        let desired = apply_channel(&tx, &fading)?;

        let interferer = if self.has_interferer() {
            let itx = self.transmit(&self.interferer_symbols(&mut streams.stream(Role::InterfererData)))?;
            let (iparams, ireal) = self.interferer_channel(&mut streams.stream(Role::InterfererChannel))?;
            let ifading = channel::synthesize_fading(&ireal, &iparams, n, fs)?;
            Some(apply_channel(&itx, &ifading)?)
        } else {
            None
        };
        Ok(FadedPacket { payload_bits, desired, interferer })
    }

    fn packet_norm(&self) -> f64 {
        (self.config.packet_symbols * self.eta) as f64
    }

    /// Received signal plus noise, filtered and sampled at the symbol instants.
    pub(crate) fn receive_symbols(&self, received: &SampledSignal) -> Result<Vec<Cplx>> {
        let l = self.config.packet_symbols;
        let offset = self.sampling_offset();
        let needed = offset + (l - 1) * self.eta + 1;
        let spec = self.filter.filtered_spectrum(&received.samples);
        let filtered = SampledSignal::new(self.filter.to_time(spec, needed), received.sample_rate)?;
        let mut symbols = dsp::downsample(&filtered, self.eta, offset)?;
        symbols.truncate(l);
        Ok(symbols)
    }

    pub(crate) fn add_noise(&self, signal: &SampledSignal, rng: &mut RngStream) -> Result<SampledSignal> {
        channel::add_awgn(signal, self.config.noise_variance(), rng)
    }

    /// Filtered desired and interferer powers (mean per packet sample).
    pub fn filtered_powers(&self, packet: &FadedPacket) -> (f64, f64) {
        let norm = self.packet_norm();
        let d = self.filter.energy(&self.filter.filtered_spectrum(&packet.desired.samples)) / norm;
        let i = packet
            .interferer
            .as_ref()
            .map_or(0.0, |s| self.filter.energy(&self.filter.filtered_spectrum(&s.samples)) / norm);
        (d, i)
    }

    /// Runs the full receive chain on one packet.
    pub fn run_packet(&self, streams: &PacketStreams) -> Result<PacketResult> {
        let packet = self.faded_packet(streams)?;
        let (desired_power, interferer_power) = self.filtered_powers(&packet);

        let mut received = packet.desired.clone();
        if let Some(i) = &packet.interferer {
            received.samples.iter_mut().zip(&i.samples).for_each(|(r, x)| *r += x);
        }
        let received = self.add_noise(&received, &mut streams.stream(Role::Noise { branch: 0 }))?;
        let symbols = self.receive_symbols(&received)?;

        let q = self.config.pilot_symbols;
        let estimate = modem::ls_estimate(&symbols[..q], &self.pilots)?;
        let payload_bits = packet.payload_bits.len();
        let bit_errors = match modem::detect_ml(&symbols[q..], estimate, &self.constellation) {
            Ok(bits) => bits.iter().zip(&packet.payload_bits).filter(|(a, b)| a != b).count(),
            // Nothing can be decided without a usable estimate; count every bit as lost.
            Err(Error::DegenerateEstimate) => payload_bits,
            Err(e) => return Err(e),
        };

        Ok(PacketResult {
            bit_errors,
            payload_bits,
            sir_after: if interferer_power > 0.0 { desired_power / interferer_power } else { f64::INFINITY },
            estimate,
            desired_power,
            interferer_power,
        })
    }

    /// Filtered desired and interferer powers of one packet, without noise or detection.
    pub fn sir_packet(&self, streams: &PacketStreams) -> Result<(f64, f64)> {
        Ok(self.filtered_powers(&self.faded_packet(streams)?))
    }
}

/// Runs a single packet of `config` with the given streams.
pub fn run_packet(config: &LinkConfig, streams: &PacketStreams) -> Result<PacketResult> {
    LinkSimulator::new(config)?.run_packet(streams)
}

/// Evaluates `f` for packet indices `0..count` on the current rayon pool,
/// returning results in packet order.
pub(crate) fn for_packets<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

/// `SIR_A` as a linear ratio of mean filtered powers over `packet_count`
/// packets; `+inf` when the interferer contributes no power.
pub fn measure_sir_after(config: &LinkConfig, packet_count: usize) -> Result<f64> {
    if packet_count < 1 {
        return Err(Error::invalid("packet count must be >= 1"));
    }
    let sim = LinkSimulator::new(config)?;
    let powers = for_packets(packet_count, |p| sim.sir_packet(&PacketStreams::new(config.seed, p)))?;
    let d: f64 = powers.iter().map(|p| p.0).sum();
    let i: f64 = powers.iter().map(|p| p.1).sum();
    Ok(if i > 0.0 { d / i } else { f64::INFINITY })
}

/// Ratio of means in dB with its delta-method standard error.
pub fn ratio_db_stats(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    if md <= 0.0 {
        return (f64::INFINITY, 0.0);
    }
    if num.len() < 2 {
        return (linear_to_db(mn / md), 0.0);
    }
    let mut vn = 0.0;
    let mut vd = 0.0;
    let mut cov = 0.0;
    for (a, b) in num.iter().zip(den) {
        vn += (a - mn).powi(2);
        vd += (b - md).powi(2);
        cov += (a - mn) * (b - md);
    }
    let dof = n - 1.0;
    let var_log = (vn / dof / (mn * mn) + vd / dof / (md * md) - 2.0 * cov / dof / (mn * md)) / n;
    let se_db = 10.0 / std::f64::consts::LN_10 * var_log.max(0.0).sqrt();
    (linear_to_db(mn / md), se_db)
}

/// Mean and standard error of the mean.
pub fn mean_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean BER per SNR grid point. Every point reuses the same packet streams.
pub fn ber_sweep(config: &LinkConfig, snr_grid_db: &[f64], packets_per_point: usize) -> Result<SweepResult> {
    if snr_grid_db.is_empty() {
        return Err(Error::invalid("SNR grid must not be empty"));
    }
    if packets_per_point < 1 {
        return Err(Error::invalid("packets per point must be >= 1"));
    }
    let mut rows = Vec::with_capacity(snr_grid_db.len());
    for &snr in snr_grid_db {
        let cfg = LinkConfig { snr_db: snr, ..config.clone() };
        let sim = LinkSimulator::new(&cfg)?;
        let results = for_packets(packets_per_point, |p| sim.run_packet(&PacketStreams::new(cfg.seed, p)))?;
        let errors: usize = results.iter().map(|r| r.bit_errors).sum();
        let bits: usize = results.iter().map(|r| r.payload_bits).sum();
        let per_packet: Vec<f64> = results.iter().map(PacketResult::ber).collect();
        let (_, se) = mean_std_error(&per_packet);
        rows.push(SweepRow { x: snr, mean: errors as f64 / bits as f64, std_error: se, packets: packets_per_point });
    }
    Ok(SweepResult { rows })
}

/// `SIR_A` in dB against one link variable (angles in radians, speed in m/s).
pub fn sir_sweep(
    config: &LinkConfig,
    variable: SirVariable,
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
        let cfg = variable.apply(config, x);
        let sim = LinkSimulator::new(&cfg)?;
        let powers = for_packets(packets_per_point, |p| sim.sir_packet(&PacketStreams::new(cfg.seed, p)))?;
        let d: Vec<f64> = powers.iter().map(|p| p.0).collect();
        let i: Vec<f64> = powers.iter().map(|p| p.1).collect();
        let (mean, std_error) = ratio_db_stats(&d, &i);
        rows.push(SweepRow { x, mean, std_error, packets: packets_per_point });
    }
    Ok(SweepResult { rows })
}
