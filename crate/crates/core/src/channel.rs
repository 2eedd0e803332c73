//! Block-fading Rician multipath channels with rotation-induced Doppler.
//!
//! A [`MultipathRealization`] holds the random path geometry of one packet.
//! [`synthesize_fading`] turns it into a per-sample coefficient series: a
//! dominant path weighted by `sqrt(gK/(K+1))` plus `N` scattered paths
//! weighted by `sqrt(g/(K+1))`, each rotating at its own Doppler shift
//! `f_m sin(offset + azimuth)`. Path delays are folded into uniform random
//! phases.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp::{Cplx, SampledSignal};
use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Elevation of the dominant path in radians (80 degrees).
pub const DOMINANT_ELEVATION: f64 = 1.39626;

/// How equal scattered-path amplitudes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScatterNormalization {
    /// `sqrt(1/N)`, so the mean channel power equals the average gain.
    #[default]
    UnitPower,
    /// `sqrt(1/(2N))`, which leaves half the scattered power.
    HalfPower,
}

impl ScatterNormalization {
    pub fn amplitude(self, path_count: usize) -> f64 {
        let n = path_count as f64;
        match self {
            ScatterNormalization::UnitPower => (1.0 / n).sqrt(),
            ScatterNormalization::HalfPower => (1.0 / (2.0 * n)).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Rician K as a linear power ratio; `f64::INFINITY` is pure line of sight.
    pub k_factor: f64,
    pub path_count: usize,
    /// Full width of the arrival-angle interval, radians.
    pub angle_spread: f64,
    /// Mean channel power `g`.
    pub average_gain: f64,
    /// Direction of the transmitter relative to the canister opening, radians.
    pub azimuth_offset: f64,
    pub dominant_phase: f64,
    /// `f_c v / C` in Hz.
    pub max_doppler: f64,
    pub normalization: ScatterNormalization,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) {
            return Err(Error::invalid(format!("K factor must be >= 0, got {}", self.k_factor)));
        }
        if self.path_count < 1 {
            return Err(Error::invalid("path count must be >= 1"));
        }
        if !(0.0..PI).contains(&self.angle_spread) {
            return Err(Error::invalid(format!("angle spread must be in [0, pi), got {}", self.angle_spread)));
        }
        if !(self.average_gain > 0.0) || !self.average_gain.is_finite() {
            return Err(Error::invalid(format!("average gain must be positive, got {}", self.average_gain)));
        }
        if !(self.max_doppler >= 0.0) || !self.max_doppler.is_finite() {
            return Err(Error::invalid(format!("max Doppler must be >= 0, got {}", self.max_doppler)));
        }
        if !self.azimuth_offset.is_finite() || !self.dominant_phase.is_finite() {
            return Err(Error::invalid("azimuth offset and dominant phase must be finite"));
        }
        Ok(())
    }

    pub fn dominant_weight(&self) -> f64 {
        if self.k_factor.is_infinite() {
            self.average_gain.sqrt()
        } else {
            (self.average_gain * self.k_factor / (self.k_factor + 1.0)).sqrt()
        }
    }

    pub fn scatter_weight(&self) -> f64 {
        if self.k_factor.is_infinite() {
            0.0
        } else {
            (self.average_gain / (self.k_factor + 1.0)).sqrt()
        }
    }
}

/// One block-fading draw. Index 0 is the dominant path.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathRealization {
    pub amplitudes: Vec<f64>,
    pub azimuths: Vec<f64>,
    pub phases: Vec<f64>,
    pub elevations: Vec<f64>,
    /// Doppler of the dominant path at the parameters it was drawn with.
    pub dominant_doppler: f64,
}

impl MultipathRealization {
    pub fn path_count(&self) -> usize {
        self.amplitudes.len() - 1
    }
}

/// Per-sample channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSeries {
    pub coefficients: Vec<Cplx>,
    pub sample_rate: f64,
}

impl FadingSeries {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// `f_c v / C`.
pub fn max_doppler(carrier: f64, speed: f64) -> f64 {
    carrier * speed / SPEED_OF_LIGHT
}

pub fn doppler_shift(max_doppler: f64, azimuth: f64, azimuth_offset: f64) -> f64 {
    max_doppler * (azimuth_offset + azimuth).sin()
}

fn uniform_centered<R: Rng + ?Sized>(rng: &mut R, center: f64, width: f64) -> f64 {
    if width == 0.0 {
        center
    } else {
        rng.random_range(center - width / 2.0..=center + width / 2.0)
    }
}

/// Draws path angles and phases for one packet.
pub fn draw_realization<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> Result<MultipathRealization> {
    params.validate()?;
    let n = params.path_count;
    let alpha = params.normalization.amplitude(n);

    let mut amplitudes = Vec::with_capacity(n + 1);
    let mut azimuths = Vec::with_capacity(n + 1);
    let mut phases = Vec::with_capacity(n + 1);
    let mut elevations = Vec::with_capacity(n + 1);

    amplitudes.push(1.0);
    azimuths.push(0.0);
    phases.push(params.dominant_phase);
    elevations.push(DOMINANT_ELEVATION);

    for _ in 0..n {
        amplitudes.push(alpha);
        azimuths.push(uniform_centered(rng, 0.0, params.angle_spread));
        phases.push(rng.random_range(0.0..TAU));
        elevations.push(uniform_centered(rng, FRAC_PI_2, params.angle_spread));
    }

    Ok(MultipathRealization {
        amplitudes,
        azimuths,
        phases,
        elevations,
        dominant_doppler: doppler_shift(params.max_doppler, 0.0, params.azimuth_offset),
    })
}

// Phasors are re-anchored to an exact evaluation this often.
const RESYNC_INTERVAL: usize = 1024;

/// `sum_n w_n exp(j(2 pi f_n k / fs - phi_n))` for `k = 0..count`.
pub(crate) fn sum_of_sinusoids(
    weights: &[f64],
    freqs: &[f64],
    phases: &[f64],
    count: usize,
    sample_rate: f64,
) -> Vec<Cplx> {
    let paths: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
    let mut out = vec![Cplx::new(0.0, 0.0); count];
    if paths.is_empty() {
        return out;
    }

    let omega: Vec<f64> = paths.iter().map(|&i| TAU * freqs[i] / sample_rate).collect();
    let step_re: Vec<f64> = omega.iter().map(|w| w.cos()).collect();
    let step_im: Vec<f64> = omega.iter().map(|w| w.sin()).collect();
    let mut ph_re = vec![0.0; paths.len()];
    let mut ph_im = vec![0.0; paths.len()];

    for (block, chunk) in out.chunks_mut(RESYNC_INTERVAL).enumerate() {
        let k0 = (block * RESYNC_INTERVAL) as f64;
        for (p, &i) in paths.iter().enumerate() {
            let arg = (omega[p] * k0).rem_euclid(TAU) - phases[i];
            ph_re[p] = weights[i] * arg.cos();
            ph_im[p] = weights[i] * arg.sin();
        }
        for slot in chunk.iter_mut() {
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            for p in 0..ph_re.len() {
                let (re, im) = (ph_re[p], ph_im[p]);
                acc_re += re;
                acc_im += im;
                ph_re[p] = re * step_re[p] - im * step_im[p];
                ph_im[p] = re * step_im[p] + im * step_re[p];
            }
            *slot = Cplx::new(acc_re, acc_im);
        }
    }
    out
}

/// Path weights (dominant first) for a realization under `params`.
pub(crate) fn path_weights(realization: &MultipathRealization, params: &ChannelParams) -> Vec<f64> {
    let dom = params.dominant_weight();
    let scat = params.scatter_weight();
    realization
        .amplitudes
        .iter()
        .enumerate()
        .map(|(n, a)| if n == 0 { dom * a } else { scat * a })
        .collect()
}

/// Time-varying fading coefficients of one realization.
pub fn synthesize_fading(
    realization: &MultipathRealization,
    params: &ChannelParams,
    sample_count: usize,
    sample_rate: f64,
) -> Result<FadingSeries> {
    if sample_count < 1 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let weights = path_weights(realization, params);
    let freqs: Vec<f64> = realization
        .azimuths
        .iter()
        .map(|&b| doppler_shift(params.max_doppler, b, params.azimuth_offset))
        .collect();
    Ok(FadingSeries {
        coefficients: sum_of_sinusoids(&weights, &freqs, &realization.phases, sample_count, sample_rate),
        sample_rate,
    })
}

/// Element-wise product of a signal with its fading series.
pub fn apply_channel(signal: &SampledSignal, fading: &FadingSeries) -> Result<SampledSignal> {
    if signal.len() != fading.len() {
        return Err(Error::LengthMismatch { expected: signal.len(), actual: fading.len() });
    }
    Ok(SampledSignal {
        samples: signal.samples.iter().zip(&fading.coefficients).map(|(s, h)| s * h).collect(),
        sample_rate: signal.sample_rate,
    })
}

/// Adds circularly symmetric complex Gaussian noise of total variance
/// `noise_variance` per sample.
pub fn add_awgn<R: Rng + ?Sized>(signal: &SampledSignal, noise_variance: f64, rng: &mut R) -> Result<SampledSignal> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_variance}")));
    }
    let mut out = signal.clone();
    if noise_variance == 0.0 {
        return Ok(out);
    }
    let sd = (noise_variance / 2.0).sqrt();
    for s in out.samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Cplx::new(re * sd, im * sd);
    }
    Ok(out)
}
