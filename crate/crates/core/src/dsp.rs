//! Filter design, rate conversion and spectral estimation.
//!
//! Everything here works on complex baseband sample sequences. The long
//! square-root raised-cosine filters used by the link (tens of thousands of
//! taps) are applied through [`FftFilter`], which caches the filter spectrum
//! for a fixed transform length.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Cplx = Complex<f64>;

/// Square-root raised-cosine taps with unit energy.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    taps: Vec<f64>,
    samples_per_symbol: usize,
    rolloff: f64,
    span_symbols: usize,
}

impl FilterTaps {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn span_symbols(&self) -> usize {
        self.span_symbols
    }

    /// Index of the center tap, which is also the group delay in samples.
    pub fn center(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

/// Uniformly sampled complex baseband sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub samples: Vec<Cplx>,
    pub sample_rate: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<Cplx>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

/// Two-sided power spectral density in dB, ordered from `-fs/2` upwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub power_density: Vec<f64>,
}

impl Spectrum {
    /// Frequency of the strongest bin.
    pub fn peak_frequency(&self) -> f64 {
        let (idx, _) = self
            .power_density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
        self.frequencies[idx]
    }

    /// Integrates the density back to a mean power (linear units).
    pub fn total_power(&self) -> f64 {
        if self.frequencies.len() < 2 {
            return 0.0;
        }
        let df = self.frequencies[1] - self.frequencies[0];
        self.power_density.iter().map(|db| 10f64.powf(db / 10.0)).sum::<f64>() * df
    }
}

pub fn mean_power(samples: &[Cplx]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Closed-form SRRC impulse response at `x = t / Ts`, before normalization.
///
/// The removable singularities at `x = 0` and `|x| = 1/(4 rolloff)` are
/// replaced by their limits.
pub fn srrc_value(x: f64, rolloff: f64) -> f64 {
    let r = rolloff;
    if x.abs() < 1e-12 {
        return 1.0 - r + 4.0 * r / PI;
    }
    let q = 4.0 * r * x;
    if (1.0 - q * q).abs() < 1e-10 {
        let a = PI / (4.0 * r);
        return r / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    ((PI * x * (1.0 - r)).sin() + q * (PI * x * (1.0 + r)).cos()) / (PI * x * (1.0 - q * q))
}

/// Designs unit-energy square-root raised-cosine taps spanning
/// `span_symbols` symbols at `samples_per_symbol` samples each.
pub fn design_srrc(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> Result<FilterTaps> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::invalid(format!("rolloff must be in (0, 1], got {rolloff}")));
    }
    if span_symbols < 2 || !span_symbols.is_multiple_of(2) {
        return Err(Error::invalid(format!("span must be even and >= 2, got {span_symbols}")));
    }
    if samples_per_symbol < 2 {
        return Err(Error::invalid(format!(
            "samples per symbol must be >= 2, got {samples_per_symbol}"
        )));
    }

    let half = (span_symbols * samples_per_symbol / 2) as i64;
    let eta = samples_per_symbol as f64;
    let mut taps: Vec<f64> = (-half..=half).map(|k| srrc_value(k as f64 / eta, rolloff)).collect();

    // Mirror the negative half so symmetry is exact.
    let n = taps.len();
    for i in 0..n / 2 {
        taps[n - 1 - i] = taps[i];
    }

    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);

    Ok(FilterTaps { taps, samples_per_symbol, rolloff, span_symbols })
}

/// Inserts `factor - 1` zeros after every symbol.
pub fn upsample(symbols: &[Cplx], factor: usize, symbol_rate: f64) -> Result<SampledSignal> {
    if factor < 1 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    let mut samples = vec![Cplx::new(0.0, 0.0); symbols.len() * factor];
    for (i, s) in symbols.iter().enumerate() {
        samples[i * factor] = *s;
    }
    SampledSignal::new(samples, symbol_rate * factor as f64)
}

/// Full linear convolution of `signal` with `taps`.
pub fn filter(signal: &SampledSignal, taps: &FilterTaps) -> SampledSignal {
    let out = if signal.len().saturating_mul(taps.len()) <= 1 << 16 {
        convolve_direct(&signal.samples, taps.taps())
    } else {
        FftFilter::new(taps.taps(), signal.len()).apply(&signal.samples)
    };
    SampledSignal { samples: out, sample_rate: signal.sample_rate }
}

fn convolve_direct(x: &[Cplx], h: &[f64]) -> Vec<Cplx> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Cplx::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        if xi.re == 0.0 && xi.im == 0.0 {
            continue;
        }
        for (j, hj) in h.iter().enumerate() {
            y[i + j] += xi * *hj;
        }
    }
    y
}

/// Returns `signal[offset], signal[offset + factor], ...`.
pub fn downsample(signal: &SampledSignal, factor: usize, offset: usize) -> Result<Vec<Cplx>> {
    if factor < 1 {
        return Err(Error::invalid("downsampling factor must be >= 1"));
    }
    if offset >= signal.len() {
        return Err(Error::invalid(format!(
            "offset {offset} out of range for signal of length {}",
            signal.len()
        )));
    }
    Ok(signal.samples[offset..].iter().step_by(factor).copied().collect())
}

/// Smallest `2^a 3^b 5^c` that is `>= n`.
pub fn fast_fft_len(n: usize) -> usize {
    let n = n.max(1);
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// FIR filter applied by FFT with a cached filter spectrum.
///
/// The transform length is fixed at construction, so inputs may be at most
/// `max_input_len` samples long.
#[derive(Clone)]
pub struct FftFilter {
    n_fft: usize,
    taps_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    response: Vec<Cplx>,
}

impl std::fmt::Debug for FftFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftFilter")
            .field("n_fft", &self.n_fft)
            .field("taps_len", &self.taps_len)
            .finish()
    }
}

impl FftFilter {
    pub fn new(taps: &[f64], max_input_len: usize) -> Self {
        let n_fft = fast_fft_len(max_input_len + taps.len() - 1);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_fft);
        let inverse = planner.plan_fft_inverse(n_fft);
        let mut response: Vec<Cplx> = taps.iter().map(|&t| Cplx::new(t, 0.0)).collect();
        response.resize(n_fft, Cplx::new(0.0, 0.0));
        forward.process(&mut response);
        Self { n_fft, taps_len: taps.len(), forward, inverse, response }
    }

    pub fn fft_len(&self) -> usize {
        self.n_fft
    }

    pub fn max_input_len(&self) -> usize {
        self.n_fft + 1 - self.taps_len
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len + self.taps_len - 1
    }

    /// Spectrum of the filtered input (zero padded to the transform length).
    pub fn filtered_spectrum(&self, x: &[Cplx]) -> Vec<Cplx> {
        assert!(x.len() <= self.max_input_len(), "input longer than the filter was planned for");
        let mut buf = Vec::with_capacity(self.n_fft);
        buf.extend_from_slice(x);
        buf.resize(self.n_fft, Cplx::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.response).for_each(|(b, h)| *b *= h);
        buf
    }

    /// Energy of the time-domain sequence whose spectrum is `spectrum`.
    pub fn energy(&self, spectrum: &[Cplx]) -> f64 {
        spectrum.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.n_fft as f64
    }

    /// Inverse transform, truncated to `len` samples.
    pub fn to_time(&self, mut spectrum: Vec<Cplx>, len: usize) -> Vec<Cplx> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.n_fft as f64;
        spectrum.truncate(len);
        spectrum.iter_mut().for_each(|s| *s *= scale);
        spectrum
    }

    /// Full linear convolution of `x` with the taps.
    pub fn apply(&self, x: &[Cplx]) -> Vec<Cplx> {
        if x.is_empty() {
            return Vec::new();
        }
        let spec = self.filtered_spectrum(x);
        self.to_time(spec, self.output_len(x.len()))
    }
}

/// Hann-windowed averaged periodogram ordered from `-fs/2` upwards.
///
/// Scaled so that white noise of variance `s2` reads `s2` in every bin;
/// divide by the sample rate for a density per Hz.
pub fn averaged_periodogram(samples: &[Cplx], segment_length: usize, overlap: usize) -> Result<Vec<f64>> {
    if segment_length == 0 || segment_length > samples.len() {
        return Err(Error::invalid(format!(
            "segment length {segment_length} must be in 1..={}",
            samples.len()
        )));
    }
    if overlap >= segment_length {
        return Err(Error::invalid("overlap must be smaller than the segment length"));
    }
    let n = segment_length;
    let window: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
    };
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let step = n - overlap;

    let mut acc = vec![0.0; n];
    let mut segments = 0usize;
    let mut buf = vec![Cplx::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= samples.len() {
        for ((b, x), w) in buf.iter_mut().zip(&samples[start..start + n]).zip(&window) {
            *b = x * *w;
        }
        fft.process(&mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b.norm_sqr());
        segments += 1;
        start += step;
    }

    // Rotate so bin 0 corresponds to -fs/2.
    let half = n / 2;
    let scale = 1.0 / (segments as f64 * window_energy);
    Ok((0..n).map(|i| acc[(i + n - half) % n] * scale).collect())
}

/// Frequencies matching [`averaged_periodogram`] bins.
pub fn centered_frequencies(segment_length: usize, sample_rate: f64) -> Vec<f64> {
    let n = segment_length as i64;
    let half = n / 2;
    (0..n).map(|i| (i - half) as f64 * sample_rate / n as f64).collect()
}

/// Power spectral density in dB over `[-fs/2, fs/2)`.
pub fn estimate_psd(signal: &SampledSignal, segment_length: usize, overlap: usize) -> Result<Spectrum> {
    let density = averaged_periodogram(&signal.samples, segment_length, overlap)?;
    Ok(spectrum_from_linear(&density, signal.sample_rate))
}

/// Converts an [`averaged_periodogram`] output into a dB density per Hz.
pub fn spectrum_from_linear(periodogram: &[f64], sample_rate: f64) -> Spectrum {
    Spectrum {
        frequencies: centered_frequencies(periodogram.len(), sample_rate),
        power_density: periodogram
            .iter()
            .map(|p| 10.0 * (p / sample_rate).max(1e-300).log10())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Cplx {
        Cplx::new(re, im)
    }

    fn naive_conv(x: &[Cplx], h: &[f64]) -> Vec<Cplx> {
        let mut y = vec![c(0.0, 0.0); x.len() + h.len() - 1];
        for n in 0..y.len() {
            for k in 0..h.len() {
                if n >= k && n - k < x.len() {
                    y[n] += x[n - k] * h[k];
                }
            }
        }
        y
    }

    fn self_conv_isi(taps: &FilterTaps) -> (f64, f64) {
        let h = taps.taps();
        let n = h.len();
        let center = n - 1;
        let eta = taps.samples_per_symbol();
        let at = |m: usize| -> f64 { (0..n).filter(|&k| m >= k && m - k < n).map(|k| h[k] * h[m - k]).sum() };
        let peak = at(center);
        let mut worst: f64 = 0.0;
        let mut m = center % eta;
        while m < 2 * n - 1 {
            if m != center {
                worst = worst.max(at(m).abs());
            }
            m += eta;
        }
        (peak, worst)
    }

    #[test]
    fn srrc_table_parameters() {
        let taps = design_srrc(0.2, 64, 300).unwrap();
        assert_eq!(taps.len(), 19201);
        let peak = taps.taps().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(taps.taps()[taps.center()], peak);
        assert!(taps.taps().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn srrc_center_value() {
        let r = 0.35;
        assert_relative_eq!(srrc_value(0.0, r), 1.0 - r + 4.0 * r / PI, epsilon = 1e-15);
    }

    #[test]
    fn srrc_singular_point_is_continuous() {
        let r = 0.2;
        let x0 = 1.0 / (4.0 * r);
        let limit = srrc_value(x0, r);
        let near = srrc_value(x0 + 1e-6, r);
        assert!((limit - near).abs() < 1e-5, "{limit} vs {near}");
    }

    #[test]
    fn srrc_small_cascade_meets_nyquist() {
        let taps = design_srrc(0.5, 8, 4).unwrap();
        let (peak, worst) = self_conv_isi(&taps);
        assert!(worst < 1e-3 * peak, "isi {worst} vs peak {peak}");
    }

    #[test]
    fn srrc_default_link_cascade_meets_nyquist() {
        let taps = design_srrc(0.2, 64, 4).unwrap();
        let (peak, worst) = self_conv_isi(&taps);
        assert!(worst < 1e-3 * peak, "isi {worst} vs peak {peak}");
    }

    #[test]
    fn srrc_rejects_bad_parameters() {
        assert!(design_srrc(0.0, 8, 4).is_err());
        assert!(design_srrc(1.2, 8, 4).is_err());
        assert!(design_srrc(0.2, 7, 4).is_err());
        assert!(design_srrc(0.2, 0, 4).is_err());
        assert!(design_srrc(0.2, 8, 1).is_err());
    }

    #[test]
    fn upsample_places_symbols() {
        let s = upsample(&[c(1.0, 0.0)], 3, 1.0).unwrap();
        assert_eq!(s.samples, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(s.sample_rate, 3.0);
        let (a, b) = (c(1.0, 2.0), c(-3.0, 0.5));
        let s = upsample(&[a, b], 2, 1.0).unwrap();
        assert_eq!(s.samples, vec![a, c(0.0, 0.0), b, c(0.0, 0.0)]);
        assert!(upsample(&[a], 0, 1.0).is_err());
    }

    #[test]
    fn filter_identities() {
        let taps = design_srrc(0.3, 4, 4).unwrap();
        let mut x = vec![c(0.0, 0.0); 5];
        x[0] = c(1.0, 0.0);
        let y = filter(&SampledSignal::new(x, 4.0).unwrap(), &taps);
        for (yi, t) in y.samples.iter().zip(taps.taps()) {
            assert_relative_eq!(yi.re, *t, epsilon = 1e-15);
            assert_eq!(yi.im, 0.0);
        }
        assert_eq!(y.sample_rate, 4.0);

        let z = filter(&SampledSignal::new(vec![c(0.0, 0.0); 10], 4.0).unwrap(), &taps);
        assert_eq!(z.len(), 10 + taps.len() - 1);
        assert!(z.samples.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn filter_matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Cplx> = (0..64).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let taps = design_srrc(0.25, 6, 5).unwrap();
        let want = naive_conv(&x, taps.taps());
        let got = filter(&SampledSignal::new(x.clone(), 5.0).unwrap(), &taps);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.samples.iter().zip(&want) {
            assert!((g - w).norm() < 1e-10);
        }
        // The FFT route must agree with the naive sum as well.
        let fft = FftFilter::new(taps.taps(), x.len()).apply(&x);
        for (g, w) in fft.iter().zip(&want) {
            assert!((g - w).norm() < 1e-10);
        }
    }

    #[test]
    fn downsample_examples() {
        let v: Vec<Cplx> = (0..4).map(|i| c(i as f64, 0.0)).collect();
        let s = SampledSignal::new(v.clone(), 1.0).unwrap();
        assert_eq!(downsample(&s, 2, 0).unwrap(), vec![v[0], v[2]]);
        assert_eq!(downsample(&s, 2, 1).unwrap(), vec![v[1], v[3]]);
        assert!(downsample(&s, 2, 4).is_err());
        assert!(downsample(&s, 0, 0).is_err());
    }

    #[test]
    fn fast_len_is_smooth_and_minimal() {
        assert_eq!(fast_fft_len(1), 1);
        assert_eq!(fast_fft_len(7), 8);
        assert_eq!(fast_fft_len(11), 12);
        assert_eq!(fast_fft_len(188_400), 192_000);
        for n in 1..600 {
            let m = fast_fft_len(n);
            assert!(m >= n);
            let mut r = m;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            assert_eq!(r, 1);
            assert!((n..m).all(|k| {
                let mut r = k;
                for p in [2, 3, 5] {
                    while r % p == 0 {
                        r /= p;
                    }
                }
                r != 1
            }));
        }
    }

    #[test]
    fn psd_tone_peak() {
        let fs = 1000.0;
        let f0 = 123.0;
        let x: Vec<Cplx> = (0..8192).map(|k| Cplx::from_polar(1.0, 2.0 * PI * f0 * k as f64 / fs)).collect();
        let spec = estimate_psd(&SampledSignal::new(x, fs).unwrap(), 512, 256).unwrap();
        let bin = fs / 512.0;
        assert!((spec.peak_frequency() - f0).abs() <= bin);
        assert_eq!(spec.frequencies.len(), spec.power_density.len());
        assert!(spec.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(spec.frequencies[0], -fs / 2.0);
    }

    #[test]
    fn psd_white_noise_is_flat_and_integrates_to_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let var = 2.5;
        let sd = (var / 2.0f64).sqrt();
        let x: Vec<Cplx> = (0..256 * 200)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c(re * sd, im * sd)
            })
            .collect();
        let fs = 48_000.0;
        let spec = estimate_psd(&SampledSignal::new(x.clone(), fs).unwrap(), 256, 128).unwrap();
        let flat = 10.0 * (var / fs).log10();
        for p in &spec.power_density {
            assert!((p - flat).abs() < 3.0, "{p} vs {flat}");
        }
        let total = spec.total_power();
        let measured = mean_power(&x);
        assert!((total / measured - 1.0).abs() < 0.05);
    }

    #[test]
    fn psd_rejects_bad_segments() {
        let s = SampledSignal::new(vec![c(1.0, 0.0); 16], 1.0).unwrap();
        assert!(estimate_psd(&s, 32, 0).is_err());
        assert!(estimate_psd(&s, 8, 8).is_err());
        assert!(estimate_psd(&s, 0, 0).is_err());
    }

    #[test]
    fn signal_rejects_bad_rate() {
        assert!(SampledSignal::new(vec![], 0.0).is_err());
        assert!(SampledSignal::new(vec![], f64::NAN).is_err());
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Cplx>> {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| c(a, b)), len)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn srrc_taps_invariants(rolloff in 0.05f64..=1.0, half_span in 1usize..10, eta in 2usize..12) {
            let taps = design_srrc(rolloff, 2 * half_span, eta).unwrap();
            prop_assert_eq!(taps.len(), 2 * half_span * eta + 1);
            let t = taps.taps();
            for i in 0..t.len() {
                let j = t.len() - 1 - i;
                prop_assert!((t[i] - t[j]).abs() <= 1e-12 * t[i].abs().max(t[j].abs()).max(1e-300));
            }
            prop_assert!((taps.energy() - 1.0).abs() < 1e-9);
        }

        // Truncation ISI stays under 1e-3 for rolloff >= 0.5 only from span 22 upwards.
        #[test]
        fn srrc_cascade_nyquist(rolloff in 0.5f64..=1.0, half_span in 11usize..16, eta in 4usize..9) {
            let taps = design_srrc(rolloff, 2 * half_span, eta).unwrap();
            let (peak, worst) = self_conv_isi(&taps);
            prop_assert!(worst < 1e-3 * peak, "isi {} vs {}", worst, peak);
        }

        #[test]
        fn filter_is_linear(x in complex_vec(40), y in complex_vec(40),
                            a in (-3.0f64..3.0, -3.0f64..3.0), b in (-3.0f64..3.0, -3.0f64..3.0)) {
            let (a, b) = (c(a.0, a.1), c(b.0, b.1));
            let taps = design_srrc(0.4, 4, 4).unwrap();
            let sig = |v: Vec<Cplx>| SampledSignal::new(v, 4.0).unwrap();
            let mix: Vec<Cplx> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = filter(&sig(mix), &taps);
            let fx = filter(&sig(x), &taps);
            let fy = filter(&sig(y), &taps);
            for ((l, p), q) in lhs.samples.iter().zip(&fx.samples).zip(&fy.samples) {
                prop_assert!((l - (a * p + b * q)).norm() < 1e-10);
            }
        }

        #[test]
        fn upsample_preserves_energy_and_round_trips(x in complex_vec(17), factor in 1usize..9) {
            let up = upsample(&x, factor, 1.0).unwrap();
            prop_assert_eq!(up.len(), x.len() * factor);
            let e_in: f64 = x.iter().map(|s| s.norm_sqr()).sum();
            let e_out: f64 = up.samples.iter().map(|s| s.norm_sqr()).sum();
            prop_assert!((e_in - e_out).abs() <= 1e-12 * e_in.max(1.0));
            prop_assert_eq!(downsample(&up, factor, 0).unwrap(), x);
        }
    }
}
