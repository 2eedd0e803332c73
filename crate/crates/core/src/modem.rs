//! Constellation mapping, pilot-based least-squares channel estimation and
//! minimum-distance detection.
//!
//! QPSK uses a fixed Gray map that walks the quadrants anticlockwise starting
//! from `(1+j)/sqrt(2)`:
//!
//! | bits | symbol          |
//! |------|-----------------|
//! | 00   | `( 1 + j)/sqrt2` |
//! | 01   | `(-1 + j)/sqrt2` |
//! | 11   | `(-1 - j)/sqrt2` |
//! | 10   | `( 1 - j)/sqrt2` |
//!
//! Larger square QAM alphabets extend the same rule: the leading half of the
//! bits Gray-selects the quadrature level and the trailing half the in-phase
//! level, with all-zero bits at the largest positive level.

use crate::dsp::Cplx;
use crate::error::{Error, Result};

/// Estimates whose magnitude falls below this are rejected by the detector.
pub const MIN_ESTIMATE_MAGNITUDE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Cplx>,
    bits_per_symbol: usize,
}

impl Constellation {
    pub fn qpsk() -> Self {
        Self::square_qam(2).expect("QPSK is a valid square constellation")
    }

    /// Gray-coded square QAM with `bits_per_symbol` bits (2, 4, 6, ...),
    /// normalized to unit average energy.
    pub fn square_qam(bits_per_symbol: usize) -> Result<Self> {
        if bits_per_symbol == 0 || !bits_per_symbol.is_multiple_of(2) || bits_per_symbol > 16 {
            return Err(Error::invalid(format!(
                "square QAM needs an even number of bits per symbol, got {bits_per_symbol}"
            )));
        }
        let axis_bits = bits_per_symbol / 2;
        let levels = 1usize << axis_bits;
        let level = |gray: usize| -> f64 {
            let mut b = gray;
            let mut shift = gray >> 1;
            while shift != 0 {
                b ^= shift;
                shift >>= 1;
            }
            (levels - 1) as f64 - 2.0 * b as f64
        };
        let mask = levels - 1;
        let mut points: Vec<Cplx> = (0..1usize << bits_per_symbol)
            .map(|idx| Cplx::new(level(idx & mask), level(idx >> axis_bits)))
            .collect();
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        let scale = energy.sqrt().recip();
        points.iter_mut().for_each(|p| *p *= scale);
        Ok(Self { points, bits_per_symbol })
    }

    pub fn from_modulation_order(order: usize) -> Result<Self> {
        if !order.is_power_of_two() || order < 4 {
            return Err(Error::invalid(format!("unsupported modulation order {order}")));
        }
        Self::square_qam(order.trailing_zeros() as usize)
    }

    pub fn points(&self) -> &[Cplx] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Bits of symbol `index`, most significant first.
    pub fn index_bits(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.bits_per_symbol).rev().map(move |b| ((index >> b) & 1) as u8)
    }

    /// Index of the point minimizing `|r - h a|^2`; ties go to the lowest index.
    pub fn nearest(&self, received: Cplx, channel: Cplx) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (received - channel * p).norm_sqr();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

/// Known symbols sent ahead of the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    symbols: Vec<Cplx>,
}

// Fixed QPSK index pattern the pilot block cycles through.
const PILOT_PATTERN: [usize; 16] = [0, 3, 1, 2, 2, 1, 3, 0, 1, 0, 2, 3, 3, 2, 0, 1];

impl PilotBlock {
    pub fn new(symbols: Vec<Cplx>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("pilot block must hold at least one symbol"));
        }
        if symbols.iter().all(|s| s.norm_sqr() == 0.0) {
            return Err(Error::DegeneratePilots);
        }
        Ok(Self { symbols })
    }

    /// The fixed pilot sequence of length `len` drawn from `constellation`.
    pub fn standard(len: usize, constellation: &Constellation) -> Result<Self> {
        let m = constellation.order();
        Self::new((0..len).map(|i| constellation.points()[PILOT_PATTERN[i % 16] % m]).collect())
    }

    pub fn symbols(&self) -> &[Cplx] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub value: Cplx,
}

impl ChannelEstimate {
    pub fn new(value: Cplx) -> Self {
        Self { value }
    }
}

/// Maps bits (one `0`/`1` per byte) to constellation symbols.
pub fn map_bits(bits: &[u8], constellation: &Constellation) -> Result<Vec<Cplx>> {
    let m = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(m) {
        return Err(Error::InvalidLength { bits: bits.len(), bits_per_symbol: m });
    }
    Ok(bits
        .chunks(m)
        .map(|chunk| {
            let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            constellation.points()[idx]
        })
        .collect())
}

/// Minimum Euclidean distance decisions against `estimate * a`.
pub fn detect_ml(received: &[Cplx], estimate: ChannelEstimate, constellation: &Constellation) -> Result<Vec<u8>> {
    if !(estimate.value.norm() >= MIN_ESTIMATE_MAGNITUDE) {
        return Err(Error::DegenerateEstimate);
    }
    let mut bits = Vec::with_capacity(received.len() * constellation.bits_per_symbol());
    for r in received {
        let idx = constellation.nearest(*r, estimate.value);
        bits.extend(constellation.index_bits(idx));
    }
    Ok(bits)
}

/// Scalar least-squares channel estimate `a^H r / a^H a`.
pub fn ls_estimate(received_pilots: &[Cplx], pilots: &PilotBlock) -> Result<ChannelEstimate> {
    if received_pilots.len() != pilots.len() {
        return Err(Error::LengthMismatch { expected: pilots.len(), actual: received_pilots.len() });
    }
    let energy: f64 = pilots.symbols().iter().map(|a| a.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::DegeneratePilots);
    }
    let corr: Cplx = pilots.symbols().iter().zip(received_pilots).map(|(a, r)| a.conj() * r).sum();
    Ok(ChannelEstimate::new(corr / energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use statrs::function::erf::erfc;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn gaussian_tail(x: f64) -> f64 {
        0.5 * erfc(x / 2f64.sqrt())
    }

    fn noise(rng: &mut ChaCha8Rng, var: f64) -> Cplx {
        let sd = (var / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Cplx::new(re * sd, im * sd)
    }

    #[test]
    fn qpsk_gray_anchor() {
        let q = Constellation::qpsk();
        let s = FRAC_1_SQRT_2;
        let cases = [([0, 0], (s, s)), ([0, 1], (-s, s)), ([1, 1], (-s, -s)), ([1, 0], (s, -s))];
        for (bits, (re, im)) in cases {
            let sym = map_bits(&bits, &q).unwrap();
            assert_relative_eq!(sym[0].re, re, epsilon = 1e-15);
            assert_relative_eq!(sym[0].im, im, epsilon = 1e-15);
            let back = detect_ml(&sym, ChannelEstimate::new(Cplx::new(1.0, 0.0)), &q).unwrap();
            assert_eq!(back, bits);
        }
    }

    #[test]
    fn qam_is_gray_and_unit_energy() {
        for bits in [2, 4, 6] {
            let c = Constellation::square_qam(bits).unwrap();
            assert_eq!(c.order(), 1 << bits);
            assert!((c.mean_energy() - 1.0).abs() < 1e-12);
            // Nearest neighbours differ in exactly one bit.
            let pts = c.points();
            let dmin = (0..pts.len())
                .flat_map(|i| (0..pts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| (pts[i] - pts[j]).norm())
                .fold(f64::INFINITY, f64::min);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j && ((pts[i] - pts[j]).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1);
                    }
                }
            }
        }
        assert!(Constellation::square_qam(3).is_err());
        assert!(Constellation::from_modulation_order(8).is_err());
        assert_eq!(Constellation::from_modulation_order(16).unwrap().bits_per_symbol(), 4);
    }

    #[test]
    fn map_rejects_ragged_bits() {
        let q = Constellation::qpsk();
        assert!(matches!(map_bits(&[0, 1, 1], &q), Err(Error::InvalidLength { bits: 3, bits_per_symbol: 2 })));
    }

    #[test]
    fn random_bits_have_unit_energy() {
        let q = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bits: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2u8)).collect();
        let syms = map_bits(&bits, &q).unwrap();
        let e = syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64;
        assert!((e - 1.0).abs() < 0.02);
    }

    #[test]
    fn noiseless_detection_is_exact() {
        let q = Constellation::qpsk();
        let h = Cplx::from_polar(0.7, 1.1);
        let rx: Vec<Cplx> = q.points().iter().map(|a| h * a).collect();
        let bits = detect_ml(&rx, ChannelEstimate::new(h), &q).unwrap();
        let want: Vec<u8> = (0..4).flat_map(|i| q.index_bits(i).collect::<Vec<_>>()).collect();
        assert_eq!(bits, want);
    }

    #[test]
    fn rotated_estimate_matches_brute_force() {
        let q = Constellation::qpsk();
        let h = Cplx::from_polar(1.0, FRAC_PI_4);
        let r = Cplx::new(1.0, 0.0);
        // Exhaustive distances over the four rotated points.
        let dists: Vec<f64> = q.points().iter().map(|a| (r - h * a).norm_sqr()).collect();
        let mut best = 0;
        for i in 1..4 {
            if dists[i] < dists[best] {
                best = i;
            }
        }
        let bits = detect_ml(&[r], ChannelEstimate::new(h), &q).unwrap();
        assert_eq!(bits, q.index_bits(best).collect::<Vec<_>>());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let q = Constellation::qpsk();
        // The origin is equidistant from every point.
        assert_eq!(q.nearest(Cplx::new(0.0, 0.0), Cplx::new(1.0, 0.0)), 0);
    }

    #[test]
    fn degenerate_estimate_rejected() {
        let q = Constellation::qpsk();
        let err = detect_ml(&[Cplx::new(1.0, 0.0)], ChannelEstimate::new(Cplx::new(1e-13, 0.0)), &q);
        assert!(matches!(err, Err(Error::DegenerateEstimate)));
    }

    #[test]
    fn ls_recovers_noiseless_channel() {
        let q = Constellation::qpsk();
        let pilots = PilotBlock::standard(8, &q).unwrap();
        assert_eq!(pilots.len(), 8);
        let h = Cplx::new(-0.3, 1.7);
        let rx: Vec<Cplx> = pilots.symbols().iter().map(|a| h * a).collect();
        let est = ls_estimate(&rx, &pilots).unwrap();
        assert!((est.value - h).norm() < 1e-12);
    }

    #[test]
    fn ls_matches_normal_equation_sum() {
        let q = Constellation::qpsk();
        let pilots = PilotBlock::standard(8, &q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = Cplx::new(0.4, -0.9);
        let rx: Vec<Cplx> = pilots.symbols().iter().map(|a| h * a + noise(&mut rng, 0.3)).collect();
        let mut num_re = 0.0;
        let mut num_im = 0.0;
        let mut den = 0.0;
        for (a, r) in pilots.symbols().iter().zip(&rx) {
            num_re += a.re * r.re + a.im * r.im;
            num_im += a.re * r.im - a.im * r.re;
            den += a.re * a.re + a.im * a.im;
        }
        let est = ls_estimate(&rx, &pilots).unwrap();
        assert!((est.value - Cplx::new(num_re / den, num_im / den)).norm() < 1e-10);
    }

    #[test]
    fn ls_errors() {
        let q = Constellation::qpsk();
        let pilots = PilotBlock::standard(4, &q).unwrap();
        assert!(matches!(ls_estimate(&[Cplx::new(1.0, 0.0)], &pilots), Err(Error::LengthMismatch { .. })));
        assert!(matches!(PilotBlock::new(vec![Cplx::new(0.0, 0.0); 3]), Err(Error::DegeneratePilots)));
        assert!(PilotBlock::new(vec![]).is_err());
    }

    #[test]
    fn ls_is_unbiased_over_noise() {
        let q = Constellation::qpsk();
        let pilots = PilotBlock::standard(8, &q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = Cplx::from_polar(1.0, 0.6);
        let var = 0.1; // 10 dB
        let draws = 10_000;
        let mut acc = Cplx::new(0.0, 0.0);
        for _ in 0..draws {
            let rx: Vec<Cplx> = pilots.symbols().iter().map(|a| h * a + noise(&mut rng, var)).collect();
            acc += ls_estimate(&rx, &pilots).unwrap().value;
        }
        let mean = acc / draws as f64;
        assert!((mean - h).norm() / h.norm() < 0.01);
    }

    #[test]
    fn awgn_ber_follows_gaussian_tail() {
        let q = Constellation::qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for snr_db in [0.0f64, 4.0] {
            let snr = 10f64.powf(snr_db / 10.0);
            // Bit-energy SNR: complex noise variance per unit-energy QPSK symbol is 1/(2 snr).
            let var = 1.0 / (2.0 * snr);
            let n_bits = 400_000;
            let bits: Vec<u8> = (0..n_bits).map(|_| rng.random_range(0..2u8)).collect();
            let rx: Vec<Cplx> = map_bits(&bits, &q).unwrap().into_iter().map(|s| s + noise(&mut rng, var)).collect();
            let got = detect_ml(&rx, ChannelEstimate::new(Cplx::new(1.0, 0.0)), &q).unwrap();
            let errors = got.iter().zip(&bits).filter(|(a, b)| a != b).count();
            let ber = errors as f64 / n_bits as f64;
            let want = gaussian_tail((2.0 * snr).sqrt());
            let se = (want * (1.0 - want) / n_bits as f64).sqrt();
            assert!((ber - want).abs() < 3.0 * se, "snr {snr_db}: {ber} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn demap_inverts_map(bits in prop::collection::vec(0u8..2, 0..64).prop_map(|mut v| { v.truncate(v.len() / 4 * 4); v })) {
            for order in [4usize, 16] {
                let c = Constellation::from_modulation_order(order).unwrap();
                let syms = map_bits(&bits, &c).unwrap();
                prop_assert_eq!(detect_ml(&syms, ChannelEstimate::new(Cplx::new(1.0, 0.0)), &c).unwrap(), bits.clone());
            }
        }

        #[test]
        fn common_scaling_preserves_decisions(re in -2.0f64..2.0, im in -2.0f64..2.0,
                                              mag in 0.01f64..100.0, phase in -3.2f64..3.2,
                                              hmag in 0.1f64..3.0, hphase in -3.2f64..3.2) {
            let q = Constellation::qpsk();
            let r = Cplx::new(re, im);
            let h = Cplx::from_polar(hmag, hphase);
            let s = Cplx::from_polar(mag, phase);
            let a = detect_ml(&[r], ChannelEstimate::new(h), &q).unwrap();
            let b = detect_ml(&[r * s], ChannelEstimate::new(h * s), &q).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn redetection_is_idempotent(re in -2.0f64..2.0, im in -2.0f64..2.0, hmag in 0.1f64..3.0, hphase in -3.2f64..3.2) {
            let q = Constellation::qpsk();
            let h = ChannelEstimate::new(Cplx::from_polar(hmag, hphase));
            let bits = detect_ml(&[Cplx::new(re, im)], h, &q).unwrap();
            let resynth: Vec<Cplx> = map_bits(&bits, &q).unwrap().into_iter().map(|a| h.value * a).collect();
            prop_assert_eq!(detect_ml(&resynth, h, &q).unwrap(), bits);
        }
    }
}
