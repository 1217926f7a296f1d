//! Per-mode Lévy increments.
//!
//! Every mode carries an independent scalar Lévy process
//! `L_{ell,m} = a_ell * Lhat_{ell,m}` where `Lhat` has unit variance per unit
//! time and is one of
//!
//! * `W` (Brownian motion),
//! * `(W + P - t) / sqrt(2)` (Brownian motion plus compensated unit-rate Poisson),
//! * `(W + P) / sqrt(2)` (same, without compensation; mean `t / sqrt(2)`).
//!
//! Draws come from a counter-based generator keyed by
//! `(seed, sample, mode, step, channel)`, so an increment depends only on its
//! key and never on the order in which samples are scheduled.

use rand_core::RngCore;
use rand_distr::{Distribution, Poisson, StandardNormal};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::sphere_modes::{AngularSpectrum, ModeIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevyKind {
    GaussianOnly,
    CompensatedMix,
    NonCompensatedMix,
}

impl LevyKind {
    /// Mean of `Lhat(1)`.
    pub fn unit_mean(self) -> f64 {
        match self {
            LevyKind::GaussianOnly | LevyKind::CompensatedMix => 0.0,
            LevyKind::NonCompensatedMix => FRAC_1_SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyConfig {
    pub kind: LevyKind,
    pub spectrum: AngularSpectrum,
    pub master_seed: u64,
    /// Draw independent real and imaginary parts, each `1/sqrt(2)` times a
    /// copy of the real increment. Only meaningful for the Schrödinger equation.
    pub complex_noise: bool,
}

impl LevyConfig {
    pub fn new(kind: LevyKind, spectrum: AngularSpectrum, master_seed: u64) -> Self {
        Self {
            kind,
            spectrum,
            master_seed,
            complex_noise: false,
        }
    }

    /// Per-unit-time mean `m_{ell,m}` of the real process.
    pub fn mean_rate(&self, ell: u32) -> Result<f64> {
        Ok(self.spectrum.amplitude(ell)? * self.kind.unit_mean())
    }

    /// Per-unit-time variance `v_{ell,m}`.
    pub fn variance_rate(&self, ell: u32) -> Result<f64> {
        self.spectrum.variance_rate(ell)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.kind.unit_mean() == 0.0 || self.spectrum.amplitudes().iter().all(|&a| a == 0.0)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::config("tau", format!("time step must be positive, got {tau}")))
    }
}

/// `E[Delta L]` over a step of length `tau`.
pub fn increment_mean(mode: ModeIndex, tau: f64, config: &LevyConfig) -> Result<f64> {
    check_tau(tau)?;
    Ok(config.mean_rate(mode.ell())? * tau)
}

/// `Var[Delta L] = a_ell^2 tau` for every kind.
pub fn increment_variance(mode: ModeIndex, tau: f64, config: &LevyConfig) -> Result<f64> {
    check_tau(tau)?;
    Ok(config.variance_rate(mode.ell())? * tau)
}

/// Independent draw sequences attached to one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Channel {
    /// Real noise (wave, Schrödinger) or the E-field noise (Maxwell).
    Noise = 0,
    /// Imaginary part of complex Schrödinger noise.
    NoiseImag = 1,
    /// H-field noise (Maxwell).
    NoiseH = 2,
    /// First initial-state coefficient (displacement, real part, E).
    InitialFirst = 3,
    /// Second initial-state coefficient (velocity, imaginary part, H).
    InitialSecond = 4,
}

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Keyed counter-based stream. Two streams with equal keys yield equal output.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u32; 2],
    counter: [u32; 4],
    buffer: [u32; 4],
    used: usize,
}

impl RngStream {
    /// Blocks available to one key before the counter would spill into the
    /// channel byte.
    const MAX_BLOCKS: u32 = 1 << 24;

    pub fn new(master_seed: u64, sample: u32, mode_rank: u32, step: u32, channel: Channel) -> Self {
        Self {
            key: [master_seed as u32, (master_seed >> 32) as u32],
            counter: [(channel as u32) << 24, step, mode_rank, sample],
            buffer: [0; 4],
            used: 4,
        }
    }

    /// Same key with a different channel.
    pub fn with_channel(&self, channel: Channel) -> Self {
        let mut counter = self.counter;
        counter[0] = (channel as u32) << 24;
        Self {
            key: self.key,
            counter,
            buffer: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        self.buffer = philox4x32_10(self.counter, self.key);
        let block = (self.counter[0] & (Self::MAX_BLOCKS - 1)) + 1;
        assert!(block < Self::MAX_BLOCKS, "rng stream exhausted");
        self.counter[0] = (self.counter[0] & !(Self::MAX_BLOCKS - 1)) | block;
        self.used = 0;
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buffer[self.used];
        self.used += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

/// Poisson variate by sequential inversion of the CDF.
fn poisson_inversion(mean: f64, exp_neg_mean: f64, u: f64) -> f64 {
    let mut k = 0u32;
    let mut p = exp_neg_mean;
    let mut cdf = p;
    while u >= cdf && p > 0.0 {
        k += 1;
        p *= mean / f64::from(k);
        cdf += p;
    }
    f64::from(k)
}

/// Step-size dependent constants for drawing increments of every mode.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    kind: LevyKind,
    tau: f64,
    sqrt_tau: f64,
    exp_neg_tau: f64,
    amplitudes: Vec<f64>,
    complex: bool,
}

impl NoiseSampler {
    pub fn new(config: &LevyConfig, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            kind: config.kind,
            tau,
            sqrt_tau: tau.sqrt(),
            exp_neg_tau: (-tau).exp(),
            amplitudes: config.spectrum.amplitudes().to_vec(),
            complex: config.complex_noise,
        })
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn amplitude(&self, ell: u32) -> Result<f64> {
        self.amplitudes
            .get(ell as usize)
            .copied()
            .ok_or(Error::SpectrumTooShort {
                len: self.amplitudes.len(),
                ell,
            })
    }

    fn poisson(&self, stream: &mut RngStream) -> f64 {
        if self.tau <= 10.0 {
            poisson_inversion(self.tau, self.exp_neg_tau, stream.uniform())
        } else {
            Poisson::new(self.tau)
                .expect("positive finite rate")
                .sample(stream)
        }
    }

    /// Unit-amplitude increment `Lhat(t + tau) - Lhat(t)`.
    pub fn draw_unit(&self, stream: &mut RngStream) -> f64 {
        let dw = self.sqrt_tau * stream.standard_normal();
        match self.kind {
            LevyKind::GaussianOnly => dw,
            LevyKind::CompensatedMix => (dw + self.poisson(stream) - self.tau) * FRAC_1_SQRT_2,
            LevyKind::NonCompensatedMix => (dw + self.poisson(stream)) * FRAC_1_SQRT_2,
        }
    }

    /// Real increment for a mode of degree `ell` with amplitude `amplitude`.
    #[inline]
    pub fn draw_scaled(&self, amplitude: f64, stream: &mut RngStream) -> f64 {
        if amplitude == 0.0 {
            return 0.0;
        }
        amplitude * self.draw_unit(stream)
    }
}

/// A single increment; complex when the configuration asks for complex noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Increment {
    Real(f64),
    Complex(f64, f64),
}

impl Increment {
    pub fn re(&self) -> f64 {
        match *self {
            Increment::Real(x) | Increment::Complex(x, _) => x,
        }
    }

    pub fn im(&self) -> f64 {
        match *self {
            Increment::Real(_) => 0.0,
            Increment::Complex(_, y) => y,
        }
    }
}

/// Draw `Delta L_{ell,m}` over a step of length `tau` from the keyed stream.
///
/// Complex noise takes its imaginary part from the same key on
/// [`Channel::NoiseImag`].
pub fn sample_increment(
    mode: ModeIndex,
    tau: f64,
    config: &LevyConfig,
    stream: &RngStream,
) -> Result<Increment> {
    let sampler = NoiseSampler::new(config, tau)?;
    let a = sampler.amplitude(mode.ell())?;
    let mut re_stream = stream.clone();
    if config.complex_noise {
        let mut im_stream = stream.with_channel(Channel::NoiseImag);
        let re = sampler.draw_scaled(a, &mut re_stream) * FRAC_1_SQRT_2;
        let im = sampler.draw_scaled(a, &mut im_stream) * FRAC_1_SQRT_2;
        Ok(Increment::Complex(re, im))
    } else {
        Ok(Increment::Real(sampler.draw_scaled(a, &mut re_stream)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    fn config(kind: LevyKind, amps: Vec<f64>) -> LevyConfig {
        LevyConfig::new(kind, AngularSpectrum::new(amps).unwrap(), 42)
    }

    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0; 4], [0; 2]),
            [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344],
                [0xa4093822, 0x299f31d0]
            ),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn mean_examples() {
        let mode = ModeIndex::new(1, 0).unwrap();
        let comp = config(LevyKind::CompensatedMix, vec![1.0, 1.0]);
        assert_eq!(increment_mean(mode, 0.2, &comp).unwrap(), 0.0);
        let non = config(LevyKind::NonCompensatedMix, vec![1.0, 1.0]);
        let m = increment_mean(mode, 0.2, &non).unwrap();
        assert!((m - 0.2 / 2f64.sqrt()).abs() < 1e-15);

        let non2 = config(LevyKind::NonCompensatedMix, vec![1.0, 1.0, 1.0 / 16.0]);
        let m2 = increment_mean(ModeIndex::new(2, 1).unwrap(), 1.0, &non2).unwrap();
        assert!((m2 - (1.0 / 16.0) / 2f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn variance_examples() {
        let comp = config(LevyKind::CompensatedMix, vec![1.0, 1.0, 1.0 / 16.0]);
        let v0 = increment_variance(ModeIndex::new(0, 0).unwrap(), 0.5, &comp).unwrap();
        assert_eq!(v0, 0.5);
        for kind in [
            LevyKind::GaussianOnly,
            LevyKind::CompensatedMix,
            LevyKind::NonCompensatedMix,
        ] {
            let c = config(kind, vec![1.0, 1.0, 1.0 / 16.0]);
            let v = increment_variance(ModeIndex::new(2, 0).unwrap(), 1.0, &c).unwrap();
            assert_eq!(v, 1.0 / 256.0);
            let tiny = increment_variance(ModeIndex::new(2, 0).unwrap(), 1e-300, &c).unwrap();
            assert!(tiny < 1e-300);
        }
    }

    #[test]
    fn bad_inputs() {
        let c = config(LevyKind::GaussianOnly, vec![1.0]);
        let mode = ModeIndex::new(1, 0).unwrap();
        assert!(matches!(
            increment_mean(mode, 1.0, &c),
            Err(Error::SpectrumTooShort { .. })
        ));
        assert!(increment_variance(ModeIndex::new(0, 0).unwrap(), 0.0, &c).is_err());
        assert!(increment_mean(ModeIndex::new(0, 0).unwrap(), -1.0, &c).is_err());
    }

    #[test]
    fn zero_amplitude_draws_exact_zero() {
        let c = config(LevyKind::GaussianOnly, vec![0.0]);
        let stream = RngStream::new(1, 0, 0, 0, Channel::Noise);
        let x = sample_increment(ModeIndex::new(0, 0).unwrap(), 0.3, &c, &stream).unwrap();
        assert_eq!(x, Increment::Real(0.0));
    }

    #[test]
    fn identical_keys_identical_draws() {
        let c = config(LevyKind::CompensatedMix, vec![1.0, 0.5]);
        let mode = ModeIndex::new(1, -1).unwrap();
        let serial: Vec<f64> = (0..1000u32)
            .map(|s| {
                let stream = RngStream::new(9, s, mode.rank() as u32, 17, Channel::Noise);
                sample_increment(mode, 0.1, &c, &stream).unwrap().re()
            })
            .collect();
        let parallel: Vec<f64> = (0..1000u32)
            .into_par_iter()
            .rev()
            .map(|s| {
                let stream = RngStream::new(9, s, mode.rank() as u32, 17, Channel::Noise);
                sample_increment(mode, 0.1, &c, &stream).unwrap().re()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        assert_eq!(
            serial.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            parallel.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    fn moments(kind: LevyKind, tau: f64, n: u32) -> (f64, f64, f64) {
        let sampler = NoiseSampler::new(&config(kind, vec![1.0]), tau).unwrap();
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = RngStream::new(2024, i, 0, 3, Channel::Noise);
                sampler.draw_scaled(1.0, &mut s)
            })
            .collect();
        let nf = f64::from(n);
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
        (mean, var, m4)
    }

    #[test]
    fn compensated_mix_unit_moments() {
        let n = 1_000_000;
        let (mean, var, _) = moments(LevyKind::CompensatedMix, 1.0, n);
        assert!(mean.abs() < 4.0 / f64::from(n).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn empirical_moments_match_exact_for_every_kind() {
        let n = 1_000_000u32;
        let nf = f64::from(n);
        for kind in [
            LevyKind::GaussianOnly,
            LevyKind::CompensatedMix,
            LevyKind::NonCompensatedMix,
        ] {
            for tau in [0.01, 0.2, 1.0] {
                let c = config(kind, vec![1.0]);
                let mode = ModeIndex::new(0, 0).unwrap();
                let exact_mean = increment_mean(mode, tau, &c).unwrap();
                let exact_var = increment_variance(mode, tau, &c).unwrap();
                let (mean, var, m4) = moments(kind, tau, n);
                let se_mean = (exact_var / nf).sqrt();
                let se_var = ((m4 - var * var) / nf).sqrt();
                assert!(
                    (mean - exact_mean).abs() < 5.0 * se_mean,
                    "{kind:?} tau={tau}: mean {mean} vs {exact_mean}"
                );
                assert!(
                    (var - exact_var).abs() < 5.0 * se_var,
                    "{kind:?} tau={tau}: var {var} vs {exact_var}"
                );
            }
        }
    }

    #[test]
    fn distinct_keys_uncorrelated() {
        let n = 1_000_000u32;
        let sampler = NoiseSampler::new(&config(LevyKind::CompensatedMix, vec![1.0]), 1.0).unwrap();
        let draw = |sample: u32, mode: u32, step: u32| {
            let mut s = RngStream::new(77, sample, mode, step, Channel::Noise);
            sampler.draw_scaled(1.0, &mut s)
        };
        // neighbouring samples, modes and steps
        for (dx, dm, ds) in [(1u32, 0u32, 0u32), (0, 1, 0), (0, 0, 1)] {
            let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let x = draw(2 * i, 5, 11);
                let y = draw(2 * i + dx, 5 + dm, 11 + ds);
                sxy += x * y;
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
            }
            let nf = f64::from(n);
            let cov = sxy / nf - sx * sy / (nf * nf);
            let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
            assert!(corr.abs() < 5.0 / nf.sqrt(), "corr {corr} for shift {dx},{dm},{ds}");
        }
    }

    #[test]
    fn complex_noise_splits_variance() {
        let mut c = config(LevyKind::GaussianOnly, vec![1.0]);
        c.complex_noise = true;
        let mode = ModeIndex::new(0, 0).unwrap();
        let n = 200_000u32;
        let (mut re2, mut im2, mut cross) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let s = RngStream::new(5, i, 0, 0, Channel::Noise);
            let inc = sample_increment(mode, 1.0, &c, &s).unwrap();
            re2 += inc.re() * inc.re();
            im2 += inc.im() * inc.im();
            cross += inc.re() * inc.im();
        }
        let nf = f64::from(n);
        assert!((re2 / nf - 0.5).abs() < 0.01);
        assert!((im2 / nf - 0.5).abs() < 0.01);
        assert!((cross / nf).abs() < 0.01);
    }

    #[test]
    fn poisson_inversion_small_cases() {
        let e = (-1.0f64).exp();
        assert_eq!(poisson_inversion(1.0, e, 0.0), 0.0);
        assert_eq!(poisson_inversion(1.0, e, e - 1e-12), 0.0);
        assert_eq!(poisson_inversion(1.0, e, e + 1e-12), 1.0);
        assert_eq!(poisson_inversion(1.0, e, 2.0 * e + 1e-12), 2.0);
    }
}
