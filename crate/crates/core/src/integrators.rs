//! One-step maps for the three equations.
//!
//! In the spectral basis every scheme decouples into independent per-mode
//! updates: a 2x2 real map for the wave equation and for each TE mode of
//! Maxwell's equations, and a complex scalar multiplier for the Schrödinger
//! equation. The noise increment is added after the map (forward
//! Euler-Maruyama) or before it (backward Euler-Maruyama and the exponential
//! schemes).

use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sphere_modes::{eigenvalue, ModeIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    ForwardEM,
    BackwardEM,
    ExpEuler,
    /// Exponential scheme that integrates the drift of a nonzero-mean noise
    /// exactly. Wave equation only.
    AdaptedExpEuler,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::ForwardEM,
        SchemeId::BackwardEM,
        SchemeId::ExpEuler,
        SchemeId::AdaptedExpEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ForwardEM => "fem",
            SchemeId::BackwardEM => "bem",
            SchemeId::ExpEuler => "exp",
            SchemeId::AdaptedExpEuler => "adapted",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "fem" | "forwardem" | "em" | "eem" => Ok(SchemeId::ForwardEM),
            "bem" | "backwardem" => Ok(SchemeId::BackwardEM),
            "exp" | "expeuler" | "stm" | "trig" => Ok(SchemeId::ExpEuler),
            "adapted" | "adaptedexpeuler" | "astm" => Ok(SchemeId::AdaptedExpEuler),
            _ => Err(Error::config(
                "scheme",
                format!("unknown scheme `{s}` (expected fem, bem, exp or adapted)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    Wave,
    Schrodinger,
    Maxwell,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Wave => "wave",
            Equation::Schrodinger => "schrodinger",
            Equation::Maxwell => "maxwell",
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wave" => Ok(Equation::Wave),
            "schrodinger" | "schroedinger" | "schrödinger" => Ok(Equation::Schrodinger),
            "maxwell" => Ok(Equation::Maxwell),
            _ => Err(Error::config(
                "equation",
                format!("unknown equation `{s}` (expected wave, schrodinger or maxwell)"),
            )),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::config("tau", format!("time step must be positive, got {tau}")))
    }
}

/// Real 2x2 matrix `[[r11, r12], [r21, r22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator2x2 {
    pub r11: f64,
    pub r12: f64,
    pub r21: f64,
    pub r22: f64,
}

impl Propagator2x2 {
    pub const IDENTITY: Self = Self {
        r11: 1.0,
        r12: 0.0,
        r21: 0.0,
        r22: 1.0,
    };

    pub fn new(r11: f64, r12: f64, r21: f64, r22: f64) -> Self {
        Self { r11, r12, r21, r22 }
    }

    #[inline(always)]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.r11 * x + self.r12 * y, self.r21 * x + self.r22 * y)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.r11 * k, self.r12 * k, self.r21 * k, self.r22 * k)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.r11 * o.r11 + self.r12 * o.r21,
            self.r11 * o.r12 + self.r12 * o.r22,
            self.r21 * o.r11 + self.r22 * o.r21,
            self.r21 * o.r12 + self.r22 * o.r22,
        )
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.r11, self.r21, self.r12, self.r22)
    }

    pub fn determinant(&self) -> f64 {
        self.r11 * self.r22 - self.r12 * self.r21
    }
}

/// Trigonometric factors of `omega * tau` with `omega = sqrt(lambda)`, using
/// two-term series when `omega * tau` is tiny so that `lambda = 0` needs no
/// special case.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Trig {
    pub cos: f64,
    pub sin: f64,
    /// `sin(omega tau) / omega`
    pub sinc: f64,
    /// `omega sin(omega tau)`
    pub omega_sin: f64,
    /// `(1 - cos(omega tau)) / lambda`
    pub versine: f64,
}

pub(crate) const SERIES_THRESHOLD: f64 = 1e-4;

pub(crate) fn trig(lambda: f64, tau: f64) -> Trig {
    let omega = lambda.sqrt();
    let x = omega * tau;
    if x < SERIES_THRESHOLD {
        let x2 = x * x;
        Trig {
            cos: 1.0 - 0.5 * x2,
            sin: x * (1.0 - x2 / 6.0),
            sinc: tau * (1.0 - x2 / 6.0),
            omega_sin: lambda * tau * (1.0 - x2 / 6.0),
            versine: 0.5 * tau * tau * (1.0 - x2 / 12.0),
        }
    } else {
        let (sin, cos) = x.sin_cos();
        let half = (0.5 * x).sin();
        Trig {
            cos,
            sin,
            sinc: sin / omega,
            omega_sin: omega * sin,
            versine: 2.0 * half * half / lambda,
        }
    }
}

/// Per-mode map of `(u1, u2)` for the wave equation.
pub fn wave_propagator(lambda: f64, tau: f64, scheme: SchemeId) -> Result<Propagator2x2> {
    check_tau(tau)?;
    Ok(match scheme {
        SchemeId::ForwardEM => Propagator2x2::new(1.0, tau, -tau * lambda, 1.0),
        SchemeId::BackwardEM => {
            Propagator2x2::new(1.0, tau, -tau * lambda, 1.0).scale(1.0 / (1.0 + tau * tau * lambda))
        }
        SchemeId::ExpEuler | SchemeId::AdaptedExpEuler => {
            let t = trig(lambda, tau);
            Propagator2x2::new(t.cos, t.sinc, -t.omega_sin, t.cos)
        }
    })
}

/// Per-mode map of `(e, h)` for a TE mode, generated by `[[0, -omega], [omega, 0]]`.
pub fn maxwell_propagator(lambda: f64, tau: f64, scheme: SchemeId) -> Result<Propagator2x2> {
    check_tau(tau)?;
    let omega = lambda.sqrt();
    Ok(match scheme {
        SchemeId::ForwardEM => Propagator2x2::new(1.0, -tau * omega, tau * omega, 1.0),
        SchemeId::BackwardEM => Propagator2x2::new(1.0, -tau * omega, tau * omega, 1.0)
            .scale(1.0 / (1.0 + tau * tau * lambda)),
        SchemeId::ExpEuler => {
            let t = trig(lambda, tau);
            Propagator2x2::new(t.cos, -t.sin, t.sin, t.cos)
        }
        SchemeId::AdaptedExpEuler => {
            return Err(Error::UnsupportedScheme {
                scheme,
                equation: "maxwell",
            })
        }
    })
}

/// Complex multiplier of the Schrödinger mode with eigenvalue `lambda`.
pub fn schrodinger_multiplier(lambda: f64, tau: f64, scheme: SchemeId) -> Result<Complex64> {
    check_tau(tau)?;
    Ok(match scheme {
        SchemeId::ForwardEM => Complex64::new(1.0, tau * lambda),
        SchemeId::BackwardEM => Complex64::new(1.0, -tau * lambda).inv(),
        SchemeId::ExpEuler => Complex64::from_polar(1.0, tau * lambda),
        SchemeId::AdaptedExpEuler => {
            return Err(Error::UnsupportedScheme {
                scheme,
                equation: "schrodinger",
            })
        }
    })
}

fn noise_before(scheme: SchemeId) -> bool {
    !matches!(scheme, SchemeId::ForwardEM)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl WaveState {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            u1: vec![0.0; n_modes],
            u2: vec![0.0; n_modes],
        }
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerState {
    pub u: Vec<Complex64>,
}

impl SchrodingerState {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); n_modes],
        }
    }
}

/// TE-mode coefficients. `e[k]` and `h[k]` belong to the mode of rank `k + 1`
/// (degrees `ell >= 1`); `e0` and `h0` are the monopole channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellState {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    pub e0: f64,
    pub h0: f64,
}

impl MaxwellState {
    /// Zero state for a lattice with `n_modes` modes in total.
    pub fn zeros(n_modes: usize) -> Self {
        let k = n_modes.saturating_sub(1);
        Self {
            e: vec![0.0; k],
            h: vec![0.0; k],
            e0: 0.0,
            h0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationState {
    Wave(WaveState),
    Schrodinger(SchrodingerState),
    Maxwell(MaxwellState),
}

impl EquationState {
    pub fn equation(&self) -> Equation {
        match self {
            EquationState::Wave(_) => Equation::Wave,
            EquationState::Schrodinger(_) => Equation::Schrodinger,
            EquationState::Maxwell(_) => Equation::Maxwell,
        }
    }

    pub fn zeros(equation: Equation, n_modes: usize) -> Self {
        match equation {
            Equation::Wave => EquationState::Wave(WaveState::zeros(n_modes)),
            Equation::Schrodinger => EquationState::Schrodinger(SchrodingerState::zeros(n_modes)),
            Equation::Maxwell => EquationState::Maxwell(MaxwellState::zeros(n_modes)),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

fn degree_of_rank(n_modes: usize) -> Result<u32> {
    let kappa = (n_modes as f64).sqrt() as usize;
    let kappa = (kappa.saturating_sub(1)..=kappa + 1)
        .find(|k| (k + 1) * (k + 1) == n_modes)
        .ok_or_else(|| Error::config("state", format!("{n_modes} is not a full lattice size")))?;
    Ok(kappa as u32)
}

/// Precomputed wave update for one truncation and step size.
#[derive(Debug, Clone)]
pub struct WaveStepper {
    scheme: SchemeId,
    degree: Vec<u32>,
    props: Vec<Propagator2x2>,
    /// Per mode: `m tau` subtracted from the increment (adapted scheme only).
    shift: Vec<f64>,
    /// Per mode: exactly integrated drift added after the map.
    drift: Vec<(f64, f64)>,
}

impl WaveStepper {
    /// `mean_rate` holds `m_{ell,m}` per mode; only the adapted scheme reads it.
    pub fn new(kappa: u32, tau: f64, scheme: SchemeId, mean_rate: &[f64]) -> Result<Self> {
        let props = (0..=kappa)
            .map(|ell| wave_propagator(eigenvalue(ell), tau, scheme))
            .collect::<Result<Vec<_>>>()?;
        let n = (kappa as usize + 1).pow(2);
        let degree: Vec<u32> = (0..n).map(|r| ModeIndex::from_rank(r).ell()).collect();
        let (shift, drift) = if scheme == SchemeId::AdaptedExpEuler {
            check_len(n, mean_rate.len())?;
            let trigs: Vec<Trig> = (0..=kappa).map(|ell| trig(eigenvalue(ell), tau)).collect();
            let drift = degree
                .iter()
                .zip(mean_rate)
                .map(|(&ell, &m)| {
                    let t = &trigs[ell as usize];
                    (t.versine * m, t.sinc * m)
                })
                .collect();
            (mean_rate.iter().map(|m| m * tau).collect(), drift)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            scheme,
            degree,
            props,
            shift,
            drift,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.degree.len()
    }

    pub fn step(&self, state: &mut WaveState, noise: &[f64]) -> Result<()> {
        check_len(self.n_modes(), state.u1.len())?;
        check_len(self.n_modes(), state.u2.len())?;
        check_len(self.n_modes(), noise.len())?;
        self.step_unchecked(state, noise);
        Ok(())
    }

    pub(crate) fn step_unchecked(&self, state: &mut WaveState, noise: &[f64]) {
        let n = self.n_modes();
        let (u1, u2) = (&mut state.u1[..n], &mut state.u2[..n]);
        match self.scheme {
            SchemeId::ForwardEM => {
                for k in 0..n {
                    let p = &self.props[self.degree[k] as usize];
                    let (a, b) = p.apply(u1[k], u2[k]);
                    u1[k] = a;
                    u2[k] = b + noise[k];
                }
            }
            SchemeId::BackwardEM | SchemeId::ExpEuler => {
                for k in 0..n {
                    let p = &self.props[self.degree[k] as usize];
                    let (a, b) = p.apply(u1[k], u2[k] + noise[k]);
                    u1[k] = a;
                    u2[k] = b;
                }
            }
            SchemeId::AdaptedExpEuler => {
                for k in 0..n {
                    let p = &self.props[self.degree[k] as usize];
                    let (a, b) = p.apply(u1[k], u2[k] + (noise[k] - self.shift[k]));
                    let (d1, d2) = self.drift[k];
                    u1[k] = a + d1;
                    u2[k] = b + d2;
                }
            }
        }
    }
}

/// Precomputed Schrödinger update.
#[derive(Debug, Clone)]
pub struct SchrodingerStepper {
    scheme: SchemeId,
    degree: Vec<u32>,
    mult: Vec<Complex64>,
}

impl SchrodingerStepper {
    pub fn new(kappa: u32, tau: f64, scheme: SchemeId) -> Result<Self> {
        let mult = (0..=kappa)
            .map(|ell| schrodinger_multiplier(eigenvalue(ell), tau, scheme))
            .collect::<Result<Vec<_>>>()?;
        let n = (kappa as usize + 1).pow(2);
        Ok(Self {
            scheme,
            degree: (0..n).map(|r| ModeIndex::from_rank(r).ell()).collect(),
            mult,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.degree.len()
    }

    /// `noise` holds `Delta L` per mode (complex when the noise is complex).
    pub fn step(&self, state: &mut SchrodingerState, noise: &[Complex64]) -> Result<()> {
        check_len(self.n_modes(), state.u.len())?;
        check_len(self.n_modes(), noise.len())?;
        self.step_unchecked(state, noise);
        Ok(())
    }

    pub(crate) fn step_unchecked(&self, state: &mut SchrodingerState, noise: &[Complex64]) {
        let before = noise_before(self.scheme);
        for (k, u) in state.u.iter_mut().enumerate() {
            let z = self.mult[self.degree[k] as usize];
            // -i * dL
            let kick = Complex64::new(noise[k].im, -noise[k].re);
            *u = if before { z * (*u + kick) } else { z * *u + kick };
        }
    }
}

/// Precomputed Maxwell TE update.
#[derive(Debug, Clone)]
pub struct MaxwellStepper {
    scheme: SchemeId,
    degree: Vec<u32>,
    props: Vec<Propagator2x2>,
}

impl MaxwellStepper {
    pub fn new(kappa: u32, tau: f64, scheme: SchemeId) -> Result<Self> {
        let props = (0..=kappa)
            .map(|ell| maxwell_propagator(eigenvalue(ell), tau, scheme))
            .collect::<Result<Vec<_>>>()?;
        let n = (kappa as usize + 1).pow(2);
        Ok(Self {
            scheme,
            degree: (0..n).map(|r| ModeIndex::from_rank(r).ell()).collect(),
            props,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.degree.len()
    }

    /// Noise vectors run over the whole lattice; entry 0 drives the monopole.
    pub fn step(&self, state: &mut MaxwellState, noise_e: &[f64], noise_h: &[f64]) -> Result<()> {
        let n = self.n_modes();
        check_len(n - 1, state.e.len())?;
        check_len(n - 1, state.h.len())?;
        check_len(n, noise_e.len())?;
        check_len(n, noise_h.len())?;
        self.step_unchecked(state, noise_e, noise_h);
        Ok(())
    }

    pub(crate) fn step_unchecked(&self, state: &mut MaxwellState, noise_e: &[f64], noise_h: &[f64]) {
        state.e0 += noise_e[0];
        state.h0 += noise_h[0];
        let before = noise_before(self.scheme);
        let (ne, nh) = (&noise_e[1..], &noise_h[1..]);
        for k in 0..state.e.len() {
            let p = &self.props[self.degree[k + 1] as usize];
            if before {
                let (a, b) = p.apply(state.e[k] + ne[k], state.h[k] + nh[k]);
                state.e[k] = a;
                state.h[k] = b;
            } else {
                let (a, b) = p.apply(state.e[k], state.h[k]);
                state.e[k] = a + ne[k];
                state.h[k] = b + nh[k];
            }
        }
    }
}

/// One wave step. `mean_rate` is only read by the adapted scheme.
pub fn wave_step(
    state: &WaveState,
    scheme: SchemeId,
    tau: f64,
    noise: &[f64],
    mean_rate: &[f64],
) -> Result<WaveState> {
    let kappa = degree_of_rank(state.len())?;
    let stepper = WaveStepper::new(kappa, tau, scheme, mean_rate)?;
    let mut next = state.clone();
    stepper.step(&mut next, noise)?;
    Ok(next)
}

pub fn schrodinger_step(
    state: &SchrodingerState,
    scheme: SchemeId,
    tau: f64,
    noise: &[Complex64],
) -> Result<SchrodingerState> {
    let kappa = degree_of_rank(state.u.len())?;
    let stepper = SchrodingerStepper::new(kappa, tau, scheme)?;
    let mut next = state.clone();
    stepper.step(&mut next, noise)?;
    Ok(next)
}

pub fn maxwell_step(
    state: &MaxwellState,
    scheme: SchemeId,
    tau: f64,
    noise_e: &[f64],
    noise_h: &[f64],
) -> Result<MaxwellState> {
    let kappa = degree_of_rank(state.e.len() + 1)?;
    let stepper = MaxwellStepper::new(kappa, tau, scheme)?;
    let mut next = state.clone();
    stepper.step(&mut next, noise_e, noise_h)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    /// Single-mode wave state at degree 1 (rank 2) inside a kappa = 1 lattice.
    fn wave_l1(u1: f64, u2: f64) -> WaveState {
        let mut s = WaveState::zeros(4);
        s.u1[2] = u1;
        s.u2[2] = u2;
        s
    }

    #[test]
    fn wave_propagator_examples() {
        let p = wave_propagator(0.0, 0.1, SchemeId::ExpEuler).unwrap();
        assert_eq!(p, Propagator2x2::new(1.0, 0.1, 0.0, 1.0));
        let p = wave_propagator(2.0, 0.1, SchemeId::ForwardEM).unwrap();
        assert_eq!((p.r11, p.r12, p.r22), (1.0, 0.1, 1.0));
        assert!(close(p.r21, -0.2, 1e-15));
        let p = wave_propagator(2.0, 0.1, SchemeId::BackwardEM).unwrap();
        let k = 1.0 / 1.02;
        assert!(close(p.r11, k, 1e-15) && close(p.r12, 0.1 * k, 1e-15));
        assert!(close(p.r21, -0.2 * k, 1e-15) && close(p.r22, k, 1e-15));
    }

    #[test]
    fn backward_map_inverts_implicit_system() {
        // (u1', u2') must satisfy u1' = u1 + tau u2', u2' = u2 - tau lambda u1'
        for &(lambda, tau) in &[(2.0, 0.1), (4160.0, 0.2), (0.0, 1.0)] {
            let p = wave_propagator(lambda, tau, SchemeId::BackwardEM).unwrap();
            let (u1, u2) = (0.3, -1.7);
            let (a, b) = p.apply(u1, u2);
            assert!(close(a, u1 + tau * b, 1e-13));
            assert!(close(b, u2 - tau * lambda * a, 1e-13));
        }
    }

    #[test]
    fn wave_step_examples() {
        let next = wave_step(&wave_l1(1.0, 0.0), SchemeId::ForwardEM, 0.1, &[0.0; 4], &[]).unwrap();
        assert_eq!(next.u1[2], 1.0);
        assert!(close(next.u2[2], -0.2, 1e-15));

        for scheme in SchemeId::ALL {
            let zero = WaveState::zeros(9);
            let next = wave_step(&zero, scheme, 0.3, &[0.0; 9], &[0.0; 9]).unwrap();
            assert_eq!(next, zero);
        }
    }

    #[test]
    fn exp_euler_full_turn_returns_to_start() {
        let n = 1000;
        let tau = 2.0 * PI / (2f64.sqrt() * n as f64);
        let stepper = WaveStepper::new(1, tau, SchemeId::ExpEuler, &[]).unwrap();
        let mut s = wave_l1(1.0, 0.0);
        for _ in 0..n {
            stepper.step(&mut s, &[0.0; 4]).unwrap();
        }
        assert!((s.u1[2] - 1.0).abs() < 1e-10);
        assert!(s.u2[2].abs() < 1e-10);
    }

    #[test]
    fn noise_injection_order() {
        let noise = [0.0, 0.0, 0.5, 0.0];
        let tau = 0.1;
        let fem = wave_step(&wave_l1(0.0, 0.0), SchemeId::ForwardEM, tau, &noise, &[]).unwrap();
        assert_eq!((fem.u1[2], fem.u2[2]), (0.0, 0.5));
        let exp = wave_step(&wave_l1(0.0, 0.0), SchemeId::ExpEuler, tau, &noise, &[]).unwrap();
        let w = 2f64.sqrt();
        assert!(close(exp.u1[2], 0.5 * (w * tau).sin() / w, 1e-14));
        assert!(close(exp.u2[2], 0.5 * (w * tau).cos(), 1e-14));
    }

    #[test]
    fn adapted_drift_matches_quadrature_of_semigroup() {
        // deterministic part: integral over [0, tau] of S(tau - s) (0, m) ds
        let (lambda, tau, m) = (6.0f64, 0.37, 0.8);
        let w = lambda.sqrt();
        let n = 20_000;
        let h = tau / n as f64;
        let (mut i1, mut i2) = (0.0, 0.0);
        for j in 0..n {
            let s = (j as f64 + 0.5) * h;
            i1 += (w * (tau - s)).sin() / w * m * h;
            i2 += (w * (tau - s)).cos() * m * h;
        }
        let mut mean = vec![0.0; 9];
        mean[5] = m;
        let stepper = WaveStepper::new(2, tau, SchemeId::AdaptedExpEuler, &mean).unwrap();
        let mut s = WaveState::zeros(9);
        // increment equal to its mean leaves only the drift
        let mut noise = vec![0.0; 9];
        noise[5] = m * tau;
        stepper.step(&mut s, &noise).unwrap();
        assert!(close(s.u1[5], i1, 1e-8), "{} vs {i1}", s.u1[5]);
        assert!(close(s.u2[5], i2, 1e-8), "{} vs {i2}", s.u2[5]);
    }

    #[test]
    fn adapted_zero_degree_uses_limits() {
        let (tau, m) = (0.5, 2.0);
        let stepper = WaveStepper::new(0, tau, SchemeId::AdaptedExpEuler, &[m]).unwrap();
        let mut s = WaveState::zeros(1);
        stepper.step(&mut s, &[m * tau]).unwrap();
        assert!(close(s.u1[0], 0.5 * tau * tau * m, 1e-15));
        assert!(close(s.u2[0], tau * m, 1e-15));
    }

    #[test]
    fn small_angle_series_is_continuous() {
        let tau = 1.0;
        for &x in &[0.99e-4, 1.01e-4] {
            let lambda = x * x;
            let t = trig(lambda, tau);
            let w = lambda.sqrt();
            assert!(close(t.sinc, (w * tau).sin() / w, 1e-15));
            assert!(close(t.versine, 0.5 * tau * tau * (1.0 - x * x / 12.0), 1e-12));
            assert!(close(t.cos, (w * tau).cos(), 1e-15));
        }
    }

    #[test]
    fn schrodinger_examples() {
        let mut s = SchrodingerState::zeros(4);
        s.u[1] = Complex64::new(1.0, 0.0);
        let z = [Complex64::new(0.0, 0.0); 4];
        let f = schrodinger_step(&s, SchemeId::ForwardEM, 0.1, &z).unwrap();
        assert!(close(f.u[1].re, 1.0, 1e-15) && close(f.u[1].im, 0.2, 1e-15));
        let e = schrodinger_step(&s, SchemeId::ExpEuler, 0.1, &z).unwrap();
        assert!(close(e.u[1].re, 0.2f64.cos(), 1e-15) && close(e.u[1].im, 0.2f64.sin(), 1e-15));
        assert!((e.u[1].norm() - 1.0).abs() < 1e-15);
        let b = schrodinger_step(&s, SchemeId::BackwardEM, 0.1, &z).unwrap();
        assert!(close(b.u[1].norm_sqr(), 1.0 / 1.04, 1e-15));
        assert!(matches!(
            schrodinger_step(&s, SchemeId::AdaptedExpEuler, 0.1, &z),
            Err(Error::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn schrodinger_noise_enters_as_minus_i() {
        let s = SchrodingerState::zeros(1);
        let dl = [Complex64::new(0.3, 0.0)];
        let f = schrodinger_step(&s, SchemeId::ForwardEM, 0.1, &dl).unwrap();
        assert_eq!(f.u[0], Complex64::new(0.0, -0.3));
    }

    #[test]
    fn maxwell_quarter_turn() {
        let tau = PI / (2.0 * 2f64.sqrt());
        let mut s = MaxwellState::zeros(4);
        s.e[1] = 1.0; // rank 2, degree 1
        let z = [0.0; 4];
        let next = maxwell_step(&s, SchemeId::ExpEuler, tau, &z, &z).unwrap();
        assert!(next.e[1].abs() < 1e-12);
        assert!((next.h[1] - 1.0).abs() < 1e-12);
        assert!(maxwell_step(&s, SchemeId::AdaptedExpEuler, tau, &z, &z).is_err());
    }

    #[test]
    fn maxwell_forward_growth_and_monopole() {
        let tau = 0.05;
        let mut s = MaxwellState::zeros(4);
        s.e[0] = 0.6;
        s.h[0] = -0.8;
        let z = [0.0; 4];
        let next = maxwell_step(&s, SchemeId::ForwardEM, tau, &z, &z).unwrap();
        let r = (next.e[0].powi(2) + next.h[0].powi(2)) / 1.0;
        assert!(close(r, 1.0 + 2.0 * tau * tau, 1e-15));

        let ne = [0.25, 0.0, 0.0, 0.0];
        let nh = [-0.5, 0.0, 0.0, 0.0];
        for scheme in [SchemeId::ForwardEM, SchemeId::BackwardEM, SchemeId::ExpEuler] {
            let next = maxwell_step(&MaxwellState::zeros(4), scheme, tau, &ne, &nh).unwrap();
            assert_eq!((next.e0, next.h0), (0.25, -0.5));
        }
    }

    #[test]
    fn rotations_preserve_weighted_norm() {
        for ell in 0..=64u32 {
            let lambda = eigenvalue(ell);
            for &tau in &[1e-6, 0.015, 0.2, 1.3] {
                let p = wave_propagator(lambda, tau, SchemeId::ExpEuler).unwrap();
                let d = Propagator2x2::new(lambda, 0.0, 0.0, 1.0);
                let g = p.transpose().mul(&d).mul(&p);
                let scale = 1.0 + lambda;
                assert!((g.r11 - lambda).abs() <= 1e-12 * scale, "ell {ell} tau {tau}");
                assert!(g.r12.abs() <= 1e-12 * scale && g.r21.abs() <= 1e-12 * scale);
                assert!((g.r22 - 1.0).abs() <= 1e-12 * scale);

                let q = maxwell_propagator(lambda, tau, SchemeId::ExpEuler).unwrap();
                let g = q.transpose().mul(&q);
                assert!((g.r11 - 1.0).abs() < 1e-12 && (g.r22 - 1.0).abs() < 1e-12);
                assert!(g.r12.abs() < 1e-12);
                assert!((q.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn length_mismatch_reported() {
        let s = WaveState::zeros(4);
        assert!(matches!(
            wave_step(&s, SchemeId::ExpEuler, 0.1, &[0.0; 3], &[]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(wave_step(&WaveState::zeros(5), SchemeId::ExpEuler, 0.1, &[0.0; 5], &[]).is_err());
        assert!(wave_step(&s, SchemeId::AdaptedExpEuler, 0.1, &[0.0; 4], &[0.0; 2]).is_err());
        assert!(wave_propagator(2.0, 0.0, SchemeId::ExpEuler).is_err());
    }

    #[test]
    fn scheme_names_parse() {
        for s in SchemeId::ALL {
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert_eq!("BackwardEM".parse::<SchemeId>().unwrap(), SchemeId::BackwardEM);
        assert!("rk4".parse::<SchemeId>().is_err());
        assert_eq!("Maxwell".parse::<Equation>().unwrap(), Equation::Maxwell);
    }

    fn vec9() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, 9)
    }

    proptest! {
        #[test]
        fn wave_steps_are_linear(
            x1 in vec9(), x2 in vec9(), y1 in vec9(), y2 in vec9(),
            n1 in vec9(), n2 in vec9(),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            tau in 0.001f64..1.0,
            scheme_idx in 0usize..4,
        ) {
            let scheme = SchemeId::ALL[scheme_idx];
            let zero_mean = vec![0.0; 9];
            let x = WaveState { u1: x1, u2: x2 };
            let y = WaveState { u1: y1, u2: y2 };
            let comb = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(p, q)| alpha * p + beta * q).collect()
            };
            let lhs = wave_step(
                &WaveState { u1: comb(&x.u1, &y.u1), u2: comb(&x.u2, &y.u2) },
                scheme, tau, &comb(&n1, &n2), &zero_mean,
            ).unwrap();
            let sx = wave_step(&x, scheme, tau, &n1, &zero_mean).unwrap();
            let sy = wave_step(&y, scheme, tau, &n2, &zero_mean).unwrap();
            for k in 0..9 {
                let r1 = alpha * sx.u1[k] + beta * sy.u1[k];
                let r2 = alpha * sx.u2[k] + beta * sy.u2[k];
                prop_assert!((lhs.u1[k] - r1).abs() < 1e-11 * (1.0 + r1.abs()) * 50.0);
                prop_assert!((lhs.u2[k] - r2).abs() < 1e-11 * (1.0 + r2.abs()) * 50.0);
            }
        }

        #[test]
        fn schrodinger_and_maxwell_steps_are_linear(
            x in vec9(), y in vec9(), n in vec9(), m in vec9(),
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            tau in 0.001f64..1.0,
            scheme_idx in 0usize..3,
        ) {
            let scheme = SchemeId::ALL[scheme_idx];
            let cx: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| Complex64::new(*a, *b)).collect();
            let cy: Vec<Complex64> = y.iter().zip(&n).map(|(a, b)| Complex64::new(*b, -*a)).collect();
            let cn1: Vec<Complex64> = n.iter().map(|a| Complex64::new(*a, 0.0)).collect();
            let cn2: Vec<Complex64> = m.iter().map(|a| Complex64::new(*a, 0.5 * a)).collect();
            let lin = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
                a.iter().zip(b).map(|(p, q)| p * alpha + q * beta).collect()
            };
            let lhs = schrodinger_step(&SchrodingerState { u: lin(&cx, &cy) }, scheme, tau, &lin(&cn1, &cn2)).unwrap();
            let sx = schrodinger_step(&SchrodingerState { u: cx }, scheme, tau, &cn1).unwrap();
            let sy = schrodinger_step(&SchrodingerState { u: cy }, scheme, tau, &cn2).unwrap();
            for k in 0..9 {
                let r = sx.u[k] * alpha + sy.u[k] * beta;
                prop_assert!((lhs.u[k] - r).norm() < 1e-10 * (1.0 + r.norm()));
            }

            let mx = MaxwellState { e: x[1..].to_vec(), h: y[1..].to_vec(), e0: x[0], h0: y[0] };
            let my = MaxwellState { e: n[1..].to_vec(), h: m[1..].to_vec(), e0: n[0], h0: m[0] };
            let r: Vec<f64> = m.iter().rev().copied().collect();
            let comb = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(p, q)| alpha * p + beta * q).collect()
            };
            let mxy = MaxwellState {
                e: comb(&mx.e, &my.e), h: comb(&mx.h, &my.h),
                e0: alpha * mx.e0 + beta * my.e0, h0: alpha * mx.h0 + beta * my.h0,
            };
            let lhs = maxwell_step(&mxy, scheme, tau, &comb(&n, &x), &comb(&r, &y)).unwrap();
            let sx = maxwell_step(&mx, scheme, tau, &n, &r).unwrap();
            let sy = maxwell_step(&my, scheme, tau, &x, &y).unwrap();
            for k in 0..8 {
                let re = alpha * sx.e[k] + beta * sy.e[k];
                let rh = alpha * sx.h[k] + beta * sy.h[k];
                prop_assert!((lhs.e[k] - re).abs() < 1e-10 * (1.0 + re.abs()));
                prop_assert!((lhs.h[k] - rh).abs() < 1e-10 * (1.0 + rh.abs()));
            }
        }
    }
}
