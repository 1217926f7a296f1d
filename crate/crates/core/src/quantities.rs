//! Quadratic functionals of the state and their exact expectations.
//!
//! Quantities are evaluated in coefficient space through Parseval's identity.
//! Two reference curves accompany every simulation:
//!
//! * the affine trace formula `q0 + slope * t`, valid for the exact solution
//!   and for the exponential scheme when the noise has mean zero;
//! * a per-mode recursion for the expected quantity of every scheme, which
//!   also tracks the per-mode means so that nonzero-mean noise is covered.
//!
//! The recursions are written out from the scheme definitions directly and do
//! not call into [`crate::integrators`].

use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrators::{Equation, EquationState, SchemeId};
use crate::levy_noise::LevyConfig;
use crate::sphere_modes::{eigenvalue, ModeIndex, ModeLattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantityId {
    WaveEnergy,
    SchrodingerMass,
    SchrodingerEnergy,
    MaxwellEnergy,
}

impl QuantityId {
    pub fn equation(self) -> Equation {
        match self {
            QuantityId::WaveEnergy => Equation::Wave,
            QuantityId::SchrodingerMass | QuantityId::SchrodingerEnergy => Equation::Schrodinger,
            QuantityId::MaxwellEnergy => Equation::Maxwell,
        }
    }

    /// Quantity reported for an equation when none is requested explicitly.
    pub fn default_for(equation: Equation) -> Self {
        match equation {
            Equation::Wave => QuantityId::WaveEnergy,
            Equation::Schrodinger => QuantityId::SchrodingerMass,
            Equation::Maxwell => QuantityId::MaxwellEnergy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuantityId::WaveEnergy => "wave-energy",
            QuantityId::SchrodingerMass => "schrodinger-mass",
            QuantityId::SchrodingerEnergy => "schrodinger-energy",
            QuantityId::MaxwellEnergy => "maxwell-energy",
        }
    }

    fn mismatch(self, state: Equation) -> Error {
        Error::Usage(format!(
            "quantity {} cannot be evaluated on a {} state",
            self.name(),
            state
        ))
    }
}

impl fmt::Display for QuantityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "wave-energy" | "energy-wave" => Ok(QuantityId::WaveEnergy),
            "schrodinger-mass" | "mass" => Ok(QuantityId::SchrodingerMass),
            "schrodinger-energy" => Ok(QuantityId::SchrodingerEnergy),
            "maxwell-energy" => Ok(QuantityId::MaxwellEnergy),
            _ => Err(Error::config(
                "quantity",
                format!(
                    "unknown quantity `{s}` (expected wave-energy, schrodinger-mass, \
                     schrodinger-energy or maxwell-energy)"
                ),
            )),
        }
    }
}

/// Value of `quantity` on `state`.
pub fn evaluate(quantity: QuantityId, state: &EquationState) -> Result<f64> {
    match (quantity, state) {
        (QuantityId::WaveEnergy, EquationState::Wave(s)) => {
            let mut acc = 0.0;
            for (r, (a, b)) in s.u1.iter().zip(&s.u2).enumerate() {
                let lambda = eigenvalue(ModeIndex::from_rank(r).ell());
                acc += b * b + lambda * a * a;
            }
            Ok(0.5 * acc)
        }
        (QuantityId::SchrodingerMass, EquationState::Schrodinger(s)) => {
            Ok(s.u.iter().map(Complex64::norm_sqr).sum())
        }
        (QuantityId::SchrodingerEnergy, EquationState::Schrodinger(s)) => Ok(s
            .u
            .iter()
            .enumerate()
            .map(|(r, u)| eigenvalue(ModeIndex::from_rank(r).ell()) * u.norm_sqr())
            .sum()),
        (QuantityId::MaxwellEnergy, EquationState::Maxwell(s)) => {
            let bulk: f64 = s.e.iter().zip(&s.h).map(|(e, h)| e * e + h * h).sum();
            Ok(0.5 * (bulk + s.e0 * s.e0 + s.h0 * s.h0))
        }
        (q, s) => Err(q.mismatch(s.equation())),
    }
}

/// Noise moments per mode, indexed by rank. For Maxwell, rank 0 holds the
/// monopole channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    pub kappa: u32,
    /// Per-unit-time variance `v` (E channel for Maxwell).
    pub variance: Vec<f64>,
    /// Per-unit-time variance of the H channel. Empty except for Maxwell.
    pub variance_h: Vec<f64>,
    /// Per-unit-time mean `m` of the real noise (both channels for Maxwell).
    pub mean: Vec<f64>,
    /// Schrödinger noise drawn as `(X + iY) / sqrt(2)`.
    pub complex_noise: bool,
}

impl OracleParams {
    pub fn new(equation: Equation, kappa: u32, levy: &LevyConfig, monopole: bool) -> Result<Self> {
        let lattice = ModeLattice::new(kappa);
        levy.spectrum.covers(lattice)?;
        let mut variance = Vec::with_capacity(lattice.len());
        let mut mean = Vec::with_capacity(lattice.len());
        for mode in lattice.iter() {
            variance.push(levy.variance_rate(mode.ell())?);
            mean.push(levy.mean_rate(mode.ell())?);
        }
        let mut variance_h = Vec::new();
        if equation == Equation::Maxwell {
            if !monopole {
                variance[0] = 0.0;
                mean[0] = 0.0;
            }
            variance_h = variance.clone();
        }
        Ok(Self {
            kappa,
            variance,
            variance_h,
            mean,
            complex_noise: levy.complex_noise && equation == Equation::Schrodinger,
        })
    }

    pub fn n_modes(&self) -> usize {
        (self.kappa as usize + 1).pow(2)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0)
    }

    /// `v_{0,0}` (summed over both channels for Maxwell).
    pub fn v00(&self) -> f64 {
        self.variance[0] + self.variance_h.first().copied().unwrap_or(0.0)
    }
}

/// Slope of the affine trace formula.
pub fn trace_slope(quantity: QuantityId, params: &OracleParams) -> f64 {
    let weighted = |w: &dyn Fn(f64) -> f64| -> f64 {
        params
            .variance
            .iter()
            .enumerate()
            .map(|(r, v)| w(eigenvalue(ModeIndex::from_rank(r).ell())) * v)
            .sum()
    };
    match quantity {
        QuantityId::WaveEnergy => 0.5 * weighted(&|_| 1.0),
        QuantityId::SchrodingerMass => weighted(&|_| 1.0),
        QuantityId::SchrodingerEnergy => weighted(&|l| l),
        QuantityId::MaxwellEnergy => {
            0.5 * (params.variance.iter().sum::<f64>() + params.variance_h.iter().sum::<f64>())
        }
    }
}

/// Which curve the closed form describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceCurve {
    Exact,
    Scheme(SchemeId),
}

/// Expected quantity at time `t` from the trace formula, starting at
/// `initial_expected`.
pub fn trace_formula(
    quantity: QuantityId,
    curve: TraceCurve,
    initial_expected: f64,
    params: &OracleParams,
    t: f64,
) -> Result<f64> {
    match curve {
        TraceCurve::Exact | TraceCurve::Scheme(SchemeId::ExpEuler) => {}
        TraceCurve::Scheme(s) => {
            return Err(Error::NoClosedForm(format!(
                "{} under the {s} scheme",
                quantity.name()
            )))
        }
    }
    if !params.is_mean_zero() {
        return Err(Error::NoClosedForm(format!(
            "{} driven by noise with nonzero mean",
            quantity.name()
        )));
    }
    Ok(initial_expected + trace_slope(quantity, params) * t)
}

/// Per-mode expected quantity and mean, indexed by rank.
///
/// `mean[k]` is `(E u1, E u2)` for the wave equation, `(Re E u, Im E u)` for
/// Schrödinger and `(E e, E h)` for Maxwell (rank 0 is the monopole pair).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub q: Vec<f64>,
    pub mean: Vec<[f64; 2]>,
}

impl MomentState {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            q: vec![0.0; n_modes],
            mean: vec![[0.0; 2]; n_modes],
        }
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// `(cos x, sin x / omega, (1 - cos x) / lambda)` with `x = omega tau` and
/// the analytic limits at `lambda = 0`.
fn rotation_factors(lambda: f64, tau: f64) -> (f64, f64, f64, f64) {
    if lambda == 0.0 {
        return (1.0, 0.0, tau, 0.5 * tau * tau);
    }
    let omega = lambda.sqrt();
    let x = omega * tau;
    let half = (0.5 * x).sin();
    (x.cos(), x.sin(), x.sin() / omega, 2.0 * half * half / lambda)
}

/// Expected quantity after each of `steps` steps, summed over modes; entry 0
/// is the initial value.
pub fn moment_recursion(
    quantity: QuantityId,
    scheme: SchemeId,
    params: &OracleParams,
    initial: &MomentState,
    tau: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("tau", format!("time step must be positive, got {tau}")));
    }
    let n = params.n_modes();
    for len in [params.variance.len(), params.mean.len(), initial.q.len(), initial.mean.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    if quantity == QuantityId::MaxwellEnergy && params.variance_h.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: params.variance_h.len(),
        });
    }
    if scheme == SchemeId::AdaptedExpEuler && quantity != QuantityId::WaveEnergy {
        return Err(Error::UnsupportedScheme {
            scheme,
            equation: quantity.equation().name(),
        });
    }

    let mut state = initial.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.total());
    for _ in 0..steps {
        for k in 0..n {
            let lambda = eigenvalue(ModeIndex::from_rank(k).ell());
            let (q, mu) = (state.q[k], state.mean[k]);
            let (q2, mu2) = match quantity {
                QuantityId::WaveEnergy => wave_mode(scheme, lambda, tau, params, k, q, mu),
                QuantityId::SchrodingerMass => schrodinger_mode(scheme, lambda, 1.0, tau, params, k, q, mu),
                QuantityId::SchrodingerEnergy => schrodinger_mode(scheme, lambda, lambda, tau, params, k, q, mu),
                QuantityId::MaxwellEnergy => maxwell_mode(scheme, lambda, tau, params, k, q, mu),
            };
            state.q[k] = q2;
            state.mean[k] = mu2;
        }
        out.push(state.total());
    }
    Ok(out)
}

/// Wave energy `q = E[(u2^2 + lambda u1^2) / 2]` of one mode.
fn wave_mode(
    scheme: SchemeId,
    lambda: f64,
    tau: f64,
    params: &OracleParams,
    k: usize,
    q: f64,
    mu: [f64; 2],
) -> (f64, [f64; 2]) {
    let v = params.variance[k];
    let m = params.mean[k];
    let eta = m * tau;
    // second moment of the increment
    let xi2 = v * tau + eta * eta;
    let g = 1.0 + tau * tau * lambda;
    match scheme {
        SchemeId::ForwardEM => {
            let p = [mu[0] + tau * mu[1], mu[1] - tau * lambda * mu[0]];
            (g * q + 0.5 * xi2 + p[1] * eta, [p[0], p[1] + eta])
        }
        SchemeId::BackwardEM => {
            let x = [mu[0], mu[1] + eta];
            let p = [(x[0] + tau * x[1]) / g, (x[1] - tau * lambda * x[0]) / g];
            ((q + 0.5 * xi2 + mu[1] * eta) / g, p)
        }
        SchemeId::ExpEuler => {
            let (c, s, sinc, _) = rotation_factors(lambda, tau);
            let x = [mu[0], mu[1] + eta];
            let p = [c * x[0] + sinc * x[1], -lambda.sqrt() * s * x[0] + c * x[1]];
            (q + 0.5 * xi2 + mu[1] * eta, p)
        }
        SchemeId::AdaptedExpEuler => {
            let (c, s, sinc, versine) = rotation_factors(lambda, tau);
            let q2 = q + 0.5 * v * tau + m * m * versine + m * ((c - 1.0) * mu[0] + sinc * mu[1]);
            let p = [
                c * mu[0] + sinc * mu[1] + versine * m,
                -lambda.sqrt() * s * mu[0] + c * mu[1] + sinc * m,
            ];
            (q2, p)
        }
    }
}

/// Schrödinger `q = weight * E|u|^2` of one mode.
#[allow(clippy::too_many_arguments)]
fn schrodinger_mode(
    scheme: SchemeId,
    lambda: f64,
    weight: f64,
    tau: f64,
    params: &OracleParams,
    k: usize,
    q: f64,
    mu: [f64; 2],
) -> (f64, [f64; 2]) {
    let v = params.variance[k];
    let m = params.mean[k] * tau;
    let eta = if params.complex_noise {
        Complex64::new(m, m) / 2f64.sqrt()
    } else {
        Complex64::new(m, 0.0)
    };
    let xi2 = v * tau + eta.norm_sqr();
    // mean of -i dL
    let kick = Complex64::new(eta.im, -eta.re);
    let mu_c = Complex64::new(mu[0], mu[1]);
    let a = tau * lambda;
    let (gain, z) = match scheme {
        SchemeId::ForwardEM => (1.0 + a * a, Complex64::new(1.0, a)),
        SchemeId::BackwardEM => (1.0 / (1.0 + a * a), Complex64::new(1.0, -a).inv()),
        _ => (1.0, Complex64::from_polar(1.0, a)),
    };
    match scheme {
        SchemeId::ForwardEM => {
            let zm = z * mu_c;
            let cross = 2.0 * (zm * kick.conj()).re;
            let next = zm + kick;
            (gain * q + weight * (xi2 + cross), [next.re, next.im])
        }
        _ => {
            let cross = 2.0 * (mu_c * kick.conj()).re;
            let next = z * (mu_c + kick);
            (gain * (q + weight * (xi2 + cross)), [next.re, next.im])
        }
    }
}

/// Maxwell `q = E[(e^2 + h^2) / 2]` of one mode (or of the monopole pair).
fn maxwell_mode(
    scheme: SchemeId,
    lambda: f64,
    tau: f64,
    params: &OracleParams,
    k: usize,
    q: f64,
    mu: [f64; 2],
) -> (f64, [f64; 2]) {
    let m = params.mean[k] * tau;
    let eta = [m, m];
    let xi2 = (params.variance[k] + params.variance_h[k]) * tau + eta[0] * eta[0] + eta[1] * eta[1];
    let w = lambda.sqrt();
    let g = 1.0 + tau * tau * lambda;
    match scheme {
        SchemeId::ForwardEM => {
            let p = [mu[0] - tau * w * mu[1], mu[1] + tau * w * mu[0]];
            let cross = p[0] * eta[0] + p[1] * eta[1];
            (g * q + 0.5 * xi2 + cross, [p[0] + eta[0], p[1] + eta[1]])
        }
        SchemeId::BackwardEM => {
            let x = [mu[0] + eta[0], mu[1] + eta[1]];
            let cross = mu[0] * eta[0] + mu[1] * eta[1];
            let p = [(x[0] - tau * w * x[1]) / g, (x[1] + tau * w * x[0]) / g];
            ((q + 0.5 * xi2 + cross) / g, p)
        }
        _ => {
            let (c, s, _, _) = rotation_factors(lambda, tau);
            let x = [mu[0] + eta[0], mu[1] + eta[1]];
            let cross = mu[0] * eta[0] + mu[1] * eta[1];
            (q + 0.5 * xi2 + cross, [c * x[0] - s * x[1], s * x[0] + c * x[1]])
        }
    }
}
