//! Random initial states and evaluation of coefficient fields on a grid.
//!
//! Initial coefficients are independent centred Gaussians whose standard
//! deviation decays like a power of the degree. Grid values use real
//! spherical harmonics built from fully normalised associated Legendre
//! functions, with the `(-1)^m` sign applied explicitly.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::integrators::{Equation, EquationState, MaxwellState, SchrodingerState, WaveState};
use crate::levy_noise::{Channel, RngStream};
use crate::quantities::{evaluate, MomentState, QuantityId};
use crate::sphere_modes::{degree_power, eigenvalue, ModeIndex, ModeLattice};

/// Decay exponent of the reference initial data.
pub const REFERENCE_GAMMA: f64 = 3.0 + 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    /// `u1 ~ ell^-gamma`, `u2 ~ ell^(1-gamma)`.
    GaussianWave,
    /// Real part `~ ell^-gamma`, imaginary part `~ ell^(1-gamma)`.
    GaussianSchrodinger,
    /// Scalar E coefficients `~ ell^-gamma` on the e channel, H `~ ell^(1-gamma)`;
    /// degree 0 feeds the monopole pair.
    GaussianMaxwell,
    Zero,
    /// A fixed state used for every sample.
    Custom(EquationState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub gamma: f64,
    pub kind: InitialKind,
}

impl InitialSpec {
    pub fn new(kind: InitialKind) -> Self {
        Self {
            gamma: REFERENCE_GAMMA,
            kind,
        }
    }

    /// Gaussian recipe matching `equation`.
    pub fn gaussian(equation: Equation) -> Self {
        Self::new(match equation {
            Equation::Wave => InitialKind::GaussianWave,
            Equation::Schrodinger => InitialKind::GaussianSchrodinger,
            Equation::Maxwell => InitialKind::GaussianMaxwell,
        })
    }

    pub fn zero() -> Self {
        Self::new(InitialKind::Zero)
    }

    /// Whether the expected energy stays finite as the truncation grows.
    pub fn has_finite_limit(&self) -> bool {
        self.gamma > 1.0 || matches!(self.kind, InitialKind::Zero | InitialKind::Custom(_))
    }

    pub fn check(&self, equation: Equation, lattice: ModeLattice) -> Result<()> {
        let expected = match &self.kind {
            InitialKind::Zero => return Ok(()),
            InitialKind::GaussianWave => Equation::Wave,
            InitialKind::GaussianSchrodinger => Equation::Schrodinger,
            InitialKind::GaussianMaxwell => Equation::Maxwell,
            InitialKind::Custom(state) => {
                if state.equation() != equation {
                    return Err(Error::config(
                        "initial.kind",
                        format!("custom {} state given for the {equation} equation", state.equation()),
                    ));
                }
                let n = lattice.len();
                let ok = match state {
                    EquationState::Wave(s) => s.u1.len() == n && s.u2.len() == n,
                    EquationState::Schrodinger(s) => s.u.len() == n,
                    EquationState::Maxwell(s) => s.e.len() == n - 1 && s.h.len() == n - 1,
                };
                if !ok {
                    return Err(Error::config(
                        "initial.kind",
                        format!("custom state does not have {n} modes"),
                    ));
                }
                return Ok(());
            }
        };
        if expected != equation {
            return Err(Error::config(
                "initial.kind",
                format!("initial data for the {expected} equation given for the {equation} equation"),
            ));
        }
        if !self.gamma.is_finite() {
            return Err(Error::config("initial.gamma", "must be finite"));
        }
        Ok(())
    }

    /// Standard deviations `(ell^-gamma, ell^(1-gamma))`.
    fn sigmas(&self, ell: u32) -> (f64, f64) {
        (degree_power(ell, self.gamma), degree_power(ell, self.gamma - 1.0))
    }
}

/// Draw the initial state of one sample. Coefficient `(ell, m)` of the first
/// and second component comes from its own keyed stream.
pub fn sample_initial(
    spec: &InitialSpec,
    equation: Equation,
    lattice: ModeLattice,
    monopole: bool,
    master_seed: u64,
    sample: u32,
) -> Result<EquationState> {
    spec.check(equation, lattice)?;
    let n = lattice.len();
    let draw = |rank: usize, channel: Channel, sigma: f64| -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        RngStream::new(master_seed, sample, rank as u32, 0, channel).standard_normal() * sigma
    };
    let mut state = match &spec.kind {
        InitialKind::Zero => EquationState::zeros(equation, n),
        InitialKind::Custom(state) => state.clone(),
        InitialKind::GaussianWave => {
            let mut s = WaveState::zeros(n);
            for mode in lattice.iter() {
                let (s1, s2) = spec.sigmas(mode.ell());
                let r = mode.rank();
                s.u1[r] = draw(r, Channel::InitialFirst, s1);
                s.u2[r] = draw(r, Channel::InitialSecond, s2);
            }
            EquationState::Wave(s)
        }
        InitialKind::GaussianSchrodinger => {
            let mut s = SchrodingerState::zeros(n);
            for mode in lattice.iter() {
                let (s1, s2) = spec.sigmas(mode.ell());
                let r = mode.rank();
                s.u[r] = Complex64::new(
                    draw(r, Channel::InitialFirst, s1),
                    draw(r, Channel::InitialSecond, s2),
                );
            }
            EquationState::Schrodinger(s)
        }
        InitialKind::GaussianMaxwell => {
            let mut s = MaxwellState::zeros(n);
            s.e0 = draw(0, Channel::InitialFirst, 1.0);
            s.h0 = draw(0, Channel::InitialSecond, 1.0);
            for mode in lattice.iter().skip(1) {
                let (s1, s2) = spec.sigmas(mode.ell());
                let r = mode.rank();
                s.e[r - 1] = draw(r, Channel::InitialFirst, s1);
                s.h[r - 1] = draw(r, Channel::InitialSecond, s2);
            }
            EquationState::Maxwell(s)
        }
    };
    if let EquationState::Maxwell(s) = &mut state {
        if !monopole {
            s.e0 = 0.0;
            s.h0 = 0.0;
        }
    }
    Ok(state)
}

/// Exact per-mode expectation of `quantity` and per-mode mean at time zero.
pub fn expected_moments(
    spec: &InitialSpec,
    quantity: QuantityId,
    lattice: ModeLattice,
    monopole: bool,
) -> Result<MomentState> {
    let equation = quantity.equation();
    spec.check(equation, lattice)?;
    let n = lattice.len();
    let mut out = MomentState::zeros(n);
    match &spec.kind {
        InitialKind::Zero => {}
        InitialKind::Custom(state) => {
            for mode in lattice.iter() {
                let r = mode.rank();
                let lambda = eigenvalue(mode.ell());
                let (mean, q) = match state {
                    EquationState::Wave(s) => {
                        let (a, b) = (s.u1[r], s.u2[r]);
                        ([a, b], 0.5 * (b * b + lambda * a * a))
                    }
                    EquationState::Schrodinger(s) => {
                        let w = if quantity == QuantityId::SchrodingerEnergy { lambda } else { 1.0 };
                        ([s.u[r].re, s.u[r].im], w * s.u[r].norm_sqr())
                    }
                    EquationState::Maxwell(s) => {
                        let (e, h) = if r == 0 {
                            if monopole {
                                (s.e0, s.h0)
                            } else {
                                (0.0, 0.0)
                            }
                        } else {
                            (s.e[r - 1], s.h[r - 1])
                        };
                        ([e, h], 0.5 * (e * e + h * h))
                    }
                };
                out.q[r] = q;
                out.mean[r] = mean;
            }
        }
        _ => {
            for mode in lattice.iter() {
                let (s1, s2) = spec.sigmas(mode.ell());
                let (v1, v2) = (s1 * s1, s2 * s2);
                let lambda = eigenvalue(mode.ell());
                let r = mode.rank();
                out.q[r] = match quantity {
                    QuantityId::WaveEnergy => 0.5 * (v2 + lambda * v1),
                    QuantityId::SchrodingerMass => v1 + v2,
                    QuantityId::SchrodingerEnergy => lambda * (v1 + v2),
                    QuantityId::MaxwellEnergy if r == 0 => {
                        if monopole {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    QuantityId::MaxwellEnergy => 0.5 * (v1 + v2),
                };
            }
        }
    }
    Ok(out)
}

/// Exact expected initial value of `quantity`.
pub fn expected_initial_quantity(
    spec: &InitialSpec,
    quantity: QuantityId,
    lattice: ModeLattice,
    monopole: bool,
) -> Result<f64> {
    if let InitialKind::Custom(state) = &spec.kind {
        spec.check(quantity.equation(), lattice)?;
        let mut state = state.clone();
        if let EquationState::Maxwell(s) = &mut state {
            if !monopole {
                s.e0 = 0.0;
                s.h0 = 0.0;
            }
        }
        return evaluate(quantity, &state);
    }
    Ok(expected_moments(spec, quantity, lattice, monopole)?.total())
}

/// Uniform latitude-longitude grid. `theta_i = i pi / (n_theta - 1)` includes
/// both poles; `phi_j = 2 pi j / n_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl GridSpec {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 4 {
            return Err(Error::DegenerateGrid(format!(
                "{n_theta} x {n_phi} (need n_theta >= 2 and n_phi >= 4)"
            )));
        }
        Ok(Self { n_theta, n_phi })
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * PI / (self.n_theta - 1) as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    /// Quadrature weight `sin(theta) dtheta dphi` of node `(i, j)`.
    pub fn weight(&self, i: usize) -> f64 {
        let dt = PI / (self.n_theta - 1) as f64;
        let dp = 2.0 * PI / self.n_phi as f64;
        self.theta(i).sin() * dt * dp
    }
}

/// Fully normalised associated Legendre values `Pbar_{ell,m}(x)` for
/// `0 <= m <= ell <= kappa`, without the `(-1)^m` phase.
///
/// `Pbar_{0,0} = 1 / sqrt(4 pi)`, so that `Pbar_{ell,0}(cos theta)` is the
/// zonal harmonic and `sqrt(2) Pbar_{ell,m}(cos theta) cos(m phi)` has unit
/// norm on the sphere.
#[derive(Debug, Clone)]
pub struct Legendre {
    kappa: usize,
    values: Vec<f64>,
}

impl Legendre {
    pub fn new(kappa: u32, x: f64) -> Self {
        let k = kappa as usize;
        let mut values = vec![0.0; (k + 1) * (k + 2) / 2];
        let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
        let s = (1.0 - x * x).max(0.0).sqrt();
        let mut diag = 1.0 / (4.0 * PI).sqrt();
        for m in 0..=k {
            if m > 0 {
                diag *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
            }
            values[idx(m, m)] = diag;
            if m < k {
                values[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * diag;
            }
            for l in m + 2..=k {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                values[idx(l, m)] = a * (x * values[idx(l - 1, m)] - b * values[idx(l - 2, m)]);
            }
        }
        Self { kappa: k, values }
    }

    pub fn get(&self, ell: u32, m: u32) -> f64 {
        let (l, m) = (ell as usize, m as usize);
        assert!(m <= l && l <= self.kappa, "Legendre index out of range");
        self.values[l * (l + 1) / 2 + m]
    }
}

/// Real spherical harmonic `Y_{ell,m}(theta, phi)`.
pub fn real_harmonic(mode: ModeIndex, theta: f64, phi: f64) -> f64 {
    let p = Legendre::new(mode.ell(), theta.cos());
    let m = mode.m();
    let mu = m.unsigned_abs();
    let base = p.get(mode.ell(), mu);
    let sign = if mu % 2 == 1 { -1.0 } else { 1.0 };
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => base,
        std::cmp::Ordering::Greater => sign * 2f64.sqrt() * base * (f64::from(mu) * phi).cos(),
        std::cmp::Ordering::Less => sign * 2f64.sqrt() * base * (f64::from(mu) * phi).sin(),
    }
}

fn kappa_of(len: usize) -> Result<u32> {
    let k = (len as f64).sqrt().round() as usize;
    if k == 0 || k * k != len {
        return Err(Error::config(
            "coefficients",
            format!("length {len} is not a full lattice size (kappa + 1)^2"),
        ));
    }
    Ok((k - 1) as u32)
}

/// `sum c_{ell,m} Y_{ell,m}(theta_i, phi_j)` as `n_theta` rows of `n_phi` values.
pub fn evaluate_on_grid(coeffs: &[f64], grid: GridSpec) -> Result<GridValues> {
    let grid = GridSpec::new(grid.n_theta, grid.n_phi)?;
    let kappa = kappa_of(coeffs.len())?;
    let k = kappa as usize;
    // trig tables cos(m phi_j), sin(m phi_j)
    let trig: Vec<Vec<(f64, f64)>> = (0..=k)
        .map(|m| {
            (0..grid.n_phi)
                .map(|j| (m as f64 * grid.phi(j)).sin_cos())
                .map(|(s, c)| (c, s))
                .collect()
        })
        .collect();
    let rows = (0..grid.n_theta)
        .into_par_iter()
        .map(|i| {
            let p = Legendre::new(kappa, grid.theta(i).cos());
            // per-order sums over degree of the cosine and sine parts
            let mut cos_part = vec![0.0; k + 1];
            let mut sin_part = vec![0.0; k + 1];
            for l in 0..=k {
                let li = l as i64;
                for m in 0..=l {
                    let pl = p.get(l as u32, m as u32);
                    let rank = |mm: i64| (li * li + li + mm) as usize;
                    if m == 0 {
                        cos_part[0] += coeffs[rank(0)] * pl;
                    } else {
                        let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
                        let f = sign * 2f64.sqrt() * pl;
                        cos_part[m] += coeffs[rank(m as i64)] * f;
                        sin_part[m] += coeffs[rank(-(m as i64))] * f;
                    }
                }
            }
            (0..grid.n_phi)
                .map(|j| {
                    (0..=k)
                        .map(|m| cos_part[m] * trig[m][j].0 + sin_part[m] * trig[m][j].1)
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

/// Grid values as `n_theta` rows of `n_phi` entries.
pub type GridValues = Vec<Vec<f64>>;

/// Complex coefficients evaluated as separate real and imaginary grids.
pub fn evaluate_on_grid_complex(coeffs: &[Complex64], grid: GridSpec) -> Result<(GridValues, GridValues)> {
    let re: Vec<f64> = coeffs.iter().map(|c| c.re).collect();
    let im: Vec<f64> = coeffs.iter().map(|c| c.im).collect();
    Ok((evaluate_on_grid(&re, grid)?, evaluate_on_grid(&im, grid)?))
}

/// Scalar fields worth plotting for a state, as `(name, coefficients)`.
///
/// Wave: displacement `u1`. Schrödinger: real and imaginary parts. Maxwell:
/// the radial magnetic field, with the monopole at rank 0.
pub fn snapshot_fields(state: &EquationState) -> Vec<(&'static str, Vec<f64>)> {
    match state {
        EquationState::Wave(s) => vec![("u1", s.u1.clone())],
        EquationState::Schrodinger(s) => vec![
            ("re", s.u.iter().map(|c| c.re).collect()),
            ("im", s.u.iter().map(|c| c.im).collect()),
        ],
        EquationState::Maxwell(s) => {
            let mut h = Vec::with_capacity(s.h.len() + 1);
            h.push(s.h0);
            h.extend_from_slice(&s.h);
            vec![("h", h)]
        }
    }
}

/// Write a grid with the header `# n_theta n_phi kappa time`.
pub fn write_snapshot<W: Write>(
    mut out: W,
    grid: GridSpec,
    kappa: u32,
    time: f64,
    values: &[Vec<f64>],
) -> io::Result<()> {
    writeln!(out, "# {} {} {} {:.16e}", grid.n_theta, grid.n_phi, kappa, time)?;
    for row in values {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}
