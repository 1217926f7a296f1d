//! Monte Carlo estimation of expected quantities.
//!
//! Samples are split into fixed-size chunks. Each chunk is simulated
//! sequentially into its own [`Accumulator`], and chunk accumulators are
//! combined by a pairwise tree whose shape depends only on the number of
//! chunks. Together with keyed random streams this makes the output
//! bit-identical for any number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::field_synth::{expected_moments, sample_initial, InitialSpec};
use crate::integrators::{
    Equation, EquationState, MaxwellStepper, SchemeId, SchrodingerStepper, WaveStepper,
};
use crate::levy_noise::{Channel, LevyConfig, NoiseSampler, RngStream};
use crate::quantities::{evaluate, moment_recursion, trace_formula, OracleParams, QuantityId, TraceCurve};
use crate::sphere_modes::ModeLattice;

/// Samples simulated sequentially by one task.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub scheme: SchemeId,
    pub quantity: QuantityId,
    pub kappa: u32,
    /// Final time `T`.
    pub t_end: f64,
    /// Number of steps `N`.
    pub steps: usize,
    /// Number of samples `M`.
    pub samples: usize,
    pub levy: LevyConfig,
    pub initial: InitialSpec,
    /// Simulate the Maxwell monopole channels.
    pub monopole: bool,
    pub record_every: usize,
}

impl ExperimentConfig {
    pub fn tau(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn lattice(&self) -> ModeLattice {
        ModeLattice::new(self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("T", format!("final time must be positive, got {}", self.t_end)));
        }
        if self.steps == 0 || self.steps > u32::MAX as usize {
            return Err(Error::config("N", format!("step count must be in 1..=2^32-1, got {}", self.steps)));
        }
        if self.samples == 0 || self.samples > u32::MAX as usize {
            return Err(Error::config("M", format!("sample count must be in 1..=2^32-1, got {}", self.samples)));
        }
        if self.record_every == 0 || (self.record_every != 1 && !self.steps.is_multiple_of(self.record_every)) {
            return Err(Error::config(
                "record_every",
                format!("must be 1 or divide N = {}, got {}", self.steps, self.record_every),
            ));
        }
        if self.quantity.equation() != self.equation {
            return Err(Error::config(
                "quantity",
                format!("{} is not a quantity of the {} equation", self.quantity, self.equation),
            ));
        }
        if self.scheme == SchemeId::AdaptedExpEuler && self.equation != Equation::Wave {
            return Err(Error::UnsupportedScheme {
                scheme: self.scheme,
                equation: self.equation.name(),
            });
        }
        if self.levy.complex_noise && self.equation != Equation::Schrodinger {
            return Err(Error::config("levy.complex", "complex noise only applies to the Schrödinger equation"));
        }
        if self.kappa > 4096 {
            return Err(Error::config("kappa", format!("truncation {} is too large", self.kappa)));
        }
        self.levy
            .spectrum
            .covers(self.lattice())
            .map_err(|e| Error::config("levy.gamma_spectrum", e.to_string()))?;
        self.initial.check(self.equation, self.lattice())?;
        Ok(())
    }

    /// Indices of recorded steps.
    pub fn recorded_steps(&self) -> Vec<usize> {
        (0..=self.steps).step_by(self.record_every).collect()
    }

    pub fn time_of(&self, step: usize) -> f64 {
        self.t_end * step as f64 / self.steps as f64
    }
}

/// Streaming per-time mean and centred second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Accumulator {
    pub fn new(points: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; points],
            m2: vec![0.0; points],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn points(&self) -> usize {
        self.mean.len()
    }

    /// Add one sample path recorded on the accumulator's grid.
    pub fn add(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.points() {
            return Err(Error::GridMismatch(self.points(), values.len()));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let d = x - *mean;
            *mean += d / n;
            *m2 += d * (x - *mean);
        }
        Ok(())
    }

    /// Combine two accumulators over the same grid.
    ///
    /// The result does not depend on argument order, and merging with an
    /// empty accumulator returns the other one unchanged.
    pub fn merge(&self, other: &Accumulator) -> Result<Accumulator> {
        if self.points() != other.points() {
            return Err(Error::GridMismatch(self.points(), other.points()));
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let n = (self.count + other.count) as f64;
        let mut out = Accumulator::new(self.points());
        out.count = self.count + other.count;
        for k in 0..self.points() {
            let a = (self.count, self.mean[k], self.m2[k]);
            let b = (other.count, other.mean[k], other.m2[k]);
            // canonical order keeps the update symmetric
            let key = |s: &(u64, f64, f64)| (s.0, s.1.to_bits(), s.2.to_bits());
            let (a, b) = if key(&a) <= key(&b) { (a, b) } else { (b, a) };
            let (wa, wb) = (a.0 as f64, b.0 as f64);
            let d = b.1 - a.1;
            out.mean[k] = a.1 + d * (wb / n);
            out.m2[k] = (a.2 + b.2) + d * d * (wa * wb / n);
        }
        Ok(out)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of the mean from the unbiased sample variance; zero
    /// with fewer than two samples.
    pub fn stderr(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.points()];
        }
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|m2| (m2.max(0.0) / (n - 1.0)).sqrt() / n.sqrt())
            .collect()
    }
}

/// Combine accumulators pairwise, `((0 1) (2 3)) ...`.
pub fn tree_merge(mut parts: Vec<Accumulator>, points: usize) -> Result<Accumulator> {
    if parts.is_empty() {
        return Ok(Accumulator::new(points));
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.chunks(2);
        for pair in &mut it {
            next.push(match pair {
                [a, b] => a.merge(b)?,
                [a] => a.clone(),
                _ => unreachable!(),
            });
        }
        parts = next;
    }
    Ok(parts.pop().expect("non-empty"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantitySeries {
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trace-formula curve; absent when the scheme has no closed form.
    pub oracle_trace: Option<Vec<f64>>,
    pub oracle_moment: Vec<f64>,
    pub samples: usize,
}

impl QuantitySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Write `t,estimate,stderr,oracle_trace,oracle_moment` rows with 17
    /// significant digits. A missing trace formula leaves its column empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,estimate,stderr,oracle_trace,oracle_moment")?;
        for k in 0..self.len() {
            let trace = match &self.oracle_trace {
                Some(v) => format!("{:.16e}", v[k]),
                None => String::new(),
            };
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{:.16e}",
                self.times[k], self.estimate[k], self.stderr[k], trace, self.oracle_moment[k]
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Fraction of points with `|estimate - reference| <= k * stderr`.
    pub fn coverage(&self, reference: &[f64], k: f64) -> f64 {
        let hits = self
            .estimate
            .iter()
            .zip(&self.stderr)
            .zip(reference)
            .filter(|((e, s), r)| (*e - *r).abs() <= k * *s)
            .count();
        hits as f64 / self.len() as f64
    }
}

enum Model {
    Wave(WaveStepper),
    Schrodinger(SchrodingerStepper),
    Maxwell(MaxwellStepper),
}

/// Everything a worker needs, built once per experiment.
struct Prepared<'a> {
    config: &'a ExperimentConfig,
    model: Model,
    sampler: NoiseSampler,
    /// Noise amplitude per rank (Maxwell rank 0 is zero without monopole).
    amplitude: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let tau = config.tau();
        let lattice = config.lattice();
        let mut amplitude = Vec::with_capacity(lattice.len());
        let mut mean_rate = Vec::with_capacity(lattice.len());
        for mode in lattice.iter() {
            amplitude.push(config.levy.spectrum.amplitude(mode.ell())?);
            mean_rate.push(config.levy.mean_rate(mode.ell())?);
        }
        if config.equation == Equation::Maxwell && !config.monopole {
            amplitude[0] = 0.0;
        }
        let model = match config.equation {
            Equation::Wave => Model::Wave(WaveStepper::new(config.kappa, tau, config.scheme, &mean_rate)?),
            Equation::Schrodinger => Model::Schrodinger(SchrodingerStepper::new(config.kappa, tau, config.scheme)?),
            Equation::Maxwell => Model::Maxwell(MaxwellStepper::new(config.kappa, tau, config.scheme)?),
        };
        Ok(Self {
            config,
            model,
            sampler: NoiseSampler::new(&config.levy, tau)?,
            amplitude,
        })
    }

    fn fill_real(&self, out: &mut [f64], sample: u32, step: u32, channel: Channel) {
        let seed = self.config.levy.master_seed;
        for (r, (x, &a)) in out.iter_mut().zip(&self.amplitude).enumerate() {
            *x = if a == 0.0 {
                0.0
            } else {
                let mut s = RngStream::new(seed, sample, r as u32, step, channel);
                self.sampler.draw_scaled(a, &mut s)
            };
        }
    }

    /// Run one path, calling `observe(step, state)` at step 0 and after every step.
    fn run_path<F>(&self, sample: u32, mut observe: F) -> Result<()>
    where
        F: FnMut(usize, &EquationState) -> Result<()>,
    {
        let c = self.config;
        let n = self.amplitude.len();
        let mut state = sample_initial(&c.initial, c.equation, c.lattice(), c.monopole, c.levy.master_seed, sample)?;
        observe(0, &state)?;
        let mut re = vec![0.0; n];
        let mut aux = vec![0.0; n];
        let mut cplx = vec![Complex64::new(0.0, 0.0); n];
        for step in 0..c.steps {
            let k = step as u32;
            match (&self.model, &mut state) {
                (Model::Wave(m), EquationState::Wave(s)) => {
                    self.fill_real(&mut re, sample, k, Channel::Noise);
                    m.step_unchecked(s, &re);
                }
                (Model::Schrodinger(m), EquationState::Schrodinger(s)) => {
                    self.fill_real(&mut re, sample, k, Channel::Noise);
                    if self.sampler.is_complex() {
                        self.fill_real(&mut aux, sample, k, Channel::NoiseImag);
                        for ((z, x), y) in cplx.iter_mut().zip(&re).zip(&aux) {
                            *z = Complex64::new(x * FRAC_1_SQRT_2, y * FRAC_1_SQRT_2);
                        }
                    } else {
                        for (z, x) in cplx.iter_mut().zip(&re) {
                            *z = Complex64::new(*x, 0.0);
                        }
                    }
                    m.step_unchecked(s, &cplx);
                }
                (Model::Maxwell(m), EquationState::Maxwell(s)) => {
                    self.fill_real(&mut re, sample, k, Channel::Noise);
                    self.fill_real(&mut aux, sample, k, Channel::NoiseH);
                    m.step_unchecked(s, &re, &aux);
                }
                _ => unreachable!("model and state built for the same equation"),
            }
            observe(step + 1, &state)?;
        }
        Ok(())
    }

    fn run_chunk(&self, first: usize, last: usize) -> Result<Accumulator> {
        let c = self.config;
        let points = c.recorded_steps().len();
        let mut acc = Accumulator::new(points);
        let mut values = vec![0.0; points];
        for sample in first..last {
            self.run_path(sample as u32, |step, state| {
                if step % c.record_every == 0 {
                    values[step / c.record_every] = evaluate(c.quantity, state)?;
                }
                Ok(())
            })?;
            acc.add(&values)?;
        }
        Ok(acc)
    }
}

/// Oracle curves on the recorded grid: `(trace formula, moment recursion)`.
pub fn oracle_curves(config: &ExperimentConfig) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
    config.validate()?;
    let lattice = config.lattice();
    let params = OracleParams::new(config.equation, config.kappa, &config.levy, config.monopole)?;
    let init = expected_moments(&config.initial, config.quantity, lattice, config.monopole)?;
    let q0 = init.total();
    let full = moment_recursion(config.quantity, config.scheme, &params, &init, config.tau(), config.steps)?;
    let steps = config.recorded_steps();
    let moment = steps.iter().map(|&k| full[k]).collect();
    let trace = steps
        .iter()
        .map(|&k| {
            trace_formula(
                config.quantity,
                TraceCurve::Scheme(config.scheme),
                q0,
                &params,
                config.time_of(k),
            )
        })
        .collect::<Result<Vec<_>>>();
    let trace = match trace {
        Ok(v) => Some(v),
        Err(Error::NoClosedForm(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((trace, moment))
}

/// Run all samples on the current rayon pool and reduce them.
pub fn accumulate(config: &ExperimentConfig) -> Result<Accumulator> {
    let prepared = Prepared::new(config)?;
    let chunks: Vec<(usize, usize)> = (0..config.samples)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(config.samples)))
        .collect();
    let parts = chunks
        .par_iter()
        .map(|&(a, b)| prepared.run_chunk(a, b))
        .collect::<Result<Vec<_>>>()?;
    tree_merge(parts, config.recorded_steps().len())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<QuantitySeries> {
    config.validate()?;
    let (oracle_trace, oracle_moment) = oracle_curves(config)?;
    let acc = accumulate(config)?;
    Ok(QuantitySeries {
        times: config.recorded_steps().iter().map(|&k| config.time_of(k)).collect(),
        estimate: acc.mean().to_vec(),
        stderr: acc.stderr(),
        oracle_trace,
        oracle_moment,
        samples: config.samples,
    })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<QuantitySeries> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

/// Replay one sample path, handing every state to `observe(step, time, state)`.
pub fn simulate_path<F>(config: &ExperimentConfig, sample: u32, mut observe: F) -> Result<()>
where
    F: FnMut(usize, f64, &EquationState) -> Result<()>,
{
    let prepared = Prepared::new(config)?;
    prepared.run_path(sample, |step, state| observe(step, config.time_of(step), state))
}
