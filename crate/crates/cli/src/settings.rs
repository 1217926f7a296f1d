//! Flat `key=value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sphere_trace_core::field_synth::REFERENCE_GAMMA;
use sphere_trace_core::{
    AngularSpectrum, Equation, ExperimentConfig, InitialSpec, LevyConfig, LevyKind, QuantityId,
    SchemeId,
};

use crate::CliError;

/// Every key accepted in a config file, in echo order.
pub const KEYS: [&str; 16] = [
    "equation",
    "scheme",
    "quantity",
    "kappa",
    "T",
    "N",
    "M",
    "seed",
    "levy.kind",
    "levy.gamma_spectrum",
    "levy.complex",
    "initial.kind",
    "initial.gamma",
    "monopole",
    "record_every",
    "out_dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialChoice {
    Gaussian,
    Zero,
}

/// Spectrum `a_0 = scale * a0`, `a_ell = scale * ell^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumLaw {
    pub a0: f64,
    pub exponent: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub equation: Equation,
    pub scheme: SchemeId,
    /// `None` picks the default quantity of the equation.
    pub quantity: Option<QuantityId>,
    pub kappa: u32,
    pub t_end: f64,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub levy_kind: LevyKind,
    pub spectrum: SpectrumLaw,
    pub complex_noise: bool,
    pub initial: InitialChoice,
    pub initial_gamma: f64,
    pub monopole: bool,
    pub record_every: usize,
    pub out_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            equation: Equation::Wave,
            scheme: SchemeId::ExpEuler,
            quantity: None,
            kappa: 16,
            t_end: 3.0,
            steps: 200,
            samples: 2000,
            seed: 1,
            levy_kind: LevyKind::CompensatedMix,
            spectrum: SpectrumLaw {
                a0: 1.0,
                exponent: 4.0,
                scale: 1.0,
            },
            complex_noise: false,
            initial: InitialChoice::Gaussian,
            initial_gamma: REFERENCE_GAMMA,
            monopole: true,
            record_every: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| bad(key, format!("cannot parse `{value}` as a number")))
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{value}`"))),
    }
}

fn core_error(key: &str, e: sphere_trace_core::Error) -> CliError {
    match e {
        sphere_trace_core::Error::Config { key, reason } => CliError::Config { key, reason },
        other => bad(key, other.to_string()),
    }
}

pub fn levy_kind_name(kind: LevyKind) -> &'static str {
    match kind {
        LevyKind::GaussianOnly => "gaussian",
        LevyKind::CompensatedMix => "compensated",
        LevyKind::NonCompensatedMix => "noncompensated",
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "equation" => self.equation = value.parse().map_err(|e| core_error(key, e))?,
            "scheme" => self.scheme = value.parse().map_err(|e| core_error(key, e))?,
            "quantity" => {
                self.quantity = match value {
                    "" | "default" => None,
                    "energy" => Some(match self.equation {
                        Equation::Wave => QuantityId::WaveEnergy,
                        Equation::Schrodinger => QuantityId::SchrodingerEnergy,
                        Equation::Maxwell => QuantityId::MaxwellEnergy,
                    }),
                    other => Some(other.parse().map_err(|e| core_error(key, e))?),
                }
            }
            "kappa" => self.kappa = number(key, value)?,
            "T" => self.t_end = number(key, value)?,
            "N" => self.steps = number(key, value)?,
            "M" => self.samples = number(key, value)?,
            "seed" => self.seed = number(key, value)?,
            "levy.kind" => {
                self.levy_kind = match value.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
                    "gaussian" | "gaussianonly" => LevyKind::GaussianOnly,
                    "compensated" | "compensatedmix" => LevyKind::CompensatedMix,
                    "noncompensated" | "noncompensatedmix" => LevyKind::NonCompensatedMix,
                    _ => {
                        return Err(bad(
                            key,
                            format!("unknown noise `{value}` (expected gaussian, compensated or noncompensated)"),
                        ))
                    }
                }
            }
            "levy.gamma_spectrum" => {
                let parts: Vec<&str> = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(bad(key, "expected `a0 exponent` or `a0 exponent scale`"));
                }
                self.spectrum = SpectrumLaw {
                    a0: number(key, parts[0])?,
                    exponent: number(key, parts[1])?,
                    scale: match parts.get(2) {
                        Some(s) => number(key, s)?,
                        None => 1.0,
                    },
                };
            }
            "levy.complex" => self.complex_noise = boolean(key, value)?,
            "initial.kind" => {
                self.initial = match value {
                    "gaussian" => InitialChoice::Gaussian,
                    "zero" => InitialChoice::Zero,
                    _ => return Err(bad(key, format!("unknown initial data `{value}` (expected gaussian or zero)"))),
                }
            }
            "initial.gamma" => self.initial_gamma = number(key, value)?,
            "monopole" => self.monopole = boolean(key, value)?,
            "record_every" => self.record_every = number(key, value)?,
            "out_dir" => {
                if value.is_empty() {
                    return Err(bad(key, "must not be empty"));
                }
                self.out_dir = PathBuf::from(value)
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Apply `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key=value, got `{raw}`", i + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{assignment}`")))?;
        self.set(key.trim(), value)
    }

    pub fn quantity(&self) -> QuantityId {
        self.quantity.unwrap_or_else(|| QuantityId::default_for(self.equation))
    }

    /// Canonical config text. Feeding it back reproduces the run.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let SpectrumLaw { a0, exponent, scale } = self.spectrum;
        let initial = match self.initial {
            InitialChoice::Gaussian => "gaussian",
            InitialChoice::Zero => "zero",
        };
        let values = [
            self.equation.to_string(),
            self.scheme.to_string(),
            self.quantity().to_string(),
            self.kappa.to_string(),
            self.t_end.to_string(),
            self.steps.to_string(),
            self.samples.to_string(),
            self.seed.to_string(),
            levy_kind_name(self.levy_kind).to_string(),
            format!("{a0} {exponent} {scale}"),
            self.complex_noise.to_string(),
            initial.to_string(),
            self.initial_gamma.to_string(),
            self.monopole.to_string(),
            self.record_every.to_string(),
            self.out_dir.display().to_string(),
        ];
        for (key, value) in KEYS.iter().zip(values) {
            writeln!(s, "{key}={value}").expect("writing to a string");
        }
        s
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let SpectrumLaw { a0, exponent, scale } = self.spectrum;
        let spectrum = AngularSpectrum::power_law(self.kappa, a0, exponent, scale)
            .map_err(|e| core_error("levy.gamma_spectrum", e))?;
        let mut levy = LevyConfig::new(self.levy_kind, spectrum, self.seed);
        levy.complex_noise = self.complex_noise;
        let mut initial = match self.initial {
            InitialChoice::Gaussian => InitialSpec::gaussian(self.equation),
            InitialChoice::Zero => InitialSpec::zero(),
        };
        initial.gamma = self.initial_gamma;
        let config = ExperimentConfig {
            equation: self.equation,
            scheme: self.scheme,
            quantity: self.quantity(),
            kappa: self.kappa,
            t_end: self.t_end,
            steps: self.steps,
            samples: self.samples,
            levy,
            initial,
            monopole: self.monopole,
            record_every: self.record_every,
        };
        config.validate().map_err(|e| match e {
            sphere_trace_core::Error::UnsupportedScheme { .. } => bad("scheme", e.to_string()),
            other => core_error("config", other),
        })?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut s = Settings::default();
        s.apply_text("equation = maxwell\nT=0.1\nlevy.gamma_spectrum=0.5, 3\n# note\nmonopole=no\n")
            .unwrap();
        let mut again = Settings::default();
        again.apply_text(&s.echo()).unwrap();
        assert_eq!(s.echo(), again.echo());
        assert_eq!(again.quantity(), QuantityId::MaxwellEnergy);
        assert_eq!(again.spectrum.a0, 0.5);
        assert!(!again.monopole);
    }

    #[test]
    fn errors_name_the_key() {
        let mut s = Settings::default();
        for (line, key) in [
            ("kappa=abc", "kappa"),
            ("levy.kind=cauchy", "levy.kind"),
            ("scheme=rk4", "scheme"),
            ("bogus=1", "bogus"),
            ("monopole=maybe", "monopole"),
        ] {
            match s.apply_text(line) {
                Err(CliError::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{line}: {other:?}"),
            }
        }
    }

    #[test]
    fn validation_errors_name_the_key() {
        let mut s = Settings::default();
        s.set("N", "0").unwrap();
        match s.experiment() {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "N"),
            other => panic!("{other:?}"),
        }
        let mut s = Settings::default();
        s.set("equation", "maxwell").unwrap();
        s.set("scheme", "adapted").unwrap();
        match s.experiment() {
            Err(CliError::Config { key, .. }) => assert_eq!(key, "scheme"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn energy_resolves_against_equation() {
        let mut s = Settings::default();
        s.apply_text("equation=schrodinger\nquantity=energy").unwrap();
        assert_eq!(s.quantity(), QuantityId::SchrodingerEnergy);
    }
}
