//! Physical constants, experiment parameter sets and the `key = value`
//! configuration format.
//!
//! All configuration values are SI base units. Constants are pinned to
//! CODATA 2006 so that derived numbers are reproducible bit-for-bit.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fundamental constants used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
}

/// CODATA 2006 values. Not user-overridable.
pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    hbar: HBAR,
    k_b: K_B,
    c: C,
};

pub const HBAR: f64 = 1.054_571_628e-34;
pub const K_B: f64 = 1.380_650_4e-23;
pub const C: f64 = 2.997_924_58e8;

/// Cavity length of the room-temperature experiment, used as the default
/// for the cryogenic parameter sets which do not state one.
pub const DEFAULT_CAVITY_LENGTH: f64 = 0.067;

/// Names of the fields of [`ExperimentParams`], in the exact spelling used by
/// the configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParamName {
    #[serde(rename = "L")]
    Length,
    #[serde(rename = "lambda")]
    Wavelength,
    #[serde(rename = "F")]
    Finesse,
    #[serde(rename = "P_in")]
    InputPower,
    #[serde(rename = "T")]
    Temperature,
    #[serde(rename = "m")]
    Mass,
    #[serde(rename = "omega_m")]
    OmegaM,
    #[serde(rename = "Q")]
    QualityFactor,
    #[serde(rename = "r_c")]
    Reflectivity,
    #[serde(rename = "x0")]
    Offset,
}

impl ParamName {
    /// Config-file order.
    pub const ALL: [ParamName; 10] = [
        ParamName::Length,
        ParamName::Wavelength,
        ParamName::Finesse,
        ParamName::InputPower,
        ParamName::Temperature,
        ParamName::Mass,
        ParamName::OmegaM,
        ParamName::QualityFactor,
        ParamName::Reflectivity,
        ParamName::Offset,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ParamName::Length => "L",
            ParamName::Wavelength => "lambda",
            ParamName::Finesse => "F",
            ParamName::InputPower => "P_in",
            ParamName::Temperature => "T",
            ParamName::Mass => "m",
            ParamName::OmegaM => "omega_m",
            ParamName::QualityFactor => "Q",
            ParamName::Reflectivity => "r_c",
            ParamName::Offset => "x0",
        }
    }

    pub fn from_key(key: &str) -> Option<ParamName> {
        ParamName::ALL.into_iter().find(|p| p.key() == key)
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One physical scenario: cavity, membrane, laser and bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    /// Cavity length `L`, m.
    #[serde(rename = "L")]
    pub length: f64,
    /// Laser wavelength, m.
    #[serde(rename = "lambda")]
    pub wavelength: f64,
    /// Cavity finesse.
    #[serde(rename = "F")]
    pub finesse: f64,
    /// Incident optical power, W.
    #[serde(rename = "P_in")]
    pub input_power: f64,
    /// Bath temperature, K.
    #[serde(rename = "T")]
    pub temperature: f64,
    /// Motional mass, kg.
    #[serde(rename = "m")]
    pub mass: f64,
    /// Mechanical angular frequency, rad/s.
    pub omega_m: f64,
    /// Mechanical quality factor.
    #[serde(rename = "Q")]
    pub q: f64,
    /// Membrane field reflectivity.
    pub r_c: f64,
    /// Residual membrane offset from the detuning extremum, m.
    pub x0: f64,
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub param: ParamName,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("duplicate key `{0}`")]
    DuplicateKey(ParamName),
    #[error("missing key `{0}`")]
    MissingKey(ParamName),
    #[error("cannot parse value `{value}` for key `{key}`")]
    BadNumber { key: ParamName, value: String },
    #[error("invalid parameters: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    /// The key the error refers to, when there is exactly one.
    pub fn key(&self) -> Option<ParamName> {
        match self {
            ConfigError::DuplicateKey(k) | ConfigError::MissingKey(k) => Some(*k),
            ConfigError::BadNumber { key, .. } => Some(*key),
            ConfigError::Invalid(v) => v.first().map(|v| v.param),
            _ => None,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

impl ExperimentParams {
    /// Reference set 1: F = 3e5, P_in = 10 µW, r_c = 0.999.
    pub fn reference_set_1() -> Self {
        ExperimentParams {
            length: DEFAULT_CAVITY_LENGTH,
            wavelength: 532e-9,
            finesse: 3e5,
            input_power: 1e-5,
            temperature: 0.3,
            mass: 5e-14,
            omega_m: 6.2832e5,
            q: 1.2e7,
            r_c: 0.999,
            x0: 5e-13,
        }
    }

    /// Reference set 2: F = 6e5, P_in = 1 µW, r_c = 0.9999.
    pub fn reference_set_2() -> Self {
        ExperimentParams {
            finesse: 6e5,
            input_power: 1e-6,
            r_c: 0.9999,
            ..Self::reference_set_1()
        }
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::Length => self.length,
            ParamName::Wavelength => self.wavelength,
            ParamName::Finesse => self.finesse,
            ParamName::InputPower => self.input_power,
            ParamName::Temperature => self.temperature,
            ParamName::Mass => self.mass,
            ParamName::OmegaM => self.omega_m,
            ParamName::QualityFactor => self.q,
            ParamName::Reflectivity => self.r_c,
            ParamName::Offset => self.x0,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        let slot = match name {
            ParamName::Length => &mut self.length,
            ParamName::Wavelength => &mut self.wavelength,
            ParamName::Finesse => &mut self.finesse,
            ParamName::InputPower => &mut self.input_power,
            ParamName::Temperature => &mut self.temperature,
            ParamName::Mass => &mut self.mass,
            ParamName::OmegaM => &mut self.omega_m,
            ParamName::QualityFactor => &mut self.q,
            ParamName::Reflectivity => &mut self.r_c,
            ParamName::Offset => &mut self.x0,
        };
        *slot = value;
    }

    /// Every violated invariant, ordered by key name.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |param: ParamName, message: String| out.push(Violation { param, message });

        for name in [
            ParamName::Length,
            ParamName::Wavelength,
            ParamName::InputPower,
            ParamName::Temperature,
            ParamName::Mass,
            ParamName::OmegaM,
            ParamName::QualityFactor,
        ] {
            let v = self.get(name);
            if !(v.is_finite() && v > 0.0) {
                push(name, format!("{name} must be > 0 (got {v})"));
            }
        }
        if !(self.finesse.is_finite() && self.finesse >= 1.0) {
            push(
                ParamName::Finesse,
                format!("F must be >= 1 (got {})", self.finesse),
            );
        }
        if !(self.r_c.is_finite() && self.r_c >= 0.0) {
            push(
                ParamName::Reflectivity,
                format!("r_c must be >= 0 (got {})", self.r_c),
            );
        } else if self.r_c >= 1.0 {
            push(
                ParamName::Reflectivity,
                format!("r_c must be < 1 (got {})", self.r_c),
            );
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0) {
            push(ParamName::Offset, format!("x0 must be >= 0 (got {})", self.x0));
        } else if self.wavelength > 0.0 && self.x0 >= self.wavelength / 8.0 {
            push(
                ParamName::Offset,
                format!(
                    "x0 must be < lambda/8 = {} (got {})",
                    self.wavelength / 8.0,
                    self.x0
                ),
            );
        }

        out.sort_by(|a, b| a.param.key().cmp(b.param.key()));
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Parses the `key = value` format. All ten keys are required.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut values: [Option<f64>; 10] = [None; 10];
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let key = key.trim();
            let value = value.trim();
            let name = ParamName::from_key(key).ok_or_else(|| ConfigError::UnknownKey {
                key: key.to_string(),
                line: idx + 1,
            })?;
            let parsed: f64 = value.parse().map_err(|_| ConfigError::BadNumber {
                key: name,
                value: value.to_string(),
            })?;
            let slot = &mut values[name as usize];
            if slot.is_some() {
                return Err(ConfigError::DuplicateKey(name));
            }
            *slot = Some(parsed);
        }

        let mut params = ExperimentParams::reference_set_1();
        for name in ParamName::ALL {
            let v = values[name as usize].ok_or(ConfigError::MissingKey(name))?;
            params.set(name, v);
        }
        let violations = params.validate();
        if violations.is_empty() {
            Ok(params)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    /// Serializes in the config format. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for name in ParamName::ALL {
            s.push_str(&format!("{} = {:e}\n", name.key(), self.get(name)));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_config_string())
    }

    /// One-line `key=value` rendering used in output metadata headers.
    pub fn summary(&self) -> String {
        ParamName::ALL
            .iter()
            .map(|n| format!("{}={:e}", n.key(), self.get(*n)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentParams, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ExperimentParams::from_config_str(&text)
}

/// Dielectric slab used to compute the membrane reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembraneSpec {
    pub n_index: f64,
    /// Thickness, m.
    pub thickness: f64,
}

impl MembraneSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.n_index.is_finite() && self.n_index >= 1.0) {
            return Err(format!("n_index must be >= 1 (got {})", self.n_index));
        }
        if !(self.thickness.is_finite() && self.thickness > 0.0) {
            return Err(format!("thickness must be > 0 (got {})", self.thickness));
        }
        Ok(())
    }
}
