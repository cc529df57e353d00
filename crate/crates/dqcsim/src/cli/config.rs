use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DqcError, Result};
use crate::mbqc::MeasurementPattern;
use crate::qstate::{Angle, Pauli, PauliString, PureState, QubitLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sample,
    Enumerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Rsp,
    Ubqc,
    BlindRm,
    Protocol1,
    Protocol3,
}

impl ProtocolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolName::Rsp => "rsp",
            ProtocolName::Ubqc => "ubqc",
            ProtocolName::BlindRm => "blind-rm",
            ProtocolName::Protocol1 => "protocol1",
            ProtocolName::Protocol3 => "protocol3",
        }
    }
}

/// Protocol run description read from JSON.
///
/// `pattern` is a full pattern object; `angles` (units of π/8) is the
/// shorthand for a path pattern, with an empty list meaning a single vertex.
/// `attack` maps server-held labels to Pauli letters and makes the server
/// dishonest.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Option<ProtocolName>,
    #[serde(default)]
    pub pattern: Option<serde_json::Value>,
    #[serde(default)]
    pub angles: Option<Vec<i64>>,
    #[serde(default)]
    pub input: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub x: Option<Vec<u8>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub theta: Option<i64>,
    #[serde(default)]
    pub dishonest: Vec<usize>,
    #[serde(default = "yes")]
    pub server_honest: bool,
    #[serde(default)]
    pub attack: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Option<Mode>,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| DqcError::Config(format!("config JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| DqcError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| DqcError::Config(format!("{}: {e}", path.display())))
    }

    pub fn protocol(&self) -> Result<ProtocolName> {
        self.protocol.ok_or_else(|| DqcError::Config("missing `protocol`".into()))
    }

    /// Flag beats config; without either a seed selects sampling.
    pub fn resolve_mode(&self, flag: Option<Mode>, seed: Option<u64>) -> Result<Mode> {
        let mode = flag.or(self.mode).unwrap_or(if seed.is_some() { Mode::Sample } else { Mode::Enumerate });
        if mode == Mode::Sample && seed.is_none() {
            return Err(DqcError::Config("sample mode needs a seed".into()));
        }
        Ok(mode)
    }

    pub fn pattern(&self) -> Result<MeasurementPattern> {
        match (&self.pattern, &self.angles) {
            (Some(_), Some(_)) => Err(DqcError::Config("give either `pattern` or `angles`, not both".into())),
            (Some(v), None) => MeasurementPattern::from_json(&v.to_string()),
            (None, Some(a)) if a.is_empty() => Ok(MeasurementPattern::identity()),
            (None, Some(a)) => Ok(MeasurementPattern::j_chain(&a.iter().map(|&k| Angle::new(k)).collect::<Vec<_>>())),
            (None, None) => Ok(MeasurementPattern::j_chain(&[Angle::new(3)])),
        }
    }

    /// Single-qubit input on `label`; defaults to `0.6|0⟩ + 0.8i|1⟩`.
    pub fn input_state(&self, label: QubitLabel) -> Result<PureState> {
        let [a, b] = self.input.unwrap_or([[0.6, 0.0], [0.0, 0.8]]);
        PureState::normalised(vec![label], vec![Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1])])
    }

    pub fn attack(&self) -> Result<PauliString> {
        let mut p = PauliString::identity();
        for (l, letter) in &self.attack {
            let mut cs = letter.chars();
            let q = match (cs.next().and_then(Pauli::from_char), cs.next()) {
                (Some(q), None) => q,
                _ => return Err(DqcError::Config(format!("attack on `{l}`: bad Pauli letter `{letter}`"))),
            };
            p.set(QubitLabel::new(l.as_str()), q);
        }
        Ok(p)
    }

    pub fn theta(&self) -> Result<Angle> {
        let t = self.theta.unwrap_or(0);
        if !(0..8).contains(&t) {
            return Err(DqcError::Config(format!("theta = {t} is outside 0..8")));
        }
        Ok(Angle::new(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_a_position() {
        let e = RunConfig::from_json("{\"protocol\": \"rsp\",\n  \"n\": }").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"protocol":"rsp","nn":3}"#).is_err());
    }

    #[test]
    fn mode_resolution() {
        let c = RunConfig::default();
        assert_eq!(c.resolve_mode(None, Some(1)).unwrap(), Mode::Sample);
        assert_eq!(c.resolve_mode(None, None).unwrap(), Mode::Enumerate);
        assert!(c.resolve_mode(Some(Mode::Sample), None).is_err());
    }

    #[test]
    fn attack_letters() {
        let c = RunConfig::from_json(r#"{"protocol":"protocol1","attack":{"1:0":"Z","2:1":"X"}}"#).unwrap();
        assert_eq!(c.attack().unwrap().weight(), 2);
        let bad = RunConfig::from_json(r#"{"protocol":"protocol1","attack":{"1:0":"Q"}}"#).unwrap();
        assert!(bad.attack().is_err());
    }

    #[test]
    fn default_pattern_is_a_single_edge() {
        let p = RunConfig::default().pattern().unwrap();
        assert_eq!(p.graph.num_vertices(), 2);
        let c = RunConfig::from_json(r#"{"angles":[]}"#).unwrap();
        assert_eq!(c.pattern().unwrap().graph.num_vertices(), 1);
    }
}
