//! Plain key-value scenario files.
//!
//! ```text
//! # comment
//! [chain]
//! length = 0.3, 0.3, 0.3
//! mass = 2, 2, 2
//!
//! [controller]
//! k_ff = 1.5
//! ```
//!
//! Values are decimal numbers (`.` as decimal point, no grouping), comma
//! separated lists, `true`/`false`, or lower-case enum names. Every key is
//! optional; see [`KEYS`] for what each section accepts.

use std::collections::BTreeMap;
use std::path::Path;

use cwbc_core::simkit::{default_chain, DEFAULT_OPERATOR_MASS, DEFAULT_Q0};
use cwbc_core::{ComTaskMode, FeedbackMode, Integrator, Link, PlanarChain, Scenario};
use cwbc_core::simkit::SensorModel;
use nalgebra::{DVector, Matrix2, Vector2};
use thiserror::Error;

/// Accepted keys per section.
pub const KEYS: &[(&str, &[&str])] = &[
    ("chain", &["length", "mass", "com_offset", "inertia", "gravity"]),
    ("operator", &["mass"]),
    (
        "controller",
        &["k_pc", "k_dc", "k_ff", "k_jm", "pinv_damping", "com_mode", "feedback", "com_target"],
    ),
    ("operator_policy", &["stiffness", "damping", "target"]),
    (
        "simulation",
        &["q0", "duration", "dt", "integrator", "sensor", "plant_coriolis", "max_joint_speed"],
    ),
    ("sweep", &["k_ff_sweep"]),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: `{section}.{key}`: {message}")]
    Value {
        line: usize,
        section: String,
        key: String,
        message: String,
    },
    #[error("invalid scenario: `{key}` {message}")]
    Invalid { key: String, message: String },
}

impl From<cwbc_core::Error> for ConfigError {
    fn from(e: cwbc_core::Error) -> Self {
        match e {
            cwbc_core::Error::InvalidParameter { name, reason } => ConfigError::Invalid {
                key: name,
                message: reason,
            },
            other => ConfigError::Invalid {
                key: "scenario".into(),
                message: other.to_string(),
            },
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Parsed but uninterpreted file: `(section, key) -> value`.
#[derive(Debug, Default)]
struct Document {
    entries: BTreeMap<(String, String), Entry>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line,
                        message: format!("unterminated section header `{content}`"),
                    })?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::UnknownSection {
                        line,
                        section: name.to_string(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let Some(sec) = section.clone() else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("key `{key}` outside any section"),
                });
            };
            let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: sec,
                    key: key.to_string(),
                });
            }
            let slot = (sec.clone(), key.to_string());
            if doc.entries.contains_key(&slot) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    section: sec,
                    key: key.to_string(),
                });
            }
            doc.entries.insert(
                slot,
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        Ok(doc)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }

    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line: self.get(section, key).map_or(0, |e| e.line),
            section: section.to_string(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(entry) = self.get(section, key) else {
            return Ok(None);
        };
        if entry.value.is_empty() {
            return Ok(Some(Vec::new()));
        }
        entry
            .value
            .split(',')
            .map(|item| {
                parse_number(item.trim()).ok_or_else(|| {
                    self.error(section, key, format!("`{}` is not a number", item.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn list_len(&self, section: &str, key: &str, lens: &[usize]) -> Result<Option<Vec<f64>>> {
        match self.list(section, key)? {
            Some(v) if !lens.contains(&v.len()) => {
                let want: Vec<String> = lens.iter().map(|n| n.to_string()).collect();
                Err(self.error(
                    section,
                    key,
                    format!("expected {} value(s), got {}", want.join(" or "), v.len()),
                ))
            }
            other => Ok(other),
        }
    }

    fn scalar(&self, section: &str, key: &str) -> Result<Option<f64>> {
        Ok(self.list_len(section, key, &[1])?.map(|v| v[0]))
    }

    fn word(&self, section: &str, key: &str, choices: &[&str]) -> Result<Option<usize>> {
        let Some(entry) = self.get(section, key) else {
            return Ok(None);
        };
        choices
            .iter()
            .position(|c| *c == entry.value)
            .map(Some)
            .ok_or_else(|| self.error(section, key, format!("expected one of {}", choices.join(", "))))
    }
}

/// Strict decimal parse: digits, optional sign, `.`, exponent. `f64::from_str`
/// alone would also accept `inf`, `nan` and `infinity`.
fn parse_number(s: &str) -> Option<f64> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))
        && s.chars().any(|c| c.is_ascii_digit());
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn gain_matrix(values: &[f64]) -> Matrix2<f64> {
    match values.len() {
        1 => Matrix2::identity() * values[0],
        2 => Matrix2::new(values[0], 0.0, 0.0, values[1]),
        _ => Matrix2::new(values[0], values[1], values[2], values[3]),
    }
}

fn pair(values: &[f64], fallback: Vector2<f64>) -> Vector2<f64> {
    match values.len() {
        1 => Vector2::new(values[0], fallback.y),
        _ => Vector2::new(values[0], values[1]),
    }
}

fn build_chain(doc: &Document) -> Result<PlanarChain> {
    let gravity = doc.scalar("chain", "gravity")?;
    let lengths = doc.list("chain", "length")?;
    let masses = doc.list("chain", "mass")?;
    let (lengths, masses) = match (lengths, masses) {
        (None, None) => {
            for key in ["com_offset", "inertia"] {
                if doc.has("chain", key) {
                    return Err(doc.error("chain", key, "needs `length` and `mass` as well"));
                }
            }
            let base = default_chain();
            return Ok(PlanarChain::new(base.links().to_vec(), gravity.unwrap_or(base.gravity()))?);
        }
        (Some(l), Some(m)) => (l, m),
        (None, Some(_)) => return Err(doc.error("chain", "mass", "needs `length` as well")),
        (Some(_), None) => return Err(doc.error("chain", "length", "needs `mass` as well")),
    };
    let n = lengths.len();
    if n == 0 {
        return Err(doc.error("chain", "length", "a chain needs at least one link"));
    }
    let per_link = |key: &str| doc.list_len("chain", key, &[n]);
    let masses = per_link("mass")?.unwrap_or(masses);
    let offsets = per_link("com_offset")?;
    let inertias = per_link("inertia")?;
    let links = (0..n)
        .map(|i| {
            let rod = Link::rod(lengths[i], masses[i]);
            Link {
                com_offset: offsets.as_ref().map_or(rod.com_offset, |v| v[i]),
                inertia: inertias.as_ref().map_or(rod.inertia, |v| v[i]),
                ..rod
            }
        })
        .collect();
    let gravity = gravity.unwrap_or(cwbc_core::rigidbody::STANDARD_GRAVITY);
    Ok(PlanarChain::new(links, gravity)?)
}

/// Build a scenario from config text. Targets that are not given are placed
/// relative to the initial pose, as in [`Scenario::around_pose`].
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc = Document::parse(text)?;
    let chain = build_chain(&doc)?;
    let n = chain.dof();

    let operator_mass = doc.scalar("operator", "mass")?.unwrap_or(DEFAULT_OPERATOR_MASS);
    if !(operator_mass > 0.0) {
        return Err(doc.error("operator", "mass", "must be > 0"));
    }

    let q0 = match doc.list_len("simulation", "q0", &[n])? {
        Some(v) => DVector::from_vec(v),
        None if n == DEFAULT_Q0.len() => DVector::from_row_slice(&DEFAULT_Q0),
        None => {
            return Err(ConfigError::Invalid {
                key: "simulation.q0".into(),
                message: format!("is required for a chain of {n} links"),
            })
        }
    };

    let mut s = Scenario::around_pose(chain, operator_mass, q0)?;

    if let Some(v) = doc.list_len("controller", "k_pc", &[1, 2])? {
        s.gains.k_pc = pair(&v, Vector2::repeat(v[0]));
    }
    if let Some(v) = doc.list_len("controller", "k_dc", &[1, 2])? {
        s.gains.k_dc = pair(&v, Vector2::repeat(v[0]));
    }
    if let Some(v) = doc.scalar("controller", "k_ff")? {
        s.gains.k_ff = v;
    }
    if let Some(v) = doc.scalar("controller", "k_jm")? {
        s.gains.k_jm = v;
    }
    if let Some(v) = doc.scalar("controller", "pinv_damping")? {
        s.gains.pinv_damping = v;
    }
    if let Some(i) = doc.word("controller", "com_mode", &["horizontal", "full"])? {
        s.gains.com_mode = [ComTaskMode::Horizontal, ComTaskMode::Full][i];
    }
    if let Some(i) = doc.word("controller", "feedback", &["simplified", "full"])? {
        s.feedback = [FeedbackMode::Simplified, FeedbackMode::Full][i];
    }
    if let Some(v) = doc.list_len("controller", "com_target", &[1, 2])? {
        s.com_target = pair(&v, s.com_target);
    }

    if let Some(v) = doc.list_len("operator_policy", "stiffness", &[1, 2, 4])? {
        s.policy.stiffness = gain_matrix(&v);
    }
    if let Some(v) = doc.list_len("operator_policy", "damping", &[1, 2, 4])? {
        s.policy.damping = gain_matrix(&v);
    }
    if let Some(v) = doc.list_len("operator_policy", "target", &[2])? {
        s.policy.target = Vector2::new(v[0], v[1]);
    }

    if let Some(v) = doc.scalar("simulation", "duration")? {
        s.duration = v;
    }
    if let Some(v) = doc.scalar("simulation", "dt")? {
        s.dt = v;
    }
    if let Some(i) = doc.word("simulation", "integrator", &["semi_implicit_euler", "rk4"])? {
        s.integrator = [Integrator::SemiImplicitEuler, Integrator::Rk4Zoh][i];
    }
    if let Some(i) = doc.word("simulation", "sensor", &["previous_sample", "instantaneous"])? {
        s.sensor = [SensorModel::PreviousSample, SensorModel::Instantaneous][i];
    }
    if let Some(i) = doc.word("simulation", "plant_coriolis", &["false", "true"])? {
        s.plant_coriolis = i == 1;
    }
    if let Some(v) = doc.scalar("simulation", "max_joint_speed")? {
        s.max_joint_speed = v;
    }

    if let Some(v) = doc.list("sweep", "k_ff_sweep")? {
        s.k_ff_sweep = v;
    }

    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}
