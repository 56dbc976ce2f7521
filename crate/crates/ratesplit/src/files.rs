//! Channel and state documents (UTF-8 JSON).
//!
//! Matrices are row-major lists of rows, each entry a `[re, im]` pair.

use std::fs;
use std::path::Path;

use ratesplit_core::channel::{self, LOAD_TP_TOL};
use ratesplit_core::linalg::CMat;
use ratesplit_core::{Channel, Complex64, Ket, Operator, Signature};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] ratesplit_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub label: String,
    pub dim: usize,
}

type Entry = [f64; 2];
type Matrix = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub name: String,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    pub kraus: Vec<Matrix>,
}

/// `{"systems": [...], "ket": [...]}` or `{"systems": [...], "density": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub systems: Vec<Port>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ket: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Matrix>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

fn signature(ports: &[Port], what: &str) -> Result<Signature, LoadError> {
    if ports.is_empty() {
        return Err(LoadError::Schema(format!("{} list is empty", what)));
    }
    Ok(Signature::new(ports.iter().map(|p| (p.label.as_str(), p.dim)))?)
}

fn matrix(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<CMat, LoadError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(LoadError::Schema(format!("{} must be {}x{}", what, rows, cols)));
    }
    if m.iter().flatten().any(|e| !(e[0].is_finite() && e[1].is_finite())) {
        return Err(LoadError::Schema(format!("{} has non-finite entries", what)));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| Complex64::new(m[r][c][0], m[r][c][1])))
}

fn entries(m: &CMat) -> Matrix {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

fn ports(sig: &Signature) -> Vec<Port> {
    sig.systems().iter().map(|s| Port { label: s.name.clone(), dim: s.dim }).collect()
}

impl ChannelFile {
    /// Validates the document; trace preservation is checked within [`LOAD_TP_TOL`].
    pub fn to_channel(&self) -> Result<Channel, LoadError> {
        let inputs = signature(&self.inputs, "inputs")?;
        let outputs = signature(&self.outputs, "outputs")?;
        if self.kraus.is_empty() {
            return Err(LoadError::Schema("kraus list is empty".into()));
        }
        let kraus = self
            .kraus
            .iter()
            .enumerate()
            .map(|(k, m)| matrix(m, outputs.dim(), inputs.dim(), &format!("Kraus operator {}", k)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Channel::new(&self.name, inputs, outputs, kraus, LOAD_TP_TOL)?)
    }

    pub fn from_channel(ch: &Channel) -> Self {
        Self {
            name: ch.name().to_string(),
            inputs: ports(ch.inputs()),
            outputs: ports(ch.outputs()),
            kraus: ch.kraus().iter().map(entries).collect(),
        }
    }
}

pub fn parse_channel(text: &str) -> Result<Channel, LoadError> {
    serde_json::from_str::<ChannelFile>(text)?.to_channel()
}

pub fn load_channel(path: &Path) -> Result<Channel, LoadError> {
    parse_channel(&read(path)?)
}

/// A state given either as a pure vector or as a density operator.
#[derive(Debug, Clone)]
pub enum State {
    Pure(Ket),
    Mixed(Operator),
}

impl State {
    pub fn density(&self) -> Operator {
        match self {
            State::Pure(k) => k.density(),
            State::Mixed(r) => r.clone(),
        }
    }

    pub fn signature(&self) -> &Signature {
        match self {
            State::Pure(k) => k.signature(),
            State::Mixed(r) => r.rows(),
        }
    }
}

impl StateFile {
    pub fn to_state(&self) -> Result<State, LoadError> {
        let sig = signature(&self.systems, "systems")?;
        let n = sig.dim();
        match (&self.ket, &self.density) {
            (Some(v), None) => {
                if v.len() != n {
                    return Err(LoadError::Schema(format!("ket has {} entries, systems need {}", v.len(), n)));
                }
                let amp: Vec<Complex64> = v.iter().map(|e| Complex64::new(e[0], e[1])).collect();
                let ket = Ket::from_slice(sig, &amp)?;
                if (ket.norm() - 1.0).abs() > 1e-9 {
                    return Err(LoadError::Schema(format!("ket has norm {}", ket.norm())));
                }
                Ok(State::Pure(ket))
            }
            (None, Some(m)) => {
                let rho = Operator::square(sig, matrix(m, n, n, "density")?)?;
                rho.check_density()?;
                Ok(State::Mixed(rho))
            }
            _ => Err(LoadError::Schema("give exactly one of `ket` and `density`".into())),
        }
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self {
            systems: ports(ket.signature()),
            ket: Some(ket.amplitudes().iter().map(|c| [c.re, c.im]).collect()),
            density: None,
        }
    }

    pub fn from_operator(rho: &Operator) -> Self {
        Self { systems: ports(rho.rows()), ket: None, density: Some(entries(rho.matrix())) }
    }
}

pub fn parse_state(text: &str) -> Result<State, LoadError> {
    serde_json::from_str::<StateFile>(text)?.to_state()
}

pub fn load_state(path: &Path) -> Result<State, LoadError> {
    parse_state(&read(path)?)
}

/// Builtin states: `epr<d>` on `(A, B)`, `mixed<d>` on `A`, `ghz<n>` on
/// `A, B, C, …` with qubit legs.
pub fn builtin_state(name: &str) -> Option<Result<State, LoadError>> {
    let split = name.find(|c: char| c.is_ascii_digit())?;
    let (kind, num) = name.split_at(split);
    let n: usize = num.parse().ok()?;
    let build = || -> Result<State, LoadError> {
        match kind {
            "epr" => Ok(State::Pure(Ket::max_entangled("A", "B", n)?)),
            "mixed" => Ok(State::Mixed(Operator::maximally_mixed(Signature::single("A", n)?))),
            "ghz" => {
                if !(1..=6).contains(&n) {
                    return Err(LoadError::Schema(format!("ghz needs 1 to 6 legs, got {}", n)));
                }
                let labels: Vec<String> = (0..n).map(|k| ((b'A' + k as u8) as char).to_string()).collect();
                let sig = Signature::new(labels.iter().map(|l| (l.as_str(), 2)))?;
                let mut amp = vec![Complex64::new(0.0, 0.0); 1 << n];
                amp[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                amp[(1 << n) - 1] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Ok(State::Pure(Ket::from_slice(sig, &amp)?))
            }
            _ => Err(LoadError::Schema(format!("unknown builtin state `{}`", name))),
        }
    };
    match kind {
        "epr" | "mixed" | "ghz" => Some(build()),
        _ => None,
    }
}

/// `builtin:<name>[:p1,p2,...]` or a path to a channel document.
pub fn resolve_channel(spec: &str) -> Result<Channel, LoadError> {
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let (name, params) = match rest.split_once(':') {
            Some((n, p)) => (n, p),
            None => (rest, ""),
        };
        let params = params
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| LoadError::Schema(format!("bad channel parameter `{}`", s))))
            .collect::<Result<Vec<_>, _>>()?;
        if !channel::CATALOG.contains(&name) {
            return Err(LoadError::Schema(format!("unknown builtin channel `{}`; known: {}", name, channel::CATALOG.join(", "))));
        }
        return Ok(Channel::builtin(name, &params)?);
    }
    load_channel(Path::new(spec))
}

/// A builtin state name or a path to a state document.
pub fn resolve_state(spec: &str) -> Result<State, LoadError> {
    match builtin_state(spec) {
        Some(r) => r,
        None => load_state(Path::new(spec)),
    }
}
