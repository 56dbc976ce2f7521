//! Kraus channels with named ports, Stinespring dilations and a small catalog.
//!
//! Catalog port names: point-to-point channels map `Ap → B`; multiple-access
//! channels map `Ap, Bp → C` with `C` holding both output wires; interference
//! channels map `Ap, Bp → C, D`. Use [`Channel::with_ports`] to rename.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};
use crate::tensor::{Ket, Operator, Signature};

/// Trace-preservation tolerance for catalog channels.
pub const TP_TOL: f64 = 1e-10;
/// Trace-preservation tolerance for channels read from files.
pub const LOAD_TP_TOL: f64 = 1e-8;

/// Completely positive map given by Kraus operators (outputs × inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct KrausMap {
    inputs: Signature,
    outputs: Signature,
    kraus: Vec<CMat>,
}

impl KrausMap {
    pub fn new(inputs: Signature, outputs: Signature, kraus: Vec<CMat>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus list".into()));
        }
        for k in &kraus {
            if k.nrows() != outputs.dim() || k.ncols() != inputs.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus {}x{} for {} -> {}",
                    k.nrows(),
                    k.ncols(),
                    inputs,
                    outputs
                )));
            }
        }
        Ok(Self { inputs, outputs, kraus })
    }

    pub fn inputs(&self) -> &Signature {
        &self.inputs
    }

    pub fn outputs(&self) -> &Signature {
        &self.outputs
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn kraus_operators(&self) -> Vec<Operator> {
        self.kraus
            .iter()
            .map(|k| Operator::new(self.outputs.clone(), self.inputs.clone(), k.clone()).expect("checked dims"))
            .collect()
    }

    /// `Σ K†K`.
    pub fn kraus_sum(&self) -> CMat {
        let n = self.inputs.dim();
        self.kraus.iter().fold(CMat::zeros(n, n), |acc, k| acc + k.adjoint() * k)
    }

    /// Largest eigenvalue modulus of `Σ K†K − I` together with the spectrum of the sum.
    pub fn tp_deficit(&self) -> (f64, Vec<f64>) {
        let s = self.kraus_sum();
        let eig = linalg::eigvalsh(&s);
        let deficit = eig.iter().fold(0.0f64, |a, &x| a.max((x - 1.0).abs()));
        (deficit, eig)
    }

    /// Acts on the legs of `rho` named like the inputs; spectators untouched.
    /// Outputs are appended after the spectators unless they carry exactly
    /// the input labels.
    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let mut acc: Option<Operator> = None;
        for k in self.kraus_operators() {
            let term = k.conjugate(rho)?;
            acc = Some(match acc {
                None => term,
                Some(a) => Operator::square(a.rows().clone(), a.matrix() + term.matrix())?,
            });
        }
        Ok(acc.expect("non-empty Kraus list"))
    }

    /// Relabels ports by position.
    pub fn with_ports(&self, inputs: &[&str], outputs: &[&str]) -> Result<KrausMap> {
        Ok(KrausMap {
            inputs: rename_all(&self.inputs, inputs)?,
            outputs: rename_all(&self.outputs, outputs)?,
            kraus: self.kraus.clone(),
        })
    }

    /// Scales every Kraus operator by `c` (so the map scales by `|c|²`).
    pub fn scaled(&self, c: f64) -> KrausMap {
        KrausMap {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            kraus: self.kraus.iter().map(|k| k * re(c)).collect(),
        }
    }
}

fn rename_all(sig: &Signature, names: &[&str]) -> Result<Signature> {
    if names.len() != sig.len() {
        return Err(Error::BadPartition(format!("{:?} for ports {}", names, sig)));
    }
    Signature::new(names.iter().zip(sig.dims()).map(|(n, d)| (*n, d)))
}

/// Trace-preserving [`KrausMap`] with a name.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    name: String,
    map: KrausMap,
}

/// Stinespring isometry `inputs → outputs ⊗ E`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    pub isometry: Operator,
    pub env_label: String,
}

impl Channel {
    /// Validates trace preservation within `tol`.
    pub fn new(name: &str, inputs: Signature, outputs: Signature, kraus: Vec<CMat>, tol: f64) -> Result<Self> {
        let map = KrausMap::new(inputs, outputs, kraus)?;
        let (deficit, eigenvalues) = map.tp_deficit();
        if !(deficit <= tol) {
            return Err(Error::NotTracePreserving { deficit, eigenvalues });
        }
        Ok(Self { name: name.to_string(), map })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn map(&self) -> &KrausMap {
        &self.map
    }

    pub fn inputs(&self) -> &Signature {
        self.map.inputs()
    }

    pub fn outputs(&self) -> &Signature {
        self.map.outputs()
    }

    pub fn kraus(&self) -> &[CMat] {
        self.map.kraus()
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        self.map.apply(rho)
    }

    pub fn with_ports(&self, inputs: &[&str], outputs: &[&str]) -> Result<Channel> {
        Ok(Channel { name: self.name.clone(), map: self.map.with_ports(inputs, outputs)? })
    }

    /// `V|x⟩ = Σ_k (K_k|x⟩)|k⟩_E`; the environment has one level per Kraus term.
    pub fn dilate(&self, env: &str) -> Result<Dilation> {
        let r = self.kraus().len();
        let (dout, din) = (self.outputs().dim(), self.inputs().dim());
        let mut v = CMat::zeros(dout * r, din);
        for (k, kr) in self.kraus().iter().enumerate() {
            for o in 0..dout {
                for i in 0..din {
                    v[(o * r + k, i)] = kr[(o, i)];
                }
            }
        }
        let rows = self.outputs().concat(&Signature::single(env, r)?)?;
        Ok(Dilation { isometry: Operator::new(rows, self.inputs().clone(), v)?, env_label: env.to_string() })
    }

    /// Complementary channel `inputs → E`, one Kraus operator per output basis vector.
    pub fn complementary(&self, env: &str) -> Result<KrausMap> {
        let r = self.kraus().len();
        let (dout, din) = (self.outputs().dim(), self.inputs().dim());
        let ops = (0..dout)
            .map(|o| CMat::from_fn(r, din, |k, i| self.kraus()[k][(o, i)]))
            .collect();
        KrausMap::new(self.inputs().clone(), Signature::single(env, r)?, ops)
    }

    /// Channel with `kraus_count` Kraus operators cut from a Haar-random
    /// isometry `inputs → outputs ⊗ E`.
    pub fn random<R: rand::Rng + ?Sized>(
        name: &str,
        inputs: Signature,
        outputs: Signature,
        kraus_count: usize,
        rng: &mut R,
    ) -> Result<Channel> {
        let (din, dout) = (inputs.dim(), outputs.dim());
        if kraus_count == 0 || dout * kraus_count < din {
            return Err(Error::InvalidParameter(format!(
                "{} Kraus operators cannot form an isometry from dimension {} into {}",
                kraus_count, din, dout
            )));
        }
        let u = crate::tensor::haar_unitary(dout * kraus_count, rng);
        let kraus = (0..kraus_count)
            .map(|k| CMat::from_fn(dout, din, |o, i| u[(o * kraus_count + k, i)]))
            .collect();
        Channel::new(name, inputs, outputs, kraus, TP_TOL)
    }

    /// Catalog lookup; see the module docs for port names.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Channel> {
        catalog(name, params)
    }
}

impl Dilation {
    pub fn env_dim(&self) -> usize {
        self.isometry.rows().dim_of(&self.env_label).unwrap_or(1)
    }

    /// Applies the isometry to the input legs of a pure state.
    pub fn apply_ket(&self, ket: &Ket) -> Result<Ket> {
        ket.apply(&self.isometry)
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        self.isometry.conjugate(rho)
    }
}

pub const CATALOG: [&str; 8] = [
    "identity",
    "depolarizing",
    "dephasing",
    "erasure",
    "amplitude_damping",
    "qmac_adder",
    "qmac_product",
    "qic_crosstalk",
];

fn param(params: &[f64], k: usize, default: f64) -> f64 {
    params.get(k).copied().unwrap_or(default)
}

fn probability(name: &str, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{} must lie in [0, 1], got {}", name, x)));
    }
    Ok(x)
}

fn dimension(x: f64) -> Result<usize> {
    if !(x >= 1.0 && x <= 64.0 && libm::trunc(x) == x) {
        return Err(Error::InvalidParameter(format!("dimension must be an integer in [1, 64], got {}", x)));
    }
    Ok(x as usize)
}

fn arity(name: &str, params: &[f64], max: usize) -> Result<()> {
    if params.len() > max {
        return Err(Error::InvalidParameter(format!("{} takes at most {} parameters", name, max)));
    }
    Ok(())
}

/// Shift `X^a` and clock `Z^b` on dimension `d`.
fn weyl(d: usize, a: usize, b: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * core::f64::consts::PI * ((b * j) % d) as f64 / d as f64;
        m[((j + a) % d, j)] = Complex64::from_polar(1.0, phase);
    }
    m
}

fn depolarizing_kraus(p: f64, d: usize) -> Vec<CMat> {
    let dd = (d * d) as f64;
    let mut out = Vec::new();
    for a in 0..d {
        for b in 0..d {
            let w = if a == 0 && b == 0 { 1.0 - p + p / dd } else { p / dd };
            if w > 0.0 {
                out.push(weyl(d, a, b) * re(libm::sqrt(w)));
            }
        }
    }
    out
}

fn dephasing_kraus(p: f64, d: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    for b in 0..d {
        let w = if b == 0 { 1.0 - p * (d as f64 - 1.0) / d as f64 } else { p / d as f64 };
        if w > 0.0 {
            out.push(weyl(d, 0, b) * re(libm::sqrt(w)));
        }
    }
    out
}

fn kron_all(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(linalg::kron(x, y));
        }
    }
    out
}

fn p2p(name: &str, din: usize, dout: usize, kraus: Vec<CMat>) -> Result<Channel> {
    Channel::new(name, Signature::single("Ap", din)?, Signature::single("B", dout)?, kraus, TP_TOL)
}

fn qmac(name: &str, kraus: Vec<CMat>) -> Result<Channel> {
    Channel::new(name, Signature::new([("Ap", 2), ("Bp", 2)])?, Signature::single("C", 4)?, kraus, TP_TOL)
}

fn catalog(name: &str, params: &[f64]) -> Result<Channel> {
    match name {
        "identity" => {
            arity(name, params, 1)?;
            let d = dimension(param(params, 0, 2.0))?;
            p2p(name, d, d, vec![linalg::identity(d)])
        }
        "depolarizing" => {
            arity(name, params, 2)?;
            let p = probability("p", param(params, 0, 0.0))?;
            let d = dimension(param(params, 1, 2.0))?;
            p2p(name, d, d, depolarizing_kraus(p, d))
        }
        "dephasing" => {
            arity(name, params, 2)?;
            let p = probability("p", param(params, 0, 0.0))?;
            let d = dimension(param(params, 1, 2.0))?;
            p2p(name, d, d, dephasing_kraus(p, d))
        }
        "erasure" => {
            arity(name, params, 2)?;
            let p = probability("p", param(params, 0, 0.0))?;
            let d = dimension(param(params, 1, 2.0))?;
            let mut kraus = Vec::new();
            if p < 1.0 {
                kraus.push(CMat::from_fn(d + 1, d, |i, j| if i == j { re(libm::sqrt(1.0 - p)) } else { re(0.0) }));
            }
            if p > 0.0 {
                for j in 0..d {
                    let mut k = CMat::zeros(d + 1, d);
                    k[(d, j)] = re(libm::sqrt(p));
                    kraus.push(k);
                }
            }
            p2p(name, d, d + 1, kraus)
        }
        "amplitude_damping" => {
            arity(name, params, 1)?;
            let g = probability("gamma", param(params, 0, 0.0))?;
            let mut k0 = linalg::identity(2);
            k0[(1, 1)] = re(libm::sqrt(1.0 - g));
            let mut kraus = vec![k0];
            if g > 0.0 {
                let mut k1 = CMat::zeros(2, 2);
                k1[(0, 1)] = re(libm::sqrt(g));
                kraus.push(k1);
            }
            p2p(name, 2, 2, kraus)
        }
        "qmac_product" => {
            arity(name, params, 2)?;
            let pa = probability("p_a", param(params, 0, 0.0))?;
            let pb = probability("p_b", param(params, 1, 0.0))?;
            qmac(name, kron_all(&depolarizing_kraus(pa, 2), &depolarizing_kraus(pb, 2)))
        }
        "qmac_adder" => {
            arity(name, params, 1)?;
            let p = probability("p", param(params, 0, 0.0))?;
            let mut cnot = CMat::zeros(4, 4);
            for (i, j) in [(0, 0), (1, 1), (3, 2), (2, 3)] {
                cnot[(i, j)] = re(1.0);
            }
            let noise = kron_all(&depolarizing_kraus(p, 2), &depolarizing_kraus(p, 2));
            qmac(name, noise.iter().map(|k| k * &cnot).collect())
        }
        "qic_crosstalk" => {
            arity(name, params, 2)?;
            let g = probability("coupling", param(params, 0, 0.0))?;
            let p = probability("p", param(params, 1, 0.0))?;
            let mut cp = linalg::identity(4);
            cp[(3, 3)] = Complex64::from_polar(1.0, core::f64::consts::PI * g);
            let noise = kron_all(&depolarizing_kraus(p, 2), &depolarizing_kraus(p, 2));
            Channel::new(
                name,
                Signature::new([("Ap", 2), ("Bp", 2)])?,
                Signature::new([("C", 2), ("D", 2)])?,
                noise.iter().map(|k| k * &cp).collect(),
                TP_TOL,
            )
        }
        _ => Err(Error::UnknownChannel(name.to_string())),
    }
}
