//! Random-coding objects and Monte Carlo checks of decoupling bounds, plus
//! an end-to-end run of the two-part point-to-point protocol.
//!
//! Every Monte Carlo routine is split into a per-trial function and a
//! reduction so callers can evaluate trials in any order and still produce
//! identical reports; trial `i` always draws from stream `i` of the seed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{Channel, KrausMap};
use crate::entropy::{self, SigmaPolicy};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};
use crate::rng::RngStream;
use crate::split::split_isometry;
use crate::tensor::{self, haar_unitary, purify, uhlmann_isometry, Ket, Operator, Signature};

pub const MIN_TRIALS: usize = 30;
/// Largest total dimension a configuration may describe.
pub const MAX_TOTAL_DIM: usize = 64;
/// Resample cap for the derandomization step of the protocol.
pub const RESAMPLE_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingConfig {
    pub trials: usize,
    pub seed: u64,
    /// Smoothing used on the bound side.
    pub epsilon: f64,
    /// Union-bound parameter.
    pub k: usize,
}

impl DecouplingConfig {
    pub fn new(trials: usize, seed: u64) -> Result<Self> {
        let c = Self { trials, seed, epsilon: 0.0, k: 20 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidParameter(format!("{} trials, need at least {}", self.trials, MIN_TRIALS)));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1)", self.epsilon)));
        }
        Ok(())
    }

    pub fn stream(&self, trial: usize) -> RngStream {
        RngStream::new(self.seed, trial as u64)
    }
}

/// Fraction of samples whose value stays below a per-sample bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub rhs: f64,
    pub fraction_within: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    /// Bound on the Haar expectation, or the per-sample bound for the
    /// high-probability variants.
    pub theoretical_bound: f64,
    pub bound_inputs: Vec<(String, f64)>,
    pub checks: Vec<BoundCheck>,
    /// Pass threshold on `checks[0].fraction_within`, when applicable.
    pub required_fraction: Option<f64>,
    pub pass: bool,
}

impl TrialReport {
    /// Expectation-type report: passes when `mean − 3·SE ≤ bound`.
    pub fn expectation(values: Vec<f64>, bound: f64, bound_inputs: Vec<(String, f64)>) -> Self {
        let (mean, std_error) = mean_se(&values);
        let pass = mean - 3.0 * std_error <= bound;
        Self {
            values,
            mean,
            std_error,
            theoretical_bound: bound,
            bound_inputs,
            checks: Vec::new(),
            required_fraction: None,
            pass,
        }
    }

    /// Probability-type report: passes when the fraction under the first
    /// bound is at least `1 − 3/k − 3·SE`, SE taken at that nominal rate.
    pub fn fraction(values: Vec<f64>, bounds: Vec<(String, f64)>, k: usize, bound_inputs: Vec<(String, f64)>) -> Self {
        let (mean, std_error) = mean_se(&values);
        let n = values.len().max(1) as f64;
        let checks: Vec<BoundCheck> = bounds
            .into_iter()
            .map(|(name, rhs)| {
                let within = values.iter().filter(|&&v| v <= rhs).count() as f64 / n;
                BoundCheck { name, rhs, fraction_within: within }
            })
            .collect();
        let nominal = (1.0 - 3.0 / k as f64).max(0.0);
        let se = libm::sqrt(nominal * (1.0 - nominal) / n);
        let required = nominal - 3.0 * se;
        let pass = checks.first().map(|c| c.fraction_within >= required).unwrap_or(false);
        Self {
            values,
            mean,
            std_error,
            theoretical_bound: checks.first().map(|c| c.rhs).unwrap_or(f64::INFINITY),
            bound_inputs,
            checks,
            required_fraction: Some(required),
            pass,
        }
    }
}

/// Sample mean and standard error, summed in index order.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

/// Haar unitary on the joint space of `legs` of `sig`.
pub fn haar_on<R: Rng + ?Sized>(sig: &Signature, legs: &[&str], rng: &mut R) -> Result<Operator> {
    let s = sig.select(legs)?;
    let u = haar_unitary(s.dim(), rng);
    Operator::square(s, u)
}

/// `√|X|·op^{X→rest}(control)·U|transmitted⟩`, where `X` are the columns
/// of `unitary` and `rest` the other legs of `control`. Reference legs of
/// `transmitted` come first in the result.
pub fn intermediary_state(control: &Ket, unitary: &Operator, transmitted: &Ket) -> Result<Ket> {
    let x = unitary.cols().labels();
    let rest = control.signature().without(&x)?;
    let bent = control.op_map(&x, &rest.labels())?;
    let rotated = transmitted.apply(unitary)?;
    let dx = unitary.cols().dim() as f64;
    Ok(rotated.apply(&bent)?.scale(re(libm::sqrt(dx))))
}

/// `T(ξ) = |X|·K ξ K†` with `K = op^{X→R}(φ)`.
#[derive(Debug, Clone)]
pub struct AlmostCptp {
    pub map: KrausMap,
    /// Smallest eigenvalue of the Choi matrix.
    pub choi_min_eigenvalue: f64,
    /// `Tr T(π) − 1`.
    pub trace_deviation: f64,
}

pub fn almost_cptp(phi: &Ket, inputs: &[&str]) -> Result<AlmostCptp> {
    let rest = phi.signature().without(inputs)?;
    let k = phi.op_map(inputs, &rest.labels())?;
    let dx = k.cols().dim() as f64;
    let map = KrausMap::new(k.cols().clone(), k.rows().clone(), vec![k.matrix() * re(libm::sqrt(dx))])?;
    let choi = choi_matrix(&map)?;
    let choi_min_eigenvalue = choi.eigenvalues().first().copied().unwrap_or(0.0);
    let pi = Operator::maximally_mixed(k.cols().clone());
    let trace_deviation = map.apply(&pi)?.trace().re - 1.0;
    Ok(AlmostCptp { map, choi_min_eigenvalue, trace_deviation })
}

/// `(T ⊗ I)(|Γ⟩⟨Γ|)` with unnormalized `|Γ⟩ = Σ|i⟩|i⟩` on input copies.
pub fn choi_matrix(map: &KrausMap) -> Result<Operator> {
    let copies = copy_labels(map.inputs(), "~");
    let gamma = max_entangled_on(map.inputs(), &copies)?.scale(re(libm::sqrt(map.inputs().dim() as f64)));
    map.apply(&gamma.density())
}

fn copy_labels(sig: &Signature, suffix: &str) -> Vec<String> {
    sig.labels().iter().map(|l| format!("{}{}", l, suffix)).collect()
}

/// `Φ` between the legs of `sig` and fresh legs `copies`, legs ordered
/// `sig ++ copies`.
pub fn max_entangled_on(sig: &Signature, copies: &[String]) -> Result<Ket> {
    let mut out: Option<Ket> = None;
    for (s, c) in sig.systems().iter().zip(copies) {
        let phi = Ket::max_entangled(&s.name, c, s.dim)?;
        out = Some(match out {
            None => phi,
            Some(o) => o.tensor(&phi)?,
        });
    }
    let mut order = sig.labels();
    order.extend(copies.iter().map(|s| s.as_str()));
    match out {
        None => Ok(Ket::scalar(re(1.0))),
        Some(k) => k.permuted(&order),
    }
}

/// `U·ρ = UρU†` on the legs of `u`.
fn rotate(rho: &Operator, u: &Operator) -> Result<Operator> {
    u.conjugate(rho)
}

/// Setup for the single-sender decoupling check.
#[derive(Debug, Clone)]
pub struct SingleSetup {
    /// State on `A ∪ E`.
    pub rho: Operator,
    pub a: Vec<String>,
    /// Completely positive map `A → R`.
    pub map: KrausMap,
}

impl SingleSetup {
    fn e_legs(&self) -> Result<Vec<String>> {
        let a = strs(&self.a);
        Ok(self.rho.rows().without(&a)?.labels().iter().map(|s| s.to_string()).collect())
    }

    /// `T(π_A)`, the `R` marginal of `(T⊗I)Φ`.
    pub fn omega_r(&self) -> Result<Operator> {
        self.map.apply(&Operator::maximally_mixed(self.map.inputs().clone()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.rows().dim() * self.map.outputs().dim() > MAX_TOTAL_DIM * MAX_TOTAL_DIM {
            return Err(Error::TooLarge(self.rho.rows().dim(), MAX_TOTAL_DIM));
        }
        let a = strs(&self.a);
        if !self.rho.rows().select(&a)?.same_systems(self.map.inputs()) {
            return Err(Error::DimensionMismatch(format!("map inputs {} vs {:?}", self.map.inputs(), self.a)));
        }
        Ok(())
    }
}

/// `‖T(U·ρ) − ω^R ⊗ ρ^E‖₁` for one Haar `U`.
pub fn decoupling_trial(setup: &SingleSetup, stream: &RngStream) -> Result<f64> {
    let mut rng = stream.rng();
    let a = strs(&setup.a);
    let u = haar_on(setup.rho.rows(), &a, &mut rng)?;
    let out = setup.map.apply(&rotate(&setup.rho, &u)?)?;
    let e = setup.e_legs()?;
    let target = setup.omega_r()?.tensor(&setup.rho.marginal(&strs(&e))?)?;
    let target = target.aligned_to(&out)?;
    Ok(linalg::trace_norm_hermitian(&(out.matrix() - target.matrix())))
}

/// `2^{−½H₂(A′|R)_ω − ½H₂(A|E)_ρ} + 8ε` with marginal `σ` in both terms.
pub fn decoupling_bound(setup: &SingleSetup, epsilon: f64) -> Result<(f64, Vec<(String, f64)>)> {
    let a = strs(&setup.a);
    let e = setup.e_legs()?;
    let h_rho = entropy::h2_cond_bound(&setup.rho, &a, &strs(&e), &SigmaPolicy::Marginal)?.value;
    let copies = copy_labels(setup.map.inputs(), "'");
    let phi = max_entangled_on(setup.map.inputs(), &copies)?;
    let omega = setup.map.apply(&phi.density())?;
    let r = setup.map.outputs().labels();
    let h_omega = entropy::h2_cond_bound(&omega, &strs(&copies), &r, &SigmaPolicy::Marginal)?.value;
    let bound = libm::exp2(-0.5 * h_omega - 0.5 * h_rho) + 8.0 * epsilon;
    Ok((bound, vec![("h2(A'|R)_omega".to_string(), h_omega), ("h2(A|E)_rho".to_string(), h_rho)]))
}

pub fn decoupling_mc(setup: &SingleSetup, cfg: &DecouplingConfig) -> Result<TrialReport> {
    cfg.validate()?;
    setup.validate()?;
    let values = (0..cfg.trials)
        .map(|i| decoupling_trial(setup, &cfg.stream(i)))
        .collect::<Result<Vec<_>>>()?;
    let (bound, inputs) = decoupling_bound(setup, cfg.epsilon)?;
    Ok(TrialReport::expectation(values, bound, inputs))
}

/// Setup shared by the one- and two-unitary high-probability checks.
///
/// `sender` legs of `control` are decoupled with a Haar unitary on
/// `sender_state`; each group in `randomized` gets its own Haar unitary
/// and is contracted with `transmitted` into the intermediary state.
#[derive(Debug, Clone)]
pub struct HaarSetup {
    pub control: Ket,
    pub sender: Vec<String>,
    pub sender_state: Ket,
    pub randomized: Vec<Vec<String>>,
    pub transmitted: Ket,
    pub channel: Channel,
    pub env: String,
}

impl HaarSetup {
    pub fn validate(&self) -> Result<()> {
        if self.control.signature().dim() > MAX_TOTAL_DIM {
            return Err(Error::TooLarge(self.control.signature().dim(), MAX_TOTAL_DIM));
        }
        for l in self.channel.inputs().labels() {
            self.control.signature().dim_of(l)?;
        }
        for l in &self.sender {
            if self.sender_state.signature().dim_of(l)? != self.control.signature().dim_of(l)? {
                return Err(Error::DimensionMismatch(format!("sender leg {}", l)));
            }
        }
        for g in &self.randomized {
            for l in g {
                if self.transmitted.signature().dim_of(l)? != self.control.signature().dim_of(l)? {
                    return Err(Error::DimensionMismatch(format!("randomized leg {}", l)));
                }
            }
        }
        Ok(())
    }

    fn sender_refs(&self) -> Result<Vec<String>> {
        let s = strs(&self.sender);
        Ok(self.sender_state.signature().without(&s)?.labels().iter().map(|x| x.to_string()).collect())
    }

    /// Conditioning legs of the dilated control state: all but the sender
    /// legs and the channel outputs.
    fn conditioning(&self, dilated: &Signature) -> Result<Vec<String>> {
        let mut drop = self.sender.clone();
        drop.extend(self.channel.outputs().labels().iter().map(|s| s.to_string()));
        Ok(dilated.without(&strs(&drop))?.labels().iter().map(|s| s.to_string()).collect())
    }

    /// Intermediary state for a list of unitaries, one per group.
    pub fn intermediary(&self, unitaries: &[Operator]) -> Result<Ket> {
        let mut u: Option<Operator> = None;
        for op in unitaries {
            u = Some(match u {
                None => op.clone(),
                Some(acc) => acc.tensor(op)?,
            });
        }
        match u {
            Some(u) => intermediary_state(&self.control, &u, &self.transmitted),
            None => Ok(self.control.clone()),
        }
    }
}

/// One sample of the left-hand side:
/// `‖|S|·Tr_C U_N op^{S→rest}(ω) U_S·ψ − ψ^{ref} ⊗ ω^{rest∖C}‖₁`.
pub fn haar_trial(setup: &HaarSetup, stream: &RngStream) -> Result<f64> {
    let mut rng = stream.rng();
    let unitaries = setup
        .randomized
        .iter()
        .map(|g| haar_on(setup.control.signature(), &strs(g), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let s = strs(&setup.sender);
    let us = haar_on(setup.sender_state.signature(), &s, &mut rng)?;
    let omega = setup.intermediary(&unitaries)?;
    let dil = setup.channel.dilate(&setup.env)?;

    let rest = omega.signature().without(&s)?;
    let bent = omega.op_map(&s, &rest.labels())?;
    let ds = libm::sqrt(bent.cols().dim() as f64);
    let produced = setup.sender_state.apply(&us)?.apply(&bent)?.scale(re(ds));
    let produced = dil.apply_ket(&produced)?;
    let outs = setup.channel.outputs().labels();
    let kept_sig = produced.signature().without(&outs)?;
    let kept = kept_sig.labels();
    let lhs_state = produced.reduced(&kept)?;

    let omega_env = dil.apply_ket(&omega)?;
    let mut drop = setup.sender.clone();
    drop.extend(outs.iter().map(|s| s.to_string()));
    let omega_keep = omega_env.signature().without(&strs(&drop))?;
    let refs = setup.sender_refs()?;
    let target = setup
        .sender_state
        .reduced(&strs(&refs))?
        .tensor(&omega_env.reduced(&omega_keep.labels())?)?
        .aligned_to(&lhs_state)?;
    Ok(linalg::trace_norm_hermitian(&(lhs_state.matrix() - target.matrix())))
}

/// Per-sample bounds `k·2^{−½H(S|ref)_ψ − ½H(S|cond)_σ} + 8kε`, first with
/// min-entropies, then with marginal-`σ` Rényi-2 values.
pub fn haar_bounds(setup: &HaarSetup, cfg: &DecouplingConfig) -> Result<(Vec<(String, f64)>, Vec<(String, f64)>)> {
    let s = strs(&setup.sender);
    let refs = setup.sender_refs()?;
    let psi = setup.sender_state.density();
    let dil = setup.channel.dilate(&setup.env)?;
    let sigma_ket = dil.apply_ket(&setup.control)?;
    let cond = setup.conditioning(sigma_ket.signature())?;
    let mut keep = s.clone();
    keep.extend(strs(&cond));
    let sigma = sigma_ket.reduced(&keep)?;
    let k = cfg.k as f64;
    let eps_sigma = cfg.epsilon / (4.0 * k * k);
    let h_psi = entropy::hmin_cond(&psi, &s, &strs(&refs), cfg.epsilon)?.lower;
    let h_sigma = entropy::hmin_cond(&sigma, &s, &strs(&cond), eps_sigma)?.lower;
    let h2_psi = entropy::h2_cond_bound(&psi, &s, &strs(&refs), &SigmaPolicy::Marginal)?.value;
    let h2_sigma = entropy::h2_cond_bound(&sigma, &s, &strs(&cond), &SigmaPolicy::Marginal)?.value;
    let tail = 8.0 * k * cfg.epsilon;
    let rhs_min = k * libm::exp2(-0.5 * h_psi - 0.5 * h_sigma) + tail;
    let rhs_h2 = k * libm::exp2(-0.5 * h2_psi - 0.5 * h2_sigma) + tail;
    Ok((
        vec![("hmin".to_string(), rhs_min), ("h2_marginal".to_string(), rhs_h2)],
        vec![
            ("hmin(S|ref)_psi".to_string(), h_psi),
            ("hmin(S|cond)_sigma".to_string(), h_sigma),
            ("h2(S|ref)_psi".to_string(), h2_psi),
            ("h2(S|cond)_sigma".to_string(), h2_sigma),
        ],
    ))
}

/// Runs [`haar_trial`] for every trial and reduces.
pub fn haar_mc(setup: &HaarSetup, cfg: &DecouplingConfig) -> Result<TrialReport> {
    cfg.validate()?;
    setup.validate()?;
    let values = (0..cfg.trials)
        .map(|i| haar_trial(setup, &cfg.stream(i)))
        .collect::<Result<Vec<_>>>()?;
    let (bounds, inputs) = haar_bounds(setup, cfg)?;
    Ok(TrialReport::fraction(values, bounds, cfg.k, inputs))
}

/// One Haar unitary on the helper legs: control `σ` on `(A″, B″, …)`.
pub fn onehaar_setup(
    control: &Ket,
    sender: &[&str],
    psi: &Ket,
    helper: &[&str],
    phi: &Ket,
    channel: &Channel,
) -> HaarSetup {
    HaarSetup {
        control: control.clone(),
        sender: sender.iter().map(|s| s.to_string()).collect(),
        sender_state: psi.clone(),
        randomized: vec![helper.iter().map(|s| s.to_string()).collect()],
        transmitted: phi.clone(),
        channel: channel.clone(),
        env: entropy::fresh_label(control.signature(), "E"),
    }
}

pub fn onehaar_mc(
    control: &Ket,
    sender: &[&str],
    psi: &Ket,
    helper: &[&str],
    phi: &Ket,
    channel: &Channel,
    cfg: &DecouplingConfig,
) -> Result<TrialReport> {
    haar_mc(&onehaar_setup(control, sender, psi, helper, phi, channel), cfg)
}

/// Two independent Haar unitaries on `first` and `second`; `eta` carries
/// the decoupled sender legs. `transmitted` is the product of the states
/// on the two randomized groups.
#[allow(clippy::too_many_arguments)]
pub fn product_haar_setup(
    control: &Ket,
    sender: &[&str],
    eta: &Ket,
    first: &[&str],
    second: &[&str],
    transmitted: &Ket,
    channel: &Channel,
) -> HaarSetup {
    HaarSetup {
        control: control.clone(),
        sender: sender.iter().map(|s| s.to_string()).collect(),
        sender_state: eta.clone(),
        randomized: vec![
            first.iter().map(|s| s.to_string()).collect(),
            second.iter().map(|s| s.to_string()).collect(),
        ],
        transmitted: transmitted.clone(),
        channel: channel.clone(),
        env: entropy::fresh_label(control.signature(), "E"),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn product_haar_mc(
    control: &Ket,
    sender: &[&str],
    eta: &Ket,
    first: &[&str],
    second: &[&str],
    transmitted: &Ket,
    channel: &Channel,
    cfg: &DecouplingConfig,
) -> Result<TrialReport> {
    haar_mc(&product_haar_setup(control, sender, eta, first, second, transmitted, channel), cfg)
}

/// `‖ρ − σ‖₁`, legs matched by label.
pub fn trace_norm_distance(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let s = sigma.aligned_to(rho)?;
    Ok(linalg::trace_norm_hermitian(&(rho.matrix() - s.matrix())))
}

/// Configuration of the split protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub seed: u64,
    /// Smoothing of the error terms; the min-entropies use `ε²/800`.
    pub epsilon: f64,
    /// Runs whose final fidelity falls below `1 − target_error` are flagged.
    pub target_error: f64,
    pub resample_cap: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { seed: 0, epsilon: 0.0, target_error: 0.01, resample_cap: RESAMPLE_CAP }
    }
}

/// The four derandomization conditions at one unitary pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditions {
    pub dec0: f64,
    pub dec1: f64,
    pub enc0: f64,
    pub enc1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTerms {
    pub dec0: f64,
    pub dec1: f64,
    pub enc0: f64,
    pub enc1: f64,
    /// `4√(2δ_dec0) + 2√(2δ_dec1) + 2√(2δ_enc0 + 2δ_enc1)`.
    pub composed: f64,
    /// Same with the encoder term multiplied by `(1 + 2√(2δ_enc2))`, `δ_enc2 = 0`.
    pub composed_alt: f64,
    pub ingredients: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub theta: f64,
    pub encoder: Operator,
    pub encoder_isometry_error: f64,
    /// Decoders in application order: first stage, simulated first stage, second stage.
    pub decoders: Vec<Operator>,
    /// `1/‖GLOBAL₀‖²`.
    pub c0: f64,
    pub attempts: usize,
    pub conditions: Conditions,
    pub delta: ErrorTerms,
    pub output: Operator,
    pub trace_distance: f64,
    pub fidelity: f64,
    pub failed: bool,
}

/// Label scheme of the protocol. Message legs `A0`, `A1`; references
/// `R0`, `R1`; side information `B1`.
pub mod labels {
    pub const CONTROL: &str = "X";
    pub const PART0: &str = "X0";
    pub const PART1: &str = "X1";
    pub const INPUT: &str = "Ap";
    pub const OUTPUT: &str = "B";
    pub const ENV: &str = "E";
    pub const MSG0: &str = "A0";
    pub const MSG1: &str = "A1";
    pub const REF0: &str = "R0";
    pub const REF1: &str = "R1";
    pub const SIDE: &str = "B1";
    pub const LOCAL_MSG0: &str = "A0_";
    pub const LOCAL_REF0: &str = "R0_";
    pub const F1: &str = "F1";
    pub const F2: &str = "F2";
}

/// Zero-padding embedding `from → to` of dimension `dim_to`.
fn embedding(from: &str, dim_from: usize, to: &str, dim_to: usize) -> Result<Operator> {
    Operator::new(
        Signature::single(to, dim_to)?,
        Signature::single(from, dim_from)?,
        CMat::from_fn(dim_to, dim_from, |i, j| if i == j { re(1.0) } else { re(0.0) }),
    )
}

struct ProtocolStates {
    /// `Ω′(θ)` on `(X0, X1, Ap)`.
    split: Ket,
    eta: Ket,
    psi: Ket,
}

impl ProtocolStates {
    fn d0(&self) -> usize {
        self.split.signature().dim_of(labels::PART0).unwrap_or(1)
    }
    fn d1(&self) -> usize {
        self.split.signature().dim_of(labels::PART1).unwrap_or(1)
    }

    /// `√(|X0||X1|)·op^{X0X1→Ap}(Ω′)(U₀W₀ ⊗ U₁W₁)` as an operator `(A0, A1) → Ap`.
    fn encoder(&self, u0: &CMat, u1: &CMat) -> Result<Operator> {
        use labels::*;
        let da0 = self.eta.signature().dim_of(MSG0)?;
        let da1 = self.psi.signature().dim_of(MSG1)?;
        let w0 = Operator::square(Signature::single(PART0, self.d0())?, u0.clone())?
            .compose(&embedding(MSG0, da0, PART0, self.d0())?)?;
        let w1 = Operator::square(Signature::single(PART1, self.d1())?, u1.clone())?
            .compose(&embedding(MSG1, da1, PART1, self.d1())?)?;
        let bent = self.split.op_map(&[PART0, PART1], &[INPUT])?;
        let scale = libm::sqrt((self.d0() * self.d1()) as f64);
        Ok(bent.compose(&w0.tensor(&w1)?)?.scale(re(scale)))
    }

    /// `√|X1|·op^{X1→X0Ap}(Ω′)U₁W₁|ψ⟩` on `(B1, R1, X0, Ap)`.
    fn omega_alice0(&self, u1: &CMat) -> Result<Ket> {
        use labels::*;
        let da1 = self.psi.signature().dim_of(MSG1)?;
        let w1 = Operator::square(Signature::single(PART1, self.d1())?, u1.clone())?
            .compose(&embedding(MSG1, da1, PART1, self.d1())?)?;
        let bent = self.split.op_map(&[PART1], &[PART0, INPUT])?;
        let k = self.psi.apply(&w1)?.apply(&bent)?;
        Ok(k.scale(re(libm::sqrt(self.d1() as f64))))
    }

    /// `√|X0|·op^{X0→X1Ap}(Ω′)U₀W₀|η⟩` on `(R0, X1, Ap)`.
    fn omega_alice1(&self, u0: &CMat) -> Result<Ket> {
        use labels::*;
        let da0 = self.eta.signature().dim_of(MSG0)?;
        let w0 = Operator::square(Signature::single(PART0, self.d0())?, u0.clone())?
            .compose(&embedding(MSG0, da0, PART0, self.d0())?)?;
        let bent = self.split.op_map(&[PART0], &[PART1, INPUT])?;
        let k = self.eta.apply(&w0)?.apply(&bent)?;
        Ok(k.scale(re(libm::sqrt(self.d0() as f64))))
    }
}

/// Conditions evaluated at `(U₀, U₁)`, together with `GLOBAL₀`.
fn conditions_at(st: &ProtocolStates, channel: &Channel, u0: &CMat, u1: &CMat) -> Result<(Conditions, Ket)> {
    use labels::*;
    let dil = channel.dilate(ENV)?;
    let enc = st.encoder(u0, u1)?;
    let global = st.eta.tensor(&st.psi)?.apply(&enc)?;
    let sent = dil.apply_ket(&global)?;
    let eta_r = st.eta.reduced(&[REF0])?;

    let w_a0 = dil.apply_ket(&st.omega_alice0(u1)?)?;
    let lhs = sent.reduced(&[REF0, SIDE, REF1, ENV])?;
    let target = eta_r.tensor(&w_a0.reduced(&[SIDE, REF1, ENV])?)?;
    let dec0 = trace_norm_distance(&lhs, &target)?;

    let w_a1 = dil.apply_ket(&st.omega_alice1(u0)?)?;
    let lhs = sent.reduced(&[REF1, ENV])?;
    let target = st.psi.reduced(&[REF1])?.tensor(&w_a1.reduced(&[ENV])?)?;
    let dec1 = trace_norm_distance(&lhs, &target)?;

    let w_a0_plain = st.omega_alice0(u1)?;
    let lhs = global.reduced(&[REF0, SIDE, REF1])?;
    let target = eta_r.tensor(&w_a0_plain.reduced(&[SIDE, REF1])?)?;
    let enc0 = trace_norm_distance(&lhs, &target)?;

    let lhs = w_a0_plain.reduced(&[SIDE, REF1])?;
    let enc1 = trace_norm_distance(&lhs, &st.psi.reduced(&[SIDE, REF1])?)?;
    Ok((Conditions { dec0, dec1, enc0, enc1 }, global))
}

fn error_terms(st: &ProtocolStates, channel: &Channel, eps: f64) -> Result<ErrorTerms> {
    use labels::*;
    let eps0 = eps * eps / 800.0;
    let dil = channel.dilate(ENV)?;
    let out = dil.apply_ket(&st.split)?;
    let h2_eta = entropy::h2_cond_bound(&st.eta.density(), &[MSG0], &[REF0], &SigmaPolicy::Marginal)?.value;
    let h2_psi = entropy::h2_cond_bound(&st.psi.density(), &[MSG1], &[REF1], &SigmaPolicy::Marginal)?.value;
    let hmax_eta = entropy::hmax_cond(&st.eta.density(), &[MSG0], &[], eps)?.upper;
    let hmax_psi = entropy::hmax_cond(&st.psi.density(), &[MSG1], &[], eps)?.upper;
    let h_0_1e = entropy::hmin_cond(&out.reduced(&[PART0, PART1, ENV])?, &[PART0], &[PART1, ENV], eps0)?.lower;
    let h_1_e = entropy::hmin_cond(&out.reduced(&[PART1, ENV])?, &[PART1], &[ENV], eps0)?.lower;
    let h_0_1 = entropy::hmin_cond(&out.reduced(&[PART0, PART1])?, &[PART0], &[PART1], eps0)?.lower;
    let h_1 = entropy::hmin_cond(&out.reduced(&[PART1])?, &[PART1], &[], eps)?.lower;

    let dec0 = 20.0 * libm::exp2(-0.5 * h2_eta - 0.5 * h_0_1e) + 160.0 * eps;
    let dec1 = 20.0 * libm::exp2(-0.5 * h2_psi - 0.5 * h_1_e) + 160.0 * eps;
    let enc0 = 20.0 * libm::exp2(0.5 * hmax_eta - 0.5 * h_0_1) + 160.0 * eps;
    let enc1 = libm::exp2(0.5 * hmax_psi - 0.5 * h_1) + 8.0 * eps;
    let s = libm::sqrt;
    let enc_part = 2.0 * s(2.0 * enc0 + 2.0 * enc1);
    let composed = 4.0 * s(2.0 * dec0) + 2.0 * s(2.0 * dec1) + enc_part;
    let composed_alt = 4.0 * s(2.0 * dec0) + 2.0 * s(2.0 * dec1) + enc_part * (1.0 + 2.0 * s(0.0));
    Ok(ErrorTerms {
        dec0,
        dec1,
        enc0,
        enc1,
        composed,
        composed_alt,
        ingredients: vec![
            ("h2(A0|R0)_eta".to_string(), h2_eta),
            ("h2(A1|R1)_psi".to_string(), h2_psi),
            ("hmax(A0)_eta".to_string(), hmax_eta),
            ("hmax(A1)_psi".to_string(), hmax_psi),
            ("hmin(X0|X1E)".to_string(), h_0_1e),
            ("hmin(X1|E)".to_string(), h_1_e),
            ("hmin(X0|X1)".to_string(), h_0_1),
            ("hmin(X1)".to_string(), h_1),
        ],
    })
}

/// Purification of the marginal of `state` on `keep` with environment
/// `env`, normalized and padded so that `env` has at least `min_dim` levels.
fn purified_marginal(state: &Ket, keep: &[&str], env: &str, min_dim: usize) -> Result<Ket> {
    let mut rho = state.reduced(keep)?;
    let t = rho.trace().re;
    rho = rho.scale(re(1.0 / t));
    let p = purify(&rho, env)?;
    let d = p.signature().dim_of(env)?;
    if d < min_dim {
        p.pad_leg(env, min_dim)
    } else {
        Ok(p)
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b.max(1))
}

/// Runs the two-part split protocol.
///
/// `omega` lives on `(X, Ap)`; `eta` on `(A0, R0)`; `psi` on
/// `(A1, B1, R1)`. The channel must map `Ap → B`.
pub fn p2p_split_protocol(
    channel: &Channel,
    omega: &Ket,
    theta: f64,
    eta: &Ket,
    psi: &Ket,
    cfg: &ProtocolConfig,
) -> Result<ProtocolRun> {
    use labels::*;
    let ch = channel.with_ports(&[INPUT], &[OUTPUT])?;
    let total = omega.signature().dim() * eta.signature().dim() * psi.signature().dim();
    if total > MAX_TOTAL_DIM * MAX_TOTAL_DIM {
        return Err(Error::TooLarge(total, MAX_TOTAL_DIM));
    }
    for d in [eta.signature().dim_of(MSG0)?, psi.signature().dim_of(MSG1)?] {
        if !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("message dimension {} is not a power of 2", d)));
        }
    }
    let da0 = eta.signature().dim_of(MSG0)?;
    let da1 = psi.signature().dim_of(MSG1)?;
    let din = omega.signature().dim_of(INPUT)?;
    let dx = omega.signature().dim_of(CONTROL)?;
    if da0 > dx || da1 > dx {
        return Err(Error::DimensionMismatch(format!("messages ({}, {}) exceed control dimension {}", da0, da1, dx)));
    }
    if da0 * da1 > din {
        return Err(Error::DimensionMismatch(format!("messages need {} input levels, channel has {}", da0 * da1, din)));
    }

    let iso = split_isometry(omega, CONTROL, PART0, PART1, theta)?;
    let split = iso.apply(omega)?.permuted(&[PART0, PART1, INPUT])?;
    let st = ProtocolStates { split, eta: eta.clone(), psi: psi.clone() };
    let delta = error_terms(&st, &ch, cfg.epsilon)?;

    // derandomize by rejection sampling; keep the attempt with the least excess
    let mut best: Option<(f64, usize, CMat, CMat, Conditions, Ket)> = None;
    let mut attempts = 0;
    for attempt in 0..cfg.resample_cap.max(1) {
        attempts = attempt + 1;
        let mut rng = RngStream::new(cfg.seed, attempt as u64).rng();
        let u0 = haar_unitary(st.d0(), &mut rng);
        let u1 = haar_unitary(st.d1(), &mut rng);
        let (c, global) = conditions_at(&st, &ch, &u0, &u1)?;
        let excess = [c.dec0 - delta.dec0, c.dec1 - delta.dec1, c.enc0 - delta.enc0, c.enc1 - delta.enc1]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let better = best.as_ref().map(|b| excess < b.0).unwrap_or(true);
        if better {
            best = Some((excess, attempt, u0, u1, c, global));
        }
        if excess <= 0.0 {
            break;
        }
    }
    let (excess, _, _, u1, conditions, global) = best.expect("at least one attempt");
    let derandomized = excess <= 0.0;

    let norm2 = global.norm() * global.norm();
    let c0 = 1.0 / norm2;
    let global_n = global.scale(re(libm::sqrt(c0)));

    // isometric encoder from Uhlmann against the normalized global state
    let source = st.eta.tensor(&st.psi)?;
    let enc = uhlmann_isometry(&source, &global_n, &[REF0, SIDE, REF1], 1.0)?;
    let encoder = enc.isometry.clone();
    let encoder_isometry_error = linalg::isometry_error(encoder.matrix());

    let dil = ch.dilate(ENV)?;
    let sent = dil.apply_ket(&source.apply(&encoder)?)?;
    let ideal = dil.apply_ket(&global_n)?;
    let dout = ideal.signature().dim_of(OUTPUT)?;

    // first stage: B → (A0, F1)
    let w_a0 = dil.apply_ket(&st.omega_alice0(&u1)?)?;
    let zeta1 = purified_marginal(&w_a0, &[SIDE, REF1, ENV], F1, ceil_div(dout, da0))?;
    let goal1 = st.eta.tensor(&zeta1)?;
    let v_a0 = uhlmann_isometry(&ideal, &goal1, &[REF0, SIDE, REF1, ENV], 1.0)?.isometry;
    let after1 = sent.apply(&v_a0)?;

    // simulate the first stage on a local copy and invert it
    let local = st.eta.relabel(MSG0, LOCAL_MSG0)?.relabel(REF0, LOCAL_REF0)?;
    let v_sim = v_a0.relabel(MSG0, LOCAL_MSG0)?;
    let after_sim = after1.tensor(&local)?.apply(&v_sim.dagger())?;

    // second stage: (B, B1, R0_) → (A1, B1, F2) against the renamed global state
    let target = ideal.relabel(REF0, LOCAL_REF0)?;
    let dpriv = dout * psi.signature().dim_of(SIDE)? * eta.signature().dim_of(REF0)?;
    let dpsi_priv = da1 * psi.signature().dim_of(SIDE)?;
    let zeta2 = purified_marginal(&target, &[ENV], F2, ceil_div(dpriv, dpsi_priv))?;
    let goal2 = st.psi.tensor(&zeta2)?;
    let v_a1 = uhlmann_isometry(&target, &goal2, &[REF1, ENV], 1.0)?.isometry;
    let final_state = after_sim.apply(&v_a1)?;

    let keep = [MSG0, REF0, MSG1, SIDE, REF1];
    let output = final_state.reduced(&keep)?;
    let ideal_out = source.density();
    let trace_distance = tensor::trace_distance(&ideal_out, &output)?;
    let fidelity = subnormalized_fidelity(&output, &ideal_out)?;
    let failed = !derandomized || fidelity < 1.0 - cfg.target_error;
    Ok(ProtocolRun {
        theta,
        encoder,
        encoder_isometry_error,
        decoders: vec![v_a0, v_sim, v_a1],
        c0,
        attempts,
        conditions,
        delta,
        output,
        trace_distance,
        fidelity,
        failed,
    })
}

/// Generalized fidelity that tolerates a trace slightly below one.
fn subnormalized_fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let s = sigma.aligned_to(rho)?;
    Ok(tensor::fidelity_raw(rho.matrix(), s.matrix()).min(1.0))
}

/// EPR-type message states for the protocol: `η = Φ^{A0R0}` of dimension
/// `d0` and `ψ = Φ^{A1R1} ⊗ |0⟩^{B1}` of dimension `d1`.
pub fn epr_messages(d0: usize, d1: usize) -> Result<(Ket, Ket)> {
    use labels::*;
    let eta = Ket::max_entangled(MSG0, REF0, d0)?;
    let psi = Ket::max_entangled(MSG1, REF1, d1)?
        .tensor(&Ket::basis(Signature::single(SIDE, 1)?, &[0])?)?
        .permuted(&[MSG1, SIDE, REF1])?;
    Ok((eta, psi))
}
