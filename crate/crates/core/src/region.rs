//! Achievable-rate traces for split-sender coding over point-to-point,
//! multiple-access and interference channels.
//!
//! Every sender register is prepared by a control state: `Ω` on `(X, Ap)`
//! for Alice and `Δ` on `(Y, Bp)` for Bob. Splitting acts on `X` and yields
//! `X0`, `X1`; the channel dilation adds the environment `E`. Rates are in
//! qubits per channel use. One-shot rates carry the additive `log₂ ε` slack of
//! their statement, recorded per point.
//!
//! Ingredient names use `A0`, `A1`, `B` for the split and unsplit sender
//! registers and the channel output labels for receivers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::Channel;
use crate::entropy::{self, EntropyResult, SolveStatus};
use crate::error::{Error, Result};
use crate::split::split_isometry;
use crate::tensor::Ket;

/// Smoothing parameters below this are evaluated unsmoothed. `H_min` only
/// grows under smoothing, so this keeps every rate a valid lower bound while
/// avoiding the near-degenerate fidelity constraint of tiny `ε`.
pub const MIN_SMOOTHING: f64 = 1e-2;

pub const DEFAULT_THETA_STEPS: usize = 41;

/// Inflation used when testing containment in a pentagon.
pub const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    OneShot,
    Iid,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::OneShot => "oneshot",
            Mode::Iid => "iid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    P2p,
    Qmac,
    Qic,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::P2p => "p2p",
            Scenario::Qmac => "qmac",
            Scenario::Qic => "qic",
        }
    }
}

/// Which sender helps the other in the interference channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AHelpsB,
    BHelpsA,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::AHelpsB => "A_helps_B",
            Direction::BHelpsA => "B_helps_A",
        }
    }
}

/// One entropic value entering a rate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingredient {
    pub name: String,
    /// Smoothing asked for by the rate formula.
    pub epsilon: f64,
    /// Smoothing actually used; see [`MIN_SMOOTHING`].
    pub evaluated_epsilon: f64,
    /// Certified lower bound, the value used in the rates.
    pub value: f64,
    pub upper: f64,
    pub optimal: bool,
}

impl Ingredient {
    fn exact(name: &str, value: f64) -> Self {
        Self { name: name.to_string(), epsilon: 0.0, evaluated_epsilon: 0.0, value, upper: value, optimal: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub theta: f64,
    /// Split direction or helping direction this point belongs to.
    pub branch: String,
    /// Rates clamped at zero, plus the ebit allocation.
    pub rates: Vec<(String, f64)>,
    /// Rate bounds before clamping.
    pub signed: Vec<(String, f64)>,
    pub ingredients: Vec<Ingredient>,
    pub slack: f64,
    pub available: bool,
    /// Interference channel only: whether `Q_0` meets its two constraints.
    pub feasible: Option<bool>,
    pub note: Option<String>,
}

impl RatePoint {
    fn new(theta: f64, branch: &str, slack: f64) -> Self {
        Self {
            theta,
            branch: branch.to_string(),
            rates: Vec::new(),
            signed: Vec::new(),
            ingredients: Vec::new(),
            slack,
            available: true,
            feasible: None,
            note: None,
        }
    }

    fn unavailable(theta: f64, branch: &str, slack: f64, why: String) -> Self {
        let mut p = Self::new(theta, branch, slack);
        p.available = false;
        p.note = Some(why);
        p
    }

    pub fn rate(&self, name: &str) -> Option<f64> {
        lookup(&self.rates, name)
    }

    pub fn signed_rate(&self, name: &str) -> Option<f64> {
        lookup(&self.signed, name)
    }

    pub fn ingredient(&self, name: &str) -> Option<f64> {
        self.ingredients.iter().find(|i| i.name == name).map(|i| i.value)
    }
}

fn lookup(v: &[(String, f64)], name: &str) -> Option<f64> {
    v.iter().find(|(n, _)| n == name).map(|(_, x)| *x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    pub name: String,
    pub rates: Vec<(String, f64)>,
}

impl Corner {
    pub fn rate(&self, name: &str) -> Option<f64> {
        lookup(&self.rates, name)
    }
}

/// Right-hand sides of the asymptotic multiple-access pentagon, per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pentagon {
    pub h_a: f64,
    pub i_a: f64,
    pub h_b: f64,
    pub i_b: f64,
    pub i_sum: f64,
}

impl Pentagon {
    /// Whether `(Q_A, E_A, Q_B, E_B)` satisfies all five inequalities up to `tol`.
    pub fn contains(&self, q_a: f64, e_a: f64, q_b: f64, e_b: f64, tol: f64) -> bool {
        q_a + e_a <= self.h_a + tol
            && q_a - e_a <= self.i_a + tol
            && q_b + e_b <= self.h_b + tol
            && q_b - e_b <= self.i_b + tol
            && q_a - e_a + q_b - e_b <= self.i_sum + tol
    }

    pub fn as_pairs(&self) -> Vec<(String, f64)> {
        vec![
            ("H(A)".to_string(), self.h_a),
            ("I(A>BC)".to_string(), self.i_a),
            ("H(B)".to_string(), self.h_b),
            ("I(B>AC)".to_string(), self.i_b),
            ("I(AB>C)".to_string(), self.i_sum),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTrace {
    pub channel: String,
    pub control: String,
    pub epsilon: f64,
    pub mode: Mode,
    pub scenario: Scenario,
    pub points: Vec<RatePoint>,
    pub corners: Vec<Corner>,
    pub pentagon: Option<Pentagon>,
}

impl RegionTrace {
    pub fn available_points(&self) -> impl Iterator<Item = &RatePoint> {
        self.points.iter().filter(|p| p.available)
    }

    pub fn corner(&self, name: &str) -> Option<&Corner> {
        self.corners.iter().find(|c| c.name == name)
    }
}

/// `n` uniform points on `[0, 1]`.
pub fn theta_grid(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::InvalidParameter("theta grid needs at least one point".into())),
        1 => Ok(vec![0.0]),
        _ => Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect()),
    }
}

/// Evaluates the points of one θ value; implemented by each rate formula.
pub trait Tracer: Sync {
    fn points_at(&self, theta: f64) -> Vec<RatePoint>;
    fn finish(&self, points: Vec<RatePoint>) -> Result<RegionTrace>;
}

/// Evaluates `tracer` sequentially over `grid`.
pub fn trace(tracer: &dyn Tracer, grid: &[f64]) -> Result<RegionTrace> {
    let mut points = Vec::new();
    for &t in grid {
        points.extend(tracer.points_at(t));
    }
    tracer.finish(points)
}

/// Sorts points by θ, keeping the emission order of equal θ.
pub fn order_points(points: &mut [RatePoint]) {
    points.sort_by(|a, b| a.theta.total_cmp(&b.theta));
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {}", eps)));
    }
    Ok(())
}

fn check_ebits(e: f64) -> Result<()> {
    if !(e.is_finite() && e >= 0.0) {
        return Err(Error::InvalidParameter(format!("ebit budget must be non-negative, got {}", e)));
    }
    Ok(())
}

fn evaluated(eps: f64) -> f64 {
    if eps < MIN_SMOOTHING {
        0.0
    } else {
        eps
    }
}

fn from_result(name: &str, eps: f64, r: EntropyResult) -> Result<Ingredient> {
    if r.status == SolveStatus::Infeasible {
        return Err(Error::InvalidParameter(format!("{}: solver reports infeasibility", name)));
    }
    Ok(Ingredient {
        name: name.to_string(),
        epsilon: eps,
        evaluated_epsilon: evaluated(eps),
        value: r.lower,
        upper: r.upper,
        optimal: r.status == SolveStatus::Optimal,
    })
}

/// `H_min^ε(A|B)` on the marginal of a pure state.
fn hmin_on(name: &str, ket: &Ket, a: &[&str], b: &[&str], eps: f64) -> Result<Ingredient> {
    let mut keep = a.to_vec();
    keep.extend_from_slice(b);
    let r = entropy::hmin_cond(&ket.reduced(&keep)?, a, b, evaluated(eps))?;
    from_result(name, eps, r)
}

/// `I_min^ε(A>B) = H_min^ε(A|R)` where `R` is everything outside `AB`.
fn imin_on(name: &str, ket: &Ket, a: &[&str], b: &[&str], eps: f64) -> Result<Ingredient> {
    let labels = ket.signature().labels();
    let env: Vec<&str> = labels.iter().copied().filter(|l| !a.contains(l) && !b.contains(l)).collect();
    hmin_on(name, ket, a, &env, eps)
}

fn max_entangled_control(x: &str, port: &str, d: usize) -> Result<Ket> {
    Ket::max_entangled(x, port, d)
}

fn check_control(ket: &Ket, x: &str, port: &str, d: usize) -> Result<()> {
    let sig = ket.signature();
    if sig.len() != 2 || !sig.contains(x) || sig.dim_of(port)? != d {
        return Err(Error::BadPartition(format!("control state must live on ({}, {}) with {} of dimension {}", x, port, port, d)));
    }
    if (ket.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::NotDensity(format!("control state has norm {}", ket.norm())));
    }
    Ok(())
}

/// Splits `X` of `control` at `theta` and pushes the result through `channel`.
fn split_state(control: &Ket, channel: &Channel, theta: f64) -> Result<Ket> {
    let iso = split_isometry(control, "X", "X0", "X1", theta)?;
    channel.dilate("E")?.apply_ket(&iso.apply(control)?)
}

fn unsplit_state(control: &Ket, channel: &Channel) -> Result<Ket> {
    let k = channel.dilate("E")?.apply_ket(control)?;
    // the unsplit sender register is called A in ingredient names
    k.relabel("X", "A")
}

/// `min(h − e, i + e) + slack`.
fn side_bound(h: f64, i: f64, e: f64, slack: f64) -> f64 {
    (h - e).min(i + e) + slack
}

/// Best split of an ebit budget `total` between two sub-senders whose rate
/// bounds are `side_bound(h0, i0, ·)` and `side_bound(h1, i1, ·)`, each
/// clamped at zero. Returns `(e0, bound0, bound1)`.
fn allocate(total: f64, (h0, i0): (f64, f64), (h1, i1): (f64, f64), slack: f64) -> (f64, f64, f64) {
    let value = |e0: f64| {
        let b0 = side_bound(h0, i0, e0, slack);
        let b1 = side_bound(h1, i1, total - e0, slack);
        (b0.max(0.0) + b1.max(0.0), b0, b1)
    };
    // breakpoints of a piecewise linear objective
    let candidates = [
        0.0,
        total,
        (h0 - i0) / 2.0,
        total - (h1 - i1) / 2.0,
        h0 + slack,
        -i0 - slack,
        total - (h1 + slack),
        total + i1 + slack,
    ];
    let mut best = (0.0, value(0.0));
    for c in candidates {
        let e0 = c.clamp(0.0, total);
        let v = value(e0);
        if v.0 > best.1 .0 + 1e-15 {
            best = (e0, v);
        }
    }
    (best.0, best.1 .1, best.1 .2)
}

fn catch(theta: f64, branch: &str, slack: f64, r: Result<Vec<RatePoint>>) -> Vec<RatePoint> {
    match r {
        Ok(v) => v,
        Err(e) => vec![RatePoint::unavailable(theta, branch, slack, e.to_string())],
    }
}

// ---------------------------------------------------------------------------
// point-to-point

/// Split transmission over a point-to-point channel `Ap → B`: `A0` sends
/// unassisted, `A1` consumes `E_A1` ebits.
#[derive(Debug, Clone)]
pub struct P2pRegion {
    pub channel: Channel,
    pub channel_id: String,
    pub control: Ket,
    pub control_id: String,
    pub epsilon: f64,
    pub ebits: Vec<f64>,
}

impl P2pRegion {
    /// Uses the maximally entangled control.
    pub fn new(channel: &Channel, channel_id: &str, epsilon: f64, ebits: &[f64]) -> Result<Self> {
        let d = channel.inputs().dim();
        let control = max_entangled_control("X", "Ap", d)?;
        Self::with_control(channel, channel_id, control, "max_entangled", epsilon, ebits)
    }

    pub fn with_control(
        channel: &Channel,
        channel_id: &str,
        control: Ket,
        control_id: &str,
        epsilon: f64,
        ebits: &[f64],
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        if epsilon > 0.5 {
            return Err(Error::InvalidParameter(format!(
                "point-to-point traces need epsilon <= 1/2 so that log2(4 eps^2) is not positive, got {}",
                epsilon
            )));
        }
        if channel.inputs().len() != 1 || channel.outputs().len() != 1 {
            return Err(Error::BadPartition("point-to-point mode needs a one-input, one-output channel".into()));
        }
        let channel = channel.with_ports(&["Ap"], &["B"])?;
        check_control(&control, "X", "Ap", channel.inputs().dim())?;
        let ebits = if ebits.is_empty() { vec![0.0] } else { ebits.to_vec() };
        for &e in &ebits {
            check_ebits(e)?;
        }
        Ok(Self {
            channel,
            channel_id: channel_id.to_string(),
            control,
            control_id: control_id.to_string(),
            epsilon,
            ebits,
        })
    }

    pub fn slack(&self) -> f64 {
        libm::log2(4.0 * self.epsilon * self.epsilon)
    }

    pub fn smoothing0(&self) -> f64 {
        self.epsilon * self.epsilon / 800.0
    }

    pub fn ingredients_at(&self, theta: f64) -> Result<Vec<Ingredient>> {
        let s = split_state(&self.control, &self.channel, theta)?;
        let (eps, eps0) = (self.epsilon, self.smoothing0());
        Ok(vec![
            hmin_on("hmin(A0|A1)", &s, &["X0"], &["X1"], eps0)?,
            imin_on("imin(A0>B)", &s, &["X0"], &["B"], eps0)?,
            hmin_on("hmin(A1)", &s, &["X1"], &[], eps)?,
            imin_on("imin(A1>A0B)", &s, &["X1"], &["X0", "B"], eps0)?,
        ])
    }

    fn build(&self, theta: f64) -> Result<Vec<RatePoint>> {
        let ing = self.ingredients_at(theta)?;
        let v = |k: usize| ing[k].value;
        let slack = self.slack();
        let q0 = v(0).min(v(1)) + slack;
        Ok(self
            .ebits
            .iter()
            .map(|&e| {
                let q1 = side_bound(v(2), v(3), e, slack);
                let mut p = RatePoint::new(theta, "split", slack);
                p.rates = vec![("Q_A0".into(), q0.max(0.0)), ("Q_A1".into(), q1.max(0.0)), ("E_A1".into(), e)];
                p.signed = vec![("Q_A0".into(), q0), ("Q_A1".into(), q1)];
                p.ingredients = ing.clone();
                p
            })
            .collect())
    }

    /// The two unsplit operating points: all traffic on `A1` (`θ = 0`) or on `A0` (`θ = 1`).
    pub fn corners(&self) -> Result<Vec<Corner>> {
        let s = unsplit_state(&self.control, &self.channel)?;
        let (eps, eps0, slack) = (self.epsilon, self.smoothing0(), self.slack());
        let h_eps = hmin_on("hmin(A)", &s, &["A"], &[], eps)?.value;
        let h_eps0 = hmin_on("hmin(A)", &s, &["A"], &[], eps0)?.value;
        let i = imin_on("imin(A>B)", &s, &["A"], &["B"], eps0)?.value;
        let mut out = Vec::new();
        for &e in &self.ebits {
            out.push(Corner {
                name: format!("theta0_E{}", e),
                rates: vec![
                    ("Q_A0".into(), 0.0),
                    ("Q_A1".into(), side_bound(h_eps, i, e, slack).max(0.0)),
                    ("E_A1".into(), e),
                ],
            });
            out.push(Corner {
                name: format!("theta1_E{}", e),
                rates: vec![
                    ("Q_A0".into(), (h_eps0.min(i) + slack).max(0.0)),
                    ("Q_A1".into(), 0.0),
                    ("E_A1".into(), e),
                ],
            });
        }
        Ok(out)
    }
}

impl Tracer for P2pRegion {
    fn points_at(&self, theta: f64) -> Vec<RatePoint> {
        catch(theta, "split", self.slack(), self.build(theta))
    }

    fn finish(&self, mut points: Vec<RatePoint>) -> Result<RegionTrace> {
        order_points(&mut points);
        Ok(RegionTrace {
            channel: self.channel_id.clone(),
            control: self.control_id.clone(),
            epsilon: self.epsilon,
            mode: Mode::OneShot,
            scenario: Scenario::P2p,
            points,
            corners: self.corners()?,
            pentagon: None,
        })
    }
}

// ---------------------------------------------------------------------------
// multiple access

fn two_sender_controls(channel: &Channel) -> Result<(Ket, Ket)> {
    let da = channel.inputs().dim_of("Ap")?;
    let db = channel.inputs().dim_of("Bp")?;
    Ok((max_entangled_control("X", "Ap", da)?, max_entangled_control("Y", "Bp", db)?))
}

/// Rate splitting of sender A over a channel `Ap Bp → C` with ebit budgets
/// `(E_A, E_B)`. Both assignments of the encoding constraints to `A0` and
/// `A1` are evaluated; the trace holds both branches.
#[derive(Debug, Clone)]
pub struct QmacRegion {
    pub channel: Channel,
    pub channel_id: String,
    pub omega: Ket,
    pub delta: Ket,
    pub control_id: String,
    pub epsilon: f64,
    pub ebits: (f64, f64),
}

impl QmacRegion {
    pub fn new(channel: &Channel, channel_id: &str, epsilon: f64, ebits: (f64, f64)) -> Result<Self> {
        let channel = qmac_ports(channel)?;
        let (omega, delta) = two_sender_controls(&channel)?;
        Self::with_controls(&channel, channel_id, omega, delta, "max_entangled", epsilon, ebits)
    }

    pub fn with_controls(
        channel: &Channel,
        channel_id: &str,
        omega: Ket,
        delta: Ket,
        control_id: &str,
        epsilon: f64,
        ebits: (f64, f64),
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_ebits(ebits.0)?;
        check_ebits(ebits.1)?;
        let channel = qmac_ports(channel)?;
        check_control(&omega, "X", "Ap", channel.inputs().dim_of("Ap")?)?;
        check_control(&delta, "Y", "Bp", channel.inputs().dim_of("Bp")?)?;
        Ok(Self {
            channel,
            channel_id: channel_id.to_string(),
            omega,
            delta,
            control_id: control_id.to_string(),
            epsilon,
            ebits,
        })
    }

    pub fn slack(&self) -> f64 {
        4.0 * libm::log2(self.epsilon)
    }

    pub fn smoothing0(&self) -> f64 {
        self.epsilon * self.epsilon / 800.0
    }

    fn control(&self) -> Result<Ket> {
        self.omega.tensor(&self.delta)
    }

    /// The dilated split state `σ(θ)` on `Y, X0, X1, C, E`.
    pub fn split_state(&self, theta: f64) -> Result<Ket> {
        split_state(&self.control()?, &self.channel, theta)
    }

    pub fn ingredients_at(&self, theta: f64) -> Result<Vec<Ingredient>> {
        let s = self.split_state(theta)?;
        let (eps, eps0) = (self.epsilon, self.smoothing0());
        Ok(vec![
            hmin_on("hmin(A0|A1)", &s, &["X0"], &["X1"], eps0)?,
            hmin_on("hmin(A1)", &s, &["X1"], &[], eps)?,
            hmin_on("hmin(A1|A0)", &s, &["X1"], &["X0"], eps0)?,
            hmin_on("hmin(A0)", &s, &["X0"], &[], eps)?,
            imin_on("imin(A0>C)", &s, &["X0"], &["C"], eps0)?,
            imin_on("imin(A1>CA0B)", &s, &["X1"], &["C", "X0", "Y"], eps0)?,
            hmin_on("hmin(B)", &s, &["Y"], &[], eps)?,
            imin_on("imin(B>CA0)", &s, &["Y"], &["C", "X0"], eps0)?,
        ])
    }

    fn build(&self, theta: f64) -> Result<Vec<RatePoint>> {
        let ing = self.ingredients_at(theta)?;
        let v = |name: &str| ing.iter().find(|i| i.name == name).map(|i| i.value).unwrap_or(f64::NAN);
        let slack = self.slack();
        let (e_a, e_b) = self.ebits;
        let q_b = side_bound(v("hmin(B)"), v("imin(B>CA0)"), e_b, slack);
        let branches = [
            ("A0_conditional", v("hmin(A0|A1)"), v("hmin(A1)")),
            ("A1_conditional", v("hmin(A0)"), v("hmin(A1|A0)")),
        ];
        Ok(branches
            .iter()
            .map(|&(name, h0, h1)| {
                let (e0, b0, b1) = allocate(e_a, (h0, v("imin(A0>C)")), (h1, v("imin(A1>CA0B)")), slack);
                let mut p = RatePoint::new(theta, name, slack);
                p.rates = vec![
                    ("Q_A".into(), b0.max(0.0) + b1.max(0.0)),
                    ("E_A".into(), e_a),
                    ("Q_B".into(), q_b.max(0.0)),
                    ("E_B".into(), e_b),
                    ("Q_A0".into(), b0.max(0.0)),
                    ("Q_A1".into(), b1.max(0.0)),
                    ("E_A0".into(), e0),
                    ("E_A1".into(), e_a - e0),
                ];
                p.signed = vec![("Q_A0".into(), b0), ("Q_A1".into(), b1), ("Q_B".into(), q_b)];
                p.ingredients = ing.clone();
                p
            })
            .collect())
    }

    /// Successive-cancellation corners without splitting: `S` decodes B
    /// first, `T` decodes A first.
    pub fn corners(&self) -> Result<Vec<Corner>> {
        let s = unsplit_state(&self.control()?, &self.channel)?;
        let (eps, eps0, slack) = (self.epsilon, self.smoothing0(), self.slack());
        let (e_a, e_b) = self.ebits;
        let h_a = hmin_on("hmin(A)", &s, &["A"], &[], eps)?.value;
        let h_b = hmin_on("hmin(B)", &s, &["Y"], &[], eps)?.value;
        let i_a_full = imin_on("imin(A>CB)", &s, &["A"], &["C", "Y"], eps0)?.value;
        let i_a = imin_on("imin(A>C)", &s, &["A"], &["C"], eps0)?.value;
        let i_b = imin_on("imin(B>C)", &s, &["Y"], &["C"], eps0)?.value;
        let i_b_full = imin_on("imin(B>CA)", &s, &["Y"], &["C", "A"], eps0)?.value;
        let corner = |name: &str, ia: f64, ib: f64| Corner {
            name: name.to_string(),
            rates: vec![
                ("Q_A".into(), side_bound(h_a, ia, e_a, slack).max(0.0)),
                ("Q_B".into(), side_bound(h_b, ib, e_b, slack).max(0.0)),
            ],
        };
        Ok(vec![corner("S", i_a_full, i_b), corner("T", i_a, i_b_full)])
    }
}

fn qmac_ports(channel: &Channel) -> Result<Channel> {
    if channel.inputs().len() != 2 || channel.outputs().len() != 1 {
        return Err(Error::BadPartition("multiple-access mode needs a two-input, one-output channel".into()));
    }
    channel.with_ports(&["Ap", "Bp"], &["C"])
}

impl Tracer for QmacRegion {
    fn points_at(&self, theta: f64) -> Vec<RatePoint> {
        catch(theta, "A0_conditional", self.slack(), self.build(theta))
    }

    fn finish(&self, mut points: Vec<RatePoint>) -> Result<RegionTrace> {
        order_points(&mut points);
        Ok(RegionTrace {
            channel: self.channel_id.clone(),
            control: self.control_id.clone(),
            epsilon: self.epsilon,
            mode: Mode::OneShot,
            scenario: Scenario::Qmac,
            points,
            corners: self.corners()?,
            pentagon: None,
        })
    }
}

// ---------------------------------------------------------------------------
// interference

/// One helping direction of an interference channel, written in the frame
/// where the helping sender is `X`/`Ap` with receiver `C` and the helped
/// sender is `Y`/`Bp` with receiver `D`.
#[derive(Debug, Clone)]
struct QicFrame {
    direction: Direction,
    channel: Channel,
    helper: Ket,
    helped: Ket,
    /// `(E_helper, E_helped)`.
    ebits: (f64, f64),
}

impl QicFrame {
    fn control(&self) -> Result<Ket> {
        self.helper.tensor(&self.helped)
    }

    /// Maps frame rates `(Q_helper, E_helper, Q_helped, E_helped)` back to A/B.
    fn rates(&self, q_x: f64, e_x: f64, q_y: f64, e_y: f64) -> [(String, f64); 4] {
        let (qa, ea, qb, eb) = match self.direction {
            Direction::AHelpsB => (q_x, e_x, q_y, e_y),
            Direction::BHelpsA => (q_y, e_y, q_x, e_x),
        };
        [("Q_A".into(), qa), ("E_A".into(), ea), ("Q_B".into(), qb), ("E_B".into(), eb)]
    }
}

/// Interference channel `Ap Bp → C D` where one sender splits and lends the
/// split part `A0` (rate `Q_0`) to the other receiver. `Q_0 = 0` means no
/// help and gives the product of the two point-to-point rectangles.
/// Ingredient names in the `B_helps_A` branch refer to the swapped frame.
#[derive(Debug, Clone)]
pub struct QicRegion {
    pub channel_id: String,
    pub control_id: String,
    pub epsilon: f64,
    pub q0_grid: Vec<f64>,
    frames: Vec<QicFrame>,
}

impl QicRegion {
    pub fn new(
        channel: &Channel,
        channel_id: &str,
        epsilon: f64,
        q0_grid: &[f64],
        directions: &[Direction],
        ebits: (f64, f64),
    ) -> Result<Self> {
        let ch = qic_ports(channel)?;
        let (omega, delta) = two_sender_controls(&ch)?;
        Self::with_controls(channel, channel_id, omega, delta, "max_entangled", epsilon, q0_grid, directions, ebits)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_controls(
        channel: &Channel,
        channel_id: &str,
        omega: Ket,
        delta: Ket,
        control_id: &str,
        epsilon: f64,
        q0_grid: &[f64],
        directions: &[Direction],
        ebits: (f64, f64),
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_ebits(ebits.0)?;
        check_ebits(ebits.1)?;
        let ch = qic_ports(channel)?;
        check_control(&omega, "X", "Ap", ch.inputs().dim_of("Ap")?)?;
        check_control(&delta, "Y", "Bp", ch.inputs().dim_of("Bp")?)?;
        let q0_grid = if q0_grid.is_empty() { vec![0.0] } else { q0_grid.to_vec() };
        for &q in &q0_grid {
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::InvalidParameter(format!("Q_0 must be non-negative, got {}", q)));
            }
        }
        if directions.is_empty() {
            return Err(Error::InvalidParameter("at least one helping direction is needed".into()));
        }
        let mut frames = Vec::new();
        for &direction in directions {
            frames.push(match direction {
                Direction::AHelpsB => QicFrame { direction, channel: ch.clone(), helper: omega.clone(), helped: delta.clone(), ebits },
                Direction::BHelpsA => QicFrame {
                    direction,
                    channel: ch.with_ports(&["Bp", "Ap"], &["D", "C"])?,
                    helper: delta.relabel("Y", "X")?.relabel("Bp", "Ap")?,
                    helped: omega.relabel("X", "Y")?.relabel("Ap", "Bp")?,
                    ebits: (ebits.1, ebits.0),
                },
            });
        }
        Ok(Self { channel_id: channel_id.to_string(), control_id: control_id.to_string(), epsilon, q0_grid, frames })
    }

    pub fn slack(&self) -> f64 {
        libm::log2(self.epsilon * self.epsilon)
    }

    pub fn smoothing0(&self) -> f64 {
        self.epsilon * self.epsilon / 800.0
    }

    /// Point-to-point values of the unsplit frame; they define the no-help rectangle.
    fn trivial_ingredients(&self, frame: &QicFrame) -> Result<Vec<Ingredient>> {
        let s = unsplit_state(&frame.control()?, &frame.channel)?;
        let (eps, eps0) = (self.epsilon, self.smoothing0());
        Ok(vec![
            hmin_on("hmin(A)", &s, &["A"], &[], eps)?,
            imin_on("imin(A>C)", &s, &["A"], &["C"], eps0)?,
            hmin_on("hmin(B)", &s, &["Y"], &[], eps)?,
            imin_on("imin(B>D)", &s, &["Y"], &["D"], eps0)?,
        ])
    }

    fn split_ingredients(&self, frame: &QicFrame, theta: f64) -> Result<Vec<Ingredient>> {
        let s = split_state(&frame.control()?, &frame.channel, theta)?;
        let (eps, eps0) = (self.epsilon, self.smoothing0());
        Ok(vec![
            imin_on("imin(A0>D)", &s, &["X0"], &["D"], eps0)?,
            hmin_on("hmin(A0|A1)", &s, &["X0"], &["X1"], eps0)?,
            hmin_on("hmin(A1)", &s, &["X1"], &[], eps)?,
            imin_on("imin(A1>C)", &s, &["X1"], &["C"], eps0)?,
            hmin_on("hmin(B)", &s, &["Y"], &[], eps)?,
            imin_on("imin(B>A0D)", &s, &["Y"], &["X0", "D"], eps0)?,
        ])
    }

    fn build(&self, frame: &QicFrame, theta: f64) -> Result<Vec<RatePoint>> {
        let slack = self.slack();
        let branch = frame.direction.as_str();
        let (e_x, e_y) = frame.ebits;
        let needs_split = self.q0_grid.iter().any(|&q| q > 0.0);
        let trivial = self.trivial_ingredients(frame)?;
        let split = if needs_split { self.split_ingredients(frame, theta)? } else { Vec::new() };
        let mut ing = trivial.clone();
        ing.extend(split.iter().cloned());
        let v = |name: &str| ing.iter().find(|i| i.name == name).map(|i| i.value).unwrap_or(f64::NAN);
        let mut out = Vec::new();
        for &q0 in &self.q0_grid {
            let mut p = RatePoint::new(theta, branch, slack);
            let (qx, qy, q0_bound) = if q0 == 0.0 {
                (side_bound(v("hmin(A)"), v("imin(A>C)"), e_x, slack), side_bound(v("hmin(B)"), v("imin(B>D)"), e_y, slack), None)
            } else {
                let bound = v("imin(A0>D)").min(v("hmin(A0|A1)")) + slack;
                (
                    side_bound(v("hmin(A1)"), v("imin(A1>C)"), e_x, slack),
                    side_bound(v("hmin(B)"), v("imin(B>A0D)"), e_y, slack),
                    Some(bound),
                )
            };
            let feasible = q0_bound.map_or(true, |b| q0 <= b);
            p.feasible = Some(feasible);
            let [a, b, c, d] = frame.rates(qx, e_x, qy, e_y);
            if feasible {
                p.rates = vec![("Q_0".into(), q0), (a.0.clone(), a.1.max(0.0)), b.clone(), (c.0.clone(), c.1.max(0.0)), d.clone()];
            } else {
                p.rates = vec![("Q_0".into(), q0), (a.0.clone(), 0.0), b.clone(), (c.0.clone(), 0.0), d.clone()];
                p.note = Some("Q_0 exceeds its bound".into());
            }
            p.signed = vec![a, c];
            if let Some(bd) = q0_bound {
                p.signed.push(("Q_0".into(), bd));
            }
            p.ingredients = ing.clone();
            out.push(p);
        }
        Ok(out)
    }

    /// The no-help rectangle corner per direction.
    pub fn corners(&self) -> Result<Vec<Corner>> {
        let slack = self.slack();
        let mut out = Vec::new();
        for frame in &self.frames {
            let t = self.trivial_ingredients(frame)?;
            let (e_x, e_y) = frame.ebits;
            let [a, b, c, d] = frame.rates(
                side_bound(t[0].value, t[1].value, e_x, slack),
                e_x,
                side_bound(t[2].value, t[3].value, e_y, slack),
                e_y,
            );
            out.push(Corner {
                name: format!("trivial_{}", frame.direction.as_str()),
                rates: vec![(a.0, a.1.max(0.0)), b, (c.0, c.1.max(0.0)), d],
            });
        }
        Ok(out)
    }
}

fn qic_ports(channel: &Channel) -> Result<Channel> {
    if channel.inputs().len() != 2 || channel.outputs().len() != 2 {
        return Err(Error::BadPartition("interference mode needs a two-input, two-output channel".into()));
    }
    channel.with_ports(&["Ap", "Bp"], &["C", "D"])
}

impl Tracer for QicRegion {
    fn points_at(&self, theta: f64) -> Vec<RatePoint> {
        let slack = self.slack();
        self.frames
            .iter()
            .flat_map(|f| catch(theta, f.direction.as_str(), slack, self.build(f, theta)))
            .collect()
    }

    fn finish(&self, mut points: Vec<RatePoint>) -> Result<RegionTrace> {
        order_points(&mut points);
        Ok(RegionTrace {
            channel: self.channel_id.clone(),
            control: self.control_id.clone(),
            epsilon: self.epsilon,
            mode: Mode::OneShot,
            scenario: Scenario::Qic,
            points,
            corners: self.corners()?,
            pentagon: None,
        })
    }
}

// ---------------------------------------------------------------------------
// asymptotic regions

/// `k` copies of `ket`, each label suffixed with `#copy`.
pub fn ket_power(ket: &Ket, k: usize) -> Result<Ket> {
    if k == 0 {
        return Err(Error::InvalidParameter("tensor power of order 0".into()));
    }
    let labels: Vec<String> = ket.signature().labels().iter().map(|s| s.to_string()).collect();
    let mut out: Option<Ket> = None;
    for copy in 0..k {
        let mut c = ket.clone();
        for l in &labels {
            c = c.relabel(l, &format!("{}#{}", l, copy))?;
        }
        out = Some(match out {
            None => c,
            Some(o) => o.tensor(&c)?,
        });
    }
    Ok(out.expect("k >= 1"))
}

fn copies(labels: &[&str], k: usize) -> Vec<String> {
    (0..k).flat_map(|c| labels.iter().map(move |l| format!("{}#{}", l, c))).collect()
}

/// Coherent information `I(A>B)/k` on `k` copies of a pure state.
fn coherent_per_copy(power: &Ket, k: usize, a: &[&str], b: &[&str]) -> Result<f64> {
    let (ca, cb) = (copies(a, k), copies(b, k));
    let ra: Vec<&str> = ca.iter().map(|s| s.as_str()).collect();
    let rb: Vec<&str> = cb.iter().map(|s| s.as_str()).collect();
    Ok(entropy::coherent_information_ket(power, &ra, &rb)? / k as f64)
}

fn entropy_per_copy(power: &Ket, k: usize, a: &[&str]) -> Result<f64> {
    let ca = copies(a, k);
    let ra: Vec<&str> = ca.iter().map(|s| s.as_str()).collect();
    Ok(entropy::von_neumann_ket(power, &ra)? / k as f64)
}

const MAX_IID_DIM: usize = 1 << 16;

fn check_power_dim(ket: &Ket, k: usize) -> Result<()> {
    let d = ket.signature().dim();
    let total = (0..k).try_fold(1usize, |acc, _| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if total > MAX_IID_DIM {
        return Err(Error::TooLarge(total, MAX_IID_DIM));
    }
    Ok(())
}

/// The five right-hand sides on `k` copies of the dilated unsplit state.
pub fn qmac_pentagon(channel: &Channel, omega: &Ket, delta: &Ket, k: usize) -> Result<Pentagon> {
    let channel = qmac_ports(channel)?;
    let s = unsplit_state(&omega.tensor(delta)?, &channel)?;
    check_power_dim(&s, k)?;
    let p = ket_power(&s, k)?;
    Ok(Pentagon {
        h_a: entropy_per_copy(&p, k, &["A"])?,
        i_a: coherent_per_copy(&p, k, &["A"], &["Y", "C"])?,
        h_b: entropy_per_copy(&p, k, &["Y"])?,
        i_b: coherent_per_copy(&p, k, &["Y"], &["A", "C"])?,
        i_sum: coherent_per_copy(&p, k, &["A", "Y"], &["C"])?,
    })
}

/// Vertices of the pentagon cut by the ebit budgets, counter-clockwise from
/// the origin. The `θ` of a vertex is its position in this order, scaled to `[0, 1]`.
pub fn pentagon_vertices(p: &Pentagon, ebits: (f64, f64)) -> Vec<(f64, f64)> {
    let (e_a, e_b) = ebits;
    let a = side_bound(p.h_a, p.i_a, e_a, 0.0).max(0.0);
    let b = side_bound(p.h_b, p.i_b, e_b, 0.0).max(0.0);
    let sum = (p.i_sum + e_a + e_b).max(0.0);
    vec![(0.0, 0.0), (a.min(sum), 0.0), (a.min(sum), b.min((sum - a).max(0.0))), (a.min((sum - b).max(0.0)), b.min(sum)), (0.0, b.min(sum))]
}

/// Asymptotic multiple-access region at blocklength `k ∈ {1, 2}`.
pub fn qmac_iid_region(
    channel: &Channel,
    channel_id: &str,
    omega: Option<(&Ket, &Ket)>,
    k: usize,
    ebits: (f64, f64),
) -> Result<RegionTrace> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParameter(format!("blocklength must be 1 or 2, got {}", k)));
    }
    check_ebits(ebits.0)?;
    check_ebits(ebits.1)?;
    let ch = qmac_ports(channel)?;
    let (o, d, control_id) = match omega {
        Some((o, d)) => (o.clone(), d.clone(), "custom"),
        None => {
            let (o, d) = two_sender_controls(&ch)?;
            (o, d, "max_entangled")
        }
    };
    check_control(&o, "X", "Ap", ch.inputs().dim_of("Ap")?)?;
    check_control(&d, "Y", "Bp", ch.inputs().dim_of("Bp")?)?;
    let pent = qmac_pentagon(&ch, &o, &d, k)?;
    let ingredients: Vec<Ingredient> = pent.as_pairs().iter().map(|(n, v)| Ingredient::exact(n, *v)).collect();
    let verts = pentagon_vertices(&pent, ebits);
    let n = verts.len();
    let points = verts
        .iter()
        .enumerate()
        .map(|(idx, &(qa, qb))| {
            let mut p = RatePoint::new(idx as f64 / (n - 1) as f64, "vertex", 0.0);
            p.rates = vec![("Q_A".into(), qa), ("E_A".into(), ebits.0), ("Q_B".into(), qb), ("E_B".into(), ebits.1)];
            p.signed = p.rates.clone();
            p.ingredients = ingredients.clone();
            p
        })
        .collect();
    let (e_a, e_b) = ebits;
    let corner = |name: &str, ia: f64, ib: f64| Corner {
        name: name.to_string(),
        rates: vec![
            ("Q_A".into(), side_bound(pent.h_a, ia, e_a, 0.0).max(0.0)),
            ("Q_B".into(), side_bound(pent.h_b, ib, e_b, 0.0).max(0.0)),
        ],
    };
    let i_a_alone = pent.i_sum - pent.i_b;
    let i_b_alone = pent.i_sum - pent.i_a;
    Ok(RegionTrace {
        channel: channel_id.to_string(),
        control: control_id.to_string(),
        epsilon: 0.0,
        mode: Mode::Iid,
        scenario: Scenario::Qmac,
        points,
        corners: vec![corner("S", pent.i_a, i_b_alone), corner("T", i_a_alone, pent.i_b)],
        pentagon: Some(pent),
    })
}

/// Asymptotic interference-channel region: for each θ and direction, the
/// rectangle corner from `H(A1)`, `I(A1>C)`, `H(B)`, `I(B>A0D)` per copy.
pub fn qic_iid_region(
    channel: &Channel,
    channel_id: &str,
    k: usize,
    grid: &[f64],
    directions: &[Direction],
    ebits: (f64, f64),
) -> Result<RegionTrace> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParameter(format!("blocklength must be 1 or 2, got {}", k)));
    }
    // reuse the one-shot frames; epsilon is irrelevant here
    let q = QicRegion::new(channel, channel_id, 0.5, &[1.0], directions, ebits)?;
    let mut points = Vec::new();
    for &theta in grid {
        for frame in &q.frames {
            let s = split_state(&frame.control()?, &frame.channel, theta)?;
            check_power_dim(&s, k)?;
            let p = ket_power(&s, k)?;
            let ing = vec![
                Ingredient::exact("H(A1)", entropy_per_copy(&p, k, &["X1"])?),
                Ingredient::exact("I(A1>C)", coherent_per_copy(&p, k, &["X1"], &["C"])?),
                Ingredient::exact("H(B)", entropy_per_copy(&p, k, &["Y"])?),
                Ingredient::exact("I(B>A0D)", coherent_per_copy(&p, k, &["Y"], &["X0", "D"])?),
            ];
            let (e_x, e_y) = frame.ebits;
            let qx = side_bound(ing[0].value, ing[1].value, e_x, 0.0);
            let qy = side_bound(ing[2].value, ing[3].value, e_y, 0.0);
            let [a, b, c, d] = frame.rates(qx, e_x, qy, e_y);
            let mut pt = RatePoint::new(theta, frame.direction.as_str(), 0.0);
            pt.rates = vec![(a.0.clone(), a.1.max(0.0)), b, (c.0.clone(), c.1.max(0.0)), d];
            pt.signed = vec![a, c];
            pt.ingredients = ing;
            points.push(pt);
        }
    }
    order_points(&mut points);
    Ok(RegionTrace {
        channel: channel_id.to_string(),
        control: "max_entangled".to_string(),
        epsilon: 0.0,
        mode: Mode::Iid,
        scenario: Scenario::Qic,
        points,
        corners: Vec::new(),
        pentagon: None,
    })
}
