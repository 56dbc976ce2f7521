//! Entropic quantities in bits: von Neumann entropy, coherent information,
//! smooth conditional min- and max-entropy, and Rényi-2 lower bounds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};
use crate::sdp::{Lmi, SdpOptions, SdpStatus};
use crate::tensor::{purify, Ket, Operator, Signature};

/// Largest `d_A·d_B` handed to the SDP solver.
pub const MAX_SDP_DIM: usize = 256;
/// Regularization added to `σ` before negative powers.
pub const SIGMA_REG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

/// Optimal operators of a min-entropy program.
#[derive(Debug, Clone)]
pub struct Certificate {
    /// Unnormalized `σ` on the conditioning system with `ρ′ ≤ I ⊗ σ`.
    pub sigma: Operator,
    /// The smoothed state `ρ′` when `ε > 0`.
    pub smoothed: Option<Operator>,
}

#[derive(Debug, Clone)]
pub struct EntropyResult {
    /// Point value in bits (midpoint of the bound pair).
    pub value: f64,
    pub epsilon: f64,
    pub status: SolveStatus,
    /// Certified bracket `[lower, upper]` in bits.
    pub lower: f64,
    pub upper: f64,
    /// `upper − lower`.
    pub gap: f64,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

impl EntropyResult {
    fn exact(value: f64, epsilon: f64) -> Self {
        Self {
            value,
            epsilon,
            status: SolveStatus::Optimal,
            lower: value,
            upper: value,
            gap: 0.0,
            iterations: 0,
            certificate: None,
        }
    }

    /// The same bracket seen from the other sign.
    fn negated(self) -> Self {
        Self {
            value: -self.value,
            lower: -self.upper,
            upper: -self.lower,
            certificate: None,
            ..self
        }
    }
}

/// Von Neumann entropy of a (normalized) density operator.
pub fn von_neumann(rho: &Operator) -> f64 {
    linalg::entropy_bits(&rho.eigenvalues())
}

/// Entropy of the reduced state on `subset`.
pub fn von_neumann_of(rho: &Operator, subset: &[&str]) -> Result<f64> {
    Ok(von_neumann(&rho.marginal(subset)?))
}

/// Entropy of the reduced state of a pure state, using whichever side of
/// the cut is smaller.
pub fn von_neumann_ket(ket: &Ket, subset: &[&str]) -> Result<f64> {
    let sig = ket.signature().select(subset)?;
    let rest = ket.signature().without(subset)?;
    let keep = if sig.dim() <= rest.dim() { sig.labels() } else { rest.labels() };
    Ok(von_neumann(&ket.reduced(&keep)?))
}

/// `I(A>B) = H(B) − H(AB)`.
pub fn coherent_information(rho: &Operator, sender: &[&str], receiver: &[&str]) -> Result<f64> {
    let all = join(sender, receiver);
    Ok(von_neumann_of(rho, receiver)? - von_neumann_of(rho, &all)?)
}

/// Coherent information evaluated on a global pure state.
pub fn coherent_information_ket(ket: &Ket, sender: &[&str], receiver: &[&str]) -> Result<f64> {
    let all = join(sender, receiver);
    Ok(von_neumann_ket(ket, receiver)? - von_neumann_ket(ket, &all)?)
}

/// `H(A|B) = H(AB) − H(B)`.
pub fn conditional_entropy(rho: &Operator, a: &[&str], b: &[&str]) -> Result<f64> {
    let all = join(a, b);
    Ok(von_neumann_of(rho, &all)? - von_neumann_of(rho, b)?)
}

fn join<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

/// Label not present in `sig`, derived from `base`.
pub fn fresh_label(sig: &Signature, base: &str) -> String {
    let mut name = base.to_string();
    let mut k = 0;
    while sig.contains(&name) {
        k += 1;
        name = format!("{}{}", base, k);
    }
    name
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("smoothing parameter {} outside [0, 1)", eps)));
    }
    Ok(())
}

/// `H_min^ε(A|B)_ρ` with default solver options.
pub fn hmin_cond(rho: &Operator, a: &[&str], b: &[&str], eps: f64) -> Result<EntropyResult> {
    hmin_cond_with(rho, a, b, eps, &SdpOptions::default())
}

/// Smooth conditional min-entropy.
///
/// With `ε = 0` this is `−log₂ min{Tr σ : ρ ≤ I⊗σ}`. With `ε > 0` the
/// minimum also ranges over subnormalized `ρ′` within purified distance `ε`
/// of `ρ`; the fidelity constraint is written through a factor `W` with
/// `ρ′ = WW†` against the eigen-factor of `ρ`, which keeps the program
/// linear in `(σ, W, S)`.
pub fn hmin_cond_with(rho: &Operator, a: &[&str], b: &[&str], eps: f64, opts: &SdpOptions) -> Result<EntropyResult> {
    check_epsilon(eps)?;
    if a.is_empty() {
        return Err(Error::BadPartition("empty system in conditional entropy".into()));
    }
    let all = join(a, b);
    let rab = rho.marginal(&all)?;
    rab.check_density()?;
    let da_full = rho.rows().select(a)?.dim();
    let b_sig = rho.rows().select(b)?;
    let db_full = b_sig.dim();
    if eps > 0.0 {
        let tr = rab.trace().re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::NotDensity(format!("smoothing needs a normalized state, trace {}", tr)));
        }
    }
    // the optimum is attained on the support of ρ_A ⊗ ρ_B, so solve there
    let va = support_basis(rab.marginal(a)?.matrix());
    let vb = support_basis(rab.marginal(b)?.matrix());
    let (da, db) = (va.ncols(), vb.ncols());
    if da * db > MAX_SDP_DIM {
        return Err(Error::TooLarge(da * db, MAX_SDP_DIM));
    }
    let lift = linalg::kron(&va, &vb);
    let m = lift.adjoint() * rab.matrix() * &lift;
    let m = &linalg::hermitian_part(&m);
    let (lmi, sig_vars, w_layout) = if eps == 0.0 {
        let (l, s) = plain_program(m, da, db);
        (l, s, None)
    } else {
        let (l, s, w) = smooth_program(m, da, db, eps);
        (l, s, Some(w))
    };
    let sol = lmi.solve(opts);
    let status = match sol.status {
        SdpStatus::Optimal => SolveStatus::Optimal,
        SdpStatus::MaxIterations => SolveStatus::MaxIterations,
        SdpStatus::Infeasible => SolveStatus::Infeasible,
    };
    // objective is −Tr σ: dual side gives feasible σ, primal side bounds it
    let tr_hi = -sol.dual_objective;
    let tr_lo = -sol.primal_objective;
    let to_bits = |t: f64| if t > 0.0 { -linalg::log2(t) } else { f64::INFINITY };
    // the two objectives may cross by rounding once the gap closes
    let (lower, upper) = (to_bits(tr_hi), to_bits(tr_lo));
    let (lower, upper) = (lower.min(upper), lower.max(upper));
    let value = to_bits(0.5 * (tr_hi + tr_lo));
    let sigma_c = assemble_hermitian(&sol.y, &sig_vars, db);
    let sigma = Operator::square(b_sig, &vb * sigma_c * vb.adjoint())?;
    debug_assert_eq!(sigma.matrix().nrows(), db_full);
    let smoothed = match w_layout {
        None => None,
        Some(layout) => {
            let w = CMat::from_fn(layout.n, layout.r, |p, c| {
                let (vr, vi) = layout.vars[p * layout.r + c];
                Complex64::new(sol.y[vr], sol.y[vi])
            });
            let full = &lift * w;
            debug_assert_eq!(full.nrows(), da_full * db_full);
            Some(Operator::square(rab.rows().clone(), &full * full.adjoint())?)
        }
    };
    Ok(EntropyResult {
        value,
        epsilon: eps,
        status,
        lower,
        upper,
        gap: (upper - lower).abs(),
        iterations: sol.iterations,
        certificate: Some(Certificate { sigma, smoothed }),
    })
}

/// Orthonormal basis of the support of a positive semidefinite matrix, as columns.
fn support_basis(m: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(m);
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > linalg::CLIP).collect();
    if keep.is_empty() {
        return linalg::identity(m.nrows());
    }
    CMat::from_fn(m.nrows(), keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Variable indices of a Hermitian `d×d` unknown: diagonal, then real and
/// imaginary parts of the strict upper triangle.
struct HermVars {
    diag: Vec<usize>,
    upper: Vec<(usize, usize, usize, usize)>,
}

fn hermitian_vars(lmi: &mut Lmi, d: usize, diag_cost: f64) -> HermVars {
    let diag = (0..d).map(|_| lmi.var(diag_cost)).collect();
    let mut upper = Vec::new();
    for k in 0..d {
        for l in k + 1..d {
            let vr = lmi.var(0.0);
            let vi = lmi.var(0.0);
            upper.push((k, l, vr, vi));
        }
    }
    HermVars { diag, upper }
}

/// Places `I_A ⊗ X` (X the Hermitian unknown) into `block` at offset 0.
fn place_identity_kron(lmi: &mut Lmi, vars: &HermVars, block: usize, da: usize, db: usize) {
    for a in 0..da {
        let o = a * db;
        for (k, &v) in vars.diag.iter().enumerate() {
            lmi.coeff(v, block, o + k, o + k, re(1.0));
        }
        for &(k, l, vr, vi) in &vars.upper {
            lmi.coeff(vr, block, o + k, o + l, re(1.0));
            lmi.coeff(vi, block, o + k, o + l, Complex64::new(0.0, 1.0));
        }
    }
}

fn assemble_hermitian(y: &[f64], vars: &HermVars, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for (k, &v) in vars.diag.iter().enumerate() {
        m[(k, k)] = re(y[v]);
    }
    for &(k, l, vr, vi) in &vars.upper {
        let z = Complex64::new(y[vr], y[vi]);
        m[(k, l)] = z;
        m[(l, k)] = z.conj();
    }
    m
}

fn plain_program(rho: &CMat, da: usize, db: usize) -> (Lmi, HermVars) {
    let n = da * db;
    let mut lmi = Lmi::new(&[n]);
    let sigma = hermitian_vars(&mut lmi, db, -1.0);
    place_identity_kron(&mut lmi, &sigma, 0, da, db);
    lmi.constant_block(0, &(-rho));
    (lmi, sigma)
}

struct WLayout {
    n: usize,
    r: usize,
    vars: Vec<(usize, usize)>,
}

fn smooth_program(rho: &CMat, da: usize, db: usize, eps: f64) -> (Lmi, HermVars, WLayout) {
    let n = da * db;
    let (vals, vecs) = linalg::eigh(rho);
    let support: Vec<usize> = (0..n).rev().filter(|&k| vals[k] > linalg::CLIP).collect();
    let r = support.len().max(1);
    // G = D^{1/2} V†, r × n
    let g = CMat::from_fn(r, n, |c, p| match support.get(c) {
        Some(&k) => vecs[(p, k)].conj() * libm::sqrt(vals[k]),
        None => re(0.0),
    });
    let target = libm::sqrt(1.0 - eps * eps);

    // 0: [[I⊗σ, W], [W†, I_r]]   1: [[S, W†], [W, I_n]]   2: 1 − Tr S   3: Re Tr(WG) − target
    let mut lmi = Lmi::new(&[n + r, r + n, 1, 1]);
    let sigma = hermitian_vars(&mut lmi, db, -1.0);
    place_identity_kron(&mut lmi, &sigma, 0, da, db);
    for c in 0..r {
        lmi.constant(0, n + c, n + c, re(1.0));
    }
    for p in 0..n {
        lmi.constant(1, r + p, r + p, re(1.0));
    }
    lmi.constant(2, 0, 0, re(1.0));
    lmi.constant(3, 0, 0, re(-target));

    let mut wvars = Vec::with_capacity(n * r);
    for p in 0..n {
        for c in 0..r {
            let vr = lmi.var(0.0);
            let vi = lmi.var(0.0);
            lmi.coeff(vr, 0, p, n + c, re(1.0));
            lmi.coeff(vi, 0, p, n + c, Complex64::new(0.0, 1.0));
            lmi.coeff(vr, 1, c, r + p, re(1.0));
            lmi.coeff(vi, 1, c, r + p, Complex64::new(0.0, -1.0));
            let gcp = g[(c, p)];
            lmi.coeff(vr, 3, 0, 0, re(gcp.re));
            lmi.coeff(vi, 3, 0, 0, re(-gcp.im));
            wvars.push((vr, vi));
        }
    }
    let s = hermitian_vars(&mut lmi, r, 0.0);
    for (k, &v) in s.diag.iter().enumerate() {
        lmi.coeff(v, 1, k, k, re(1.0));
        lmi.coeff(v, 2, 0, 0, re(-1.0));
    }
    for &(k, l, vr, vi) in &s.upper {
        lmi.coeff(vr, 1, k, l, re(1.0));
        lmi.coeff(vi, 1, k, l, Complex64::new(0.0, 1.0));
    }
    (lmi, sigma, WLayout { n, r, vars: wvars })
}

/// Purification of `ρ_AB` with a fresh environment label; returns the
/// reduced state on `A ∪ E` and the label.
fn complement_state(rho: &Operator, a: &[&str], b: &[&str]) -> Result<(Operator, String)> {
    let all = join(a, b);
    let rab = rho.marginal(&all)?;
    let env = fresh_label(rho.rows(), "E");
    let ket = purify(&rab, &env)?;
    let keep = join(a, &[env.as_str()]);
    Ok((ket.reduced(&keep)?, env))
}

/// `H_max^ε(A|B) = −H_min^ε(A|E)` on a purification.
pub fn hmax_cond(rho: &Operator, a: &[&str], b: &[&str], eps: f64) -> Result<EntropyResult> {
    let (rae, env) = complement_state(rho, a, b)?;
    Ok(hmin_cond(&rae, a, &[env.as_str()], eps)?.negated())
}

/// `I_min^ε(A>B) = −H_max^ε(A|B)`.
pub fn imin(rho: &Operator, a: &[&str], b: &[&str], eps: f64) -> Result<EntropyResult> {
    let (rae, env) = complement_state(rho, a, b)?;
    hmin_cond(&rae, a, &[env.as_str()], eps)
}

/// How `σ` is chosen in the Rényi-2 bound.
#[derive(Debug, Clone)]
pub enum SigmaPolicy {
    /// The normalized marginal `ρ_B`.
    Marginal,
    /// A caller-supplied state on `B`.
    Fixed(Operator),
    /// `k` safeguarded fixed-point rounds starting from the marginal.
    Alternating(usize),
}

#[derive(Debug, Clone)]
pub struct H2Bound {
    /// Lower bound on `H_2(A|B)` in bits.
    pub value: f64,
    /// The `σ` achieving it.
    pub sigma: Operator,
    pub rounds: usize,
}

/// `‖(I⊗σ^{-1/4}) ρ (I⊗σ^{-1/4})‖₂²` for `ρ` ordered `(A, B)`.
fn collision(rho: &CMat, sigma: &CMat, da: usize) -> f64 {
    let db = sigma.nrows();
    let s = sigma + linalg::identity(db) * re(SIGMA_REG);
    let g = linalg::psd_pow(&s, -0.25);
    let lift = linalg::kron(&linalg::identity(da), &g);
    let m = &lift * rho * &lift;
    m.norm_squared()
}

fn normalize(m: &CMat) -> CMat {
    let t = m.trace().re;
    m * re(1.0 / t)
}

/// Certified lower bound on the sandwiched Rényi-2 conditional entropy
/// `H_2(A|B)_ρ = −2 log₂ min_σ ‖(I⊗σ^{-1/4}) ρ (I⊗σ^{-1/4})‖₂`, evaluated at
/// the `σ` selected by `policy`.
pub fn h2_cond_bound(rho: &Operator, a: &[&str], b: &[&str], policy: &SigmaPolicy) -> Result<H2Bound> {
    let all = join(a, b);
    let rab = rho.marginal(&all)?;
    let da = rho.rows().select(a)?.dim();
    let b_sig = rho.rows().select(b)?;
    let m = rab.matrix();
    let marginal = || -> Result<CMat> { Ok(normalize(rab.marginal(b)?.matrix())) };
    let value_of = |f: f64| -linalg::log2(f);
    let (sigma, rounds) = match policy {
        SigmaPolicy::Marginal => (marginal()?, 0),
        SigmaPolicy::Fixed(s) => {
            let aligned = s.aligned_to(&Operator::identity(b_sig.clone()))?;
            aligned.check_density()?;
            (normalize(aligned.matrix()), 0)
        }
        SigmaPolicy::Alternating(k) => {
            let mut best = marginal()?;
            let mut best_f = collision(m, &best, da);
            for _ in 0..*k {
                let proposal = fixed_point_step(m, &best, da);
                let mut t = 1.0;
                let mut improved = false;
                while t > 1e-6 {
                    let cand = &best * re(1.0 - t) + &proposal * re(t);
                    let f = collision(m, &cand, da);
                    if f < best_f {
                        best = cand;
                        best_f = f;
                        improved = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            (best, *k)
        }
    };
    let f = collision(m, &sigma, da);
    Ok(H2Bound { value: value_of(f), sigma: Operator::square(b_sig, sigma)?, rounds })
}

/// `σ ← G^{2/3}/Tr` with `G = Tr_A[ρ (I⊗σ^{-1/2}) ρ]`, the stationarity
/// condition of the collision term when `σ` and `G` commute.
fn fixed_point_step(rho: &CMat, sigma: &CMat, da: usize) -> CMat {
    let db = sigma.nrows();
    let s = sigma + linalg::identity(db) * re(SIGMA_REG);
    let tau = linalg::psd_pow(&s, -0.5);
    let lift = linalg::kron(&linalg::identity(da), &tau);
    let full = rho * lift * rho;
    let mut g = CMat::zeros(db, db);
    for a in 0..da {
        g += full.view((a * db, a * db), (db, db));
    }
    normalize(&linalg::psd_pow(&g, 2.0 / 3.0))
}

/// `n`-fold tensor power with every label suffixed by the copy index.
pub fn tensor_power(rho: &Operator, n: usize) -> Result<Operator> {
    let labels = rho.rows().labels();
    let mut out: Option<Operator> = None;
    for copy in 0..n {
        let mut c = rho.clone();
        for l in &labels {
            c = c.relabel(l, &format!("{}#{}", l, copy))?;
        }
        out = Some(match out {
            None => c,
            Some(o) => o.tensor(&c)?,
        });
    }
    out.ok_or_else(|| Error::InvalidParameter("tensor power of order 0".into()))
}

/// `H_min^ε(Aⁿ|Bⁿ)/n − H(A|B)` for `n = 1..=n_max`.
pub fn qaep_gap(rho: &Operator, a: &[&str], b: &[&str], n_max: usize, eps: f64) -> Result<Vec<f64>> {
    let h = conditional_entropy(rho, a, b)?;
    let all = join(a, b);
    let base = rho.marginal(&all)?;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let pw = tensor_power(&base, n)?;
        let an: Vec<String> = (0..n).flat_map(|c| a.iter().map(move |l| format!("{}#{}", l, c))).collect();
        let bn: Vec<String> = (0..n).flat_map(|c| b.iter().map(move |l| format!("{}#{}", l, c))).collect();
        let ar: Vec<&str> = an.iter().map(|s| s.as_str()).collect();
        let br: Vec<&str> = bn.iter().map(|s| s.as_str()).collect();
        let hm = hmin_cond(&pw, &ar, &br, eps)?;
        out.push(hm.value / n as f64 - h);
    }
    Ok(out)
}

/// Exact value for states whose `A` part is pure and uncorrelated.
#[allow(dead_code)]
fn trivial(eps: f64) -> EntropyResult {
    EntropyResult::exact(0.0, eps)
}
