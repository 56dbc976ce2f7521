//! Max-based splitting of a distribution into two independent parts, and
//! the isometry that carries it over to a quantum register.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::{re, CMat};
use crate::tensor::{Ket, Operator, Signature};

/// Probabilities below this are compacted out before splitting.
pub const ZERO_MASS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    /// Distribution being split, in alphabet order.
    pub base: Vec<f64>,
    pub theta: f64,
    pub p_u: Vec<f64>,
    pub p_v: Vec<f64>,
    /// Cumulative distribution of `V`; defined even where `p_u` vanishes.
    pub f_v: Vec<f64>,
    /// Indices of the symbols with positive mass.
    pub support: Vec<usize>,
}

impl SplitSpec {
    /// Law of `max(U, V)` under `p_u × p_v`.
    pub fn pushforward(&self) -> Vec<f64> {
        let n = self.base.len();
        let mut out = vec![0.0; n];
        for (u, pu) in self.p_u.iter().enumerate() {
            for (v, pv) in self.p_v.iter().enumerate() {
                out[u.max(v)] += pu * pv;
            }
        }
        out
    }

    /// `P(max(u, V) = a)` for every `a`.
    pub fn conditional(&self, u: usize) -> Vec<f64> {
        (0..self.base.len())
            .map(|a| {
                if a == u {
                    self.f_v[u]
                } else if a > u {
                    self.p_v[a]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn differences(f: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    f.iter()
        .map(|&x| {
            let d = (x - prev).max(0.0);
            prev = x;
            d
        })
        .collect()
}

/// Splits `base` at `theta` with `F_U = θF + 1 − θ` and `F_V = F/F_U`.
pub fn split_distributions(base: &[f64], theta: f64) -> Result<SplitSpec> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta {} outside [0, 1]", theta)));
    }
    if base.is_empty() || base.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter("distribution must be non-empty and non-negative".into()));
    }
    let total: f64 = base.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("distribution sums to {}", total)));
    }
    let support: Vec<usize> = (0..base.len()).filter(|&k| base[k] > ZERO_MASS).collect();
    let compact: Vec<f64> = support.iter().map(|&k| base[k]).collect();
    let mut f_a = cumulative(&compact);
    if let Some(last) = f_a.last_mut() {
        *last = 1.0;
    }
    let f_u: Vec<f64> = f_a.iter().map(|f| theta * f + 1.0 - theta).collect();
    let f_vc: Vec<f64> = f_a.iter().zip(&f_u).map(|(a, u)| a / u).collect();
    let (pu_c, pv_c) = (differences(&f_u), differences(&f_vc));

    let n = base.len();
    let (mut p_u, mut p_v, mut f_v) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (c, &k) in support.iter().enumerate() {
        p_u[k] = pu_c[c];
        p_v[k] = pv_c[c];
    }
    // cumulative values carry over across compacted symbols
    let mut c = 0;
    let mut last = 0.0;
    for (k, slot) in f_v.iter_mut().enumerate() {
        if c < support.len() && support[c] == k {
            last = f_vc[c];
            c += 1;
        }
        *slot = last;
    }
    Ok(SplitSpec { base: base.to_vec(), theta, p_u, p_v, f_v, support })
}

#[derive(Debug, Clone)]
pub struct SplitIsometry {
    pub theta: f64,
    /// Split of the ordered distribution.
    pub spec: SplitSpec,
    /// `order[k]` is the basis index of the `k`-th symbol.
    pub order: Vec<usize>,
    /// Isometry from the split register onto the two output legs.
    pub operator: Operator,
}

impl SplitIsometry {
    /// Applies the split to `omega`; the two output legs come last.
    pub fn apply(&self, omega: &Ket) -> Result<Ket> {
        omega.apply(&self.operator)
    }
}

/// Basis weights of `system` in `omega`, i.e. the diagonal of its reduced state.
pub fn basis_weights(omega: &Ket, system: &str) -> Result<Vec<f64>> {
    let r = omega.reduced(&[system])?;
    Ok((0..r.matrix().nrows()).map(|k| r.matrix()[(k, k)].re.max(0.0)).collect())
}

/// Symbols sorted by weight, largest first, ties by index.
pub fn weight_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// The splitting isometry on leg `system` of `omega`, mapping it onto
/// `(out0, out1)`:
/// `√P(a)|a⟩ ↦ Σ_{max(u,v)=a} √(P_U(u)P_V(v)) |u⟩|v⟩`.
/// Symbols of zero weight go to `|a⟩|a⟩` so the map is a full isometry.
pub fn split_isometry(omega: &Ket, system: &str, out0: &str, out1: &str, theta: f64) -> Result<SplitIsometry> {
    let d = omega.signature().dim_of(system)?;
    let norm = omega.norm();
    let mut weights = basis_weights(omega, system)?;
    for w in weights.iter_mut() {
        *w /= norm * norm;
    }
    let order = weight_order(&weights);
    let mut ordered: Vec<f64> = order.iter().map(|&k| weights[k]).collect();
    let s: f64 = ordered.iter().sum();
    for w in ordered.iter_mut() {
        *w /= s;
    }
    let spec = split_distributions(&ordered, theta)?;
    let mut m = CMat::zeros(d * d, d);
    for (pos, &sym) in order.iter().enumerate() {
        let pa = ordered[pos];
        if pa <= ZERO_MASS {
            m[(sym * d + sym, sym)] = re(1.0);
            continue;
        }
        for u in 0..=pos {
            for v in 0..=pos {
                if u.max(v) != pos {
                    continue;
                }
                let amp = libm::sqrt(spec.p_u[u] * spec.p_v[v] / pa);
                if amp > 0.0 {
                    m[(order[u] * d + order[v], sym)] = re(amp);
                }
            }
        }
    }
    let rows = Signature::new([(out0, d), (out1, d)])?;
    let operator = Operator::new(rows, Signature::single(system, d)?, m)?;
    Ok(SplitIsometry { theta, spec, order, operator })
}

/// Purified distances between the dilated split states at adjacent grid
/// points. The channel acts on its input legs of `omega`; its environment
/// is labeled `env`.
pub fn continuity_probe(
    omega: &Ket,
    system: &str,
    channel: &Channel,
    env: &str,
    grid: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    let dil = channel.dilate(env)?;
    let state = |theta: f64| -> Result<Ket> {
        let iso = split_isometry(omega, system, &format!("{}0", system), &format!("{}1", system), theta)?;
        dil.apply_ket(&iso.apply(omega)?)
    };
    let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
    let mut prev: Option<(f64, Ket)> = None;
    for &t in grid {
        let k = state(t)?;
        if let Some((t0, k0)) = prev {
            let ov = k0.inner(&k)?.norm();
            out.push((t0, t, libm::sqrt((1.0 - ov * ov).max(0.0))));
        }
        prev = Some((t, k));
    }
    Ok(out)
}
