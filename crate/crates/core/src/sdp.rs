//! Dense primal-dual interior-point solver for block-diagonal Hermitian SDPs.
//!
//! Problems are stated as linear matrix inequalities in real variables `y`:
//!
//! ```text
//! maximize  bᵀy   subject to   F₀ⱼ + Σᵢ yᵢ Fᵢⱼ ⪰ 0   for every block j
//! ```
//!
//! Internally this is the dual standard form `Z = C − Σ yᵢAᵢ ⪰ 0` with
//! `C = F₀`, `Aᵢ = −Fᵢ`, paired with the primal
//! `minimize ⟨C, X⟩ s.t. ⟨Aᵢ, X⟩ = bᵢ, X ⪰ 0`. Search directions are HKM with
//! a Mehrotra predictor-corrector; the Schur complement is assembled from
//! the sparse coefficient entries.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::{self, re, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iter: usize,
    /// Relative gap and infeasibility target.
    pub tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Variables of the LMI form.
    pub y: Vec<f64>,
    /// Slack blocks `F₀ + Σ yᵢFᵢ`.
    pub z: Vec<CMat>,
    /// Dual certificate blocks.
    pub x: Vec<CMat>,
    /// `⟨C, X⟩`, an upper bound on the optimum when `X` is feasible.
    pub primal_objective: f64,
    /// `bᵀy`, a lower bound on the optimum when `Z ⪰ 0`.
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
            / (1.0 + self.primal_objective.abs() + self.dual_objective.abs())
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    row: usize,
    col: usize,
    value: Complex64,
}

/// Builder for an LMI problem.
#[derive(Debug, Clone)]
pub struct Lmi {
    blocks: Vec<usize>,
    constant: Vec<CMat>,
    objective: Vec<f64>,
    // per variable: (block, entries of Aᵢ = −Fᵢ, upper triangle only)
    coeffs: Vec<Vec<(usize, Vec<Entry>)>>,
}

impl Lmi {
    pub fn new(blocks: &[usize]) -> Self {
        Self {
            blocks: blocks.to_vec(),
            constant: blocks.iter().map(|&n| CMat::zeros(n, n)).collect(),
            objective: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// New variable with objective coefficient `b`.
    pub fn var(&mut self, b: f64) -> usize {
        self.objective.push(b);
        self.coeffs.push(Vec::new());
        self.objective.len() - 1
    }

    /// Adds `value` at `(row, col)` of `F₀` in `block`, mirrored to keep it Hermitian.
    pub fn constant(&mut self, block: usize, row: usize, col: usize, value: Complex64) {
        let m = &mut self.constant[block];
        if row == col {
            m[(row, row)] += re(value.re);
        } else {
            m[(row, col)] += value;
            m[(col, row)] += value.conj();
        }
    }

    pub fn constant_block(&mut self, block: usize, value: &CMat) {
        self.constant[block] += linalg::hermitian_part(value);
    }

    /// Adds `value` at `(row, col)` of `Fᵢ` in `block`, mirrored.
    pub fn coeff(&mut self, var: usize, block: usize, row: usize, col: usize, value: Complex64) {
        let (row, col, value) = if row <= col { (row, col, value) } else { (col, row, value.conj()) };
        let value = if row == col { re(value.re) } else { value };
        let list = &mut self.coeffs[var];
        let pos = match list.iter().position(|(b, _)| *b == block) {
            Some(p) => p,
            None => {
                list.push((block, Vec::new()));
                list.len() - 1
            }
        };
        let entries = &mut list[pos].1;
        if let Some(e) = entries.iter_mut().find(|e| e.row == row && e.col == col) {
            e.value -= value;
        } else {
            entries.push(Entry { row, col, value: -value });
        }
    }

    pub fn solve(&self, opts: &SdpOptions) -> SdpSolution {
        Solver::new(self).run(opts)
    }
}

/// Full (mirrored) entry list of one coefficient matrix within a block.
struct Expanded {
    var: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

struct Solver<'a> {
    p: &'a Lmi,
    per_block: Vec<Vec<Expanded>>,
    n_total: usize,
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    // Re Tr(a b) for Hermitian a, b
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn herm(m: CMat) -> CMat {
    linalg::hermitian_part(&m)
}

impl<'a> Solver<'a> {
    fn new(p: &'a Lmi) -> Self {
        let mut per_block: Vec<Vec<Expanded>> = p.blocks.iter().map(|_| Vec::new()).collect();
        for (var, list) in p.coeffs.iter().enumerate() {
            for (block, entries) in list {
                let mut full = Vec::with_capacity(2 * entries.len());
                for e in entries {
                    full.push((e.row, e.col, e.value));
                    if e.row != e.col {
                        full.push((e.col, e.row, e.value.conj()));
                    }
                }
                per_block[*block].push(Expanded { var, entries: full });
            }
        }
        Self { p, per_block, n_total: p.blocks.iter().sum() }
    }

    /// `𝒜(M)ᵢ = Re Tr(Aᵢ M)` summed over blocks.
    fn a_op(&self, ms: &[CMat]) -> DVector<f64> {
        let mut out = DVector::zeros(self.p.num_vars());
        for (b, list) in self.per_block.iter().enumerate() {
            let m = &ms[b];
            for ex in list {
                let mut s = 0.0;
                for &(r, c, v) in &ex.entries {
                    s += (v * m[(c, r)]).re;
                }
                out[ex.var] += s;
            }
        }
        out
    }

    /// `𝒜*(y) = Σ yᵢ Aᵢ` per block.
    fn a_adj(&self, y: &DVector<f64>) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.p.blocks.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (b, list) in self.per_block.iter().enumerate() {
            for ex in list {
                let yi = y[ex.var];
                if yi == 0.0 {
                    continue;
                }
                for &(r, c, v) in &ex.entries {
                    out[b][(r, c)] += v * yi;
                }
            }
        }
        out
    }

    /// `Mᵢⱼ = Re Tr(Aᵢ X Aⱼ Z⁻¹)`.
    fn schur(&self, x: &[CMat], zinv: &[CMat]) -> DMatrix<f64> {
        let m = self.p.num_vars();
        let mut out = DMatrix::zeros(m, m);
        for (b, list) in self.per_block.iter().enumerate() {
            let (xb, zb) = (&x[b], &zinv[b]);
            for (u, eu) in list.iter().enumerate() {
                for ev in &list[u..] {
                    let mut s = Complex64::new(0.0, 0.0);
                    for &(p, q, a) in &eu.entries {
                        for &(s_, t, bb) in &ev.entries {
                            s += a * bb * xb[(q, s_)] * zb[(t, p)];
                        }
                    }
                    out[(eu.var, ev.var)] += s.re;
                    if eu.var != ev.var {
                        out[(ev.var, eu.var)] += s.re;
                    }
                }
            }
        }
        out
    }

    fn run(&self, opts: &SdpOptions) -> SdpSolution {
        let p = self.p;
        let nb = p.blocks.len();
        let m = p.num_vars();
        let b = DVector::from_vec(p.objective.clone());
        let norm_b = b.norm();
        let norm_c: f64 = libm::sqrt(p.constant.iter().map(|c| c.norm_squared()).sum::<f64>());

        // starting point
        let mut x: Vec<CMat> = Vec::with_capacity(nb);
        let mut z: Vec<CMat> = Vec::with_capacity(nb);
        for (j, &n) in p.blocks.iter().enumerate() {
            let nf = n as f64;
            let mut amax = 0.0f64;
            let mut ratio = 0.0f64;
            for ex in &self.per_block[j] {
                let fro: f64 = libm::sqrt(ex.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>());
                amax = amax.max(fro);
                ratio = ratio.max((1.0 + p.objective[ex.var].abs()) / (1.0 + fro));
            }
            let xi = 10.0f64.max(libm::sqrt(nf)).max(nf * ratio);
            let eta = 10.0f64.max(libm::sqrt(nf)).max((1.0 + amax.max(p.constant[j].norm())) / libm::sqrt(nf));
            x.push(linalg::identity(n) * re(xi));
            z.push(linalg::identity(n) * re(eta));
        }
        let mut y = DVector::<f64>::zeros(m);

        let mut status = SdpStatus::MaxIterations;
        let mut iterations = 0;
        let mut best: Option<(f64, Vec<f64>, Vec<CMat>, Vec<CMat>, f64, f64, f64, f64)> = None;
        let mut last = (0.0, 0.0, f64::INFINITY, f64::INFINITY);

        for it in 0..=opts.max_iter {
            iterations = it;
            let aty = self.a_adj(&y);
            let rd: Vec<CMat> = (0..nb).map(|j| &p.constant[j] - &aty[j] - &z[j]).collect();
            let rp = &b - self.a_op(&x);
            let pobj: f64 = (0..nb).map(|j| inner(&p.constant[j], &x[j])).sum();
            let dobj = b.dot(&y);
            let pinf = rp.norm() / (1.0 + norm_b);
            let dinf = libm::sqrt(rd.iter().map(|r| r.norm_squared()).sum::<f64>()) / (1.0 + norm_c);
            let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            last = (pobj, dobj, pinf, dinf);

            let merit = relgap.max(pinf).max(dinf);
            if best.as_ref().map_or(true, |bst| merit < bst.7) {
                best = Some((pobj, y.iter().copied().collect(), z.clone(), x.clone(), dobj, pinf, dinf, merit));
            }
            if relgap < opts.tol && pinf < opts.tol && dinf < opts.tol {
                status = SdpStatus::Optimal;
                break;
            }
            let ynorm = y.amax();
            let xnorm = x.iter().map(linalg::max_abs).fold(0.0, f64::max);
            if ynorm > 1e12 || xnorm > 1e12 {
                status = SdpStatus::Infeasible;
                break;
            }
            if it == opts.max_iter {
                break;
            }

            let zinv: Vec<CMat> = match z.iter().map(|zj| zj.clone().cholesky().map(|c| c.inverse())).collect() {
                Some(v) => v,
                None => break,
            };
            let mu: f64 = (0..nb).map(|j| inner(&x[j], &z[j])).sum::<f64>() / self.n_total as f64;
            let schur = self.schur(&x, &zinv);
            let chol = {
                let mut reg = 0.0;
                loop {
                    let mut mm = schur.clone();
                    if reg > 0.0 {
                        for i in 0..m {
                            mm[(i, i)] += reg * (1.0 + schur[(i, i)].abs());
                        }
                    }
                    if let Some(c) = mm.cholesky() {
                        break Some(c);
                    }
                    reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
                    if reg > 1e-4 {
                        break None;
                    }
                }
            };
            let Some(chol) = chol else { break };
            drop(schur);

            let xrz: Vec<CMat> = (0..nb).map(|j| &x[j] * &rd[j] * &zinv[j]).collect();
            let a_xrz = self.a_op(&xrz);

            let direction = |k: &[CMat]| -> (DVector<f64>, Vec<CMat>, Vec<CMat>) {
                let kz: Vec<CMat> = (0..nb).map(|j| &k[j] * &zinv[j]).collect();
                let rhs = &b + &a_xrz - self.a_op(&kz);
                let dy = chol.solve(&rhs);
                let ady = self.a_adj(&dy);
                let dz: Vec<CMat> = (0..nb).map(|j| &rd[j] - &ady[j]).collect();
                let dx: Vec<CMat> = (0..nb)
                    .map(|j| herm(&kz[j] - &x[j] * &dz[j] * &zinv[j]) - &x[j])
                    .collect();
                (dy, dx, dz)
            };

            // predictor
            let zero: Vec<CMat> = p.blocks.iter().map(|&n| CMat::zeros(n, n)).collect();
            let (_, dxa, dza) = direction(&zero);
            let ap = max_step(&x, &dxa).min(1.0);
            let ad = max_step(&z, &dza).min(1.0);
            let mu_aff: f64 = (0..nb)
                .map(|j| inner(&(&x[j] + &dxa[j] * re(ap)), &(&z[j] + &dza[j] * re(ad))))
                .sum::<f64>()
                / self.n_total as f64;
            let sigma = libm::pow((mu_aff / mu).clamp(0.0, 1.0), 3.0);

            // corrector
            let k: Vec<CMat> = (0..nb)
                .map(|j| linalg::identity(p.blocks[j]) * re(sigma * mu) - &dxa[j] * &dza[j])
                .collect();
            let (dy, dx, dz) = direction(&k);
            let gamma = 0.9 + 0.09 * ap.min(ad);
            let ap = (gamma * max_step(&x, &dx)).min(1.0);
            let ad = (gamma * max_step(&z, &dz)).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                break;
            }
            for j in 0..nb {
                x[j] = herm(&x[j] + &dx[j] * re(ap));
                z[j] = herm(&z[j] + &dz[j] * re(ad));
            }
            y += dy * ad;
        }

        let (pobj, dobj, pinf, dinf) = last;
        if status == SdpStatus::Optimal {
            return SdpSolution {
                status,
                y: y.iter().copied().collect(),
                z,
                x,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                iterations,
            };
        }
        let (bp, by, bz, bx, bd, bpi, bdi, _) = best.expect("at least one iterate");
        SdpSolution {
            status,
            y: by,
            z: bz,
            x: bx,
            primal_objective: bp,
            dual_objective: bd,
            primal_infeasibility: bpi,
            dual_infeasibility: bdi,
            iterations,
        }
    }
}

/// Largest `α` with `m + α d ⪰ 0` (infinite when `d` is PSD).
fn max_step(m: &[CMat], d: &[CMat]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (mj, dj) in m.iter().zip(d) {
        let Some(chol) = mj.clone().cholesky() else { return 0.0 };
        let l = chol.l();
        let linv = match l.clone().try_inverse() {
            Some(v) => v,
            None => return 0.0,
        };
        let w = &linv * dj * linv.adjoint();
        let lo = linalg::eigvalsh(&w).first().copied().unwrap_or(0.0);
        if lo < 0.0 {
            alpha = alpha.min(-1.0 / lo);
        }
    }
    alpha
}
