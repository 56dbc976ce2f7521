//! Labeled states and operators on named tensor factors.
//!
//! Flat indices follow the Kronecker convention: the first subsystem of a
//! signature is the most significant digit. Operations that move legs around
//! always say where the legs end up; nothing is reordered silently.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, CVec};

/// Tolerances for the density and isometry flags.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NEGATIVE_EIG_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subsystem {
    pub name: String,
    pub dim: usize,
}

/// Ordered list of uniquely named subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature {
    systems: Vec<Subsystem>,
}

impl Signature {
    pub fn new<S: AsRef<str>>(systems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out = Signature::default();
        for (name, dim) in systems {
            out.push(name.as_ref(), dim)?;
        }
        Ok(out)
    }

    pub fn single(name: &str, dim: usize) -> Result<Self> {
        Self::new([(name, dim)])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::ZeroDimension(name.to_string()));
        }
        if self.contains(name) {
            return Err(Error::LabelCollision(name.to_string()));
        }
        self.systems.push(Subsystem { name: name.to_string(), dim });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn systems(&self) -> &[Subsystem] {
        &self.systems
    }

    pub fn labels(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.systems.iter().map(|s| s.dim).collect()
    }

    /// Total dimension; 1 for the empty signature.
    pub fn dim(&self) -> usize {
        self.systems.iter().map(|s| s.dim).product()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.name == name)
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        self.position(name)
            .map(|k| self.systems[k].dim)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Signature) -> Result<Signature> {
        let mut out = self.clone();
        for s in &other.systems {
            out.push(&s.name, s.dim)?;
        }
        Ok(out)
    }

    /// Sub-signature in the order given by `names`.
    pub fn select(&self, names: &[&str]) -> Result<Signature> {
        let mut out = Signature::default();
        for n in names {
            out.push(n, self.dim_of(n)?)?;
        }
        Ok(out)
    }

    /// Everything except `names`, original order kept.
    pub fn without(&self, names: &[&str]) -> Result<Signature> {
        for n in names {
            self.dim_of(n)?;
        }
        Ok(Signature {
            systems: self
                .systems
                .iter()
                .filter(|s| !names.contains(&s.name.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Signature> {
        let k = self.position(from).ok_or_else(|| Error::UnknownLabel(from.to_string()))?;
        if from != to && self.contains(to) {
            return Err(Error::LabelCollision(to.to_string()));
        }
        let mut out = self.clone();
        out.systems[k].name = to.to_string();
        Ok(out)
    }

    /// True when both hold the same labels with the same dims, in any order.
    pub fn same_systems(&self, other: &Signature) -> bool {
        self.len() == other.len()
            && self.systems.iter().all(|s| other.dim_of(&s.name).ok() == Some(s.dim))
    }

    /// Positions of `names` inside `self`, erroring on unknown or repeated labels.
    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let k = self.position(n).ok_or_else(|| Error::UnknownLabel(n.to_string()))?;
            if out.contains(&k) {
                return Err(Error::LabelCollision(n.to_string()));
            }
            out.push(k);
        }
        Ok(out)
    }

    /// Positions of `names` followed by the remaining positions in order.
    fn front_permutation(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut perm = self.positions(names)?;
        for k in 0..self.len() {
            if !perm.contains(&k) {
                perm.push(k);
            }
        }
        Ok(perm)
    }

    fn permuted(&self, perm: &[usize]) -> Signature {
        Signature { systems: perm.iter().map(|&k| self.systems[k].clone()).collect() }
    }
}

impl core::fmt::Display for Signature {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("(")?;
        for (k, s) in self.systems.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", s.name, s.dim)?;
        }
        f.write_str(")")
    }
}

/// For each flat index in the permuted layout, the flat index it came from.
/// New leg `j` is old leg `perm[j]`.
fn gather_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let mut old_stride = alloc::vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        old_stride[k] = old_stride[k + 1] * dims[k + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&k| dims[k]).collect();
    let new_stride: Vec<usize> = perm.iter().map(|&k| old_stride[k]).collect();
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = alloc::vec![0usize; n];
    let mut offset = 0usize;
    for _ in 0..total {
        out.push(offset);
        for k in (0..n).rev() {
            digits[k] += 1;
            offset += new_stride[k];
            if digits[k] < new_dims[k] {
                break;
            }
            offset -= new_stride[k] * new_dims[k];
            digits[k] = 0;
        }
    }
    out
}

fn is_identity_perm(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(a, &b)| a == b)
}

/// Vector on a labeled tensor product.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    sig: Signature,
    amp: CVec,
}

impl Ket {
    pub fn new(sig: Signature, amp: CVec) -> Result<Self> {
        if amp.len() != sig.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for signature {}",
                amp.len(),
                sig
            )));
        }
        Ok(Self { sig, amp })
    }

    pub fn from_slice(sig: Signature, amp: &[Complex64]) -> Result<Self> {
        Self::new(sig, CVec::from_column_slice(amp))
    }

    /// Computational basis vector with one digit per subsystem.
    pub fn basis(sig: Signature, digits: &[usize]) -> Result<Self> {
        if digits.len() != sig.len() {
            return Err(Error::DimensionMismatch(format!("{} digits for {}", digits.len(), sig)));
        }
        let mut idx = 0;
        for (d, s) in digits.iter().zip(sig.systems()) {
            if *d >= s.dim {
                return Err(Error::DimensionMismatch(format!("digit {} on {}", d, s.name)));
            }
            idx = idx * s.dim + d;
        }
        let mut amp = CVec::zeros(sig.dim());
        amp[idx] = re(1.0);
        Ok(Self { sig, amp })
    }

    /// The trivial state on no subsystems.
    pub fn scalar(c: Complex64) -> Self {
        Self { sig: Signature::empty(), amp: CVec::from_element(1, c) }
    }

    /// `Σ_k |k⟩|k⟩ / √d` on `(a, b)`.
    pub fn max_entangled(a: &str, b: &str, d: usize) -> Result<Self> {
        let sig = Signature::new([(a, d), (b, d)])?;
        let mut amp = CVec::zeros(d * d);
        let c = re(1.0 / libm::sqrt(d as f64));
        for k in 0..d {
            amp[k * d + k] = c;
        }
        Ok(Self { sig, amp })
    }

    /// Haar-random unit vector.
    pub fn random<R: Rng + ?Sized>(sig: Signature, rng: &mut R) -> Self {
        let n = sig.dim();
        let v = CVec::from_fn(n, |_, _| gaussian(rng));
        let norm = v.norm();
        Self { sig, amp: v / re(norm) }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    pub fn scale(&self, c: Complex64) -> Ket {
        Ket { sig: self.sig.clone(), amp: &self.amp * c }
    }

    pub fn normalized(&self) -> Ket {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scale(re(1.0 / n))
    }

    pub fn tensor(&self, other: &Ket) -> Result<Ket> {
        Ok(Ket { sig: self.sig.concat(&other.sig)?, amp: self.amp.kronecker(&other.amp) })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Ket> {
        Ok(Ket { sig: self.sig.relabel(from, to)?, amp: self.amp.clone() })
    }

    /// Reorders legs to `order`, which must list every label once.
    pub fn permuted(&self, order: &[&str]) -> Result<Ket> {
        if order.len() != self.sig.len() {
            return Err(Error::BadPartition(format!("{:?} vs {}", order, self.sig)));
        }
        let perm = self.sig.positions(order)?;
        Ok(self.permute_by(&perm))
    }

    fn permute_by(&self, perm: &[usize]) -> Ket {
        if is_identity_perm(perm) {
            return self.clone();
        }
        let map = gather_map(&self.sig.dims(), perm);
        let amp = CVec::from_iterator(map.len(), map.iter().map(|&k| self.amp[k]));
        Ket { sig: self.sig.permuted(perm), amp }
    }

    /// Aligns `self` to the leg order of `like`, which must hold the same systems.
    pub fn aligned_to(&self, like: &Signature) -> Result<Ket> {
        if !self.sig.same_systems(like) {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.sig, like)));
        }
        self.permuted(&like.labels())
    }

    /// Reshapes into a matrix with `rows` legs as row index and the remaining
    /// legs (original order) as column index.
    pub fn matricize(&self, rows: &[&str]) -> Result<(CMat, Signature, Signature)> {
        let perm = self.sig.front_permutation(rows)?;
        let moved = self.permute_by(&perm);
        let row_sig = self.sig.select(rows)?;
        let col_sig = self.sig.without(rows)?;
        let (r, c) = (row_sig.dim(), col_sig.dim());
        let m = DMatrix::from_fn(r, c, |i, j| moved.amp[i * c + j]);
        Ok((m, row_sig, col_sig))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> Operator {
        Operator {
            rows: self.sig.clone(),
            cols: self.sig.clone(),
            mat: &self.amp * self.amp.adjoint(),
        }
    }

    /// Reduced density operator on `keep`, in that order.
    pub fn reduced(&self, keep: &[&str]) -> Result<Operator> {
        let (m, sig, _) = self.matricize(keep)?;
        Ok(Operator { rows: sig.clone(), cols: sig, mat: &m * m.adjoint() })
    }

    /// `⟨self|other⟩`, matching legs by label.
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        let o = other.aligned_to(&self.sig)?;
        Ok(self.amp.dotc(&o.amp))
    }

    /// `‖self − other‖` with legs matched by label.
    pub fn distance(&self, other: &Ket) -> Result<f64> {
        let o = other.aligned_to(&self.sig)?;
        Ok((&self.amp - &o.amp).norm())
    }

    /// The map that bends the `domain` legs into inputs:
    /// `|x_i⟩|y_j⟩ ↦ |y_j⟩⟨x_i|` in the computational basis.
    pub fn op_map(&self, domain: &[&str], codomain: &[&str]) -> Result<Operator> {
        if domain.len() + codomain.len() != self.sig.len() {
            return Err(Error::BadPartition(format!(
                "{:?} -> {:?} on {}",
                domain, codomain, self.sig
            )));
        }
        let mut all: Vec<&str> = domain.to_vec();
        all.extend_from_slice(codomain);
        self.sig.positions(&all)?;
        let (m, x, _) = self.matricize(domain)?;
        let y = self.sig.select(codomain)?;
        // matricize keeps the codomain legs in signature order; realign them.
        let rest_order = self.sig.without(domain)?;
        let m = if rest_order.labels() == codomain {
            m
        } else {
            let tmp = Operator { rows: x.clone(), cols: rest_order, mat: m };
            tmp.permuted_cols(codomain)?.mat
        };
        Ok(Operator { rows: y, cols: x, mat: m.transpose() })
    }

    /// Applies `op` (cols → rows) to the legs named by `op.cols()`.
    ///
    /// The output places untouched legs first, in their original order,
    /// followed by `op.rows()`. When `op` maps a leg list onto the same
    /// list, the original leg order is kept instead.
    pub fn apply(&self, op: &Operator) -> Result<Ket> {
        let xs = op.cols.labels();
        for s in op.cols.systems() {
            let d = self.sig.dim_of(&s.name)?;
            if d != s.dim {
                return Err(Error::DimensionMismatch(format!("leg {}: {} vs {}", s.name, d, s.dim)));
            }
        }
        let perm = self.sig.back_permutation(&xs)?;
        let moved = self.permute_by(&perm);
        let rest = self.sig.without(&xs)?;
        let (dr, dx, dy) = (rest.dim(), op.cols.dim(), op.rows.dim());
        let m = DMatrix::from_fn(dr, dx, |r, x| moved.amp[r * dx + x]);
        let out = m * op.mat.transpose();
        let amp = CVec::from_fn(dr * dy, |k, _| out[(k / dy, k % dy)]);
        let ket = Ket { sig: rest.concat(&op.rows)?, amp };
        if op.rows == op.cols {
            ket.permuted(&self.sig.labels())
        } else {
            Ok(ket)
        }
    }

    /// Pads leg `name` to dimension `dim` with zero amplitudes.
    pub fn pad_leg(&self, name: &str, dim: usize) -> Result<Ket> {
        let old = self.sig.dim_of(name)?;
        if dim < old {
            return Err(Error::DimensionMismatch(format!("cannot shrink {} from {} to {}", name, old, dim)));
        }
        let embed = Operator::new(
            Signature::single(name, dim)?,
            Signature::single(name, old)?,
            DMatrix::from_fn(dim, old, |i, j| if i == j { re(1.0) } else { re(0.0) }),
        )?;
        self.apply(&embed)
    }
}

impl Signature {
    /// Remaining positions in order, followed by the positions of `names`.
    fn back_permutation(&self, names: &[&str]) -> Result<Vec<usize>> {
        let tail = self.positions(names)?;
        let mut perm: Vec<usize> = (0..self.len()).filter(|k| !tail.contains(k)).collect();
        perm.extend(tail);
        Ok(perm)
    }
}

/// Standard complex Gaussian with `E|z|² = 1`.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * core::f64::consts::FRAC_1_SQRT_2
}

/// Linear map between labeled spaces (`cols → rows`).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    rows: Signature,
    cols: Signature,
    mat: CMat,
}

impl Operator {
    pub fn new(rows: Signature, cols: Signature, mat: CMat) -> Result<Self> {
        if mat.nrows() != rows.dim() || mat.ncols() != cols.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for {} <- {}",
                mat.nrows(),
                mat.ncols(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, mat })
    }

    /// Square operator with identical row and column signatures.
    pub fn square(sig: Signature, mat: CMat) -> Result<Self> {
        Self::new(sig.clone(), sig, mat)
    }

    pub fn identity(sig: Signature) -> Self {
        let n = sig.dim();
        Self { rows: sig.clone(), cols: sig, mat: linalg::identity(n) }
    }

    pub fn maximally_mixed(sig: Signature) -> Self {
        let n = sig.dim();
        Self { rows: sig.clone(), cols: sig, mat: linalg::identity(n) * re(1.0 / n as f64) }
    }

    pub fn rows(&self) -> &Signature {
        &self.rows
    }

    pub fn cols(&self) -> &Signature {
        &self.cols
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn dagger(&self) -> Operator {
        Operator { rows: self.cols.clone(), cols: self.rows.clone(), mat: self.mat.adjoint() }
    }

    pub fn scale(&self, c: Complex64) -> Operator {
        Operator { rows: self.rows.clone(), cols: self.cols.clone(), mat: &self.mat * c }
    }

    /// `self ∘ other`; `other.rows()` must equal `self.cols()` exactly.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!("{} after {}", self.cols, other.rows)));
        }
        Ok(Operator { rows: self.rows.clone(), cols: other.cols.clone(), mat: &self.mat * &other.mat })
    }

    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        Ok(Operator {
            rows: self.rows.concat(&other.rows)?,
            cols: self.cols.concat(&other.cols)?,
            mat: linalg::kron(&self.mat, &other.mat),
        })
    }

    /// Renames a label on both sides.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Operator> {
        let rows = if self.rows.contains(from) { self.rows.relabel(from, to)? } else { self.rows.clone() };
        let cols = if self.cols.contains(from) { self.cols.relabel(from, to)? } else { self.cols.clone() };
        if rows == self.rows && cols == self.cols && from != to {
            return Err(Error::UnknownLabel(from.to_string()));
        }
        Ok(Operator { rows, cols, mat: self.mat.clone() })
    }

    pub fn permuted_rows(&self, order: &[&str]) -> Result<Operator> {
        if order.len() != self.rows.len() {
            return Err(Error::BadPartition(format!("{:?} vs {}", order, self.rows)));
        }
        let perm = self.rows.positions(order)?;
        if is_identity_perm(&perm) {
            return Ok(self.clone());
        }
        let map = gather_map(&self.rows.dims(), &perm);
        let mat = DMatrix::from_fn(self.mat.nrows(), self.mat.ncols(), |i, j| self.mat[(map[i], j)]);
        Ok(Operator { rows: self.rows.permuted(&perm), cols: self.cols.clone(), mat })
    }

    pub fn permuted_cols(&self, order: &[&str]) -> Result<Operator> {
        if order.len() != self.cols.len() {
            return Err(Error::BadPartition(format!("{:?} vs {}", order, self.cols)));
        }
        let perm = self.cols.positions(order)?;
        if is_identity_perm(&perm) {
            return Ok(self.clone());
        }
        let map = gather_map(&self.cols.dims(), &perm);
        let mat = DMatrix::from_fn(self.mat.nrows(), self.mat.ncols(), |i, j| self.mat[(i, map[j])]);
        Ok(Operator { rows: self.rows.clone(), cols: self.cols.permuted(&perm), mat })
    }

    /// Reorders both sides of a square operator.
    pub fn permuted(&self, order: &[&str]) -> Result<Operator> {
        self.permuted_rows(order)?.permuted_cols(order)
    }

    /// Aligns row and column orders to those of `like`.
    pub fn aligned_to(&self, like: &Operator) -> Result<Operator> {
        if !self.rows.same_systems(&like.rows) || !self.cols.same_systems(&like.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{}<-{} vs {}<-{}",
                self.rows, self.cols, like.rows, like.cols
            )));
        }
        self.permuted_rows(&like.rows.labels())?.permuted_cols(&like.cols.labels())
    }

    fn require_square(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!("not square: {} <- {}", self.rows, self.cols)));
        }
        Ok(())
    }

    /// Traces out `drop`; remaining legs keep their order.
    pub fn partial_trace(&self, drop: &[&str]) -> Result<Operator> {
        self.require_square()?;
        let keep_sig = self.rows.without(drop)?;
        let keep = keep_sig.labels();
        let mut order = keep.clone();
        order.extend_from_slice(drop);
        let perm = self.rows.positions(&order)?;
        let map = gather_map(&self.rows.dims(), &perm);
        let dk = keep_sig.dim();
        let dd = self.rows.dim() / dk;
        let mut out = CMat::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..dd {
                    acc += self.mat[(map[i * dd + k], map[j * dd + k])];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Operator { rows: keep_sig.clone(), cols: keep_sig, mat: out })
    }

    /// Keeps only `keep`, in that order.
    pub fn marginal(&self, keep: &[&str]) -> Result<Operator> {
        self.require_square()?;
        let drop_sig = self.rows.without(keep)?;
        let drop = drop_sig.labels();
        self.partial_trace(&drop)?.permuted(keep)
    }

    /// `(I ⊗ K) ρ (I ⊗ K)†` with `K = self` acting on the legs named by
    /// `self.cols()`. Leg placement follows [`Ket::apply`].
    pub fn conjugate(&self, rho: &Operator) -> Result<Operator> {
        rho.require_square()?;
        let xs = self.cols.labels();
        for s in self.cols.systems() {
            if rho.rows.dim_of(&s.name)? != s.dim {
                return Err(Error::DimensionMismatch(format!("leg {}", s.name)));
            }
        }
        let rest = rho.rows.without(&xs)?;
        let mut order = rest.labels();
        order.extend_from_slice(&xs);
        let moved = rho.permuted(&order)?;
        let lift = linalg::kron(&linalg::identity(rest.dim()), &self.mat);
        let mat = &lift * &moved.mat * lift.adjoint();
        let sig = rest.concat(&self.rows)?;
        let out = Operator { rows: sig.clone(), cols: sig, mat };
        if self.rows == self.cols {
            out.permuted(&rho.rows.labels())
        } else {
            Ok(out)
        }
    }

    /// Checks the density flag: Hermitian, PSD and trace in (0, 1].
    pub fn check_density(&self) -> Result<()> {
        self.require_square()?;
        let scale = linalg::max_abs(&self.mat).max(1.0);
        let herm = linalg::hermiticity_error(&self.mat);
        if herm > HERMITIAN_TOL * scale {
            return Err(Error::NotDensity(format!("hermiticity error {:e}", herm)));
        }
        let eig = linalg::eigvalsh(&self.mat);
        if let Some(&lo) = eig.first() {
            if lo < -NEGATIVE_EIG_TOL * scale {
                return Err(Error::NotDensity(format!("eigenvalue {:e}", lo)));
            }
        }
        let tr = self.mat.trace().re;
        if !(tr > 0.0 && tr <= 1.0 + TRACE_TOL) {
            return Err(Error::NotDensity(format!("trace {}", tr)));
        }
        Ok(())
    }

    pub fn is_density(&self) -> bool {
        self.check_density().is_ok()
    }

    pub fn check_isometry(&self) -> Result<()> {
        let e = linalg::isometry_error(&self.mat);
        if e > ISOMETRY_TOL {
            return Err(Error::NotIsometry(e));
        }
        Ok(())
    }

    /// Eigenvalues (ascending) of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.mat)
    }

    /// Largest entry modulus of `self − other` after label alignment.
    pub fn max_diff(&self, other: &Operator) -> Result<f64> {
        let o = other.aligned_to(self)?;
        Ok(linalg::max_abs(&(&self.mat - &o.mat)))
    }
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { re(1.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar unitary on `sig`, as an operator `sig → sig`.
pub fn haar_operator<R: Rng + ?Sized>(sig: &Signature, rng: &mut R) -> Operator {
    Operator { rows: sig.clone(), cols: sig.clone(), mat: haar_unitary(sig.dim(), rng) }
}

/// Fidelity, purified distance and trace distance of two (sub)normalized states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    pub fidelity: f64,
    pub purified: f64,
    pub trace: f64,
}

/// Generalized fidelity `‖√ρ√σ‖₁ + √((1−Trρ)(1−Trσ))`.
pub fn fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    rho.check_density()?;
    sigma.check_density()?;
    let s = sigma.aligned_to(rho)?;
    Ok(fidelity_raw(&rho.mat, &s.mat))
}

pub fn fidelity_raw(rho: &CMat, sigma: &CMat) -> f64 {
    let a = linalg::psd_sqrt(rho);
    let b = linalg::psd_sqrt(sigma);
    // ‖√ρ√σ‖₁ = ‖√σ√ρ‖₁; averaging both orders makes the result exactly symmetric.
    let overlap = 0.5 * (linalg::trace_norm(&(&a * &b)) + linalg::trace_norm(&(&b * &a)));
    let tr = |m: &CMat| m.trace().re.min(1.0);
    let defect = libm::sqrt(((1.0 - tr(rho)) * (1.0 - tr(sigma))).max(0.0));
    (overlap + defect).min(1.0)
}

pub fn distances(rho: &Operator, sigma: &Operator) -> Result<Distances> {
    let f = fidelity(rho, sigma)?;
    let s = sigma.aligned_to(rho)?;
    let trace = 0.5 * linalg::trace_norm_hermitian(&(&rho.mat - &s.mat));
    Ok(Distances { fidelity: f, purified: libm::sqrt((1.0 - f * f).max(0.0)), trace })
}

pub fn purified_distance(rho: &Operator, sigma: &Operator) -> Result<f64> {
    Ok(distances(rho, sigma)?.purified)
}

pub fn trace_distance(rho: &Operator, sigma: &Operator) -> Result<f64> {
    let s = sigma.aligned_to(rho)?;
    Ok(0.5 * linalg::trace_norm_hermitian(&(&rho.mat - &s.mat)))
}

/// Eigen-decomposition purification `Σ_k √λ_k |v_k⟩|k⟩` with the environment
/// appended as the last leg; its dimension is the numerical rank.
pub fn purify(rho: &Operator, env: &str) -> Result<Ket> {
    rho.check_density()?;
    let (vals, vecs) = linalg::eigh(&rho.mat);
    let support: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > linalg::CLIP).collect();
    let rank = support.len().max(1);
    let n = rho.rows.dim();
    let mut amp = CVec::zeros(n * rank);
    for (col, &k) in support.iter().enumerate() {
        let w = libm::sqrt(vals[k]);
        for s in 0..n {
            amp[s * rank + col] = vecs[(s, k)] * w;
        }
    }
    Ket::new(rho.rows.concat(&Signature::single(env, rank)?)?, amp)
}

/// Outcome of [`uhlmann_isometry`].
#[derive(Debug, Clone)]
pub struct Uhlmann {
    /// Isometry `P → Q`.
    pub isometry: Operator,
    /// `⟨phi|(I⊗W)|psi⟩`, real and non-negative.
    pub overlap: f64,
    /// Purified distance of the two marginals on the shared legs.
    pub marginal_distance: f64,
    /// Set when the marginals differ by more than the caller's tolerance.
    pub degraded: bool,
}

/// Isometry `W` on the non-shared legs of `psi` mapping onto those of `phi`
/// that maximizes `|⟨phi|(I⊗W)|psi⟩|`.
///
/// If `phi`'s private part is smaller than `psi`'s and consists of a single
/// leg, that leg is padded with zero amplitudes first.
pub fn uhlmann_isometry(psi: &Ket, phi: &Ket, shared: &[&str], tol: f64) -> Result<Uhlmann> {
    for s in shared {
        if psi.sig.dim_of(s)? != phi.sig.dim_of(s)? {
            return Err(Error::DimensionMismatch(format!("shared leg {}", s)));
        }
    }
    let p_sig = psi.sig.without(shared)?;
    let mut q_sig = phi.sig.without(shared)?;
    let mut phi = phi.clone();
    if q_sig.dim() < p_sig.dim() {
        if q_sig.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "target legs {} smaller than source {}",
                q_sig, p_sig
            )));
        }
        let label = q_sig.labels()[0].to_string();
        phi = phi.pad_leg(&label, p_sig.dim())?;
        q_sig = phi.sig.without(shared)?;
    }
    let (m_psi, _, _) = psi.matricize(shared)?;
    let (m_phi, _, _) = phi.matricize(shared)?;
    let k = m_phi.adjoint() * &m_psi;
    let svd = k.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let w = (u * vt).map(|z| z.conj());
    let overlap: f64 = svd.singular_values.iter().sum();
    let rho_s = &m_psi * m_psi.adjoint();
    let sig_s = &m_phi * m_phi.adjoint();
    let f = fidelity_raw(&rho_s, &sig_s);
    let marginal_distance = libm::sqrt((1.0 - f * f).max(0.0));
    Ok(Uhlmann {
        isometry: Operator::new(q_sig, p_sig, w)?,
        overlap,
        marginal_distance,
        degraded: marginal_distance > tol,
    })
}
