//! Dense complex helpers shared by every module.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Eigenvalues at or below this are treated as zero in roots and purifications.
pub const CLIP: f64 = 1e-14;

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * re(0.5)
}

/// Largest entry modulus of `m - m†`.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let e = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &e.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// Square root of a positive semidefinite matrix; eigenvalues below the
/// clipping threshold are zeroed.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_fn(m, |x| if x > CLIP { libm::sqrt(x) } else { 0.0 })
}

/// `m^p` on the support of `m` (pseudo-inverse convention for `p < 0`).
pub fn psd_pow(m: &CMat, p: f64) -> CMat {
    hermitian_fn(m, |x| if x > CLIP { libm::pow(x, p) } else { 0.0 })
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Schatten-1 norm.
pub fn trace_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

/// Schatten-1 norm of a Hermitian matrix via its spectrum.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|x| x.abs()).sum()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Shannon entropy in bits of a spectrum, ignoring non-positive entries.
pub fn entropy_bits(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > CLIP)
        .map(|&p| -p * libm::log2(p))
        .sum()
}

/// Maximum entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// `‖V†V − I‖` measured as the largest entry modulus.
pub fn isometry_error(v: &CMat) -> f64 {
    max_abs(&(v.adjoint() * v - identity(v.ncols())))
}

/// Real dense Cholesky solve for symmetric positive definite systems.
pub fn cholesky_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.cholesky().map(|c| c.solve(rhs))
}
