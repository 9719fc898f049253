//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    CMat::zeros(r, cols)
}

pub fn scalar(z: C64, n: usize) -> CMat {
    CMat::identity(n, n) * z
}

/// Copy of the `nr × nc` block starting at `(r, col)`.
pub fn block(a: &CMat, r: usize, col: usize, nr: usize, nc: usize) -> CMat {
    a.view((r, col), (nr, nc)).into_owned()
}

pub fn set_block(a: &mut CMat, r: usize, col: usize, b: &CMat) {
    a.view_mut((r, col), (b.nrows(), b.ncols())).copy_from(b);
}

/// Assemble a 2×2 block matrix.
pub fn block2(a: &CMat, b: &CMat, cc: &CMat, d: &CMat) -> CMat {
    let (r1, c1) = (a.nrows(), a.ncols());
    let mut out = zeros(r1 + cc.nrows(), c1 + b.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, 0, c1, b);
    set_block(&mut out, r1, 0, cc);
    set_block(&mut out, r1, c1, d);
    out
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows() + b.nrows(), a.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, a.nrows(), 0, b);
    out
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), a.ncols() + b.ncols());
    set_block(&mut out, 0, 0, a);
    set_block(&mut out, 0, a.ncols(), b);
    out
}

/// The symplectic matrix `[[0, -I], [I, 0]]` of size `2m`.
pub fn symplectic_j(m: usize) -> CMat {
    block2(&zeros(m, m), &(-eye(m)), &eye(m), &zeros(m, m))
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn sigma_min(a: &CMat) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

pub fn sigma_max(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Inverse of a square matrix, rejected when `σ_min < rel_floor · σ_max`.
pub fn inverse_checked(a: &CMat, rel_floor: f64) -> Option<CMat> {
    let s = singular_values(a);
    let (hi, lo) = (s.first().copied()?, s.last().copied()?);
    if !(lo > rel_floor * hi) || hi == 0.0 {
        return None;
    }
    a.clone().lu().try_inverse()
}

/// Solve `a x = b` without a conditioning check.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// `Im A = (A - A*) / 2i`.
pub fn imag_part(a: &CMat) -> CMat {
    (a - a.adjoint()) * c(0.0, -0.5)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn hermitian_min_eig(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// Relative Frobenius distance, floored at unit scale.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Orthonormal basis of the null space of `a` (columns), from the
/// eigenvectors of `a* a` with eigenvalues below `rel_tol · λ_max`.
pub fn null_space(a: &CMat, rel_tol: f64) -> CMat {
    let n = a.ncols();
    let g = hermitian_part(&(a.adjoint() * a));
    let eig = g.symmetric_eigen();
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = rel_tol * hi.max(f64::MIN_POSITIVE);
    let idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= floor).collect();
    let mut out = zeros(n, idx.len());
    for (col, &i) in idx.iter().enumerate() {
        out.set_column(col, &eig.eigenvectors.column(i));
    }
    out
}

/// Haar-like random unitary from the QR factor of a Gaussian-ish matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_hermitian<R: Rng>(n: usize, scale: f64, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)));
    hermitian_part(&a)
}
