//! The even-order expression `l[y] = Σ (-1)^k (p_{n-k} y^(k))^(k) + p_n y`,
//! its quasi-derivatives and the first-order system they satisfy.
//!
//! Quasi-derivatives follow the recurrence
//! `y^[k] = y^(k)` for `k < n`, `y^[n] = p_0 y^(n)`,
//! `y^[n+j] = p_j y^(n-j) - (y^[n+j-1])'`, so that `l[y] = y^[2n]`.
//!
//! Frames are stored in the boundary layout `(y^(1); y^(2))` with
//! `y^(1) = (y^[0], …, y^[n-1])` and `y^(2) = (y^[2n-1], …, y^[n])`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{block, c, eye, set_block, sigma_min, zeros, CMat, C64};

/// A coefficient `t ↦ p_k(t)`, a Hermitian `d × d` matrix.
pub type Sampler = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Classification of the right endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    /// Regular endpoint at `b`.
    Regular(f64),
    /// Singular endpoint with minimal deficiency indices; the value is a
    /// starting cutoff for truncated computations.
    SingularMinimal(f64),
}

#[derive(Clone)]
pub struct DiffExpr {
    n: usize,
    d: usize,
    p: Vec<Sampler>,
    endpoint: Endpoint,
    /// Relative Frobenius tolerance for Hermiticity of sampled coefficients.
    pub herm_tol: f64,
    /// Floor on the smallest singular value of `p_0`.
    pub p0_floor: f64,
}

impl fmt::Debug for DiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffExpr")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("endpoint", &self.endpoint)
            .finish()
    }
}

impl DiffExpr {
    pub fn new(n: usize, d: usize, p: Vec<Sampler>, endpoint: Endpoint) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::DimensionMismatch("n and d must be positive".into()));
        }
        if p.len() != n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                n + 1,
                p.len()
            )));
        }
        match endpoint {
            Endpoint::Regular(b) | Endpoint::SingularMinimal(b) if !(b > 0.0) => {
                return Err(Error::DimensionMismatch("endpoint must be positive".into()))
            }
            _ => {}
        }
        Ok(Self { n, d, p, endpoint, herm_tol: 1e-12, p0_floor: 1e-10 })
    }

    /// `p_0 = I`, all other coefficients zero.
    pub fn free(n: usize, d: usize, endpoint: Endpoint) -> Self {
        let mut p: Vec<Sampler> = vec![Arc::new(move |_| eye(d))];
        for _ in 0..n {
            p.push(Arc::new(move |_| zeros(d, d)));
        }
        Self::new(n, d, p, endpoint).expect("free expression is well formed")
    }

    /// Matrix Sturm–Liouville expression `-y'' + q(t) y`.
    pub fn with_potential<F>(d: usize, q: F, endpoint: Endpoint) -> Self
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        let p: Vec<Sampler> = vec![Arc::new(move |_| eye(d)), Arc::new(q)];
        Self::new(1, d, p, endpoint).expect("Sturm-Liouville expression is well formed")
    }

    /// Scalar Sturm–Liouville expression `-y'' + q(t) y`.
    pub fn sturm_liouville<F>(q: F, endpoint: Endpoint) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_potential(1, move |t| CMat::from_element(1, 1, c(q(t), 0.0)), endpoint)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nd(&self) -> usize {
        self.n * self.d
    }

    pub fn endpoint(&self) -> Endpoint {
        self.endpoint
    }

    /// `b` for a regular endpoint, the cutoff hint otherwise.
    pub fn right_end(&self) -> f64 {
        match self.endpoint {
            Endpoint::Regular(b) | Endpoint::SingularMinimal(b) => b,
        }
    }

    pub fn layout(&self) -> FrameLayout {
        FrameLayout { n: self.n, d: self.d }
    }

    pub fn coeff(&self, k: usize, t: f64) -> CMat {
        (self.p[k])(t)
    }

    fn p0_inverse(&self, p0: &CMat, t: f64) -> Result<CMat> {
        let inv = if self.d == 1 {
            let z = p0[(0, 0)];
            if z.norm() <= self.p0_floor {
                None
            } else {
                Some(CMat::from_element(1, 1, C64::new(1.0, 0.0) / z))
            }
        } else {
            p0.clone().lu().try_inverse()
        };
        match inv {
            Some(m) if m.norm() * self.p0_floor < 1.0 => Ok(m),
            _ => Err(Error::SingularLeadingCoefficient { t, sigma: sigma_min(p0) }),
        }
    }

    /// Right-hand side `F(t, λ) y` of the quasi-derivative system for a frame
    /// held in boundary layout.
    pub fn rhs(&self, t: f64, lambda: C64, y: &CMat) -> Result<CMat> {
        let (n, d) = (self.n, self.d);
        let lay = self.layout();
        let m = y.ncols();
        let q = |k: usize| y.view((lay.row(k), 0), (d, m));
        let p: Vec<CMat> = (0..=n).map(|k| self.coeff(k, t)).collect();
        let p0inv = self.p0_inverse(&p[0], t)?;
        let mut out = zeros(2 * n * d, m);
        for k in 0..2 * n {
            let val: CMat = if k + 1 < n {
                q(k + 1).into_owned()
            } else if k + 1 == n {
                &p0inv * q(n)
            } else if k + 1 < 2 * n {
                let j = k + 1 - n;
                &p[j] * q(n - j) - q(n + j)
            } else {
                (&p[n] - eye(d) * lambda) * q(0)
            };
            set_block(&mut out, lay.row(k), 0, &val);
        }
        Ok(out)
    }
}

/// Index conventions between the quasi-derivative stack and the boundary
/// layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub n: usize,
    pub d: usize,
}

impl FrameLayout {
    pub fn nd(&self) -> usize {
        self.n * self.d
    }

    /// First row of `y^[k]` in the boundary layout.
    pub fn row(&self, k: usize) -> usize {
        if k < self.n {
            k * self.d
        } else {
            (3 * self.n - 1 - k) * self.d
        }
    }

    /// Split a stack `u = (y^[0], …, y^[2n-1])` into `(y^(1), y^(2))`.
    pub fn split(&self, u: &CMat) -> Result<(CMat, CMat)> {
        let nd = self.nd();
        if u.nrows() != 2 * nd {
            return Err(Error::DimensionMismatch(format!("expected {} rows, got {}", 2 * nd, u.nrows())));
        }
        let m = u.ncols();
        let y1 = block(u, 0, 0, nd, m);
        let mut y2 = zeros(nd, m);
        for i in 0..self.n {
            let k = 2 * self.n - 1 - i;
            set_block(&mut y2, i * self.d, 0, &block(u, k * self.d, 0, self.d, m));
        }
        Ok((y1, y2))
    }

    /// Inverse of [`FrameLayout::split`].
    pub fn merge(&self, y1: &CMat, y2: &CMat) -> Result<CMat> {
        let nd = self.nd();
        if y1.nrows() != nd || y2.nrows() != nd || y1.ncols() != y2.ncols() {
            return Err(Error::DimensionMismatch("frame blocks must be nd × m and agree".into()));
        }
        let m = y1.ncols();
        let mut u = zeros(2 * nd, m);
        set_block(&mut u, 0, 0, y1);
        for i in 0..self.n {
            let k = 2 * self.n - 1 - i;
            set_block(&mut u, k * self.d, 0, &block(y2, i * self.d, 0, self.d, m));
        }
        Ok(u)
    }

    /// Stack in quasi-derivative order to boundary layout.
    pub fn to_boundary(&self, u: &CMat) -> Result<CMat> {
        let (y1, y2) = self.split(u)?;
        Ok(crate::linalg::vstack(&y1, &y2))
    }

    /// Boundary layout back to quasi-derivative order.
    pub fn to_stack(&self, y: &CMat) -> Result<CMat> {
        let nd = self.nd();
        if y.nrows() != 2 * nd {
            return Err(Error::DimensionMismatch(format!("expected {} rows, got {}", 2 * nd, y.nrows())));
        }
        let m = y.ncols();
        self.merge(&block(y, 0, 0, nd, m), &block(y, nd, 0, nd, m))
    }
}

/// Result of [`validate_expr`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Largest relative Hermiticity defect of each `p_k` over the probes.
    pub hermiticity_defect: Vec<f64>,
    /// Smallest singular value of `p_0` over the probes.
    pub p0_sigma_min: f64,
    pub passed: bool,
}

pub fn validate_expr(e: &DiffExpr, probe_grid: &[f64]) -> Result<ValidationReport> {
    if probe_grid.is_empty() {
        return Err(Error::DimensionMismatch("probe grid is empty".into()));
    }
    let hi = e.right_end();
    if let Some(&t) = probe_grid.iter().find(|&&t| {
        t < 0.0 || t > hi && matches!(e.endpoint, Endpoint::Regular(_))
    }) {
        return Err(Error::PointOutsideGrid { t, lo: 0.0, hi });
    }
    let mut defects = vec![0.0f64; e.n + 1];
    let mut smin = f64::INFINITY;
    for &t in probe_grid {
        for (k, slot) in defects.iter_mut().enumerate() {
            let pk = e.coeff(k, t);
            if pk.nrows() != e.d || pk.ncols() != e.d {
                return Err(Error::DimensionMismatch(format!("p_{k}({t}) is not {0}×{0}", e.d)));
            }
            let scale = pk.norm();
            let defect = if scale > 0.0 { (&pk - pk.adjoint()).norm() / scale } else { 0.0 };
            if defect > e.herm_tol {
                return Err(Error::NonHermitianCoefficient { k, t, defect });
            }
            *slot = slot.max(defect);
        }
        let s = sigma_min(&e.coeff(0, t));
        if s <= e.p0_floor {
            return Err(Error::SingularLeadingCoefficient { t, sigma: s });
        }
        smin = smin.min(s);
    }
    Ok(ValidationReport { hermiticity_defect: defects, p0_sigma_min: smin, passed: true })
}

/// Dense `F(t, λ)` acting on the quasi-derivative stack `(y^[0], …, y^[2n-1])`.
pub fn system_matrix(e: &DiffExpr, t: f64, lambda: C64) -> Result<CMat> {
    let (n, d) = (e.n, e.d);
    let p: Vec<CMat> = (0..=n).map(|k| e.coeff(k, t)).collect();
    let s = sigma_min(&p[0]);
    if s <= e.p0_floor {
        return Err(Error::SingularLeadingCoefficient { t, sigma: s });
    }
    let p0inv = e.p0_inverse(&p[0], t)?;
    let mut f = zeros(2 * n * d, 2 * n * d);
    for k in 0..2 * n {
        let r = k * d;
        if k + 1 < n {
            set_block(&mut f, r, (k + 1) * d, &eye(d));
        } else if k + 1 == n {
            set_block(&mut f, r, n * d, &p0inv);
        } else if k + 1 < 2 * n {
            let j = k + 1 - n;
            set_block(&mut f, r, (n - j) * d, &p[j]);
            set_block(&mut f, r, (n + j) * d, &(-eye(d)));
        } else {
            set_block(&mut f, r, 0, &(&p[n] - eye(d) * lambda));
        }
    }
    Ok(f)
}

/// Split a stack into boundary blocks (see [`FrameLayout::split`]).
pub fn frame_split(u: &CMat, layout: FrameLayout) -> Result<(CMat, CMat)> {
    layout.split(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn cm(rows: usize, cols: usize, v: &[f64]) -> CMat {
        CMat::from_row_slice(rows, cols, &v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn free_scalar_validates() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let r = validate_expr(&e, &[0.0, 0.5, 1.0]).unwrap();
        assert!(r.passed);
        assert_eq!(r.hermiticity_defect, vec![0.0, 0.0]);
    }

    #[test]
    fn non_hermitian_potential_rejected() {
        let e = DiffExpr::with_potential(2, |_| cm(2, 2, &[0.0, 1.0, 0.0, 0.0]), Endpoint::Regular(1.0));
        match validate_expr(&e, &[0.5]) {
            Err(Error::NonHermitianCoefficient { k, .. }) => assert_eq!(k, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vanishing_leading_coefficient_rejected() {
        let p: Vec<Sampler> = vec![
            Arc::new(|t| CMat::from_element(1, 1, c(t, 0.0))),
            Arc::new(|_| zeros(1, 1)),
        ];
        let e = DiffExpr::new(1, 1, p, Endpoint::Regular(1.0)).unwrap();
        match validate_expr(&e, &[0.0, 0.5]) {
            Err(Error::SingularLeadingCoefficient { t, .. }) => assert_eq!(t, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn second_order_system_matrix() {
        let e = DiffExpr::sturm_liouville(|t| t * t, Endpoint::Regular(1.0));
        let lam = c(0.3, -1.2);
        let f = system_matrix(&e, 0.5, lam).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.25, 0.0) - lam, c(0.0, 0.0)]);
        assert!(max_abs_diff(&f, &want) < 1e-15);
    }

    #[test]
    fn fourth_order_free_system_matrix() {
        let e = DiffExpr::free(2, 1, Endpoint::Regular(1.0));
        let lam = c(2.0, 1.0);
        let f = system_matrix(&e, 0.1, lam).unwrap();
        let mut want = zeros(4, 4);
        want[(0, 1)] = c(1.0, 0.0);
        want[(1, 2)] = c(1.0, 0.0);
        want[(2, 3)] = c(-1.0, 0.0);
        want[(3, 0)] = -lam;
        assert!(max_abs_diff(&f, &want) < 1e-15);
    }

    #[test]
    fn zero_lambda_zero_potential_has_zero_bottom_row() {
        let e = DiffExpr::free(2, 2, Endpoint::Regular(1.0));
        let f = system_matrix(&e, 0.3, c(0.0, 0.0)).unwrap();
        assert!(f.rows(6, 2).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn split_reverses_tail() {
        let lay = FrameLayout { n: 2, d: 1 };
        let u = cm(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let (y1, y2) = frame_split(&u, lay).unwrap();
        assert_eq!(y1, cm(2, 1, &[0.0, 1.0]));
        assert_eq!(y2, cm(2, 1, &[3.0, 2.0]));
        assert_eq!(lay.merge(&y1, &y2).unwrap(), u);
    }

    #[test]
    fn split_is_identity_for_n_one() {
        let lay = FrameLayout { n: 1, d: 2 };
        let u = cm(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let (y1, y2) = lay.split(&u).unwrap();
        assert_eq!(y1, block(&u, 0, 0, 2, 2));
        assert_eq!(y2, block(&u, 2, 0, 2, 2));
    }

    #[test]
    fn split_rejects_wrong_rows() {
        let lay = FrameLayout { n: 2, d: 1 };
        assert!(matches!(lay.split(&zeros(3, 1)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn boundary_rhs_matches_dense_matrix() {
        let e = DiffExpr::free(3, 2, Endpoint::Regular(1.0));
        let lay = e.layout();
        let lam = c(-0.7, 0.4);
        let u = CMat::from_fn(12, 3, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let f = system_matrix(&e, 0.2, lam).unwrap();
        let want = lay.to_boundary(&(f * &u)).unwrap();
        let got = e.rhs(0.2, lam, &lay.to_boundary(&u).unwrap()).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-14);
    }
}
