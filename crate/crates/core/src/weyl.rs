//! Weyl functions of the decomposing boundary triplet, the defect frame
//! `Z₀(·, λ)` and classification of the right endpoint.
//!
//! Regular endpoint: `Γ₀y = {y^(2)(0), y^(2)(b)}`, `Γ₁y = {-y^(1)(0), y^(1)(b)}`.
//! Minimal indices at `b`: `Γ₀y = y^(2)(0)`, `Γ₁y = -y^(1)(0)`.

use crate::error::{Error, Result};
use crate::expr::{DiffExpr, Endpoint};
use crate::linalg::{block, block2, eye, hermitian_min_eig, inverse_checked, vstack, zeros, CMat, C64};
use crate::ode::{canonical_solutions, propagate_frames, ratio_propagate, IntegratorConfig, SolutionFrame};
use crate::quad::cumulative_simpson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletKind {
    Regular,
    MinimalSingular,
}

impl TripletKind {
    /// Dimension of the boundary space.
    pub fn h(self, nd: usize) -> usize {
        match self {
            TripletKind::Regular => 2 * nd,
            TripletKind::MinimalSingular => nd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletConfig {
    pub kind: TripletKind,
}

impl TripletConfig {
    /// Triplet matching the endpoint of `e`. A singular endpoint is
    /// accepted only after [`limit_point_check`] reports minimal indices.
    pub fn for_expr(e: &DiffExpr, cfg: &IntegratorConfig) -> Result<Self> {
        match e.endpoint() {
            Endpoint::Regular(_) => Ok(Self { kind: TripletKind::Regular }),
            Endpoint::SingularMinimal(hint) => {
                let nd = e.nd();
                let k = (zeros(nd, nd), eye(nd));
                let cut = default_schedule(hint);
                match limit_point_check(e, C64::new(0.0, 1.0), &k, &cut, cfg)? {
                    Classification::MinimalIndices => Ok(Self { kind: TripletKind::MinimalSingular }),
                    Classification::NotMinimal => Err(Error::LimitCircleDetected { change: f64::NAN, radius: f64::NAN }),
                }
            }
        }
    }
}

/// `M(λ) = (m, M₂; M₃, M₄)`; only `m` in the minimal-index case.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylMatrix {
    pub lambda: C64,
    pub kind: TripletKind,
    pub m: CMat,
    pub m2: Option<CMat>,
    pub m3: Option<CMat>,
    pub m4: Option<CMat>,
    /// Cutoff used for a singular endpoint.
    pub cutoff: Option<f64>,
    /// Weyl disc radius estimate at the cutoff.
    pub disc_radius: Option<f64>,
    /// Whether successive truncations agreed to the requested tolerance.
    pub converged: bool,
}

impl WeylMatrix {
    pub fn nd(&self) -> usize {
        self.m.nrows()
    }

    pub fn h(&self) -> usize {
        self.kind.h(self.nd())
    }

    /// The full `h × h` Weyl matrix.
    pub fn full(&self) -> CMat {
        match (&self.m2, &self.m3, &self.m4) {
            (Some(m2), Some(m3), Some(m4)) => block2(&self.m, m2, m3, m4),
            _ => self.m.clone(),
        }
    }

    /// `S(λ) = Z̃₀(0, λ)`: `[[-m, -M₂], [I, 0]]` or `(-m; I)`.
    pub fn s_matrix(&self) -> CMat {
        let nd = self.nd();
        match &self.m2 {
            Some(m2) => block2(&(-&self.m), &(-m2), &eye(nd), &zeros(nd, nd)),
            None => vstack(&(-&self.m), &eye(nd)),
        }
    }
}

fn check_in_rho(c2: &CMat, scale: f64, lambda: C64) -> Result<CMat> {
    let resonant = crate::linalg::sigma_min(c2) <= 1e-11 * scale;
    match inverse_checked(c2, 1e-13) {
        Some(a) if !resonant => Ok(a),
        _ => Err(Error::LambdaInSpectrumOfA0 { re: lambda.re, im: lambda.im }),
    }
}

/// Weyl matrix of a regular endpoint, from the canonical frame at `b`.
pub fn weyl_regular(e: &DiffExpr, lambda: C64, cfg: &IntegratorConfig) -> Result<WeylMatrix> {
    let b = match e.endpoint() {
        Endpoint::Regular(b) => b,
        _ => return Err(Error::WrongEndpoint("regular")),
    };
    let nd = e.nd();
    let y0 = canonical_solutions(e, lambda, &[0.0, b], cfg)?;
    let yb = y0.at(b)?;
    let c1 = block(&yb, 0, 0, nd, nd);
    let s1 = block(&yb, 0, nd, nd, nd);
    let c2 = block(&yb, nd, 0, nd, nd);
    let s2 = block(&yb, nd, nd, nd, nd);
    let a = check_in_rho(&c2, yb.norm(), lambda)?;
    let m = &a * &s2;
    let m3 = -(&c1 * &m) + &s1;
    let m4 = &c1 * &a;
    Ok(WeylMatrix {
        lambda,
        kind: TripletKind::Regular,
        m,
        m2: Some(-a),
        m3: Some(m3),
        m4: Some(m4),
        cutoff: None,
        disc_radius: None,
        converged: true,
    })
}

/// Four geometric doublings starting at `hint`.
pub fn default_schedule(hint: f64) -> Vec<f64> {
    (0..4).map(|k| hint * f64::from(1u32 << k)).collect()
}

/// Truncated m-function at cutoff `b` with the condition `y^(2)(b) = 0`.
fn m_truncated(e: &DiffExpr, lambda: C64, b: f64, cfg: &IntegratorConfig) -> Result<CMat> {
    let nd = e.nd();
    let bc = vstack(&eye(nd), &zeros(nd, nd));
    let r = ratio_propagate(e, lambda, b, 0.0, &bc, cfg)?;
    r.a_over_b().map(|x| -x).ok_or(Error::LambdaInSpectrumOfA0 { re: lambda.re, im: lambda.im })
}

/// Radius `1 / (2 |Im λ| λ_min ∫₀ᵇ c* c)` of the Weyl disc at cutoff `b`.
pub fn disc_radius(e: &DiffExpr, lambda: C64, b: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let nd = e.nd();
    let y0 = canonical_solutions(e, lambda, &[0.0, b], cfg)?;
    let d = e.d();
    let vals: Vec<CMat> = y0
        .frames
        .iter()
        .map(|f| {
            let cv = block(f, 0, 0, d, nd);
            cv.adjoint() * cv
        })
        .collect();
    let gram = cumulative_simpson(&y0.grid, &vals).pop().expect("nonempty");
    let lo = hermitian_min_eig(&gram);
    if !lo.is_finite() {
        return Ok(0.0);
    }
    Ok(1.0 / (2.0 * lambda.im.abs() * lo.max(f64::MIN_POSITIVE)))
}

/// The m-function of a singular endpoint with minimal indices, as the limit
/// of truncated problems along `schedule`. Accepted once successive
/// truncations agree to `tol` or the Weyl disc at the last cutoff has
/// radius below `tol`.
pub fn m_singular_limit(
    e: &DiffExpr,
    lambda: C64,
    schedule: &[f64],
    tol: f64,
    cfg: &IntegratorConfig,
) -> Result<WeylMatrix> {
    if lambda.im == 0.0 {
        return Err(Error::RealLambdaUnsupported);
    }
    if !matches!(e.endpoint(), Endpoint::SingularMinimal(_)) {
        return Err(Error::WrongEndpoint("singular"));
    }
    if schedule.len() < 2 || schedule.windows(2).any(|w| !(w[1] > w[0])) || schedule[0] <= 0.0 {
        return Err(Error::SchemaError { path: "schedule".into(), msg: "need at least two increasing cutoffs".into() });
    }
    let mut prev = m_truncated(e, lambda, schedule[0], cfg)?;
    let mut change = f64::INFINITY;
    for &b in &schedule[1..] {
        let cur = m_truncated(e, lambda, b, cfg)?;
        change = (&cur - &prev).norm() / cur.norm().max(1.0);
        if change < tol {
            let radius = disc_radius(e, lambda, b, cfg)?;
            return Ok(singular_weyl(lambda, cur, b, radius, true));
        }
        prev = cur;
    }
    let b = *schedule.last().expect("checked");
    let radius = disc_radius(e, lambda, b, cfg)?;
    if radius <= tol * prev.norm().max(1.0) {
        Ok(singular_weyl(lambda, prev, b, radius, true))
    } else if change <= 10.0 * tol {
        Ok(singular_weyl(lambda, prev, b, radius, false))
    } else {
        Err(Error::LimitCircleDetected { change, radius })
    }
}

fn singular_weyl(lambda: C64, m: CMat, cutoff: f64, radius: f64, converged: bool) -> WeylMatrix {
    WeylMatrix {
        lambda,
        kind: TripletKind::MinimalSingular,
        m,
        m2: None,
        m3: None,
        m4: None,
        cutoff: Some(cutoff),
        disc_radius: Some(radius),
        converged,
    }
}

/// Options for computing the Weyl function of either endpoint kind.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylOptions {
    pub schedule: Option<Vec<f64>>,
    pub tol: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        Self { schedule: None, tol: 1e-8 }
    }
}

/// Weyl matrix for whichever endpoint `e` declares.
pub fn weyl(e: &DiffExpr, lambda: C64, opts: &WeylOptions, cfg: &IntegratorConfig) -> Result<WeylMatrix> {
    match e.endpoint() {
        Endpoint::Regular(_) => weyl_regular(e, lambda, cfg),
        Endpoint::SingularMinimal(hint) => {
            let sched = opts.schedule.clone().unwrap_or_else(|| default_schedule(hint));
            m_singular_limit(e, lambda, &sched, opts.tol, cfg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    MinimalIndices,
    NotMinimal,
}

/// Decide whether every solution `φ_K ĥ`, `ĥ ≠ 0`, fails to be square
/// integrable, by following `λ_min ∫₀^{b_k} φ_K* φ_K` along `cutoffs`.
/// The integrals are called divergent when their last increment does not
/// shrink against the previous one.
pub fn limit_point_check(
    e: &DiffExpr,
    lambda: C64,
    k: &(CMat, CMat),
    cutoffs: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Classification> {
    if lambda.im == 0.0 {
        return Err(Error::RealLambdaUnsupported);
    }
    let nd = e.nd();
    let (k0, k1) = k;
    if k0.shape() != (nd, nd) || k1.shape() != (nd, nd) {
        return Err(Error::DimensionMismatch(format!("K blocks must be {nd}×{nd}")));
    }
    let kk = vstack(k0, k1);
    if crate::linalg::sigma_min(&kk) <= 1e-12 * crate::linalg::sigma_max(&kk) {
        return Err(Error::RankDeficientPair);
    }
    let skew = k0.adjoint() * k1 - k1.adjoint() * k0;
    if skew.norm() > 1e-10 * kk.norm_squared().max(1.0) {
        return Err(Error::NevanlinnaViolation { which: 0, re: lambda.re, im: lambda.im, defect: skew.norm() });
    }
    if cutoffs.len() < 3 || cutoffs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::SchemaError { path: "cutoffs".into(), msg: "need at least three increasing cutoffs".into() });
    }
    let end = *cutoffs.last().expect("checked");
    let phi = crate::ode::integrate_frame_through(e, lambda, 0.0, end, &kk, cutoffs, cfg)?;
    let d = e.d();
    let vals: Vec<CMat> = phi
        .frames
        .iter()
        .map(|f| {
            let v = block(f, 0, 0, d, nd);
            v.adjoint() * v
        })
        .collect();
    let cum = cumulative_simpson(&phi.grid, &vals);
    let mins: Vec<f64> = cutoffs
        .iter()
        .map(|&b| phi.index_of(b).map(|i| hermitian_min_eig(&cum[i])).unwrap_or(f64::NAN))
        .collect();
    let n = mins.len();
    let (last, prev) = (mins[n - 1] - mins[n - 2], mins[n - 2] - mins[n - 3]);
    if !last.is_finite() || last >= 0.9 * prev {
        Ok(Classification::MinimalIndices)
    } else {
        Ok(Classification::NotMinimal)
    }
}

/// The defect frame `Z₀(·, λ)` on `grid`: `(v₀ u₀) = Y₀ S(λ)` for a regular
/// endpoint, `v₀ = -c m + s` for minimal indices. The singular case is
/// obtained by backward propagation from the Weyl cutoff, normalized so
/// that `v₀^(2)(0) = I`.
pub fn z0_frame(
    e: &DiffExpr,
    w: &WeylMatrix,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionFrame> {
    let lambda = w.lambda;
    match w.kind {
        TripletKind::Regular => {
            let y0 = canonical_solutions(e, lambda, &regular_grid(e, grid)?, cfg)?;
            Ok(y0.right_mul(&w.s_matrix()))
        }
        TripletKind::MinimalSingular => {
            let nd = e.nd();
            let b = w.cutoff.ok_or(Error::WrongEndpoint("singular"))?;
            let bc = vstack(&eye(nd), &zeros(nd, nd));
            let f = propagate_frames(e, lambda, b, 0.0, &bc, grid, cfg)?;
            let f0 = f.at(0.0)?;
            let bb = block(&f0, nd, 0, nd, nd);
            let g = bb.try_inverse().ok_or(Error::LambdaInSpectrumOfA0 { re: lambda.re, im: lambda.im })?;
            Ok(f.right_mul(&g))
        }
    }
}

/// Boundary values `(Γ₀Y, Γ₁Y)` of an `m`-column frame for the triplet
/// `kind`; `b` is the regular endpoint (ignored for minimal indices).
pub fn boundary_values(y: &SolutionFrame, kind: TripletKind, b: f64) -> Result<(CMat, CMat)> {
    match kind {
        TripletKind::Regular => Ok((vstack(&y.y2(0.0)?, &y.y2(b)?), vstack(&(-y.y1(0.0)?), &y.y1(b)?))),
        TripletKind::MinimalSingular => Ok((y.y2(0.0)?, -y.y1(0.0)?)),
    }
}

/// `grid` with `0` and `b` included, clipped to `[0, b]`.
pub(crate) fn regular_grid(e: &DiffExpr, grid: &[f64]) -> Result<Vec<f64>> {
    let b = e.right_end();
    let mut g: Vec<f64> = grid.iter().copied().filter(|&t| t > 0.0 && t < b).collect();
    g.push(0.0);
    g.push(b);
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};

    fn sqrt_upper(l: C64) -> C64 {
        let s = l.sqrt();
        if s.im < 0.0 {
            -s
        } else {
            s
        }
    }

    #[test]
    fn regular_free_at_minus_one() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let w = weyl_regular(&e, c(-1.0, 0.0), &IntegratorConfig::default()).unwrap();
        assert!((w.m[(0, 0)] - c(1.0f64.tanh().recip(), 0.0)).norm() < 1e-10);
    }

    #[test]
    fn regular_free_at_quarter_wave() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let l = std::f64::consts::PI.powi(2) / 4.0;
        let w = weyl_regular(&e, c(l, 0.0), &IntegratorConfig::default()).unwrap();
        let two_over_pi = 2.0 / std::f64::consts::PI;
        assert!(w.m[(0, 0)].norm() < 1e-10);
        assert!((w.m2.as_ref().unwrap()[(0, 0)] - two_over_pi).norm() < 1e-10);
        assert!((w.m3.as_ref().unwrap()[(0, 0)] - two_over_pi).norm() < 1e-10);
        assert!(w.m4.as_ref().unwrap()[(0, 0)].norm() < 1e-10);
    }

    #[test]
    fn regular_resonance_reported() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let l = std::f64::consts::PI.powi(2);
        assert!(matches!(
            weyl_regular(&e, c(l, 0.0), &IntegratorConfig::default()),
            Err(Error::LambdaInSpectrumOfA0 { .. })
        ));
    }

    #[test]
    fn regular_symmetry() {
        let e = DiffExpr::sturm_liouville(|t| (2.0 * t).cos(), Endpoint::Regular(1.5));
        let cfg = IntegratorConfig::default();
        let l = c(1.0, 2.0);
        let a = weyl_regular(&e, l, &cfg).unwrap().full();
        let b = weyl_regular(&e, l.conj(), &cfg).unwrap().full();
        assert!(max_abs_diff(&b.adjoint(), &a) < 1e-9);
    }

    #[test]
    fn singular_free_half_line() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let cfg = IntegratorConfig::default();
        for l in [c(0.0, 1.0), c(0.0, 2.0)] {
            let w = m_singular_limit(&e, l, &[5.0, 10.0, 20.0, 40.0], 1e-8, &cfg).unwrap();
            let want = C64::i() / sqrt_upper(l);
            assert!((w.m[(0, 0)] - want).norm() < 1e-6 * want.norm());
            assert!(w.converged);
            assert!(w.disc_radius.unwrap() < 1e-6);
        }
    }

    #[test]
    fn small_disc_accepts_slowly_decaying_limit() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(10.0));
        let l = c(8.0, 1.0);
        let w = m_singular_limit(&e, l, &[10.0, 20.0, 40.0, 80.0], 1e-8, &IntegratorConfig::default()).unwrap();
        let want = C64::i() / sqrt_upper(l);
        assert!(w.converged && w.disc_radius.unwrap() < 1e-8);
        assert!((w.m[(0, 0)] - want).norm() < 1e-8 * want.norm());
    }

    #[test]
    fn finite_interval_is_limit_circle() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(0.5));
        let cfg = IntegratorConfig::default();
        let r = m_singular_limit(&e, c(0.0, 1.0), &[0.5, 0.75, 0.875, 0.9375], 1e-8, &cfg);
        assert!(matches!(r, Err(Error::LimitCircleDetected { .. })), "{r:?}");
        let k = (eye(1), zeros(1, 1));
        let cls = limit_point_check(&e, c(0.0, 1.0), &k, &[0.5, 0.75, 0.875, 0.9375], &cfg).unwrap();
        assert_eq!(cls, Classification::NotMinimal);
    }

    #[test]
    fn half_line_has_minimal_indices_for_two_pairs() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let cfg = IntegratorConfig::default();
        let cut = [5.0, 10.0, 20.0];
        let k_a = (eye(1), zeros(1, 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let k_b = (eye(1) * c(s, 0.0), eye(1) * c(s, 0.0));
        for k in [k_a, k_b] {
            assert_eq!(limit_point_check(&e, c(0.0, 1.0), &k, &cut, &cfg).unwrap(), Classification::MinimalIndices);
        }
    }

    #[test]
    fn real_lambda_rejected() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let r = m_singular_limit(&e, c(-1.0, 0.0), &[5.0, 10.0], 1e-8, &IntegratorConfig::default());
        assert_eq!(r.unwrap_err(), Error::RealLambdaUnsupported);
    }

    #[test]
    fn regular_z0_initial_data_and_boundary_condition() {
        let e = DiffExpr::sturm_liouville(|t| t, Endpoint::Regular(1.0));
        let cfg = IntegratorConfig::default();
        let w = weyl_regular(&e, c(0.5, 1.0), &cfg).unwrap();
        let z = z0_frame(&e, &w, &[0.25, 0.5], &cfg).unwrap();
        assert!(max_abs_diff(&z.at(0.0).unwrap(), &w.s_matrix()) < 1e-15);
        let zb = z.at(1.0).unwrap();
        let y2b = block(&zb, 1, 0, 1, 2);
        assert!(max_abs_diff(&y2b, &CMat::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)])) < 1e-10);
    }

    #[test]
    fn singular_z0_decays_like_exponential() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let cfg = IntegratorConfig::default();
        let l = c(-1.0, 0.01);
        let w = m_singular_limit(&e, l, &default_schedule(5.0), 1e-8, &cfg).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let z = z0_frame(&e, &w, &grid, &cfg).unwrap();
        let z00 = z.at(0.0).unwrap();
        assert!(max_abs_diff(&z00, &w.s_matrix()) < 1e-9);
        let w_ = sqrt_upper(l);
        for &t in &grid {
            let v = z.value(t).unwrap()[(0, 0)];
            let exact = -(C64::i() / w_) * (C64::i() * w_ * t).exp();
            assert!((v - exact).norm() < 1e-8, "t = {t}: {v}");
            assert!((v + (-t).exp()).norm() < 1e-2, "t = {t}: {v}");
        }
    }
}
