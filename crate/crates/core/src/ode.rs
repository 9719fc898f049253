//! Matrix solution frames of `l[y] = λ y`.
//!
//! Frames are integrated with an adaptive Dormand–Prince 5(4) pair in
//! complex arithmetic. Requested output points are hit exactly; values in
//! between come from cubic Hermite interpolation on the accepted steps.

use crate::error::{Error, Result};
use crate::expr::{DiffExpr, FrameLayout};
use crate::linalg::{block, eye, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Steps between QR re-orthonormalizations in [`ratio_propagate`].
    pub renorm_every: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 0.05, renorm_every: 64, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 && self.renorm_every > 0 {
            Ok(())
        } else {
            Err(Error::SchemaError { path: "integrator".into(), msg: "tolerances and steps must be positive".into() })
        }
    }
}

/// A grid-sampled matrix solution in boundary layout `(y^(1); y^(2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFrame {
    pub lambda: C64,
    pub layout: FrameLayout,
    /// Strictly increasing sample points.
    pub grid: Vec<f64>,
    pub frames: Vec<CMat>,
    /// `F(t, λ) · frame` at each sample, used for dense output.
    pub derivs: Vec<CMat>,
    pub cols: usize,
}

impl SolutionFrame {
    pub fn lo(&self) -> f64 {
        self.grid[0]
    }

    pub fn hi(&self) -> f64 {
        *self.grid.last().expect("frames are never empty")
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = (self.lo(), self.hi());
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(Error::PointOutsideGrid { t, lo, hi });
        }
        Ok(self.grid.partition_point(|&g| g <= t).clamp(1, self.grid.len().max(2) - 1) - 1)
    }

    /// Full frame at `t`; exact on stored points.
    pub fn at(&self, t: f64) -> Result<CMat> {
        if self.grid.len() == 1 {
            return if (t - self.grid[0]).abs() <= 1e-12 {
                Ok(self.frames[0].clone())
            } else {
                Err(Error::PointOutsideGrid { t, lo: self.lo(), hi: self.hi() })
            };
        }
        let i = self.locate(t)?;
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        if t == t0 {
            return Ok(self.frames[i].clone());
        }
        if t == t1 {
            return Ok(self.frames[i + 1].clone());
        }
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(&self.frames[i] * C64::from(h00)
            + &self.derivs[i] * C64::from(h10 * h)
            + &self.frames[i + 1] * C64::from(h01)
            + &self.derivs[i + 1] * C64::from(h11 * h))
    }

    /// `y^(1)` block at `t`.
    pub fn y1(&self, t: f64) -> Result<CMat> {
        let nd = self.layout.nd();
        Ok(block(&self.at(t)?, 0, 0, nd, self.cols))
    }

    /// `y^(2)` block at `t`.
    pub fn y2(&self, t: f64) -> Result<CMat> {
        let nd = self.layout.nd();
        Ok(block(&self.at(t)?, nd, 0, nd, self.cols))
    }

    /// The function rows `y^[0]` at `t` (a `d × m` matrix).
    pub fn value(&self, t: f64) -> Result<CMat> {
        Ok(block(&self.at(t)?, 0, 0, self.layout.d, self.cols))
    }

    /// Function rows at the `i`-th stored point.
    pub fn value_at_index(&self, i: usize) -> CMat {
        block(&self.frames[i], 0, 0, self.layout.d, self.cols)
    }

    /// Index of a stored point equal to `t` up to rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        let i = self.grid.partition_point(|&g| g < t - tol);
        (i < self.grid.len() && (self.grid[i] - t).abs() <= tol).then_some(i)
    }

    /// The solution `Y · g` for a constant right factor `g`.
    pub fn right_mul(&self, g: &CMat) -> SolutionFrame {
        SolutionFrame {
            lambda: self.lambda,
            layout: self.layout,
            grid: self.grid.clone(),
            frames: self.frames.iter().map(|f| f * g).collect(),
            derivs: self.derivs.iter().map(|f| f * g).collect(),
            cols: g.ncols(),
        }
    }

    /// Restrict to stored points that lie in `pts`, in order.
    pub fn sample(&self, pts: &[f64]) -> Result<Vec<CMat>> {
        pts.iter().map(|&t| self.at(t)).collect()
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(acc: &mut CMat, a: f64, x: &CMat) {
    let a = C64::from(a);
    for (u, v) in acc.iter_mut().zip(x.iter()) {
        *u += a * v;
    }
}

fn combo(y: &CMat, h: f64, terms: &[(f64, &CMat)]) -> CMat {
    let mut out = y.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            axpy(&mut out, h * w, k);
        }
    }
    out
}

fn err_norm(err: &CMat, y0: &CMat, y1: &CMat, cfg: &IntegratorConfig) -> f64 {
    let scale = y0.norm().max(y1.norm()) / (y0.len() as f64).sqrt();
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let sc = cfg.abs_tol + cfg.rel_tol * a.norm().max(b.norm()).max(1e-3 * scale);
        acc += (e.norm() / sc).powi(2);
    }
    (acc / err.len() as f64).sqrt()
}

/// Observer hook called after each accepted step with the new state.
type StepHook<'a> = dyn FnMut(f64, &mut CMat, &mut CMat, usize) -> Result<()> + 'a;

/// Core stepping loop. Returns the sample points in integration order.
fn drive(
    e: &DiffExpr,
    lambda: C64,
    t0: f64,
    t1: f64,
    init: &CMat,
    stops: &[f64],
    cfg: &IntegratorConfig,
    hook: &mut StepHook<'_>,
) -> Result<(Vec<f64>, Vec<CMat>, Vec<CMat>)> {
    cfg.validate()?;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut targets: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&s| (s - t0) * dir > 0.0 && (t1 - s) * dir > 0.0)
        .collect();
    targets.push(t1);
    targets.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));

    let mut t = t0;
    let mut y = init.clone();
    let mut k1 = e.rhs(t, lambda, &y)?;
    let mut ts = vec![t];
    let mut ys = vec![y.clone()];
    let mut ks = vec![k1.clone()];
    if t0 == t1 {
        return Ok((ts, ys, ks));
    }

    let span = (t1 - t0).abs();
    let d0 = y.norm();
    let d1 = k1.norm();
    let mut h = if d0 > 1e-10 && d1 > 1e-10 { 0.01 * d0 / d1 } else { 1e-4 * span };
    h = h.min(cfg.max_step).min(span).max(1e-12 * span);
    let h_min = 1e-13 * (1.0 + t0.abs().max(t1.abs()));
    let mut steps = 0usize;
    let mut next = 0usize;
    while next < targets.len() {
        let target = targets[next];
        let remaining = (target - t) * dir;
        let mut hit = false;
        let mut hs = h.min(cfg.max_step);
        if hs >= remaining * (1.0 - 1e-12) {
            hs = remaining;
            hit = true;
        } else if hs > 0.5 * remaining {
            // avoid a sliver step before the target
            hs = 0.5 * remaining;
        }
        let hh = hs * dir;
        let k2 = e.rhs(t + C2 * hh, lambda, &combo(&y, hh, &[(A21, &k1)]))?;
        let k3 = e.rhs(t + C3 * hh, lambda, &combo(&y, hh, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = e.rhs(t + C4 * hh, lambda, &combo(&y, hh, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = e.rhs(
            t + C5 * hh,
            lambda,
            &combo(&y, hh, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = e.rhs(
            t + hh,
            lambda,
            &combo(&y, hh, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let ynew = combo(&y, hh, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let tnew = if hit { target } else { t + hh };
        let k7 = e.rhs(tnew, lambda, &ynew)?;
        let mut err = k1.clone() * C64::from(hh * E1);
        for &(w, k) in &[(E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
            axpy(&mut err, hh * w, k);
        }
        let en = err_norm(&err, &y, &ynew, cfg);
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        if en <= 1.0 {
            steps += 1;
            t = tnew;
            y = ynew;
            k1 = k7;
            hook(t, &mut y, &mut k1, steps)?;
            ts.push(t);
            ys.push(y.clone());
            ks.push(k1.clone());
            if hit {
                next += 1;
            }
            h = if hit { h.max(hs * factor.min(1.0)) } else { hs * factor };
        } else {
            h = hs * factor.min(0.9);
            if h < h_min {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
        if steps > cfg.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }
    Ok((ts, ys, ks))
}

fn assemble(lambda: C64, layout: FrameLayout, mut ts: Vec<f64>, mut ys: Vec<CMat>, mut ks: Vec<CMat>) -> SolutionFrame {
    if ts.len() > 1 && ts[0] > ts[ts.len() - 1] {
        ts.reverse();
        ys.reverse();
        ks.reverse();
    }
    let cols = ys[0].ncols();
    SolutionFrame { lambda, layout, grid: ts, frames: ys, derivs: ks, cols }
}

/// Integrate `y' = F(t, λ) y` from `t0` to `t1` (either direction).
pub fn integrate_frame(
    e: &DiffExpr,
    lambda: C64,
    t0: f64,
    t1: f64,
    init: &CMat,
    cfg: &IntegratorConfig,
) -> Result<SolutionFrame> {
    integrate_frame_through(e, lambda, t0, t1, init, &[], cfg)
}

/// As [`integrate_frame`], additionally landing exactly on every point of
/// `stops` that lies strictly between `t0` and `t1`.
pub fn integrate_frame_through(
    e: &DiffExpr,
    lambda: C64,
    t0: f64,
    t1: f64,
    init: &CMat,
    stops: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionFrame> {
    let nd = e.nd();
    if init.nrows() != 2 * nd {
        return Err(Error::DimensionMismatch(format!("initial frame needs {} rows, has {}", 2 * nd, init.nrows())));
    }
    let (ts, ys, ks) = drive(e, lambda, t0, t1, init, stops, cfg, &mut |_, _, _, _| Ok(()))?;
    Ok(assemble(lambda, e.layout(), ts, ys, ks))
}

/// The canonical frame `Y₀ = (c s)` with `Ỹ₀(0) = I`, landing on `grid`.
pub fn canonical_solutions(e: &DiffExpr, lambda: C64, grid: &[f64], cfg: &IntegratorConfig) -> Result<SolutionFrame> {
    let first = *grid.first().ok_or_else(|| Error::DimensionMismatch("empty grid".into()))?;
    if first != 0.0 {
        return Err(Error::DimensionMismatch("canonical grid must start at 0".into()));
    }
    let end = grid.iter().copied().fold(0.0, f64::max);
    integrate_frame_through(e, lambda, 0.0, end, &eye(2 * e.nd()), grid, cfg)
}

/// `B(t) = Z^(2)(t)* Y^(1)(t) - Z^(1)(t)* Y^(2)(t)`.
pub fn lagrange_bracket(y: &SolutionFrame, z: &SolutionFrame, t: f64) -> Result<CMat> {
    if y.layout != z.layout {
        return Err(Error::DimensionMismatch("frames belong to different expressions".into()));
    }
    Ok(z.y2(t)?.adjoint() * y.y1(t)? - z.y1(t)?.adjoint() * y.y2(t)?)
}

/// Ratio data `(A, B)` with `y^(1) = A X`, `y^(2) = B X` for an unknown
/// invertible right factor `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusRatio {
    pub t: f64,
    pub a: CMat,
    pub b: CMat,
}

impl MobiusRatio {
    /// `A B⁻¹`, when `B` is invertible.
    pub fn a_over_b(&self) -> Option<CMat> {
        let bt = self.b.transpose();
        let at = self.a.transpose();
        crate::linalg::solve(&bt, &at).map(|x| x.transpose())
    }
}

/// Thin QR of `y`, returning the orthonormal factor and `R`.
fn orthonormalize(y: &CMat, t: f64) -> Result<(CMat, CMat)> {
    let qr = y.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) || lo <= 1e-13 * hi {
        return Err(Error::RankCollapse { t });
    }
    Ok((q, r))
}

/// A frame integrated with periodic re-orthonormalization and then
/// rescaled so that all stored samples belong to one consistent solution,
/// normalized to `Q` at the end point.
pub(crate) fn propagate_frames(
    e: &DiffExpr,
    lambda: C64,
    from: f64,
    to: f64,
    bc_frame: &CMat,
    stops: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionFrame> {
    let nd = e.nd();
    if bc_frame.nrows() != 2 * nd {
        return Err(Error::DimensionMismatch(format!("boundary frame needs {} rows", 2 * nd)));
    }
    let (q0, _) = orthonormalize(bc_frame, from)?;
    let mut factors: Vec<(usize, CMat)> = Vec::new();
    let mut count = 0usize;
    let mut hook = |t: f64, y: &mut CMat, k: &mut CMat, _steps: usize| -> Result<()> {
        count += 1;
        if count % cfg.renorm_every == 0 {
            let (q, r) = orthonormalize(y, t)?;
            let rinv = r.clone().try_inverse().ok_or(Error::RankCollapse { t })?;
            *k = &*k * &rinv;
            *y = q;
            factors.push((count, r));
        }
        Ok(())
    };
    let (ts, mut ys, mut ks) = drive(e, lambda, from, to, &q0, stops, cfg, &mut hook)?;
    // sample i (i ≥ 1) was produced at accepted step i; a renormalization at
    // step s rescales samples with index ≥ s relative to earlier ones.
    let mut acc = eye(q0.ncols());
    let mut fi = factors.len();
    for i in (0..ys.len()).rev() {
        while fi > 0 && factors[fi - 1].0 > i {
            fi -= 1;
            acc = &acc * &factors[fi].1;
        }
        if fi < factors.len() {
            let g = acc.clone().try_inverse().ok_or(Error::RankCollapse { t: ts[i] })?;
            ys[i] = &ys[i] * &g;
            ks[i] = &ks[i] * &g;
        }
    }
    // re-normalize to the final sample
    let last = ys.len() - 1;
    let (_, r) = orthonormalize(&ys[last], ts[last])?;
    let rinv = r.try_inverse().ok_or(Error::RankCollapse { t: ts[last] })?;
    for (y, k) in ys.iter_mut().zip(ks.iter_mut()) {
        *y = &*y * &rinv;
        *k = &*k * &rinv;
    }
    Ok(assemble(lambda, e.layout(), ts, ys, ks))
}

/// Propagate the solution set spanned by `bc_frame` (given at `from`) to
/// `to`, returning the boundary-block ratio data at `to`.
pub fn ratio_propagate(
    e: &DiffExpr,
    lambda: C64,
    from: f64,
    to: f64,
    bc_frame: &CMat,
    cfg: &IntegratorConfig,
) -> Result<MobiusRatio> {
    let nd = e.nd();
    if bc_frame.nrows() != 2 * nd || bc_frame.ncols() != nd {
        return Err(Error::DimensionMismatch(format!("boundary frame must be {}×{}", 2 * nd, nd)));
    }
    if from == to {
        return Ok(MobiusRatio { t: to, a: block(bc_frame, 0, 0, nd, nd), b: block(bc_frame, nd, 0, nd, nd) });
    }
    let (q0, _) = orthonormalize(bc_frame, from)?;
    let mut hook = |t: f64, y: &mut CMat, k: &mut CMat, steps: usize| -> Result<()> {
        if steps % cfg.renorm_every == 0 {
            let (q, r) = orthonormalize(y, t)?;
            let rinv = r.try_inverse().ok_or(Error::RankCollapse { t })?;
            *k = &*k * &rinv;
            *y = q;
        }
        Ok(())
    };
    let (_, ys, _) = drive(e, lambda, from, to, &q0, &[], cfg, &mut hook)?;
    let y = ys.last().expect("at least one sample");
    orthonormalize(y, to)?;
    Ok(MobiusRatio { t: to, a: block(y, 0, 0, nd, nd), b: block(y, nd, 0, nd, nd) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Endpoint;
    use crate::linalg::{c, max_abs_diff, symplectic_j};

    fn free1() -> DiffExpr {
        DiffExpr::free(1, 1, Endpoint::Regular(1.0))
    }

    #[test]
    fn free_zero_lambda_frame() {
        let f = integrate_frame(&free1(), c(0.0, 0.0), 0.0, 1.0, &eye(2), &IntegratorConfig::default()).unwrap();
        for &t in &[0.0, 0.3, 0.77, 1.0] {
            let want = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(t, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            assert!(max_abs_diff(&f.at(t).unwrap(), &want) < 1e-10);
        }
    }

    #[test]
    fn free_minus_one_frame_is_hyperbolic() {
        let f = integrate_frame(&free1(), c(-1.0, 0.0), 0.0, 1.0, &eye(2), &IntegratorConfig::default()).unwrap();
        for &t in &[0.25, 0.5, 1.0] {
            let (ch, sh) = (f64::cosh(t), f64::sinh(t));
            let want = CMat::from_row_slice(2, 2, &[c(ch, 0.0), c(sh, 0.0), c(sh, 0.0), c(ch, 0.0)]);
            assert!(max_abs_diff(&f.at(t).unwrap(), &want) < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn backward_run_inverts_forward_run() {
        let e = DiffExpr::sturm_liouville(|t| 1.0 / (1.0 + t * t), Endpoint::Regular(1.0));
        let cfg = IntegratorConfig::default();
        let lam = c(2.0, 3.0);
        let fwd = integrate_frame(&e, lam, 0.0, 1.0, &eye(2), &cfg).unwrap();
        let back = integrate_frame(&e, lam, 1.0, 0.0, &fwd.at(1.0).unwrap(), &cfg).unwrap();
        assert!(max_abs_diff(&back.at(0.0).unwrap(), &eye(2)) < 1e-9);
    }

    #[test]
    fn canonical_sine_at_minus_one() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let y0 = canonical_solutions(&free1(), c(-1.0, 0.0), &grid, &IntegratorConfig::default()).unwrap();
        assert!(max_abs_diff(&y0.at(0.0).unwrap(), &eye(2)) == 0.0);
        let s1 = y0.at(1.0).unwrap()[(0, 1)];
        assert!((s1 - c(1.1752011936438014, 0.0)).norm() < 1e-10);
        assert!(grid.iter().all(|&t| y0.index_of(t).is_some()));
    }

    #[test]
    fn bracket_is_j_and_constant() {
        let cfg = IntegratorConfig::default();
        let grid = [0.0, 0.5, 1.0];
        let lam = c(-1.0, 0.0);
        let y = canonical_solutions(&free1(), lam, &grid, &cfg).unwrap();
        assert!(max_abs_diff(&lagrange_bracket(&y, &y, 0.0).unwrap(), &symplectic_j(1)) < 1e-15);
        assert!(max_abs_diff(&lagrange_bracket(&y, &y, 1.0).unwrap(), &symplectic_j(1)) < 1e-10);
    }

    #[test]
    fn bracket_drifts_for_unmatched_parameters() {
        let cfg = IntegratorConfig::default();
        let grid = [0.0, 1.0];
        let y = canonical_solutions(&free1(), c(1.0, 1.0), &grid, &cfg).unwrap();
        let z = canonical_solutions(&free1(), c(2.0, 1.0), &grid, &cfg).unwrap();
        let drift = max_abs_diff(&lagrange_bracket(&y, &z, 1.0).unwrap(), &lagrange_bracket(&y, &z, 0.0).unwrap());
        assert!(drift > 1e-3);
    }

    #[test]
    fn ratio_limit_point_free_half_line() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let bc = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let r = ratio_propagate(&e, c(0.0, 1.0), 40.0, 0.0, &bc, &IntegratorConfig::default()).unwrap();
        let m = -r.a_over_b().unwrap()[(0, 0)];
        let want = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((m - want).norm() < 1e-6, "{m}");
    }

    #[test]
    fn ratio_is_right_invariant() {
        let e = DiffExpr::free(1, 2, Endpoint::SingularMinimal(5.0));
        let cfg = IntegratorConfig::default();
        let bc = crate::linalg::vstack(&eye(2), &crate::linalg::zeros(2, 2));
        let g = CMat::from_row_slice(2, 2, &[c(2.0, 1.0), c(0.5, 0.0), c(-1.0, 0.0), c(0.0, 3.0)]);
        let r1 = ratio_propagate(&e, c(0.5, 1.0), 10.0, 0.0, &bc, &cfg).unwrap();
        let r2 = ratio_propagate(&e, c(0.5, 1.0), 10.0, 0.0, &(&bc * &g), &cfg).unwrap();
        assert!(max_abs_diff(&r1.a_over_b().unwrap(), &r2.a_over_b().unwrap()) < 1e-10);
        let same = ratio_propagate(&e, c(0.5, 1.0), 3.0, 3.0, &(&bc * &g), &cfg).unwrap();
        assert_eq!(same.a, g);
    }

    #[test]
    fn renormalized_frames_stay_consistent() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let cfg = IntegratorConfig { renorm_every: 7, ..Default::default() };
        let bc = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let lam = c(-1.0, 0.5);
        let f = propagate_frames(&e, lam, 6.0, 0.0, &bc, &[1.0, 2.0], &cfg).unwrap();
        let plain = integrate_frame(&e, lam, 6.0, 0.0, &bc, &cfg).unwrap();
        let g = f.at(0.0).unwrap()[(0, 0)] / plain.at(0.0).unwrap()[(0, 0)];
        for &t in &[0.0, 1.0, 2.0, 6.0] {
            let a = f.at(t).unwrap();
            let b = plain.at(t).unwrap() * g;
            assert!(max_abs_diff(&a, &b) < 1e-8 * b.norm().max(1e-300), "t = {t}");
        }
    }
}
