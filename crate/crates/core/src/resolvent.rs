//! Green kernels of generalized resolvents, their application as integral
//! operators, the Krein-type formula for canonical resolvents and spectral
//! probes of proper extensions.

use rayon::prelude::*;

use crate::charmat::{omega_tau_blocks, resonance_inverse, CharMatrix, NevanlinnaPair, PairBlocks};
use crate::error::{Error, Result};
use crate::expr::{DiffExpr, Endpoint};
use crate::linalg::{block, inverse_checked, singular_values, symplectic_j, vstack, CMat, C64};
use crate::ode::{canonical_solutions, integrate_frame_through, IntegratorConfig, SolutionFrame};
use crate::quad::{cumulative_simpson, tail_estimate, uniform_grid};
use crate::weyl::{boundary_values, weyl, z0_frame, TripletKind, WeylMatrix, WeylOptions};

/// `Y_τ(·, λ)` with `Ỹ_τ(0, λ) = (−Ĉ₂*(λ̄); Ĉ₁*(λ̄))(C₀*(λ̄) − M(λ)C₁*(λ̄))⁻¹`,
/// integrated forward over `[0, max(grid)]` landing on `grid`.
pub fn y_tau_frame(
    tau: &NevanlinnaPair,
    w: &WeylMatrix,
    e: &DiffExpr,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionFrame> {
    let init = y_tau_initial(tau, w)?;
    let end = grid.iter().copied().fold(0.0, f64::max);
    integrate_frame_through(e, w.lambda, 0.0, end, &init, grid, cfg)
}

/// The initial data `Ỹ_τ(0, λ)`.
pub fn y_tau_initial(tau: &NevanlinnaPair, w: &WeylMatrix) -> Result<CMat> {
    let nd = w.nd();
    if tau.h != w.h() {
        return Err(Error::DimensionMismatch(format!("pair acts on dimension {}, triplet on {}", tau.h, w.h())));
    }
    let lambda = w.lambda;
    let b = tau.blocks(lambda.conj(), nd)?;
    let a = b.c0.adjoint() - w.full() * b.c1.adjoint();
    let inv = inverse_checked(&a, 1e-12).ok_or(Error::BoundaryResonance { re: lambda.re, im: lambda.im })?;
    Ok(vstack(&(-b.c_hat2.adjoint()), &b.c_hat1.adjoint()) * inv)
}

/// Node placement for a [`GreenKernel`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOptions {
    /// Largest spacing of the uniform node grid.
    pub spacing: f64,
    /// Right end of the node grid; defaults to `b` or to the Weyl cutoff.
    pub extent: Option<f64>,
    /// Additional points the frames must land on exactly.
    pub extra_nodes: Vec<f64>,
    pub weyl: WeylOptions,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { spacing: 0.01, extent: None, extra_nodes: Vec::new(), weyl: WeylOptions::default() }
    }
}

/// All frames needed to evaluate `G_τ(x, t, λ)` by either route, sampled on
/// a common node grid over `[0, cutoff]`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub lambda: C64,
    pub kind: TripletKind,
    pub tau: NevanlinnaPair,
    pub w: WeylMatrix,
    pub w_conj: WeylMatrix,
    pub omega: CharMatrix,
    pub z0: SolutionFrame,
    pub z0_conj: SolutionFrame,
    pub y_tau: SolutionFrame,
    pub y_tau_conj: SolutionFrame,
    pub y0: SolutionFrame,
    pub y0_conj: SolutionFrame,
    pub nodes: Vec<f64>,
    pub cutoff: f64,
}

fn node_grid(extent: f64, spacing: f64, extra: &[f64]) -> Result<Vec<f64>> {
    if !(spacing > 0.0) || !(extent > 0.0) {
        return Err(Error::SchemaError { path: "kernel.spacing".into(), msg: "spacing and extent must be positive".into() });
    }
    let mut k = (extent / spacing).ceil() as usize;
    k += k % 2;
    let mut g = uniform_grid(0.0, extent, k.max(2));
    g.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < extent));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
    Ok(g)
}

impl GreenKernel {
    pub fn build(
        e: &DiffExpr,
        tau: &NevanlinnaPair,
        lambda: C64,
        opts: &KernelOptions,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        let w = weyl(e, lambda, &opts.weyl, cfg)?;
        let w_conj = if lambda.im == 0.0 { w.clone() } else { weyl(e, lambda.conj(), &opts.weyl, cfg)? };
        let limit = match e.endpoint() {
            Endpoint::Regular(b) => b,
            Endpoint::SingularMinimal(_) => {
                w.cutoff.unwrap_or(f64::INFINITY).min(w_conj.cutoff.unwrap_or(f64::INFINITY))
            }
        };
        let cutoff = match (e.endpoint(), opts.extent) {
            (Endpoint::SingularMinimal(_), Some(x)) => x.min(limit),
            _ => limit,
        };
        let nodes = node_grid(cutoff, opts.spacing, &opts.extra_nodes)?;
        let omega = omega_tau_blocks(tau, &w)?;
        let pair = |w: &WeylMatrix| -> Result<(SolutionFrame, SolutionFrame, SolutionFrame)> {
            let z0 = z0_frame(e, w, &nodes, cfg)?;
            let yt = y_tau_frame(tau, w, e, &nodes, cfg)?;
            let y0 = canonical_solutions(e, w.lambda, &nodes, cfg)?;
            Ok((z0, yt, y0))
        };
        let (z0, y_tau, y0) = pair(&w)?;
        let (z0_conj, y_tau_conj, y0_conj) =
            if lambda.im == 0.0 { (z0.clone(), y_tau.clone(), y0.clone()) } else { pair(&w_conj)? };
        Ok(Self {
            lambda,
            kind: w.kind,
            tau: tau.clone(),
            w,
            w_conj,
            omega,
            z0,
            z0_conj,
            y_tau,
            y_tau_conj,
            y0,
            y0_conj,
            nodes,
            cutoff,
        })
    }

    pub fn d(&self) -> usize {
        self.z0.layout.d
    }

    fn check(&self, x: f64, t: f64) -> Result<()> {
        for p in [x, t] {
            if !(-1e-12..=self.cutoff * (1.0 + 1e-12)).contains(&p) {
                return Err(Error::PointOutsideGrid { t: p, lo: 0.0, hi: self.cutoff });
            }
        }
        Ok(())
    }
}

/// Which side of the diagonal a kernel value is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `x > t`, and the limit `x ↓ t` on the diagonal.
    Above,
    /// `x < t`.
    Below,
}

fn branch(x: f64, t: f64) -> Result<Branch> {
    if x > t {
        Ok(Branch::Above)
    } else if x < t {
        Ok(Branch::Below)
    } else {
        Err(Error::DiagonalPoint(x))
    }
}

/// `G_τ(x, t, λ)` together with its quasi-derivatives in `x`: a `2nd × d`
/// matrix in boundary layout, whose first `d` rows are the kernel.
pub fn green_triplet_full(k: &GreenKernel, x: f64, t: f64, side: Branch) -> Result<CMat> {
    k.check(x, t)?;
    Ok(match side {
        Branch::Above => k.z0.at(x)? * k.y_tau_conj.value(t)?.adjoint(),
        Branch::Below => k.y_tau.at(x)? * k.z0_conj.value(t)?.adjoint(),
    })
}

/// `G_τ(x, t, λ) = Z₀(x, λ)Y_τ*(t, λ̄)` for `x > t`, `Y_τ(x, λ)Z₀*(t, λ̄)` for `x < t`.
pub fn green_eval_triplet(k: &GreenKernel, x: f64, t: f64) -> Result<CMat> {
    let side = branch(x, t)?;
    let d = k.d();
    Ok(block(&green_triplet_full(k, x, t, side)?, 0, 0, d, d))
}

/// The `x ↓ t` limit of the kernel on the diagonal.
pub fn green_diagonal(k: &GreenKernel, x: f64) -> Result<CMat> {
    let d = k.d();
    Ok(block(&green_triplet_full(k, x, x, Branch::Above)?, 0, 0, d, d))
}

/// `G_τ(x, t, λ) = Y₀(x, λ)(Ω_τ(λ) + ½ sgn(t − x) J)Y₀*(t, λ̄)`.
pub fn green_eval_shtraus(omega: &CharMatrix, y0: &SolutionFrame, y0_conj: &SolutionFrame, x: f64, t: f64) -> Result<CMat> {
    let side = branch(x, t)?;
    let nd = y0.layout.nd();
    let half = if side == Branch::Above { -0.5 } else { 0.5 };
    let mid = &omega.omega + symplectic_j(nd) * C64::from(half);
    Ok(y0.value(x)? * mid * y0_conj.value(t)?.adjoint())
}

/// [`green_eval_shtraus`] with the frames of a kernel.
pub fn green_eval_shtraus_kernel(k: &GreenKernel, x: f64, t: f64) -> Result<CMat> {
    k.check(x, t)?;
    green_eval_shtraus(&k.omega, &k.y0, &k.y0_conj, x, t)
}

/// Quadrature controls for [`apply_resolvent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Bound on the relative Richardson estimate of the result.
    pub tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-6 }
    }
}

/// A resolvent applied to a grid function, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOutput {
    pub nodes: Vec<f64>,
    /// Quasi-derivative vectors `(y^(1); y^(2))` at each node.
    pub quasi: Vec<CMat>,
    /// Relative discrete residual `‖l[y] − λy − f‖₂ / ‖f‖₂` at interior nodes.
    pub ode_residual: f64,
    /// `‖C₀Γ₀y − C₁Γ₁y‖`.
    pub boundary_residual: f64,
    /// Relative Richardson estimate of the quadrature error.
    pub quad_error: f64,
    /// Size of the neglected part `Y_τ(x)∫_cutoff^∞ Z₀*f` over `x ≤ cutoff/2`
    /// (zero for a regular end).
    pub tail: f64,
}

impl ResolventOutput {
    /// Function values `y(x)` (the first `d` rows).
    pub fn values(&self, d: usize) -> Vec<CMat> {
        self.quasi.iter().map(|q| block(q, 0, 0, d, 1)).collect()
    }
}

fn frame_values(f: &SolutionFrame, nodes: &[f64]) -> Result<Vec<CMat>> {
    nodes.iter().map(|&t| f.value(t)).collect()
}

fn frame_full(f: &SolutionFrame, nodes: &[f64]) -> Result<Vec<CMat>> {
    nodes.iter().map(|&t| f.at(t)).collect()
}

/// `∫_{x_i}^{x_end} g` at every node, accumulated from the right.
fn cumulative_from_right(x: &[f64], g: &[CMat]) -> Vec<CMat> {
    let xr: Vec<f64> = x.iter().rev().copied().collect();
    let gr: Vec<CMat> = g.iter().rev().cloned().collect();
    let mut out: Vec<CMat> = cumulative_simpson(&xr, &gr).into_iter().map(|m| -m).collect();
    out.reverse();
    out
}

/// `y(x) = A(x)∫₀ˣ B*f + C(x)∫ₓ^end D*f` on `nodes`, where `a, c` are full
/// frames and `b, d` value rows.
fn two_sided(nodes: &[f64], a: &[CMat], b: &[CMat], c: &[CMat], d: &[CMat], f: &[CMat]) -> Vec<CMat> {
    let left: Vec<CMat> = b.iter().zip(f).map(|(b, f)| b.adjoint() * f).collect();
    let right: Vec<CMat> = d.iter().zip(f).map(|(d, f)| d.adjoint() * f).collect();
    let il = cumulative_simpson(nodes, &left);
    let ir = cumulative_from_right(nodes, &right);
    (0..nodes.len()).map(|i| &a[i] * &il[i] + &c[i] * &ir[i]).collect()
}

fn subsample<T: Clone>(v: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut idx: Vec<usize> = (0..v.len()).step_by(2).collect();
    if *idx.last().expect("nonempty") != v.len() - 1 {
        idx.push(v.len() - 1);
    }
    let out = idx.iter().map(|&i| v[i].clone()).collect();
    (idx, out)
}

fn check_rhs(k: &GreenKernel, f: &[CMat]) -> Result<()> {
    let d = k.d();
    if f.len() != k.nodes.len() {
        return Err(Error::DimensionMismatch(format!("right-hand side has {} samples, grid has {}", f.len(), k.nodes.len())));
    }
    if let Some(bad) = f.iter().find(|v| v.shape() != (d, 1)) {
        return Err(Error::DimensionMismatch(format!("samples must be {d}×1, got {:?}", bad.shape())));
    }
    Ok(())
}

/// Two-sided integral with a Richardson estimate from every other node.
fn integrate_two_sided(
    nodes: &[f64],
    a: &[CMat],
    b: &[CMat],
    c: &[CMat],
    d: &[CMat],
    f: &[CMat],
    quad: &QuadConfig,
) -> Result<(Vec<CMat>, f64)> {
    let y = two_sided(nodes, a, b, c, d, f);
    let (idx, xs) = subsample(nodes);
    let pick = |v: &[CMat]| -> Vec<CMat> { idx.iter().map(|&i| v[i].clone()).collect() };
    let yc = two_sided(&xs, &pick(a), &pick(b), &pick(c), &pick(d), &pick(f));
    let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let diff = idx.iter().zip(&yc).map(|(&i, v)| (&y[i] - v).norm()).fold(0.0, f64::max);
    let err = diff / 15.0 / scale;
    if !(err <= quad.tol) {
        return Err(Error::QuadratureNotConverged { estimate: err, tol: quad.tol });
    }
    Ok((y, err))
}

/// `R_τ(λ)f(x) = ∫₀^b G_τ(x, t, λ)f(t) dt` for `f` sampled on `k.nodes`,
/// truncated at the cutoff for a singular end.
pub fn apply_resolvent(e: &DiffExpr, k: &GreenKernel, f: &[CMat], quad: &QuadConfig) -> Result<ResolventOutput> {
    check_rhs(k, f)?;
    let nodes = &k.nodes;
    let z0 = frame_full(&k.z0, nodes)?;
    let yt = frame_full(&k.y_tau, nodes)?;
    let ytc = frame_values(&k.y_tau_conj, nodes)?;
    let z0c = frame_values(&k.z0_conj, nodes)?;
    let (quasi, err) = integrate_two_sided(nodes, &z0, &ytc, &yt, &z0c, f, quad)?;
    let tail = match k.kind {
        TripletKind::Regular => 0.0,
        TripletKind::MinimalSingular => {
            let g: Vec<CMat> = z0c.iter().zip(f).map(|(z, f)| z.adjoint() * f).collect();
            let t = tail_estimate(nodes, &g);
            let reach = nodes.iter().zip(&yt).filter(|(&x, _)| x <= 0.5 * k.cutoff).map(|(_, y)| y.norm()).fold(0.0, f64::max);
            t * reach
        }
    };
    let ode_residual = ode_residual(e, k.lambda, nodes, &quasi, f)?;
    let boundary_residual = boundary_residual(&k.tau, k.lambda, k.kind, e.nd(), nodes, &quasi)?;
    Ok(ResolventOutput { nodes: nodes.clone(), quasi, ode_residual, boundary_residual, quad_error: err, tail })
}

/// Relative discrete residual of `−(y^[2n−1])′ + (p_n − λ)y − f` by central
/// differences at interior nodes.
pub fn ode_residual(e: &DiffExpr, lambda: C64, nodes: &[f64], quasi: &[CMat], f: &[CMat]) -> Result<f64> {
    let layout = e.layout();
    let (n, d) = (e.n(), e.d());
    let r0 = layout.row(2 * n - 1);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..nodes.len().saturating_sub(1) {
        let h = nodes[i + 1] - nodes[i - 1];
        let dq = (block(&quasi[i + 1], r0, 0, d, 1) - block(&quasi[i - 1], r0, 0, d, 1)) / C64::from(h);
        let y = block(&quasi[i], 0, 0, d, 1);
        let pn = e.coeff(n, nodes[i]);
        let r = -dq + (pn - crate::linalg::scalar(lambda, d)) * &y - &f[i];
        let wgt = 0.5 * h;
        num += r.norm_squared() * wgt;
        den += f[i].norm_squared() * wgt;
    }
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

/// `‖C₀(λ)Γ₀y − C₁(λ)Γ₁y‖` from the quasi-derivatives at the ends of `nodes`.
pub fn boundary_residual(
    tau: &NevanlinnaPair,
    lambda: C64,
    kind: TripletKind,
    nd: usize,
    nodes: &[f64],
    quasi: &[CMat],
) -> Result<f64> {
    if nodes.first() != Some(&0.0) {
        return Err(Error::DimensionMismatch("boundary residual needs the node 0".into()));
    }
    let split = |q: &CMat| (block(q, 0, 0, nd, 1), block(q, nd, 0, nd, 1));
    let (y1a, y2a) = split(&quasi[0]);
    let (g0, g1) = match kind {
        TripletKind::Regular => {
            let (y1b, y2b) = split(quasi.last().expect("nonempty"));
            (vstack(&y2a, &y2b), vstack(&(-y1a), &y1b))
        }
        TripletKind::MinimalSingular => (y2a, -y1a),
    };
    let (c0, c1) = tau.at(lambda)?;
    Ok((c0 * g0 - c1 * g1).norm())
}

/// Canonical resolvent of a constant self-adjoint pair by the Krein-type
/// formula `R_τ f = R₀f + Z₀(·, λ)(C₀ − C₁M)⁻¹C₁ ∫ Z₀*(t, λ̄)f(t) dt`,
/// with `R₀f(x) = −v₀(x)∫₀ˣ c*(t, λ̄)f − c(x)∫ₓ^b v₀*(t, λ̄)f`.
pub fn krein_resolvent(e: &DiffExpr, k: &GreenKernel, f: &[CMat], quad: &QuadConfig) -> Result<ResolventOutput> {
    if !k.tau.is_constant_self_adjoint() {
        return Err(Error::NotConstantSelfAdjoint);
    }
    check_rhs(k, f)?;
    let nodes = &k.nodes;
    let nd = e.nd();
    let cols = |fr: &SolutionFrame, full: bool| -> Result<Vec<CMat>> {
        let g = if full { frame_full(fr, nodes)? } else { frame_values(fr, nodes)? };
        Ok(g.into_iter().map(|m| block(&m, 0, 0, m.nrows(), nd)).collect())
    };
    let v0: Vec<CMat> = cols(&k.z0, true)?.into_iter().map(|m| -m).collect();
    let cc = cols(&k.y0_conj, false)?;
    let c_full: Vec<CMat> = cols(&k.y0, true)?.into_iter().map(|m| -m).collect();
    let v0c = cols(&k.z0_conj, false)?;
    let (r0, err) = integrate_two_sided(nodes, &v0, &cc, &c_full, &v0c, f, quad)?;
    let (pb, x): (PairBlocks, CMat) = resonance_inverse(&k.tau, &k.w)?;
    let z0 = frame_full(&k.z0, nodes)?;
    let z0c = frame_values(&k.z0_conj, nodes)?;
    let g: Vec<CMat> = z0c.iter().zip(f).map(|(z, f)| z.adjoint() * f).collect();
    let total = cumulative_simpson(nodes, &g).pop().expect("nonempty");
    let corr = x * pb.c1 * total;
    let quasi: Vec<CMat> = r0.iter().zip(&z0).map(|(r, z)| r + z * &corr).collect();
    let ode_residual = ode_residual(e, k.lambda, nodes, &quasi, f)?;
    let boundary_residual = boundary_residual(&k.tau, k.lambda, k.kind, nd, nodes, &quasi)?;
    Ok(ResolventOutput { nodes: nodes.clone(), quasi, ode_residual, boundary_residual, quad_error: err, tail: 0.0 })
}

/// `T(λ) = (C₀Γ₀ − C₁Γ₁)Z` for a fundamental frame `Z`: `Y₀` for a regular
/// end, `v₀` for minimal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProbe {
    pub lambda: C64,
    pub t: CMat,
    /// Singular values of `T`, descending.
    pub singular_values: Vec<f64>,
}

impl SpectralProbe {
    pub fn sigma_min(&self) -> f64 {
        *self.singular_values.last().unwrap_or(&0.0)
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn det(&self) -> C64 {
        self.t.determinant()
    }
}

pub fn spectral_probe(
    tau: &NevanlinnaPair,
    e: &DiffExpr,
    lambda: C64,
    opts: &WeylOptions,
    cfg: &IntegratorConfig,
) -> Result<SpectralProbe> {
    let nd = e.nd();
    let (c0, c1) = tau.at(lambda)?;
    let t = match e.endpoint() {
        Endpoint::Regular(b) => {
            if tau.h != 2 * nd {
                return Err(Error::DimensionMismatch(format!("regular pair must act on dimension {}", 2 * nd)));
            }
            let y0 = canonical_solutions(e, lambda, &[0.0, b], cfg)?;
            let (g0, g1) = boundary_values(&y0, TripletKind::Regular, b)?;
            c0 * g0 - c1 * g1
        }
        Endpoint::SingularMinimal(_) => {
            if tau.h != nd {
                return Err(Error::DimensionMismatch(format!("pair must act on dimension {nd}")));
            }
            let w = weyl(e, lambda, opts, cfg)?;
            c0 - c1 * w.m
        }
    };
    let singular_values = singular_values(&t);
    Ok(SpectralProbe { lambda, t, singular_values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigScanOptions {
    /// Number of grid intervals; defaults to eight per free-case
    /// eigenvalue spacing at the lower end.
    pub grid: Option<usize>,
    /// Relative tolerance of golden-section refinement.
    pub tol: f64,
    /// Acceptance: `σ_min(T) < floor · σ_max(T)`.
    pub floor: f64,
}

impl Default for EigScanOptions {
    fn default() -> Self {
        Self { grid: None, tol: 1e-13, floor: 1e-8 }
    }
}

/// Spacing of the free eigenvalues `(kπ/b)^{2n}` near `lambda`.
fn free_spacing(n: usize, b: f64, lambda: f64) -> f64 {
    let unit = std::f64::consts::PI / b;
    let k = (lambda.max(0.0).powf(0.5 / n as f64) / unit).floor();
    let p = (2 * n) as i32;
    ((k + 1.0) * unit).powi(p) - (k * unit).powi(p)
}

fn probe_ratio(tau: &NevanlinnaPair, e: &DiffExpr, x: f64, cfg: &IntegratorConfig) -> Result<(f64, f64)> {
    let p = spectral_probe(tau, e, C64::new(x, 0.0), &WeylOptions::default(), cfg)?;
    Ok((p.sigma_min(), p.sigma_max()))
}

/// Real eigenvalues of the extension fixed by a constant self-adjoint pair
/// in `[lo, hi]`, as zeros of `σ_min(T(λ))`.
pub fn eig_scan(
    tau: &NevanlinnaPair,
    e: &DiffExpr,
    lo: f64,
    hi: f64,
    opts: &EigScanOptions,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let b = match e.endpoint() {
        Endpoint::Regular(b) => b,
        _ => return Err(Error::WrongEndpoint("regular")),
    };
    if !tau.is_constant_self_adjoint() {
        return Err(Error::NotConstantSelfAdjoint);
    }
    if !(hi > lo) {
        return Err(Error::SchemaError { path: "spectrum.range".into(), msg: "empty interval".into() });
    }
    let count = opts.grid.unwrap_or_else(|| {
        let step = free_spacing(e.n(), b, lo) / 8.0;
        ((hi - lo) / step).ceil().max(16.0) as usize
    });
    let xs = uniform_grid(lo, hi, count);
    let coarse = IntegratorConfig { rel_tol: cfg.rel_tol.max(1e-9), abs_tol: cfg.abs_tol.max(1e-11), ..cfg.clone() };
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|&x| probe_ratio(tau, e, x, &coarse).map(|(s, _)| s))
        .collect::<Result<Vec<_>>>()?;
    let mut brackets = Vec::new();
    for i in 0..xs.len() {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i + 1 == xs.len() { f64::INFINITY } else { vals[i + 1] };
        if vals[i] <= left && vals[i] < right {
            brackets.push((xs[i.saturating_sub(1)], xs[(i + 1).min(xs.len() - 1)]));
        }
    }
    let found: Vec<Option<f64>> = brackets
        .par_iter()
        .map(|&(a, c)| -> Result<Option<f64>> {
            let x = golden_min(|x| probe_ratio(tau, e, x, cfg).map(|(s, _)| s), a, c, opts.tol)?;
            let (s, m) = probe_ratio(tau, e, x, cfg)?;
            Ok((s < opts.floor * m && x >= lo && x <= hi).then_some(x))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<f64> = found.into_iter().flatten().collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    Ok(out)
}

fn golden_min<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut c: f64, tol: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = c - g * (c - a);
    let mut x2 = a + g * (c - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while (c - a).abs() > tol * (1.0 + 0.5 * (a + c).abs()) {
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - g * (c - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (c - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { x1 } else { x2 })
}

/// `‖G(x, t, λ)* − G(t, x, λ̄)‖` for a kernel at `λ` and one at `λ̄`.
pub fn kernel_symmetry_defect(k: &GreenKernel, k_conj: &GreenKernel, x: f64, t: f64) -> Result<f64> {
    let a = green_eval_triplet(k, x, t)?;
    let b = green_eval_triplet(k_conj, t, x)?;
    Ok((a.adjoint() - b).norm())
}

/// Constant right-hand side `f ≡ v` on the nodes of `k`.
pub fn constant_rhs(k: &GreenKernel, v: &CMat) -> Vec<CMat> {
    vec![v.clone(); k.nodes.len()]
}

/// Sample `f` on the nodes of `k`.
pub fn sample_rhs<F: Fn(f64) -> CMat>(k: &GreenKernel, f: F) -> Vec<CMat> {
    k.nodes.iter().map(|&t| f(t)).collect()
}

/// Maximum norm of the difference of two grid functions.
pub fn max_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| crate::linalg::max_abs_diff(x, y)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::PI;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn one() -> CMat {
        CMat::from_element(1, 1, c(1.0, 0.0))
    }

    #[test]
    fn y_tau_initial_data_of_named_pairs() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let w = weyl(&e, c(0.0, 1.0), &WeylOptions::default(), &cfg()).unwrap();
        let a = y_tau_initial(&NevanlinnaPair::tau0(1), &w).unwrap();
        assert!((a[(0, 0)] + 1.0).norm() < 1e-14 && a[(1, 0)].norm() < 1e-14);
        let w = weyl(&e, c(-1.0, 1e-8), &WeylOptions::default(), &cfg()).unwrap();
        let a = y_tau_initial(&NevanlinnaPair::dirichlet(1), &w).unwrap();
        assert!(a[(0, 0)].norm() < 1e-14 && (a[(1, 0)] + 1.0).norm() < 1e-6);
    }

    #[test]
    fn bracket_of_z0_and_y_tau_is_constant() {
        let e = DiffExpr::sturm_liouville(|t| 1.0 / (1.0 + t * t), Endpoint::Regular(2.0));
        let tau = NevanlinnaPair::random_self_adjoint(2, 3);
        let k = GreenKernel::build(&e, &tau, c(0.5, 1.0), &KernelOptions::default(), &cfg()).unwrap();
        let b0 = crate::ode::lagrange_bracket(&k.z0, &k.y_tau_conj, 0.0).unwrap();
        for t in [0.5, 1.3, 2.0] {
            let bt = crate::ode::lagrange_bracket(&k.z0, &k.y_tau_conj, t).unwrap();
            assert!((bt - &b0).norm() < 1e-9);
        }
    }

    #[test]
    fn tau0_half_line_spot_value() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let opts = KernelOptions { extent: Some(10.0), ..Default::default() };
        let k = GreenKernel::build(&e, &NevanlinnaPair::tau0(1), c(-1.0, 1e-8), &opts, &cfg()).unwrap();
        let want = (-1.0f64).exp() * 0.5f64.cosh();
        let g = green_eval_triplet(&k, 1.0, 0.5).unwrap()[(0, 0)];
        assert!((g - want).norm() < 1e-6, "{g}");
        let h = green_eval_shtraus_kernel(&k, 1.0, 0.5).unwrap()[(0, 0)];
        assert!((h - want).norm() < 1e-6, "{h}");
    }

    #[test]
    fn dirichlet_kernel_and_jump() {
        let e = DiffExpr::free(1, 1, Endpoint::SingularMinimal(5.0));
        let opts = KernelOptions { extent: Some(10.0), ..Default::default() };
        let k = GreenKernel::build(&e, &NevanlinnaPair::dirichlet(1), c(-1.0, 1e-8), &opts, &cfg()).unwrap();
        let g = green_eval_triplet(&k, 1.5, 0.7).unwrap()[(0, 0)];
        assert!((g - (-1.5f64).exp() * 0.7f64.sinh()).norm() < 1e-6);
        assert!(green_eval_triplet(&k, 0.0, 0.7).unwrap().norm() < 1e-8);
        assert!(matches!(green_eval_triplet(&k, 0.7, 0.7), Err(Error::DiagonalPoint(_))));
        let above = green_triplet_full(&k, 0.7, 0.7, Branch::Above).unwrap();
        let below = green_triplet_full(&k, 0.7, 0.7, Branch::Below).unwrap();
        assert!((above[(0, 0)] - below[(0, 0)]).norm() < 1e-8);
        assert!((above[(1, 0)] - below[(1, 0)] + 1.0).norm() < 1e-8);
    }

    #[test]
    fn routes_agree_regular_potential() {
        let e = DiffExpr::sturm_liouville(|t| 1.0 / (1.0 + t * t), Endpoint::Regular(1.0));
        let tau = NevanlinnaPair::random_self_adjoint(2, 9);
        let k = GreenKernel::build(&e, &tau, c(0.3, 0.8), &KernelOptions::default(), &cfg()).unwrap();
        for x in [0.13, 0.5, 0.91] {
            for t in [0.05, 0.47, 0.77] {
                let a = green_eval_triplet(&k, x, t).unwrap();
                let b = green_eval_shtraus_kernel(&k, x, t).unwrap();
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn neumann_and_dirichlet_resolvents() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let opts = KernelOptions { spacing: 0.0025, ..Default::default() };
        let k = GreenKernel::build(&e, &NevanlinnaPair::tau0(2), c(-1.0, 0.0), &opts, &cfg()).unwrap();
        let f = constant_rhs(&k, &one());
        let y = apply_resolvent(&e, &k, &f, &QuadConfig::default()).unwrap();
        assert!(y.values(1).iter().all(|v| (v[(0, 0)] - 1.0).norm() < 1e-6));
        assert!(y.ode_residual < 1e-4 && y.boundary_residual < 1e-8);

        let k = GreenKernel::build(&e, &NevanlinnaPair::dirichlet(2), c(-1.0, 0.0), &opts, &cfg()).unwrap();
        let y = apply_resolvent(&e, &k, &f, &QuadConfig::default()).unwrap();
        let mid = k.nodes.iter().position(|&t| (t - 0.5).abs() < 1e-12).unwrap();
        let want = 1.0 - 1.0 / 0.5f64.cosh();
        assert!((y.values(1)[mid][(0, 0)] - want).norm() < 1e-6);
        assert!(y.ode_residual < 1e-4 && y.boundary_residual < 1e-8, "{} {}", y.ode_residual, y.boundary_residual);
        let kr = krein_resolvent(&e, &k, &f, &QuadConfig::default()).unwrap();
        assert!(max_diff(&kr.quasi, &y.quasi) < 1e-8);
    }

    #[test]
    fn krein_route_random_pair_and_resolvent_identity() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let tau = NevanlinnaPair::random_self_adjoint(2, 21);
        let (l, mu) = (c(0.5, 1.0), c(-2.0, 0.5));
        let kl = GreenKernel::build(&e, &tau, l, &KernelOptions::default(), &cfg()).unwrap();
        let km = GreenKernel::build(&e, &tau, mu, &KernelOptions::default(), &cfg()).unwrap();
        let f = sample_rhs(&kl, |t| CMat::from_element(1, 1, c(t.cos(), t)));
        let q = QuadConfig::default();
        let a = apply_resolvent(&e, &kl, &f, &q).unwrap();
        let b = krein_resolvent(&e, &kl, &f, &q).unwrap();
        assert!(max_diff(&a.quasi, &b.quasi) < 1e-8);
        let rm = apply_resolvent(&e, &km, &f, &q).unwrap();
        let rlrm = apply_resolvent(&e, &kl, &rm.values(1), &q).unwrap();
        let lhs: Vec<CMat> = a.values(1).iter().zip(rm.values(1)).map(|(x, y)| x - y).collect();
        let rhs: Vec<CMat> = rlrm.values(1).iter().map(|v| v * (l - mu)).collect();
        assert!(max_diff(&lhs, &rhs) < 1e-6);
    }

    #[test]
    fn probe_dirichlet_determinant() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let tau = NevanlinnaPair::dirichlet(2);
        let p = spectral_probe(&tau, &e, c(0.0, 0.0), &WeylOptions::default(), &cfg()).unwrap();
        assert!((p.det().norm() - 1.0).abs() < 1e-10);
        for k in 1..=3 {
            let l = (k as f64 * PI).powi(2);
            let p = spectral_probe(&tau, &e, c(l, 0.0), &WeylOptions::default(), &cfg()).unwrap();
            assert!(p.det().norm() < 1e-9);
        }
    }

    #[test]
    fn scans() {
        let e = DiffExpr::free(1, 1, Endpoint::Regular(1.0));
        let d = eig_scan(&NevanlinnaPair::dirichlet(2), &e, 1.0, 100.0, &EigScanOptions::default(), &cfg()).unwrap();
        assert_eq!(d.len(), 3, "{d:?}");
        for (k, x) in d.iter().enumerate() {
            let want = ((k + 1) as f64 * PI).powi(2);
            assert!((x - want).abs() / want < 1e-6);
        }
        let nm = eig_scan(&NevanlinnaPair::tau0(2), &e, -1.0, 50.0, &EigScanOptions::default(), &cfg()).unwrap();
        assert_eq!(nm.len(), 3, "{nm:?}");
        assert!(nm[0].abs() < 1e-8);
        let none = eig_scan(&NevanlinnaPair::dirichlet(2), &e, 200.0, 210.0, &EigScanOptions::default(), &cfg()).unwrap();
        assert!(none.is_empty());
    }
}
