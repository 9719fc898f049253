//! Nevanlinna boundary pairs and characteristic matrices.
//!
//! A pair `τ(λ) = {(C₀(λ), C₁(λ))}` stands for the relation
//! `{(h₀, h₁) : C₀h₀ + C₁h₁ = 0}` in `𝓗 ⊕ 𝓗`; the associated boundary
//! condition is `C₀Γ₀y − C₁Γ₁y = 0`. Blocks are split against
//! `𝓗 = ℂ^{nd} ⊕ 𝓗′` as `C₀ = (Ĉ₂ C₀′)`, `C₁ = (Ĉ₁ C₁′)`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    block, block2, c, eye, hermitian_eigenvalues, hermitian_min_eig, hstack, imag_part, inverse_checked, null_space,
    sigma_max, sigma_min, zeros, CMat, C64,
};
use crate::expr::{DiffExpr, Endpoint};
use crate::ode::{IntegratorConfig, SolutionFrame};
use crate::quad::{simpson_with_error, tail_estimate, uniform_grid};
use crate::weyl::{weyl, z0_frame, TripletKind, WeylMatrix, WeylOptions};

pub type PairFn = Arc<dyn Fn(C64) -> (CMat, CMat) + Send + Sync>;

#[derive(Clone)]
pub enum PairForm {
    Constant { c0: CMat, c1: CMat },
    Holomorphic(PairFn),
}

#[derive(Clone)]
pub struct NevanlinnaPair {
    /// Dimension of the boundary space `𝓗`.
    pub h: usize,
    pub form: PairForm,
    pub label: String,
}

impl fmt::Debug for NevanlinnaPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.form {
            PairForm::Constant { .. } => "constant",
            PairForm::Holomorphic(_) => "holomorphic",
        };
        write!(f, "NevanlinnaPair({}, h = {}, {kind})", self.label, self.h)
    }
}

/// Rows of `(C₀ C₁)` orthonormalized by a left factor.
fn normalize(c0: &CMat, c1: &CMat) -> Result<(CMat, CMat)> {
    let h = c0.ncols();
    if c0.shape() != c1.shape() || c0.nrows() != h {
        return Err(Error::DimensionMismatch(format!(
            "pair blocks must both be {h}×{h}, got {:?} and {:?}",
            c0.shape(),
            c1.shape()
        )));
    }
    let row = hstack(c0, c1);
    let qr = row.adjoint().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..h).map(|i| r[(i, i)].norm()).collect();
    let hi = diag.iter().copied().fold(0.0, f64::max);
    if !(hi > 0.0) || diag.iter().any(|&x| x <= 1e-12 * hi) {
        return Err(Error::RankDeficientPair);
    }
    let q = qr.q().adjoint();
    Ok((block(&q, 0, 0, h, h), block(&q, 0, h, h, h)))
}

/// Pair of the adjoint relation `τ*` for `τ = ker (C₀ C₁)`.
fn adjoint_pair(c0: &CMat, c1: &CMat) -> Result<(CMat, CMat)> {
    let h = c0.ncols();
    let k = null_space(&hstack(c0, c1), 1e-12);
    if k.ncols() != h {
        return Err(Error::RankDeficientPair);
    }
    let (k0, k1) = (block(&k, 0, 0, h, h), block(&k, h, 0, h, h));
    Ok((k1.adjoint(), -k0.adjoint()))
}

impl NevanlinnaPair {
    pub fn constant(c0: CMat, c1: CMat) -> Result<Self> {
        let h = c0.ncols();
        let (c0, c1) = normalize(&c0, &c1)?;
        Ok(Self { h, form: PairForm::Constant { c0, c1 }, label: "constant".into() })
    }

    pub fn holomorphic(h: usize, f: PairFn) -> Self {
        Self { h, form: PairForm::Holomorphic(f), label: "holomorphic".into() }
    }

    /// The pair `(c0, c1)` on `ℂ₊`, extended to `ℂ₋` by `τ(λ̄) = τ(λ)*`;
    /// real `λ` uses `(c0, c1)`.
    pub fn from_upper_half_plane(c0: CMat, c1: CMat) -> Result<Self> {
        let h = c0.ncols();
        let (c0, c1) = normalize(&c0, &c1)?;
        let (d0, d1) = adjoint_pair(&c0, &c1)?;
        let f: PairFn = Arc::new(move |l: C64| if l.im < 0.0 { (d0.clone(), d1.clone()) } else { (c0.clone(), c1.clone()) });
        Ok(Self { h, form: PairForm::Holomorphic(f), label: "upper-constant".into() })
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    /// `(I, 0)`: the condition `Γ₀y = 0` defining `A₀`.
    pub fn tau0(h: usize) -> Self {
        Self::constant(eye(h), zeros(h, h)).expect("identity pair").with_label("tau0")
    }

    /// `(0, I)`: the condition `Γ₁y = 0`, i.e. `y^(1) = 0` at the ends.
    pub fn dirichlet(h: usize) -> Self {
        Self::constant(zeros(h, h), eye(h)).expect("identity pair").with_label("dirichlet")
    }

    /// Random constant self-adjoint pair `((I+U)/2, i(I−U)/2)` with `U`
    /// unitary.
    pub fn random_self_adjoint(h: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = crate::linalg::random_unitary(h, &mut rng);
        let c0 = (eye(h) + &u) * c(0.5, 0.0);
        let c1 = (eye(h) - &u) * c(0.0, 0.5);
        Self::constant(c0, c1).expect("Cayley pair has full rank").with_label(&format!("random-sa-{seed}"))
    }

    /// The scalar-valued family `τ(λ) = λ I`, i.e. `(C₀, C₁) = (−λ I, I)`.
    pub fn linear(h: usize) -> Self {
        let f: PairFn = Arc::new(move |l: C64| (eye(h) * (-l), eye(h)));
        Self::holomorphic(h, f).with_label("linear")
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, PairForm::Constant { .. })
    }

    /// Normalized `(C₀(λ), C₁(λ))`.
    pub fn at(&self, lambda: C64) -> Result<(CMat, CMat)> {
        match &self.form {
            PairForm::Constant { c0, c1 } => Ok((c0.clone(), c1.clone())),
            PairForm::Holomorphic(f) => {
                let (c0, c1) = f(lambda);
                if c0.ncols() != self.h {
                    return Err(Error::DimensionMismatch(format!("pair callback returned {} columns", c0.ncols())));
                }
                normalize(&c0, &c1)
            }
        }
    }

    /// The four blocks `(Ĉ₂, C₀′, Ĉ₁, C₁′)` at `λ`; primed blocks are empty
    /// when `h = nd`.
    pub fn blocks(&self, lambda: C64, nd: usize) -> Result<PairBlocks> {
        let (c0, c1) = self.at(lambda)?;
        let h = self.h;
        if nd > h {
            return Err(Error::DimensionMismatch(format!("nd = {nd} exceeds h = {h}")));
        }
        Ok(PairBlocks {
            c_hat2: block(&c0, 0, 0, h, nd),
            c0_prime: block(&c0, 0, nd, h, h - nd),
            c_hat1: block(&c1, 0, 0, h, nd),
            c1_prime: block(&c1, 0, nd, h, h - nd),
            c0,
            c1,
        })
    }

    /// Constant pair with `Im(C₁C₀*) = 0` and `C₀ ± iC₁` invertible.
    pub fn is_constant_self_adjoint(&self) -> bool {
        match &self.form {
            PairForm::Constant { c0, c1 } => {
                let i = C64::i();
                imag_part(&(c1 * c0.adjoint())).norm() < 1e-10
                    && sigma_min(&(c0 + c1 * i)) > 1e-10
                    && sigma_min(&(c0 - c1 * i)) > 1e-10
            }
            PairForm::Holomorphic(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBlocks {
    pub c0: CMat,
    pub c1: CMat,
    pub c_hat2: CMat,
    pub c0_prime: CMat,
    pub c_hat1: CMat,
    pub c1_prime: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    /// Worst defect of each Nevanlinna condition over the probes.
    pub defects: [f64; 3],
    pub constant_self_adjoint: bool,
}

/// Check admissibility and the Nevanlinna conditions at `probes`.
pub fn validate_pair(tau: &NevanlinnaPair, probes: &[C64]) -> Result<PairReport> {
    let tol = 1e-10;
    let mut defects = [0.0f64; 3];
    for &l in probes {
        let (c0, c1) = tau.at(l)?;
        let (d0, d1) = tau.at(l.conj())?;
        let sym = (&c1 * d0.adjoint() - &c0 * d1.adjoint()).norm();
        if sym > tol {
            return Err(Error::NevanlinnaViolation { which: 3, re: l.re, im: l.im, defect: sym });
        }
        defects[2] = defects[2].max(sym);
        if l.im == 0.0 {
            continue;
        }
        let sg = l.im.signum();
        let pos = -hermitian_min_eig(&(imag_part(&(&c1 * c0.adjoint())) * c(sg, 0.0)));
        if pos > tol {
            return Err(Error::NevanlinnaViolation { which: 1, re: l.re, im: l.im, defect: pos });
        }
        defects[0] = defects[0].max(pos.max(0.0));
        let inv = sigma_min(&(&c0 - &c1 * C64::new(0.0, sg)));
        if inv <= tol {
            return Err(Error::NevanlinnaViolation { which: 2, re: l.re, im: l.im, defect: inv });
        }
        defects[1] = defects[1].max(1.0 / inv);
    }
    Ok(PairReport { defects, constant_self_adjoint: tau.is_constant_self_adjoint() })
}

/// Range representation `τ(λ) = {(K₀h, K₁h)}` with `K₀(λ) = −C₁*(λ̄)`,
/// `K₁(λ) = C₀*(λ̄)`.
pub fn pair_to_kernel_form(tau: &NevanlinnaPair, lambda: C64) -> Result<(CMat, CMat)> {
    let (c0, c1) = tau.at(lambda.conj())?;
    Ok((-c1.adjoint(), c0.adjoint()))
}

/// Constant pair of a constant range representation: `C₀ = K₁*`, `C₁ = −K₀*`.
pub fn kernel_to_pair(k0: &CMat, k1: &CMat) -> Result<NevanlinnaPair> {
    NevanlinnaPair::constant(k1.adjoint(), -k0.adjoint())
}

/// `‖C₀h₀ + C₁h₁‖`: zero iff `(h₀, h₁)` lies in the relation.
pub fn membership_residual(c0: &CMat, c1: &CMat, h0: &CMat, h1: &CMat) -> f64 {
    (c0 * h0 + c1 * h1).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Unperturbed,
    ViaBlocks,
    ViaKrein,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharMatrix {
    pub lambda: C64,
    pub omega: CMat,
    pub route: Route,
}

/// `Ω₀ = [[m, −I/2], [−I/2, 0]]`.
pub fn omega0(w: &WeylMatrix) -> CharMatrix {
    let nd = w.nd();
    let half = eye(nd) * c(-0.5, 0.0);
    CharMatrix { lambda: w.lambda, omega: block2(&w.m, &half, &half, &zeros(nd, nd)), route: Route::Unperturbed }
}

/// `S(λ)`; see [`WeylMatrix::s_matrix`].
pub fn s_matrix(w: &WeylMatrix) -> CMat {
    w.s_matrix()
}

/// `(C₀ − C₁M)⁻¹` at `λ`, or `BoundaryResonance`.
pub fn resonance_inverse(tau: &NevanlinnaPair, w: &WeylMatrix) -> Result<(PairBlocks, CMat)> {
    let nd = w.nd();
    if tau.h != w.h() {
        return Err(Error::DimensionMismatch(format!("pair acts on dimension {}, triplet on {}", tau.h, w.h())));
    }
    let b = tau.blocks(w.lambda, nd)?;
    let a = &b.c0 - &b.c1 * w.full();
    let x = inverse_checked(&a, 1e-12).ok_or(Error::BoundaryResonance { re: w.lambda.re, im: w.lambda.im })?;
    Ok((b, x))
}

/// `Ω_τ(λ)` from the resolvent-free block form, compressed to
/// `ℂ^{nd} ⊕ ℂ^{nd}`.
pub fn omega_tau_blocks(tau: &NevanlinnaPair, w: &WeylMatrix) -> Result<CharMatrix> {
    let nd = w.nd();
    let h = w.h();
    let (b, x) = resonance_inverse(tau, w)?;
    let m = w.full();
    let xc0 = &x * &b.c0;
    let xc1 = &x * &b.c1;
    let half = eye(h) * c(0.5, 0.0);
    let w11 = &m * &xc0;
    let w12 = -&half - &m * &xc1;
    let w21 = &half - &xc0;
    let w22 = xc1;
    let cut = |a: &CMat| block(a, 0, 0, nd, nd);
    Ok(CharMatrix { lambda: w.lambda, omega: block2(&cut(&w11), &cut(&w12), &cut(&w21), &cut(&w22)), route: Route::ViaBlocks })
}

/// `Ω_τ(λ) = Ω₀(λ) − S(λ)(τ(λ)+M(λ))⁻¹S*(λ̄)` with
/// `(τ+M)⁻¹ = −(C₀−C₁M)⁻¹C₁`; `w_conj` is the Weyl matrix at `λ̄`.
pub fn omega_tau_krein(tau: &NevanlinnaPair, w: &WeylMatrix, w_conj: &WeylMatrix) -> Result<CharMatrix> {
    let (b, x) = resonance_inverse(tau, w)?;
    let corr = w.s_matrix() * (&x * &b.c1) * w_conj.s_matrix().adjoint();
    let om = omega0(w).omega + corr;
    Ok(CharMatrix { lambda: w.lambda, omega: om, route: Route::ViaKrein })
}

/// `U_τ = (u₂τ u₁τ)` with `u_jτ = (−1)^{j−1} Z₀ (C₀ − C₁M)⁻¹ Ĉ_j`.
pub fn u_tau_solutions(tau: &NevanlinnaPair, w: &WeylMatrix, z0: &SolutionFrame) -> Result<SolutionFrame> {
    let (b, x) = resonance_inverse(tau, w)?;
    let g = hstack(&(-(&x * &b.c_hat2)), &(&x * &b.c_hat1));
    Ok(z0.right_mul(&g))
}

/// Residual of `(C₀Γ₀ − C₁Γ₁)U_τ = (−Ĉ₂, Ĉ₁)`.
pub fn u_tau_boundary_residual(
    tau: &NevanlinnaPair,
    w: &WeylMatrix,
    u: &SolutionFrame,
    b_end: f64,
) -> Result<f64> {
    let nd = w.nd();
    let b = tau.blocks(w.lambda, nd)?;
    let (g0, g1) = crate::weyl::boundary_values(u, w.kind, b_end)?;
    let lhs = &b.c0 * g0 - &b.c1 * g1;
    let rhs = hstack(&(-&b.c_hat2), &b.c_hat1);
    Ok((lhs - rhs).norm())
}

/// Data attached to one spectral parameter: Weyl matrices at `λ` and `λ̄`,
/// `Ω_τ(λ)` and `U_τ(·, λ)` on a quadrature grid.
#[derive(Debug, Clone)]
pub struct TauPoint {
    pub w: WeylMatrix,
    pub omega: CharMatrix,
    pub u: SolutionFrame,
    /// Quadrature nodes (a subset of `u.grid`).
    pub nodes: Vec<f64>,
}

impl TauPoint {
    pub fn new(tau: &NevanlinnaPair, w: WeylMatrix, z0: &SolutionFrame, nodes: Vec<f64>) -> Result<Self> {
        let omega = omega_tau_blocks(tau, &w)?;
        let u = u_tau_solutions(tau, &w, z0)?;
        Ok(Self { w, omega, u, nodes })
    }

    /// Weyl matrix, `Z₀` and `U_τ` at `λ` on a uniform grid of the given
    /// spacing over `[0, b]` or `[0, cutoff]`.
    pub fn compute(
        e: &DiffExpr,
        tau: &NevanlinnaPair,
        lambda: C64,
        opts: &WeylOptions,
        spacing: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        let w = weyl(e, lambda, opts, cfg)?;
        let end = match e.endpoint() {
            Endpoint::Regular(b) => b,
            Endpoint::SingularMinimal(_) => w.cutoff.ok_or(Error::WrongEndpoint("singular"))?,
        };
        let mut k = (end / spacing).ceil() as usize;
        k += k % 2;
        let nodes = uniform_grid(0.0, end, k.max(8));
        let z0 = z0_frame(e, &w, &nodes, cfg)?;
        Self::new(tau, w, &z0, nodes)
    }

    fn values(&self) -> Result<Vec<CMat>> {
        self.nodes.iter().map(|&t| self.u.value(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadReport {
    pub value: CMat,
    /// Richardson estimate of the discretization error.
    pub discretization: f64,
    /// Estimate of the integral beyond the last node (0 for a regular end).
    pub tail: f64,
}

/// `∫ U_τ*(t, λ) U_τ(t, μ) dt` over the shared nodes.
pub fn gram(a: &TauPoint, b: &TauPoint, quad_tol: f64) -> Result<QuadReport> {
    if a.nodes != b.nodes {
        return Err(Error::DimensionMismatch("points use different quadrature grids".into()));
    }
    let (va, vb) = (a.values()?, b.values()?);
    let integrand: Vec<CMat> = va.iter().zip(vb.iter()).map(|(x, y)| x.adjoint() * y).collect();
    let (value, discretization) = simpson_with_error(&a.nodes, &integrand);
    let tail = match a.w.kind {
        TripletKind::Regular => 0.0,
        TripletKind::MinimalSingular => tail_estimate(&a.nodes, &integrand),
    };
    let est = discretization.max(tail);
    if !(est <= quad_tol) {
        return Err(Error::QuadratureNotConverged { estimate: est, tol: quad_tol });
    }
    Ok(QuadReport { value, discretization, tail })
}

/// `β(λ) = (−(K₁ + MK₀)⁻¹M↾ℂ^{nd}, (K₁ + MK₀)⁻¹↾ℂ^{nd})`.
pub fn beta(k: &(CMat, CMat), w: &WeylMatrix) -> Result<CMat> {
    let nd = w.nd();
    let h = w.h();
    let m = w.full();
    let a = &k.1 + &m * &k.0;
    let inv = inverse_checked(&a, 1e-12).ok_or(Error::BoundaryResonance { re: w.lambda.re, im: w.lambda.im })?;
    let left = -(&inv * block(&m, 0, 0, h, nd));
    Ok(hstack(&left, &block(&inv, 0, 0, h, nd)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub residual: f64,
    /// Norm of the `K`-correction term.
    pub correction: f64,
    pub quad: QuadReport,
}

/// Residual of
/// `Ω_τ(μ) − Ω_τ*(λ) = (μ−λ̄)∫U_τ*(λ)U_τ(μ) + β*(λ)(K₀*(λ)K₁(μ) − K₁*(λ)K₀(μ))β(μ)`.
pub fn identity_residual(tau: &NevanlinnaPair, at_l: &TauPoint, at_m: &TauPoint, quad_tol: f64) -> Result<IdentityReport> {
    let (l, mu) = (at_l.w.lambda, at_m.w.lambda);
    if l.im == 0.0 || mu.im == 0.0 {
        return Err(Error::RealLambdaUnsupported);
    }
    let q = gram(at_l, at_m, quad_tol)?;
    let kl = pair_to_kernel_form(tau, l)?;
    let km = pair_to_kernel_form(tau, mu)?;
    let bl = beta(&kl, &at_l.w)?;
    let bm = beta(&km, &at_m.w)?;
    let kt = kl.0.adjoint() * &km.1 - kl.1.adjoint() * &km.0;
    let corr = bl.adjoint() * kt * bm;
    let lhs = &at_m.omega.omega - at_l.omega.omega.adjoint();
    let rhs = &q.value * (mu - l.conj()) + &corr;
    Ok(IdentityReport { residual: (lhs - rhs).norm(), correction: corr.norm(), quad: q })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gap: CMat,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// `Im Ω_τ(μ)/Im μ − ∫U_τ*(μ)U_τ(μ)`.
pub fn nevanlinna_gap(at_mu: &TauPoint, quad_tol: f64) -> Result<GapReport> {
    let mu = at_mu.w.lambda;
    if mu.im == 0.0 {
        return Err(Error::RealLambdaUnsupported);
    }
    let q = gram(at_mu, at_mu, quad_tol)?;
    let gap = imag_part(&at_mu.omega.omega) * c(1.0 / mu.im, 0.0) - crate::linalg::hermitian_part(&q.value);
    let ev = hermitian_eigenvalues(&gap);
    Ok(GapReport { min_eig: ev[0], max_eig: *ev.last().expect("nonempty"), gap })
}

/// `‖Ω*(λ̄) − Ω(λ)‖∞`.
pub fn symmetry_defect(at: &CharMatrix, at_conj: &CharMatrix) -> f64 {
    crate::linalg::max_abs_diff(&at_conj.omega.adjoint(), &at.omega)
}

/// Relative size of `Ω`, used to scale tolerances.
pub fn omega_scale(om: &CharMatrix) -> f64 {
    sigma_max(&om.omega).max(1.0)
}
