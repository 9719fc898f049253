//! λ-grid sweeps over a problem file and the verification suite.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::problem::{GridSpec, ProblemFile};
use crate::charmat::{
    identity_residual, nevanlinna_gap, omega_tau_blocks, omega_tau_krein, symmetry_defect, u_tau_boundary_residual,
    NevanlinnaPair, TauPoint,
};
use crate::error::{Error, Result};
use crate::expr::DiffExpr;
use crate::linalg::{c, max_abs, max_abs_diff, CMat, C64};
use crate::ode::IntegratorConfig;
use crate::quad::uniform_grid;
use crate::resolvent::{
    apply_resolvent, eig_scan, green_eval_shtraus_kernel, green_eval_triplet, krein_resolvent, max_diff, sample_rhs,
    EigScanOptions, GreenKernel, KernelOptions, QuadConfig, ResolventOutput,
};
use crate::weyl::{weyl, z0_frame, TripletKind, WeylMatrix, WeylOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Mfun,
    Charmat,
    Green,
    Resolve,
    Spectrum,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mfun => "mfun",
            Command::Charmat => "charmat",
            Command::Green => "green",
            Command::Resolve => "resolve",
            Command::Spectrum => "spectrum",
            Command::Verify => "verify",
        }
    }
}

/// Command-line overrides applied on top of a problem file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepOptions {
    pub grid: Option<GridSpec>,
    pub tol: Option<f64>,
    pub cutoff: Option<f64>,
}

/// Row-major complex matrix as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixOut {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixOut {
    fn from(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub source: String,
    /// `point`, `eigenvalue` or `spectrum`.
    pub kind: String,
    pub lambda: [f64; 2],
    pub matrices: BTreeMap<String, MatrixOut>,
    pub diagnostics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub error: Option<String>,
    pub config_hash: String,
}

impl Record {
    fn new(source: &str, kind: &str, lambda: C64, hash: &str) -> Self {
        Self {
            source: source.into(),
            kind: kind.into(),
            lambda: [lambda.re, lambda.im],
            matrices: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            checks: BTreeMap::new(),
            error: None,
            config_hash: hash.into(),
        }
    }

    fn mat(&mut self, name: &str, m: &CMat) {
        self.matrices.insert(name.into(), m.into());
    }

    /// Store a finite diagnostic; non-finite values are recorded as a note.
    fn diag(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.diagnostics.insert(name.into(), v);
        } else {
            self.checks.insert(format!("{name}_finite"), false);
        }
    }

    /// Record `value` and whether it lies below `bound`.
    fn check_below(&mut self, name: &str, value: f64, bound: f64) {
        self.diag(name, value);
        self.checks.insert(name.into(), value <= bound);
    }

    fn fail(&mut self, name: &str, e: &Error) {
        self.checks.insert(name.into(), false);
        self.note(name, e);
    }

    fn note(&mut self, name: &str, e: &Error) {
        let msg = format!("{name}: {e}");
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub command: Command,
    pub records: Vec<Record>,
}

impl SweepResult {
    /// Names of failed checks, as `source@λ:check`.
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.records {
            for (k, ok) in &r.checks {
                if !ok {
                    out.push(format!("{}@({},{}):{k}", r.source, r.lambda[0], r.lambda[1]));
                }
            }
        }
        out
    }

    pub fn error_count(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn merge(mut self, other: SweepResult) -> SweepResult {
        self.records.extend(other.records);
        sort_records(&mut self.records);
        self
    }
}

fn sort_records(r: &mut [Record]) {
    r.sort_by(|a, b| {
        a.lambda[0]
            .total_cmp(&b.lambda[0])
            .then(a.lambda[1].total_cmp(&b.lambda[1]))
            .then_with(|| a.source.cmp(&b.source))
            .then_with(|| a.kind.cmp(&b.kind))
    });
}

/// SHA-256 of the problem, the command and the overrides.
pub fn config_hash(p: &ProblemFile, cmd: Command, opts: &SweepOptions) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(p).expect("problem serializes").as_bytes());
    h.update(b"|");
    h.update(cmd.name().as_bytes());
    h.update(b"|");
    h.update(serde_json::to_string(opts).expect("options serialize").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Ctx {
    problem: ProblemFile,
    e: DiffExpr,
    tau: NevanlinnaPair,
    cfg: IntegratorConfig,
    wopts: WeylOptions,
    quad: QuadConfig,
    spacing: f64,
    source: String,
    hash: String,
}

impl Ctx {
    fn build(p: &ProblemFile, source: &str, cmd: Command, opts: &SweepOptions) -> Result<Self> {
        let q = p.quadrature.clone().unwrap_or_default();
        let spacing = q.spacing.unwrap_or(match p.kind() {
            TripletKind::Regular => 0.0025,
            TripletKind::MinimalSingular => 0.01,
        });
        Ok(Self {
            problem: p.clone(),
            e: p.expr(opts.cutoff)?,
            tau: p.pair()?,
            cfg: p.integrator()?,
            wopts: p.weyl_options(opts.tol, opts.cutoff),
            quad: QuadConfig { tol: q.tol.unwrap_or(1e-6) },
            spacing,
            source: source.into(),
            hash: config_hash(p, cmd, opts),
        })
    }

    fn kernel_options(&self, extent: Option<f64>) -> KernelOptions {
        KernelOptions { spacing: self.spacing, extent, extra_nodes: Vec::new(), weyl: self.wopts.clone() }
    }

    fn weyl(&self, l: C64) -> Result<WeylMatrix> {
        weyl(&self.e, l, &self.wopts, &self.cfg)
    }

    fn rhs(&self, k: &GreenKernel) -> Vec<CMat> {
        let dir = self.problem.rhs_direction();
        let prof = match &self.problem.resolve {
            Some(r) => r.rhs.clone(),
            None => match self.problem.kind() {
                TripletKind::Regular => super::problem::RhsSpec::One,
                TripletKind::MinimalSingular => super::problem::RhsSpec::ExpDecay(1.0),
            },
        };
        sample_rhs(k, |t| &dir * c(prof.eval(t), 0.0))
    }
}

/// Run `cmd` on one problem.
pub fn run_sweep(p: &ProblemFile, source: &str, cmd: Command, opts: &SweepOptions) -> Result<SweepResult> {
    let ctx = Ctx::build(p, source, cmd, opts)?;
    let lambdas: Vec<C64> = opts.grid.as_ref().or(p.lambda.as_ref()).map(GridSpec::points).unwrap_or_default();
    let mut records: Vec<Record> = match cmd {
        Command::Spectrum => spectrum_records(&ctx, false)?,
        _ => {
            if lambdas.is_empty() {
                return Err(Error::SchemaError { path: format!("{source}:lambda"), msg: "no spectral parameters".into() });
            }
            let idx: Vec<usize> = (0..lambdas.len()).collect();
            idx.par_iter()
                .map(|&i| {
                    let l = lambdas[i];
                    let mut r = Record::new(&ctx.source, "point", l, &ctx.hash);
                    match cmd {
                        Command::Mfun => mfun(&ctx, l, &mut r),
                        Command::Charmat => charmat(&ctx, l, &mut r),
                        Command::Green => green(&ctx, l, &mut r),
                        Command::Resolve => resolve(&ctx, l, &mut r),
                        Command::Verify => verify(&ctx, l, i, &mut r),
                        Command::Spectrum => unreachable!(),
                    }
                    r
                })
                .collect()
        }
    };
    if cmd == Command::Verify && p.spectrum.is_some() {
        records.extend(spectrum_records(&ctx, true)?);
    }
    sort_records(&mut records);
    Ok(SweepResult { command: cmd, records })
}

fn mfun(ctx: &Ctx, l: C64, r: &mut Record) {
    match ctx.weyl(l) {
        Ok(w) => {
            r.mat("m", &w.m);
            if w.kind == TripletKind::Regular {
                r.mat("M", &w.full());
            }
            if let Some(b) = w.cutoff {
                r.diag("cutoff", b);
            }
            if let Some(x) = w.disc_radius {
                r.diag("disc_radius", x);
            }
            r.diag("converged", f64::from(u8::from(w.converged)));
        }
        Err(e) => r.note("weyl", &e),
    }
}

fn weyl_pair(ctx: &Ctx, l: C64) -> Result<(WeylMatrix, WeylMatrix)> {
    let w = ctx.weyl(l)?;
    let wc = if l.im == 0.0 { w.clone() } else { ctx.weyl(l.conj())? };
    Ok((w, wc))
}

fn charmat(ctx: &Ctx, l: C64, r: &mut Record) {
    let go = |r: &mut Record| -> Result<()> {
        let (w, wc) = weyl_pair(ctx, l)?;
        let a = omega_tau_blocks(&ctx.tau, &w)?;
        let b = omega_tau_krein(&ctx.tau, &w, &wc)?;
        let ac = omega_tau_blocks(&ctx.tau, &wc)?;
        r.mat("omega", &a.omega);
        r.diag("route_disagreement", max_abs_diff(&a.omega, &b.omega));
        r.diag("symmetry_defect", symmetry_defect(&a, &ac));
        if l.im != 0.0 {
            let nodes = quad_nodes(ctx, &w);
            let z0 = z0_frame(&ctx.e, &w, &nodes, &ctx.cfg)?;
            let p = TauPoint::new(&ctx.tau, w, &z0, nodes)?;
            let g = nevanlinna_gap(&p, 0.1 * ctx.quad.tol)?;
            r.diag("gap_min_eig", g.min_eig);
            r.diag("gap_norm", g.gap.norm());
        }
        Ok(())
    };
    if let Err(e) = go(r) {
        r.note("charmat", &e);
    }
}

fn quad_nodes(ctx: &Ctx, w: &WeylMatrix) -> Vec<f64> {
    quad_nodes_to(ctx, w.cutoff.unwrap_or_else(|| ctx.e.right_end()))
}

fn quad_nodes_to(ctx: &Ctx, end: f64) -> Vec<f64> {
    let mut k = (end / ctx.spacing).ceil() as usize;
    k += k % 2;
    uniform_grid(0.0, end, k.max(8))
}

/// `(x, t)` evaluation points of the `green` command.
fn green_points(ctx: &Ctx, extent: f64) -> Vec<[f64; 2]> {
    if let Some(pts) = ctx.problem.green.as_ref().and_then(|g| g.points.clone()) {
        return pts;
    }
    let n = ctx.problem.green.as_ref().and_then(|g| g.grid).unwrap_or(5);
    let e = ctx.problem.green.as_ref().and_then(|g| g.extent).unwrap_or(extent).min(extent);
    tensor_points(n, e)
}

/// `n × n` points on `(0, e)²` that avoid the diagonal.
fn tensor_points(n: usize, e: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push([(i as f64 + 0.5) * e / n as f64, (j as f64 + 0.25) * e / n as f64]);
        }
    }
    out
}

fn default_green_extent(k: &GreenKernel) -> f64 {
    match k.kind {
        TripletKind::Regular => k.cutoff,
        TripletKind::MinimalSingular => k.cutoff.min(4.0),
    }
}

fn green(ctx: &Ctx, l: C64, r: &mut Record) {
    let go = |r: &mut Record| -> Result<()> {
        let k = GreenKernel::build(&ctx.e, &ctx.tau, l, &ctx.kernel_options(None), &ctx.cfg)?;
        let mut worst: f64 = 0.0;
        for [x, t] in green_points(ctx, default_green_extent(&k)) {
            let g = green_eval_triplet(&k, x, t)?;
            let h = green_eval_shtraus_kernel(&k, x, t)?;
            worst = worst.max(max_abs_diff(&g, &h));
            r.mat(&format!("G[x={x};t={t}]"), &g);
        }
        r.diag("route_disagreement", worst);
        Ok(())
    };
    if let Err(e) = go(r) {
        r.note("green", &e);
    }
}

/// `y` at `t` by linear interpolation between nodes.
fn sample_at(out: &ResolventOutput, d: usize, t: f64) -> CMat {
    let vals = out.values(d);
    let xs = &out.nodes;
    let i = xs.partition_point(|&x| x < t).clamp(1, xs.len() - 1);
    let (a, b) = (xs[i - 1], xs[i]);
    let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
    &vals[i - 1] * c(1.0 - s, 0.0) + &vals[i] * c(s, 0.0)
}

fn resolve(ctx: &Ctx, l: C64, r: &mut Record) {
    let go = |r: &mut Record| -> Result<()> {
        let extent = ctx.problem.resolve.as_ref().and_then(|s| s.extent);
        let k = GreenKernel::build(&ctx.e, &ctx.tau, l, &ctx.kernel_options(extent), &ctx.cfg)?;
        let f = ctx.rhs(&k);
        let y = apply_resolvent(&ctx.e, &k, &f, &ctx.quad)?;
        let samples = ctx
            .problem
            .resolve
            .as_ref()
            .and_then(|s| s.samples.clone())
            .unwrap_or_else(|| uniform_grid(0.0, k.cutoff, 10));
        let d = ctx.e.d();
        let mut m = CMat::zeros(d, samples.len());
        for (j, &t) in samples.iter().enumerate() {
            m.set_column(j, &sample_at(&y, d, t).column(0));
        }
        r.mat("y", &m);
        r.diag("ode_residual", y.ode_residual);
        r.diag("boundary_residual", y.boundary_residual);
        r.diag("quad_error", y.quad_error);
        r.diag("tail", y.tail);
        if ctx.tau.is_constant_self_adjoint() {
            let kr = krein_resolvent(&ctx.e, &k, &f, &ctx.quad)?;
            r.diag("krein_disagreement", max_diff(&kr.values(d), &y.values(d)));
        }
        Ok(())
    };
    if let Err(e) = go(r) {
        r.note("resolve", &e);
    }
}

fn spectrum_records(ctx: &Ctx, checking: bool) -> Result<Vec<Record>> {
    let spec = ctx.problem.spectrum.clone().ok_or_else(|| Error::SchemaError {
        path: format!("{}:spectrum", ctx.source),
        msg: "spectrum section required".into(),
    })?;
    let opts = EigScanOptions { grid: spec.grid, tol: spec.tol.unwrap_or(1e-13), ..Default::default() };
    let [lo, hi] = spec.range;
    let found = eig_scan(&ctx.tau, &ctx.e, lo, hi, &opts, &ctx.cfg);
    if !checking {
        let eigs = found?;
        return Ok(eigs
            .iter()
            .map(|&x| {
                let mut r = Record::new(&ctx.source, "eigenvalue", c(x, 0.0), &ctx.hash);
                if let Ok(p) = crate::resolvent::spectral_probe(&ctx.tau, &ctx.e, c(x, 0.0), &ctx.wopts, &ctx.cfg) {
                    r.diag("sigma_ratio", p.sigma_min() / p.sigma_max());
                }
                r
            })
            .collect());
    }
    let mut r = Record::new(&ctx.source, "spectrum", c(lo, 0.0), &ctx.hash);
    match found {
        Ok(eigs) => {
            r.diag("count", eigs.len() as f64);
            if let Some(want) = ctx.problem.expect.as_ref().and_then(|x| x.spectrum.clone()) {
                let ok = eigs.len() == want.len();
                let worst = eigs
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(if ok { 0.0 } else { f64::INFINITY }, f64::max);
                r.checks.insert("spectrum_count".into(), ok);
                if ok {
                    r.check_below("spectrum_rel_err", worst, 1e-6);
                }
            }
        }
        Err(e) => r.fail("spectrum", &e),
    }
    Ok(vec![r])
}

/// Cauchy–Riemann residual `|∂ₓf − ∂_y f / i|` of `f` at `l` from
/// fourth-order central differences with step `h`.
pub fn cauchy_riemann<F: Fn(C64) -> Result<CMat>>(f: F, l: C64, h: f64) -> Result<f64> {
    let diff = |dir: C64| -> Result<CMat> {
        let s = dir * h;
        let num = (f(l - s * 2.0)? - f(l + s * 2.0)?) + (f(l + s)? - f(l - s)?) * c(8.0, 0.0);
        Ok(num / (s * 12.0))
    };
    Ok((diff(c(1.0, 0.0))? - diff(c(0.0, 1.0))?).norm())
}

fn verify(ctx: &Ctx, l: C64, index: usize, r: &mut Record) {
    // Weyl function, symmetry, holomorphy, oracle
    let (w, wc) = match weyl_pair(ctx, l) {
        Ok(x) => x,
        Err(e) => return r.fail("weyl", &e),
    };
    let scale_m = max_abs(&w.full()).max(1.0);
    r.mat("M", &w.full());
    r.check_below("weyl_symmetry", max_abs_diff(&wc.full().adjoint(), &w.full()) / scale_m, 1e-9);
    if l.im != 0.0 {
        let h = (1e-2 * l.norm().max(1.0)).min(0.25 * l.im.abs());
        match cauchy_riemann(|z| ctx.weyl(z).map(|w| w.m), l, h) {
            Ok(v) => r.check_below("holomorphy_m", v / max_abs(&w.m).max(1.0), 1e-6),
            Err(e) => r.fail("holomorphy_m", &e),
        }
    }
    if let Some(ms) = ctx.problem.expect.as_ref().and_then(|x| x.m.clone()) {
        if let Some(&[re, im]) = ms.get(index) {
            let want = c(re, im);
            r.check_below("m_oracle", (w.m[(0, 0)] - want).norm() / want.norm().max(1e-300), 1e-6);
        }
    }
    // characteristic matrix
    let omega = match omega_tau_blocks(&ctx.tau, &w) {
        Ok(o) => o,
        Err(e) => return r.fail("omega", &e),
    };
    r.mat("omega", &omega.omega);
    let so = max_abs(&omega.omega).max(1.0);
    match omega_tau_krein(&ctx.tau, &w, &wc) {
        Ok(b) => r.check_below("omega_routes", max_abs_diff(&b.omega, &omega.omega) / so, 1e-9),
        Err(e) => r.fail("omega_routes", &e),
    }
    match omega_tau_blocks(&ctx.tau, &wc) {
        Ok(oc) => r.check_below("omega_symmetry", symmetry_defect(&omega, &oc) / so, 1e-9),
        Err(e) => r.fail("omega_symmetry", &e),
    }
    // kernel, U_τ, gap, identity
    let k = match GreenKernel::build(&ctx.e, &ctx.tau, l, &ctx.kernel_options(None), &ctx.cfg) {
        Ok(k) => k,
        Err(e) => return r.fail("kernel", &e),
    };
    let end = match k.kind {
        TripletKind::Regular => ctx.e.right_end(),
        TripletKind::MinimalSingular => k.cutoff,
    };
    match crate::charmat::u_tau_solutions(&ctx.tau, &w, &k.z0) {
        Ok(u) => match u_tau_boundary_residual(&ctx.tau, &w, &u, end) {
            Ok(v) => r.check_below("u_tau_boundary", v, 1e-8),
            Err(e) => r.fail("u_tau_boundary", &e),
        },
        Err(e) => r.fail("u_tau_boundary", &e),
    }
    if l.im != 0.0 {
        verify_gap_identity(ctx, l, &w, &k, r);
    }
    // Green routes and symmetry
    let ge = default_green_extent(&k);
    let pts = tensor_points(6, ge);
    let kc = if l.im == 0.0 {
        Ok(k.clone())
    } else {
        GreenKernel::build(&ctx.e, &ctx.tau, l.conj(), &ctx.kernel_options(None), &ctx.cfg)
    };
    let mut routes: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut gscale: f64 = 1.0;
    let mut err = None;
    for &[x, t] in &pts {
        let a = green_eval_triplet(&k, x, t);
        let b = green_eval_shtraus_kernel(&k, x, t);
        let s = kc.as_ref().map_err(Clone::clone).and_then(|kc| green_eval_triplet(kc, t, x));
        match (a, b, s) {
            (Ok(a), Ok(b), Ok(s)) => {
                gscale = gscale.max(max_abs(&a));
                routes = routes.max(max_abs_diff(&a, &b));
                sym = sym.max(max_abs_diff(&a.adjoint(), &s));
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => err = Some(e),
        }
    }
    match err {
        Some(e) => r.fail("green", &e),
        None => {
            r.check_below("green_routes", routes / gscale, 1e-7);
            r.check_below("green_symmetry", sym / gscale, 1e-7);
        }
    }
    // resolvent
    let f = ctx.rhs(&k);
    match apply_resolvent(&ctx.e, &k, &f, &ctx.quad) {
        Ok(y) => {
            r.check_below("ode_residual", y.ode_residual, 1e-4);
            r.check_below("boundary_residual", y.boundary_residual, 1e-8);
            r.diag("quad_error", y.quad_error);
            r.diag("tail", y.tail);
            if ctx.tau.is_constant_self_adjoint() {
                match krein_resolvent(&ctx.e, &k, &f, &ctx.quad) {
                    Ok(kr) => {
                        let d = ctx.e.d();
                        let s = y.values(d).iter().map(max_abs).fold(1.0, f64::max);
                        r.check_below("krein_agreement", max_diff(&kr.values(d), &y.values(d)) / s, 1e-6)
                    }
                    Err(e) => r.fail("krein_agreement", &e),
                }
            }
        }
        Err(e) => r.fail("resolvent", &e),
    }
}

fn verify_gap_identity(ctx: &Ctx, l: C64, w: &WeylMatrix, k: &GreenKernel, r: &mut Record) {
    let go = |r: &mut Record| -> Result<()> {
        let quad_tol = 0.1 * ctx.quad.tol;
        let mu = l + c(0.0, 0.5 * l.im.signum() * l.im.abs().max(1.0));
        let wm = ctx.weyl(mu)?;
        let end = match (w.cutoff, wm.cutoff) {
            (Some(a), Some(b)) => a.min(b).min(k.cutoff),
            _ => ctx.e.right_end(),
        };
        let nodes = quad_nodes_to(ctx, end);
        let za = z0_frame(&ctx.e, w, &nodes, &ctx.cfg)?;
        let zb = z0_frame(&ctx.e, &wm, &nodes, &ctx.cfg)?;
        let pa = TauPoint::new(&ctx.tau, w.clone(), &za, nodes.clone())?;
        let pb = TauPoint::new(&ctx.tau, wm, &zb, nodes)?;
        let g = nevanlinna_gap(&pa, quad_tol)?;
        r.check_below("gap_negativity", (-g.min_eig).max(0.0), 1e-6);
        r.diag("gap_min_eig", g.min_eig);
        if ctx.tau.is_constant_self_adjoint() {
            r.check_below("gap_equality", g.gap.norm(), 1e-6);
        }
        let id = identity_residual(&ctx.tau, &pa, &pb, quad_tol)?;
        r.check_below("identity", id.residual / max_abs(&pa.omega.omega).max(1.0), 1e-6);
        r.diag("identity_correction", id.correction);
        Ok(())
    };
    if let Err(e) = go(r) {
        r.fail("gap_identity", &e);
    }
}
