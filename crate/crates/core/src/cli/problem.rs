//! Problem files: JSON descriptions of an expression, an endpoint, a
//! boundary pair and the spectral parameters to sweep.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::charmat::NevanlinnaPair;
use crate::error::{Error, Result};
use crate::expr::{DiffExpr, Endpoint, Sampler};
use crate::linalg::{c, eye, zeros, CMat, C64};
use crate::ode::IntegratorConfig;
use crate::weyl::{TripletKind, WeylOptions};

/// A complex number written as `[re, im]` or as a bare real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Pair([f64; 2]),
    Real(f64),
}

impl ComplexSpec {
    pub fn value(self) -> C64 {
        match self {
            ComplexSpec::Pair([re, im]) => c(re, im),
            ComplexSpec::Real(re) => c(re, 0.0),
        }
    }
}

/// Row-major matrix of complex entries.
pub type MatrixSpec = Vec<Vec<ComplexSpec>>;

fn matrix(m: &MatrixSpec, rows: usize, cols: usize, what: &str) -> Result<CMat> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        let got_cols = m.first().map_or(0, Vec::len);
        return Err(Error::DimensionMismatch(format!("{what} must be {rows}×{cols}, got {}×{got_cols}", m.len())));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| m[i][j].value()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointSpec {
    /// Regular right end `b`.
    Regular(f64),
    /// Singular right end with minimal indices; the value is the first cutoff.
    SingularMinimal(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `q(t) = Σ a_k t^k`.
    Poly(Vec<f64>),
    /// Piecewise-linear interpolation of samples, constant beyond the ends.
    Table { t: Vec<f64>, q: Vec<f64> },
    /// `q(t) = num(t) / den(t)`, coefficients in ascending powers.
    Rational { num: Vec<f64>, den: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffSpec {
    /// `p₀ = I`, all other coefficients zero.
    Free,
    /// Scalar second-order expression `−y″ + q y` (requires `n = d = 1`).
    SlPotential(PotentialSpec),
    /// `p₀ = I`, `p_n = Q` constant Hermitian, others zero.
    ConstantPotential(MatrixSpec),
    /// Constant coefficients `p₀, …, p_n`.
    Constant(Vec<MatrixSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub c0: MatrixSpec,
    pub c1: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TauSpec {
    Tau0,
    Dirichlet,
    /// `τ(λ) = λ I`.
    Linear,
    Constant(PairSpec),
    /// Constant on `ℂ₊`, extended to `ℂ₋` by `τ(λ̄) = τ(λ)*`.
    UpperHalfPlane(PairSpec),
    RandomSelfAdjoint { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub n_re: usize,
    pub n_im: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    List(Vec<[f64; 2]>),
    Rect(RectSpec),
}

impl GridSpec {
    pub fn points(&self) -> Vec<C64> {
        match self {
            GridSpec::List(v) => v.iter().map(|&[re, im]| c(re, im)).collect(),
            GridSpec::Rect(r) => {
                let axis = |[a, b]: [f64; 2], k: usize| -> Vec<f64> {
                    if k <= 1 {
                        vec![a]
                    } else {
                        (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
                    }
                };
                let mut out = Vec::new();
                for re in axis(r.re, r.n_re) {
                    for im in axis(r.im, r.n_im) {
                        out.push(c(re, im));
                    }
                }
                out
            }
        }
    }

    /// `list:RE,IM;RE,IM` or `rect:re0,re1,nre,im0,im1,nim`.
    pub fn parse_flag(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::SchemaError { path: "--grid".into(), msg: msg.into() };
        let nums = |body: &str| -> Result<Vec<f64>> {
            body.split([',', ';']).map(|x| x.trim().parse::<f64>().map_err(|_| bad("not a number"))).collect()
        };
        if let Some(body) = s.strip_prefix("list:") {
            let v = body
                .split(';')
                .map(|p| {
                    let xs = nums(p)?;
                    if xs.len() != 2 {
                        return Err(bad("list entries are RE,IM"));
                    }
                    Ok([xs[0], xs[1]])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GridSpec::List(v))
        } else if let Some(body) = s.strip_prefix("rect:") {
            let xs = nums(body)?;
            if xs.len() != 6 || xs[2] < 1.0 || xs[5] < 1.0 {
                return Err(bad("rect is re0,re1,nre,im0,im1,nim"));
            }
            Ok(GridSpec::Rect(RectSpec { re: [xs[0], xs[1]], im: [xs[3], xs[4]], n_re: xs[2] as usize, n_im: xs[5] as usize }))
        } else {
            Err(bad("expected list:… or rect:…"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub range: [f64; 2],
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSpec {
    /// Explicit `(x, t)` points.
    #[serde(default)]
    pub points: Option<Vec<[f64; 2]>>,
    /// Otherwise an `n × n` tensor grid on `(0, extent)`.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsSpec {
    One,
    Poly(Vec<f64>),
    /// `e^{−a t}`.
    ExpDecay(f64),
}

impl RhsSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RhsSpec::One => 1.0,
            RhsSpec::Poly(a) => horner(a, t),
            RhsSpec::ExpDecay(a) => (-a * t).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveSpec {
    pub rhs: RhsSpec,
    /// Direction in `ℂ^d` multiplying the scalar profile; defaults to ones.
    #[serde(default)]
    pub direction: Option<Vec<ComplexSpec>>,
    /// Points at which `y` is reported; default eleven equispaced points.
    #[serde(default)]
    pub samples: Option<Vec<f64>>,
    #[serde(default)]
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylSpec {
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub spacing: Option<f64>,
}

/// Reference values checked by `verify`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    /// Eigenvalues in the spectrum range, relative tolerance 1e-6.
    #[serde(default)]
    pub spectrum: Option<Vec<f64>>,
    /// Scalar `m(λ)` at each grid point, relative tolerance 1e-6.
    #[serde(default)]
    pub m: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub label: Option<String>,
    pub n: usize,
    pub d: usize,
    pub endpoint: EndpointSpec,
    pub coeffs: CoeffSpec,
    #[serde(default)]
    pub triplet: Option<TripletKind>,
    pub tau: TauSpec,
    #[serde(default)]
    pub lambda: Option<GridSpec>,
    #[serde(default)]
    pub spectrum: Option<SpectrumSpec>,
    #[serde(default)]
    pub green: Option<GreenSpec>,
    #[serde(default)]
    pub resolve: Option<ResolveSpec>,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default)]
    pub weyl: Option<WeylSpec>,
    #[serde(default)]
    pub quadrature: Option<QuadSpec>,
    #[serde(default)]
    pub expect: Option<ExpectSpec>,
}

fn horner(a: &[f64], t: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn table_interp(ts: &[f64], qs: &[f64], t: f64) -> f64 {
    let i = ts.partition_point(|&x| x <= t);
    if i == 0 {
        return qs[0];
    }
    if i == ts.len() {
        return qs[ts.len() - 1];
    }
    let s = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    qs[i - 1] + s * (qs[i] - qs[i - 1])
}

fn schema(path: &str, msg: impl Into<String>) -> Error {
    Error::SchemaError { path: path.into(), msg: msg.into() }
}

/// Parse a problem from JSON text; `origin` prefixes error paths.
pub fn parse_problem_str(text: &str, origin: &str) -> Result<ProblemFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let p: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::SchemaError { path: format!("{origin}:{path}"), msg: e.into_inner().to_string() }
    })?;
    p.validate()?;
    Ok(p)
}

pub fn parse_problem(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
    parse_problem_str(&text, &path.display().to_string())
}

impl ProblemFile {
    pub fn nd(&self) -> usize {
        self.n * self.d
    }

    pub fn kind(&self) -> TripletKind {
        match self.endpoint {
            EndpointSpec::Regular(_) => TripletKind::Regular,
            EndpointSpec::SingularMinimal(_) => TripletKind::MinimalSingular,
        }
    }

    /// Dimension of the boundary space.
    pub fn h(&self) -> usize {
        self.kind().h(self.nd())
    }

    /// Structural checks beyond the JSON schema.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(schema("n", "n and d must be positive"));
        }
        match self.endpoint {
            EndpointSpec::Regular(b) | EndpointSpec::SingularMinimal(b) if !(b > 0.0 && b.is_finite()) => {
                return Err(schema("endpoint", "endpoint value must be positive and finite"));
            }
            _ => {}
        }
        if let Some(k) = self.triplet {
            if k != self.kind() {
                return Err(schema("triplet", "triplet kind does not match the endpoint"));
            }
        }
        let d = self.d;
        match &self.coeffs {
            CoeffSpec::Free => {}
            CoeffSpec::SlPotential(pot) => {
                if self.n != 1 || d != 1 {
                    return Err(Error::DimensionMismatch("sl_potential needs n = d = 1".into()));
                }
                match pot {
                    PotentialSpec::Poly(a) if a.is_empty() => return Err(schema("coeffs.sl_potential.poly", "empty")),
                    PotentialSpec::Table { t, q } => {
                        if t.len() != q.len() || t.len() < 2 || t.windows(2).any(|w| !(w[1] > w[0])) {
                            return Err(schema("coeffs.sl_potential.table", "need ≥ 2 increasing t with matching q"));
                        }
                    }
                    PotentialSpec::Rational { num, den } if num.is_empty() || den.is_empty() => {
                        return Err(schema("coeffs.sl_potential.rational", "empty polynomial"));
                    }
                    _ => {}
                }
            }
            CoeffSpec::ConstantPotential(m) => {
                matrix(m, d, d, "constant_potential")?;
            }
            CoeffSpec::Constant(ms) => {
                if ms.len() != self.n + 1 {
                    return Err(Error::DimensionMismatch(format!("expected {} coefficients", self.n + 1)));
                }
                for m in ms {
                    matrix(m, d, d, "coefficient")?;
                }
            }
        }
        let h = self.h();
        match &self.tau {
            TauSpec::Constant(p) | TauSpec::UpperHalfPlane(p) => {
                matrix(&p.c0, h, h, "tau.c0")?;
                matrix(&p.c1, h, h, "tau.c1")?;
            }
            _ => {}
        }
        if let Some(GridSpec::Rect(r)) = &self.lambda {
            if r.n_re == 0 || r.n_im == 0 {
                return Err(schema("lambda.rect", "empty grid"));
            }
        }
        if let Some(r) = &self.resolve {
            if let Some(v) = &r.direction {
                if v.len() != d {
                    return Err(Error::DimensionMismatch(format!("resolve.direction must have {d} entries")));
                }
            }
        }
        if let Some(s) = &self.spectrum {
            if !(s.range[1] > s.range[0]) {
                return Err(schema("spectrum.range", "empty interval"));
            }
        }
        Ok(())
    }

    pub fn endpoint_value(&self) -> Endpoint {
        match self.endpoint {
            EndpointSpec::Regular(b) => Endpoint::Regular(b),
            EndpointSpec::SingularMinimal(h) => Endpoint::SingularMinimal(h),
        }
    }

    /// The differential expression; `cutoff` overrides the singular hint.
    pub fn expr(&self, cutoff: Option<f64>) -> Result<DiffExpr> {
        let endpoint = match (self.endpoint_value(), cutoff) {
            (Endpoint::SingularMinimal(_), Some(cut)) => Endpoint::SingularMinimal(cut),
            (e, _) => e,
        };
        let (n, d) = (self.n, self.d);
        match &self.coeffs {
            CoeffSpec::Free => Ok(DiffExpr::free(n, d, endpoint)),
            CoeffSpec::SlPotential(pot) => {
                let q: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match pot.clone() {
                    PotentialSpec::Poly(a) => Arc::new(move |t| horner(&a, t)),
                    PotentialSpec::Table { t, q } => Arc::new(move |x| table_interp(&t, &q, x)),
                    PotentialSpec::Rational { num, den } => Arc::new(move |t| horner(&num, t) / horner(&den, t)),
                };
                Ok(DiffExpr::sturm_liouville(move |t| q(t), endpoint))
            }
            CoeffSpec::ConstantPotential(m) => {
                let q = matrix(m, d, d, "constant_potential")?;
                let mut p: Vec<Sampler> = vec![Arc::new(move |_| eye(d))];
                for _ in 1..n {
                    p.push(Arc::new(move |_| zeros(d, d)));
                }
                p.push(Arc::new(move |_| q.clone()));
                DiffExpr::new(n, d, p, endpoint)
            }
            CoeffSpec::Constant(ms) => {
                let p = ms
                    .iter()
                    .map(|m| {
                        let a = matrix(m, d, d, "coefficient")?;
                        Ok(Arc::new(move |_| a.clone()) as Sampler)
                    })
                    .collect::<Result<Vec<_>>>()?;
                DiffExpr::new(n, d, p, endpoint)
            }
        }
    }

    pub fn pair(&self) -> Result<NevanlinnaPair> {
        let h = self.h();
        match &self.tau {
            TauSpec::Tau0 => Ok(NevanlinnaPair::tau0(h)),
            TauSpec::Dirichlet => Ok(NevanlinnaPair::dirichlet(h)),
            TauSpec::Linear => Ok(NevanlinnaPair::linear(h)),
            TauSpec::Constant(p) => {
                NevanlinnaPair::constant(matrix(&p.c0, h, h, "tau.c0")?, matrix(&p.c1, h, h, "tau.c1")?)
            }
            TauSpec::UpperHalfPlane(p) => {
                NevanlinnaPair::from_upper_half_plane(matrix(&p.c0, h, h, "tau.c0")?, matrix(&p.c1, h, h, "tau.c1")?)
            }
            TauSpec::RandomSelfAdjoint { seed } => Ok(NevanlinnaPair::random_self_adjoint(h, *seed)),
        }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let mut cfg = IntegratorConfig::default();
        if let Some(s) = &self.integrator {
            if let Some(x) = s.rel_tol {
                cfg.rel_tol = x;
            }
            if let Some(x) = s.abs_tol {
                cfg.abs_tol = x;
            }
            if let Some(x) = s.max_step {
                cfg.max_step = x;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Weyl options; `tol` and `cutoff` come from command-line overrides.
    pub fn weyl_options(&self, tol: Option<f64>, cutoff: Option<f64>) -> WeylOptions {
        let mut o = WeylOptions::default();
        if let Some(s) = &self.weyl {
            o.schedule = s.schedule.clone();
            if let Some(t) = s.tol {
                o.tol = t;
            }
        }
        if let Some(t) = tol {
            o.tol = t;
        }
        if let Some(c) = cutoff {
            o.schedule = Some(crate::weyl::default_schedule(c));
        }
        o
    }

    /// Direction vector of the right-hand side.
    pub fn rhs_direction(&self) -> CMat {
        let d = self.d;
        match self.resolve.as_ref().and_then(|r| r.direction.as_ref()) {
            Some(v) => CMat::from_fn(d, 1, |i, _| v[i].value()),
            None => CMat::from_element(d, 1, c(1.0, 0.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_parses() {
        let p = parse_problem_str(r#"{"n":1,"d":1,"endpoint":{"regular":1.0},"coeffs":"free","tau":"tau0"}"#, "t").unwrap();
        assert_eq!(p.h(), 2);
        assert!(p.expr(None).is_ok() && p.pair().is_ok());
    }

    #[test]
    fn wrong_shape_is_dimension_mismatch() {
        let s = r#"{"n":1,"d":1,"endpoint":{"regular":1.0},"coeffs":"free",
            "tau":{"constant":{"c0":[[1,0],[0,1]],"c1":[[0]]}}}"#;
        assert!(matches!(parse_problem_str(s, "t"), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn unknown_builtin_is_schema_error() {
        let s = r#"{"n":1,"d":1,"endpoint":{"regular":1.0},"coeffs":"bessel","tau":"tau0"}"#;
        match parse_problem_str(s, "t") {
            Err(Error::SchemaError { path, .. }) => assert!(path.contains("coeffs"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complex_entries_and_grid_flags() {
        let s = r#"{"n":1,"d":1,"endpoint":{"singular_minimal":5},"coeffs":"free",
            "tau":{"upper_half_plane":{"c0":[[1]],"c1":[[[0,1]]]}},"lambda":{"list":[[0,1],[0,2]]}}"#;
        let p = parse_problem_str(s, "t").unwrap();
        assert_eq!(p.lambda.unwrap().points(), vec![c(0.0, 1.0), c(0.0, 2.0)]);
        let g = GridSpec::parse_flag("rect:0,1,2,1,3,3").unwrap();
        assert_eq!(g.points().len(), 6);
        assert_eq!(GridSpec::parse_flag("list:1,2;3,-4").unwrap().points(), vec![c(1.0, 2.0), c(3.0, -4.0)]);
        assert!(GridSpec::parse_flag("box:1").is_err());
    }
}
