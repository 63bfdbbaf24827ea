//! Scenario files: one JSON document naming a space, its weight, the
//! comparison parameters, a geodesic bundle and the checks to run.
//!
//! ```json
//! {
//!   "id": "sphere_bonnet_myers",
//!   "space": { "zoo": "sphere", "params": { "n": 2 } },
//!   "params": { "N": 2, "eps": 1, "K": 1, "a": 1, "b": 1 },
//!   "bundle": { "origin": [0, 0], "directions": { "grid": 6 }, "horizon": 3.3 },
//!   "checks": ["bishop", { "name": "bonnet_myers", "tol": 1e-3 }]
//! }
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de, Deserialize, Deserializer, Serialize};

use crate::comparison::{Bundle, IndicatrixQuadrature};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lagrangian::{ChartedSpace, Signature, Weight};
use crate::lorentz::{ConeSector, CutFunction, SectorQuadrature};
use crate::quadrature::halton;
use crate::tensor::validate_homogeneity;
use crate::weighted::{ComparisonParams, NValue};
use crate::zoo::{build_zoo, Model, ZooParams};

/// Samples drawn when validating an expression Lagrangian at load time.
pub const LOAD_HOMOGENEITY_SAMPLES: usize = 64;

/// Built-in family or an expression Lagrangian; exactly one of `zoo` and
/// `expression` is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoo: Option<String>,
    #[serde(default)]
    pub params: ZooParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    /// Chart domain `{x : domain(x) > 0}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Expr>,
    /// Time orientation of an expression spacetime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSpec {
    None,
    Gaussian(f64),
    Expression(Expr),
    /// Weight of the measure `ρ dx`.
    Density(Expr),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamSpec {
    pub N: NValue,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default)]
    pub K: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DirectionSpec {
    Explicit(Vec<Vec<f64>>),
    /// Deterministic grid of `count` directions.
    Grid(usize),
    Random { seed: u64, count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub origin: Vec<f64>,
    pub directions: DirectionSpec,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Homogeneity,
    MatrixLemma,
    Conjugate,
    Bishop,
    BonnetMyers,
    Laplacian,
    BishopGromov,
    Monotonicity,
    Raychaudhuri,
    SpacetimeBonnetMyers,
    LorentzLaplacian,
    SclvBishopGromov,
    Legendre,
    HessianSymmetry,
}

impl CheckName {
    pub const ALL: [CheckName; 14] = [
        CheckName::Homogeneity,
        CheckName::MatrixLemma,
        CheckName::Conjugate,
        CheckName::Bishop,
        CheckName::BonnetMyers,
        CheckName::Laplacian,
        CheckName::BishopGromov,
        CheckName::Monotonicity,
        CheckName::Raychaudhuri,
        CheckName::SpacetimeBonnetMyers,
        CheckName::LorentzLaplacian,
        CheckName::SclvBishopGromov,
        CheckName::Legendre,
        CheckName::HessianSymmetry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Homogeneity => "homogeneity",
            CheckName::MatrixLemma => "matrix_lemma",
            CheckName::Conjugate => "conjugate",
            CheckName::Bishop => "bishop",
            CheckName::BonnetMyers => "bonnet_myers",
            CheckName::Laplacian => "laplacian",
            CheckName::BishopGromov => "bishop_gromov",
            CheckName::Monotonicity => "monotonicity",
            CheckName::Raychaudhuri => "raychaudhuri",
            CheckName::SpacetimeBonnetMyers => "spacetime_bonnet_myers",
            CheckName::LorentzLaplacian => "lorentz_laplacian",
            CheckName::SclvBishopGromov => "sclv_bishop_gromov",
            CheckName::Legendre => "legendre",
            CheckName::HessianSymmetry => "hessian_symmetry",
        }
    }

    pub fn parse(s: &str) -> Option<CheckName> {
        CheckName::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Whether the check walks the geodesic bundle.
    pub fn needs_bundle(self) -> bool {
        matches!(
            self,
            CheckName::MatrixLemma
                | CheckName::Conjugate
                | CheckName::Bishop
                | CheckName::BonnetMyers
                | CheckName::Laplacian
                | CheckName::Raychaudhuri
                | CheckName::SpacetimeBonnetMyers
                | CheckName::LorentzLaplacian
        )
    }
}

/// Quadrature overrides for the volume checks; unset fields keep defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuthal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
}

impl QuadratureSpec {
    pub fn indicatrix(&self) -> IndicatrixQuadrature {
        let d = IndicatrixQuadrature::default();
        IndicatrixQuadrature {
            polar: self.polar.unwrap_or(d.polar),
            azimuthal: self.azimuthal.unwrap_or(d.azimuthal),
            points: self.points.unwrap_or(d.points),
            rtol: self.rtol.unwrap_or(d.rtol),
        }
    }

    pub fn sector(&self) -> SectorQuadrature {
        let d = SectorQuadrature::default();
        SectorQuadrature {
            radial: self.radial.unwrap_or(d.radial),
            angular: self.angular.unwrap_or(d.angular),
            points: self.points.unwrap_or(d.points),
            rtol: self.rtol.unwrap_or(d.rtol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CutSpec {
    Constant(f64),
    Tabulated(Vec<(f64, f64)>),
}

/// Cone sector of the future unit indicatrix; the axis defaults to the
/// time orientation and the origin to the bundle origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec<f64>>,
    pub radius: f64,
    pub cut: CutSpec,
}

/// One requested check. In a scenario file either a bare name or an object
/// with `name` and overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct CheckSpec {
    pub name: CheckName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Inner radius of the volume checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub R: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorSpec>,
    /// `N` values for the monotonicity chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<NValue>>,
    /// Time function of the Hessian check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Expected first conjugate time; `expect_none` asserts there is none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expect_none: bool,
}

impl CheckSpec {
    pub fn named(name: CheckName) -> Self {
        CheckSpec {
            name,
            tol: None,
            samples: None,
            seed: None,
            r: None,
            R: None,
            quadrature: None,
            sector: None,
            n_list: None,
            function: None,
            points: None,
            expected: None,
            expect_none: false,
        }
    }
}

fn deserialize_checks<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CheckSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Name(String),
        Full(serde_json::Value),
    }
    let entries = Vec::<Entry>::deserialize(d)?;
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| match e {
            Entry::Name(s) => CheckName::parse(&s).map(CheckSpec::named).ok_or_else(|| {
                let names: Vec<&str> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                de::Error::custom(format!("checks[{i}]: unknown check {s:?}; available: {}", names.join(", ")))
            }),
            Entry::Full(v) => serde_json::from_value(v).map_err(|e| de::Error::custom(format!("checks[{i}]: {e}"))),
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report file name, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Directory for CSV profiles, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    pub params: ParamSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleSpec>,
    #[serde(deserialize_with = "deserialize_checks")]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    /// Assumed, never verified: recorded in the report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
}

fn field(field: &str, message: impl Into<String>) -> Error {
    Error::Scenario { field: field.into(), message: message.into() }
}

/// Byte offset of a 1-based line/column pair.
fn offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    start + column.saturating_sub(1)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario = serde_json::from_str(text)
        .map_err(|e| Error::Parse { position: offset(text, e.line(), e.column()), message: e.to_string() })?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn finite_vec(name: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(field(name, format!("expected {dim} components, got {}", v.len())));
    }
    if !v.iter().all(|c| c.is_finite()) {
        return Err(field(name, "components must be finite"));
    }
    Ok(())
}

impl Scenario {
    /// The space with the scenario weight applied.
    pub fn build_space(&self) -> Result<ChartedSpace> {
        let s = &self.space;
        let mut space = match (&s.zoo, &s.expression) {
            (Some(name), None) => build_zoo(name, &s.params).map_err(|e| match e {
                Error::InvalidParam { param, message } => field(&format!("space.params.{param}"), message),
                other => other,
            })?,
            (None, Some(e)) => {
                let dim = s.dim.ok_or_else(|| field("space.dim", "required for an expression Lagrangian"))?;
                if dim == 0 {
                    return Err(field("space.dim", "must be positive"));
                }
                e.validate(dim, false, "space.expression")?;
                if let Some(d) = &s.domain {
                    d.validate(dim, true, "space.domain")?;
                }
                let signature = s.signature.unwrap_or(Signature::Positive);
                let model = Model::Expression { dim, signature, lagrangian: e.clone(), domain: s.domain.clone() };
                let mut space = ChartedSpace::new(format!("expression({dim})"), model);
                if signature == Signature::Lorentzian {
                    let x = s.orientation.clone().ok_or_else(|| field("space.orientation", "required for a Lorentzian expression"))?;
                    finite_vec("space.orientation", &x, dim)?;
                    space = space.with_orientation(x);
                } else if s.orientation.is_some() {
                    return Err(field("space.orientation", "only Lorentzian spaces take an orientation"));
                }
                space
            }
            (Some(_), Some(_)) => return Err(field("space", "give either zoo or expression, not both")),
            (None, None) => return Err(field("space", "one of zoo or expression is required")),
        };
        if s.zoo.is_some() && (s.dim.is_some() || s.signature.is_some() || s.domain.is_some() || s.orientation.is_some()) {
            return Err(field("space", "dim, signature, domain and orientation apply to expression spaces only"));
        }
        if let Some(w) = &self.weight {
            let dim = space.dim();
            let weight = match w {
                WeightSpec::None => Weight::None,
                WeightSpec::Gaussian(l) => {
                    if !(l.is_finite() && *l > 0.0) {
                        return Err(field("weight.gaussian", format!("lambda = {l} must be positive")));
                    }
                    Weight::Gaussian { lambda: *l }
                }
                WeightSpec::Expression(e) => {
                    e.validate(dim, false, "weight.expression")?;
                    Weight::Expr(e.clone())
                }
                WeightSpec::Density(e) => {
                    e.validate(dim, true, "weight.density")?;
                    Weight::Density(e.clone())
                }
            };
            space = space.with_weight(weight);
        }
        Ok(space)
    }

    pub fn comparison_params(&self, space: &ChartedSpace) -> Result<ComparisonParams> {
        let p = &self.params;
        ComparisonParams::new(space.dim(), space.signature(), p.N, p.eps, p.K, p.a, p.b).map_err(|e| match e {
            Error::EpsOutOfRange { .. } => field("params.eps", e.to_string()),
            Error::ForbiddenN { .. } => field("params.N", e.to_string()),
            Error::InvalidParam { param, message } => field(&format!("params.{param}"), message),
            other => other,
        })
    }

    /// Directions of the bundle, in scenario order.
    pub fn bundle(&self, space: &ChartedSpace) -> Result<Option<Bundle>> {
        let Some(b) = &self.bundle else { return Ok(None) };
        let dim = space.dim();
        finite_vec("bundle.origin", &b.origin, dim)?;
        space.check_point(&b.origin).map_err(|e| field("bundle.origin", e.to_string()))?;
        if !(b.horizon > 0.0 && b.horizon.is_finite()) {
            return Err(field("bundle.horizon", format!("{} must be positive", b.horizon)));
        }
        let directions = match &b.directions {
            DirectionSpec::Explicit(list) => {
                if list.is_empty() {
                    return Err(field("bundle.directions.explicit", "at least one direction is required"));
                }
                for (i, v) in list.iter().enumerate() {
                    let name = format!("bundle.directions.explicit[{i}]");
                    finite_vec(&name, v, dim)?;
                    space.check_vector(&b.origin, v).map_err(|e| field(&name, e.to_string()))?;
                }
                list.clone()
            }
            DirectionSpec::Grid(count) => {
                if *count == 0 {
                    return Err(field("bundle.directions.grid", "count must be positive"));
                }
                grid_directions(space, *count)
            }
            DirectionSpec::Random { seed, count } => {
                if *count == 0 {
                    return Err(field("bundle.directions.random.count", "count must be positive"));
                }
                random_directions(space, *count, *seed)
            }
        };
        Ok(Some(Bundle { origin: b.origin.clone(), directions, horizon: b.horizon }))
    }

    /// Checks every invariant that does not need geodesics: the space and
    /// weight build, parameters are in the ε-range, `a ≤ b`, the bundle and
    /// per-check inputs are consistent, and expression Lagrangians are
    /// homogeneous on samples.
    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(field("id", "must be non-empty"));
        }
        let space = self.build_space()?;
        if self.space.expression.is_some() {
            let r = validate_homogeneity(&space, LOAD_HOMOGENEITY_SAMPLES, self.seed);
            if !r.passed() {
                return Err(field(
                    "space.expression",
                    format!("not a 2-homogeneous Lagrangian (sampled residual {:e})", r.max_violation.0),
                ));
            }
        }
        self.comparison_params(&space)?;
        let bundle = self.bundle(&space)?;
        if self.checks.is_empty() {
            return Err(field("checks", "at least one check is required"));
        }
        let dim = space.dim();
        for (i, c) in self.checks.iter().enumerate() {
            let at = |f: &str| format!("checks[{i}].{f}");
            if let Some(t) = c.tol {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(field(&at("tol"), format!("{t} must be positive")));
                }
            }
            if c.name.needs_bundle() && bundle.is_none() {
                return Err(field("bundle", format!("required by check {}", c.name.as_str())));
            }
            match c.name {
                CheckName::BishopGromov | CheckName::SclvBishopGromov => {
                    let (r, big_r) = (c.r.ok_or_else(|| field(&at("r"), "required"))?, c.R.ok_or_else(|| field(&at("R"), "required"))?);
                    if !(r > 0.0 && r < big_r && big_r.is_finite()) {
                        return Err(field(&at("R"), format!("radii must satisfy 0 < r < R (got {r}, {big_r})")));
                    }
                    if c.name == CheckName::BishopGromov {
                        bundle.as_ref().ok_or_else(|| field("bundle", "required by check bishop_gromov"))?;
                    } else {
                        let s = c.sector.as_ref().ok_or_else(|| field(&at("sector"), "required"))?;
                        if s.origin.is_none() && bundle.is_none() {
                            return Err(field(&at("sector.origin"), "required without a bundle"));
                        }
                        if let Some(o) = &s.origin {
                            finite_vec(&at("sector.origin"), o, dim)?;
                        }
                        if let Some(a) = &s.axis {
                            finite_vec(&at("sector.axis"), a, dim)?;
                        }
                        if !(s.radius > 0.0 && s.radius.is_finite()) {
                            return Err(field(&at("sector.radius"), format!("{} must be positive", s.radius)));
                        }
                        cut_function(&s.cut).validate().map_err(|e| field(&at("sector.cut"), e.to_string()))?;
                    }
                }
                CheckName::HessianSymmetry => {
                    let f = c.function.as_ref().ok_or_else(|| field(&at("function"), "required"))?;
                    f.validate(dim, true, &at("function"))?;
                    let pts = c.points.as_ref().ok_or_else(|| field(&at("points"), "required"))?;
                    if pts.is_empty() {
                        return Err(field(&at("points"), "at least one point is required"));
                    }
                    for (k, p) in pts.iter().enumerate() {
                        finite_vec(&at(&format!("points[{k}]")), p, dim)?;
                    }
                }
                CheckName::Conjugate if c.expected.is_some() && c.expect_none => {
                    return Err(field(&at("expected"), "conflicts with expect_none"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The sector of an SCLV check, with defaults resolved.
    pub fn sector(&self, spec: &SectorSpec, space: &ChartedSpace) -> Option<ConeSector> {
        let origin = spec.origin.clone().or_else(|| self.bundle.as_ref().map(|b| b.origin.clone()))?;
        let axis = spec.axis.clone().unwrap_or_else(|| space.time_orientation());
        Some(ConeSector { origin, axis, radius: spec.radius, cut: cut_function(&spec.cut) })
    }
}

pub fn cut_function(c: &CutSpec) -> CutFunction {
    match c {
        CutSpec::Constant(t) => CutFunction::Constant(*t),
        CutSpec::Tabulated(tab) => CutFunction::Tabulated(tab.clone()),
    }
}

/// Tilt of the spatial part of spacetime directions: well inside the
/// narrowest zoo cone (Beem, half-width `π/2k`).
const CONE_TILT: f64 = 0.3;

/// Euclidean unit vectors of the orthogonal complement of `axis`.
fn complement(axis: &[f64]) -> Vec<Vec<f64>> {
    let d = axis.len();
    let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    let u: Vec<f64> = axis.iter().map(|a| a / norm).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        let mut e: Vec<f64> = (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        for b in std::iter::once(&u).chain(basis.iter()) {
            let p: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(e.into_iter().map(|x| x / n).collect());
        }
        if basis.len() == d - 1 {
            break;
        }
    }
    basis
}

/// `count` points on the unit sphere `S^{k-1}`: equal angles for `k = 2`,
/// a Fibonacci lattice for `k = 3`, normalized Halton points otherwise.
fn sphere_points(k: usize, count: usize) -> Vec<Vec<f64>> {
    match k {
        1 => (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => (1..)
            .map(|i| halton(i, k).into_iter().map(|h| 2.0 * h - 1.0).collect::<Vec<f64>>())
            .filter(|p: &Vec<f64>| {
                let n2: f64 = p.iter().map(|x| x * x).sum();
                n2 > 1e-4 && n2 <= 1.0
            })
            .take(count)
            .map(|p| {
                let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                p.into_iter().map(|x| x / n).collect()
            })
            .collect(),
    }
}

fn embed(space: &ChartedSpace, p: &[f64], tilt: f64) -> Vec<f64> {
    if !space.is_lorentzian() {
        return p.to_vec();
    }
    let axis = space.time_orientation();
    let comp = complement(&axis);
    (0..axis.len()).map(|i| axis[i] + tilt * (0..comp.len()).map(|k| p[k] * comp[k][i]).sum::<f64>()).collect()
}

/// Deterministic directions: the unit sphere of the chart for positive
/// spaces; for spacetimes the orientation axis tilted by a fixed fraction
/// towards a sphere grid of its Euclidean complement.
pub fn grid_directions(space: &ChartedSpace, count: usize) -> Vec<Vec<f64>> {
    let k = if space.is_lorentzian() { space.dim() - 1 } else { space.dim() };
    sphere_points(k, count).iter().map(|p| embed(space, p, CONE_TILT)).collect()
}

/// Seeded directions: uniform on the sphere, and for spacetimes a random
/// tilt in `[0, 0.3)`.
pub fn random_directions(space: &ChartedSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = if space.is_lorentzian() { space.dim() - 1 } else { space.dim() };
    (0..count)
        .map(|_| {
            let p = loop {
                let p: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n2: f64 = p.iter().map(|x| x * x).sum();
                if n2 > 1e-4 && n2 <= 1.0 {
                    let n = n2.sqrt();
                    break p.into_iter().map(|x| x / n).collect::<Vec<f64>>();
                }
            };
            let tilt = rng.gen_range(0.0..CONE_TILT);
            embed(space, &p, tilt)
        })
        .collect()
}
