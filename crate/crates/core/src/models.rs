//! Catalog of concrete Finsler metrics with their known constants.
//!
//! Every model evaluates its norm from scratch; the optional closed-form
//! hooks (spray, volume density) only exist to make long geodesic runs and
//! measure integrals affordable. [`MetricModel::without_hooks`] switches them
//! off so the generic numerical path can be checked against them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::norms::ConvexBody;
use crate::sampling::{dot, norm, unit_ball_volume};

/// Default margin (gauge units) keeping evaluation points away from the
/// boundary of the chart domain.
pub const DEFAULT_MARGIN: f64 = 1e-12;

pub type NormFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomNorm {
    pub name: String,
    f: Arc<NormFn>,
}

impl fmt::Debug for CustomNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNorm").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    Euclidean,
    /// Poincaré ball of constant curvature -k².
    Hyperbolic {
        k: f64,
    },
    Funk(ConvexBody),
    Hilbert(ConvexBody),
    Custom(CustomNorm),
}

/// Constants the model is known to have. S-curvature is stored as the
/// coefficient `c` in S = c·F; the comparison-theorem δ is c/(d-1).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelFacts {
    pub expected_flag_curvature: Option<f64>,
    pub expected_s_coefficient: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub is_riemannian: bool,
    pub geodesics_are_lines: bool,
}

impl ModelFacts {
    /// Whether the pinching constants satisfy δ_i < k_i.
    pub fn admissible(&self) -> Option<bool> {
        match (self.k1, self.k2, self.delta1, self.delta2) {
            (Some(k1), Some(k2), Some(d1), Some(d2)) => Some(d1 < k1 && d2 < k2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricModel {
    kind: ModelKind,
    dim: usize,
    facts: ModelFacts,
    hooks: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<BodyConfig>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FinslerError::invalid("config", e.to_string()))
    }

    /// The same configuration with every default written out.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        match self.kind.as_str() {
            "hyperbolic" => out.k = Some(self.k.unwrap_or(1.0)),
            "funk" | "hilbert" => {
                let mut body = self.body.clone().unwrap_or(BodyConfig {
                    kind: "unit-ball".into(),
                    semi_axes: None,
                    center: None,
                    margin: None,
                });
                body.center.get_or_insert_with(|| vec![0.0; self.dim]);
                body.margin.get_or_insert(DEFAULT_MARGIN);
                out.body = Some(body);
            }
            _ => {}
        }
        out
    }
}

fn build_body(cfg: Option<&BodyConfig>, dim: usize) -> Result<ConvexBody> {
    let Some(cfg) = cfg else {
        return ConvexBody::unit_ball(dim);
    };
    let margin = cfg.margin.unwrap_or(DEFAULT_MARGIN);
    if !(margin > 0.0 && margin < 0.5) {
        return Err(FinslerError::invalid("body.margin", "must lie in (0, 0.5)"));
    }
    let body = match cfg.kind.as_str() {
        "unit-ball" => {
            if cfg.semi_axes.is_some() {
                return Err(FinslerError::invalid("body.semi_axes", "not allowed for unit-ball"));
            }
            let center = cfg.center.clone().unwrap_or_else(|| vec![0.0; dim]);
            ConvexBody::unit_ball_at(&center).map_err(|e| reprefix(e, "body.center"))?
        }
        "ellipsoid" => {
            let axes = cfg
                .semi_axes
                .as_ref()
                .ok_or_else(|| FinslerError::invalid("body.semi_axes", "required for ellipsoid"))?;
            if axes.len() != dim {
                return Err(FinslerError::invalid(
                    "body.semi_axes",
                    format!("expected {dim} entries, got {}", axes.len()),
                ));
            }
            let center = cfg.center.clone().unwrap_or_else(|| vec![0.0; dim]);
            ConvexBody::ellipsoid(&center, axes)?
        }
        other => {
            return Err(FinslerError::invalid(
                "body.kind",
                format!("unknown body kind '{other}' (expected unit-ball or ellipsoid)"),
            ))
        }
    };
    Ok(body.with_margin(margin))
}

fn reprefix(e: FinslerError, field: &str) -> FinslerError {
    match e {
        FinslerError::InvalidConfig { message, .. } => FinslerError::invalid(field, message),
        other => other,
    }
}

/// Builds a model from its JSON configuration, attaching the known constants.
pub fn make_model(config: &ModelConfig) -> Result<MetricModel> {
    let dim = config.dim;
    if dim < 2 {
        return Err(FinslerError::invalid("dim", "dimension must be at least 2"));
    }
    if dim > 16 {
        return Err(FinslerError::invalid("dim", "dimension above 16 is not supported"));
    }
    let needs_body = matches!(config.kind.as_str(), "funk" | "hilbert");
    if !needs_body && config.body.is_some() {
        return Err(FinslerError::invalid(
            "body",
            format!("not used by '{}' models", config.kind),
        ));
    }
    if config.kind != "hyperbolic" && config.k.is_some() {
        return Err(FinslerError::invalid(
            "k",
            format!("not used by '{}' models", config.kind),
        ));
    }
    match config.kind.as_str() {
        "euclidean" => Ok(MetricModel::euclidean(dim)),
        "hyperbolic" => {
            let k = config.k.unwrap_or(1.0);
            if !(k.is_finite() && k > 0.0) {
                return Err(FinslerError::invalid(
                    "k",
                    format!("must be positive and finite, got {k}"),
                ));
            }
            Ok(MetricModel::hyperbolic(dim, k))
        }
        "funk" => Ok(MetricModel::funk(build_body(config.body.as_ref(), dim)?)),
        "hilbert" => Ok(MetricModel::hilbert(build_body(config.body.as_ref(), dim)?)),
        other => Err(FinslerError::invalid(
            "kind",
            format!("unknown model kind '{other}' (expected funk, hilbert, hyperbolic or euclidean)"),
        )),
    }
}

impl MetricModel {
    pub fn euclidean(dim: usize) -> Self {
        MetricModel {
            kind: ModelKind::Euclidean,
            dim,
            facts: ModelFacts {
                expected_flag_curvature: Some(0.0),
                expected_s_coefficient: Some(0.0),
                is_riemannian: true,
                geodesics_are_lines: true,
                ..Default::default()
            },
            hooks: true,
        }
    }

    pub fn hyperbolic(dim: usize, k: f64) -> Self {
        MetricModel {
            kind: ModelKind::Hyperbolic { k },
            dim,
            facts: ModelFacts {
                expected_flag_curvature: Some(-k * k),
                expected_s_coefficient: Some(0.0),
                k1: Some(k),
                k2: Some(k),
                delta1: Some(0.0),
                delta2: Some(0.0),
                is_riemannian: true,
                geodesics_are_lines: false,
            },
            hooks: true,
        }
    }

    /// Funk metric of a strongly convex body: flag curvature -1/4 and
    /// S = ((d+1)/2)·F.
    pub fn funk(body: ConvexBody) -> Self {
        let dim = body.dim();
        let s_coeff = (dim as f64 + 1.0) / 2.0;
        let delta = s_coeff / (dim as f64 - 1.0);
        MetricModel {
            kind: ModelKind::Funk(body),
            dim,
            facts: ModelFacts {
                expected_flag_curvature: Some(-0.25),
                expected_s_coefficient: Some(s_coeff),
                k1: Some(0.5),
                k2: Some(0.5),
                delta1: Some(delta),
                delta2: Some(delta),
                is_riemannian: false,
                geodesics_are_lines: true,
            },
            hooks: true,
        }
    }

    /// Hilbert metric (symmetrized Funk metric): flag curvature -1. On the
    /// ellipsoids supported here it also has vanishing S-curvature.
    pub fn hilbert(body: ConvexBody) -> Self {
        let dim = body.dim();
        MetricModel {
            kind: ModelKind::Hilbert(body),
            dim,
            facts: ModelFacts {
                expected_flag_curvature: Some(-1.0),
                expected_s_coefficient: Some(0.0),
                k1: Some(1.0),
                k2: Some(1.0),
                delta1: Some(0.0),
                delta2: Some(0.0),
                is_riemannian: false,
                geodesics_are_lines: true,
            },
            hooks: true,
        }
    }

    /// A user-supplied norm. The callback is spot-checked for positive
    /// homogeneity and positivity at construction.
    pub fn custom<F>(name: &str, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim < 2 {
            return Err(FinslerError::invalid("dim", "dimension must be at least 2"));
        }
        let probes: [(&[f64], &[f64], f64); 3] = [
            (&[0.0, 0.0], &[1.0, 0.3], 2.5),
            (&[0.1, -0.05], &[-0.4, 0.9], 0.3),
            (&[-0.05, 0.1], &[0.2, -0.7], 7.0),
        ];
        for (x, y, lambda) in probes {
            let mut xs = vec![0.0; dim];
            let mut ys = vec![0.0; dim];
            xs[..2].copy_from_slice(x);
            ys[..2].copy_from_slice(y);
            let base = f(&xs, &ys);
            let scaled_y: Vec<f64> = ys.iter().map(|v| v * lambda).collect();
            let scaled = f(&xs, &scaled_y);
            if !(base.is_finite() && base > 0.0) {
                return Err(FinslerError::invalid(
                    "custom",
                    "norm must be positive on nonzero vectors",
                ));
            }
            if (scaled - lambda * base).abs() > 1e-9 * lambda * base {
                return Err(FinslerError::invalid(
                    "custom",
                    format!(
                        "norm is not positively homogeneous: F(λy) = {scaled}, λF(y) = {}",
                        lambda * base
                    ),
                ));
            }
        }
        Ok(MetricModel {
            kind: ModelKind::Custom(CustomNorm {
                name: name.to_string(),
                f: Arc::new(f),
            }),
            dim,
            facts: ModelFacts::default(),
            hooks: false,
        })
    }

    pub fn with_facts(mut self, facts: ModelFacts) -> Self {
        self.facts = facts;
        self
    }

    /// Same metric with every closed-form hook disabled.
    pub fn without_hooks(&self) -> Self {
        MetricModel {
            hooks: false,
            ..self.clone()
        }
    }

    pub fn hooks_enabled(&self) -> bool {
        self.hooks
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facts(&self) -> &ModelFacts {
        &self.facts
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::Euclidean => format!("euclidean(d={})", self.dim),
            ModelKind::Hyperbolic { k } => format!("hyperbolic(d={}, k={k})", self.dim),
            ModelKind::Funk(b) => format!("funk(d={}, {})", self.dim, b.describe()),
            ModelKind::Hilbert(b) => format!("hilbert(d={}, {})", self.dim, b.describe()),
            ModelKind::Custom(c) => format!("custom(d={}, {})", self.dim, c.name),
        }
    }

    pub fn body(&self) -> Option<&ConvexBody> {
        match &self.kind {
            ModelKind::Funk(b) | ModelKind::Hilbert(b) => Some(b),
            _ => None,
        }
    }

    fn check_dims(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Rejects points outside the chart domain (or inside the boundary margin).
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_dims(x)?;
        if x.iter().any(|c| !c.is_finite()) {
            return Err(FinslerError::PointOutsideDomain {
                coords: x.to_vec(),
                gauge: f64::NAN,
                margin: 0.0,
            });
        }
        match &self.kind {
            ModelKind::Hyperbolic { .. } => {
                let r = norm(x);
                if r > 1.0 - DEFAULT_MARGIN {
                    return Err(FinslerError::PointOutsideDomain {
                        coords: x.to_vec(),
                        gauge: r,
                        margin: DEFAULT_MARGIN,
                    });
                }
                Ok(())
            }
            ModelKind::Funk(b) | ModelKind::Hilbert(b) => b.check_interior(x),
            _ => Ok(()),
        }
    }

    /// The error reported when a path stops at the boundary margin near `x`.
    pub(crate) fn boundary_stop(&self, x: &[f64]) -> FinslerError {
        let (gauge, margin) = match &self.kind {
            ModelKind::Hyperbolic { .. } => (norm(x), DEFAULT_MARGIN),
            ModelKind::Funk(b) | ModelKind::Hilbert(b) => (b.gauge(x), b.margin()),
            _ => (f64::NAN, 0.0),
        };
        FinslerError::PointOutsideDomain {
            coords: x.to_vec(),
            gauge,
            margin,
        }
    }

    /// F(x, y) without the zero-vector policy (F(x, 0) = 0 falls out of
    /// every formula anyway).
    pub fn norm(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_dims(y)?;
        Ok(self.norm_unchecked(x, y))
    }

    /// Norm evaluation for a point already known to be admissible.
    pub(crate) fn norm_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Euclidean => norm(y),
            ModelKind::Hyperbolic { k } => 2.0 * norm(y) / (k * (1.0 - dot(x, x))),
            ModelKind::Funk(b) => b.funk_norm_unchecked(x, y),
            ModelKind::Hilbert(b) => {
                let minus: Vec<f64> = y.iter().map(|v| -v).collect();
                0.5 * (b.funk_norm_unchecked(x, y) + b.funk_norm_unchecked(x, &minus))
            }
            ModelKind::Custom(c) => (c.f)(x, y),
        }
    }

    /// Length scale over which the metric varies near `x`; finite-difference
    /// steps in x and integrator tolerances are taken relative to it.
    pub fn local_scale(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Euclidean | ModelKind::Custom(_) => 1.0,
            ModelKind::Hyperbolic { .. } => (1.0 - norm(x)).clamp(1e-300, 1.0),
            ModelKind::Funk(b) | ModelKind::Hilbert(b) => b.boundary_distance_lower_bound(x),
        }
    }

    /// Closed-form geodesic coefficients G^i, when the model provides them.
    pub fn spray_hook(&self, x: &[f64], y: &[f64]) -> Option<Result<Vec<f64>>> {
        if !self.hooks {
            return None;
        }
        let out = match &self.kind {
            ModelKind::Euclidean => Ok(vec![0.0; self.dim]),
            ModelKind::Hyperbolic { .. } => self.check_point(x).map(|_| {
                // Conformal factor e^u with ∂_i u = 2x_i/(1-|x|²); k drops out.
                let m = 1.0 - dot(x, x);
                let xy = dot(x, y);
                let yy = dot(y, y);
                (0..self.dim).map(|i| (2.0 * xy * y[i] - yy * x[i]) / m).collect()
            }),
            // Projectively flat sprays G = P·y.
            ModelKind::Funk(b) => b.check_interior(x).map(|_| {
                let p = 0.5 * b.funk_norm_unchecked(x, y);
                y.iter().map(|v| p * v).collect()
            }),
            ModelKind::Hilbert(b) => b.check_interior(x).map(|_| {
                let minus: Vec<f64> = y.iter().map(|v| -v).collect();
                let p = 0.5 * (b.funk_norm_unchecked(x, y) - b.funk_norm_unchecked(x, &minus));
                y.iter().map(|v| p * v).collect()
            }),
            ModelKind::Custom(_) => return None,
        };
        Some(out)
    }

    /// Closed-form Busemann–Hausdorff density σ_F(x) in the chart basis.
    pub fn sigma_hook(&self, x: &[f64]) -> Option<Result<f64>> {
        if !self.hooks {
            return None;
        }
        let out = match &self.kind {
            ModelKind::Euclidean => Ok(1.0),
            ModelKind::Hyperbolic { k } => self
                .check_point(x)
                .map(|_| (2.0 / (k * (1.0 - dot(x, x)))).powi(self.dim as i32)),
            // Every indicatrix is a translate of the body.
            ModelKind::Funk(b) => b.check_interior(x).map(|_| unit_ball_volume(self.dim) / b.volume()),
            // On an ellipsoid the Hilbert metric is the Klein model.
            ModelKind::Hilbert(b) => b.check_interior(x).map(|_| {
                let g2 = b.gauge_squared(x);
                b.sqrt_det_shape() * (1.0 - g2).powf(-(self.dim as f64 + 1.0) / 2.0)
            }),
            ModelKind::Custom(_) => return None,
        };
        Some(out)
    }

    /// Distance d(p, x) when the model supports a direct evaluation.
    pub fn distance(&self, p: &[f64], x: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(x)?;
        match &self.kind {
            ModelKind::Euclidean => {
                let d: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                Ok(norm(&d))
            }
            ModelKind::Hyperbolic { k } => {
                let d2: f64 = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
                let arg = 1.0 + 2.0 * d2 / ((1.0 - dot(x, x)) * (1.0 - dot(p, p)));
                Ok(arg.acosh() / k)
            }
            ModelKind::Funk(_) | ModelKind::Hilbert(_) => {
                // Straight segments are geodesics: integrate the norm along one.
                let dir: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                if norm(&dir) == 0.0 {
                    return Ok(0.0);
                }
                let mut failed = false;
                let (len, _) = crate::quad::integrate(
                    |s| {
                        let q: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
                        match self.norm(&q, &dir) {
                            Ok(v) => v,
                            Err(_) => {
                                failed = true;
                                0.0
                            }
                        }
                    },
                    0.0,
                    1.0,
                    1e-12,
                    1e-10,
                );
                if failed {
                    return Err(FinslerError::PointOutsideDomain {
                        coords: x.to_vec(),
                        gauge: f64::NAN,
                        margin: DEFAULT_MARGIN,
                    });
                }
                Ok(len)
            }
            ModelKind::Custom(_) => Err(FinslerError::UnsupportedModel("direct distance evaluation")),
        }
    }

    /// Axis-aligned chart box known to contain every admissible point.
    pub fn chart_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            ModelKind::Hyperbolic { .. } => Some((vec![-1.0; self.dim], vec![1.0; self.dim])),
            ModelKind::Funk(b) | ModelKind::Hilbert(b) => Some(b.bounding_box()),
            _ => None,
        }
    }
}

/// Hilbert norm ½(F(x,y) + F(x,-y)) of the Funk metric of `body`.
pub fn hilbert_norm(body: &ConvexBody, x: &[f64], y: &[f64]) -> Result<f64> {
    body.check_interior(x)?;
    let n = norm(y);
    if n < crate::norms::EPSILON_ZERO {
        return Err(FinslerError::ZeroVector { norm: n });
    }
    let minus: Vec<f64> = y.iter().map(|v| -v).collect();
    Ok(0.5 * (body.funk_norm_unchecked(x, y) + body.funk_norm_unchecked(x, &minus)))
}

/// Klein-model fundamental tensor of the Hilbert metric on an ellipsoid;
/// used only as an independent reference in checks.
pub fn hilbert_klein_tensor(body: &ConvexBody, x: &[f64]) -> DMatrix<f64> {
    let a = body.shape();
    let w = DVector::from_iterator(x.len(), x.iter().zip(body.center()).map(|(x, c)| x - c));
    let aw = a * &w;
    let m = 1.0 - w.dot(&aw);
    a / m + (&aw * aw.transpose()) / (m * m)
}
