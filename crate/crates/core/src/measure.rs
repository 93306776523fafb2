//! Busemann–Hausdorff measure of hypersurfaces, geodesic spheres and balls.
//!
//! Sphere areas come from pushing the indicatrix at p forward under
//! φ_t(y) = exp_p(t·y): Area(S_t) = ∫ η_t dA_p, and ball volumes from the
//! co-area formula Vol(B_r) = ∫₀^r Area(S_t) dt.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::{flow_at_times, replay, StepControl};
use crate::diff;
use crate::error::{FinslerError, Result};
use crate::models::MetricModel;
use crate::norms::{
    abs_det, indicatrix_volume_in_basis, inner, require_nonzero, sigma_density_polar, tensor_raw,
    DEFAULT_VOLUME_SAMPLES,
};
use crate::quad::gauss_legendre;
use crate::sampling::{
    dot, fibonacci_sphere, norm, normalized, orthonormal_complement, random_unit_vector, substream, unit_ball_volume,
    unit_sphere_area,
};

/// A point on a hypersurface with its normal and a basis of tangent vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaFrame {
    pub q: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangent_basis: Vec<Vec<f64>>,
}

impl AreaFrame {
    /// Frame whose normal is found by [`normal_vector`].
    pub fn new(model: &MetricModel, q: &[f64], tangent_basis: Vec<Vec<f64>>) -> Result<Self> {
        let normal = normal_vector(model, q, &tangent_basis)?;
        Ok(AreaFrame {
            q: q.to_vec(),
            normal,
            tangent_basis,
        })
    }

    /// max_j |g_n(v_j, n)| / F(q, v_j): how far `normal` is from normal.
    pub fn residual(&self, model: &MetricModel) -> Result<f64> {
        normal_residual(model, &self.q, &self.normal, &self.tangent_basis)
    }
}

pub fn normal_residual(model: &MetricModel, q: &[f64], n: &[f64], tangents: &[Vec<f64>]) -> Result<f64> {
    let (_, g) = tensor_raw(model, q, n)?;
    let mut worst: f64 = 0.0;
    for v in tangents {
        let fv = model
            .norm(q, v)?
            .max(model.norm(q, &v.iter().map(|c| -c).collect::<Vec<_>>())?);
        worst = worst.max(inner(&g, v, n).abs() / fv);
    }
    Ok(worst)
}

fn euclidean_normal(tangents: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(tangents.len());
    for v in tangents {
        let mut w = v.clone();
        for _ in 0..2 {
            for o in &ortho {
                let c = dot(&w, o);
                for i in 0..d {
                    w[i] -= c * o[i];
                }
            }
        }
        let nw = norm(&w);
        if nw < 1e-10 * norm(v).max(1e-300) {
            return Err(FinslerError::DegenerateSpan { gram: 0.0 });
        }
        ortho.push(w.iter().map(|c| c / nw).collect());
    }
    let mut best = vec![0.0; d];
    let mut best_norm = -1.0;
    for k in 0..d {
        let mut w = vec![0.0; d];
        w[k] = 1.0;
        for o in &ortho {
            let c = dot(&w, o);
            for i in 0..d {
                w[i] -= c * o[i];
            }
        }
        let nw = norm(&w);
        if nw > best_norm {
            best_norm = nw;
            best = w;
        }
    }
    Ok(normalized(&best))
}

/// The unit vector n with g_n(v, n) = 0 for every tangent v, on the side of
/// the Euclidean normal. Damped Newton on the indicatrix: n ∝ ν + Σ c_j v_j
/// with ∇_y F(q, n)·v_j = 0.
pub fn normal_vector(model: &MetricModel, q: &[f64], tangent_basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.check_point(q)?;
    let d = model.dim();
    if tangent_basis.len() + 1 != d {
        return Err(FinslerError::DimensionMismatch {
            expected: d - 1,
            got: tangent_basis.len(),
        });
    }
    let nu = euclidean_normal(tangent_basis, d)?;
    let tangents: Vec<Vec<f64>> = tangent_basis.iter().map(|v| normalized(v)).collect();
    let m = d - 1;
    let point = |c: &[f64]| -> Vec<f64> {
        let mut w = nu.clone();
        for (cj, v) in c.iter().zip(&tangents) {
            for i in 0..d {
                w[i] += cj * v[i];
            }
        }
        w
    };
    // for F(n) = 1, g_n(v, n) = dF_n(v), and dF is 0-homogeneous
    let residual = |c: &[f64]| -> Result<Vec<f64>> {
        let w = point(c);
        let h = 1e-2 * norm(&w);
        tangents
            .iter()
            .map(|v| diff::d1_scalar(|s| Ok(model.norm_unchecked(q, &diff::offset(&w, v, s))), h))
            .collect()
    };
    let mut c = vec![0.0; m];
    let mut r = residual(&c)?;
    const MAX_ITER: usize = 60;
    for _ in 0..MAX_ITER {
        let rn = norm(&r);
        if rn <= 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let col = diff::d1(|s| residual(&diff::offset_axis(&c, k, s)), 1e-3 * (1.0 + norm(&c)))?;
            for i in 0..m {
                jac[(i, k)] = col[i];
            }
        }
        let step = jac
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&r))
            .ok_or(FinslerError::NoConvergence {
                what: "normal vector (singular Newton system)",
                iterations: 0,
            })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(c, s)| c - lambda * s).collect();
            let rt = residual(&trial)?;
            if norm(&rt) < rn || lambda < 1e-6 {
                c = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm(&r) > 1e-10 {
        return Err(FinslerError::NoConvergence {
            what: "normal vector",
            iterations: MAX_ITER,
        });
    }
    let w = point(&c);
    let f = model.norm(q, &w)?;
    Ok(w.iter().map(|v| v / f).collect())
}

/// ζ(q, n): the ratio comparing the induced Busemann–Hausdorff form of a
/// hypersurface with that of the ambient metric. Identically 1 for
/// Riemannian models, which short-circuit.
pub fn zeta_factor(model: &MetricModel, frame: &AreaFrame, samples: usize, seed: u64) -> Result<f64> {
    if model.facts().is_riemannian && model.hooks_enabled() {
        model.check_point(&frame.q)?;
        return Ok(1.0);
    }
    zeta_factor_generic(model, frame, samples, seed)
}

/// ζ from the two containment volumes, in the basis (n, tangents).
pub fn zeta_factor_generic(model: &MetricModel, frame: &AreaFrame, samples: usize, seed: u64) -> Result<f64> {
    let d = model.dim();
    let mut basis = vec![frame.normal.clone()];
    basis.extend(frame.tangent_basis.iter().cloned());
    let full = indicatrix_volume_in_basis(model, &frame.q, &basis, samples, seed)?;
    let slice = indicatrix_volume_in_basis(model, &frame.q, &frame.tangent_basis, samples, seed ^ 0x5eed)?;
    Ok(unit_ball_volume(d) / full * slice / unit_ball_volume(d - 1))
}

/// dA_F of the parallelepiped spanned by `span` (d−1 tangent vectors at
/// frame.q): ζ times the Busemann–Hausdorff density of the induced metric.
pub fn area_density(model: &MetricModel, frame: &AreaFrame, span: &[Vec<f64>]) -> Result<f64> {
    let d = model.dim();
    if span.len() + 1 != d {
        return Err(FinslerError::DimensionMismatch {
            expected: d - 1,
            got: span.len(),
        });
    }
    check_span(span)?;
    let zeta = zeta_factor(model, frame, DEFAULT_VOLUME_SAMPLES, 0)?;
    let induced = indicatrix_volume_in_basis(model, &frame.q, span, DEFAULT_VOLUME_SAMPLES, 1)?;
    Ok(zeta * unit_ball_volume(d - 1) / induced)
}

fn check_span(span: &[Vec<f64>]) -> Result<()> {
    let m = span.len();
    let gram = DMatrix::from_fn(m, m, |i, j| dot(&span[i], &span[j]));
    let scale: f64 = span.iter().map(|v| dot(v, v)).product();
    let det = gram.determinant();
    if !(det > 1e-12 * scale) {
        return Err(FinslerError::DegenerateSpan { gram: det });
    }
    Ok(())
}

/// The same density in closed form: σ_F(q)·|det(n, span)|.
pub fn area_density_direct(model: &MetricModel, q: &[f64], normal: &[f64], span: &[Vec<f64>]) -> Result<f64> {
    let mut cols: Vec<&[f64]> = vec![normal];
    cols.extend(span.iter().map(|v| v.as_slice()));
    Ok(pipeline_sigma(model, q)? * abs_det(&cols))
}

/// σ_F as used along geodesics: the closed form if the model has one,
/// otherwise the smooth polar estimate.
fn pipeline_sigma(model: &MetricModel, q: &[f64]) -> Result<f64> {
    match model.sigma_hook(q) {
        Some(v) => v,
        None => sigma_density_polar(model, q),
    }
}

/// Nodes on the indicatrix at p and weights for integrating against dA_p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionQuadrature {
    pub p: Vec<f64>,
    /// Unit vectors y_a (F(p, y_a) = 1).
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Euclidean sphere directions u_a with y_a = u_a / F(p, u_a).
    pub directions: Vec<Vec<f64>>,
    /// Euclidean sphere weights of the underlying scheme.
    pub sphere_weights: Vec<f64>,
    pub resolution: usize,
    pub seed: u64,
    pub scheme: QuadratureScheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    Trapezoid,
    Fibonacci,
    MonteCarlo,
}

impl DirectionQuadrature {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Resolution used when none is requested.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        2 => 256,
        3 => 1024,
        _ => 4096,
    }
}

/// y ↦ y / F(p, y), the radial projection onto the indicatrix.
fn to_indicatrix(model: &MetricModel, p: &[f64], w: &[f64]) -> Vec<f64> {
    let f = model.norm_unchecked(p, w);
    w.iter().map(|v| v / f).collect()
}

/// Pushes orthonormal tangents of the Euclidean sphere at u forward to
/// tangents of the indicatrix at y(u).
fn indicatrix_tangents(model: &MetricModel, p: &[f64], u: &[f64], tangents: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    tangents
        .iter()
        .map(|t| diff::d1(|s| Ok(to_indicatrix(model, p, &diff::offset(u, t, s))), 1e-2))
        .collect()
}

/// dA_p of the parallelepiped spanned by indicatrix tangents at y.
fn indicatrix_area_density(model: &MetricModel, p: &[f64], y: &[f64], v: &[Vec<f64>]) -> Result<f64> {
    area_density_direct(model, p, y, v)
}

pub fn direction_quadrature(
    model: &MetricModel,
    p: &[f64],
    resolution: usize,
    seed: u64,
) -> Result<DirectionQuadrature> {
    model.check_point(p)?;
    if resolution < 8 {
        return Err(FinslerError::invalid(
            "resolution",
            "at least 8 directions are required",
        ));
    }
    let d = model.dim();
    let (directions, scheme): (Vec<Vec<f64>>, _) = match d {
        2 => (
            (0..resolution)
                .map(|a| {
                    let th = 2.0 * std::f64::consts::PI * a as f64 / resolution as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect(),
            QuadratureScheme::Trapezoid,
        ),
        3 => (
            fibonacci_sphere(resolution, seed)
                .into_iter()
                .map(|p| p.to_vec())
                .collect(),
            QuadratureScheme::Fibonacci,
        ),
        _ => {
            let mut rng = substream(seed, 0xd1e5);
            (
                (0..resolution).map(|_| random_unit_vector(&mut rng, d)).collect(),
                QuadratureScheme::MonteCarlo,
            )
        }
    };
    let w = unit_sphere_area(d) / resolution as f64;
    let per_node: Vec<Result<(Vec<f64>, f64)>> = directions
        .par_iter()
        .map(|u| {
            let y = to_indicatrix(model, p, u);
            let v = indicatrix_tangents(model, p, u, &orthonormal_complement(u))?;
            Ok((y.clone(), w * indicatrix_area_density(model, p, &y, &v)?))
        })
        .collect();
    let mut nodes = Vec::with_capacity(resolution);
    let mut weights = Vec::with_capacity(resolution);
    for r in per_node {
        let (y, wt) = r?;
        nodes.push(y);
        weights.push(wt);
    }
    Ok(DirectionQuadrature {
        p: p.to_vec(),
        nodes,
        weights,
        sphere_weights: vec![w; directions.len()],
        directions,
        resolution,
        seed,
        scheme,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaOptions {
    /// Direction step for the Jacobi-field differences.
    pub h: f64,
    /// Relative change of η under halving h above which a sample is flagged.
    pub halving_tol: f64,
    pub ctrl: StepControl,
}

impl Default for EtaOptions {
    fn default() -> Self {
        EtaOptions {
            h: 1e-4,
            halving_tol: 1e-3,
            ctrl: StepControl::default(),
        }
    }
}

/// ln dA_t of the pushed-forward frame at each time, for one direction.
struct RaySample {
    ln_density: Vec<f64>,
    halving_change: f64,
    speed_drift: f64,
}

fn ray_sample(model: &MetricModel, p: &[f64], u: &[f64], times: &[f64], opts: &EtaOptions) -> Result<RaySample> {
    let d = model.dim();
    let tangents = orthonormal_complement(u);
    let y0 = to_indicatrix(model, p, u);
    let central = flow_at_times(model, p, &y0, times, &opts.ctrl)?;
    let h = opts.h;
    // J at each time for steps h and h/2, per tangent direction
    let mut jac_h = vec![vec![vec![0.0; d]; d - 1]; times.len()];
    let mut jac_h2 = jac_h.clone();
    for (j, t) in tangents.iter().enumerate() {
        let run = |s: f64| {
            replay(
                model,
                p,
                &to_indicatrix(model, p, &diff::offset(u, t, s)),
                &central.grid,
            )
        };
        let (plus, minus) = (run(h)?, run(-h)?);
        let (plus2, minus2) = (run(0.5 * h)?, run(-0.5 * h)?);
        for m in 0..times.len() {
            for i in 0..d {
                jac_h[m][j][i] = (plus[m].0[i] - minus[m].0[i]) / (2.0 * h);
                jac_h2[m][j][i] = (plus2[m].0[i] - minus2[m].0[i]) / h;
            }
        }
    }
    let mut ln_density = Vec::with_capacity(times.len());
    let mut halving_change: f64 = 0.0;
    for (m, (q, qdot)) in central.states.iter().enumerate() {
        let n: Vec<f64> = {
            let f = model.norm(q, qdot)?;
            qdot.iter().map(|v| v / f).collect()
        };
        let det_of = |jac: &[Vec<f64>]| {
            let mut cols: Vec<&[f64]> = vec![&n];
            cols.extend(jac.iter().map(|v| v.as_slice()));
            abs_det(&cols)
        };
        let coarse = det_of(&jac_h[m]);
        let fine = det_of(&jac_h2[m]);
        halving_change = halving_change.max(((fine - coarse) / fine).abs());
        let extrapolated: Vec<Vec<f64>> = jac_h[m]
            .iter()
            .zip(&jac_h2[m])
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
            .collect();
        ln_density.push(pipeline_sigma(model, q)?.ln() + det_of(&extrapolated).ln());
    }
    Ok(RaySample {
        ln_density,
        halving_change,
        speed_drift: central.speed_drift,
    })
}

fn ln_indicatrix_density(model: &MetricModel, p: &[f64], u: &[f64]) -> Result<f64> {
    let y = to_indicatrix(model, p, u);
    let v = indicatrix_tangents(model, p, u, &orthonormal_complement(u))?;
    Ok(indicatrix_area_density(model, p, &y, &v)?.ln())
}

/// η_t(y) = dA_t(dφ_t v) / dA_p(v) for a unit vector y at p.
pub fn eta(model: &MetricModel, p: &[f64], y: &[f64], t: f64, h: f64) -> Result<f64> {
    Ok(eta_at_times(
        model,
        p,
        y,
        &[t],
        &EtaOptions {
            h,
            ..Default::default()
        },
    )?[0])
}

/// η at several (nondecreasing, positive) times along one ray.
pub fn eta_at_times(model: &MetricModel, p: &[f64], y: &[f64], times: &[f64], opts: &EtaOptions) -> Result<Vec<f64>> {
    check_unit(model, p, y)?;
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(FinslerError::invalid("t", "must be positive"));
    }
    let u = normalized(y);
    let sample = ray_sample(model, p, &u, times, opts)?;
    let base = ln_indicatrix_density(model, p, &u)?;
    Ok(sample.ln_density.iter().map(|l| (l - base).exp()).collect())
}

fn check_unit(model: &MetricModel, p: &[f64], y: &[f64]) -> Result<()> {
    require_nonzero(y)?;
    let f = model.norm(p, y)?;
    if (f - 1.0).abs() > 1e-9 {
        return Err(FinslerError::invalid(
            "y",
            format!("expected a unit vector, F(p, y) = {f}"),
        ));
    }
    Ok(())
}

/// Π_t = d/dt ln η_t(y), by Richardson-extrapolated central differences.
pub fn mean_curvature_sphere(model: &MetricModel, p: &[f64], y: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(FinslerError::invalid("t", "must be positive"));
    }
    let dt = 0.1 * t.min(1.0);
    let times = [t - dt, t - 0.5 * dt, t + 0.5 * dt, t + dt];
    let e = eta_at_times(model, p, y, &times, &EtaOptions::default())?;
    let wide = (e[3].ln() - e[0].ln()) / (2.0 * dt);
    let narrow = (e[2].ln() - e[1].ln()) / dt;
    Ok((4.0 * narrow - wide) / 3.0)
}

/// Sphere areas and ball volumes about p at a set of radii, with error
/// estimates. Everything is accumulated in log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub ln_area: Vec<f64>,
    pub ln_volume: Vec<f64>,
    /// Relative error estimates (half-resolution comparison, or the Monte
    /// Carlo standard error for d ≥ 4).
    pub area_error: Vec<f64>,
    pub volume_error: Vec<f64>,
    /// Directions whose η changed by more than the halving tolerance.
    pub flagged_directions: usize,
    pub max_halving_change: f64,
    pub max_speed_drift: f64,
}

impl RadialProfile {
    pub fn area(&self, i: usize) -> f64 {
        self.ln_area[i].exp()
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.ln_volume[i].exp()
    }

    /// Vol(B_r) / Area(S_r).
    pub fn ratio(&self, i: usize) -> f64 {
        (self.ln_volume[i] - self.ln_area[i]).exp()
    }
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const GL_POINTS: usize = 8;
const PANEL_WIDTH: f64 = 0.5;

pub fn radial_profile(model: &MetricModel, radii: &[f64], quad: &DirectionQuadrature) -> Result<RadialProfile> {
    radial_profile_with(model, radii, quad, &EtaOptions::default())
}

pub fn radial_profile_with(
    model: &MetricModel,
    radii: &[f64],
    quad: &DirectionQuadrature,
    opts: &EtaOptions,
) -> Result<RadialProfile> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(FinslerError::invalid("radii", "radii must be positive and finite"));
    }
    let p = &quad.p;
    let r_max = radii.iter().cloned().fold(0.0, f64::max);

    // panel breakpoints: graded near 0, uniform after, every radius included
    let mut breaks = vec![0.0, 0.125, 0.25];
    let mut b = PANEL_WIDTH;
    while b < r_max {
        breaks.push(b);
        b += PANEL_WIDTH;
    }
    breaks.extend_from_slice(radii);
    breaks.retain(|x| *x <= r_max);
    breaks.push(r_max);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let (gx, gw) = gauss_legendre(GL_POINTS);
    let panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    // all evaluation times: GL nodes of every panel, then the radii
    let mut tagged: Vec<(f64, usize)> = Vec::new();
    for (a, b) in &panels {
        for x in &gx {
            tagged.push((0.5 * (a + b) + 0.5 * (b - a) * x, tagged.len()));
        }
    }
    let n_gl = tagged.len();
    for r in radii {
        tagged.push((*r, tagged.len()));
    }
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = tagged.iter().map(|t| t.0).collect();
    let mut slot = vec![0; tagged.len()];
    for (sorted, (_, original)) in tagged.iter().enumerate() {
        slot[*original] = sorted;
    }

    let samples: Vec<Result<RaySample>> = quad
        .directions
        .par_iter()
        .map(|u| ray_sample(model, p, u, &times, opts))
        .collect();
    let mut ln_terms: Vec<Vec<f64>> = Vec::with_capacity(samples.len()); // per node, per sorted time
    let mut flagged = 0;
    let mut max_change: f64 = 0.0;
    let mut max_drift: f64 = 0.0;
    for (a, s) in samples.into_iter().enumerate() {
        let s = s?;
        if s.halving_change > opts.halving_tol {
            flagged += 1;
        }
        max_change = max_change.max(s.halving_change);
        max_drift = max_drift.max(s.speed_drift);
        // w_a η_a = ω_a dA_p(v_a) · dA_t(J_a)/dA_p(v_a) = ω_a dA_t(J_a)
        let lw = quad.sphere_weights[a].ln();
        ln_terms.push(s.ln_density.iter().map(|l| lw + l).collect());
    }

    let area_at = |m: usize, stride: usize| -> f64 {
        let scale = (stride as f64).ln();
        log_sum_exp(ln_terms.iter().step_by(stride).map(|row| row[m] + scale))
    };
    let n_times = times.len();
    let full: Vec<f64> = (0..n_times).map(|m| area_at(m, 1)).collect();
    let half: Vec<f64> = (0..n_times).map(|m| area_at(m, 2)).collect();

    let mc_stderr: Option<Vec<f64>> = (quad.scheme == QuadratureScheme::MonteCarlo).then(|| {
        (0..n_times)
            .map(|m| {
                let n = ln_terms.len() as f64;
                let vals: Vec<f64> = ln_terms.iter().map(|row| (row[m] - full[m]).exp() * n).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                var.sqrt() / (mean * n.sqrt())
            })
            .collect()
    });

    let integrate = |ln_area: &[f64]| -> Vec<f64> {
        let mut cumulative = Vec::with_capacity(panels.len());
        let mut acc = f64::NEG_INFINITY;
        for (k, (a, b)) in panels.iter().enumerate() {
            let half_width = 0.5 * (b - a);
            let panel =
                log_sum_exp((0..GL_POINTS).map(|i| (gw[i] * half_width).ln() + ln_area[slot[k * GL_POINTS + i]]));
            acc = log_sum_exp([acc, panel]);
            cumulative.push(acc);
        }
        cumulative
    };
    let vol_full = integrate(&full);
    let vol_half = integrate(&half);

    let mut out = RadialProfile {
        radii: radii.to_vec(),
        ln_area: Vec::new(),
        ln_volume: Vec::new(),
        area_error: Vec::new(),
        volume_error: Vec::new(),
        flagged_directions: flagged,
        max_halving_change: max_change,
        max_speed_drift: max_drift,
    };
    for (i, r) in radii.iter().enumerate() {
        let m = slot[n_gl + i];
        let k = panels
            .iter()
            .rposition(|(_, b)| *b <= r + 1e-12)
            .expect("radius is a breakpoint");
        out.ln_area.push(full[m]);
        out.ln_volume.push(vol_full[k]);
        match &mc_stderr {
            Some(se) => {
                out.area_error.push(se[m]);
                // volume error is dominated by the direction sampling, which is
                // shared by all radii; use the worst area error up to r
                let worst = (0..=m).map(|j| se[j]).fold(0.0, f64::max);
                out.volume_error.push(worst);
            }
            None => {
                out.area_error.push((half[m] - full[m]).exp_m1().abs());
                out.volume_error.push((vol_half[k] - vol_full[k]).exp_m1().abs());
            }
        }
    }
    Ok(out)
}

/// Area of the geodesic sphere S_t(p).
pub fn sphere_area(model: &MetricModel, t: f64, quad: &DirectionQuadrature) -> Result<f64> {
    Ok(ln_sphere_area(model, t, quad)?.exp())
}

pub fn ln_sphere_area(model: &MetricModel, t: f64, quad: &DirectionQuadrature) -> Result<f64> {
    Ok(radial_profile(model, &[t], quad)?.ln_area[0])
}

/// Volume of the forward ball B_r(p) by the co-area formula.
pub fn ball_volume(model: &MetricModel, r: f64, quad: &DirectionQuadrature) -> Result<f64> {
    Ok(ln_ball_volume(model, r, quad)?.exp())
}

pub fn ln_ball_volume(model: &MetricModel, r: f64, quad: &DirectionQuadrature) -> Result<f64> {
    Ok(radial_profile(model, &[r], quad)?.ln_volume[0])
}

/// Monte Carlo volume of B_r(p): rejection sampling in a chart box against
/// the model's direct distance, weighted by σ_F. Returns (estimate, stderr).
pub fn mc_ball_volume(model: &MetricModel, p: &[f64], r: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < 10_000 {
        return Err(FinslerError::invalid(
            "n_samples",
            "at least 10000 samples are required",
        ));
    }
    if !(r > 0.0) {
        return Err(FinslerError::invalid("r", "must be positive"));
    }
    model.check_point(p)?;
    let d = model.dim();
    let (lo, hi) = match model.kind() {
        crate::models::ModelKind::Euclidean => (p.iter().map(|c| c - r).collect(), p.iter().map(|c| c + r).collect()),
        crate::models::ModelKind::Custom(_) => {
            return Err(FinslerError::UnsupportedModel("direct distance evaluation"))
        }
        _ => model.chart_box().expect("bounded chart"),
    };
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b): (&f64, &f64)| b - a).product();
    const CHUNKS: usize = 64;
    let per_chunk = n_samples.div_ceil(CHUNKS);
    let sums: Vec<Result<(f64, f64, usize)>> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let count = per_chunk.min(n_samples.saturating_sub(c * per_chunk));
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut x = vec![0.0; d];
            for _ in 0..count {
                for k in 0..d {
                    x[k] = lo[k] + rng.gen::<f64>() * (hi[k] - lo[k]);
                }
                if model.check_point(&x).is_err() {
                    continue;
                }
                if model.distance(p, &x)? < r {
                    let w = match model.sigma_hook(&x) {
                        Some(v) => v?,
                        None => sigma_density_polar(model, &x)?,
                    };
                    s1 += w;
                    s2 += w * w;
                }
            }
            Ok((s1, s2, count))
        })
        .collect();
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0usize);
    for s in sums {
        let (a, b, c) = s?;
        s1 += a;
        s2 += b;
        n += c;
    }
    let n = n as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((box_volume * mean, box_volume * (var / n).sqrt()))
}
