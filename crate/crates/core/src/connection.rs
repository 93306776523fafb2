//! Geodesic coefficients, connection coefficients, covariant derivatives and
//! geodesic integration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diff::{self, INNER_STEP, OUTER_STEP};
use crate::error::{FinslerError, Result};
use crate::models::MetricModel;
use crate::norms::{require_nonzero, tensor_raw, TOL_PD};
use crate::sampling::norm;

/// Spray coefficients G^i(x, y), so that geodesics solve ẍ + 2G(x, ẋ) = 0.
pub fn geodesic_coefficients(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    model.check_point(x)?;
    require_nonzero(y)?;
    if let Some(g) = model.spray_hook(x, y) {
        return g;
    }
    geodesic_coefficients_numeric(model, x, y)
}

/// G^i = ¼ g^{il} ( y^k ∂²F²/∂x^k∂y^l − ∂F²/∂x^l ), all derivatives by
/// finite differences of the norm.
pub(crate) fn geodesic_coefficients_numeric(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let (_, g) = tensor_raw(model, x, y)?;
    let d = model.dim();
    let ny = norm(y);
    let hx = INNER_STEP * model.local_scale(x);
    let hy = INNER_STEP * ny;
    let sq = |p: &[f64], v: &[f64]| {
        let f = model.norm_unchecked(p, v);
        f * f
    };
    let mut rhs = DVector::zeros(d);
    for l in 0..d {
        let along = diff::mixed_scalar(
            |s, t| Ok(sq(&diff::offset(x, y, s), &diff::offset_axis(y, l, t))),
            hx / ny,
            hy,
        )?;
        let grad = diff::d1_scalar(|s| Ok(sq(&diff::offset_axis(x, l, s), y)), hx)?;
        rhs[l] = 0.25 * (along - grad);
    }
    let chol = g.clone().cholesky().ok_or_else(|| FinslerError::DegenerateTensor {
        min_eigenvalue: g.clone().symmetric_eigenvalues().min(),
    })?;
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(FinslerError::DegenerateTensor { min_eigenvalue: TOL_PD });
    }
    Ok(sol.iter().copied().collect())
}

/// N^i_j = ∂G^i/∂y^j, returned as a d×d matrix indexed (i, j).
pub fn connection_coefficients(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    model.check_point(x)?;
    let ny = require_nonzero(y)?;
    let d = model.dim();
    let h = OUTER_STEP * ny;
    let mut n = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = diff::d1(|s| spray_unchecked(model, x, &diff::offset_axis(y, j, s)), h)?;
        for i in 0..d {
            n[(i, j)] = col[i];
        }
    }
    Ok(n)
}

/// G at an admissible point without re-validating the inputs.
pub(crate) fn spray_unchecked(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if let Some(g) = model.spray_hook(x, y) {
        return g;
    }
    geodesic_coefficients_numeric(model, x, y)
}

/// D_y U = dU + N(x, y) U, given the value of U at x and its ordinary
/// derivative along y.
pub fn covariant_derivative(
    model: &MetricModel,
    x: &[f64],
    y: &[f64],
    u_value: &[f64],
    du_along_y: &[f64],
) -> Result<Vec<f64>> {
    let d = model.dim();
    if u_value.len() != d || du_along_y.len() != d {
        return Err(FinslerError::DimensionMismatch {
            expected: d,
            got: u_value.len().min(du_along_y.len()),
        });
    }
    let n = connection_coefficients(model, x, y)?;
    Ok((0..d)
        .map(|i| du_along_y[i] + (0..d).map(|j| n[(i, j)] * u_value[j]).sum::<f64>())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub initial_step: f64,
    pub max_step: f64,
    pub error_tol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 1e-2,
            max_step: 0.5,
            error_tol: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl StepControl {
    pub fn with_tol(error_tol: f64) -> Self {
        StepControl {
            error_tol,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.max_step > 0.0 && self.error_tol > 0.0 && self.max_steps > 0) {
            return Err(FinslerError::invalid(
                "step_control",
                "all step-control fields must be positive",
            ));
        }
        Ok(())
    }
}

/// Speed drift above which a path is flagged.
pub const TOL_GEO: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// max |F(c, ċ) − F₀| / F₀ over the accepted steps.
    pub speed_drift: f64,
    /// Set when the speed drift exceeds [`TOL_GEO`].
    pub flagged: bool,
    /// Set when integration stopped early at the boundary margin.
    pub domain_exit: bool,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("path has at least one point")
    }
}

type State = (Vec<f64>, Vec<f64>);

fn accel(model: &MetricModel, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    model.check_point(x)?;
    let g = spray_unchecked(model, x, v)?;
    Ok(g.into_iter().map(|g| -2.0 * g).collect())
}

fn rk4(model: &MetricModel, x: &[f64], v: &[f64], h: f64) -> Result<State> {
    let d = x.len();
    let a1 = accel(model, x, v)?;
    let x2: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * v[i]).collect();
    let v2: Vec<f64> = (0..d).map(|i| v[i] + 0.5 * h * a1[i]).collect();
    let a2 = accel(model, &x2, &v2)?;
    let x3: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * v2[i]).collect();
    let v3: Vec<f64> = (0..d).map(|i| v[i] + 0.5 * h * a2[i]).collect();
    let a3 = accel(model, &x3, &v3)?;
    let x4: Vec<f64> = (0..d).map(|i| x[i] + h * v3[i]).collect();
    let v4: Vec<f64> = (0..d).map(|i| v[i] + h * a3[i]).collect();
    let a4 = accel(model, &x4, &v4)?;
    let xn = (0..d)
        .map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let vn = (0..d)
        .map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
        .collect();
    Ok((xn, vn))
}

/// The accepted update: two RK4 half-steps.
fn advance(model: &MetricModel, x: &[f64], v: &[f64], h: f64) -> Result<State> {
    let (xm, vm) = rk4(model, x, v, 0.5 * h)?;
    let (xn, vn) = rk4(model, &xm, &vm, 0.5 * h)?;
    model.check_point(&xn)?;
    Ok((xn, vn))
}

/// Step sizes accepted along a reference ray, with the indices at which each
/// requested output time was reached.
#[derive(Clone, Debug, Default)]
pub struct StepGrid {
    pub steps: Vec<f64>,
    pub marks: Vec<usize>,
}

/// Result of an adaptive run sampled at requested times.
#[derive(Clone, Debug)]
pub struct Flow {
    pub states: Vec<State>,
    pub grid: StepGrid,
    pub speed_drift: f64,
}

enum Stop {
    Done,
    DomainExit,
}

/// Adaptive step-doubling RK4 from (x0, v0), reporting every accepted step
/// through `on_step` and hitting each time in `outputs` exactly.
fn drive<C>(
    model: &MetricModel,
    x0: &[f64],
    v0: &[f64],
    outputs: &[f64],
    ctrl: &StepControl,
    mut on_step: C,
) -> Result<(Stop, StepGrid, f64)>
where
    C: FnMut(f64, &[f64], &[f64], bool),
{
    ctrl.validate()?;
    model.check_point(x0)?;
    require_nonzero(v0)?;
    let f0 = model.norm(x0, v0)?;
    let mut grid = StepGrid::default();
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    let mut t = 0.0;
    let mut h = ctrl.initial_step / f0.max(1e-300);
    let mut drift: f64 = 0.0;
    let mut next = 0;
    while next < outputs.len() && outputs[next] <= 0.0 {
        grid.marks.push(0);
        on_step(0.0, &x, &v, true);
        next += 1;
    }
    let target = outputs.last().copied().unwrap_or(0.0);
    let mut rejections = 0usize;
    // Not reset by accepted steps: a path hugging the margin alternates
    // between tiny accepted steps and boundary hits.
    let mut boundary_hits = 0usize;
    while next < outputs.len() {
        if grid.steps.len() >= ctrl.max_steps {
            return Err(FinslerError::StepLimitExceeded {
                max_steps: ctrl.max_steps,
                target,
            });
        }
        let hmax = ctrl.max_step / f0.max(1e-300);
        let remaining = outputs[next] - t;
        let clipped = h.min(hmax) >= remaining;
        let step = if clipped { remaining } else { h.min(hmax) };
        let trial = rk4(model, &x, &v, step).and_then(|full| Ok((full, advance(model, &x, &v, step)?)));
        let ((xf, vf), (xn, vn)) = match trial {
            Ok(r) => r,
            Err(e) if e.is_domain() => {
                h = 0.25 * step;
                boundary_hits += 1;
                if h < 1e-14 * (1.0 + t) || boundary_hits > 200 {
                    return Ok((Stop::DomainExit, grid, drift));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = model.local_scale(&x);
        let dx = xn.iter().zip(&xf).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dv = vn.iter().zip(&vf).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        // Positions cannot be resolved below their own rounding level, however
        // close the boundary is, and the metric there is only known to the
        // matching relative precision.
        let rounding = 16.0 * f64::EPSILON * norm(&x);
        let x_tol = ctrl.error_tol * scale + rounding;
        let v_tol = (ctrl.error_tol + rounding / scale) * norm(&v) + 1e-300;
        let err = (dx / x_tol).max(dv / v_tol);
        let factor = if err == 0.0 {
            4.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 4.0)
        };
        if err > 1.0 {
            h = step * factor;
            rejections += 1;
            if h < 1e-14 * (1.0 + t) {
                return Err(FinslerError::NoConvergence {
                    what: "geodesic step-size control",
                    iterations: rejections,
                });
            }
            continue;
        }
        rejections = 0;
        t = if clipped { outputs[next] } else { t + step };
        x = xn;
        v = vn;
        grid.steps.push(step);
        let f = model.norm_unchecked(&x, &v);
        drift = drift.max((f - f0).abs() / f0);
        let hit = clipped;
        if hit {
            grid.marks.push(grid.steps.len());
            next += 1;
        }
        on_step(t, &x, &v, hit);
        if !clipped {
            h = step * factor;
        }
        // Repeated output times are hit without taking a step.
        while hit && next < outputs.len() && outputs[next] <= t {
            grid.marks.push(grid.steps.len());
            on_step(t, &x, &v, true);
            next += 1;
        }
    }
    Ok((Stop::Done, grid, drift))
}

/// Solves ẍ + 2G(x, ẋ) = 0 on [0, T]. Body-backed metrics stop early with
/// `domain_exit` set if the boundary margin is reached.
pub fn integrate_geodesic(
    model: &MetricModel,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    ctrl: &StepControl,
) -> Result<GeodesicPath> {
    if !(t_end > 0.0) {
        return Err(FinslerError::invalid("T", "integration time must be positive"));
    }
    let mut path = GeodesicPath {
        times: vec![0.0],
        points: vec![x0.to_vec()],
        velocities: vec![y0.to_vec()],
        speed_drift: 0.0,
        flagged: false,
        domain_exit: false,
    };
    let (stop, _, drift) = drive(model, x0, y0, &[t_end], ctrl, |t, x, v, _| {
        path.times.push(t);
        path.points.push(x.to_vec());
        path.velocities.push(v.to_vec());
    })?;
    path.speed_drift = drift;
    path.flagged = drift > TOL_GEO;
    path.domain_exit = matches!(stop, Stop::DomainExit);
    Ok(path)
}

/// Position and velocity at each of the (nondecreasing) `times`, plus the
/// step grid so nearby rays can be replayed on identical steps.
pub fn flow_at_times(model: &MetricModel, x0: &[f64], v0: &[f64], times: &[f64], ctrl: &StepControl) -> Result<Flow> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(FinslerError::invalid("times", "output times must be nondecreasing"));
    }
    let mut states = Vec::with_capacity(times.len());
    let (stop, grid, drift) = drive(model, x0, v0, times, ctrl, |_, x, v, hit| {
        if hit {
            states.push((x.to_vec(), v.to_vec()));
        }
    })?;
    if matches!(stop, Stop::DomainExit) {
        return Err(model.boundary_stop(states.last().map(|s| s.0.as_slice()).unwrap_or(x0)));
    }
    Ok(Flow {
        states,
        grid,
        speed_drift: drift,
    })
}

/// Integrates from (x0, v0) on a previously accepted step grid and returns
/// the states at the grid's marks. Using the same steps for neighbouring
/// rays keeps finite differences across rays smooth.
pub fn replay(model: &MetricModel, x0: &[f64], v0: &[f64], grid: &StepGrid) -> Result<Vec<State>> {
    model.check_point(x0)?;
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    let mut out = Vec::with_capacity(grid.marks.len());
    let mut mark = 0;
    let mut emit = |taken: usize, x: &[f64], v: &[f64], out: &mut Vec<State>| {
        while mark < grid.marks.len() && grid.marks[mark] == taken {
            out.push((x.to_vec(), v.to_vec()));
            mark += 1;
        }
    };
    emit(0, &x, &v, &mut out);
    for (k, &h) in grid.steps.iter().enumerate() {
        let (xn, vn) = advance(model, &x, &v, h)?;
        x = xn;
        v = vn;
        emit(k + 1, &x, &v, &mut out);
    }
    Ok(out)
}

/// exp_p(t·y) for a unit vector y (F(p, y) = 1).
pub fn exp_map(model: &MetricModel, p: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    exp_map_with(model, p, y, t, &StepControl::default())
}

pub fn exp_map_with(model: &MetricModel, p: &[f64], y: &[f64], t: f64, ctrl: &StepControl) -> Result<Vec<f64>> {
    let f = model.norm(p, y)?;
    if (f - 1.0).abs() > 1e-9 {
        return Err(FinslerError::invalid(
            "y",
            format!("exp_map needs a unit vector, F(p, y) = {f}"),
        ));
    }
    if !(t >= 0.0) {
        return Err(FinslerError::invalid(
            "t",
            "only forward geodesics (t >= 0) are defined",
        ));
    }
    if t == 0.0 {
        return Ok(p.to_vec());
    }
    let path = integrate_geodesic(model, p, y, t, ctrl)?;
    if path.domain_exit {
        return Err(model.boundary_stop(path.endpoint()));
    }
    Ok(path.endpoint().to_vec())
}

/// Fixed-step integration with `steps` equal accepted steps; used to measure
/// the method's order.
pub fn integrate_fixed(model: &MetricModel, x0: &[f64], v0: &[f64], t_end: f64, steps: usize) -> Result<State> {
    let h = t_end / steps as f64;
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    for _ in 0..steps {
        let (xn, vn) = advance(model, &x, &v, h)?;
        x = xn;
        v = vn;
    }
    Ok((x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::ConvexBody;

    #[test]
    fn euclidean_line() {
        let m = MetricModel::euclidean(2);
        let p = integrate_geodesic(&m, &[0.0, 0.0], &[1.0, 0.0], 3.0, &StepControl::default()).unwrap();
        assert!((p.endpoint()[0] - 3.0).abs() < 1e-12 && p.endpoint()[1].abs() < 1e-12);
        assert!(p.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn exp_at_zero_is_identity() {
        let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
        let f = m.norm(&[0.1, 0.2], &[1.0, 0.0]).unwrap();
        let y = [1.0 / f, 0.0];
        assert_eq!(exp_map(&m, &[0.1, 0.2], &y, 0.0).unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn replay_matches_adaptive_run() {
        let m = MetricModel::hyperbolic(2, 1.0);
        let times = [0.5, 1.0, 1.0, 2.0];
        let flow = flow_at_times(&m, &[0.1, 0.0], &[0.2, 0.3], &times, &StepControl::default()).unwrap();
        let again = replay(&m, &[0.1, 0.0], &[0.2, 0.3], &flow.grid).unwrap();
        assert_eq!(flow.states.len(), 4);
        assert_eq!(again, flow.states);
    }

    #[test]
    fn funk_run_toward_boundary_stays_inside() {
        let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
        let p = integrate_geodesic(&m, &[0.0, 0.0], &[1.0, 0.0], 20.0, &StepControl::default()).unwrap();
        assert!(!p.domain_exit);
        let expected = 1.0 - (-20.0f64).exp();
        assert!((p.endpoint()[0] / expected - 1.0).abs() < 1e-8, "{:?}", p.endpoint());
    }
}
