//! Minkowski-norm layer: norm evaluation, the fundamental tensor, strong
//! convexity diagnostics, convex bodies and Busemann–Hausdorff densities.

use std::ops::Deref;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{self, INNER_STEP};
use crate::error::{FinslerError, Result};
use crate::models::{MetricModel, DEFAULT_MARGIN};
use crate::sampling::{norm, random_unit_vector, substream, unit_ball_volume, Halton};

/// Directions shorter than this are rejected by derivative-based operations.
pub const EPSILON_ZERO: f64 = 1e-9;
/// Relative eigenvalue floor below which g is reported as degenerate.
pub const TOL_PD: f64 = 1e-12;
/// Default number of quasi-random samples for containment volumes.
pub const DEFAULT_VOLUME_SAMPLES: usize = 1 << 16;

/// A point in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

/// A tangent vector in chart components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector(pub Vec<f64>);

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

/// Norm value and fundamental tensor at (x, y).
#[derive(Clone, Debug)]
pub struct MinkowskiData {
    pub norm: f64,
    pub g: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum BodyKind {
    UnitBall,
    Ellipsoid,
}

/// Open ellipsoid {x : (x-c)ᵀ A (x-c) < 1} with A symmetric positive definite.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    kind: BodyKind,
    center: Vec<f64>,
    shape: DMatrix<f64>,
    sqrt_det: f64,
    min_semi_axis: f64,
    margin: f64,
}

impl ConvexBody {
    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::unit_ball_at(&vec![0.0; dim])
    }

    pub fn unit_ball_at(center: &[f64]) -> Result<Self> {
        let mut b = Self::from_shape(center, DMatrix::identity(center.len(), center.len()))?;
        b.kind = BodyKind::UnitBall;
        Ok(b)
    }

    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn ellipsoid(center: &[f64], semi_axes: &[f64]) -> Result<Self> {
        if semi_axes.len() != center.len() {
            return Err(FinslerError::invalid("body.center", "length must match semi_axes"));
        }
        if let Some(a) = semi_axes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(FinslerError::invalid(
                "body.semi_axes",
                format!("semi-axes must be positive, got {a}"),
            ));
        }
        let d = semi_axes.len();
        let shape = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0 / (semi_axes[i] * semi_axes[i])
            } else {
                0.0
            }
        });
        Self::from_shape(center, shape)
    }

    pub fn from_shape(center: &[f64], shape: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if d < 2 {
            return Err(FinslerError::invalid("dim", "dimension must be at least 2"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(FinslerError::invalid("body.center", "coordinates must be finite"));
        }
        if shape.nrows() != d || shape.ncols() != d {
            return Err(FinslerError::invalid("body.shape", "shape matrix has wrong size"));
        }
        if (&shape - shape.transpose()).amax() > 1e-12 * shape.amax() {
            return Err(FinslerError::invalid("body.shape", "shape matrix must be symmetric"));
        }
        let eig = SymmetricEigen::new(shape.clone());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if !(lmin > 0.0) {
            return Err(FinslerError::invalid(
                "body.shape",
                "shape matrix must be positive definite",
            ));
        }
        let sqrt_det = eig.eigenvalues.iter().product::<f64>().sqrt();
        Ok(ConvexBody {
            kind: BodyKind::Ellipsoid,
            center: center.to_vec(),
            shape,
            sqrt_det,
            min_semi_axis: 1.0 / lmax.sqrt(),
            margin: DEFAULT_MARGIN,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn describe(&self) -> String {
        match self.kind {
            BodyKind::UnitBall if self.center.iter().all(|c| *c == 0.0) => "unit-ball".into(),
            BodyKind::UnitBall => format!("unit-ball at {:?}", self.center),
            BodyKind::Ellipsoid => {
                let axes: Vec<f64> = (0..self.dim()).map(|i| 1.0 / self.shape[(i, i)].sqrt()).collect();
                format!("ellipsoid{axes:?} at {:?}", self.center)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn sqrt_det_shape(&self) -> f64 {
        self.sqrt_det
    }

    /// Euclidean volume of the body.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) / self.sqrt_det
    }

    fn quad_form(&self, w: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let mut r = 0.0;
            for j in 0..d {
                r += self.shape[(i, j)] * w[j];
            }
            s += w[i] * r;
        }
        s
    }

    fn bilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += u[i] * self.shape[(i, j)] * w[j];
            }
        }
        s
    }

    pub fn gauge_squared(&self, x: &[f64]) -> f64 {
        let w: Vec<f64> = x.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        self.quad_form(&w)
    }

    /// Minkowski gauge of the body about its centre (1 on the boundary).
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.gauge_squared(x).sqrt()
    }

    pub fn check_interior(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let g = self.gauge(x);
        if !(g <= 1.0 - self.margin) {
            return Err(FinslerError::PointOutsideDomain {
                coords: x.to_vec(),
                gauge: g,
                margin: self.margin,
            });
        }
        Ok(())
    }

    /// Funk norm 1/s* where x + s*·y hits the boundary. Assumes x interior.
    pub(crate) fn funk_norm_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let w: Vec<f64> = x.iter().zip(&self.center).map(|(x, c)| x - c).collect();
        let a = self.quad_form(y);
        if a == 0.0 {
            return 0.0;
        }
        let b = 2.0 * self.bilinear(&w, y);
        let m = 1.0 - self.quad_form(&w);
        let root = (b * b + 4.0 * a * m).sqrt();
        // Two algebraically equal forms; pick the one free of cancellation.
        if b >= 0.0 {
            (b + root) / (2.0 * m)
        } else {
            2.0 * a / (root - b)
        }
    }

    /// Lower bound for the Euclidean distance from x to the boundary.
    pub fn boundary_distance_lower_bound(&self, x: &[f64]) -> f64 {
        ((1.0 - self.gauge(x)) * self.min_semi_axis).max(1e-300)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let inv = self.shape.clone().try_inverse().expect("shape is SPD");
        let half: Vec<f64> = (0..self.dim()).map(|i| inv[(i, i)].sqrt()).collect();
        (
            self.center.iter().zip(&half).map(|(c, h)| c - h).collect(),
            self.center.iter().zip(&half).map(|(c, h)| c + h).collect(),
        )
    }
}

/// The s* > 0 with x + s*·y on the boundary of the body.
pub fn ray_boundary_parameter(body: &ConvexBody, x: &[f64], y: &[f64]) -> Result<f64> {
    body.check_interior(x)?;
    let n = norm(y);
    if n < EPSILON_ZERO {
        return Err(FinslerError::ZeroVector { norm: n });
    }
    Ok(1.0 / body.funk_norm_unchecked(x, y))
}

/// F(x, y); exactly 0 for the zero vector.
pub fn eval_norm(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<f64> {
    model.check_point(x)?;
    if y.iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    model.norm(x, y)
}

pub(crate) fn require_nonzero(y: &[f64]) -> Result<f64> {
    let n = norm(y);
    if !(n >= EPSILON_ZERO) {
        return Err(FinslerError::ZeroVector { norm: n });
    }
    Ok(n)
}

/// Hessian of ½F² in y by Richardson-extrapolated central differences.
pub(crate) fn tensor_raw(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<(f64, DMatrix<f64>)> {
    model.check_point(x)?;
    let ny = require_nonzero(y)?;
    let d = model.dim();
    let f = model.norm_unchecked(x, y);
    let f2 = f * f;
    let h = INNER_STEP * ny;
    let sq = |v: &[f64]| {
        let n = model.norm_unchecked(x, v);
        n * n
    };
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        g[(i, i)] = 0.5 * diff::d2_scalar(|s| Ok(sq(&diff::offset_axis(y, i, s))), f2, h)?;
        for j in 0..i {
            let v = 0.5
                * diff::mixed_scalar(
                    |s, t| {
                        let mut w = y.to_vec();
                        w[i] += s;
                        w[j] += t;
                        Ok(sq(&w))
                    },
                    h,
                    h,
                )?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok((f, g))
}

fn min_max_eigen(g: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(g.clone()).eigenvalues;
    (e.min(), e.max())
}

/// g_y(u, v) = ½ ∂²/∂s∂t F²(y + su + tv) at (x, y).
pub fn fundamental_tensor(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<MinkowskiData> {
    let (f, g) = tensor_raw(model, x, y)?;
    let (lmin, lmax) = min_max_eigen(&g);
    if !(lmin > TOL_PD * lmax.abs()) {
        return Err(FinslerError::DegenerateTensor { min_eigenvalue: lmin });
    }
    Ok(MinkowskiData {
        norm: f,
        g,
        min_eigenvalue: lmin,
    })
}

/// Minimum eigenvalue of g over `num_dirs` seeded random unit directions.
/// Degenerate tensors show up as a non-positive value rather than an error.
pub fn strong_convexity_report(model: &MetricModel, x: &[f64], num_dirs: usize, seed: u64) -> Result<f64> {
    if num_dirs == 0 {
        return Err(FinslerError::invalid("num_dirs", "must be at least 1"));
    }
    model.check_point(x)?;
    let mut rng = substream(seed, 0x5c0);
    let mut worst = f64::INFINITY;
    for _ in 0..num_dirs {
        let y = random_unit_vector(&mut rng, model.dim());
        let (_, g) = tensor_raw(model, x, &y)?;
        worst = worst.min(min_max_eigen(&g).0);
    }
    Ok(worst)
}

/// Euclidean volume of {c : gauge(c) < 1} for a positively homogeneous,
/// convex gauge on R^dim, by shifted-Halton containment sampling inside a
/// bounding box found from boundary ray points.
pub fn containment_volume<G>(gauge: G, dim: usize, samples: usize, seed: u64) -> Result<f64>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    if dim == 1 {
        // An interval: exact from the two boundary points.
        return Ok(1.0 / gauge(&[1.0])? + 1.0 / gauge(&[-1.0])?);
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut rng = substream(seed, 0xb0c5);
    let mut probe = |u: &[f64]| -> Result<()> {
        let r = 1.0 / gauge(u)?;
        for k in 0..dim {
            lo[k] = lo[k].min(r * u[k]);
            hi[k] = hi[k].max(r * u[k]);
        }
        Ok(())
    };
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut u = vec![0.0; dim];
            u[k] = s;
            probe(&u)?;
        }
    }
    for _ in 0..(128 * dim) {
        let u = random_unit_vector(&mut rng, dim);
        probe(&u)?;
    }
    // Inflate until no face of the box touches the body.
    let mut pad = 0.1;
    let (lo, hi) = loop {
        let l: Vec<f64> = (0..dim).map(|k| lo[k] - pad * (hi[k] - lo[k])).collect();
        let h: Vec<f64> = (0..dim).map(|k| hi[k] + pad * (hi[k] - lo[k])).collect();
        let mut touching = false;
        'faces: for k in 0..dim {
            for side in [l[k], h[k]] {
                for _ in 0..64 {
                    let mut p: Vec<f64> = (0..dim).map(|j| l[j] + rng.gen::<f64>() * (h[j] - l[j])).collect();
                    p[k] = side;
                    if gauge(&p)? < 1.0 {
                        touching = true;
                        break 'faces;
                    }
                }
            }
        }
        if !touching {
            break (l, h);
        }
        pad *= 2.0;
        if pad > 100.0 {
            return Err(FinslerError::NoConvergence {
                what: "bounding box of indicatrix body",
                iterations: 10,
            });
        }
    };
    let box_volume: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
    let mut seq = Halton::new(dim, seed);
    let mut u = vec![0.0; dim];
    let mut p = vec![0.0; dim];
    let mut inside = 0usize;
    for _ in 0..samples {
        seq.next_into(&mut u);
        for k in 0..dim {
            p[k] = lo[k] + u[k] * (hi[k] - lo[k]);
        }
        if gauge(&p)? < 1.0 {
            inside += 1;
        }
    }
    Ok(box_volume * inside as f64 / samples as f64)
}

/// Euclidean volume of the indicatrix body {y : F(x, y) < 1} in chart basis.
pub fn indicatrix_volume(model: &MetricModel, x: &[f64], samples: usize, seed: u64) -> Result<f64> {
    if samples < 1000 {
        return Err(FinslerError::invalid("samples", "at least 1000 samples are required"));
    }
    model.check_point(x)?;
    containment_volume(|c| Ok(model.norm_unchecked(x, c)), model.dim(), samples, seed)
}

/// Volume of {c : F(x, Σ c_i b_i) < 1} for a basis b of the tangent space
/// (or of a subspace, when fewer vectors are given).
pub fn indicatrix_volume_in_basis(
    model: &MetricModel,
    x: &[f64],
    basis: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    model.check_point(x)?;
    let d = model.dim();
    containment_volume(
        |c| {
            let mut v = vec![0.0; d];
            for (ci, b) in c.iter().zip(basis) {
                for k in 0..d {
                    v[k] += ci * b[k];
                }
            }
            Ok(model.norm_unchecked(x, &v))
        },
        basis.len(),
        samples,
        seed,
    )
}

/// Busemann–Hausdorff density σ_F(x) in the chart basis. Uses the model's
/// closed form when it has one, the containment estimate otherwise.
pub fn sigma_density(model: &MetricModel, x: &[f64], samples: usize, seed: u64) -> Result<f64> {
    if let Some(v) = model.sigma_hook(x) {
        return v;
    }
    sigma_density_generic(model, x, samples, seed)
}

/// σ_F(x) from the containment volume, ignoring any closed form.
pub fn sigma_density_generic(model: &MetricModel, x: &[f64], samples: usize, seed: u64) -> Result<f64> {
    Ok(unit_ball_volume(model.dim()) / indicatrix_volume(model, x, samples, seed)?)
}

/// σ_F(x) from the polar formula Vol(B_x) = (1/d)∫ F(x, u)^{-d} du over the
/// Euclidean unit sphere, on a fixed direction set. Unlike the containment
/// estimate this is smooth in x, so it can be differentiated.
pub fn sigma_density_polar(model: &MetricModel, x: &[f64]) -> Result<f64> {
    model.check_point(x)?;
    let d = model.dim();
    let (dirs, weight) = polar_directions(d);
    let mut total = 0.0;
    for u in &dirs {
        total += model.norm_unchecked(x, u).powi(-(d as i32));
    }
    let volume = total * weight / d as f64;
    Ok(unit_ball_volume(d) / volume)
}

fn polar_directions(d: usize) -> (Vec<Vec<f64>>, f64) {
    match d {
        2 => {
            let n = 512;
            let dirs = (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect();
            (dirs, 2.0 * std::f64::consts::PI / n as f64)
        }
        3 => {
            let n = 8192;
            let dirs = crate::sampling::fibonacci_sphere(n, 0)
                .into_iter()
                .map(|p| p.to_vec())
                .collect();
            (dirs, 4.0 * std::f64::consts::PI / n as f64)
        }
        _ => {
            let n = 1 << 15;
            let mut rng = substream(0, 0x901a);
            // antithetic pairs
            let mut dirs = Vec::with_capacity(n);
            while dirs.len() < n {
                let u = random_unit_vector(&mut rng, d);
                dirs.push(u.iter().map(|v| -v).collect());
                dirs.push(u);
            }
            (dirs, crate::sampling::unit_sphere_area(d) / n as f64)
        }
    }
}

/// g_y(u, v) for a precomputed tensor.
pub fn inner(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += u[i] * g[(i, j)] * v[j];
        }
    }
    s
}

/// |det| of the square matrix whose columns are the given vectors.
pub fn abs_det(columns: &[&[f64]]) -> f64 {
    let d = columns.len();
    let m = DMatrix::from_fn(d, d, |i, j| columns[j][i]);
    m.determinant().abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn funk_disk() -> MetricModel {
        MetricModel::funk(ConvexBody::unit_ball(2).unwrap())
    }

    #[test]
    fn norm_examples() {
        assert_eq!(
            eval_norm(&MetricModel::euclidean(2), &[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            5.0
        );
        let f = eval_norm(&funk_disk(), &[0.5, 0.0], &[1.0, 0.0]).unwrap();
        assert!((f - 2.0).abs() < 1e-14);
        let h = eval_norm(&MetricModel::hyperbolic(2, 1.0), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((h - 2.0).abs() < 1e-15);
        assert_eq!(eval_norm(&funk_disk(), &[0.1, 0.2], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn funk_is_not_reversible() {
        let m = funk_disk();
        let fwd = eval_norm(&m, &[0.5, 0.0], &[1.0, 0.0]).unwrap();
        let back = eval_norm(&m, &[0.5, 0.0], &[-1.0, 0.0]).unwrap();
        assert!((back - 2.0 / 3.0).abs() < 1e-14);
        assert!((fwd - back).abs() > 0.1);
    }

    #[test]
    fn ray_parameters() {
        let disk = ConvexBody::unit_ball(2).unwrap();
        assert!((ray_boundary_parameter(&disk, &[0.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((ray_boundary_parameter(&disk, &[0.5, 0.0], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let ell = ConvexBody::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert!((ray_boundary_parameter(&ell, &[0.0, 0.0], &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            ray_boundary_parameter(&disk, &[0.2, 0.0], &[0.0, 0.0]),
            Err(FinslerError::ZeroVector { .. })
        ));
    }

    #[test]
    fn margin_violation_is_rejected() {
        let disk = ConvexBody::unit_ball(2).unwrap().with_margin(1e-6);
        let m = MetricModel::funk(disk);
        let x = [1.0 - 0.5e-6, 0.0];
        assert!(matches!(
            eval_norm(&m, &x, &[1.0, 0.0]),
            Err(FinslerError::PointOutsideDomain { .. })
        ));
        assert!(matches!(
            strong_convexity_report(&m, &x, 4, 1),
            Err(FinslerError::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn tensor_examples() {
        let e = fundamental_tensor(&MetricModel::euclidean(2), &[0.3, 0.1], &[1.0, 1.0]).unwrap();
        assert!((e.g.clone() - DMatrix::identity(2, 2)).amax() < 1e-10);
        let h = fundamental_tensor(&MetricModel::hyperbolic(2, 1.0), &[0.0, 0.0], &[0.3, -0.7]).unwrap();
        assert!((h.g.clone() - DMatrix::identity(2, 2) * 4.0).amax() < 1e-9);
        assert!(matches!(
            fundamental_tensor(&MetricModel::euclidean(2), &[0.0, 0.0], &[1e-12, 0.0]),
            Err(FinslerError::ZeroVector { .. })
        ));
    }

    #[test]
    fn degenerate_tensor_is_reported() {
        // F = |y1| + |y2|·0 is not strongly convex: rank-one Hessian of F².
        let m = MetricModel::custom("flat", 2, |_, y| (y[0] * y[0] + 1e-30 * y[1] * y[1]).sqrt()).unwrap();
        let err = fundamental_tensor(&m, &[0.0, 0.0], &[1.0, 0.2]).unwrap_err();
        assert!(matches!(err, FinslerError::DegenerateTensor { .. }));
        assert!(strong_convexity_report(&m, &[0.0, 0.0], 5, 3).unwrap() <= 1e-10);
    }

    #[test]
    fn strong_convexity_examples() {
        let e = strong_convexity_report(&MetricModel::euclidean(3), &[0.0; 3], 10, 4).unwrap();
        assert!((e - 1.0).abs() < 1e-9);
        let f = strong_convexity_report(&funk_disk(), &[0.0, 0.0], 16, 4).unwrap();
        assert!(f > 0.0);
        let a = strong_convexity_report(&funk_disk(), &[0.1, 0.2], 16, 77).unwrap();
        let b = strong_convexity_report(&funk_disk(), &[0.1, 0.2], 16, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn indicatrix_volume_examples() {
        let n = DEFAULT_VOLUME_SAMPLES;
        let e = indicatrix_volume(&MetricModel::euclidean(2), &[0.0, 0.0], n, 1).unwrap();
        assert!((e / PI - 1.0).abs() < 3e-3, "{e}");
        let f = indicatrix_volume(&funk_disk(), &[0.5, 0.0], n, 2).unwrap();
        assert!((f / PI - 1.0).abs() < 3e-3, "{f}");
        let ell = MetricModel::funk(ConvexBody::ellipsoid(&[0.0, 0.0], &[2.0, 1.0]).unwrap());
        let v = indicatrix_volume(&ell, &[0.0, 0.0], n, 3).unwrap();
        assert!((v / (2.0 * PI) - 1.0).abs() < 3e-3, "{v}");
        assert!(indicatrix_volume(&funk_disk(), &[0.0, 0.0], 10, 3).is_err());
    }

    #[test]
    fn sigma_examples() {
        let n = DEFAULT_VOLUME_SAMPLES;
        assert_eq!(
            sigma_density(&MetricModel::euclidean(2), &[0.4, 0.0], n, 1).unwrap(),
            1.0
        );
        let funk = funk_disk().without_hooks();
        for x in [[0.0, 0.0], [0.5, 0.1], [-0.3, 0.6]] {
            let s = sigma_density(&funk, &x, n, 5).unwrap();
            assert!((s - 1.0).abs() < 3e-3, "{s}");
        }
        let hyp = MetricModel::hyperbolic(2, 1.0);
        assert!((sigma_density(&hyp, &[0.0, 0.0], n, 1).unwrap() - 4.0).abs() < 1e-14);
        let generic = sigma_density_generic(&hyp, &[0.0, 0.0], n, 1).unwrap();
        assert!((generic / 4.0 - 1.0).abs() < 1e-2);
        let det = fundamental_tensor(&hyp, &[0.2, -0.3], &[1.0, 0.0])
            .unwrap()
            .g
            .determinant()
            .sqrt();
        assert!((sigma_density(&hyp, &[0.2, -0.3], n, 1).unwrap() / det - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hilbert_sigma_hook_matches_containment() {
        let b = ConvexBody::ellipsoid(&[0.1, 0.0], &[1.5, 0.8]).unwrap();
        let m = MetricModel::hilbert(b);
        for x in [[0.1, 0.0], [0.6, 0.3], [-0.8, -0.2]] {
            let hook = sigma_density(&m, &x, 1 << 16, 3).unwrap();
            let gen = sigma_density_generic(&m, &x, 1 << 16, 3).unwrap();
            assert!((hook / gen - 1.0).abs() < 1e-2, "{hook} vs {gen}");
        }
    }

    #[test]
    fn sigma_is_basis_invariant() {
        let m = MetricModel::funk(ConvexBody::ellipsoid(&[0.0, 0.0], &[1.3, 0.7]).unwrap());
        let x = [0.2, -0.1];
        let chart = indicatrix_volume(&m, &x, 1 << 16, 8).unwrap();
        let a: f64 = 0.7;
        let basis = vec![vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()]];
        let rotated = indicatrix_volume_in_basis(&m, &x, &basis, 1 << 16, 9).unwrap();
        assert!((chart / rotated - 1.0).abs() < 5e-3, "{chart} vs {rotated}");
    }
}
