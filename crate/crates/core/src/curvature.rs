//! Riemann curvature, flag curvature, Ricci curvature, distortion and
//! S-curvature, all built on the spray of the metric.

use nalgebra::DMatrix;
use rand::Rng;

use crate::connection::{connection_coefficients, spray_unchecked};
use crate::diff::{self, INNER_STEP, OUTER_STEP};
use crate::error::{FinslerError, Result};
use crate::models::{MetricModel, ModelKind};
use crate::norms::{
    fundamental_tensor, inner, require_nonzero, sigma_density, sigma_density_polar, DEFAULT_VOLUME_SAMPLES,
};
use crate::sampling::{norm, random_unit_vector, substream};

/// Default absolute tolerance for curvature values.
pub const TOL_CURV: f64 = 1e-3;

/// Relative Gram determinant below which a flag counts as degenerate.
pub const TOL_FLAG: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct CurvatureOptions {
    pub tol_curv: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions { tol_curv: TOL_CURV }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlagInput {
    pub x: Vec<f64>,
    /// Flagpole.
    pub y: Vec<f64>,
    /// Edge spanning the flag together with y.
    pub u: Vec<f64>,
}

/// R^i_k(x, y), acting on u as (R u)^i = R^i_k u^k.
pub fn riemann_curvature(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    riemann_curvature_with(model, x, y, &CurvatureOptions::default())
}

/// R^i_k = 2∂G^i/∂x^k − y^j ∂²G^i/∂x^j∂y^k + 2G^j ∂²G^i/∂y^j∂y^k − N^i_j N^j_k.
///
/// The mixed x/y term is computed twice, as a mixed difference of G and as an
/// x-difference of N; disagreement beyond 10·tol_curv is reported as noise.
pub fn riemann_curvature_with(
    model: &MetricModel,
    x: &[f64],
    y: &[f64],
    opts: &CurvatureOptions,
) -> Result<DMatrix<f64>> {
    model.check_point(x)?;
    let ny = require_nonzero(y)?;
    let d = model.dim();
    let scale = model.local_scale(x);
    let hx = OUTER_STEP * scale;
    let hy = OUTER_STEP * ny;
    let g0 = spray_unchecked(model, x, y)?;
    let n = connection_coefficients(model, x, y)?;

    let mut dx = DMatrix::zeros(d, d);
    let mut along_a = DMatrix::zeros(d, d);
    let mut spray_term = DMatrix::zeros(d, d);
    let ng = norm(&g0);
    for k in 0..d {
        let c = diff::d1(|s| spray_unchecked(model, &diff::offset_axis(x, k, s), y), hx)?;
        let a = diff::mixed(
            |s, t| spray_unchecked(model, &diff::offset(x, y, s), &diff::offset_axis(y, k, t)),
            hx / ny,
            hy,
        )?;
        let b = if ng > 1e-300 * ny * ny {
            diff::mixed(
                |s, t| {
                    let mut v = diff::offset(y, &g0, s);
                    v[k] += t;
                    spray_unchecked(model, x, &v)
                },
                hy / ng,
                hy,
            )?
        } else {
            vec![0.0; d]
        };
        for i in 0..d {
            dx[(i, k)] = c[i];
            along_a[(i, k)] = a[i];
            spray_term[(i, k)] = b[i];
        }
    }
    let flat = diff::d1(
        |s| {
            Ok(connection_coefficients(model, &diff::offset(x, y, s), y)?
                .as_slice()
                .to_vec())
        },
        hx / ny,
    )?;
    let along_b = DMatrix::from_column_slice(d, d, &flat);

    let discrepancy = (&along_a - &along_b).amax();
    let magnitude = dx
        .amax()
        .max(along_a.amax())
        .max(spray_term.amax())
        .max((&n * &n).amax());
    let allowed = 10.0 * opts.tol_curv * magnitude.max(1e-6 * ny * ny / (scale * scale));
    if discrepancy > allowed {
        return Err(FinslerError::NumericalNoise {
            what: "mixed x/y derivative of the spray",
            discrepancy,
            allowed,
        });
    }
    Ok(dx * 2.0 - along_a + spray_term * 2.0 - &n * &n)
}

/// K(P, y) = g_y(R_y u, u) / (g_y(y,y) g_y(u,u) − g_y(y,u)²).
pub fn flag_curvature(flag: &FlagInput, model: &MetricModel) -> Result<f64> {
    flag_curvature_with(flag, model, &CurvatureOptions::default())
}

pub fn flag_curvature_with(flag: &FlagInput, model: &MetricModel, opts: &CurvatureOptions) -> Result<f64> {
    require_nonzero(&flag.u)?;
    let g = fundamental_tensor(model, &flag.x, &flag.y)?.g;
    let gyy = inner(&g, &flag.y, &flag.y);
    let guu = inner(&g, &flag.u, &flag.u);
    let gyu = inner(&g, &flag.y, &flag.u);
    let gram = gyy * guu - gyu * gyu;
    if !(gram > TOL_FLAG * gyy * guu) {
        return Err(FinslerError::DegenerateFlag);
    }
    let r = riemann_curvature_with(model, &flag.x, &flag.y, opts)?;
    let u = nalgebra::DVector::from_column_slice(&flag.u);
    let ru = &r * &u;
    Ok(inner(&g, ru.as_slice(), &flag.u) / gram)
}

/// Ric(y) = trace of R_y (2-homogeneous in y).
pub fn ricci(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(riemann_curvature(model, x, y)?.trace())
}

/// τ(x, y) = ln(√det g_y / σ_F(x)).
pub fn distortion(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<f64> {
    let g = fundamental_tensor(model, x, y)?.g;
    let sigma = sigma_density(model, x, DEFAULT_VOLUME_SAMPLES, 0)?;
    Ok(0.5 * g.determinant().ln() - sigma.ln())
}

/// S(x, y) = N^m_m − y^m ∂_m ln σ_F.
pub fn s_curvature(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<f64> {
    model.check_point(x)?;
    let ny = require_nonzero(y)?;
    let n = connection_coefficients(model, x, y)?;
    let h = INNER_STEP * model.local_scale(x) / ny;
    let log_sigma = |s: f64| -> Result<f64> {
        let p = diff::offset(x, y, s);
        let v = match model.sigma_hook(&p) {
            Some(v) => v?,
            None => sigma_density_polar(model, &p)?,
        };
        Ok(v.ln())
    };
    Ok(n.trace() - diff::d1_scalar(log_sigma, h)?)
}

/// A point in the model's domain well away from any boundary.
pub fn sample_point<R: Rng>(model: &MetricModel, rng: &mut R) -> Vec<f64> {
    let d = model.dim();
    let dir = random_unit_vector(rng, d);
    let radius = 0.6 * rng.gen::<f64>().powf(1.0 / d as f64);
    match model.kind() {
        ModelKind::Funk(b) | ModelKind::Hilbert(b) => {
            let w: Vec<f64> = dir.iter().map(|v| v * radius).collect();
            // Map the Euclidean ball sample into the body at gauge `radius`.
            let g = b.gauge(&diff::offset(b.center(), &w, 1.0)) / radius;
            b.center().iter().zip(&w).map(|(c, w)| c + w / g).collect()
        }
        _ => dir.iter().map(|v| v * radius).collect(),
    }
}

/// `count` random flags with unit flagpoles, reproducible per seed.
pub fn sample_flags(model: &MetricModel, count: usize, seed: u64) -> Result<Vec<FlagInput>> {
    let mut rng = substream(seed, 0xf1a6);
    let d = model.dim();
    (0..count)
        .map(|_| {
            let x = sample_point(model, &mut rng);
            let y0 = random_unit_vector(&mut rng, d);
            let f = model.norm(&x, &y0)?;
            let y: Vec<f64> = y0.iter().map(|v| v / f).collect();
            let mut u = random_unit_vector(&mut rng, d);
            // keep the flag comfortably non-degenerate
            let c = crate::sampling::dot(&u, &y0);
            for i in 0..d {
                u[i] -= 0.5 * c * y0[i];
            }
            Ok(FlagInput { x, y, u })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::ConvexBody;

    #[test]
    fn euclidean_is_flat() {
        let m = MetricModel::euclidean(3);
        let r = riemann_curvature(&m, &[0.1, 0.2, 0.3], &[1.0, -0.5, 0.2]).unwrap();
        assert!(r.amax() < 1e-12);
        assert_eq!(ricci(&m, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(distortion(&m, &[0.0; 3], &[1.0, 2.0, 0.0]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn flagpole_is_annihilated() {
        let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
        let y = [0.3, 0.8];
        let r = riemann_curvature(&m, &[0.2, -0.1], &y).unwrap();
        let ry = &r * nalgebra::DVector::from_column_slice(&y);
        assert!(ry.amax() < TOL_CURV, "{ry}");
    }

    #[test]
    fn degenerate_flag() {
        let m = MetricModel::hyperbolic(2, 1.0);
        let flag = FlagInput {
            x: vec![0.1, 0.1],
            y: vec![1.0, 0.5],
            u: vec![2.0, 1.0],
        };
        assert!(matches!(flag_curvature(&flag, &m), Err(FinslerError::DegenerateFlag)));
    }

    #[test]
    fn sampled_points_are_admissible() {
        let b = ConvexBody::ellipsoid(&[0.2, 0.0], &[1.5, 0.5]).unwrap();
        let m = MetricModel::hilbert(b);
        for f in sample_flags(&m, 50, 3).unwrap() {
            assert!(m.body().unwrap().gauge(&f.x) <= 0.6 + 1e-12);
            assert!((m.norm(&f.x, &f.y).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
