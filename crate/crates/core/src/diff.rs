//! Fixed-stencil central differences with two rounds of Richardson
//! extrapolation (steps h, h/2, h/4; truncation error O(h^6)).
//!
//! The stencils are fixed linear combinations of samples, so a difference
//! quotient of a smooth function is itself smooth in the base point. That is
//! what makes nesting (derivatives of derivatives) usable: only rounding
//! noise is amplified, never step-selection jitter.

use crate::error::Result;

/// Relative step for derivatives of the norm itself.
pub const INNER_STEP: f64 = 1e-2;
/// Relative step for derivatives of quantities that are already difference
/// quotients (spray derivatives, curvature).
pub const OUTER_STEP: f64 = 5e-2;

#[inline]
fn richardson(a: f64, b: f64, c: f64) -> f64 {
    // a = D(h), b = D(h/2), c = D(h/4) with D(h) = D + c2 h^2 + c4 h^4 + ...
    (64.0 * c - 20.0 * b + a) / 45.0
}

fn combine(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((&a, &b), &c)| richardson(a, b, c))
        .collect()
}

/// d/ds f(s) at s = 0 for a vector-valued f.
pub fn d1<F>(f: F, h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let level = |h: f64| -> Result<Vec<f64>> {
        let p = f(h)?;
        let m = f(-h)?;
        Ok(p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    };
    Ok(combine(&level(h)?, &level(h / 2.0)?, &level(h / 4.0)?))
}

/// d²/ds² f(s) at s = 0; `f0` is f(0), supplied by the caller since it is
/// usually shared between several second derivatives.
pub fn d2<F>(f: F, f0: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let level = |h: f64| -> Result<Vec<f64>> {
        let p = f(h)?;
        let m = f(-h)?;
        Ok(p.iter()
            .zip(&m)
            .zip(f0)
            .map(|((p, m), z)| (p - 2.0 * z + m) / (h * h))
            .collect())
    };
    Ok(combine(&level(h)?, &level(h / 2.0)?, &level(h / 4.0)?))
}

/// ∂²/∂s∂t f(s, t) at the origin.
pub fn mixed<F>(f: F, hs: f64, ht: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> Result<Vec<f64>>,
{
    let level = |k: f64| -> Result<Vec<f64>> {
        let (s, t) = (hs * k, ht * k);
        let pp = f(s, t)?;
        let pm = f(s, -t)?;
        let mp = f(-s, t)?;
        let mm = f(-s, -t)?;
        Ok((0..pp.len())
            .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * s * t))
            .collect())
    };
    Ok(combine(&level(1.0)?, &level(0.5)?, &level(0.25)?))
}

pub fn d1_scalar<F>(f: F, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok(d1(|s| Ok(vec![f(s)?]), h)?[0])
}

pub fn d2_scalar<F>(f: F, f0: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok(d2(|s| Ok(vec![f(s)?]), &[f0], h)?[0])
}

pub fn mixed_scalar<F>(f: F, hs: f64, ht: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    Ok(mixed(|s, t| Ok(vec![f(s, t)?]), hs, ht)?[0])
}

/// `base + s * dir` as a fresh vector.
#[inline]
pub fn offset(base: &[f64], dir: &[f64], s: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + s * d).collect()
}

/// `base + s * e_k`.
#[inline]
pub fn offset_axis(base: &[f64], k: usize, s: f64) -> Vec<f64> {
    let mut v = base.to_vec();
    v[k] += s;
    v
}
