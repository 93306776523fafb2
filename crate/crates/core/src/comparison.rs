//! Comparison functions for curvature-pinched Finsler–Hadamard manifolds and
//! a harness that checks measured volumes and areas against them.
//!
//! With flag curvature −k2² ≤ K ≤ −k1² and S-curvature n·δ1 ≤ S ≤ n·δ2
//! (n = d − 1), the radial density of geodesic spheres is squeezed between
//! χ(t) = (e^{−δt} sinh(kt)/k)^n for the two parameter pairs.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::measure::{radial_profile, DirectionQuadrature, QuadratureScheme, RadialProfile};
use crate::models::MetricModel;
use crate::quad;
use crate::sampling::unit_sphere_area;

/// Pinching constants: −k2² ≤ K ≤ −k1², n·δ1 ≤ S ≤ n·δ2, n = d − 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl BoundParams {
    pub fn new(n: usize, k1: f64, k2: f64, delta1: f64, delta2: f64) -> Result<Self> {
        if n == 0 {
            return Err(FinslerError::invalid("n", "must be at least 1"));
        }
        if !(k1 > 0.0 && k1 <= k2 && k2.is_finite()) {
            return Err(FinslerError::invalid("k1", "need 0 < k1 <= k2"));
        }
        if !(delta1 <= delta2 && delta1.is_finite() && delta2.is_finite()) {
            return Err(FinslerError::invalid("delta1", "need delta1 <= delta2"));
        }
        Ok(BoundParams {
            n,
            k1,
            k2,
            delta1,
            delta2,
        })
    }

    /// k1 = k2 = k, δ1 = δ2 = δ.
    pub fn collapsed(n: usize, k: f64, delta: f64) -> Result<Self> {
        Self::new(n, k, k, delta, delta)
    }

    /// Constants recorded for a catalog model.
    pub fn from_model(model: &MetricModel) -> Result<Self> {
        let f = model.facts();
        match (f.k1, f.k2, f.delta1, f.delta2) {
            (Some(k1), Some(k2), Some(d1), Some(d2)) => Self::new(model.dim() - 1, k1, k2, d1, d2),
            _ => Err(FinslerError::InadmissibleModel(format!(
                "{} has no negative curvature pinching",
                model.name()
            ))),
        }
    }

    /// δ1 < k1 and δ2 < k2.
    pub fn admissible(&self) -> bool {
        self.delta1 < self.k1 && self.delta2 < self.k2
    }

    /// Limits of ln Vol(B_t)/t allowed by the pinching: [n(k1−δ1), n(k2−δ2)].
    pub fn entropy_bounds(&self) -> (f64, f64) {
        let n = self.n as f64;
        (n * (self.k1 - self.delta1), n * (self.k2 - self.delta2))
    }

    fn require_admissible(&self) -> Result<()> {
        if !self.admissible() {
            return Err(FinslerError::InadmissibleModel(format!(
                "the S-curvature bound is not below the curvature bound (delta1 = {}, k1 = {}, delta2 = {}, k2 = {})",
                self.delta1, self.k1, self.delta2, self.k2
            )));
        }
        Ok(())
    }
}

/// s_λ(t): sin(√λ t)/√λ, t, or sinh(√−λ t)/√−λ.
pub fn s_lambda(t: f64, lambda: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        t
    } else if lambda > 0.0 {
        let r = lambda.sqrt();
        (r * t).sin() / r
    } else {
        let r = (-lambda).sqrt();
        (r * t).sinh() / r
    }
}

/// s'_λ(t) / s_λ(t).
pub fn s_lambda_log_derivative(t: f64, lambda: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        1.0 / t
    } else if lambda > 0.0 {
        let r = lambda.sqrt();
        r / (r * t).tan()
    } else {
        let r = (-lambda).sqrt();
        r / (r * t).tanh()
    }
}

/// χ(t) = (e^{−δt} sinh(kt)/k)^n.
pub fn chi(t: f64, k: f64, delta: f64, n: usize) -> f64 {
    ((-delta * t).exp() * (k * t).sinh() / k).powi(n as i32)
}

/// ln χ(t), safe for large t.
pub fn log_chi(t: f64, k: f64, delta: f64, n: usize) -> f64 {
    let kt = k * t;
    // ln sinh(x) = x + ln(1 − e^{−2x}) − ln 2
    let ln_sinh = if kt > 20.0 {
        kt + (-(-2.0 * kt).exp()).ln_1p() - std::f64::consts::LN_2
    } else {
        kt.sinh().ln()
    };
    n as f64 * (-delta * t + ln_sinh - k.ln())
}

/// ∫₀^r e^{h(t)} dt / e^{h(r)} for a log-density h.
fn log_integral_ratio<H: Fn(f64) -> f64>(h: H, r: f64) -> f64 {
    let hr = h(r);
    quad::integrate(|t| (h(t) - hr).exp(), 0.0, r, 1e-15, 1e-13).0
}

/// ∫₀^r χ(t) dt / χ(r).
pub fn chi_ratio(r: f64, k: f64, delta: f64, n: usize) -> f64 {
    log_integral_ratio(|t| log_chi(t, k, delta, n), r)
}

/// ln ∫₀^r χ(t) dt.
pub fn log_chi_integral(r: f64, k: f64, delta: f64, n: usize) -> f64 {
    chi_ratio(r, k, delta, n).ln() + log_chi(r, k, delta, n)
}

fn f_unchecked(r: f64, n: usize, k: f64, delta: f64) -> f64 {
    let nf = n as f64;
    let c = nf * (k - delta);
    let a = (-2.0 * k * r).exp();
    let first = -(-c * r).exp_m1() / c;
    // n (e^{−2kr} − e^{−cr}) / (c − 2k), continued through c = 2k
    let gap = c - 2.0 * k;
    let second = if gap.abs() < 1e-9 {
        nf * r * a
    } else {
        -nf * a * (-gap * r).exp_m1() / gap
    };
    (first - second) / (1.0 - a).powi(n as i32)
}

fn big_f_unchecked(r: f64, n: usize, k: f64, delta: f64) -> f64 {
    let c = n as f64 * (k - delta);
    -(-c * r).exp_m1() / c
}

/// Lower bound f(r) for Vol(B_r)/Area(S_r), from (k2, δ2).
pub fn lower_bound_f(r: f64, p: &BoundParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(FinslerError::invalid("r", "must be positive"));
    }
    if !(p.delta2 < p.k2) {
        return Err(FinslerError::InadmissibleModel(format!(
            "delta2 = {} is not below k2 = {}",
            p.delta2, p.k2
        )));
    }
    Ok(f_unchecked(r, p.n, p.k2, p.delta2))
}

/// Upper bound F(r) for Vol(B_r)/Area(S_r), from (k1, δ1).
#[allow(non_snake_case)]
pub fn upper_bound_F(r: f64, p: &BoundParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(FinslerError::invalid("r", "must be positive"));
    }
    if !(p.delta1 < p.k1) {
        return Err(FinslerError::InadmissibleModel(format!(
            "delta1 = {} is not below k1 = {}",
            p.delta1, p.k1
        )));
    }
    Ok(big_f_unchecked(r, p.n, p.k1, p.delta1))
}

/// Bounds on the mean curvature of a geodesic sphere of radius t:
/// (dim−1)·s'_λ/s_λ ∓ (dim−1)·δ.
pub fn mean_curvature_bounds(t: f64, lambda: f64, delta: f64, dim: usize) -> (f64, f64) {
    let m = (dim - 1) as f64;
    let base = m * s_lambda_log_derivative(t, lambda);
    (base - m * delta, base + m * delta)
}

/// Interval for the mean curvature Π_t of a geodesic sphere under the
/// pinching `p`. The lower end takes K ≤ −k1² with S ≤ nδ2. The upper end
/// takes Ric ≥ −n·k2² with the lower S bound nδ1 read as S ≥ −nδ,
/// δ = max(−δ1, 0).
pub fn pinched_mean_curvature(t: f64, p: &BoundParams) -> (f64, f64) {
    let dim = p.n + 1;
    let (lower, _) = mean_curvature_bounds(t, -p.k1 * p.k1, p.delta2, dim);
    let (_, upper) = mean_curvature_bounds(t, -p.k2 * p.k2, (-p.delta1).max(0.0), dim);
    (lower, upper)
}

/// Bounds on Vol(B_t): the unit n-sphere area times ∫₀^t χ for the slowest
/// (k1, δ2) and fastest (k2, δ1) admissible growth.
pub fn ball_volume_sandwich(t: f64, p: &BoundParams) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(FinslerError::invalid("t", "must be positive"));
    }
    p.require_admissible()?;
    let ln_sphere = unit_sphere_area(p.n + 1).ln();
    let lower = (ln_sphere + log_chi_integral(t, p.k1, p.delta2, p.n)).exp();
    let upper = (ln_sphere + log_chi_integral(t, p.k2, p.delta1, p.n)).exp();
    Ok((lower, upper))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub r: f64,
    pub area: f64,
    pub volume: f64,
    pub ratio: f64,
    pub f_lower: f64,
    #[serde(rename = "F_upper")]
    pub f_upper: f64,
    /// None when the model is outside the theorem's hypotheses.
    pub within: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative slack applied to both bounds.
    pub slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { slack: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureInfo {
    pub scheme: QuadratureScheme,
    pub resolution: usize,
    pub seed: u64,
    pub base_point: Vec<f64>,
}

impl From<&DirectionQuadrature> for QuadratureInfo {
    fn from(q: &DirectionQuadrature) -> Self {
        QuadratureInfo {
            scheme: q.scheme,
            resolution: q.resolution,
            seed: q.seed,
            base_point: q.p.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: String,
    pub params: BoundParams,
    pub rows: Vec<RatioRow>,
    pub all_pass: bool,
    pub tolerances: Tolerances,
    pub seeds: Vec<u64>,
    pub quadrature: QuadratureInfo,
    /// Which closed form of the lower bound is used.
    pub f_formula: String,
    /// Why the hypotheses fail, when they do.
    pub inadmissible: Option<String>,
}

fn check_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FinslerError::invalid("r_grid", "radii must be positive and increasing"));
    }
    Ok(())
}

/// Measures Vol/Area on `r_grid` and compares with f and F. Rows are filled
/// even when the pinching is inadmissible, with `within` left empty.
pub fn ratio_report(
    model: &MetricModel,
    p: &BoundParams,
    r_grid: &[f64],
    quad: &DirectionQuadrature,
    tol: &Tolerances,
) -> Result<ComparisonReport> {
    check_grid(r_grid)?;
    let profile = radial_profile(model, r_grid, quad)?;
    Ok(report_from_profile(model, p, &profile, quad, tol))
}

pub fn report_from_profile(
    model: &MetricModel,
    p: &BoundParams,
    profile: &RadialProfile,
    quad: &DirectionQuadrature,
    tol: &Tolerances,
) -> ComparisonReport {
    let admissible = p.admissible();
    let rows: Vec<RatioRow> = profile
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let ratio = profile.ratio(i);
            let f_lower = f_unchecked(r, p.n, p.k2, p.delta2);
            let f_upper = big_f_unchecked(r, p.n, p.k1, p.delta1);
            let within =
                admissible.then_some(f_lower * (1.0 - tol.slack) <= ratio && ratio <= f_upper * (1.0 + tol.slack));
            RatioRow {
                r,
                area: profile.area(i),
                volume: profile.volume(i),
                ratio,
                f_lower,
                f_upper,
                within,
            }
        })
        .collect();
    let all_pass = admissible && rows.iter().all(|r| r.within == Some(true));
    ComparisonReport {
        model: model.name(),
        params: *p,
        rows,
        all_pass,
        tolerances: tol.clone(),
        seeds: vec![quad.seed],
        quadrature: quad.into(),
        f_formula: "corrected".into(),
        inadmissible: (!admissible).then(|| p.require_admissible().unwrap_err().to_string()),
    }
}

/// Like [`ratio_report`], but an inadmissible pinching is an error.
pub fn verify_ratio_bounds(
    model: &MetricModel,
    p: &BoundParams,
    r_grid: &[f64],
    quad: &DirectionQuadrature,
) -> Result<ComparisonReport> {
    p.require_admissible()?;
    if model.facts().admissible() == Some(false) {
        return Err(FinslerError::InadmissibleModel(format!(
            "{} violates delta < k",
            model.name()
        )));
    }
    ratio_report(model, p, r_grid, quad, &Tolerances::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricRow {
    pub r: f64,
    pub volume: f64,
    pub area: f64,
    /// Area / ((d−1)(k1−δ1)).
    pub bound: f64,
    pub pass: bool,
}

/// Checks Vol(B_r) ≤ Area(S_r)/((d−1)(k1−δ1)) on each radius. The model's
/// own constants must imply K ≤ −k1² and S ≤ (d−1)δ1.
pub fn theorem4_check(
    model: &MetricModel,
    k1: f64,
    delta1: f64,
    r_grid: &[f64],
    quad: &DirectionQuadrature,
) -> Result<Vec<IsoperimetricRow>> {
    check_grid(r_grid)?;
    let facts = model.facts();
    let (Some(k_model), Some(d_model)) = (facts.k1, facts.delta2) else {
        return Err(FinslerError::InadmissibleModel(format!(
            "{} has no negative upper curvature bound",
            model.name()
        )));
    };
    if !(k1 > 0.0 && delta1 < k1) {
        return Err(FinslerError::InadmissibleModel(format!(
            "need 0 < k1 and delta1 < k1, got k1 = {k1}, delta1 = {delta1}"
        )));
    }
    if k_model < k1 || d_model > delta1 {
        return Err(FinslerError::InadmissibleModel(format!(
            "{} only guarantees K <= -{k_model}^2 and S <= n*{d_model}",
            model.name()
        )));
    }
    let profile = radial_profile(model, r_grid, quad)?;
    let c = (model.dim() - 1) as f64 * (k1 - delta1);
    Ok(profile
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (volume, area) = (profile.volume(i), profile.area(i));
            let bound = area / c;
            IsoperimetricRow {
                r,
                volume,
                area,
                bound,
                pass: volume <= bound * (1.0 + 1e-2),
            }
        })
        .collect())
}

/// Least-squares slope of ln Vol(B_t) over a uniform grid in the window,
/// with its standard error.
pub fn entropy_estimate(model: &MetricModel, window: (f64, f64), quad: &DirectionQuadrature) -> Result<(f64, f64)> {
    let (a, b) = window;
    if !(a > 0.0 && b - a >= 3.0) {
        return Err(FinslerError::invalid(
            "t_window",
            "window must start above 0 and span at least 3",
        ));
    }
    const POINTS: usize = 13;
    let grid: Vec<f64> = (0..POINTS)
        .map(|i| a + (b - a) * i as f64 / (POINTS - 1) as f64)
        .collect();
    let profile = radial_profile(model, &grid, quad)?;
    Ok(least_squares_slope(&grid, &profile.ln_volume))
}

/// Regression window for the pinching: starts once e^{−2k1·t} < 1e−4 and
/// spans six units.
pub fn default_entropy_window(p: &BoundParams) -> (f64, f64) {
    let start = (1e4f64).ln() / (2.0 * p.k1);
    (start, start + 6.0)
}

/// Slope and its standard error for y ≈ α + β t.
pub fn least_squares_slope(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let rss: f64 = t.iter().zip(y).map(|(t, y)| (y - ym - slope * (t - tm)).powi(2)).sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

/// ∫₀^r g / g(r) for g(t) = (e^{−(n+2)t/(2n)} sinh(t/2))^n, the
/// volume-to-area ratio of the Funk metric on a (n+1)-dimensional ball.
pub fn funk_example_ratio(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    log_integral_ratio(|t| nf * (-(nf + 2.0) * t / (2.0 * nf) + (0.5 * t).sinh().ln()), r)
}

const CSV_HEADER: [&str; 7] = ["r", "area", "volume", "ratio", "f_lower", "F_upper", "within"];

impl ComparisonReport {
    /// CSV with a header row and 13 significant digits.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io_err = |e: csv::Error| FinslerError::invalid("csv", e.to_string());
        w.write_record(CSV_HEADER).map_err(io_err)?;
        for row in &self.rows {
            let within = match row.within {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            w.write_record([
                format!("{:.12e}", row.r),
                format!("{:.12e}", row.area),
                format!("{:.12e}", row.volume),
                format!("{:.12e}", row.ratio),
                format!("{:.12e}", row.f_lower),
                format!("{:.12e}", row.f_upper),
                within.to_string(),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| FinslerError::invalid("csv", e.to_string()))?;
        Ok(())
    }

    /// Parses rows written by [`ComparisonReport::write_csv`].
    pub fn read_csv_rows<R: io::Read>(input: R) -> Result<Vec<RatioRow>> {
        let mut rdr = csv::Reader::from_reader(input);
        let bad = |m: String| FinslerError::invalid("csv", m);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
            };
            let within = match &rec[6] {
                "true" => Some(true),
                "false" => Some(false),
                "" => None,
                other => return Err(bad(format!("bad within flag '{other}'"))),
            };
            rows.push(RatioRow {
                r: num(0)?,
                area: num(1)?,
                volume: num(2)?,
                ratio: num(3)?,
                f_lower: num(4)?,
                f_upper: num(5)?,
                within,
            });
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_lambda_branches() {
        assert_eq!(s_lambda(2.0, 0.0), 2.0);
        assert!((s_lambda(1.0, -1.0) - 1f64.sinh()).abs() < 1e-15);
        assert!((s_lambda(std::f64::consts::FRAC_PI_2, 1.0) - 1.0).abs() < 1e-15);
        assert!((s_lambda(1.3, 1e-13) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn chi_values() {
        assert!((chi(1.0, 1.0, 0.0, 1) - 1f64.sinh()).abs() < 1e-15);
        assert!((chi(1e-6, 1.0, 0.0, 3) / 1e-18 - 1.0).abs() < 1e-5);
        for t in [0.3, 5.0, 19.0, 25.0] {
            assert!((log_chi(t, 0.7, 0.2, 2) - chi(t, 0.7, 0.2, 2).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_examples() {
        let p1 = BoundParams::collapsed(1, 1.0, 0.0).unwrap();
        assert!((lower_bound_f(2.0, &p1).unwrap() - 1f64.tanh()).abs() < 1e-12);
        assert!((upper_bound_F(2.0, &p1).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        let (lo, hi) = mean_curvature_bounds(1.0, -1.0, 0.0, 2);
        assert_eq!(lo, hi);
        assert!((lo - 1.0 / 1f64.tanh()).abs() < 1e-15);
        let (lo, _) = mean_curvature_bounds(2.0, -0.25, 1.5, 2);
        assert!((lo - (0.5 / 1f64.tanh() - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn singular_locus_is_continuous() {
        // n(k − δ) = 2k at n = 2, k = 1, δ = 0
        let p = BoundParams::collapsed(2, 1.0, 0.0).unwrap();
        let q = BoundParams::collapsed(2, 1.0, 1e-7).unwrap();
        let r = 1.7;
        assert!((lower_bound_f(r, &p).unwrap() - lower_bound_f(r, &q).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn slope_of_exact_line() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let (s, e) = least_squares_slope(&t, &[1.0, 3.0, 5.0, 7.0]);
        assert!((s - 2.0).abs() < 1e-14 && e < 1e-12);
    }
}
