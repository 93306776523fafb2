use finsler_core::comparison::{
    ball_volume_sandwich, chi, chi_ratio, default_entropy_window, entropy_estimate, funk_example_ratio, log_chi,
    lower_bound_f, mean_curvature_bounds, ratio_report, s_lambda, theorem4_check, upper_bound_F, verify_ratio_bounds,
    BoundParams, ComparisonReport, Tolerances,
};
use finsler_core::measure::{direction_quadrature, radial_profile};
use finsler_core::quad::integrate;
use finsler_core::sampling::substream;
use finsler_core::{ConvexBody, FinslerError, MetricModel};
use rand::Rng;
use std::f64::consts::PI;

/// ∫₀^r χ / χ(r) by plain adaptive quadrature, then the (1 − a)^n ≥ 1 − na
/// minorant of the proof applied to the same integrand.
fn minorant_ratio(r: f64, n: usize, k: f64, delta: f64) -> f64 {
    let nf = n as f64;
    // χ(t) = (2k)^{-n} e^{n(k−δ)t} (1 − e^{−2kt})^n ≥ (2k)^{-n} e^{n(k−δ)t} (1 − n e^{−2kt})
    let c = nf * (k - delta);
    let lower = |t: f64| ((c * (t - r)).exp()) * (1.0 - nf * (-2.0 * k * t).exp());
    let at_r = (1.0 - (-2.0 * k * r).exp()).powi(n as i32);
    integrate(lower, 0.0, r, 1e-14, 1e-12).0 / at_r
}

fn random_params(rng: &mut impl Rng) -> BoundParams {
    let n = rng.gen_range(1..=4);
    let k1: f64 = rng.gen_range(0.6..2.0);
    let k2 = k1 + rng.gen_range(0.0..1.0);
    let delta1: f64 = rng.gen_range(-0.5..(k1 - 0.5));
    let delta2 = delta1 + rng.gen_range(0.0..(k1 - 0.5 - delta1).max(1e-3));
    BoundParams::new(n, k1, k2, delta1, delta2).unwrap()
}

#[test]
fn s_lambda_examples() {
    assert_eq!(s_lambda(2.0, 0.0), 2.0);
    assert!((s_lambda(1.0, -1.0) - 1.175201).abs() < 1e-6);
    assert!((s_lambda(PI / 2.0, 1.0) - 1.0).abs() < 1e-15);
    // continuous through λ = 0
    assert!((s_lambda(1.5, 1e-9) - 1.5).abs() < 1e-8);
    assert!((s_lambda(1.5, -1e-9) - 1.5).abs() < 1e-8);
}

#[test]
fn chi_examples_and_log_derivative() {
    assert!((chi(1.0, 1.0, 0.0, 1) - 1.175201).abs() < 1e-6);
    assert!((chi(1e-6, 1.0, 0.0, 2) / 1e-12 - 1.0).abs() < 1e-5);
    for n in 1..=3 {
        for (k, delta) in [(1.0, 0.25), (0.5, -0.3), (2.0, 1.0)] {
            for t in [0.3, 1.0, 4.0, 15.0] {
                let h = 1e-3;
                let l = |s: f64| log_chi(t + s * h, k, delta, n);
                let fd = (l(-2.0) - 8.0 * l(-1.0) + 8.0 * l(1.0) - l(2.0)) / (12.0 * h);
                let exact = n as f64 * (k / (k * t).tanh() - delta);
                assert!(
                    (fd - exact).abs() < 1e-8,
                    "n={n} k={k} δ={delta} t={t}: {fd} vs {exact}"
                );
            }
        }
    }
    assert!(log_chi(400.0, 1.0, 0.0, 3).is_finite());
}

#[test]
fn chi_ratio_examples() {
    assert!((chi_ratio(2.0, 1.0, 0.0, 1) - (2f64.cosh() - 1.0) / 2f64.sinh()).abs() < 1e-12);
    assert!((chi_ratio(20.0, 1.0, 0.0, 2) - 0.5).abs() < 1e-4);
    let scan: Vec<f64> = (1..=200).map(|i| chi_ratio(0.1 * i as f64, 1.0, 0.3, 2)).collect();
    assert!(scan.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn lower_bound_examples() {
    let p1 = BoundParams::collapsed(1, 1.0, 0.0).unwrap();
    assert!((lower_bound_f(2.0, &p1).unwrap() - 1f64.tanh()).abs() < 1e-12);
    let p2 = BoundParams::collapsed(2, 1.0, 0.0).unwrap();
    assert!((lower_bound_f(60.0, &p2).unwrap() - 0.5).abs() < 1e-9);
    assert!(lower_bound_f(3.0, &p2).unwrap() < chi_ratio(3.0, 1.0, 0.0, 2));
    assert!(lower_bound_f(0.0, &p2).is_err());
}

#[test]
fn lower_bound_is_the_proof_minorant() {
    let mut rng = substream(11, 0);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let r = rng.gen_range(0.1..20.0);
        let f = lower_bound_f(r, &p).unwrap();
        let oracle = minorant_ratio(r, p.n, p.k2, p.delta2);
        assert!(
            (f - oracle).abs() < 1e-9 * oracle.abs().max(1.0),
            "{p:?} r={r}: {f} vs {oracle}"
        );
        if p.n == 1 {
            assert!((f - chi_ratio(r, p.k2, p.delta2, 1)).abs() < 1e-9);
        }
    }
}

#[test]
fn upper_bound_examples() {
    let p1 = BoundParams::collapsed(1, 1.0, 0.0).unwrap();
    assert!((upper_bound_F(2.0, &p1).unwrap() - 0.864665).abs() < 1e-6);
    assert!(upper_bound_F(2.0, &p1).unwrap() >= chi_ratio(2.0, 1.0, 0.0, 1));
    let p = BoundParams::new(2, 0.8, 1.0, 0.1, 0.2).unwrap();
    assert!((upper_bound_F(60.0, &p).unwrap() - 1.0 / (2.0 * 0.7)).abs() < 1e-12);
    let scan: Vec<f64> = (1..100).map(|i| upper_bound_F(0.2 * i as f64, &p).unwrap()).collect();
    assert!(scan.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn bounds_order_around_chi_ratio() {
    let mut rng = substream(12, 0);
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let r = rng.gen_range(0.1..20.0);
        let f = lower_bound_f(r, &p).unwrap();
        let big_f = upper_bound_F(r, &p).unwrap();
        assert!(f <= chi_ratio(r, p.k2, p.delta2, p.n) + 1e-9, "{p:?} r={r}");
        assert!(chi_ratio(r, p.k1, p.delta1, p.n) <= big_f + 1e-9, "{p:?} r={r}");
    }
}

#[test]
fn bound_limits() {
    let mut rng = substream(13, 0);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        if p.k1 - p.delta1 < 0.5 || p.k2 - p.delta2 < 0.5 {
            continue;
        }
        let n = p.n as f64;
        assert!((lower_bound_f(20.0, &p).unwrap() - 1.0 / (n * (p.k2 - p.delta2))).abs() <= 1e-3);
        assert!((upper_bound_F(20.0, &p).unwrap() - 1.0 / (n * (p.k1 - p.delta1))).abs() <= 1e-3);
    }
}

#[test]
fn singular_parameter_locus() {
    // n(k2 − δ2) = 2k2: n = 3, k2 = 1.5, δ2 = 0.5
    let on = BoundParams::new(3, 1.5, 1.5, 0.5, 0.5).unwrap();
    let near = BoundParams::new(3, 1.5, 1.5, 0.5 + 1e-7, 0.5 + 1e-7).unwrap();
    for r in [0.5, 2.0, 8.0] {
        let a = lower_bound_f(r, &on).unwrap();
        assert!(a.is_finite());
        assert!((a - lower_bound_f(r, &near).unwrap()).abs() < 1e-6);
        assert!((a - minorant_ratio(r, 3, 1.5, 0.5)).abs() < 1e-9);
    }
}

#[test]
fn mean_curvature_bound_examples() {
    let coth1 = 1.0 / 1f64.tanh();
    let (lo, hi) = mean_curvature_bounds(1.0, -1.0, 0.0, 2);
    assert!((lo - coth1).abs() < 1e-15 && (hi - coth1).abs() < 1e-15);
    let (lo, _) = mean_curvature_bounds(2.0, -0.25, 1.5, 2);
    assert!((lo + 0.8435).abs() < 1e-4);
    let (lo, hi) = mean_curvature_bounds(1.0, 0.0, 0.1, 3);
    assert!((lo - 1.8).abs() < 1e-15 && (hi - 2.2).abs() < 1e-15);
}

#[test]
fn volume_sandwich() {
    let p = BoundParams::collapsed(1, 1.0, 0.0).unwrap();
    let (lo, hi) = ball_volume_sandwich(1.0, &p).unwrap();
    let exact = 2.0 * PI * (1f64.cosh() - 1.0);
    assert!((lo - exact).abs() < 1e-10 && (hi - exact).abs() < 1e-10);
    assert!((exact - 3.41228).abs() < 1e-5);
    let mut rng = substream(14, 0);
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let (lo, hi) = ball_volume_sandwich(rng.gen_range(0.1..15.0), &p).unwrap();
        assert!(lo <= hi);
    }
    let bad = BoundParams::collapsed(1, 0.5, 1.5).unwrap();
    assert!(matches!(
        ball_volume_sandwich(1.0, &bad),
        Err(FinslerError::InadmissibleModel(_))
    ));
}

#[test]
fn hyperbolic_volumes_inside_sandwich() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let p = BoundParams::from_model(&m).unwrap();
    let q = direction_quadrature(&m, &[0.0, 0.0], 256, 0).unwrap();
    let radii = [1.0, 3.0, 6.0];
    let prof = radial_profile(&m, &radii, &q).unwrap();
    for (i, t) in radii.iter().enumerate() {
        let (lo, hi) = ball_volume_sandwich(*t, &p).unwrap();
        let v = prof.volume(i);
        assert!(v >= lo * 0.99 && v <= hi * 1.01);
        assert!((lo / (2.0 * PI * (t.cosh() - 1.0)) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn verify_on_hyperbolic_disk() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let p = BoundParams::from_model(&m).unwrap();
    let q = direction_quadrature(&m, &[0.0, 0.0], 256, 7).unwrap();
    let report = verify_ratio_bounds(&m, &p, &[0.5, 1.0, 2.0, 5.0, 10.0], &q).unwrap();
    assert!(report.all_pass);
    assert_eq!(report.f_formula, "corrected");
    for row in &report.rows {
        assert!(((row.ratio / (0.5 * row.r).tanh()) - 1.0).abs() < 1e-2);
        assert_eq!(row.within, Some(true));
    }
    let last = report.rows.last().unwrap();
    assert!(last.ratio >= 1.0 - 0.01 && last.ratio <= 1.0 + 0.01);
}

#[test]
fn funk_violates_hypotheses() {
    let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
    let p = BoundParams::from_model(&m).unwrap();
    assert!(!p.admissible());
    let q = direction_quadrature(&m, &[0.0, 0.0], 64, 0).unwrap();
    assert!(matches!(
        verify_ratio_bounds(&m, &p, &[1.0, 2.0], &q),
        Err(FinslerError::InadmissibleModel(_))
    ));
    let report = ratio_report(&m, &p, &[1.0, 2.0], &q, &Tolerances::default()).unwrap();
    assert!(!report.all_pass);
    assert!(report.inadmissible.is_some());
    assert!(report.rows.iter().all(|r| r.within.is_none()));
}

#[test]
fn isoperimetric_check() {
    let grid: Vec<f64> = (1..=10).map(|r| r as f64).collect();
    for d in [2, 3] {
        let m = MetricModel::hyperbolic(d, 1.0);
        let q = direction_quadrature(&m, &vec![0.0; d], if d == 2 { 256 } else { 512 }, 0).unwrap();
        let rows = theorem4_check(&m, 1.0, 0.0, &grid, &q).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        if d == 2 {
            let r5 = &rows[4];
            assert!((r5.volume / r5.area - 2.5f64.tanh()).abs() < 1e-3);
        }
    }
    let e = MetricModel::euclidean(2);
    let q = direction_quadrature(&e, &[0.0, 0.0], 64, 0).unwrap();
    assert!(matches!(
        theorem4_check(&e, 1.0, 0.0, &grid, &q),
        Err(FinslerError::InadmissibleModel(_))
    ));
    let h = MetricModel::hyperbolic(2, 1.0);
    assert!(matches!(
        theorem4_check(&h, 2.0, 0.0, &grid, &q),
        Err(FinslerError::InadmissibleModel(_))
    ));
}

#[test]
fn entropy_of_model_spaces() {
    let h3 = MetricModel::hyperbolic(3, 1.0);
    let q3 = direction_quadrature(&h3, &[0.0; 3], 512, 0).unwrap();
    let (slope, se) = entropy_estimate(&h3, (6.0, 12.0), &q3).unwrap();
    assert!((slope - 2.0).abs() < 0.1, "{slope} ± {se}");
    let (lo, hi) = BoundParams::from_model(&h3).unwrap().entropy_bounds();
    assert!(slope >= lo - 3.0 * se - 1e-2 && slope <= hi + 3.0 * se + 1e-2);

    let hil = MetricModel::hilbert(ConvexBody::unit_ball(2).unwrap());
    let q = direction_quadrature(&hil, &[0.0, 0.0], 128, 0).unwrap();
    let (slope, _) = entropy_estimate(&hil, (5.0, 10.0), &q).unwrap();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");

    let funk = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
    let q = direction_quadrature(&funk, &[0.0, 0.0], 128, 0).unwrap();
    let (slope, _) = entropy_estimate(&funk, (10.0, 20.0), &q).unwrap();
    assert!(slope.abs() < 0.05, "{slope}");
    assert!(entropy_estimate(&funk, (1.0, 2.0), &q).is_err());

    let (a, b) = default_entropy_window(&BoundParams::collapsed(2, 1.0, 0.0).unwrap());
    assert!((-2.0 * a).exp() < 1e-4 + 1e-12 && b - a >= 3.0);
}

#[test]
fn funk_example_quadrature() {
    assert!(funk_example_ratio(1, 20.0) > 2.0 * funk_example_ratio(1, 10.0));
    for n in 1..=3 {
        let (r, nf) = (0.01, n as f64);
        let v = funk_example_ratio(n, r);
        assert!((v - r / (nf + 1.0)).abs() < 1e-3);
        // next term of the small-r series
        let series = r / (nf + 1.0) + 0.5 * (nf + 2.0) * r * r * (1.0 / (nf + 1.0) - 1.0 / (nf + 2.0));
        assert!((v / series - 1.0).abs() < 1e-4, "{v} vs {series}");
    }
    let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
    let q = direction_quadrature(&m, &[0.0, 0.0], 256, 0).unwrap();
    let prof = radial_profile(&m, &[2.0], &q).unwrap();
    assert!((prof.ratio(0) / funk_example_ratio(1, 2.0) - 1.0).abs() < 2e-2);
}

#[test]
fn csv_round_trip() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let p = BoundParams::from_model(&m).unwrap();
    let q = direction_quadrature(&m, &[0.0, 0.0], 64, 1).unwrap();
    let report = ratio_report(&m, &p, &[0.5, 1.5, 4.0], &q, &Tolerances::default()).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("r,area,volume,ratio,f_lower,F_upper,within\n"));
    let rows = ComparisonReport::read_csv_rows(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), report.rows.len());
    for (a, b) in rows.iter().zip(&report.rows) {
        for (x, y) in [
            (a.r, b.r),
            (a.area, b.area),
            (a.volume, b.volume),
            (a.ratio, b.ratio),
            (a.f_lower, b.f_lower),
            (a.f_upper, b.f_upper),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs());
        }
        assert_eq!(a.within, b.within);
    }
    let json = serde_json::to_value(&report).unwrap();
    for key in ["model", "params", "rows", "all_pass", "tolerances", "seeds"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert!(json["rows"][0].get("F_upper").is_some());
}
