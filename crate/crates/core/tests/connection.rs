use finsler_core::connection::{
    connection_coefficients, covariant_derivative, exp_map, flow_at_times, geodesic_coefficients, integrate_fixed,
    integrate_geodesic, StepControl,
};
use finsler_core::{ConvexBody, FinslerError, MetricModel};
use nalgebra::{DMatrix, DVector};

/// ∂_i ln λ for the Poincaré conformal factor λ = 2/(k(1 − |x|²)).
fn log_factor_gradient(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    x.iter().map(|v| 2.0 * v / (1.0 - r2)).collect()
}

/// Γ^i_jk y^k for a conformally flat metric.
fn christoffel_n(x: &[f64], y: &[f64]) -> DMatrix<f64> {
    let p = log_factor_gradient(x);
    let d = x.len();
    let py: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
    DMatrix::from_fn(d, d, |i, j| (i == j) as u8 as f64 * py + y[i] * p[j] - y[j] * p[i])
}

/// ½ Γ^i_jk y^j y^k.
fn christoffel_g(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = christoffel_n(x, y);
    let v = &n * DVector::from_column_slice(y);
    v.iter().map(|c| 0.5 * c).collect()
}

/// G^i = ¼ g^{il} ( ∂²F²/∂x^k∂y^l · y^k − ∂F²/∂x^l ), by plain central
/// differences of F².
fn literal_spray(m: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let d = x.len();
    let f2 = |x: &[f64], y: &[f64]| m.norm(x, y).unwrap().powi(2);
    let h = 1e-4;
    let shift = |v: &[f64], k: usize, s: f64| {
        let mut w = v.to_vec();
        w[k] += s;
        w
    };
    let hess_y = DMatrix::from_fn(d, d, |i, j| {
        (f2(x, &shift(&shift(y, i, h), j, h))
            - f2(x, &shift(&shift(y, i, h), j, -h))
            - f2(x, &shift(&shift(y, i, -h), j, h))
            + f2(x, &shift(&shift(y, i, -h), j, -h)))
            / (8.0 * h * h)
    });
    let rhs = DVector::from_fn(d, |l, _| {
        let mixed: f64 = (0..d)
            .map(|k| {
                let v = f2(&shift(x, k, h), &shift(y, l, h))
                    - f2(&shift(x, k, h), &shift(y, l, -h))
                    - f2(&shift(x, k, -h), &shift(y, l, h))
                    + f2(&shift(x, k, -h), &shift(y, l, -h));
                v / (4.0 * h * h) * y[k]
            })
            .sum();
        let dx = (f2(&shift(x, l, h), y) - f2(&shift(x, l, -h), y)) / (2.0 * h);
        mixed - dx
    });
    let g_inv = hess_y.try_inverse().unwrap();
    (g_inv * rhs).iter().map(|v| 0.25 * v).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn randers() -> MetricModel {
    MetricModel::custom("randers", 2, |x, y| {
        let a = 1.0 + 0.3 * x[0] * x[0];
        let b = [0.2 * x[1], 0.1 * x[0].sin()];
        (a * y[0] * y[0] + y[1] * y[1] + 0.2 * x[0] * y[0] * y[1]).sqrt() + b[0] * y[0] + b[1] * y[1]
    })
    .unwrap()
}

#[test]
fn flat_models_have_no_spray() {
    let e = MetricModel::euclidean(3);
    let x = [0.3, -0.1, 0.2];
    let y = [1.0, 2.0, -0.5];
    assert!(geodesic_coefficients(&e, &x, &y).unwrap().iter().all(|v| *v == 0.0));
    assert!(connection_coefficients(&e, &x, &y).unwrap().amax() < 1e-12);
    assert_eq!(
        covariant_derivative(&e, &x, &y, &[1.0, 0.0, 0.0], &[0.5, 0.1, 0.2]).unwrap(),
        vec![0.5, 0.1, 0.2]
    );
    let mink = MetricModel::custom("quartic", 2, |_, y| (y[0].powi(4) + 3.0 * y[1].powi(4)).powf(0.25)).unwrap();
    let g = geodesic_coefficients(&mink, &[0.2, 0.4], &[0.6, -0.3]).unwrap();
    assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
}

#[test]
fn poincare_spray_matches_christoffel_symbols() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let (x, y) = ([0.3, 0.0], [0.0, 1.0]);
    let expected = christoffel_g(&x, &y);
    for model in [m.clone(), m.without_hooks()] {
        let g = geodesic_coefficients(&model, &x, &y).unwrap();
        assert!(max_abs_diff(&g, &expected) < 1e-8, "{g:?} vs {expected:?}");
    }
    for (x, y) in [
        ([0.1, 0.5, -0.2], [0.3, -1.0, 0.7]),
        ([-0.6, 0.0, 0.3], [1.0, 1.0, 0.0]),
    ] {
        let m3 = MetricModel::hyperbolic(3, 2.0).without_hooks();
        let n = connection_coefficients(&m3, &x, &y).unwrap();
        let expected = christoffel_n(&x, &y);
        assert!((n - &expected).amax() < 1e-6 * expected.amax(), "{expected}");
        let g = geodesic_coefficients(&m3, &x, &y).unwrap();
        assert!(max_abs_diff(&g, &christoffel_g(&x, &y)) < 1e-8);
    }
}

#[test]
fn numeric_spray_matches_textbook_formula() {
    let cases = [
        (
            MetricModel::funk(ConvexBody::unit_ball(2).unwrap()),
            [0.3, -0.2],
            [0.5, 0.8],
        ),
        (
            MetricModel::hilbert(ConvexBody::ellipsoid(&[0.0, 0.1], &[1.2, 0.8]).unwrap()),
            [-0.2, 0.3],
            [1.0, 0.2],
        ),
        (randers(), [0.4, 0.7], [-0.3, 1.1]),
    ];
    for (m, x, y) in cases {
        let expected = literal_spray(&m, &x, &y);
        let g = geodesic_coefficients(&m.without_hooks(), &x, &y).unwrap();
        let scale = expected.iter().fold(1e-3f64, |a, v| a.max(v.abs()));
        assert!(
            max_abs_diff(&g, &expected) < 1e-5 * scale,
            "{}: {g:?} vs {expected:?}",
            m.name()
        );
        if m.hooks_enabled() {
            let hooked = geodesic_coefficients(&m, &x, &y).unwrap();
            assert!(max_abs_diff(&hooked, &expected) < 1e-5 * scale);
        }
    }
}

#[test]
fn homogeneity_and_euler_identity() {
    let models = [
        MetricModel::funk(ConvexBody::unit_ball(2).unwrap()).without_hooks(),
        MetricModel::hyperbolic(2, 1.0),
        randers(),
    ];
    for m in &models {
        let (x, y) = ([0.2, 0.1], [0.7, -0.4]);
        let g = geodesic_coefficients(m, &x, &y).unwrap();
        let n = connection_coefficients(m, &x, &y).unwrap();
        let ny = &n * DVector::from_column_slice(&y);
        for i in 0..2 {
            assert!((ny[i] - 2.0 * g[i]).abs() < 1e-7 * (1.0 + g[i].abs()), "{}", m.name());
        }
        for lambda in [0.5, 3.0] {
            let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let gl = geodesic_coefficients(m, &x, &ly).unwrap();
            let nl = connection_coefficients(m, &x, &ly).unwrap();
            for i in 0..2 {
                assert!((gl[i] - lambda * lambda * g[i]).abs() < 1e-8 * (1.0 + gl[i].abs()));
            }
            assert!((nl - &n * lambda).amax() < 1e-7 * (1.0 + n.amax() * lambda));
        }
    }
}

#[test]
fn covariant_derivative_is_linear() {
    let m = MetricModel::hilbert(ConvexBody::unit_ball(2).unwrap());
    let (x, y) = ([0.1, -0.3], [0.4, 0.9]);
    let (u, du) = ([1.0, 0.5], [0.2, -0.1]);
    let (v, dv) = ([-0.3, 2.0], [0.0, 0.7]);
    let (a, b) = (1.7, -0.6);
    let lin = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(p, q)| a * p + b * q).collect() };
    let lhs = covariant_derivative(&m, &x, &y, &lin(&u, &v), &lin(&du, &dv)).unwrap();
    let rhs = lin(
        &covariant_derivative(&m, &x, &y, &u, &du).unwrap(),
        &covariant_derivative(&m, &x, &y, &v, &dv).unwrap(),
    );
    assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
}

#[test]
fn geodesics_are_autoparallel() {
    for m in [
        MetricModel::hyperbolic(2, 1.0),
        MetricModel::funk(ConvexBody::unit_ball(2).unwrap()),
    ] {
        let (x0, v0) = ([0.1, 0.2], [0.5, -0.3]);
        let ctrl = StepControl::with_tol(1e-12);
        let (t, h) = (1.0, 1e-3);
        let flow = flow_at_times(&m, &x0, &v0, &[t - 2.0 * h, t - h, t, t + h, t + 2.0 * h], &ctrl).unwrap();
        let v = |i: usize| &flow.states[i].1;
        // fourth-order central difference of the velocity
        let accel: Vec<f64> = (0..2)
            .map(|k| (v(0)[k] - 8.0 * v(1)[k] + 8.0 * v(3)[k] - v(4)[k]) / (12.0 * h))
            .collect();
        let (x, c) = &flow.states[2];
        let d = covariant_derivative(&m, x, c, c, &accel).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-6), "{}: {d:?}", m.name());
    }
}

#[test]
fn euclidean_geodesic_is_a_line() {
    let p = integrate_geodesic(
        &MetricModel::euclidean(2),
        &[0.0, 0.0],
        &[1.0, 0.0],
        3.0,
        &StepControl::default(),
    )
    .unwrap();
    assert!(max_abs_diff(p.endpoint(), &[3.0, 0.0]) < 1e-12);
    assert!(p.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn funk_geodesics_are_straight() {
    let m = MetricModel::funk(ConvexBody::ellipsoid(&[0.0, 0.0], &[1.3, 0.9]).unwrap());
    for (x0, y0) in [
        ([0.2, 0.1], [1.0, 0.5]),
        ([-0.5, -0.3], [0.2, 1.0]),
        ([0.0, 0.0], [-1.0, -0.1]),
    ] {
        let path = integrate_geodesic(&m, &x0, &y0, 5.0, &StepControl::default()).unwrap();
        let len = (y0[0] * y0[0] + y0[1] * y0[1]).sqrt();
        for p in &path.points {
            let dev = ((p[0] - x0[0]) * y0[1] - (p[1] - x0[1]) * y0[0]).abs() / len;
            assert!(dev <= 1e-8, "{dev}");
        }
        assert!(path.speed_drift <= 1e-6);
    }
}

#[test]
fn poincare_geodesic_endpoint() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let p = integrate_geodesic(&m, &[0.0, 0.0], &[0.5, 0.0], 2.0, &StepControl::default()).unwrap();
    assert!(
        max_abs_diff(p.endpoint(), &[1f64.tanh(), 0.0]) < 1e-9,
        "{:?}",
        p.endpoint()
    );
    assert!(!p.flagged);
}

#[test]
fn speed_is_conserved() {
    let models = [
        MetricModel::hyperbolic(3, 1.0),
        MetricModel::funk(ConvexBody::unit_ball(2).unwrap()),
        MetricModel::hilbert(ConvexBody::ellipsoid(&[0.0, 0.0], &[1.0, 0.6]).unwrap()),
        randers(),
    ];
    for m in &models {
        let d = m.dim();
        let x0 = vec![0.05; d];
        let mut y0 = vec![0.0; d];
        y0[0] = 1.0;
        y0[d - 1] += 0.4;
        let f = m.norm(&x0, &y0).unwrap();
        let y0: Vec<f64> = y0.iter().map(|v| v / f).collect();
        let path = integrate_geodesic(m, &x0, &y0, 3.0, &StepControl::default()).unwrap();
        for (x, v) in path.points.iter().zip(&path.velocities) {
            assert!((m.norm(x, v).unwrap() - 1.0).abs() <= 1e-6, "{}", m.name());
        }
        assert!(path.speed_drift <= 1e-6);
    }
}

#[test]
fn exp_map_examples() {
    let h = MetricModel::hyperbolic(2, 1.0);
    let p = [0.0, 0.0];
    assert_eq!(exp_map(&h, &p, &[0.5, 0.0], 0.0).unwrap(), p.to_vec());
    let e = MetricModel::euclidean(2);
    let y = [0.6, 0.8];
    assert!(max_abs_diff(&exp_map(&e, &[1.0, 2.0], &y, 2.5).unwrap(), &[2.5, 4.0]) < 1e-12);
    for t in [0.5, 2.0, 6.0] {
        let ang: f64 = 0.7;
        let y = [0.5 * ang.cos(), 0.5 * ang.sin()];
        let q = exp_map(&h, &p, &y, t).unwrap();
        let r = (0.5 * t).tanh();
        assert!(max_abs_diff(&q, &[r * ang.cos(), r * ang.sin()]) < 1e-9);
    }
    assert!(matches!(
        exp_map(&h, &p, &[1.0, 0.0], 1.0),
        Err(FinslerError::InvalidConfig { .. })
    ));
}

#[test]
fn flow_is_positively_homogeneous() {
    let m = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
    let (x0, y0) = ([0.1, -0.2], [0.3, 0.4]);
    let ctrl = StepControl::with_tol(1e-12);
    for lambda in [0.5, 2.0, 3.0] {
        let ly: Vec<f64> = y0.iter().map(|v| lambda * v).collect();
        let a = integrate_geodesic(&m, &x0, &ly, 1.5, &ctrl).unwrap();
        let b = integrate_geodesic(&m, &x0, &y0, 1.5 * lambda, &ctrl).unwrap();
        assert!(max_abs_diff(a.endpoint(), b.endpoint()) < 1e-9);
    }
}

fn poincare_error(run: impl Fn(&MetricModel, &[f64], &[f64]) -> Vec<f64>) -> f64 {
    let m = MetricModel::hyperbolic(2, 1.0);
    let end = run(&m, &[0.0, 0.0], &[0.5, 0.0]);
    max_abs_diff(&end, &[(3.0f64).tanh(), 0.0])
}

#[test]
fn integrator_convergence_order() {
    // fixed steps: error ∝ h⁴
    let coarse = poincare_error(|m, x, v| integrate_fixed(m, x, v, 6.0, 20).unwrap().0);
    let fine = poincare_error(|m, x, v| integrate_fixed(m, x, v, 6.0, 40).unwrap().0);
    let ratio = coarse / fine;
    assert!((ratio / 16.0 - 1.0).abs() < 0.2, "{ratio}");
    // adaptive: h ∝ tol^{1/5}, so error ∝ tol^{4/5}
    let mut ratios = Vec::new();
    for tol in [1e-5, 4e-6, 1e-6, 4e-7] {
        let a = poincare_error(|m, x, v| {
            integrate_geodesic(m, x, v, 6.0, &StepControl::with_tol(tol))
                .unwrap()
                .endpoint()
                .to_vec()
        });
        let b = poincare_error(|m, x, v| {
            integrate_geodesic(m, x, v, 6.0, &StepControl::with_tol(tol / 2.0))
                .unwrap()
                .endpoint()
                .to_vec()
        });
        ratios.push(a / b);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean / 2f64.powf(0.8) - 1.0).abs() < 0.2, "{ratios:?}");
}

#[test]
fn step_budget_and_boundary_exit() {
    let m = MetricModel::hyperbolic(2, 1.0);
    let ctrl = StepControl {
        max_steps: 3,
        ..Default::default()
    };
    assert!(matches!(
        integrate_geodesic(&m, &[0.0, 0.0], &[0.5, 0.0], 10.0, &ctrl),
        Err(FinslerError::StepLimitExceeded { .. })
    ));
    let f = MetricModel::funk(ConvexBody::unit_ball(2).unwrap());
    let path = integrate_geodesic(&f, &[0.0, 0.0], &[1.0, 0.0], 60.0, &StepControl::default()).unwrap();
    assert!(path.domain_exit);
    assert!(*path.times.last().unwrap() < 60.0);
    assert!(f.check_point(path.endpoint()).is_ok());
}
