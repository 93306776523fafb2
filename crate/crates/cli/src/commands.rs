use std::path::PathBuf;

use clap::Args;
use finsler_core::comparison::{default_entropy_window, entropy_estimate, ratio_report, BoundParams, Tolerances};
use finsler_core::connection::{integrate_geodesic, StepControl};
use finsler_core::curvature::{flag_curvature_with, ricci, s_curvature, sample_flags, CurvatureOptions};
use finsler_core::measure::{
    default_resolution, direction_quadrature, mc_ball_volume, radial_profile, DirectionQuadrature,
};
use finsler_core::FinslerError;
use serde::Serialize;
use serde_json::json;

use crate::config::{check_len, default_point, parse_config, LoadedModel};
use crate::error::{exit, CliError, CliResult};
use crate::output::{emit, float_csv, to_json, RunManifest};
use crate::verify::{run_verify, validate_report_json, VerifyOptions, VerifyTolerances};

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// Model configuration: a path to a JSON file, or the JSON text itself.
    #[arg(long)]
    pub config: String,
}

#[derive(Args, Debug, Serialize)]
pub struct SphereArgs {
    /// Centre of the balls and spheres, comma-separated [default: body centre or origin].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Number of directions in the sphere quadrature [default: 256 in 2-D, 1024 in 3-D, 4096 above].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SphereArgs {
    fn quadrature(&self, loaded: &LoadedModel) -> CliResult<DirectionQuadrature> {
        let model = &loaded.model;
        let p = match &self.point {
            Some(p) => {
                check_len("point", p, model.dim())?;
                p.clone()
            }
            None => default_point(model),
        };
        let resolution = self.resolution.unwrap_or_else(|| default_resolution(model.dim()));
        Ok(direction_quadrature(model, &p, resolution, self.seed)?)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial point, comma-separated [default: body centre or origin].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Initial velocity, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y0: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub t_max: f64,
    /// Local error tolerance of the adaptive integrator.
    #[arg(long, default_value_t = 1e-10)]
    pub error_tol: f64,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn geodesic(args: &GeodesicArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let model = &loaded.model;
    let d = model.dim();
    let x0 = match &args.x0 {
        Some(x) => {
            check_len("x0", x, d)?;
            x.clone()
        }
        None => default_point(model),
    };
    check_len("y0", &args.y0, d)?;
    if !(args.error_tol > 0.0) {
        return Err(CliError::option("error-tol", "must be positive"));
    }
    let path = integrate_geodesic(model, &x0, &args.y0, args.t_max, &StepControl::with_tol(args.error_tol))?;

    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend((0..d).map(|i| format!("v{i}")));
    header.push("speed".into());
    let mut rows = Vec::with_capacity(path.times.len());
    for ((t, x), v) in path.times.iter().zip(&path.points).zip(&path.velocities) {
        let mut row = vec![*t];
        row.extend(x);
        row.extend(v);
        row.push(model.norm(x, v)?);
        rows.push(row);
    }
    emit(args.out.as_deref(), &float_csv(&header, &rows)?)?;
    if let Some(out) = &args.out {
        let tol = json!({ "error_tol": args.error_tol });
        RunManifest::new("geodesic", &loaded.config, json!(args), vec![], tol).write_beside(out)?;
    }
    if path.domain_exit {
        eprintln!(
            "geodesic reached the boundary margin at t = {}",
            path.times.last().copied().unwrap_or(0.0)
        );
    }
    Ok(exit::OK)
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Allowed disagreement between the two curvature evaluations.
    #[arg(long, default_value_t = 1e-3)]
    pub tol_curv: f64,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn curvature_scan(args: &ScanArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let model = &loaded.model;
    let d = model.dim();
    let flags = sample_flags(model, args.samples, args.seed)?;
    let opts = CurvatureOptions {
        tol_curv: args.tol_curv,
    };

    let mut header = vec!["sample".to_string()];
    for name in ["x", "y", "u"] {
        header.extend((0..d).map(|i| format!("{name}{i}")));
    }
    header.extend(["flag".into(), "s".into(), "ricci".into()]);
    let mut rows = Vec::with_capacity(flags.len());
    for (i, f) in flags.iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(&f.x);
        row.extend(&f.y);
        row.extend(&f.u);
        row.push(flag_curvature_with(f, model, &opts)?);
        row.push(s_curvature(model, &f.x, &f.y)?);
        row.push(ricci(model, &f.x, &f.y)?);
        rows.push(row);
    }
    emit(args.out.as_deref(), &float_csv(&header, &rows)?)?;
    if let Some(out) = &args.out {
        let tol = json!({ "tol_curv": args.tol_curv });
        RunManifest::new("curvature-scan", &loaded.config, json!(args), vec![args.seed], tol).write_beside(out)?;
    }
    Ok(exit::OK)
}

#[derive(Args, Debug, Serialize)]
pub struct PinchingArgs {
    /// Override the model's pinching constants; give all four or none.
    #[arg(long, allow_hyphen_values = true)]
    pub k1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta2: Option<f64>,
}

impl PinchingArgs {
    fn resolve(&self, loaded: &LoadedModel) -> CliResult<BoundParams> {
        let n = loaded.model.dim() - 1;
        match (self.k1, self.k2, self.delta1, self.delta2) {
            (Some(k1), Some(k2), Some(d1), Some(d2)) => Ok(BoundParams::new(n, k1, k2, d1, d2)?),
            (None, None, None, None) => match BoundParams::from_model(&loaded.model) {
                Err(FinslerError::InadmissibleModel(msg)) => Err(CliError::option(
                    "k1",
                    format!("{msg}; pass --k1 --k2 --delta1 --delta2"),
                )),
                other => Ok(other?),
            },
            _ => Err(CliError::option(
                "k1",
                "give all of --k1 --k2 --delta1 --delta2, or none",
            )),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BallRatioArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sphere: SphereArgs,
    #[command(flatten)]
    pub pinching: PinchingArgs,
    #[arg(long, default_value_t = 10.0)]
    pub r_max: f64,
    /// Number of radii, evenly spaced up to r-max.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Relative slack on both bounds.
    #[arg(long, default_value_t = 0.02)]
    pub slack: f64,
    /// Output CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ball_ratio(args: &BallRatioArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let params = args.pinching.resolve(&loaded)?;
    if !(args.r_max > 0.0) || args.steps == 0 {
        return Err(CliError::option("r-max", "need a positive r-max and at least one step"));
    }
    let grid: Vec<f64> = (1..=args.steps)
        .map(|i| args.r_max * i as f64 / args.steps as f64)
        .collect();
    let quad = args.sphere.quadrature(&loaded)?;
    let tol = Tolerances { slack: args.slack };
    let report = ratio_report(&loaded.model, &params, &grid, &quad, &tol)?;

    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    emit(args.out.as_deref(), &bytes)?;
    if let Some(out) = &args.out {
        let mut options = json!(args);
        options["params"] = json!(params);
        options["quadrature"] = json!(report.quadrature);
        RunManifest::new(
            "ball-ratio",
            &loaded.config,
            options,
            vec![args.sphere.seed],
            json!(tol),
        )
        .write_beside(out)?;
    }
    if let Some(why) = &report.inadmissible {
        eprintln!("no bound applies: {why}");
    }
    Ok(exit::OK)
}

#[derive(Args, Debug, Serialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sphere: SphereArgs,
    /// Regression window a,b [default: from the model's pinching].
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
}

pub fn entropy(args: &EntropyArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let window = match &args.window {
        Some(w) => {
            check_len("window", w, 2)?;
            (w[0], w[1])
        }
        None => match BoundParams::from_model(&loaded.model) {
            Ok(p) => default_entropy_window(&p),
            Err(_) => {
                return Err(CliError::option(
                    "window",
                    "the model has no pinching; pass --window a,b",
                ))
            }
        },
    };
    let quad = args.sphere.quadrature(&loaded)?;
    let (slope, se) = entropy_estimate(&loaded.model, window, &quad)?;
    println!("{slope:.6} ± {se:.2e}");
    Ok(exit::OK)
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of directions in the sphere quadrature [default: 256 in 2-D, 1024 in 3-D, 4096 above].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Sampled flags for the curvature checks.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Monte Carlo samples for the volume cross-check.
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    /// Relative slack on the ratio bounds.
    #[arg(long, default_value_t = 0.02)]
    pub slack: f64,
    /// Absolute tolerance on flag and S-curvature.
    #[arg(long, default_value_t = 1e-3)]
    pub tol_curv: f64,
    /// JSON report [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(args: &VerifyArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let opts = VerifyOptions {
        seed: args.seed,
        resolution: args.resolution,
        samples: args.samples,
        mc_samples: args.mc_samples,
        tolerances: VerifyTolerances::new(args.slack, args.tol_curv),
    };
    let report = run_verify(&loaded, &opts)?;
    let value = serde_json::to_value(&report).map_err(|e| CliError::Serialize(e.to_string()))?;
    validate_report_json(&value).map_err(CliError::Serialize)?;
    emit(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(out) = &args.out {
        RunManifest::new(
            "verify",
            &loaded.config,
            json!(args),
            vec![args.seed],
            json!(report.tolerances),
        )
        .write_beside(out)?;
    }
    for c in report.checks.iter().filter(|c| c.status == crate::verify::Status::Fail) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(if report.all_pass { exit::OK } else { exit::FAILED })
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sphere: SphereArgs,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Agreement required, in combined standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
}

pub fn oracle_mc(args: &OracleArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.model.config)?;
    let quad = args.sphere.quadrature(&loaded)?;
    let (mc, se) = mc_ball_volume(&loaded.model, &quad.p, args.r, args.samples, args.sphere.seed)?;
    let profile = radial_profile(&loaded.model, &[args.r], &quad)?;
    let co = profile.volume(0);
    let combined = (se * se + (profile.volume_error[0] * co).powi(2)).sqrt();
    let agree = (mc - co).abs() <= args.sigmas * combined;
    println!("monte-carlo {mc:.9e} ± {se:.2e}");
    println!("co-area     {co:.9e} ± {:.2e}", profile.volume_error[0] * co);
    println!("{}", if agree { "agree" } else { "disagree" });
    Ok(if agree { exit::OK } else { exit::FAILED })
}

pub fn info(args: &ModelArgs) -> CliResult<u8> {
    let loaded = parse_config(&args.config)?;
    let model = &loaded.model;
    let out = json!({
        "model": model.name(),
        "dim": model.dim(),
        "config": loaded.config,
        "facts": model.facts(),
    });
    emit(None, &to_json(&out)?)?;
    Ok(exit::OK)
}
