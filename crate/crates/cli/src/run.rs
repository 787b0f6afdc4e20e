//! Experiment dispatch: resolve a config, run the owning module, persist
//! CSV results plus a manifest that echoes every resolved parameter.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use thiserror::Error;

use nctorus_core::angle::Angle;
use nctorus_core::anzai::{AnzaiMap, FourierPolicy};
use nctorus_core::classical::{crosscheck_alpha0, TorusPoint};
use nctorus_core::cohomology::{verdict, VerdictOptions};
use nctorus_core::counterexample::{
    construction_manifest, eigenvector, furstenberg_f, liouville_theta, oscillation_for_map,
    oscillation_stat, GrowthSchedule, RoughSolution,
};
use nctorus_core::gns::{act, atom_mass, correlation, fejer_density, CorrSeq, GnsVector};
use nctorus_core::torus::NcPoly;

use crate::config::{
    parse_f_spec, resolve_element, resolve_lambda, resolve_theta, resolve_trig_poly, Config,
    ConfigError, ElementSpec, Experiment,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

macro_rules! experiment_err {
    ($t:ty) => {
        impl From<$t> for RunError {
            fn from(e: $t) -> Self {
                RunError::Experiment(e.to_string())
            }
        }
    };
}
experiment_err!(serde_json::Error);
experiment_err!(nctorus_core::anzai::AnzaiError);
experiment_err!(nctorus_core::gns::GnsError);
experiment_err!(nctorus_core::torus::AlgebraError);
experiment_err!(nctorus_core::circle::CircleError);
experiment_err!(nctorus_core::cohomology::CohomologyError);
experiment_err!(nctorus_core::classical::ClassicalError);
experiment_err!(nctorus_core::counterexample::CounterexampleError);

/// 17 significant digits, the full information content of an f64.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<String, RunError> {
    let mut body = String::with_capacity(rows.len() * 64 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    fs::write(dir.join(name), body)?;
    Ok(name.to_string())
}

pub struct RunOutput {
    pub manifest_path: PathBuf,
    pub manifest: serde_json::Value,
}

/// Check a config resolves without running it.
pub fn validate(cfg: &Config) -> Result<(), RunError> {
    let levels = cfg.levels.unwrap_or(4);
    resolve_theta(&cfg.theta, levels)?;
    if let Some(f) = &cfg.f {
        parse_f_spec(f)?;
    }
    let alpha = cfg.alpha.unwrap_or(0.0);
    resolve_element(&cfg.a, alpha, "V")?;
    if cfg.experiment == Experiment::ClassicalCrosscheck && alpha != 0.0 {
        return Err(ConfigError::Invalid("classical-crosscheck requires alpha = 0".into()).into());
    }
    Ok(())
}

pub fn run(cfg: &Config, out_dir: &Path) -> Result<RunOutput, RunError> {
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let (resolved, summary, files) = match cfg.experiment {
        Experiment::TraceInvariance => run_trace_invariance(cfg, out_dir)?,
        Experiment::ErgodicAverage | Experiment::WeightedAverage => run_average(cfg, out_dir)?,
        Experiment::SpectralMeasure => run_spectral(cfg, out_dir)?,
        Experiment::Cohomology => run_cohomology(cfg, out_dir)?,
        Experiment::ClassicalCrosscheck => run_crosscheck(cfg, out_dir)?,
        Experiment::Counterexample => run_counterexample(cfg, out_dir)?,
    };
    let manifest = json!({
        "experiment": serde_json::to_value(cfg.experiment).unwrap(),
        "resolved": resolved,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_ms": start.elapsed().as_millis() as u64,
        "summary": summary,
        "files": files,
    });
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(RunOutput { manifest_path, manifest })
}

type ExperimentResult = (serde_json::Value, serde_json::Value, Vec<String>);

fn policy_json(policy: &FourierPolicy) -> serde_json::Value {
    match policy {
        FourierPolicy::Grid { grid, trunc, tail_tol } => {
            json!({"grid": grid, "trunc": trunc, "tail_tol": tail_tol})
        }
        FourierPolicy::Sparse { drop_tol } => json!({"sparse_drop_tol": drop_tol}),
    }
}

fn policy_from(cfg: &Config, default_sparse: bool) -> FourierPolicy {
    let grid = cfg.grid.unwrap_or(4096);
    let trunc = cfg.trunc.unwrap_or(512);
    let tail_tol = cfg.tail_tol.unwrap_or(1e-8);
    match cfg.projection.as_deref() {
        Some("sparse") => FourierPolicy::Sparse { drop_tol: 1e-15 },
        Some(_) => FourierPolicy::Grid { grid, trunc, tail_tol },
        None if default_sparse => FourierPolicy::Sparse { drop_tol: 1e-15 },
        None => FourierPolicy::Grid { grid, trunc, tail_tol },
    }
}

fn run_trace_invariance(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha.unwrap_or(1.0 / 3.0);
    let theta = resolve_theta(&cfg.theta, 4)?;
    let f_spec = cfg.f.clone().unwrap_or_else(|| "char:z0=1,w=1".to_string());
    let f = parse_f_spec(&f_spec)?;
    let samples = cfg.samples.unwrap_or(50);
    let max_k = cfg.iterations.unwrap_or(1000) as i64;
    let seed = cfg.seed.unwrap_or(1);
    // winding twists push mode frequencies to n·w·k: track them sparsely
    let policy = policy_from(cfg, true);
    let map = AnzaiMap::with_policy(theta.angle, alpha, f.map, policy);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut ks: Vec<i64> = (0..).map(|b| 1i64 << b).take_while(|&k| k < max_k).collect();
    ks.push(max_k);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &k in &ks {
        let mut dev: f64 = 0.0;
        for _ in 0..samples {
            let mut x = NcPoly::zero(alpha);
            for _ in 0..10 {
                x.add_term(
                    rng.random_range(-5..=5),
                    rng.random_range(-3..=3),
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                );
            }
            let moved = map.apply_iter(&x, k)?;
            dev = dev.max((moved.trace() - x.trace()).norm());
        }
        worst = worst.max(dev);
        rows.push(format!("{k},{}", fmt(dev)));
    }
    let files = vec![write_csv(dir, "results.csv", "k,max_trace_dev", &rows)?];
    Ok((
        json!({"alpha": alpha, "theta": theta.description, "f": f_spec,
               "samples": samples, "iterations": max_k, "seed": seed,
               "projection": policy_json(&policy)}),
        json!({"max_trace_dev": worst}),
        files,
    ))
}

fn run_average(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha.unwrap_or(0.0);
    let theta = resolve_theta(&cfg.theta, 4)?;
    let f_spec = cfg.f.clone().unwrap_or_else(|| "char:z0=1,w=1".to_string());
    let f = parse_f_spec(&f_spec)?;
    let a = resolve_element(&cfg.a, alpha, "V")?;
    let default_lambda = match cfg.experiment {
        Experiment::WeightedAverage => Some(crate::config::LambdaSpec::ThetaMultiple(1)),
        _ => None,
    };
    let lambda = resolve_lambda(
        &cfg.lambda.clone().or(default_lambda),
        &theta.angle,
    );
    let schedule = cfg
        .n_schedule
        .clone()
        .unwrap_or_else(|| vec![64, 256, 1024, 4096]);
    let policy = policy_from(cfg, false);
    let map = AnzaiMap::with_policy(theta.angle, alpha, f.map, policy);
    let result = map.cesaro(&a, lambda, &schedule, None)?;
    let mut rows = Vec::new();
    let mut averages = Vec::new();
    for cp in &result.checkpoints {
        rows.push(format!(
            "{},{},{},{},{},{}",
            cp.n,
            fmt(lambda.re),
            fmt(lambda.im),
            fmt(cp.lower_norm),
            fmt(cp.upper_norm),
            fmt(cp.gns_norm)
        ));
        averages.push(json!({"n": cp.n, "average": cp.average.to_json(),
                             "recon_tail": cp.recon_tail}));
    }
    let mut files = vec![write_csv(
        dir,
        "results.csv",
        "N,lambda_re,lambda_im,lower_norm,upper_norm,gns_norm",
        &rows,
    )?];
    fs::write(
        dir.join("averages.json"),
        serde_json::to_string_pretty(&serde_json::Value::Array(averages))?,
    )?;
    files.push("averages.json".to_string());
    let last = result.checkpoints.last().unwrap();
    Ok((
        json!({"alpha": alpha, "theta": theta.description, "f": f_spec,
               "a": a.to_json(), "lambda": [lambda.re, lambda.im], "n_schedule": schedule,
               "projection": policy_json(&policy)}),
        json!({"final_gns_norm": last.gns_norm, "final_upper_norm": last.upper_norm}),
        files,
    ))
}

fn run_spectral(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha.unwrap_or(0.0);
    let theta = resolve_theta(&cfg.theta, 4)?;
    let f_spec = cfg.f.clone().unwrap_or_else(|| "char:z0=1,w=1".to_string());
    let f = parse_f_spec(&f_spec)?;
    let a = resolve_element(&cfg.a, alpha, "one")?;
    let lambda = resolve_lambda(&cfg.lambda, &theta.angle);
    let horizon = cfg.horizon.unwrap_or(4096);
    let policy = policy_from(cfg, false);
    let map = AnzaiMap::with_policy(theta.angle, alpha, f.map, policy);
    let xi = act(&a, &GnsVector::vacuum(alpha))?;
    let corr = correlation(&map, &xi, horizon)?;
    let mut rows: Vec<String> = Vec::new();
    for (n, v) in corr.values().iter().enumerate() {
        rows.push(format!("{n},{},{}", fmt(v.re), fmt(v.im)));
    }
    let mut files = vec![write_csv(dir, "correlation.csv", "n,re,im", &rows)?];
    // Wiener atom estimate at λ
    let atom = atom_mass(&corr, lambda)?;
    let trace_rows: Vec<String> = atom
        .trace
        .iter()
        .map(|&(n, w)| format!("{n},{},{}", fmt(w.re), fmt(w.im)))
        .collect();
    files.push(write_csv(dir, "atom_trace.csv", "N,re,im", &trace_rows)?);
    // Fejér density on an angle grid that resolves the kernel
    let density_horizon = horizon.min(1024);
    let short = CorrSeq::from_values(corr.values()[..=density_horizon].to_vec());
    let grid = (2 * density_horizon + 2).next_power_of_two().max(512);
    let density = fejer_density(&short, grid);
    let density_rows: Vec<String> = density
        .iter()
        .enumerate()
        .map(|(i, d)| {
            format!("{},{}", fmt(std::f64::consts::TAU * i as f64 / grid as f64), fmt(*d))
        })
        .collect();
    files.push(write_csv(dir, "density.csv", "angle,density", &density_rows)?);
    let pd = corr.toeplitz_min_eig(128.min(horizon / 2));
    if pd < -1e-8 {
        return Err(RunError::Experiment(format!(
            "correlation sequence lost positive definiteness: min eig {pd:.3e}"
        )));
    }
    Ok((
        json!({"alpha": alpha, "theta": theta.description, "f": f_spec, "a": a.to_json(),
               "lambda": [lambda.re, lambda.im], "horizon": horizon,
               "density_horizon": density_horizon, "density_grid": grid,
               "projection": policy_json(&policy)}),
        json!({"atom_mass": atom.mass, "is_atom": atom.is_atom(),
               "toeplitz_min_eig": pd, "norm_sq": xi.norm_sq()}),
        files,
    ))
}

fn run_cohomology(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha.unwrap_or(0.0);
    let theta = resolve_theta(&cfg.theta, 4)?;
    let f_spec = cfg.f.clone().unwrap_or_else(|| "char:z0=1,w=1".to_string());
    let f = parse_f_spec(&f_spec)?;
    let n_range = cfg.n_range.unwrap_or(5);
    let ns: Vec<i64> = (1..=n_range).flat_map(|n| [n, -n]).collect();
    let schedule = cfg.k_schedule.clone().unwrap_or_else(|| vec![64, 128, 256]);
    let report = verdict(&theta.angle, alpha, &f.map, &ns, &schedule, &VerdictOptions::default())?;
    let mut rows = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (n, m) in &report.per_n {
        for &(k, gap) in &m.gaps {
            rows.push(format!("{n},{k},{}", fmt(gap)));
        }
        min_gap = min_gap.min(m.gap);
    }
    let mut files = vec![write_csv(dir, "results.csv", "n,K,gap", &rows)?];
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report.to_json())?,
    )?;
    files.push("report.json".to_string());
    Ok((
        json!({"alpha": alpha, "theta": theta.description, "f": f_spec,
               "n_range": n_range, "k_schedule": schedule}),
        json!({"verdict": format!("{:?}", report.verdict), "min_gap": min_gap}),
        files,
    ))
}

fn run_crosscheck(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let alpha = cfg.alpha.unwrap_or(0.0);
    if alpha != 0.0 {
        return Err(ConfigError::Invalid("classical-crosscheck requires alpha = 0".into()).into());
    }
    let theta = resolve_theta(&cfg.theta, 4)?;
    let f_spec = cfg.f.clone().unwrap_or_else(|| "char:z0=1,w=1".to_string());
    let f = parse_f_spec(&f_spec)?;
    let a = resolve_element(&cfg.a, 0.0, "V")?;
    let schedule = cfg.n_schedule.clone().unwrap_or_else(|| vec![256, 1024]);
    let n_points = cfg.points.unwrap_or(16);
    let points: Vec<TorusPoint> = (0..n_points)
        .map(|i| {
            TorusPoint::new(
                0.1 + std::f64::consts::TAU * i as f64 / n_points as f64,
                2.3 - 0.37 * i as f64,
            )
        })
        .collect();
    let policy = policy_from(cfg, false);
    let map = AnzaiMap::with_policy(theta.angle, 0.0, f.map.clone(), policy);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &n in &schedule {
        let dev = crosscheck_alpha0(&map, &a, n, &points)?;
        worst = worst.max(dev);
        rows.push(format!("{n},{}", fmt(dev)));
    }
    let mut files = vec![write_csv(dir, "results.csv", "N,max_deviation", &rows)?];
    // classical artifacts: the first start point's orbit and its weighted
    // Birkhoff averages for the (0,1) character
    let n_orbit = schedule.iter().copied().max().unwrap_or(256).min(1024);
    let mut orbit_rows = Vec::new();
    let mut p = points[0];
    for k in 0..n_orbit {
        orbit_rows.push(format!("{k},{},{}", fmt(p.s), fmt(p.t)));
        p = nctorus_core::classical::anzai_step(&theta.angle, &f.map, &p);
    }
    files.push(write_csv(dir, "orbit.csv", "k,s,t", &orbit_rows)?);
    let bk = nctorus_core::classical::birkhoff(
        &theta.angle,
        &f.map,
        &points[0],
        (0, 1),
        C64::new(1.0, 0.0),
        *schedule.iter().max().unwrap_or(&256),
    );
    let avg_rows: Vec<String> = bk
        .checkpoints
        .iter()
        .map(|&(n, v)| format!("{n},{},{}", fmt(v.re), fmt(v.im)))
        .collect();
    files.push(write_csv(dir, "averages.csv", "N,re,im", &avg_rows)?);
    Ok((
        json!({"alpha": alpha, "theta": theta.description, "f": f_spec, "a": a.to_json(),
               "n_schedule": schedule, "points": n_points,
               "projection": policy_json(&policy)}),
        json!({"max_deviation": worst, "birkhoff_final_abs": bk.average.norm()}),
        files,
    ))
}

fn run_counterexample(cfg: &Config, dir: &Path) -> Result<ExperimentResult, RunError> {
    let levels = cfg.levels.unwrap_or(4);
    let alpha = cfg.alpha.unwrap_or(0.0);
    let nu = std::f64::consts::TAU * cfg.nu_two_pi_times.unwrap_or(2.0_f64.sqrt() - 1.0);
    let window = cfg.window.unwrap_or((1 << 10, 1 << 16));
    let angle = liouville_theta(levels, &GrowthSchedule::default())?;
    let g = RoughSolution::new(&angle, levels, None)?;
    let (_f_tilde, tail_bound) = furstenberg_f(&angle, &g, nu);
    // cohomology identity at the truncation
    let g_map = g.as_winding_map();
    let f_plain = furstenberg_f(&angle, &g, 0.0).0;
    let mut identity_sup: f64 = 0.0;
    for j in 0..1024usize {
        let lhs = g_map.eval_grid_shifted(j, 1024, angle.theta())
            * f_plain.eval_grid_shifted(j, 1024, &Angle::ZERO);
        let rhs = g_map.eval_grid_shifted(j, 1024, &Angle::ZERO);
        identity_sup = identity_sup.max((lhs - rhs).norm());
    }
    // eigenvector residual at matched truncation
    let (_, residual) = eigenvector(&angle, &g, nu, alpha)?;
    // dual-path consistency gate for the iterate identity, on the first two
    // levels where both routes stay cheap
    let g_small = RoughSolution::new(&angle, levels.min(2), None)?;
    let h_gate = nctorus_core::circle::TrigPoly::from_terms([
        (0, C64::new(0.5, 0.0)),
        (1, C64::new(0.2, -0.1)),
        (-1, C64::new(0.2, 0.1)),
    ]);
    nctorus_core::counterexample::gk_functions(
        &angle,
        &g_small,
        &h_gate,
        &[0, 1, 2, 3, 5, 8, 13],
        alpha,
    )?;
    // oscillation of the weighted averages, plus the convergent control
    let default_h = ElementSpec::Terms {
        terms: vec![(0, 0, 0.4, 0.0), (1, 0, 0.04, 0.0)],
    };
    let h = resolve_trig_poly(&cfg.h, &default_h)?;
    let stat = oscillation_stat(&angle, &g, &h, nu, window, alpha)?;
    let control_map = AnzaiMap::with_policy(
        Angle::golden(),
        alpha,
        nctorus_core::circle::WindingMap::character(C64::new(1.0, 0.0), 1)
            .expect("unit character"),
        FourierPolicy::Sparse { drop_tol: 1e-15 },
    );
    let control = oscillation_for_map(&control_map, &g, &h, nu, window, alpha)?;
    // artifacts
    fs::write(
        dir.join("construction.json"),
        serde_json::to_string_pretty(&construction_manifest(&angle, &g, nu, tail_bound))?,
    )?;
    let mut osc_rows = Vec::new();
    for (n, values) in &stat.checkpoints {
        for (j, v) in values.iter().enumerate() {
            osc_rows.push(format!("{n},{j},{},{}", fmt(v.re), fmt(v.im)));
        }
    }
    let mut files = vec!["construction.json".to_string()];
    files.push(write_csv(dir, "oscillation.csv", "N,point,re,im", &osc_rows)?);
    let results = vec![
        format!("identity_sup,{}", fmt(identity_sup)),
        format!("eigen_residual,{}", fmt(residual)),
        format!("tail_bound,{}", fmt(tail_bound)),
        format!("oscillation,{}", fmt(stat.osc)),
        format!("control_oscillation,{}", fmt(control.osc)),
        format!("pairing_abs,{}", fmt(stat.pairing.norm())),
        format!("liouville_score,{}", fmt(angle.liouville_score())),
    ];
    files.push(write_csv(dir, "results.csv", "quantity,value", &results)?);
    Ok((
        json!({"levels": levels, "alpha": alpha, "nu": nu, "window": [window.0, window.1],
               "h": h.iter().map(|(k, v)| json!([k, v.re, v.im])).collect::<Vec<_>>()}),
        json!({"identity_sup": identity_sup, "eigen_residual": residual,
               "oscillation": stat.osc, "control_oscillation": control.osc,
               "pairing_abs": stat.pairing.norm(), "liouville_score": angle.liouville_score()}),
        files,
    ))
}
