//! Subcommand dispatch behind the thin binary. Each runner loads the shared
//! config, writes a "running" manifest immediately, does its work, and
//! finalizes the manifest with status, file inventory, warnings, and a
//! scalar summary. Exit codes: 0 success, 2 validation failure, 3 numerical
//! or I/O failure.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use toml::value::{Table, Value};

use crate::config::{self, MetricConfig, ResolvedRun, RunConfig};
use crate::diagnostics::{
    decay_tracker, morawetz_monotonicity, MorawetzSeries, MorawetzWeight,
};
use crate::error::{Error, Result};
use crate::field::{Domain, Field};
use crate::inequalities::{
    check_anisotropic_gn, check_b_embedding, check_h_gamma_s_embedding, check_z_embedding,
    generate_ensemble, EnsembleSpec, InequalityParams,
};
use crate::output::{self, CsvFile, HorizonReport, RunManifest};
use crate::propagator::{evolve, SimConfig};
use crate::scattering::{
    detect_asymptotic_state_with, wave_operator, ConvergenceMetric, ScatterOptions, WaveOpParams,
};
use crate::vectorfields::{check_commutation, VectorFieldId};

/// Which embedding an `inequalities` invocation exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    B,
    HGammaS,
    Gn,
    Z,
}

impl CheckKind {
    pub fn label(&self) -> &'static str {
        match self {
            CheckKind::B => "B",
            CheckKind::HGammaS => "HgammaS",
            CheckKind::Gn => "GN",
            CheckKind::Z => "Z",
        }
    }
}

/// One CLI invocation. `Plots` needs no config; `Inequalities` carries its
/// extra file arguments.
#[derive(Debug, Clone)]
pub enum Command {
    Simulate,
    Eigen,
    VectorFields,
    Scatter,
    WaveOp,
    Morawetz,
    Inequalities {
        check: CheckKind,
        ensemble: PathBuf,
        params: Option<PathBuf>,
    },
    Plots,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Eigen => "eigen",
            Command::VectorFields => "vectorfields",
            Command::Scatter => "scatter",
            Command::WaveOp => "waveop",
            Command::Morawetz => "morawetz",
            Command::Inequalities { .. } => "inequalities",
            Command::Plots => "plots",
        }
    }
}

/// Run a subcommand against a config file, writing all outputs into
/// `out_dir`. Returns the process exit code; errors are printed to stderr
/// (one `error: field: message` line each) and recorded in the manifest.
pub fn run(cmd: &Command, config_path: &Path, out_dir: &Path) -> i32 {
    let mut manifest = RunManifest::start(cmd.name());
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: out_dir: cannot create {}: {e}", out_dir.display());
        return 3;
    }
    let _ = manifest.save(out_dir);

    let outcome = execute(cmd, config_path, out_dir, &mut manifest);
    let code = match &outcome {
        Ok(()) => {
            manifest.finish_ok();
            0
        }
        Err(err) => {
            manifest.finish_err(err);
            report_to_stderr(err);
            match err {
                Error::Validation(_) => 2,
                _ => 3,
            }
        }
    };
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = manifest.save(out_dir) {
        eprintln!("error: manifest: {e}");
        return 3;
    }
    code
}

fn report_to_stderr(err: &Error) {
    match err {
        Error::Validation(issues) => {
            for issue in issues {
                eprintln!("error: {issue}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn execute(
    cmd: &Command,
    config_path: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    if let Command::Plots = cmd {
        for script in output::emit_plots(out_dir)? {
            manifest.add_file(script);
        }
        return Ok(());
    }

    let cfg = RunConfig::load(config_path)?;
    let base_dir = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let run = config::resolve(&cfg, &base_dir)?;
    manifest.add_warnings(&run.warnings);
    manifest.config = Some(run.config.clone());

    match cmd {
        Command::Simulate => simulate(&run, &base_dir, out_dir, manifest),
        Command::Eigen => eigen(&run, out_dir, manifest),
        Command::VectorFields => vectorfields(&run, &base_dir, out_dir, manifest),
        Command::Scatter => scatter(&run, &base_dir, out_dir, manifest),
        Command::WaveOp => waveop(&run, &base_dir, out_dir, manifest),
        Command::Morawetz => morawetz(&run, &base_dir, out_dir, manifest),
        Command::Inequalities {
            check,
            ensemble,
            params,
        } => inequalities(
            &run,
            &base_dir,
            out_dir,
            manifest,
            *check,
            ensemble,
            params.as_deref(),
        ),
        Command::Plots => unreachable!("handled above"),
    }
}

fn sim_config(cfg: &RunConfig) -> SimConfig {
    SimConfig {
        sigma: cfg.sigma,
        dt: cfg.dt,
        t_end: cfg.t_end,
        linear_only: cfg.linear_only,
        output_every: cfg.output_every,
    }
}

fn horizon_report(domain: &Arc<Domain>, t_end: f64) -> HorizonReport {
    let horizon = domain.ygrid().wraparound_horizon();
    HorizonReport {
        t_end,
        horizon,
        exceeded: t_end > horizon,
    }
}

fn summary_table(entries: &[(&str, Value)]) -> Table {
    let mut table = Table::new();
    for (k, v) in entries {
        table.insert((*k).to_string(), v.clone());
    }
    table
}

fn simulate(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let cfg = &run.config;
    let datum = config::build_initial(cfg, &run.domain, base_dir)?;
    manifest.horizon = Some(horizon_report(&run.domain, cfg.t_end));

    let snap_every = cfg.snapshots.as_ref().map(|s| s.every);
    let snap_dir = out_dir.join("snapshots");
    if snap_every.is_some() {
        std::fs::create_dir_all(&snap_dir)?;
    }

    let mut csv = CsvFile::create(out_dir, "timeseries.csv", "t,mass,energy,Z_norm")?;
    let t0 = datum.t();
    let dt = cfg.dt;
    let mut snapshot_names = Vec::new();
    let record = evolve(datum, &sim_config(cfg), |f, report| {
        csv.row(&[report.t, report.mass, report.energy, report.z_norm])?;
        if let Some(every) = snap_every {
            let step = ((f.t() - t0) / dt).round() as usize;
            if step % every == 0 {
                let name = format!("snap_{step:08}.bin");
                output::save_snapshot(f, &snap_dir.join(&name))?;
                snapshot_names.push(format!("snapshots/{name}"));
            }
        }
        Ok(())
    })?;
    manifest.add_file(csv.finish()?);
    for name in snapshot_names {
        manifest.add_file(name);
    }

    let first = &record.reports[0];
    let last = record.reports.last().unwrap();
    manifest.summary = Some(summary_table(&[
        ("steps", Value::Integer(record.steps as i64)),
        ("final_t", Value::Float(last.t)),
        ("final_mass", Value::Float(last.mass)),
        ("final_energy", Value::Float(last.energy)),
        ("final_z_norm", Value::Float(last.z_norm)),
        (
            "mass_drift",
            Value::Float((last.mass - first.mass).abs() / first.mass),
        ),
        (
            "energy_drift",
            Value::Float((last.energy - first.energy).abs() / first.energy.abs()),
        ),
    ]));
    Ok(())
}

fn eigen(run: &ResolvedRun, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let basis = run.domain.basis();
    let mut csv = CsvFile::create(out_dir, "spectrum.csv", "n,lambda")?;
    for (n, lambda) in basis.eigenvalues().iter().enumerate() {
        csv.indexed_row(n, &[*lambda])?;
    }
    manifest.add_file(csv.finish()?);

    if let Some(cache) = run.config.eigen.as_ref().and_then(|e| e.cache.clone()) {
        let path = if cache.is_absolute() {
            cache
        } else {
            out_dir.join(cache)
        };
        basis.save_cache(&path)?;
        manifest.add_file(path.display().to_string());
    }

    manifest.summary = Some(summary_table(&[
        ("n_modes", Value::Integer(basis.n_modes() as i64)),
        ("lambda_min", Value::Float(basis.eigenvalue(0))),
        (
            "lambda_max",
            Value::Float(basis.eigenvalue(basis.n_modes() - 1)),
        ),
        ("c0", Value::Float(basis.c0())),
    ]));
    Ok(())
}

fn vectorfields(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let cfg = &run.config;
    let vf = cfg.vectorfields.as_ref().ok_or_else(|| {
        Error::invalid("vectorfields", "config has no [vectorfields] section")
    })?;
    let mut times = vf.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::invalid("vectorfields.times", "times must be >= 0"));
    }

    let mut csv = CsvFile::create(out_dir, "defects.csv", "j,t,tau,defect")?;
    let mut state = config::build_initial(cfg, &run.domain, base_dir)?;
    let mut max_defect = vec![0.0f64; vf.j_max + 1];
    for &t in &times {
        if t > state.t() {
            let mut seg = sim_config(cfg);
            seg.t_end = t;
            seg.output_every = usize::MAX;
            state = evolve(state.clone(), &seg, |_, _| Ok(()))?.final_field;
        }
        for j in 0..=vf.j_max {
            let id = match j {
                0 => VectorFieldId::Identity,
                1 => VectorFieldId::SqrtM,
                2 => VectorFieldId::GradY,
                _ => VectorFieldId::Galilean { t: state.t() },
            };
            for &tau in &vf.taus {
                let defect = check_commutation(&id, &state, tau);
                csv.row(&[j as f64, t, tau, defect])?;
                max_defect[j] = max_defect[j].max(defect);
            }
        }
    }
    manifest.add_file(csv.finish()?);
    manifest.summary = Some(summary_table(
        &max_defect
            .iter()
            .enumerate()
            .map(|(j, d)| (family_key(j), Value::Float(*d)))
            .collect::<Vec<_>>(),
    ));
    Ok(())
}

fn family_key(j: usize) -> &'static str {
    match j {
        0 => "max_defect_identity",
        1 => "max_defect_sqrt_m",
        2 => "max_defect_grad_y",
        _ => "max_defect_galilean",
    }
}

fn scatter(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let cfg = &run.config;
    let sc = cfg
        .scatter
        .as_ref()
        .ok_or_else(|| Error::invalid("scatter", "config has no [scatter] section"))?;
    let datum = config::build_initial(cfg, &run.domain, base_dir)?;
    let last = sc.checkpoints.last().copied().unwrap_or(0.0);
    manifest.horizon = Some(horizon_report(&run.domain, last));

    let opts = ScatterOptions {
        metric: match sc.metric {
            MetricConfig::Z => ConvergenceMetric::Z,
            MetricConfig::ZTilde => ConvergenceMetric::ZTilde,
        },
        strict_horizon: sc.strict_horizon,
    };
    let report =
        detect_asymptotic_state_with(&sim_config(cfg), &datum, &sc.checkpoints, sc.tol, &opts)?;
    manifest.add_warnings(&report.warnings);

    let mut csv = CsvFile::create(out_dir, "scatter_report.csv", "t,increment")?;
    for (t, inc) in report.times.iter().skip(1).zip(report.increments.iter()) {
        csv.row(&[*t, *inc])?;
    }
    manifest.add_file(csv.finish()?);

    output::save_snapshot(&report.u_plus, &out_dir.join("u_plus.bin"))?;
    manifest.add_file("u_plus.bin");

    manifest.summary = Some(summary_table(&[
        ("converged", Value::Boolean(report.converged)),
        ("tail_estimate", Value::Float(report.tail_estimate)),
        ("u_plus_mass", Value::Float(report.u_plus.mass())),
        (
            "last_increment",
            Value::Float(report.increments.last().copied().unwrap_or(0.0)),
        ),
    ]));
    Ok(())
}

fn waveop(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let cfg = &run.config;
    let wo = cfg
        .waveop
        .as_ref()
        .ok_or_else(|| Error::invalid("waveop", "config has no [waveop] section"))?;
    let u_minus = config::build_initial(cfg, &run.domain, base_dir)?;
    manifest.horizon = Some(horizon_report(&run.domain, wo.t_far));

    let mut params = WaveOpParams::new(cfg.sigma, wo.t_far, wo.t_near, wo.dt);
    params.max_iter = wo.max_iter;
    params.tol = wo.tol;
    params.linear_only = cfg.linear_only;
    params.strict_horizon = wo.strict_horizon;
    let result = wave_operator(&u_minus, &params)?;
    manifest.add_warnings(&result.warnings);

    let mut csv = CsvFile::create(out_dir, "picard.csv", "iteration,residual")?;
    for (i, r) in result.picard_residuals.iter().enumerate() {
        csv.indexed_row(i + 1, &[*r])?;
    }
    manifest.add_file(csv.finish()?);

    output::save_snapshot(&result.u_near, &out_dir.join("u_near.bin"))?;
    manifest.add_file("u_near.bin");

    manifest.summary = Some(summary_table(&[
        ("iterations", Value::Integer(result.iterations as i64)),
        (
            "final_residual",
            Value::Float(result.picard_residuals.last().copied().unwrap_or(0.0)),
        ),
        (
            "oracle_discrepancy",
            Value::Float(result.oracle_discrepancy),
        ),
    ]));
    Ok(())
}

fn morawetz(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let cfg = &run.config;
    let mo = cfg
        .morawetz
        .as_ref()
        .ok_or_else(|| Error::invalid("morawetz", "config has no [morawetz] section"))?;
    let traj_dir = if mo.trajectory.is_absolute() {
        mo.trajectory.clone()
    } else {
        base_dir.join(&mo.trajectory)
    };
    let fields = output::load_trajectory(&traj_dir, &run.domain)?;
    manifest.horizon = Some(horizon_report(
        &run.domain,
        fields.last().map(|f| f.t()).unwrap_or(0.0),
    ));

    let mut abs = MorawetzSeries::new(MorawetzWeight::Abs, mo.mu, cfg.sigma);
    let mut smooth = MorawetzSeries::new(MorawetzWeight::Japanese, mo.mu, cfg.sigma);
    for f in &fields {
        abs.push(f)?;
        smooth.push(f)?;
    }
    let mut csv = CsvFile::create(
        out_dir,
        "morawetz.csv",
        "t,M_abs,M_japanese,frac_accum,cube_accum",
    )?;
    for (i, t) in abs.times().iter().enumerate() {
        csv.row(&[
            *t,
            abs.m_values()[i],
            smooth.m_values()[i],
            abs.frac_norm_accum()[i],
            abs.cube_accum()[i],
        ])?;
    }
    manifest.add_file(csv.finish()?);

    let mut entries = vec![
        (
            "monotone_abs",
            Value::Boolean(morawetz_monotonicity(&abs, 1e-4)),
        ),
        (
            "monotone_japanese",
            Value::Boolean(morawetz_monotonicity(&smooth, 1e-4)),
        ),
        ("scale", Value::Float(abs.scale())),
    ];

    // Decay fit wants strictly positive times; drop the datum row.
    let late: Vec<Field> = fields.iter().filter(|f| f.t() > 0.0).cloned().collect();
    if late.len() >= 2 {
        let fit = decay_tracker(&late, mo.decay_r)?;
        manifest.add_warnings(&fit.warnings);
        let mut csv = CsvFile::create(out_dir, "decay.csv", "t,norm")?;
        for f in &late {
            let norm = f.lebesgue_norm(mo.decay_r);
            csv.row(&[f.t(), norm])?;
        }
        manifest.add_file(csv.finish()?);
        entries.push(("decay_slope", Value::Float(fit.slope)));
        entries.push(("decay_r", Value::Float(mo.decay_r)));
    }
    manifest.summary = Some(summary_table(&entries));
    Ok(())
}

#[derive(Debug, Clone, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    k: Option<f64>,
    s: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
}

fn load_params(path: Option<&Path>, base_dir: &Path) -> Result<ParamsFile> {
    let Some(path) = path else {
        return Ok(ParamsFile::default());
    };
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    };
    let text = std::fs::read_to_string(&full).map_err(|e| {
        Error::invalid("params", format!("cannot read {}: {e}", full.display()))
    })?;
    toml::from_str(&text).map_err(|e| Error::invalid("params", format!("parse error: {e}")))
}

fn require(v: Option<f64>, name: &str, check: &str) -> Result<f64> {
    v.ok_or_else(|| {
        Error::invalid(
            "params",
            format!("check {check} needs `{name}` in the params file"),
        )
    })
}

#[allow(clippy::too_many_arguments)]
fn inequalities(
    run: &ResolvedRun,
    base_dir: &Path,
    out_dir: &Path,
    manifest: &mut RunManifest,
    check: CheckKind,
    ensemble_path: &Path,
    params_path: Option<&Path>,
) -> Result<()> {
    let full = if ensemble_path.is_absolute() {
        ensemble_path.to_path_buf()
    } else {
        base_dir.join(ensemble_path)
    };
    let text = std::fs::read_to_string(&full).map_err(|e| {
        Error::invalid("ensemble", format!("cannot read {}: {e}", full.display()))
    })?;
    let spec: EnsembleSpec = toml::from_str(&text)
        .map_err(|e| Error::invalid("ensemble", format!("parse error: {e}")))?;
    if spec.count == 0 {
        return Err(Error::invalid("ensemble.count", "need at least one member"));
    }
    let params = load_params(params_path, base_dir)?;

    let fields = generate_ensemble(&run.domain, &spec);
    let report = match check {
        CheckKind::B => check_b_embedding(&fields)?,
        CheckKind::HGammaS => {
            let eps = require(params.epsilon, "epsilon", "HgammaS")?;
            check_h_gamma_s_embedding(&fields, eps)?
        }
        CheckKind::Gn => {
            let k = require(params.k, "k", "GN")?;
            let s = require(params.s, "s", "GN")?;
            let gamma = require(params.gamma, "gamma", "GN")?;
            let p = InequalityParams::new(run.config.d, k, s, gamma)?;
            check_anisotropic_gn(&fields, &p)?
        }
        CheckKind::Z => {
            let k = require(params.k, "k", "Z")?;
            check_z_embedding(&fields, k)?
        }
    };

    let mut csv = CsvFile::create(out_dir, "ratios.csv", "member,ratio")?;
    for (i, r) in report.ratios.iter().enumerate() {
        csv.indexed_row(i, &[*r])?;
    }
    manifest.add_file(csv.finish()?);

    manifest.summary = Some(summary_table(&[
        ("check", Value::String(check.label().to_string())),
        ("max_ratio", Value::Float(report.max_ratio)),
        ("argmax", Value::Integer(report.argmax as i64)),
        ("skipped", Value::Integer(report.skipped as i64)),
        ("count", Value::Integer(fields.len() as i64)),
    ]));
    Ok(())
}
