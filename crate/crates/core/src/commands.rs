//! Subcommands of `paraxial-verify`: each runs an experiment, writes its CSV
//! curves and a `summary.json`, and returns named verdicts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    gronwall_check, run_comparison, sweep, tail_scaling, ComparisonRun, EnergyTrace, Envelope, FitOutcome,
    GronwallVerdict,
};
use crate::approximation::{
    ansatz_spectrum, ansatz_z_derivative, initial_spectrum, residual_identity_error, InitialData,
};
use crate::config::ExperimentConfig;
use crate::error::ParaxialError;
use crate::propagators::{
    helmholtz_evolve, illposed_growth_demo, relative_state_distance, rk4_oracle_evolve, BranchPolicy, HelmholtzState,
};
use crate::spectral::{grid_pair, mode_data, project_hyp};

/// Minimum fitted rate for the full-field error in both norms.
pub const RATE_MIN_SLOPE: f64 = 0.9;
/// Largest log-residual accepted in the error-rate fit.
pub const RATE_MAX_RESIDUAL: f64 = 0.15;
/// Allowed distance of the algebraic tail slope from `p - 2`.
pub const TAIL_SLOPE_TOL: f64 = 0.3;
pub const RESIDUAL_IDENTITY_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-7;
pub const ILLPOSED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    Run,
    EnergyTrace,
    TailScaling,
    IllposedDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Run => "run",
            Command::EnergyTrace => "energy-trace",
            Command::TailScaling => "tail-scaling",
            Command::IllposedDemo => "illposed-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    /// Which property this verdict checks, e.g. `gronwall` or `theorem1_rate`.
    pub checks: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Verdict {
    fn new(name: impl Into<String>, checks: &'static str, passed: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            checks,
            passed,
            value,
            threshold,
        }
    }
}

#[derive(Debug)]
pub struct CommandOutcome {
    pub verdicts: Vec<Verdict>,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

impl CommandOutcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Runtime(#[from] ParaxialError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Runs `command` and writes its outputs into `out_dir` (created if missing).
pub fn execute(command: Command, config: &ExperimentConfig, out_dir: &Path) -> Result<CommandOutcome, CommandError> {
    fs::create_dir_all(out_dir).map_err(|source| CommandError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Output {
        dir: out_dir,
        files: Vec::new(),
    };
    let (verdicts, details) = match command {
        Command::Sweep => cmd_sweep(config, &mut out)?,
        Command::Run => cmd_run(config, &mut out)?,
        Command::EnergyTrace => cmd_energy_trace(config, &mut out)?,
        Command::TailScaling => cmd_tail_scaling(config, &mut out)?,
        Command::IllposedDemo => cmd_illposed_demo(config, &mut out)?,
    };
    let summary = json!({
        "command": command.name(),
        "config": config,
        "results": details,
        "verdicts": verdicts,
        "passed": verdicts.iter().all(|v| v.passed),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    out.write("summary.json", &text)?;
    Ok(CommandOutcome {
        verdicts,
        files: out.files,
        summary,
    })
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Output<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CommandError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|source| CommandError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = Vec<Option<f64>>>,
    ) -> Result<(), CommandError> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(fmt_float).unwrap_or_default()).collect();
            let _ = writeln!(text, "{}", cells.join(","));
        }
        self.write(name, &text)
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

type Results = (Vec<Verdict>, serde_json::Value);

fn energy_csv(out: &mut Output, trace: &EnergyTrace) -> Result<(), CommandError> {
    let rows = (0..trace.z_samples.len()).map(|i| {
        vec![
            Some(trace.z_samples[i]),
            Some(trace.energy[i]),
            trace.de_fd[i],
            Some(trace.bound_rhs[i]),
        ]
    });
    out.csv("energy.csv", "z,E,dE_fd,bound_rhs", rows)
}

fn gronwall_verdict(run: &ComparisonRun, label: &str) -> Result<(Verdict, GronwallVerdict), CommandError> {
    let g = gronwall_check(&run.trace, &run.params)?;
    let v = Verdict::new(
        format!("gronwall{label}"),
        "gronwall",
        g.holds && run.checks.zero_initial_remainder,
        g.energy_constant,
        g.constant_bound,
    );
    Ok((v, g))
}

fn inequality_verdicts(run: &ComparisonRun, label: &str) -> Vec<Verdict> {
    let c = &run.checks;
    vec![
        Verdict::new(
            format!("c3_bound{label}"),
            "c3_bound",
            c.c3_bound.passed,
            c.c3_bound.max_ratio,
            1.0,
        ),
        Verdict::new(
            format!("compact_support_gain{label}"),
            "compact_support_gain",
            c.compact_support_gain.passed,
            c.compact_support_gain.max_ratio,
            1.0,
        ),
        Verdict::new(
            format!("triangle{label}"),
            "theorem1_rate",
            c.triangle.passed,
            c.triangle.max_ratio,
            1.0,
        ),
    ]
}

fn rate_verdict(name: &str, fit: &FitOutcome, max_residual: Option<f64>) -> Verdict {
    match fit.fit() {
        Some(f) => {
            let residual_ok = max_residual.is_none_or(|m| f.max_residual <= m);
            Verdict::new(
                name,
                "theorem1_rate",
                f.slope >= RATE_MIN_SLOPE && residual_ok,
                f.slope,
                RATE_MIN_SLOPE,
            )
        }
        None => Verdict::new(name, "theorem1_rate", false, f64::NAN, RATE_MIN_SLOPE),
    }
}

fn cmd_sweep(config: &ExperimentConfig, out: &mut Output) -> Result<Results, CommandError> {
    let base = config.params(config.epsilons[0]);
    let result = sweep(
        &base,
        &Envelope::Family(config.data),
        &config.epsilons,
        &config.comparison(),
    )?;
    let rows = result.reports.iter().map(|r| {
        vec![
            Some(r.epsilon),
            Some(r.sup_error_hs),
            Some(r.z_at_sup),
            Some(r.sup_error_inf),
            Some(r.tail_norm),
            Some(r.energy_bound_ratio),
        ]
    });
    out.csv(
        "sweep.csv",
        "epsilon,sup_error_hs,z_at_sup,sup_error_inf,tail_norm,energy_ratio",
        rows,
    )?;

    let mut verdicts = vec![
        rate_verdict("error_rate_hs", &result.error_fit, Some(RATE_MAX_RESIDUAL)),
        rate_verdict("error_rate_sup", &result.sup_norm_fit, None),
    ];
    let mut gronwall = Vec::new();
    for run in &result.runs {
        let label = format!("[eps={}]", run.params.epsilon);
        let (v, g) = gronwall_verdict(run, &label)?;
        verdicts.push(v);
        gronwall.push(g);
        verdicts.extend(inequality_verdicts(run, &label));
    }
    let details = json!({
        "sweep": result,
        "gronwall": gronwall,
    });
    Ok((verdicts, details))
}

fn residual_and_oracle(
    config: &ExperimentConfig,
    run: &ComparisonRun,
) -> Result<(Vec<Verdict>, serde_json::Value), CommandError> {
    let params = run.params;
    let (slow, physical) = grid_pair(&params, &config.grid)?;
    let w0 = initial_spectrum(&config.data, &slow)?;

    let z_end = params.z_end();
    let mut worst: f64 = 0.0;
    for z in [0.0, 0.25 * z_end, 0.5 * z_end, z_end] {
        let w = crate::propagators::schrodinger_evolve(&w0, &params, params.epsilon.powi(2) * z)?;
        worst = worst.max(residual_identity_error(&w, &params, z, &physical)?);
    }

    let modes = mode_data(&physical, &params);
    let psi0 = ansatz_spectrum(&w0, &params, 0.0, &physical)?;
    let dpsi0 = ansatz_z_derivative(&w0, &params, 0.0, &physical)?;
    let state0 = HelmholtzState::new(project_hyp(&psi0, &modes)?, project_hyp(&dpsi0, &modes)?, 0.0)?;
    let exact = helmholtz_evolve(&state0, &modes, config.oracle.z, BranchPolicy::HyperbolicOnly)?;
    let rk4 = rk4_oracle_evolve(&state0, &modes, config.oracle.z, config.oracle.steps)?;
    let oracle = relative_state_distance(&exact, &rk4)?;

    let verdicts = vec![
        Verdict::new(
            "residual_identity",
            "residual_identity",
            worst <= RESIDUAL_IDENTITY_TOL,
            worst,
            RESIDUAL_IDENTITY_TOL,
        ),
        Verdict::new("oracle_match", "oracle_match", oracle <= ORACLE_TOL, oracle, ORACLE_TOL),
    ];
    let details = json!({
        "residual_identity_error": worst,
        "oracle_relative_l2": oracle,
        "oracle_z": config.oracle.z,
        "oracle_steps": config.oracle.steps,
    });
    Ok((verdicts, details))
}

fn cmd_run(config: &ExperimentConfig, out: &mut Output) -> Result<Results, CommandError> {
    let params = config.params(config.run_epsilon());
    let run = run_comparison(&params, &config.data, &config.comparison())?;
    energy_csv(out, &run.trace)?;
    let rows = run.samples.iter().map(|r| {
        vec![
            Some(r.z),
            Some(r.error_hs),
            Some(r.error_inf),
            Some(r.r_l2),
            Some(r.r_hs),
            Some(r.energy),
            Some(r.tail),
        ]
    });
    out.csv("samples.csv", "z,error_hs,error_inf,r_l2,r_hs,E,tail", rows)?;

    let (gv, g) = gronwall_verdict(&run, "")?;
    let mut verdicts = vec![gv];
    verdicts.extend(inequality_verdicts(&run, ""));
    let (extra, checks) = residual_and_oracle(config, &run)?;
    verdicts.extend(extra);
    let details = json!({
        "report": run.report,
        "checks": run.checks,
        "gronwall": g,
        "cross_checks": checks,
    });
    Ok((verdicts, details))
}

fn cmd_energy_trace(config: &ExperimentConfig, out: &mut Output) -> Result<Results, CommandError> {
    let params = config.params(config.run_epsilon());
    let run = run_comparison(&params, &config.data, &config.comparison())?;
    energy_csv(out, &run.trace)?;
    let (v, g) = gronwall_verdict(&run, "")?;
    let details = json!({
        "epsilon": params.epsilon,
        "c_meas": run.trace.c_meas,
        "gronwall": g,
    });
    Ok((vec![v], details))
}

fn cmd_tail_scaling(config: &ExperimentConfig, out: &mut Output) -> Result<Results, CommandError> {
    let base = config.params(config.epsilons[0]);
    let (tails, fit) = tail_scaling(&base, &config.data, &config.epsilons, &config.grid)?;
    let rows = config
        .epsilons
        .iter()
        .zip(&tails)
        .map(|(&e, &t)| vec![Some(e), Some(t)]);
    out.csv("tail.csv", "epsilon,tail_norm", rows)?;

    let mut verdicts = Vec::new();
    let mut expected = None;
    if let InitialData::Algebraic { p, .. } = config.data {
        let target = p - 2.0;
        let floor = config.s_a as f64 - 1.0 - 0.2;
        expected = Some(target);
        verdicts.push(match fit.fit() {
            Some(f) => Verdict::new(
                "tail_rate",
                "tail_rate",
                (f.slope - target).abs() <= TAIL_SLOPE_TOL && f.slope >= floor,
                f.slope,
                target,
            ),
            None => Verdict::new("tail_rate", "tail_rate", false, f64::NAN, target),
        });
    }
    let details = json!({
        "epsilons": config.epsilons,
        "tail_norms": tails,
        "fit": fit,
        "expected_slope": expected,
    });
    Ok((verdicts, details))
}

fn cmd_illposed_demo(config: &ExperimentConfig, out: &mut Output) -> Result<Results, CommandError> {
    let c = &config.illposed;
    let k_sq = c.k_sq.unwrap_or(config.omega * config.omega + 1.0);
    let zs: Vec<f64> = (0..c.samples)
        .map(|i| c.z_max * i as f64 / (c.samples - 1) as f64)
        .collect();
    let rows = illposed_growth_demo((k_sq.sqrt(), 0.0), config.omega, &zs)?;
    out.csv(
        "illposed.csv",
        "z,amplitude,predicted",
        rows.iter()
            .map(|r| vec![Some(r.z), Some(r.amplitude), Some(r.predicted)]),
    )?;
    let worst = rows
        .iter()
        .map(|r| (r.amplitude - r.predicted).abs() / r.predicted)
        .fold(0.0, f64::max);
    let verdicts = vec![Verdict::new(
        "illposed_growth",
        "illposed_growth",
        worst <= ILLPOSED_TOL,
        worst,
        ILLPOSED_TOL,
    )];
    let details = json!({
        "k_sq": k_sq,
        "growth_rate": (k_sq - config.omega * config.omega).sqrt(),
        "max_relative_error": worst,
        "rows": rows,
    });
    Ok((verdicts, details))
}
