//! Experiment orchestration: domain, baselines, nondegeneracy, optional
//! supersolutions, continuation, uniqueness probe, and the files each stage
//! leaves behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::output::{emit_field, emit_image};
use crate::diagnostics::{uniqueness_probe, DiagnosticsContext, DiagnosticsReport, UniquenessReport};
use crate::discrete_ops::{norm, solve_spd, CgOptions, NormKind, ScalarField};
use crate::grid_domain::{BoundingBox, GridDomain};
use crate::scalar_solver::{nd_margin, positive_guess, principal_eigenvalue, solve_ball, supersolution_phi};
use crate::state::StateField;
use crate::system_solver::{continuation_run, CoupledSystem, ModelKind, ModelTag, TraceEntry};

/// How far the pipeline goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveBaseline,
    NdCheck,
    Continue,
    ProbeUniqueness,
    ConvergenceStudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Domain,
    Baseline,
    NdCheck,
    Supersolution,
    Continuation,
    Uniqueness,
    ConvergenceStudy,
    Output,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Domain => "domain",
            Stage::Baseline => "baseline",
            Stage::NdCheck => "nd_check",
            Stage::Supersolution => "supersolution",
            Stage::Continuation => "continuation",
            Stage::Uniqueness => "uniqueness",
            Stage::ConvergenceStudy => "convergence_study",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub kappa: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSummary {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub interior_nodes: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub species: usize,
    pub lambda1: f64,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub positive: bool,
    pub h1_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdSummary {
    pub species: usize,
    pub margin: f64,
    pub rayleigh_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub kappa: f64,
    pub newton_iterations: usize,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub h: Vec<f64>,
    pub l2_error: Vec<f64>,
    /// `l2_error[n] / l2_error[n + 1]`.
    pub ratio: Vec<f64>,
}

/// Machine-readable record of a run. Wall-clock times are kept out of the
/// serialized summary so identical runs give identical files; they go to
/// `timings.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: String,
    pub failure: Option<Failure>,
    pub model: ModelTag,
    pub domain: Option<DomainSummary>,
    pub baseline: Vec<BaselineSummary>,
    pub nd_margins: Vec<NdSummary>,
    pub supersolution_computed: bool,
    pub per_kappa: Vec<KappaSummary>,
    pub uniqueness: Option<UniquenessReport>,
    pub convergence: Option<ConvergenceReport>,
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

impl RunSummary {
    fn new(model: ModelTag) -> Self {
        Self {
            status: "ok".into(),
            failure: None,
            model,
            domain: None,
            baseline: Vec::new(),
            nd_margins: Vec::new(),
            supersolution_computed: false,
            per_kappa: Vec::new(),
            uniqueness: None,
            convergence: None,
            timings: BTreeMap::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Everything a run produces in memory, alongside the summary.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub domain: Option<Arc<GridDomain>>,
    pub baseline: Option<StateField>,
    pub phi: Option<Vec<ScalarField>>,
    pub trace: Vec<TraceEntry>,
}

type StageResult<T> = std::result::Result<T, Failure>;

fn fail(stage: Stage, e: impl std::fmt::Display) -> Failure {
    Failure { stage, kappa: None, message: e.to_string() }
}

/// Runs the pipeline up to `command`, writing outputs into the configured
/// directory. Always returns a summary; failures are recorded in it and the
/// summary file is written regardless.
pub fn run(config: &RunConfig, command: Command) -> (RunSummary, RunArtifacts) {
    let out_dir = PathBuf::from(&config.output.directory);
    let mut summary = RunSummary::new(config.model.kind);
    let mut artifacts = RunArtifacts::default();
    let result = fs::create_dir_all(&out_dir)
        .map_err(|e| fail(Stage::Output, format!("{}: {e}", out_dir.display())))
        .and_then(|_| execute(config, command, &out_dir, &mut summary, &mut artifacts));
    if let Err(f) = result {
        summary.status = "failed".into();
        summary.failure = Some(f);
    }
    if let Err(f) = write_summary(&summary, &out_dir) {
        if summary.failure.is_none() {
            summary.status = "failed".into();
            summary.failure = Some(f);
        }
    }
    (summary, artifacts)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> StageResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(Stage::Output, e))?;
    fs::write(path, text + "\n").map_err(|e| fail(Stage::Output, format!("{}: {e}", path.display())))
}

fn write_summary(summary: &RunSummary, dir: &Path) -> StageResult<()> {
    write_json(summary, &dir.join("summary.json"))?;
    write_json(&summary.timings, &dir.join("timings.json"))
}

fn timed<T>(summary: &mut RunSummary, stage: Stage, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *summary.timings.entry(stage.name().to_string()).or_default() += t0.elapsed().as_secs_f64();
    out
}

fn emit_state(config: &RunConfig, dir: &Path, state: &StateField, tag: &str) -> StageResult<()> {
    for (i, u) in state.components().iter().enumerate() {
        if config.output.emit_fields {
            emit_field(u, &dir.join(format!("u{i}_{tag}.csv"))).map_err(|e| fail(Stage::Output, e))?;
        }
        if config.output.emit_images {
            emit_image(u, &dir.join(format!("u{i}_{tag}.pgm"))).map_err(|e| fail(Stage::Output, e))?;
        }
    }
    Ok(())
}

fn execute(
    config: &RunConfig,
    command: Command,
    dir: &Path,
    summary: &mut RunSummary,
    artifacts: &mut RunArtifacts,
) -> StageResult<()> {
    let opts = config.solver;
    if command == Command::ConvergenceStudy {
        let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
        let cg = CgOptions { tol: opts.cg_tol, max_iter: None };
        let report = timed(summary, Stage::ConvergenceStudy, || convergence_study(&hs, cg))
            .map_err(|e| fail(Stage::ConvergenceStudy, e))?;
        summary.convergence = Some(report);
        return Ok(());
    }

    let domain = timed(summary, Stage::Domain, || {
        GridDomain::build(
            &config.domain.ball_specs(),
            &config.domain.corridors,
            config.domain.bbox,
            config.domain.h,
        )
    })
    .map_err(|e| fail(Stage::Domain, e))?;
    let domain = Arc::new(domain);
    summary.domain = Some(DomainSummary {
        nx: domain.nx(),
        ny: domain.ny(),
        h: domain.h(),
        interior_nodes: domain.interior().len(),
        components: domain.connected_components(domain.interior()).len(),
    });
    artifacts.domain = Some(Arc::clone(&domain));

    // Baselines: the positive state of each species on its own ball.
    let k = config.species.len();
    let mut base = Vec::with_capacity(k);
    for (s, sp) in config.species.iter().enumerate() {
        let region = domain.ball_nodes(s);
        let (lambda1, rep) = timed(summary, Stage::Baseline, || -> crate::Result<_> {
            let (lambda1, _) = principal_eigenvalue(&region, &domain, &opts)?;
            let guess = positive_guess(&region, &domain, &opts)?;
            Ok((lambda1, solve_ball(sp, &region, &guess, &opts)?))
        })
        .map_err(|e| fail(Stage::Baseline, format!("species {s}: {e}")))?;
        summary.baseline.push(BaselineSummary {
            species: s,
            lambda1,
            newton_iterations: rep.newton_iterations,
            final_residual: rep.final_residual,
            positive: rep.positive,
            h1_norm: norm(&rep.solution, NormKind::H1),
        });
        if !rep.positive {
            return Err(fail(
                Stage::Baseline,
                format!(
                    "no positive baseline for species {s} (lambda = {}, principal eigenvalue of its ball = {lambda1})",
                    sp.lambda
                ),
            ));
        }
        base.push(rep.solution);
    }
    let baseline = StateField::new(base).map_err(|e| fail(Stage::Baseline, e))?;
    emit_state(config, dir, &baseline, "baseline")?;
    artifacts.baseline = Some(baseline.clone());
    if command == Command::SolveBaseline {
        return Ok(());
    }

    for (s, sp) in config.species.iter().enumerate() {
        let region = domain.ball_nodes(s);
        let rep = timed(summary, Stage::NdCheck, || nd_margin(baseline.component(s), sp, &region, &opts))
            .map_err(|e| fail(Stage::NdCheck, format!("species {s}: {e}")))?;
        summary.nd_margins.push(NdSummary {
            species: s,
            margin: rep.margin,
            rayleigh_iterations: rep.rayleigh_iterations,
        });
        if rep.margin <= 0.0 {
            return Err(fail(
                Stage::NdCheck,
                format!("NDFailure: species {s} baseline is degenerate (margin {})", rep.margin),
            ));
        }
    }
    if command == Command::NdCheck {
        return Ok(());
    }

    let phi = if config.model.truncation {
        let caps = timed(summary, Stage::Supersolution, || {
            config
                .species
                .iter()
                .map(|sp| supersolution_phi(sp, &domain, &opts))
                .collect::<crate::Result<Vec<_>>>()
        })
        .map_err(|e| fail(Stage::Supersolution, e))?;
        summary.supersolution_computed = true;
        Some(caps)
    } else {
        None
    };
    artifacts.phi = phi.clone();

    let model = match config.model.kind {
        ModelTag::LotkaVolterra => ModelKind::LotkaVolterra,
        ModelTag::Barrier => ModelKind::Barrier(baseline.clone()),
        ModelTag::PositivePart => ModelKind::PositivePart(baseline.clone()),
    };
    let mut system = CoupledSystem::new(config.species.clone(), model);
    if let Some(caps) = &phi {
        system = system.with_caps(caps.clone());
    }
    let ctx = DiagnosticsContext {
        baseline: system.model.baseline().cloned(),
        phi: phi.clone(),
        ..DiagnosticsContext::new(config.species.clone(), &opts)
    };

    let outcome = timed(summary, Stage::Continuation, || {
        continuation_run(&baseline, &system, &config.schedule, &opts, &ctx)
    });
    let (trace, failure) = match outcome {
        Ok(trace) => (trace, None),
        Err(e) => {
            let failure =
                Failure { stage: Stage::Continuation, kappa: Some(e.kappa), message: e.source.to_string() };
            (e.partial, Some(failure))
        }
    };
    for entry in &trace.entries {
        summary.per_kappa.push(KappaSummary {
            kappa: entry.kappa,
            newton_iterations: entry.newton_iterations,
            diagnostics: entry.diagnostics.clone(),
        });
        let tag = format!("{}", entry.kappa);
        write_json(&entry.diagnostics, &dir.join(format!("trace_{tag}.json")))?;
        emit_state(config, dir, &entry.state, &tag)?;
    }
    artifacts.trace = trace.entries;
    if let Some(f) = failure {
        return Err(f);
    }
    if command == Command::Continue {
        return Ok(());
    }

    let Some(probe) = config.probes.uniqueness else {
        return Err(fail(Stage::Uniqueness, "no [probes.uniqueness] section in the config"));
    };
    let last = artifacts.trace.last().ok_or_else(|| fail(Stage::Uniqueness, "empty trace"))?;
    let report = timed(summary, Stage::Uniqueness, || {
        uniqueness_probe(&last.state, &system, last.kappa, probe.delta, probe.trials, probe.seed, &opts)
    })
    .map_err(|e| fail(Stage::Uniqueness, e))?;
    summary.uniqueness = Some(report);
    Ok(())
}

/// L2 error of the discrete Poisson solve for `u = sin(πx) sin(πy)` on the
/// unit square, for each spacing in `hs`.
pub fn convergence_study(hs: &[f64], cg: CgOptions) -> crate::Result<ConvergenceReport> {
    let pi = std::f64::consts::PI;
    let bbox = BoundingBox { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 };
    let mut l2_error = Vec::with_capacity(hs.len());
    for &h in hs {
        let d = Arc::new(GridDomain::rectangle(bbox, h)?);
        let exact = ScalarField::from_fn(&d, |x, y| (pi * x).sin() * (pi * y).sin());
        let rhs = exact.scale(2.0 * pi * pi);
        let u = solve_spd(&rhs, None, cg)?;
        l2_error.push(norm(&u.axpy(-1.0, &exact)?, NormKind::L2));
    }
    let ratio = l2_error.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ConvergenceReport { h: hs.to_vec(), l2_error, ratio })
}
