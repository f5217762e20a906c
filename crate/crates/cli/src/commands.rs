//! The explain, exact, bench and rate-study subcommands.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use simshap::estimators::{
    exact_report, exact_shapley_with, sim_shapley, stable_sim_shapley, BatchMoments, EstimatorKind,
    ExplanationReport, KernelShap,
};
use simshap::metrics::{fit_q_rate, l2_bias, momentum_fixed_point, pearson_consistency, ConvergenceRateReport};
use simshap::sampling::FullEnumeration;
use simshap::{CooperativeGame, EstimatorConfig};

use crate::setup::{estimator_config, prepare, ModelInfo, Prepared, REFERENCE_STREAM};
use crate::{
    BenchArgs, CliError, EstimatorArg, ExactArgs, ExplainArgs, RateArgs, ReferenceArg, SCHEMA_VERSION,
};

/// Stream offset for the sampler of a KernelSHAP reference run.
const REFERENCE_ESTIMATOR_STREAM: u64 = 4;
/// Stopping tolerance of a KernelSHAP reference run.
const REFERENCE_EPSILON: f64 = 0.005;
/// Largest game for which benches and sweeps use exact values as ground truth.
const EXACT_GROUND_TRUTH_MAX_D: usize = 12;
/// Iteration cap of a deterministic rate study unless `--T` is given.
const RATE_STUDY_ITERATIONS: usize = 50;

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct GameInfo {
    kind: &'static str,
    v_empty: f64,
    v_full: f64,
    c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance_row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    background_rows: Option<usize>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ReferenceComparison {
    estimator: EstimatorKind,
    attributions: Vec<f64>,
    bias: f64,
    consistency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    consistency_error: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ReportJson {
    schema_version: u32,
    command: &'static str,
    estimator: EstimatorKind,
    feature_names: Vec<String>,
    attributions: Vec<f64>,
    game: GameInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelInfo>,
    root_seed: u64,
    config: EstimatorConfig,
    iterations: usize,
    evaluations: u64,
    converged: bool,
    max_sigma: Option<f64>,
    range: f64,
    rejected_batches: usize,
    jitter_applied: bool,
    millis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceComparison>,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn kind_of(arg: EstimatorArg) -> EstimatorKind {
    match arg {
        EstimatorArg::Sim => EstimatorKind::Sim,
        EstimatorArg::StableSim => EstimatorKind::StableSim,
        EstimatorArg::KernelShap => EstimatorKind::KernelShap,
        EstimatorArg::Exact => EstimatorKind::Exact,
    }
}

/// Runs `kind` on `game`; KernelSHAP restarts until converged unless `single_shot`.
pub fn run_estimator<G: CooperativeGame + ?Sized>(
    kind: EstimatorKind,
    game: &mut G,
    cfg: &EstimatorConfig,
    single_shot: bool,
) -> Result<ExplanationReport, CliError> {
    Ok(match kind {
        EstimatorKind::Exact => exact_report(game, cfg.execution)?,
        EstimatorKind::Sim => sim_shapley(game, cfg)?,
        EstimatorKind::StableSim => stable_sim_shapley(game, cfg)?,
        EstimatorKind::KernelShap => KernelShap::new(cfg.clone()).with_restarts(!single_shot).run(game)?,
    })
}

fn reference_attributions<G: CooperativeGame + ?Sized>(
    which: ReferenceArg,
    game: &mut G,
    cfg: &EstimatorConfig,
    root_seed: u64,
) -> Result<(EstimatorKind, Vec<f64>), CliError> {
    match which {
        ReferenceArg::Exact => Ok((EstimatorKind::Exact, exact_shapley_with(game, cfg.execution)?)),
        ReferenceArg::KernelShap => {
            let tight = EstimatorConfig {
                epsilon: REFERENCE_EPSILON,
                seed: root_seed ^ REFERENCE_ESTIMATOR_STREAM,
                ..cfg.clone()
            };
            let report = KernelShap::new(tight).with_restarts(true).run(game)?;
            Ok((EstimatorKind::KernelShap, report.attributions))
        }
    }
}

fn compare(estimator: EstimatorKind, reference: Vec<f64>, estimate: &[f64]) -> Result<ReferenceComparison, CliError> {
    let bias = l2_bias(estimate, &reference)?;
    let (consistency, consistency_error) = match pearson_consistency(estimate, &reference) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ReferenceComparison {
        estimator,
        attributions: reference,
        bias,
        consistency,
        consistency_error,
    })
}

pub fn explain(args: &ExplainArgs, global: bool) -> Result<(), CliError> {
    let est = &args.estimator;
    let prepared = prepare(&args.game, est.seed)?;
    let d = prepared.num_features();
    let mut cfg = estimator_config(est, d, global);
    cfg.validate()?;
    let kind = kind_of(est.estimator);

    let (report, mut info, reference) = if global {
        // exact values of a global game are defined over the whole reference set
        let batch_b = if kind == EstimatorKind::Exact { usize::MAX } else { cfg.batch_b };
        let (mut game, n_ref) = prepared.global_game(args.game.reference_size, batch_b, est.seed ^ REFERENCE_STREAM)?;
        cfg.batch_b = game.current_batch().len();
        let report = run_estimator(kind, &mut game, &cfg, est.single_shot)?;
        let reference = match args.reference_estimator {
            Some(which) => {
                let (mut full, _) = prepared.global_game(args.game.reference_size, usize::MAX, est.seed ^ REFERENCE_STREAM)?;
                let (k, attr) = reference_attributions(which, &mut full, &cfg, est.seed)?;
                Some(compare(k, attr, &report.attributions)?)
            }
            None => None,
        };
        let info = GameInfo {
            kind: prepared.kind_name(),
            v_empty: report.boundary.v_empty,
            v_full: report.boundary.v_full,
            c: report.boundary.c,
            instance_row: None,
            label: None,
            reference_rows: Some(n_ref),
            background_rows: None,
        };
        (report, info, reference)
    } else {
        let (mut game, row) = prepared.local_game(args.game.instance_index)?;
        let report = run_estimator(kind, game.as_mut(), &cfg, est.single_shot)?;
        let reference = match args.reference_estimator {
            Some(which) => {
                let (k, attr) = reference_attributions(which, game.as_mut(), &cfg, est.seed)?;
                Some(compare(k, attr, &report.attributions)?)
            }
            None => None,
        };
        let label = match (&prepared, row) {
            (Prepared::Data(s), Some(r)) => Some(s.dataset.labels[r]),
            _ => None,
        };
        let info = GameInfo {
            kind: prepared.kind_name(),
            v_empty: report.boundary.v_empty,
            v_full: report.boundary.v_full,
            c: report.boundary.c,
            instance_row: row,
            label,
            reference_rows: None,
            background_rows: None,
        };
        (report, info, reference)
    };
    if let Prepared::Data(s) = &prepared {
        info.background_rows = Some(s.background_rows.len());
    }
    if let Some(path) = &args.trace {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        report.trace.write_csv(d, file)?;
    }
    let json = build_report(
        if global { "explain-global" } else { "explain-local" },
        &prepared,
        info,
        cfg,
        est.seed,
        report,
        reference,
    );
    write_text(args.out.as_deref(), &to_json(&json))
}

fn build_report(
    command: &'static str,
    prepared: &Prepared,
    game: GameInfo,
    config: EstimatorConfig,
    root_seed: u64,
    report: ExplanationReport,
    reference: Option<ReferenceComparison>,
) -> ReportJson {
    ReportJson {
        schema_version: SCHEMA_VERSION,
        command,
        estimator: report.estimator,
        feature_names: prepared.feature_names(),
        attributions: report.attributions,
        game,
        model: match prepared {
            Prepared::Data(s) => Some(s.model_info.clone()),
            Prepared::Table(_) => None,
        },
        root_seed,
        config,
        iterations: report.iterations,
        evaluations: report.evaluations,
        converged: report.converged,
        max_sigma: report.max_sigma,
        range: report.range,
        rejected_batches: report.rejected_batches,
        jitter_applied: report.jitter_applied,
        millis: report.millis,
        reference,
    }
}

pub fn exact(args: &ExactArgs) -> Result<(), CliError> {
    let prepared = prepare(&args.game, args.seed)?;
    let d = prepared.num_features();
    let mut cfg = EstimatorConfig::local(d);
    cfg.seed = args.seed;
    if args.sequential {
        cfg.execution = simshap::Execution::Sequential;
    }
    let (game, row) = prepared.local_game(args.game.instance_index)?;
    let report = exact_report(game.as_ref(), cfg.execution)?;
    let info = GameInfo {
        kind: prepared.kind_name(),
        v_empty: report.boundary.v_empty,
        v_full: report.boundary.v_full,
        c: report.boundary.c,
        instance_row: row,
        label: match (&prepared, row) {
            (Prepared::Data(s), Some(r)) => Some(s.dataset.labels[r]),
            _ => None,
        },
        reference_rows: None,
        background_rows: match &prepared {
            Prepared::Data(s) => Some(s.background_rows.len()),
            Prepared::Table(_) => None,
        },
    };
    let json = build_report("exact", &prepared, info, cfg, args.seed, report, None);
    write_text(args.out.as_deref(), &to_json(&json))
}

/// Ground-truth attributions for benches and sweeps: exact for small games,
/// otherwise tight-threshold KernelSHAP.
fn ground_truth<G: CooperativeGame + ?Sized>(game: &mut G, cfg: &EstimatorConfig, root_seed: u64) -> Result<Vec<f64>, CliError> {
    let which = if game.num_features() <= EXACT_GROUND_TRUTH_MAX_D {
        ReferenceArg::Exact
    } else {
        ReferenceArg::KernelShap
    };
    Ok(reference_attributions(which, game, cfg, root_seed)?.1)
}

fn mean_and_se(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let est = &args.estimator;
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    if args.methods.is_empty() || args.budget_grid.is_empty() {
        return Err(CliError::Input("bench needs at least one method and one budget".into()));
    }
    if args.methods.contains(&EstimatorArg::Exact) {
        return Err(CliError::Input("exact has no evaluation budget and cannot be benchmarked on a grid".into()));
    }
    let prepared = prepare(&args.game, est.seed)?;
    let d = prepared.num_features();
    let base = estimator_config(est, d, false);
    base.validate()?;
    for &budget in &args.budget_grid {
        if budget < base.m as u64 {
            return Err(CliError::Input(format!(
                "budget {budget} is smaller than one batch of m = {} coalitions",
                base.m
            )));
        }
    }
    let (mut game, _) = prepared.local_game(args.game.instance_index)?;
    let truth = ground_truth(game.as_mut(), &base, est.seed)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "budget", "reps", "mean_bias", "se_bias", "mean_millis"])?;
    for &method in &args.methods {
        let kind = kind_of(method);
        for &budget in &args.budget_grid {
            let mut biases = Vec::with_capacity(args.reps);
            let mut millis = Vec::with_capacity(args.reps);
            for rep in 0..args.reps {
                let mut cfg = EstimatorConfig {
                    seed: base.seed.wrapping_add(rep as u64),
                    ..base.clone()
                };
                let single_shot = kind == EstimatorKind::KernelShap;
                if single_shot {
                    cfg.m = budget as usize;
                } else {
                    cfg.max_iter = (budget / cfg.m as u64) as usize;
                    // run the full budget
                    cfg.epsilon = f64::MIN_POSITIVE;
                }
                let report = run_estimator(kind, game.as_mut(), &cfg, single_shot)?;
                biases.push(l2_bias(&report.attributions, &truth)?);
                millis.push(report.millis);
            }
            let (mean_bias, se_bias) = mean_and_se(&biases);
            let (mean_millis, _) = mean_and_se(&millis);
            w.write_record([
                kind.name().to_string(),
                budget.to_string(),
                args.reps.to_string(),
                mean_bias.to_string(),
                fmt_opt(se_bias),
                format!("{mean_millis:.3}"),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_text(args.out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct RateStudyJson {
    schema_version: u32,
    command: &'static str,
    feature_names: Vec<String>,
    t: f64,
    lambda: f64,
    iterations: usize,
    burn_in: usize,
    rate: ConvergenceRateReport,
    fixed_point: Vec<f64>,
    exact: Vec<f64>,
    fixed_point_bias: f64,
}

pub fn rate_study(args: &RateArgs) -> Result<(), CliError> {
    let est = &args.estimator;
    let prepared = prepare(&args.game, est.seed)?;
    let d = prepared.num_features();
    let mut cfg = estimator_config(est, d, false);
    cfg.validate()?;
    let (mut game, _) = prepared.local_game(args.game.instance_index)?;
    if !args.lambda_grid.is_empty() {
        return lambda_sweep(args, game.as_mut(), &cfg);
    }
    if est.estimator != EstimatorArg::Sim {
        return Err(CliError::Input("the rate study runs plain SIM-Shapley; use --estimator sim".into()));
    }
    if est.max_iter.is_none() {
        cfg.max_iter = RATE_STUDY_ITERATIONS;
    }
    cfg.epsilon = f64::MIN_POSITIVE;
    let mut source = FullEnumeration::new(d)?;
    let report = simshap::estimators::SimShapley::new(cfg.clone()).run_with_source(game.as_mut(), &mut source)?;
    let batch = source.batch().clone();
    let values: Vec<f64> = batch.coalitions.iter().map(|z| game.evaluate(z)).collect();
    let boundary = game.boundary();
    let moments = BatchMoments::from_batch(&batch, &values, boundary.v_empty, cfg.lambda)?;
    let fixed_point = momentum_fixed_point(&moments, cfg.t, boundary.c)?;
    let rate = fit_q_rate(&report.trace, &fixed_point, args.burn_in)?;
    let exact = exact_shapley_with(game.as_ref(), cfg.execution)?;
    if let Some(path) = &args.trace {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        report.trace.write_csv(d, file)?;
    }
    let json = RateStudyJson {
        schema_version: SCHEMA_VERSION,
        command: "rate-study",
        feature_names: prepared.feature_names(),
        t: cfg.t,
        lambda: cfg.lambda,
        iterations: report.iterations,
        burn_in: args.burn_in,
        fixed_point_bias: l2_bias(&fixed_point, &exact)?,
        rate,
        fixed_point,
        exact,
    };
    write_text(args.out.as_deref(), &to_json(&json))
}

fn lambda_sweep<G: CooperativeGame + ?Sized>(args: &RateArgs, game: &mut G, base: &EstimatorConfig) -> Result<(), CliError> {
    let est = &args.estimator;
    let kind = match est.estimator {
        EstimatorArg::Sim => EstimatorKind::Sim,
        EstimatorArg::StableSim => EstimatorKind::StableSim,
        _ => return Err(CliError::Input("a lambda sweep needs --estimator sim or stable-sim".into())),
    };
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let truth = ground_truth(game, base, est.seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "reps", "mean_bias", "se_bias", "mean_iterations"])?;
    for &lambda in &args.lambda_grid {
        let mut biases = Vec::with_capacity(args.reps);
        let mut iterations = Vec::with_capacity(args.reps);
        for rep in 0..args.reps {
            let cfg = EstimatorConfig {
                lambda,
                seed: base.seed.wrapping_add(rep as u64),
                ..base.clone()
            };
            let report = run_estimator(kind, game, &cfg, false)?;
            biases.push(l2_bias(&report.attributions, &truth)?);
            iterations.push(report.iterations as f64);
        }
        let (mean_bias, se_bias) = mean_and_se(&biases);
        let (mean_iter, _) = mean_and_se(&iterations);
        w.write_record([
            lambda.to_string(),
            args.reps.to_string(),
            mean_bias.to_string(),
            fmt_opt(se_bias),
            mean_iter.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_text(args.out.as_deref(), &String::from_utf8(bytes).expect("csv output is utf-8"))
}
