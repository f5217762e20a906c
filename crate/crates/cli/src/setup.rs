//! Turning command-line arguments into games and estimator configurations.

use std::sync::Arc;

use serde::Serialize;
use simshap::games::{
    GlobalGame, LocalInstance, LossGame, LossKind, PredictionGame, PredictionTarget, ReferenceSet, TabulatedGame,
};
use simshap::imputation::{BackgroundSet, Imputer};
use simshap::models::{Model, ModelKind, PredictiveModel};
use simshap::{CooperativeGame, EstimatorConfig, Execution};

use crate::ingest::{ingest_csv, split_rows, Dataset, Split};
use crate::{CliError, EstimatorArgs, GameArgs, GameKindArg, LossArg, ModelArg};

/// Root-seed offsets for each independent random stream.
pub const SPLIT_STREAM: u64 = 1;
pub const SAMPLER_STREAM: u64 = 2;
pub const REFERENCE_STREAM: u64 = 3;

/// Default background size as a fraction of all rows.
const BACKGROUND_FRACTION: f64 = 0.05;
const LOGISTIC_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelInfo {
    pub kind: ModelKind,
    pub validation_metric: String,
    pub validation_value: f64,
}

pub struct DataSetup {
    pub dataset: Dataset,
    pub split: Split,
    pub model: Arc<PredictiveModel>,
    pub model_info: ModelInfo,
    pub imputer: Arc<Imputer>,
    pub background_rows: Vec<usize>,
    pub kind: GameKindArg,
    pub loss: LossKind,
    pub target: PredictionTarget,
}

pub enum Prepared {
    Table(TabulatedGame),
    Data(Box<DataSetup>),
}

impl Prepared {
    pub fn num_features(&self) -> usize {
        match self {
            Prepared::Table(g) => g.num_features(),
            Prepared::Data(s) => s.dataset.features.ncols(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self {
            Prepared::Table(g) => (0..g.num_features()).map(|i| format!("x{i}")).collect(),
            Prepared::Data(s) => s.dataset.feature_names.clone(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Prepared::Table(_) => "table",
            Prepared::Data(s) => match s.kind {
                GameKindArg::Prediction => "prediction",
                _ => "loss",
            },
        }
    }

    /// The game for one explained instance, and that instance's dataset row.
    pub fn local_game(&self, instance_index: usize) -> Result<(Box<dyn CooperativeGame>, Option<usize>), CliError> {
        match self {
            Prepared::Table(g) => Ok((Box::new(g.clone()), None)),
            Prepared::Data(s) => {
                let row = *s.split.test.get(instance_index).ok_or_else(|| {
                    CliError::Input(format!(
                        "instance index {instance_index} is outside the test split of {} rows",
                        s.split.test.len()
                    ))
                })?;
                let instance = LocalInstance::new(s.dataset.features.row(row).to_vec(), s.dataset.labels[row]);
                Ok((s.instance_game(&instance)?, Some(row)))
            }
        }
    }

    /// Global game over the first `reference_size` test rows.
    pub fn global_game(&self, reference_size: Option<usize>, batch_b: usize, seed: u64) -> Result<(GlobalGame, usize), CliError> {
        let Prepared::Data(s) = self else {
            return Err(CliError::Input("global explanations need a dataset, not a tabulated game".into()));
        };
        let n_ref = reference_size.unwrap_or(s.split.test.len());
        if n_ref == 0 || n_ref > s.split.test.len() {
            return Err(CliError::Input(format!(
                "reference size {n_ref} must lie in 1..={} (the test split)",
                s.split.test.len()
            )));
        }
        let rows = &s.split.test[..n_ref];
        let reference = ReferenceSet::new(
            s.dataset.features.select_rows(rows),
            rows.iter().map(|&r| s.dataset.labels[r]).collect(),
        )?;
        let setup: &DataSetup = s;
        let game = GlobalGame::new(|inst: &LocalInstance| setup.instance_game(inst), &reference, batch_b.min(n_ref), seed)?;
        Ok((game, n_ref))
    }
}

impl DataSetup {
    fn instance_game(&self, instance: &LocalInstance) -> Result<Box<dyn CooperativeGame>, simshap::ShapError> {
        let model: Arc<dyn Model> = self.model.clone();
        Ok(match self.kind {
            GameKindArg::Prediction => Box::new(PredictionGame::with_target(
                model,
                self.imputer.clone(),
                instance.x.clone(),
                self.target,
            )?),
            _ => Box::new(LossGame::new(model, self.imputer.clone(), instance.clone(), self.loss)?),
        })
    }
}

pub fn prepare(args: &GameArgs, root_seed: u64) -> Result<Prepared, CliError> {
    if args.game == GameKindArg::Table {
        let text = std::fs::read_to_string(&args.data)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.data.display())))?;
        let game = TabulatedGame::parse(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
        return Ok(Prepared::Table(game));
    }
    let label_col = args
        .label_col
        .as_deref()
        .ok_or_else(|| CliError::Input("--label-col is required for dataset games".into()))?;
    let dataset = ingest_csv(&args.data, label_col)?;
    let split = split_rows(dataset.labels.len(), root_seed ^ SPLIT_STREAM)?;
    let train_x = dataset.features.select_rows(&split.train);
    let train_y: Vec<f64> = split.train.iter().map(|&r| dataset.labels[r]).collect();
    let model = match args.model {
        ModelArg::Linear => PredictiveModel::fit_linear(&train_x, &train_y, args.ridge)?,
        ModelArg::Logistic => PredictiveModel::fit_logistic(&train_x, &train_y, args.ridge, LOGISTIC_MAX_ITER)?,
        ModelArg::File => {
            let path = args
                .model_path
                .as_ref()
                .ok_or_else(|| CliError::Input("--model file needs --model-path".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            let model = PredictiveModel::from_json(&text)?;
            if model.weights.len() != dataset.features.ncols() {
                return Err(CliError::Input(format!(
                    "model has {} weights but the data has {} features",
                    model.weights.len(),
                    dataset.features.ncols()
                )));
            }
            model
        }
    };
    if let Some(path) = &args.save_model {
        std::fs::write(path, model.to_json()?)?;
    }
    let model_info = validation_info(&model, &dataset, &split)?;

    let n = dataset.labels.len();
    let background_size = args
        .background_size
        .unwrap_or_else(|| ((n as f64 * BACKGROUND_FRACTION).round() as usize).max(1));
    if background_size == 0 || background_size > split.train.len() {
        return Err(CliError::Input(format!(
            "background size {background_size} must lie in 1..={} (the training split)",
            split.train.len()
        )));
    }
    let background_rows = split.train[..background_size].to_vec();
    let imputer = Imputer::marginal(BackgroundSet::new(dataset.features.select_rows(&background_rows))?);

    let loss = match args.loss {
        LossArg::Mse => LossKind::SquaredError,
        LossArg::Ce => LossKind::CrossEntropy,
    };
    let target = match args.target_class {
        Some(c) => PredictionTarget::Class(c),
        None => PredictionTarget::Output,
    };
    Ok(Prepared::Data(Box::new(DataSetup {
        dataset,
        split,
        model: Arc::new(model),
        model_info,
        imputer: Arc::new(imputer),
        background_rows,
        kind: args.game,
        loss,
        target,
    })))
}

/// Mean squared error (linear) or accuracy (logistic) on the validation split.
fn validation_info(model: &PredictiveModel, dataset: &Dataset, split: &Split) -> Result<ModelInfo, CliError> {
    let x = dataset.features.select_rows(&split.validation);
    let pred = model.predict(&x)?;
    let y = split.validation.iter().map(|&r| dataset.labels[r]);
    let n = pred.len() as f64;
    let (metric, value) = match model.kind {
        ModelKind::LinearRegression => ("mse", pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n),
        ModelKind::LogisticRegression => (
            "accuracy",
            pred.iter().zip(y).filter(|&(p, t)| (*p >= 0.5) == (t >= 0.5)).count() as f64 / n,
        ),
    };
    Ok(ModelInfo {
        kind: model.kind,
        validation_metric: metric.into(),
        validation_value: value,
    })
}

/// Estimator configuration from defaults for `d` features plus flag overrides.
pub fn estimator_config(args: &EstimatorArgs, d: usize, global: bool) -> EstimatorConfig {
    let mut cfg = if global {
        EstimatorConfig::global(d)
    } else {
        EstimatorConfig::local(d)
    };
    if let Some(t) = args.t {
        cfg.t = t;
    }
    if let Some(lambda) = args.lambda {
        cfg.lambda = lambda;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(xi) = args.xi {
        cfg.xi = xi;
    }
    if let Some(max_iter) = args.max_iter {
        cfg.max_iter = max_iter;
    }
    if let Some(b) = args.batch_b {
        cfg.batch_b = b;
    }
    cfg.paired_sampling = args.paired;
    cfg.seed = args.seed ^ SAMPLER_STREAM;
    cfg.execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    cfg
}
