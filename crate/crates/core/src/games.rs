//! Cooperative games over features.
//!
//! A game assigns a value to every coalition. The concrete games here are the
//! prediction game (mean model output with absent features imputed), the
//! prediction-loss game (negated loss of that mean prediction), a global game
//! that averages a local game over a reference set, and a fully tabulated game.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index;

use crate::coalition::{check_enumerable, Coalition};
use crate::config::GameBoundary;
use crate::data::FeatureMatrix;
use crate::error::{Result, ShapError};
use crate::imputation::Imputer;
use crate::models::Model;
use crate::sampling::{rng_from_seed, SimRng};

/// A coalition-valued function with precomputed boundary values.
///
/// `evaluate` must be pure between calls to `refresh`, so that a batch of
/// coalitions can be evaluated in any order or in parallel.
pub trait CooperativeGame: Send + Sync {
    fn num_features(&self) -> usize;

    /// `v(0)` and `v(1)`, fixed at construction.
    fn boundary(&self) -> GameBoundary;

    fn evaluate(&self, z: &Coalition) -> f64;

    /// Advances any per-iteration randomness (e.g. the reference mini-batch of
    /// a global game). Estimators call this once before each batch.
    fn refresh(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<G: CooperativeGame + ?Sized> CooperativeGame for Box<G> {
    fn num_features(&self) -> usize {
        (**self).num_features()
    }

    fn boundary(&self) -> GameBoundary {
        (**self).boundary()
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        (**self).evaluate(z)
    }

    fn refresh(&mut self) -> Result<()> {
        (**self).refresh()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalInstance {
    pub x: Vec<f64>,
    /// Regression target, or class index `0`/`1` for classification.
    pub y: f64,
}

impl LocalInstance {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        LocalInstance { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SquaredError,
    CrossEntropy,
}

const PROB_FLOOR: f64 = 1e-12;

impl LossKind {
    pub fn loss(self, prediction: f64, y: f64) -> f64 {
        match self {
            LossKind::SquaredError => (prediction - y).powi(2),
            LossKind::CrossEntropy => {
                let p = prediction.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        }
    }
}

/// Which scalar the prediction game explains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionTarget {
    /// The model output as is.
    #[default]
    Output,
    /// Probability of class 0 or 1 for a probabilistic binary model.
    Class(u8),
}

fn check_model_inputs(model: &dyn Model, imputer: &Imputer, x: &[f64]) -> Result<()> {
    if model.num_features() != imputer.num_features() {
        return Err(ShapError::DimensionMismatch {
            expected: model.num_features(),
            actual: imputer.num_features(),
            context: "imputer features vs model features",
        });
    }
    imputer.validate_instance(x)
}

fn mean_prediction(model: &dyn Model, imputer: &Imputer, x: &[f64], z: &Coalition) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    imputer.for_each_completion(x, z, |row| {
        total += model.predict_row(row);
        count += 1;
    });
    total / count as f64
}

/// `v(z)` = expected model output with absent features marginalized out.
#[derive(Clone)]
pub struct PredictionGame {
    model: Arc<dyn Model>,
    imputer: Arc<Imputer>,
    x: Vec<f64>,
    target: PredictionTarget,
    boundary: GameBoundary,
}

impl PredictionGame {
    pub fn new(model: Arc<dyn Model>, imputer: Arc<Imputer>, x: Vec<f64>) -> Result<Self> {
        Self::with_target(model, imputer, x, PredictionTarget::Output)
    }

    pub fn with_target(
        model: Arc<dyn Model>,
        imputer: Arc<Imputer>,
        x: Vec<f64>,
        target: PredictionTarget,
    ) -> Result<Self> {
        check_model_inputs(model.as_ref(), &imputer, &x)?;
        if let PredictionTarget::Class(c) = target {
            if !model.outputs_probability() {
                return Err(ShapError::InvalidInput(
                    "class-probability target needs a probabilistic model".into(),
                ));
            }
            if c > 1 {
                return Err(ShapError::InvalidInput(format!("class index {c} is not binary")));
            }
        }
        let mut game = PredictionGame {
            model,
            imputer,
            x,
            target,
            boundary: GameBoundary::new(0.0, 0.0),
        };
        let d = game.x.len();
        game.boundary = GameBoundary::new(
            game.value(&Coalition::empty(d)),
            game.value(&Coalition::full(d)),
        );
        Ok(game)
    }

    fn value(&self, z: &Coalition) -> f64 {
        let p = mean_prediction(self.model.as_ref(), &self.imputer, &self.x, z);
        match self.target {
            PredictionTarget::Output | PredictionTarget::Class(1) => p,
            PredictionTarget::Class(_) => 1.0 - p,
        }
    }
}

impl CooperativeGame for PredictionGame {
    fn num_features(&self) -> usize {
        self.x.len()
    }

    fn boundary(&self) -> GameBoundary {
        self.boundary
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        self.value(z)
    }
}

/// `v(z) = -loss(E[f | x_S], y)`; the expectation sits inside the loss.
#[derive(Clone)]
pub struct LossGame {
    model: Arc<dyn Model>,
    imputer: Arc<Imputer>,
    instance: LocalInstance,
    loss: LossKind,
    boundary: GameBoundary,
}

impl LossGame {
    pub fn new(
        model: Arc<dyn Model>,
        imputer: Arc<Imputer>,
        instance: LocalInstance,
        loss: LossKind,
    ) -> Result<Self> {
        check_model_inputs(model.as_ref(), &imputer, &instance.x)?;
        if loss == LossKind::CrossEntropy {
            if !model.outputs_probability() {
                return Err(ShapError::InvalidInput(
                    "cross-entropy loss needs a model whose outputs are probabilities".into(),
                ));
            }
            if instance.y != 0.0 && instance.y != 1.0 {
                return Err(ShapError::InvalidInput(format!(
                    "cross-entropy label must be 0 or 1, got {}",
                    instance.y
                )));
            }
        }
        let mut game = LossGame {
            model,
            imputer,
            instance,
            loss,
            boundary: GameBoundary::new(0.0, 0.0),
        };
        let d = game.instance.x.len();
        game.boundary = GameBoundary::new(
            game.evaluate(&Coalition::empty(d)),
            game.evaluate(&Coalition::full(d)),
        );
        Ok(game)
    }
}

impl CooperativeGame for LossGame {
    fn num_features(&self) -> usize {
        self.instance.x.len()
    }

    fn boundary(&self) -> GameBoundary {
        self.boundary
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        let p = mean_prediction(self.model.as_ref(), &self.imputer, &self.instance.x, z);
        -self.loss.loss(p, self.instance.y)
    }
}

/// Rows and labels approximating the data distribution for global games.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    rows: FeatureMatrix,
    labels: Vec<f64>,
}

impl ReferenceSet {
    pub fn new(rows: FeatureMatrix, labels: Vec<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(ShapError::InvalidInput("reference set is empty".into()));
        }
        if labels.len() != rows.nrows() {
            return Err(ShapError::DimensionMismatch {
                expected: rows.nrows(),
                actual: labels.len(),
                context: "reference labels vs rows",
            });
        }
        Ok(ReferenceSet { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn instance(&self, i: usize) -> LocalInstance {
        LocalInstance::new(self.rows.row(i).to_vec(), self.labels[i])
    }
}

/// Average of a local game over reference instances.
///
/// Boundary values average over the whole reference set. `evaluate` averages
/// over the current mini-batch of `B` instances, drawn without replacement and
/// replaced on every `refresh`.
pub struct GlobalGame {
    locals: Vec<Box<dyn CooperativeGame>>,
    batch_size: usize,
    batch: Vec<usize>,
    rng: SimRng,
    boundary: GameBoundary,
    d: usize,
}

impl GlobalGame {
    pub fn new<F, G>(factory: F, reference: &ReferenceSet, batch_size: usize, seed: u64) -> Result<Self>
    where
        F: Fn(&LocalInstance) -> Result<G>,
        G: CooperativeGame + 'static,
    {
        if reference.is_empty() {
            return Err(ShapError::InvalidInput("reference set is empty".into()));
        }
        if batch_size == 0 || batch_size > reference.len() {
            return Err(ShapError::InvalidInput(format!(
                "reference batch size {batch_size} must lie in 1..={}",
                reference.len()
            )));
        }
        let locals: Vec<Box<dyn CooperativeGame>> = (0..reference.len())
            .map(|i| factory(&reference.instance(i)).map(|g| Box::new(g) as Box<dyn CooperativeGame>))
            .collect::<Result<_>>()?;
        let d = locals[0].num_features();
        if let Some(bad) = locals.iter().find(|g| g.num_features() != d) {
            return Err(ShapError::DimensionMismatch {
                expected: d,
                actual: bad.num_features(),
                context: "local games in a global game",
            });
        }
        let n = locals.len() as f64;
        let v_empty = locals.iter().map(|g| g.boundary().v_empty).sum::<f64>() / n;
        let v_full = locals.iter().map(|g| g.boundary().v_full).sum::<f64>() / n;
        let mut game = GlobalGame {
            locals,
            batch_size,
            batch: Vec::new(),
            rng: rng_from_seed(seed),
            boundary: GameBoundary::new(v_empty, v_full),
            d,
        };
        game.draw_batch();
        Ok(game)
    }

    fn draw_batch(&mut self) {
        let mut picked = index::sample(&mut self.rng, self.locals.len(), self.batch_size).into_vec();
        picked.sort_unstable();
        self.batch = picked;
    }

    /// Indices of the reference instances in the current mini-batch.
    pub fn current_batch(&self) -> &[usize] {
        &self.batch
    }

    pub fn local(&self, i: usize) -> &dyn CooperativeGame {
        self.locals[i].as_ref()
    }
}

impl CooperativeGame for GlobalGame {
    fn num_features(&self) -> usize {
        self.d
    }

    fn boundary(&self) -> GameBoundary {
        self.boundary
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        let total: f64 = self.batch.iter().map(|&i| self.locals[i].evaluate(z)).sum();
        total / self.batch.len() as f64
    }

    fn refresh(&mut self) -> Result<()> {
        self.draw_batch();
        Ok(())
    }
}

/// A game given by its value on every one of the `2^d` coalitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGame {
    d: usize,
    values: Vec<f64>,
}

impl TabulatedGame {
    /// `values[i]` is the value of the coalition with index `i`.
    pub fn from_values(d: usize, values: Vec<f64>) -> Result<Self> {
        check_enumerable(d)?;
        if d == 0 {
            return Err(ShapError::InvalidInput("a game needs at least one feature".into()));
        }
        if values.len() != 1 << d {
            return Err(ShapError::InvalidInput(format!(
                "table for d = {d} needs {} entries, got {}",
                1u64 << d,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ShapError::NonFinite(format!("table entry {i} is {}", values[i])));
        }
        Ok(TabulatedGame { d, values })
    }

    pub fn from_map(d: usize, table: &HashMap<u64, f64>) -> Result<Self> {
        check_enumerable(d)?;
        let values = (0..1u64 << d)
            .map(|i| {
                table
                    .get(&i)
                    .copied()
                    .ok_or_else(|| ShapError::InvalidInput(format!("table is missing coalition index {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(d, values)
    }

    /// Tabulates any game by evaluating it on every coalition.
    pub fn tabulate<G: CooperativeGame + ?Sized>(game: &G) -> Result<Self> {
        let d = game.num_features();
        check_enumerable(d)?;
        let values = crate::coalition::all_coalitions(d)?
            .map(|z| game.evaluate(&z))
            .collect();
        Self::from_values(d, values)
    }

    /// Parses lines of `<bitstring> <value>` (feature 0 leftmost). Blank lines
    /// and lines starting with `#` are ignored; every coalition must appear
    /// exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = None;
        let mut table = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| ShapError::InvalidInput(format!("line {}: {msg}", lineno + 1));
            let mut parts = line.split_whitespace();
            let (bits, value) = match (parts.next(), parts.next(), parts.next()) {
                (Some(b), Some(v), None) => (b, v),
                _ => return Err(at("expected `<bitstring> <value>`".into())),
            };
            let z = Coalition::parse_bitstring(bits).map_err(|e| at(e.to_string()))?;
            match d {
                None => {
                    check_enumerable(z.len()).map_err(|e| at(e.to_string()))?;
                    d = Some(z.len());
                }
                Some(d) if d != z.len() => {
                    return Err(at(format!("bitstring has {} bits, expected {d}", z.len())));
                }
                _ => {}
            }
            let value: f64 = value
                .parse()
                .map_err(|_| at(format!("cannot parse value {value:?}")))?;
            let idx = z.to_index()?;
            if table.insert(idx, value).is_some() {
                return Err(at(format!("duplicate coalition {bits}")));
            }
        }
        let d = d.ok_or_else(|| ShapError::InvalidInput("table file has no entries".into()))?;
        Self::from_map(d, &table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.values.iter().enumerate() {
            let z = Coalition::from_index(i as u64, self.d).expect("d within cap");
            out.push_str(&format!("{} {}\n", z.to_bitstring(), v));
        }
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, index: u64) -> f64 {
        self.values[index as usize]
    }
}

impl CooperativeGame for TabulatedGame {
    fn num_features(&self) -> usize {
        self.d
    }

    fn boundary(&self) -> GameBoundary {
        GameBoundary::new(self.values[0], self.values[self.values.len() - 1])
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        let idx = z
            .bits()
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| if b { acc | (1 << i) } else { acc });
        self.values[idx]
    }
}

/// Game defined by a closure; handy for analytic test games.
pub struct FnGame<F> {
    d: usize,
    f: F,
    boundary: GameBoundary,
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> FnGame<F> {
    pub fn new(d: usize, f: F) -> Self {
        let boundary = GameBoundary::new(f(&Coalition::empty(d)), f(&Coalition::full(d)));
        FnGame { d, f, boundary }
    }
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> CooperativeGame for FnGame<F> {
    fn num_features(&self) -> usize {
        self.d
    }

    fn boundary(&self) -> GameBoundary {
        self.boundary
    }

    fn evaluate(&self, z: &Coalition) -> f64 {
        (self.f)(z)
    }
}
