use std::time::Instant;

use crate::coalition::{check_enumerable, ln_binomial, Coalition};
use crate::config::{AttributionEstimate, Execution};
use crate::error::{Result, ShapError};
use crate::games::CooperativeGame;
use crate::parallel::map_indices;

use super::report::{range_of, EstimatorKind, ExplanationReport, IterationTrace};

/// Exact Shapley values by enumerating all `2^d` coalitions once.
pub fn exact_shapley<G: CooperativeGame + ?Sized>(game: &G) -> Result<Vec<f64>> {
    exact_shapley_with(game, Execution::default())
}

pub fn exact_shapley_with<G: CooperativeGame + ?Sized>(game: &G, execution: Execution) -> Result<Vec<f64>> {
    let d = game.num_features();
    check_enumerable(d)?;
    if d == 0 {
        return Err(ShapError::InvalidInput("a game needs at least one feature".into()));
    }
    let values = map_indices(1 << d, execution, |idx| {
        let z = Coalition::from_index(idx as u64, d).expect("d checked against cap");
        game.evaluate(&z)
    });
    shapley_from_table(d, &values)
}

/// `φ_i = Σ_{S ∌ i} |S|! (d-|S|-1)! / d! · (v(S ∪ {i}) - v(S))` over a table
/// indexed by coalition bit pattern.
pub fn shapley_from_table(d: usize, values: &[f64]) -> Result<Vec<f64>> {
    check_enumerable(d)?;
    if values.len() != 1 << d {
        return Err(ShapError::InvalidInput(format!(
            "value table for d = {d} needs {} entries, got {}",
            1u64 << d,
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ShapError::NonFinite(format!("game value at coalition {i} is {}", values[i])));
    }
    // weight of a coalition of size s not containing i: 1 / (d C(d-1, s))
    let weights: Vec<f64> = (0..d)
        .map(|s| (-(d as f64).ln() - ln_binomial(d - 1, s)).exp())
        .collect();
    let mut phi = vec![0.0; d];
    for (idx, &v) in values.iter().enumerate() {
        let size = idx.count_ones() as usize;
        if size == d {
            continue;
        }
        let w = weights[size];
        for (i, p) in phi.iter_mut().enumerate() {
            if idx & (1 << i) == 0 {
                *p += w * (values[idx | (1 << i)] - v);
            }
        }
    }
    if let Some(i) = phi.iter().position(|p| !p.is_finite()) {
        return Err(ShapError::NonFinite(format!("attribution of feature {i} overflowed")));
    }
    Ok(phi)
}

/// [`exact_shapley`] wrapped in a report.
pub fn exact_report<G: CooperativeGame + ?Sized>(game: &G, execution: Execution) -> Result<ExplanationReport> {
    let start = Instant::now();
    let phi = exact_shapley_with(game, execution)?;
    let d = phi.len();
    let mut estimate = AttributionEstimate::zeros(d);
    estimate.beta = phi.clone();
    estimate.converged = true;
    Ok(ExplanationReport {
        estimator: EstimatorKind::Exact,
        range: range_of(&phi),
        attributions: phi,
        boundary: game.boundary(),
        iterations: 0,
        evaluations: 1 << d,
        converged: true,
        max_sigma: None,
        rejected_batches: 0,
        jitter_applied: false,
        millis: start.elapsed().as_secs_f64() * 1e3,
        estimate,
        trace: IterationTrace::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{FnGame, TabulatedGame};
    use approx::assert_relative_eq;

    fn worked_game() -> TabulatedGame {
        // index bits: feature 0 -> 1, feature 1 -> 2, feature 2 -> 4
        TabulatedGame::from_values(3, vec![0.0, 1.0, 2.0, 4.0, 3.0, 5.0, 6.0, 9.0]).unwrap()
    }

    /// Shapley values by averaging marginal contributions over all orderings.
    fn permutation_oracle(d: usize, v: impl Fn(usize) -> f64) -> Vec<f64> {
        fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut p in permutations(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let perms = permutations((0..d).collect());
        let mut phi = vec![0.0; d];
        for p in &perms {
            let mut idx = 0usize;
            for &i in p {
                let before = v(idx);
                idx |= 1 << i;
                phi[i] += v(idx) - before;
            }
        }
        phi.iter().map(|x| x / perms.len() as f64).collect()
    }

    #[test]
    fn worked_example() {
        let phi = exact_shapley(&worked_game()).unwrap();
        let oracle = permutation_oracle(3, |i| worked_game().values()[i]);
        for ((a, b), c) in phi.iter().zip(&oracle).zip([2.0, 3.0, 4.0]) {
            assert_relative_eq!(*a, c, epsilon = 1e-12);
            assert_relative_eq!(*b, c, epsilon = 1e-12);
        }
        assert_relative_eq!(phi.iter().sum::<f64>(), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn additive_game() {
        let w = [0.5, -2.0, 3.0, 1.25];
        let game = FnGame::new(4, move |z: &Coalition| z.dot(&w));
        let phi = exact_shapley(&game).unwrap();
        for (a, b) in phi.iter().zip(w) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_game_is_null() {
        let game = FnGame::new(5, |_| 3.0);
        assert!(exact_shapley(&game).unwrap().iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn matches_permutation_oracle_on_irregular_game() {
        let values: Vec<f64> = (0..32).map(|i: u32| ((i * 37 % 11) as f64).sqrt() - (i as f64) * 0.1).collect();
        let game = TabulatedGame::from_values(5, values.clone()).unwrap();
        let phi = exact_shapley(&game).unwrap();
        let oracle = permutation_oracle(5, |i| values[i]);
        for (a, b) in phi.iter().zip(oracle) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn over_cap_rejected() {
        let game = FnGame::new(21, |_| 0.0);
        assert!(matches!(exact_shapley(&game), Err(ShapError::EnumerationCap { .. })));
    }

    #[test]
    fn report_counts_every_coalition() {
        let r = exact_report(&worked_game(), Execution::Sequential).unwrap();
        assert_eq!(r.evaluations, 8);
        assert!(r.efficiency_gap() < 1e-12);
    }

    #[test]
    fn overflowing_attribution_is_an_error() {
        let game = TabulatedGame::from_values(2, vec![-1e308, 1e308, 1e308, 1e308]).unwrap();
        assert!(matches!(exact_shapley(&game), Err(ShapError::NonFinite(_))));
    }
}
