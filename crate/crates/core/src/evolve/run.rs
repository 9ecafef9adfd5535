use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::TaskMatrix;
use crate::init::ramped_half_and_half;
use crate::metrics::{self, MetricError};
use crate::primitives::PrimitiveSet;
use crate::tree::SyntaxTree;

use super::config::{ConfigError, RunConfig};
use super::operators::{
    crossover, hoist_mutation, penalized, point_mutation, subtree_mutation, tournament, Individual,
    MutationParams, Operator,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("{which} data has {found} feature columns, expected {expected}")]
    FeatureCount {
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} data has no rows")]
    Empty(&'static str),
    #[error("{which} data: feature columns and target differ in length")]
    Ragged { which: &'static str },
    #[error("test score: {0}")]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    FitnessReached,
    MaxGenerations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::FitnessReached => "fitness_reached",
            Termination::MaxGenerations => "max_generations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    /// 1 is the initial population.
    pub generation: usize,
    /// Lowest raw MAE on the generation's sample.
    pub best_sample_mae: f64,
    /// Lowest MAE on the whole training set.
    pub best_train_mae: f64,
    pub mean_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub best_tree: SyntaxTree,
    pub best_expression: String,
    pub train_mae: f64,
    pub test_mae: f64,
    pub test_r2: f64,
    pub history: Vec<GenerationStats>,
    pub config: RunConfig,
    pub terminated_by: Termination,
}

impl RunResult {
    pub fn generations_run(&self) -> usize {
        self.history.len()
    }

    /// Result file text: an optional `[run]` section from `header`, the
    /// config echo, the scores and the per-generation history.
    pub fn to_text(&self, header: &[(&str, String)]) -> String {
        let mut s = String::from("# codlag-gp run result\n");
        if !header.is_empty() {
            s.push_str("[run]\n");
            for (k, v) in header {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s.push_str("[config]\n");
        s.push_str(&self.config.to_text());
        s.push_str("[result]\n");
        let _ = writeln!(s, "best_expression = {}", self.best_expression);
        let _ = writeln!(s, "best_size = {}", self.best_tree.size());
        let _ = writeln!(s, "best_depth = {}", self.best_tree.depth());
        let _ = writeln!(s, "train_mae = {}", self.train_mae);
        let _ = writeln!(s, "test_mae = {}", self.test_mae);
        let _ = writeln!(s, "test_r2 = {}", self.test_r2);
        let _ = writeln!(s, "terminated_by = {}", self.terminated_by.as_str());
        let _ = writeln!(s, "generations_run = {}", self.generations_run());
        s.push_str("[history]\n");
        s.push_str("# generation,best_sample_mae,best_train_mae,mean_size\n");
        for h in &self.history {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                h.generation, h.best_sample_mae, h.best_train_mae, h.mean_size
            );
        }
        s
    }
}

/// Scores `trees` on the training data. Fitness is MAE over `sample` (all
/// rows when `None`); `train_mae` always covers every row.
///
/// Each tree is evaluated independently, so the result does not depend on
/// how the work is scheduled.
pub fn evaluate(
    trees: Vec<SyntaxTree>,
    train: &TaskMatrix,
    sample: Option<&[usize]>,
    parsimony: f64,
) -> Vec<Individual> {
    trees
        .into_par_iter()
        .map(|tree| {
            let predicted = tree
                .eval_columns(&train.features)
                .expect("trees only reference task features");
            let train_mae = metrics::mae(&train.target, &predicted);
            let raw_fitness = match sample {
                None => train_mae,
                Some(rows) => metrics::mae_at(&train.target, &predicted, rows),
            };
            let penalized_fitness = penalized(raw_fitness, tree.size(), parsimony);
            Individual {
                tree,
                raw_fitness,
                penalized_fitness,
                train_mae,
            }
        })
        .collect()
}

/// Chooses an operator for one offspring from the probability bands.
pub fn pick_operator<R: Rng + ?Sized>(config: &RunConfig, rng: &mut R) -> Operator {
    let u: f64 = rng.gen();
    let mut edge = config.p_crossover;
    if u < edge {
        return Operator::Crossover;
    }
    edge += config.p_subtree_mutation;
    if u < edge {
        return Operator::SubtreeMutation;
    }
    edge += config.p_hoist_mutation;
    if u < edge {
        return Operator::HoistMutation;
    }
    edge += config.p_point_mutation;
    if u < edge {
        return Operator::PointMutation;
    }
    Operator::Reproduction
}

/// Produces `population_size` offspring from an evaluated population. This
/// is the only phase that consumes the run's random stream besides
/// initialization and sampling.
pub fn breed<R: Rng + ?Sized>(
    pop: &[Individual],
    config: &RunConfig,
    primitives: &PrimitiveSet,
    rng: &mut R,
) -> Vec<(Operator, SyntaxTree)> {
    let params = MutationParams {
        primitives,
        const_range: config.const_range,
        init_depth: config.init_depth,
        internal_bias: config.internal_bias,
        node_cap: config.node_cap,
        point_replace_rate: config.point_replace_rate,
    };
    let k = config.tournament_size;
    (0..config.population_size)
        .map(|_| {
            let op = pick_operator(config, rng);
            let winner = &pop[tournament(pop, k, rng)].tree;
            let child = match op {
                Operator::Crossover => {
                    let donor = &pop[tournament(pop, k, rng)].tree;
                    crossover(winner, donor, config.internal_bias, config.node_cap, rng)
                }
                Operator::SubtreeMutation => subtree_mutation(winner, &params, rng),
                Operator::HoistMutation => hoist_mutation(winner, config.internal_bias, rng),
                Operator::PointMutation => point_mutation(winner, &params, rng),
                Operator::Reproduction => winner.clone(),
            };
            (op, child)
        })
        .collect()
}

/// Rows scored this generation: `ceil(max_samples * n)` drawn without
/// replacement, or every row when that is all of them.
pub fn draw_sample<R: Rng + ?Sized>(
    n_rows: usize,
    max_samples: f64,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let k = ((max_samples * n_rows as f64).ceil() as usize).clamp(1, n_rows);
    if k == n_rows {
        return None;
    }
    let mut rows = index::sample(rng, n_rows, k).into_vec();
    rows.sort_unstable();
    Some(rows)
}

/// Breeds and scores the next generation.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &[Individual],
    config: &RunConfig,
    primitives: &PrimitiveSet,
    train: &TaskMatrix,
    sample: Option<&[usize]>,
    rng: &mut R,
) -> Vec<Individual> {
    let offspring = breed(pop, config, primitives, rng)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    evaluate(offspring, train, sample, config.parsimony_coefficient)
}

fn check_matrix(which: &'static str, m: &TaskMatrix, n_features: usize) -> Result<(), RunError> {
    if m.n_features() != n_features {
        return Err(RunError::FeatureCount {
            which,
            expected: n_features,
            found: m.n_features(),
        });
    }
    if m.n_rows() == 0 {
        return Err(RunError::Empty(which));
    }
    if m.features.iter().any(|c| c.len() != m.n_rows()) {
        return Err(RunError::Ragged { which });
    }
    Ok(())
}

fn generation_stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    GenerationStats {
        generation,
        best_sample_mae: pop
            .iter()
            .map(|i| i.raw_fitness)
            .fold(f64::INFINITY, f64::min),
        best_train_mae: pop
            .iter()
            .map(|i| i.train_mae)
            .fold(f64::INFINITY, f64::min),
        mean_size: pop.iter().map(|i| i.size() as f64).sum::<f64>() / pop.len() as f64,
    }
}

/// Index of the lowest full-training MAE; ties go to the smaller tree,
/// then the lower index.
fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate().skip(1) {
        let b = &pop[best];
        if ind.train_mae < b.train_mae || (ind.train_mae == b.train_mae && ind.size() < b.size()) {
            best = i;
        }
    }
    best
}

/// Runs one seeded evolution with `n_features` taken from `train`.
pub fn run(
    config: &RunConfig,
    train: &TaskMatrix,
    test: &TaskMatrix,
) -> Result<RunResult, RunError> {
    run_with_features(config, train, test, train.n_features())
}

/// As [`run`], checking both matrices have `n_features` columns.
pub fn run_with_features(
    config: &RunConfig,
    train: &TaskMatrix,
    test: &TaskMatrix,
    n_features: usize,
) -> Result<RunResult, RunError> {
    config.validate()?;
    check_matrix("training", train, n_features)?;
    check_matrix("test", test, n_features)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let primitives = PrimitiveSet::full(n_features);
    let mut trees: Vec<SyntaxTree> = ramped_half_and_half(
        config.population_size,
        config.init_depth,
        &primitives,
        &config.const_range,
        &mut rng,
    )
    .into_iter()
    .map(|s| s.tree)
    .collect();

    let mut history = Vec::new();
    let mut terminated_by = Termination::MaxGenerations;
    let mut pop: Vec<Individual> = Vec::new();
    for generation in 1..=config.generations {
        if generation > 1 {
            trees = breed(&pop, config, &primitives, &mut rng)
                .into_iter()
                .map(|(_, t)| t)
                .collect();
        }
        let sample = draw_sample(train.n_rows(), config.max_samples, &mut rng);
        pop = evaluate(
            std::mem::take(&mut trees),
            train,
            sample.as_deref(),
            config.parsimony_coefficient,
        );
        history.push(generation_stats(generation, &pop));
        if pop
            .iter()
            .any(|i| i.raw_fitness <= config.stopping_criteria)
        {
            terminated_by = Termination::FitnessReached;
            break;
        }
    }

    let best = &pop[best_index(&pop)];
    let predicted = best
        .tree
        .eval_columns(&test.features)
        .expect("trees only reference task features");
    let test_r2 = metrics::r2(&test.target, &predicted)?;
    let test_mae = metrics::mae(&test.target, &predicted);
    Ok(RunResult {
        best_expression: best.tree.to_text(),
        best_tree: best.tree.clone(),
        train_mae: best.train_mae,
        test_mae,
        test_r2,
        history,
        config: config.clone(),
        terminated_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// y = x0 * x1 + x2 with a little deterministic wobble.
    pub(crate) fn toy(n: usize, offset: usize) -> TaskMatrix {
        let f = |i: usize, c: usize| (((i + offset) * (7 + 3 * c)) % 97) as f64 / 10.0 + 1.0;
        let features: Vec<Vec<f64>> = (0..3).map(|c| (0..n).map(|i| f(i, c)).collect()).collect();
        let target = (0..n)
            .map(|i| features[0][i] * features[1][i] + features[2][i] + 0.01 * ((i % 5) as f64))
            .collect();
        TaskMatrix { features, target }
    }

    fn small_config() -> RunConfig {
        RunConfig {
            population_size: 40,
            generations: 8,
            tournament_size: 5,
            init_depth: crate::init::DepthRange::new(1, 4).unwrap(),
            const_range: crate::primitives::ConstRange::new(-2.0, 2.0).unwrap(),
            stopping_criteria: 0.0,
            rng_seed: 11,
            ..RunConfig::default()
        }
    }

    #[test]
    fn operator_band_frequencies() {
        let config = RunConfig {
            p_crossover: 0.7,
            p_subtree_mutation: 0.1,
            p_hoist_mutation: 0.1,
            p_point_mutation: 0.05,
            ..RunConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts: HashMap<Operator, usize> = HashMap::new();
        let n = 10_000;
        for _ in 0..n {
            *counts.entry(pick_operator(&config, &mut rng)).or_default() += 1;
        }
        let freq = |op| counts.get(&op).copied().unwrap_or(0) as f64 / n as f64;
        assert!((freq(Operator::Crossover) - 0.7).abs() < 0.02);
        assert!((freq(Operator::SubtreeMutation) - 0.1).abs() < 0.02);
        assert!((freq(Operator::HoistMutation) - 0.1).abs() < 0.02);
        assert!((freq(Operator::PointMutation) - 0.05).abs() < 0.02);
        assert!((freq(Operator::Reproduction) - 0.05).abs() < 0.02);
    }

    #[test]
    fn pure_reproduction_copies_winners() {
        let train = toy(60, 0);
        let config = RunConfig {
            p_crossover: 0.0,
            p_subtree_mutation: 0.0,
            p_hoist_mutation: 0.0,
            p_point_mutation: 0.0,
            ..small_config()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = PrimitiveSet::full(3);
        let trees = ramped_half_and_half(40, config.init_depth, &ps, &config.const_range, &mut rng)
            .into_iter()
            .map(|s| s.tree)
            .collect();
        let pop = evaluate(trees, &train, None, config.parsimony_coefficient);
        let next = breed(&pop, &config, &ps, &mut rng);
        assert_eq!(next.len(), 40);
        for (op, tree) in next {
            assert_eq!(op, Operator::Reproduction);
            assert!(pop.iter().any(|i| i.tree == tree));
        }
    }

    #[test]
    fn crossover_only_bands() {
        let config = RunConfig {
            p_crossover: 1.0,
            p_subtree_mutation: 0.0,
            p_hoist_mutation: 0.0,
            p_point_mutation: 0.0,
            ..small_config()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| pick_operator(&config, &mut rng) == Operator::Crossover));
    }

    #[test]
    fn sample_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(draw_sample(100, 1.0, &mut rng), None);
        let s = draw_sample(9548, 0.9, &mut rng).unwrap();
        assert_eq!(s.len(), 8594);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(draw_sample(10, 0.01, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn infinite_stopping_halts_first_generation() {
        let config = RunConfig {
            stopping_criteria: f64::INFINITY,
            ..small_config()
        };
        let r = run(&config, &toy(80, 0), &toy(30, 500)).unwrap();
        assert_eq!(r.terminated_by, Termination::FitnessReached);
        assert_eq!(r.generations_run(), 1);
    }

    #[test]
    fn zero_stopping_runs_full_budget() {
        let r = run(&small_config(), &toy(80, 0), &toy(30, 500)).unwrap();
        assert_eq!(r.terminated_by, Termination::MaxGenerations);
        assert_eq!(r.history.len(), 8);
        assert!(r
            .history
            .iter()
            .enumerate()
            .all(|(i, h)| h.generation == i + 1));
    }

    #[test]
    fn deterministic() {
        let (train, test) = (toy(80, 0), toy(30, 500));
        let a = run(&small_config(), &train, &test).unwrap();
        let b = run(&small_config(), &train, &test).unwrap();
        assert_eq!(a.to_text(&[]), b.to_text(&[]));
        let c = run(
            &RunConfig {
                rng_seed: 12,
                ..small_config()
            },
            &train,
            &test,
        )
        .unwrap();
        assert_ne!(a.to_text(&[]), c.to_text(&[]));
    }

    #[test]
    fn population_size_constant_and_valid() {
        let train = toy(50, 0);
        let config = small_config();
        let ps = PrimitiveSet::full(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trees = ramped_half_and_half(40, config.init_depth, &ps, &config.const_range, &mut rng)
            .into_iter()
            .map(|s| s.tree)
            .collect();
        let mut pop = evaluate(trees, &train, None, config.parsimony_coefficient);
        for _ in 0..10 {
            let sample = draw_sample(train.n_rows(), 0.7, &mut rng);
            pop = evolve_generation(&pop, &config, &ps, &train, sample.as_deref(), &mut rng);
            assert_eq!(pop.len(), 40);
            for ind in &pop {
                assert!(ind.tree.validate(config.node_cap).is_ok());
                assert!(ind.penalized_fitness >= ind.raw_fitness);
            }
        }
    }

    #[test]
    fn feature_mismatch_rejected() {
        let train = toy(50, 0);
        let mut test = toy(10, 0);
        test.features.pop();
        assert!(matches!(
            run(&small_config(), &train, &test),
            Err(RunError::FeatureCount { which: "test", .. })
        ));
        assert!(matches!(
            run_with_features(&small_config(), &train, &train, 17),
            Err(RunError::FeatureCount {
                which: "training",
                ..
            })
        ));
    }

    #[test]
    fn result_text_shape() {
        let r = run(&small_config(), &toy(80, 0), &toy(30, 500)).unwrap();
        let text = r.to_text(&[("task", "toy".to_string())]);
        assert!(text.ends_with('\n'));
        assert!(text.contains("terminated_by = max_generations"));
        assert_eq!(RunConfig::from_text(&text).unwrap(), r.config);
        let line = text
            .lines()
            .find_map(|l| l.strip_prefix("best_expression = "))
            .unwrap();
        assert_eq!(crate::tree::parse_text(line).unwrap(), r.best_tree);
    }

    #[test]
    fn learns_toy_target() {
        let config = RunConfig {
            population_size: 200,
            generations: 30,
            parsimony_coefficient: 0.001,
            ..small_config()
        };
        let r = run(&config, &toy(200, 0), &toy(80, 1000)).unwrap();
        assert!(r.test_r2 > 0.9, "test r2 {}", r.test_r2);
    }
}
