//! Random hyperparameter search over uniform parameter ranges.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::TaskData;
use crate::evolve::{self, ConfigError, RunConfig, RunResult};
use crate::init::DepthRange;
use crate::kv;
use crate::primitives::ConstRange;

/// Attempts at drawing mutation coefficients that fit beside the crossover
/// coefficient before falling back to their lower bounds.
const MUTATION_DRAWS: usize = 10_000;

/// Inclusive `(lower, upper)` bounds for every sampled field.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRanges {
    pub population_size: (usize, usize),
    pub generations: (usize, usize),
    pub tournament_size: (usize, usize),
    /// Bounds for the lower end of the initial depth range.
    pub init_depth_lo: (usize, usize),
    /// Bounds for the upper end of the initial depth range.
    pub init_depth_hi: (usize, usize),
    pub p_crossover: (f64, f64),
    pub p_subtree_mutation: (f64, f64),
    pub p_hoist_mutation: (f64, f64),
    pub p_point_mutation: (f64, f64),
    pub stopping_criteria: (f64, f64),
    /// As a fraction, not a percentage.
    pub max_samples: (f64, f64),
    /// Both ends of a run's constant range are drawn from here.
    pub const_range: (f64, f64),
    pub parsimony_coefficient: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Torque-task bounds.
    Table4,
    /// Fuel-flow-task bounds.
    Table6,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table4" => Ok(Preset::Table4),
            "table6" => Ok(Preset::Table6),
            other => Err(format!(
                "unknown preset `{other}` (expected table4 or table6)"
            )),
        }
    }
}

impl Preset {
    pub fn ranges(self) -> ParamRanges {
        match self {
            Preset::Table4 => ParamRanges::table4(),
            Preset::Table6 => ParamRanges::table6(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table4 => "table4",
            Preset::Table6 => "table6",
        }
    }
}

impl ParamRanges {
    pub fn table4() -> ParamRanges {
        ParamRanges {
            population_size: (50, 100),
            generations: (100, 1000),
            tournament_size: (5, 30),
            init_depth_lo: (3, 7),
            init_depth_hi: (6, 12),
            p_crossover: (0.7, 1.0),
            p_subtree_mutation: (0.01, 0.1),
            p_hoist_mutation: (0.01, 0.1),
            p_point_mutation: (0.01, 0.1),
            stopping_criteria: (1e-6, 1e-3),
            max_samples: (0.70, 1.0),
            const_range: (-100.0, 100.0),
            parsimony_coefficient: (0.1, 1.0),
        }
    }

    pub fn table6() -> ParamRanges {
        ParamRanges {
            population_size: (50, 500),
            generations: (100, 300),
            tournament_size: (5, 50),
            max_samples: (0.90, 1.0),
            const_range: (-0.1, 0.1),
            parsimony_coefficient: (0.0001, 0.01),
            ..ParamRanges::table4()
        }
    }

    /// Every bound pair is ordered, probabilities are probabilities, and a
    /// valid config exists inside the bounds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ConfigError::Invalid {
                field,
                reason: reason.to_string(),
            })
        };
        let ints = [
            ("population_size", self.population_size),
            ("generations", self.generations),
            ("tournament_size", self.tournament_size),
            ("init_depth_lo", self.init_depth_lo),
            ("init_depth_hi", self.init_depth_hi),
        ];
        for (field, (lo, hi)) in ints {
            if lo > hi {
                return bad(field, "lower bound above upper bound");
            }
        }
        let reals = [
            ("p_crossover", self.p_crossover),
            ("p_subtree_mutation", self.p_subtree_mutation),
            ("p_hoist_mutation", self.p_hoist_mutation),
            ("p_point_mutation", self.p_point_mutation),
            ("stopping_criteria", self.stopping_criteria),
            ("max_samples", self.max_samples),
            ("const_range", self.const_range),
            ("parsimony_coefficient", self.parsimony_coefficient),
        ];
        for (field, (lo, hi)) in reals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(field, "bounds must be finite with lower <= upper");
            }
        }
        for (field, (lo, hi)) in &reals[..4] {
            if *lo < 0.0 || *hi > 1.0 {
                return bad(field, "probability bounds must lie in [0, 1]");
            }
        }
        if self.p_crossover.0 + self.min_mutation_sum() > 1.0 {
            return bad(
                "p_crossover",
                "lower bounds of the operator probabilities sum above 1",
            );
        }
        if self.population_size.0 < 2 {
            return bad("population_size", "must be at least 2");
        }
        if self.generations.0 < 1 || self.tournament_size.0 < 1 {
            return bad(
                "generations",
                "generations and tournament size must be positive",
            );
        }
        if self.init_depth_lo.0 > self.init_depth_hi.1 {
            return bad("init_depth_lo", "no depth pair with lo <= hi exists");
        }
        if self.stopping_criteria.0 < 0.0 {
            return bad("stopping_criteria", "must be non-negative");
        }
        if !(self.max_samples.0 > 0.0 && self.max_samples.1 <= 1.0) {
            return bad("max_samples", "must lie in (0, 1]");
        }
        if self.parsimony_coefficient.0 < 0.0 {
            return bad("parsimony_coefficient", "must be non-negative");
        }
        Ok(())
    }

    fn min_mutation_sum(&self) -> f64 {
        self.p_subtree_mutation.0 + self.p_hoist_mutation.0 + self.p_point_mutation.0
    }

    /// Whether `cfg` lies inside these bounds and satisfies the config
    /// invariants.
    pub fn admits(&self, cfg: &RunConfig) -> bool {
        let within_u = |v: usize, (lo, hi): (usize, usize)| lo <= v && v <= hi;
        let within = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        cfg.validate().is_ok()
            && within_u(cfg.population_size, self.population_size)
            && within_u(cfg.generations, self.generations)
            && within_u(cfg.tournament_size, self.tournament_size)
            && within_u(cfg.init_depth.lo, self.init_depth_lo)
            && within_u(cfg.init_depth.hi, self.init_depth_hi)
            && within(cfg.p_crossover, self.p_crossover)
            && within(cfg.p_subtree_mutation, self.p_subtree_mutation)
            && within(cfg.p_hoist_mutation, self.p_hoist_mutation)
            && within(cfg.p_point_mutation, self.p_point_mutation)
            && within(cfg.stopping_criteria, self.stopping_criteria)
            && within(cfg.max_samples, self.max_samples)
            && within(cfg.const_range.lo, self.const_range)
            && within(cfg.const_range.hi, self.const_range)
            && within(cfg.parsimony_coefficient, self.parsimony_coefficient)
    }

    /// Parses `key = lower, upper` lines. An optional leading
    /// `preset = table4|table6` supplies defaults for keys left out.
    pub fn from_text(text: &str) -> Result<ParamRanges, ConfigError> {
        let entries = kv::parse(text, &[])?;
        let mut r = ParamRanges::table4();
        if let Some(e) = entries.iter().find(|e| e.key == "preset") {
            r = e.parse::<Preset>()?.ranges();
        }
        for e in &entries {
            match e.key.as_str() {
                "preset" => {}
                "population_size" => r.population_size = e.parse_pair()?,
                "generations" => r.generations = e.parse_pair()?,
                "tournament_size" => r.tournament_size = e.parse_pair()?,
                "init_depth_lo" => r.init_depth_lo = e.parse_pair()?,
                "init_depth_hi" => r.init_depth_hi = e.parse_pair()?,
                "p_crossover" => r.p_crossover = e.parse_pair()?,
                "p_subtree_mutation" => r.p_subtree_mutation = e.parse_pair()?,
                "p_hoist_mutation" => r.p_hoist_mutation = e.parse_pair()?,
                "p_point_mutation" => r.p_point_mutation = e.parse_pair()?,
                "stopping_criteria" => r.stopping_criteria = e.parse_pair()?,
                "max_samples" => r.max_samples = e.parse_pair()?,
                "const_range" => r.const_range = e.parse_pair()?,
                "parsimony_coefficient" => r.parsimony_coefficient = e.parse_pair()?,
                _ => return Err(e.unknown().into()),
            }
        }
        r.validate()?;
        Ok(r)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, lo: String, hi: String| {
            let _ = writeln!(s, "{k} = {lo}, {hi}");
        };
        line(
            "population_size",
            self.population_size.0.to_string(),
            self.population_size.1.to_string(),
        );
        line(
            "generations",
            self.generations.0.to_string(),
            self.generations.1.to_string(),
        );
        line(
            "tournament_size",
            self.tournament_size.0.to_string(),
            self.tournament_size.1.to_string(),
        );
        line(
            "init_depth_lo",
            self.init_depth_lo.0.to_string(),
            self.init_depth_lo.1.to_string(),
        );
        line(
            "init_depth_hi",
            self.init_depth_hi.0.to_string(),
            self.init_depth_hi.1.to_string(),
        );
        for (k, (lo, hi)) in [
            ("p_crossover", self.p_crossover),
            ("p_subtree_mutation", self.p_subtree_mutation),
            ("p_hoist_mutation", self.p_hoist_mutation),
            ("p_point_mutation", self.p_point_mutation),
            ("stopping_criteria", self.stopping_criteria),
            ("max_samples", self.max_samples),
            ("const_range", self.const_range),
            ("parsimony_coefficient", self.parsimony_coefficient),
        ] {
            line(k, lo.to_string(), hi.to_string());
        }
        s
    }
}

fn uniform<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn uniform_int<R: Rng + ?Sized>((lo, hi): (usize, usize), rng: &mut R) -> usize {
    rng.gen_range(lo..=hi)
}

/// Draws one config uniformly within `ranges`; `rng_seed` is left at 0.
///
/// The tournament size is clamped to the population size. Depth pairs with
/// lo > hi are redrawn. The crossover coefficient is drawn from the part of
/// its range that leaves room for the mutation lower bounds, then the
/// mutation coefficients are redrawn until the four sum to at most 1.
pub fn sample_config<R: Rng + ?Sized>(ranges: &ParamRanges, rng: &mut R) -> RunConfig {
    debug_assert!(ranges.validate().is_ok());
    let population_size = uniform_int(ranges.population_size, rng);
    let generations = uniform_int(ranges.generations, rng);
    let tournament_size = uniform_int(ranges.tournament_size, rng).min(population_size);
    let init_depth = loop {
        let lo = uniform_int(ranges.init_depth_lo, rng);
        let hi = uniform_int(ranges.init_depth_hi, rng);
        if let Some(d) = DepthRange::new(lo, hi) {
            break d;
        }
    };
    let cx_hi = ranges.p_crossover.1.min(1.0 - ranges.min_mutation_sum());
    let p_crossover = uniform((ranges.p_crossover.0, cx_hi.max(ranges.p_crossover.0)), rng);
    let budget = 1.0 - p_crossover;
    let mut mutations = (
        ranges.p_subtree_mutation.0,
        ranges.p_hoist_mutation.0,
        ranges.p_point_mutation.0,
    );
    for _ in 0..MUTATION_DRAWS {
        let m = (
            uniform(ranges.p_subtree_mutation, rng),
            uniform(ranges.p_hoist_mutation, rng),
            uniform(ranges.p_point_mutation, rng),
        );
        if m.0 + m.1 + m.2 <= budget {
            mutations = m;
            break;
        }
    }
    let stopping_criteria = uniform(ranges.stopping_criteria, rng);
    let max_samples = uniform(ranges.max_samples, rng);
    let a = uniform(ranges.const_range, rng);
    let b = uniform(ranges.const_range, rng);
    let const_range = ConstRange {
        lo: a.min(b),
        hi: a.max(b),
    };
    let parsimony_coefficient = uniform(ranges.parsimony_coefficient, rng);
    RunConfig {
        population_size,
        generations,
        tournament_size,
        init_depth,
        p_crossover,
        p_subtree_mutation: mutations.0,
        p_hoist_mutation: mutations.1,
        p_point_mutation: mutations.2,
        stopping_criteria,
        max_samples,
        const_range,
        parsimony_coefficient,
        rng_seed: 0,
        ..RunConfig::default()
    }
}

/// Seed for run `i` of a search.
pub fn run_seed(base_seed: u64, i: usize) -> u64 {
    base_seed.wrapping_add(i as u64)
}

/// The config run `i` of a search uses: sampled from a stream seeded with
/// the run's seed, which is also the run's own seed.
pub fn config_for_run(ranges: &ParamRanges, base_seed: u64, i: usize) -> RunConfig {
    let seed = run_seed(base_seed, i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RunConfig {
        rng_seed: seed,
        ..sample_config(ranges, &mut rng)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchEntry {
    pub run_index: usize,
    pub result: RunResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchFailure {
    pub run_index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    /// Sorted by test R² descending, then smaller best tree, then run index.
    pub entries: Vec<SearchEntry>,
    pub failures: Vec<SearchFailure>,
    pub base_seed: u64,
}

fn rank(a: &SearchEntry, b: &SearchEntry) -> Ordering {
    b.result
        .test_r2
        .total_cmp(&a.result.test_r2)
        .then_with(|| a.result.best_tree.size().cmp(&b.result.best_tree.size()))
        .then_with(|| a.run_index.cmp(&b.run_index))
}

impl SearchReport {
    pub fn top(&self, k: usize) -> &[SearchEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// Summary table of every ranked run followed by the top `k` expressions.
    pub fn to_text(&self, k: usize) -> String {
        let mut s = String::from("# codlag-gp search report\n");
        let _ = writeln!(s, "base_seed = {}", self.base_seed);
        let _ = writeln!(s, "runs_ranked = {}", self.entries.len());
        let _ = writeln!(s, "runs_failed = {}", self.failures.len());
        s.push_str("[ranking]\n");
        s.push_str("# rank,run,seed,test_r2,test_mae,train_mae,best_size,terminated_by,population_size,generations\n");
        for (rank, e) in self.entries.iter().enumerate() {
            let r = &e.result;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                rank + 1,
                e.run_index,
                r.config.rng_seed,
                r.test_r2,
                r.test_mae,
                r.train_mae,
                r.best_tree.size(),
                r.terminated_by.as_str(),
                r.config.population_size,
                r.config.generations
            );
        }
        for (rank, e) in self.top(k).iter().enumerate() {
            let _ = writeln!(s, "[top{}]", rank + 1);
            let _ = writeln!(s, "run = {}", e.run_index);
            let _ = writeln!(s, "test_r2 = {}", e.result.test_r2);
            let _ = writeln!(s, "expression = {}", e.result.best_expression);
            s.push_str(&e.result.config.to_text());
        }
        if !self.failures.is_empty() {
            s.push_str("[failures]\n");
            for f in &self.failures {
                let _ = writeln!(s, "run{} = seed {}: {}", f.run_index, f.seed, f.error);
            }
        }
        s
    }
}

/// Runs `n_runs` independently seeded configs (run `i` uses seed
/// `base_seed + i`) and ranks the successful ones by test R².
pub fn random_search(
    n_runs: usize,
    ranges: &ParamRanges,
    data: &TaskData,
    base_seed: u64,
) -> SearchReport {
    random_search_with(n_runs, ranges, base_seed, |cfg| {
        evolve::run(cfg, &data.train, &data.test)
    })
}

/// As [`random_search`] with a caller-supplied run function.
pub fn random_search_with<F>(
    n_runs: usize,
    ranges: &ParamRanges,
    base_seed: u64,
    run: F,
) -> SearchReport
where
    F: Fn(&RunConfig) -> Result<RunResult, evolve::RunError> + Sync,
{
    let outcomes: Vec<(usize, RunConfig, Result<RunResult, evolve::RunError>)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let cfg = config_for_run(ranges, base_seed, i);
            let out = run(&cfg);
            (i, cfg, out)
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (run_index, cfg, out) in outcomes {
        match out {
            Ok(result) => entries.push(SearchEntry { run_index, result }),
            Err(e) => failures.push(SearchFailure {
                run_index,
                seed: cfg.rng_seed,
                error: e.to_string(),
            }),
        }
    }
    entries.sort_by(rank);
    SearchReport {
        entries,
        failures,
        base_seed,
    }
}
