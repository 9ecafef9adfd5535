use std::fmt::Write as _;

use crate::init::DepthRange;
use crate::kv::{self, KvError};
use crate::primitives::ConstRange;
use crate::tree::{DEFAULT_INTERNAL_BIAS, DEFAULT_NODE_CAP};

/// Default per-node replacement probability for point mutation.
pub const DEFAULT_POINT_REPLACE_RATE: f64 = 0.05;

/// One concrete hyperparameter assignment for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub init_depth: DepthRange,
    pub p_crossover: f64,
    pub p_subtree_mutation: f64,
    pub p_hoist_mutation: f64,
    pub p_point_mutation: f64,
    /// A run stops once any individual's raw MAE is at or below this.
    pub stopping_criteria: f64,
    /// Fraction of the training rows scored each generation.
    pub max_samples: f64,
    pub const_range: ConstRange,
    pub parsimony_coefficient: f64,
    pub rng_seed: u64,
    pub point_replace_rate: f64,
    pub internal_bias: f64,
    pub node_cap: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Text(#[from] KvError),
    #[error("parameter list: {0}")]
    ParameterList(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            population_size: 100,
            generations: 300,
            tournament_size: 20,
            init_depth: DepthRange { lo: 3, hi: 12 },
            p_crossover: 0.75,
            p_subtree_mutation: 0.05,
            p_hoist_mutation: 0.05,
            p_point_mutation: 0.05,
            stopping_criteria: 1e-6,
            max_samples: 0.9,
            const_range: ConstRange {
                lo: -100.0,
                hi: 100.0,
            },
            parsimony_coefficient: 0.01,
            rng_seed: 0,
            point_replace_rate: DEFAULT_POINT_REPLACE_RATE,
            internal_bias: DEFAULT_INTERNAL_BIAS,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

fn probability(field: &'static str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("{p} is not a probability")))
    }
}

impl RunConfig {
    /// Probability of copying a tournament winner unchanged.
    pub fn p_reproduction(&self) -> f64 {
        1.0 - self.p_crossover
            - self.p_subtree_mutation
            - self.p_hoist_mutation
            - self.p_point_mutation
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size < 2 {
            return Err(invalid("population_size", "must be at least 2"));
        }
        if self.generations < 1 {
            return Err(invalid("generations", "must be at least 1"));
        }
        if self.tournament_size < 1 || self.tournament_size > self.population_size {
            return Err(invalid(
                "tournament_size",
                format!("must be in 1..={}", self.population_size),
            ));
        }
        if self.init_depth.lo > self.init_depth.hi {
            return Err(invalid("init_depth", "lower bound exceeds upper bound"));
        }
        probability("p_crossover", self.p_crossover)?;
        probability("p_subtree_mutation", self.p_subtree_mutation)?;
        probability("p_hoist_mutation", self.p_hoist_mutation)?;
        probability("p_point_mutation", self.p_point_mutation)?;
        let sum = self.p_crossover
            + self.p_subtree_mutation
            + self.p_hoist_mutation
            + self.p_point_mutation;
        if sum > 1.0 + 1e-12 {
            return Err(invalid(
                "p_crossover",
                format!("operator probabilities sum to {sum}, above 1"),
            ));
        }
        if self.stopping_criteria.is_nan() || self.stopping_criteria < 0.0 {
            return Err(invalid("stopping_criteria", "must be non-negative"));
        }
        if !(self.max_samples > 0.0 && self.max_samples <= 1.0) {
            return Err(invalid("max_samples", "must be in (0, 1]"));
        }
        if ConstRange::new(self.const_range.lo, self.const_range.hi).is_none() {
            return Err(invalid("const_range", "must be finite with lo <= hi"));
        }
        if !(self.parsimony_coefficient >= 0.0 && self.parsimony_coefficient.is_finite()) {
            return Err(invalid(
                "parsimony_coefficient",
                "must be finite and non-negative",
            ));
        }
        probability("point_replace_rate", self.point_replace_rate)?;
        probability("internal_bias", self.internal_bias)?;
        if self.node_cap < 1 {
            return Err(invalid("node_cap", "must be positive"));
        }
        Ok(())
    }

    /// Renders the config as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "population_size = {}", self.population_size);
        let _ = writeln!(s, "generations = {}", self.generations);
        let _ = writeln!(s, "tournament_size = {}", self.tournament_size);
        let _ = writeln!(
            s,
            "init_depth = {}, {}",
            self.init_depth.lo, self.init_depth.hi
        );
        let _ = writeln!(s, "p_crossover = {}", self.p_crossover);
        let _ = writeln!(s, "p_subtree_mutation = {}", self.p_subtree_mutation);
        let _ = writeln!(s, "p_hoist_mutation = {}", self.p_hoist_mutation);
        let _ = writeln!(s, "p_point_mutation = {}", self.p_point_mutation);
        let _ = writeln!(s, "stopping_criteria = {}", self.stopping_criteria);
        let _ = writeln!(s, "max_samples = {}", self.max_samples);
        let _ = writeln!(
            s,
            "const_range = {}, {}",
            self.const_range.lo, self.const_range.hi
        );
        let _ = writeln!(s, "parsimony_coefficient = {}", self.parsimony_coefficient);
        let _ = writeln!(s, "rng_seed = {}", self.rng_seed);
        let _ = writeln!(s, "point_replace_rate = {}", self.point_replace_rate);
        let _ = writeln!(s, "internal_bias = {}", self.internal_bias);
        let _ = writeln!(s, "node_cap = {}", self.node_cap);
        s
    }

    /// Parses `key = value` text; keys left out keep their defaults.
    ///
    /// Reads the untitled leading part and any `[config]` section, so a run
    /// result file is itself a valid config file.
    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for e in kv::parse(text, &["config"])? {
            match e.key.as_str() {
                "population_size" => cfg.population_size = e.parse()?,
                "generations" => cfg.generations = e.parse()?,
                "tournament_size" => cfg.tournament_size = e.parse()?,
                "init_depth" => {
                    let (lo, hi) = e.parse_pair()?;
                    cfg.init_depth = DepthRange::new(lo, hi).ok_or_else(|| e.invalid("lo > hi"))?;
                }
                "p_crossover" => cfg.p_crossover = e.parse()?,
                "p_subtree_mutation" => cfg.p_subtree_mutation = e.parse()?,
                "p_hoist_mutation" => cfg.p_hoist_mutation = e.parse()?,
                "p_point_mutation" => cfg.p_point_mutation = e.parse()?,
                "stopping_criteria" => cfg.stopping_criteria = e.parse()?,
                "max_samples" => cfg.max_samples = e.parse()?,
                "const_range" => {
                    let (lo, hi) = e.parse_pair()?;
                    cfg.const_range =
                        ConstRange::new(lo, hi).ok_or_else(|| e.invalid("need finite lo <= hi"))?;
                }
                "parsimony_coefficient" => cfg.parsimony_coefficient = e.parse()?,
                "rng_seed" => cfg.rng_seed = e.parse()?,
                "point_replace_rate" => cfg.point_replace_rate = e.parse()?,
                "internal_bias" => cfg.internal_bias = e.parse()?,
                "node_cap" => cfg.node_cap = e.parse()?,
                _ => return Err(e.unknown().into()),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the bracketed twelve-entry list
    /// `[population, generations, tournament, (depth lo, depth hi), p_cx,
    /// p_subtree, p_hoist, p_point, stopping, max_samples, (const lo,
    /// const hi), parsimony]`.
    pub fn from_parameter_list(list: &str) -> Result<RunConfig, ConfigError> {
        let bad = |m: &str| ConfigError::ParameterList(m.to_string());
        let inner = list
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| bad("expected [ ... ]"))?;
        let mut items: Vec<String> = Vec::new();
        let mut depth = 0;
        let mut current = String::new();
        for ch in inner.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    items.push(current.trim().to_string());
                    current.clear();
                    continue;
                }
                _ => {}
            }
            current.push(ch);
        }
        items.push(current.trim().to_string());
        if items.len() != 12 {
            return Err(bad(&format!("expected 12 entries, found {}", items.len())));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("`{s}` is not a number")))
        };
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad(&format!("`{s}` is not an integer")))
        };
        let pair = |s: &str| -> Result<(String, String), ConfigError> {
            let body = s.trim().trim_start_matches('(').trim_end_matches(')');
            let (a, b) = body
                .split_once(',')
                .ok_or_else(|| bad(&format!("`{s}` is not a pair")))?;
            Ok((a.to_string(), b.to_string()))
        };
        let (dlo, dhi) = pair(&items[3])?;
        let (clo, chi) = pair(&items[10])?;
        let cfg = RunConfig {
            population_size: int(&items[0])?,
            generations: int(&items[1])?,
            tournament_size: int(&items[2])?,
            init_depth: DepthRange::new(int(&dlo)?, int(&dhi)?)
                .ok_or_else(|| bad("depth lo > hi"))?,
            p_crossover: num(&items[4])?,
            p_subtree_mutation: num(&items[5])?,
            p_hoist_mutation: num(&items[6])?,
            p_point_mutation: num(&items[7])?,
            stopping_criteria: num(&items[8])?,
            max_samples: num(&items[9])?,
            const_range: ConstRange::new(num(&clo)?, num(&chi)?)
                .ok_or_else(|| bad("const lo > hi"))?,
            parsimony_coefficient: num(&items[11])?,
            ..RunConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig {
            rng_seed: 77,
            const_range: ConstRange {
                lo: -46.829,
                hi: 57.09,
            },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn partial_text_uses_defaults() {
        let cfg = RunConfig::from_text("generations = 5\n# comment\n").unwrap();
        assert_eq!(cfg.generations, 5);
        assert_eq!(cfg.population_size, RunConfig::default().population_size);
    }

    #[test]
    fn text_errors() {
        assert!(matches!(
            RunConfig::from_text("colour = 3"),
            Err(ConfigError::Text(KvError::UnknownKey { .. }))
        ));
        assert!(RunConfig::from_text("p_crossover = 0.99\np_point_mutation = 0.1").is_err());
        assert!(RunConfig::from_text("init_depth = 7, 3").is_err());
        assert!(RunConfig::from_text("tournament_size = 500").is_err());
    }

    #[test]
    fn parameter_lists() {
        let first = RunConfig::from_parameter_list(
            "[68, 995, 8, (5, 8), 0.769, 0.0516, 0.0462, 0.096, 0.000434, 0.7795, (-77.601, 44.708), 0.82]",
        )
        .unwrap();
        assert_eq!(first.population_size, 68);
        assert_eq!(first.init_depth, DepthRange { lo: 5, hi: 8 });
        assert_eq!(
            first.const_range,
            ConstRange {
                lo: -77.601,
                hi: 44.708
            }
        );
        assert!((first.p_reproduction() - 0.0372).abs() < 1e-12);

        let second = RunConfig::from_parameter_list(
            "[100, 838, 20, (3, 12), 0.737, 0.097, 0.093, 0.0334, 0.000552, 0.986, (-46.829, 57.09), 0.13]",
        )
        .unwrap();
        assert!((second.p_reproduction() - 0.0396).abs() < 1e-12);

        assert!(RunConfig::from_parameter_list("[1, 2]").is_err());
    }
}
