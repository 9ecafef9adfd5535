//! Function and terminal sets.
//!
//! Partial functions are protected so that every tree evaluates to a real
//! number on every finite input. `tan` is the one exception and may return a
//! non-finite value near its poles; callers handle that at the fitness level.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

/// Magnitude at or below which `div` and `log` switch to their protected values.
pub const PROTECTION_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionSymbol {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Abs,
    Log,
    Max,
    Min,
    Sin,
    Cos,
    Tan,
}

impl FunctionSymbol {
    pub const ALL: [FunctionSymbol; 12] = [
        FunctionSymbol::Add,
        FunctionSymbol::Sub,
        FunctionSymbol::Mul,
        FunctionSymbol::Div,
        FunctionSymbol::Sqrt,
        FunctionSymbol::Abs,
        FunctionSymbol::Log,
        FunctionSymbol::Max,
        FunctionSymbol::Min,
        FunctionSymbol::Sin,
        FunctionSymbol::Cos,
        FunctionSymbol::Tan,
    ];

    pub fn arity(self) -> usize {
        use FunctionSymbol::*;
        match self {
            Add | Sub | Mul | Div | Max | Min => 2,
            Sqrt | Abs | Log | Sin | Cos | Tan => 1,
        }
    }

    pub fn name(self) -> &'static str {
        use FunctionSymbol::*;
        match self {
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            Sqrt => "sqrt",
            Abs => "abs",
            Log => "log",
            Max => "max",
            Min => "min",
            Sin => "sin",
            Cos => "cos",
            Tan => "tan",
        }
    }

    /// Applies the symbol to `args`.
    ///
    /// Panics if `args.len()` differs from the arity; that is a programming
    /// error, not a runtime condition.
    pub fn apply(self, args: &[f64]) -> f64 {
        assert_eq!(
            args.len(),
            self.arity(),
            "{} takes {} argument(s), got {}",
            self.name(),
            self.arity(),
            args.len()
        );
        match args {
            [x] => self.apply_unary(*x),
            [a, b] => self.apply_binary(*a, *b),
            _ => unreachable!(),
        }
    }

    #[inline]
    pub(crate) fn apply_unary(self, x: f64) -> f64 {
        use FunctionSymbol::*;
        match self {
            Sqrt => x.abs().sqrt(),
            Abs => x.abs(),
            Log => protected_log(x),
            Sin => x.sin(),
            Cos => x.cos(),
            Tan => x.tan(),
            _ => panic!("{} is not unary", self.name()),
        }
    }

    #[inline]
    pub(crate) fn apply_binary(self, a: f64, b: f64) -> f64 {
        use FunctionSymbol::*;
        match self {
            Add => a + b,
            Sub => a - b,
            Mul => a * b,
            Div => protected_div(a, b),
            Max => a.max(b),
            Min => a.min(b),
            _ => panic!("{} is not binary", self.name()),
        }
    }
}

/// `a / b`, or 1 when `|b|` is at or below the protection threshold.
#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b.abs() <= PROTECTION_THRESHOLD {
        1.0
    } else {
        a / b
    }
}

/// `ln|x|`, or 0 when `|x|` is at or below the protection threshold.
#[inline]
pub fn protected_log(x: f64) -> f64 {
    let m = x.abs();
    if m <= PROTECTION_THRESHOLD {
        0.0
    } else {
        m.ln()
    }
}

impl fmt::Display for FunctionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown function `{0}`")]
pub struct UnknownFunction(pub String);

impl FromStr for FunctionSymbol {
    type Err = UnknownFunction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FunctionSymbol::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFunction(s.to_string()))
    }
}

/// A leaf of a syntax tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Terminal {
    Variable(usize),
    Constant(f64),
}

/// Closed interval constants are drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstRange {
    pub lo: f64,
    pub hi: f64,
}

impl ConstRange {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && hi.is_finite() && lo <= hi).then_some(ConstRange { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Functions and terminals available to tree construction.
///
/// The terminal set is `n_features` variables plus one constant slot, so a
/// uniformly drawn terminal is a variable with probability
/// `n_features / (n_features + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveSet {
    functions: Vec<FunctionSymbol>,
    n_features: usize,
}

impl PrimitiveSet {
    pub fn new(functions: Vec<FunctionSymbol>, n_features: usize) -> Self {
        let mut functions = functions;
        functions.sort();
        functions.dedup();
        PrimitiveSet {
            functions,
            n_features,
        }
    }

    /// All twelve functions over `n_features` variables.
    pub fn full(n_features: usize) -> Self {
        PrimitiveSet::new(FunctionSymbol::ALL.to_vec(), n_features)
    }

    pub fn functions(&self) -> &[FunctionSymbol] {
        &self.functions
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_terminals(&self) -> usize {
        self.n_features + 1
    }

    pub fn random_function<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<FunctionSymbol> {
        if self.functions.is_empty() {
            None
        } else {
            Some(self.functions[rng.gen_range(0..self.functions.len())])
        }
    }

    /// A different function of the same arity, if the set has one.
    pub fn random_replacement<R: Rng + ?Sized>(
        &self,
        current: FunctionSymbol,
        rng: &mut R,
    ) -> Option<FunctionSymbol> {
        let candidates: Vec<FunctionSymbol> = self
            .functions
            .iter()
            .copied()
            .filter(|f| *f != current && f.arity() == current.arity())
            .collect();
        if candidates.is_empty() {
            None
        } else {
            Some(candidates[rng.gen_range(0..candidates.len())])
        }
    }

    pub fn random_terminal<R: Rng + ?Sized>(&self, consts: &ConstRange, rng: &mut R) -> Terminal {
        let slot = rng.gen_range(0..self.n_terminals());
        if slot < self.n_features {
            Terminal::Variable(slot)
        } else {
            Terminal::Constant(consts.sample(rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use FunctionSymbol::*;

    #[test]
    fn arities() {
        assert_eq!(Add.arity(), 2);
        assert_eq!(Sqrt.arity(), 1);
        assert_eq!(Max.arity(), 2);
        let binary: Vec<_> = FunctionSymbol::ALL
            .iter()
            .filter(|f| f.arity() == 2)
            .collect();
        assert_eq!(binary, vec![&Add, &Sub, &Mul, &Div, &Max, &Min]);
    }

    #[test]
    fn protected_examples() {
        assert_eq!(Div.apply(&[1.0, 0.0]), 1.0);
        assert_eq!(Div.apply(&[1.0, 1e-6]), 1.0);
        assert_eq!(Div.apply(&[1.0, -1e-6]), 1.0);
        assert_eq!(Add.apply(&[2.0, 3.0]), 5.0);
        assert!((Log.apply(&[-std::f64::consts::E]) - 1.0).abs() < 1e-15);
        assert_eq!(Log.apply(&[0.0]), 0.0);
        assert_eq!(Sqrt.apply(&[-4.0]), 2.0);
    }

    #[test]
    #[should_panic(expected = "takes 2 argument")]
    fn arity_mismatch_panics() {
        Add.apply(&[1.0]);
    }

    #[test]
    fn names_round_trip() {
        for f in FunctionSymbol::ALL {
            assert_eq!(f.name().parse::<FunctionSymbol>().unwrap(), f);
        }
        assert!("neg".parse::<FunctionSymbol>().is_err());
    }

    #[test]
    fn replacement_keeps_arity() {
        let ps = PrimitiveSet::full(17);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let r = ps.random_replacement(Add, &mut rng).unwrap();
            assert!([Sub, Mul, Div, Max, Min].contains(&r));
        }
        let only_add = PrimitiveSet::new(vec![Add, Sin], 2);
        assert_eq!(only_add.random_replacement(Add, &mut rng), None);
    }

    #[test]
    fn terminal_mix() {
        let ps = PrimitiveSet::full(17);
        let consts = ConstRange::new(-1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 36_000;
        let constants = (0..n)
            .filter(|_| matches!(ps.random_terminal(&consts, &mut rng), Terminal::Constant(_)))
            .count();
        let frac = constants as f64 / n as f64;
        assert!(
            (frac - 1.0 / 18.0).abs() < 0.005,
            "constant fraction {frac}"
        );
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
    }

    proptest! {
        #[test]
        fn total_except_tan(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            for f in FunctionSymbol::ALL {
                if f == Tan {
                    continue;
                }
                let out = match f.arity() {
                    1 => f.apply(&[a]),
                    _ => f.apply(&[a, b]),
                };
                prop_assert!(out.is_finite(), "{} produced {}", f, out);
            }
        }

        #[test]
        fn div_exact_above_threshold(a in finite(), b in finite()) {
            prop_assume!(b.abs() > PROTECTION_THRESHOLD);
            prop_assert_eq!(Div.apply(&[a, b]).to_bits(), (a / b).to_bits());
        }

        #[test]
        fn abs_max_min(a in finite(), b in finite()) {
            prop_assert!(Abs.apply(&[a]) >= 0.0);
            prop_assert!(Max.apply(&[a, b]) >= Min.apply(&[a, b]));
        }
    }
}
