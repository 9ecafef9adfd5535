//! Syntax-tree genotype.
//!
//! Trees are immutable values; genetic operators build new trees from
//! copies. A [`NodeLocus`] addresses one node by the child indices walked
//! from the root.

mod text;

pub use text::{parse_text, ParseError, ParseErrorKind};

use std::fmt;

use rand::Rng;

use crate::primitives::{FunctionSymbol, Terminal};

/// Default upper bound on node count.
pub const DEFAULT_NODE_CAP: usize = 4096;

/// Default probability that [`SyntaxTree::random_locus`] picks an internal node.
pub const DEFAULT_INTERNAL_BIAS: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf(Terminal),
    Call(FunctionSymbol, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("`{symbol}` takes {expected} argument(s), got {found}")]
    Arity {
        symbol: FunctionSymbol,
        expected: usize,
        found: usize,
    },
    #[error("tree has {size} nodes, above the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("constant {0} is not finite")]
    NonFiniteConstant(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable X{index} is out of range for {n_features} input feature(s)")]
    VariableOutOfRange { index: usize, n_features: usize },
    #[error("feature columns have unequal lengths")]
    RaggedColumns,
}

impl Node {
    pub fn var(index: usize) -> Node {
        Node::Leaf(Terminal::Variable(index))
    }

    pub fn constant(value: f64) -> Node {
        Node::Leaf(Terminal::Constant(value))
    }

    pub fn call(symbol: FunctionSymbol, children: Vec<Node>) -> Node {
        Node::Call(symbol, children)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf(_))
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Call(_, children) => 1 + children.iter().map(Node::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Call(_, children) => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }

    fn validate(&self) -> Result<(), TreeError> {
        match self {
            Node::Leaf(Terminal::Constant(c)) if !c.is_finite() => {
                Err(TreeError::NonFiniteConstant(*c))
            }
            Node::Leaf(_) => Ok(()),
            Node::Call(symbol, children) => {
                if children.len() != symbol.arity() {
                    return Err(TreeError::Arity {
                        symbol: *symbol,
                        expected: symbol.arity(),
                        found: children.len(),
                    });
                }
                children.iter().try_for_each(Node::validate)
            }
        }
    }

    fn max_variable(&self) -> Option<usize> {
        match self {
            Node::Leaf(Terminal::Variable(i)) => Some(*i),
            Node::Leaf(Terminal::Constant(_)) => None,
            Node::Call(_, children) => children.iter().filter_map(Node::max_variable).max(),
        }
    }

    fn eval_row(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf(Terminal::Variable(i)) => row[*i],
            Node::Leaf(Terminal::Constant(c)) => *c,
            Node::Call(symbol, children) => match children.as_slice() {
                [x] => symbol.apply_unary(x.eval_row(row)),
                [a, b] => symbol.apply_binary(a.eval_row(row), b.eval_row(row)),
                _ => unreachable!("arity checked at construction"),
            },
        }
    }

    fn eval_columns(&self, columns: &[&[f64]], n_rows: usize) -> Vec<f64> {
        match self {
            Node::Leaf(Terminal::Variable(i)) => columns[*i].to_vec(),
            Node::Leaf(Terminal::Constant(c)) => vec![*c; n_rows],
            Node::Call(symbol, children) => match children.as_slice() {
                [x] => {
                    let mut out = x.eval_columns(columns, n_rows);
                    for v in &mut out {
                        *v = symbol.apply_unary(*v);
                    }
                    out
                }
                [a, b] => {
                    let mut out = a.eval_columns(columns, n_rows);
                    let rhs = b.eval_columns(columns, n_rows);
                    for (v, r) in out.iter_mut().zip(rhs) {
                        *v = symbol.apply_binary(*v, r);
                    }
                    out
                }
                _ => unreachable!("arity checked at construction"),
            },
        }
    }

    fn collect_loci(
        &self,
        path: &mut Vec<usize>,
        internal: &mut Vec<NodeLocus>,
        leaves: &mut Vec<NodeLocus>,
    ) {
        match self {
            Node::Leaf(_) => leaves.push(NodeLocus(path.clone())),
            Node::Call(_, children) => {
                internal.push(NodeLocus(path.clone()));
                for (i, child) in children.iter().enumerate() {
                    path.push(i);
                    child.collect_loci(path, internal, leaves);
                    path.pop();
                }
            }
        }
    }

    /// Internal nodes and leaves of this subtree, each in pre-order,
    /// addressed relative to `self`.
    pub fn loci(&self) -> (Vec<NodeLocus>, Vec<NodeLocus>) {
        let mut internal = Vec::new();
        let mut leaves = Vec::new();
        self.collect_loci(&mut Vec::new(), &mut internal, &mut leaves);
        (internal, leaves)
    }

    pub fn random_locus<R: Rng + ?Sized>(&self, internal_bias: f64, rng: &mut R) -> NodeLocus {
        let (internal, leaves) = self.loci();
        if internal.is_empty() {
            return NodeLocus::root();
        }
        let pool = if rng.gen::<f64>() < internal_bias {
            internal
        } else {
            leaves
        };
        pool[rng.gen_range(0..pool.len())].clone()
    }

    pub fn get(&self, path: &[usize]) -> Option<&Node> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => match self {
                Node::Call(_, children) => children.get(*i)?.get(rest),
                Node::Leaf(_) => None,
            },
        }
    }

    fn get_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => match self {
                Node::Call(_, children) => children.get_mut(*i)?.get_mut(rest),
                Node::Leaf(_) => None,
            },
        }
    }

    /// Pre-order visit of every node, mutably.
    pub(crate) fn for_each_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        if let Node::Call(_, children) = self {
            for child in children {
                child.for_each_mut(f);
            }
        }
    }

    /// Whether `needle` occurs as a subtree of `self`.
    pub fn contains_subtree(&self, needle: &Node) -> bool {
        if self == needle {
            return true;
        }
        match self {
            Node::Leaf(_) => false,
            Node::Call(_, children) => children.iter().any(|c| c.contains_subtree(needle)),
        }
    }
}

/// Path of child indices from the root to one node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct NodeLocus(pub Vec<usize>);

impl NodeLocus {
    pub fn root() -> Self {
        NodeLocus(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Depth of the addressed node.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn join(&self, rel: &NodeLocus) -> NodeLocus {
        let mut path = self.0.clone();
        path.extend_from_slice(&rel.0);
        NodeLocus(path)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntaxTree {
    root: Node,
}

impl SyntaxTree {
    /// Builds a tree after checking arities and constants.
    pub fn new(root: Node) -> Result<Self, TreeError> {
        root.validate()?;
        Ok(SyntaxTree { root })
    }

    /// Builds a tree the caller already knows to be well formed.
    pub(crate) fn from_root_unchecked(root: Node) -> Self {
        debug_assert!(root.validate().is_ok());
        SyntaxTree { root }
    }

    pub fn leaf(terminal: Terminal) -> Self {
        SyntaxTree {
            root: Node::Leaf(terminal),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Checks arity and the node cap.
    pub fn validate(&self, cap: usize) -> Result<(), TreeError> {
        self.root.validate()?;
        let size = self.size();
        if size > cap {
            return Err(TreeError::TooLarge { size, cap });
        }
        Ok(())
    }

    /// Largest variable index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        self.root.max_variable()
    }

    /// Fails if the tree references a variable outside `0..n_features`.
    pub fn check_features(&self, n_features: usize) -> Result<(), EvalError> {
        match self.max_variable() {
            Some(index) if index >= n_features => {
                Err(EvalError::VariableOutOfRange { index, n_features })
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the tree on one row of inputs, `row[i]` binding `Xi`.
    pub fn eval(&self, row: &[f64]) -> Result<f64, EvalError> {
        self.check_features(row.len())?;
        Ok(self.root.eval_row(row))
    }

    /// Evaluates the tree on column-major data, one output per row.
    ///
    /// Produces bitwise the same values as calling [`eval`](Self::eval) on
    /// each row.
    pub fn eval_columns<C: AsRef<[f64]>>(&self, columns: &[C]) -> Result<Vec<f64>, EvalError> {
        self.check_features(columns.len())?;
        let cols: Vec<&[f64]> = columns.iter().map(AsRef::as_ref).collect();
        let n_rows = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != n_rows) {
            return Err(EvalError::RaggedColumns);
        }
        if cols.is_empty() {
            // Only constants can appear; there are no rows to produce.
            return Ok(Vec::new());
        }
        Ok(self.root.eval_columns(&cols, n_rows))
    }

    /// Internal nodes and leaves, each in pre-order.
    pub fn loci(&self) -> (Vec<NodeLocus>, Vec<NodeLocus>) {
        self.root.loci()
    }

    /// Picks a node, choosing an internal node with probability
    /// `internal_bias` and a leaf otherwise, uniformly within each class.
    /// A single-leaf tree always yields the root.
    pub fn random_locus<R: Rng + ?Sized>(&self, internal_bias: f64, rng: &mut R) -> NodeLocus {
        self.root.random_locus(internal_bias, rng)
    }

    pub fn subtree(&self, locus: &NodeLocus) -> Option<&Node> {
        self.root.get(&locus.0)
    }

    /// A copy of this tree with the node at `locus` replaced by `replacement`.
    pub fn with_replaced(&self, locus: &NodeLocus, replacement: Node) -> Option<SyntaxTree> {
        let mut root = self.root.clone();
        *root.get_mut(&locus.0)? = replacement;
        Some(SyntaxTree::from_root_unchecked(root))
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(Terminal::Variable(i)) => write!(f, "X{i}"),
            // f64 Display is the shortest string that parses back to the same bits.
            Node::Leaf(Terminal::Constant(c)) => write!(f, "{c}"),
            Node::Call(symbol, children) => {
                write!(f, "{symbol}(")?;
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{child}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::FunctionSymbol::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample_tree() -> SyntaxTree {
        SyntaxTree::new(Node::call(
            Add,
            vec![
                Node::call(Sub, vec![Node::var(2), Node::var(7)]),
                Node::call(Sub, vec![Node::constant(1.0), Node::var(1)]),
            ],
        ))
        .unwrap()
    }

    fn row_with(pairs: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; 17];
        for &(i, v) in pairs {
            row[i] = v;
        }
        row
    }

    #[test]
    fn eval_examples() {
        let row = row_with(&[(1, 1.0), (2, 5.0), (7, 3.0)]);
        assert_eq!(sample_tree().eval(&row).unwrap(), 2.0);
        assert_eq!(
            SyntaxTree::leaf(Terminal::Constant(7.5))
                .eval(&row)
                .unwrap(),
            7.5
        );
        let row = row_with(&[(0, 9.3)]);
        assert_eq!(
            SyntaxTree::leaf(Terminal::Variable(0)).eval(&row).unwrap(),
            9.3
        );
    }

    #[test]
    fn eval_out_of_range_variable() {
        let t = SyntaxTree::leaf(Terminal::Variable(17));
        assert_eq!(
            t.eval(&[0.0; 17]),
            Err(EvalError::VariableOutOfRange {
                index: 17,
                n_features: 17
            })
        );
    }

    #[test]
    fn size_and_depth() {
        assert_eq!((sample_tree().size(), sample_tree().depth()), (7, 2));
        let leaf = SyntaxTree::leaf(Terminal::Variable(3));
        assert_eq!((leaf.size(), leaf.depth()), (1, 0));
        fn full(d: usize) -> Node {
            if d == 0 {
                Node::var(0)
            } else {
                Node::call(Mul, vec![full(d - 1), full(d - 1)])
            }
        }
        for d in 0..8 {
            let t = SyntaxTree::new(full(d)).unwrap();
            assert_eq!(t.size(), (1 << (d + 1)) - 1);
            assert_eq!(t.depth(), d);
        }
    }

    #[test]
    fn arity_checked() {
        let bad = Node::call(Add, vec![Node::var(0)]);
        assert!(matches!(
            SyntaxTree::new(bad),
            Err(TreeError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        let big = sample_tree();
        assert!(matches!(
            big.validate(6),
            Err(TreeError::TooLarge { size: 7, cap: 6 })
        ));
        assert!(big.validate(DEFAULT_NODE_CAP).is_ok());
    }

    #[test]
    fn random_locus_single_leaf_is_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = SyntaxTree::leaf(Terminal::Constant(1.0));
        for _ in 0..100 {
            assert!(t.random_locus(DEFAULT_INTERNAL_BIAS, &mut rng).is_root());
        }
    }

    #[test]
    fn random_locus_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = sample_tree();
        let draws = 10_000;
        let mut leaves = 0;
        for _ in 0..draws {
            let locus = t.random_locus(DEFAULT_INTERNAL_BIAS, &mut rng);
            let node = t.subtree(&locus).expect("locus resolves");
            if node.is_leaf() {
                leaves += 1;
            }
        }
        let frac = leaves as f64 / draws as f64;
        assert!((frac - 0.10).abs() <= 0.02, "leaf fraction {frac}");
    }

    #[test]
    fn replace_subtree() {
        let t = sample_tree();
        let hoisted = t.with_replaced(&NodeLocus(vec![0]), Node::var(2)).unwrap();
        assert_eq!(hoisted.to_text(), "add(X2, sub(1, X1))");
        assert_eq!(hoisted.size(), 5);
        assert!(t
            .with_replaced(&NodeLocus(vec![0, 0, 0]), Node::var(1))
            .is_none());
    }

    #[test]
    fn columns_match_rows() {
        let t = sample_tree();
        let cols: Vec<Vec<f64>> = (0..17)
            .map(|c| (0..5).map(|r| (r * 17 + c) as f64 * 0.5).collect())
            .collect();
        let out = t.eval_columns(&cols).unwrap();
        for (r, v) in out.iter().enumerate() {
            let row: Vec<f64> = cols.iter().map(|c| c[r]).collect();
            assert_eq!(t.eval(&row).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn unary_chain_size_depth() {
        let mut n = Node::var(0);
        for _ in 0..6 {
            n = Node::call(Sin, vec![n]);
        }
        let t = SyntaxTree::new(n).unwrap();
        assert_eq!(t.size(), t.depth() + 1);
    }
}
