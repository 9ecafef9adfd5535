//! Population initialization: full, grow, and ramped half-and-half.

use rand::Rng;

use crate::primitives::{ConstRange, PrimitiveSet};
use crate::tree::{Node, SyntaxTree};

/// Inclusive range of target depths for initial trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepthRange {
    pub lo: usize,
    pub hi: usize,
}

impl DepthRange {
    pub fn new(lo: usize, hi: usize) -> Option<Self> {
        (lo <= hi).then_some(DepthRange { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(self.lo..=self.hi)
    }

    pub fn contains(&self, depth: usize) -> bool {
        self.lo <= depth && depth <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Full,
    Grow,
}

/// One tree of an initial population, with how it was made.
#[derive(Clone, Debug)]
pub struct Seedling {
    pub method: InitMethod,
    pub target_depth: usize,
    pub tree: SyntaxTree,
}

fn full_node<R: Rng + ?Sized>(
    depth: usize,
    ps: &PrimitiveSet,
    consts: &ConstRange,
    rng: &mut R,
) -> Node {
    if depth == 0 {
        return Node::Leaf(ps.random_terminal(consts, rng));
    }
    match ps.random_function(rng) {
        Some(symbol) => {
            let children = (0..symbol.arity())
                .map(|_| full_node(depth - 1, ps, consts, rng))
                .collect();
            Node::call(symbol, children)
        }
        None => Node::Leaf(ps.random_terminal(consts, rng)),
    }
}

fn grow_node<R: Rng + ?Sized>(
    depth: usize,
    ps: &PrimitiveSet,
    consts: &ConstRange,
    rng: &mut R,
) -> Node {
    let n_functions = ps.functions().len();
    if depth == 0 || n_functions == 0 {
        return Node::Leaf(ps.random_terminal(consts, rng));
    }
    let pick = rng.gen_range(0..n_functions + ps.n_terminals());
    if pick < n_functions {
        let symbol = ps.functions()[pick];
        let children = (0..symbol.arity())
            .map(|_| grow_node(depth - 1, ps, consts, rng))
            .collect();
        Node::call(symbol, children)
    } else {
        Node::Leaf(ps.random_terminal(consts, rng))
    }
}

/// A tree whose every leaf sits at exactly `depth`.
///
/// With an empty function set the result is a single terminal.
pub fn gen_full<R: Rng + ?Sized>(
    depth: usize,
    ps: &PrimitiveSet,
    consts: &ConstRange,
    rng: &mut R,
) -> SyntaxTree {
    SyntaxTree::from_root_unchecked(full_node(depth, ps, consts, rng))
}

/// A tree of depth at most `max_depth`; above the limit each node is a
/// function with probability `|F| / (|F| + |T|)`.
pub fn gen_grow<R: Rng + ?Sized>(
    max_depth: usize,
    ps: &PrimitiveSet,
    consts: &ConstRange,
    rng: &mut R,
) -> SyntaxTree {
    SyntaxTree::from_root_unchecked(grow_node(max_depth, ps, consts, rng))
}

/// `ceil(pop_size / 2)` full trees followed by the grow trees, each with a
/// target depth drawn uniformly from `depths`.
pub fn ramped_half_and_half<R: Rng + ?Sized>(
    pop_size: usize,
    depths: DepthRange,
    ps: &PrimitiveSet,
    consts: &ConstRange,
    rng: &mut R,
) -> Vec<Seedling> {
    let n_full = pop_size.div_ceil(2);
    (0..pop_size)
        .map(|i| {
            let target_depth = depths.sample(rng);
            let (method, tree) = if i < n_full {
                (InitMethod::Full, gen_full(target_depth, ps, consts, rng))
            } else {
                (InitMethod::Grow, gen_grow(target_depth, ps, consts, rng))
            };
            Seedling {
                method,
                target_depth,
                tree,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::FunctionSymbol;
    use crate::tree::NodeLocus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn consts() -> ConstRange {
        ConstRange::new(-1.0, 1.0).unwrap()
    }

    pub(crate) fn leaf_depths(tree: &SyntaxTree) -> Vec<usize> {
        tree.loci().1.iter().map(NodeLocus::depth).collect()
    }

    #[test]
    fn full_depth_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = gen_full(0, &PrimitiveSet::full(17), &consts(), &mut rng);
        assert_eq!(t.size(), 1);
    }

    #[test]
    fn full_leaves_all_at_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps = PrimitiveSet::full(17);
        for _ in 0..1000 {
            let t = gen_full(2, &ps, &consts(), &mut rng);
            assert_eq!(t.depth(), 2);
            assert!(leaf_depths(&t).iter().all(|&d| d == 2));
        }
    }

    #[test]
    fn full_binary_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ps = PrimitiveSet::new(
            vec![
                FunctionSymbol::Add,
                FunctionSymbol::Mul,
                FunctionSymbol::Max,
            ],
            17,
        );
        for _ in 0..50 {
            assert_eq!(gen_full(3, &ps, &consts(), &mut rng).size(), 15);
        }
    }

    #[test]
    fn grow_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ps = PrimitiveSet::full(17);
        assert_eq!(gen_grow(0, &ps, &consts(), &mut rng).size(), 1);
        let depths: Vec<usize> = (0..1000)
            .map(|_| gen_grow(5, &ps, &consts(), &mut rng).depth())
            .collect();
        assert!(depths.iter().all(|&d| d <= 5));
        assert!(depths.iter().any(|&d| d != depths[0]));
        let empty = PrimitiveSet::new(vec![], 17);
        assert_eq!(gen_grow(5, &empty, &consts(), &mut rng).size(), 1);
    }

    #[test]
    fn ramped_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = PrimitiveSet::full(17);
        let depths = DepthRange::new(3, 7).unwrap();
        let pop = ramped_half_and_half(100, depths, &ps, &consts(), &mut rng);
        assert_eq!(pop.len(), 100);
        let full: Vec<_> = pop
            .iter()
            .filter(|s| s.method == InitMethod::Full)
            .collect();
        assert_eq!(full.len(), 50);
        for s in &pop {
            assert!(depths.contains(s.target_depth));
            match s.method {
                InitMethod::Full => {
                    assert!(depths.contains(s.tree.depth()));
                    assert!(leaf_depths(&s.tree).iter().all(|&d| d == s.target_depth));
                }
                InitMethod::Grow => assert!(s.tree.depth() <= s.target_depth),
            }
        }
    }

    #[test]
    fn ramped_edge_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ps = PrimitiveSet::full(17);
        let pop = ramped_half_and_half(2, DepthRange::new(0, 0).unwrap(), &ps, &consts(), &mut rng);
        assert!(pop.iter().all(|s| s.tree.size() == 1));
        assert_eq!(pop[0].method, InitMethod::Full);
        assert_eq!(pop[1].method, InitMethod::Grow);
        let pop =
            ramped_half_and_half(68, DepthRange::new(5, 8).unwrap(), &ps, &consts(), &mut rng);
        assert_eq!(pop.len(), 68);
        let pop = ramped_half_and_half(7, DepthRange::new(1, 2).unwrap(), &ps, &consts(), &mut rng);
        assert_eq!(
            pop.iter().filter(|s| s.method == InitMethod::Full).count(),
            4
        );
    }

    #[test]
    fn seeded_determinism() {
        let ps = PrimitiveSet::full(17);
        let depths = DepthRange::new(2, 6).unwrap();
        let a = ramped_half_and_half(
            40,
            depths,
            &ps,
            &consts(),
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        let b = ramped_half_and_half(
            40,
            depths,
            &ps,
            &consts(),
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        assert!(a.iter().zip(&b).all(|(x, y)| x.tree == y.tree));
    }

    #[test]
    fn constants_within_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ps = PrimitiveSet::full(17);
        let range = ConstRange::new(-0.1, 0.1).unwrap();
        for _ in 0..200 {
            let t = gen_grow(6, &ps, &range, &mut rng);
            let mut ok = true;
            let mut root = t.into_root();
            root.for_each_mut(&mut |n| {
                if let Node::Leaf(crate::primitives::Terminal::Constant(c)) = n {
                    ok &= range.contains(*c);
                }
            });
            assert!(ok);
        }
    }
}
