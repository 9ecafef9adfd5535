//! Selection and variation operators.

use rand::seq::index;
use rand::Rng;

use crate::init::{gen_grow, DepthRange};
use crate::primitives::{ConstRange, PrimitiveSet};
use crate::tree::{Node, SyntaxTree};

/// Locus redraws allowed before an operator gives up on the node cap.
pub const CAP_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Crossover,
    SubtreeMutation,
    HoistMutation,
    PointMutation,
    Reproduction,
}

/// A tree with its cached fitness values.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub tree: SyntaxTree,
    /// MAE on the generation's training sample; `+∞` for non-finite output.
    pub raw_fitness: f64,
    /// `raw_fitness + parsimony * size`.
    pub penalized_fitness: f64,
    /// MAE on the whole training set.
    pub train_mae: f64,
}

impl Individual {
    pub fn size(&self) -> usize {
        self.tree.size()
    }
}

/// `raw + parsimony * size`; an infinite raw fitness stays infinite.
pub fn penalized(raw: f64, size: usize, parsimony: f64) -> f64 {
    if raw.is_infinite() {
        raw
    } else {
        raw + parsimony * size as f64
    }
}

/// Index of the winner among `k` individuals drawn without replacement.
///
/// Lowest penalized fitness wins; ties go to the smaller tree, then to the
/// earlier draw.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], k: usize, rng: &mut R) -> usize {
    assert!(
        k >= 1 && k <= pop.len(),
        "tournament size {k} outside 1..={}",
        pop.len()
    );
    let mut best: Option<usize> = None;
    for i in index::sample(rng, pop.len(), k) {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (ci, cb) = (&pop[i], &pop[b]);
                let better = ci.penalized_fitness < cb.penalized_fitness
                    || (ci.penalized_fitness == cb.penalized_fitness && ci.size() < cb.size());
                Some(if better { i } else { b })
            }
        };
    }
    best.expect("k >= 1")
}

/// Result of a crossover, with the subtree that was inserted.
#[derive(Clone, Debug)]
pub struct CrossoverOutcome {
    pub offspring: SyntaxTree,
    /// `None` when every attempt exceeded the node cap and the winner was
    /// returned unchanged.
    pub donated: Option<Node>,
}

/// Replaces a random subtree of `winner` with a random subtree copied from
/// `donor`.
pub fn crossover_traced<R: Rng + ?Sized>(
    winner: &SyntaxTree,
    donor: &SyntaxTree,
    internal_bias: f64,
    node_cap: usize,
    rng: &mut R,
) -> CrossoverOutcome {
    let winner_size = winner.size();
    for _ in 0..CAP_RETRIES {
        let target = winner.random_locus(internal_bias, rng);
        let source = donor.random_locus(internal_bias, rng);
        let removed = winner
            .subtree(&target)
            .expect("locus from this tree")
            .size();
        let donated = donor.subtree(&source).expect("locus from this tree");
        if winner_size - removed + donated.size() <= node_cap {
            let offspring = winner
                .with_replaced(&target, donated.clone())
                .expect("locus from this tree");
            return CrossoverOutcome {
                offspring,
                donated: Some(donated.clone()),
            };
        }
    }
    CrossoverOutcome {
        offspring: winner.clone(),
        donated: None,
    }
}

pub fn crossover<R: Rng + ?Sized>(
    winner: &SyntaxTree,
    donor: &SyntaxTree,
    internal_bias: f64,
    node_cap: usize,
    rng: &mut R,
) -> SyntaxTree {
    crossover_traced(winner, donor, internal_bias, node_cap, rng).offspring
}

/// Settings shared by the mutation operators.
#[derive(Clone, Debug)]
pub struct MutationParams<'a> {
    pub primitives: &'a PrimitiveSet,
    pub const_range: ConstRange,
    pub init_depth: DepthRange,
    pub internal_bias: f64,
    pub node_cap: usize,
    pub point_replace_rate: f64,
}

/// Replaces a random subtree with a freshly grown one whose depth limit is
/// drawn from `init_depth`.
pub fn subtree_mutation<R: Rng + ?Sized>(
    winner: &SyntaxTree,
    params: &MutationParams<'_>,
    rng: &mut R,
) -> SyntaxTree {
    let winner_size = winner.size();
    for _ in 0..CAP_RETRIES {
        let target = winner.random_locus(params.internal_bias, rng);
        let depth = params.init_depth.sample(rng);
        let donor = gen_grow(depth, params.primitives, &params.const_range, rng).into_root();
        let removed = winner
            .subtree(&target)
            .expect("locus from this tree")
            .size();
        if winner_size - removed + donor.size() <= params.node_cap {
            return winner
                .with_replaced(&target, donor)
                .expect("locus from this tree");
        }
    }
    winner.clone()
}

/// Replaces a random subtree `S` with a random subtree of `S`.
pub fn hoist_mutation<R: Rng + ?Sized>(
    winner: &SyntaxTree,
    internal_bias: f64,
    rng: &mut R,
) -> SyntaxTree {
    let outer = winner.random_locus(internal_bias, rng);
    let subtree = winner.subtree(&outer).expect("locus from this tree");
    let inner = subtree.random_locus(internal_bias, rng);
    let hoisted = subtree
        .get(&inner.0)
        .expect("locus from this subtree")
        .clone();
    winner
        .with_replaced(&outer, hoisted)
        .expect("locus from this tree")
}

/// Replaces each node independently with probability `point_replace_rate`:
/// functions by another function of the same arity, terminals by a fresh
/// terminal. The tree's shape is unchanged.
pub fn point_mutation<R: Rng + ?Sized>(
    winner: &SyntaxTree,
    params: &MutationParams<'_>,
    rng: &mut R,
) -> SyntaxTree {
    let mut root = winner.root().clone();
    root.for_each_mut(&mut |node| {
        if rng.gen::<f64>() >= params.point_replace_rate {
            return;
        }
        match node {
            Node::Call(symbol, _) => {
                if let Some(other) = params.primitives.random_replacement(*symbol, rng) {
                    *symbol = other;
                }
            }
            Node::Leaf(terminal) => {
                *terminal = params.primitives.random_terminal(&params.const_range, rng);
            }
        }
    });
    SyntaxTree::new(root).expect("point mutation preserves arity")
}
