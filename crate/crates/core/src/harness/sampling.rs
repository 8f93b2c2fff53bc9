//! Random instances for the experiments.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::schema::{AttrId, TokenId};
use crate::tree::Tree;

/// Uniform random labels over tokens `0..tokens`.
pub fn random_list<R: Rng + ?Sized>(len: usize, tokens: usize, rng: &mut R) -> Vec<TokenId> {
    (0..len)
        .map(|_| TokenId(rng.gen_range(0..tokens)))
        .collect()
}

/// A tree with exactly `size` nodes, grown from the root by repeatedly
/// filling a uniformly chosen free `(node, attribute)` slot. Labels are
/// uniform over tokens `0..tokens`, edges over attributes `0..attrs`.
pub fn random_tree<R: Rng + ?Sized>(size: usize, tokens: usize, attrs: usize, rng: &mut R) -> Tree {
    assert!(size >= 1 && tokens >= 1 && attrs >= 1);
    struct Node {
        label: TokenId,
        children: Vec<(AttrId, usize)>,
    }
    let mut nodes = vec![Node {
        label: TokenId(rng.gen_range(0..tokens)),
        children: Vec::new(),
    }];
    let mut free: Vec<(usize, AttrId)> = (0..attrs).map(|a| (0, AttrId(a))).collect();
    while nodes.len() < size {
        let (parent, attr) = free.swap_remove(rng.gen_range(0..free.len()));
        let id = nodes.len();
        nodes.push(Node {
            label: TokenId(rng.gen_range(0..tokens)),
            children: Vec::new(),
        });
        nodes[parent].children.push((attr, id));
        free.extend((0..attrs).map(|a| (id, AttrId(a))));
    }
    fn build(nodes: &[Node], i: usize) -> Tree {
        Tree::new(
            nodes[i].label,
            nodes[i].children.iter().map(|&(a, c)| (a, build(nodes, c))),
        )
        .expect("each slot is filled at most once")
    }
    build(&nodes, 0)
}

/// Uniform random balanced-parenthesis word with `len` symbols
/// (`true` = open). `len` must be even.
///
/// Uses the cycle lemma: a uniform arrangement of `n` opens and `n + 1`
/// closes has exactly one rotation that is a Dyck word followed by a close.
pub fn random_dyck<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<bool> {
    assert!(len.is_multiple_of(2), "balanced words have even length");
    let n = len / 2;
    let mut seq: Vec<bool> = std::iter::repeat_n(true, n)
        .chain(std::iter::repeat_n(false, n + 1))
        .collect();
    seq.shuffle(rng);
    // first index at which the prefix sum reaches its minimum
    let mut sum = 0i64;
    let mut min = (i64::MAX, 0usize);
    for (i, &open) in seq.iter().enumerate() {
        sum += if open { 1 } else { -1 };
        if sum < min.0 {
            min = (sum, i);
        }
    }
    seq.rotate_left(min.1 + 1);
    seq.pop();
    seq
}
