//! Frame generators. Every generator is deterministic in its arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Frame, FrameError};
use crate::syntax::Formula;

/// `s0 → s1 → … → s{k-1}`, no labels.
pub fn chain(k: usize) -> Result<Frame, FrameError> {
    if k == 0 {
        return Err(FrameError::InvalidParameter("chain length must be positive".into()));
    }
    Frame::from_indices(k, (1..k).map(|i| (i - 1, i)), [])
}

/// Name of the proposition marking level `i` (1-based) of the Czarnecki family.
pub fn czarnecki_prop(i: usize) -> String {
    if i == 1 {
        "p".to_string()
    } else {
        format!("p{i}")
    }
}

/// `μx. (p ∧ ◇x) ∨ (p2 ∧ □x) ∨ … ∨ (pn ∧ □x) ∨ □⊥`, the formula paired with
/// [`czarnecki`]. For `n = 1` this is `mu x. or{and{p, dia x}, box ff}`.
pub fn czarnecki_formula(n: usize) -> Formula {
    let x = || Formula::var("x");
    let mut disjuncts = vec![
        Formula::and([Formula::prop(&czarnecki_prop(1)), Formula::nabla([x()]), Formula::nabla([])]),
        Formula::boxed(Formula::ff()),
    ];
    for i in 2..=n {
        disjuncts.push(Formula::and([Formula::prop(&czarnecki_prop(i)), Formula::boxed(x())]));
    }
    Formula::mu("x", Formula::or(disjuncts))
}

struct Builder {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Vec<(String, Vec<usize>)>,
}

impl Builder {
    fn fresh(&mut self) -> usize {
        self.n += 1;
        self.n - 1
    }

    fn label(&mut self, p: String, s: usize) {
        match self.labels.iter_mut().find(|(q, _)| *q == p) {
            Some((_, v)) => v.push(s),
            None => self.labels.push((p, vec![s])),
        }
    }

    /// Level `i` of depth `depth`; returns its top state.
    ///
    /// Level 1 is a `p`-chain of `depth` states ending in a deadlock. Level
    /// `i > 1` is a `p_i`-chain of `depth` states whose last state branches
    /// into level-`(i-1)` copies of every depth `1..=k`.
    fn level(&mut self, i: usize, depth: usize, k: usize) -> usize {
        let chain: Vec<usize> = (0..depth).map(|_| self.fresh()).collect();
        for w in chain.windows(2) {
            self.edges.push((w[0], w[1]));
        }
        for &s in &chain {
            self.label(czarnecki_prop(i), s);
        }
        let bottom = *chain.last().expect("depth is positive");
        if i == 1 {
            let dead = self.fresh();
            self.edges.push((bottom, dead));
        } else {
            for j in 1..=k {
                let top = self.level(i - 1, j, k);
                self.edges.push((bottom, top));
            }
        }
        chain[0]
    }
}

/// Depth-`k` finite stage of a frame family on which [`czarnecki_formula`]`(n)`
/// needs more iterations as `k` grows. The result is a tree rooted at `s0`.
pub fn czarnecki(n: usize, k: usize) -> Result<Frame, FrameError> {
    if n == 0 || k == 0 {
        return Err(FrameError::InvalidParameter("czarnecki needs n ≥ 1 and k ≥ 1".into()));
    }
    let mut b = Builder { n: 0, edges: Vec::new(), labels: Vec::new() };
    let root = b.level(n, k, k);
    debug_assert_eq!(root, 0);
    Frame::from_indices(b.n, b.edges, b.labels)
}

/// Random frame: every ordered pair (including self-loops) is an edge with
/// probability `edge_prob`; every proposition holds at every state with
/// probability 1/2.
pub fn random(seed: u64, size: usize, edge_prob: f64, props: &[&str]) -> Result<Frame, FrameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_with(&mut rng, size, edge_prob, props)
}

pub fn random_with<R: Rng>(
    rng: &mut R,
    size: usize,
    edge_prob: f64,
    props: &[&str],
) -> Result<Frame, FrameError> {
    if size == 0 {
        return Err(FrameError::InvalidParameter("size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(FrameError::InvalidParameter(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for a in 0..size {
        for b in 0..size {
            if rng.gen_bool(edge_prob) {
                edges.push((a, b));
            }
        }
    }
    let labels: Vec<(String, Vec<usize>)> =
        props.iter().map(|p| (p.to_string(), (0..size).filter(|_| rng.gen_bool(0.5)).collect())).collect();
    Frame::from_indices(size, edges, labels)
}

/// `count` random frames with between 1 and `max_states` states and edge
/// probability drawn uniformly from `[0.1, 0.6]`.
pub fn random_frames(seed: u64, count: usize, max_states: usize, props: &[&str]) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.gen_range(1..=max_states.max(1));
            let p = rng.gen_range(0.1..=0.6);
            random_with(&mut rng, size, p, props).expect("parameters are valid")
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every frame with `1..=max_states` states over `props`, one representative
/// per isomorphism class. `max_states` is capped at 4.
pub fn enumerate(max_states: usize, props: &[&str]) -> Vec<Frame> {
    let np = props.len();
    let mut out = Vec::new();
    for n in 1..=max_states.min(4) {
        let perms = permutations(n);
        let edge_bits = n * n;
        let label_bits = n * np;
        let encode = |edges: u64, labels: u64, pi: &[usize]| -> u64 {
            let mut e2 = 0u64;
            for a in 0..n {
                for b in 0..n {
                    if edges >> (a * n + b) & 1 == 1 {
                        e2 |= 1 << (pi[a] * n + pi[b]);
                    }
                }
            }
            let mut l2 = 0u64;
            for j in 0..np {
                for (s, &t) in pi.iter().enumerate() {
                    if labels >> (j * n + s) & 1 == 1 {
                        l2 |= 1 << (j * n + t);
                    }
                }
            }
            (e2 << label_bits) | l2
        };
        for edges in 0..(1u64 << edge_bits) {
            for labels in 0..(1u64 << label_bits) {
                let key = (edges << label_bits) | labels;
                if perms.iter().any(|pi| encode(edges, labels, pi) < key) {
                    continue;
                }
                let es = (0..n * n).filter(|i| edges >> i & 1 == 1).map(|i| (i / n, i % n));
                let ls = props.iter().enumerate().map(|(j, p)| {
                    (p.to_string(), (0..n).filter(|s| labels >> (j * n + s) & 1 == 1).collect())
                });
                out.push(Frame::from_indices(n, es, ls).expect("enumerated frame is valid"));
            }
        }
    }
    out
}
