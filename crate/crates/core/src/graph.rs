//! Structural invariants of the reaction graph: linkage classes, strong
//! components, stoichiometric dimension, deficiency, conservativity, and the
//! split along the weak component of the zero complex.
//!
//! Ranks and the conservativity decision run in exact rational arithmetic;
//! deficiency is an integer invariant and must never be off by one.

use crate::exact::{self, LpOutcome, Rat};
use crate::model::{Complex, ReactionNetwork};
use num::{One, Signed, Zero};
use serde::Serialize;

/// The reaction graph over canonicalized complexes. Identical complexes
/// written differently unify because `Complex` is canonical by construction.
pub struct ComplexGraph {
    pub complexes: Vec<Complex>,
    /// edges[i] = (source complex id, target complex id) of reaction i
    pub edges: Vec<(usize, usize)>,
    pub succ: Vec<Vec<usize>>,
}

impl ComplexGraph {
    pub fn of(net: &ReactionNetwork) -> Self {
        let mut complexes: Vec<Complex> = Vec::new();
        let id = |c: &Complex, complexes: &mut Vec<Complex>| -> usize {
            match complexes.iter().position(|x| x == c) {
                Some(i) => i,
                None => {
                    complexes.push(c.clone());
                    complexes.len() - 1
                }
            }
        };
        let mut edges = Vec::with_capacity(net.reactions().len());
        for rx in net.reactions() {
            let s = id(&rx.reactant, &mut complexes);
            let t = id(&rx.product, &mut complexes);
            edges.push((s, t));
        }
        let mut succ = vec![Vec::new(); complexes.len()];
        for &(s, t) in &edges {
            succ[s].push(t);
        }
        ComplexGraph {
            complexes,
            edges,
            succ,
        }
    }

    /// Weakly connected components, as complex-id sets (union-find).
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.complexes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(s, t) in &self.edges {
            let (a, b) = (find(&mut parent, s), find(&mut parent, t));
            if a != b {
                parent[a] = b;
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if root_slot[r] == usize::MAX {
                root_slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_slot[r]].push(v);
        }
        groups
    }

    /// Strongly connected components by iterative Tarjan, as complex-id sets.
    pub fn strong_components(&self) -> Vec<Vec<usize>> {
        tarjan_scc(self.complexes.len(), |v| self.succ[v].iter().copied())
    }
}

/// Iterative Tarjan over an implicit adjacency function. Shared with the
/// state-lattice decomposition, where recursion would overflow.
pub fn tarjan_scc<I, F>(n: usize, mut succ: F) -> Vec<Vec<usize>>
where
    I: Iterator<Item = usize>,
    F: FnMut(usize) -> I,
{
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut next = 0u32;

    enum Step {
        Visit(usize, usize),
        Pop(usize),
    }

    // frame: (node, successor list, cursor)
    let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        frames.push((root, succ(root).collect(), 0));

        loop {
            let step = {
                let Some((v, adj, pos)) = frames.last_mut() else {
                    break;
                };
                if *pos < adj.len() {
                    let w = adj[*pos];
                    *pos += 1;
                    Step::Visit(*v, w)
                } else {
                    Step::Pop(*v)
                }
            };
            match step {
                Step::Visit(v, w) => {
                    if index[w] == UNSET {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, succ(w).collect(), 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                }
                Step::Pop(v) => {
                    frames.pop();
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comps.push(comp);
                    }
                    if let Some((p, _, _)) = frames.last() {
                        let p = *p;
                        low[p] = low[p].min(low[v]);
                    }
                }
            }
        }
    }
    comps
}

/// Structural summary of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkSummary {
    pub complex_count: usize,
    /// Number of linkage classes (weakly connected components).
    pub linkage_count: usize,
    /// Dimension of the stoichiometric subspace, over the rationals.
    pub stoich_dim: usize,
    /// complex_count - stoich_dim - linkage_count; always >= 0.
    pub deficiency: i64,
    pub weakly_reversible: bool,
    pub conservative: bool,
}

/// Full structural computation.
pub fn summarize(net: &ReactionNetwork) -> NetworkSummary {
    let g = ComplexGraph::of(net);
    let d = net.dim();
    let vectors: Vec<Vec<Rat>> = net
        .reactions()
        .iter()
        .map(|rx| {
            rx.vector(d)
                .into_iter()
                .map(exact::rat_from_i64)
                .collect()
        })
        .collect();
    let stoich_dim = exact::rank(&vectors);
    let weak = g.weak_components();
    let strong = g.strong_components();
    let complex_count = g.complexes.len();
    let linkage_count = weak.len();
    // Every weak component holds >= 1 SCC, with equality iff each is
    // strongly connected.
    let weakly_reversible = !g.complexes.is_empty() && weak.len() == strong.len();
    NetworkSummary {
        complex_count,
        linkage_count,
        stoich_dim,
        deficiency: complex_count as i64 - stoich_dim as i64 - linkage_count as i64,
        weakly_reversible,
        conservative: is_conservative(net),
    }
}

/// Strong components of the reaction graph, as lists of complexes.
pub fn strong_components(net: &ReactionNetwork) -> Vec<Vec<Complex>> {
    let g = ComplexGraph::of(net);
    g.strong_components()
        .into_iter()
        .map(|comp| comp.into_iter().map(|i| g.complexes[i].clone()).collect())
        .collect()
}

/// Conservativity: does the orthogonal complement of the stoichiometric
/// subspace contain a strictly positive vector? Decided exactly by maximizing
/// the minimum coordinate of w over {w : w orthogonal to all reaction
/// vectors, sum w = 1, w >= 0}.
pub fn is_conservative(net: &ReactionNetwork) -> bool {
    let d = net.dim();
    if d == 0 {
        return false;
    }
    // variables: w_1..w_d, t+, t-, slacks s_1..s_d
    // constraints: sum w = 1; w . r_j = 0; w_i - (t+ - t-) - s_i = 0
    let nv = d + 2 + d;
    let mut a: Vec<Vec<Rat>> = Vec::new();
    let mut b: Vec<Rat> = Vec::new();

    let mut row = vec![Rat::zero(); nv];
    for item in row.iter_mut().take(d) {
        *item = Rat::one();
    }
    a.push(row);
    b.push(Rat::one());

    for rx in net.reactions() {
        let mut row = vec![Rat::zero(); nv];
        for (i, v) in rx.vector(d).into_iter().enumerate() {
            row[i] = exact::rat_from_i64(v);
        }
        a.push(row);
        b.push(Rat::zero());
    }
    for i in 0..d {
        let mut row = vec![Rat::zero(); nv];
        row[i] = Rat::one();
        row[d] = -Rat::one();
        row[d + 1] = Rat::one();
        row[d + 2 + i] = -Rat::one();
        a.push(row);
        b.push(Rat::zero());
    }
    let mut c = vec![Rat::zero(); nv];
    c[d] = Rat::one();
    c[d + 1] = -Rat::one();
    match exact::simplex_maximize(&a, &b, &c) {
        LpOutcome::Optimal { objective, .. } => objective.is_positive(),
        LpOutcome::Infeasible => false,
        LpOutcome::Unbounded => unreachable!("objective bounded by sum w = 1"),
    }
}

/// Partition of the reactions along the weakly connected component of the
/// zero complex.
#[derive(Debug, Clone)]
pub struct ZeroSplit {
    /// Reactions weakly connected to the zero complex (possibly empty).
    pub zero_part: ReactionNetwork,
    /// Everything else.
    pub rest: ReactionNetwork,
    /// Species supported by complexes of the zero component.
    pub zero_species: Vec<usize>,
    /// Indices (into the original reaction list) of the zero part.
    pub zero_reactions: Vec<usize>,
}

pub fn zero_split(net: &ReactionNetwork) -> ZeroSplit {
    let g = ComplexGraph::of(net);
    let zero_id = g.complexes.iter().position(Complex::is_zero);
    let mut zero_idx: Vec<usize> = Vec::new();
    let mut rest_idx: Vec<usize> = Vec::new();
    match zero_id {
        None => rest_idx = (0..net.reactions().len()).collect(),
        Some(z) => {
            let weak = g.weak_components();
            let comp = weak
                .into_iter()
                .find(|c| c.contains(&z))
                .expect("zero complex is in some component");
            let in_zero: Vec<bool> = {
                let mut v = vec![false; g.complexes.len()];
                for i in comp {
                    v[i] = true;
                }
                v
            };
            for (i, &(s, _)) in g.edges.iter().enumerate() {
                if in_zero[s] {
                    zero_idx.push(i);
                } else {
                    rest_idx.push(i);
                }
            }
        }
    }
    let zero_part = net.restrict(&zero_idx).expect("indices valid");
    let rest = net.restrict(&rest_idx).expect("indices valid");
    let mut zero_species: Vec<usize> = Vec::new();
    for &i in &zero_idx {
        let rx = &net.reactions()[i];
        for s in rx.reactant.support().chain(rx.product.support()) {
            if !zero_species.contains(&s) {
                zero_species.push(s);
            }
        }
    }
    zero_species.sort_unstable();
    ZeroSplit {
        zero_part,
        rest,
        zero_species,
        zero_reactions: zero_idx,
    }
}

/// JSON payload for `kind: "structure"`.
#[derive(Debug, Serialize)]
pub struct StructureReport {
    pub network: Option<String>,
    pub species: Vec<String>,
    pub reaction_count: usize,
    pub molecularity: Option<u64>,
    #[serde(flatten)]
    pub summary: NetworkSummary,
    pub zero_species: Vec<String>,
    pub zero_reaction_count: usize,
    pub endotactic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endotactic_witness: Option<crate::endotactic::Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jkl: Option<crate::endotactic::JklSets>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn summarize_birth_death_chain() {
        // 0 <-> S1 <-> S2, four reactions
        let n = parse("0 <-> S1 : 1, 1\nS1 <-> S2 : 1, 1").unwrap();
        let s = summarize(&n);
        assert_eq!(s.complex_count, 3);
        assert_eq!(s.linkage_count, 1);
        assert_eq!(s.stoich_dim, 2);
        assert_eq!(s.deficiency, 0);
        assert!(s.weakly_reversible);
        assert!(!s.conservative);
    }

    #[test]
    fn summarize_cycle_network() {
        let n = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap();
        let s = summarize(&n);
        assert_eq!(s.complex_count, 4);
        assert_eq!(s.linkage_count, 1);
        assert_eq!(s.stoich_dim, 2);
        assert_eq!(s.deficiency, 1);
        assert!(!s.weakly_reversible, "S1+S2 has no outgoing edge");
    }

    #[test]
    fn summarize_reversible_pair_is_conservative() {
        let n = parse("S3 <-> S4 : 1, 1").unwrap();
        let s = summarize(&n);
        assert_eq!(s.deficiency, 0);
        assert!(s.weakly_reversible);
        assert!(s.conservative, "(1,1) is orthogonal to the reaction vectors");
    }

    #[test]
    fn strong_components_cases() {
        let n = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 : 1").unwrap();
        let sccs = strong_components(&n);
        assert_eq!(sccs.len(), 1);
        assert_eq!(sccs[0].len(), 3);

        let n = parse("S1 -> S2 : 1").unwrap();
        assert_eq!(strong_components(&n).len(), 2);
    }

    #[test]
    fn zero_split_cases() {
        let n = parse("S1 -> 0 : 1\nS2 -> S3 : 1").unwrap();
        let z = zero_split(&n);
        assert_eq!(z.zero_part.reactions().len(), 1);
        assert_eq!(z.rest.reactions().len(), 1);
        assert_eq!(z.zero_species, vec![0]);

        let n = parse("S3 <-> S4 : 1, 1").unwrap();
        let z = zero_split(&n);
        assert!(z.zero_part.is_empty());
        assert_eq!(z.rest.reactions().len(), 2);

        let n = parse("0 -> S1 : 1\nS1 -> S2 : 1\nS2 -> 0 : 1").unwrap();
        let z = zero_split(&n);
        assert_eq!(z.zero_part.reactions().len(), 3);
        assert!(z.rest.is_empty());
    }

    #[test]
    fn tarjan_matches_small_cases() {
        // 0 -> 1 -> 2 -> 0 cycle plus isolated 3
        let adj = vec![vec![1], vec![2], vec![0], vec![]];
        let comps = tarjan_scc(4, |v| adj[v].iter().copied());
        assert_eq!(comps.len(), 2);
        let sizes: Vec<usize> = {
            let mut s: Vec<usize> = comps.iter().map(Vec::len).collect();
            s.sort_unstable();
            s
        };
        assert_eq!(sizes, vec![1, 3]);
    }
}
