//! Endotacticity decisions.
//!
//! For first-order networks the decision is exact: a first-order network is
//! endotactic iff its monomerization is weakly reversible with deficiency
//! zero. For higher molecularity only a sampled-direction witness search is
//! provided; a found witness refutes endotacticity, absence of one is
//! inconclusive.

use crate::exact::{rat_from_i64, rat_to_f64, Rat};
use crate::graph::{self, summarize};
use crate::model::{Complex, ModelError, RateLaw, Reaction, ReactionNetwork};
use crate::statespace::{self, StateBox, StateSpaceError};
use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EndotacticError {
    #[error("operation requires a first-order network (molecularity {0})")]
    NotFirstOrder(u64),
    #[error("direction {0:?} is orthogonal to every reaction vector")]
    OrthogonalDirection(Vec<f64>),
    #[error("the zero component is empty")]
    EmptyZeroComponent,
    #[error("internal invariant failed: {0}")]
    InternalInvariant(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
}

/// The monomerization of a first-order network: its monomolecular reactions
/// plus one inflow `0 -> S_k` (unit rate) for every species k whose count can
/// become positive starting from the empty state.
#[derive(Debug, Clone)]
pub struct Monomerization {
    pub network: ReactionNetwork,
    /// K: species pumped by added inflow reactions.
    pub pumped_species: Vec<usize>,
    /// Indices (into the original reaction list) of reactions with unit
    /// reactant norm.
    pub monomolecular_core: Vec<usize>,
}

/// Support closure of species producible from the empty state: starting from
/// the empty support set, a reaction fires as soon as its reactant support is
/// covered, contributing its product support. For first-order networks this
/// coincides with lattice reachability from the origin, because a producing
/// chain can be replayed to pump any supported species to any count; the
/// statespace BFS cross-checks this on every analyzed network that has a zero
/// component (see `JklSets::k_matches_support_closure`).
fn support_closure(net: &ReactionNetwork) -> Vec<usize> {
    let mut have = vec![false; net.dim()];
    loop {
        let mut grew = false;
        for rx in net.reactions() {
            if rx.reactant.support().all(|s| have[s]) {
                for s in rx.product.support() {
                    if !have[s] {
                        have[s] = true;
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return (0..net.dim()).filter(|&i| have[i]).collect();
        }
    }
}

pub fn monomerize(net: &ReactionNetwork) -> Result<Monomerization, EndotacticError> {
    let mol = net.molecularity().map_err(EndotacticError::Model)?;
    if mol > 1 {
        return Err(EndotacticError::NotFirstOrder(mol));
    }
    let pumped = support_closure(net);
    let mut reactions: Vec<Reaction> = Vec::new();
    let mut kinetics: Vec<RateLaw> = Vec::new();
    let mut core = Vec::new();
    for (i, rx) in net.reactions().iter().enumerate() {
        if rx.molecularity() == 1 {
            core.push(i);
            reactions.push(rx.clone());
            kinetics.push(net.kinetics()[i].clone());
        }
    }
    for &k in &pumped {
        let inflow = Reaction::new(Complex::zero(), Complex::unit(k));
        if !reactions.contains(&inflow) {
            reactions.push(inflow);
            kinetics.push(RateLaw::mass_action(1.0));
        }
    }
    let network = ReactionNetwork::from_parts(net.species().to_vec(), reactions, kinetics);
    Ok(Monomerization {
        network,
        pumped_species: pumped,
        monomolecular_core: core,
    })
}

/// Exact endotacticity decision for first-order networks: endotactic iff the
/// monomerization is weakly reversible and of deficiency zero. Weak
/// reversibility of a first-order network forces deficiency zero; that
/// implication is asserted, not assumed.
pub fn is_endotactic_first_order(net: &ReactionNetwork) -> Result<bool, EndotacticError> {
    let mono = monomerize(net)?;
    let s = summarize(&mono.network);
    if s.weakly_reversible && s.deficiency != 0 {
        return Err(EndotacticError::InternalInvariant(format!(
            "weakly reversible first-order monomerization with deficiency {}",
            s.deficiency
        )));
    }
    Ok(s.weakly_reversible && s.deficiency == 0)
}

/// A rational direction for the witness search.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(pub Vec<Rat>);

impl Direction {
    pub fn from_integers(v: &[i64]) -> Self {
        Direction(v.iter().copied().map(rat_from_i64).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rat_to_f64).collect()
    }
}

/// A sampled-direction refutation of endotacticity: reaction `reaction` has a
/// u-maximal reactant but points u-outward.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub direction: Vec<f64>,
    pub direction_index: usize,
    pub reaction: usize,
}

fn dot(u: &[Rat], v: &[i64]) -> Rat {
    u.iter()
        .zip(v)
        .map(|(a, &b)| a * rat_from_i64(b))
        .sum()
}

struct DirectionView {
    /// reactions with reaction vector not orthogonal to u
    in_ru: Vec<usize>,
    /// among their reactants, the u-maximal ones (by reaction index)
    maximal: Vec<usize>,
}

fn view_direction(
    net: &ReactionNetwork,
    u: &Direction,
) -> Result<DirectionView, EndotacticError> {
    let d = net.dim();
    if u.0.len() != d {
        return Err(EndotacticError::Model(ModelError::DimensionMismatch(
            u.0.len(),
            d,
        )));
    }
    let mut in_ru = Vec::new();
    for (i, rx) in net.reactions().iter().enumerate() {
        if !dot(&u.0, &rx.vector(d)).is_zero() {
            in_ru.push(i);
        }
    }
    if in_ru.is_empty() {
        return Err(EndotacticError::OrthogonalDirection(u.to_f64()));
    }
    // u-maximal reactants among the sources of R_u
    let heights: Vec<Rat> = in_ru
        .iter()
        .map(|&i| {
            let y = net.reactions()[i].reactant.to_dense(d);
            let y: Vec<i64> = y.into_iter().map(|c| c as i64).collect();
            dot(&u.0, &y)
        })
        .collect();
    let max = heights.iter().max().cloned().expect("nonempty");
    let maximal = in_ru
        .iter()
        .zip(&heights)
        .filter(|(_, h)| **h == max)
        .map(|(&i, _)| i)
        .collect();
    Ok(DirectionView { in_ru, maximal })
}

/// Scans the directions in order and returns the first (direction, reaction)
/// pair where a u-maximal reactant fires u-outward. `None` refutes nothing:
/// for molecularity >= 2 absence of a witness is inconclusive.
pub fn witness_search(
    net: &ReactionNetwork,
    directions: &[Direction],
) -> Result<Option<Violation>, EndotacticError> {
    let d = net.dim();
    for (di, u) in directions.iter().enumerate() {
        let view = view_direction(net, u)?;
        for &i in &view.maximal {
            let vec = net.reactions()[i].vector(d);
            if dot(&u.0, &vec).is_positive() {
                return Ok(Some(Violation {
                    direction: u.to_f64(),
                    direction_index: di,
                    reaction: i,
                }));
            }
        }
        let _ = view.in_ru;
    }
    Ok(None)
}

/// Necessary evidence for strong endotacticity: every sampled direction
/// admits some u-maximal reactant with a strictly inward reaction.
pub fn strong_endotactic_evidence(
    net: &ReactionNetwork,
    directions: &[Direction],
) -> Result<bool, EndotacticError> {
    let d = net.dim();
    for u in directions {
        let view = view_direction(net, u)?;
        let any_inward = view.maximal.iter().any(|&i| {
            let vec = net.reactions()[i].vector(d);
            dot(&u.0, &vec).is_negative()
        });
        if !any_inward {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Deterministic direction set: all +-e_i, all +-(e_i +- e_j), plus 64
/// pseudo-random small-integer directions seeded from a hash of the canonical
/// serialization. Directions orthogonal to the stoichiometric subspace are
/// filtered out.
pub fn default_directions(net: &ReactionNetwork) -> Vec<Direction> {
    let d = net.dim();
    let vectors: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.vector(d)).collect();
    let useful = |u: &Direction| vectors.iter().any(|v| !dot(&u.0, v).is_zero());

    let mut out: Vec<Direction> = Vec::new();
    let push = |cand: Vec<i64>, out: &mut Vec<Direction>| {
        let dir = Direction::from_integers(&cand);
        if useful(&dir) && !out.contains(&dir) {
            out.push(dir);
        }
    };
    for i in 0..d {
        for sign in [1i64, -1] {
            let mut v = vec![0i64; d];
            v[i] = sign;
            push(v, &mut out);
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            for (a, b) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                let mut v = vec![0i64; d];
                v[i] = a;
                v[j] = b;
                push(v, &mut out);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(network_hash(net));
    let mut produced = 0;
    let mut attempts = 0;
    while produced < 64 && attempts < 1024 {
        attempts += 1;
        let v: Vec<i64> = (0..d).map(|_| rng.gen_range(-4i64..=4)).collect();
        if v.iter().all(|&x| x == 0) {
            continue;
        }
        let dir = Direction::from_integers(&v);
        if useful(&dir) && !out.contains(&dir) {
            out.push(dir);
            produced += 1;
        }
    }
    out
}

/// FNV-1a over the canonical serialization; stable across runs and builds.
fn network_hash(net: &ReactionNetwork) -> u64 {
    let text = crate::parser::serialize(net);
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The J/K/L species sets of the zero component, computed by truncated
/// lattice reachability:
/// J = {j : e_j leads to 0}, K = support of zero-component complexes
/// reachable from the origin, L = {l in J \ K : e_k leads to e_l for all k in
/// K}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JklSets {
    pub j: Vec<usize>,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub supp_zero_component: Vec<usize>,
    pub box_cap: u64,
    /// True when a BFS frontier touched the box boundary, which would make a
    /// negative membership answer box-relative.
    pub boundary_touched: bool,
    /// Cross-check of K against the support-closure shortcut used by
    /// monomerization. Disagreement is reported, never silently resolved.
    pub k_matches_support_closure: bool,
}

impl JklSets {
    /// The connectivity identity expected of endotactic inputs.
    pub fn satisfies_union_identity(&self) -> bool {
        let mut union: Vec<usize> = self.k.iter().chain(&self.l).copied().collect();
        union.sort_unstable();
        union.dedup();
        !self.k.is_empty() && union == self.j && self.j == self.supp_zero_component
    }
}

pub fn jkl_sets(net: &ReactionNetwork) -> Result<JklSets, EndotacticError> {
    jkl_sets_with_cap(net, 10)
}

pub fn jkl_sets_with_cap(net: &ReactionNetwork, cap: u64) -> Result<JklSets, EndotacticError> {
    let mol = net.molecularity().map_err(EndotacticError::Model)?;
    if mol > 1 {
        return Err(EndotacticError::NotFirstOrder(mol));
    }
    let split = graph::zero_split(net);
    if split.zero_part.is_empty() {
        return Err(EndotacticError::EmptyZeroComponent);
    }
    let zero = &split.zero_part;
    let d = net.dim();
    let bx = StateBox::new(cap, d)?;
    let origin = vec![0u64; d];
    let mut boundary = false;

    let mut reach = |from: &[u64], to: &[u64]| -> Result<bool, EndotacticError> {
        let r = statespace::reachable(zero, from, to, bx)?;
        boundary |= r.boundary_touched;
        Ok(r.reachable)
    };

    let mut j = Vec::new();
    for s in 0..d {
        let mut e = vec![0u64; d];
        e[s] = 1;
        if reach(&e, &origin)? {
            j.push(s);
        }
    }

    // K: support of zero-component complexes reachable from the origin state.
    let zero_complexes: Vec<Complex> = {
        let mut cs: Vec<Complex> = Vec::new();
        for rx in zero.reactions() {
            for c in [&rx.reactant, &rx.product] {
                if !cs.contains(c) {
                    cs.push(c.clone());
                }
            }
        }
        cs
    };
    let mut k: Vec<usize> = Vec::new();
    for c in &zero_complexes {
        if c.is_zero() {
            continue;
        }
        let target = c.to_dense(d);
        if reach(&origin, &target)? {
            for s in c.support() {
                if !k.contains(&s) {
                    k.push(s);
                }
            }
        }
    }
    k.sort_unstable();

    let mut l = Vec::new();
    for &cand in &j {
        if k.contains(&cand) {
            continue;
        }
        let mut target = vec![0u64; d];
        target[cand] = 1;
        let mut all = true;
        for &src in &k {
            let mut from = vec![0u64; d];
            from[src] = 1;
            if !reach(&from, &target)? {
                all = false;
                break;
            }
        }
        if all {
            l.push(cand);
        }
    }

    let mut supp: Vec<usize> = zero_complexes
        .iter()
        .flat_map(|c| c.support().collect::<Vec<_>>())
        .collect();
    supp.sort_unstable();
    supp.dedup();

    let closure = support_closure(zero);
    Ok(JklSets {
        k_matches_support_closure: closure == k,
        j,
        k,
        l,
        supp_zero_component: supp,
        box_cap: cap,
        boundary_touched: boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn monomerize_splits_joint_inflow() {
        let n = parse("species: S1 S2\n0 -> S1 + S2 : 1").unwrap();
        let m = monomerize(&n).unwrap();
        assert_eq!(m.pumped_species, vec![0, 1]);
        assert!(m.monomolecular_core.is_empty());
        let texts: Vec<String> = m
            .network
            .reactions()
            .iter()
            .map(|r| m.network.reaction_text(r))
            .collect();
        assert_eq!(texts, vec!["0 -> S1", "0 -> S2"]);
    }

    #[test]
    fn monomerize_cycle_network() {
        let n = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap();
        let m = monomerize(&n).unwrap();
        assert_eq!(m.pumped_species, vec![0, 1]);
        assert_eq!(m.monomolecular_core, vec![0, 1]);
        assert_eq!(m.network.reactions().len(), 4);
        // zero-reactant reactions appear iff K is nonempty
        assert!(m
            .network
            .reactions()
            .iter()
            .any(|r| r.reactant.is_zero()));
    }

    #[test]
    fn monomerize_identity_without_inflow() {
        let n = parse("S1 -> S2 : 1").unwrap();
        let m = monomerize(&n).unwrap();
        assert!(m.pumped_species.is_empty());
        assert_eq!(m.network.reactions(), n.reactions());
    }

    #[test]
    fn monomerize_rejects_higher_order() {
        let n = parse("2S1 -> S1 : 1").unwrap();
        assert!(matches!(
            monomerize(&n),
            Err(EndotacticError::NotFirstOrder(2))
        ));
    }

    #[test]
    fn endotactic_decisions() {
        let cycle = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap();
        assert!(is_endotactic_first_order(&cycle).unwrap());

        let pair = parse("0 <-> S1 : 1, 1").unwrap();
        assert!(is_endotactic_first_order(&pair).unwrap());

        // the bifurcation example: S1+S2 has no outgoing edge in the
        // monomerization
        let bif = parse(
            "0 -> S1 : 1\n0 -> S2 : 1\nS1 -> 0 : 1\nS2 -> 0 : 1\nS1 -> S1 + S2 : 1\nS2 -> S1 + S2 : 1",
        )
        .unwrap();
        assert!(!is_endotactic_first_order(&bif).unwrap());

        let joint_inflow = parse("species: S1 S2\n0 -> S1 + S2 : 1").unwrap();
        assert!(!is_endotactic_first_order(&joint_inflow).unwrap());
    }

    #[test]
    fn witness_search_outward_inflow() {
        let n = parse("0 -> S1 : 1").unwrap();
        let down = Direction::from_integers(&[-1]);
        let up = Direction::from_integers(&[1]);
        assert!(witness_search(&n, &[down]).unwrap().is_none());
        let v = witness_search(&n, &[up]).unwrap().unwrap();
        assert_eq!(v.reaction, 0);
    }

    #[test]
    fn witness_search_reversible_pair() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let dirs = [
            Direction::from_integers(&[1]),
            Direction::from_integers(&[-1]),
        ];
        assert!(witness_search(&n, &dirs).unwrap().is_none());
        assert!(strong_endotactic_evidence(&n, &dirs).unwrap());
    }

    #[test]
    fn witness_search_rejects_orthogonal_direction() {
        let n = parse("S1 -> S2 : 1").unwrap();
        let ortho = Direction::from_integers(&[1, 1]);
        assert!(matches!(
            witness_search(&n, &[ortho]),
            Err(EndotacticError::OrthogonalDirection(_))
        ));
    }

    #[test]
    fn default_directions_are_deterministic_and_useful() {
        let n = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap();
        let a = default_directions(&n);
        let b = default_directions(&n);
        assert_eq!(a, b);
        assert!(a.len() >= 8 + 64);
    }

    #[test]
    fn jkl_cycle_network() {
        let n = parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap();
        let jkl = jkl_sets(&n).unwrap();
        assert_eq!(jkl.j, vec![0, 1]);
        assert_eq!(jkl.k, vec![0, 1]);
        assert!(jkl.l.is_empty());
        assert!(jkl.satisfies_union_identity());
        assert!(jkl.k_matches_support_closure);
    }

    #[test]
    fn jkl_pure_pair() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let jkl = jkl_sets(&n).unwrap();
        assert_eq!(jkl.j, vec![0]);
        assert_eq!(jkl.k, vec![0]);
        assert!(jkl.l.is_empty());
        assert!(jkl.satisfies_union_identity());
    }

    #[test]
    fn jkl_non_endotactic_breaks_identity() {
        // S2 -> S1 enters the zero component but nothing replenishes S2
        let n = parse("0 <-> S1 : 1, 1\nS2 -> S1 : 1").unwrap();
        let jkl = jkl_sets(&n).unwrap();
        assert_eq!(jkl.j, vec![0, 1]);
        assert_eq!(jkl.k, vec![0]);
        assert!(jkl.l.is_empty(), "e1 cannot reach e2");
        assert!(!jkl.satisfies_union_identity());
        assert!(!is_endotactic_first_order(&n).unwrap());
    }

    #[test]
    fn jkl_requires_zero_component() {
        let n = parse("S1 -> S2 : 1").unwrap();
        assert!(matches!(
            jkl_sets(&n),
            Err(EndotacticError::EmptyZeroComponent)
        ));
    }
}
