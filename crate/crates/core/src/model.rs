//! Core domain types: complexes, reactions, kinetics, and reaction networks.
//!
//! Species are identified by name at the parser boundary and by dense
//! 0-based indices internally; the ordered species list fixes the coordinate
//! system for every vector and matrix downstream. All types are immutable
//! after construction.

use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("reaction {0} has identical reactant and product")]
    TrivialReaction(usize),
    #[error("rate constant must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("reaction index {0} out of range ({1} reactions)")]
    ReactionIndex(usize, usize),
    #[error("state dimension {0} does not match species count {1}")]
    DimensionMismatch(usize, usize),
    #[error("species {0:?} is purely catalytic")]
    PurelyCatalytic(String),
    #[error("species {0:?} is purely catalytic and appears in a reactant; \
             its propensity would depend on a dropped count (pre-expand the network)")]
    CatalyticRateDependence(String),
    #[error("cannot join reaction {0:?}: incompatible kinetics variants")]
    IncompatibleKinetics(String),
    #[error("tabulated override at {state:?} violates genericity for reactant {reactant:?}")]
    TabulatedGenericity { state: Vec<u64>, reactant: String },
    #[error("network has no reactions")]
    EmptyNetwork,
}

/// A complex: a formal non-negative integer combination of species.
/// Stored sparsely; absent species have coefficient zero, stored
/// coefficients are >= 1. The empty map is the zero complex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Complex {
    coeffs: BTreeMap<usize, u64>,
}

impl Complex {
    pub fn zero() -> Self {
        Complex::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut coeffs = BTreeMap::new();
        for (s, c) in pairs {
            if c > 0 {
                *coeffs.entry(s).or_insert(0) += c;
            }
        }
        Complex { coeffs }
    }

    /// The unit complex `S_i`.
    pub fn unit(i: usize) -> Self {
        Complex::from_pairs([(i, 1)])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, species: usize) -> u64 {
        self.coeffs.get(&species).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.coeffs.iter().map(|(&s, &c)| (s, c))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    /// Molecularity of the complex.
    pub fn l1_norm(&self) -> u64 {
        self.coeffs.values().sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<u64> {
        let mut v = vec![0u64; d];
        for (s, c) in self.iter() {
            v[s] = c;
        }
        v
    }

    /// True when `state >= complex` componentwise (the genericity threshold).
    pub fn dominated_by(&self, state: &[u64]) -> bool {
        self.iter().all(|(s, c)| state.get(s).copied().unwrap_or(0) >= c)
    }

    fn remap(&self, map: &[usize]) -> Complex {
        Complex::from_pairs(self.iter().map(|(s, c)| (map[s], c)))
    }
}

/// An ordered pair of distinct complexes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reaction {
    pub reactant: Complex,
    pub product: Complex,
}

impl Reaction {
    pub fn new(reactant: Complex, product: Complex) -> Self {
        Reaction { reactant, product }
    }

    /// The reaction vector y' - y as a dense integer vector; never zero.
    pub fn vector(&self, d: usize) -> Vec<i64> {
        let mut v = vec![0i64; d];
        for (s, c) in self.reactant.iter() {
            v[s] -= c as i64;
        }
        for (s, c) in self.product.iter() {
            v[s] += c as i64;
        }
        v
    }

    pub fn molecularity(&self) -> u64 {
        self.reactant.l1_norm()
    }
}

/// Per-reaction propensity specification.
///
/// `MassAction` is the usual product of falling factorials. `Tabulated` fires
/// at a constant `base` rate whenever enabled, with finitely many explicit
/// per-state overrides; it exists so bounded (non mass-action) propensities
/// can be exercised in tests and in the sub-linear drift verifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RateLaw {
    MassAction {
        rate: f64,
    },
    Tabulated {
        base: f64,
        overrides: Vec<(Vec<u64>, f64)>,
    },
}

impl RateLaw {
    pub fn mass_action(rate: f64) -> Self {
        RateLaw::MassAction { rate }
    }

    fn validate(&self, reactant: &Complex, name: impl Fn() -> String) -> Result<(), ModelError> {
        match self {
            RateLaw::MassAction { rate } => {
                if !(*rate > 0.0) {
                    return Err(ModelError::NonPositiveRate(*rate));
                }
            }
            RateLaw::Tabulated { base, overrides } => {
                if !(*base > 0.0) {
                    return Err(ModelError::NonPositiveRate(*base));
                }
                for (state, value) in overrides {
                    let enabled = reactant.dominated_by(state);
                    if enabled != (*value > 0.0) {
                        return Err(ModelError::TabulatedGenericity {
                            state: state.clone(),
                            reactant: name(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A validated stochastic reaction system.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    kinetics: Vec<RateLaw>,
    notes: Vec<String>,
    pub name: Option<String>,
}

impl ReactionNetwork {
    /// Validates and canonicalizes: duplicate reactions merge with summed
    /// rates (a note is recorded), trivial reactions are rejected, and purely
    /// catalytic species are rejected in `strict` mode or dropped (only when
    /// entirely unused) otherwise.
    pub fn new(
        species: Vec<String>,
        reactions: Vec<(Reaction, RateLaw)>,
        strict: bool,
    ) -> Result<Self, ModelError> {
        let mut net = ReactionNetwork {
            species,
            reactions: Vec::new(),
            kinetics: Vec::new(),
            notes: Vec::new(),
            name: None,
        };
        let mut seen: BTreeMap<Reaction, usize> = BTreeMap::new();
        for (idx, (rx, law)) in reactions.into_iter().enumerate() {
            if rx.reactant == rx.product {
                return Err(ModelError::TrivialReaction(idx));
            }
            law.validate(&rx.reactant, || net.complex_text(&rx.reactant))?;
            if let Some(&at) = seen.get(&rx) {
                let merged = merge_laws(&net.kinetics[at], &law)
                    .ok_or_else(|| ModelError::IncompatibleKinetics(net.reaction_text(&rx)))?;
                net.kinetics[at] = merged;
                net.notes
                    .push(format!("merged duplicate reaction {}", net.reaction_text(&rx)));
            } else {
                seen.insert(rx.clone(), net.reactions.len());
                net.reactions.push(rx);
                net.kinetics.push(law);
            }
        }
        net.resolve_catalytic(strict)?;
        Ok(net)
    }

    /// Purely catalytic species (no molecule change anywhere) violate the
    /// modeling assumption. A species that appears in some reactant would
    /// carry its count into the propensity, so it cannot be dropped; a species
    /// that appears nowhere is dropped with a note.
    fn resolve_catalytic(&mut self, strict: bool) -> Result<(), ModelError> {
        let d = self.species.len();
        let mut changes = vec![false; d];
        let mut in_reactant = vec![false; d];
        for rx in &self.reactions {
            for (i, delta) in rx.vector(d).iter().enumerate() {
                if *delta != 0 {
                    changes[i] = true;
                }
            }
            for (s, _) in rx.reactant.iter() {
                in_reactant[s] = true;
            }
        }
        let catalytic: Vec<usize> = (0..d).filter(|&i| !changes[i]).collect();
        if catalytic.is_empty() {
            return Ok(());
        }
        if strict {
            return Err(ModelError::PurelyCatalytic(
                self.species[catalytic[0]].clone(),
            ));
        }
        if let Some(&i) = catalytic.iter().find(|&&i| in_reactant[i]) {
            return Err(ModelError::CatalyticRateDependence(self.species[i].clone()));
        }
        // Unused species: renumber the rest.
        let mut map = vec![usize::MAX; d];
        let mut kept = Vec::new();
        for i in 0..d {
            if changes[i] {
                map[i] = kept.len();
                kept.push(self.species[i].clone());
            } else {
                self.notes
                    .push(format!("dropped unused species {}", self.species[i]));
            }
        }
        self.reactions = self
            .reactions
            .iter()
            .map(|rx| Reaction::new(rx.reactant.remap(&map), rx.product.remap(&map)))
            .collect();
        self.species = kept;
        Ok(())
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn kinetics(&self) -> &[RateLaw] {
        &self.kinetics
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn is_empty(&self) -> bool {
        self.reactions.is_empty()
    }

    /// Mass-action rate constant of reaction `i`, when applicable.
    pub fn mass_action_rate(&self, i: usize) -> Option<f64> {
        match self.kinetics.get(i)? {
            RateLaw::MassAction { rate } => Some(*rate),
            RateLaw::Tabulated { .. } => None,
        }
    }

    pub fn is_mass_action(&self) -> bool {
        self.kinetics
            .iter()
            .all(|k| matches!(k, RateLaw::MassAction { .. }))
    }

    /// Propensity of reaction `i` at `state`: kappa * state^(reactant) for
    /// mass action, zero whenever the state does not dominate the reactant.
    pub fn propensity(&self, i: usize, state: &[u64]) -> Result<f64, ModelError> {
        let n = self.reactions.len();
        let rx = self
            .reactions
            .get(i)
            .ok_or(ModelError::ReactionIndex(i, n))?;
        if state.len() != self.dim() {
            return Err(ModelError::DimensionMismatch(state.len(), self.dim()));
        }
        Ok(propensity_of(rx, &self.kinetics[i], state))
    }

    /// Dense reaction vector of reaction `i`.
    pub fn reaction_vector(&self, i: usize) -> Result<Vec<i64>, ModelError> {
        let n = self.reactions.len();
        let rx = self
            .reactions
            .get(i)
            .ok_or(ModelError::ReactionIndex(i, n))?;
        Ok(rx.vector(self.dim()))
    }

    /// Maximum reactant l1-norm; the network is first order iff this is <= 1.
    pub fn molecularity(&self) -> Result<u64, ModelError> {
        if self.reactions.is_empty() {
            return Err(ModelError::EmptyNetwork);
        }
        Ok(self
            .reactions
            .iter()
            .map(Reaction::molecularity)
            .max()
            .unwrap())
    }

    pub fn is_first_order(&self) -> bool {
        self.reactions.iter().all(|r| r.molecularity() <= 1)
    }

    /// Sub-network with the given reaction indices, over the same species.
    pub fn restrict(&self, indices: &[usize]) -> Result<ReactionNetwork, ModelError> {
        let mut rx = Vec::with_capacity(indices.len());
        for &i in indices {
            let n = self.reactions.len();
            let r = self
                .reactions
                .get(i)
                .ok_or(ModelError::ReactionIndex(i, n))?;
            rx.push((r.clone(), self.kinetics[i].clone()));
        }
        let mut out = ReactionNetwork {
            species: self.species.clone(),
            reactions: Vec::new(),
            kinetics: Vec::new(),
            notes: Vec::new(),
            name: None,
        };
        for (r, k) in rx {
            out.reactions.push(r);
            out.kinetics.push(k);
        }
        Ok(out)
    }

    /// Internal constructor for already-validated parts (subnetworks,
    /// monomerizations). Skips duplicate merging and catalytic checks.
    pub(crate) fn from_parts(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        kinetics: Vec<RateLaw>,
    ) -> ReactionNetwork {
        ReactionNetwork {
            species,
            reactions,
            kinetics,
            notes: Vec::new(),
            name: None,
        }
    }

    pub fn complex_text(&self, c: &Complex) -> String {
        if c.is_zero() {
            return "0".into();
        }
        c.iter()
            .map(|(s, k)| {
                if k == 1 {
                    self.species[s].clone()
                } else {
                    format!("{k}{}", self.species[s])
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn reaction_text(&self, rx: &Reaction) -> String {
        format!(
            "{} -> {}",
            self.complex_text(&rx.reactant),
            self.complex_text(&rx.product)
        )
    }
}

pub(crate) fn propensity_of(rx: &Reaction, law: &RateLaw, state: &[u64]) -> f64 {
    match law {
        RateLaw::MassAction { rate } => {
            let mut p = *rate;
            for (s, c) in rx.reactant.iter() {
                let have = state[s];
                if have < c {
                    return 0.0;
                }
                for l in 0..c {
                    p *= (have - l) as f64;
                }
            }
            p
        }
        RateLaw::Tabulated { base, overrides } => {
            if let Some((_, v)) = overrides.iter().find(|(s, _)| s == state) {
                *v
            } else if rx.reactant.dominated_by(state) {
                *base
            } else {
                0.0
            }
        }
    }
}

fn merge_laws(a: &RateLaw, b: &RateLaw) -> Option<RateLaw> {
    match (a, b) {
        (RateLaw::MassAction { rate: ra }, RateLaw::MassAction { rate: rb }) => {
            Some(RateLaw::MassAction { rate: ra + rb })
        }
        (
            RateLaw::Tabulated {
                base: ba,
                overrides: oa,
            },
            RateLaw::Tabulated {
                base: bb,
                overrides: ob,
            },
        ) => {
            // lambda1 + lambda2 pointwise: overridden states take the other
            // law's value at that state into the merged override.
            let mut merged: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
            for (s, v) in oa {
                let other = ob
                    .iter()
                    .find(|(t, _)| t == s)
                    .map(|(_, w)| *w)
                    .unwrap_or(*bb);
                merged.insert(s.clone(), v + other);
            }
            for (s, v) in ob {
                merged.entry(s.clone()).or_insert(v + ba);
            }
            Some(RateLaw::Tabulated {
                base: ba + bb,
                overrides: merged.into_iter().collect(),
            })
        }
        _ => None,
    }
}

/// Joint of two reaction systems over merged species lists: the union of the
/// reaction sets, with propensities of shared reactions summed.
pub fn join(a: &ReactionNetwork, b: &ReactionNetwork) -> Result<ReactionNetwork, ModelError> {
    let mut species = a.species.clone();
    let mut b_map = vec![0usize; b.species.len()];
    for (i, name) in b.species.iter().enumerate() {
        if let Some(j) = species.iter().position(|s| s == name) {
            b_map[i] = j;
        } else {
            b_map[i] = species.len();
            species.push(name.clone());
        }
    }

    let mut pairs: Vec<(Reaction, RateLaw)> = a
        .reactions
        .iter()
        .cloned()
        .zip(a.kinetics.iter().cloned())
        .collect();
    for (rx, law) in b.reactions.iter().zip(&b.kinetics) {
        let remapped = Reaction::new(rx.reactant.remap(&b_map), rx.product.remap(&b_map));
        pairs.push((remapped, law.clone()));
    }
    ReactionNetwork::new(species, pairs, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn net(reactions: &[(&[(usize, u64)], &[(usize, u64)], f64)], d: usize) -> ReactionNetwork {
        let species = (1..=d).map(|i| format!("S{i}")).collect();
        let pairs = reactions
            .iter()
            .map(|(y, yp, k)| {
                (
                    Reaction::new(
                        Complex::from_pairs(y.iter().copied()),
                        Complex::from_pairs(yp.iter().copied()),
                    ),
                    RateLaw::mass_action(*k),
                )
            })
            .collect();
        ReactionNetwork::new(species, pairs, false).unwrap()
    }

    #[test]
    fn propensity_descending_factorial() {
        // y = 2 S1, kappa = 2, x = (3) -> 2 * 3 * 2 = 12
        let n = net(&[(&[(0, 2)], &[(0, 1)], 2.0)], 1);
        assert_eq!(n.propensity(0, &[3]).unwrap(), 12.0);
        // zero reactant: empty product
        let n = net(&[(&[], &[(0, 1)], 5.0)], 1);
        assert_eq!(n.propensity(0, &[7]).unwrap(), 5.0);
        // x does not dominate y
        let n = net(&[(&[(0, 1), (1, 1)], &[(0, 2)], 1.0)], 2);
        assert_eq!(n.propensity(0, &[0, 7]).unwrap(), 0.0);
    }

    #[test]
    fn propensity_index_error() {
        let n = net(&[(&[], &[(0, 1)], 1.0)], 1);
        assert!(n.propensity(3, &[0]).is_err());
    }

    #[test]
    fn reaction_vectors() {
        // S2 -> S1 + S2
        let rx = Reaction::new(Complex::unit(1), Complex::from_pairs([(0, 1), (1, 1)]));
        assert_eq!(rx.vector(2), vec![1, 0]);
        // 0 -> S1 + S2
        let n = net(&[(&[], &[(0, 1), (1, 1)], 1.0)], 2);
        assert_eq!(n.reaction_vector(0).unwrap(), vec![1, 1]);
        // 2 S1 -> S1
        let n = net(&[(&[(0, 2)], &[(0, 1)], 1.0)], 1);
        assert_eq!(n.reaction_vector(0).unwrap(), vec![-1]);
    }

    #[test]
    fn molecularity_cases() {
        let n = net(&[(&[(0, 1)], &[(1, 1)], 1.0), (&[], &[(0, 1)], 1.0)], 2);
        assert_eq!(n.molecularity().unwrap(), 1);
        // S1 + 2 S2 -> 4 S2
        let n = net(&[(&[(0, 1), (1, 2)], &[(1, 4)], 1.0)], 2);
        assert_eq!(n.molecularity().unwrap(), 3);
        let n = net(&[(&[], &[(0, 1), (1, 1)], 1.0)], 2);
        assert_eq!(n.molecularity().unwrap(), 0);
        let empty = ReactionNetwork::new(vec!["S1".into()], vec![], false);
        assert!(empty.is_err() || empty.unwrap().molecularity().is_err());
    }

    #[test]
    fn join_sums_shared_rates() {
        let a = net(&[(&[(0, 1)], &[], 1.0)], 1);
        let b = net(&[(&[(0, 1)], &[], 2.0)], 1);
        let j = join(&a, &b).unwrap();
        assert_eq!(j.reactions().len(), 1);
        assert_eq!(j.mass_action_rate(0), Some(3.0));

        let c = net(&[(&[], &[(0, 1)], 2.0)], 1);
        let j = join(&a, &c).unwrap();
        assert_eq!(j.reactions().len(), 2);
        assert_eq!(j.mass_action_rate(0), Some(1.0));
        assert_eq!(j.mass_action_rate(1), Some(2.0));
    }

    #[test]
    fn join_merges_species_by_name() {
        let a = net(&[(&[(0, 1)], &[(1, 1)], 1.0)], 2); // S1 -> S2
        let mut b_species = vec!["S2".to_string(), "S3".to_string()];
        b_species.rotate_left(0);
        let b = ReactionNetwork::new(
            b_species,
            vec![(
                Reaction::new(Complex::unit(0), Complex::unit(1)),
                RateLaw::mass_action(1.0),
            )],
            false,
        )
        .unwrap(); // S2 -> S3
        let j = join(&a, &b).unwrap();
        assert_eq!(j.species(), &["S1", "S2", "S3"]);
        assert_eq!(j.reaction_vector(1).unwrap(), vec![0, -1, 1]);
    }

    #[test]
    fn duplicate_merge_notes() {
        let species = vec!["S1".to_string()];
        let rx = Reaction::new(Complex::unit(0), Complex::zero());
        let n = ReactionNetwork::new(
            species,
            vec![
                (rx.clone(), RateLaw::mass_action(1.0)),
                (rx, RateLaw::mass_action(2.0)),
            ],
            false,
        )
        .unwrap();
        assert_eq!(n.reactions().len(), 1);
        assert_eq!(n.mass_action_rate(0), Some(3.0));
        assert_eq!(n.notes().len(), 1);
    }

    #[test]
    fn catalytic_species_handling() {
        // S1 + S2 -> S1 + S3: S1 never changes and sits in a reactant.
        let species = vec!["S1".to_string(), "S2".to_string(), "S3".to_string()];
        let rx = Reaction::new(
            Complex::from_pairs([(0, 1), (1, 1)]),
            Complex::from_pairs([(0, 1), (2, 1)]),
        );
        let err = ReactionNetwork::new(
            species.clone(),
            vec![(rx.clone(), RateLaw::mass_action(1.0))],
            false,
        );
        assert!(matches!(err, Err(ModelError::CatalyticRateDependence(_))));
        let err = ReactionNetwork::new(species, vec![(rx, RateLaw::mass_action(1.0))], true);
        assert!(matches!(err, Err(ModelError::PurelyCatalytic(_))));

        // An entirely unused species is dropped in non-strict mode.
        let species = vec!["S1".to_string(), "Ghost".to_string()];
        let rx = Reaction::new(Complex::unit(0), Complex::zero());
        let n =
            ReactionNetwork::new(species, vec![(rx, RateLaw::mass_action(1.0))], false).unwrap();
        assert_eq!(n.species(), &["S1"]);
        assert_eq!(n.notes().len(), 1);
    }

    #[test]
    fn tabulated_genericity_enforced() {
        let species = vec!["S1".to_string()];
        let rx = Reaction::new(Complex::unit(0), Complex::zero());
        // override claims positive propensity at a disabled state
        let bad = RateLaw::Tabulated {
            base: 1.0,
            overrides: vec![(vec![0], 2.0)],
        };
        assert!(ReactionNetwork::new(species.clone(), vec![(rx.clone(), bad)], false).is_err());
        let good = RateLaw::Tabulated {
            base: 1.0,
            overrides: vec![(vec![3], 9.0), (vec![0], 0.0)],
        };
        let n = ReactionNetwork::new(species, vec![(rx, good)], false).unwrap();
        assert_eq!(n.propensity(0, &[3]).unwrap(), 9.0);
        assert_eq!(n.propensity(0, &[2]).unwrap(), 1.0);
        assert_eq!(n.propensity(0, &[0]).unwrap(), 0.0);
    }
}
