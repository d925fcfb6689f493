//! Net flow matrices, Hurwitz/Metzler analysis, Lyapunov vector synthesis,
//! and drift-condition verification.
//!
//! The Hurwitz decision runs over two independent exact routes that must
//! agree: the leading-principal-minor test on the negated matrix and a linear
//! feasibility solve for {v > 0 : Av < 0}. Rate constants are doubles, which
//! convert losslessly to rationals, so both routes are exact. Drift
//! polynomials are expanded over exact rationals so that cancellations (a
//! virtual source whose outflows average out) are recognized identically,
//! not within a tolerance.

use crate::exact::{self, rat_from_f64, rat_from_i64, rat_to_f64, LpOutcome, Rat};
use crate::graph;
use crate::model::{ModelError, RateLaw, ReactionNetwork};
use crate::poly::MultiPoly;
use num::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

/// Strictness tolerance on float-assembled quantities. Exact rational paths
/// do not use it.
pub const FLOAT_STRICTNESS: f64 = 1e-9;

/// Fraction of the decay budget reserved for the exceptional radius.
pub const SLACK: f64 = 0.5;

/// Ray sublinearity tolerance for the grid+ray heuristic.
pub const RAY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("operation requires a first-order (sub)network; reaction {0} has molecularity {1}")]
    NotFirstOrder(usize, u64),
    #[error("operation requires mass-action kinetics (reaction {0})")]
    NotMassAction(usize),
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not Metzler: entry ({0},{1}) is negative")]
    NotMetzler(usize, usize),
    #[error("v must be strictly positive")]
    VNotPositive,
    #[error("dimension mismatch: expected {0}, got {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid core: {0}")]
    InvalidCore(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("internal invariant failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The net flow matrix A and constant inflow vector b of a first-order
/// (sub)network, projected onto `species`: row i of A sums kappa * (y' - y)
/// over reactions with reactant e_{species[i]}, and b_i sums kappa * y'_i
/// over zero-reactant reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct NetFlow {
    pub species: Vec<usize>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl NetFlow {
    pub fn dim(&self) -> usize {
        self.species.len()
    }

    fn a_exact(&self) -> Vec<Vec<Rat>> {
        self.a
            .iter()
            .map(|row| row.iter().map(|&x| rat_from_f64(x)).collect())
            .collect()
    }
}

/// Builds the net flow data of `net` restricted to `species_subset`. Every
/// reaction must have reactant 0 or e_i with i in the subset, and mass-action
/// kinetics; product components outside the subset do not contribute.
pub fn net_flow(net: &ReactionNetwork, species_subset: &[usize]) -> Result<NetFlow, StabilityError> {
    let d = net.dim();
    let m = species_subset.len();
    let slot = {
        let mut map = vec![usize::MAX; d];
        for (k, &s) in species_subset.iter().enumerate() {
            map[s] = k;
        }
        map
    };
    let mut a = vec![vec![0.0f64; m]; m];
    let mut b = vec![0.0f64; m];
    for (i, rx) in net.reactions().iter().enumerate() {
        let kappa = net
            .mass_action_rate(i)
            .ok_or(StabilityError::NotMassAction(i))?;
        let mol = rx.molecularity();
        if mol > 1 {
            return Err(StabilityError::NotFirstOrder(i, mol));
        }
        let vector = rx.vector(d);
        if rx.reactant.is_zero() {
            for (s, c) in rx.product.iter() {
                if slot[s] != usize::MAX {
                    b[slot[s]] += kappa * c as f64;
                }
            }
        } else {
            let src = rx.reactant.support().next().expect("unit reactant");
            let row = slot[src];
            if row == usize::MAX {
                return Err(StabilityError::InvalidCore(format!(
                    "reaction {i} has reactant outside the species subset"
                )));
            }
            for (j, &s) in species_subset.iter().enumerate() {
                a[row][j] += kappa * vector[s] as f64;
            }
        }
    }
    debug_assert!(a
        .iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &x)| i == j || x >= 0.0)));
    Ok(NetFlow {
        species: species_subset.to_vec(),
        a,
        b,
    })
}

fn check_metzler(a: &[Vec<f64>]) -> Result<(), StabilityError> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(StabilityError::NotSquare);
        }
        for (j, &x) in row.iter().enumerate() {
            if i != j && x < 0.0 {
                return Err(StabilityError::NotMetzler(i, j));
            }
        }
    }
    Ok(())
}

/// Hurwitz stability of a Metzler matrix, decided by two independent exact
/// routes that must agree:
/// (a) all leading principal minors of -A are positive (M-matrix test),
/// (b) feasibility of {v > 0 : Av < 0} by exact simplex.
pub fn is_hurwitz(a: &[Vec<f64>]) -> Result<bool, StabilityError> {
    check_metzler(a)?;
    let n = a.len();
    if n == 0 {
        return Ok(true);
    }
    let exact: Vec<Vec<Rat>> = a
        .iter()
        .map(|row| row.iter().map(|&x| rat_from_f64(x)).collect())
        .collect();

    let neg: Vec<Vec<Rat>> = exact
        .iter()
        .map(|row| row.iter().map(|x| -x.clone()).collect())
        .collect();
    let route_a = exact::leading_principal_minors(&neg)
        .iter()
        .all(Signed::is_positive);

    let route_b = hurwitz_feasibility(&exact);

    if route_a != route_b {
        return Err(StabilityError::Internal(format!(
            "Hurwitz routes disagree: minors say {route_a}, feasibility says {route_b}"
        )));
    }
    Ok(route_a)
}

/// max t s.t. sum v = 1, v_i >= t, -(Av)_i >= t; Hurwitz iff optimum > 0.
fn hurwitz_feasibility(a: &[Vec<Rat>]) -> bool {
    let n = a.len();
    // variables: v_1..v_n, t+, t-, slacks s_1..s_n, r_1..r_n
    let nv = n + 2 + 2 * n;
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    let mut rhs: Vec<Rat> = Vec::new();

    let mut norm = vec![Rat::zero(); nv];
    for item in norm.iter_mut().take(n) {
        *item = Rat::one();
    }
    rows.push(norm);
    rhs.push(Rat::one());

    for i in 0..n {
        // v_i - t - s_i = 0
        let mut row = vec![Rat::zero(); nv];
        row[i] = Rat::one();
        row[n] = -Rat::one();
        row[n + 1] = Rat::one();
        row[n + 2 + i] = -Rat::one();
        rows.push(row);
        rhs.push(Rat::zero());
        // -(Av)_i - t - r_i = 0
        let mut row = vec![Rat::zero(); nv];
        for j in 0..n {
            row[j] = -a[i][j].clone();
        }
        row[n] = -Rat::one();
        row[n + 1] = Rat::one();
        row[n + 2 + n + i] = -Rat::one();
        rows.push(row);
        rhs.push(Rat::zero());
    }
    let mut c = vec![Rat::zero(); nv];
    c[n] = Rat::one();
    c[n + 1] = -Rat::one();
    match exact::simplex_maximize(&rows, &rhs, &c) {
        LpOutcome::Optimal { objective, .. } => objective.is_positive(),
        LpOutcome::Infeasible => unreachable!("t is free; the program is feasible"),
        LpOutcome::Unbounded => unreachable!("t <= max v_i <= 1"),
    }
}

/// For a Hurwitz Metzler matrix, the canonical positive vector v0 = -A^{-1} 1
/// with A v0 = -1 < 0; `None` when A is not Hurwitz. The remark-style
/// construction v0' = (I_ones - eps A^{-1}) 1 is evaluated as a cross-check
/// whenever A 1 <= 0, where it must also yield a decrease vector.
pub fn find_lyapunov_vector(a: &[Vec<f64>]) -> Result<Option<Vec<f64>>, StabilityError> {
    if !is_hurwitz(a)? {
        return Ok(None);
    }
    let n = a.len();
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    let exact_a: Vec<Vec<Rat>> = a
        .iter()
        .map(|row| row.iter().map(|&x| rat_from_f64(x)).collect())
        .collect();
    let minus_one = vec![-Rat::one(); n];
    let v0 = exact::solve(&exact_a, &minus_one)
        .ok_or_else(|| StabilityError::Internal("Hurwitz matrix is singular".into()))?;
    if !v0.iter().all(Signed::is_positive) {
        return Err(StabilityError::Internal(
            "v0 = -A^{-1} 1 must be positive for Hurwitz Metzler A".into(),
        ));
    }

    // Cross-check: when A 1 <= 0 the all-ones-matrix construction applies.
    let row_sums: Vec<Rat> = exact_a
        .iter()
        .map(|row| row.iter().cloned().sum::<Rat>())
        .collect();
    if row_sums.iter().all(|s| !s.is_positive()) {
        let mut eps = Rat::one();
        let mut ok = false;
        for _ in 0..64 {
            // (I_ones - eps A^{-1}) 1 = n*1 + eps*v0
            let cand: Vec<Rat> = v0
                .iter()
                .map(|v| rat_from_i64(n as i64) + &eps * v)
                .collect();
            let av: Vec<Rat> = exact_a
                .iter()
                .map(|row| row.iter().zip(&cand).map(|(a, x)| a * x).sum())
                .collect();
            if cand.iter().all(Signed::is_positive) && av.iter().all(Signed::is_negative) {
                ok = true;
                break;
            }
            eps /= rat_from_i64(2);
        }
        if !ok {
            return Err(StabilityError::Internal(
                "remark construction failed although A 1 <= 0".into(),
            ));
        }
    }
    Ok(Some(v0.iter().map(rat_to_f64).collect()))
}

/// Generator drift of the linear function v . x at state x: the exact sum of
/// lambda(x) * (v . (y' - y)) over all reactions.
pub fn drift(net: &ReactionNetwork, v: &[f64], x: &[u64]) -> Result<f64, StabilityError> {
    let d = net.dim();
    if v.len() != d {
        return Err(StabilityError::DimensionMismatch(d, v.len()));
    }
    if x.len() != d {
        return Err(StabilityError::DimensionMismatch(d, x.len()));
    }
    let mut acc = 0.0;
    for i in 0..net.reactions().len() {
        let lambda = net.propensity(i, x)?;
        if lambda == 0.0 {
            continue;
        }
        let vec = net.reactions()[i].vector(d);
        let step: f64 = vec.iter().zip(v).map(|(&dv, &vi)| dv as f64 * vi).sum();
        acc += lambda * step;
    }
    Ok(acc)
}

/// Symbolic drift polynomial of a mass-action network for the linear function
/// v . x, with exact rational coefficients.
pub fn drift_polynomial(net: &ReactionNetwork, v: &[f64]) -> Result<MultiPoly, StabilityError> {
    let d = net.dim();
    if v.len() != d {
        return Err(StabilityError::DimensionMismatch(d, v.len()));
    }
    let v_exact: Vec<Rat> = v.iter().map(|&x| rat_from_f64(x)).collect();
    let mut total = MultiPoly::zero(d);
    for (i, rx) in net.reactions().iter().enumerate() {
        let kappa = net
            .mass_action_rate(i)
            .ok_or(StabilityError::NotMassAction(i))?;
        total.add_assign(&reaction_drift_poly(rx, kappa, &v_exact, d));
    }
    Ok(total)
}

fn reaction_drift_poly(
    rx: &crate::model::Reaction,
    kappa: f64,
    v_exact: &[Rat],
    d: usize,
) -> MultiPoly {
    let step: Rat = rx
        .vector(d)
        .iter()
        .zip(v_exact)
        .map(|(&dv, vi)| rat_from_i64(dv) * vi)
        .sum();
    let mut lambda = MultiPoly::constant(d, rat_from_f64(kappa));
    for (s, c) in rx.reactant.iter() {
        lambda = lambda.mul(&MultiPoly::falling_factorial(d, s, c as u32));
    }
    lambda.scale(&step)
}

/// A checkable certificate of exponential ergodicity: the drift of v . x is
/// at most -margin * (v . x) at every state with v . x > exceptional_radius
/// (relative to each closed class when the network has a nonzero part
/// outside the zero component; see `DriftReport::notes`).
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovCertificate {
    pub v: Vec<f64>,
    pub margin: f64,
    #[serde(serialize_with = "ceil_radius")]
    pub exceptional_radius: f64,
}

fn ceil_radius<S: serde::Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(r.ceil().max(0.0) as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftViolation {
    /// Witness state, when the violation is at a state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<u64>>,
    /// Row (species index) whose drift coefficient fails, for the linear
    /// verifier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub enum DriftStatus {
    Certified(LyapunovCertificate),
    Violated(DriftViolation),
    Inconclusive,
}

/// How a verdict was reached. Exact methods hold at every state (class-
/// relative when noted); `GridRay` is a heuristic over a finite grid plus
/// sampled rays and is labeled as such in JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriftMethod {
    #[serde(rename = "linear-exact")]
    LinearExact,
    #[serde(rename = "decreasing-exact")]
    DecreasingExact,
    #[serde(rename = "v-decreasing-exact")]
    VDecreasingExact,
    #[serde(rename = "bounded-exact")]
    BoundedExact,
    #[serde(rename = "zero-excess-exact")]
    ZeroExcessExact,
    #[serde(rename = "grid+ray")]
    GridRay,
    #[serde(rename = "finite-classes")]
    FiniteClasses,
}

#[derive(Debug, Clone)]
pub struct DriftVerdict {
    pub status: DriftStatus,
    pub method: DriftMethod,
    /// Symbolic excess of the non-core reactions (mass-action case).
    pub excess: Option<MultiPoly>,
    pub notes: Vec<String>,
}

impl DriftVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self.status, DriftStatus::Certified(_))
    }

    pub fn certificate(&self) -> Option<&LyapunovCertificate> {
        match &self.status {
            DriftStatus::Certified(c) => Some(c),
            _ => None,
        }
    }
}

/// Exact linear drift verification for a first-order mass-action network.
///
/// Splits off the zero component; rows of A on zero-component species must be
/// strictly v-decreasing, remaining rows must be non-increasing (their
/// species live in finite classes when the rest is conservative, which is
/// checked and reported). Certified margin is (1-SLACK) * min_i(-(Av)_i/v_i)
/// over the zero rows and the radius is (b.v)/(SLACK*margin).
pub fn verify_drift_linear(
    net: &ReactionNetwork,
    v: &[f64],
) -> Result<DriftVerdict, StabilityError> {
    let d = net.dim();
    if v.len() != d {
        return Err(StabilityError::DimensionMismatch(d, v.len()));
    }
    if !v.iter().all(|&x| x > 0.0) {
        return Err(StabilityError::VNotPositive);
    }
    for (i, rx) in net.reactions().iter().enumerate() {
        let mol = rx.molecularity();
        if mol > 1 {
            return Err(StabilityError::NotFirstOrder(i, mol));
        }
        if net.mass_action_rate(i).is_none() {
            return Err(StabilityError::NotMassAction(i));
        }
    }
    let split = graph::zero_split(net);
    let v_exact: Vec<Rat> = v.iter().map(|&x| rat_from_f64(x)).collect();

    // Row coefficients (Av)_i over all species, exact.
    let mut row_coeff: Vec<Rat> = vec![Rat::zero(); d];
    let mut b_dot_v = Rat::zero();
    for (i, rx) in net.reactions().iter().enumerate() {
        let kappa = rat_from_f64(net.mass_action_rate(i).expect("checked"));
        let step: Rat = rx
            .vector(d)
            .iter()
            .zip(&v_exact)
            .map(|(&dv, vi)| rat_from_i64(dv) * vi)
            .sum();
        if rx.reactant.is_zero() {
            b_dot_v += &kappa * &step;
        } else {
            let src = rx.reactant.support().next().expect("unit reactant");
            row_coeff[src] = &row_coeff[src] + &kappa * &step;
        }
    }

    let mut notes = Vec::new();
    let in_zero = |i: usize| split.zero_species.contains(&i);

    if split.zero_species.is_empty() {
        notes.push(
            "network has no zero component: no ambient linear drift certificate exists; \
             exponential ergodicity on each finite closed class holds when the network \
             is conservative"
                .to_string(),
        );
        notes.push(format!("conservative: {}", graph::is_conservative(net)));
        return Ok(DriftVerdict {
            status: DriftStatus::Inconclusive,
            method: DriftMethod::LinearExact,
            excess: None,
            notes,
        });
    }

    for i in 0..d {
        let coef = &row_coeff[i];
        if in_zero(i) {
            if !coef.is_negative() {
                return Ok(DriftVerdict {
                    status: DriftStatus::Violated(DriftViolation {
                        state: Some(unit_state(d, i)),
                        row: Some(i),
                        value: rat_to_f64(coef),
                    }),
                    method: DriftMethod::LinearExact,
                    excess: None,
                    notes,
                });
            }
        } else if coef.is_positive() {
            return Ok(DriftVerdict {
                status: DriftStatus::Violated(DriftViolation {
                    state: Some(unit_state(d, i)),
                    row: Some(i),
                    value: rat_to_f64(coef),
                }),
                method: DriftMethod::LinearExact,
                excess: None,
                notes,
            });
        }
    }

    // margin over the zero rows
    let decay = split
        .zero_species
        .iter()
        .map(|&i| -&row_coeff[i] / &v_exact[i])
        .min()
        .expect("zero part nonempty");
    let margin_exact = rat_from_f64(1.0 - SLACK) * &decay;
    let margin = rat_to_f64(&margin_exact);
    let radius = if b_dot_v.is_zero() {
        0.0
    } else {
        rat_to_f64(&(&b_dot_v / (rat_from_f64(SLACK) * &margin_exact)))
    };
    if d > split.zero_species.len() {
        let conservative_rest = graph::is_conservative(&split.rest);
        notes.push(format!(
            "class-relative: {} species lie outside the zero component; their closed \
             classes are finite iff that part is conservative (checked: {})",
            d - split.zero_species.len(),
            conservative_rest
        ));
    }
    Ok(DriftVerdict {
        status: DriftStatus::Certified(LyapunovCertificate {
            v: v.to_vec(),
            margin,
            exceptional_radius: radius,
        }),
        method: DriftMethod::LinearExact,
        excess: None,
        notes,
    })
}

fn unit_state(d: usize, i: usize) -> Vec<u64> {
    let mut x = vec![0; d];
    x[i] = 1;
    x
}

/// Sub-network drift verification for a network dominated by a first-order
/// endotactic core.
///
/// Decision ladder over the extra reactions (everything outside the core's
/// zero component):
/// 1. all decreasing (y' <= y): certified exactly;
/// 2. all v-decreasing (v.(y'-y) <= 0): certified exactly;
/// 3. all v-increasing extras have bounded (tabulated) propensities:
///    certified exactly;
/// 4. the symbolic excess polynomial is identically zero: certified exactly;
/// 5. otherwise grid + ray heuristic: scan the full-drift inequality on the
///    grid and the excess/|x|_1 ratio along sampled integer rays. The
///    resulting certificate is labeled "grid+ray".
pub fn verify_drift_sub(
    net: &ReactionNetwork,
    core: &[usize],
    v: &[f64],
    grid_radius: u64,
) -> Result<DriftVerdict, StabilityError> {
    let d = net.dim();
    if v.len() != d {
        return Err(StabilityError::DimensionMismatch(d, v.len()));
    }
    if !v.iter().all(|&x| x > 0.0) {
        return Err(StabilityError::VNotPositive);
    }
    let mut seen = vec![false; net.reactions().len()];
    for &i in core {
        if i >= net.reactions().len() || seen[i] {
            return Err(StabilityError::InvalidCore(format!(
                "core index {i} out of range or repeated"
            )));
        }
        seen[i] = true;
    }
    let core_net = net.restrict(core)?;
    if core_net.is_empty() {
        return Err(StabilityError::InvalidCore("core is empty".into()));
    }
    let mol = core_net.molecularity().map_err(StabilityError::Model)?;
    if mol > 1 {
        return Err(StabilityError::InvalidCore(format!(
            "core has molecularity {mol}"
        )));
    }
    match crate::endotactic::is_endotactic_first_order(&core_net) {
        Ok(true) => {}
        Ok(false) => {
            return Err(StabilityError::InvalidCore(
                "core is not endotactic".into(),
            ))
        }
        Err(e) => return Err(StabilityError::Precondition(e.to_string())),
    }

    // Zero component of the core, as indices into the original network.
    let core_split = graph::zero_split(&core_net);
    let core_zero: Vec<usize> = core_split
        .zero_reactions
        .iter()
        .map(|&k| core[k])
        .collect();
    let zero_species = core_split.zero_species.clone();
    let v_exact: Vec<Rat> = v.iter().map(|&x| rat_from_f64(x)).collect();

    let mut notes = Vec::new();

    // A0 v0 < 0 is a precondition of every certificate below.
    let (margin_exact, b0_dot_v) = {
        if zero_species.is_empty() {
            return Err(StabilityError::Precondition(
                "core zero component is empty; use the conservative finite-class argument instead"
                    .into(),
            ));
        }
        let zero_net = net.restrict(&core_zero)?;
        let flow = net_flow(&zero_net, &zero_species)?;
        let a = flow.a_exact();
        let v0: Vec<Rat> = zero_species.iter().map(|&s| v_exact[s].clone()).collect();
        let av: Vec<Rat> = a
            .iter()
            .map(|row| row.iter().zip(&v0).map(|(a, x)| a * x).sum())
            .collect();
        if let Some(i) = av.iter().position(|x| !x.is_negative()) {
            return Err(StabilityError::Precondition(format!(
                "A0 v0 is not strictly negative at row {i} (species {})",
                net.species()[zero_species[i]]
            )));
        }
        let decay = av
            .iter()
            .zip(&v0)
            .map(|(ai, vi)| -ai / vi)
            .min()
            .expect("nonempty");
        let b_dot: Rat = flow
            .b
            .iter()
            .zip(&v0)
            .map(|(&b, vi)| rat_from_f64(b) * vi)
            .sum();
        (rat_from_f64(1.0 - SLACK) * decay, b_dot)
    };
    let margin = rat_to_f64(&margin_exact);
    let base_radius = if b0_dot_v.is_zero() {
        0.0
    } else {
        rat_to_f64(&(&b0_dot_v / (rat_from_f64(SLACK) * &margin_exact)))
    };

    let extras: Vec<usize> = (0..net.reactions().len())
        .filter(|i| !core_zero.contains(i))
        .collect();
    let certificate = |radius: f64| LyapunovCertificate {
        v: v.to_vec(),
        margin,
        exceptional_radius: radius,
    };
    if !zero_species.is_empty() && zero_species.len() < d {
        notes.push(
            "class-relative: the certificate controls the core zero component; species \
             outside it must lie in finite classes on the certified communicating class"
                .to_string(),
        );
    }

    // (1) every extra reaction decreasing
    let decreasing = extras.iter().all(|&i| {
        let rx = &net.reactions()[i];
        rx.vector(d).iter().all(|&x| x <= 0)
    });
    if decreasing {
        return Ok(DriftVerdict {
            status: DriftStatus::Certified(certificate(base_radius)),
            method: DriftMethod::DecreasingExact,
            excess: None,
            notes,
        });
    }

    // (2) every extra reaction v-decreasing
    let v_step = |i: usize| -> Rat {
        net.reactions()[i]
            .vector(d)
            .iter()
            .zip(&v_exact)
            .map(|(&dv, vi)| rat_from_i64(dv) * vi)
            .sum()
    };
    if extras.iter().all(|&i| !v_step(i).is_positive()) {
        return Ok(DriftVerdict {
            status: DriftStatus::Certified(certificate(base_radius)),
            method: DriftMethod::VDecreasingExact,
            excess: None,
            notes,
        });
    }

    // (3) v-increasing extras all have bounded propensities: tabulated
    // kinetics, or mass action from the zero complex (a constant rate)
    let bounded = |i: usize| match &net.kinetics()[i] {
        RateLaw::Tabulated { .. } => true,
        RateLaw::MassAction { .. } => net.reactions()[i].reactant.is_zero(),
    };
    let increasing: Vec<usize> = extras
        .iter()
        .copied()
        .filter(|&i| v_step(i).is_positive())
        .collect();
    if increasing.iter().all(|&i| bounded(i)) {
        notes.push(format!(
            "{} v-increasing extra reaction(s) have bounded propensities",
            increasing.len()
        ));
        return Ok(DriftVerdict {
            status: DriftStatus::Certified(certificate(base_radius)),
            method: DriftMethod::BoundedExact,
            excess: None,
            notes,
        });
    }

    // Symbolic path requires mass action on the extras.
    for &i in &extras {
        if net.mass_action_rate(i).is_none() {
            notes.push(format!(
                "reaction {i} is not mass-action; no exact case applies and the symbolic \
                 excess is unavailable"
            ));
            return Ok(DriftVerdict {
                status: DriftStatus::Inconclusive,
                method: DriftMethod::GridRay,
                excess: None,
                notes,
            });
        }
    }
    let mut excess = MultiPoly::zero(d);
    for &i in &extras {
        let kappa = net.mass_action_rate(i).expect("checked");
        excess.add_assign(&reaction_drift_poly(&net.reactions()[i], kappa, &v_exact, d));
    }

    // (4) exact cancellation
    if excess.is_zero() {
        notes.push("excess is identically zero (f = 0)".to_string());
        return Ok(DriftVerdict {
            status: DriftStatus::Certified(certificate(base_radius)),
            method: DriftMethod::ZeroExcessExact,
            excess: Some(excess),
            notes,
        });
    }

    // (5) grid + ray heuristic on the full drift inequality
    grid_ray(net, v, margin, base_radius, grid_radius, excess, notes)
}

fn grid_ray(
    net: &ReactionNetwork,
    v: &[f64],
    margin: f64,
    base_radius: f64,
    grid_radius: u64,
    excess: MultiPoly,
    mut notes: Vec<String>,
) -> Result<DriftVerdict, StabilityError> {
    let d = net.dim();

    // Ray check first: excess(x)/|x|_1 must fall below RAY_TOLERANCE at the
    // outermost sample of every ray; clear growth is a refutation witness.
    let rays = sample_rays(net, d);
    let near = grid_radius.max(1);
    let far = 8 * near;
    for ray in &rays {
        let samples = [near, 2 * near, 4 * near, far];
        let ratios: Vec<f64> = samples
            .iter()
            .map(|&t| {
                let x: Vec<f64> = ray.iter().map(|&r| (r * t) as f64).collect();
                let l1: f64 = x.iter().sum();
                excess.eval_f64(&x) / l1.max(1.0)
            })
            .collect();
        let last = ratios[ratios.len() - 1];
        if last > RAY_TOLERANCE {
            let mid = ratios[1];
            let witness: Vec<u64> = ray.iter().map(|&r| r * far).collect();
            if last > 1.5 * mid.max(0.0) {
                notes.push(format!(
                    "excess grows superlinearly along ray {ray:?}: ratio {mid:.3e} -> {last:.3e}"
                ));
                return Ok(DriftVerdict {
                    status: DriftStatus::Violated(DriftViolation {
                        state: Some(witness),
                        row: None,
                        value: last,
                    }),
                    method: DriftMethod::GridRay,
                    excess: Some(excess),
                    notes,
                });
            }
            notes.push(format!(
                "excess/|x| stays at {last:.3e} > {RAY_TOLERANCE:.0e} along ray {ray:?}"
            ));
            return Ok(DriftVerdict {
                status: DriftStatus::Inconclusive,
                method: DriftMethod::GridRay,
                excess: Some(excess),
                notes,
            });
        }
    }

    // Grid scan of the certified inequality drift(x) <= -margin * (v.x).
    let mut violations = 0usize;
    let mut max_violation_vx: f64 = 0.0;
    let mut shell_violation: Option<Vec<u64>> = None;
    let mut state = vec![0u64; d];
    loop {
        let dr = drift(net, v, &state)?;
        let vx: f64 = state.iter().zip(v).map(|(&x, &vi)| x as f64 * vi).sum();
        if dr > -margin * vx + FLOAT_STRICTNESS {
            violations += 1;
            max_violation_vx = max_violation_vx.max(vx);
            if state.iter().any(|&x| x == grid_radius) && shell_violation.is_none() {
                shell_violation = Some(state.clone());
            }
        }
        // odometer over {0..grid_radius}^d
        let mut k = 0;
        loop {
            if k == d {
                break;
            }
            if state[k] < grid_radius {
                state[k] += 1;
                break;
            }
            state[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    if let Some(witness) = shell_violation {
        notes.push(format!(
            "drift violations reach the grid shell (e.g. at {witness:?}); finiteness of \
             the violation set is not evidenced at this radius"
        ));
        return Ok(DriftVerdict {
            status: DriftStatus::Inconclusive,
            method: DriftMethod::GridRay,
            excess: Some(excess),
            notes,
        });
    }
    notes.push(format!(
        "{violations} grid state(s) violate the margin inequality inside radius {grid_radius}"
    ));
    let radius = base_radius.max(if violations > 0 {
        max_violation_vx + 1.0
    } else {
        0.0
    });
    Ok(DriftVerdict {
        status: DriftStatus::Certified(LyapunovCertificate {
            v: v.to_vec(),
            margin,
            exceptional_radius: radius,
        }),
        method: DriftMethod::GridRay,
        excess: Some(excess),
        notes,
    })
}

/// d axis rays, d mixed rays, and 64 seeded random non-negative rays.
fn sample_rays(net: &ReactionNetwork, d: usize) -> Vec<Vec<u64>> {
    use rand::{Rng, SeedableRng};
    let mut rays: Vec<Vec<u64>> = Vec::new();
    for i in 0..d {
        let mut r = vec![0u64; d];
        r[i] = 1;
        rays.push(r);
    }
    for i in 0..d {
        let mut r = vec![1u64; d];
        r[i] = 2;
        rays.push(r);
    }
    let seed = crate::parser::serialize(net)
        .bytes()
        .fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100000001b3)
        });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut produced = 0;
    let mut attempts = 0;
    while produced < 64 && attempts < 1024 {
        attempts += 1;
        let r: Vec<u64> = (0..d).map(|_| rng.gen_range(0..=4u64)).collect();
        if r.iter().all(|&x| x == 0) || rays.contains(&r) {
            continue;
        }
        rays.push(r);
        produced += 1;
    }
    rays
}

/// JSON payload for `kind: "drift"` (and the envelope for a bare
/// `kind: "lyapunov"` certificate reuses `LyapunovCertificate`).
#[derive(Debug, Serialize)]
pub struct DriftReport {
    pub status: &'static str,
    pub method: DriftMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<LyapunovCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<DriftViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_polynomial: Option<PolyJson>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct PolyJson {
    pub text: String,
    pub terms: Vec<PolyTermJson>,
}

#[derive(Debug, Serialize)]
pub struct PolyTermJson {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

pub fn poly_json(p: &MultiPoly) -> PolyJson {
    PolyJson {
        text: p.to_string(),
        terms: p
            .terms()
            .map(|(e, c)| PolyTermJson {
                coeff: rat_to_f64(c),
                exponents: e.clone(),
            })
            .collect(),
    }
}

pub fn drift_report(verdict: &DriftVerdict) -> DriftReport {
    let (status, certificate, violation) = match &verdict.status {
        DriftStatus::Certified(c) => ("certified", Some(c.clone()), None),
        DriftStatus::Violated(w) => ("violated", None, Some(w.clone())),
        DriftStatus::Inconclusive => ("inconclusive", None, None),
    };
    DriftReport {
        status,
        method: verdict.method,
        certificate,
        violation,
        excess_polynomial: verdict.excess.as_ref().map(poly_json),
        notes: verdict.notes.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn cycle() -> ReactionNetwork {
        parse("S1 -> S2 : 1\nS2 -> 0 : 1\n0 -> S1 + S2 : 1").unwrap()
    }

    #[test]
    fn net_flow_of_cycle() {
        let n = cycle();
        let flow = net_flow(&n, &[0, 1]).unwrap();
        assert_eq!(flow.a, vec![vec![-1.0, 1.0], vec![0.0, -1.0]]);
        assert_eq!(flow.b, vec![1.0, 1.0]);
        // A 1 = (0, -1)
        let row_sums: Vec<f64> = flow.a.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, vec![0.0, -1.0]);
    }

    #[test]
    fn net_flow_single_inflow() {
        let n = parse("0 -> S1 : 3").unwrap();
        let flow = net_flow(&n, &[0]).unwrap();
        assert_eq!(flow.a, vec![vec![0.0]]);
        assert_eq!(flow.b, vec![3.0]);
    }

    #[test]
    fn net_flow_rejects_higher_order() {
        let n = parse("2S1 -> S1 : 1").unwrap();
        assert!(net_flow(&n, &[0]).is_err());
    }

    #[test]
    fn hurwitz_cases() {
        assert!(is_hurwitz(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap());
        assert!(!is_hurwitz(&[vec![0.0]]).unwrap());
        assert!(!is_hurwitz(&[vec![-1.0, 2.0], vec![2.0, -1.0]]).unwrap());
        assert!(is_hurwitz(&[vec![-1.0, 0.5], vec![0.5, -1.0]]).unwrap());
        assert!(matches!(
            is_hurwitz(&[vec![-1.0, -0.5], vec![0.5, -1.0]]),
            Err(StabilityError::NotMetzler(0, 1))
        ));
    }

    #[test]
    fn hurwitz_scaling_invariance() {
        let a = vec![vec![-2.0, 1.0], vec![0.5, -3.0]];
        for alpha in [0.5, 2.0, 8.0] {
            let scaled: Vec<Vec<f64>> = a
                .iter()
                .map(|r| r.iter().map(|&x| alpha * x).collect())
                .collect();
            assert_eq!(is_hurwitz(&a).unwrap(), is_hurwitz(&scaled).unwrap());
        }
    }

    #[test]
    fn lyapunov_vector_construction() {
        let v = find_lyapunov_vector(&[vec![-1.0, 1.0], vec![0.0, -1.0]])
            .unwrap()
            .unwrap();
        assert_eq!(v, vec![2.0, 1.0]);
        let v = find_lyapunov_vector(&[vec![-4.0]]).unwrap().unwrap();
        assert_eq!(v, vec![0.25]);
        assert!(find_lyapunov_vector(&[vec![0.0]]).unwrap().is_none());
        // bifurcation example beyond the threshold
        let a = vec![vec![-1.0, 2.0], vec![2.0, -1.0]];
        assert!(find_lyapunov_vector(&a).unwrap().is_none());
    }

    #[test]
    fn drift_pure_death() {
        let n = parse("S1 -> 0 : 1").unwrap();
        assert_eq!(drift(&n, &[1.0], &[5]).unwrap(), -5.0);
    }

    #[test]
    fn drift_linear_cycle_certificate() {
        let n = cycle();
        let verdict = verify_drift_linear(&n, &[2.0, 1.0]).unwrap();
        let cert = verdict.certificate().expect("certified");
        assert!((cert.margin - 0.25).abs() < 1e-15);
        assert!((cert.exceptional_radius - 24.0).abs() < 1e-12);

        let verdict = verify_drift_linear(&n, &[1.0, 1.0]).unwrap();
        match &verdict.status {
            DriftStatus::Violated(w) => {
                assert_eq!(w.row, Some(0));
                assert_eq!(w.value, 0.0);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn drift_linear_birth_death() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let verdict = verify_drift_linear(&n, &[1.0]).unwrap();
        assert!(verdict.is_certified());
    }

    #[test]
    fn drift_linear_conservative_only_is_inconclusive() {
        let n = parse("S3 <-> S4 : 1, 1").unwrap();
        let verdict = verify_drift_linear(&n, &[1.0, 1.0]).unwrap();
        assert!(matches!(verdict.status, DriftStatus::Inconclusive));
        assert!(verdict.notes.iter().any(|n| n.contains("conservative")));
    }

    #[test]
    fn drift_polynomial_matches_direct_sum() {
        let n = cycle();
        let p = drift_polynomial(&n, &[2.0, 1.0]).unwrap();
        for x1 in 0..6u64 {
            for x2 in 0..6u64 {
                let direct = drift(&n, &[2.0, 1.0], &[x1, x2]).unwrap();
                let symbolic = p.eval_f64(&[x1 as f64, x2 as f64]);
                assert!(
                    (direct - symbolic).abs() <= 1e-9 * direct.abs().max(1.0),
                    "mismatch at ({x1},{x2}): {direct} vs {symbolic}"
                );
            }
        }
    }

    #[test]
    fn drift_sub_decreasing_case() {
        let v = vec![2.0, 1.0];
        let m = parse("0 -> S1 : 1\nS1 -> S2 : 1\nS2 -> 0 : 1\n2S1 + 2S2 -> S1 : 1").unwrap();
        let verdict = verify_drift_sub(&m, &[0, 1, 2], &v, 12).unwrap();
        assert_eq!(verdict.method, DriftMethod::DecreasingExact);
        assert!(verdict.is_certified());
    }

    #[test]
    fn drift_sub_bounded_case() {
        // a constant-rate inflow extra is bounded, the other extra is
        // v-decreasing
        let n = parse(
            "0 -> S1 : 1\nS1 -> S2 : 1\nS2 -> 0 : 1\n0 -> 2S1 + 2S2 : 1\n2S1 + 2S2 -> S1 : 1",
        )
        .unwrap();
        let verdict = verify_drift_sub(&n, &[0, 1, 2], &[2.0, 1.0], 12).unwrap();
        assert_eq!(verdict.method, DriftMethod::BoundedExact);
        assert!(verdict.is_certified());
    }

    #[test]
    fn drift_sub_v_decreasing_case() {
        // directional-decreasing example: S1 -> 2S2 has v.(y'-y) = 0 for
        // v = (2,1)
        let n = parse("0 -> S1 : 1\nS1 -> S2 : 1\nS2 -> 0 : 1\nS1 -> 2S2 : 1").unwrap();
        let verdict = verify_drift_sub(&n, &[0, 1, 2], &[2.0, 1.0], 12).unwrap();
        assert_eq!(verdict.method, DriftMethod::VDecreasingExact);
        assert!(verdict.is_certified());
    }

    #[test]
    fn drift_sub_rejects_bad_core() {
        let n = cycle();
        assert!(verify_drift_sub(&n, &[0, 0], &[2.0, 1.0], 10).is_err());
        assert!(verify_drift_sub(&n, &[9], &[2.0, 1.0], 10).is_err());
        assert!(verify_drift_sub(&n, &[0, 1, 2], &[2.0, -1.0], 10).is_err());
    }
}
