//! Stochastic simulation (Gillespie direct method), exact truncated
//! stationary distributions, and ergodicity diagnostics.
//!
//! Determinism contract: identical (network, x0, t_end, seed, event_cap)
//! yields an identical trace; replica ensembles derive per-replica seeds from
//! (seed, replica index) so results are independent of thread count and
//! replicas aggregate in index order.

use crate::model::ReactionNetwork;
use crate::statespace::{StateBox, StateSpaceError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default guard against explosive trajectories.
pub const DEFAULT_EVENT_CAP: u64 = 10_000_000;

/// Residual tolerance of the stationary solver.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

/// Above this class size the solver switches from a dense LU to power
/// iteration on the uniformized kernel.
const DENSE_SOLVE_LIMIT: usize = 2048;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("t_end must be positive")]
    NonPositiveHorizon,
    #[error("state dimension {0} does not match species count {1}")]
    DimensionMismatch(usize, usize),
    #[error("distributions live on different boxes")]
    BoxMismatch,
    #[error("stationary solve did not reach residual {want:.1e} (got {got:.1e})")]
    SolveFailed { want: f64, got: f64 },
    #[error("log-TV fit window is empty (convergence too fast or too slow for the grid)")]
    WindowEmpty,
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Why a trajectory stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// Reached t_end.
    Completed,
    /// Total propensity hit zero.
    Absorbed,
    /// Event cap reached; possible explosivity.
    EventCapReached,
}

/// One SSA trajectory: the event sequence and termination cause.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub initial: Vec<u64>,
    /// (event time, reaction index); times strictly increasing.
    pub events: Vec<(f64, usize)>,
    pub final_time: f64,
    pub final_state: Vec<u64>,
    pub termination: Termination,
}

impl SimulationTrace {
    /// Replays the trace, checking every event was enabled at its pre-state.
    pub fn replay_valid(&self, net: &ReactionNetwork) -> bool {
        let mut state = self.initial.clone();
        let mut t = 0.0;
        for &(time, r) in &self.events {
            if time <= t {
                return false;
            }
            let Ok(p) = net.propensity(r, &state) else {
                return false;
            };
            if p <= 0.0 {
                return false;
            }
            t = time;
            apply(&mut state, &net.reactions()[r].vector(net.dim()));
        }
        state == self.final_state
    }
}

fn apply(state: &mut [u64], vector: &[i64]) {
    for (x, &dv) in state.iter_mut().zip(vector) {
        *x = (*x as i64 + dv) as u64;
    }
}

/// Gillespie direct method: exponential holding time at the total rate, next
/// reaction chosen proportionally to its propensity.
pub fn ssa_run(
    net: &ReactionNetwork,
    x0: &[u64],
    t_end: f64,
    seed: u64,
    event_cap: u64,
) -> Result<SimulationTrace, SimError> {
    if !(t_end > 0.0) {
        return Err(SimError::NonPositiveHorizon);
    }
    if x0.len() != net.dim() {
        return Err(SimError::DimensionMismatch(x0.len(), net.dim()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = net.dim();
    let vectors: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.vector(d)).collect();
    let mut state = x0.to_vec();
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut propensities = vec![0.0f64; net.reactions().len()];

    let termination = loop {
        let mut total = 0.0;
        for (i, p) in propensities.iter_mut().enumerate() {
            *p = net.propensity(i, &state)?;
            total += *p;
        }
        if total <= 0.0 {
            break Termination::Absorbed;
        }
        let u: f64 = rng.gen::<f64>();
        let wait = -(1.0 - u).ln() / total;
        if t + wait > t_end {
            t = t_end;
            break Termination::Completed;
        }
        t += wait;
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = propensities.len() - 1;
        for (i, &p) in propensities.iter().enumerate() {
            if pick < p {
                chosen = i;
                break;
            }
            pick -= p;
        }
        apply(&mut state, &vectors[chosen]);
        events.push((t, chosen));
        if events.len() as u64 >= event_cap {
            break Termination::EventCapReached;
        }
    };
    Ok(SimulationTrace {
        initial: x0.to_vec(),
        final_time: t,
        final_state: state,
        events,
        termination,
    })
}

/// A probability vector over the states of a box.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub bx: StateBox,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// Total variation distance between two distributions on the same box.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64, SimError> {
    if p.bx != q.bx {
        return Err(SimError::BoxMismatch);
    }
    Ok(0.5
        * p.probabilities
            .iter()
            .zip(&q.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Normalized product of truncated Poisson marginals with the given means.
pub fn poisson_product(mean: &[f64], bx: StateBox) -> Distribution {
    assert_eq!(mean.len(), bx.dim);
    assert!(mean.iter().all(|&m| m > 0.0));
    // per-species truncated pmf
    let side = bx.cap as usize + 1;
    let mut marginals: Vec<Vec<f64>> = Vec::with_capacity(bx.dim);
    for &m in mean {
        let mut pmf = Vec::with_capacity(side);
        let mut w = (-m).exp();
        for k in 0..side {
            if k > 0 {
                w *= m / k as f64;
            }
            pmf.push(w);
        }
        let norm: f64 = pmf.iter().sum();
        for p in pmf.iter_mut() {
            *p /= norm;
        }
        marginals.push(pmf);
    }
    let mut probabilities = vec![0.0f64; bx.len()];
    for (idx, slot) in probabilities.iter_mut().enumerate() {
        let state = bx.decode(idx);
        *slot = state
            .iter()
            .enumerate()
            .map(|(i, &x)| marginals[i][x as usize])
            .product();
    }
    Distribution { bx, probabilities }
}

/// Result of the truncated stationary solve.
#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub dist: Distribution,
    /// max_x |(pi Q)(x)| over the anchor class.
    pub residual: f64,
    /// Mass on states with an enabled transition that exits the box, the
    /// truncation-error proxy.
    pub boundary_mass: f64,
    pub class_size: usize,
    pub solver: &'static str,
}

/// Stationary distribution of the truncated chain on the communicating class
/// of `anchor`, with out-of-box transitions dropped. The class must be closed
/// inside the box.
pub fn truncated_stationary(
    net: &ReactionNetwork,
    bx: StateBox,
    anchor: &[u64],
) -> Result<StationaryResult, SimError> {
    if anchor.len() != net.dim() || bx.dim != net.dim() {
        return Err(SimError::DimensionMismatch(anchor.len(), net.dim()));
    }
    if !bx.contains(anchor) {
        return Err(SimError::StateSpace(StateSpaceError::OutsideBox(
            anchor.to_vec(),
        )));
    }
    let d = net.dim();
    let vectors: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.vector(d)).collect();

    // Communicating class of the anchor: forward set intersected with the
    // backward set (via inverted moves).
    let start = bx.encode(anchor);
    let forward = flood(net, bx, &vectors, start, false);
    let backward = flood(net, bx, &vectors, start, true);
    let class: Vec<usize> = (0..bx.len())
        .filter(|&i| forward[i] && backward[i])
        .collect();
    let m = class.len();
    let mut slot = vec![usize::MAX; bx.len()];
    for (k, &i) in class.iter().enumerate() {
        slot[i] = k;
    }

    // Transition list within the class; detect leaks and boundary states.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut out_rate = vec![0.0f64; m];
    let mut touches_boundary = vec![false; m];
    for (k, &i) in class.iter().enumerate() {
        let state = bx.decode(i);
        for (r, vector) in vectors.iter().enumerate() {
            let p = net.propensity(r, &state)?;
            if p <= 0.0 {
                continue;
            }
            match step_index(&bx, &state, vector) {
                Some(j) => {
                    if slot[j] == usize::MAX {
                        return Err(SimError::StateSpace(
                            StateSpaceError::AnchorClassNotClosed(state),
                        ));
                    }
                    rows[k].push((slot[j], p));
                    out_rate[k] += p;
                }
                None => touches_boundary[k] = true,
            }
        }
    }

    let pi = if m <= DENSE_SOLVE_LIMIT {
        dense_stationary(&rows, &out_rate)
    } else {
        power_stationary(&rows, &out_rate)
    };
    // residual |pi Q|_inf
    let mut flow_in = vec![0.0f64; m];
    for (k, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            flow_in[j] += pi[k] * p;
        }
    }
    let residual = (0..m)
        .map(|k| (flow_in[k] - pi[k] * out_rate[k]).abs())
        .fold(0.0f64, f64::max);
    if !(residual < 1e-8) {
        return Err(SimError::SolveFailed {
            want: STATIONARY_TOLERANCE,
            got: residual,
        });
    }

    let mut probabilities = vec![0.0f64; bx.len()];
    let mut boundary_mass = 0.0;
    for (k, &i) in class.iter().enumerate() {
        probabilities[i] = pi[k];
        if touches_boundary[k] {
            boundary_mass += pi[k];
        }
    }
    Ok(StationaryResult {
        dist: Distribution { bx, probabilities },
        residual,
        boundary_mass,
        class_size: m,
        solver: if m <= DENSE_SOLVE_LIMIT {
            "dense-lu"
        } else {
            "power-iteration"
        },
    })
}

fn step_index(bx: &StateBox, state: &[u64], vector: &[i64]) -> Option<usize> {
    let side = bx.cap as usize + 1;
    let mut idx = 0usize;
    let mut stride = 1usize;
    for (i, &dv) in vector.iter().enumerate() {
        let x = state[i] as i64 + dv;
        if x < 0 || x > bx.cap as i64 {
            return None;
        }
        idx += x as usize * stride;
        stride *= side;
    }
    Some(idx)
}

/// BFS over enabled moves; `reverse` walks predecessors instead.
fn flood(
    net: &ReactionNetwork,
    bx: StateBox,
    vectors: &[Vec<i64>],
    start: usize,
    reverse: bool,
) -> Vec<bool> {
    let mut seen = vec![false; bx.len()];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        let state = bx.decode(v);
        for (r, vector) in vectors.iter().enumerate() {
            let next = if reverse {
                // predecessor u with u + vector = state, u enabled
                let neg: Vec<i64> = vector.iter().map(|x| -x).collect();
                match step_index(&bx, &state, &neg) {
                    Some(u) => {
                        let pre = bx.decode(u);
                        (net.propensity(r, &pre).unwrap_or(0.0) > 0.0).then_some(u)
                    }
                    None => None,
                }
            } else if net.propensity(r, &state).unwrap_or(0.0) > 0.0 {
                step_index(&bx, &state, vector)
            } else {
                None
            };
            if let Some(w) = next {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// Dense solve of pi Q = 0, sum pi = 1 via LU on Q^T with a normalization row.
fn dense_stationary(rows: &[Vec<(usize, f64)>], out_rate: &[f64]) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let m = rows.len();
    if m == 1 {
        return vec![1.0];
    }
    // columns of Q^T: (Q^T)_{jk} = q_{k -> j}
    let mut qt = DMatrix::<f64>::zeros(m, m);
    for (k, row) in rows.iter().enumerate() {
        qt[(k, k)] = -out_rate[k];
        for &(j, p) in row {
            qt[(j, k)] += p;
        }
    }
    // replace the last equation by sum pi = 1
    for k in 0..m {
        qt[(m - 1, k)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;
    let solved = qt.lu().solve(&rhs);
    let mut pi: Vec<f64> = match solved {
        Some(x) => x.iter().copied().collect(),
        None => vec![1.0 / m as f64; m],
    };
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let norm: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= norm;
    }
    pi
}

/// Power iteration on the uniformized kernel P = I + Q/Lambda.
fn power_stationary(rows: &[Vec<(usize, f64)>], out_rate: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let lambda = out_rate.iter().fold(0.0f64, |a, &b| a.max(b)) * 1.01 + 1e-9;
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0f64; m];
    for sweep in 0..200_000 {
        next.copy_from_slice(&pi);
        for (k, row) in rows.iter().enumerate() {
            let w = pi[k] / lambda;
            next[k] -= out_rate[k] * w;
            for &(j, p) in row {
                next[j] += p * w;
            }
        }
        let norm: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= norm;
        }
        std::mem::swap(&mut pi, &mut next);
        if sweep % 64 == 0 {
            let mut flow = vec![0.0f64; m];
            for (k, row) in rows.iter().enumerate() {
                for &(j, p) in row {
                    flow[j] += pi[k] * p;
                }
            }
            let residual = (0..m)
                .map(|k| (flow[k] - pi[k] * out_rate[k]).abs())
                .fold(0.0f64, f64::max);
            if residual < STATIONARY_TOLERANCE {
                break;
            }
        }
    }
    pi
}

/// Empirical law of the chain at each grid time, from independent replicas.
/// Returns per-time box histograms plus the fraction of replicas outside the
/// box at that time.
pub fn empirical_law(
    net: &ReactionNetwork,
    x0: &[u64],
    bx: StateBox,
    time_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<(Vec<Distribution>, Vec<f64>), SimError> {
    if x0.len() != net.dim() {
        return Err(SimError::DimensionMismatch(x0.len(), net.dim()));
    }
    let d = net.dim();
    let vectors: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.vector(d)).collect();
    let t_max = time_grid.iter().cloned().fold(0.0f64, f64::max);

    // Per-replica: states at each grid time, single pass, no event storage.
    let runs: Vec<Result<Vec<Vec<u64>>, SimError>> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, rep as u64));
            let mut state = x0.to_vec();
            let mut t = 0.0;
            let mut snapshots: Vec<Vec<u64>> = Vec::with_capacity(time_grid.len());
            let mut cursor = 0usize;
            let mut propensities = vec![0.0f64; vectors.len()];
            loop {
                let mut total = 0.0;
                for (i, p) in propensities.iter_mut().enumerate() {
                    *p = net.propensity(i, &state)?;
                    total += *p;
                }
                let wait = if total > 0.0 {
                    let u: f64 = rng.gen::<f64>();
                    -(1.0 - u).ln() / total
                } else {
                    f64::INFINITY
                };
                let t_next = t + wait;
                while cursor < time_grid.len() && time_grid[cursor] < t_next {
                    snapshots.push(state.clone());
                    cursor += 1;
                }
                if cursor >= time_grid.len() || t_next > t_max {
                    while cursor < time_grid.len() {
                        snapshots.push(state.clone());
                        cursor += 1;
                    }
                    return Ok(snapshots);
                }
                t = t_next;
                let mut pick = rng.gen::<f64>() * total;
                let mut chosen = propensities.len() - 1;
                for (i, &p) in propensities.iter().enumerate() {
                    if pick < p {
                        chosen = i;
                        break;
                    }
                    pick -= p;
                }
                apply(&mut state, &vectors[chosen]);
            }
        })
        .collect();

    let mut histograms = vec![vec![0.0f64; bx.len()]; time_grid.len()];
    let mut escaped = vec![0.0f64; time_grid.len()];
    let weight = 1.0 / replicas as f64;
    for run in runs {
        let snapshots = run?;
        for (ti, state) in snapshots.iter().enumerate() {
            if bx.contains(state) {
                histograms[ti][bx.encode(state)] += weight;
            } else {
                escaped[ti] += weight;
            }
        }
    }
    let dists = histograms
        .into_iter()
        .map(|probabilities| Distribution { bx, probabilities })
        .collect();
    Ok((dists, escaped))
}

/// SplitMix64-style mixing of (seed, replica index).
fn mix_seed(seed: u64, replica: u64) -> u64 {
    let mut z = seed ^ replica.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Least-squares fit diagnostics of the empirical log-TV decay.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    /// Fitted slope of log TV(t); negative means exponential decay.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (time, TV) curve over the full grid.
    pub tv_curve: Vec<(f64, f64)>,
    /// Indices of the grid points used by the fit.
    pub window: Vec<usize>,
    /// Predicted Monte-Carlo noise floor of the TV estimator.
    pub noise_floor: f64,
    /// Largest per-time fraction of replicas found outside the box.
    pub escaped_mass_max: f64,
}

/// Fit window bounds on the measured TV, before noise-floor adjustment.
pub const FIT_WINDOW: (f64, f64) = (0.02, 0.5);

/// Estimates the exponential convergence rate to the truncated stationary
/// distribution: simulates replica ensembles, measures TV(law at t, pi) on
/// the grid, and fits log TV over the window where TV lies in
/// [max(0.02, 2 * noise floor), 0.5]. The floor term keeps Monte-Carlo noise
/// out of the fit; with the window's lower bound alone, flat noise-floor
/// samples would bias the slope toward zero.
pub fn exp_rate_estimate(
    net: &ReactionNetwork,
    x0: &[u64],
    bx: StateBox,
    time_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<RateFit, SimError> {
    let stationary = truncated_stationary(net, bx, x0)?;
    let (laws, escaped) = empirical_law(net, x0, bx, time_grid, replicas, seed)?;

    // Expected TV noise when sampling pi with `replicas` draws:
    // E|p_hat - p| ~ sqrt(2 p (1-p) / (pi_const * K)) per state.
    let k = replicas as f64;
    let noise_floor = 0.5
        * stationary
            .dist
            .probabilities
            .iter()
            .map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * k)).sqrt())
            .sum::<f64>();

    let mut tv_curve = Vec::with_capacity(time_grid.len());
    for (ti, law) in laws.iter().enumerate() {
        let tv_box = tv_distance(law, &stationary.dist)?;
        // mass outside the box is all missing from pi
        let tv = tv_box + 0.5 * escaped[ti];
        tv_curve.push((time_grid[ti], tv));
    }

    let low = FIT_WINDOW.0.max(2.0 * noise_floor);
    let window: Vec<usize> = tv_curve
        .iter()
        .enumerate()
        .filter(|(_, (_, tv))| *tv >= low && *tv <= FIT_WINDOW.1)
        .map(|(i, _)| i)
        .collect();
    if window.len() < 3 {
        return Err(SimError::WindowEmpty);
    }
    let points: Vec<(f64, f64)> = window
        .iter()
        .map(|&i| (tv_curve[i].0, tv_curve[i].1.ln()))
        .collect();
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(SimError::WindowEmpty);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        tv_curve,
        window,
        noise_floor,
        escaped_mass_max: escaped.iter().cloned().fold(0.0, f64::max),
    })
}

/// JSON payload for `kind: "sim"`.
#[derive(Debug, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub t_end: f64,
    pub events: usize,
    pub termination: Termination,
    pub final_state: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fit: Option<RateFit>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    #[test]
    fn pure_death_absorbs_after_three_events() {
        let n = parse("S1 -> 0 : 1").unwrap();
        let trace = ssa_run(&n, &[3], 1e6, 42, 1_000_000).unwrap();
        assert_eq!(trace.events.len(), 3);
        assert_eq!(trace.final_state, vec![0]);
        assert_eq!(trace.termination, Termination::Absorbed);
        assert!(trace.replay_valid(&n));
    }

    #[test]
    fn disabled_network_absorbs_immediately() {
        let n = parse("S1 -> S2 : 1").unwrap();
        let trace = ssa_run(&n, &[0, 0], 10.0, 1, 100).unwrap();
        assert!(trace.events.is_empty());
        assert_eq!(trace.termination, Termination::Absorbed);
    }

    #[test]
    fn determinism_same_seed() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let a = ssa_run(&n, &[0], 100.0, 7, 100_000).unwrap();
        let b = ssa_run(&n, &[0], 100.0, 7, 100_000).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.final_state, b.final_state);
        let c = ssa_run(&n, &[0], 100.0, 8, 100_000).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn event_cap_is_flagged() {
        let n = parse("0 -> S1 : 1000").unwrap();
        let trace = ssa_run(&n, &[0], 1e9, 42, 50).unwrap();
        assert_eq!(trace.termination, Termination::EventCapReached);
        assert_eq!(trace.events.len(), 50);
    }

    #[test]
    fn stationary_birth_death_is_truncated_poisson() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let bx = StateBox::new(30, 1).unwrap();
        let result = truncated_stationary(&n, bx, &[0]).unwrap();
        let poisson = poisson_product(&[1.0], bx);
        let tv = tv_distance(&result.dist, &poisson).unwrap();
        assert!(tv < 1e-10, "tv = {tv:.3e}");
        assert!(result.residual < 1e-8);
        assert!(result.boundary_mass < 1e-10);
    }

    #[test]
    fn stationary_pure_death_is_point_mass() {
        let n = parse("S1 -> 0 : 1").unwrap();
        let bx = StateBox::new(5, 1).unwrap();
        let result = truncated_stationary(&n, bx, &[0]).unwrap();
        assert_eq!(result.class_size, 1);
        assert_eq!(result.dist.probabilities[0], 1.0);
    }

    #[test]
    fn stationary_rejects_leaky_anchor_class() {
        // anchor (3): class {3} leaks to 2 without return
        let n = parse("S1 -> 0 : 1").unwrap();
        let bx = StateBox::new(5, 1).unwrap();
        let err = truncated_stationary(&n, bx, &[3]).unwrap_err();
        assert!(matches!(
            err,
            SimError::StateSpace(StateSpaceError::AnchorClassNotClosed(_))
        ));
    }

    #[test]
    fn poisson_product_matches_single_poisson() {
        let bx = StateBox::new(20, 1).unwrap();
        let p = poisson_product(&[1.5], bx);
        let mut direct: Vec<f64> = (0..=20u64)
            .map(|k| {
                let mut w = (-1.5f64).exp();
                for i in 1..=k {
                    w *= 1.5 / i as f64;
                }
                w
            })
            .collect();
        let norm: f64 = direct.iter().sum();
        for w in direct.iter_mut() {
            *w /= norm;
        }
        for (a, b) in p.probabilities.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_distance_extremes() {
        let bx = StateBox::new(3, 1).unwrap();
        let mut p = vec![0.0; 4];
        p[0] = 1.0;
        let mut q = vec![0.0; 4];
        q[3] = 1.0;
        let dp = Distribution {
            bx,
            probabilities: p,
        };
        let dq = Distribution {
            bx,
            probabilities: q,
        };
        assert_eq!(tv_distance(&dp, &dp).unwrap(), 0.0);
        assert_eq!(tv_distance(&dp, &dq).unwrap(), 1.0);
    }

    #[test]
    fn empirical_matches_exact_for_birth_death() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let bx = StateBox::new(15, 1).unwrap();
        let stationary = truncated_stationary(&n, bx, &[0]).unwrap();
        let (laws, escaped) = empirical_law(&n, &[0], bx, &[50.0], 4000, 11).unwrap();
        assert!(escaped[0] == 0.0);
        let tv = tv_distance(&laws[0], &stationary.dist).unwrap();
        assert!(tv < 0.05, "tv = {tv}");
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let n = parse("0 <-> S1 : 1, 1").unwrap();
        let bx = StateBox::new(10, 1).unwrap();
        let grid = [1.0, 2.0];
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| empirical_law(&n, &[0], bx, &grid, 64, 3).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| empirical_law(&n, &[0], bx, &grid, 64, 3).unwrap());
        for (a, b) in single.0.iter().zip(&multi.0) {
            assert_eq!(a.probabilities, b.probabilities);
        }
    }
}
