//! Exact rational linear algebra and a small two-phase simplex solver.
//!
//! Reaction vectors are integers and rate constants are IEEE doubles, which
//! are themselves exact rationals, so every structural decision in this crate
//! (rank, deficiency, Hurwitz minors, linear feasibility) can be made without
//! rounding. Matrices here are dense `Vec<Vec<BigRational>>`; dimensions stay
//! tiny (d is the species count).

use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};

pub type Rat = BigRational;

/// Exact conversion; every finite f64 is a rational with a power-of-two
/// denominator.
pub fn rat_from_f64(x: f64) -> Rat {
    BigRational::from_float(x).expect("finite float required")
}

pub fn rat_from_i64(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // Exact when representable; otherwise the usual double rounding.
    let nf = bigint_to_f64(num);
    let df = bigint_to_f64(den);
    nf / df
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    use num::ToPrimitive;
    n.to_f64().unwrap_or(f64::NAN)
}

/// Rank over the rationals by Gaussian elimination.
pub fn rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let nrows = m.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = m[0].len();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][c].clone();
        for i in (r + 1)..nrows {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &pivot;
            for j in c..ncols {
                let delta = &f * &m[r][j];
                m[i][j] = &m[i][j] - delta;
            }
        }
        r += 1;
        if r == nrows {
            break;
        }
    }
    r
}

/// Determinant of a square matrix, by fraction-preserving elimination.
pub fn determinant(a: &[Vec<Rat>]) -> Rat {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut det = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            m.swap(c, p);
            det = -det;
        }
        let pivot = m[c][c].clone();
        det *= pivot.clone();
        for i in (c + 1)..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &pivot;
            for j in c..n {
                let delta = &f * &m[c][j];
                m[i][j] = &m[i][j] - delta;
            }
        }
    }
    det
}

/// Solve `A x = b` for square nonsingular `A`; `None` when singular.
pub fn solve(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, p);
        let pivot = m[c][c].clone();
        for j in c..=n {
            m[c][j] = &m[c][j] / &pivot;
        }
        for i in 0..n {
            if i == c || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for j in c..=n {
                let delta = &f * &m[c][j];
                m[i][j] = &m[i][j] - delta;
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Leading principal minors `det(A[..k][..k])` for k = 1..=n.
pub fn leading_principal_minors(a: &[Vec<Rat>]) -> Vec<Rat> {
    let n = a.len();
    (1..=n)
        .map(|k| {
            let sub: Vec<Vec<Rat>> = a[..k].iter().map(|row| row[..k].to_vec()).collect();
            determinant(&sub)
        })
        .collect()
}

/// Outcome of a linear program in standard equality form.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Unbounded,
    Optimal { objective: Rat, solution: Vec<Rat> },
}

/// Maximize `c·x` subject to `A x = b`, `x >= 0`, by two-phase simplex with
/// Bland's rule. Sizes here are a handful of variables, so no effort is spent
/// on sparsity or revised updates.
pub fn simplex_maximize(a: &[Vec<Rat>], b: &[Rat], c: &[Rat]) -> LpOutcome {
    let m = a.len();
    let n = if m == 0 { c.len() } else { a[0].len() };
    assert!(a.iter().all(|row| row.len() == n));
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // Normalize to b >= 0 so the artificial basis is feasible.
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rat> = Vec::with_capacity(m);
    for i in 0..m {
        if b[i].is_negative() {
            rows.push(a[i].iter().map(|v| -v.clone()).collect());
            rhs.push(-b[i].clone());
        } else {
            rows.push(a[i].clone());
            rhs.push(b[i].clone());
        }
    }

    // Tableau with n structural + m artificial columns.
    let total = n + m;
    let mut tab: Vec<Vec<Rat>> = (0..m)
        .map(|i| {
            let mut row = rows[i].clone();
            row.extend((0..m).map(|j| {
                if i == j {
                    Rat::one()
                } else {
                    Rat::zero()
                }
            }));
            row.push(rhs[i].clone());
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..total).collect();

    // Phase 1: minimize sum of artificials.
    let mut obj: Vec<Rat> = vec![Rat::zero(); total + 1];
    for j in n..total {
        obj[j] = Rat::one();
    }
    for i in 0..m {
        for j in 0..=total {
            let delta = tab[i][j].clone();
            obj[j] = &obj[j] - delta;
        }
    }
    if !pivot_loop(&mut tab, &mut obj, &mut basis, total, true) {
        // Phase 1 is always bounded below by 0.
        unreachable!("phase 1 cannot be unbounded");
    }
    if !obj[total].is_zero() {
        return LpOutcome::Infeasible;
    }
    // Drive artificials out of the basis where possible; a stuck artificial
    // row is redundant and its row is zero on structural columns.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !tab[i][j].is_zero()) {
                pivot(&mut tab, &mut obj, &mut basis, i, j, total);
            }
        }
    }

    // Phase 2: maximize c·x == minimize -c·x.
    let mut obj2: Vec<Rat> = vec![Rat::zero(); total + 1];
    for j in 0..n {
        obj2[j] = -c[j].clone();
    }
    for i in 0..m {
        if basis[i] < n {
            let coef = obj2[basis[i]].clone();
            if !coef.is_zero() {
                for j in 0..=total {
                    let delta = &coef * &tab[i][j];
                    obj2[j] = &obj2[j] - delta;
                }
            }
        }
    }
    // Forbid re-entering artificial columns.
    for j in n..total {
        obj2[j] = Rat::one();
    }
    if !pivot_loop(&mut tab, &mut obj2, &mut basis, n, false) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![Rat::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i][total].clone();
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal {
        objective,
        solution: x,
    }
}

/// Runs simplex pivots until optimal (returns true) or unbounded (false).
/// `col_limit` restricts entering columns; Bland's rule prevents cycling.
fn pivot_loop(
    tab: &mut Vec<Vec<Rat>>,
    obj: &mut Vec<Rat>,
    basis: &mut Vec<usize>,
    col_limit: usize,
    phase1: bool,
) -> bool {
    let m = tab.len();
    let total = if m == 0 { col_limit } else { tab[0].len() - 1 };
    loop {
        let Some(enter) = (0..col_limit).find(|&j| obj[j].is_negative()) else {
            return true;
        };
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &tab[i][total] / &tab[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return phase1;
        };
        pivot(tab, obj, basis, row, enter, total);
    }
}

fn pivot(
    tab: &mut [Vec<Rat>],
    obj: &mut [Rat],
    basis: &mut [usize],
    row: usize,
    col: usize,
    total: usize,
) {
    let pivot = tab[row][col].clone();
    for j in 0..=total {
        tab[row][j] = &tab[row][j] / &pivot;
    }
    for i in 0..tab.len() {
        if i == row || tab[i][col].is_zero() {
            continue;
        }
        let f = tab[i][col].clone();
        for j in 0..=total {
            let delta = &f * &tab[row][j];
            tab[i][j] = &tab[i][j] - delta;
        }
    }
    if !obj[col].is_zero() {
        let f = obj[col].clone();
        for j in 0..=total {
            let delta = &f * &tab[row][j];
            obj[j] = &obj[j] - delta;
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rat {
        rat_from_i64(n)
    }

    fn rq(n: i64, d: i64) -> Rat {
        rat_from_i64(n) / rat_from_i64(d)
    }

    #[test]
    fn rank_of_reaction_vectors() {
        // vectors of 0 <-> S1 <-> S2: span is 2-dimensional
        let rows = vec![
            vec![r(1), r(0)],
            vec![r(-1), r(0)],
            vec![r(-1), r(1)],
            vec![r(1), r(-1)],
        ];
        assert_eq!(rank(&rows), 2);
        assert_eq!(rank(&[vec![r(0), r(0)]]), 0);
    }

    #[test]
    fn determinant_and_solve() {
        let a = vec![vec![r(-1), r(1)], vec![r(0), r(-1)]];
        assert_eq!(determinant(&a), r(1));
        // A v = -1  =>  v = (2, 1)
        let v = solve(&a, &[r(-1), r(-1)]).unwrap();
        assert_eq!(v, vec![r(2), r(1)]);
        let singular = vec![vec![r(1), r(2)], vec![r(2), r(4)]];
        assert!(solve(&singular, &[r(1), r(1)]).is_none());
    }

    #[test]
    fn minors_of_m_matrix() {
        // -A for A = [[-1,1],[0,-1]]
        let m = vec![vec![r(1), r(-1)], vec![r(0), r(1)]];
        assert_eq!(leading_principal_minors(&m), vec![r(1), r(1)]);
    }

    #[test]
    fn simplex_basic() {
        // max x+y s.t. x+y+s = 1
        let out = simplex_maximize(
            &[vec![r(1), r(1), r(1)]],
            &[r(1)],
            &[r(1), r(1), r(0)],
        );
        match out {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, r(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simplex_infeasible() {
        // x = -1, x >= 0
        let out = simplex_maximize(&[vec![r(1)]], &[r(-1)], &[r(0)]);
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn simplex_unbounded() {
        // max x s.t. x - s = 0
        let out = simplex_maximize(&[vec![r(1), r(-1)]], &[r(0)], &[r(1), r(0)]);
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn simplex_fractional_optimum() {
        // max t s.t. v1+v2 = 1, v1 - t - s1 = 0, v2 - t - s2 = 0
        // optimum t = 1/2 at v = (1/2, 1/2)
        let a = vec![
            vec![r(1), r(1), r(0), r(0), r(0), r(0)],
            vec![r(1), r(0), r(-1), r(1), r(-1), r(0)],
            vec![r(0), r(1), r(-1), r(1), r(0), r(-1)],
        ];
        let b = vec![r(1), r(0), r(0)];
        let c = vec![r(0), r(0), r(1), r(-1), r(0), r(0)];
        match simplex_maximize(&a, &b, &c) {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, rq(1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for x in [0.5, 0.25, 1.0, 3.0, 1.5e-3, 2.0f64.powi(-40)] {
            assert_eq!(rat_to_f64(&rat_from_f64(x)), x);
        }
    }
}
