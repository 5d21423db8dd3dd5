//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the simplex solver: linear programs are solved
//! by enumerating basic solutions with a dense LU factorization.
#![allow(dead_code)]

use evarkit::lp::{LinearProgram, LpStatus};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Box size used to expose unboundedness.
const BOX: f64 = 1e6;

/// Status and value of `lp` by exhaustive vertex enumeration.
///
/// Constraints are collected as rows `a·p ≤ b` (equalities kept apart),
/// every variable gets an artificial box `p ≤ BOX` and the best feasible
/// vertex is taken. Repeating with a doubled box separates unbounded
/// programs from bounded ones.
pub fn enumerate_vertices(lp: &LinearProgram) -> (LpStatus, f64) {
    let Some((v1, touches_box)) = best_vertex(lp, BOX) else {
        return (LpStatus::Infeasible, f64::NEG_INFINITY);
    };
    if !touches_box {
        return (LpStatus::Optimal, v1);
    }
    let (v2, _) = best_vertex(lp, 2.0 * BOX).expect("feasible in the smaller box");
    if (v2 - v1).abs() > 1e-6 * (1.0 + v1.abs()) {
        (LpStatus::Unbounded, f64::INFINITY)
    } else {
        (LpStatus::Optimal, v1)
    }
}

/// Best vertex value and whether some optimal vertex sits on the box.
fn best_vertex(lp: &LinearProgram, bx: f64) -> Option<(f64, bool)> {
    let n = lp.objective.len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, b) in lp.a_ub.iter().zip(&lp.b_ub) {
        rows.push((a.clone(), *b));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e.clone(), -lp.lower[j]));
        e[j] = 1.0;
        rows.push((e, lp.upper[j].unwrap_or(bx).min(bx.max(lp.lower[j] + bx))));
    }
    let eqs: Vec<(Vec<f64>, f64)> = lp
        .a_eq
        .iter()
        .cloned()
        .zip(lp.b_eq.iter().copied())
        .collect();
    if eqs.len() > n {
        return solve_overdetermined(lp, &rows, &eqs, bx);
    }
    let k = n - eqs.len();
    let mut best: Option<(f64, bool)> = None;
    for subset in combinations(rows.len(), k) {
        let mut m = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, (a, b)) in eqs.iter().chain(subset.iter().map(|&i| &rows[i])).enumerate() {
            for j in 0..n {
                m[(r, j)] = a[j];
            }
            rhs[r] = *b;
        }
        let lu = m.lu();
        if lu.determinant().abs() < 1e-9 {
            continue;
        }
        let Some(p) = lu.solve(&rhs) else { continue };
        if feasible(&p, &rows, &eqs) {
            let v: f64 = lp.objective.iter().zip(p.iter()).map(|(c, x)| c * x).sum();
            let on_box = p.iter().any(|x| x.abs() >= 0.5 * bx);
            best = match best {
                None => Some((v, on_box)),
                Some((b, t)) if (v - b).abs() <= 1e-9 * (1.0 + b.abs()) => Some((b.max(v), t || on_box)),
                Some((b, _)) if v > b => Some((v, on_box)),
                keep => keep,
            };
        }
    }
    best
}

/// Drops linearly dependent equalities before enumerating.
fn solve_overdetermined(
    lp: &LinearProgram,
    rows: &[(Vec<f64>, f64)],
    eqs: &[(Vec<f64>, f64)],
    bx: f64,
) -> Option<(f64, bool)> {
    let n = lp.objective.len();
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for e in eqs {
        let mut trial = kept.clone();
        trial.push(e.clone());
        let m = DMatrix::from_fn(trial.len(), n, |r, c| trial[r].0[c]);
        if m.rank(1e-9) == trial.len() {
            kept = trial;
        }
    }
    let mut reduced = lp.clone();
    reduced.a_eq = kept.iter().map(|e| e.0.clone()).collect();
    reduced.b_eq = kept.iter().map(|e| e.1).collect();
    let v = best_vertex(&reduced, bx)?;
    // Every original equality must hold at some optimum; dependent rows
    // with inconsistent right-hand sides make the program infeasible.
    let _ = rows;
    let consistent = eqs.iter().all(|(a, b)| {
        let m = DMatrix::from_fn(kept.len() + 1, n + 1, |r, c| {
            let (row, rhs) = if r < kept.len() { (&kept[r].0, kept[r].1) } else { (a, *b) };
            if c < n {
                row[c]
            } else {
                rhs
            }
        });
        m.rank(1e-9) == kept.len()
    });
    consistent.then_some(v)
}

fn feasible(p: &DVector<f64>, rows: &[(Vec<f64>, f64)], eqs: &[(Vec<f64>, f64)]) -> bool {
    let dot = |a: &[f64]| a.iter().zip(p.iter()).map(|(x, y)| x * y).sum::<f64>();
    let tol = |b: f64| 1e-9 * (1.0 + b.abs());
    rows.iter().all(|(a, b)| dot(a) <= b + tol(*b))
        && eqs.iter().all(|(a, b)| (dot(a) - b).abs() <= tol(*b))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Random program with small integer data.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m_ub = rng.gen_range(0..=5);
    let m_eq = rng.gen_range(0..=(6 - m_ub).min(2));
    let int_row = |rng: &mut R| (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect::<Vec<_>>();
    let mut lp = LinearProgram::maximize(int_row(rng));
    for _ in 0..m_ub {
        let row = int_row(rng);
        lp = lp.leq(row, rng.gen_range(-3..=10) as f64);
    }
    for _ in 0..m_eq {
        let row = int_row(rng);
        lp = lp.eq(row, rng.gen_range(-3..=6) as f64);
    }
    if rng.gen_bool(0.2) {
        let j = rng.gen_range(0..n);
        lp = lp.with_upper(j, rng.gen_range(1..=4) as f64);
    }
    lp
}

/// Random probability vector drawn from a flat Dirichlet law.
pub fn random_probability<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
