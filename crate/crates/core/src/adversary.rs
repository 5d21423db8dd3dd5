//! Adversarial programs: the worst-case mean of a candidate over the
//! discretized hypothesis, and the search for affine dominators.

use crate::error::{check_len, Error, Result};
use crate::finite::{candidate_evar_on, check_constraint_qualification, PiVector};
use crate::lp::{LinearProgram, LpStatus};
use crate::measure::{charged_points, expectation, DiscreteMeasure, EVariable, Hypothesis};
use serde::{Deserialize, Serialize};

/// Upper bound on each weight in the dominator search, keeping the
/// per-point programs bounded when the constraint qualification fails.
pub const PI_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EVariable,
    Violated,
    HypothesisEmpty,
}

/// Result of maximizing `∫h dμ` over the discretized hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `None` when the hypothesis is empty.
    pub worst_value: Option<f64>,
    /// An optimal measure; `None` when the hypothesis is empty.
    pub witness: Option<DiscreteMeasure>,
    pub verdict: Verdict,
    /// `−∫gᵢ d(witness)` per constraint.
    pub slack: Vec<f64>,
    pub grid_hash: String,
}

impl VerificationReport {
    /// True unless the verdict is [`Verdict::Violated`].
    pub fn passes(&self) -> bool {
        self.verdict != Verdict::Violated
    }
}

/// Solves `max Σ pₓ h(x)` over probability vectors satisfying every
/// constraint; the verdict is an e-variable iff the maximum is ≤ `1 + tol`.
pub fn worst_case_expectation(
    e: &EVariable,
    h: &Hypothesis,
    tol: f64,
) -> Result<VerificationReport> {
    check_len("e-variable", e.len(), h.grid().len())?;
    let sol = h.probability_program(e.values().to_vec()).solve()?;
    let grid_hash = h.grid().hash();
    match sol.status {
        LpStatus::Infeasible => Ok(VerificationReport {
            worst_value: None,
            witness: None,
            verdict: Verdict::HypothesisEmpty,
            slack: Vec::new(),
            grid_hash,
        }),
        LpStatus::Optimal => {
            let witness = DiscreteMeasure::normalized(
                sol.point.iter().map(|p| p.max(0.0)).collect(),
            )?;
            let slack = h
                .constraints()
                .iter()
                .map(|c| expectation(&witness, c.values()).map(|v| -v))
                .collect::<Result<Vec<_>>>()?;
            let verdict = if sol.value <= 1.0 + tol {
                Verdict::EVariable
            } else {
                Verdict::Violated
            };
            Ok(VerificationReport {
                worst_value: Some(sol.value),
                witness: Some(witness),
                verdict,
                slack,
                grid_hash,
            })
        }
        LpStatus::Unbounded => Err(Error::NumericallyStalled {
            iterations: sol.iterations,
            reason: "expectation over probability vectors reported unbounded".into(),
        }),
    }
}

/// Whether `e` has mean at most `1 + tol` under every measure of the
/// discretized hypothesis (vacuously so when it is empty).
pub fn is_evar_on_grid(e: &EVariable, h: &Hypothesis, tol: f64) -> Result<bool> {
    Ok(worst_case_expectation(e, h, tol)?.passes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Maximality {
    Maximal,
    /// `1 + Σ πᵢ gᵢ` dominates the candidate and exceeds it at `point`.
    Dominated {
        pi: PiVector,
        point: usize,
        dominator: EVariable,
    },
    /// No affine dominator was found but the constraint qualification
    /// fails, so maximality cannot be concluded.
    Undetermined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityReport {
    #[serde(flatten)]
    pub verdict: Maximality,
    pub cq_holds: bool,
    pub grid_hash: String,
}

/// Searches for an affine candidate dominating `e` off the negligible
/// points and strictly larger somewhere, one program per charged point.
///
/// `e` must pass [`is_evar_on_grid`].
pub fn maximality_check(e: &EVariable, h: &Hypothesis, tol: f64) -> Result<MaximalityReport> {
    if !is_evar_on_grid(e, h, tol)? {
        return Err(Error::InvalidParameter(
            "maximality is only defined for e-variables; the candidate fails on this grid".into(),
        ));
    }
    let charged = charged_points(h, tol)?;
    let grid_hash = h.grid().hash();
    let d = h.dim();
    let mut base = LinearProgram::maximize(vec![0.0; d]);
    for &x in &charged {
        let row = (0..d).map(|i| -h.value(i, x)).collect();
        base = base.leq(row, 1.0 - e.values()[x]);
    }
    for i in 0..d {
        base = base.with_upper(i, PI_BOUND);
    }
    for &k in &charged {
        let mut lp = base.clone();
        lp.objective = (0..d).map(|i| h.value(i, k)).collect();
        let sol = lp.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            // The candidate passed the adversary, so by duality some
            // dominator exists; a failure here is numerical.
            _ => {
                return Err(Error::NumericallyStalled {
                    iterations: sol.iterations,
                    reason: format!("dominator search at point {k} returned {:?}", sol.status),
                })
            }
        }
        let gap = 1.0 + sol.value - e.values()[k];
        if gap > tol {
            let pi = PiVector::new(sol.point.iter().map(|p| p.max(0.0)).collect())?;
            let dominator = candidate_evar_on(&pi, h, &charged)?;
            let cq = check_constraint_qualification(h, tol)?;
            return Ok(MaximalityReport {
                verdict: Maximality::Dominated {
                    pi,
                    point: k,
                    dominator,
                },
                cq_holds: cq.holds,
                grid_hash,
            });
        }
    }
    let cq = check_constraint_qualification(h, tol)?;
    let verdict = if cq.holds {
        Maximality::Maximal
    } else {
        Maximality::Undetermined {
            reason: "CQ fails: maximality undetermined".into(),
        }
    };
    Ok(MaximalityReport {
        verdict,
        cq_holds: cq.holds,
        grid_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::{builtin_constraints, Builtin};
    use crate::measure::{membership, SampleGrid};
    use crate::DEFAULT_TOL;

    fn hyp(kind: Builtin, xs: &[f64]) -> Hypothesis {
        builtin_constraints(&kind, &SampleGrid::scalar(xs.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn worst_case_examples() {
        let mv = hyp(Builtin::MeanVar { sigma: 1.0 }, &[-1.0, 0.0, 1.0]);
        let r = worst_case_expectation(&EVariable::constant(3, 1.0).unwrap(), &mv, DEFAULT_TOL)
            .unwrap();
        assert!((r.worst_value.unwrap() - 1.0).abs() < 1e-12);

        let sq = EVariable::raw(vec![1.0, 0.0, 1.0]).unwrap();
        let r = worst_case_expectation(&sq, &mv, DEFAULT_TOL).unwrap();
        assert!((r.worst_value.unwrap() - 1.0).abs() < 1e-12);
        let w = r.witness.unwrap();
        assert!((w.weights()[0] - 0.5).abs() < 1e-12 && (w.weights()[2] - 0.5).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::EVariable);

        let q = hyp(Builtin::Quantile { alpha: 0.5, q: 0.0 }, &[-1.0, 1.0]);
        let h = EVariable::raw(vec![0.0, 2.25]).unwrap();
        let r = worst_case_expectation(&h, &q, DEFAULT_TOL).unwrap();
        assert!((r.worst_value.unwrap() - 1.125).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(membership(r.witness.as_ref().unwrap(), &q, DEFAULT_TOL).unwrap());
        assert!((r.witness.unwrap().weights()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_accepts_everything() {
        let g = SampleGrid::scalar(vec![0.0, 1.0, 2.0]).unwrap();
        let h = Hypothesis::from_values(g, vec![vec![-3.0, -2.0, -1.0], vec![3.0, 2.0, 1.0]])
            .unwrap();
        let e = EVariable::constant(3, 7.0).unwrap();
        let r = worst_case_expectation(&e, &h, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisEmpty);
        assert!(is_evar_on_grid(&e, &h, DEFAULT_TOL).unwrap());
        let mv = hyp(Builtin::MeanVar { sigma: 1.0 }, &[-1.0, 0.0, 1.0]);
        assert!(!is_evar_on_grid(&EVariable::constant(3, 1.5).unwrap(), &mv, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn maximality_examples() {
        let zm = hyp(Builtin::ZeroMean, &[-1.0, 0.0, 1.0]);
        let r = maximality_check(&EVariable::constant(3, 1.0).unwrap(), &zm, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Maximality::Maximal);

        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let mv = hyp(Builtin::MeanVar { sigma: 1.0 }, &xs);
        let r = maximality_check(&EVariable::constant(5, 0.5).unwrap(), &mv, DEFAULT_TOL).unwrap();
        let Maximality::Dominated { dominator, .. } = r.verdict else {
            panic!("0.5 is dominated by 1");
        };
        assert!(is_evar_on_grid(&dominator, &mv, DEFAULT_TOL).unwrap());

        let sq = EVariable::raw(xs.iter().map(|x| x * x).collect()).unwrap();
        let r = maximality_check(&sq, &mv, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Maximality::Maximal);
        assert!(r.cq_holds);
    }

    #[test]
    fn maximality_undetermined_without_cq() {
        let g = SampleGrid::scalar(vec![0.0, 1.0]).unwrap();
        let h = Hypothesis::from_values(g, vec![vec![-1.0, 0.0]]).unwrap();
        let r = maximality_check(&EVariable::raw(vec![1.0, 1.0]).unwrap(), &h, DEFAULT_TOL);
        // Every measure is in the hypothesis, so h ≡ 1 is in fact maximal,
        // but the failing qualification keeps the verdict open.
        let r = r.unwrap();
        assert!(!r.cq_holds);
        assert!(matches!(r.verdict, Maximality::Undetermined { .. }));
    }

    #[test]
    fn maximality_rejects_non_evariables() {
        let mv = hyp(Builtin::MeanVar { sigma: 1.0 }, &[-1.0, 0.0, 1.0]);
        assert!(maximality_check(&EVariable::constant(3, 2.0).unwrap(), &mv, DEFAULT_TOL).is_err());
    }
}
