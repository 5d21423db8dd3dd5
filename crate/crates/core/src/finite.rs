//! Finitely generated hypotheses: affine candidates `1 + Σ πᵢ gᵢ`, the
//! feasible cone Π^Φ, dominating weights and the constraint qualification.

use crate::error::{check_len, Error, Result};
use crate::lp::{LinearProgram, LpStatus};
use crate::measure::{
    charged_points, ClosedForm, ConstraintFunction, DiscreteMeasure, EVariable, EvarForm,
    Hypothesis, SampleGrid,
};
use serde::{Deserialize, Serialize};

/// Nonnegative weights, one per constraint function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PiVector(Vec<f64>);

impl TryFrom<Vec<f64>> for PiVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PiVector::new(v)
    }
}

impl From<PiVector> for Vec<f64> {
    fn from(p: PiVector) -> Self {
        p.0
    }
}

impl PiVector {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if let Some(i) = pi.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "π[{i}] = {} is not a finite nonnegative number",
                pi[i]
            )));
        }
        Ok(PiVector(pi))
    }

    pub fn zeros(d: usize) -> Self {
        PiVector(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Parameters of the mean–variance candidates
/// `1 + αx + β(x²/σ² − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVarParams {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl MeanVarParams {
    pub fn new(sigma: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("σ must be positive, got {sigma}")));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("α and β must be finite".into()));
        }
        Ok(MeanVarParams { sigma, alpha, beta })
    }

    /// Weights on `{x, −x, x² − σ²}`; `None` when `β < 0`, which no
    /// nonnegative combination can express.
    pub fn to_pi(&self) -> Option<PiVector> {
        (self.beta >= 0.0).then(|| {
            PiVector(vec![
                self.alpha.max(0.0),
                (-self.alpha).max(0.0),
                self.beta / (self.sigma * self.sigma),
            ])
        })
    }

    /// The candidate's value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        1.0 + self.alpha * x + self.beta * (x * x / s2 - 1.0)
    }

    /// `σ²α² + (2β − 1)²`; the candidate is nonnegative on ℝ iff this is ≤ 1.
    pub fn ellipse_value(&self) -> f64 {
        let b = 2.0 * self.beta - 1.0;
        self.sigma * self.sigma * self.alpha * self.alpha + b * b
    }
}

/// Whether `1 + αx + β(x²/σ² − 1)` is a maximal e-variable for the
/// mean-zero, variance-at-most-σ² hypothesis on ℝ.
pub fn mean_var_maximal(params: &MeanVarParams) -> bool {
    params.ellipse_value() <= 1.0
}

/// Minimum of the mean–variance candidate over a scalar grid.
pub fn mean_var_grid_min(params: &MeanVarParams, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| params.eval(x))
        .fold(f64::INFINITY, f64::min)
}

/// `1 + Σ πᵢ gᵢ(x)` at every grid point, before clipping.
pub fn affine_values(pi: &PiVector, h: &Hypothesis) -> Result<Vec<f64>> {
    check_len("π", pi.len(), h.dim())?;
    let n = h.grid().len();
    let mut v = vec![1.0; n];
    for (p, c) in pi.0.iter().zip(h.constraints()) {
        if *p != 0.0 {
            for (vx, g) in v.iter_mut().zip(c.values()) {
                *vx += p * g;
            }
        }
    }
    Ok(v)
}

/// The candidate `max(0, 1 + Σ πᵢ gᵢ)`.
///
/// `clipped` is set when the affine part is negative at a point outside
/// the negligible set.
pub fn candidate_evar(pi: &PiVector, h: &Hypothesis, tol: f64) -> Result<EVariable> {
    let charged = charged_points(h, tol)?;
    candidate_evar_on(pi, h, &charged)
}

/// [`candidate_evar`] with the charged (non-negligible) points supplied.
pub fn candidate_evar_on(pi: &PiVector, h: &Hypothesis, charged: &[usize]) -> Result<EVariable> {
    let raw = affine_values(pi, h)?;
    let clipped = charged.iter().any(|&i| raw[i] < 0.0);
    let mut e = EVariable::new(
        raw.into_iter().map(|v| v.max(0.0)).collect(),
        EvarForm::AffineInConstraints { pi: pi.0.clone() },
    )?;
    e.clipped = clipped;
    Ok(e)
}

/// Whether `1 + Σ πᵢ gᵢ ≥ −tol` off the negligible points.
pub fn in_pi_phi(pi: &PiVector, h: &Hypothesis, tol: f64) -> Result<bool> {
    let charged = charged_points(h, tol)?;
    in_pi_phi_on(pi, h, &charged, tol)
}

/// [`in_pi_phi`] with the charged points supplied.
pub fn in_pi_phi_on(pi: &PiVector, h: &Hypothesis, charged: &[usize], tol: f64) -> Result<bool> {
    let raw = affine_values(pi, h)?;
    Ok(charged.iter().all(|&i| raw[i] >= -tol))
}

/// Outcome of the dominating-weights program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Domination {
    /// `h − 1 ≤ Σ πᵢ gᵢ` off the negligible points.
    Feasible { pi: PiVector },
    /// A measure of the hypothesis under which `h` has mean above `1 + tol`.
    Infeasible { certificate: DiscreteMeasure },
}

impl Domination {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Domination::Feasible { .. })
    }
}

/// Smallest-total `π ≥ 0` with `h − 1 − tol ≤ Σ πᵢ gᵢ` at every charged
/// point.
///
/// The slack `tol` makes the program exactly dual to "worst-case mean of
/// `h` is at most `1 + tol`", so infeasibility comes with a violating
/// measure read off the Farkas multipliers.
pub fn dominating_weights(e: &EVariable, h: &Hypothesis, tol: f64) -> Result<Domination> {
    check_len("e-variable", e.len(), h.grid().len())?;
    let charged = charged_points(h, tol)?;
    let d = h.dim();
    let mut lp = LinearProgram::minimize(vec![1.0; d]);
    for &x in &charged {
        let row = (0..d).map(|i| -h.value(i, x)).collect();
        lp = lp.leq(row, 1.0 + tol - e.values()[x]);
    }
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(Domination::Feasible {
            pi: PiVector::new(sol.point.iter().map(|p| p.max(0.0)).collect())?,
        }),
        LpStatus::Infeasible => {
            let mut w = vec![0.0; h.grid().len()];
            for (k, &x) in charged.iter().enumerate() {
                w[x] = sol.duals.ub[k].max(0.0);
            }
            Ok(Domination::Infeasible {
                certificate: DiscreteMeasure::normalized(w)?,
            })
        }
        LpStatus::Unbounded => Err(Error::NumericallyStalled {
            iterations: sol.iterations,
            reason: "minimizing a nonnegative total reported unbounded".into(),
        }),
    }
}

/// Two conic combinations ordered off the negligible set but not equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqWitness {
    pub pi: PiVector,
    pub pi_prime: PiVector,
    /// Grid index where `Σ (π′ᵢ − πᵢ) gᵢ` exceeds `tol`.
    pub point: usize,
    pub gap: f64,
}

/// Constraint-qualification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub holds: bool,
    pub witness: Option<CqWitness>,
}

/// Looks for `π, π′ ≥ 0` with `Σ(π′ᵢ − πᵢ)gᵢ ≥ 0` on the charged points and
/// `> tol` at one of them, one program per charged point with the
/// normalization `Σπᵢ + Σπ′ᵢ ≤ 1`.
pub fn check_constraint_qualification(h: &Hypothesis, tol: f64) -> Result<CqReport> {
    let charged = charged_points(h, tol)?;
    let d = h.dim();
    let diff_row = |x: usize| -> Vec<f64> {
        let mut r: Vec<f64> = (0..d).map(|i| -h.value(i, x)).collect();
        r.extend((0..d).map(|i| h.value(i, x)));
        r
    };
    let mut base = LinearProgram::maximize(vec![0.0; 2 * d]).leq(vec![1.0; 2 * d], 1.0);
    for &x in &charged {
        base = base.geq(diff_row(x), 0.0);
    }
    for &k in &charged {
        let mut lp = base.clone();
        lp.objective = diff_row(k);
        let sol = lp.solve()?;
        if sol.is_optimal() && sol.value > tol {
            let pi = PiVector::new(sol.point[..d].iter().map(|v| v.max(0.0)).collect())?;
            let pi_prime = PiVector::new(sol.point[d..].iter().map(|v| v.max(0.0)).collect())?;
            return Ok(CqReport {
                holds: false,
                witness: Some(CqWitness {
                    pi,
                    pi_prime,
                    point: k,
                    gap: sol.value,
                }),
            });
        }
    }
    Ok(CqReport {
        holds: true,
        witness: None,
    })
}

/// The hypotheses worked out in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Builtin {
    /// Mean zero and variance at most σ²: `{x, −x, x² − σ²}`.
    MeanVar { sigma: f64 },
    /// `P(X ≤ q) ≥ α`: `{α − 1{x ≤ q}}`.
    Quantile { alpha: f64, q: f64 },
    /// Mean at most `m` on `[0, 1]`: `{x − m}`.
    BoundedMean { m: f64 },
    /// Mean zero: `{x, −x}`.
    ZeroMean,
}

impl Builtin {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParameter(s));
        match *self {
            Builtin::MeanVar { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("σ must be positive, got {sigma}"))
            }
            Builtin::Quantile { alpha, q } if !(alpha > 0.0 && alpha < 1.0) || !q.is_finite() => {
                bad(format!("quantile needs α ∈ (0,1) and finite q, got α={alpha}, q={q}"))
            }
            Builtin::BoundedMean { m } if !(m > 0.0 && m < 1.0) => {
                bad(format!("bounded mean needs m ∈ (0,1), got {m}"))
            }
            _ => Ok(()),
        }
    }

    fn forms(&self) -> Vec<ClosedForm> {
        match *self {
            Builtin::MeanVar { sigma } => vec![
                ClosedForm::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                ClosedForm::Linear {
                    slope: -1.0,
                    intercept: 0.0,
                },
                ClosedForm::Quadratic {
                    a: 1.0,
                    b: 0.0,
                    c: -sigma * sigma,
                },
            ],
            Builtin::Quantile { alpha, q } => vec![ClosedForm::LowerTail { level: alpha, q }],
            Builtin::BoundedMean { m } => vec![ClosedForm::Linear {
                slope: 1.0,
                intercept: -m,
            }],
            Builtin::ZeroMean => vec![
                ClosedForm::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                ClosedForm::Linear {
                    slope: -1.0,
                    intercept: 0.0,
                },
            ],
        }
    }

    /// Whether `1 + Σ πᵢ gᵢ ≥ −tol` on the whole sample space (ℝ, or
    /// `[0, 1]` for the bounded mean).
    pub fn analytic_in_pi_phi(&self, pi: &PiVector, tol: f64) -> Result<bool> {
        self.validate()?;
        let p = pi.as_slice();
        check_len("π", p.len(), self.forms().len())?;
        Ok(match *self {
            Builtin::MeanVar { sigma } => {
                let params = MeanVarParams::new(sigma, p[0] - p[1], p[2] * sigma * sigma)?;
                params.ellipse_value() <= 1.0 + tol
            }
            Builtin::Quantile { alpha, .. } => 1.0 + p[0] * (alpha - 1.0) >= -tol,
            Builtin::BoundedMean { m } => 1.0 - p[0] * m >= -tol,
            Builtin::ZeroMean => (p[0] - p[1]).abs() <= tol,
        })
    }
}

/// Constraint functions of a built-in hypothesis evaluated on `grid`, with
/// closed forms attached.
pub fn builtin_constraints(kind: &Builtin, grid: &SampleGrid) -> Result<Hypothesis> {
    kind.validate()?;
    if let Builtin::BoundedMean { .. } = kind {
        let xs = grid
            .scalars()
            .ok_or_else(|| Error::InvalidGrid("bounded mean needs a scalar grid".into()))?;
        if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidGrid(
                "bounded mean needs grid points in [0, 1]".into(),
            ));
        }
    }
    let cs = kind
        .forms()
        .into_iter()
        .map(|f| ConstraintFunction::from_closed_form(f, grid))
        .collect::<Result<Vec<_>>>()?;
    Hypothesis::new(grid.clone(), cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_TOL;

    fn grid(xs: &[f64]) -> SampleGrid {
        SampleGrid::scalar(xs.to_vec()).unwrap()
    }

    fn pi(v: &[f64]) -> PiVector {
        PiVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn candidate_examples() {
        let mv = builtin_constraints(&Builtin::MeanVar { sigma: 1.0 }, &grid(&[-2.0, -1.0, 0.0, 1.0, 2.0]))
            .unwrap();
        let one = candidate_evar(&PiVector::zeros(3), &mv, DEFAULT_TOL).unwrap();
        assert!(one.values().iter().all(|v| *v == 1.0));
        let sq = candidate_evar(&pi(&[0.0, 0.0, 1.0]), &mv, DEFAULT_TOL).unwrap();
        assert_eq!(sq.values(), &[4.0, 1.0, 0.0, 1.0, 4.0]);
        assert!(!sq.clipped);

        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let bm = builtin_constraints(&Builtin::BoundedMean { m: 0.5 }, &grid(&xs)).unwrap();
        let e = candidate_evar(&pi(&[2.0]), &bm, DEFAULT_TOL).unwrap();
        for (v, x) in e.values().iter().zip(&xs) {
            assert!((v - 2.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn clipping_is_flagged() {
        let q = builtin_constraints(&Builtin::Quantile { alpha: 0.5, q: 0.0 }, &grid(&[-1.0, 1.0]))
            .unwrap();
        let e = candidate_evar(&pi(&[2.5]), &q, DEFAULT_TOL).unwrap();
        assert!(e.clipped);
        assert_eq!(e.values(), &[0.0, 2.25]);
    }

    #[test]
    fn pi_phi_examples() {
        let q = builtin_constraints(&Builtin::Quantile { alpha: 0.5, q: 0.0 }, &grid(&[-1.0, 1.0]))
            .unwrap();
        assert!(in_pi_phi(&pi(&[2.0]), &q, DEFAULT_TOL).unwrap());
        assert!(!in_pi_phi(&pi(&[2.5]), &q, DEFAULT_TOL).unwrap());
        assert!(in_pi_phi(&PiVector::zeros(1), &q, DEFAULT_TOL).unwrap());

        let p = MeanVarParams::new(1.0, 1.01, 0.5).unwrap();
        assert!(!mean_var_maximal(&p));
        let xs: Vec<f64> = (-1000..=1000).map(|i| i as f64 / 100.0).collect();
        let mv = builtin_constraints(&Builtin::MeanVar { sigma: 1.0 }, &grid(&xs)).unwrap();
        assert!(!in_pi_phi(&p.to_pi().unwrap(), &mv, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn ellipse_examples() {
        assert!(mean_var_maximal(&MeanVarParams::new(1.0, 0.0, 1.0).unwrap()));
        assert!(mean_var_maximal(&MeanVarParams::new(1.0, 0.0, 0.0).unwrap()));
        assert!(!mean_var_maximal(&MeanVarParams::new(2.0, 0.6, 0.5).unwrap()));
        assert!(MeanVarParams::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn dominating_examples() {
        let mv = builtin_constraints(&Builtin::MeanVar { sigma: 1.0 }, &grid(&[-2.0, -1.0, 0.0, 1.0, 2.0]))
            .unwrap();
        match dominating_weights(&EVariable::constant(5, 1.0).unwrap(), &mv, DEFAULT_TOL).unwrap() {
            Domination::Feasible { pi } => assert_eq!(pi.total(), 0.0),
            d => panic!("{d:?}"),
        }
        let sq = EVariable::raw(vec![4.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        let Domination::Feasible { pi } = dominating_weights(&sq, &mv, DEFAULT_TOL).unwrap() else {
            panic!("x² must be dominated");
        };
        let cert = affine_values(&pi, &mv).unwrap();
        for (c, v) in cert.iter().zip(sq.values()) {
            assert!(c + 1e-8 >= *v);
        }

        let q = builtin_constraints(&Builtin::Quantile { alpha: 0.5, q: 0.0 }, &grid(&[-1.0, 1.0]))
            .unwrap();
        let h = EVariable::raw(vec![0.0, 2.0]).unwrap();
        let Domination::Feasible { pi } = dominating_weights(&h, &q, DEFAULT_TOL).unwrap() else {
            panic!("2·1{{x>0}} must be dominated");
        };
        assert!((pi.as_slice()[0] - 2.0).abs() < 1e-8);

        let bad = EVariable::constant(2, 1.5).unwrap();
        let Domination::Infeasible { certificate } = dominating_weights(&bad, &q, DEFAULT_TOL).unwrap()
        else {
            panic!("constant 1.5 is not an e-variable");
        };
        assert!(crate::measure::membership(&certificate, &q, 1e-9).unwrap());
    }

    #[test]
    fn cq_examples() {
        let mv = builtin_constraints(&Builtin::MeanVar { sigma: 1.0 }, &grid(&[-2.0, -1.0, 0.0, 1.0, 2.0]))
            .unwrap();
        assert!(check_constraint_qualification(&mv, DEFAULT_TOL).unwrap().holds);
        let q = builtin_constraints(&Builtin::Quantile { alpha: 0.5, q: 0.0 }, &grid(&[-1.0, 1.0]))
            .unwrap();
        assert!(check_constraint_qualification(&q, DEFAULT_TOL).unwrap().holds);
        let neg = Hypothesis::from_values(grid(&[0.0, 1.0]), vec![vec![-1.0, 0.0]]).unwrap();
        let r = check_constraint_qualification(&neg, DEFAULT_TOL).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness.unwrap().point, 0);
    }

    #[test]
    fn builtin_values() {
        let mv = builtin_constraints(&Builtin::MeanVar { sigma: 1.0 }, &grid(&[-1.0, 0.0, 1.0])).unwrap();
        let vals: Vec<&[f64]> = mv.constraints().iter().map(|c| c.values()).collect();
        assert_eq!(vals, vec![&[-1.0, 0.0, 1.0][..], &[1.0, 0.0, -1.0], &[0.0, -1.0, 0.0]]);
        let q = builtin_constraints(&Builtin::Quantile { alpha: 0.5, q: 0.0 }, &grid(&[-1.0, 1.0])).unwrap();
        assert_eq!(q.constraints()[0].values(), &[-0.5, 0.5]);
        let bm = builtin_constraints(&Builtin::BoundedMean { m: 0.5 }, &grid(&[0.0, 1.0])).unwrap();
        assert_eq!(bm.constraints()[0].values(), &[-0.5, 0.5]);
        assert!(builtin_constraints(&Builtin::BoundedMean { m: 0.5 }, &grid(&[0.0, 2.0])).is_err());
        assert!(builtin_constraints(&Builtin::Quantile { alpha: 1.0, q: 0.0 }, &grid(&[0.0])).is_err());
    }

    #[test]
    fn analytic_intervals() {
        let q = Builtin::Quantile { alpha: 0.5, q: 0.0 };
        assert!(q.analytic_in_pi_phi(&pi(&[2.0]), 0.0).unwrap());
        assert!(!q.analytic_in_pi_phi(&pi(&[2.5]), 0.0).unwrap());
        let bm = Builtin::BoundedMean { m: 0.5 };
        assert!(bm.analytic_in_pi_phi(&pi(&[2.0]), 0.0).unwrap());
        assert!(!bm.analytic_in_pi_phi(&pi(&[2.1]), 0.0).unwrap());
        assert!(Builtin::ZeroMean.analytic_in_pi_phi(&pi(&[0.3, 0.3]), 0.0).unwrap());
        assert!(!Builtin::ZeroMean.analytic_in_pi_phi(&pi(&[0.3, 0.0]), 0.0).unwrap());
    }
}
