//! Carathéodory reduction of discrete measures to at most `m + 1` atoms with
//! the same `m` moments, and the relaxed hypothesis, which also admits
//! constraints integrating to `−∞`.

use crate::adversary::worst_case_expectation;
use crate::error::{check_len, Error, Result};
use crate::lp::LpStatus;
use crate::measure::{expectation, membership, DiscreteMeasure, EVariable, Hypothesis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Functions on the grid and the integrals a reduced measure must match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub functions: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl MomentSpec {
    pub fn new(functions: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let spec = MomentSpec { functions, targets };
        spec.validate()?;
        Ok(spec)
    }

    /// Targets taken from `mu`.
    pub fn from_measure(functions: Vec<Vec<f64>>, mu: &DiscreteMeasure) -> Result<Self> {
        let targets = functions
            .iter()
            .map(|f| expectation(mu, f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(functions, targets)
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(Error::InvalidParameter("at least one moment function is required".into()));
        }
        check_len("moment targets", self.targets.len(), self.functions.len())?;
        let n = self.functions[0].len();
        for (k, f) in self.functions.iter().enumerate() {
            check_len("moment function", f.len(), n)?;
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("moment function {k} is not finite")));
            }
        }
        if self.targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("moment targets must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// `|∫fₖ dν − targetₖ|` per function.
    pub fn residuals(&self, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        self.functions
            .iter()
            .zip(&self.targets)
            .map(|(f, t)| Ok((expectation(nu, f)? - t).abs()))
            .collect()
    }
}

/// Last column of the orthogonal factor of the `rows × cols` matrix `a`
/// (row-major, `rows > cols`), from Householder reflections.
fn last_orthogonal_column(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut r = a.to_vec();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols.min(rows - 1) {
        let mut v: Vec<f64> = (j..rows).map(|i| r[i * cols + j]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        v[0] += if v[0] >= 0.0 { norm } else { -norm };
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for c in j..cols {
            let dot: f64 = (j..rows).map(|i| v[i - j] * r[i * cols + c]).sum();
            let s = 2.0 * dot / vv;
            for i in j..rows {
                r[i * cols + c] -= s * v[i - j];
            }
        }
        reflectors.push(v);
    }
    // Q e_last = H_0 H_1 ⋯ H_p e_last.
    let mut q = vec![0.0; rows];
    q[rows - 1] = 1.0;
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let dot: f64 = (j..rows).map(|i| v[i - j] * q[i]).sum();
        let s = 2.0 * dot / vv;
        for i in j..rows {
            q[i] -= s * v[i - j];
        }
    }
    q
}

/// A measure on at most `m + 1` points of the support of `mu` with unit
/// mass and the same `m` moments.
///
/// Each step takes a kernel direction of the moment matrix restricted to
/// the current support (ones row included) and moves along it until the
/// first weight hits zero, lowest index on ties. Inputs already supported
/// on at most `m + 1` points are returned unchanged.
pub fn barycenter_reduce(mu: &DiscreteMeasure, spec: &MomentSpec) -> Result<DiscreteMeasure> {
    spec.validate()?;
    check_len("moment function", spec.functions[0].len(), mu.len())?;
    let m = spec.len();
    let mut w = mu.weights().to_vec();
    let mut support = mu.support();
    while support.len() > m + 1 {
        let k = support.len();
        // Transposed moment matrix: one row per atom, columns 1, f₁, …, fₘ.
        let mut a = Vec::with_capacity(k * (m + 1));
        for &x in &support {
            a.push(1.0);
            a.extend(spec.functions.iter().map(|f| f[x]));
        }
        let v = last_orthogonal_column(&a, k, m + 1);
        let mut step = f64::INFINITY;
        let mut hit = 0;
        for (j, &x) in support.iter().enumerate() {
            if v[j] < 0.0 {
                let t = w[x] / -v[j];
                if t < step {
                    step = t;
                    hit = j;
                }
            }
        }
        for (j, &x) in support.iter().enumerate() {
            w[x] = (w[x] + step * v[j]).max(0.0);
        }
        w[support[hit]] = 0.0;
        support.retain(|&x| w[x] > 0.0);
    }
    DiscreteMeasure::new(w)
}

/// Constraint tables whose entries may be `−∞`, a stand-in for functions
/// unbounded below whose integral diverges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedHypothesis {
    n: usize,
    constraints: Vec<Vec<f64>>,
}

impl RelaxedHypothesis {
    pub fn new(n: usize, constraints: Vec<Vec<f64>>) -> Result<Self> {
        for (k, c) in constraints.iter().enumerate() {
            check_len("constraint", c.len(), n)?;
            if c.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::InvalidConstraint(format!(
                    "constraint {k} has NaN or +∞ entries"
                )));
            }
        }
        Ok(RelaxedHypothesis { n, constraints })
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    pub fn with_constraint(mut self, c: Vec<f64>) -> Result<Self> {
        let mut all = std::mem::take(&mut self.constraints);
        all.push(c);
        Self::new(self.n, all)
    }
}

impl From<&Hypothesis> for RelaxedHypothesis {
    fn from(h: &Hypothesis) -> Self {
        RelaxedHypothesis {
            n: h.grid().len(),
            constraints: h.constraints().iter().map(|c| c.values().to_vec()).collect(),
        }
    }
}

/// Integral of `f` split into the positive part and the (possibly `−∞`)
/// negative part; points without mass contribute nothing.
fn split_integral(mu: &DiscreteMeasure, f: &[f64]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (w, v) in mu.weights().iter().zip(f) {
        if *w > 0.0 {
            if *v > 0.0 {
                pos += w * v;
            } else {
                neg += w * v;
            }
        }
    }
    (pos, neg)
}

/// Every positive part is integrable and every integral, `−∞` allowed, is
/// at most `tol`.
pub fn relaxed_membership(mu: &DiscreteMeasure, h: &RelaxedHypothesis, tol: f64) -> Result<bool> {
    check_len("measure", mu.len(), h.n)?;
    Ok(h.constraints.iter().all(|c| {
        let (pos, neg) = split_integral(mu, c);
        pos.is_finite() && pos + neg <= tol
    }))
}

/// Membership that also requires every constraint to be integrable.
pub fn strict_membership(mu: &DiscreteMeasure, h: &RelaxedHypothesis, tol: f64) -> Result<bool> {
    check_len("measure", mu.len(), h.n)?;
    Ok(h.constraints.iter().all(|c| {
        let (pos, neg) = split_integral(mu, c);
        pos.is_finite() && neg.is_finite() && pos + neg <= tol
    }))
}

/// Truncation of the measure `Σ 2⁻ˣ δₓ` on the positive integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedDemo {
    pub n: usize,
    /// Mass `2⁻ᴺ` of the points beyond `N`, lumped into one tail atom.
    pub tail_mass: f64,
    /// Membership of the measure under `{fₙ}`.
    pub phi_membership: bool,
    /// `∫f₀ dμ` over `{1, …, k}` for `k = 1, …, N`.
    pub f0_partial_sums: Vec<f64>,
    /// `∫|f₀| dμ` over `{1, …, N}`; it grows like `N`.
    pub f0_abs_partial_sum: f64,
    /// Relaxed membership under `{fₙ} ∪ {f₀}`.
    pub relaxed_membership_phi0: bool,
    /// Membership requiring `f₀` to be integrable.
    pub strict_membership_phi0: bool,
}

/// Points `1, …, N` plus a tail atom for `{x > N}`, the constraints
/// `fₙ = 1 − 2ⁿ·1{n}` (value 1 on the tail) and `f₀(x) = −2ˣ`, which is
/// `−∞` on the tail since its integral there diverges.
pub fn relaxed_demo(n: usize) -> Result<RelaxedDemo> {
    if !(1..=1000).contains(&n) {
        return Err(Error::InvalidParameter(format!("truncation {n} is outside 1..=1000")));
    }
    let pow = |x: usize| 2f64.powi(x as i32);
    let mut w: Vec<f64> = (1..=n).map(|x| 1.0 / pow(x)).collect();
    let tail_mass = 1.0 / pow(n);
    w.push(tail_mass);
    let mu = DiscreteMeasure::new(w)?;
    let phi: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            let mut f = vec![1.0; n + 1];
            f[k - 1] = 1.0 - pow(k);
            f
        })
        .collect();
    let mut f0: Vec<f64> = (1..=n).map(|x| -pow(x)).collect();
    f0.push(f64::NEG_INFINITY);

    let h = RelaxedHypothesis::new(n + 1, phi)?;
    let phi_membership = relaxed_membership(&mu, &h, 0.0)? && strict_membership(&mu, &h, 0.0)?;
    let mut partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    for x in 0..n {
        acc += mu.weights()[x] * f0[x];
        partial.push(acc);
    }
    let h0 = h.with_constraint(f0)?;
    Ok(RelaxedDemo {
        n,
        tail_mass,
        phi_membership,
        f0_abs_partial_sum: -acc,
        f0_partial_sums: partial,
        relaxed_membership_phi0: relaxed_membership(&mu, &h0, 0.0)?,
        strict_membership_phi0: strict_membership(&mu, &h0, 0.0)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    /// Largest `∫h dμ` over the trials.
    pub max_expectation: f64,
    /// Largest moment mismatch between a trial and its reduction.
    pub max_residual: f64,
    /// Largest support of a reduced measure.
    pub max_support: usize,
    /// Whether `h` passes the adversary; if not, failures are expected.
    pub candidate_is_evar: bool,
    pub first_failure: Option<usize>,
}

impl EquivalenceReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    /// `h` fails the adversary and some trial caught it.
    pub fn expected_failure(&self) -> bool {
        !self.candidate_is_evar && self.failed > 0
    }
}

/// Draws measures in the discretized hypothesis, reduces each with moments
/// `{h, g₁, …, g_d}` and checks that the reduction stays in the hypothesis,
/// keeps `∫h`, and that `∫h ≤ 1 + tol`.
///
/// The first trial is the adversary's worst-case measure; the rest mix a
/// few optimal vertices for random objectives with Dirichlet weights, so
/// many saturate constraints. An empty hypothesis yields zero trials.
pub fn relaxation_equivalence_check(
    h: &Hypothesis,
    e: &EVariable,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<EquivalenceReport> {
    let n = h.grid().len();
    check_len("e-variable", e.len(), n)?;
    let worst = worst_case_expectation(e, h, tol)?;
    let mut report = EquivalenceReport {
        trials: 0,
        passed: 0,
        failed: 0,
        max_expectation: f64::NEG_INFINITY,
        max_residual: 0.0,
        max_support: 0,
        candidate_is_evar: worst.passes(),
        first_failure: None,
    };
    let Some(first) = worst.witness else {
        return Ok(report);
    };
    let mut functions = vec![e.values().to_vec()];
    functions.extend(h.constraints().iter().map(|c| c.values().to_vec()));
    let scale = functions
        .iter()
        .flatten()
        .fold(1.0f64, |a, v| a.max(v.abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let mu = if t == 0 {
            first.clone()
        } else {
            random_member(h, &mut rng)?
        };
        let spec = MomentSpec::from_measure(functions.clone(), &mu)?;
        let nu = barycenter_reduce(&mu, &spec)?;
        let resid = spec.residuals(&nu)?.into_iter().fold(0.0, f64::max);
        let eh = spec.targets[0];
        let ok = nu.support().len() <= spec.len() + 1
            && (nu.mass() - 1.0).abs() <= 1e-10
            && resid <= 1e-10 * scale
            && membership(&nu, h, tol)?
            && expectation(&nu, e.values())? <= 1.0 + tol
            && eh <= 1.0 + tol;
        report.trials += 1;
        report.max_expectation = report.max_expectation.max(eh);
        report.max_residual = report.max_residual.max(resid);
        report.max_support = report.max_support.max(nu.support().len());
        if ok {
            report.passed += 1;
        } else {
            report.failed += 1;
            report.first_failure.get_or_insert(t);
        }
    }
    Ok(report)
}

/// A Dirichlet mixture of up to four optimal vertices of the probability
/// program for random objectives.
fn random_member(h: &Hypothesis, rng: &mut ChaCha8Rng) -> Result<DiscreteMeasure> {
    let n = h.grid().len();
    let k = rng.gen_range(1..=4);
    let mut w = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..k {
        let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = h.probability_program(obj).solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NumericallyStalled {
                iterations: sol.iterations,
                reason: format!("vertex sampling returned {:?}", sol.status),
            });
        }
        let g: f64 = -(1.0 - rng.gen::<f64>()).ln();
        total += g;
        for (wi, p) in w.iter_mut().zip(&sol.point) {
            *wi += g * p.max(0.0);
        }
    }
    DiscreteMeasure::new(w.into_iter().map(|v| v / total).collect())
}
