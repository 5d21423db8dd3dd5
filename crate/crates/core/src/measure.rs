//! Finite sample spaces, measures, constraint functions and hypotheses.
//!
//! A [`SampleGrid`] stands in for the sample space. Everything else is a
//! vector aligned with the grid's points: constraint values, measure
//! weights and e-variable values.

use crate::error::{check_len, Error, Result};
use crate::lp::LinearProgram;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;

/// Default tolerance for feasibility comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Finite stand-in for `+∞` in e-variable values.
pub const VALUE_CAP: f64 = 1e300;

/// Finite ordered set of sample points in `ℝ^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct SampleGrid {
    dim: usize,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GridRepr {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
}

impl TryFrom<GridRepr> for SampleGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        match r {
            GridRepr::Scalar(v) => SampleGrid::scalar(v),
            GridRepr::Vector(v) => SampleGrid::vector(v),
        }
    }
}

impl From<SampleGrid> for GridRepr {
    fn from(g: SampleGrid) -> Self {
        if g.dim == 1 {
            GridRepr::Scalar(g.coords)
        } else {
            GridRepr::Vector(g.coords.chunks(g.dim).map(|c| c.to_vec()).collect())
        }
    }
}

impl SampleGrid {
    /// Scalar grid; points must be finite and strictly increasing.
    pub fn scalar(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("grid has a non-finite point".into()));
        }
        if let Some(w) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "scalar grid must be strictly increasing (index {})",
                w + 1
            )));
        }
        Ok(SampleGrid {
            dim: 1,
            coords: points,
        })
    }

    /// Evenly spaced scalar grid `start, start+step, …` up to `stop`
    /// (inclusive within half a step).
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidGrid(format!(
                "bad range start={start} stop={stop} step={step}"
            )));
        }
        let n = ((stop - start) / step + 0.5).floor() as usize + 1;
        Self::scalar((0..n).map(|i| start + i as f64 * step).collect())
    }

    /// Grid of vectors; all of equal dimension and pairwise distinct.
    pub fn vector(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::InvalidGrid("grid is empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidGrid("points must have dimension ≥ 1".into()));
        }
        if dim == 1 {
            return Self::scalar(points.into_iter().map(|p| p[0]).collect());
        }
        let mut seen = BTreeSet::new();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidGrid(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGrid(format!("point {i} is not finite")));
            }
            let key: Vec<u64> = p.iter().map(|x| (x + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidGrid(format!("duplicate point at index {i}")));
            }
            coords.extend_from_slice(p);
        }
        Ok(SampleGrid { dim, coords })
    }

    /// All `values^d` tuples in lexicographic order.
    pub fn product(values: &[f64], d: usize) -> Result<Self> {
        if d == 1 {
            return Self::scalar(values.to_vec());
        }
        let k = values.len();
        let total = k.checked_pow(d as u32).unwrap_or(usize::MAX);
        let mut pts = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut p = vec![0.0; d];
            for c in (0..d).rev() {
                p[c] = values[idx % k];
                idx /= k;
            }
            pts.push(p);
        }
        Self::vector(pts)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    /// The points of a scalar grid.
    pub fn scalars(&self) -> Option<&[f64]> {
        (self.dim == 1).then_some(self.coords.as_slice())
    }

    /// Index of the point equal to `p`, if any.
    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        self.points().position(|q| q == p)
    }

    /// Evaluates `f` at every point.
    pub fn map(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }

    /// SHA-256 over dimension and coordinate bit patterns, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for x in &self.coords {
            h.update(x.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Analytic form of a scalar constraint function, kept next to its grid
/// values for exact evaluation off the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `slope·x + intercept`
    Linear { slope: f64, intercept: f64 },
    /// `a·x² + b·x + c`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `level − 1{x ≤ q}`
    LowerTail { level: f64, q: f64 },
    /// `scale·1{x = at}`
    Indicator { at: f64, scale: f64 },
    /// Identically zero.
    Zero,
}

impl ClosedForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::Linear { slope, intercept } => slope * x + intercept,
            ClosedForm::Quadratic { a, b, c } => (a * x + b) * x + c,
            ClosedForm::LowerTail { level, q } => level - if x <= q { 1.0 } else { 0.0 },
            ClosedForm::Indicator { at, scale } => {
                if x == at {
                    scale
                } else {
                    0.0
                }
            }
            ClosedForm::Zero => 0.0,
        }
    }
}

/// One constraint function `g` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFunction {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    closed_form: Option<ClosedForm>,
}

impl ConstraintFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConstraint(format!(
                "constraint value at index {i} is not finite"
            )));
        }
        Ok(ConstraintFunction {
            values,
            closed_form: None,
        })
    }

    /// Evaluates a closed form on a scalar grid.
    pub fn from_closed_form(form: ClosedForm, grid: &SampleGrid) -> Result<Self> {
        let xs = grid.scalars().ok_or_else(|| {
            Error::InvalidConstraint("closed forms need a scalar grid".into())
        })?;
        let mut c = Self::new(xs.iter().map(|&x| form.eval(x)).collect())?;
        c.closed_form = Some(form);
        Ok(c)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    /// Multiplies by a constant, scaling any closed form too.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = Self::new(self.values.iter().map(|v| c * v).collect())?;
        out.closed_form = match self.closed_form {
            Some(ClosedForm::Linear { slope, intercept }) => Some(ClosedForm::Linear {
                slope: c * slope,
                intercept: c * intercept,
            }),
            Some(ClosedForm::Quadratic { a, b, c: k }) => Some(ClosedForm::Quadratic {
                a: c * a,
                b: c * b,
                c: c * k,
            }),
            Some(ClosedForm::Zero) => Some(ClosedForm::Zero),
            _ => None,
        };
        Ok(out)
    }
}

/// The set of probability measures on a grid integrating every constraint
/// function to a nonpositive value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    grid: SampleGrid,
    constraints: Vec<ConstraintFunction>,
}

impl Hypothesis {
    pub fn new(grid: SampleGrid, constraints: Vec<ConstraintFunction>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidConstraint(
                "a hypothesis needs at least one constraint function".into(),
            ));
        }
        for c in &constraints {
            check_len("constraint", c.values.len(), grid.len())?;
        }
        Ok(Hypothesis { grid, constraints })
    }

    /// Convenience constructor from raw value vectors.
    pub fn from_values(grid: SampleGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        let cs = values
            .into_iter()
            .map(ConstraintFunction::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, cs)
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn constraints(&self) -> &[ConstraintFunction] {
        &self.constraints
    }

    /// Number of constraint functions.
    pub fn dim(&self) -> usize {
        self.constraints.len()
    }

    /// Value of constraint `i` at grid point `x`.
    pub fn value(&self, i: usize, x: usize) -> f64 {
        self.constraints[i].values[x]
    }

    /// Largest absolute constraint value on the grid.
    pub fn max_abs(&self) -> f64 {
        self.constraints
            .iter()
            .flat_map(|c| c.values.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// The program `maximize objective·p` over probability vectors `p`
    /// satisfying every constraint.
    pub(crate) fn probability_program(&self, objective: Vec<f64>) -> LinearProgram {
        let n = self.grid.len();
        let mut lp = LinearProgram::maximize(objective);
        for c in &self.constraints {
            lp = lp.leq(c.values.clone(), 0.0);
        }
        lp.eq(vec![1.0; n], 1.0)
    }
}

/// Nonnegative weights on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(w)
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.weights
    }
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "weight at index {i} is negative or not finite: {}",
                weights[i]
            )));
        }
        Ok(DiscreteMeasure { weights })
    }

    /// A measure whose mass is 1 within `1e-12`.
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(weights)?;
        if !m.is_probability() {
            return Err(Error::InvalidMeasure(format!(
                "mass {} is not 1",
                m.mass()
            )));
        }
        Ok(m)
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(weights)?;
        let mass = m.mass();
        if !(mass > 0.0) {
            return Err(Error::InvalidMeasure("zero mass cannot be normalized".into()));
        }
        Ok(DiscreteMeasure {
            weights: m.weights.into_iter().map(|w| w / mass).collect(),
        })
    }

    pub fn dirac(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        DiscreteMeasure { weights }
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteMeasure {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= 1e-12
    }

    /// Indices carrying positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }
}

/// How an e-variable was constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum EvarForm {
    Raw,
    /// `max(0, 1 + Σ πᵢ gᵢ)`
    AffineInConstraints { pi: Vec<f64> },
    /// `Σ wⱼ exp(λⱼ x − ψ(λⱼ))`
    SubpsiMixture { nodes: Vec<f64>, weights: Vec<f64> },
    /// `1 + c (f − f_π)` for a finite group.
    Symmetry { f: Vec<f64>, group: String },
}

/// Nonnegative function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EVariable {
    values: Vec<f64>,
    form: EvarForm,
    /// Some value was clipped at zero at a non-negligible point.
    #[serde(default)]
    pub clipped: bool,
    /// Some value hit [`VALUE_CAP`].
    #[serde(default)]
    pub capped: bool,
}

impl EVariable {
    /// Values above [`VALUE_CAP`] (including `+∞`) are capped and flagged.
    pub fn new(values: Vec<f64>, form: EvarForm) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "e-variable value at index {i} is negative or NaN: {}",
                values[i]
            )));
        }
        let capped = values.iter().any(|v| *v > VALUE_CAP);
        let values = values.into_iter().map(|v| v.min(VALUE_CAP)).collect();
        Ok(EVariable {
            values,
            form,
            clipped: false,
            capped,
        })
    }

    pub fn raw(values: Vec<f64>) -> Result<Self> {
        Self::new(values, EvarForm::Raw)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::raw(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn form(&self) -> &EvarForm {
        &self.form
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `Σᵢ μᵢ fᵢ` as a plain dot product.
pub fn expectation(mu: &DiscreteMeasure, f: &[f64]) -> Result<f64> {
    check_len("function", f.len(), mu.len())?;
    Ok(mu.weights.iter().zip(f).map(|(w, v)| w * v).sum())
}

/// Whether `mu` integrates every constraint of `h` to at most `tol`.
pub fn membership(mu: &DiscreteMeasure, h: &Hypothesis, tol: f64) -> Result<bool> {
    check_len("measure", mu.len(), h.grid.len())?;
    for c in &h.constraints {
        if expectation(mu, &c.values)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Grid points charged by no measure of the hypothesis.
///
/// Point `i` is negligible iff `max pᵢ` over the discretized hypothesis is
/// at most `tol`. If the hypothesis is empty every point is negligible.
pub fn negligible_points(h: &Hypothesis, tol: f64) -> Result<BTreeSet<usize>> {
    let n = h.grid.len();
    let mut charged = vec![false; n];
    let mut out = BTreeSet::new();
    for i in 0..n {
        if charged[i] {
            continue;
        }
        let mut obj = vec![0.0; n];
        obj[i] = 1.0;
        let sol = h.probability_program(obj).solve()?;
        if !sol.is_optimal() {
            return Ok((0..n).collect());
        }
        // Any optimal point also witnesses the other points it charges.
        for (j, p) in sol.point.iter().enumerate() {
            if *p > tol {
                charged[j] = true;
            }
        }
        if sol.value <= tol {
            out.insert(i);
        }
    }
    Ok(out)
}

/// Complement of [`negligible_points`], in index order.
pub fn charged_points(h: &Hypothesis, tol: f64) -> Result<Vec<usize>> {
    let neg = negligible_points(h, tol)?;
    Ok((0..h.grid.len()).filter(|i| !neg.contains(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> Hypothesis {
        let g = SampleGrid::scalar(xs.to_vec()).unwrap();
        Hypothesis::from_values(
            g,
            vec![
                xs.to_vec(),
                xs.iter().map(|x| -x).collect(),
                xs.iter().map(|x| x * x - 1.0).collect(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn expectation_examples() {
        let d = DiscreteMeasure::dirac(3, 1);
        assert_eq!(expectation(&d, &[5.0, 7.0, 9.0]).unwrap(), 7.0);
        let u = DiscreteMeasure::uniform(2);
        assert_eq!(expectation(&u, &[-1.0, 1.0]).unwrap(), 0.0);
        let m = DiscreteMeasure::probability(vec![0.25, 0.75]).unwrap();
        assert_eq!(expectation(&m, &[0.0, 4.0]).unwrap(), 3.0);
        assert!(matches!(
            expectation(&m, &[1.0]),
            Err(Error::Alignment { .. })
        ));
    }

    #[test]
    fn membership_examples() {
        let h = mean_var(&[-1.0, 0.0, 1.0]);
        let sym = DiscreteMeasure::probability(vec![0.5, 0.0, 0.5]).unwrap();
        assert!(membership(&sym, &h, DEFAULT_TOL).unwrap());
        let one = DiscreteMeasure::dirac(3, 2);
        assert!(!membership(&one, &h, DEFAULT_TOL).unwrap());
        let zero = Hypothesis::from_values(h.grid().clone(), vec![vec![0.0; 3]]).unwrap();
        assert!(membership(&one, &zero, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn negligible_examples() {
        let h = mean_var(&[-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert!(negligible_points(&h, DEFAULT_TOL).unwrap().is_empty());

        let xs = [0.0, 1.0, 2.0];
        let g = SampleGrid::scalar(xs.to_vec()).unwrap();
        let empty = Hypothesis::from_values(
            g,
            vec![
                xs.iter().map(|x| x - 3.0).collect(),
                xs.iter().map(|x| 3.0 - x).collect(),
            ],
        )
        .unwrap();
        assert_eq!(
            negligible_points(&empty, DEFAULT_TOL).unwrap(),
            (0..3).collect()
        );

        let g = SampleGrid::scalar(vec![0.0, 1.0]).unwrap();
        let ind = Hypothesis::from_values(g, vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            negligible_points(&ind, DEFAULT_TOL).unwrap(),
            [0].into_iter().collect()
        );
    }

    #[test]
    fn grid_validation() {
        assert!(SampleGrid::scalar(vec![]).is_err());
        assert!(SampleGrid::scalar(vec![1.0, 1.0]).is_err());
        assert!(SampleGrid::scalar(vec![2.0, 1.0]).is_err());
        assert!(SampleGrid::vector(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(SampleGrid::vector(vec![vec![0.0, 1.0], vec![0.0]]).is_err());
        let g = SampleGrid::range(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g.scalars().unwrap(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let p = SampleGrid::product(&[0.0, 1.0], 2).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.point(1), &[0.0, 1.0]);
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.5, -0.1]).is_err());
        assert!(DiscreteMeasure::new(vec![f64::NAN]).is_err());
        assert!(DiscreteMeasure::probability(vec![0.5, 0.4]).is_err());
        assert!(Hypothesis::from_values(SampleGrid::scalar(vec![0.0]).unwrap(), vec![]).is_err());
        assert!(ConstraintFunction::new(vec![f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn evar_caps_infinite_values() {
        let e = EVariable::raw(vec![1.0, f64::INFINITY]).unwrap();
        assert!(e.capped);
        assert_eq!(e.values()[1], VALUE_CAP);
        assert!(EVariable::raw(vec![-1.0]).is_err());
    }

    #[test]
    fn json_shapes() {
        let g: SampleGrid = serde_json::from_str("[[0,1],[1,0]]").unwrap();
        assert_eq!(g.dim(), 2);
        let s: SampleGrid = serde_json::from_str("[0, 1, 2]").unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0.0,1.0,2.0]");
        assert!(serde_json::from_str::<SampleGrid>("[1, 0]").is_err());
        assert!(serde_json::from_str::<DiscreteMeasure>("[0.5, -1]").is_err());
    }
}
