//! Finite groups acting on grids by permutations of the grid indices:
//! orbit averages, symmetrized measures, exact e-variables `1 + f − f_π`
//! and invariance constraints.

use crate::error::{check_len, Error, Result};
use crate::measure::{ConstraintFunction, DiscreteMeasure, EVariable, EvarForm, Hypothesis, SampleGrid};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};

/// Largest group [`FiniteGroupAction::from_generators`] will enumerate.
pub const MAX_GROUP_ORDER: usize = 100_000;

/// A permutation `σ` of `0..n`; `σ[i]` is the image of point `i`.
pub type Permutation = Vec<usize>;

/// Left action `(a∘b)[i] = a[b[i]]`.
pub fn compose(a: &[usize], b: &[usize]) -> Permutation {
    b.iter().map(|&i| a[i]).collect()
}

pub fn inverse(a: &[usize]) -> Permutation {
    let mut inv = vec![0; a.len()];
    for (i, &j) in a.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

fn identity(n: usize) -> Permutation {
    (0..n).collect()
}

fn check_bijection(p: &[usize], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidGroup(format!(
            "permutation has length {}, expected {n}",
            p.len()
        )));
    }
    let mut seen = vec![false; n];
    for &j in p {
        if j >= n || seen[j] {
            return Err(Error::InvalidGroup(format!("{p:?} is not a bijection of 0..{n}")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// A finite group of permutations of the grid indices, weighted by its
/// normalized counting measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGroupAction {
    n: usize,
    elements: Vec<Permutation>,
    /// Indices into `elements`.
    generators: Vec<usize>,
    identity: usize,
    label: String,
}

impl FiniteGroupAction {
    /// Checks bijectivity, the identity, closure under composition and
    /// under inverses exhaustively. Repeated permutations are merged.
    pub fn new(n: usize, elements: Vec<Permutation>, label: impl Into<String>) -> Result<Self> {
        let mut uniq: Vec<Permutation> = Vec::with_capacity(elements.len());
        let mut index: HashMap<Permutation, usize> = HashMap::new();
        for p in elements {
            check_bijection(&p, n)?;
            if !index.contains_key(&p) {
                index.insert(p.clone(), uniq.len());
                uniq.push(p);
            }
        }
        let id = *index
            .get(&identity(n))
            .ok_or_else(|| Error::InvalidGroup("identity is missing".into()))?;
        for a in &uniq {
            if !index.contains_key(&inverse(a)) {
                return Err(Error::InvalidGroup(format!("inverse of {a:?} is missing")));
            }
            for b in &uniq {
                let c = compose(a, b);
                if !index.contains_key(&c) {
                    return Err(Error::InvalidGroup(format!(
                        "{a:?}∘{b:?} = {c:?} is missing"
                    )));
                }
            }
        }
        Ok(FiniteGroupAction {
            n,
            generators: (0..uniq.len()).collect(),
            elements: uniq,
            identity: id,
            label: label.into(),
        })
    }

    /// The subgroup generated by `generators`, enumerated breadth first.
    pub fn from_generators(
        n: usize,
        generators: Vec<Permutation>,
        label: impl Into<String>,
    ) -> Result<Self> {
        for g in &generators {
            check_bijection(g, n)?;
        }
        let (elements, index) = closure(n, &generators)?;
        let gens = generators.iter().map(|g| index[g]).collect::<BTreeSet<_>>();
        Ok(FiniteGroupAction {
            n,
            identity: 0,
            elements,
            generators: gens.into_iter().collect(),
            label: label.into(),
        })
    }

    /// The group acting by permuting the coordinates of each grid point,
    /// generated by the given coordinate permutations. Coordinate `c` of
    /// `σx` is coordinate `s⁻¹(c)` of `x` for a coordinate permutation `s`.
    pub fn coordinate_permutations(
        grid: &SampleGrid,
        coord_gens: &[Vec<usize>],
        label: impl Into<String>,
    ) -> Result<Self> {
        let d = grid.dim();
        let gens = coord_gens
            .iter()
            .map(|s| {
                check_bijection(s, d)?;
                point_map(grid, |x| {
                    let mut y = vec![0.0; d];
                    for c in 0..d {
                        y[s[c]] = x[c];
                    }
                    y
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(grid.len(), gens, label)
    }

    /// All coordinate permutations of a `d`-dimensional grid (`S_d`).
    pub fn symmetric(grid: &SampleGrid) -> Result<Self> {
        let d = grid.dim();
        let mut gens = Vec::new();
        if d >= 2 {
            let mut t: Vec<usize> = (0..d).collect();
            t.swap(0, 1);
            gens.push(t);
            gens.push((0..d).map(|c| (c + 1) % d).collect());
        }
        Self::coordinate_permutations(grid, &gens, format!("s{d}"))
    }

    /// Cyclic shifts of the coordinates.
    pub fn cyclic(grid: &SampleGrid) -> Result<Self> {
        let d = grid.dim();
        let shift: Vec<usize> = (0..d).map(|c| (c + 1) % d).collect();
        Self::coordinate_permutations(grid, &[shift], format!("cyclic:{d}"))
    }

    /// Independent sign flips of each coordinate.
    pub fn signs(grid: &SampleGrid) -> Result<Self> {
        let d = grid.dim();
        let gens = (0..d)
            .map(|c| {
                point_map(grid, |x| {
                    let mut y = x.to_vec();
                    y[c] = -y[c];
                    y
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(grid.len(), gens, format!("signs:{d}"))
    }

    /// Only the identity.
    pub fn trivial(n: usize) -> Self {
        FiniteGroupAction {
            n,
            elements: vec![identity(n)],
            generators: Vec::new(),
            identity: 0,
            label: "trivial".into(),
        }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn grid_len(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn generators(&self) -> Vec<&Permutation> {
        self.generators.iter().map(|&g| &self.elements[g]).collect()
    }

    pub fn identity_index(&self) -> usize {
        self.identity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, p: &[usize]) -> bool {
        self.elements.iter().any(|e| e == p)
    }

    /// Orbits of the grid indices, each sorted, ordered by smallest member.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for i in 0..self.n {
            if seen[i] {
                continue;
            }
            let orbit: BTreeSet<usize> = self.elements.iter().map(|s| s[i]).collect();
            for &j in &orbit {
                seen[j] = true;
            }
            out.push(orbit.into_iter().collect());
        }
        out
    }
}

fn closure(
    n: usize,
    generators: &[Permutation],
) -> Result<(Vec<Permutation>, HashMap<Permutation, usize>)> {
    let mut elements = vec![identity(n)];
    let mut index: HashMap<Permutation, usize> = HashMap::new();
    index.insert(identity(n), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for g in generators {
            let c = compose(g, &elements[k]);
            if !index.contains_key(&c) {
                if elements.len() >= MAX_GROUP_ORDER {
                    return Err(Error::InvalidGroup(format!(
                        "generated group exceeds {MAX_GROUP_ORDER} elements"
                    )));
                }
                index.insert(c.clone(), elements.len());
                queue.push_back(elements.len());
                elements.push(c);
            }
        }
    }
    Ok((elements, index))
}

/// The index permutation induced by a map of points; the grid must be
/// closed under it.
fn point_map(grid: &SampleGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Permutation> {
    let key = |p: &[f64]| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>();
    let lookup: HashMap<Vec<u64>, usize> =
        grid.points().enumerate().map(|(i, p)| (key(p), i)).collect();
    let perm = grid
        .points()
        .map(|p| {
            let q = f(p);
            lookup.get(&key(&q)).copied().ok_or_else(|| {
                Error::InvalidGroup(format!("grid is not closed under the action: {p:?} ↦ {q:?}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    check_bijection(&perm, grid.len())?;
    Ok(perm)
}

/// `(σ*f)(x) = f(σx)`.
pub fn pullback(f: &[f64], sigma: &[usize]) -> Vec<f64> {
    sigma.iter().map(|&j| f[j]).collect()
}

/// `f_π(x) = |G|⁻¹ Σ_σ f(σx)`.
pub fn orbit_average(f: &[f64], g: &FiniteGroupAction) -> Result<Vec<f64>> {
    check_len("function", f.len(), g.n)?;
    let k = g.order() as f64;
    let mut out = vec![0.0; g.n];
    for s in &g.elements {
        for (o, &j) in out.iter_mut().zip(s) {
            *o += f[j];
        }
    }
    Ok(out.into_iter().map(|v| v / k).collect())
}

/// `μ_π = |G|⁻¹ Σ_σ σ_*μ`.
pub fn symmetrize_measure(mu: &DiscreteMeasure, g: &FiniteGroupAction) -> Result<DiscreteMeasure> {
    check_len("measure", mu.len(), g.n)?;
    let k = g.order() as f64;
    let mut out = vec![0.0; g.n];
    for s in &g.elements {
        for (i, w) in mu.weights().iter().enumerate() {
            out[s[i]] += w;
        }
    }
    DiscreteMeasure::new(out.into_iter().map(|v| v / k).collect())
}

/// The exact e-variable `1 + c(f − f_π)` with the largest `c ≤ 1` keeping
/// it nonnegative.
pub fn exact_evar(f: &[f64], g: &FiniteGroupAction) -> Result<EVariable> {
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("f[{i}] is not finite")));
    }
    let fp = orbit_average(f, g)?;
    let u: Vec<f64> = f.iter().zip(&fp).map(|(a, b)| a - b).collect();
    let min_u = u.iter().copied().fold(0.0, f64::min);
    let c = if min_u < -1.0 { -1.0 / min_u } else { 1.0 };
    EVariable::new(
        u.iter().map(|v| (1.0 + c * v).max(0.0)).collect(),
        EvarForm::Symmetry {
            f: f.to_vec(),
            group: g.label.clone(),
        },
    )
}

/// Result of [`evar_upper_envelope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Orbit average of `h − 1`.
    pub f_pi: Vec<f64>,
    /// `max f_π ≤ tol`: `h` is an e-variable for the invariant measures.
    pub is_evar: bool,
    /// `1 + f − f_π` with `f = h − 1`, which dominates `h` when `is_evar`.
    pub envelope: Option<EVariable>,
}

/// Decides the e-variable property for G-invariant measures through the
/// orbit average of `h − 1`, and returns the dominating exact e-variable.
pub fn evar_upper_envelope(h: &EVariable, g: &FiniteGroupAction, tol: f64) -> Result<Envelope> {
    let f: Vec<f64> = h.values().iter().map(|v| v - 1.0).collect();
    let f_pi = orbit_average(&f, g)?;
    let is_evar = f_pi.iter().all(|v| *v <= tol);
    let envelope = if is_evar {
        Some(EVariable::new(
            f.iter().zip(&f_pi).map(|(a, b)| (1.0 + a - b).max(0.0)).collect(),
            EvarForm::Symmetry {
                f,
                group: g.label.clone(),
            },
        )?)
    } else {
        None
    };
    Ok(Envelope {
        f_pi,
        is_evar,
        envelope,
    })
}

/// The hypothesis `{σ*f − f, f − σ*f : σ ∈ S₀, f ∈ F}`, whose discretized
/// measures are the G-invariant ones when `F` separates points.
///
/// `F` defaults to the point indicators. `S₀` must generate `G`; otherwise
/// the error names an element of `G` the generators miss.
pub fn invariance_constraints(
    grid: &SampleGrid,
    g: &FiniteGroupAction,
    s0: &[Permutation],
    separating: Option<&[Vec<f64>]>,
) -> Result<Hypothesis> {
    let n = grid.len();
    check_len("group action", g.n, n)?;
    for s in s0 {
        if !g.contains(s) {
            return Err(Error::InvalidGroup(format!("generator {s:?} is not in the group")));
        }
    }
    let (sub, _) = closure(n, s0)?;
    if sub.len() != g.order() {
        let have: BTreeSet<&Permutation> = sub.iter().collect();
        let missing = g
            .elements
            .iter()
            .find(|e| !have.contains(e))
            .expect("a proper subgroup misses some element")
            .clone();
        return Err(Error::NotGenerating { missing });
    }
    let indicators: Vec<Vec<f64>>;
    let fs: &[Vec<f64>] = match separating {
        Some(fs) => {
            if fs.is_empty() {
                return Err(Error::InvalidConstraint("separating set is empty".into()));
            }
            fs
        }
        None => {
            indicators = (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            &indicators
        }
    };
    let mut cs = Vec::new();
    for s in s0 {
        for f in fs {
            check_len("separating function", f.len(), n)?;
            let d: Vec<f64> = pullback(f, s).iter().zip(f).map(|(a, b)| a - b).collect();
            cs.push(ConstraintFunction::new(d.iter().map(|v| -v).collect())?);
            cs.push(ConstraintFunction::new(d)?);
        }
    }
    if cs.is_empty() {
        cs.push(ConstraintFunction::new(vec![0.0; n])?);
    }
    Hypothesis::new(grid.clone(), cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{expectation, membership};

    fn pairs() -> SampleGrid {
        SampleGrid::product(&[0.0, 1.0], 2).unwrap()
    }

    #[test]
    fn group_construction() {
        let g = FiniteGroupAction::symmetric(&pairs()).unwrap();
        assert_eq!(g.order(), 2);
        // (0,0) (0,1) (1,0) (1,1): the swap exchanges indices 1 and 2.
        assert!(g.contains(&[0, 2, 1, 3]));
        assert_eq!(g.orbits(), vec![vec![0], vec![1, 2], vec![3]]);
        let s3 = FiniteGroupAction::symmetric(&SampleGrid::product(&[0.0, 1.0, 2.0], 3).unwrap())
            .unwrap();
        assert_eq!(s3.order(), 6);
        assert!(FiniteGroupAction::new(2, vec![vec![1, 0]], "x").is_err());
        assert!(FiniteGroupAction::new(3, vec![vec![0, 1, 2], vec![1, 2, 0]], "x").is_err());
        assert!(FiniteGroupAction::new(2, vec![vec![0, 0]], "x").is_err());
        let open = SampleGrid::vector(vec![vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(FiniteGroupAction::symmetric(&open).is_err());
        let signs = FiniteGroupAction::signs(&SampleGrid::scalar(vec![-1.0, 0.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(signs.order(), 2);
    }

    #[test]
    fn orbit_average_examples() {
        let g = FiniteGroupAction::symmetric(&pairs()).unwrap();
        let x1: Vec<f64> = pairs().points().map(|p| p[0]).collect();
        let avg = orbit_average(&x1, &g).unwrap();
        let want: Vec<f64> = pairs().points().map(|p| (p[0] + p[1]) / 2.0).collect();
        assert_eq!(avg, want);
        assert_eq!(orbit_average(&[3.0; 4], &g).unwrap(), vec![3.0; 4]);

        let grid = SampleGrid::vector(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g2 = FiniteGroupAction::symmetric(&grid).unwrap();
        assert_eq!(orbit_average(&[1.0, 0.0], &g2).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn symmetrize_examples() {
        let g = FiniteGroupAction::symmetric(&pairs()).unwrap();
        let inv = DiscreteMeasure::probability(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        assert_eq!(symmetrize_measure(&inv, &g).unwrap(), inv);
        let d = DiscreteMeasure::dirac(4, 1);
        assert_eq!(
            symmetrize_measure(&d, &g).unwrap().weights(),
            &[0.0, 0.5, 0.5, 0.0]
        );
        let m = DiscreteMeasure::probability(vec![0.4, 0.1, 0.2, 0.3]).unwrap();
        assert!((symmetrize_measure(&m, &g).unwrap().mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_evar_examples() {
        let g = FiniteGroupAction::symmetric(&pairs()).unwrap();
        let inv = [0.0, 2.0, 2.0, 5.0];
        assert_eq!(exact_evar(&inv, &g).unwrap().values(), &[1.0; 4]);
        let x1: Vec<f64> = pairs().points().map(|p| p[0]).collect();
        let h = exact_evar(&x1, &g).unwrap();
        let want: Vec<f64> = pairs().points().map(|p| 1.0 + (p[0] - p[1]) / 2.0).collect();
        assert_eq!(h.values(), want.as_slice());
        let big = [0.0, -10.0, 10.0, 0.0];
        let h = exact_evar(&big, &g).unwrap();
        assert!(h.values().iter().all(|v| *v >= 0.0));
        let mu = symmetrize_measure(&DiscreteMeasure::probability(vec![0.2, 0.5, 0.1, 0.2]).unwrap(), &g)
            .unwrap();
        assert!((expectation(&mu, h.values()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let g = FiniteGroupAction::symmetric(&pairs()).unwrap();
        let e = evar_upper_envelope(&EVariable::constant(4, 1.0).unwrap(), &g, 1e-9).unwrap();
        assert!(e.is_evar);
        assert_eq!(e.envelope.unwrap().values(), &[1.0; 4]);

        let h: Vec<f64> = pairs().points().map(|p| if p[0] > p[1] { 2.0 } else { 0.0 }).collect();
        let e = evar_upper_envelope(&EVariable::raw(h.clone()).unwrap(), &g, 1e-9).unwrap();
        assert_eq!(e.f_pi, vec![-1.0, 0.0, 0.0, -1.0]);
        assert!(e.is_evar);
        let env = e.envelope.unwrap();
        assert!(env.values().iter().zip(&h).all(|(a, b)| a >= b));

        let e = evar_upper_envelope(&EVariable::constant(4, 1.1).unwrap(), &g, 1e-9).unwrap();
        assert!(!e.is_evar);
        assert!((e.f_pi[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn invariance_examples() {
        let grid = pairs();
        let g = FiniteGroupAction::symmetric(&grid).unwrap();
        let swap = vec![0, 2, 1, 3];
        let h = invariance_constraints(&grid, &g, std::slice::from_ref(&swap), None).unwrap();
        let exch = DiscreteMeasure::probability(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        let skew = DiscreteMeasure::probability(vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!(membership(&exch, &h, 1e-12).unwrap());
        assert!(!membership(&skew, &h, 1e-12).unwrap());

        let ones = vec![vec![1.0; 4]];
        let h = invariance_constraints(&grid, &g, &[swap], Some(&ones)).unwrap();
        assert!(h.constraints().iter().all(|c| c.values().iter().all(|v| *v == 0.0)));
        assert!(membership(&skew, &h, 1e-12).unwrap());

        let t = FiniteGroupAction::trivial(4);
        let h = invariance_constraints(&grid, &t, &[], None).unwrap();
        assert_eq!(h.dim(), 1);

        let err = invariance_constraints(&grid, &g, &[], None).unwrap_err();
        assert_eq!(err, Error::NotGenerating { missing: vec![0, 2, 1, 3] });
    }
}
