//! Sub-ψ hypotheses: ψ functions and their conjugates, the constraint
//! family `g_λ(x) = e^{λx − ψ(λ)} − 1`, two-point sub-ψ measures, Chernoff
//! bounds and mixture e-variables.

use crate::error::{check_len, Error, Result};
use crate::lp::{LinearProgram, LpStatus};
use crate::measure::{DiscreteMeasure, EVariable, EvarForm, SampleGrid, VALUE_CAP};
use serde::{Deserialize, Serialize};

/// Largest exponent whose exponential stays below [`VALUE_CAP`].
fn log_cap() -> f64 {
    VALUE_CAP.ln()
}

/// Default number of λ nodes, the node at zero included.
pub const DEFAULT_LAMBDA_NODES: usize = 256;

/// Exponent defining the default cap for unbounded domains:
/// `ψ(λ_cap) − λ_cap·x_max = 709`.
const CAP_EXPONENT: f64 = 709.0;

/// A convex, nonnegative ψ with `ψ(0) = 0` on `[0, λ_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PsiFunction {
    /// `σ²λ²/2` on `[0, ∞)`.
    Gaussian { sigma: f64 },
    /// Centered exponential with the given scale θ:
    /// `−log(1 − θλ) − θλ` on `[0, 1/θ)`.
    Exponential { scale: f64 },
    /// Centered gamma: `k(−log(1 − θλ) − θλ)` on `[0, 1/θ)`.
    Gamma { shape: f64, scale: f64 },
    /// Piecewise linear through `(λⱼ, ψⱼ)`, starting at `(0, 0)`, with the
    /// last node included in the domain.
    #[serde(rename = "custom_table")]
    Table { lambdas: Vec<f64>, values: Vec<f64> },
}

impl PsiFunction {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let p = PsiFunction::Gaussian { sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn table(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = PsiFunction::Table { lambdas, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("ψ {name} must be positive, got {v}")))
            }
        };
        match self {
            PsiFunction::Gaussian { sigma } => pos("σ", *sigma),
            PsiFunction::Exponential { scale } => pos("scale", *scale),
            PsiFunction::Gamma { shape, scale } => pos("shape", *shape).and(pos("scale", *scale)),
            PsiFunction::Table { lambdas, values } => {
                check_len("ψ table values", values.len(), lambdas.len())?;
                let bad = |s: &str| Err(Error::InvalidParameter(format!("ψ table {s}")));
                if lambdas.len() < 2 || lambdas[0] != 0.0 || values[0] != 0.0 {
                    return bad("needs at least two nodes starting at (0, 0)");
                }
                if lambdas.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("has non-finite entries");
                }
                if lambdas.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("λ nodes must be strictly increasing");
                }
                let slopes: Vec<f64> = (1..lambdas.len())
                    .map(|j| (values[j] - values[j - 1]) / (lambdas[j] - lambdas[j - 1]))
                    .collect();
                if slopes[0] < 0.0 {
                    return bad("must be nondecreasing");
                }
                if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
                    return bad("must be convex");
                }
                Ok(())
            }
        }
    }

    /// Right end of the domain (`+∞` for the Gaussian kind).
    pub fn lambda_max(&self) -> f64 {
        match self {
            PsiFunction::Gaussian { .. } => f64::INFINITY,
            PsiFunction::Exponential { scale } | PsiFunction::Gamma { scale, .. } => 1.0 / scale,
            PsiFunction::Table { lambdas, .. } => *lambdas.last().unwrap(),
        }
    }

    /// Whether `λ_max` itself belongs to the domain.
    pub fn includes_boundary(&self) -> bool {
        matches!(self, PsiFunction::Table { .. })
    }

    pub fn in_domain(&self, lambda: f64) -> bool {
        lambda >= 0.0
            && (lambda < self.lambda_max() || (self.includes_boundary() && lambda == self.lambda_max()))
    }

    /// `ψ(λ)`; `+∞` outside the domain.
    pub fn eval(&self, lambda: f64) -> f64 {
        if !self.in_domain(lambda) {
            return f64::INFINITY;
        }
        match self {
            PsiFunction::Gaussian { sigma } => 0.5 * sigma * sigma * lambda * lambda,
            PsiFunction::Exponential { scale } => gamma_cgf(1.0, *scale, lambda),
            PsiFunction::Gamma { shape, scale } => gamma_cgf(*shape, *scale, lambda),
            PsiFunction::Table { lambdas, values } => {
                let j = lambdas.partition_point(|l| *l < lambda);
                if j == 0 {
                    return values[0];
                }
                let t = (lambda - lambdas[j - 1]) / (lambdas[j] - lambdas[j - 1]);
                values[j - 1] + t * (values[j] - values[j - 1])
            }
        }
    }

    /// `ψ*(x)` in closed form where one is known.
    pub fn analytic_conjugate(&self, x: f64) -> Option<f64> {
        if x <= 0.0 {
            return Some(0.0);
        }
        match self {
            PsiFunction::Gaussian { sigma } => Some(x * x / (2.0 * sigma * sigma)),
            PsiFunction::Exponential { scale } => Some(gamma_conjugate(1.0, *scale, x)),
            PsiFunction::Gamma { shape, scale } => Some(gamma_conjugate(*shape, *scale, x)),
            // The supremum of λx − ψ over a piecewise linear ψ sits at a node.
            PsiFunction::Table { lambdas, values } => Some(
                lambdas
                    .iter()
                    .zip(values)
                    .map(|(l, v)| l * x - v)
                    .fold(0.0, f64::max),
            ),
        }
    }

    /// `e^{λx − ψ(λ)}`, the one-sided limit at an excluded boundary (where
    /// `ψ → ∞`, so the limit is zero) and an overflow flag.
    fn exp_term(&self, lambda: f64, x: f64) -> Result<(f64, bool)> {
        if lambda == self.lambda_max() && !self.includes_boundary() {
            return Ok((0.0, false));
        }
        if !self.in_domain(lambda) {
            return Err(Error::InvalidParameter(format!(
                "λ = {lambda} is outside [0, {}]",
                self.lambda_max()
            )));
        }
        let a = lambda * x - self.eval(lambda);
        if a > log_cap() {
            Ok((VALUE_CAP, true))
        } else {
            Ok((a.exp(), false))
        }
    }
}

fn gamma_cgf(k: f64, theta: f64, lambda: f64) -> f64 {
    let t = theta * lambda;
    k * (-(-t).ln_1p() - t)
}

fn gamma_conjugate(k: f64, theta: f64, x: f64) -> f64 {
    x / theta - k * (x / (k * theta)).ln_1p()
}

/// `ψ*(x) = sup_λ {λx − ψ(λ)}`: the closed form when known, otherwise
/// [`psi_star_numeric`]. Zero for `x ≤ 0`.
pub fn psi_star(psi: &PsiFunction, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    psi.analytic_conjugate(x)
        .unwrap_or_else(|| psi_star_numeric(psi, x))
        .min(VALUE_CAP)
}

/// Numeric conjugate: a geometric λ grid locates the maximizer of the
/// concave `λx − ψ(λ)`, then golden-section search refines it. Returns
/// [`VALUE_CAP`] when the supremum is infinite.
pub fn psi_star_numeric(psi: &PsiFunction, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let phi = |l: f64| {
        let v = psi.eval(l);
        if v.is_finite() {
            l * x - v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut hi = psi.lambda_max();
    if !hi.is_finite() {
        hi = 1.0;
        while phi(2.0 * hi) > phi(hi) {
            hi *= 2.0;
            if hi > 1e300 {
                return VALUE_CAP;
            }
        }
        hi *= 2.0;
    }
    const NODES: usize = 200;
    let lo = hi * 1e-12;
    let ratio = (hi / lo).powf(1.0 / (NODES - 1) as f64);
    let mut grid = vec![0.0];
    grid.extend((0..NODES).map(|i| lo * ratio.powi(i as i32)));
    grid[NODES] = hi;
    let vals: Vec<f64> = grid.iter().map(|&l| phi(l)).collect();
    let k = (0..grid.len())
        .max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a)))
        .unwrap();
    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(grid.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while b - a > 1e-15 * b.max(1e-300) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = phi(d);
        }
        if b - a <= f64::EPSILON * b {
            break;
        }
    }
    [vals[k], fc, fd, phi(a), phi(b)]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Tail bound `P(X ≥ x) ≤ e^{−ψ*(x)}` for sub-ψ `X`.
pub fn chernoff_bound(psi: &PsiFunction, x: f64) -> f64 {
    (-psi_star(psi, x)).exp()
}

/// `g_λ(x)` with an overflow flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GValue {
    pub value: f64,
    pub overflow: bool,
}

/// `g_λ(x) = e^{λx − ψ(λ)} − 1`; at an excluded boundary `λ_max` the
/// one-sided limit `−1`. Overflowing values become [`VALUE_CAP`].
pub fn g_lambda(psi: &PsiFunction, lambda: f64, x: f64) -> Result<GValue> {
    if lambda == 0.0 {
        return Ok(GValue {
            value: 0.0,
            overflow: false,
        });
    }
    let (e, overflow) = psi.exp_term(lambda, x)?;
    Ok(GValue {
        value: if overflow { VALUE_CAP } else { e - 1.0 },
        overflow,
    })
}

/// Weights on a finite set of λ nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMixture {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LambdaMixture {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_len("mixture weights", weights.len(), nodes.len())?;
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("mixture has no nodes".into()));
        }
        if nodes.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidParameter("mixture nodes must be finite and ≥ 0".into()));
        }
        DiscreteMeasure::new(weights.clone())?;
        Ok(LambdaMixture { nodes, weights })
    }

    pub fn dirac(lambda: f64) -> Result<Self> {
        Self::new(vec![lambda], vec![1.0])
    }

    pub fn is_probability(&self) -> bool {
        (self.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    /// Drops zero-weight nodes.
    pub fn support(&self) -> LambdaMixture {
        let (nodes, weights) = self
            .nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(l, w)| (*l, *w))
            .unzip();
        LambdaMixture { nodes, weights }
    }
}

/// `Σⱼ wⱼ e^{λⱼx − ψ(λⱼ)}` at `x`, with an overflow flag.
pub fn mixture_value(psi: &PsiFunction, mix: &LambdaMixture, x: f64) -> Result<(f64, bool)> {
    let mut s = 0.0;
    let mut overflow = false;
    for (l, w) in mix.nodes.iter().zip(&mix.weights) {
        if *w == 0.0 {
            continue;
        }
        let (e, o) = psi.exp_term(*l, x)?;
        overflow |= o;
        s += w * e;
    }
    if overflow || s > VALUE_CAP {
        return Ok((VALUE_CAP, true));
    }
    Ok((s, false))
}

/// The mixture e-variable `h(x) = Σⱼ wⱼ e^{λⱼx − ψ(λⱼ)}` on a scalar grid.
pub fn mixture_evar(psi: &PsiFunction, mix: &LambdaMixture, grid: &SampleGrid) -> Result<EVariable> {
    psi.validate()?;
    if !mix.is_probability() {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {}, expected 1",
            mix.weights.iter().sum::<f64>()
        )));
    }
    let xs = grid
        .scalars()
        .ok_or_else(|| Error::InvalidGrid("sub-ψ e-variables need a scalar grid".into()))?;
    let mut values = Vec::with_capacity(xs.len());
    let mut capped = false;
    for &x in xs {
        let (v, o) = mixture_value(psi, mix, x)?;
        capped |= o;
        values.push(v);
    }
    let mut e = EVariable::new(
        values,
        EvarForm::SubpsiMixture {
            nodes: mix.nodes.clone(),
            weights: mix.weights.clone(),
        },
    )?;
    e.capped |= capped;
    Ok(e)
}

/// `λ_max` when finite; otherwise the root of `ψ(λ) − λ·x_max = 709`,
/// beyond which every `e^{λx − ψ(λ)}` on the working grid underflows.
pub fn lambda_cap(psi: &PsiFunction, x_max: f64) -> f64 {
    let lm = psi.lambda_max();
    if lm.is_finite() {
        return lm;
    }
    let f = |l: f64| psi.eval(l) - l * x_max - CAP_EXPONENT;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

/// Node `0` followed by `n − 1` geometric nodes from `10⁻⁴·λ_cap` to
/// `λ_cap`. For a finite `λ_max` the last node is the boundary itself.
pub fn lambda_grid(psi: &PsiFunction, x_max: f64, n: usize) -> Vec<f64> {
    let cap = lambda_cap(psi, x_max);
    let mut g = vec![0.0];
    if n < 2 {
        return g;
    }
    let k = n - 1;
    let lo = cap * 1e-4;
    for i in 0..k {
        let t = if k == 1 { 1.0 } else { i as f64 / (k - 1) as f64 };
        g.push(lo * (cap / lo).powf(t));
    }
    g[k] = cap;
    g
}

/// Worst MGF excess of a measure over a λ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpsiCheck {
    pub passes: bool,
    /// `max_λ Σ wᵢ e^{λxᵢ − ψ(λ)} − 1`.
    pub max_violation: f64,
    pub argmax_lambda: f64,
    pub overflow: bool,
}

/// Checks `Σ wᵢ e^{λxᵢ} ≤ e^{ψ(λ)}(1 + tol)` at every node, in the
/// equivalent form `Σ wᵢ e^{λxᵢ − ψ(λ)} ≤ 1 + tol`.
pub fn verify_subpsi(
    points: &[f64],
    mu: &DiscreteMeasure,
    psi: &PsiFunction,
    lambdas: &[f64],
    tol: f64,
) -> Result<SubpsiCheck> {
    check_len("measure", mu.len(), points.len())?;
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    let mut overflow = false;
    for &l in lambdas {
        let mut s = 0.0;
        for (x, w) in points.iter().zip(mu.weights()) {
            if *w > 0.0 {
                let (e, o) = psi.exp_term(l, *x)?;
                overflow |= o;
                s += w * e;
            }
        }
        if s - 1.0 > worst {
            worst = s - 1.0;
            arg = l;
        }
    }
    Ok(SubpsiCheck {
        passes: worst <= tol && !overflow,
        max_violation: worst,
        argmax_lambda: arg,
        overflow,
    })
}

/// A finitely supported measure on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: SampleGrid,
    pub measure: DiscreteMeasure,
}

impl AtomicMeasure {
    pub fn points(&self) -> &[f64] {
        self.atoms.scalars().expect("atoms are scalar")
    }

    /// `ν([x, ∞))`.
    pub fn tail(&self, x: f64) -> f64 {
        self.points()
            .iter()
            .zip(self.measure.weights())
            .filter(|(a, _)| **a >= x)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Two-point measure `p δ_{x₀} + (1 − p) δ_{−x₀−y}` and the `y` used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPoint {
    pub nu: AtomicMeasure,
    pub y: f64,
    pub check: SubpsiCheck,
}

/// Largest `y` tried before giving up.
const MAX_Y: f64 = 1e12;

/// Builds a sub-ψ two-point measure charging `x₀` with mass `p`.
///
/// For `x₀ ≤ 0`, `y = −x₀`. For `x₀ > 0`, `y` doubles from 1 until the
/// measure passes [`verify_subpsi`] on the default λ grid.
pub fn two_point_subpsi(psi: &PsiFunction, x0: f64, p: f64, tol: f64) -> Result<TwoPoint> {
    psi.validate()?;
    if !x0.is_finite() {
        return Err(Error::InvalidParameter(format!("x₀ = {x0} is not finite")));
    }
    let s = psi_star(psi, x0);
    if s >= VALUE_CAP {
        return Err(Error::InvalidParameter(format!("x₀ = {x0} is outside dom(ψ*)")));
    }
    let p_max = 0.5 * (-s).exp();
    if !(p >= 0.0 && p <= p_max * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must lie in [0, {p_max}] (half of e^(−ψ*(x₀)))"
        )));
    }
    let lambdas = lambda_grid(psi, x0.abs().max(1.0), DEFAULT_LAMBDA_NODES);
    let build = |y: f64| -> Result<AtomicMeasure> {
        let low = -x0 - y;
        let (atoms, weights) = if low == x0 {
            (vec![x0], vec![1.0])
        } else if p == 0.0 {
            (vec![low], vec![1.0])
        } else if p == 1.0 {
            (vec![x0], vec![1.0])
        } else if low < x0 {
            (vec![low, x0], vec![1.0 - p, p])
        } else {
            (vec![x0, low], vec![p, 1.0 - p])
        };
        Ok(AtomicMeasure {
            atoms: SampleGrid::scalar(atoms)?,
            measure: DiscreteMeasure::new(weights)?,
        })
    };
    let mut y = if x0 <= 0.0 { -x0 } else { 1.0 };
    loop {
        let nu = build(y)?;
        let check = verify_subpsi(nu.points(), &nu.measure, psi, &lambdas, tol)?;
        if check.passes || x0 <= 0.0 {
            return Ok(TwoPoint { nu, y, check });
        }
        y *= 2.0;
        if y > MAX_Y {
            return Err(Error::ConstructionFailed(format!(
                "no y ≤ {MAX_Y:e} makes the two-point measure sub-ψ (worst excess {:e} at λ = {})",
                check.max_violation, check.argmax_lambda
            )));
        }
    }
}

/// Outcome of [`dominate_by_mixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MixtureDomination {
    /// `shortfall` is `max_x (h(x) − mix(x)) / h(x)` recomputed in full
    /// precision; it is at most the solver tolerance.
    Feasible { mixture: LambdaMixture, shortfall: f64 },
    /// Weights `ν` on the x grid with `∫e^{λx−ψ(λ)} dν ≤ level` for every
    /// node and `∫h dν > level`.
    Infeasible { certificate: Vec<f64>, level: f64 },
}

/// Entries of the normalized domination rows are clamped into
/// `{0} ∪ [ROW_FLOOR, ROW_CEIL]`.
const ROW_FLOOR: f64 = 1e-9;
const ROW_CEIL: f64 = 1e6;

/// Finds a probability mixture over `lambdas` (node 0 added if missing)
/// with `h(x) ≤ Σⱼ wⱼ e^{λⱼx − ψ(λⱼ)}` on `xs`.
///
/// Each row is divided by `h(x)` (rows with `h(x) = 0` hold trivially and
/// are dropped), and entries below `ROW_FLOOR` are zeroed while entries
/// above `ROW_CEIL` are clamped. Both changes only shrink the left-hand
/// side, so an accepted mixture dominates `h` exactly; the price is that
/// dominations relying on terms smaller than `ROW_FLOOR·h(x)` are missed.
/// Among feasible mixtures the one with the least total normalized
/// excess is returned.
pub fn dominate_by_mixture(
    h: &[f64],
    psi: &PsiFunction,
    lambdas: &[f64],
    xs: &[f64],
) -> Result<MixtureDomination> {
    psi.validate()?;
    check_len("e-variable", h.len(), xs.len())?;
    if let Some(i) = h.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("h[{i}] = {} is not a finite nonnegative value", h[i])));
    }
    let mut nodes = lambdas.to_vec();
    if !nodes.contains(&0.0) {
        nodes.insert(0, 0.0);
    }
    for &l in &nodes {
        if !(psi.in_domain(l) || l == psi.lambda_max()) {
            return Err(Error::InvalidParameter(format!("λ = {l} is outside the domain of ψ")));
        }
    }
    let k = nodes.len();
    let mut lp = LinearProgram::minimize(vec![0.0; k]);
    let mut rows_at = Vec::new();
    for (i, (&x, &hx)) in xs.iter().zip(h).enumerate() {
        if hx == 0.0 {
            continue;
        }
        let lh = hx.ln();
        let row: Vec<f64> = nodes
            .iter()
            .map(|&l| {
                if l == psi.lambda_max() && !psi.includes_boundary() {
                    return 0.0;
                }
                let r = (l * x - psi.eval(l) - lh).exp();
                if r < ROW_FLOOR {
                    0.0
                } else {
                    r.min(ROW_CEIL)
                }
            })
            .collect();
        for (c, r) in lp.objective.iter_mut().zip(&row) {
            *c -= r;
        }
        lp = lp.geq(row, 1.0);
        rows_at.push(i);
    }
    lp = lp.eq(vec![1.0; k], 1.0);
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {
            let mixture =
                LambdaMixture::new(nodes, sol.point.iter().map(|w| w.max(0.0)).collect())?;
            let mut shortfall = f64::NEG_INFINITY;
            for (&x, &hx) in xs.iter().zip(h) {
                if hx > 0.0 {
                    let (m, _) = mixture_value(psi, &mixture, x)?;
                    shortfall = shortfall.max((hx - m) / hx);
                }
            }
            Ok(MixtureDomination::Feasible { mixture, shortfall })
        }
        LpStatus::Infeasible => {
            // Rows were stored as −row·w ≤ −1; undo the division by h(x).
            let mut raw = vec![0.0; xs.len()];
            for (y, &i) in sol.duals.ub.iter().zip(&rows_at) {
                raw[i] = y.max(0.0) / h[i];
            }
            let total: f64 = raw.iter().sum();
            let level = if total > 0.0 { sol.duals.eq[0] / total } else { 0.0 };
            let certificate = if total > 0.0 {
                raw.iter().map(|v| v / total).collect()
            } else {
                raw
            };
            Ok(MixtureDomination::Infeasible { certificate, level })
        }
        LpStatus::Unbounded => Err(Error::NumericallyStalled {
            iterations: sol.iterations,
            reason: "mixture program over a bounded simplex reported unbounded".into(),
        }),
    }
}
