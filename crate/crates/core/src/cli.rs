//! Command-line front end: versioned JSON configs, CSV observations,
//! dispatch to the library, and canonical JSON reports.
//!
//! Reports serialize with sorted keys and every float written with 17
//! significant digits, so identical inputs give byte-identical output.

use crate::adversary::{maximality_check, worst_case_expectation, Maximality, MaximalityReport, Verdict};
use crate::error::{Error, Result};
use crate::finite::{
    builtin_constraints, candidate_evar, check_constraint_qualification, dominating_weights,
    in_pi_phi, Builtin, CqReport, Domination, MeanVarParams, PiVector,
};
use crate::measure::{
    expectation, ClosedForm, ConstraintFunction, DiscreteMeasure, EVariable, Hypothesis, SampleGrid,
};
use crate::reduction::{barycenter_reduce, relaxed_demo, MomentSpec, RelaxedDemo};
use crate::subpsi::{
    chernoff_bound, dominate_by_mixture, lambda_grid, mixture_evar, mixture_value, psi_star,
    two_point_subpsi, LambdaMixture, MixtureDomination, PsiFunction, DEFAULT_LAMBDA_NODES,
};
use crate::symmetry::{
    evar_upper_envelope, exact_evar, invariance_constraints, symmetrize_measure, FiniteGroupAction,
};
use crate::{DEFAULT_TOL, VALUE_CAP};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = "evarkit/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Maximal,
    Subpsi,
    Symmetry,
    Reduce,
    RelaxedDemo,
    Etest,
}

/// Explicit points, an evenly spaced range, or a product of a value list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Range { start: f64, stop: f64, step: f64 },
    Product { values: Vec<f64>, dim: usize },
    Explicit(SampleGrid),
}

impl GridSpec {
    pub fn build(&self) -> Result<SampleGrid> {
        match self {
            GridSpec::Range { start, stop, step } => SampleGrid::range(*start, *stop, *step),
            GridSpec::Product { values, dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidGrid("product dimension must be ≥ 1".into()));
                }
                SampleGrid::product(values, *dim)
            }
            GridSpec::Explicit(g) => Ok(g.clone()),
        }
    }
}

/// One constraint: a closed form on a scalar grid or a table of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintItem {
    Values { values: Vec<f64> },
    Form(ClosedForm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintSpec {
    Builtin(Builtin),
    List(Vec<ConstraintItem>),
}

impl ConstraintSpec {
    pub fn build(&self, grid: &SampleGrid) -> Result<Hypothesis> {
        match self {
            ConstraintSpec::Builtin(b) => builtin_constraints(b, grid),
            ConstraintSpec::List(items) => {
                let cs = items
                    .iter()
                    .map(|c| match c {
                        ConstraintItem::Values { values } => ConstraintFunction::new(values.clone()),
                        ConstraintItem::Form(f) => ConstraintFunction::from_closed_form(f.clone(), grid),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Hypothesis::new(grid.clone(), cs)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

/// How the candidate e-variable is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSpec {
    /// `max(0, 1 + Σ πᵢ gᵢ)`.
    Pi(Vec<f64>),
    /// `1 + αx + β(x²/σ² − 1)` for the mean–variance hypothesis.
    MeanVar(AlphaBeta),
    Mixture(LambdaMixture),
    /// `1 + c(f − f_π)` for the configured group.
    Symmetry { f: Vec<f64> },
    Values(Vec<f64>),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    /// `sN`, `cyclic:N`, `signs:N` or `trivial`.
    Named(String),
    Generators { generators: Vec<Vec<usize>> },
}

impl GroupSpec {
    pub fn build(&self, grid: &SampleGrid) -> Result<FiniteGroupAction> {
        let name = match self {
            GroupSpec::Named(n) => n,
            GroupSpec::Generators { generators } => {
                return FiniteGroupAction::from_generators(grid.len(), generators.clone(), "generated")
            }
        };
        let d = grid.dim();
        let expect_dim = |k: &str| -> Result<()> {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Input(format!("bad group size in '{name}'")))?;
            if k != d {
                return Err(Error::InvalidGroup(format!(
                    "group '{name}' acts on {k} coordinates but the grid has dimension {d}"
                )));
            }
            Ok(())
        };
        if name == "trivial" {
            Ok(FiniteGroupAction::trivial(grid.len()))
        } else if let Some(k) = name.strip_prefix("cyclic:") {
            expect_dim(k)?;
            FiniteGroupAction::cyclic(grid)
        } else if let Some(k) = name.strip_prefix("signs:") {
            expect_dim(k)?;
            FiniteGroupAction::signs(grid)
        } else if let Some(k) = name.strip_prefix('s') {
            expect_dim(k)?;
            FiniteGroupAction::symmetric(grid)
        } else {
            Err(Error::Input(format!(
                "unknown group '{name}' (expected sN, cyclic:N, signs:N or trivial)"
            )))
        }
    }
}

/// A versioned run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiFunction>,
    /// λ nodes for sub-ψ checks; defaults to the geometric grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<DiscreteMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<Vec<Vec<f64>>>,
    /// Truncation for the relaxed demo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Test level for `etest`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            command,
            grid: None,
            constraints: None,
            candidate: None,
            psi: None,
            lambdas: None,
            group: None,
            measure: None,
            moments: None,
            n: None,
            alpha: None,
            tol: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| json_error("config", &e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Input(format!(
                "unsupported schema '{}', expected '{SCHEMA}'",
                self.schema
            )));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Input(format!("tol must be finite and ≥ 0, got {t}")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Input(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        Ok(())
    }

    fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    /// SHA-256 of the canonical JSON of the config, output path excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let v = serde_json::to_value(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }

    fn grid_or(&self, default: GridSpec) -> Result<SampleGrid> {
        self.grid.as_ref().unwrap_or(&default).build()
    }

    fn hypothesis(&self, grid: &SampleGrid) -> Result<Hypothesis> {
        self.constraints
            .as_ref()
            .unwrap_or(&ConstraintSpec::Builtin(Builtin::MeanVar { sigma: 1.0 }))
            .build(grid)
    }

    fn default_grid(&self) -> GridSpec {
        let sigma = match self.constraints {
            Some(ConstraintSpec::Builtin(Builtin::MeanVar { sigma })) => sigma,
            Some(ConstraintSpec::Builtin(Builtin::BoundedMean { .. })) => {
                return GridSpec::Range {
                    start: 0.0,
                    stop: 1.0,
                    step: 0.05,
                }
            }
            _ => 1.0,
        };
        GridSpec::Range {
            start: -4.0 * sigma,
            stop: 4.0 * sigma,
            step: sigma / 4.0,
        }
    }
}

fn json_error(what: &str, e: &serde_json::Error) -> Error {
    Error::Input(format!("{what}: line {}, column {}: {e}", e.line(), e.column()))
}

/// A candidate built on the grid, plus its exact off-grid evaluator when
/// one is known.
struct Candidate {
    evar: EVariable,
    pi: Option<PiVector>,
    mean_var: Option<MeanVarParams>,
    closed: Option<Box<dyn Fn(f64) -> Result<f64>>>,
}

fn build_candidate(cfg: &RunConfig, h: &Hypothesis) -> Result<Candidate> {
    let grid = h.grid();
    let tol = cfg.tol();
    let spec = cfg.candidate.clone().unwrap_or(CandidateSpec::Constant(1.0));
    let affine_closed = |pi: &PiVector| -> Option<Box<dyn Fn(f64) -> Result<f64>>> {
        let forms: Option<Vec<ClosedForm>> =
            h.constraints().iter().map(|c| c.closed_form().cloned()).collect();
        let forms = forms?;
        let p = pi.as_slice().to_vec();
        Some(Box::new(move |x| {
            Ok((1.0 + p.iter().zip(&forms).map(|(w, f)| w * f.eval(x)).sum::<f64>()).max(0.0))
        }))
    };
    Ok(match spec {
        CandidateSpec::Pi(p) => {
            let pi = PiVector::new(p)?;
            let closed = affine_closed(&pi);
            Candidate {
                evar: candidate_evar(&pi, h, tol)?,
                pi: Some(pi),
                mean_var: None,
                closed,
            }
        }
        CandidateSpec::MeanVar(AlphaBeta { alpha, beta }) => {
            let Some(ConstraintSpec::Builtin(Builtin::MeanVar { sigma })) =
                cfg.constraints.clone().or(Some(ConstraintSpec::Builtin(Builtin::MeanVar { sigma: 1.0 })))
            else {
                return Err(Error::Input(
                    "a mean_var candidate needs the mean_var constraints".into(),
                ));
            };
            let params = MeanVarParams::new(sigma, alpha, beta)?;
            let pi = params.to_pi().ok_or_else(|| {
                Error::InvalidParameter(format!("β = {beta} < 0 has no nonnegative weights"))
            })?;
            let closed = affine_closed(&pi);
            Candidate {
                evar: candidate_evar(&pi, h, tol)?,
                pi: Some(pi),
                mean_var: Some(params),
                closed,
            }
        }
        CandidateSpec::Mixture(mix) => {
            let psi = cfg.psi.clone().unwrap_or(PsiFunction::Gaussian { sigma: 1.0 });
            let evar = mixture_evar(&psi, &mix, grid)?;
            Candidate {
                evar,
                pi: None,
                mean_var: None,
                closed: Some(Box::new(move |x| Ok(mixture_value(&psi, &mix, x)?.0))),
            }
        }
        CandidateSpec::Symmetry { f } => {
            let group = cfg
                .group
                .as_ref()
                .ok_or_else(|| Error::Input("a symmetry candidate needs a group".into()))?
                .build(grid)?;
            Candidate {
                evar: exact_evar(&f, &group)?,
                pi: None,
                mean_var: None,
                closed: None,
            }
        }
        CandidateSpec::Values(v) => Candidate {
            evar: EVariable::raw(v)?,
            pi: None,
            mean_var: None,
            closed: None,
        },
        CandidateSpec::Constant(c) => Candidate {
            evar: EVariable::constant(grid.len(), c)?,
            pi: None,
            mean_var: None,
            closed: Some(Box::new(move |_| Ok(c))),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResult {
    pub candidate: EVariable,
    pub report: crate::adversary::VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseCheck {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `σ²α² + (2β − 1)²`.
    pub value: f64,
    pub maximal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalResult {
    pub pi: Option<PiVector>,
    pub in_pi_phi: Option<bool>,
    pub worst_value: Option<f64>,
    pub adversary_verdict: Verdict,
    /// Dominating weights of minimal total, when they exist.
    pub dominating_pi: Option<PiVector>,
    pub maximality: Option<MaximalityReport>,
    pub cq: CqReport,
    pub ellipse: Option<EllipseCheck>,
    /// The candidate passes the adversary and no dominator was found.
    pub adversary_maximal: bool,
    /// Ellipse and adversary verdicts coincide.
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRow {
    pub x: f64,
    pub psi_star: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointRow {
    pub x0: f64,
    pub p: f64,
    pub y: f64,
    pub subpsi: bool,
    /// `∫h dν` for the two-point measure.
    pub expectation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpsiResult {
    pub psi: PsiFunction,
    pub mixture: LambdaMixture,
    pub samples: Vec<Sample>,
    pub overflow: bool,
    pub chernoff: Vec<ChernoffRow>,
    pub two_point: Vec<TwoPointRow>,
    pub max_two_point_expectation: f64,
    /// Mixture recovered from the samples alone.
    pub domination: MixtureDomination,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResult {
    pub group: String,
    pub order: usize,
    pub orbits: usize,
    pub f_pi: Vec<f64>,
    pub evar: EVariable,
    pub is_evar: bool,
    /// `∫h dμ_π` for the configured (or uniform) measure.
    pub invariant_expectation: f64,
    pub invariance_constraints: usize,
    /// Worst mean of `h` over the invariant measures, by the adversary.
    pub adversary_worst_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceResult {
    pub nu: DiscreteMeasure,
    pub support: Vec<usize>,
    pub targets: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    ClosedForm,
    NearestGridPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ETestResult {
    pub e_values: Vec<f64>,
    /// Product over observations, assuming independence.
    pub combined: f64,
    pub combination: String,
    pub alpha: f64,
    pub threshold: f64,
    pub reject: bool,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "result", rename_all = "kebab-case")]
pub enum Outcome {
    Verify(VerifyResult),
    Maximal(Box<MaximalResult>),
    Subpsi(Box<SubpsiResult>),
    Symmetry(SymmetryResult),
    Reduce(ReduceResult),
    RelaxedDemo(RelaxedDemo),
    Etest(ETestResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub config_hash: String,
    pub grid_hash: Option<String>,
    pub warnings: Vec<String>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Report {
    pub fn to_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| json_error("report", &e))
    }
}

/// A report and the process exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Runs one configured command. `data` is CSV text for `etest`.
pub fn run(cfg: &RunConfig, data: Option<&str>) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let mut grid_hash = None;
    let tol = cfg.tol();
    let (outcome, ok) = match cfg.command {
        Command::Verify => {
            let grid = cfg.grid_or(cfg.default_grid())?;
            let h = cfg.hypothesis(&grid)?;
            grid_hash = Some(grid.hash());
            let c = build_candidate(cfg, &h)?;
            let report = worst_case_expectation(&c.evar, &h, tol)?;
            let ok = report.passes();
            (
                Outcome::Verify(VerifyResult {
                    candidate: c.evar,
                    report,
                }),
                ok,
            )
        }
        Command::Maximal => {
            let mut cfg = cfg.clone();
            if cfg.constraints.is_none() && cfg.candidate.is_none() {
                cfg.candidate = Some(CandidateSpec::MeanVar(AlphaBeta {
                    alpha: 0.0,
                    beta: 1.0,
                }));
            }
            let grid = cfg.grid_or(cfg.default_grid())?;
            let h = cfg.hypothesis(&grid)?;
            grid_hash = Some(grid.hash());
            let r = maximal(&cfg, &h)?;
            let ok = r.adversary_verdict != Verdict::Violated;
            (Outcome::Maximal(Box::new(r)), ok)
        }
        Command::Subpsi => {
            let grid = cfg.grid_or(GridSpec::Range {
                start: -5.0,
                stop: 5.0,
                step: 0.5,
            })?;
            grid_hash = Some(grid.hash());
            let r = subpsi(cfg, &grid, &mut warnings)?;
            let ok = r.passes;
            (Outcome::Subpsi(Box::new(r)), ok)
        }
        Command::Symmetry => {
            let grid = cfg.grid_or(GridSpec::Product {
                values: vec![0.0, 1.0, 2.0],
                dim: 2,
            })?;
            grid_hash = Some(grid.hash());
            let r = symmetry(cfg, &grid)?;
            let ok = r.is_evar;
            (Outcome::Symmetry(r), ok)
        }
        Command::Reduce => (Outcome::Reduce(reduce(cfg)?), true),
        Command::RelaxedDemo => (Outcome::RelaxedDemo(relaxed_demo(cfg.n.unwrap_or(40))?), true),
        Command::Etest => {
            let grid = cfg.grid_or(cfg.default_grid())?;
            let h = cfg.hypothesis(&grid)?;
            grid_hash = Some(grid.hash());
            let data = data.ok_or_else(|| Error::Input("etest needs observations".into()))?;
            let rows = parse_csv(data)?;
            (Outcome::Etest(etest(cfg, &h, &rows, &mut warnings)?), true)
        }
    };
    Ok(RunOutcome {
        report: Report {
            schema: SCHEMA.into(),
            config_hash: cfg.hash(),
            grid_hash,
            warnings,
            outcome,
        },
        exit_code: if ok { EXIT_OK } else { EXIT_VIOLATED },
    })
}

fn maximal(cfg: &RunConfig, h: &Hypothesis) -> Result<MaximalResult> {
    let tol = cfg.tol();
    let c = build_candidate(cfg, h)?;
    let worst = worst_case_expectation(&c.evar, h, tol)?;
    let in_pi = match &c.pi {
        Some(pi) => Some(in_pi_phi(pi, h, tol)?),
        None => None,
    };
    let dominating_pi = match dominating_weights(&c.evar, h, tol)? {
        Domination::Feasible { pi } => Some(pi),
        Domination::Infeasible { .. } => None,
    };
    let maximality = if worst.passes() {
        Some(maximality_check(&c.evar, h, tol)?)
    } else {
        None
    };
    let cq = match &maximality {
        Some(m) if m.cq_holds => CqReport {
            holds: true,
            witness: None,
        },
        _ => check_constraint_qualification(h, tol)?,
    };
    let adversary_maximal = matches!(
        maximality,
        Some(MaximalityReport {
            verdict: Maximality::Maximal,
            ..
        })
    );
    let ellipse = c.mean_var.map(|p| EllipseCheck {
        sigma: p.sigma,
        alpha: p.alpha,
        beta: p.beta,
        value: p.ellipse_value(),
        maximal: crate::finite::mean_var_maximal(&p),
    });
    Ok(MaximalResult {
        pi: c.pi,
        in_pi_phi: in_pi,
        worst_value: worst.worst_value,
        adversary_verdict: worst.verdict,
        dominating_pi,
        maximality,
        cq,
        agree: ellipse.as_ref().map(|e| e.maximal == adversary_maximal),
        ellipse,
        adversary_maximal,
    })
}

fn subpsi(cfg: &RunConfig, grid: &SampleGrid, warnings: &mut Vec<String>) -> Result<SubpsiResult> {
    let tol = cfg.tol();
    let psi = cfg.psi.clone().unwrap_or(PsiFunction::Gaussian { sigma: 1.0 });
    psi.validate()?;
    let mix = match &cfg.candidate {
        None => LambdaMixture::dirac(1.0f64.min(psi.lambda_max() / 2.0))?,
        Some(CandidateSpec::Mixture(m)) => m.clone(),
        Some(_) => return Err(Error::Input("subpsi needs a mixture candidate".into())),
    };
    for &l in &mix.nodes {
        if !(psi.in_domain(l) || l == psi.lambda_max()) {
            return Err(Error::InvalidParameter(format!("λ = {l} is outside the domain of ψ")));
        }
    }
    let xs = grid
        .scalars()
        .ok_or_else(|| Error::InvalidGrid("subpsi needs a scalar grid".into()))?;
    let e = mixture_evar(&psi, &mix, grid)?;
    if e.capped {
        warnings.push("mixture values overflowed and were capped".into());
    }
    let samples = xs
        .iter()
        .zip(e.values())
        .map(|(&x, &h)| Sample { x, h })
        .collect();
    let chernoff = xs
        .iter()
        .map(|&x| ChernoffRow {
            x,
            psi_star: psi_star(&psi, x),
            bound: chernoff_bound(&psi, x),
        })
        .collect();
    let mut two_point = Vec::new();
    let mut max_e: f64 = 0.0;
    let mut all_sub = true;
    for &x0 in xs {
        let s = psi_star(&psi, x0);
        if s >= VALUE_CAP {
            continue;
        }
        let p = 0.5 * (-s).exp();
        let tp = two_point_subpsi(&psi, x0, p, tol)?;
        let mut ev = 0.0;
        for (a, w) in tp.nu.points().iter().zip(tp.nu.measure.weights()) {
            ev += w * mixture_value(&psi, &mix, *a)?.0;
        }
        max_e = max_e.max(ev);
        all_sub &= tp.check.passes;
        two_point.push(TwoPointRow {
            x0,
            p,
            y: tp.y,
            subpsi: tp.check.passes,
            expectation: ev,
        });
    }
    let x_max = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let lambdas = match &cfg.lambdas {
        Some(l) => l.clone(),
        None => lambda_grid(&psi, x_max, DEFAULT_LAMBDA_NODES),
    };
    let domination = dominate_by_mixture(e.values(), &psi, &lambdas, xs)?;
    let passes = all_sub && max_e <= 1.0 + 1e-8 && mix.is_probability();
    Ok(SubpsiResult {
        psi,
        mixture: mix,
        samples,
        overflow: e.capped,
        chernoff,
        two_point,
        max_two_point_expectation: max_e,
        domination,
        passes,
    })
}

fn symmetry(cfg: &RunConfig, grid: &SampleGrid) -> Result<SymmetryResult> {
    let tol = cfg.tol();
    let group = cfg
        .group
        .clone()
        .unwrap_or_else(|| GroupSpec::Named(format!("s{}", grid.dim())))
        .build(grid)?;
    let cand = cfg.candidate.clone().unwrap_or_else(|| CandidateSpec::Symmetry {
        f: grid.points().map(|p| p[0]).collect(),
    });
    let (f_pi, evar, is_evar) = match cand {
        CandidateSpec::Symmetry { f } => {
            let e = exact_evar(&f, &group)?;
            (crate::symmetry::orbit_average(&f, &group)?, e, true)
        }
        CandidateSpec::Values(v) => {
            let h = EVariable::raw(v)?;
            let env = evar_upper_envelope(&h, &group, tol)?;
            (env.f_pi, h, env.is_evar)
        }
        _ => return Err(Error::Input("symmetry needs a symmetry or values candidate".into())),
    };
    let mu = cfg
        .measure
        .clone()
        .unwrap_or_else(|| DiscreteMeasure::uniform(grid.len()));
    let invariant_expectation = expectation(&symmetrize_measure(&mu, &group)?, evar.values())?;
    let gens: Vec<Vec<usize>> = group.generators().into_iter().cloned().collect();
    let inv = invariance_constraints(grid, &group, &gens, None)?;
    let worst = worst_case_expectation(&evar, &inv, tol)?;
    Ok(SymmetryResult {
        group: group.label().to_string(),
        order: group.order(),
        orbits: group.orbits().len(),
        f_pi,
        evar,
        is_evar,
        invariant_expectation,
        invariance_constraints: inv.dim(),
        adversary_worst_value: worst.worst_value,
    })
}

fn reduce(cfg: &RunConfig) -> Result<ReduceResult> {
    let mu = cfg
        .measure
        .clone()
        .ok_or_else(|| Error::Input("reduce needs a measure".into()))?;
    if !mu.is_probability() {
        return Err(Error::InvalidMeasure(format!("mass {} is not 1", mu.mass())));
    }
    let moments = cfg
        .moments
        .clone()
        .ok_or_else(|| Error::Input("reduce needs moment functions".into()))?;
    let spec = MomentSpec::from_measure(moments, &mu)?;
    let nu = barycenter_reduce(&mu, &spec)?;
    let residuals = spec.residuals(&nu)?;
    Ok(ReduceResult {
        support: nu.support(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        targets: spec.targets,
        residuals,
        nu,
    })
}

fn etest(
    cfg: &RunConfig,
    h: &Hypothesis,
    rows: &[Vec<f64>],
    warnings: &mut Vec<String>,
) -> Result<ETestResult> {
    let grid = h.grid();
    let alpha = cfg.alpha.unwrap_or(0.05);
    let c = build_candidate(cfg, h)?;
    let closed = if grid.dim() == 1 { c.closed.as_ref() } else { None };
    let step = grid_step(grid);
    let mut e_values = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if row.len() != grid.dim() {
            return Err(Error::Input(format!(
                "observation {} has {} columns, expected {}",
                k + 1,
                row.len(),
                grid.dim()
            )));
        }
        let v = match closed {
            Some(f) => f(row[0])?,
            None => {
                let (i, dist) = nearest(grid, row);
                if dist > step / 2.0 {
                    warnings.push(format!(
                        "observation {} is {dist} from the nearest grid point, more than half the grid step {step}",
                        k + 1
                    ));
                }
                c.evar.values()[i]
            }
        };
        e_values.push(v.min(VALUE_CAP));
    }
    let combined = e_values.iter().product::<f64>().min(VALUE_CAP);
    let threshold = 1.0 / alpha;
    Ok(ETestResult {
        e_values,
        combined,
        combination: "product over observations (extension)".into(),
        alpha,
        threshold,
        reject: combined >= threshold,
        evaluation: if closed.is_some() {
            Evaluation::ClosedForm
        } else {
            Evaluation::NearestGridPoint
        },
    })
}

/// Smallest gap between distinct values of any coordinate.
fn grid_step(grid: &SampleGrid) -> f64 {
    let mut step = f64::INFINITY;
    for c in 0..grid.dim() {
        let mut v: Vec<f64> = grid.points().map(|p| p[c]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        for w in v.windows(2) {
            step = step.min(w[1] - w[0]);
        }
    }
    step
}

fn nearest(grid: &SampleGrid, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in grid.points().enumerate() {
        let d = p
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Numeric CSV rows. A first record with any non-numeric field is taken
/// as a header; all rows must have the same number of columns.
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut width = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Input(format!("csv line {line}: {e}"))
        })?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if k == 0 => continue,
            Err(_) => {
                let bad = rec.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Input(format!("csv line {line}: '{bad}' is not a number")));
            }
        };
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("csv line {line}: column {} is not finite", i + 1)));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Input(format!(
                    "csv line {line}: {} columns, expected {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("csv has no observations".into()));
    }
    Ok(rows)
}

/// Compact JSON with sorted object keys and floats in `{:.16e}` form.
/// Integers stay integers; non-finite floats never reach here because
/// `serde_json` maps them to `null`.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap_or(0.0));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(&m[k], out);
            }
            out.push('}');
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evarkit", version, about = "Construct and verify e-variables on finite grids")]
pub struct Cli {
    /// Also write the report to this file.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON config ("schema": "evarkit/1").
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run whatever command the config names.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV observations for etest.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Worst-case expectation of the candidate over the hypothesis.
    Verify(ConfigArg),
    /// Π^Φ membership, maximality and the constraint qualification.
    Maximal(ConfigArg),
    /// Sub-ψ mixture e-variable, Chernoff table and two-point checks.
    Subpsi {
        #[command(flatten)]
        base: ConfigArg,
        /// gaussian, exponential or gamma.
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        shape: Option<f64>,
        /// Mixture as JSON ({"nodes": [...], "weights": [...]}) or a file.
        #[arg(long)]
        mix: Option<String>,
        /// Grid as JSON or a file.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Exact e-variables for a finite group acting on the grid.
    Symmetry {
        #[command(flatten)]
        base: ConfigArg,
        /// sN, cyclic:N, signs:N or trivial.
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        /// Function f as JSON or a file.
        #[arg(long)]
        f: Option<String>,
    },
    /// Reduce a measure to at most m + 1 atoms with the same moments.
    Reduce {
        #[command(flatten)]
        base: ConfigArg,
        #[arg(long)]
        measure: Option<String>,
        /// Moment functions as a JSON list of lists or a file.
        #[arg(long)]
        moments: Option<String>,
    },
    /// Truncated relaxed-hypothesis example on the positive integers.
    RelaxedDemo {
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
    /// Evaluate the candidate on observations and test at level α.
    Etest {
        #[command(flatten)]
        base: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Inline JSON, or the contents of the named file.
fn json_arg<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    let t = s.trim_start();
    let text = if t.starts_with(['[', '{', '"']) || t.parse::<f64>().is_ok() {
        s.to_string()
    } else {
        read(Path::new(s))?
    };
    serde_json::from_str(&text).map_err(|e| json_error(what, &e))
}

fn base_config(base: &ConfigArg, command: Command) -> Result<RunConfig> {
    let mut cfg = match &base.config {
        Some(p) => RunConfig::from_json(&read(p)?)?,
        None => RunConfig::new(command),
    };
    if cfg.command != command {
        return Err(Error::Input(format!(
            "config names command {:?} but {:?} was requested",
            cfg.command, command
        )));
    }
    if base.tol.is_some() {
        cfg.tol = base.tol;
    }
    Ok(cfg)
}

/// Builds the config and data a parsed command line asks for.
pub fn config_from_cli(cli: &Cli) -> Result<(RunConfig, Option<String>)> {
    let (mut cfg, data) = match &cli.command {
        CliCommand::Run { config, data } => {
            let cfg = RunConfig::from_json(&read(config)?)?;
            let data = data.as_deref().map(read).transpose()?;
            (cfg, data)
        }
        CliCommand::Verify(b) => (base_config(b, Command::Verify)?, None),
        CliCommand::Maximal(b) => (base_config(b, Command::Maximal)?, None),
        CliCommand::Subpsi {
            base,
            psi,
            sigma,
            scale,
            shape,
            mix,
            grid,
        } => {
            let mut cfg = base_config(base, Command::Subpsi)?;
            if let Some(kind) = psi {
                let need = |v: &Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::Input(format!("--psi {kind} needs --{name}")))
                };
                cfg.psi = Some(match kind.as_str() {
                    "gaussian" => PsiFunction::Gaussian {
                        sigma: sigma.unwrap_or(1.0),
                    },
                    "exponential" => PsiFunction::Exponential {
                        scale: need(scale, "scale")?,
                    },
                    "gamma" => PsiFunction::Gamma {
                        shape: need(shape, "shape")?,
                        scale: need(scale, "scale")?,
                    },
                    other => {
                        return Err(Error::Input(format!(
                            "unknown ψ kind '{other}' (custom tables go in the config)"
                        )))
                    }
                });
            }
            if let Some(m) = mix {
                cfg.candidate = Some(CandidateSpec::Mixture(json_arg("--mix", m)?));
            }
            if let Some(g) = grid {
                cfg.grid = Some(json_arg("--grid", g)?);
            }
            (cfg, None)
        }
        CliCommand::Symmetry { base, group, grid, f } => {
            let mut cfg = base_config(base, Command::Symmetry)?;
            if let Some(g) = group {
                cfg.group = Some(GroupSpec::Named(g.clone()));
            }
            if let Some(g) = grid {
                cfg.grid = Some(json_arg("--grid", g)?);
            }
            if let Some(f) = f {
                cfg.candidate = Some(CandidateSpec::Symmetry {
                    f: json_arg("--f", f)?,
                });
            }
            (cfg, None)
        }
        CliCommand::Reduce {
            base,
            measure,
            moments,
        } => {
            let mut cfg = base_config(base, Command::Reduce)?;
            if let Some(m) = measure {
                cfg.measure = Some(json_arg("--measure", m)?);
            }
            if let Some(m) = moments {
                cfg.moments = Some(json_arg("--moments", m)?);
            }
            (cfg, None)
        }
        CliCommand::RelaxedDemo { n } => {
            let mut cfg = RunConfig::new(Command::RelaxedDemo);
            cfg.n = Some(*n);
            (cfg, None)
        }
        CliCommand::Etest { base, data, alpha } => {
            let mut cfg = base_config(base, Command::Etest)?;
            if alpha.is_some() {
                cfg.alpha = *alpha;
            }
            (cfg, Some(read(data)?))
        }
    };
    if cli.output.is_some() {
        cfg.output = cli.output.clone();
    }
    cfg.validate()?;
    Ok((cfg, data))
}

/// Parses arguments, runs, prints the report and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = config_from_cli(&cli).and_then(|(cfg, data)| {
        let out = run(&cfg, data.as_deref())?;
        let text = out.report.to_json();
        if let Some(p) = &cfg.output {
            std::fs::write(p, format!("{text}\n"))
                .map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
        }
        // A closed pipe downstream is not an error of the run.
        let _ = writeln!(std::io::stdout(), "{text}");
        Ok(out.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_floats_and_keys() {
        let v: Value = serde_json::from_str(r#"{"b": 0.1, "a": [1, -2.5, true, null], "c": "x\"y"}"#)
            .unwrap();
        assert_eq!(
            canonical_json(&v),
            r#"{"a":[1,-2.5000000000000000e0,true,null],"b":1.0000000000000001e-1,"c":"x\"y"}"#
        );
        let back: Value = serde_json::from_str(&canonical_json(&v)).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn csv_parsing() {
        assert_eq!(parse_csv("x\r\n0.5\r\n1\r\n").unwrap(), vec![vec![0.5], vec![1.0]]);
        assert_eq!(parse_csv("1,2\n3,4\n").unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let err = parse_csv("x\n1\nfoo\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse_csv("1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_csv("x\n").is_err());
    }

    #[test]
    fn config_validation() {
        let c = RunConfig::from_json(r#"{"schema": "evarkit/1", "command": "verify"}"#).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert!(RunConfig::from_json(r#"{"schema": "evarkit/2", "command": "verify"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": "evarkit/1", "command": "fly"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema": "evarkit/1", "command": "verify", "x": 1}"#).is_err());
        let g: GridSpec = serde_json::from_str(r#"{"start": 0, "stop": 1, "step": 0.5}"#).unwrap();
        assert_eq!(g.build().unwrap().len(), 3);
        let g: GridSpec = serde_json::from_str(r#"[[0, 1], [1, 0]]"#).unwrap();
        assert_eq!(g.build().unwrap().dim(), 2);
        let cs: ConstraintSpec =
            serde_json::from_str(r#"[{"kind": "linear", "params": {"slope": 1, "intercept": 0}}, {"values": [1, 2, 3]}]"#)
                .unwrap();
        let h = cs.build(&SampleGrid::scalar(vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(h.dim(), 2);
    }

    #[test]
    fn etest_bounded_mean() {
        let cfg = RunConfig::from_json(
            r#"{"schema": "evarkit/1", "command": "etest", "alpha": 0.4,
                "constraints": {"kind": "bounded_mean", "params": {"m": 0.5}},
                "candidate": {"pi": [2]}}"#,
        )
        .unwrap();
        let out = run(&cfg, Some("0.9\n0.9\n")).unwrap();
        let Outcome::Etest(r) = &out.report.outcome else { panic!() };
        assert!((r.combined - 3.24).abs() < 1e-12);
        assert_eq!(r.threshold, 2.5);
        assert!(r.reject);
        assert_eq!(r.evaluation, Evaluation::ClosedForm);
        assert_eq!(out.exit_code, EXIT_OK);
    }

    #[test]
    fn etest_nearest_point_warns() {
        let cfg = RunConfig::from_json(
            r#"{"schema": "evarkit/1", "command": "etest", "grid": [0, 1, 2],
                "constraints": [{"values": [-1, 0, 1]}], "candidate": {"values": [2, 1, 0]}}"#,
        )
        .unwrap();
        let out = run(&cfg, Some("0.1\n5\n")).unwrap();
        let Outcome::Etest(r) = &out.report.outcome else { panic!() };
        assert_eq!(r.e_values, vec![2.0, 0.0]);
        assert_eq!(r.evaluation, Evaluation::NearestGridPoint);
        assert_eq!(out.report.warnings.len(), 1);
    }

    #[test]
    fn verify_and_maximal_defaults() {
        let out = run(&RunConfig::new(Command::Verify), None).unwrap();
        assert_eq!(out.exit_code, EXIT_OK);
        let out = run(&RunConfig::new(Command::Maximal), None).unwrap();
        let Outcome::Maximal(r) = &out.report.outcome else { panic!() };
        assert_eq!(r.agree, Some(true));
        assert!(r.adversary_maximal);
        let text = out.report.to_json();
        assert_eq!(Report::from_json(&text).unwrap(), out.report);
        assert_eq!(run(&RunConfig::new(Command::Maximal), None).unwrap().report.to_json(), text);

        let mut over = RunConfig::new(Command::Verify);
        over.candidate = Some(CandidateSpec::Constant(1.5));
        assert_eq!(run(&over, None).unwrap().exit_code, EXIT_VIOLATED);
    }

    #[test]
    fn group_names() {
        let g = SampleGrid::product(&[0.0, 1.0], 3).unwrap();
        assert_eq!(GroupSpec::Named("s3".into()).build(&g).unwrap().order(), 6);
        assert_eq!(GroupSpec::Named("cyclic:3".into()).build(&g).unwrap().order(), 3);
        assert!(GroupSpec::Named("s2".into()).build(&g).is_err());
        assert!(GroupSpec::Named("q".into()).build(&g).is_err());
        let s = SampleGrid::product(&[-1.0, 1.0], 2).unwrap();
        assert_eq!(GroupSpec::Named("signs:2".into()).build(&s).unwrap().order(), 4);
    }
}
