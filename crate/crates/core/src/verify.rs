//! Numeric thresholds from the recursion bounds, the instance corpora, and
//! the suite runner that checks every structural and spectral claim on them.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::certificates::{self as cert, DEFAULT_CERTIFICATE_CAP};
use crate::error::{Error, Result};
use crate::formula::{Assignment, FormulaTree, Node};
use crate::linalg;
use crate::qpe::{self, PreparedInstance, QpeConfig};
use crate::spectral::{self, EigenDecomposition, ProductSpectrum, ReflectionPair};
use crate::tree::{attach_tail, build_hamiltonian, restrict_to_subtree, AugmentedTree, Mode, SymmetricOperator};

/// `a_k = (1 + 2·4^k/K)(2^{k+1} - 1)`.
pub fn balanced_a(k: u32, big_k: f64) -> f64 {
    (1.0 + 2.0 * 4f64.powi(k as i32) / big_k) * (2f64.powi(k as i32 + 1) - 1.0)
}

/// `b_k = (1 - 2·4^k/K) K / 2^k`.
pub fn balanced_b(k: u32, big_k: f64) -> f64 {
    (1.0 - 2.0 * 4f64.powi(k as i32) / big_k) * big_k / 2f64.powi(k as i32)
}

/// `δ_v = 5 m √d / K + d / √K`.
pub fn general_delta(m: usize, d: usize, big_k: f64) -> f64 {
    5.0 * m as f64 * (d as f64).sqrt() / big_k + d as f64 / big_k.sqrt()
}

/// `a_v = 2 (1 + δ_v) √(d m)`.
pub fn general_a(m: usize, d: usize, big_k: f64) -> f64 {
    2.0 * (1.0 + general_delta(m, d, big_k)) * ((d * m) as f64).sqrt()
}

/// `b_v = (1 - δ_v) K / √m`.
pub fn general_b(m: usize, d: usize, big_k: f64) -> f64 {
    (1.0 - general_delta(m, d, big_k)) * big_k / (m as f64).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexBound {
    pub vertex: usize,
    pub leaves: usize,
    pub depth: usize,
    /// Half the height of `T_v` (balanced only).
    pub k: Option<u32>,
    pub a: f64,
    pub b: f64,
    /// General only.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionBounds {
    pub mode: Mode,
    #[serde(rename = "K")]
    pub big_k: f64,
    pub vertices: Vec<VertexBound>,
    /// Vertices with `δ_v > 1/5` (general mode); reported, not fatal.
    pub flagged: Vec<usize>,
}

impl RecursionBounds {
    pub fn root(&self) -> &VertexBound {
        &self.vertices[0]
    }
}

/// `K = 20N` (balanced) or `30Nd` (general).
pub fn recursion_constant(at: &AugmentedTree) -> f64 {
    match at.mode() {
        Mode::Balanced => 20.0 * at.leaf_count() as f64,
        Mode::General => 30.0 * (at.leaf_count() * at.depth()) as f64,
    }
}

/// Bounds at every even-level vertex, root first. In balanced mode the
/// inequalities `a_k <= 1.1·2^{k+1}`, `b_k >= 0.9 K/2^k` and `a_k <= 0.13 b_k`
/// are enforced.
pub fn bounds_table(at: &AugmentedTree) -> Result<RecursionBounds> {
    let big_k = recursion_constant(at);
    let mut vertices = Vec::new();
    let mut flagged = Vec::new();
    for v in at.tree_vertices().filter(|&v| !at.vertex(v).is_odd()) {
        let vx = at.vertex(v);
        let (m, d) = (vx.leaves, vx.depth);
        let row = match at.mode() {
            Mode::Balanced => {
                let k = ((d - 1) / 2) as u32;
                let (a, b) = (balanced_a(k, big_k), balanced_b(k, big_k));
                let scale = 2f64.powi(k as i32);
                if a > 1.1 * 2.0 * scale || b < 0.9 * big_k / scale || a > 0.13 * b {
                    return Err(Error::ClaimViolation(format!(
                        "a_{k} = {a:.6}, b_{k} = {b:.6} with K = {big_k} at vertex {v}"
                    )));
                }
                VertexBound {
                    vertex: v,
                    leaves: m,
                    depth: d,
                    k: Some(k),
                    a,
                    b,
                    delta: None,
                }
            }
            Mode::General => {
                let delta = general_delta(m, d, big_k);
                if delta > 0.2 {
                    flagged.push(v);
                }
                VertexBound {
                    vertex: v,
                    leaves: m,
                    depth: d,
                    k: None,
                    a: general_a(m, d, big_k),
                    b: general_b(m, d, big_k),
                    delta: Some(delta),
                }
            }
        };
        vertices.push(row);
    }
    Ok(RecursionBounds {
        mode: at.mode(),
        big_k,
        vertices,
        flagged,
    })
}

/// `b_r >= t/2`.
pub fn tail_threshold_check(at: &AugmentedTree, bounds: &RecursionBounds) -> bool {
    bounds.root().b >= (at.tail_length() / 2) as f64
}

/// One formula with the assignments to check it on.
#[derive(Clone, Debug)]
pub struct TreeCase {
    pub id: String,
    pub tree: AugmentedTree,
    pub assignments: Vec<Assignment>,
}

impl TreeCase {
    pub fn new(id: impl Into<String>, tree: &FormulaTree, mode: Mode, assignments: Vec<Assignment>) -> Result<Self> {
        Ok(TreeCase {
            id: id.into(),
            tree: attach_tail(&tree.normalize_even_depth(), mode, None)?,
            assignments,
        })
    }

    pub fn exhaustive(id: impl Into<String>, tree: &FormulaTree, mode: Mode) -> Result<Self> {
        let n = tree.num_vars();
        Self::new(id, tree, mode, Assignment::all(n).collect())
    }
}

/// Balanced trees of height `0..=max_k` with every assignment.
pub fn balanced_grid(max_k: u32) -> Result<Vec<TreeCase>> {
    (0..=max_k)
        .map(|k| {
            let t = FormulaTree::balanced(k, crate::formula::DEFAULT_MAX_LEAVES)?;
            TreeCase::exhaustive(format!("balanced-k{k}"), &t, Mode::Balanced)
        })
        .collect()
}

/// Hand-picked unbalanced shapes: skewed, deep chains and mixed depths.
pub const CURATED_GENERAL: &[&str] = &[
    "N(N(x1,x2),x3)",
    "N(x1,N(x2,N(x3,x4)))",
    "N(N(N(x1,x2),N(x3,x4)),N(x5,x6))",
    "N(N(x1,N(x2,x3)),N(x4,x5))",
    "N(N(N(N(x1,x2),N(x3,x4)),x5),x6)",
    "N(x1,N(x2,N(x3,N(x4,N(x5,N(x6,N(x7,x8)))))))",
    "N(N(N(x1,x2),x3),N(x4,N(x5,N(x6,x7))))",
];

pub const GENERAL_MAX_LEAVES: usize = 24;
const SAMPLED_ASSIGNMENTS: usize = 48;

fn random_shape<R: Rng>(leaves: usize, rng: &mut R) -> FormulaTree {
    fn build<R: Rng>(n: usize, next: &mut usize, nodes: &mut Vec<Node>, rng: &mut R) -> usize {
        if n == 1 {
            *next += 1;
            nodes.push(Node::Leaf {
                var: *next,
                negated: false,
            });
        } else {
            let split = rng.random_range(1..n);
            let l = build(split, next, nodes, rng);
            let r = build(n - split, next, nodes, rng);
            nodes.push(Node::Gate { children: [l, r] });
        }
        nodes.len() - 1
    }
    let mut nodes = Vec::new();
    let root = build(leaves, &mut 0, &mut nodes, rng);
    FormulaTree::from_nodes(nodes, root).expect("generated tree is read-once")
}

fn sampled_assignments<R: Rng>(n: usize, rng: &mut R) -> Vec<Assignment> {
    if n <= 8 {
        return Assignment::all(n).collect();
    }
    let mut seen = BTreeSet::new();
    seen.insert(vec![false; n]);
    seen.insert(vec![true; n]);
    while seen.len() < SAMPLED_ASSIGNMENTS {
        seen.insert((0..n).map(|_| rng.random::<bool>()).collect::<Vec<bool>>());
    }
    seen.into_iter().map(Assignment::new).collect()
}

/// The curated shapes followed by `random` seeded random shapes. Every tree
/// has at most 24 leaves after normalization; formulas with more than 8
/// variables get 48 sampled assignments (including all-0 and all-1).
pub fn general_corpus(random: usize, seed: u64) -> Result<Vec<TreeCase>> {
    let mut rng = qpe::run_rng(seed, usize::MAX);
    let mut cases = Vec::new();
    for (i, text) in CURATED_GENERAL.iter().enumerate() {
        let t = FormulaTree::parse(text)?;
        let a = sampled_assignments(t.num_vars(), &mut rng);
        cases.push(TreeCase::new(format!("curated-{i}"), &t, Mode::General, a)?);
    }
    let mut made = 0;
    while made < random {
        let n = rng.random_range(2..=12);
        let t = random_shape(n, &mut rng);
        if t.normalize_even_depth().leaf_count() > GENERAL_MAX_LEAVES {
            continue;
        }
        let a = sampled_assignments(n, &mut rng);
        cases.push(TreeCase::new(format!("random-{made}"), &t, Mode::General, a)?);
        made += 1;
    }
    Ok(cases)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    LemmaOdd,
    PsiCKernel,
    Psi0Kernel,
    NormBounds,
    Structure,
    Fixed,
    Overlap,
    PhaseZero,
    SprimeOrthogonal,
    Gap,
    Projection,
    EasyComposition,
    Bounds,
    Oracle,
}

impl Check {
    pub const ALL: [Check; 14] = [
        Check::LemmaOdd,
        Check::PsiCKernel,
        Check::Psi0Kernel,
        Check::NormBounds,
        Check::Structure,
        Check::Fixed,
        Check::Overlap,
        Check::PhaseZero,
        Check::SprimeOrthogonal,
        Check::Gap,
        Check::Projection,
        Check::EasyComposition,
        Check::Bounds,
        Check::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::LemmaOdd => "lemma-odd",
            Check::PsiCKernel => "psi-c-kernel",
            Check::Psi0Kernel => "psi0-kernel",
            Check::NormBounds => "norm-bounds",
            Check::Structure => "structure",
            Check::Fixed => "fixed",
            Check::Overlap => "overlap",
            Check::PhaseZero => "phase-zero",
            Check::SprimeOrthogonal => "sprime-orthogonal",
            Check::Gap => "gap",
            Check::Projection => "projection",
            Check::EasyComposition => "easy-composition",
            Check::Bounds => "bounds",
            Check::Oracle => "oracle",
        }
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownSelector(s.to_string()))
    }
}

/// Comma-separated check names, or `all`.
pub fn parse_selection(text: &str) -> Result<BTreeSet<Check>> {
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(Check::ALL);
        } else {
            out.insert(part.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::UnknownSelector(text.to_string()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    /// Misses the stated constant but stays within half of it.
    Flag,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub instance: String,
    pub status: Status,
    /// Worst measured value over everything the check covered.
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }

    pub fn count(&self, status: Status) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| r.status == Status::Fail)
    }

    pub fn of(&self, check: Check) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(move |r| r.check == check.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per (check, status) with counts, then every non-passing row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>6} {:>6} {:>6}", "check", "pass", "flag", "fail");
        for c in Check::ALL {
            let rows: Vec<_> = self.of(c).collect();
            if rows.is_empty() {
                continue;
            }
            let n = |s| rows.iter().filter(|r| r.status == s).count();
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>6} {:>6}",
                c.name(),
                n(Status::Pass),
                n(Status::Flag),
                n(Status::Fail)
            );
        }
        for r in self.results.iter().filter(|r| r.status != Status::Pass) {
            let rel = match r.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            let _ = writeln!(
                out,
                "{:?} {} {}: {:.3e} (want {rel} {:.3e}){}",
                r.status,
                r.check,
                r.instance,
                r.value,
                r.threshold,
                r.detail.as_deref().map(|d| format!(" {d}")).unwrap_or_default()
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Seeded decisions per instance for the oracle check.
    pub oracle_repetitions: usize,
    /// Required agreement with the classical value.
    pub oracle_agreement: f64,
    pub certificate_cap: usize,
    /// Random subspace pairs for the two-reflection check.
    pub easy_pairs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            oracle_repetitions: 50,
            oracle_agreement: 0.95,
            certificate_cap: DEFAULT_CERTIFICATE_CAP,
            easy_pairs: 200,
        }
    }
}

pub const KERNEL_TOLERANCE: f64 = 1e-10;
pub const ODD_LEAK_TOLERANCE: f64 = 1e-9;
pub const PHASE_ZERO_TOLERANCE: f64 = 1e-9;

fn at_most(check: Check, instance: &str, value: f64, threshold: f64) -> CheckResult {
    CheckResult {
        check: check.name(),
        instance: instance.to_string(),
        status: if value <= threshold { Status::Pass } else { Status::Fail },
        value,
        relation: Relation::AtMost,
        threshold,
        detail: None,
    }
}

fn at_least(check: Check, instance: &str, value: f64, threshold: f64) -> CheckResult {
    CheckResult {
        check: check.name(),
        instance: instance.to_string(),
        status: if value >= threshold { Status::Pass } else { Status::Fail },
        value,
        relation: Relation::AtLeast,
        threshold,
        detail: None,
    }
}

fn failed(check: Check, instance: &str, err: &Error) -> CheckResult {
    CheckResult {
        check: check.name(),
        instance: instance.to_string(),
        status: Status::Fail,
        value: f64::NAN,
        relation: Relation::AtMost,
        threshold: f64::NAN,
        detail: Some(err.to_string()),
    }
}

fn with_detail(mut r: CheckResult, detail: String) -> CheckResult {
    r.detail = Some(detail);
    r
}

/// Runs the selected checks over every case. Errors inside a check become
/// failing rows; the runner itself never fails.
pub fn run_suite(cases: &[TreeCase], checks: &BTreeSet<Check>, options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::default();
    if checks.contains(&Check::EasyComposition) {
        report.results.extend(easy_composition(options.easy_pairs, options.seed));
    }
    for case in cases {
        run_case(case, checks, options, &mut report.results);
    }
    report
}

fn run_case(case: &TreeCase, checks: &BTreeSet<Check>, options: &SuiteOptions, out: &mut Vec<CheckResult>) {
    let at = &case.tree;
    let h = build_hamiltonian(at);
    let ed = match spectral::eigendecompose(&h) {
        Ok(ed) => ed,
        Err(e) => {
            for &c in checks.iter().filter(|&&c| c != Check::EasyComposition) {
                out.push(failed(c, &case.id, &e));
            }
            return;
        }
    };
    if checks.contains(&Check::LemmaOdd) {
        out.push(lemma_odd(&case.id, at, &ed));
    }
    if checks.contains(&Check::Bounds) {
        out.push(bounds_check(&case.id, at));
    }
    let ctx = InstanceContext { at, h: &h, ed: &ed };
    for a in &case.assignments {
        let id = format!("{}/a={a}", case.id);
        ctx.run(&id, a, checks, options, out);
    }
}

/// Largest amplitude of any 0-eigenvector on an odd-level vertex.
pub fn odd_leak(at: &AugmentedTree, ed: &EigenDecomposition) -> f64 {
    let z = ed.zero_space();
    (0..at.dim())
        .filter(|&v| at.vertex(v).is_odd())
        .flat_map(|v| (0..z.ncols()).map(move |c| (v, c)))
        .fold(0.0, |m, (v, c)| m.max(z[(v, c)].abs()))
}

fn lemma_odd(id: &str, at: &AugmentedTree, ed: &EigenDecomposition) -> CheckResult {
    at_most(Check::LemmaOdd, id, odd_leak(at, ed), ODD_LEAK_TOLERANCE)
}

fn bounds_check(id: &str, at: &AugmentedTree) -> CheckResult {
    match bounds_table(at) {
        Err(e) => failed(Check::Bounds, id, &e),
        Ok(b) => {
            let half = (at.tail_length() / 2) as f64;
            let mut r = at_least(Check::Bounds, id, b.root().b, half);
            if r.status == Status::Pass && !b.flagged.is_empty() {
                let worst = b
                    .vertices
                    .iter()
                    .filter_map(|v| v.delta)
                    .fold(0.0, f64::max);
                r.status = Status::Flag;
                r.detail = Some(format!(
                    "delta_v > 1/5 at {} vertices (max {worst:.4})",
                    b.flagged.len()
                ));
            }
            r
        }
    }
}

struct InstanceContext<'a> {
    at: &'a AugmentedTree,
    h: &'a SymmetricOperator,
    ed: &'a EigenDecomposition,
}

impl InstanceContext<'_> {
    fn run(&self, id: &str, a: &Assignment, checks: &BTreeSet<Check>, opt: &SuiteOptions, out: &mut Vec<CheckResult>) {
        let at = self.at;
        let value = match at.base().evaluate(a) {
            Ok(v) => v,
            Err(e) => {
                out.extend(checks.iter().map(|&c| failed(c, id, &e)));
                return;
            }
        };
        let wants = |c: Check| checks.contains(&c);

        if wants(Check::PsiCKernel) || wants(Check::NormBounds) || wants(Check::Structure) {
            out.extend(self.certificate_checks(id, a, checks, opt.certificate_cap));
        }
        if wants(Check::Fixed) {
            out.push(self.fixed(id, a, opt.certificate_cap).unwrap_or_else(|e| failed(Check::Fixed, id, &e)));
        }
        if wants(Check::SprimeOrthogonal) {
            out.push(self.sprime_orthogonal(id, a, opt.certificate_cap).unwrap_or_else(|e| failed(Check::SprimeOrthogonal, id, &e)));
        }

        let needs_spectrum = [Check::Psi0Kernel, Check::Overlap, Check::PhaseZero, Check::Gap, Check::Projection, Check::Oracle]
            .into_iter()
            .any(wants);
        if !needs_spectrum {
            return;
        }
        let rp = match spectral::build_reflections(self.ed, at, a) {
            Ok(rp) => rp,
            Err(e) => {
                out.push(failed(Check::Gap, id, &e));
                return;
            }
        };

        let spectrum = [Check::PhaseZero, Check::Gap, Check::Oracle]
            .into_iter()
            .any(wants)
            .then(|| spectral::product_spectrum(&rp));
        let with_spectrum = |check: Check, f: &dyn Fn(&ProductSpectrum) -> Result<CheckResult>| match &spectrum {
            Some(Ok(ps)) => f(ps).unwrap_or_else(|e| failed(check, id, &e)),
            Some(Err(e)) => failed(check, id, e),
            None => unreachable!("spectrum is computed for every check that reads it"),
        };

        if !value {
            if wants(Check::Psi0Kernel) || wants(Check::Overlap) {
                match self.psi0_checks(id, a, &rp, opt.certificate_cap) {
                    Ok(rows) => out.extend(rows.into_iter().filter(|r| checks.iter().any(|c| c.name() == r.check))),
                    Err(e) => out.push(failed(Check::Psi0Kernel, id, &e)),
                }
            }
            if wants(Check::PhaseZero) {
                out.push(with_spectrum(Check::PhaseZero, &|ps| {
                    Ok(at_least(Check::PhaseZero, id, ps.phase_zero_overlap(PHASE_ZERO_TOLERANCE), qpe::OVERLAP_CONSTANT))
                }));
            }
        } else {
            if wants(Check::Gap) {
                out.push(with_spectrum(Check::Gap, &|ps| self.gap(id, ps)));
            }
            if wants(Check::Projection) {
                out.push(self.projection(id, a, &rp, opt.certificate_cap).unwrap_or_else(|e| failed(Check::Projection, id, &e)));
            }
        }
        if wants(Check::Oracle) {
            out.push(with_spectrum(Check::Oracle, &|ps| self.oracle(id, ps, value, opt)));
        }
    }

    fn certificate_checks(&self, id: &str, a: &Assignment, checks: &BTreeSet<Check>, cap: usize) -> Vec<CheckResult> {
        let at = self.at;
        let values = match at.evaluate(a) {
            Ok(v) => v,
            Err(e) => return vec![failed(Check::Structure, id, &e)],
        };
        let (mut residual, mut slack, mut broken, mut count) = (0.0f64, f64::INFINITY, 0usize, 0usize);
        let mut worst_norm = String::new();
        for v in at.tree_vertices().filter(|&v| !at.vertex(v).is_odd() && values[v] == Some(false)) {
            let certs = match cert::enumerate_certificates_capped(at, a, v, cap) {
                Ok(c) => c,
                Err(e) => return vec![failed(Check::Structure, id, &e)],
            };
            let rows = match restrict_to_subtree(self.h, at, v) {
                Ok(s) => s.vertices,
                Err(e) => return vec![failed(Check::PsiCKernel, id, &e)],
            };
            let vx = at.vertex(v);
            let bound = match at.mode() {
                Mode::Balanced => cert::norm_bound_balanced(vx.leaves).min(cert::norm_bound_general(vx.leaves, vx.depth)),
                Mode::General => cert::norm_bound_general(vx.leaves, vx.depth),
            };
            for c in &certs {
                count += 1;
                match cert::satisfies_structure(at, a, c) {
                    Ok(true) => {}
                    _ => broken += 1,
                }
                let psi = cert::build_psi_c(c, at);
                residual = residual.max(psi.residual(self.h, Some(&rows)));
                let s = bound - psi.norm_squared();
                if s < slack {
                    slack = s;
                    worst_norm = format!("vertex {v}: |psi_C|^2 = {:.6}, bound {bound:.6}", psi.norm_squared());
                }
            }
        }
        let mut rows = Vec::new();
        let detail = format!("{count} certificates");
        if checks.contains(&Check::PsiCKernel) {
            rows.push(with_detail(at_most(Check::PsiCKernel, id, residual, KERNEL_TOLERANCE), detail.clone()));
        }
        if checks.contains(&Check::NormBounds) {
            let r = at_least(Check::NormBounds, id, if slack.is_finite() { slack } else { 0.0 }, 0.0);
            rows.push(if r.status == Status::Pass { with_detail(r, detail.clone()) } else { with_detail(r, worst_norm) });
        }
        if checks.contains(&Check::Structure) {
            rows.push(with_detail(at_most(Check::Structure, id, broken as f64, 0.0), detail));
        }
        rows
    }

    fn fixed(&self, id: &str, a: &Assignment, cap: usize) -> Result<CheckResult> {
        let ones = self.at.one_leaves(a)?;
        let mut worst = 0.0f64;
        let mut count = 0;
        for v in cert::eligible_vertices(self.at, a)? {
            for psi in cert::psi_c1c2_all(self.at, a, v, cap)? {
                count += 1;
                let n = psi.amplitudes.norm();
                let oracle_leak = ones.iter().map(|&l| psi.amplitudes[l].abs()).fold(0.0, f64::max) / n;
                worst = worst.max(psi.residual(self.h, None)).max(2.0 * oracle_leak);
            }
        }
        Ok(with_detail(at_most(Check::Fixed, id, worst, KERNEL_TOLERANCE), format!("{count} states")))
    }

    fn sprime_orthogonal(&self, id: &str, a: &Assignment, cap: usize) -> Result<CheckResult> {
        let basis = cert::sprime_basis_capped(self.at, a, cap)?;
        let start = spectral::start_state(self.at);
        let worst = (0..basis.ncols())
            .map(|c| basis.column(c).dot(&start).abs())
            .fold(0.0, f64::max);
        Ok(with_detail(
            at_most(Check::SprimeOrthogonal, id, worst, KERNEL_TOLERANCE),
            format!("dim S' = {}", basis.ncols()),
        ))
    }

    fn psi0_checks(&self, id: &str, a: &Assignment, rp: &ReflectionPair, cap: usize) -> Result<Vec<CheckResult>> {
        let at = self.at;
        let (mut residual, mut overlap) = (0.0f64, f64::INFINITY);
        let certs = cert::enumerate_certificates_capped(at, a, at.root(), cap)?;
        for c in &certs {
            let psi = cert::build_psi_0(c, at)?;
            let x = &psi.amplitudes;
            let n = x.norm();
            let u1 = (rp.apply_u1(x) - x).norm() / n;
            let u2 = (rp.apply_u2(x) - x).norm() / n;
            residual = residual.max(psi.residual(self.h, None)).max(u1).max(u2);
            overlap = overlap.min(x.dot(rp.psi_start_normalized()) / n);
        }
        let detail = format!("{} root certificates", certs.len());
        Ok(vec![
            with_detail(at_most(Check::Psi0Kernel, id, residual, KERNEL_TOLERANCE), detail.clone()),
            with_detail(at_least(Check::Overlap, id, overlap, 1.0 / 5f64.sqrt() - 1e-9), detail),
        ])
    }

    fn gap(&self, id: &str, ps: &ProductSpectrum) -> Result<CheckResult> {
        let phase = spectral::min_relevant_phase(ps, spectral::DEFAULT_OVERLAP_FLOOR)?;
        let threshold = qpe::theta_min(self.at.mode(), self.at.leaf_count(), self.at.depth());
        let mut r = at_least(Check::Gap, id, phase, threshold);
        if r.status == Status::Fail && phase >= 0.5 * threshold {
            r.status = Status::Flag;
            r.detail = Some("below the stated constant, within a factor of 2".into());
        }
        Ok(r)
    }

    fn projection(&self, id: &str, a: &Assignment, rp: &ReflectionPair, cap: usize) -> Result<CheckResult> {
        let basis = cert::sprime_basis_capped(self.at, a, cap)?;
        let gap = spectral::projection_gap(self.ed, rp, &basis)?;
        Ok(at_least(Check::Projection, id, gap, 1.0 / recursion_constant(self.at)))
    }

    fn oracle(&self, id: &str, ps: &ProductSpectrum, value: bool, opt: &SuiteOptions) -> Result<CheckResult> {
        let cfg = QpeConfig::for_tree(self.at, opt.seed);
        let prepared = PreparedInstance::from_spectrum(ps.clone(), cfg)?;
        let mut agree = 0;
        for rep in 0..opt.oracle_repetitions {
            if prepared.run(opt.seed.wrapping_add(rep as u64))?.decision == value {
                agree += 1;
            }
        }
        let frac = if opt.oracle_repetitions == 0 { 1.0 } else { agree as f64 / opt.oracle_repetitions as f64 };
        Ok(with_detail(
            at_least(Check::Oracle, id, frac, opt.oracle_agreement),
            format!("{agree}/{} runs", opt.oracle_repetitions),
        ))
    }
}

fn random_orthonormal<R: Rng>(dim: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let vs: Vec<DVector<f64>> = (0..k)
            .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let q = linalg::orthonormal_basis(&vs, dim, 1e-6);
        if q.ncols() == k {
            return q;
        }
    }
}

/// A random pair of subspaces of `R^n`, `n <= 12`, with `dim S1 + dim S2 <= n`.
pub fn random_subspace_pair<R: Rng>(rng: &mut R) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rng.random_range(2..=12);
    let d1 = rng.random_range(1..n);
    let d2 = rng.random_range(1..=n - d1);
    (random_orthonormal(n, d1, rng), random_orthonormal(n, d2, rng))
}

/// Analytic cases: lines at 45 degrees and at 90 degrees in the plane.
pub fn analytic_subspace_pairs() -> Vec<(&'static str, DMatrix<f64>, DMatrix<f64>, f64)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    vec![
        ("analytic-45", x.clone(), DMatrix::from_column_slice(2, 1, &[h, h]), PI / 2.0),
        ("analytic-90", x, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), PI),
    ]
}

fn easy_composition(pairs: usize, seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let row = |id: &str, s1: &DMatrix<f64>, s2: &DMatrix<f64>| match spectral::two_reflection_angle_check(s1, s2) {
        Ok(c) => {
            let mut r = at_least(Check::EasyComposition, id, c.min_phase, c.epsilon.sqrt() - 1e-8);
            r.detail = Some(format!("epsilon = {:.6}", c.epsilon));
            r
        }
        Err(e) => failed(Check::EasyComposition, id, &e),
    };
    for (id, s1, s2, expected) in analytic_subspace_pairs() {
        let mut r = row(id, &s1, &s2);
        if (r.value - expected).abs() > 1e-12 {
            r.status = Status::Fail;
            r.detail = Some(format!("expected min phase {expected}"));
        }
        out.push(r);
    }
    let mut rng = qpe::run_rng(seed, usize::MAX - 1);
    let mut worst: Option<CheckResult> = None;
    let mut failures = Vec::new();
    for i in 0..pairs {
        let (s1, s2) = random_subspace_pair(&mut rng);
        let r = row(&format!("random-pair-{i}"), &s1, &s2);
        if r.status == Status::Fail {
            failures.push(r);
        } else if worst.as_ref().is_none_or(|w| r.value - r.threshold < w.value - w.threshold) {
            worst = Some(r);
        }
    }
    if failures.is_empty() {
        if let Some(mut w) = worst {
            w.instance = format!("random-pairs[{pairs}] worst {}", w.instance);
            out.push(w);
        }
    }
    out.extend(failures);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checks(text: &str) -> BTreeSet<Check> {
        parse_selection(text).unwrap()
    }

    #[test]
    fn balanced_substitutions() {
        assert!((balanced_a(1, 40.0) - 3.6).abs() < 1e-12);
        assert!((balanced_a(0, 20.0) - 1.1).abs() < 1e-12);
        assert!((balanced_b(2, 80.0) - 12.0).abs() < 1e-12);
        let d = general_delta(1, 1, 30.0 * 4.0 * 3.0);
        assert!(d <= 0.2);
    }

    #[test]
    fn claim_ab_holds_up_to_the_limit() {
        for n in [1usize, 4, 16, 64, 256, 1024] {
            let big_k = 20.0 * n as f64;
            let mut k = 0;
            while 4f64.powi(k as i32) <= big_k / 20.0 {
                let (a, b) = (balanced_a(k, big_k), balanced_b(k, big_k));
                let s = 2f64.powi(k as i32);
                assert!(a <= 1.1 * 2.0 * s && b >= 0.9 * big_k / s - 1e-9 && a <= 0.13 * b, "N={n} k={k}");
                k += 1;
            }
        }
    }

    #[test]
    fn tail_thresholds() {
        let t = FormulaTree::balanced(2, 64).unwrap();
        let at = attach_tail(&t, Mode::Balanced, None).unwrap();
        let b = bounds_table(&at).unwrap();
        assert_eq!(b.big_k, 80.0);
        assert_eq!(b.root().k, Some(1));
        assert!(tail_threshold_check(&at, &b));

        let t = FormulaTree::balanced(4, 64).unwrap();
        let at = attach_tail(&t, Mode::Balanced, None).unwrap();
        assert_eq!(at.tail_length(), 8);
        assert!(tail_threshold_check(&at, &bounds_table(&at).unwrap()));

        let t = FormulaTree::parse("N(N(x1,x2),x3)").unwrap().normalize_even_depth();
        let at = attach_tail(&t, Mode::General, None).unwrap();
        let b = bounds_table(&at).unwrap();
        assert_eq!(b.big_k, 360.0);
        assert_eq!(at.tail_length(), 8);
        let root = b.root();
        assert!((root.b - (1.0 - root.delta.unwrap()) * 180.0).abs() < 1e-9);
        assert!(tail_threshold_check(&at, &b));
        assert_eq!(b.flagged, vec![0]);
    }

    #[test]
    fn selection_parsing() {
        assert_eq!(checks("all").len(), Check::ALL.len());
        assert_eq!(checks("gap, lemma-odd").len(), 2);
        assert_eq!(parse_selection("gap,nope"), Err(Error::UnknownSelector("nope".into())));
    }

    #[test]
    fn empty_corpus_passes() {
        let r = run_suite(&[], &checks("lemma-odd"), &SuiteOptions::default());
        assert!(r.results.is_empty());
        assert!(r.passed());
    }

    #[test]
    fn lemma_odd_on_small_grid() {
        let r = run_suite(&balanced_grid(2).unwrap(), &checks("lemma-odd"), &SuiteOptions::default());
        assert_eq!(r.results.len(), 3);
        assert!(r.passed(), "{}", r.to_table());
    }

    #[test]
    fn norm_bounds_on_small_grid() {
        let r = run_suite(&balanced_grid(2).unwrap(), &checks("norm-bounds,structure"), &SuiteOptions::default());
        assert!(r.passed(), "{}", r.to_table());
        assert_eq!(r.count(Status::Pass), 2 * (2 + 4 + 16));
    }

    #[test]
    fn full_suite_on_one_general_tree() {
        let t = FormulaTree::parse("N(N(x1,N(x2,x3)),N(x4,x5))").unwrap();
        let case = TreeCase::exhaustive("g", &t, Mode::General).unwrap();
        let opts = SuiteOptions {
            oracle_repetitions: 5,
            easy_pairs: 10,
            ..SuiteOptions::default()
        };
        let r = run_suite(&[case], &checks("all"), &opts);
        assert!(r.passed(), "{}", r.to_table());
    }

    #[test]
    fn general_corpus_is_reproducible_and_capped() {
        let a = general_corpus(6, 3).unwrap();
        let b = general_corpus(6, 3).unwrap();
        assert_eq!(a.len(), CURATED_GENERAL.len() + 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tree.base().to_string(), y.tree.base().to_string());
            assert_eq!(x.assignments, y.assignments);
            assert!(x.tree.leaf_count() <= GENERAL_MAX_LEAVES);
        }
    }

    #[test]
    fn easy_composition_rows() {
        let rows = easy_composition(20, 1);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.status == Status::Pass));
    }

    #[test]
    fn report_serializes() {
        let r = run_suite(&balanced_grid(1).unwrap(), &checks("lemma-odd,bounds"), &SuiteOptions::default());
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["results"][0]["check"], "lemma-odd");
        assert_eq!(json["results"][0]["relation"], "<=");
        assert!(r.to_table().starts_with("check"));
    }
}
