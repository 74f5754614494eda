//! Extended minimal 0-certificates and the kernel states built on them.
//!
//! A certificate for `T_v = 0` (with `v` at even level) contains `v`, one
//! certificate below a 0-valued grandchild under each of `v`'s two children,
//! and so on down to 0-valued leaves. On a normalized tree every odd-level
//! vertex is internal, so the recursion never needs a special case for
//! children that are leaves.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::Assignment;
use crate::linalg;
use crate::tree::{AugmentedTree, SymmetricOperator};

pub const DEFAULT_CERTIFICATE_CAP: usize = 10_000;

/// Which grandchild was chosen below each child of `vertex`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateLink {
    pub vertex: usize,
    pub chosen: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtendedCertificate {
    root: usize,
    /// Preorder: root, then the left sub-certificate, then the right one.
    members: Vec<usize>,
    links: Vec<CertificateLink>,
}

impl ExtendedCertificate {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn links(&self) -> &[CertificateLink] {
        &self.links
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn leaf(v: usize) -> Self {
        ExtendedCertificate {
            root: v,
            members: vec![v],
            links: Vec::new(),
        }
    }

    fn join(v: usize, left: &Self, right: &Self) -> Self {
        let mut members = Vec::with_capacity(1 + left.len() + right.len());
        members.push(v);
        members.extend_from_slice(&left.members);
        members.extend_from_slice(&right.members);
        let mut links = Vec::with_capacity(1 + left.links.len() + right.links.len());
        links.push(CertificateLink {
            vertex: v,
            chosen: [left.root, right.root],
        });
        links.extend_from_slice(&left.links);
        links.extend_from_slice(&right.links);
        ExtendedCertificate { root: v, members, links }
    }
}

/// Values of every formula vertex under one assignment, with checks shared
/// by the certificate operations.
struct Context<'a> {
    at: &'a AugmentedTree,
    values: Vec<Option<bool>>,
}

impl<'a> Context<'a> {
    fn new(at: &'a AugmentedTree, a: &Assignment) -> Result<Self> {
        Ok(Context {
            at,
            values: at.evaluate(a)?,
        })
    }

    fn is_zero(&self, v: usize) -> bool {
        self.values[v] == Some(false)
    }

    fn check_root(&self, v: usize) -> Result<()> {
        if !self.at.is_tree_vertex(v) {
            return Err(Error::NotTreeVertex(v));
        }
        if self.at.vertex(v).is_odd() {
            return Err(Error::CertificateShape(format!(
                "vertex {v} is at odd level {}; certificates are rooted at even levels",
                self.at.vertex(v).level
            )));
        }
        if !self.is_zero(v) {
            return Err(Error::NoCertificate(v));
        }
        Ok(())
    }

    /// 0-valued grandchildren under each child of an even internal `v`.
    fn zero_grandchildren(&self, v: usize) -> [Vec<usize>; 2] {
        let kids = &self.at.vertex(v).children;
        let pick = |z: usize| -> Vec<usize> {
            self.at
                .vertex(z)
                .children
                .iter()
                .copied()
                .filter(|&y| self.is_zero(y))
                .collect()
        };
        [pick(kids[0]), pick(kids[1])]
    }

    /// Number of certificates for `v`, saturating at `cap + 1`.
    fn count(&self, v: usize, cap: usize, memo: &mut [Option<usize>]) -> usize {
        if let Some(c) = memo[v] {
            return c;
        }
        let c = if self.at.vertex(v).is_leaf() {
            1
        } else {
            let [left, right] = self.zero_grandchildren(v);
            let mut side = |ys: &[usize]| {
                ys.iter()
                    .map(|&y| self.count(y, cap, memo))
                    .fold(0usize, |s, c| s.saturating_add(c))
                    .min(cap + 1)
            };
            let l = side(&left);
            let r = side(&right);
            l.saturating_mul(r).min(cap + 1)
        };
        memo[v] = Some(c);
        c
    }

    fn enumerate(&self, v: usize, memo: &mut Vec<Option<Vec<ExtendedCertificate>>>) -> Vec<ExtendedCertificate> {
        if let Some(found) = &memo[v] {
            return found.clone();
        }
        let out = if self.at.vertex(v).is_leaf() {
            vec![ExtendedCertificate::leaf(v)]
        } else {
            let [left, right] = self.zero_grandchildren(v);
            let l: Vec<_> = left.iter().flat_map(|&y| self.enumerate(y, memo)).collect();
            let r: Vec<_> = right.iter().flat_map(|&y| self.enumerate(y, memo)).collect();
            l.iter()
                .flat_map(|lc| r.iter().map(move |rc| ExtendedCertificate::join(v, lc, rc)))
                .collect()
        };
        memo[v] = Some(out.clone());
        out
    }

    fn first(&self, v: usize) -> ExtendedCertificate {
        if self.at.vertex(v).is_leaf() {
            return ExtendedCertificate::leaf(v);
        }
        let [left, right] = self.zero_grandchildren(v);
        ExtendedCertificate::join(v, &self.first(left[0]), &self.first(right[0]))
    }
}

pub fn enumerate_certificates(at: &AugmentedTree, a: &Assignment, v: usize) -> Result<Vec<ExtendedCertificate>> {
    enumerate_certificates_capped(at, a, v, DEFAULT_CERTIFICATE_CAP)
}

/// All certificates for `T_v = 0`, left choices varying slowest.
pub fn enumerate_certificates_capped(
    at: &AugmentedTree,
    a: &Assignment,
    v: usize,
    cap: usize,
) -> Result<Vec<ExtendedCertificate>> {
    let ctx = Context::new(at, a)?;
    ctx.check_root(v)?;
    if ctx.count(v, cap, &mut vec![None; at.dim()]) > cap {
        return Err(Error::CertificateCap(cap));
    }
    Ok(ctx.enumerate(v, &mut vec![None; at.dim()]))
}

/// The first certificate in enumeration order, built without enumerating.
pub fn first_certificate(at: &AugmentedTree, a: &Assignment, v: usize) -> Result<ExtendedCertificate> {
    let ctx = Context::new(at, a)?;
    ctx.check_root(v)?;
    Ok(ctx.first(v))
}

/// Each internal member has exactly one grandchild member under each child,
/// every member below the root hangs off a member grandparent, every leaf
/// member is 0, and the certified subformula is 0.
pub fn satisfies_structure(at: &AugmentedTree, a: &Assignment, cert: &ExtendedCertificate) -> Result<bool> {
    let ctx = Context::new(at, a)?;
    let members: BTreeSet<usize> = cert.members.iter().copied().collect();
    if members.len() != cert.members.len() || !members.contains(&cert.root) || !ctx.is_zero(cert.root) {
        return Ok(false);
    }
    for &w in &members {
        let vertex = at.vertex(w);
        if !vertex.is_tree() || vertex.is_odd() {
            return Ok(false);
        }
        if w != cert.root {
            let grandparent = vertex.parent.and_then(|p| at.vertex(p).parent);
            if !grandparent.is_some_and(|g| members.contains(&g)) {
                return Ok(false);
            }
        }
        if vertex.is_leaf() {
            if !ctx.is_zero(w) {
                return Ok(false);
            }
            continue;
        }
        for &z in &vertex.children {
            let chosen = at.vertex(z).children.iter().filter(|y| members.contains(y)).count();
            if chosen != 1 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StateKind {
    #[serde(rename = "psiC")]
    PsiC,
    #[serde(rename = "psi0")]
    Psi0,
    #[serde(rename = "psiC1C2")]
    PsiC1C2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateState {
    pub amplitudes: DVector<f64>,
    pub kind: StateKind,
}

impl CertificateState {
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.amplitudes.len()).filter(|&i| self.amplitudes[i] != 0.0).collect()
    }

    /// `||(H x)|_rows|| / ||x||`, or over all rows when `rows` is `None`.
    pub fn residual(&self, h: &SymmetricOperator, rows: Option<&[usize]>) -> f64 {
        let hx = h.matrix() * &self.amplitudes;
        let num = match rows {
            Some(rows) => rows.iter().map(|&r| hx[r] * hx[r]).sum::<f64>().sqrt(),
            None => hx.norm(),
        };
        num / self.amplitudes.norm()
    }
}

/// `ψ_C` with amplitude 1 on the certificate root; each chosen grandchild
/// `y` below `w` carries `-⁴√(m_w / 4m_y)` times the amplitude of `w`.
pub fn build_psi_c(cert: &ExtendedCertificate, at: &AugmentedTree) -> CertificateState {
    let mut x = DVector::zeros(at.dim());
    x[cert.root] = 1.0;
    for link in &cert.links {
        let w = link.vertex;
        let mw = at.vertex(w).leaves as f64;
        for &y in &link.chosen {
            let my = at.vertex(y).leaves as f64;
            x[y] = -x[w] * (mw / (4.0 * my)).powf(0.25);
        }
    }
    CertificateState {
        amplitudes: x,
        kind: StateKind::PsiC,
    }
}

/// `ψ_C + Σ_{i=1}^{t/2} (-1)^i |2i⟩` for a certificate of the whole formula.
pub fn build_psi_0(cert: &ExtendedCertificate, at: &AugmentedTree) -> Result<CertificateState> {
    if cert.root != at.root() {
        return Err(Error::CertificateShape(format!(
            "certificate is rooted at {}, not at the formula root",
            cert.root
        )));
    }
    let mut state = build_psi_c(cert, at);
    for i in 1..=at.tail_length() / 2 {
        state.amplitudes[at.tail_vertex(2 * i)] = if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    state.kind = StateKind::Psi0;
    Ok(state)
}

/// `ψ_{C1}/⁴√m_{v1} - ψ_{C2}/⁴√m_{v2}` for an odd-level `v` whose children
/// `v1`, `v2` are both 0 and carry the certificates `c1`, `c2`.
pub fn build_psi_c1c2(
    at: &AugmentedTree,
    a: &Assignment,
    v: usize,
    c1: &ExtendedCertificate,
    c2: &ExtendedCertificate,
) -> Result<CertificateState> {
    let ctx = Context::new(at, a)?;
    let [v1, v2] = eligible_children(&ctx, v)?;
    if c1.root != v1 || c2.root != v2 {
        return Err(Error::CertificateShape(format!(
            "certificates rooted at ({}, {}) but the children of {v} are ({v1}, {v2})",
            c1.root, c2.root
        )));
    }
    Ok(combine(at, c1, c2))
}

fn combine(at: &AugmentedTree, c1: &ExtendedCertificate, c2: &ExtendedCertificate) -> CertificateState {
    let s1 = (at.vertex(c1.root).leaves as f64).powf(0.25);
    let s2 = (at.vertex(c2.root).leaves as f64).powf(0.25);
    let amplitudes = build_psi_c(c1, at).amplitudes / s1 - build_psi_c(c2, at).amplitudes / s2;
    CertificateState {
        amplitudes,
        kind: StateKind::PsiC1C2,
    }
}

fn eligible_children(ctx: &Context<'_>, v: usize) -> Result<[usize; 2]> {
    let at = ctx.at;
    if !at.is_tree_vertex(v) {
        return Err(Error::NotTreeVertex(v));
    }
    let vertex = at.vertex(v);
    if !vertex.is_odd() || vertex.is_leaf() {
        return Err(Error::CertificateShape(format!("vertex {v} is not an odd-level gate")));
    }
    let [v1, v2] = [vertex.children[0], vertex.children[1]];
    if !(ctx.is_zero(v1) && ctx.is_zero(v2)) {
        return Err(Error::CertificateShape(format!("children of vertex {v} are not both 0")));
    }
    Ok([v1, v2])
}

/// Odd-level gates whose two children both evaluate to 0.
pub fn eligible_vertices(at: &AugmentedTree, a: &Assignment) -> Result<Vec<usize>> {
    let ctx = Context::new(at, a)?;
    Ok(at
        .tree_vertices()
        .filter(|&v| eligible_children(&ctx, v).is_ok())
        .collect())
}

/// Every `ψ_{C1,C2}` for one eligible vertex (all pairs, capped).
pub fn psi_c1c2_all(at: &AugmentedTree, a: &Assignment, v: usize, cap: usize) -> Result<Vec<CertificateState>> {
    let ctx = Context::new(at, a)?;
    let [v1, v2] = eligible_children(&ctx, v)?;
    let l = enumerate_certificates_capped(at, a, v1, cap)?;
    let r = enumerate_certificates_capped(at, a, v2, cap)?;
    if l.len().saturating_mul(r.len()) > cap {
        return Err(Error::CertificateCap(cap));
    }
    Ok(l.iter()
        .flat_map(|c1| r.iter().map(move |c2| combine(at, c1, c2)))
        .collect())
}

/// A generating set of `S'`: for each eligible vertex the pairs `(C1_i, C2_0)`
/// and `(C1_0, C2_j)`. Any other pair is a signed sum of three of these.
pub fn sprime_generators(at: &AugmentedTree, a: &Assignment, cap: usize) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::new();
    for v in eligible_vertices(at, a)? {
        let [v1, v2] = [at.vertex(v).children[0], at.vertex(v).children[1]];
        let l = enumerate_certificates_capped(at, a, v1, cap)?;
        let r = enumerate_certificates_capped(at, a, v2, cap)?;
        for c1 in &l {
            out.push(combine(at, c1, &r[0]).amplitudes);
        }
        for c2 in &r[1..] {
            out.push(combine(at, &l[0], c2).amplitudes);
        }
    }
    Ok(out)
}

/// Orthonormal basis (columns) of `S'`; `dim x 0` when nothing is eligible.
pub fn sprime_basis(at: &AugmentedTree, a: &Assignment) -> Result<DMatrix<f64>> {
    sprime_basis_capped(at, a, DEFAULT_CERTIFICATE_CAP)
}

pub fn sprime_basis_capped(at: &AugmentedTree, a: &Assignment, cap: usize) -> Result<DMatrix<f64>> {
    let generators = sprime_generators(at, a, cap)?;
    Ok(linalg::orthonormal_basis(&generators, at.dim(), 1e-10))
}

/// `2√m - 1`.
pub fn norm_bound_balanced(leaves: usize) -> f64 {
    2.0 * (leaves as f64).sqrt() - 1.0
}

/// `2√(m d)`.
pub fn norm_bound_general(leaves: usize, depth: usize) -> f64 {
    2.0 * ((leaves * depth) as f64).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateExport {
    pub root: usize,
    pub vertices: Vec<usize>,
    pub links: Vec<CertificateLink>,
    pub kind: StateKind,
    /// Nonzero `(vertex, amplitude)` pairs in vertex order.
    pub amplitudes: Vec<(usize, f64)>,
    pub norm_squared: f64,
}

impl CertificateExport {
    pub fn new(cert: &ExtendedCertificate, state: &CertificateState) -> Self {
        CertificateExport {
            root: cert.root,
            vertices: cert.members.clone(),
            links: cert.links.clone(),
            kind: state.kind,
            amplitudes: state.support().into_iter().map(|v| (v, state.amplitudes[v])).collect(),
            norm_squared: state.norm_squared(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate export serializes")
    }
}
