//! Spectral side of the walk: the 0-eigenspace of `H`, the two reflections
//! `U1` (about `S_{H,0}`) and `U2` (the oracle), the eigenphases of `U2 U1`,
//! and the subspace quantities that bound those phases from below.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::Assignment;
use crate::linalg::{self, CVector};
use crate::tree::{AugmentedTree, SymmetricOperator};

/// Eigenvalues with `|λ| <= DEFAULT_ZERO_TOLERANCE * ||H||` span `S_{H,0}`.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-9;
/// Overlaps at or below this are treated as orthogonal to the start state.
pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-12;
/// Phases within this distance of each other belong to one eigenspace.
pub const PHASE_CLUSTER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    zero_tolerance: f64,
    norm: f64,
}

pub fn eigendecompose(h: &SymmetricOperator) -> Result<EigenDecomposition> {
    eigendecompose_with(h, DEFAULT_ZERO_TOLERANCE)
}

pub fn eigendecompose_with(h: &SymmetricOperator, zero_tolerance: f64) -> Result<EigenDecomposition> {
    let (eigenvalues, eigenvectors) = linalg::jacobi_eigen(h.matrix())?;
    let norm = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let ed = EigenDecomposition {
        eigenvalues,
        eigenvectors,
        zero_tolerance,
        norm,
    };
    let n = h.dim();
    let residual = ed.max_residual(h);
    let ortho = (ed.eigenvectors.transpose() * &ed.eigenvectors - DMatrix::identity(n, n)).amax();
    if residual > 1e-10 * norm.max(f64::MIN_POSITIVE) || ortho > 1e-12 {
        return Err(Error::NoConvergence {
            dim: n,
            sweeps: 0,
            residual: residual.max(ortho),
        });
    }
    Ok(ed)
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }

    /// `||H||_2`.
    pub fn spectral_norm(&self) -> f64 {
        self.norm
    }

    fn is_zero(&self, lambda: f64) -> bool {
        lambda.abs() <= self.zero_tolerance * self.norm
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.is_zero(self.eigenvalues[i])).collect()
    }

    /// Orthonormal basis of `S_{H,0}` as columns.
    pub fn zero_space(&self) -> DMatrix<f64> {
        let idx = self.zero_indices();
        DMatrix::from_fn(self.dim(), idx.len(), |r, c| self.eigenvectors[(r, idx[c])])
    }

    /// Smallest `|λ|` outside the 0-eigenspace; infinite if `H = 0`.
    pub fn smallest_nonzero(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|l| !self.is_zero(**l))
            .fold(f64::INFINITY, |m, l| m.min(l.abs()))
    }

    /// `max_i ||H v_i - λ_i v_i||`.
    pub fn max_residual(&self, h: &SymmetricOperator) -> f64 {
        let hv = h.matrix() * &self.eigenvectors;
        (0..self.dim())
            .map(|i| (hv.column(i) - self.eigenvectors.column(i) * self.eigenvalues[i]).norm())
            .fold(0.0, f64::max)
    }
}

/// `Σ_{i=0}^{t/2} (-1)^i |2i⟩`: the even tail positions with the alternating
/// signs every 0-eigenvector of `H` carries there.
pub fn start_state(at: &AugmentedTree) -> DVector<f64> {
    let mut psi = DVector::zeros(at.dim());
    for i in 0..=at.tail_length() / 2 {
        psi[at.tail_vertex(2 * i)] = if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    psi
}

#[derive(Clone, Debug)]
pub struct ReflectionPair {
    u1: DMatrix<f64>,
    u2: Vec<f64>,
    one_leaves: Vec<usize>,
    psi_start: DVector<f64>,
    psi_start_projected: DVector<f64>,
    psi_start_normalized: DVector<f64>,
}

pub fn build_reflections(ed: &EigenDecomposition, at: &AugmentedTree, a: &Assignment) -> Result<ReflectionPair> {
    let n = at.dim();
    if ed.dim() != n {
        return Err(Error::Dimension(format!(
            "decomposition has dimension {}, tree has {n}",
            ed.dim()
        )));
    }
    let z = ed.zero_space();
    let projector = &z * z.transpose();
    let u1 = &projector * 2.0 - DMatrix::identity(n, n);

    let one_leaves = at.one_leaves(a)?;
    let mut u2 = vec![1.0; n];
    for &v in &one_leaves {
        u2[v] = -1.0;
    }

    let psi_start = start_state(at);
    let psi_start_projected = &projector * &psi_start;
    let norm = psi_start_projected.norm();
    if norm < 1e-12 {
        return Err(Error::ZeroProjection(norm));
    }
    let psi_start_normalized = &psi_start_projected / norm;
    Ok(ReflectionPair {
        u1,
        u2,
        one_leaves,
        psi_start,
        psi_start_projected,
        psi_start_normalized,
    })
}

impl ReflectionPair {
    /// A pair given directly by its matrices; the start state is used as-is.
    pub fn from_parts(u1: DMatrix<f64>, u2_diagonal: Vec<f64>, start: DVector<f64>) -> Result<Self> {
        let n = u1.nrows();
        if u1.ncols() != n || u2_diagonal.len() != n || start.len() != n {
            return Err(Error::Dimension("reflection pair parts disagree in size".into()));
        }
        let norm = start.norm();
        if norm < 1e-12 {
            return Err(Error::ZeroProjection(norm));
        }
        let one_leaves = (0..n).filter(|&i| u2_diagonal[i] < 0.0).collect();
        Ok(ReflectionPair {
            u1,
            u2: u2_diagonal,
            one_leaves,
            psi_start: start.clone(),
            psi_start_projected: start.clone(),
            psi_start_normalized: start / norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.u2.len()
    }

    pub fn u1(&self) -> &DMatrix<f64> {
        &self.u1
    }

    /// Diagonal of `U2`.
    pub fn u2_diagonal(&self) -> &[f64] {
        &self.u2
    }

    pub fn u2(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.u2))
    }

    /// Coordinates spanning `S_{x,1}`.
    pub fn one_leaves(&self) -> &[usize] {
        &self.one_leaves
    }

    pub fn psi_start(&self) -> &DVector<f64> {
        &self.psi_start
    }

    pub fn psi_start_projected(&self) -> &DVector<f64> {
        &self.psi_start_projected
    }

    pub fn psi_start_normalized(&self) -> &DVector<f64> {
        &self.psi_start_normalized
    }

    /// `U2 U1` (one oracle query per application).
    pub fn product(&self) -> DMatrix<f64> {
        let mut p = self.u1.clone();
        for (r, &s) in self.u2.iter().enumerate() {
            if s < 0.0 {
                p.row_mut(r).neg_mut();
            }
        }
        p
    }

    pub fn apply_u1(&self, psi: &DVector<f64>) -> DVector<f64> {
        &self.u1 * psi
    }

    pub fn apply_u2(&self, psi: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(psi.len(), |i, _| self.u2[i] * psi[i])
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumEntry {
    /// Eigenphase in (-pi, pi].
    pub theta: f64,
    pub vector: CVector,
    /// `|⟨v|ψ''_start⟩|^2`.
    pub overlap2: f64,
}

/// A group of eigenphases equal within `PHASE_CLUSTER_TOLERANCE`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhaseCluster {
    pub theta: f64,
    pub overlap2: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectrumRow {
    pub theta: f64,
    pub overlap2: f64,
}

#[derive(Clone, Debug)]
pub struct ProductSpectrum {
    entries: Vec<SpectrumEntry>,
}

pub fn product_spectrum(rp: &ReflectionPair) -> Result<ProductSpectrum> {
    let u = rp.product();
    let psi = rp.psi_start_normalized();
    let entries = linalg::orthogonal_eigen(&u)?
        .into_iter()
        .map(|pair| {
            let overlap: Complex<f64> = pair
                .vector
                .iter()
                .zip(psi.iter())
                .map(|(v, &p)| v.conj() * p)
                .sum();
            SpectrumEntry {
                theta: pair.theta,
                vector: pair.vector,
                overlap2: overlap.norm_sqr(),
            }
        })
        .collect();
    Ok(ProductSpectrum { entries })
}

impl ProductSpectrum {
    pub fn from_entries(entries: Vec<SpectrumEntry>) -> Self {
        ProductSpectrum { entries }
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all overlaps; 1 for a complete eigenbasis and a unit start state.
    pub fn total_overlap(&self) -> f64 {
        self.entries.iter().map(|e| e.overlap2).sum()
    }

    /// Eigenspaces with their total overlap, sorted by phase. Phases near
    /// `-pi` and `pi` are the same eigenvalue and end up in one cluster.
    pub fn clusters(&self) -> Vec<PhaseCluster> {
        use std::f64::consts::PI;
        let mut sorted: Vec<&SpectrumEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        let mut clusters: Vec<PhaseCluster> = Vec::new();
        for e in sorted {
            match clusters.last_mut() {
                Some(c) if e.theta - c.theta <= PHASE_CLUSTER_TOLERANCE * c.multiplicity as f64 => {
                    c.overlap2 += e.overlap2;
                    c.multiplicity += 1;
                }
                _ => clusters.push(PhaseCluster {
                    theta: e.theta,
                    overlap2: e.overlap2,
                    multiplicity: 1,
                }),
            }
        }
        if clusters.len() > 1 {
            let first = clusters[0];
            let last = clusters[clusters.len() - 1];
            if first.theta + 2.0 * PI - last.theta <= PHASE_CLUSTER_TOLERANCE {
                let merged = clusters.pop().expect("non-empty");
                clusters[0] = PhaseCluster {
                    theta: merged.theta,
                    overlap2: first.overlap2 + merged.overlap2,
                    multiplicity: first.multiplicity + merged.multiplicity,
                };
            }
        }
        clusters
    }

    /// Total overlap of the start state with the eigenspace of phase 0.
    pub fn phase_zero_overlap(&self, tolerance: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.theta.abs() <= tolerance)
            .map(|e| e.overlap2)
            .sum()
    }

    /// One row per eigenvector, ordered by `|θ|` (ties by θ).
    pub fn rows_by_abs_phase(&self) -> Vec<SpectrumRow> {
        let mut rows: Vec<SpectrumRow> = self
            .entries
            .iter()
            .map(|e| SpectrumRow {
                theta: e.theta,
                overlap2: e.overlap2,
            })
            .collect();
        rows.sort_by(|a, b| {
            a.theta
                .abs()
                .total_cmp(&b.theta.abs())
                .then(a.theta.total_cmp(&b.theta))
        });
        rows
    }
}

/// Smallest `|θ|` among eigenspaces whose overlap with the start state
/// exceeds `overlap_floor`.
pub fn min_relevant_phase(ps: &ProductSpectrum, overlap_floor: f64) -> Result<f64> {
    ps.clusters()
        .iter()
        .filter(|c| c.overlap2 > overlap_floor)
        .map(|c| c.theta.abs())
        .reduce(f64::min)
        .ok_or(Error::NoRelevantPhase(overlap_floor))
}

/// `min ||P_{S_{x,1}} ψ||^2` over unit `ψ ∈ S_{H,0} ∩ (S'_{H,0})^⊥`.
///
/// `sprime_basis` holds orthonormal columns spanning `S'_{H,0}`. Returns
/// `+∞` when the intersection is trivial and 0 when `S_{x,1}` is empty.
pub fn projection_gap(ed: &EigenDecomposition, rp: &ReflectionPair, sprime_basis: &DMatrix<f64>) -> Result<f64> {
    let z = ed.zero_space();
    if sprime_basis.nrows() != z.nrows() {
        return Err(Error::Dimension("S' basis lives in a different space".into()));
    }
    let w = if sprime_basis.ncols() == 0 {
        z
    } else {
        // Coordinates of S' inside S_{H,0}; its complement is the null space of G.
        let g = sprime_basis.transpose() * &z;
        let (vals, vecs) = linalg::jacobi_eigen(&(g.transpose() * &g))?;
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < 0.5).collect();
        let null = DMatrix::from_fn(z.ncols(), keep.len(), |r, c| vecs[(r, keep[c])]);
        z * null
    };
    if w.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    if rp.one_leaves().is_empty() {
        return Ok(0.0);
    }
    let gram = linalg::row_gram(&w, rp.one_leaves());
    let (vals, _) = linalg::jacobi_eigen(&gram)?;
    Ok(vals[0].max(0.0))
}

/// Outcome of checking a pair of reflections `U_i = I - 2 P_{S_i}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AngleCheck {
    /// `min ||P_{S2^⊥} ψ||^2` over unit `ψ ∈ S1`.
    pub epsilon: f64,
    /// Smallest principal angle between `S1` and `S2`.
    pub smallest_angle: f64,
    /// Smallest nonzero `|θ|` among eigenphases of `U2 U1`.
    pub min_phase: f64,
}

impl AngleCheck {
    /// `min_phase >= √ε` up to `1e-8`.
    pub fn holds(&self) -> bool {
        self.min_phase >= self.epsilon.sqrt() - 1e-8
    }
}

/// `I - 2 Q Q^T` for orthonormal columns `Q`.
pub fn reflection(q: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(q.nrows(), q.nrows()) - q * q.transpose() * 2.0
}

pub fn two_reflection_angle_check(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<AngleCheck> {
    if s1.nrows() != s2.nrows() {
        return Err(Error::Dimension("subspaces live in different spaces".into()));
    }
    if s1.ncols() == 0 {
        return Err(Error::Dimension("S1 must be non-trivial".into()));
    }
    let cross = s2.transpose() * s1;
    let m = s1.transpose() * s1 - cross.transpose() * &cross;
    let (vals, _) = linalg::jacobi_eigen(&m)?;
    let epsilon = vals[0].clamp(0.0, 1.0);
    let smallest_angle = epsilon.sqrt().asin();
    if smallest_angle <= 1e-8 {
        return Err(Error::SubspacesIntersect(smallest_angle));
    }
    let u = reflection(s2) * reflection(s1);
    let min_phase = linalg::orthogonal_eigen(&u)?
        .iter()
        .map(|p| p.theta.abs())
        .filter(|t| *t > PHASE_CLUSTER_TOLERANCE)
        .fold(f64::INFINITY, f64::min);
    Ok(AngleCheck {
        epsilon,
        smallest_angle,
        min_phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::FormulaTree;
    use crate::tree::{attach_tail, build_hamiltonian, Mode};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn setup(k: u32) -> (AugmentedTree, SymmetricOperator, EigenDecomposition) {
        let t = FormulaTree::balanced(k, 1024).unwrap().normalize_even_depth();
        let at = attach_tail(&t, Mode::Balanced, None).unwrap();
        let h = build_hamiltonian(&at);
        let ed = eigendecompose(&h).unwrap();
        (at, h, ed)
    }

    #[test]
    fn two_by_two_has_no_kernel() {
        let h = SymmetricOperator::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let ed = eigendecompose(&h).unwrap();
        assert!((ed.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((ed.eigenvalues()[1] - 1.0).abs() < 1e-14);
        assert_eq!(ed.zero_space().ncols(), 0);
    }

    #[test]
    fn path_kernel() {
        let h = SymmetricOperator::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let ed = eigendecompose(&h).unwrap();
        let z = ed.zero_space();
        assert_eq!(z.ncols(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z[(0, 0)].abs() - s).abs() < 1e-14);
        assert!(z[(1, 0)].abs() < 1e-14);
        assert!((z[(0, 0)] + z[(2, 0)]).abs() < 1e-14);
    }

    #[test]
    fn residual_contract_holds() {
        let (_, h, ed) = setup(3);
        assert!(ed.max_residual(&h) <= 1e-10 * ed.spectral_norm());
        let n = ed.dim();
        let ortho = ed.eigenvectors().transpose() * ed.eigenvectors() - DMatrix::identity(n, n);
        assert!(ortho.amax() <= 1e-12);
    }

    #[test]
    fn kernel_vanishes_on_odd_levels() {
        for k in 0..=3 {
            let (at, _, ed) = setup(k);
            let z = ed.zero_space();
            for c in 0..z.ncols() {
                for v in 0..at.dim() {
                    if at.vertex(v).is_odd() {
                        assert!(z[(v, c)].abs() <= 1e-9, "k={k} vertex {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn reflections_are_involutions() {
        let (at, _, ed) = setup(2);
        for a in Assignment::all(4) {
            let rp = build_reflections(&ed, &at, &a).unwrap();
            let n = rp.dim();
            assert!((rp.u1() * rp.u1() - DMatrix::identity(n, n)).amax() < 1e-10);
            assert!((rp.u2() * rp.u2() - DMatrix::identity(n, n)).amax() < 1e-10);
            assert!((rp.psi_start_normalized().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_reflection_marks_one_leaves() {
        let (at, _, ed) = setup(2);
        let rp = build_reflections(&ed, &at, &Assignment::zeros(4)).unwrap();
        assert!(rp.u2_diagonal().iter().all(|&s| s == 1.0));
        let rp = build_reflections(&ed, &at, &Assignment::parse("1000").unwrap()).unwrap();
        let flipped: Vec<usize> = (0..rp.dim()).filter(|&i| rp.u2_diagonal()[i] < 0.0).collect();
        assert_eq!(flipped.len(), 1);
        assert_eq!(at.vertex(flipped[0]).leaf, Some((1, false)));
    }

    #[test]
    fn normalized_copies_flip_together() {
        // N(x1,x2) normalizes to N(N(~x1,~x1),N(~x2,~x2)): x1 = 1 leaves the
        // ~x1 copies at 0 and x2 = 0 puts both ~x2 copies into S_{x,1}.
        let (at, _, ed) = setup(1);
        let rp = build_reflections(&ed, &at, &Assignment::parse("10").unwrap()).unwrap();
        let flipped: Vec<_> = rp.one_leaves().iter().map(|&v| at.vertex(v).leaf).collect();
        assert_eq!(flipped, vec![Some((2, true)), Some((2, true))]);
    }

    #[test]
    fn start_state_alternates_on_even_tail() {
        let (at, _, _) = setup(2);
        let psi = start_state(&at);
        assert_eq!(psi[0], 1.0);
        assert_eq!(psi[2], -1.0);
        assert_eq!(psi[4], 1.0);
        assert_eq!(psi[1], 0.0);
        assert_eq!(psi.iter().filter(|x| **x != 0.0).count(), 3);
    }

    #[test]
    fn theorem_zero_case_has_fixed_vector() {
        let (at, _, ed) = setup(1);
        let rp = build_reflections(&ed, &at, &Assignment::parse("11").unwrap()).unwrap();
        let ps = product_spectrum(&rp).unwrap();
        assert!((ps.total_overlap() - 1.0).abs() < 1e-10);
        assert!(ps.phase_zero_overlap(1e-9) >= 0.2);
        assert!(min_relevant_phase(&ps, DEFAULT_OVERLAP_FLOOR).unwrap() <= 1e-9);
    }

    #[test]
    fn theorem_one_case_has_gap() {
        let (at, _, ed) = setup(1);
        let n = at.leaf_count() as f64;
        let rp = build_reflections(&ed, &at, &Assignment::parse("00").unwrap()).unwrap();
        let ps = product_spectrum(&rp).unwrap();
        for e in ps.entries() {
            if e.overlap2 > 1e-16 {
                assert!(e.theta.abs() >= 1.0 / (20.0 * n).sqrt(), "{e:?}");
            }
        }
    }

    #[test]
    fn identity_product_on_one_dimension() {
        let rp = ReflectionPair::from_parts(
            DMatrix::identity(1, 1),
            vec![1.0],
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let ps = product_spectrum(&rp).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps.entries()[0].theta, 0.0);
        assert_eq!(min_relevant_phase(&ps, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn spectrum_entries_are_eigenvectors() {
        let (at, _, ed) = setup(2);
        let rp = build_reflections(&ed, &at, &Assignment::parse("0110").unwrap()).unwrap();
        let u = rp.product();
        let n = u.nrows();
        assert!((u.transpose() * &u - DMatrix::identity(n, n)).amax() < 1e-10);
        let ps = product_spectrum(&rp).unwrap();
        for e in ps.entries() {
            let pair = linalg::UnitaryEigenpair {
                theta: e.theta,
                vector: e.vector.clone(),
            };
            assert!(linalg::unitary_residual(&u, &pair) < 1e-9);
        }
        // real product: phases come in conjugate pairs
        let mut plus: Vec<f64> = ps.clusters().iter().filter(|c| c.theta.abs() < PI - 1e-9).map(|c| c.theta).collect();
        let mut minus: Vec<f64> = plus.iter().map(|t| -t).collect();
        plus.sort_by(f64::total_cmp);
        minus.sort_by(f64::total_cmp);
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn no_relevant_phase_is_an_error() {
        let (at, _, ed) = setup(0);
        let rp = build_reflections(&ed, &at, &Assignment::parse("1").unwrap()).unwrap();
        let ps = product_spectrum(&rp).unwrap();
        assert!(matches!(min_relevant_phase(&ps, 2.0), Err(Error::NoRelevantPhase(_))));
    }

    #[test]
    fn projection_gap_empty_oracle() {
        let (at, _, ed) = setup(2);
        let rp = build_reflections(&ed, &at, &Assignment::zeros(4)).unwrap();
        let none = DMatrix::zeros(at.dim(), 0);
        assert_eq!(projection_gap(&ed, &rp, &none).unwrap(), 0.0);
    }

    #[test]
    fn angle_check_forty_five_degrees() {
        let s1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s2 = DMatrix::from_column_slice(2, 1, &[h, h]);
        let check = two_reflection_angle_check(&s1, &s2).unwrap();
        assert!((check.epsilon - 0.5).abs() < 1e-15);
        assert!((check.min_phase - FRAC_PI_2).abs() < 1e-12);
        assert!(check.holds());
    }

    #[test]
    fn angle_check_orthogonal_subspaces() {
        let s1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let check = two_reflection_angle_check(&s1, &s2).unwrap();
        assert_eq!(check.epsilon, 1.0);
        assert!((check.min_phase - PI).abs() < 1e-12);
        assert!(check.holds());
    }

    #[test]
    fn angle_check_rejects_intersections() {
        let s1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let s2 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(two_reflection_angle_check(&s1, &s2), Err(Error::SubspacesIntersect(_))));
    }
}
