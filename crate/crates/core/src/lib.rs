//! Exact simulation of the discrete-query quantum walk that evaluates
//! read-once NAND formulas, with numeric checks of its spectral claims.
//!
//! The pipeline: parse a formula, push leaves to even depth, hang a tail off
//! the root, build the weighted adjacency operator `H`, reflect about its
//! 0-eigenspace and through the oracle, and estimate the phases of the
//! product on the start state.
//!
//! ```
//! use nandwalk::{attach_tail, decide, Assignment, FormulaTree, Mode, QpeConfig};
//!
//! let f = FormulaTree::parse("N(x1,x2)").unwrap().normalize_even_depth();
//! let at = attach_tail(&f, Mode::Balanced, None).unwrap();
//! let a = Assignment::parse("11").unwrap();
//! let d = decide(&at, &a, &QpeConfig::for_tree(&at, 0)).unwrap();
//! assert!(!d.decision);
//! ```

pub mod certificates;
pub mod error;
pub mod formula;
pub mod linalg;
pub mod qpe;
pub mod spectral;
pub mod tree;
pub mod verify;

pub use certificates::{
    build_psi_0, build_psi_c, build_psi_c1c2, enumerate_certificates, first_certificate, sprime_basis,
    CertificateExport, CertificateState, ExtendedCertificate, StateKind,
};
pub use error::{Error, Result};
pub use formula::{parse_formula, Assignment, FormulaTree, Node, NodeId};
pub use qpe::{decide, run_qpe, scaling_run, Decision, QpeConfig, QpeOutcome};
pub use spectral::{
    build_reflections, eigendecompose, min_relevant_phase, product_spectrum, projection_gap,
    two_reflection_angle_check, EigenDecomposition, ProductSpectrum, ReflectionPair,
};
pub use tree::{attach_tail, build_hamiltonian, AugmentedTree, Mode, SymmetricOperator};
pub use verify::{bounds_table, run_suite, RecursionBounds, SuiteReport};
