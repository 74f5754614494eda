use nalgebra::DMatrix;
use proptest::prelude::*;

use nandwalk::spectral::{self, two_reflection_angle_check};
use nandwalk::{
    attach_tail, build_hamiltonian, build_reflections, eigendecompose, product_spectrum, sprime_basis, Assignment,
    FormulaTree, Mode,
};

/// Formula text over `x1..=xn` with shape chosen by `splits` and leaf labels
/// permuted by `perm`.
fn formula_text(n: usize, splits: &[usize], perm: &[usize]) -> String {
    fn go(n: usize, splits: &[usize], i: &mut usize, next: &mut usize, perm: &[usize], out: &mut String) {
        if n == 1 {
            out.push_str(&format!("x{}", perm[*next] + 1));
            *next += 1;
            return;
        }
        let s = 1 + splits[*i % splits.len()] % (n - 1);
        *i += 1;
        out.push_str("N(");
        go(s, splits, i, next, perm, out);
        out.push(',');
        go(n - s, splits, i, next, perm, out);
        out.push(')');
    }
    let mut out = String::new();
    go(n, splits, &mut 0, &mut 0, perm, &mut out);
    out
}

fn instance() -> impl Strategy<Value = (usize, Vec<usize>, Vec<bool>)> {
    (1usize..=7).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(0usize..64, 1..8),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
}

fn phases(text: &str, a: &Assignment) -> Vec<(f64, f64)> {
    let t = FormulaTree::parse(text).unwrap().normalize_even_depth();
    let at = attach_tail(&t, Mode::General, None).unwrap();
    let ed = eigendecompose(&build_hamiltonian(&at)).unwrap();
    let rp = build_reflections(&ed, &at, a).unwrap();
    let mut rows: Vec<(f64, f64)> = product_spectrum(&rp)
        .unwrap()
        .clusters()
        .iter()
        .filter(|c| c.overlap2 > 1e-9)
        .map(|c| (c.theta, c.overlap2))
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_preserves_value((n, splits, bits) in instance()) {
        let perm: Vec<usize> = (0..n).collect();
        let t = FormulaTree::parse(&formula_text(n, &splits, &perm)).unwrap();
        let a = Assignment::new(bits);
        let norm = t.normalize_even_depth();
        prop_assert!(norm.is_normalized());
        prop_assert_eq!(t.evaluate(&a).unwrap(), norm.evaluate(&a).unwrap());
        prop_assert_eq!(FormulaTree::parse(&t.to_string()).unwrap().to_string(), t.to_string());
    }

    #[test]
    fn spectrum_ignores_variable_labels((n, splits, bits) in instance(), rot in 0usize..7) {
        let ident: Vec<usize> = (0..n).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let a = Assignment::new(bits.clone());
        // leaf i reads x_{perm[i]+1}, so move bit i there
        let mut moved = vec![false; n];
        for i in 0..n {
            moved[perm[i]] = bits[i];
        }
        let base = phases(&formula_text(n, &splits, &ident), &a);
        let relabeled = phases(&formula_text(n, &splits, &perm), &Assignment::new(moved));
        prop_assert_eq!(base.len(), relabeled.len());
        for (x, y) in base.iter().zip(&relabeled) {
            prop_assert!((x.0 - y.0).abs() < 1e-8 && (x.1 - y.1).abs() < 1e-8, "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn kernel_is_odd_free_and_sprime_is_fixed((n, splits, bits) in instance()) {
        let perm: Vec<usize> = (0..n).collect();
        let t = FormulaTree::parse(&formula_text(n, &splits, &perm)).unwrap().normalize_even_depth();
        let at = attach_tail(&t, Mode::General, None).unwrap();
        let h = build_hamiltonian(&at);
        let ed = eigendecompose(&h).unwrap();
        prop_assert!(nandwalk::verify::odd_leak(&at, &ed) <= 1e-9);
        let a = Assignment::new(bits);
        let basis = sprime_basis(&at, &a).unwrap();
        let start = spectral::start_state(&at);
        let ones = at.one_leaves(&a).unwrap();
        for c in 0..basis.ncols() {
            let b = basis.column(c);
            prop_assert!((h.matrix() * b).amax() <= 1e-10);
            prop_assert!(b.dot(&start).abs() <= 1e-10);
            prop_assert!(ones.iter().all(|&v| b[v].abs() <= 1e-10));
        }
    }

    #[test]
    fn two_reflections_phase_bound(seed in any::<u64>()) {
        let mut rng = nandwalk::qpe::run_rng(seed, 0);
        let (s1, s2) = nandwalk::verify::random_subspace_pair(&mut rng);
        let check = two_reflection_angle_check(&s1, &s2).unwrap();
        prop_assert!(check.holds(), "{:?}", check);
    }
}

#[test]
fn formula_generator_shapes() {
    assert_eq!(formula_text(1, &[0], &[0]), "x1");
    assert_eq!(formula_text(3, &[0, 0], &[2, 0, 1]), "N(x3,N(x1,x2))");
}

#[test]
fn angle_check_orthogonal_planes() {
    let s1 = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let s2 = DMatrix::from_column_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let check = two_reflection_angle_check(&s1, &s2).unwrap();
    assert_eq!(check.epsilon, 1.0);
    assert!((check.min_phase - std::f64::consts::PI).abs() < 1e-12);
}
