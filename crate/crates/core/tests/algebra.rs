use proptest::prelude::*;
use s6holo::octonion::*;
use s6holo::Error;

fn vec7() -> impl Strategy<Value = ImOct> {
    prop::array::uniform7(-2.0f64..2.0).prop_map(|a| ImOct::from_column_slice(&a))
}

/// A unit base point with a tangent vector, built from two free vectors.
fn tangent_pair() -> impl Strategy<Value = (ImOct, ImOct)> {
    (vec7(), vec7()).prop_filter_map("degenerate", |(p, v)| {
        let n = p.norm();
        if n < 0.1 {
            return None;
        }
        let p = p / n;
        let t = project_tangent(&p, &v);
        (t.norm() > 1e-3).then_some((p, t))
    })
}

#[test]
fn table_oracles() {
    let e = basis;
    assert_eq!(cross(&e(1), &e(2)), e(3));
    assert_eq!(cross(&e(2), &e(3)), e(1));
    assert_eq!(cross(&e(3), &e(1)), e(2));
    assert_eq!(cross(&e(2), &e(1)), -e(3));
    assert_eq!(cross(&e(1), &e(4)), e(5));
    assert_eq!(cross(&e(2), &e(4)), e(6));
    assert_eq!(cross(&e(3), &e(7)), e(4));
    assert_eq!(assoc_form(&e(1), &e(2), &e(3)), 1.0);
    assert_eq!(assoc_form(&e(1), &e(2), &e(4)), 0.0);
    // Hodge dual of e123 with vol = e1...e7
    assert_eq!(coassoc_form(&e(4), &e(5), &e(6), &e(7)), 1.0);
    assert_eq!(coassoc_form(&e(1), &e(2), &e(3), &e(4)), 0.0);
}

#[test]
fn every_pair_lies_on_one_line() {
    for i in 1..=7 {
        for j in 1..=7 {
            let c = cross(&basis(i), &basis(j));
            if i == j {
                assert_eq!(c, ImOct::zeros());
            } else {
                assert_eq!(c.iter().filter(|x| x.abs() == 1.0).count(), 1, "e{i} x e{j}");
                assert_eq!(c.abs().sum(), 1.0);
            }
        }
    }
}

#[test]
fn malformed_table_is_rejected() {
    let bad = [[1, 2, 3], [1, 2, 5], [1, 6, 7], [2, 4, 6], [2, 7, 5], [3, 7, 4], [3, 6, 5]];
    assert!(matches!(G2Table::from_lines(bad), Err(Error::InvalidTable(_))));
    assert!(G2Table::from_lines(*G2Table::standard().lines()).is_ok());
}

#[test]
fn almost_complex_structure_at_e1() {
    let p = basis(1);
    let g = G2::standard();
    assert_eq!(g.almost_complex(&p, &basis(2)).unwrap(), basis(3));
    assert_eq!(g.almost_complex(&p, &basis(4)).unwrap(), basis(5));
    assert!(matches!(g.almost_complex(&p, &basis(1)), Err(Error::NotTangent(_))));
    assert!(matches!(g.almost_complex(&(p * 2.0), &basis(2)), Err(Error::NotTangent(_))));
}

#[test]
fn tangent_vector_type_checks_tangency() {
    assert!(TangentVectorS6::new(basis(1), basis(2)).is_ok());
    assert!(TangentVectorS6::new(basis(1), basis(1) + basis(2)).is_err());
}

#[test]
fn algebra_report_meets_tolerance() {
    let r = algebra_invariants(G2::standard(), 1000, 3);
    assert_eq!(r.samples, 1000);
    assert!(r.max_residual() <= 1e-10, "{r:?}");
}

#[test]
fn nearly_kahler_differences_converge_at_second_order() {
    let (a, b, ratio) = nearly_kahler_convergence(50, 2e-2, 1).unwrap();
    assert!(b.max_residual() < a.max_residual());
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    assert!(verify_nearly_kahler(5, 0.5, 1).is_err());
}

proptest! {
    #[test]
    fn cross_is_antisymmetric(x in vec7(), y in vec7()) {
        prop_assert!((cross(&x, &y) + cross(&y, &x)).norm() <= 1e-12);
    }

    #[test]
    fn cross_satisfies_norm_identity(x in vec7(), y in vec7()) {
        let lhs = cross(&x, &y).norm_squared();
        let rhs = x.norm_squared() * y.norm_squared() - x.dot(&y).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn double_cross_expands(x in vec7(), y in vec7()) {
        // x x (x x y) = -|x|^2 y + <x, y> x
        let lhs = cross(&x, &cross(&x, &y));
        let rhs = -y * x.norm_squared() + x * x.dot(&y);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn associative_form_is_alternating(x in vec7(), y in vec7(), z in vec7()) {
        let a = assoc_form(&x, &y, &z);
        prop_assert!((a + assoc_form(&y, &x, &z)).abs() <= 1e-10);
        prop_assert!((a - assoc_form(&y, &z, &x)).abs() <= 1e-10);
    }

    #[test]
    fn j_squares_to_minus_identity((p, v) in tangent_pair()) {
        let g = G2::standard();
        let jv = g.almost_complex(&p, &v).unwrap();
        prop_assert!(jv.dot(&p).abs() <= 1e-12);
        prop_assert!((jv.norm() - v.norm()).abs() <= 1e-12);
        let jjv = g.almost_complex(&p, &jv).unwrap();
        prop_assert!((jjv + v).norm() <= 1e-12);
    }

    #[test]
    fn kahler_form_is_compatible((p, v) in tangent_pair(), w in vec7()) {
        let g = G2::standard();
        let w = project_tangent(&p, &w);
        let jv = g.almost_complex(&p, &v).unwrap();
        let jw = g.almost_complex(&p, &w).unwrap();
        prop_assert!((g.omega(&p, &v, &w) - jv.dot(&w)).abs() <= 1e-10);
        prop_assert!((g.omega(&p, &jv, &jw) - g.omega(&p, &v, &w)).abs() <= 1e-10);
    }

    #[test]
    fn upsilon_is_complex_linear((p, a) in tangent_pair(), b in vec7(), c in vec7()) {
        // Upsilon is (3,0): Upsilon(J a, b, c) = i Upsilon(a, b, c)
        let g = G2::standard();
        let (b, c) = (project_tangent(&p, &b), project_tangent(&p, &c));
        let ja = g.almost_complex(&p, &a).unwrap();
        let lhs = g.upsilon(&p, &ja, &b, &c);
        let rhs = g.upsilon(&p, &a, &b, &c) * num_complex::Complex64::i();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }
}
