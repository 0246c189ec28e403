use proptest::prelude::*;
use s6holo::eigen::{cluster, residuals};
use s6holo::jacobi::*;
use s6holo::mesh::build_mesh;
use s6holo::surface::LinearCurve;

#[test]
fn geodesic_sphere_spectrum_at_level_three() {
    let c = LinearCurve::geodesic_s2();
    let m = build_mesh(&c, 3).unwrap();
    let asm = assemble_jacobi(&c, &m).unwrap();
    let (r, pairs) = solve_spectrum(&asm, 40, CLUSTER_TOL).unwrap();
    // l(l+1) - 2 with multiplicity 4(2l+1)
    for (l, cl) in r.clusters.iter().take(3).enumerate() {
        let want = (l * (l + 1)) as f64 - 2.0;
        assert_eq!(cl.multiplicity, 4 * (2 * l + 1), "l = {l}");
        assert!((cl.center - want).abs() < 0.1, "l = {l}: {}", cl.center);
    }
    assert_eq!((r.m1, r.nullity_count), (4, 12));
    assert!(residuals(&asm.jacobi(), &asm.mass, &pairs).iter().all(|x| *x < 1e-6));
}

#[test]
fn boruvka_lowest_cluster_and_operator_checks() {
    let c = LinearCurve::boruvka();
    let m = build_mesh(&c, 3).unwrap();
    let asm = assemble_jacobi(&c, &m).unwrap();
    assert!(asm.stiffness.symmetry_error() < 1e-12);
    assert!(asm.potential.symmetry_error() < 1e-12);
    assert!(asm.b_dual_discrepancy().unwrap() < 1e-8);

    let (r, _) = solve_spectrum(&asm, 30, CLUSTER_TOL).unwrap();
    assert_eq!(r.m1, 24);
    assert!((r.lambda1_value + 2.0).abs() < 0.1);
    assert!(r.clusters[0].gap.unwrap() >= CLUSTER_GAP);
    let (dim, _) = dhat_kernel_dim(&asm, 0.1).unwrap();
    assert_eq!(dim, 24);

    let mut rng = s6holo::rng(2);
    for _ in 0..3 {
        let eta = random_smooth_field(&m, asm.bases.clone(), 3, &mut rng);
        assert!(eta.max_tangency(&m) < 1e-12);
        let (_, _, rel) = second_variation_crosscheck(&asm, &eta).unwrap();
        assert!(rel < 1e-3, "rel {rel}");
        // min-max: no Rayleigh quotient falls below the lowest eigenvalue
        let x = &eta.coeffs;
        let q = (asm.stiffness.form(x, x) - asm.potential.form(x, x)) / asm.mass.form(x, x);
        assert!(q >= r.lambda1_value - 1e-9);
    }
}

#[test]
fn raw_harmonic_map_has_no_normal_structure() {
    let c = LinearCurve::boruvka_raw();
    let m = build_mesh(&c, 1).unwrap();
    if let Ok(asm) = assemble_jacobi(&c, &m) {
        assert!(dhat_kernel_dim(&asm, 0.1).is_err());
    }
}

#[test]
fn bad_requests_are_rejected() {
    let c = LinearCurve::geodesic_s2();
    let m = build_mesh(&c, 0).unwrap();
    let asm = assemble_jacobi(&c, &m).unwrap();
    assert!(solve_spectrum(&asm, asm.dim() + 1, CLUSTER_TOL).is_err());
    assert!(solve_spectrum(&asm, 0, CLUSTER_TOL).is_err());
    assert!(solve_spectrum(&asm, 4, 0.0).is_err());
}

proptest! {
    #[test]
    fn clusters_partition_sorted_values(mut v in prop::collection::vec(-5.0f64..5.0, 1..60), tol in 0.01f64..1.0) {
        v.sort_by(f64::total_cmp);
        let cs = cluster(&v, tol);
        prop_assert_eq!(cs.iter().map(|c| c.multiplicity).sum::<usize>(), v.len());
        for w in cs.windows(2) {
            prop_assert_eq!(w[0].gap, Some(w[1].min - w[0].max));
            prop_assert!(w[0].gap.unwrap() > tol);
        }
        for c in &cs {
            prop_assert!(c.min <= c.center && c.center <= c.max);
        }
        prop_assert!(cs.last().unwrap().gap.is_none());
    }

    #[test]
    fn spectrum_report_counts_are_consistent(mut v in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        v.sort_by(f64::total_cmp);
        let r = spectrum_from_values(&v, CLUSTER_TOL, 0.0);
        prop_assert_eq!(r.m1, r.clusters[0].multiplicity);
        prop_assert_eq!(r.assignment.len(), v.len());
        prop_assert_eq!(r.nullity_count, v.iter().filter(|x| x.abs() < NULL_WINDOW).count());
    }
}
