use nalgebra::Vector3;
use proptest::prelude::*;
use s6holo::mesh::{build_mesh, icosphere};
use s6holo::surface::*;
use s6holo::Error;
use std::f64::consts::PI;

fn sphere_point() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("near origin", |a| Vector3::from(*a).norm() > 0.2)
        .prop_map(|a| Vector3::from(a).normalize())
}

fn forms(curve: &LinearCurve, x: &Vector3<f64>) -> FundamentalForms {
    fundamental_forms(curve, &Chart::gnomonic(x), [0.0, 0.0]).unwrap()
}

#[test]
fn icosphere_is_a_closed_sphere() {
    for level in 0..4 {
        let (v, t) = icosphere(level);
        assert_eq!(v.len(), 10 * 4usize.pow(level as u32) + 2);
        assert_eq!(t.len(), 20 * 4usize.pow(level as u32));
        assert!(v.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
    }
    let m = build_mesh(&LinearCurve::geodesic_s2(), 2).unwrap();
    assert_eq!(m.euler_characteristic(), 2);
    assert_eq!(m.edges().len(), 3 * m.triangles.len() / 2);
}

#[test]
fn vertex_areas_partition_the_area() {
    let m = build_mesh(&LinearCurve::boruvka(), 2).unwrap();
    let lumped: f64 = m.vertex_area.iter().sum();
    assert!((lumped - m.area()).abs() <= 1e-10 * m.area());
}

#[test]
fn geodesic_area_converges_to_four_pi() {
    let c = LinearCurve::geodesic_s2();
    let errs: Vec<f64> = (2..5).map(|l| (build_mesh(&c, l).unwrap().area() - 4.0 * PI).abs()).collect();
    assert!(errs[2] < errs[1] && errs[1] < errs[0]);
    assert!(errs[2] / (4.0 * PI) < 1e-5);
}

#[test]
fn boruvka_area_is_twenty_four_pi() {
    let a = build_mesh(&LinearCurve::boruvka(), 3).unwrap().area();
    assert!((a - 24.0 * PI).abs() / (24.0 * PI) < 1e-4, "area {a}");
}

#[test]
fn named_curves_and_files() {
    assert!(curve_by_name("boruvka").is_ok());
    assert!(matches!(curve_by_name("veronese").err(), Some(Error::UnknownCurve(_))));
    let def = CurveDef::named("boruvka-raw").then_rotate(&BORUVKA_ALIGNMENT.rotation);
    let back = CurveDef::parse(&def.to_text()).unwrap();
    assert_eq!(back.base, "boruvka-raw");
    let diff = (back.rotation.unwrap() - BORUVKA_ALIGNMENT.rotation).abs().max();
    assert!(diff < 1e-15);
    assert!(CurveDef::parse("base = boruvka\nrotation = 1 2 3\n").is_err());
    assert!(CurveDef::parse("# nothing\n").is_err());
}

#[test]
fn out_of_domain_parameters_are_rejected() {
    let chart = Chart::gnomonic(&Vector3::new(0.0, 0.0, 1.0));
    let r = chart.domain_radius();
    assert!(matches!(chart.point([2.0 * r, 0.0], 1), Err(Error::OutOfDomain(_))));
}

#[test]
fn curvature_needs_third_order_jet() {
    let c = LinearCurve::boruvka();
    let (_, jet) = local_jet(&c, &Vector3::new(0.0, 0.6, 0.8), 2).unwrap();
    assert!(matches!(intrinsic_curvature(&jet), Err(Error::OrderTooHigh { .. })));
}

#[test]
fn raw_harmonic_map_is_not_holomorphic_until_aligned() {
    let x = Vector3::new(0.3, -0.5, 0.7).normalize();
    let chart = Chart::gnomonic(&x);
    let raw = holomorphicity_residual(&LinearCurve::boruvka_raw(), &chart, [0.0, 0.0]).unwrap();
    let aligned = holomorphicity_residual(&LinearCurve::boruvka(), &chart, [0.0, 0.0]).unwrap();
    assert!(raw > 1e-2, "raw {raw}");
    assert!(aligned < 1e-12, "aligned {aligned}");
    assert!(BORUVKA_ALIGNMENT.table_residual < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boruvka_has_constant_curvature_one_sixth(x in sphere_point()) {
        let f = forms(&LinearCurve::boruvka(), &x);
        prop_assert!((f.k - 1.0 / 6.0).abs() <= 1e-10);
    }

    #[test]
    fn boruvka_is_minimal_and_satisfies_gauss(x in sphere_point()) {
        let f = forms(&LinearCurve::boruvka(), &x);
        prop_assert!(f.mean_curvature <= 1e-10);
        prop_assert!(f.gauss_residual <= 1e-10);
    }

    #[test]
    fn extrinsic_and_intrinsic_curvature_agree(x in sphere_point()) {
        let c = LinearCurve::boruvka();
        let (chart, jet) = local_jet(&c, &x, 3).unwrap();
        let g = PointGeometry::at(&c, &chart, [0.0, 0.0]).unwrap();
        prop_assert!((g.gauss_curvature_extrinsic() - intrinsic_curvature(&jet).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn geodesic_sphere_is_totally_geodesic(x in sphere_point()) {
        let f = forms(&LinearCurve::geodesic_s2(), &x);
        prop_assert!((f.k - 1.0).abs() <= 1e-12);
        prop_assert!(f.h.iter().flatten().all(|h| h.abs() <= 1e-12));
    }

    #[test]
    fn tangent_planes_are_complex_lines_after_alignment(x in sphere_point()) {
        let c = LinearCurve::boruvka();
        let (chart, _) = local_jet(&c, &x, 1).unwrap();
        prop_assert!(holomorphicity_residual(&c, &chart, [0.0, 0.0]).unwrap() <= 1e-12);
    }

    #[test]
    fn rotated_curves_keep_intrinsic_geometry(x in sphere_point(), seed in 0u64..1000) {
        let r = s6holo::align::random_rotation(&mut s6holo::rng(seed));
        let c = LinearCurve::boruvka().rotated(&r, "moved");
        let f = forms(&c, &x);
        prop_assert!((f.k - 1.0 / 6.0).abs() <= 1e-10);
    }
}
