use std::sync::Arc;

use dimer_nesting::determinants::*;
use dimer_nesting::kasteleyn::{MonodromyRep, Weight};
use dimer_nesting::lattice::{make_cut, make_cut_routed, CutPath, CutRoute, CutTarget, LatticeDomain, Site};
use dimer_nesting::oracle::{enumerate_covers, exact_expectation, EnumerationTable};

fn block(w: i32, h: i32) -> Arc<LatticeDomain> {
    Arc::new(LatticeDomain::block(1.0, w, h, Site::new(0, 0)).unwrap())
}

fn down(d: &LatticeDomain, f: Site) -> CutPath {
    make_cut(d, f, CutTarget::Boundary, &[]).unwrap()
}

fn exact_cos_power(table: &EnumerationTable, f: Site, s: f64) -> f64 {
    let c = (2.0 * std::f64::consts::PI * s).cos();
    exact_expectation(table, |cfg| c.powi(cfg.nesting_number(&[f]).unwrap() as i32))
}

fn exact_pair_moment(table: &EnumerationTable, x: Site, y: Site, j: i32) -> f64 {
    exact_expectation(table, |cfg| (cfg.nesting_number(&[x, y]).unwrap() as f64).powi(j))
}

#[test]
fn trivial_representation_gives_one() {
    let d = block(4, 4);
    let inv = DenseInverse::new(d.clone()).unwrap();
    let v = loop_weight_expectation(&inv, &MonodromyRep::trivial()).unwrap();
    assert!((v - 1.0).norm() < 1e-14);
    let v = loop_weight_expectation(&inv, &MonodromyRep::scalar(down(&d, Site::new(1, 1)), 0.0)).unwrap();
    assert!((v - 1.0).norm() < 1e-12);
}

#[test]
fn laplace_transform_matches_enumeration() {
    for (w, h) in [(4, 4), (6, 4)] {
        let d = block(w, h);
        let table = enumerate_covers(&d).unwrap();
        let inv = DenseInverse::new(d.clone()).unwrap();
        for f in [Site::new(1, 1), Site::new(2, 1), Site::new(1, 2)] {
            let cut = down(&d, f);
            for s in [0.05, 0.13, 0.25] {
                let v = laplace_transform_n(&inv, &cut, s).unwrap();
                let exact = exact_cos_power(&table, f, s);
                assert!((v.value - exact).abs() < 1e-8, "{w}x{h} {f:?} s={s}: {} vs {exact}", v.value);
                assert!(v.imag_residue.abs() < 1e-10);
                let diag = loop_weight_expectation(&inv, &MonodromyRep::trivial().with(cut.clone(), Weight::diagonal_phase(s))).unwrap();
                assert!((diag.re - exact).abs() < 1e-8 && diag.im.abs() < 1e-10);
            }
        }
    }
    assert!(laplace_transform_n(&DenseInverse::new(block(4, 4)).unwrap(), &CutPath::straight_down(Site::new(1, 1), 1), 0.3).is_err());
}

#[test]
fn cut_supported_determinant_equals_full_ratio() {
    let d = block(6, 4);
    let inv = DenseInverse::new(d.clone()).unwrap();
    let l1 = down(&d, Site::new(1, 2));
    let l2 = make_cut(&d, Site::new(3, 1), CutTarget::Boundary, &[l1.clone()]).unwrap();
    let reps = [
        MonodromyRep::scalar(l1.clone(), 0.17),
        MonodromyRep::scalar(l1.clone(), 0.1).with(l2.clone(), Weight::phase(-0.07)),
        unipotent_pair(&l1, &l2, 0.4),
        MonodromyRep::trivial().with(l1.clone(), Weight::diagonal_phase(0.2)),
    ];
    for rep in &reps {
        let a = loop_weight_expectation(&inv, rep).unwrap();
        let b = full_determinant_ratio(&d, rep).unwrap();
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
    }
    let m = cut_supported_matrix(&inv, &reps[2]).unwrap();
    assert_eq!(m.block, 2);
    assert_eq!(m.dim(), 2 * m.whites.len());
}

#[test]
fn route_invariance() {
    let d = block(6, 4);
    let inv = DenseInverse::new(d.clone()).unwrap();
    let f = Site::new(2, 2);
    let a = down(&d, f);
    for k in [-2, 1, 3] {
        let b = make_cut_routed(&d, f, CutTarget::Boundary, CutRoute::SidewaysThenDown(k), &[]).unwrap();
        assert_ne!(a, b);
        for s in [0.1, 0.22] {
            let va = laplace_transform_n(&inv, &a, s).unwrap().value;
            let vb = laplace_transform_n(&inv, &b, s).unwrap().value;
            assert!((va - vb).abs() < 1e-10, "k={k} s={s}");
        }
    }
}

#[test]
fn monotone_in_s_and_in_unit_interval() {
    let d = block(6, 4);
    let inv = DenseInverse::new(d.clone()).unwrap();
    let cut = down(&d, Site::new(2, 1));
    let vals: Vec<f64> = (0..=10).map(|k| laplace_transform_n(&inv, &cut, 0.025 * k as f64).unwrap().value).collect();
    assert!((vals[0] - 1.0).abs() < 1e-12);
    assert!(vals.windows(2).all(|p| p[1] < p[0]));
    assert!(vals.iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-12));
}

#[test]
fn pair_moments_match_enumeration() {
    let d = block(6, 4);
    let table = enumerate_covers(&d).unwrap();
    let inv = DenseInverse::new(d.clone()).unwrap();
    let (x, y) = (Site::new(1, 1), Site::new(3, 2));
    let l1 = down(&d, x);
    let l2 = make_cut(&d, y, CutTarget::Boundary, &[l1.clone()]).unwrap();
    for j in 1..=2 {
        let est = moments_via_unipotent(&inv, &l1, &l2, j, &default_t_grid(j)).unwrap();
        let exact = exact_pair_moment(&table, x, y, j as i32);
        assert!((est.raw - exact).abs() < 1e-8, "j={j}: {} vs {exact}", est.raw);
        // swapping the roles of x and y
        let swapped = moments_via_unipotent(&inv, &l2, &l1, j, &default_t_grid(j)).unwrap();
        assert!((swapped.raw - est.raw).abs() < 1e-8);
    }
    let e1 = exact_pair_moment(&table, x, y, 1);
    assert!((expected_nxy_double_sum(&inv, &l1, &l2) - e1).abs() < 1e-10);
    assert!((first_moment_by_difference(&inv, &l1, &l2, 1e-3).unwrap() - e1).abs() < 1e-5);
    assert!(moments_via_unipotent(&inv, &l1, &l2, 0, &default_t_grid(1)).is_err());
    assert!(moments_via_unipotent(&inv, &l1, &l2, 2, &[0.1, 0.2]).is_err());
}

#[test]
fn fit_conditioning_is_reported() {
    let d = block(4, 4);
    let inv = DenseInverse::new(d.clone()).unwrap();
    let l1 = down(&d, Site::new(1, 1));
    let l2 = make_cut(&d, Site::new(2, 2), CutTarget::Boundary, &[l1.clone()]).unwrap();
    let grid: Vec<f64> = (1..=7).map(|k| 1e-4 * k as f64).collect();
    assert!(matches!(moments_via_unipotent(&inv, &l1, &l2, 4, &grid), Err(DeterminantError::FitIllConditioned(_))));
}

#[test]
fn stirling_conversion() {
    // N ≡ 3: E C(N,m) = C(3,m)
    let b = [1.0, 3.0, 3.0, 1.0];
    for j in 1..=3 {
        assert!((raw_moment_from_binomial(&b, j) - 3f64.powi(j as i32)).abs() < 1e-12);
    }
}

#[test]
fn half_plane_laplace_transform() {
    let cut = halfplane_cut(Site::new(0, 16)).unwrap();
    let mut prev = 1.0;
    for s in [0.05, 0.1, 0.2] {
        let v = laplace_transform_n(&HalfPlane, &cut, s).unwrap();
        assert!(v.value < prev && v.value > 0.0);
        assert!(v.imag_residue.abs() < 1e-10);
        prev = v.value;
    }
    assert!(halfplane_cut(Site::new(0, 0)).is_err());
    // deeper puncture: more loops around it
    let deep = halfplane_cut(Site::new(0, 64)).unwrap();
    assert!(laplace_transform_n(&HalfPlane, &deep, 0.2).unwrap().value < prev);
}

#[test]
fn scan_reports_and_validates() {
    let cut = halfplane_cut(Site::new(0, 16)).unwrap();
    let fam: Vec<(f64, &dyn InverseKernel, CutPath)> = vec![(1.0 / 16.0, &HalfPlane, cut)];
    let rows = log_laplace_derivative_scan(&fam, &[0.5, 1.0], &Centering::Theory).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.value.is_finite()));
    let exact = log_laplace_derivative_scan(&fam, &[0.5], &Centering::Exact).unwrap();
    assert!(exact[0].mu > 0.0 && exact[0].sigma > 0.0);
    assert!(log_laplace_derivative_scan(&fam, &[0.5], &Centering::Given(vec![])).is_err());
    assert!(log_laplace_derivative_scan(&fam, &[4.0], &Centering::Theory).is_err());
    let csv = scan_to_csv(&rows);
    assert!(csv.starts_with("delta,lambda,value,deviation,mu,sigma\n"));
    assert_eq!(csv.lines().count(), 3);
}
