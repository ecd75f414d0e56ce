use dimer_nesting::kernels::checks::*;
use dimer_nesting::kernels::reference::{OnePuncture, TwoPuncture};
use dimer_nesting::kernels::*;
use dimer_nesting::lattice::{eta2, Site};
use num_complex::Complex64;

const FACE: Site = Site { x: -1, y: -1 };

fn box_column(half: i32, s: f64, w: Site, bv: &dyn Fn(Site) -> Complex64) -> (KernelColumn, Vec<(dimer_nesting::lattice::CutPath, f64)>) {
    let (k, cuts) = puncture_box(half, FACE, s).unwrap();
    let col = solve_kernel_column(&k, w, Some(&BoundaryData { values: bv, cuts: &cuts })).unwrap();
    (col, cuts)
}

#[test]
fn solved_columns_meet_the_residual_invariant() {
    let p = OnePuncture::new(FACE, 0.1).unwrap();
    let w = Site::new(12, 5);
    let bv = |b: Site| p.kinv_s(b, w);
    let (col, cuts) = box_column(31, 0.1, w, &bv);
    assert_eq!(col.method, KernelMethod::Solve);
    assert!(col.residual < 1e-10);
    assert!(col.interior_residual(&cuts, 1.0) < 1e-10);
    let csv = col.to_csv(|b| p.kinv_s(b, w));
    assert!(csv.starts_with("b_re,b_im,value_re,value_im,reference_re,reference_im,deviation\n"));
    assert_eq!(csv.lines().count(), col.values.len() + 1);
}

#[test]
fn laplacian_identity_at_the_puncture() {
    let s = 0.1;
    let p = OnePuncture::new(FACE, s).unwrap();
    let w = Site::new(12, 5);
    let bv = |b: Site| p.kinv_s(b, w);
    let (col, cuts) = box_column(31, s, w, &bv);
    let rep = laplacian_check(&col, &p, &cuts).unwrap();
    assert!(rep.puncture_defect < 1e-8, "{rep:?}");
    assert!(rep.bulk_max < 1e-8, "{rep:?}");
    // the opposite sign convention is clearly excluded
    assert!(rep.flipped_defect > 1e-3 * rep.scale);
}

#[test]
fn maximum_principle_on_a_sub_ball() {
    let s = 0.1;
    let p = OnePuncture::new(FACE, s).unwrap();
    let w = Site::new(12, 5);
    let bv = |b: Site| p.kinv_s(b, w);
    let (col, _) = box_column(31, s, w, &bv);
    for r in [5.0, 9.0] {
        let rep = maximum_principle_check(&col, &p, r).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
    assert!(maximum_principle_check(&col, &p, 20.0).is_err());
}

#[test]
fn gauge_relation_for_negative_monodromy() {
    let s = 0.15;
    let p = OnePuncture::new(FACE, s).unwrap();
    let w = Site::new(-9, 6);
    let bv = |b: Site| p.kinv_s(b, w);
    let bv_neg = |b: Site| eta2(b) * eta2(w) * p.kinv_s(b, w).conj();
    let (plus, _) = box_column(21, s, w, &bv);
    let (minus, _) = box_column(21, -s, w, &bv_neg);
    for (b, v) in &plus.values {
        let m = minus.get(*b).unwrap();
        assert!((m - eta2(*b) * eta2(w) * v.conj()).norm() < 1e-10);
    }
}

#[test]
fn zero_boundary_box_converges_to_the_full_plane_inverse() {
    let w = Site::new(0, 1);
    let zero = |_: Site| Complex64::new(0.0, 0.0);
    let (small, _) = box_column(63, 0.0, w, &zero);
    let (large, _) = box_column(127, 0.0, w, &zero);
    let mut plain: f64 = 0.0;
    let mut extrapolated: f64 = 0.0;
    for (&b, v) in &small.values {
        if b.x.abs().max(b.y.abs()) > 63 / 4 {
            continue;
        }
        let exact = fullplane_kinv(b, w);
        let l = large.get(b).unwrap();
        plain = plain.max((l - exact).norm());
        extrapolated = extrapolated.max((2.0 * l - v - exact).norm());
    }
    assert!(extrapolated < 1e-3, "extrapolated {extrapolated:e}");
    assert!(extrapolated < plain);
}

#[test]
fn gamma_factor_ratios() {
    let p = OnePuncture::new(FACE, 0.1).unwrap();
    let bs = annulus_sample(&p, 20.0, 50.0, 4);
    for s in [0.05, 0.1, 0.2] {
        let rep = gamma_factor_check(s, FACE, &bs).unwrap();
        assert!(rep.max_deviation < 0.02, "s={s}: {}", rep.max_deviation);
    }
    assert!(gamma_factor_check(0.0, FACE, &bs).is_err());
    // s → 0: the prediction is the full-plane main term
    let q = OnePuncture::new(FACE, 1e-9).unwrap();
    let b = Site::new(30, 10);
    assert!((q.kinv_at_w0(b) - kinv_main_term(b, q.w0())).norm() < 1e-9);
}

#[test]
fn near_diagonal_expansion() {
    let zero = near_diagonal_scan(0.0, FACE, &[20.0, 40.0]).unwrap();
    assert!(zero.deviations.iter().all(|d| *d < 1e-12));
    let scan = near_diagonal_scan(0.1, FACE, &[20.0, 40.0, 80.0]).unwrap();
    assert!(scan.deviations.windows(2).all(|p| p[1] < p[0]), "{scan:?}");
    assert!(scan.exponent >= 1.0, "{scan:?}");
    let w40 = scan.deviations[1];
    assert!(w40 < 0.5 * 40f64.powf(-1.25) * 40f64.ln());
}

#[test]
fn woodbury_columns_satisfy_the_twisted_equation() {
    let p = OnePuncture::new(FACE, 0.2).unwrap();
    let k = OnePunctureKernel::cached(p, ONE_PUNCTURE_DEPTH).unwrap();
    let mut blacks = Vec::new();
    for x in -8..=8 {
        for y in -8..=8 {
            if (x + y) % 2 == 0 {
                blacks.push(Site::new(x, y));
            }
        }
    }
    let col = k.column(p.w0(), &blacks);
    assert!(col.residual < 1e-10, "{}", col.residual);
}

#[test]
fn two_puncture_parametrix_improves_with_distance() {
    let mut sups = Vec::new();
    for k in [25, 50, 100] {
        let rep = parametrix_error(0.05, Site::new(-1, 2 * k - 1)).unwrap();
        sups.push((rep.im_v, rep.sup_error));
    }
    assert!(sups.windows(2).all(|p| p[1].1 < p[0].1), "{sups:?}");
    let lx: Vec<f64> = sups.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = sups.iter().map(|p| p.1.ln()).collect();
    let (slope, _, _) = dimer_nesting::linalg::fit::linear_fit(&lx, &ly);
    assert!(slope < -1.005, "slope {slope}");
}

#[test]
fn parametrix_regimes_and_errors() {
    let p = TwoPuncture::new(Site::new(-1, 49), 0.05, 0.01).unwrap();
    let (b, w) = (Site::new(200, 30), Site::new(-150, -61));
    assert_eq!(p.parametrix(b, w).unwrap(), p.continuum(b, w));
    assert!(matches!(p.parametrix(Site::new(0, 0), Site::new(0, 0)), Err(KernelError::Invalid(_))));
    assert!(TwoPuncture::new(Site::new(-1, -3), 0.05, 0.01).is_err());
    let z = TwoPuncture::new(Site::new(-1, 49), 0.0, 0.01).unwrap();
    assert!((z.parametrix(b, w).unwrap() - kinv_main_term(b, w)).norm() < 1e-15);
}
