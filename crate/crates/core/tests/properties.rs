use std::sync::Arc;

use proptest::prelude::*;

use dimer_nesting::cle_reference::{nesting_counts_on_grid, IncrementLaw};
use dimer_nesting::determinants::{laplace_transform_n, DenseInverse};
use dimer_nesting::kasteleyn::assemble_k;
use dimer_nesting::lattice::{eta2, make_cut, CutTarget, LatticeDomain, Site};
use dimer_nesting::linalg::dense::max_abs_deviation_from_identity;
use dimer_nesting::observables::Welford;
use dimer_nesting::sampler::{sample_double, stream_rng};
use dimer_nesting::DenseLuF64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn colours_alternate_and_eta_squared_is_a_row_sign(x in -50i32..50, y in -50i32..50) {
        let s = Site::new(x, y);
        prop_assert_ne!(s.is_black(), s.offset(1, 0).is_black());
        prop_assert_ne!(s.is_black(), s.offset(0, 1).is_black());
        prop_assert_eq!(eta2(s), if y.rem_euclid(2) == 0 { 1.0 } else { -1.0 });
    }

    #[test]
    fn welford_merge_matches_one_pass(a in prop::collection::vec(-1e3f64..1e3, 1..40), b in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let mut left: Welford = a.iter().copied().collect();
        let right: Welford = b.iter().copied().collect();
        left.merge(&right);
        let all: Welford = a.iter().chain(&b).copied().collect();
        prop_assert_eq!(left.count(), all.count());
        prop_assert!((left.mean() - all.mean()).abs() < 1e-9);
        prop_assert!((left.variance() - all.variance()).abs() < 1e-6 * (1.0 + all.variance()));
    }

    #[test]
    fn block_inverses_are_exact(w in 2i32..8, h in 2i32..8) {
        prop_assume!(w * h % 2 == 0);
        let d = Arc::new(LatticeDomain::block(1.0, w, h, Site::new(0, 0)).unwrap());
        let k = assemble_k::<f64>(d).to_dense();
        let inv = DenseLuF64::new(k.clone()).unwrap().inverse();
        prop_assert!(max_abs_deviation_from_identity(&(&k * &inv)) < 1e-10);
    }

    #[test]
    fn double_dimer_height_is_bounded_by_nesting(seed in any::<u64>(), i in 0u64..1000) {
        let d = Arc::new(LatticeDomain::build_halfplane_box(1.0, 5, 7).unwrap());
        let c = sample_double(&d, seed, i).unwrap();
        let field = c.height();
        for &f in d.faces() {
            let h = c.height_at(f);
            let n = c.nesting_number(&[f]).unwrap() as i32;
            prop_assert!(h.abs() <= n);
            prop_assert_eq!((h - n).rem_euclid(2), 0);
            prop_assert_eq!(field.get(f), h);
        }
    }

    #[test]
    fn laplace_transform_lies_in_the_unit_interval(fx in 0i32..5, fy in 0i32..3, s in 0.0f64..0.25) {
        let d = Arc::new(LatticeDomain::block(1.0, 6, 4, Site::new(0, 0)).unwrap());
        let f = Site::new(fx, fy);
        let cut = make_cut(&d, f, CutTarget::Boundary, &[]).unwrap();
        let v = laplace_transform_n(&DenseInverse::new(d).unwrap(), &cut, s).unwrap();
        prop_assert!(v.value > 0.0 && v.value <= 1.0 + 1e-12);
        prop_assert!(v.imag_residue.abs() < 1e-10);
    }

    #[test]
    fn renewal_counts_are_monotone_and_bounded(seed in any::<u64>(), lo in 0.1f64..1.0, span in 0.1f64..2.0) {
        let law = IncrementLaw::Uniform { lo, hi: lo + span };
        let grid: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let n = nesting_counts_on_grid(&law, &grid, &mut stream_rng(seed, 0));
        prop_assert!(n.windows(2).all(|p| p[0] <= p[1]));
        for (t, c) in grid.iter().zip(&n) {
            prop_assert!(*c as f64 <= t / lo);
            prop_assert!(*c as f64 >= (t / (lo + span)).floor());
        }
    }
}
