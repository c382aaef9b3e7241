//! Randomized structural properties of the kernels and maps.

use num::{BigRational, Signed, Zero};
use proptest::prelude::*;

use flowtree::abel::{abel_forward, abel_inverse};
use flowtree::analysis::{heat_kernel_column, level_sum_estimate};
use flowtree::ops::{modulation, LocalCalculus, NcPolynomial};
use flowtree::quotient::{build_submersion_rational, fiber_average_below, lift};
use flowtree::scalar::{ratio, QuadSurd};
use flowtree::tree::{chain_fibonacci, homogeneous_ball_window, ratio_ball_window, RatioProfile, DEFAULT_VERTEX_CAP};

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-40i64..=40, 1i64..=12).prop_map(|(n, d)| ratio(n, d))
}

fn max_abs(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).fold(BigRational::zero(), |a, b| if b > a { b } else { a })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_columns_are_nonnegative(q in 2usize..=3, t in 0.0f64..1.5, golden in any::<bool>()) {
        let (tree, o) = if golden {
            ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 8, 8, DEFAULT_VERTEX_CAP).unwrap()
        } else {
            homogeneous_ball_window(q, 8, 8, DEFAULT_VERTEX_CAP).unwrap()
        };
        let col = heat_kernel_column(&tree, t, o, Some(8)).unwrap();
        for (_, v) in &col.entries {
            prop_assert!(*v >= -col.err_bound - 1e-15, "value {v} below certificate {}", col.err_bound);
        }
    }

    #[test]
    fn modulation_conjugates_averaging_to_its_negative(
        q in 2usize..=3,
        values in proptest::collection::vec(small_rational(), 1..8),
    ) {
        let (tree, o) = homogeneous_ball_window(q, 3, 3, DEFAULT_VERTEX_CAP).unwrap();
        let ball = tree.window.ball(o, 1);
        let mut f = vec![BigRational::zero(); tree.window.len()];
        for (v, c) in ball.iter().zip(values) {
            f[*v] = c;
        }
        let calc = LocalCalculus::<BigRational>::new(&tree).unwrap();
        let avg = NcPolynomial::<BigRational>::averaging();
        let direct = calc.apply_polynomial(&avg, &f);
        let conj = calc.apply_polynomial(&avg, &modulation(&tree.window, &f));
        let conj = modulation(&tree.window, &conj.values);
        for v in 0..f.len() {
            if direct.exact[v] {
                prop_assert_eq!(&conj[v], &-direct.values[v].clone());
            }
        }
    }

    #[test]
    fn fiber_averages_contract_and_fix_lifts(
        profile in prop_oneof![
            Just((vec![ratio(3, 4), ratio(1, 4)], 4usize)),
            Just((vec![ratio(1, 2), ratio(1, 2)], 2usize)),
            Just((vec![ratio(1, 3), ratio(2, 3)], 3usize)),
        ],
        seed in proptest::collection::vec(small_rational(), 64),
    ) {
        let (ratios, q) = profile;
        let (target, o) =
            ratio_ball_window(&RatioProfile::Rational(ratios), chain_fibonacci, 2, 2, DEFAULT_VERTEX_CAP).unwrap();
        let (source, s) = build_submersion_rational(&target, q, DEFAULT_VERTEX_CAP).unwrap();
        let n = source.window.len();
        let g: Vec<BigRational> = (0..n).map(|z| seed[z % seed.len()].clone()).collect();
        let xb = s.map.iter().position(|&z| z == o).unwrap();
        let mut covered = vec![o];
        covered.extend_from_slice(target.window.succ(o));
        let avg = fiber_average_below(&source, &target, &s, xb, &g).unwrap();
        for y in &covered {
            prop_assert!(avg[y].abs() <= max_abs(&g));
        }

        let f: Vec<BigRational> = (0..target.window.len()).map(|x| seed[x % seed.len()].clone()).collect();
        let back = fiber_average_below(&source, &target, &s, xb, &lift(&s, &f)).unwrap();
        for y in &covered {
            prop_assert_eq!(&back[y], &f[*y]);
        }
    }

    #[test]
    fn abel_inverse_undoes_forward(
        q in 2u64..=10,
        phi in proptest::collection::vec(small_rational(), 1..20),
    ) {
        let phi: Vec<QuadSurd> = phi.into_iter().map(QuadSurd::rational).collect();
        prop_assert_eq!(abel_inverse(q, &abel_forward(q, &phi)), phi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn suprema_grow_with_the_anchor_set(t in 0.5f64..8.0) {
        let (tree, o) = homogeneous_ball_window(2, 2, 40, DEFAULT_VERTEX_CAP).unwrap();
        let small = level_sum_estimate(&tree, &[o], &[t], None).unwrap();
        let large = level_sum_estimate(&tree, &tree.window.ball(o, 2), &[t], None).unwrap();
        for i in [1, 2] {
            prop_assert!(large.rows[0][i] >= small.rows[0][i] - 1e-14);
        }
    }
}
