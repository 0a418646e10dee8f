mod common;

use common::*;
use gammacop::copulas::CopulaModel;
use gammacop::densities::{bivariate_gamma_logpdf, model_logpdf};
use gammacop::divisibility::{btilde, btilde_all, check_infinite_divisibility, for_each_partition, partitions};
use gammacop::polynomial::{AffineModel, AffinePolynomial, ShapeParams, SubsetMask};
use gammacop::specialfn::{
    horn_phi3, horn_phi3_sum, lauricella_fi, lauricella_fi_sum, lauricella_fii, lauricella_fii_sum, pfq, pfq_sum,
    pochhammer, SeriesControl,
};
use gammacop::validation::basis_identity_error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

const CTL: SeriesControl = SeriesControl { rel_tol: 1e-12, abs_tol: 1e-300, max_terms: 400, tail_window: 5 };
// `est_error` is relative and covers truncation only. The box-sum oracles build
// each term from products of up to a few hundred factors, which costs them
// about 1e-14 relative (checked against 40-digit sums); allow that on top.
const ROUNDING: f64 = 5e-14;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pfq_matches_direct_sum(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0, z in -5.0f64..5.0) {
        for (up, low) in [(vec![], vec![c]), (vec![a], vec![c]), (vec![a], vec![b, c]), (vec![a, b], vec![c, c + 1.0])] {
            let s = pfq_sum(&up, &low, z, &CTL).unwrap();
            let want = naive_pfq(&up, &low, z, 2 * CTL.max_terms);
            let err = (s.value() - want).abs();
            // Alternating sums lose digits to cancellation against the largest term.
            let scale = naive_pfq(&up, &low, z.abs(), 2 * CTL.max_terms);
            prop_assert!(err <= 10.0 * CTL.rel_tol * want.abs() + 1e-15 * scale, "{up:?} {low:?} {z}: {} vs {want}", s.value());
            if z >= 0.0 {
                prop_assert!((s.est_error + ROUNDING) * want >= err, "estimate {} below residual {err}", s.est_error);
            }
        }
    }

    #[test]
    fn phi3_matches_box_sum(a in 0.0f64..5.0, b in 0.1f64..5.0, x in 0.0f64..5.0, y in 0.0f64..5.0) {
        let s = horn_phi3_sum(a, b, x, y, &CTL).unwrap();
        let want = naive_phi3(a, b, x, y, 90);
        prop_assert!(rel(s.value(), want) <= 10.0 * CTL.rel_tol);
        prop_assert!((s.est_error + ROUNDING) * want >= (s.value() - want).abs(), "{} vs {want}, est {}", s.value(), s.est_error);
    }

    #[test]
    fn fi_matches_box_sum(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.1f64..5.0,
                          z1 in 0.0f64..5.0, z2 in 0.0f64..5.0, z3 in 0.0f64..5.0) {
        let s = lauricella_fi_sum(a, b, c, z1, z2, z3, &CTL).unwrap();
        let want = naive_fi(a, b, c, [z1, z2, z3], 60);
        prop_assert!(rel(s.value(), want) <= 10.0 * CTL.rel_tol, "{} vs {want}", s.value());
        prop_assert!((s.est_error + ROUNDING) * want >= (s.value() - want).abs(), "{} vs {want}, est {}", s.value(), s.est_error);
    }

    #[test]
    fn series_are_positive_and_monotone(a in 0.1f64..4.0, b in 0.1f64..4.0, c in 0.1f64..4.0,
                                        z in prop::array::uniform4(0.0f64..4.0), i in 0usize..4, dz in 0.01f64..1.0) {
        let mut w = z;
        w[i] += dz;
        let fi0 = lauricella_fi(a, b, c, z[0], z[1], z[2], &CTL).unwrap();
        let fi1 = lauricella_fi(a, b, c, w[0], w[1], w[2], &CTL).unwrap();
        prop_assert!(fi0 > 0.0 && fi1 >= fi0);
        let f0 = lauricella_fii(a, b, z[0], z[1], z[2], z[3], &CTL).unwrap();
        let f1 = lauricella_fii(a, b, w[0], w[1], w[2], w[3], &CTL).unwrap();
        prop_assert!(f0 > 0.0 && f1 >= f0);
        let h0 = horn_phi3(a, b, z[0], z[1], &CTL).unwrap();
        let h1 = horn_phi3(a, b, w[0], w[1], &CTL).unwrap();
        prop_assert!(h0 > 0.0 && h1 >= h0);
        let p0 = pfq(&[a], &[b, c], z[0], &CTL).unwrap();
        let p1 = pfq(&[a], &[b, c], w[0], &CTL).unwrap();
        prop_assert!(p0 > 0.0 && p1 >= p0);
    }

    #[test]
    fn pochhammer_matches_gamma_ratio(a in 0.05f64..20.0, k in 0usize..40) {
        let direct = pochhammer(a, k);
        let via_gamma = (gammacop::specialfn::ln_gamma(a + k as f64) - gammacop::specialfn::ln_gamma(a)).exp();
        prop_assert!(rel(direct, via_gamma) < 1e-11);
    }

    #[test]
    fn affine_in_each_coordinate(seed in any::<u64>(), n in 1usize..6, h in 0.1f64..3.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..1usize << n).map(|s| if s == 0 { 1.0 } else { rand::Rng::random_range(&mut rng, -2.0..2.0) }).collect();
        let p = AffinePolynomial::new(n, coeffs).unwrap();
        let theta: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        for i in 0..n {
            let mut up = theta.clone();
            up[i] += h;
            let mut down = theta.clone();
            down[i] -= h;
            let second = p.evaluate(&up).unwrap() - 2.0 * p.evaluate(&theta).unwrap() + p.evaluate(&down).unwrap();
            let scale = p.coeffs().as_slice().iter().map(|c| c.abs()).sum::<f64>() * (1.0 + h).powi(n as i32);
            prop_assert!(second.abs() <= 1e-13 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fii_matches_box_sum(l1 in 0.2f64..5.0, l2 in 0.2f64..5.0, z in prop::array::uniform4(0.0f64..5.0)) {
        let s = lauricella_fii_sum(l1, l2, z[0], z[1], z[2], z[3], &CTL).unwrap();
        let want = naive_fii(l1, l2, z, 36);
        prop_assert!(rel(s.value(), want) <= 10.0 * CTL.rel_tol, "{} vs {want}", s.value());
        prop_assert!((s.est_error + ROUNDING) * want >= (s.value() - want).abs(), "{} vs {want}, est {}", s.value(), s.est_error);
    }

    #[test]
    fn btilde_matches_exponential_formula(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut coeffs: Vec<f64> = (0..1usize << n).map(|_| rand::Rng::random_range(&mut rng, 0.05..2.0)).collect();
        coeffs[0] = 1.0;
        let p = AffinePolynomial::new(n, coeffs).unwrap();
        let dual = p.dual_polynomial().unwrap();
        let (want, scale) = btilde_oracle(dual.as_slice(), n);
        let all = btilde_all(&dual);
        for s in SubsetMask::all(n).filter(|s| !s.is_empty()) {
            let k = s.bits() as usize;
            let tol = 1e-10 * want[k].abs().max(scale[k] * 1e-3);
            prop_assert!((btilde(&dual, s).unwrap() - want[k]).abs() <= tol, "{s}");
            prop_assert!((all.get(s) - want[k]).abs() <= tol, "{s}");
        }
    }

    #[test]
    fn divisibility_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut coeffs: Vec<f64> = (0..1usize << n).map(|_| rand::Rng::random_range(&mut rng, 0.05..2.0)).collect();
        coeffs[0] = 1.0;
        let p = AffinePolynomial::new(n, coeffs).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rand::Rng::random_range(&mut rng, 0..=i));
        }
        let q = p.permuted(&perm).unwrap();
        let a = check_infinite_divisibility(&p, 1e-12).unwrap();
        let b = check_infinite_divisibility(&q, 1e-12).unwrap();
        prop_assert_eq!(a.divisible, b.divisible);
        for (s, v) in &a.btilde {
            let moved = SubsetMask::from_indices(n, &s.iter().map(|i| perm[i]).collect::<Vec<_>>()).unwrap();
            let w = b.btilde_of(moved).unwrap();
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn basis_identity(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut coeffs: Vec<f64> = (0..1usize << n).map(|_| rand::Rng::random_range(&mut rng, 0.05..2.0)).collect();
        coeffs[0] = 1.0;
        let model = AffineModel::new(AffinePolynomial::new(n, coeffs).unwrap(), ShapeParams::uniform(n, 1.0).unwrap()).unwrap();
        let theta: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.0..3.0)).collect();
        prop_assert!(basis_identity_error(&model, &theta).unwrap() <= 1e-12);
    }

    #[test]
    fn copula_is_a_cdf(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = random_divisible_model(&mut rng, n, true);
        let c = CopulaModel::build(&model).unwrap();
        for _ in 0..50 {
            let lo: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|&l| l + rand::Rng::random_range(&mut rng, 0.0..1.0) * (1.0 - l)).collect();
            prop_assert!(box_mass(&c, &lo, &hi) >= -1e-12);
            let cv = c.cdf(&hi).unwrap();
            prop_assert!(cv >= 0.0 && cv <= hi.iter().cloned().fold(1.0, f64::min) + 1e-15);
            prop_assert!(rel(cv, composition(&model, &hi)) <= 1e-12);
        }
    }

    #[test]
    fn conditional_cdf_is_monotone(seed in any::<u64>(), v1 in 0.01f64..0.99) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = CopulaModel::build(&random_divisible_model(&mut rng, 2, true)).unwrap();
        let mut prev = 0.0;
        for k in 1..=40 {
            let v2 = k as f64 / 41.0;
            let h = c.conditional_cdf(v1, v2).unwrap();
            prop_assert!(h >= prev - 1e-14 && h <= 1.0 + 1e-14);
            prop_assert!(c.pdf(&[v1, v2]).unwrap() >= 0.0);
            prev = h;
        }
    }

    #[test]
    fn bivariate_density_swap_symmetry(p1 in 0.2f64..3.0, p2 in 0.2f64..3.0, t in 0.05f64..1.0,
                                       lam in 0.3f64..3.0, u1 in 0.01f64..1.0, u2 in 0.01f64..1.0) {
        // Up to several marginal standard deviations past the mean.
        let (x1, x2) = (u1 * p1 * (lam + 6.0 * lam.sqrt()), u2 * p2 * (lam + 6.0 * lam.sqrt()));
        let p12 = t * p1 * p2;
        let ctl = SeriesControl::default();
        let a = bivariate_gamma_logpdf(&model2(p1, p2, p12, lam, lam, lam), &[x1, x2], &ctl).unwrap();
        let b = bivariate_gamma_logpdf(&model2(p2, p1, p12, lam, lam, lam), &[x2, x1], &ctl).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let m = model2(p1, p2, p12, lam, lam * 1.5, lam * 2.0);
        let s = model2(p2, p1, p12, lam, lam * 2.0, lam * 1.5);
        let a = model_logpdf(&m, &[x1, x2], &ctl).unwrap();
        let b = model_logpdf(&s, &[x2, x1], &ctl).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }
}

fn stirling2(m: usize, k: usize) -> u64 {
    let mut t = vec![vec![0u64; m + 1]; m + 1];
    t[0][0] = 1;
    for i in 1..=m {
        for j in 1..=i {
            t[i][j] = j as u64 * t[i - 1][j] + t[i - 1][j - 1];
        }
    }
    t[m][k]
}

fn bell(m: usize) -> u64 {
    // Bell triangle.
    let mut row = vec![1u64];
    for _ in 0..m {
        let mut next = vec![*row.last().unwrap()];
        for &x in &row {
            let last = *next.last().unwrap();
            next.push(last + x);
        }
        row = next;
    }
    row[0]
}

#[test]
fn partition_counts_are_stirling_and_bell() {
    for n in 1..=8 {
        let s = SubsetMask::full(n);
        let mut total = 0u64;
        for_each_partition(s, |_| total += 1);
        assert_eq!(total, bell(n), "n = {n}");
        let mut by_k = 0u64;
        for k in 1..=n {
            let parts = partitions(s, k).unwrap();
            assert_eq!(parts.len() as u64, stirling2(n, k), "S({n},{k})");
            for blocks in &parts {
                let union = blocks.iter().fold(0u32, |acc, b| {
                    assert_eq!(acc & b.bits(), 0);
                    acc | b.bits()
                });
                assert_eq!(union, s.bits());
            }
            by_k += parts.len() as u64;
        }
        assert_eq!(by_k, bell(n));
    }
}

#[test]
fn generated_models_have_the_requested_btilde() {
    let b = [0.0, -1.0, -0.8, 0.3, -1.2, 0.2, 0.1, 0.05];
    let p = polynomial_from_btilde(&b, 3).unwrap();
    let poly = AffinePolynomial::new(3, p).unwrap();
    let r = check_infinite_divisibility(&poly, 1e-12).unwrap();
    for (s, v) in r.btilde {
        assert!((v - b[s.bits() as usize]).abs() < 1e-12, "{s}: {v}");
    }
    for i in 0..3 {
        assert!((r.dual.get(SubsetMask::singleton(3, i)) - b[1 << i]).abs() < 1e-12);
    }
}
