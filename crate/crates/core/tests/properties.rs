use flagcrit::critpoints::{cca_residual, enumerate_ca, enumerate_cca, enumerate_iso, enumerate_multi_eigen, CaMode, CountFormula, MultiEigenModel};
use flagcrit::homotopy::{solve, TrackerConfig};
use flagcrit::numkit::{det, numerical_rank, svd, sym_eig, Matrix, RANK_TOL};
use flagcrit::polysys::build_heterogeneous_lagrange;
use flagcrit::random::{random_matrix, random_orthogonal, random_symmetric, seeded_rng};
use flagcrit::reproduce::{dense_input, generic_spectrum, hetero_matrices};
use flagcrit::varieties::{convert, random_point, FlagSignature, Model};
use proptest::prelude::*;

fn signature() -> impl Strategy<Value = FlagSignature> {
    prop::sample::select(vec!["1:3", "2:4", "1,2:3", "1,2:4", "1,2,3:4", "1,3:5", "2:5"]).prop_map(|s| s.parse().unwrap())
}

fn max_diff(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalues_are_characteristic_roots(seed in any::<u64>(), n in 1usize..=4) {
        let a = random_symmetric(&mut seeded_rng(seed), n);
        let e = sym_eig(&a).unwrap();
        let scale = a.max_abs().max(1.0).powi(n as i32);
        for &l in &e.values {
            let shifted = Matrix::from_fn(n, n, |i, j| a[(i, j)] - if i == j { l } else { 0.0 });
            prop_assert!(det(&shifted).unwrap().abs() / scale < 1e-9);
        }
    }

    #[test]
    fn svd_of_transpose_swaps_factors(seed in any::<u64>(), m in 1usize..6, n in 1usize..6) {
        let a = random_matrix(&mut seeded_rng(seed), m, n);
        let s = svd(&a).unwrap();
        let t = svd(&a.transpose()).unwrap();
        for (x, y) in s.singulars.iter().zip(&t.singulars) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        // Left singular vectors of Aᵀ are right singular vectors of A, up to sign.
        for j in 0..m.min(n) {
            if j > 0 && (s.singulars[j - 1] - s.singulars[j]).abs() < 1e-6 {
                continue;
            }
            let u = t.left.column(j);
            let v = s.right.column(j);
            let dot: f64 = u.iter().zip(&v).map(|(p, q)| p * q).sum();
            prop_assert!((dot.abs() - 1.0).abs() < 1e-8);
        }
        prop_assert!(t.reconstruct().max_abs_diff(&a.transpose()) < 1e-10);
    }

    #[test]
    fn rank_survives_orthogonal_multiplication(seed in any::<u64>(), r in 0usize..5) {
        let mut rng = seeded_rng(seed);
        let a = &random_matrix(&mut rng, 6, r) * &random_matrix(&mut rng, r, 5);
        let b = &(&random_orthogonal(&mut rng, 6) * &a) * &random_orthogonal(&mut rng, 5);
        prop_assert_eq!(numerical_rank(&b, RANK_TOL), numerical_rank(&a, RANK_TOL));
    }

    #[test]
    fn generators_vanish_on_random_points(seed in any::<u64>(), sig in signature()) {
        let mut rng = seeded_rng(seed);
        let spectrum = generic_spectrum(&sig, seed);
        for model in Model::ALL {
            let spec = (model == Model::Isospectral).then_some(spectrum.as_slice());
            let p = random_point(model, &sig, spec, &mut rng).unwrap();
            prop_assert!(p.residual().unwrap() < 1e-10, "{} {}", model, sig);
        }
    }

    #[test]
    fn round_trips_preserve_the_flag(seed in any::<u64>(), sig in signature()) {
        let mut rng = seeded_rng(seed);
        let c = generic_spectrum(&sig, seed);
        let p = random_point(Model::Stiefel, &sig, None, &mut rng).unwrap();
        let base = p.projections().unwrap();
        for (model, spec) in [(Model::Projection, None), (Model::Isospectral, Some(c.as_slice()))] {
            let there = convert(&p, model, spec).unwrap();
            let back = convert(&there, Model::Stiefel, None).unwrap();
            prop_assert!(max_diff(&back.projections().unwrap(), &base) < 1e-10, "{} {}", model, sig);
        }
    }

    #[test]
    fn isospectral_routes_commute(seed in any::<u64>(), sig in signature()) {
        let mut rng = seeded_rng(seed);
        let c = generic_spectrum(&sig, seed);
        let p = random_point(Model::Stiefel, &sig, None, &mut rng).unwrap();
        let direct = convert(&p, Model::Isospectral, Some(&c)).unwrap();
        let routed = convert(&convert(&p, Model::Projection, None).unwrap(), Model::Isospectral, Some(&c)).unwrap();
        prop_assert!(max_diff(&direct.projections().unwrap(), &routed.projections().unwrap()) < 1e-10);
        prop_assert!((direct.coordinates().iter().zip(routed.coordinates()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)) < 1e-10);
    }

    #[test]
    fn enumeration_counts_match_formulas(seed in any::<u64>(), n in 2usize..7, k in 1usize..4) {
        prop_assume!(k < n);
        let a = random_symmetric(&mut seeded_rng(seed), n);
        let pts = enumerate_multi_eigen(&a, k, MultiEigenModel::Projection).unwrap();
        let formula = CountFormula::LoPgr { n: n as u64, k: k as u64 }.evaluate().unwrap();
        prop_assert_eq!(pts.len() as u64, formula);
        prop_assert_eq!(pts.len(), binom(n, k));
    }

    #[test]
    fn minimum_is_sum_of_smallest_eigenvalues(seed in any::<u64>(), n in 2usize..7, k in 1usize..4) {
        prop_assume!(k < n);
        let a = random_symmetric(&mut seeded_rng(seed), n);
        let pts = enumerate_multi_eigen(&a, k, MultiEigenModel::Projection).unwrap();
        let min = pts.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
        // Brute force over every k-subset of the spectrum.
        let values = sym_eig(&a).unwrap().values;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                best = best.min((0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum());
            }
        }
        prop_assert!((min - best).abs() < 1e-10);
    }

    #[test]
    fn isospectral_count_is_multinomial(seed in any::<u64>(), sig in signature()) {
        let c = generic_spectrum(&sig, seed);
        let a = random_symmetric(&mut seeded_rng(seed), sig.n());
        let pts = enumerate_iso(&a, &sig, &c, 2, seed).unwrap();
        let sizes = sig.block_sizes();
        let multinomial = (1..=sig.n()).product::<usize>() / sizes.iter().map(|&b| (1..=b).product::<usize>()).product::<usize>();
        prop_assert_eq!(pts.len(), multinomial);
        prop_assert_eq!(CountFormula::LoIso { sig }.evaluate().unwrap() as usize, multinomial);
    }

    #[test]
    fn cca_is_closed_under_signs_and_permutations(seed in any::<u64>(), p in 2usize..5, q in 2usize..5, k in 1usize..3) {
        prop_assume!(k <= p.min(q));
        let a = dense_input(p, q, seed);
        let pts = enumerate_cca(&a, k).unwrap();
        let expected = (binom(p.min(q), k) * (1..=k).product::<usize>()) << k;
        prop_assert_eq!(pts.len(), expected);
        for pt in &pts {
            prop_assert!(cca_residual(&a, &pt.u, &pt.v).unwrap() < 1e-10);
            // Flipping a column pair, or swapping two columns, gives another listed point.
            for j in 0..k {
                let mut u = pt.u.clone();
                let mut v = pt.v.clone();
                u.set_column(j, &pt.u.column(j).iter().map(|x| -x).collect::<Vec<_>>());
                v.set_column(j, &pt.v.column(j).iter().map(|x| -x).collect::<Vec<_>>());
                prop_assert!(pts.iter().any(|o| o.u.max_abs_diff(&u) < 1e-12 && o.v.max_abs_diff(&v) < 1e-12));
            }
            if k > 1 {
                let u = pt.u.select_columns(&[1, 0]);
                let v = pt.v.select_columns(&[1, 0]);
                prop_assert!(pts.iter().any(|o| o.u.max_abs_diff(&u) < 1e-12 && o.v.max_abs_diff(&v) < 1e-12));
            }
        }
    }

    #[test]
    fn ca_matrix_count_is_binomial(seed in any::<u64>(), n in 2usize..4, extra in 1usize..3, k in 1usize..3) {
        prop_assume!(k <= n);
        let a = dense_input(n, n + extra, seed);
        let pts = enumerate_ca(&a, k, CaMode::MatrixForm).unwrap();
        prop_assert_eq!(pts.len(), binom(n, k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn solver_accounts_for_every_path_and_is_seed_stable(seed in 0u64..1000) {
        let sys = build_heterogeneous_lagrange(&hetero_matrices(2, 2, false, seed)).unwrap();
        let bezout = sys.bezout_number().unwrap() as usize;
        let cfg = TrackerConfig::with_seed(seed);
        let set = solve(&sys, &cfg, None).unwrap();
        let c = &set.counts;
        prop_assert_eq!(c.paths.converged + c.paths.diverged + c.paths.failed, bezout);
        prop_assert_eq!(c.distinct, 8);
        for s in &set.solutions {
            prop_assert!(sys.residual(&s.x).unwrap() < cfg.endpoint_tol);
        }
        let again = solve(&sys, &cfg, None).unwrap();
        prop_assert_eq!(set.fingerprint(), again.fingerprint());
        prop_assert_eq!(&set.counts, &again.counts);
    }
}
