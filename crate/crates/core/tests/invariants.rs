use proptest::prelude::*;

use semilpp::env::sample_brownian_lines;
use semilpp::lpp::{geodesic, lpp_column_values, lpp_profile, lpp_profile_with_boundary, lpp_value, pitman_transform};
use semilpp::sheet::{boundary_data, maximizer_indices, raw_difference, z_processes};
use semilpp::stats::{ks_one_sample, ks_two_sample, Sample};
use semilpp::{make_grid, BoundaryData, LatticePoint, LineEnsemble, Lines, Profile, RngSpec};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12f64.max(1e-9 * a.abs().max(b.abs()))
}

fn at_least(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs || close(lhs, rhs)
}

fn ensemble() -> impl Strategy<Value = LineEnsemble> {
    (2usize..=6, 8usize..=64, 0.1f64..4.0, -2.0f64..2.0, 0.01f64..1.0, any::<u64>()).prop_map(
        |(k, n_points, rate, x0, dx, seed)| {
            sample_brownian_lines(make_grid(x0, dx, n_points).unwrap(), k, rate, RngSpec::new(seed, 0)).unwrap()
        },
    )
}

/// Picks `count` sorted indices out of `0..len` from fractions in `[0, 1)`.
fn sorted_picks(fracs: &[f64], len: usize) -> Vec<usize> {
    let mut v: Vec<usize> = fracs.iter().map(|f| ((f * len as f64) as usize).min(len - 1)).collect();
    v.sort_unstable();
    v
}

fn grid_len(env: &LineEnsemble) -> usize {
    env.rows()[0].len()
}

fn k_of(env: &LineEnsemble) -> usize {
    env.rows().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn crossing_lemma(env in ensemble(), xs in prop::array::uniform4(0.0f64..1.0), ls in prop::array::uniform4(0.0f64..1.0)) {
        let p = sorted_picks(&xs, grid_len(&env));
        let (y1, y2, x1, x2) = (p[0], p[1], p[2], p[3]);
        let l: Vec<usize> = sorted_picks(&ls, k_of(&env)).iter().map(|i| i + 1).collect();
        let (m1, m2, n1, n2) = (l[0], l[1], l[2], l[3]);
        let f = |y, n, x, m| lpp_value(&env, LatticePoint::new(y, n), LatticePoint::new(x, m)).unwrap();
        let lhs = f(y1, n1, x1, m1) + f(y2, n2, x2, m2);
        let rhs = f(y1, n1, x2, m2) + f(y2, n2, x1, m1);
        prop_assert!(at_least(lhs, rhs), "{lhs} < {rhs}");
    }

    #[test]
    fn column_decomposition(env in ensemble(), fr in prop::array::uniform3(0.0f64..1.0), nf in 0.0f64..1.0) {
        let p = sorted_picks(&fr, grid_len(&env));
        let (y, lam, x) = (p[0], p[1], p[2]);
        let n = 1 + ((nf * k_of(&env) as f64) as usize).min(k_of(&env) - 1);
        let direct = lpp_value(&env, LatticePoint::new(y, n), LatticePoint::new(x, 1)).unwrap();
        let column = lpp_column_values(&env, LatticePoint::new(y, n), lam).unwrap();
        let best = (1..=n)
            .map(|i| column[i - 1] + lpp_value(&env, LatticePoint::new(lam, i), LatticePoint::new(x, 1)).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(close(direct, best), "{direct} vs {best}");
    }

    #[test]
    fn superadditivity(env in ensemble(), fr in prop::array::uniform3(0.0f64..1.0), lf in prop::array::uniform3(0.0f64..1.0)) {
        let p = sorted_picks(&fr, grid_len(&env));
        let l: Vec<usize> = sorted_picks(&lf, k_of(&env)).iter().map(|i| i + 1).collect();
        let a = LatticePoint::new(p[0], l[2]);
        let b = LatticePoint::new(p[1], l[1]);
        let c = LatticePoint::new(p[2], l[0]);
        let whole = lpp_value(&env, a, c).unwrap();
        let parts = lpp_value(&env, a, b).unwrap() + lpp_value(&env, b, c).unwrap();
        prop_assert!(at_least(whole, parts));
    }

    #[test]
    fn geodesic_weight_and_order(env in ensemble(), fr in prop::array::uniform2(0.0f64..1.0), lf in prop::array::uniform2(0.0f64..1.0)) {
        let p = sorted_picks(&fr, grid_len(&env));
        let l: Vec<usize> = sorted_picks(&lf, k_of(&env)).iter().map(|i| i + 1).collect();
        let (a, b) = (LatticePoint::new(p[0], l[1]), LatticePoint::new(p[1], l[0]));
        let g = geodesic(&env, a, b).unwrap();
        let v = lpp_value(&env, a, b).unwrap();
        prop_assert!(g.is_monotone());
        prop_assert_eq!(g.jump_indices.len(), l[1] - l[0]);
        prop_assert!((g.weight(&env) - v).abs() <= 1e-12f64.max(1e-12 * v.abs()));
    }

    #[test]
    fn pitman_shift_and_max(env in ensemble(), a in -5.0f64..5.0) {
        let g = *env.grid();
        let rows: Vec<Profile> = env.rows().iter().map(|r| Profile::on_grid(g, r.clone()).unwrap()).collect();
        let f1 = &rows[0];
        let shifted = Profile::on_grid(g, rows[1].values.iter().map(|v| v + a).collect()).unwrap();
        let lhs = pitman_transform(f1, &shifted).unwrap();
        let rhs = pitman_transform(f1, &rows[1]).unwrap();
        for (u, v) in lhs.values.iter().zip(&rhs.values) {
            prop_assert!(close(*u, v + a));
        }
        let upper: Vec<f64> = (0..g.n_points())
            .map(|j| rows[1..].iter().map(|r| r.values[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let of_max = pitman_transform(f1, &Profile::on_grid(g, upper).unwrap()).unwrap();
        let each: Vec<Profile> = rows[1..].iter().map(|r| pitman_transform(f1, r).unwrap()).collect();
        for j in 0..g.n_points() {
            let m = each.iter().map(|p| p.values[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(close(of_max.values[j], m));
        }
    }

    #[test]
    fn boundary_recursion_matches_definition(env in ensemble(), lf in 0.0f64..1.0, b in prop::collection::vec(-3.0f64..3.0, 6), tf in 0.0f64..1.0) {
        let k = k_of(&env);
        let lam = ((lf * grid_len(&env) as f64) as usize).min(grid_len(&env) - 1);
        let target = 1 + ((tf * k as f64) as usize).min(k - 1);
        let boundary = BoundaryData::new(lam, b[..k].to_vec());
        let z = lpp_profile_with_boundary(&env, &boundary, target).unwrap();
        let direct: Vec<Profile> = (target..=k).map(|j| lpp_profile(&env, LatticePoint::new(lam, j), target).unwrap()).collect();
        for (x, zv) in z.values.iter().enumerate() {
            let sup = (target..=k)
                .map(|j| boundary.values[j - 1] + direct[j - target].values[x])
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(close(*zv, sup), "x = {x}: {zv} vs {sup}");
        }
        let zs = z_processes(&env, &boundary).unwrap();
        prop_assert_eq!(zs.len(), k);
        if target == 1 {
            prop_assert_eq!(&zs[0], &z);
        }
    }

    #[test]
    fn boundary_monotone_and_ordered_in_start(env in ensemble(), fr in prop::array::uniform3(0.0f64..1.0)) {
        let k = k_of(&env);
        let p = sorted_picks(&fr, grid_len(&env));
        let (y, y2, lam) = (p[0], p[1], p[2]);
        let b = boundary_data(&env, LatticePoint::new(y, k), lam, k).unwrap();
        let b2 = boundary_data(&env, LatticePoint::new(y2, k), lam, k).unwrap();
        prop_assert!(b.is_non_increasing(1e-12f64.max(1e-9 * b.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))));
        for i in 0..k {
            for j in i..k {
                let lhs = b2.values[j] - b.values[j];
                let rhs = b2.values[i] - b.values[i];
                let scale = b2.values[j].abs().max(b.values[j].abs()).max(b2.values[i].abs()).max(b.values[i].abs());
                prop_assert!(lhs >= rhs - 1e-12f64.max(1e-9 * scale), "i = {i}, j = {j}");
            }
        }
        let idx = maximizer_indices(&env, &b).unwrap();
        let idx2 = maximizer_indices(&env, &b2).unwrap();
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        for (a, c) in idx.iter().zip(&idx2) {
            prop_assert!(a <= c);
        }
    }

    #[test]
    fn difference_is_non_decreasing(env in ensemble(), fr in prop::array::uniform2(0.0f64..1.0), nf in 0.0f64..1.0) {
        let p = sorted_picks(&fr, grid_len(&env));
        let n = 1 + ((nf * k_of(&env) as f64) as usize).min(k_of(&env) - 1);
        let d = raw_difference(&env, p[0], p[1], n).unwrap();
        for w in d.values.windows(2) {
            prop_assert!(at_least(w[1], w[0]), "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn ks_statistics_are_bounded(a in prop::collection::vec(-3.0f64..3.0, 1..40), b in prop::collection::vec(-3.0f64..3.0, 1..40)) {
        let (sa, sb) = (Sample::new(a), Sample::new(b));
        let d = ks_two_sample(&sa, &sb).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&sb, &sa).unwrap());
        let one = ks_one_sample(&sa, |x| ((x + 3.0) / 6.0).clamp(0.0, 1.0)).unwrap();
        prop_assert!(one > 0.0 && one <= 1.0);
    }
}
