mod common;

use codedcache::analytics::{
    expected_distinct, expected_rate_exact, expected_rate_sampled, per_case_identity_check, prob_a,
    prob_b, rate_exact, ProbBMode,
};
use codedcache::asymptotics::{best_c, ratio_bound_with};
use codedcache::optimizer::{minimize_ub_numeric, project_feasible, q_dagger};
use codedcache::simulator::monte_carlo_rate;
use codedcache::{CachingDist, PopularityDist, ProblemInstance, RequestVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inst(n: usize, k: usize, m: f64) -> ProblemInstance {
    ProblemInstance::new(n, k, m, 1).unwrap()
}

#[test]
fn rate_matches_definition_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=9);
        let m = rng.gen_range(0.0..=n as f64);
        let q = common::random_feasible_q(&mut rng, n, m);
        let d: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
        let r = rate_exact(
            &inst(n, k, m),
            &CachingDist::new(q.clone()).unwrap(),
            &RequestVector::new(d.clone(), n).unwrap(),
        )
        .unwrap();
        let oracle = common::oracle_rate_for(&q, m, &d);
        assert!(
            (r - oracle).abs() <= 1e-10 * oracle.max(1.0),
            "{r} vs {oracle}"
        );
    }
}

#[test]
fn rate_hand_values() {
    let q = CachingDist::new(vec![0.75, 0.25]).unwrap();
    let distinct = RequestVector::from_one_based(&[1, 2], 2).unwrap();
    let same = RequestVector::from_one_based(&[1, 1], 2).unwrap();
    // subsets {1}, {2}, {1,2}: 0.0625 + 0.5625 + 0.1875
    assert!((rate_exact(&inst(2, 2, 1.0), &q, &distinct).unwrap() - 0.8125).abs() < 1e-15);
    // 0.0625 twice plus 0.1875
    assert!((rate_exact(&inst(2, 2, 1.0), &q, &same).unwrap() - 0.3125).abs() < 1e-15);
}

#[test]
fn expected_rate_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=3 {
        for k in 1..=5 {
            for p in [
                vec![1.0 / n as f64; n],
                common::zipf(n, 1.0),
                common::zipf(n, 0.3),
            ] {
                let m = rng.gen_range(0.0..=n as f64);
                let q = common::random_feasible_q(&mut rng, n, m);
                let exact = expected_rate_exact(
                    &inst(n, k, m),
                    &PopularityDist::new(p.clone()).unwrap(),
                    &CachingDist::new(q.clone()).unwrap(),
                )
                .unwrap();
                let oracle = common::oracle_expected_rate(&p, &q, m, k);
                assert!(
                    (exact - oracle).abs() <= 1e-12 * oracle.max(1.0),
                    "{exact} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn expected_rate_agrees_with_simulation() {
    let cases = [
        (2, 3, 1.0, vec![0.6, 0.4], vec![0.55, 0.45]),
        (3, 2, 1.5, vec![0.5, 0.3, 0.2], vec![0.4, 0.35, 0.25]),
        (3, 4, 1.0, vec![0.2, 0.3, 0.5], vec![0.2, 0.3, 0.5]),
    ];
    for (seed, (n, k, m, p, q)) in cases.into_iter().enumerate() {
        let inst = ProblemInstance::new(n, k, m, 4000).unwrap();
        let p = PopularityDist::new(p).unwrap();
        let q = CachingDist::new(q).unwrap();
        let exact = expected_rate_exact(&inst, &p, &q).unwrap();
        let est = monte_carlo_rate(&inst, &p, &q, 300, seed as u64).unwrap();
        assert!(
            (est.mean_rate - exact).abs() <= 3.0 * est.std_error,
            "{} +/- {} vs {exact}",
            est.mean_rate,
            est.std_error
        );
    }
}

#[test]
fn sampled_expectation_agrees_with_exact() {
    let i = inst(4, 6, 1.5);
    let p = PopularityDist::zipf(4, 1.0).unwrap();
    let q = CachingDist::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let exact = expected_rate_exact(&i, &p, &q).unwrap();
    let est = expected_rate_sampled(&i, &p, &q, 20_000, 5).unwrap();
    assert!(
        (est.mean_rate - exact).abs() <= 4.0 * est.std_error,
        "{est:?} vs {exact}"
    );
}

#[test]
fn identity_grid() {
    for step in 1..=10 {
        let x = step as f64 / 10.0;
        for k in 1..=16 {
            let (sum, closed) = per_case_identity_check(x, k).unwrap();
            assert!(
                (sum - closed).abs() <= 1e-10,
                "x={x} K={k}: {sum} vs {closed}"
            );
        }
    }
    let (sum, closed) = per_case_identity_check(0.5, 2).unwrap();
    assert!((sum - 0.75).abs() < 1e-15 && (closed - 0.75).abs() < 1e-15);
}

#[test]
fn prob_a_hand_values() {
    let pa = prob_a(&[0.25, 0.75], 2).unwrap();
    assert!((pa[0] - 0.4375).abs() < 1e-15 && (pa[1] - 0.5625).abs() < 1e-15);
    assert_eq!(prob_a(&[1.0], 5).unwrap(), vec![1.0]);
}

#[test]
fn prob_b_monte_carlo_within_sampling_error() {
    let p = PopularityDist::zipf(6, 0.8).unwrap();
    let exact = prob_b(&p, 5, ProbBMode::Exact).unwrap().values;
    let mc = prob_b(
        &p,
        5,
        ProbBMode::MonteCarlo {
            trials: 50_000,
            seed: 2,
        },
    )
    .unwrap();
    let se = mc.std_errors.unwrap();
    for i in 0..6 {
        assert!(
            (mc.values[i] - exact[i]).abs() <= 5.0 * se[i] + 1e-12,
            "i={i}"
        );
    }
}

#[test]
fn expected_distinct_behaviour() {
    let p = PopularityDist::uniform(2).unwrap();
    assert!((expected_distinct(&p, 2) - 1.5).abs() < 1e-15);
    let p = PopularityDist::zipf(3, 1.0).unwrap();
    assert!((expected_distinct(&p, 1) - 1.0).abs() < 1e-12);
    let mut last = 0.0;
    for k in 1..200 {
        let e = expected_distinct(&p, k);
        assert!(e >= last);
        last = e;
    }
    assert!((3.0 - last).abs() < 1e-9);
}

#[test]
fn q_dagger_tends_to_uniform_for_many_users() {
    for v in [0.5, 1.0, 2.0] {
        let n = 5;
        let qd = q_dagger(&inst(n, 10_000, 1.0), &PopularityDist::zipf(n, v).unwrap()).unwrap();
        for &x in qd.q_dagger.fractions() {
            assert!((x - 0.2).abs() <= 1e-3, "v={v}: {x}");
        }
    }
}

#[test]
fn q_dagger_aligned_with_popularity_before_clamping() {
    for v in [0.3, 1.0, 3.0] {
        for k in [2, 3, 10] {
            let p = PopularityDist::zipf(6, v).unwrap();
            let qd = q_dagger(&inst(6, k, 2.0), &p).unwrap();
            for i in 1..6 {
                assert!(
                    qd.raw[i] <= qd.raw[i - 1] + 1e-15,
                    "v={v} K={k}: {:?}",
                    qd.raw
                );
            }
        }
    }
}

#[test]
fn projection_examples() {
    let (q, report) = project_feasible(&[1.2, -0.2], 1.0).unwrap();
    assert_eq!(q.fractions(), &[1.0, 0.0]);
    assert_eq!(report, vec![0, 1]);
    let (q, report) = project_feasible(&[0.3, 0.7], 1.0).unwrap();
    assert_eq!(q.fractions(), &[0.3, 0.7]);
    assert!(report.is_empty());
}

#[test]
fn numeric_minimum_never_worse_than_q_dagger() {
    let i = inst(2, 3, 1.0);
    let p = PopularityDist::zipf(2, 1.0).unwrap();
    let opt = minimize_ub_numeric(&i, &p, 20).unwrap();
    assert!(opt.upper_bound <= opt.q_dagger_upper_bound.unwrap() + 1e-6);

    let opt =
        minimize_ub_numeric(&inst(3, 3, 1.0), &PopularityDist::uniform(3).unwrap(), 12).unwrap();
    for &x in opt.q.fractions() {
        assert!((x - 1.0 / 3.0).abs() < 1e-6, "{:?}", opt.q);
    }
    let opt =
        minimize_ub_numeric(&inst(1, 3, 1.0), &PopularityDist::uniform(1).unwrap(), 10).unwrap();
    assert_eq!(opt.q.fractions(), &[1.0]);
}

#[test]
fn best_c_beats_grid() {
    for m in [0.5, 1.0, 2.0, 5.0] {
        let c = best_c(m).unwrap();
        let value = |c: f64| c * m - c * c - c * c * m;
        let best = value(c);
        for step in 1..10_000 {
            assert!(value(step as f64 * 1e-4) <= best + 1e-15);
        }
        assert!(ratio_bound_with(m, c, 0.5).unwrap() >= 1.0);
    }
}
