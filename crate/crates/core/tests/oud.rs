use blotto_core::distributions::{win_prob_a, Marginal};
use blotto_core::game::{random_instance, reduce_trivial, Battlefield, GameInstance};
use blotto_core::oud::{
    battlefield_payoff_a, build_ouds, classify_battlefield, oud_payoffs, oud_payoffs_by_integration, residual,
    IndexClass, Kappa,
};
use blotto_core::solver::{solve, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// CDFs of the OUD pair written out row by row from the table of
/// optimal univariate distributions, independent of the auction module.
fn table_cdfs(b: &Battlefield, k: Kappa, x: f64) -> (IndexClass, f64, f64) {
    let Battlefield { w, p, q } = *b;
    let (la, lb) = (k.lam_a, k.lam_b);
    let reach = q * w * lb - p;
    let cap = |v: f64| v.min(1.0);
    if p >= 0.0 {
        if reach <= 0.0 {
            (IndexClass::IP1, 1.0, 1.0)
        } else if reach <= w * la {
            let fa = cap(p / (q * w * lb) + x / (q * w * lb));
            let fb = if x < p / q {
                1.0 - q * lb / la + p / (w * la)
            } else if x <= w * lb {
                1.0 - q * lb / la + q * x / (w * la)
            } else {
                1.0
            };
            (IndexClass::IP2, fa, fb)
        } else {
            let fa = cap(1.0 - la / (q * lb) + x / (q * w * lb));
            let fb = if x < p / q {
                0.0
            } else {
                cap(-p / (w * la) + q * x / (w * la))
            };
            (IndexClass::IP3, fa, fb)
        }
    } else if w * la <= -p {
        (IndexClass::IN1, 1.0, 1.0)
    } else if w * la <= reach {
        let fa = if x < -p {
            1.0 - la / (q * lb) - p / (q * w * lb)
        } else {
            cap(1.0 - la / (q * lb) + x / (q * w * lb))
        };
        let fb = cap(-p / (w * la) + q * x / (w * la));
        (IndexClass::IN2, fa, fb)
    } else {
        let fa = if x < -p {
            0.0
        } else {
            cap(p / (q * w * lb) + x / (q * w * lb))
        };
        let fb = cap(1.0 - q * lb / la + q * x / (w * la));
        (IndexClass::IN3, fa, fb)
    }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Battlefield, Kappa) {
    let w = rng.gen_range(0.1..5.0);
    let p = match rng.gen_range(0..3) {
        0 => 0.0,
        1 => rng.gen_range(0.0..5.0),
        _ => -rng.gen_range(0.0..5.0),
    };
    let q = rng.gen_range(0.2..5.0);
    let k = Kappa::new(rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0));
    (Battlefield::new(w, p, q), k)
}

fn example_four() -> GameInstance {
    GameInstance::new(
        vec![
            Battlefield::new(1.0, 1.0, 1.0),
            Battlefield::new(2.0, 1.0, 1.0),
            Battlefield::new(1.0, -1.0, 1.0),
            Battlefield::new(2.0, -1.0, 1.0),
        ],
        4.0,
        4.0,
        0.5,
    )
    .unwrap()
}

#[test]
fn table_rows_match_the_auction_equilibria() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..2000 {
        let (b, k) = random_pair(&mut rng);
        let g = GameInstance::new(vec![b], 1.0, 1.0, 0.5).unwrap();
        let prof = build_ouds(&g, k).unwrap();
        let o = &prof.battlefields[0];
        let hi = o.f_a.hi().max(o.f_b.hi()) * 1.2 + 0.1;
        for j in 0..20 {
            let x = hi * j as f64 / 19.0;
            let (class, fa, fb) = table_cdfs(&b, k, x);
            assert_eq!(class, o.class);
            assert!((o.f_a.cdf(x) - fa).abs() <= 1e-12, "{b:?} {k:?} x={x}: A {} vs {fa}", o.f_a.cdf(x));
            assert!((o.f_b.cdf(x) - fb).abs() <= 1e-12, "{b:?} {k:?} x={x}: B {} vs {fb}", o.f_b.cdf(x));
        }
        seen.insert(o.class);
    }
    assert_eq!(seen.len(), 6, "all six classes exercised");
}

#[test]
fn exactly_one_condition_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10_000 {
        let (b, k) = random_pair(&mut rng);
        let Battlefield { w, p, q } = b;
        let reach = q * w * k.lam_b - p;
        let a = w * k.lam_a;
        let conds = [
            p >= 0.0 && reach <= 0.0,
            p >= 0.0 && 0.0 < reach && reach <= a,
            p >= 0.0 && reach > a,
            p < 0.0 && a <= -p,
            p < 0.0 && -p < a && a <= reach,
            p < 0.0 && a > reach,
        ];
        assert_eq!(conds.iter().filter(|c| **c).count(), 1);
        let classes = [
            IndexClass::IP1,
            IndexClass::IP2,
            IndexClass::IP3,
            IndexClass::IN1,
            IndexClass::IN2,
            IndexClass::IN3,
        ];
        let idx = conds.iter().position(|c| *c).unwrap();
        assert_eq!(classify_battlefield(&b, k), classes[idx]);
    }
}

#[test]
fn two_battlefield_example_classes() {
    let k = Kappa::new(2.0 + (4.0f64 / 3.0).sqrt(), 2.0 + 12.0f64.sqrt());
    assert_eq!(classify_battlefield(&Battlefield::new(1.0, -2.0, 0.5), k), IndexClass::IN2);
    assert_eq!(classify_battlefield(&Battlefield::new(1.0, 0.0, 1.0), k), IndexClass::IP3);
    assert_eq!(classify_battlefield(&Battlefield::new(1.0, 3.0, 1.0), Kappa::new(1.0, 2.0)), IndexClass::IP1);

    let g = GameInstance::new(
        vec![Battlefield::new(1.0, -2.0, 0.5), Battlefield::new(1.0, 0.0, 1.0)],
        2.0,
        2.0,
        0.5,
    )
    .unwrap();
    let r = residual(&g, k).unwrap();
    assert!(r.norm_inf() <= 1e-9, "{r:?}");
}

#[test]
fn four_battlefield_example() {
    let g = example_four();
    let k = Kappa::new(2.0, 2.0);
    let r = residual(&g, k).unwrap();
    assert_eq!((r.g_a, r.g_b), (0.0, 0.0));
    let prof = build_ouds(&g, k).unwrap();
    let b1 = &prof.battlefields[0];
    assert_eq!(b1.class, IndexClass::IP2);
    assert!((b1.f_a.atom_mass() - 0.5).abs() < 1e-15);
    assert_eq!((b1.f_a.lo(), b1.f_a.hi()), (0.0, 1.0));
    assert!((prof.total_mean_a() - 4.0).abs() < 1e-12);
    assert!((prof.total_mean_b() - 4.0).abs() < 1e-12);
}

#[test]
fn homogeneous_classical_game() {
    for (n, x) in [(3usize, 2.0), (10, 5.0), (7, 1.5)] {
        let g = GameInstance::new(vec![Battlefield::new(1.0, 0.0, 1.0); n], x, x, 0.5).unwrap();
        let lam = 2.0 * x / n as f64;
        let k = Kappa::new(lam, lam);
        assert!(residual(&g, k).unwrap().norm_inf() <= 1e-12);
        let prof = build_ouds(&g, k).unwrap();
        for o in &prof.battlefields {
            assert_eq!(o.f_a, o.f_b);
            assert_eq!(o.f_a.atom_mass(), 0.0);
            assert_eq!((o.f_a.lo(), o.f_a.hi()), (0.0, lam));
        }
        let (pa, pb) = oud_payoffs(&g, k).unwrap();
        assert!((pa - n as f64 / 2.0).abs() < 1e-12);
        assert!((pb - n as f64 / 2.0).abs() < 1e-12);
    }
}

#[test]
fn preallocation_setup_at_zero_pays_half() {
    let g = GameInstance::new(
        [1.0, 1.0, 1.0, 5.0].iter().map(|&w| Battlefield::new(w, 0.0, 1.0)).collect(),
        10.0,
        10.0,
        0.5,
    )
    .unwrap();
    let k = solve(&g, &SolverConfig::for_game(&g).with_delta(1e-9)).unwrap().kappa.unwrap();
    let (pa, _) = oud_payoffs(&g, k).unwrap();
    assert!((pa - 4.0).abs() < 1e-6, "{pa}");
}

#[test]
fn closed_form_payoff_matches_integration_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5000 {
        let (b, k) = random_pair(&mut rng);
        let alpha = rng.gen_range(0.0..=1.0);
        let g = GameInstance::new(vec![b], 1.0, 1.0, alpha).unwrap();
        let prof = build_ouds(&g, k).unwrap();
        let o = &prof.battlefields[0];
        let direct = battlefield_payoff_a(&b, k, alpha);
        let integ = b.w * win_prob_a(&o.f_a, &o.f_b, b.p, b.q, alpha);
        assert!((direct - integ).abs() <= 1e-9, "{b:?} {k:?}: {direct} vs {integ}");
        assert!((-1e-12..=b.w + 1e-12).contains(&direct));
    }
}

#[test]
fn means_match_budgets_at_zeros() {
    for seed in 0..40 {
        let Some(g) = reduce_trivial(&random_instance(6, 300 + seed).unwrap()).reduced else {
            continue;
        };
        let k = solve(&g, &SolverConfig::for_game(&g).with_delta(1e-10)).unwrap().kappa.unwrap();
        let prof = build_ouds(&g, k).unwrap();
        assert!(((prof.total_mean_a() - g.x_a()) / g.x_a()).abs() < 1e-8);
        assert!(((prof.total_mean_b() - g.x_b()) / g.x_b()).abs() < 1e-8);
        let (pa, pb) = oud_payoffs(&g, k).unwrap();
        assert!(pa >= 0.0 && pb >= 0.0);
        assert!((oud_payoffs_by_integration(&g, &prof) - pa).abs() < 1e-9);
    }
}

#[test]
fn residual_turns_negative_for_large_lambda_a() {
    for seed in 0..20 {
        let g = random_instance(5, 500 + seed).unwrap();
        for lb in [0.1, 1.0, 10.0] {
            let mut la = 1.0;
            while residual(&g, Kappa::new(la, lb)).unwrap().g_a >= 0.0 {
                la *= 2.0;
                assert!(la < 1e12, "g_a never turns negative");
            }
        }
    }
}

#[test]
fn non_positive_kappa_is_rejected() {
    let g = example_four();
    assert!(residual(&g, Kappa::new(0.0, 1.0)).is_err());
    assert!(build_ouds(&g, Kappa::new(1.0, -1.0)).is_err());
    assert!(oud_payoffs(&g, Kappa::new(f64::NAN, 1.0)).is_err());
}
