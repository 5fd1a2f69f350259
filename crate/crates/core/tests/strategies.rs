use blotto_core::fapa::{self, bid_payoff_a};
use blotto_core::game::{pure_payoffs_normalized, Battlefield, GameInstance, Player};
use blotto_core::oud::{battlefield_auction, build_ouds, oud_payoffs, Kappa};
use blotto_core::solver::{solve, SolverConfig};
use blotto_core::strategies::{
    best_response, bid_value, exploitability, mc_payoff, rescale_to_budget, sample_gl, sample_iu, StrategyKind,
    StrategyProfile,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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

fn profiles(g: &GameInstance, k: Kappa, kind: StrategyKind) -> (StrategyProfile, StrategyProfile) {
    let prof = build_ouds(g, k).unwrap();
    (
        StrategyProfile::new(g, kind, prof.clone(), Player::A).unwrap(),
        StrategyProfile::new(g, kind, prof, Player::B).unwrap(),
    )
}

#[test]
fn point_masses_give_zero_allocations() {
    let g = GameInstance::new(vec![Battlefield::new(1.0, 3.0, 1.0); 3], 1.0, 2.0, 0.5).unwrap();
    let (sa, sb) = profiles(&g, Kappa::new(1.0, 2.0), StrategyKind::GlIndependent);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        assert_eq!(sample_gl(&sa, &mut rng), vec![0.0; 3]);
        assert_eq!(sample_gl(&sb, &mut rng), vec![0.0; 3]);
    }
}

#[test]
fn gl_total_matches_budget_on_average() {
    let g = example_four();
    let (sa, _) = profiles(&g, Kappa::new(2.0, 2.0), StrategyKind::GlIndependent);
    let var: f64 = sa
        .marginals()
        .iter()
        .map(|d| {
            // second moment of atom plus uniform block
            let m2 = d.block_mass() * (d.lo() * d.lo() + d.lo() * d.hi() + d.hi() * d.hi()) / 3.0;
            m2 - d.mean() * d.mean()
        })
        .sum();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mean = (0..n).map(|_| sample_gl(&sa, &mut rng).iter().sum::<f64>()).sum::<f64>() / n as f64;
    let sigma = (var / n as f64).sqrt();
    assert!((mean - 4.0).abs() <= 3.0 * sigma, "{mean} vs 4 (sigma {sigma})");
}

#[test]
fn rescaling_examples() {
    assert_eq!(rescale_to_budget(&[1.0, 3.0], 8.0), vec![2.0, 6.0]);
    assert_eq!(rescale_to_budget(&[0.0, 0.0, 0.0, 0.0], 2.0), vec![0.5; 4]);
    assert!(rescale_to_budget(&[], 3.0).is_empty());
}

proptest! {
    #[test]
    fn rescaled_draws_spend_the_budget(
        draws in prop::collection::vec(0.0f64..100.0, 1..40),
        budget in 1e-3f64..1e4,
    ) {
        let x = rescale_to_budget(&draws, budget);
        prop_assert_eq!(x.len(), draws.len());
        prop_assert!(x.iter().all(|v| *v >= 0.0));
        prop_assert_eq!(x.iter().sum::<f64>(), budget);
    }
}

#[test]
fn iu_draws_are_pure_allocations() {
    let g = example_four();
    let (sa, sb) = profiles(&g, Kappa::new(2.0, 2.0), StrategyKind::IuRescaled);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let xa = sample_iu(&sa, &mut rng);
        let xb = sample_iu(&sb, &mut rng);
        assert_eq!(xa.total(), 4.0);
        assert_eq!(xb.total(), 4.0);
        let (pa, pb) = pure_payoffs_normalized(&g, &xa.into_values(), &xb.into_values()).unwrap();
        assert!((pa + pb - g.total_value()).abs() < 1e-12);
    }
}

#[test]
fn gl_monte_carlo_matches_oud_value() {
    let g = example_four();
    let k = Kappa::new(2.0, 2.0);
    let (sa, sb) = profiles(&g, k, StrategyKind::GlIndependent);
    let est = mc_payoff(&g, &sa, &sb, 200_000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let (pa, _) = oud_payoffs(&g, k).unwrap();
    assert!((est.mean_a - pa).abs() <= 3.0 * est.stderr, "{} vs {pa} (se {})", est.mean_a, est.stderr);
    assert!((est.mean_a + est.mean_b - g.total_value()).abs() < 1e-12);
}

#[test]
fn monte_carlo_is_reproducible() {
    let g = example_four();
    let (sa, sb) = profiles(&g, Kappa::new(2.0, 2.0), StrategyKind::IuRescaled);
    let run = |seed| mc_payoff(&g, &sa, &sb, 5000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(run(7), run(7));
    assert_ne!(run(7).mean_a, run(8).mean_a);
    let one = run(9);
    assert_eq!(one.samples, 5000);
    let single = mc_payoff(&g, &sa, &sb, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(single, mc_payoff(&g, &sa, &sb, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap());
    assert_eq!(single.stderr, 0.0);
    assert!(mc_payoff(&g, &sa, &sb, 0, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
    assert!(mc_payoff(&g, &sb, &sa, 10, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
}

#[test]
fn best_response_against_zero_bids_takes_everything() {
    // every battlefield has p > 0, so bidding zero against zero wins
    let g = GameInstance::new(
        vec![Battlefield::new(1.0, 3.0, 1.0), Battlefield::new(2.5, 0.5, 2.0)],
        1.0,
        2.0,
        0.5,
    )
    .unwrap();
    let (_, sb) = profiles(&g, Kappa::new(1e-3, 1e-3), StrategyKind::GlIndependent);
    assert!(sb.marginals().iter().all(|d| d.is_point_mass()));
    let br = best_response(&g, Player::A, &sb.marginals(), 0.01).unwrap();
    assert!((br.payoff - g.total_value()).abs() < 1e-12);
    assert!(br.allocation.iter().sum::<f64>() <= g.x_a() + 1e-12);
}

#[test]
fn bid_values_agree_with_each_battlefield_auction() {
    let g = example_four();
    let k = Kappa::new(2.0, 2.0);
    let prof = build_ouds(&g, k).unwrap();
    for (i, b) in g.battlefields().iter().enumerate() {
        let inst = battlefield_auction(b, k, g.alpha());
        let f_b = prof.marginals_b()[i];
        for j in 0..=40 {
            let x = g.x_a() * j as f64 / 40.0;
            let lagrangian = k.lam_a * bid_value(&g, i, Player::A, x, &f_b) - x;
            assert!((lagrangian - bid_payoff_a(&inst, x, &f_b)).abs() < 1e-12);
        }
        let eq = fapa::equilibrium(&inst);
        let (gap_a, gap_b) = fapa::deviation_gap(&inst, &eq, 1e-3).unwrap();
        assert!(gap_a <= 1e-9 && gap_b <= 1e-9, "battlefield {i}: {gap_a} {gap_b}");
    }
    // spending the budget on the equilibrium supports cannot beat the OUD value by much
    let br = best_response(&g, Player::A, &prof.marginals_b(), 1e-3).unwrap();
    let (pa, _) = oud_payoffs(&g, k).unwrap();
    assert!(br.payoff >= pa - 1e-2, "{} vs {pa}", br.payoff);
}

#[test]
fn refining_the_grid_never_hurts() {
    let g = example_four();
    let (_, sb) = profiles(&g, Kappa::new(2.0, 2.0), StrategyKind::GlIndependent);
    let m = sb.marginals();
    let mut last = f64::NEG_INFINITY;
    for step in [0.1, 0.05, 0.025] {
        let br = best_response(&g, Player::A, &m, step).unwrap();
        assert!(br.payoff >= last - 1e-12, "step {step}: {} < {last}", br.payoff);
        last = br.payoff;
    }
}

#[test]
fn uniform_split_is_exploitable() {
    let g = GameInstance::new(
        vec![
            Battlefield::new(1.0, 0.5, 1.0),
            Battlefield::new(3.0, -0.5, 1.2),
            Battlefield::new(2.0, 0.0, 0.8),
        ],
        2.0,
        3.0,
        0.5,
    )
    .unwrap();
    let k = solve(&g, &SolverConfig::for_game(&g)).unwrap().kappa.unwrap();
    let prof = build_ouds(&g, k).unwrap();
    let sp = StrategyProfile::new(&g, StrategyKind::UniformSplit, prof, Player::A).unwrap();
    let rep = exploitability(&g, &sp, 0.01, 10_000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(rep.deviator, Player::B);
    assert!(rep.epsilon_hat > 0.0, "{rep:?}");
    assert!(rep.normalized() <= 1.0);
}
