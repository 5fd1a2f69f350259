//! Playable strategies built from an OUD profile, Monte-Carlo payoff
//! estimation and a grid best-response oracle.
//!
//! All allocations live in the normalized frame of [`GameInstance`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{AtomUniform, Marginal};
use crate::error::{Error, Result};
use crate::game::{payoff_a_in_frame, GameInstance, Player, PureAllocation};
use crate::oud::OudProfile;
use crate::par;

/// Upper bound on `n * (grid units + 1)` for the best-response DP.
pub const MAX_DP_CELLS: u128 = 100_000_000;

/// Number of independent RNG streams a Monte-Carlo run is split into.
/// Fixed, so results do not depend on the thread count.
pub const MC_SHARDS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Independent draws from the marginals; budget holds in expectation.
    GlIndependent,
    /// Independent draws rescaled to spend the budget exactly.
    IuRescaled,
    /// Deterministic `budget / n` on every battlefield. Baseline only.
    UniformSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub kind: StrategyKind,
    pub profile: OudProfile,
    pub owner: Player,
    pub budget: f64,
}

impl StrategyProfile {
    pub fn new(g: &GameInstance, kind: StrategyKind, profile: OudProfile, owner: Player) -> Result<Self> {
        if profile.battlefields.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: profile.battlefields.len(),
            });
        }
        Ok(StrategyProfile {
            kind,
            profile,
            owner,
            budget: g.budget(owner),
        })
    }

    pub fn n(&self) -> usize {
        self.profile.battlefields.len()
    }

    pub fn marginals(&self) -> Vec<AtomUniform> {
        match self.owner {
            Player::A => self.profile.marginals_a(),
            Player::B => self.profile.marginals_b(),
        }
    }

    /// Same strategy family for the other player, from the same profile.
    pub fn counterpart(&self, g: &GameInstance, kind: StrategyKind) -> StrategyProfile {
        StrategyProfile {
            kind,
            profile: self.profile.clone(),
            owner: self.owner.other(),
            budget: g.budget(self.owner.other()),
        }
    }

    /// One draw according to `kind`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            StrategyKind::GlIndependent => sample_gl(self, rng),
            StrategyKind::IuRescaled => sample_iu(self, rng).into_values(),
            StrategyKind::UniformSplit => rescale_to_budget(&vec![1.0; self.n()], self.budget),
        }
    }
}

/// Independent per-battlefield draws. The total may exceed the budget on a
/// single draw.
pub fn sample_gl<R: Rng + ?Sized>(sp: &StrategyProfile, rng: &mut R) -> Vec<f64> {
    let pick = |b: &crate::oud::BattlefieldOud| match sp.owner {
        Player::A => b.f_a,
        Player::B => b.f_b,
    };
    sp.profile.battlefields.iter().map(|b| pick(b).sample(rng)).collect()
}

/// Independent draws rescaled to sum to the budget exactly.
pub fn sample_iu<R: Rng + ?Sized>(sp: &StrategyProfile, rng: &mut R) -> PureAllocation {
    let draws = sample_gl(sp, rng);
    let x = rescale_to_budget(&draws, sp.budget);
    PureAllocation::new(x, sp.budget).expect("rescaled draw is budget-feasible")
}

/// `a_i / sum(a) * budget`, or `budget / n` everywhere when all draws are 0.
/// Rounding residue goes into the last component so that the left-to-right
/// sum equals `budget` exactly.
pub fn rescale_to_budget(draws: &[f64], budget: f64) -> Vec<f64> {
    let n = draws.len();
    if n == 0 {
        return Vec::new();
    }
    let total: f64 = draws.iter().sum();
    let mut x: Vec<f64> = if total > 0.0 {
        draws.iter().map(|a| a / total * budget).collect()
    } else {
        vec![budget / n as f64; n]
    };
    if n == 1 {
        return vec![budget];
    }
    // the final addition is the only rounding left: solve it for the last
    // entry. A prefix sitting on a half-ulp tie cannot be fixed from the last
    // entry alone, so nudge the largest leading entry and retry.
    let j = argmax(&x[..n - 1]);
    for _ in 0..8 {
        let mut prefix: f64 = x[..n - 1].iter().sum();
        for _ in 0..64 {
            if prefix <= budget {
                break;
            }
            for v in &mut x[..n - 1] {
                *v *= 1.0 - f64::EPSILON;
            }
            prefix = x[..n - 1].iter().sum();
        }
        if budget - prefix < 0.0 {
            break;
        }
        x[n - 1] = budget - prefix;
        for _ in 0..64 {
            let s = prefix + x[n - 1];
            if s == budget {
                return x;
            }
            x[n - 1] = if s < budget { x[n - 1].next_up() } else { x[n - 1].next_down().max(0.0) };
        }
        x[j] = x[j].next_down().max(0.0);
    }
    x
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Mean payoff of player A.
    pub mean_a: f64,
    /// Mean payoff of player B; `mean_a + mean_b` is the total value.
    pub mean_b: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Monte-Carlo estimate of A's payoff when `sp_a` meets `sp_b`.
///
/// Draws are split over [`MC_SHARDS`] ChaCha streams seeded from one value
/// taken from `rng`; shard sums are reduced in shard order.
pub fn mc_payoff<R: Rng + ?Sized>(
    g: &GameInstance,
    sp_a: &StrategyProfile,
    sp_b: &StrategyProfile,
    samples: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if sp_a.owner != Player::A || sp_b.owner != Player::B {
        return Err(Error::InvalidArgument("profiles must be owned by A and B respectively".into()));
    }
    for sp in [sp_a, sp_b] {
        if sp.n() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: sp.n(),
            });
        }
    }
    let base: u64 = rng.gen();
    let shards = MC_SHARDS.min(samples);
    let per = samples / shards;
    let extra = samples % shards;
    let sums = par::map_range(shards as usize, |k| {
        let k = k as u64;
        let count = per + u64::from(k < extra);
        let mut r = ChaCha8Rng::seed_from_u64(base);
        r.set_stream(k);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let xa = sp_a.sample(&mut r);
            let xb = sp_b.sample(&mut r);
            let v = payoff_a_in_frame(g.battlefields(), g.alpha(), &xa, &xb);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let m = samples as f64;
    let mean = s / m;
    let var = if samples > 1 {
        ((s2 - m * mean * mean) / (m - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean_a: mean,
        mean_b: g.total_value() - mean,
        stderr: (var / m).sqrt(),
        samples,
    })
}

/// Empirical distribution of a sample, queried exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMarginal {
    sorted: Vec<f64>,
}

impl EmpiricalMarginal {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution(
                "empirical marginal needs at least one finite value".into(),
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalMarginal { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|v| *v <= x)
    }

    fn count_lt(&self, x: f64) -> usize {
        self.sorted.partition_point(|v| *v < x)
    }
}

impl Marginal for EmpiricalMarginal {
    fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    fn prob_below(&self, x: f64) -> f64 {
        self.count_lt(x) as f64 / self.len() as f64
    }

    fn prob_at(&self, x: f64) -> f64 {
        (self.count_le(x) - self.count_lt(x)) as f64 / self.len() as f64
    }
}

/// Per-battlefield marginals estimated from `samples` draws of `sp`.
pub fn empirical_marginals<R: Rng + ?Sized>(sp: &StrategyProfile, samples: usize, rng: &mut R) -> Result<Vec<EmpiricalMarginal>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let mut cols = vec![Vec::with_capacity(samples); sp.n()];
    for _ in 0..samples {
        for (c, v) in cols.iter_mut().zip(sp.sample(rng)) {
            c.push(v);
        }
    }
    cols.into_iter().map(EmpiricalMarginal::new).collect()
}

/// Exact expected payoff of `deviator` bidding `bid` on battlefield `i`
/// against an opponent bid distributed as `opp`.
pub fn bid_value<M: Marginal + ?Sized>(g: &GameInstance, i: usize, deviator: Player, bid: f64, opp: &M) -> f64 {
    let b = &g.battlefields()[i];
    match deviator {
        Player::A => {
            // A wins iff B < (x + p) / q
            let t = (bid + b.p) / b.q;
            b.w * (opp.prob_below(t) + g.alpha() * opp.prob_at(t))
        }
        Player::B => {
            // B wins iff A < q y - p
            let s = b.q * bid - b.p;
            b.w * (opp.prob_below(s) + (1.0 - g.alpha()) * opp.prob_at(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub allocation: Vec<f64>,
    pub payoff: f64,
    pub grid_step: f64,
    pub grid_units: usize,
}

/// Best pure allocation of `deviator` on the grid `grid_step * Z>=0` with
/// total at most its budget, against independent opponent marginals.
///
/// Dynamic program over battlefields x budget units; the payoff returned is
/// the exact expected payoff of the returned allocation.
pub fn best_response<M: Marginal + Sync>(
    g: &GameInstance,
    deviator: Player,
    opponent: &[M],
    grid_step: f64,
) -> Result<BestResponse> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::InvalidArgument(format!("grid_step must be positive, got {grid_step}")));
    }
    let n = g.n();
    if opponent.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: opponent.len(),
        });
    }
    let budget = g.budget(deviator);
    let units_f = (budget / grid_step * (1.0 + 1e-12)).floor();
    let cells = (n as u128) * (units_f as u128 + 1);
    if !units_f.is_finite() || cells > MAX_DP_CELLS {
        return Err(Error::GridTooLarge {
            cells,
            limit: MAX_DP_CELLS,
        });
    }
    let k_max = units_f as usize;
    let bid = |j: usize| (j as f64 * grid_step).min(budget);

    let values: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..=k_max).map(|j| bid_value(g, i, deviator, bid(j), &opponent[i])).collect())
        .collect();

    // best[k]: best payoff of the battlefields seen so far using at most k units
    let mut best = vec![0.0f64; k_max + 1];
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(n);
    for v in &values {
        let prev = &best;
        let row = par::map_range(k_max + 1, |k| {
            let mut top = (f64::NEG_INFINITY, 0u32);
            for (j, vj) in v.iter().enumerate().take(k + 1) {
                let cand = prev[k - j] + vj;
                if cand > top.0 {
                    top = (cand, j as u32);
                }
            }
            top
        });
        best = row.iter().map(|r| r.0).collect();
        choice.push(row.iter().map(|r| r.1).collect());
    }

    let mut units = vec![0usize; n];
    let mut k = k_max;
    for i in (0..n).rev() {
        let j = choice[i][k] as usize;
        units[i] = j;
        k -= j;
    }
    let allocation: Vec<f64> = units.iter().map(|&j| bid(j)).collect();
    let payoff = units.iter().enumerate().map(|(i, &j)| values[i][j]).sum();
    Ok(BestResponse {
        allocation,
        payoff,
        grid_step,
        grid_units: k_max,
    })
}

/// A's best response to B's OUD marginals.
pub fn best_response_gl(g: &GameInstance, opponent_b: &[AtomUniform], grid_step: f64) -> Result<BestResponse> {
    best_response(g, Player::A, opponent_b, grid_step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityReport {
    pub kind: StrategyKind,
    /// Player whose strategy is being exploited.
    pub owner: Player,
    pub deviator: Player,
    pub br_payoff: f64,
    pub eq_payoff: f64,
    pub epsilon_hat: f64,
    pub grid_step: f64,
    pub mc_samples: u64,
    pub mc_stderr: f64,
    /// Draws behind the empirical marginals (0 when exact marginals are used).
    pub cdf_samples: u64,
    /// `sum_i w_i * density_i * grid_step` scaled by the favoritism slope:
    /// how much the grid can cost the deviator against the OUD marginals.
    pub discretization_slack: f64,
    pub total_value: f64,
    pub min_w: f64,
    pub max_w: f64,
}

impl ExploitabilityReport {
    pub fn normalized(&self) -> f64 {
        self.epsilon_hat / self.total_value
    }
}

/// How much the other player gains by deviating from the symmetric play of
/// `sp.kind` to a grid best response against `sp`.
///
/// The baseline (`eq_payoff`) is a Monte-Carlo estimate of the deviator's
/// payoff when it plays the same kind of strategy from the same profile.
pub fn exploitability<R: Rng + ?Sized>(
    g: &GameInstance,
    sp: &StrategyProfile,
    grid_step: f64,
    samples: u64,
    rng: &mut R,
) -> Result<ExploitabilityReport> {
    let deviator = sp.owner.other();
    let (br, cdf_samples) = match sp.kind {
        StrategyKind::GlIndependent => (best_response(g, deviator, &sp.marginals(), grid_step)?, 0),
        StrategyKind::IuRescaled | StrategyKind::UniformSplit => {
            let draws = if sp.kind == StrategyKind::UniformSplit { 1 } else { samples };
            let emp = empirical_marginals(sp, draws as usize, rng)?;
            (best_response(g, deviator, &emp, grid_step)?, draws)
        }
    };
    let other = sp.counterpart(g, sp.kind);
    let (sa, sb) = match sp.owner {
        Player::A => (sp, &other),
        Player::B => (&other, sp),
    };
    let mc = mc_payoff(g, sa, sb, samples, rng)?;
    let eq_payoff = match deviator {
        Player::A => mc.mean_a,
        Player::B => mc.mean_b,
    };
    let slack = g
        .battlefields()
        .iter()
        .zip(sp.marginals())
        .map(|(b, m)| {
            let density = if m.is_point_mass() {
                0.0
            } else {
                m.block_mass() / (m.hi() - m.lo())
            };
            let slope = match deviator {
                Player::A => 1.0 / b.q,
                Player::B => b.q,
            };
            b.w * density * slope * grid_step
        })
        .sum();
    let ws = g.battlefields().iter().map(|b| b.w);
    Ok(ExploitabilityReport {
        kind: sp.kind,
        owner: sp.owner,
        deviator,
        br_payoff: br.payoff,
        eq_payoff,
        epsilon_hat: br.payoff - eq_payoff,
        grid_step,
        mc_samples: samples,
        mc_stderr: mc.stderr,
        cdf_samples,
        discretization_slack: slack,
        total_value: g.total_value(),
        min_w: ws.clone().fold(f64::INFINITY, f64::min),
        max_w: ws.fold(0.0, f64::max),
    })
}
