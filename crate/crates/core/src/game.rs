//! Game instances with favoritism, the Blotto winner rule and the standing
//! assumptions that exclude trivially-won instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative slack allowed on allocation sums.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }
}

/// One battlefield: value `w`, additive head start `p` (towards A) and
/// effectiveness ratio `q`. A wins when `x_a > q * x_b - p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battlefield {
    pub w: f64,
    pub p: f64,
    pub q: f64,
}

impl Battlefield {
    pub fn new(w: f64, p: f64, q: f64) -> Self {
        Battlefield { w, p, q }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidBattlefield {
                index,
                reason: reason.to_string(),
            })
        };
        if !(self.w.is_finite() && self.p.is_finite() && self.q.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.w <= 0.0 {
            return bad("value w must be positive");
        }
        if self.q <= 0.0 {
            return bad("effectiveness q must be positive");
        }
        Ok(())
    }

    /// The same battlefield seen with the players exchanged:
    /// `x_a > q x_b - p` iff `x_b < x_a / q + p / q`.
    pub fn role_swapped(&self) -> Battlefield {
        Battlefield {
            w: self.w,
            p: -self.p / self.q,
            q: 1.0 / self.q,
        }
    }
}

/// Caller-facing description of an instance; this is the JSON wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    #[serde(rename = "xA")]
    pub x_a: f64,
    #[serde(rename = "xB")]
    pub x_b: f64,
    pub alpha: f64,
    pub battlefields: Vec<Battlefield>,
}

/// A validated instance of the Blotto / Lotto game with favoritism.
///
/// Internally the instance is kept in the frame where `x_a <= x_b`. When the
/// caller supplied `x_a > x_b` the players are exchanged (`p -> -p/q`,
/// `q -> 1/q`, `alpha -> 1 - alpha`) and the caller's description is kept so
/// results can be reported in the original labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    battlefields: Vec<Battlefield>,
    x_a: f64,
    x_b: f64,
    alpha: f64,
    caller: Option<RawInstance>,
}

impl GameInstance {
    pub fn new(battlefields: Vec<Battlefield>, x_a: f64, x_b: f64, alpha: f64) -> Result<Self> {
        Self::from_raw(RawInstance {
            x_a,
            x_b,
            alpha,
            battlefields,
        })
    }

    pub fn from_raw(raw: RawInstance) -> Result<Self> {
        if raw.battlefields.is_empty() {
            return Err(Error::InvalidInstance("at least one battlefield required".into()));
        }
        for (i, b) in raw.battlefields.iter().enumerate() {
            b.validate(i)?;
        }
        if !(raw.x_a.is_finite() && raw.x_a > 0.0 && raw.x_b.is_finite() && raw.x_b > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "budgets must be positive and finite, got xA={} xB={}",
                raw.x_a, raw.x_b
            )));
        }
        if !(0.0..=1.0).contains(&raw.alpha) {
            return Err(Error::InvalidInstance(format!(
                "tie parameter alpha must lie in [0, 1], got {}",
                raw.alpha
            )));
        }
        if raw.x_a <= raw.x_b {
            return Ok(GameInstance {
                battlefields: raw.battlefields,
                x_a: raw.x_a,
                x_b: raw.x_b,
                alpha: raw.alpha,
                caller: None,
            });
        }
        Ok(GameInstance {
            battlefields: raw.battlefields.iter().map(Battlefield::role_swapped).collect(),
            x_a: raw.x_b,
            x_b: raw.x_a,
            alpha: 1.0 - raw.alpha,
            caller: Some(raw),
        })
    }

    /// Battlefields in the normalized frame.
    pub fn battlefields(&self) -> &[Battlefield] {
        &self.battlefields
    }

    pub fn n(&self) -> usize {
        self.battlefields.len()
    }

    /// Normalized budget of the first player (never larger than `x_b`).
    pub fn x_a(&self) -> f64 {
        self.x_a
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// W^n, the total battlefield value.
    pub fn total_value(&self) -> f64 {
        self.battlefields.iter().map(|b| b.w).sum()
    }

    pub fn budget(&self, player: Player) -> f64 {
        match player {
            Player::A => self.x_a,
            Player::B => self.x_b,
        }
    }

    /// True when the caller's players were exchanged during normalization.
    pub fn is_swapped(&self) -> bool {
        self.caller.is_some()
    }

    /// The instance as the caller described it.
    pub fn raw(&self) -> RawInstance {
        match &self.caller {
            Some(raw) => raw.clone(),
            None => RawInstance {
                x_a: self.x_a,
                x_b: self.x_b,
                alpha: self.alpha,
                battlefields: self.battlefields.clone(),
            },
        }
    }

    /// Reorders a pair given in normalized labels into the caller's labels
    /// (and vice versa; the map is an involution).
    pub fn caller_order<T>(&self, a: T, b: T) -> (T, T) {
        if self.is_swapped() {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Maps a player tag between normalized and caller labels.
    pub fn caller_player(&self, player: Player) -> Player {
        if self.is_swapped() {
            player.other()
        } else {
            player
        }
    }

    /// Copy of this instance restricted to the given battlefield indices.
    pub fn subgame(&self, keep: &[usize]) -> Result<GameInstance> {
        let raw = self.raw();
        let bf = keep.iter().map(|&i| raw.battlefields[i]).collect();
        GameInstance::new(bf, raw.x_a, raw.x_b, raw.alpha)
    }
}

impl Serialize for GameInstance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GameInstance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawInstance::deserialize(d)?;
        GameInstance::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

/// A pure allocation of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureAllocation {
    pub values: Vec<f64>,
}

impl PureAllocation {
    /// Validates non-negativity and `sum <= budget` up to `FEASIBILITY_TOL * budget`.
    pub fn new(values: Vec<f64>, budget: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "allocations must be finite and non-negative, got {v}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if sum > budget * (1.0 + FEASIBILITY_TOL) {
            return Err(Error::InfeasibleAllocation { sum, budget });
        }
        Ok(PureAllocation { values })
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Share of a battlefield won by A when A plays `x` and B's effective bid is `y`.
#[inline]
pub fn blotto(x: f64, y: f64, alpha: f64) -> f64 {
    if x > y {
        1.0
    } else if x == y {
        alpha
    } else {
        0.0
    }
}

/// Payoffs of a pure profile, allocations given in the caller's labels.
pub fn pure_payoffs(g: &GameInstance, x_a: &[f64], x_b: &[f64]) -> Result<(f64, f64)> {
    let n = g.n();
    for len in [x_a.len(), x_b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let raw_frame;
    let (bfs, alpha) = match &g.caller {
        Some(raw) => {
            raw_frame = raw;
            (raw_frame.battlefields.as_slice(), raw_frame.alpha)
        }
        None => (g.battlefields(), g.alpha()),
    };
    let pi_a = payoff_a_in_frame(bfs, alpha, x_a, x_b);
    let total: f64 = bfs.iter().map(|b| b.w).sum();
    Ok((pi_a, total - pi_a))
}

/// Payoff of A for allocations in the normalized frame (no checks).
pub(crate) fn payoff_a_in_frame(bfs: &[Battlefield], alpha: f64, x_a: &[f64], x_b: &[f64]) -> f64 {
    bfs.iter()
        .zip(x_a.iter().zip(x_b))
        .map(|(b, (&xa, &xb))| b.w * blotto(xa, b.q * xb - b.p, alpha))
        .sum()
}

/// Payoffs of a pure profile given in the normalized frame.
pub fn pure_payoffs_normalized(g: &GameInstance, x_a: &[f64], x_b: &[f64]) -> Result<(f64, f64)> {
    let n = g.n();
    for len in [x_a.len(), x_b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let pi_a = payoff_a_in_frame(g.battlefields(), g.alpha(), x_a, x_b);
    Ok((pi_a, g.total_value() - pi_a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionStatus {
    pub a1_holds: bool,
    pub a2_violators: Vec<usize>,
    /// Set when the aggregate condition fails: that player can win every
    /// battlefield with a pure allocation.
    pub trivial_winner: Option<Player>,
}

impl AssumptionStatus {
    pub fn holds(&self) -> bool {
        self.a1_holds && self.a2_violators.is_empty()
    }
}

/// Evaluates the aggregate (A1) and per-battlefield (A2) non-triviality
/// conditions in the caller's labels.
pub fn check_assumptions(g: &GameInstance) -> AssumptionStatus {
    let raw = g.raw();
    let (xa, xb) = (raw.x_a, raw.x_b);
    let a_reach: f64 = raw.battlefields.iter().map(|b| b.q * xb - b.p).sum();
    let b_reach: f64 = raw.battlefields.iter().map(|b| (xa + b.p) / b.q).sum();
    let trivial_winner = if a_reach < xa {
        Some(Player::A)
    } else if b_reach < xb {
        Some(Player::B)
    } else {
        None
    };
    let a2_violators = raw
        .battlefields
        .iter()
        .enumerate()
        .filter(|(_, b)| b.q * xb - b.p < 0.0 || (xa + b.p) / b.q < 0.0)
        .map(|(i, _)| i)
        .collect();
    AssumptionStatus {
        a1_holds: trivial_winner.is_none(),
        a2_violators,
        trivial_winner,
    }
}

/// Result of peeling trivially-won battlefields off an instance.
///
/// Battlefields violating A2 are won at zero cost by one side. What remains
/// is either empty, won entirely by one side (A1 fails on it), or a
/// non-trivial instance still to be solved.
#[derive(Debug, Clone)]
pub struct TrivialReduction {
    /// Battlefield indices (caller order) that remain in `reduced`.
    pub kept: Vec<usize>,
    /// Value secured by each player (caller labels) outside `reduced`.
    pub secured_a: f64,
    pub secured_b: f64,
    pub reduced: Option<GameInstance>,
    pub winner_takes_rest: Option<Player>,
}

impl TrivialReduction {
    pub fn is_trivial(&self) -> bool {
        // every removed battlefield carries positive value
        self.reduced.is_none() || self.secured_a + self.secured_b > 0.0
    }
}

pub fn reduce_trivial(g: &GameInstance) -> TrivialReduction {
    let raw = g.raw();
    let (xa, xb) = (raw.x_a, raw.x_b);
    let mut secured_a = 0.0;
    let mut secured_b = 0.0;
    let mut kept = Vec::new();
    for (i, b) in raw.battlefields.iter().enumerate() {
        if b.q * xb - b.p < 0.0 {
            secured_a += b.w;
        } else if (xa + b.p) / b.q < 0.0 {
            secured_b += b.w;
        } else {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return TrivialReduction {
            kept,
            secured_a,
            secured_b,
            reduced: None,
            winner_takes_rest: None,
        };
    }
    let sub = g.subgame(&kept).expect("subgame of a valid instance is valid");
    let status = check_assumptions(&sub);
    match status.trivial_winner {
        Some(winner) => {
            let rest: f64 = kept.iter().map(|&i| raw.battlefields[i].w).sum();
            match winner {
                Player::A => secured_a += rest,
                Player::B => secured_b += rest,
            }
            TrivialReduction {
                kept: Vec::new(),
                secured_a,
                secured_b,
                reduced: None,
                winner_takes_rest: Some(winner),
            }
        }
        None => TrivialReduction {
            kept,
            secured_a,
            secured_b,
            reduced: Some(sub),
            winner_takes_rest: None,
        },
    }
}

/// Random instance following the experimental recipe: integer budgets in
/// 1..=100 with `x_a <= x_b`, `w ~ U(0, x_a]`, `p` positive / negative /
/// zero with equal odds, `q` above one / below one / one with equal odds.
pub fn random_instance(n: usize, seed: u64) -> Result<GameInstance> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b1: u32 = rng.gen_range(1..=100);
    let b2: u32 = rng.gen_range(1..=100);
    let (xa, xb) = (b1.min(b2) as f64, b1.max(b2) as f64);
    let mut bfs = Vec::with_capacity(n);
    for _ in 0..n {
        // gen::<f64>() is in [0, 1); flip it to land in (0, xa].
        let w = xa * (1.0 - rng.gen::<f64>());
        let p = match rng.gen_range(0..3) {
            0 => open_uniform(&mut rng, 0.0, xa),
            1 => open_uniform(&mut rng, -xa, 0.0),
            _ => 0.0,
        };
        let q = match rng.gen_range(0..3) {
            0 => open_uniform(&mut rng, 1.0, xa),
            1 => open_uniform(&mut rng, 1.0 / xa, 1.0),
            _ => 1.0,
        };
        bfs.push(Battlefield::new(w, p, q));
    }
    GameInstance::new(bfs, xa, xb, 0.5)
}

/// Draw from the open interval (lo, hi); collapses to `lo` when empty.
fn open_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    loop {
        let v = lo + (hi - lo) * rng.gen::<f64>();
        if v > lo && v < hi {
            return v;
        }
    }
}
