//! Optimal univariate distributions (OUDs) parameterized by
//! `kappa = (lambda_a, lambda_b)`.
//!
//! Battlefield `i` is treated as an all-pay auction in which A values the
//! item at `w_i * lambda_a` and B at `w_i * lambda_b`. Its equilibrium pair
//! is the OUD pair of that battlefield; `kappa` is pinned down by requiring
//! the expected allocations to exhaust both budgets, i.e. by a zero of the
//! residual map `G(kappa) = (g_a, g_b)`.
//!
//! Everything here works in the normalized frame of [`GameInstance`].

use serde::{Deserialize, Serialize};

use crate::distributions::{win_prob_a, AtomUniform};
use crate::error::{Error, Result};
use crate::fapa::{self, FapaInstance};
use crate::game::{Battlefield, GameInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    #[serde(rename = "lambdaA")]
    pub lam_a: f64,
    #[serde(rename = "lambdaB")]
    pub lam_b: f64,
}

impl Kappa {
    pub fn new(lam_a: f64, lam_b: f64) -> Self {
        Kappa { lam_a, lam_b }
    }

    pub fn is_positive(&self) -> bool {
        self.lam_a > 0.0 && self.lam_b > 0.0 && self.lam_a.is_finite() && self.lam_b.is_finite()
    }

    pub fn check_positive(&self) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NonPositiveKappa(self.lam_a, self.lam_b))
        }
    }

    pub fn dist_inf(&self, other: &Kappa) -> f64 {
        (self.lam_a - other.lam_a).abs().max((self.lam_b - other.lam_b).abs())
    }
}

/// Which of the six parameter regimes a battlefield falls in for a given
/// `kappa`; `P*` require `p >= 0`, `N*` require `p < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndexClass {
    IP1,
    IP2,
    IP3,
    IN1,
    IN2,
    IN3,
}

impl IndexClass {
    pub fn label(self) -> &'static str {
        match self {
            IndexClass::IP1 => "IP1",
            IndexClass::IP2 => "IP2",
            IndexClass::IP3 => "IP3",
            IndexClass::IN1 => "IN1",
            IndexClass::IN2 => "IN2",
            IndexClass::IN3 => "IN3",
        }
    }
}

pub fn classify_battlefield(b: &Battlefield, k: Kappa) -> IndexClass {
    let Battlefield { w, p, q } = *b;
    let b_reach = q * w * k.lam_b - p;
    let a_value = w * k.lam_a;
    if p >= 0.0 {
        if b_reach <= 0.0 {
            IndexClass::IP1
        } else if b_reach <= a_value {
            IndexClass::IP2
        } else {
            IndexClass::IP3
        }
    } else if a_value <= -p {
        IndexClass::IN1
    } else if a_value <= b_reach {
        IndexClass::IN2
    } else {
        IndexClass::IN3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BattlefieldOud {
    pub class: IndexClass,
    #[serde(rename = "fA")]
    pub f_a: AtomUniform,
    #[serde(rename = "fB")]
    pub f_b: AtomUniform,
    #[serde(rename = "meanA")]
    pub mean_a: f64,
    #[serde(rename = "meanB")]
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OudProfile {
    pub kappa: Kappa,
    pub battlefields: Vec<BattlefieldOud>,
}

impl OudProfile {
    pub fn total_mean_a(&self) -> f64 {
        self.battlefields.iter().map(|b| b.mean_a).sum()
    }

    pub fn total_mean_b(&self) -> f64 {
        self.battlefields.iter().map(|b| b.mean_b).sum()
    }

    pub fn marginals_a(&self) -> Vec<AtomUniform> {
        self.battlefields.iter().map(|b| b.f_a).collect()
    }

    pub fn marginals_b(&self) -> Vec<AtomUniform> {
        self.battlefields.iter().map(|b| b.f_b).collect()
    }

    pub fn classes(&self) -> Vec<IndexClass> {
        self.battlefields.iter().map(|b| b.class).collect()
    }
}

/// The all-pay auction played on battlefield `b` under `kappa`.
pub fn battlefield_auction(b: &Battlefield, k: Kappa, alpha: f64) -> FapaInstance {
    FapaInstance {
        u_a: b.w * k.lam_a,
        u_b: b.w * k.lam_b,
        p: b.p,
        q: b.q,
        alpha,
    }
}

pub fn build_ouds(g: &GameInstance, k: Kappa) -> Result<OudProfile> {
    k.check_positive()?;
    let battlefields = g
        .battlefields()
        .iter()
        .map(|b| {
            let eq = fapa::equilibrium(&battlefield_auction(b, k, g.alpha()));
            BattlefieldOud {
                class: classify_battlefield(b, k),
                f_a: eq.dist_a,
                f_b: eq.dist_b,
                mean_a: eq.dist_a.mean(),
                mean_b: eq.dist_b.mean(),
            }
        })
        .collect();
    Ok(OudProfile {
        kappa: k,
        battlefields,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    #[serde(rename = "gA")]
    pub g_a: f64,
    #[serde(rename = "gB")]
    pub g_b: f64,
}

impl Residual {
    pub fn norm_inf(&self) -> f64 {
        self.g_a.abs().max(self.g_b.abs())
    }

    /// Both components non-positive: expected allocations fit the budgets.
    pub fn is_feasible(&self) -> bool {
        self.g_a <= 0.0 && self.g_b <= 0.0
    }
}

/// `G(kappa)`. Equivalently `g_a = lambda_a (sum_i E[B_i] - X^B)` and
/// `g_b = lambda_b (sum_i E[A_i] - X^A)`.
pub fn residual(g: &GameInstance, k: Kappa) -> Result<Residual> {
    k.check_positive()?;
    Ok(residual_unchecked(g, k.lam_a, k.lam_b))
}

#[inline]
pub(crate) fn residual_unchecked(g: &GameInstance, lam_a: f64, lam_b: f64) -> Residual {
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for b in g.battlefields() {
        let Battlefield { w, p, q } = *b;
        let qw = q * w;
        let h = (qw * lam_b).min(w * lam_a + p);
        let denom = 2.0 * qw;
        if p >= 0.0 {
            if lam_b > p / qw {
                sum_a += (h * h - p * p) / denom;
                sum_b += (h - p) * (h - p) / denom;
            }
        } else if lam_a > -p / w {
            sum_a += h * h / denom;
            sum_b += ((h - p) * (h - p) - p * p) / denom;
        }
    }
    Residual {
        g_a: sum_a - g.x_b() * lam_a,
        g_b: sum_b - g.x_a() * lam_b,
    }
}

/// Payoff of A on one battlefield when both sides play the OUD pair.
pub fn battlefield_payoff_a(b: &Battlefield, k: Kappa, alpha: f64) -> f64 {
    let Battlefield { w, p, q } = *b;
    let (la, lb) = (k.lam_a, k.lam_b);
    match classify_battlefield(b, k) {
        IndexClass::IP1 => {
            if p > 0.0 {
                w
            } else {
                alpha * w
            }
        }
        IndexClass::IP2 => {
            let reach = q * w * lb - p;
            w * (1.0 - q * lb / la + p / (w * la)) + reach * reach / (2.0 * w * la * q * lb)
        }
        IndexClass::IP3 => w * la / (2.0 * q * lb),
        IndexClass::IN1 => 0.0,
        IndexClass::IN2 => w * la / (2.0 * q * lb) - p * p / (2.0 * w * la * q * lb),
        IndexClass::IN3 => w - q * lb * w / (2.0 * la),
    }
}

/// Expected payoffs `(A, B)` when both players' marginals are the OUDs of `kappa`.
pub fn oud_payoffs(g: &GameInstance, k: Kappa) -> Result<(f64, f64)> {
    k.check_positive()?;
    let pi_a: f64 = g
        .battlefields()
        .iter()
        .map(|b| battlefield_payoff_a(b, k, g.alpha()))
        .sum();
    Ok((pi_a, g.total_value() - pi_a))
}

/// Same quantity as [`oud_payoffs`] obtained by integrating the marginals.
pub fn oud_payoffs_by_integration(g: &GameInstance, profile: &OudProfile) -> f64 {
    g.battlefields()
        .iter()
        .zip(&profile.battlefields)
        .map(|(b, o)| b.w * win_prob_a(&o.f_a, &o.f_b, b.p, b.q, g.alpha()))
        .sum()
}
