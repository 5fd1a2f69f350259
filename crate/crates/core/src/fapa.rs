//! Closed-form equilibria of the two-bidder all-pay auction with favoritism.
//!
//! Bidder A wins the item when `x_a > q * x_b - p`; ties give A a share
//! `alpha`. Both bidders pay their bids. Depending on the sign of `p` and on
//! how the effective valuations compare, the unique equilibrium falls into
//! one of six regimes.

use serde::{Deserialize, Serialize};

use crate::distributions::{AtomUniform, Marginal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FapaInstance {
    #[serde(rename = "uA")]
    pub u_a: f64,
    #[serde(rename = "uB")]
    pub u_b: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
}

impl FapaInstance {
    pub fn new(u_a: f64, u_b: f64, p: f64, q: f64, alpha: f64) -> Result<Self> {
        let inst = FapaInstance {
            u_a,
            u_b,
            p,
            q,
            alpha,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.u_a, self.u_b, self.p, self.q, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.u_a <= 0.0 || self.u_b <= 0.0 || self.q <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "all-pay auction needs finite uA, uB, q > 0, got {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// The same auction with the bidders exchanged.
    pub fn role_swapped(&self) -> FapaInstance {
        FapaInstance {
            u_a: self.u_b,
            u_b: self.u_a,
            p: -self.p / self.q,
            q: 1.0 / self.q,
            alpha: 1.0 - self.alpha,
        }
    }
}

/// Equilibrium regime. `P*` cover `p >= 0`, `N*` cover `p < 0`; `1` is the
/// pure (both bid zero) case, `2` and `3` the mixed ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    P1,
    P2,
    P3,
    N1,
    N2,
    N3,
}

impl Regime {
    pub fn is_pure(self) -> bool {
        matches!(self, Regime::P1 | Regime::N1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FapaEquilibrium {
    pub regime: Regime,
    #[serde(rename = "distA")]
    pub dist_a: AtomUniform,
    #[serde(rename = "distB")]
    pub dist_b: AtomUniform,
    #[serde(rename = "payoffA")]
    pub payoff_a: f64,
    #[serde(rename = "payoffB")]
    pub payoff_b: f64,
}

/// Boundary equalities fall into the lower-numbered regime, as the
/// inequalities `<=` are written.
pub fn classify(inst: &FapaInstance) -> Regime {
    let FapaInstance { u_a, u_b, p, q, .. } = *inst;
    if p >= 0.0 {
        let reach = q * u_b - p;
        if reach <= 0.0 {
            Regime::P1
        } else if reach <= u_a {
            Regime::P2
        } else {
            Regime::P3
        }
    } else {
        let reach = (u_a + p) / q;
        if reach <= 0.0 {
            Regime::N1
        } else if reach <= u_b {
            Regime::N2
        } else {
            Regime::N3
        }
    }
}

pub fn equilibrium(inst: &FapaInstance) -> FapaEquilibrium {
    let FapaInstance { u_a, u_b, p, q, .. } = *inst;
    let regime = classify(inst);
    let pm = AtomUniform::point_mass();
    let (dist_a, dist_b, payoff_a, payoff_b) = match regime {
        Regime::P1 => (pm, pm, u_a, 0.0),
        Regime::P2 => {
            let reach = q * u_b - p;
            (
                AtomUniform::from_closed_form(p / (q * u_b), 0.0, reach),
                AtomUniform::from_closed_form(1.0 - reach / u_a, p / q, u_b),
                u_a - q * u_b + p,
                0.0,
            )
        }
        Regime::P3 => (
            AtomUniform::from_closed_form(1.0 - u_a / (q * u_b), 0.0, u_a),
            AtomUniform::from_closed_form(0.0, p / q, (u_a + p) / q),
            0.0,
            u_b - (u_a + p) / q,
        ),
        Regime::N1 => (pm, pm, 0.0, u_b),
        Regime::N2 => {
            let reach = (u_a + p) / q;
            (
                AtomUniform::from_closed_form(1.0 - (u_a + p) / (q * u_b), -p, u_a),
                AtomUniform::from_closed_form(-p / u_a, 0.0, reach),
                0.0,
                u_b - reach,
            )
        }
        Regime::N3 => (
            AtomUniform::from_closed_form(0.0, -p, q * u_b - p),
            AtomUniform::from_closed_form(1.0 - q * u_b / u_a, 0.0, u_b),
            u_a - q * u_b + p,
            0.0,
        ),
    };
    FapaEquilibrium {
        regime,
        dist_a,
        dist_b,
        payoff_a,
        payoff_b,
    }
}

/// Expected payoff of A bidding `x` against B's bid distribution.
pub fn bid_payoff_a<M: Marginal + ?Sized>(inst: &FapaInstance, x: f64, dist_b: &M) -> f64 {
    // A wins iff B < (x + p) / q
    let y = (x + inst.p) / inst.q;
    inst.u_a * (dist_b.prob_below(y) + inst.alpha * dist_b.prob_at(y)) - x
}

/// Expected payoff of B bidding `y` against A's bid distribution.
pub fn bid_payoff_b<M: Marginal + ?Sized>(inst: &FapaInstance, y: f64, dist_a: &M) -> f64 {
    // B wins iff A < q y - p
    let x = inst.q * y - inst.p;
    inst.u_b * (dist_a.prob_below(x) + (1.0 - inst.alpha) * dist_a.prob_at(x)) - y
}

/// Largest gain from a pure deviation on the grid `{0, step, 2 step, ...}`
/// up to each bidder's own valuation, relative to the equilibrium payoffs.
/// Non-positive values certify the equilibrium on that grid.
pub fn deviation_gap(inst: &FapaInstance, eq: &FapaEquilibrium, grid_step: f64) -> Result<(f64, f64)> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let best = |limit: f64, f: &dyn Fn(f64) -> f64| {
        let steps = (limit / grid_step).floor() as u64;
        let mut m = f64::NEG_INFINITY;
        for k in 0..=steps {
            m = m.max(f(k as f64 * grid_step));
        }
        m.max(f(limit))
    };
    let gap_a = best(inst.u_a, &|x| bid_payoff_a(inst, x, &eq.dist_b)) - eq.payoff_a;
    let gap_b = best(inst.u_b, &|y| bid_payoff_b(inst, y, &eq.dist_a)) - eq.payoff_b;
    Ok((gap_a, gap_b))
}
