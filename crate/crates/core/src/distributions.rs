//! The "atom at zero plus uniform block" family.
//!
//! Every equilibrium marginal of the all-pay auction with favoritism, and
//! hence every optimal univariate distribution, has this shape: a point mass
//! at 0 and the remaining probability spread uniformly on `[lo, hi]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of a non-negative bid as seen by a best-responding opponent.
pub trait Marginal {
    /// `P(X <= x)`.
    fn cdf(&self, x: f64) -> f64;
    /// `P(X < x)`.
    fn prob_below(&self, x: f64) -> f64;
    /// `P(X == x)`.
    fn prob_at(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomUniform {
    #[serde(rename = "atom")]
    atom_mass: f64,
    lo: f64,
    hi: f64,
}

impl AtomUniform {
    pub fn new(atom_mass: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(atom_mass.is_finite() && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite parameter".into()));
        }
        if !(0.0..=1.0).contains(&atom_mass) {
            return Err(Error::InvalidDistribution(format!(
                "atom mass {atom_mass} outside [0, 1]"
            )));
        }
        if atom_mass == 1.0 {
            return Ok(Self::point_mass());
        }
        if lo < 0.0 {
            return Err(Error::InvalidDistribution(format!("negative support start {lo}")));
        }
        if hi <= lo {
            return Err(Error::InvalidDistribution(format!(
                "uniform block [{lo}, {hi}] has no width but carries mass {}",
                1.0 - atom_mass
            )));
        }
        Ok(AtomUniform { atom_mass, lo, hi })
    }

    /// All mass at 0.
    pub fn point_mass() -> Self {
        AtomUniform {
            atom_mass: 1.0,
            lo: 0.0,
            hi: 0.0,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(0.0, lo, hi)
    }

    /// Builder used by the closed forms, which clamp round-off in the atom.
    pub(crate) fn from_closed_form(atom_mass: f64, lo: f64, hi: f64) -> Self {
        let atom_mass = atom_mass.clamp(0.0, 1.0);
        if atom_mass >= 1.0 || hi <= lo {
            return Self::point_mass();
        }
        AtomUniform {
            atom_mass,
            lo: lo.max(0.0),
            hi,
        }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atom_mass
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_point_mass(&self) -> bool {
        self.atom_mass == 1.0
    }

    /// Mass of the uniform block.
    pub fn block_mass(&self) -> f64 {
        1.0 - self.atom_mass
    }

    pub fn mean(&self) -> f64 {
        if self.is_point_mass() {
            return 0.0;
        }
        self.block_mass() * 0.5 * (self.lo + self.hi)
    }

    /// Smallest `x >= 0` with `cdf(x) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= self.atom_mass || self.is_point_mass() {
            return 0.0;
        }
        let frac = ((u - self.atom_mass) / self.block_mass()).min(1.0);
        self.lo + frac * (self.hi - self.lo)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        if u < self.atom_mass {
            return 0.0;
        }
        let v: f64 = rng.gen();
        self.lo + v * (self.hi - self.lo)
    }
}

impl Marginal for AtomUniform {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let frac = ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        self.atom_mass + self.block_mass() * frac
    }

    fn prob_below(&self, x: f64) -> f64 {
        // the only discontinuity sits at 0
        if x <= 0.0 {
            0.0
        } else {
            self.cdf(x)
        }
    }

    fn prob_at(&self, x: f64) -> f64 {
        if x == 0.0 {
            self.atom_mass
        } else {
            0.0
        }
    }
}

/// Probability mass of the uniform block of `d` that lies strictly below `y`
/// (mass-weighted fraction of `[lo, hi]` left of `y`).
fn block_below(lo: f64, hi: f64, y: f64) -> f64 {
    ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// `∫_a^b (clamp(x, c, d) - c) dx`: the building block of `P(U1 > U2)` for
/// independent uniforms `U1 ~ [a, b]`, `U2 ~ [c, d]`.
fn ramp_integral(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let antiderivative = |x: f64| {
        if x <= c {
            0.0
        } else if x <= d {
            0.5 * (x - c) * (x - c)
        } else {
            0.5 * (d - c) * (d - c) + (d - c) * (x - d)
        }
    };
    antiderivative(b) - antiderivative(a)
}

/// Exact `P(A > q B - p) + alpha * P(A == q B - p)` for independent
/// `A ~ d_a`, `B ~ d_b`.
///
/// Only the two atoms can tie with positive probability (both bids at 0 with
/// `p == 0`); every other coincidence has probability zero.
pub fn win_prob_a(d_a: &AtomUniform, d_b: &AtomUniform, p: f64, q: f64, alpha: f64) -> f64 {
    let a0 = d_a.atom_mass;
    let b0 = d_b.atom_mass;
    let mut prob = 0.0;

    // atom vs atom: 0 against -p
    if a0 > 0.0 && b0 > 0.0 {
        prob += a0 * b0 * crate::game::blotto(0.0, -p, alpha);
    }
    // B's effective bid q B - p from its uniform block
    let (yl, yh) = (q * d_b.lo - p, q * d_b.hi - p);
    if a0 > 0.0 && !d_b.is_point_mass() {
        prob += a0 * d_b.block_mass() * block_below(yl, yh, 0.0);
    }
    if !d_a.is_point_mass() && b0 > 0.0 {
        prob += d_a.block_mass() * b0 * (1.0 - block_below(d_a.lo, d_a.hi, -p));
    }
    if !d_a.is_point_mass() && !d_b.is_point_mass() {
        let both = ramp_integral(d_a.lo, d_a.hi, yl, yh) / ((d_a.hi - d_a.lo) * (yh - yl));
        prob += d_a.block_mass() * d_b.block_mass() * both;
    }
    prob.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_mean(d: &AtomUniform) -> f64 {
        // midpoint rule on 1 - F over [0, hi]
        if d.hi() == 0.0 {
            return 0.0;
        }
        let steps = 200_000;
        let h = d.hi() / steps as f64;
        (0..steps)
            .map(|k| (1.0 - d.cdf((k as f64 + 0.5) * h)) * h)
            .sum()
    }

    #[test]
    fn cdf_examples() {
        // B-marginal of an all-pay auction with uA=4, uB=2, p=1.5, q=1.5
        let atom = 1.0 - 1.5 * 2.0 / 4.0 + 1.5 / 4.0;
        assert_eq!(atom, 0.625);
        let d = AtomUniform::new(atom, 1.0, 2.0).unwrap();
        assert_eq!(d.cdf(0.0), 0.625);
        assert_eq!(d.cdf(0.5), 0.625);
        assert_eq!(d.cdf(2.0), 1.0);

        assert_eq!(AtomUniform::point_mass().cdf(0.0), 1.0);
        assert_eq!(AtomUniform::uniform(1.0, 3.0).unwrap().cdf(2.0), 0.5);
        assert_eq!(AtomUniform::uniform(1.0, 3.0).unwrap().cdf(-1.0), 0.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(AtomUniform::point_mass().mean(), 0.0);
        assert_eq!(AtomUniform::uniform(0.0, 4.0).unwrap().mean(), 2.0);
        let d = AtomUniform::new(0.5, 1.0, 3.0).unwrap();
        assert!((quad_mean(&d) - 1.0).abs() < 1e-9);
        assert_eq!(d.mean(), 1.0);
    }

    #[test]
    fn rejects_degenerate_blocks() {
        assert!(AtomUniform::new(0.5, 1.0, 1.0).is_err());
        assert!(AtomUniform::new(1.2, 0.0, 1.0).is_err());
        assert!(AtomUniform::new(0.0, -1.0, 1.0).is_err());
        assert!(AtomUniform::new(1.0, 3.0, 5.0).unwrap().is_point_mass());
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pm = AtomUniform::point_mass();
        assert!((0..100).all(|_| pm.sample(&mut rng) == 0.0));

        let d = AtomUniform::uniform(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..10)
            .map(|_| d.sample(&mut ChaCha8Rng::seed_from_u64(9)))
            .collect();
        assert!(a.iter().all(|&v| v == a[0]));

        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn sampling_matches_cdf() {
        let d = AtomUniform::new(0.3, 0.5, 2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        // compare only at the ends of runs of equal values (the atom repeats)
        for (i, &x) in xs.iter().enumerate() {
            if i + 1 == n || xs[i + 1] != x {
                ks = ks.max((d.cdf(x) - (i + 1) as f64 / n as f64).abs());
            }
            if i == 0 || xs[i - 1] != x {
                ks = ks.max((d.prob_below(x) - i as f64 / n as f64).abs());
            }
        }
        assert!(ks < 0.002, "KS distance {ks}");
    }

    #[test]
    fn win_prob_examples() {
        let pm = AtomUniform::point_mass();
        assert_eq!(win_prob_a(&pm, &pm, 1.0, 1.0, 0.5), 1.0);
        assert!((win_prob_a(&pm, &pm, 0.0, 1.0, 0.3) - 0.3).abs() < 1e-15);
        let u = AtomUniform::uniform(0.0, 1.0).unwrap();
        assert!((win_prob_a(&u, &u, 0.0, 1.0, 0.5) - 0.5).abs() < 1e-15);
    }

    fn arb_dist() -> impl Strategy<Value = AtomUniform> {
        prop_oneof![
            1 => Just(AtomUniform::point_mass()),
            6 => (0.0f64..0.9, 0.0f64..3.0, 0.01f64..3.0)
                .prop_map(|(a, lo, width)| AtomUniform::new(a, lo, lo + width).unwrap()),
        ]
    }

    fn mc_win_prob(da: &AtomUniform, db: &AtomUniform, p: f64, q: f64, alpha: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1_000_000;
        let s: f64 = (0..n)
            .map(|_| {
                let a = da.sample(&mut rng);
                let b = db.sample(&mut rng);
                crate::game::blotto(a, q * b - p, alpha)
            })
            .sum();
        s / n as f64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn cdf_monotone_and_quantile_consistent(d in arb_dist(), xs in proptest::collection::vec(-1.0f64..7.0, 20)) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                prop_assert!(d.cdf(w[0]) <= d.cdf(w[1]));
            }
            prop_assert_eq!(d.cdf(d.hi()), 1.0);
            for &x in xs.iter().filter(|&&x| x >= 0.0 && x <= d.hi()) {
                prop_assert!(d.quantile(d.cdf(x)) <= x + 1e-12);
            }
        }

        #[test]
        fn mean_matches_quadrature(d in arb_dist()) {
            let m = d.mean();
            let qm = quad_mean(&d);
            prop_assert!((m - qm).abs() <= 1e-9 * m.max(1.0), "{} vs {}", m, qm);
        }

        #[test]
        fn win_prob_role_swap_complement(
            da in arb_dist(), db in arb_dist(),
            p in prop_oneof![Just(0.0), -3.0f64..3.0],
            q in 0.1f64..5.0, alpha in 0.0f64..=1.0,
        ) {
            let a = win_prob_a(&da, &db, p, q, alpha);
            let b = win_prob_a(&db, &da, -p / q, 1.0 / q, 1.0 - alpha);
            prop_assert!((a + b - 1.0).abs() < 1e-12, "{} + {}", a, b);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn win_prob_matches_monte_carlo(
            da in arb_dist(), db in arb_dist(),
            p in prop_oneof![Just(0.0), -3.0f64..3.0],
            q in 0.1f64..5.0, alpha in 0.0f64..=1.0, seed in 0u64..1000,
        ) {
            let exact = win_prob_a(&da, &db, p, q, alpha);
            let mc = mc_win_prob(&da, &db, p, q, alpha, seed);
            prop_assert!((exact - mc).abs() < 0.003, "exact {} mc {}", exact, mc);
        }
    }
}
