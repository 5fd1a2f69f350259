//! Winding-number dichotomy for the positive zero of the residual map `G`.
//!
//! The boundary of a rectangle is traversed counterclockwise and its image
//! under `G` is approximated by a polygon. Samples are refined until every
//! polygon edge is shorter (in the max norm) than the distance of its
//! endpoints to the origin, so no turn around the origin can hide between
//! two consecutive samples. The winding number is the signed count of
//! crossings of the positive x-axis. A non-zero winding number certifies a
//! zero inside the rectangle; the solver first enlarges the start square
//! until that happens and then halves the rectangle, always keeping a half
//! with non-zero winding, until its diameter drops below `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_assumptions, AssumptionStatus, GameInstance};
use crate::oud::{residual, residual_unchecked, Kappa, Residual};

/// Smallest lower corner used while enlarging.
pub const MIN_CORNER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let finite = [x_lo, x_hi, y_lo, y_hi].iter().all(|v| v.is_finite());
        if !finite || x_lo <= 0.0 || y_lo <= 0.0 || x_lo >= x_hi || y_lo >= y_hi {
            return Err(Error::InvalidRect(format!(
                "[{x_lo}, {x_hi}] x [{y_lo}, {y_hi}] must be non-degenerate and strictly positive"
            )));
        }
        Ok(Rect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    pub fn square(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, lo, hi)
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn diameter(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn center(&self) -> Kappa {
        Kappa::new(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))
    }

    pub fn contains(&self, k: &Kappa) -> bool {
        (self.x_lo..=self.x_hi).contains(&k.lam_a) && (self.y_lo..=self.y_hi).contains(&k.lam_b)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x_lo <= other.x_lo
            && other.x_hi <= self.x_hi
            && self.y_lo <= other.y_lo
            && other.y_hi <= self.y_hi
    }

    /// Two halves of equal area, cut across the longer side (x on ties).
    /// The first half is the left / lower one.
    pub fn split(&self) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let mid = 0.5 * (self.x_lo + self.x_hi);
            (
                Rect { x_hi: mid, ..*self },
                Rect { x_lo: mid, ..*self },
            )
        } else {
            let mid = 0.5 * (self.y_lo + self.y_hi);
            (
                Rect { y_hi: mid, ..*self },
                Rect { y_lo: mid, ..*self },
            )
        }
    }

    /// Point of the boundary at parameter `t in [0, 4]`, counterclockwise
    /// from `(x_lo, y_lo)`: bottom, right, top, left edge.
    pub fn boundary_point(&self, t: f64) -> Kappa {
        let edge = (t.floor() as usize).min(3);
        let s = t - edge as f64;
        let (k, frac) = match edge {
            0 => (0, s),
            1 => (1, s),
            2 => (2, 1.0 - s),
            _ => (3, 1.0 - s),
        };
        self.edge_point(k, frac)
    }

    /// Point on edge `k` at canonical fraction `frac` (measured along the
    /// increasing coordinate, independent of traversal direction).
    fn edge_point(&self, k: usize, frac: f64) -> Kappa {
        let lerp = |lo: f64, hi: f64| {
            if frac >= 1.0 {
                hi
            } else if frac <= 0.0 {
                lo
            } else {
                lo + frac * (hi - lo)
            }
        };
        match k {
            0 => Kappa::new(lerp(self.x_lo, self.x_hi), self.y_lo),
            1 => Kappa::new(self.x_hi, lerp(self.y_lo, self.y_hi)),
            2 => Kappa::new(lerp(self.x_lo, self.x_hi), self.y_hi),
            _ => Kappa::new(self.x_lo, lerp(self.y_lo, self.y_hi)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub delta: f64,
    pub m0: f64,
    #[serde(rename = "M0")]
    pub big_m0: f64,
    pub max_enlarge: u32,
    pub max_bisect: u32,
    /// `None` selects `1e-12 * X^B * M`, with `M` the current upper corner.
    pub eps_zero: Option<f64>,
    pub max_refine_depth: u32,
    /// Uniform pieces per rectangle edge before adaptive refinement.
    pub initial_segments: u32,
}

impl SolverConfig {
    /// Defaults scaled to the instance: start square `[1e-3 min(X^A, 1), 10 X^A]`.
    pub fn for_game(g: &GameInstance) -> Self {
        SolverConfig {
            delta: 1e-6,
            m0: 1e-3 * g.x_a().min(1.0),
            big_m0: 10.0 * g.x_a(),
            max_enlarge: 60,
            max_bisect: 400,
            eps_zero: None,
            max_refine_depth: 60,
            initial_segments: 8,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_start(mut self, m0: f64, big_m0: f64) -> Self {
        self.m0 = m0;
        self.big_m0 = big_m0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidConfig(s));
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.m0.is_finite() && self.m0 > 0.0 && self.big_m0.is_finite() && self.m0 < self.big_m0) {
            return bad(format!("need 0 < m0 < M0, got m0={} M0={}", self.m0, self.big_m0));
        }
        if self.max_bisect == 0 || self.max_refine_depth == 0 || self.initial_segments == 0 {
            return bad("iteration caps must be positive".into());
        }
        if let Some(eps) = self.eps_zero {
            if !(eps.is_finite() && eps > 0.0) {
                return bad(format!("eps_zero must be positive, got {eps}"));
            }
        }
        Ok(())
    }

    fn eps_for(&self, g: &GameInstance, r: &Rect) -> f64 {
        self.eps_zero
            .unwrap_or_else(|| 1e-12 * g.x_b() * r.x_hi.max(r.y_hi))
    }
}

/// One vertex of the polygonal image `G(boundary)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub t: f64,
    pub kappa: Kappa,
    pub g: Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindingOutcome {
    /// Signed number of turns around the origin and the first boundary
    /// sample with both residual components non-positive.
    Count { winding: i64, candidate: Option<Kappa> },
    /// A boundary sample with `|G|_inf < eps_zero`; the zero sits on the curve.
    ZeroOnBoundary { kappa: Kappa },
}

impl WindingOutcome {
    /// Zero-on-boundary counts as non-zero.
    pub fn is_nonzero(&self) -> bool {
        match self {
            WindingOutcome::Count { winding, .. } => *winding != 0,
            WindingOutcome::ZeroOnBoundary { .. } => true,
        }
    }

    pub fn winding(&self) -> Option<i64> {
        match self {
            WindingOutcome::Count { winding, .. } => Some(*winding),
            WindingOutcome::ZeroOnBoundary { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingResult {
    pub outcome: WindingOutcome,
    /// Polygon vertices in traversal order; closed (last equals first).
    pub samples: Vec<CurveSample>,
}

#[inline]
fn norm_inf(r: &Residual) -> f64 {
    r.g_a.abs().max(r.g_b.abs())
}

#[inline]
fn chord_ok(a: &Residual, b: &Residual) -> bool {
    let chord = (a.g_a - b.g_a).abs().max((a.g_b - b.g_b).abs());
    chord < norm_inf(a).min(norm_inf(b))
}

struct ZeroHit(Kappa);

enum EdgeError {
    Zero(ZeroHit),
    Refine(Error),
}

/// Adaptive samples of one edge, in canonical (increasing) direction.
fn sample_edge(
    g: &GameInstance,
    r: &Rect,
    edge: usize,
    cfg: &SolverConfig,
    eps: f64,
) -> std::result::Result<Vec<(f64, Kappa, Residual)>, EdgeError> {
    let eval = |frac: f64| -> std::result::Result<(f64, Kappa, Residual), EdgeError> {
        let k = r.edge_point(edge, frac);
        let res = residual_unchecked(g, k.lam_a, k.lam_b);
        if norm_inf(&res) < eps {
            return Err(EdgeError::Zero(ZeroHit(k)));
        }
        Ok((frac, k, res))
    };
    let pieces = cfg.initial_segments as usize;
    let mut out = Vec::with_capacity(4 * pieces + 1);
    let mut left = eval(0.0)?;
    out.push(left);
    // explicit stack of pending right endpoints with their depth
    for j in 1..=pieces {
        let right = eval(j as f64 / pieces as f64)?;
        let mut stack = vec![(right, 0u32)];
        while let Some((rt, depth)) = stack.pop() {
            if chord_ok(&left.2, &rt.2) {
                out.push(rt);
                left = rt;
                continue;
            }
            let mid_frac = 0.5 * (left.0 + rt.0);
            if depth >= cfg.max_refine_depth || mid_frac <= left.0 || mid_frac >= rt.0 {
                let t0 = edge_t(edge, left.0);
                let t1 = edge_t(edge, rt.0);
                return Err(EdgeError::Refine(Error::RefinementFailed {
                    t0: t0.min(t1),
                    t1: t0.max(t1),
                    depth,
                }));
            }
            let mid = eval(mid_frac)?;
            stack.push((rt, depth + 1));
            stack.push((mid, depth + 1));
        }
    }
    Ok(out)
}

/// Boundary parameter of a canonical fraction on `edge`.
fn edge_t(edge: usize, frac: f64) -> f64 {
    match edge {
        0 | 1 => edge as f64 + frac,
        _ => edge as f64 + (1.0 - frac),
    }
}

/// Signed crossing of the positive x-axis by the segment `a -> b`.
/// Points with `y >= 0` count as above the axis.
#[inline]
fn crossing(a: &Residual, b: &Residual) -> i64 {
    let below_a = a.g_b < 0.0;
    let below_b = b.g_b < 0.0;
    if below_a == below_b {
        return 0;
    }
    let x_cross = a.g_a + (b.g_a - a.g_a) * (-a.g_b) / (b.g_b - a.g_b);
    if x_cross <= 0.0 {
        return 0;
    }
    if below_a {
        1
    } else {
        -1
    }
}

/// Winding number of `G(boundary of r)` around the origin (counterclockwise traversal).
pub fn winding_number(g: &GameInstance, r: &Rect, cfg: &SolverConfig) -> Result<WindingResult> {
    winding_number_oriented(g, r, cfg, Orientation::CounterClockwise)
}

pub fn winding_number_oriented(
    g: &GameInstance,
    r: &Rect,
    cfg: &SolverConfig,
    orientation: Orientation,
) -> Result<WindingResult> {
    let r = Rect::new(r.x_lo, r.x_hi, r.y_lo, r.y_hi)?;
    let eps = cfg.eps_for(g, &r);
    let mut samples: Vec<CurveSample> = Vec::new();
    for edge in 0..4 {
        let pts = match sample_edge(g, &r, edge, cfg, eps) {
            Ok(p) => p,
            Err(EdgeError::Zero(ZeroHit(kappa))) => {
                return Ok(WindingResult {
                    outcome: WindingOutcome::ZeroOnBoundary { kappa },
                    samples,
                })
            }
            Err(EdgeError::Refine(e)) => return Err(e),
        };
        let ordered: Box<dyn Iterator<Item = _>> = if edge < 2 {
            Box::new(pts.into_iter())
        } else {
            Box::new(pts.into_iter().rev())
        };
        for (frac, kappa, res) in ordered {
            // corners are shared between consecutive edges
            if samples.last().is_some_and(|s| s.kappa == kappa) {
                continue;
            }
            samples.push(CurveSample {
                t: edge_t(edge, frac),
                kappa,
                g: res,
            });
        }
    }
    if orientation == Orientation::Clockwise {
        samples.reverse();
        for s in samples.iter_mut() {
            s.t = 4.0 - s.t;
        }
    }
    let mut winding = 0i64;
    let mut candidate = None;
    for pair in samples.windows(2) {
        if candidate.is_none() && pair[0].g.is_feasible() {
            candidate = Some(pair[0].kappa);
        }
        winding += crossing(&pair[0].g, &pair[1].g);
    }
    Ok(WindingResult {
        outcome: WindingOutcome::Count { winding, candidate },
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Solved,
    TrivialGame,
    BudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Enlarge,
    Bisect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub phase: Phase,
    pub rect: Rect,
    /// `None` when a zero was hit on the boundary.
    pub winding: Option<i64>,
}

/// One row of the optional curve trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: String,
    pub t: f64,
    pub curve_x: f64,
    pub curve_y: f64,
    #[serde(rename = "gA")]
    pub g_a: f64,
    #[serde(rename = "gB")]
    pub g_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub kappa: Option<Kappa>,
    pub residual: Option<Residual>,
    /// The returned point satisfies `g_a <= 0` and `g_b <= 0`.
    pub verified: bool,
    pub rect_trace: Vec<TraceEntry>,
    pub enlargements: u32,
    pub bisections: u32,
    pub curve_samples_total: usize,
    pub final_diameter: Option<f64>,
    /// Some split showed winding in a half different from its parent's,
    /// so the rectangle held more than one zero.
    pub multiple_zeros_suspected: bool,
    pub assumptions: AssumptionStatus,
    pub note: Option<String>,
}

impl SolveReport {
    fn empty(status: SolveStatus, assumptions: AssumptionStatus) -> Self {
        SolveReport {
            status,
            kappa: None,
            residual: None,
            verified: false,
            rect_trace: Vec::new(),
            enlargements: 0,
            bisections: 0,
            curve_samples_total: 0,
            final_diameter: None,
            multiple_zeros_suspected: false,
            assumptions,
            note: None,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}

pub fn solve(g: &GameInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_impl(g, cfg, None)
}

/// [`solve`] that also records every curve sample of every traversal.
pub fn solve_with_trace(g: &GameInstance, cfg: &SolverConfig) -> Result<(SolveReport, Vec<TraceRow>)> {
    let mut rows = Vec::new();
    let report = solve_impl(g, cfg, Some(&mut rows))?;
    Ok((report, rows))
}

fn solve_impl(g: &GameInstance, cfg: &SolverConfig, mut trace: Option<&mut Vec<TraceRow>>) -> Result<SolveReport> {
    cfg.validate()?;
    let assumptions = check_assumptions(g);
    if !assumptions.holds() {
        return Ok(SolveReport::empty(SolveStatus::TrivialGame, assumptions));
    }
    let mut report = SolveReport::empty(SolveStatus::BudgetExceeded, assumptions);

    let mut run = |report: &mut SolveReport, r: &Rect, phase: Phase| -> Result<WindingOutcome> {
        let res = winding_number(g, r, cfg)?;
        report.curve_samples_total += res.samples.len();
        report.rect_trace.push(TraceEntry {
            phase,
            rect: *r,
            winding: res.outcome.winding(),
        });
        if let Some(rows) = trace.as_deref_mut() {
            let label = format!(
                "{}:{}",
                match phase {
                    Phase::Enlarge => "enlarge",
                    Phase::Bisect => "bisect",
                },
                report.rect_trace.len() - 1
            );
            rows.extend(res.samples.iter().map(|s| TraceRow {
                phase: label.clone(),
                t: s.t,
                curve_x: s.kappa.lam_a,
                curve_y: s.kappa.lam_b,
                g_a: s.g.g_a,
                g_b: s.g.g_b,
            }));
        }
        Ok(res.outcome)
    };

    // enlarge until the square encloses a zero
    let (mut m, mut big_m) = (cfg.m0, cfg.big_m0);
    let (mut rect, mut outcome) = loop {
        let r = Rect::square(m, big_m)?;
        let out = run(&mut report, &r, Phase::Enlarge)?;
        if out.is_nonzero() {
            break (r, out);
        }
        if report.enlargements >= cfg.max_enlarge {
            report.note = Some(format!(
                "winding number still zero after {} enlargements",
                report.enlargements
            ));
            return Ok(report);
        }
        report.enlargements += 1;
        big_m *= 2.0;
        m = (m / 2.0).max(MIN_CORNER);
    };

    // halve until small enough
    loop {
        if let WindingOutcome::ZeroOnBoundary { kappa } = outcome {
            finish_on_zero(g, cfg, &mut report, kappa, &rect);
            return Ok(report);
        }
        if rect.diameter() <= cfg.delta {
            break;
        }
        if report.bisections >= cfg.max_bisect {
            report.note = Some(format!("bisection cap {} reached", cfg.max_bisect));
            report.kappa = Some(rect.center());
            report.residual = Some(residual_unchecked(g, rect.center().lam_a, rect.center().lam_b));
            report.final_diameter = Some(rect.diameter());
            return Ok(report);
        }
        report.bisections += 1;
        let parent_w = outcome.winding();
        let (d1, d2) = rect.split();
        let out1 = run(&mut report, &d1, Phase::Bisect)?;
        if out1.is_nonzero() {
            if let (Some(p), Some(c)) = (parent_w, out1.winding()) {
                if p != c {
                    report.multiple_zeros_suspected = true;
                }
            }
            rect = d1;
            outcome = out1;
            continue;
        }
        let out2 = run(&mut report, &d2, Phase::Bisect)?;
        if !out2.is_nonzero() {
            report.note = Some(format!(
                "both halves of {rect:?} have zero winding although the parent did not"
            ));
            report.kappa = Some(rect.center());
            report.residual = Some(residual_unchecked(g, rect.center().lam_a, rect.center().lam_b));
            report.final_diameter = Some(rect.diameter());
            return Ok(report);
        }
        rect = d2;
        outcome = out2;
    }

    let boundary_candidate = match outcome {
        WindingOutcome::Count { candidate, .. } => candidate,
        WindingOutcome::ZeroOnBoundary { .. } => None,
    };
    let (kappa, verified) = match boundary_candidate.or_else(|| probe_grid(g, &rect)) {
        Some(k) => (k, true),
        None => {
            report.note = Some("no sampled point satisfies g <= 0; returning rectangle center".into());
            (rect.center(), false)
        }
    };
    report.status = SolveStatus::Solved;
    report.kappa = Some(kappa);
    report.residual = Some(residual_unchecked(g, kappa.lam_a, kappa.lam_b));
    report.verified = verified;
    report.final_diameter = Some(rect.diameter());
    Ok(report)
}

/// First point of an 8x8 interior grid of `r` with both residuals non-positive.
fn probe_grid(g: &GameInstance, r: &Rect) -> Option<Kappa> {
    const N: usize = 8;
    for i in 0..N {
        for j in 0..N {
            let k = Kappa::new(
                r.x_lo + (i as f64 + 0.5) / N as f64 * r.width(),
                r.y_lo + (j as f64 + 0.5) / N as f64 * r.height(),
            );
            if residual_unchecked(g, k.lam_a, k.lam_b).is_feasible() {
                return Some(k);
            }
        }
    }
    None
}

fn finish_on_zero(g: &GameInstance, cfg: &SolverConfig, report: &mut SolveReport, kappa: Kappa, rect: &Rect) {
    let res = residual_unchecked(g, kappa.lam_a, kappa.lam_b);
    let mut chosen = (kappa, res.is_feasible());
    if !chosen.1 {
        // look around the hit within half a delta
        let h = (0.5 * cfg.delta).min(0.5 * kappa.lam_a).min(0.5 * kappa.lam_b);
        if let Ok(r) = Rect::new(kappa.lam_a - h, kappa.lam_a + h, kappa.lam_b - h, kappa.lam_b + h) {
            if let Some(k) = probe_grid(g, &r) {
                chosen = (k, true);
            }
        }
    }
    if !chosen.1 {
        report.note = Some("zero found on a rectangle boundary; g <= 0 holds only up to eps_zero".into());
    }
    report.status = SolveStatus::Solved;
    report.kappa = Some(chosen.0);
    report.residual = Some(residual_unchecked(g, chosen.0.lam_a, chosen.0.lam_b));
    report.verified = chosen.1;
    report.final_diameter = Some(rect.diameter());
}

/// Checks `g_a <= 0 && g_b <= 0` at `k` and, given a reference zero,
/// componentwise closeness within `delta`.
pub fn verify_delta_solution(g: &GameInstance, k: Kappa, delta: f64, reference: Option<Kappa>) -> bool {
    let Ok(res) = residual(g, k) else {
        return false;
    };
    if !res.is_feasible() {
        return false;
    }
    match reference {
        Some(r) => (k.lam_a - r.lam_a).abs() <= delta && (k.lam_b - r.lam_b).abs() <= delta,
        None => true,
    }
}
