//! Parameter sweeps over instance templates, written as CSV.
//!
//! A template is an instance whose numeric fields are either constants or
//! affine functions of a named sweep parameter (optionally of its
//! reciprocal). Sweeps are crossed, the first one varying slowest. Every
//! row is evaluated independently; a failing row is recorded, not fatal.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{reduce_trivial, Battlefield, GameInstance, Player};
use crate::oud::{classify_battlefield, oud_payoffs, build_ouds, Kappa, Residual};
use crate::par;
use crate::solver::{solve, SolveStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slot {
    Const(f64),
    Param {
        param: String,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
        /// 1 for the value itself, -1 for its reciprocal.
        #[serde(default = "one_i")]
        pow: i32,
    },
}

fn one() -> f64 {
    1.0
}

fn one_i() -> i32 {
    1
}

impl Slot {
    pub fn param(name: &str) -> Slot {
        Slot::Param {
            param: name.into(),
            scale: 1.0,
            offset: 0.0,
            pow: 1,
        }
    }

    pub fn affine(name: &str, scale: f64, offset: f64) -> Slot {
        Slot::Param {
            param: name.into(),
            scale,
            offset,
            pow: 1,
        }
    }

    pub fn reciprocal(name: &str) -> Slot {
        Slot::Param {
            param: name.into(),
            scale: 1.0,
            offset: 0.0,
            pow: -1,
        }
    }

    fn eval(&self, env: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            Slot::Const(v) => Ok(*v),
            Slot::Param {
                param,
                scale,
                offset,
                pow,
            } => {
                let v = *env
                    .get(param)
                    .ok_or_else(|| Error::InvalidExperiment(format!("unknown parameter `{param}`")))?;
                let base = match pow {
                    1 => v,
                    -1 => 1.0 / v,
                    _ => return Err(Error::InvalidExperiment(format!("pow must be 1 or -1, got {pow}"))),
                };
                // skip the product when it is a no-op so that 0 stays +0
                let scaled = if *scale == 1.0 { base } else { scale * base };
                Ok(if *offset == 0.0 { scaled } else { scaled + offset })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BattlefieldTemplate {
    pub w: Slot,
    pub p: Slot,
    pub q: Slot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    #[serde(rename = "xA")]
    pub x_a: Slot,
    #[serde(rename = "xB")]
    pub x_b: Slot,
    pub alpha: Slot,
    pub battlefields: Vec<BattlefieldTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
}

impl Sweep {
    pub fn values(param: &str, values: Vec<f64>) -> Sweep {
        Sweep {
            param: param.into(),
            values: Some(values),
            range: None,
        }
    }

    pub fn range(param: &str, start: f64, stop: f64, step: f64) -> Sweep {
        Sweep {
            param: param.into(),
            values: None,
            range: Some(Range { start, stop, step }),
        }
    }

    /// Concrete values; range points are snapped to a 1e-12 grid so that
    /// decimal steps land on the intended numbers (0 included).
    pub fn expand(&self) -> Result<Vec<f64>> {
        let bad = |s: String| Err(Error::InvalidExperiment(s));
        let vals = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => {
                if !(r.step.is_finite() && r.step > 0.0 && r.start.is_finite() && r.stop.is_finite()) {
                    return bad(format!("sweep `{}`: invalid range", self.param));
                }
                let count = ((r.stop - r.start) / r.step + 1e-9).floor();
                if !(0.0..=1e7).contains(&count) {
                    return bad(format!("sweep `{}`: range yields no or too many points", self.param));
                }
                (0..=count as u64)
                    .map(|k| {
                        let v = r.start + k as f64 * r.step;
                        let snapped = (v * 1e12).round() / 1e12;
                        if snapped == 0.0 {
                            0.0
                        } else {
                            snapped
                        }
                    })
                    .collect()
            }
            _ => return bad(format!("sweep `{}` needs exactly one of `values` and `range`", self.param)),
        };
        if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
            return bad(format!("sweep `{}` values must be finite and non-empty", self.param));
        }
        Ok(vals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Kappa,
    Residual,
    Payoff,
    Classes,
    Means,
}

pub const ALL_OUTPUTS: [Output; 5] = [Output::Kappa, Output::Residual, Output::Payoff, Output::Classes, Output::Means];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub template: Template,
    pub sweeps: Vec<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<Output>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s).map_err(|e| Error::InvalidExperiment(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.template.battlefields.is_empty() {
            return Err(Error::InvalidExperiment("template has no battlefields".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sweeps {
            if !seen.insert(&s.param) {
                return Err(Error::InvalidExperiment(format!("parameter `{}` swept twice", s.param)));
            }
            s.expand()?;
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidExperiment(format!("delta must be positive, got {d}")));
            }
        }
        Ok(())
    }

    pub fn outputs(&self) -> Vec<Output> {
        self.outputs.clone().unwrap_or_else(|| ALL_OUTPUTS.to_vec())
    }

    pub fn n(&self) -> usize {
        self.template.battlefields.len()
    }

    /// Crossed sweep points, first sweep slowest.
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let mut pts = vec![Vec::new()];
        for s in &self.sweeps {
            let vals = s.expand()?;
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        Ok(pts)
    }

    pub fn instantiate(&self, point: &[f64]) -> Result<GameInstance> {
        let env: BTreeMap<String, f64> = self
            .sweeps
            .iter()
            .map(|s| s.param.clone())
            .zip(point.iter().copied())
            .collect();
        let t = &self.template;
        let bfs = t
            .battlefields
            .iter()
            .map(|b| Ok(Battlefield::new(b.w.eval(&env)?, b.p.eval(&env)?, b.q.eval(&env)?)))
            .collect::<Result<Vec<_>>>()?;
        GameInstance::new(bfs, t.x_a.eval(&env)?, t.x_b.eval(&env)?, t.alpha.eval(&env)?)
    }
}

/// Built-in specs for the favoritism experiments.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    let c = Slot::Const;
    let bf = |w: Slot, p: Slot, q: Slot| BattlefieldTemplate { w, p, q };
    let qbars = vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
    let spec = |name: &str, bfs: Vec<BattlefieldTemplate>, x_a: Slot, sweeps: Vec<Sweep>| ExperimentSpec {
        name: Some(name.into()),
        template: Template {
            x_a,
            x_b: c(10.0),
            alpha: c(0.5),
            battlefields: bfs,
        },
        sweeps,
        outputs: None,
        delta: None,
        out: None,
    };
    match name {
        // homogeneous battlefields, common pbar and qbar
        "fig4a" => Some(spec(
            name,
            (0..4).map(|_| bf(c(1.0), Slot::param("pbar"), Slot::param("qbar"))).collect(),
            c(10.0),
            vec![Sweep::values("qbar", qbars), Sweep::range("pbar", -10.0, 10.0, 0.1)],
        )),
        // q = qbar on the first two battlefields, 1/qbar on the others
        "fig4b" => Some(spec(
            name,
            (0..4)
                .map(|i| {
                    let q = if i < 2 { Slot::param("qbar") } else { Slot::reciprocal("qbar") };
                    bf(c(1.0), Slot::param("pbar"), q)
                })
                .collect(),
            c(10.0),
            vec![Sweep::values("qbar", vec![0.1, 0.2, 0.5]), Sweep::range("pbar", -10.0, 10.0, 0.1)],
        )),
        // pre-allocation P out of a budget of 10, spread evenly or put on the big battlefield
        "fig5-spread" | "fig5-focus" => {
            let focus = name == "fig5-focus";
            let bfs = (0..4)
                .map(|i| {
                    let w = if i == 3 { 5.0 } else { 1.0 };
                    let p = match (focus, i == 3) {
                        (false, _) => Slot::affine("P", 0.25, 0.0),
                        (true, true) => Slot::param("P"),
                        (true, false) => c(0.0),
                    };
                    bf(c(w), p, c(1.0))
                })
                .collect();
            Some(spec(
                name,
                bfs,
                Slot::affine("P", -1.0, 10.0),
                vec![Sweep::range("P", 0.0, 9.9, 0.1)],
            ))
        }
        _ => None,
    }
}

pub const PRESETS: [&str; 4] = ["fig4a", "fig4b", "fig5-spread", "fig5-focus"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Solved,
    TrivialGame,
    BudgetExceeded,
    Error,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Solved => "Solved",
            RowStatus::TrivialGame => "TrivialGame",
            RowStatus::BudgetExceeded => "BudgetExceeded",
            RowStatus::Error => "Error",
        }
    }
}

/// Equilibrium summary of one instance in the caller's labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub status: RowStatus,
    pub kappa: Option<Kappa>,
    pub residual: Option<Residual>,
    pub pi_a: Option<f64>,
    pub pi_b: Option<f64>,
    /// Index-class label per battlefield, or `wonA` / `wonB` for battlefields
    /// settled without play.
    pub classes: Vec<String>,
    /// Expected allocation of A per battlefield (0 where settled).
    pub means_a: Vec<Option<f64>>,
    pub error: Option<String>,
}

/// Solves `g` (after peeling off trivially-won battlefields) and reports
/// kappa, residuals, payoffs and classes in the caller's labels.
pub fn evaluate(g: &GameInstance, delta: f64) -> RowResult {
    match evaluate_inner(g, delta) {
        Ok(r) => r,
        Err(e) => RowResult {
            status: RowStatus::Error,
            kappa: None,
            residual: None,
            pi_a: None,
            pi_b: None,
            classes: vec![String::new(); g.n()],
            means_a: vec![None; g.n()],
            error: Some(e.to_string()),
        },
    }
}

fn evaluate_inner(g: &GameInstance, delta: f64) -> Result<RowResult> {
    let n = g.n();
    let raw = g.raw();
    let red = reduce_trivial(g);
    let trivial = red.is_trivial();
    let mut classes = vec![String::new(); n];
    let means_a = vec![Some(0.0); n];
    for (i, b) in raw.battlefields.iter().enumerate() {
        if !red.kept.contains(&i) {
            // A secures it iff q X^B - p < 0, or A won the rest outright
            let a_wins = b.q * raw.x_b - b.p < 0.0
                || ((raw.x_a + b.p) / b.q >= 0.0 && red.winner_takes_rest == Some(Player::A));
            classes[i] = if a_wins { "wonA" } else { "wonB" }.into();
        }
    }
    let mut row = RowResult {
        status: if trivial { RowStatus::TrivialGame } else { RowStatus::Solved },
        kappa: None,
        residual: None,
        pi_a: Some(red.secured_a),
        pi_b: Some(red.secured_b),
        classes,
        means_a,
        error: None,
    };
    let Some(sub) = red.reduced else {
        return Ok(row);
    };
    let cfg = SolverConfig::for_game(&sub).with_delta(delta);
    let rep = solve(&sub, &cfg)?;
    match rep.status {
        SolveStatus::Solved => {}
        SolveStatus::BudgetExceeded => {
            row.status = RowStatus::BudgetExceeded;
            row.pi_a = None;
            row.pi_b = None;
            row.error = rep.note;
            return Ok(row);
        }
        SolveStatus::TrivialGame => unreachable!("reduced instances satisfy both assumptions"),
    }
    let k = rep.kappa.expect("solved report carries kappa");
    let res = rep.residual.expect("solved report carries residual");
    let (pa, pb) = oud_payoffs(&sub, k)?;
    let (pa, pb) = sub.caller_order(pa, pb);
    let (la, lb) = sub.caller_order(k.lam_a, k.lam_b);
    let (ga, gb) = sub.caller_order(res.g_a, res.g_b);
    let caller_k = Kappa::new(la, lb);
    let profile = build_ouds(&sub, k)?;
    let sub_raw = sub.raw();
    for (j, &i) in red.kept.iter().enumerate() {
        row.classes[i] = classify_battlefield(&sub_raw.battlefields[j], caller_k).label().into();
        let o = &profile.battlefields[j];
        let (ma, _) = sub.caller_order(o.mean_a, o.mean_b);
        row.means_a[i] = Some(ma);
    }
    row.kappa = Some(caller_k);
    row.residual = Some(Residual { g_a: ga, g_b: gb });
    row.pi_a = Some(red.secured_a + pa);
    row.pi_b = Some(red.secured_b + pb);
    Ok(row)
}

/// Evaluates every sweep point; rows come back in sweep order.
pub fn run(spec: &ExperimentSpec, delta_override: Option<f64>) -> Result<Vec<(Vec<f64>, RowResult)>> {
    spec.validate()?;
    let delta = delta_override.or(spec.delta).unwrap_or(1e-6);
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidExperiment(format!("delta must be positive, got {delta}")));
    }
    let pts = spec.points()?;
    let n = spec.n();
    Ok(par::map_ordered(pts, |pt| {
        let row = match spec.instantiate(&pt) {
            Ok(g) => evaluate(&g, delta),
            Err(e) => RowResult {
                status: RowStatus::Error,
                kappa: None,
                residual: None,
                pi_a: None,
                pi_b: None,
                classes: vec![String::new(); n],
                means_a: vec![None; n],
                error: Some(e.to_string()),
            },
        };
        (pt, row)
    }))
}

pub fn csv_header(spec: &ExperimentSpec) -> Vec<String> {
    let mut cols: Vec<String> = spec.sweeps.iter().map(|s| s.param.clone()).collect();
    for o in spec.outputs() {
        match o {
            Output::Kappa => cols.extend(["lambda_a".into(), "lambda_b".into()]),
            Output::Residual => cols.extend(["g_a".into(), "g_b".into()]),
            Output::Payoff => cols.extend(["pi_a".into(), "pi_b".into()]),
            Output::Classes => cols.extend((1..=spec.n()).map(|i| format!("class_{i}"))),
            Output::Means => cols.extend((1..=spec.n()).map(|i| format!("mean_a_{i}"))),
        }
    }
    cols.push("status".into());
    cols
}

/// CSV text: header, one row per sweep point, LF line endings, numbers
/// with 9 significant digits, empty cells for missing values.
pub fn to_csv(spec: &ExperimentSpec, rows: &[(Vec<f64>, RowResult)]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_g9).unwrap_or_default();
    let mut out = csv_header(spec).join(",");
    out.push('\n');
    for (pt, r) in rows {
        let mut cells: Vec<String> = pt.iter().map(|v| fmt_g9(*v)).collect();
        for o in spec.outputs() {
            match o {
                Output::Kappa => {
                    cells.push(opt(r.kappa.map(|k| k.lam_a)));
                    cells.push(opt(r.kappa.map(|k| k.lam_b)));
                }
                Output::Residual => {
                    cells.push(opt(r.residual.map(|g| g.g_a)));
                    cells.push(opt(r.residual.map(|g| g.g_b)));
                }
                Output::Payoff => {
                    cells.push(opt(r.pi_a));
                    cells.push(opt(r.pi_b));
                }
                Output::Classes => cells.extend(r.classes.iter().cloned()),
                Output::Means => cells.extend(r.means_a.iter().map(|m| opt(*m))),
            }
        }
        cells.push(r.status.as_str().into());
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// `printf("%.9g")`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
