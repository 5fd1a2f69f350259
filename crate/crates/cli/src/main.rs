use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blotto_core::experiment::{self, ExperimentSpec};
use blotto_core::fapa::{self, FapaInstance};
use blotto_core::game::{check_assumptions, pure_payoffs, random_instance, reduce_trivial, AssumptionStatus};
use blotto_core::oud::{build_ouds, classify_battlefield, oud_payoffs, residual, BattlefieldOud, Kappa, Residual};
use blotto_core::solver::{solve, solve_with_trace, Rect, SolveStatus, SolverConfig, TraceEntry};
use blotto_core::strategies::{exploitability, StrategyKind, StrategyProfile};
use blotto_core::{GameInstance, Player};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "blotto", version, about = "Colonel Blotto / General Lotto games with favoritism")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Target diameter of the final solver rectangle.
    #[arg(long, global = true, default_value_t = 1e-6)]
    delta: f64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance; exit code 0 solved, 2 trivial game, 3 budget exceeded.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        m0: Option<f64>,
        #[arg(long = "M0", alias = "big-m0")]
        big_m0: Option<f64>,
        /// Also write every boundary sample as CSV (phase,t,curve_x,curve_y,gA,gB).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Equilibrium of a single all-pay auction with favoritism.
    Fapa(FapaArgs),
    /// Payoffs of a pure profile, or of the OUDs at a given kappa.
    Payoff {
        instance: PathBuf,
        /// Comma-separated allocation of A.
        #[arg(long, value_delimiter = ',', requires = "xb", conflicts_with = "kappa")]
        xa: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', requires = "xa")]
        xb: Option<Vec<f64>>,
        /// `lambdaA,lambdaB`.
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
    /// Optimal univariate distributions at a given kappa or at the solved one.
    Ouds {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
    /// Draw allocations (CSV, one row per draw).
    Sample {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Gl)]
        kind: Kind,
        #[arg(long, value_enum, ignore_case = true, default_value_t = Side::A)]
        player: Side,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Exploitability of a player's strategy (JSON report).
    Exploit {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Gl)]
        kind: Kind,
        /// Player whose strategy is exploited.
        #[arg(long, value_enum, ignore_case = true, default_value_t = Side::A)]
        player: Side,
        /// Defaults to the deviator's budget / 400.
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Run a sweep and write CSV.
    ///
    /// Columns: one per sweep parameter, then lambda_a, lambda_b, g_a, g_b,
    /// pi_a, pi_b, class_1..class_n, mean_a_1..mean_a_n, status. All values
    /// are in the caller's player labels. status is Solved, TrivialGame,
    /// BudgetExceeded or Error; trivial rows report the pure-equilibrium
    /// payoffs and classes wonA / wonB for settled battlefields.
    Experiment {
        /// Spec JSON file.
        spec: Option<PathBuf>,
        /// Built-in spec: fig4a, fig4b, fig5-spread, fig5-focus.
        #[arg(long, conflicts_with = "spec")]
        preset: Option<String>,
        /// Print the spec JSON instead of running it.
        #[arg(long)]
        print_spec: bool,
    },
    /// Random instance (JSON) from the experimental recipe.
    Gen {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
}

#[derive(Args)]
struct FapaArgs {
    /// JSON with uA, uB, p, q, alpha; flags are used when absent.
    file: Option<PathBuf>,
    #[arg(long, required_unless_present = "file")]
    ua: Option<f64>,
    #[arg(long, required_unless_present = "file")]
    ub: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gl,
    Iu,
    Uniform,
}

impl From<Kind> for StrategyKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gl => StrategyKind::GlIndependent,
            Kind::Iu => StrategyKind::IuRescaled,
            Kind::Uniform => StrategyKind::UniformSplit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    A,
    B,
}

impl From<Side> for Player {
    fn from(s: Side) -> Self {
        match s {
            Side::A => Player::A,
            Side::B => Player::B,
        }
    }
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_instance(path: &Path) -> CliResult<GameInstance> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kappa_arg(v: &Option<Vec<f64>>) -> CliResult<Option<Kappa>> {
    match v.as_deref() {
        None => Ok(None),
        Some([a, b]) => Ok(Some(Kappa::new(*a, *b))),
        Some(_) => Err("--kappa takes exactly two values: lambdaA,lambdaB".into()),
    }
}

/// Caller-labelled kappa to the normalized one and back (the swap is an involution).
fn flip(g: &GameInstance, k: Kappa) -> Kappa {
    let (a, b) = g.caller_order(k.lam_a, k.lam_b);
    Kappa::new(a, b)
}

fn flip_rect(g: &GameInstance, r: Rect) -> Rect {
    if g.is_swapped() {
        Rect {
            x_lo: r.y_lo,
            x_hi: r.y_hi,
            y_lo: r.x_lo,
            y_hi: r.x_hi,
        }
    } else {
        r
    }
}

fn flip_residual(g: &GameInstance, r: Residual) -> Residual {
    let (a, b) = g.caller_order(r.g_a, r.g_b);
    Residual { g_a: a, g_b: b }
}

/// OUD profile in caller labels.
fn caller_ouds(g: &GameInstance, k: Kappa) -> CliResult<(Kappa, Vec<BattlefieldOud>)> {
    let prof = build_ouds(g, k).map_err(err)?;
    let ck = flip(g, k);
    let raw = g.raw();
    let bfs = prof
        .battlefields
        .iter()
        .zip(&raw.battlefields)
        .map(|(o, b)| {
            let (f_a, f_b) = g.caller_order(o.f_a, o.f_b);
            let (mean_a, mean_b) = g.caller_order(o.mean_a, o.mean_b);
            BattlefieldOud {
                class: classify_battlefield(b, ck),
                f_a,
                f_b,
                mean_a,
                mean_b,
            }
        })
        .collect();
    Ok((ck, bfs))
}

#[derive(Serialize)]
struct Payoffs {
    #[serde(rename = "piA")]
    pi_a: f64,
    #[serde(rename = "piB")]
    pi_b: f64,
}

#[derive(Serialize)]
struct TrivialSummary {
    #[serde(rename = "securedA")]
    secured_a: f64,
    #[serde(rename = "securedB")]
    secured_b: f64,
    /// Battlefields (caller order) left to play after peeling off the settled ones.
    kept: Vec<usize>,
    winner_takes_rest: Option<Player>,
}

#[derive(Serialize)]
struct SolveOutput {
    status: SolveStatus,
    kappa: Option<Kappa>,
    residual: Option<Residual>,
    verified: bool,
    payoffs: Option<Payoffs>,
    classes: Option<Vec<String>>,
    assumptions: AssumptionStatus,
    trivial: Option<TrivialSummary>,
    enlargements: u32,
    bisections: u32,
    curve_samples_total: usize,
    final_diameter: Option<f64>,
    multiple_zeros_suspected: bool,
    note: Option<String>,
    rect_trace: Vec<TraceEntry>,
}

fn run(cli: &Cli) -> CliResult<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    match &cli.cmd {
        Cmd::Solve {
            instance,
            m0,
            big_m0,
            trace,
        } => {
            let g = load_instance(instance)?;
            let mut cfg = SolverConfig::for_game(&g).with_delta(cli.delta);
            if let Some(m) = m0 {
                cfg.m0 = *m;
            }
            if let Some(m) = big_m0 {
                cfg.big_m0 = *m;
            }
            let rep = if let Some(path) = trace {
                let (rep, rows) = solve_with_trace(&g, &cfg).map_err(err)?;
                let mut csv = String::from("phase,t,curve_x,curve_y,gA,gB\n");
                for r in rows {
                    let (x, y) = g.caller_order(r.curve_x, r.curve_y);
                    let (ga, gb) = g.caller_order(r.g_a, r.g_b);
                    let f = experiment::fmt_g9;
                    csv.push_str(&format!("{},{},{},{},{},{}\n", r.phase, f(r.t), f(x), f(y), f(ga), f(gb)));
                }
                fs::write(path, csv).map_err(|e| format!("{}: {e}", path.display()))?;
                rep
            } else {
                solve(&g, &cfg).map_err(err)?
            };
            let (payoffs, classes) = match rep.kappa {
                Some(k) if rep.status == SolveStatus::Solved => {
                    let (pa, pb) = oud_payoffs(&g, k).map_err(err)?;
                    let (pi_a, pi_b) = g.caller_order(pa, pb);
                    let (_, bfs) = caller_ouds(&g, k)?;
                    (
                        Some(Payoffs { pi_a, pi_b }),
                        Some(bfs.iter().map(|b| b.class.label().to_string()).collect()),
                    )
                }
                _ => (None, None),
            };
            let trivial = (rep.status == SolveStatus::TrivialGame).then(|| {
                let red = reduce_trivial(&g);
                TrivialSummary {
                    secured_a: red.secured_a,
                    secured_b: red.secured_b,
                    kept: red.kept,
                    winner_takes_rest: red.winner_takes_rest,
                }
            });
            let code = match rep.status {
                SolveStatus::Solved => 0,
                SolveStatus::TrivialGame => 2,
                SolveStatus::BudgetExceeded => 3,
            };
            let out = SolveOutput {
                status: rep.status,
                kappa: rep.kappa.map(|k| flip(&g, k)),
                residual: rep.residual.map(|r| flip_residual(&g, r)),
                verified: rep.verified,
                payoffs,
                classes,
                assumptions: rep.assumptions,
                trivial,
                enlargements: rep.enlargements,
                bisections: rep.bisections,
                curve_samples_total: rep.curve_samples_total,
                final_diameter: rep.final_diameter,
                multiple_zeros_suspected: rep.multiple_zeros_suspected,
                note: rep.note,
                rect_trace: rep
                    .rect_trace
                    .into_iter()
                    .map(|t| TraceEntry {
                        rect: flip_rect(&g, t.rect),
                        ..t
                    })
                    .collect(),
            };
            emit(&cli.out, &json(&out))?;
            Ok(code)
        }
        Cmd::Fapa(a) => {
            let inst = match &a.file {
                Some(p) => {
                    let i: FapaInstance =
                        serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?;
                    i.validate().map_err(err)?;
                    i
                }
                None => FapaInstance::new(a.ua.unwrap(), a.ub.unwrap(), a.p, a.q, a.alpha).map_err(err)?,
            };
            emit(&cli.out, &json(&fapa::equilibrium(&inst)))?;
            Ok(0)
        }
        Cmd::Payoff { instance, xa, xb, kappa } => {
            let g = load_instance(instance)?;
            let (pi_a, pi_b) = match (xa, xb, kappa_arg(kappa)?) {
                (Some(xa), Some(xb), None) => pure_payoffs(&g, xa, xb).map_err(err)?,
                (None, None, Some(k)) => {
                    let (pa, pb) = oud_payoffs(&g, flip(&g, k)).map_err(err)?;
                    g.caller_order(pa, pb)
                }
                _ => return Err("give either --xa and --xb, or --kappa".into()),
            };
            emit(&cli.out, &json(&Payoffs { pi_a, pi_b }))?;
            Ok(0)
        }
        Cmd::Ouds { instance, kappa } => {
            let g = load_instance(instance)?;
            let k = solved_kappa(&g, kappa_arg(kappa)?, cli.delta)?;
            let (ck, bfs) = caller_ouds(&g, k)?;
            #[derive(Serialize)]
            struct Out {
                kappa: Kappa,
                residual: Residual,
                battlefields: Vec<BattlefieldOud>,
            }
            let res = flip_residual(&g, residual(&g, k).map_err(err)?);
            emit(
                &cli.out,
                &json(&Out {
                    kappa: ck,
                    residual: res,
                    battlefields: bfs,
                }),
            )?;
            Ok(0)
        }
        Cmd::Sample {
            instance,
            kind,
            player,
            count,
        } => {
            let g = load_instance(instance)?;
            let sp = profile_for(&g, (*kind).into(), (*player).into(), cli.delta)?;
            let mut csv = (1..=g.n()).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
            csv.push('\n');
            for _ in 0..*count {
                let row: Vec<String> = sp.sample(&mut rng).iter().map(|v| experiment::fmt_g9(*v)).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            emit(&cli.out, &csv)?;
            Ok(0)
        }
        Cmd::Exploit {
            instance,
            kind,
            player,
            grid_step,
            samples,
        } => {
            let g = load_instance(instance)?;
            let sp = profile_for(&g, (*kind).into(), (*player).into(), cli.delta)?;
            let step = grid_step.unwrap_or_else(|| g.budget(sp.owner.other()) / 400.0);
            let mut rep = exploitability(&g, &sp, step, *samples, &mut rng).map_err(err)?;
            rep.owner = g.caller_player(rep.owner);
            rep.deviator = g.caller_player(rep.deviator);
            emit(&cli.out, &json(&rep))?;
            Ok(0)
        }
        Cmd::Experiment {
            spec,
            preset,
            print_spec,
        } => {
            let spec = match (spec, preset) {
                (Some(p), None) => ExperimentSpec::from_json(&read(p)?).map_err(err)?,
                (None, Some(name)) => experiment::preset(name).ok_or_else(|| {
                    format!("unknown preset `{name}` (known: {})", experiment::PRESETS.join(", "))
                })?,
                _ => return Err("give a spec file or --preset".into()),
            };
            if *print_spec {
                emit(&cli.out, &json(&spec))?;
                return Ok(0);
            }
            if !(cli.delta.is_finite() && cli.delta > 0.0) {
                return Err(format!("delta must be positive, got {}", cli.delta));
            }
            // an explicit --delta wins over the spec
            let delta = if cli.delta != 1e-6 { Some(cli.delta) } else { None };
            let rows = experiment::run(&spec, delta).map_err(err)?;
            let csv = experiment::to_csv(&spec, &rows);
            let out = cli.out.clone().or_else(|| spec.out.clone().map(PathBuf::from));
            emit(&out, &csv)?;
            Ok(0)
        }
        Cmd::Gen { n } => {
            let g = random_instance(*n, cli.seed).map_err(err)?;
            emit(&cli.out, &json(&g))?;
            Ok(0)
        }
    }
}

/// Normalized kappa: the given one (caller labels) or the solver's.
fn solved_kappa(g: &GameInstance, given: Option<Kappa>, delta: f64) -> CliResult<Kappa> {
    if let Some(k) = given {
        return Ok(flip(g, k));
    }
    let status = check_assumptions(g);
    if !status.holds() {
        return Err(format!("instance violates the non-triviality assumptions: {status:?}"));
    }
    let rep = solve(g, &SolverConfig::for_game(g).with_delta(delta)).map_err(err)?;
    match (rep.status, rep.kappa) {
        (SolveStatus::Solved, Some(k)) => Ok(k),
        _ => Err(format!("solver did not converge: {:?}", rep.note)),
    }
}

fn profile_for(g: &GameInstance, kind: StrategyKind, player: Player, delta: f64) -> CliResult<StrategyProfile> {
    let k = solved_kappa(g, None, delta)?;
    let prof = build_ouds(g, k).map_err(err)?;
    StrategyProfile::new(g, kind, prof, g.caller_player(player)).map_err(err)
}
