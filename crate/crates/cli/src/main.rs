//! `qwalk`: command-line front end. Machine-readable JSON/CSV goes to
//! `--out` (or standard output), a human summary to standard error.
//! Exit codes: 1 validation, 2 not reachable / no solution, 3 numerical
//! failure, each with a JSON error object on standard output.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng as _;
use serde::Serialize;
use serde_json::json;

use qwalk::analysis::{
    linspace, perturb_sweep, probability_histogram, write_sweep_csv, Angle, HistogramMode, HistogramOptions, ParamSelector, PerturbMode,
};
use qwalk::backsolve::backsolve_with_tol;
use qwalk::engineer::{engineer_target, DSystemOptions, EngineerOptions, InitialCoinPolicy, N_MAX_POLY};
use qwalk::io::{self, CoinRecord, ErrorObject, OptimizerReport, SolutionRecord, SolutionsFile, StateFile, TargetFile, WalkFile};
use qwalk::optics::compile_experiment;
use qwalk::optimizer::{optimize_coins, OptimizerOptions};
use qwalk::reachability::{max_reachable_steps, reachability_residuals, residuals_vanish};
use qwalk::state::balanced_target;
use qwalk::tol::TOL_REACH;
use qwalk::walk::{plus_bra, project_coin, run_walk};
use qwalk::{rng, Complex64, EngineeringSolution, QwError, TargetSuperposition};

#[derive(Parser)]
#[command(
    name = "qwalk",
    version,
    about = "Coined quantum walks on a line: simulation, reachability, state engineering and optical compilation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Master seed of every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Reachability tolerance.
    #[arg(long, global = true, default_value_t = TOL_REACH)]
    tol: f64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a walk from a walk file and project its coin.
    Simulate {
        #[arg(long)]
        walk: PathBuf,
    },
    /// Project the coin of a state onto a bra (default |+>).
    Project {
        #[arg(long)]
        state: PathBuf,
        /// Bra as `a,b` (real) or `a_re,a_im,b_re,b_im`.
        #[arg(long, allow_hyphen_values = true)]
        bra: Option<String>,
    },
    /// Test the reachability conditions of a state.
    Check {
        #[arg(long)]
        state: PathBuf,
        /// Number of steps (default: site count - 1).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Recover coins producing a reachable state.
    Backsolve {
        #[arg(long)]
        state: PathBuf,
        /// Initial coin as `a,b` (real) or `a_re,a_im,b_re,b_im` (default |up>).
        #[arg(long, allow_hyphen_values = true)]
        initial_coin: Option<String>,
        /// JSON array with the gauge phases of `C_n..C_2` (default all zero).
        #[arg(long)]
        alphas: Option<PathBuf>,
        /// Draw the gauge phases uniformly from the seed instead.
        #[arg(long, conflicts_with = "alphas")]
        random_alphas: bool,
    },
    /// All coin sequences producing a target (polynomial route).
    Engineer {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        max_solutions: Option<usize>,
        /// Use the first back-solved layer as initial coin.
        #[arg(long)]
        preimage_initial_coin: bool,
    },
    /// Maximize the fidelity to a target over coin angles.
    Optimize {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        optimize_projection: bool,
        #[arg(long)]
        optimize_initial_coin: bool,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Weight of the probability in the objective `F + w p`.
        #[arg(long, default_value_t = 0.0)]
        prob_weight: f64,
    },
    /// Projection-probability statistics over Haar-random targets (CSV).
    Histogram {
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, value_enum, default_value = "d-system")]
        mode: ModeArg,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Also write the binned counts here.
        #[arg(long)]
        bins_out: Option<PathBuf>,
    },
    /// Fidelity under a one-parameter coin perturbation (CSV).
    Sweep {
        #[arg(long)]
        solution: PathBuf,
        /// Solution index inside the file.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// `step:angle` (1-based step, angle theta|xi|zeta) or `all`.
        #[arg(long, default_value = "all")]
        param: String,
        /// `a,b,k`: k points from a to b.
        #[arg(long, default_value = "-0.3,0.3,61", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, value_enum, default_value = "absolute")]
        mode: SweepModeArg,
    },
    /// Lower a solution to wave plates and q-plates.
    Compile {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Regenerate a headline result.
    Reproduce {
        #[arg(long, value_enum)]
        case: Case,
        /// Sample count override for the histogram cases.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    DSystem,
    Optimizer,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepModeArg {
    Absolute,
    Relative,
    Scale,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Balanced4,
    Balanced6,
    SixsitesMinus,
    Hist2,
    Hist15,
}

/// Failure with its exit code and context.
struct Failure {
    code: u8,
    message: String,
    context: serde_json::Value,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
            context: json!({}),
        }
    }

    fn no_solution(message: impl Into<String>, context: serde_json::Value) -> Self {
        Self {
            code: 2,
            message: message.into(),
            context,
        }
    }
}

impl From<QwError> for Failure {
    fn from(e: QwError) -> Self {
        let (code, context) = match &e {
            QwError::NotReachable { step, residual } => (2, json!({"step": step, "residual": residual})),
            QwError::Numerical { residual, .. } => (3, json!({"residual": residual})),
            QwError::NotInImage { first_down, last_up } => (1, json!({"first_down": first_down, "last_up": last_up})),
            _ => (1, json!({})),
        };
        Self {
            code,
            message: e.to_string(),
            context,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn emit(global: &Global, text: &str) -> CliResult {
    match &global.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::from(QwError::from(e))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::from(QwError::from(e)))
        }
    }
}

fn emit_json<T: Serialize>(global: &Global, value: &T) -> CliResult {
    emit(global, &io::to_json(value)?)
}

fn parse_pair(s: &str) -> CliResult<[Complex64; 2]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::validation(format!("bad complex pair {s:?}: {e}")))?;
    match v.len() {
        2 => Ok([Complex64::new(v[0], 0.0), Complex64::new(v[1], 0.0)]),
        4 => Ok([Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])]),
        _ => Err(Failure::validation(format!("expected a,b or a_re,a_im,b_re,b_im, got {s:?}"))),
    }
}

fn load_solution(path: &PathBuf, index: usize) -> CliResult<(EngineeringSolution, TargetSuperposition)> {
    let file: SolutionsFile = io::read_json(path)?;
    let rec = file
        .solutions
        .get(index)
        .ok_or_else(|| Failure::validation(format!("solution index {index} out of range ({} solutions)", file.solutions.len())))?;
    Ok((rec.to_solution()?, file.target()?))
}

fn engineer_file(target: &TargetSuperposition, opts: &EngineerOptions) -> CliResult<SolutionsFile> {
    let (sols, diagnostic) = engineer_target(target, opts)?;
    if sols.is_empty() {
        return Err(Failure::no_solution(
            "no solution found for the target",
            json!({"diagnostic": diagnostic, "target": target.amps()}),
        ));
    }
    for s in &sols {
        eprintln!("solution: p = {:.6}, F = {:.12}", s.probability, s.fidelity);
    }
    Ok(SolutionsFile {
        target: target.amps().to_vec(),
        solutions: sols.iter().map(SolutionRecord::from_solution).collect(),
        diagnostic,
        optimizer: None,
    })
}

fn optimize_file(target: &TargetSuperposition, steps: usize, opts: &OptimizerOptions, note: Option<String>) -> CliResult<SolutionsFile> {
    let r = optimize_coins(target, steps, opts)?;
    eprintln!(
        "optimized: F = {:.12}, p = {:.6}, {} iterations, converged = {}",
        r.fidelity, r.probability, r.iterations, r.converged
    );
    Ok(SolutionsFile {
        target: target.amps().to_vec(),
        solutions: vec![SolutionRecord::from_solution(&r.solution)],
        diagnostic: note,
        optimizer: Some(OptimizerReport {
            iterations: r.iterations,
            converged: r.converged,
            restart: r.restart,
        }),
    })
}

fn histogram(global: &Global, opts: &HistogramOptions, bins_out: Option<&PathBuf>) -> CliResult {
    let table = probability_histogram(opts)?;
    let mut buf = Vec::new();
    table.write_records_csv(&mut buf)?;
    emit(global, &String::from_utf8_lossy(&buf))?;
    if let Some(path) = bins_out {
        let f = std::fs::File::create(path).map_err(QwError::from)?;
        table.write_bins_csv(f)?;
    }
    match opts.mode {
        HistogramMode::DSystem => eprintln!("{} samples binned", table.records.len()),
        HistogramMode::Optimizer => {
            for t in [0, 2, 5, 10, 12] {
                eprintln!("t = {t:2}: retained {:.3}", table.retained_fraction(t));
            }
        }
    }
    Ok(())
}

fn engineer_opts(global: &Global, preimage: bool, max_solutions: Option<usize>) -> EngineerOptions {
    EngineerOptions {
        initial_coin: if preimage {
            InitialCoinPolicy::PreImage
        } else {
            InitialCoinPolicy::default()
        },
        d_system: DSystemOptions {
            seed: global.seed,
            ..Default::default()
        },
        max_solutions,
        ..Default::default()
    }
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    match cli.command {
        Command::Simulate { walk } => {
            let w: WalkFile = io::read_json(&walk)?;
            io::check_walk_file(&w)?;
            let state = run_walk(w.initial_coin, &w.coins()?)?;
            let proj = project_coin(&state, w.projection_bra())?;
            eprintln!("{} steps, projection probability {:.6}", w.coins.len(), proj.probability);
            emit_json(
                g,
                &json!({
                    "state": StateFile::from_state(&state),
                    "projection": {"origin": proj.origin, "probability": proj.probability, "amplitudes": proj.normalized},
                }),
            )
        }
        Command::Project { state, bra } => {
            let s = io::read_json::<StateFile>(&state)?.to_state();
            let bra = match bra {
                Some(b) => parse_pair(&b)?,
                None => plus_bra(),
            };
            let proj = project_coin(&s, bra)?;
            eprintln!("projection probability {:.6}", proj.probability);
            emit_json(
                g,
                &json!({"origin": proj.origin, "probability": proj.probability, "amplitudes": proj.normalized}),
            )
        }
        Command::Check { state, steps } => {
            let s = io::read_json::<StateFile>(&state)?.to_state();
            let n = steps.unwrap_or(s.site_count().saturating_sub(1));
            let res = reachability_residuals(&s, n)?;
            let ok = residuals_vanish(&res, g.tol, s.norm());
            let worst = res.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            let report = json!({
                "steps": n,
                "reachable": ok,
                "max_residual": worst,
                "residuals": res,
                "max_reachable_steps": max_reachable_steps(&s, g.tol),
            });
            if ok {
                eprintln!("reachable in {n} steps");
                emit_json(g, &report)
            } else {
                Err(Failure::no_solution(format!("not reachable in {n} steps"), report))
            }
        }
        Command::Backsolve {
            state,
            initial_coin,
            alphas,
            random_alphas,
        } => {
            let s = io::read_json::<StateFile>(&state)?.to_state();
            let init = match initial_coin {
                Some(c) => parse_pair(&c)?,
                None => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            };
            let alphas: Vec<f64> = match alphas {
                Some(path) => io::read_json(&path)?,
                None if random_alphas => {
                    let mut r = rng::stream(g.seed, 0);
                    (1..s.site_count().saturating_sub(1))
                        .map(|_| r.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                        .collect()
                }
                None => Vec::new(),
            };
            let coins = backsolve_with_tol(&s, init, &alphas, g.tol)?;
            eprintln!("{} coins recovered", coins.len());
            emit_json(
                g,
                &WalkFile {
                    initial_coin: init,
                    coins: coins.iter().map(CoinRecord::from_coin).collect(),
                    projection: None,
                },
            )
        }
        Command::Engineer {
            target,
            max_solutions,
            preimage_initial_coin,
        } => {
            let t = io::read_json::<TargetFile>(&target)?.to_target()?;
            let file = if t.steps() > N_MAX_POLY {
                let note = format!(
                    "{} steps exceed the polynomial route (max {N_MAX_POLY}); solved with the fidelity optimizer",
                    t.steps()
                );
                eprintln!("{note}");
                let opts = OptimizerOptions {
                    seed: g.seed,
                    ..Default::default()
                };
                optimize_file(&t, t.steps(), &opts, Some(note))?
            } else {
                engineer_file(&t, &engineer_opts(g, preimage_initial_coin, max_solutions))?
            };
            emit_json(g, &file)
        }
        Command::Optimize {
            target,
            steps,
            optimize_projection,
            optimize_initial_coin,
            restarts,
            max_iterations,
            prob_weight,
        } => {
            let t = io::read_json::<TargetFile>(&target)?.to_target()?;
            let opts = OptimizerOptions {
                max_iterations,
                restarts,
                optimize_projection,
                optimize_initial_coin,
                seed: g.seed,
                prob_weight,
                initial_guess: None,
            };
            emit_json(g, &optimize_file(&t, steps, &opts, None)?)
        }
        Command::Histogram {
            steps,
            samples,
            mode,
            bins,
            bins_out,
        } => {
            let mode = match mode {
                ModeArg::DSystem => HistogramMode::DSystem,
                ModeArg::Optimizer => HistogramMode::Optimizer,
            };
            let mut opts = HistogramOptions::new(steps, samples, mode);
            opts.bins = bins;
            opts.seed = g.seed;
            histogram(g, &opts, bins_out.as_ref())
        }
        Command::Sweep {
            solution,
            index,
            param,
            grid,
            mode,
        } => {
            let (sol, target) = load_solution(&solution, index)?;
            let selector = if param == "all" {
                ParamSelector::All
            } else {
                let (step, angle) = param
                    .split_once(':')
                    .ok_or_else(|| Failure::validation(format!("--param must be step:angle or all, got {param:?}")))?;
                let step = step.parse().map_err(|_| Failure::validation(format!("bad step {step:?}")))?;
                ParamSelector::One {
                    step,
                    angle: Angle::parse(angle)?,
                }
            };
            let parts: Vec<&str> = grid.split(',').collect();
            let bad = || Failure::validation(format!("--grid must be a,b,k, got {grid:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            let k: usize = parts[2].trim().parse().map_err(|_| bad())?;
            let mode = match mode {
                SweepModeArg::Absolute => PerturbMode::Absolute,
                SweepModeArg::Relative => PerturbMode::Relative,
                SweepModeArg::Scale => PerturbMode::Scale,
            };
            let pts = perturb_sweep(&sol, &target, selector, &linspace(a, b, k), mode)?;
            let mut buf = Vec::new();
            write_sweep_csv(&pts, &mut buf)?;
            eprintln!("{} sweep points", pts.len());
            emit(g, &String::from_utf8_lossy(&buf))
        }
        Command::Compile { solution, index } => {
            let (sol, _) = load_solution(&solution, index)?;
            let plan = compile_experiment(&sol)?.rounded();
            eprintln!(
                "{} units: {} wave plates, {} q-plates, {} plate(s) in the projection stage",
                plan.units.len(),
                plan.counts.wave_plates,
                plan.counts.q_plates,
                plan.counts.projection_plates
            );
            emit_json(g, &plan)
        }
        Command::Reproduce { case, samples } => match case {
            Case::Balanced4 | Case::Balanced6 | Case::SixsitesMinus => {
                let t = match case {
                    Case::Balanced4 => balanced_target(4)?,
                    Case::Balanced6 => balanced_target(6)?,
                    _ => TargetSuperposition::from_real(&[1.0, 1.0, 1.0, 1.0, 1.0, -1.0])?,
                };
                emit_json(g, &engineer_file(&t, &engineer_opts(g, false, None))?)
            }
            Case::Hist2 => {
                let mut opts = HistogramOptions::new(2, samples.unwrap_or(2000), HistogramMode::DSystem);
                opts.seed = g.seed;
                histogram(g, &opts, None)
            }
            Case::Hist15 => {
                let mut opts = HistogramOptions::new(15, samples.unwrap_or(100), HistogramMode::Optimizer);
                opts.seed = g.seed;
                histogram(g, &opts, None)
            }
        },
    }
}

fn report(f: &Failure) -> ExitCode {
    eprintln!("error: {}", f.message);
    let obj = ErrorObject {
        code: f.code as i32,
        message: f.message.clone(),
        context: f.context.clone(),
    };
    if let Ok(text) = io::to_json(&obj) {
        print!("{text}");
    }
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("QWALK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return report(&Failure {
                code: 1,
                message: "invalid command line".into(),
                context: json!({"usage": e.render().to_string()}),
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
