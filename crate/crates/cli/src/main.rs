mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use di_toolkit::boxes::{chsh_game, extended_chsh_game, Alphabets, Game, MultiRoundBox, SingleRoundBox};
use di_toolkit::definetti::ReductionVerifier;
use di_toolkit::eat::{mu_block_opt, mu_opt, BlockSpec, EatEpsilons};
use di_toolkit::entropy::{bell_diag_bound, secrecy_bound};
use di_toolkit::keyrates::{rate_curve, Axis, Caps, Mode, RateReport};
use di_toolkit::signalling::{frequency_box_second_half, sanov_delta, sig_measure, Direction, SigTarget, TestParams};
use di_toolkit::simulate::{estimate_abort_probability, estimate_abort_probability_blocks, BlockConfig, HonestDevice, ProtocolConfig};
use di_toolkit::{io, nslp, signalling, Error};

use output::fmt_num;

#[derive(Parser)]
#[command(name = "di-toolkit", version, about = "Device-independent correlations, game values and key rates")]
struct Cli {
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    out: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// JSON object of flag values, keyed by long flag name. Flags given on
    /// the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Secrecy curve and Bell-diagonal bound on a grid of winning probabilities.
    EntropyCurve(EntropyCurveArgs),
    /// Entropy rate optimised over the cut point.
    MuOpt(MuOptArgs),
    /// Optimised key rates along a QBER or round-count axis.
    RateCurve(RateCurveArgs),
    /// Non-signalling value of a game with its dual certificate.
    NsValue(GameArgs),
    /// Non-signalling threshold-game bound.
    ThresholdBound(ThresholdArgs),
    /// Check the de Finetti reduction on deterministic IID and random symmetric boxes.
    DefinettiVerify(DefinettiArgs),
    /// Run signalling tests on observed data.
    SigTest(SigTestArgs),
    /// Estimate the honest abort probability by simulation.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EntropyCurveArgs {
    #[arg(long, default_value_t = 0.75)]
    from: f64,
    #[arg(long, default_value_t = 0.853553)]
    to: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
}

#[derive(Args)]
struct MuOptArgs {
    /// Rounds (expected rounds in block mode).
    #[arg(long)]
    n: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    omega_exp: f64,
    #[arg(long)]
    delta_est: f64,
    #[arg(long)]
    eps_s: f64,
    #[arg(long)]
    eps_e: f64,
    #[arg(long)]
    block: bool,
    /// Block length cap; defaults to ⌈1/γ⌉.
    #[arg(long, requires = "block")]
    s_max: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerRound,
    Block,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    /// Sweep the round count at fixed `--q`.
    N,
    /// Sweep the QBER at fixed `--n`.
    Q,
}

#[derive(Args)]
struct RateCurveArgs {
    #[arg(long, value_enum, default_value = "block")]
    mode: ModeArg,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Fixed QBER for an n sweep.
    #[arg(long)]
    q: Option<f64>,
    /// Fixed round count for a QBER sweep.
    #[arg(long)]
    n: Option<f64>,
    /// Explicit comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Grid start; n sweeps are spaced logarithmically, QBER sweeps linearly.
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 1e-10)]
    eps_ec: f64,
    #[arg(long, default_value_t = 1e-5)]
    soundness: f64,
    #[arg(long, default_value_t = 1e-2)]
    completeness: f64,
}

#[derive(Args)]
struct GameArgs {
    /// Game file, or one of the built-in names `chsh`, `extended-chsh`.
    #[arg(long)]
    game: String,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    beta: f64,
}

#[derive(Args)]
struct DefinettiArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    AB,
    BA,
}

#[derive(Args)]
struct SigTestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    zeta: f64,
    #[arg(long)]
    eps: f64,
    /// Test a single target; all targets otherwise.
    #[arg(long, value_enum, requires_all = ["x", "y", "outcome"])]
    direction: Option<DirectionArg>,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    outcome: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Rounds per run (ignored with --block, which uses --m-blocks).
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    omega_exp: f64,
    #[arg(long)]
    delta_est: f64,
    #[arg(long, default_value_t = 0.0)]
    qber: f64,
    #[arg(long, default_value_t = 500)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    block: bool,
    #[arg(long, requires = "block")]
    s_max: Option<u32>,
    #[arg(long, requires = "block")]
    m_blocks: Option<u64>,
}

#[derive(Debug)]
enum Failure {
    Compute(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Run = std::result::Result<String, Failure>;

fn load_game(spec: &str) -> Result<Game, Failure> {
    match spec {
        "chsh" => Ok(chsh_game()),
        "extended-chsh" => Ok(extended_chsh_game()),
        path => Ok(io::load_game(path)?),
    }
}

fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![from],
        k => (0..k).map(|i| from + (to - from) * i as f64 / (k - 1) as f64).collect(),
    }
}

fn entropy_curve(a: &EntropyCurveArgs, fmt: Format) -> Run {
    let mut rows = Vec::with_capacity(a.points);
    #[derive(Serialize)]
    struct Row {
        omega: f64,
        secrecy_bound: f64,
        bell_diag_bound: f64,
    }
    for w in linspace(a.from, a.to, a.points) {
        rows.push(Row { omega: w, secrecy_bound: secrecy_bound(w)?, bell_diag_bound: bell_diag_bound(w)? });
    }
    Ok(match fmt {
        Format::Json => output::json(&rows),
        Format::Csv => output::csv(
            &["omega", "secrecy_bound", "bell_diag_bound"],
            &rows.iter().map(|r| vec![fmt_num(r.omega), fmt_num(r.secrecy_bound), fmt_num(r.bell_diag_bound)]).collect::<Vec<_>>(),
        ),
    })
}

fn mu_opt_cmd(a: &MuOptArgs, fmt: Format) -> Run {
    let eps = EatEpsilons::new(a.eps_s, a.eps_e)?;
    #[derive(Serialize)]
    struct Out {
        mode: &'static str,
        value: f64,
        best_cut: f64,
        f_min: f64,
        slope: f64,
        penalty: f64,
        s_max: Option<u32>,
        m_blocks: Option<f64>,
    }
    let out = if a.block {
        let block = match a.s_max {
            Some(s) => BlockSpec::new(a.gamma, s)?,
            None => BlockSpec::recommended(a.gamma)?,
        };
        let m = a.n / block.expected_length();
        let r = mu_block_opt(a.omega_exp, a.delta_est, &block, m, &eps)?;
        Out { mode: "block", value: r.value, best_cut: r.best_cut, f_min: r.f_min, slope: r.slope, penalty: r.penalty, s_max: Some(block.s_max), m_blocks: Some(m) }
    } else {
        let r = mu_opt(a.omega_exp, a.delta_est, a.gamma, a.n, &eps)?;
        Out { mode: "per-round", value: r.value, best_cut: r.best_cut, f_min: r.f_min, slope: r.slope, penalty: r.penalty, s_max: None, m_blocks: None }
    };
    Ok(match fmt {
        Format::Json => output::json(&out),
        Format::Csv => output::csv(
            &["value", "best_cut", "f_min", "slope", "penalty"],
            &[vec![fmt_num(out.value), fmt_num(out.best_cut), fmt_num(out.f_min), fmt_num(out.slope), fmt_num(out.penalty)]],
        ),
    })
}

const RATE_HEADER: [&str; 19] = [
    "axis_value", "status", "rate", "rate_clamped", "key_length", "gamma", "delta_est", "cut", "s_max", "entropy",
    "leak_ec", "smoothing", "max_entropy", "privacy_amplification", "eps_s", "eps_ea", "eps_pa", "eps_t",
    "completeness_error",
];

fn rate_row(v: f64, r: &Result<RateReport, Error>) -> Vec<String> {
    match r {
        Ok(r) => {
            let b = &r.breakdown;
            vec![
                fmt_num(v),
                "ok".into(),
                fmt_num(r.rate),
                fmt_num(r.rate.max(0.0)),
                fmt_num(r.key_length),
                fmt_num(r.params.gamma),
                fmt_num(r.params.delta_est),
                fmt_num(r.entropy_rate.best_cut),
                r.s_max.map_or(String::new(), |s| s.to_string()),
                fmt_num(b.entropy),
                fmt_num(b.leak_ec),
                fmt_num(b.smoothing),
                fmt_num(b.max_entropy),
                fmt_num(b.privacy_amplification),
                fmt_num(r.budget.eps_s),
                fmt_num(r.budget.eps_ea),
                fmt_num(r.budget.eps_pa),
                r.budget.eps_t.map_or(String::new(), fmt_num),
                fmt_num(r.completeness_error),
            ]
        }
        Err(e) => {
            let mut row = vec![fmt_num(v), format!("error: {e}")];
            row.resize(RATE_HEADER.len(), String::new());
            row
        }
    }
}

fn rate_curve_cmd(a: &RateCurveArgs, fmt: Format) -> Run {
    let grid = match (&a.values, a.from, a.to) {
        (Some(v), _, _) => v.clone(),
        (None, Some(f), Some(t)) => match a.axis {
            AxisArg::N => {
                if !(f > 0.0 && t > 0.0) {
                    return Err(Failure::Compute("round-count grid must be positive".into()));
                }
                linspace(f.log10(), t.log10(), a.points).into_iter().map(|e| 10f64.powf(e)).collect()
            }
            AxisArg::Q => linspace(f, t, a.points),
        },
        _ => return Err(Failure::Compute("give --values or both --from and --to".into())),
    };
    let (axis, fixed) = match a.axis {
        AxisArg::N => (Axis::Rounds, a.q.ok_or_else(|| Failure::Compute("--axis n needs --q".into()))?),
        AxisArg::Q => (Axis::Qber, a.n.ok_or_else(|| Failure::Compute("--axis q needs --n".into()))?),
    };
    let mode = match a.mode {
        ModeArg::PerRound => Mode::PerRound,
        ModeArg::Block => Mode::Block,
    };
    let caps = Caps { soundness: a.soundness, completeness: a.completeness, eps_ec: a.eps_ec };
    let results = rate_curve(axis, &grid, fixed, &caps, mode);
    Ok(match fmt {
        Format::Csv => output::csv(&RATE_HEADER, &grid.iter().zip(&results).map(|(&v, r)| rate_row(v, r)).collect::<Vec<_>>()),
        Format::Json => {
            #[derive(Serialize)]
            struct Point<'a> {
                axis_value: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                report: Option<&'a RateReport>,
                #[serde(skip_serializing_if = "Option::is_none")]
                error: Option<String>,
            }
            let pts: Vec<_> = grid
                .iter()
                .zip(&results)
                .map(|(&v, r)| Point { axis_value: v, report: r.as_ref().ok(), error: r.as_ref().err().map(|e| e.to_string()) })
                .collect();
            output::json(&pts)
        }
    })
}

fn ns_value_cmd(a: &GameArgs) -> Run {
    let g = load_game(&a.game)?;
    let v = nslp::ns_value(&g)?;
    #[derive(Serialize)]
    struct Out {
        value: f64,
        d: usize,
        kappa: f64,
    }
    Ok(output::json(&Out { value: v.value, d: v.d, kappa: v.kappa }))
}

fn threshold_cmd(a: &ThresholdArgs) -> Run {
    let g = load_game(&a.game)?;
    let bound = signalling::threshold_bound(&g, a.n, a.beta)?;
    let d = g.alphabets().signalling_count();
    #[derive(Serialize)]
    struct Out {
        bound: f64,
        n: u64,
        beta: f64,
        d: usize,
        eps: f64,
    }
    Ok(output::json(&Out { bound, n: a.n, beta: a.beta, d, eps: a.beta / (10.0 * d as f64) }))
}

fn definetti_cmd(a: &DefinettiArgs) -> Run {
    use rayon::prelude::*;
    let al = Alphabets::binary();
    let v = ReductionVerifier::new(a.n, al)?;
    let mut boxes = Vec::new();
    for fa in 0..4 {
        for fb in 0..4 {
            let d = SingleRoundBox::deterministic(al, &[fa & 1, fa >> 1], &[fb & 1, fb >> 1])?;
            boxes.push(MultiRoundBox::iid(&d, a.n)?);
        }
    }
    let deterministic = boxes.len();
    let random: Vec<_> = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            rng.set_stream(i);
            MultiRoundBox::random(a.n, al, &mut rng)?.symmetrize()
        })
        .collect::<Result<_, Error>>()?;
    boxes.extend(random);
    let checks = boxes.par_iter().map(|b| v.check(b)).collect::<Result<Vec<_>, Error>>()?;
    #[derive(Serialize)]
    struct Out {
        n: usize,
        deterministic_boxes: usize,
        random_boxes: u64,
        factor: f64,
        max_ratio: f64,
        holds: bool,
    }
    Ok(output::json(&Out {
        n: a.n,
        deterministic_boxes: deterministic,
        random_boxes: a.trials,
        factor: checks.first().map_or(1.0, |c| c.factor),
        max_ratio: checks.iter().map(|c| c.max_ratio).fold(0.0, f64::max),
        holds: checks.iter().all(|c| c.holds),
    }))
}

fn sig_test_cmd(a: &SigTestArgs) -> Run {
    let (al, q, data) = io::load_data(&a.data)?;
    let params = TestParams::new(a.zeta, a.eps, data.len())?;
    let targets = match a.direction {
        Some(d) => {
            let (x, y, o) = (a.x.unwrap_or(0), a.y.unwrap_or(0), a.outcome.unwrap_or(0));
            vec![match d {
                DirectionArg::AB => SigTarget::a_to_b(x, y, o),
                DirectionArg::BA => SigTarget::b_to_a(x, y, o),
            }]
        }
        None => SigTarget::all(&al),
    };
    let freq = frequency_box_second_half(&data, &al, &q)?;
    #[derive(Serialize)]
    struct Res {
        direction: &'static str,
        x: usize,
        y: usize,
        outcome: usize,
        sig: Option<f64>,
        detected: bool,
    }
    let mut results = Vec::with_capacity(targets.len());
    for t in targets {
        let detected = signalling::run_signalling_test(&data, &q, &params, t, &al)?;
        let sig = freq.as_ref().map(|f| sig_measure(f, &q, t)).transpose()?;
        let direction = match t.direction {
            Direction::AtoB => "AtoB",
            Direction::BtoA => "BtoA",
        };
        results.push(Res { direction, x: t.x, y: t.y, outcome: t.outcome, sig, detected });
    }
    #[derive(Serialize)]
    struct Out {
        n: usize,
        zeta: f64,
        eps: f64,
        threshold: f64,
        sanov_delta: f64,
        any_detected: bool,
        results: Vec<Res>,
    }
    Ok(output::json(&Out {
        n: data.len(),
        zeta: a.zeta,
        eps: a.eps,
        threshold: a.zeta - 2.0 * a.eps,
        sanov_delta: sanov_delta((data.len() / 2) as u64, a.eps, al.len()),
        any_detected: results.iter().any(|r| r.detected),
        results,
    }))
}

fn simulate_cmd(a: &SimulateArgs) -> Run {
    let device = HonestDevice::new(a.omega_exp, a.qber)?;
    let est = if a.block {
        let block = match a.s_max {
            Some(s) => BlockSpec::new(a.gamma, s)?,
            None => BlockSpec::recommended(a.gamma)?,
        };
        let m = a.m_blocks.unwrap_or_else(|| (a.n as f64 / block.expected_length()).round() as u64);
        estimate_abort_probability_blocks(&BlockConfig::honest(m, block, a.delta_est, device)?, a.trials, a.seed)?
    } else {
        estimate_abort_probability(&ProtocolConfig::honest(a.n, a.gamma, a.delta_est, device)?, a.trials, a.seed)?
    };
    #[derive(Serialize)]
    struct Out {
        abort_freq: f64,
        ci: [f64; 2],
        hoeffding_bound: f64,
        aborts: u64,
        trials: u64,
    }
    let f = est.frequency;
    Ok(output::json(&Out { abort_freq: f.freq, ci: [f.ci.0, f.ci.1], hoeffding_bound: est.hoeffding_bound, aborts: f.hits, trials: f.trials }))
}

fn run(cli: &Cli) -> Run {
    let json_only = |f: Option<Format>| match f {
        Some(Format::Csv) => Err(Failure::Compute("this subcommand only writes JSON".into())),
        _ => Ok(()),
    };
    match &cli.cmd {
        Command::EntropyCurve(a) => entropy_curve(a, cli.out.unwrap_or(Format::Csv)),
        Command::MuOpt(a) => mu_opt_cmd(a, cli.out.unwrap_or(Format::Json)),
        Command::RateCurve(a) => rate_curve_cmd(a, cli.out.unwrap_or(Format::Csv)),
        Command::NsValue(a) => json_only(cli.out).and_then(|_| ns_value_cmd(a)),
        Command::ThresholdBound(a) => json_only(cli.out).and_then(|_| threshold_cmd(a)),
        Command::DefinettiVerify(a) => json_only(cli.out).and_then(|_| definetti_cmd(a)),
        Command::SigTest(a) => json_only(cli.out).and_then(|_| sig_test_cmd(a)),
        Command::Simulate(a) => json_only(cli.out).and_then(|_| simulate_cmd(a)),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("DI_TOOLKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn write(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    output::emit(text, path).map_err(|e| Failure::Io(e.to_string()))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match run(&cli).and_then(|text| write(&text, cli.output.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Compute(m)) | Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
