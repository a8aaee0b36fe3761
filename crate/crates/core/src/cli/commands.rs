use std::fs::File;
use std::io::{self, BufRead, BufReader, Cursor, Read};
use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;
use serde_json::{json, Value};

use permbet::classical::{
    bc_pvalue, calibrate_harmonic, calibrate_sqrt, check_admissible, negbin_pvalue, perm_pvalue, DiscreteSupport,
};
use permbet::engine::{stochastic_round, RoundedEValue, RoundingGuard, SequentialTest, StoppingRule, TrajectoryPoint};
use permbet::harness::{
    estimate_resampling_risk, parse_config, randomized_threshold_risk, run_count_table_experiment, run_simulation,
    CountTableConfig, ExperimentTable, Manifest, MethodConfig, SimulateConfig,
};
use permbet::reconstruct::{
    anytime_bc_path, anytime_perm_path, backward_reconstruct, bc_target, perm_target, EValueVector,
    ReconstructionTable,
};
use permbet::rng::RandomSource;
use permbet::stream::{read_indicators, read_statistics_csv, read_statistics_lines, StatisticIter};
use permbet::{Alpha, Error, IndicatorStream, Prior, Result, StrategyConfig, StrategyKind};

use super::output::{sink, write_one, write_rows};
use super::{
    BaselineArgs, BaselineKind, CalibrateArgs, CalibratorKind, Cli, Command, Format, Global, ReconstructArgs, RiskArgs,
    SimulateArgs, StrategyArgs, TargetKind, TestArgs,
};

/// Stream id of the stochastic-rounding uniform in `test`.
const ROUNDING_STREAM: u64 = u64::MAX;

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let (code, manifest) = match &cli.command {
        Command::Test(a) => cmd_test(g, a)?,
        Command::Simulate(a) => cmd_simulate(g, a)?,
        Command::Riskscan(a) => cmd_riskscan(g, a)?,
        Command::Reconstruct(a) => cmd_reconstruct(g, a)?,
        Command::Calibrate(a) => cmd_calibrate(g, a)?,
        Command::Baselines(a) => cmd_baselines(g, a)?,
    };
    if let (Some(path), Some((name, seed, config))) = (&g.manifest, manifest) {
        Manifest::new(name, seed, config).write(File::create(path)?)?;
    }
    Ok(code)
}

type Outcome = (ExitCode, Option<(&'static str, Option<u64>, Value)>);

fn alpha(g: &Global) -> Result<Alpha> {
    match g.alpha {
        Some(a) => Alpha::new(a),
        None => Err(Error::InvalidParameter("--alpha is required for this command".into())),
    }
}

fn open(path: Option<&Path>) -> Result<Box<dyn Read>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(File::open(p)?),
        _ => Box::new(io::stdin()),
    })
}

/// Reads a statistic stream, detecting CSV (header row) or one value per
/// line from the first non-blank line.
fn read_statistics(reader: Box<dyn Read>) -> Result<(f64, StatisticIter)> {
    let mut reader = BufReader::new(reader);
    let mut head = String::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        head.push_str(&line);
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            break;
        }
    }
    let first = head.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    let is_csv = first.is_some_and(|l| l.split(',').next().unwrap().trim().parse::<f64>().is_err());
    let chained = Cursor::new(head.into_bytes()).chain(reader);
    if is_csv {
        read_statistics_csv(chained)
    } else {
        read_statistics_lines(BufReader::new(chained))
    }
}

fn strategy_config(args: &StrategyArgs, alpha: Option<Alpha>) -> Result<StrategyConfig> {
    let kind: StrategyKind = args.strategy.parse()?;
    let mut cfg = StrategyConfig {
        kind,
        p: args.p,
        c: args.c,
        a: args.a,
        b: args.b,
        alpha,
        prior: None,
    };
    if kind == StrategyKind::MimickedLogopt {
        if let (Some(a), Some(b)) = (args.a, args.b) {
            cfg.prior = Some(Prior::Beta { a, b });
        } else if let Some(c) = args.c {
            cfg.prior = Some(Prior::Uniform { lo: 0.0, hi: c });
        }
    }
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct TestReport {
    stop_time: u64,
    stop_reason: String,
    e_value: f64,
    p_value: f64,
    losses: u64,
    seed: Option<u64>,
    rejected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounded_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounding_uniform: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<Vec<TrajectoryPoint>>,
}

fn cmd_test(g: &Global, args: &TestArgs) -> Result<Outcome> {
    let alpha = alpha(g)?;
    let seed = g.seed.unwrap_or(0);
    let cfg = strategy_config(&args.strategy, Some(alpha))?;
    let mut rule = StoppingRule::new(alpha).with_max_steps(args.max_steps);
    if let Some(f) = args.futility {
        rule = rule.with_futility(f);
    }
    let (y0, stats) = read_statistics(open(args.input.as_deref())?)?;
    let mut stream =
        IndicatorStream::statistics(y0, stats, args.ties.into(), RandomSource::new(seed, 0)).with_max_len(args.max_steps);
    let mut test = SequentialTest::from_config(&cfg, rule)?.with_seed(Some(seed));
    if let Some(every) = args.trajectory {
        test = test.record_trajectory(every);
    }
    let out = test.run(&mut stream)?;
    let mut rejected = out.rejected();
    let rounded: Option<RoundedEValue> = if args.rounding {
        let ticket = RoundingGuard::new().ticket(seed, ROUNDING_STREAM)?;
        let r = stochastic_round(out.e_value, alpha, ticket);
        rejected = r.rejects(alpha);
        Some(r)
    } else {
        None
    };
    let report = TestReport {
        stop_time: out.stop_time,
        stop_reason: out.stop_reason.to_string(),
        e_value: out.e_value,
        p_value: out.p_value,
        losses: out.losses,
        seed: out.seed,
        rejected,
        rounded_value: rounded.map(|r| r.value),
        rounding_uniform: rounded.map(|r| r.uniform_draw),
        trajectory: if g.format == Format::Json { out.trajectory } else { None },
    };
    write_one(g, &report)?;
    let config = json!({
        "strategy": cfg,
        "alpha": alpha.value(),
        "futility": args.futility,
        "max_steps": args.max_steps,
        "ties": format!("{:?}", args.ties).to_lowercase(),
        "rounding": args.rounding,
    });
    let code = if rejected { ExitCode::SUCCESS } else { ExitCode::from(1) };
    Ok((code, Some(("test", Some(seed), config))))
}

fn print_summary(table: &ExperimentTable, to_stderr: bool) {
    for r in &table.rows {
        let mu = r.mu.map(|m| format!(" mu={m}")).unwrap_or_default();
        let line = format!(
            "{}{mu}: power={:.4} mean_stop={:.2} median_stop={} m1={} m0={}",
            r.label, r.power, r.mean_stop, r.median_stop, r.m1, r.m0
        );
        if to_stderr {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}

fn write_table(g: &Global, table: &ExperimentTable) -> Result<()> {
    let out = sink(g)?;
    match g.format {
        Format::Csv => table.write_csv(out),
        Format::Json => table.write_json(out),
    }
}

fn cmd_simulate(g: &Global, args: &SimulateArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&args.config)?;
    let raw: Value = serde_json::from_str(&text)?;
    let count_table = raw.get("experiment").and_then(Value::as_str) == Some("count_table");
    let (table, config, seed) = if count_table {
        let (mut cfg, _) = parse_config::<CountTableConfig>(&text)?;
        if let Some(a) = g.alpha {
            cfg.alpha = Alpha::new(a)?;
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        (run_count_table_experiment(&cfg, g.jobs)?, serde_json::to_value(&cfg)?, cfg.seed)
    } else {
        let (mut cfg, _) = parse_config::<SimulateConfig>(&text)?;
        if let Some(a) = g.alpha {
            cfg.alpha = Alpha::new(a)?;
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if args.full {
            cfg.m = 2000;
        }
        (run_simulation(&cfg, g.jobs)?, serde_json::to_value(&cfg)?, cfg.seed)
    };
    write_table(g, &table)?;
    print_summary(&table, g.out.is_none());
    Ok((ExitCode::SUCCESS, Some(("simulate", Some(seed), config))))
}

fn cmd_riskscan(g: &Global, args: &RiskArgs) -> Result<Outcome> {
    let alpha = alpha(g)?;
    let seed = g.seed.unwrap_or(0);
    let strategy = strategy_config(&args.strategy, None)?;
    let method = MethodConfig::from_strategy(&strategy)
        .with_rounding(args.rounding)
        .with_futility(!args.no_futility);
    let rows = args
        .q
        .iter()
        .map(|&q| match args.epsilon {
            Some(eps) => randomized_threshold_risk(q, alpha, eps, args.runs, args.cap, seed, g.jobs),
            None => estimate_resampling_risk(&method, q, alpha, args.runs, args.cap, seed, g.jobs),
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(g, &rows)?;
    let config = json!({
        "method": method,
        "epsilon": args.epsilon,
        "alpha": alpha.value(),
        "q": args.q,
        "runs": args.runs,
        "cap": args.cap,
    });
    Ok((ExitCode::SUCCESS, Some(("riskscan", Some(seed), config))))
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: i as u64 + 1,
                message: format!("cannot parse {:?}: {e}", l.trim()),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct BetRow {
    r: u64,
    losses: u64,
    b0: f64,
    b1: f64,
}

#[derive(Debug, Serialize)]
struct PathRow {
    t: u64,
    losses: u64,
    wealth: f64,
    p_value: f64,
}

fn cmd_reconstruct(g: &Global, args: &ReconstructArgs) -> Result<Outcome> {
    let need = |v: Option<u64>, what: &str| v.ok_or_else(|| Error::InvalidParameter(format!("--{what} is required")));
    let target: EValueVector<f64> = match args.target {
        TargetKind::Perm => perm_target(need(args.horizon, "T")?, &alpha(g)?.value())?,
        TargetKind::Bc => bc_target(need(args.h, "h")?, args.horizon, &alpha(g)?.value())?,
        TargetKind::File => {
            let path = args
                .file
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("--file is required".into()))?;
            EValueVector::new(read_vector(path)?)?
        }
    };
    let table: ReconstructionTable<f64> = backward_reconstruct(&target)?;
    let path = match &args.indicators {
        Some(p) => {
            let ind = read_indicators(File::open(p)?)?;
            let ind = &ind[..ind.len().min(table.horizon as usize)];
            let wealth = table.wealth_path(ind);
            let pvals: Vec<f64> = match args.target {
                TargetKind::Perm => anytime_perm_path(ind, table.horizon).iter().map(to_f64).collect(),
                TargetKind::Bc => anytime_bc_path(ind, args.horizon, args.h.unwrap()).iter().map(to_f64).collect(),
                TargetKind::File => {
                    let mut max = 1.0f64;
                    wealth.iter().map(|w| { max = max.max(*w); 1.0 / max }).collect()
                }
            };
            let mut l = 0;
            Some(
                ind.iter()
                    .zip(wealth.iter().zip(pvals))
                    .enumerate()
                    .map(|(i, (x, (w, p)))| {
                        l += x.is_loss() as u64;
                        PathRow { t: i as u64 + 1, losses: l, wealth: *w, p_value: p }
                    })
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    match (g.format, path) {
        (Format::Json, path) => write_one(g, &json!({ "table": table, "trajectory": path }))?,
        (Format::Csv, Some(path)) => write_rows(g, &path)?,
        (Format::Csv, None) => {
            let rows: Vec<BetRow> = (1..=table.horizon)
                .flat_map(|r| (0..r).map(move |l| (r, l)))
                .map(|(r, l)| {
                    let b = table.bet(r, l);
                    BetRow { r, losses: l, b0: b[0], b1: b[1] }
                })
                .collect();
            write_rows(g, &rows)?
        }
    }
    let config = json!({ "target": format!("{:?}", args.target).to_lowercase(), "T": args.horizon, "h": args.h, "alpha": g.alpha });
    Ok((ExitCode::SUCCESS, Some(("reconstruct", None, config))))
}

fn to_f64(r: &num_rational::Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Serialize)]
struct CalibrationRow {
    r: u64,
    p: f64,
    e_value: f64,
}

fn cmd_calibrate(g: &Global, args: &CalibrateArgs) -> Result<Outcome> {
    let t = args.horizon;
    let f = match args.kind {
        CalibratorKind::Harmonic => calibrate_harmonic,
        CalibratorKind::Sqrt => calibrate_sqrt,
    };
    let support = DiscreteSupport::new(t);
    let ps: Vec<f64> = if args.p.is_empty() {
        support.points().map(|p| to_f64(&p)).collect()
    } else {
        args.p.clone()
    };
    let rows = ps
        .iter()
        .map(|&p| Ok(CalibrationRow { r: support.rank(p)?, p, e_value: f(p, t)? }))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = support.points().map(|p| f(to_f64(&p), t)).collect::<Result<_>>()?;
    let admissible = check_admissible(&all, t);
    match g.format {
        Format::Csv => write_rows(g, &rows)?,
        Format::Json => write_one(
            g,
            &json!({ "kind": format!("{:?}", args.kind).to_lowercase(), "T": t, "admissible": admissible, "values": rows }),
        )?,
    }
    Ok((ExitCode::SUCCESS, Some(("calibrate", None, json!({ "kind": format!("{:?}", args.kind).to_lowercase(), "T": t })))))
}

#[derive(Debug, Serialize)]
struct BaselineRow {
    method: &'static str,
    p_value: f64,
    stop_time: u64,
    losses: u64,
}

fn cmd_baselines(g: &Global, args: &BaselineArgs) -> Result<Outcome> {
    let ind = read_indicators(open(args.input.as_deref())?)?;
    let need_h = || args.h.ok_or_else(|| Error::InvalidParameter("--h is required".into()));
    let row = match args.method {
        BaselineKind::Perm => {
            let t = args.horizon.unwrap_or(ind.len() as u64);
            if t as usize > ind.len() {
                return Err(Error::StreamExhausted(ind.len() as u64));
            }
            let l = ind[..t as usize].iter().filter(|i| i.is_loss()).count() as u64;
            BaselineRow { method: "perm", p_value: to_f64(&perm_pvalue(l, t)), stop_time: t, losses: l }
        }
        BaselineKind::Bc => {
            let r = bc_pvalue(&ind, need_h()?, args.horizon.unwrap_or(ind.len() as u64))?;
            BaselineRow { method: "bc", p_value: r.p_f64(), stop_time: r.stop_time, losses: r.losses }
        }
        BaselineKind::Negbin => {
            let r = negbin_pvalue(&ind, need_h()?)?;
            BaselineRow { method: "negbin", p_value: r.p_f64(), stop_time: r.stop_time, losses: r.losses }
        }
    };
    write_one(g, &row)?;
    let code = match g.alpha {
        Some(a) if row.p_value > Alpha::new(a)?.value() => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    };
    Ok((code, Some(("baselines", None, json!({ "method": row.method, "h": args.h, "T": args.horizon })))))
}
