//! Command-line front end. Every subcommand prints one envelope
//! `{tool, version, subcommand, params, result}` as JSON or flattened CSV.

mod output;

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use condbound::anticoncentration::{lemma2_certificate, pz_bound};
use condbound::asymptotics::{estimate_residual, scaled_residual_bound, stirling_bell_sandwich};
use condbound::cache;
use condbound::combinatorics::{BellSequence, StirlingTable, DEFAULT_TABLE_CAP};
use condbound::condenser::{
    asymptotic_gap_report, epsilon_star_wire, impossibility_certificate, necessary_independence,
    positive_params, reference_comparison, CertificateLadder, Feasibility,
};
use condbound::interval::{Dyadic, FloatInterval};
use condbound::moments::{raw_moment, BallsBinsInstance};
use condbound::simulate::{
    independent_oracle_with_cap, run_trials, HashFamilySpec, SimulationConfig, SimulationReport,
    DEFAULT_THROW_CAP,
};
use condbound::wire::{self, RationalWire};
use condbound::{Error, Result};

use output::{write_key_value_csv, write_rows_csv, Envelope, Format};

#[derive(Parser, Debug)]
#[command(name = "condbound", version, about = "Exact moment, anti-concentration and condenser bounds")]
struct Cli {
    /// Output format; `table` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Exit with status 3 on vacuous certificates and undetermined verdicts.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "CONDBOUND_THREADS")]
    threads: Option<usize>,
    /// Directory for the persistent Bell number cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stirling numbers of the second kind, one row per q.
    Table(TableArgs),
    /// Exact raw moment E S^order.
    Moment(MomentArgs),
    /// Bell-number anti-concentration certificate for M = N.
    #[command(name = "lemma2")]
    Bell(BellArgs),
    /// Exact-moment Paley-Zygmund certificate.
    Pz(PzArgs),
    /// Leading-order estimates of ln B_q / q and their residuals.
    Asymptotics(AsymptoticsArgs),
    /// Impossibility certificates for q-universal condensers.
    #[command(subcommand)]
    Condense(CondenseCommand),
    /// Monte Carlo load experiment.
    Simulate(SimulateArgs),
}

#[derive(Subcommand, Debug)]
enum CondenseCommand {
    /// Impossibility verdict for q-universal hashing at M = N = 2^k.
    Check(CheckArgs),
    /// Largest q whose certificate rules out (loss, epsilon).
    Minq(MinqArgs),
    /// Positive and certified independence across several epsilons.
    Sweep(SweepArgs),
}

fn natural(s: &str) -> std::result::Result<BigUint, String> {
    wire::parse_natural(s)
}

fn rational(s: &str) -> std::result::Result<BigRational, String> {
    s.parse::<BigRational>().map_err(|e| format!("expected a/b: {e}"))
}

fn dyadic(s: &str) -> std::result::Result<Dyadic, String> {
    s.parse::<Dyadic>()
        .or_else(|_| s.parse::<f64>().map_err(|e| e.to_string()).and_then(|v| Dyadic::from_f64(v).map_err(|e| e.to_string())))
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    #[arg(long)]
    qmax: usize,
}

#[derive(Args, Debug, Serialize)]
struct MomentArgs {
    #[arg(long, value_parser = natural)]
    #[serde(with = "wire::natural")]
    balls: BigUint,
    #[arg(long, value_parser = natural)]
    #[serde(with = "wire::natural")]
    bins: BigUint,
    /// Independence of the family.
    #[arg(long)]
    q: u32,
    /// Moment order (default: q).
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
struct BellArgs {
    #[arg(long)]
    q: u32,
    /// M = N, decimal or 2^k.
    #[arg(long, value_parser = natural)]
    #[serde(with = "wire::natural")]
    balls: BigUint,
}

#[derive(Args, Debug, Serialize)]
struct PzArgs {
    #[arg(long)]
    q: u32,
    #[arg(long, value_parser = natural)]
    #[serde(with = "wire::natural")]
    balls: BigUint,
    /// Paley-Zygmund parameter in (0, 1) as a/b (default: 1/q).
    #[arg(long, value_parser = rational)]
    #[serde(serialize_with = "opt_rational")]
    theta: Option<BigRational>,
}

fn opt_rational<S: serde::Serializer>(v: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(RationalWire::from).serialize(s)
}

#[derive(Args, Debug, Serialize)]
struct AsymptoticsArgs {
    #[arg(long, default_value_t = 8)]
    qmin: u32,
    #[arg(long, default_value_t = 64)]
    qmax: u32,
    /// Also check max_j S(q,j) <= B_q <= q·max_j S(q,j) for every q <= qmax.
    #[arg(long)]
    sandwich: bool,
}

#[derive(Args, Debug, Serialize)]
struct CheckArgs {
    #[arg(long)]
    q: u32,
    /// log2 of M = N = 2^k.
    #[arg(long)]
    k: u32,
    /// Entropy loss to classify, in bits.
    #[arg(long)]
    loss: Option<f64>,
    /// log2(1/epsilon) to classify.
    #[arg(long)]
    log2eps: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct MinqArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    log2eps: f64,
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    /// Largest q tried.
    #[arg(long, default_value_t = 1024)]
    qmax: usize,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    k: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![64.0, 128.0, 256.0, 512.0])]
    log2eps: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value_t = 1024)]
    qmax: usize,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Field GF(2^w).
    #[arg(long)]
    w: Option<u32>,
    /// Independence; the polynomial degree is q - 1.
    #[arg(long)]
    q: Option<u32>,
    /// Output bits (default: w).
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    orders: Vec<u32>,
    /// Dyadic thresholds such as 3, 5*2^-2 or 1.25.
    #[arg(long, value_delimiter = ',', value_parser = dyadic)]
    thresholds: Vec<Dyadic>,
    /// Add the Bell certificate threshold τ.lo for (q, 2^w).
    #[arg(long)]
    lemma2_threshold: bool,
    /// Number of balls (default: the whole field).
    #[arg(long)]
    balls: Option<u64>,
    /// Throw independently and uniformly instead of hashing.
    #[arg(long)]
    independent: bool,
    /// Bins for --independent.
    #[arg(long)]
    bins: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_THROW_CAP)]
    throw_cap: u64,
    /// Also write the load histogram as CSV to this path.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

struct Output {
    subcommand: &'static str,
    params: Value,
    result: Value,
    undetermined: bool,
    rows: Option<Vec<Vec<String>>>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

fn bells(cache_dir: Option<&Path>, q_max: usize) -> Result<BellSequence> {
    if q_max > DEFAULT_TABLE_CAP {
        return Err(Error::Capacity {
            requested: q_max,
            cap: DEFAULT_TABLE_CAP,
        });
    }
    match cache_dir {
        Some(dir) => cache::load_or_build(dir, q_max),
        None => Ok(BellSequence::streaming(q_max)),
    }
}

fn table(args: &TableArgs) -> Result<Output> {
    let t = StirlingTable::build(args.qmax)?;
    let rows: Vec<Vec<String>> = (0..=args.qmax)
        .map(|q| Ok(t.row(q)?.iter().map(ToString::to_string).collect()))
        .collect::<Result<_>>()?;
    let bell: Vec<String> = t.bells().values().iter().map(ToString::to_string).collect();
    Ok(Output {
        subcommand: "table",
        params: to_value(args)?,
        result: json!({ "q_max": args.qmax, "rows": rows, "bell": bell }),
        undetermined: false,
        rows: Some(rows),
    })
}

fn moment(args: &MomentArgs) -> Result<Output> {
    let order = args.order.unwrap_or(args.q);
    let inst = BallsBinsInstance::new(args.balls.clone(), args.bins.clone(), args.q)?;
    let table = StirlingTable::build(order.max(1) as usize)?;
    let m = raw_moment(&inst, order, &table)?;
    Ok(Output {
        subcommand: "moment",
        params: to_value(args)?,
        result: to_value(&m)?,
        undetermined: false,
        rows: None,
    })
}

fn bell_certificate(args: &BellArgs, cache_dir: Option<&Path>) -> Result<Output> {
    let cert = lemma2_certificate(args.q, &args.balls, &bells(cache_dir, args.q as usize)?)?;
    Ok(Output {
        subcommand: "lemma2",
        params: to_value(args)?,
        undetermined: cert.vacuous,
        result: to_value(&cert)?,
        rows: None,
    })
}

fn pz(args: &PzArgs) -> Result<Output> {
    let theta = args
        .theta
        .clone()
        .unwrap_or_else(|| BigRational::new(BigInt::from(1), BigInt::from(args.q.max(1))));
    let inst = BallsBinsInstance::balanced(args.balls.clone(), args.q)?;
    let table = StirlingTable::build(args.q as usize)?;
    let cert = pz_bound(&inst, &theta, &table)?;
    Ok(Output {
        subcommand: "pz",
        params: to_value(args)?,
        undetermined: cert.vacuous,
        result: to_value(&cert)?,
        rows: None,
    })
}

fn within(v: &FloatInterval, bound: &Dyadic) -> bool {
    v.hi() <= bound && &bound.neg() <= v.lo()
}

fn asymptotics(args: &AsymptoticsArgs, cache_dir: Option<&Path>) -> Result<Output> {
    if args.qmin > args.qmax {
        return Err(Error::Precondition(format!(
            "qmin = {} exceeds qmax = {}",
            args.qmin, args.qmax
        )));
    }
    let b = bells(cache_dir, args.qmax as usize)?;
    let bound = scaled_residual_bound();
    let bound_d = Dyadic::rational_floor(&bound, 0);
    let rows = (args.qmin..=args.qmax)
        .map(|q| {
            let r = estimate_residual(q, &b)?;
            let mut v = to_value(&r)?;
            v["within_bound"] = json!(within(&r.scaled_residual, &bound_d));
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let sandwich = if args.sandwich {
        Some(stirling_bell_sandwich(args.qmax)?)
    } else {
        None
    };
    Ok(Output {
        subcommand: "asymptotics",
        params: to_value(args)?,
        result: json!({
            "scaled_residual_bound": RationalWire::from(&bound),
            "rows": rows,
            "sandwich": to_value(&sandwich)?,
        }),
        undetermined: false,
        rows: None,
    })
}

fn check(args: &CheckArgs, cache_dir: Option<&Path>) -> Result<Output> {
    let b = bells(cache_dir, args.q as usize)?;
    let verdict = impossibility_certificate(args.q, args.k, &b)?;
    let region = verdict.reduction.as_ref().map(|r| {
        json!({
            "loss_at_most": r.ell_star.lo(),
            "log2_inv_eps_above": r.log2_eps_star.lo().neg(),
            "epsilon_star": epsilon_star_wire(r),
        })
    });
    let query = match (args.loss, args.log2eps) {
        (Some(l), Some(e)) => Some(verdict.assess(l, e)?),
        (None, None) => None,
        _ => {
            return Err(Error::Precondition(
                "--loss and --log2eps must be given together".into(),
            ))
        }
    };
    let positive = positive_params(args.q as f64).ok();
    Ok(Output {
        subcommand: "condense check",
        params: to_value(args)?,
        undetermined: verdict.feasible != Feasibility::Impossible,
        result: json!({
            "verdict": to_value(&verdict)?,
            "ruled_out_region": region,
            "query": to_value(&query)?,
            "reference": to_value(&reference_comparison(&verdict))?,
            "positive_at_q": to_value(&positive)?,
        }),
        rows: None,
    })
}

fn minq(args: &MinqArgs, cache_dir: Option<&Path>) -> Result<Output> {
    let ladder = CertificateLadder::build(args.k, &bells(cache_dir, args.qmax)?)?;
    let q_minus = necessary_independence(args.log2eps, args.loss, &ladder)?;
    let positive = positive_params(args.log2eps)?;
    let rung = q_minus.and_then(|q| ladder.rung(q));
    Ok(Output {
        subcommand: "condense minq",
        params: to_value(args)?,
        undetermined: q_minus.is_none(),
        result: json!({
            "q_minus": q_minus,
            "q_plus": positive.independence,
            "positive": to_value(&positive)?,
            "ladder_monotone": ladder.is_monotone(),
            "certificate": to_value(&rung)?,
        }),
        rows: None,
    })
}

fn sweep(args: &SweepArgs, cache_dir: Option<&Path>) -> Result<Output> {
    let ladder = CertificateLadder::build(args.k, &bells(cache_dir, args.qmax)?)?;
    let rows = asymptotic_gap_report(&args.log2eps, args.loss, &ladder)?;
    let ratios: Option<Vec<f64>> = rows.iter().map(|r| r.ratio).collect();
    let nondecreasing = ratios
        .as_ref()
        .map(|r| r.windows(2).all(|w| w[0] <= w[1]));
    Ok(Output {
        subcommand: "condense sweep",
        params: to_value(args)?,
        undetermined: ratios.is_none(),
        result: json!({
            "ladder_monotone": ladder.is_monotone(),
            "rows": to_value(&rows)?,
            "ratio_nondecreasing": nondecreasing,
        }),
        rows: None,
    })
}

fn simulate(args: &SimulateArgs, cache_dir: Option<&Path>) -> Result<Output> {
    let report = if args.independent {
        let (Some(balls), Some(bins)) = (args.balls, args.bins) else {
            return Err(Error::Precondition("--independent needs --balls and --bins".into()));
        };
        let order = match args.orders.as_slice() {
            [] => 2,
            [r] => *r,
            _ => return Err(Error::Precondition("--independent takes one order".into())),
        };
        independent_oracle_with_cap(balls, bins, order, args.trials, args.seed, args.throw_cap)?
    } else {
        let (Some(w), Some(q)) = (args.w, args.q) else {
            return Err(Error::Precondition("--w and --q are required".into()));
        };
        if q == 0 {
            return Err(Error::Precondition("q must be at least 1".into()));
        }
        let family = HashFamilySpec::new(w, q - 1, args.m.unwrap_or(w))?;
        let mut config = SimulationConfig::new(family, args.trials, args.seed);
        config.balls = args.balls;
        config.moment_orders = args.orders.clone();
        config.thresholds = args.thresholds.clone();
        config.throw_cap = args.throw_cap;
        if args.lemma2_threshold {
            let balls = BigUint::from(1u32) << w;
            let cert = lemma2_certificate(q, &balls, &bells(cache_dir, q as usize)?)?;
            config.thresholds.push(cert.threshold.lo().clone());
        }
        run_trials(&config)?
    };
    if let Some(path) = &args.histogram {
        write_histogram(path, &report)?;
    }
    Ok(Output {
        subcommand: "simulate",
        params: to_value(args)?,
        undetermined: false,
        result: to_value(&report)?,
        rows: None,
    })
}

fn write_histogram(path: &Path, report: &SimulationReport) -> Result<()> {
    let rows: Vec<Vec<String>> = std::iter::once(vec!["load".to_string(), "count".to_string()])
        .chain(
            report
                .histogram
                .iter()
                .map(|c| vec![c.load.to_string(), c.count.to_string()]),
        )
        .collect();
    let file = std::fs::File::create(path).map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))?;
    write_rows_csv(&rows, file).map_err(|e| Error::Precondition(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<Output> {
    let cache_dir = cli.cache_dir.as_deref();
    match &cli.command {
        Command::Table(a) => table(a),
        Command::Moment(a) => moment(a),
        Command::Bell(a) => bell_certificate(a, cache_dir),
        Command::Pz(a) => pz(a),
        Command::Asymptotics(a) => asymptotics(a, cache_dir),
        Command::Condense(CondenseCommand::Check(a)) => check(a, cache_dir),
        Command::Condense(CondenseCommand::Minq(a)) => minq(a, cache_dir),
        Command::Condense(CondenseCommand::Sweep(a)) => sweep(a, cache_dir),
        Command::Simulate(a) => simulate(a, cache_dir),
    }
}

fn emit(out: &Output, format: Format) -> io::Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match (format, &out.rows) {
        (Format::Csv, Some(rows)) => write_rows_csv(rows, &mut lock),
        (Format::Csv, None) => {
            let env = Envelope {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                subcommand: out.subcommand,
                params: &out.params,
                result: &out.result,
            };
            let v = serde_json::to_value(&env).map_err(io::Error::other)?;
            write_key_value_csv(&v, &mut lock)
        }
        (Format::Json, _) => {
            let env = Envelope {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                subcommand: out.subcommand,
                params: &out.params,
                result: &out.result,
            };
            serde_json::to_writer_pretty(&mut lock, &env).map_err(io::Error::other)?;
            writeln!(lock)
        }
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return 1;
        }
    }
    let out = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let default = if out.rows.is_some() { Format::Csv } else { Format::Json };
    if let Err(e) = emit(&out, cli.format.unwrap_or(default)) {
        eprintln!("error: {e}");
        return 1;
    }
    if cli.strict && out.undetermined {
        eprintln!("strict: certificate is vacuous or verdict undetermined");
        return 3;
    }
    0
}
