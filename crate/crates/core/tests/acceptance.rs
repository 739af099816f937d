//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when the set of failing criteria differs from `KNOWN_RED`.

mod common;

use std::process::Command;
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde_json::Value;

use condbound::anticoncentration::{lemma2_certificate, pz_bound, AntiConcentrationCertificate};
use condbound::asymptotics::{estimate_residual, scaled_residual_bound, stirling_bell_sandwich};
use condbound::cache;
use condbound::combinatorics::{BellSequence, StirlingRows, StirlingTable};
use condbound::condenser::{
    asymptotic_gap_report, positive_params, CertificateLadder, CondenserVerdict, Feasibility,
};
use condbound::interval::Dyadic;
use condbound::moments::{raw_moment, BallsBinsInstance};
use condbound::simulate::{exact_small_oracle, run_trials, HashFamilySpec, SimulationConfig};

use common::{bell_triangle, brute_moments, log2_big, partition_counts};

/// Standard errors allowed below the certified probability.
const MC_SIGMAS: f64 = 3.0;
const MC_TRIALS: u64 = 100_000;
const MC_MASTER_SEED: u64 = 0x5eed_0004;
/// Agreement between certified enclosures and the f64 oracles.
const ORACLE_TOL: f64 = 1e-9;
/// Enclosures must be at least this tight (log2 of the width).
const MAX_LOG2_WIDTH: f64 = -200.0;

/// Criteria that fail on the exact numbers and are kept failing rather than
/// loosened. They still print FAIL; only an unexpected outcome sets the exit
/// status, including one of these starting to pass.
const KNOWN_RED: &[u32] = &[7];

const B32: &str = "128064670049908713818925644";
const B64: &str = "172134143357358850934369963665272571125557575184049758045339873395";

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        let msg = msg.into();
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
        self.pass &= ok;
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.details.push(format!("     {}", msg.into()));
    }
}

fn closed_form_matches_enumeration() -> Outcome {
    let mut out = Outcome::new();
    let table = StirlingTable::build(8).unwrap();
    for m in 2..=8usize {
        let max_order = m.min(6) as u32;
        let brute = brute_moments(m, m, max_order);
        let inst = BallsBinsInstance::balanced(BigUint::from(m), max_order).unwrap();
        let mismatches: Vec<u32> = (1..=max_order)
            .filter(|&r| raw_moment(&inst, r, &table).unwrap().value != brute[r as usize])
            .collect();
        out.check(
            mismatches.is_empty(),
            format!("M = N = {m}: orders 1..={max_order} exact, mismatches {mismatches:?}"),
        );
    }
    out
}

fn combinatorics_oracle() -> Outcome {
    let mut out = Outcome::new();
    let table = StirlingTable::build(12).unwrap();
    let triangle = bell_triangle(12);
    for q in 0..=12usize {
        let counts = partition_counts(q);
        let row: Vec<u64> = table.row(q).unwrap().iter().map(|v| v.to_u64().unwrap()).collect();
        let row_sum: BigUint = table.row(q).unwrap().iter().sum();
        let bell = table.bell(q).unwrap();
        out.check(
            row == counts && &row_sum == bell && bell == &triangle[q],
            format!("q = {q}: S(q, .) = {row:?}, B_q = {bell}"),
        );
    }
    out
}

fn exhaustive_certificate_soundness() -> Outcome {
    let mut out = Outcome::new();
    let bells = BellSequence::streaming(16);
    let table = StirlingTable::build(16).unwrap();
    let mut compared = 0;
    // (field bits, degree)
    for (w, degree) in [(2u32, 1u32), (3, 3), (2, 3), (4, 3)] {
        let spec = HashFamilySpec::new(w, degree, w).unwrap();
        let q = spec.independence();
        let dist = exact_small_oracle(&spec).unwrap();
        let balls = BigUint::from(1u32 << w);
        let label = format!("GF(2^{w}) degree {degree} (q = {q}, M = {balls})");
        let mut certs: Vec<AntiConcentrationCertificate> = Vec::new();
        match lemma2_certificate(q, &balls, &bells) {
            Ok(c) => certs.push(c),
            Err(e) => out.note(format!("{label}: Bell certificate inapplicable ({e})")),
        }
        if let Ok(inst) = BallsBinsInstance::balanced(balls.clone(), q) {
            let theta = BigRational::new(1.into(), q.into());
            if let Ok(c) = pz_bound(&inst, &theta, &table) {
                certs.push(c);
            }
        }
        for c in certs {
            if c.vacuous {
                out.note(format!("{label}: {:?} certificate vacuous", c.variant));
                continue;
            }
            let tail = dist.tail(c.threshold.lo());
            compared += 1;
            out.check(
                tail >= c.probability,
                format!(
                    "{label}: {:?} Pr[S >= {:.4}] = {tail} >= p = {:.3e}",
                    c.variant,
                    c.threshold.approx(),
                    c.probability.to_f64().unwrap()
                ),
            );
        }
    }
    out.check(compared > 0, format!("{compared} non-vacuous comparisons made"));
    out
}

fn monte_carlo_certificate_soundness() -> Outcome {
    let mut out = Outcome::new();
    let bells = BellSequence::streaming(8);
    for (q, k) in [(4u32, 12u32), (6, 12), (8, 13)] {
        let cert = lemma2_certificate(q, &(BigUint::one() << k), &bells).unwrap();
        let mut cfg = SimulationConfig::new(
            HashFamilySpec::balanced(k, q).unwrap(),
            MC_TRIALS,
            MC_MASTER_SEED,
        );
        cfg.thresholds = vec![cert.threshold.lo().clone()];
        let r = run_trials(&cfg).unwrap();
        let tail = &r.tails[0];
        let se = tail.std_error.unwrap();
        let p = cert.probability.to_f64().unwrap();
        out.check(
            !cert.vacuous && tail.frequency >= p - MC_SIGMAS * se,
            format!(
                "q = {q}, M = 2^{k}: freq {:.6} (SE {se:.2e}) vs p = {p:.3e}, tau.lo = {:.4}, {} trials",
                tail.frequency,
                cert.threshold.approx(),
                r.trials
            ),
        );
    }
    out
}

fn json_of(args: &[&str]) -> (i32, Value) {
    let o = Command::new(env!("CARGO_BIN_EXE_condbound"))
        .args(args)
        .output()
        .expect("binary runs");
    let code = o.status.code().unwrap_or(-1);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (code, v)
}

fn reference_example() -> Outcome {
    let mut out = Outcome::new();
    let (code, env) = json_of(&["condense", "check", "--q", "64", "--k", "43", "--loss", "2.6", "--log2eps", "43"]);
    out.check(code == 0, format!("exit status {code}"));
    let res = &env["result"];
    let verdict: CondenserVerdict = match serde_json::from_value(res["verdict"].clone()) {
        Ok(v) => v,
        Err(e) => {
            out.check(false, format!("verdict does not parse: {e}"));
            return out;
        }
    };
    out.check(verdict.feasible == Feasibility::Impossible, format!("verdict {:?}", verdict.feasible));

    // Independent oracle from the Bell triangle.
    let bells = bell_triangle(64);
    out.check(
        bells[32].to_string() == B32 && bells[64].to_string() == B64,
        format!("B_32 = {B32}, B_64 = {B64}"),
    );
    let m_log2 = 43.0;
    let factor = 1.0 - 4096.0 / 2f64.powf(m_log2 + 1.0);
    let log2_p = factor.log2() + 2.0 * log2_big(&bells[32]) - 1.0 - log2_big(&bells[64]);
    let log2_tau = log2_big(&bells[32]) / 32.0 - 1.0;
    let ell_oracle = log2_tau - 1.0;
    let log2_eps_oracle = log2_p + log2_tau - 1.0;

    let cert = verdict.certificate.as_ref().unwrap();
    let red = verdict.reduction.as_ref().unwrap();
    let width_ok = |w: &Dyadic| w.is_zero() || w.to_f64().log2() < MAX_LOG2_WIDTH;
    out.check(
        (red.ell_star.approx() - ell_oracle).abs() < ORACLE_TOL && width_ok(&red.ell_star.width()),
        format!("ell_star = {:.12} (oracle {ell_oracle:.12})", red.ell_star.approx()),
    );
    out.check(
        (red.log2_eps_star.approx() - log2_eps_oracle).abs() < ORACLE_TOL
            && width_ok(&red.log2_eps_star.width()),
        format!(
            "log2 eps_star = {:.12} (oracle {log2_eps_oracle:.12})",
            red.log2_eps_star.approx()
        ),
    );
    let two = BigRational::from_integer(2.into());
    out.check(
        red.epsilon_star == &cert.probability * cert.threshold.lo().to_rational() / two,
        "eps_star = p * tau.lo / 2 exactly",
    );
    let region = &res["ruled_out_region"];
    out.check(
        !region.is_null(),
        format!(
            "ruled out: loss <= {:.6} and log2(1/eps) > {:.6}",
            red.ell_star.lo().to_f64(),
            -red.log2_eps_star.lo().to_f64()
        ),
    );
    let reference = &res["reference"];
    out.check(!reference.is_null(), "reference claim reported");
    out.note(format!(
        "reference claim: loss {} , log2(1/eps) {}  |  certified: loss {:.4}, log2(1/eps) {:.4}",
        reference["claim"]["loss"],
        reference["claim"]["log2_inv_eps"],
        red.ell_star.approx(),
        -red.log2_eps_star.approx()
    ));
    out.note(format!(
        "claim inside certified region: {}; {}",
        reference["claim_ruled_out"],
        reference["note"].as_str().unwrap_or("")
    ));
    out
}

fn positive_side() -> Outcome {
    let mut out = Outcome::new();
    let p = positive_params(64.0).unwrap();
    out.check(
        p.independence == 64 && p.loss.is_exact() && p.loss.lo() == &Dyadic::from_int(6),
        format!("q = {}, loss = {}", p.independence, p.loss),
    );
    out
}

fn tightness_trend() -> Outcome {
    let mut out = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let bells = cache::load_or_build(dir.path(), 1024).unwrap();
    let cached = cache::load_or_build(dir.path(), 1024).unwrap();
    out.check(cached == bells, "Bell table up to q = 1024 cached and reloaded");
    let ladder = CertificateLadder::build(64, &bells).unwrap();
    out.check(ladder.is_monotone(), "certificate ladder monotone at k = 64");
    let epsilons = [64.0, 128.0, 256.0, 512.0];
    let rows = asymptotic_gap_report(&epsilons, 0.0, &ladder).unwrap();
    let ratios: Vec<Option<f64>> = rows.iter().map(|r| r.ratio).collect();
    for r in &rows {
        out.note(format!(
            "log2(1/eps) = {}: q+ = {}, q- = {:?}, q-/log2(1/eps) = {:?}, |ratio - 1| = {:?}",
            r.log2_inv_eps,
            r.q_plus,
            r.q_minus,
            r.ratio,
            r.ratio.map(|x| (x - 1.0).abs())
        ));
    }
    let all: Option<Vec<f64>> = ratios.into_iter().collect();
    let nondecreasing = all.as_ref().is_some_and(|r| r.windows(2).all(|w| w[0] <= w[1]));
    out.check(nondecreasing, "ratio q-/log2(1/eps) nondecreasing in log2(1/eps)");
    out
}

fn residuals_and_sandwich() -> Outcome {
    let mut out = Outcome::new();
    let bells = BellSequence::streaming(1024);
    let oracle = bell_triangle(1024);
    out.check(bells.values() == oracle.as_slice(), "B_0..=B_1024 agree with the Bell triangle");
    let bound = scaled_residual_bound();
    let bound_d = Dyadic::rational_floor(&bound, 0);
    let mut worst = (0u32, 0f64);
    let mut violations = Vec::new();
    for q in 8..=1024 {
        let r = estimate_residual(q, &bells).unwrap();
        let s = &r.scaled_residual;
        if !(s.hi() <= &bound_d && &bound_d.neg() <= s.lo()) {
            violations.push(q);
        }
        if s.approx().abs() > worst.1.abs() {
            worst = (q, s.approx());
        }
    }
    out.check(
        violations.is_empty(),
        format!(
            "|scaled residual| <= {bound} for q in 8..=1024 (max {:.6} at q = {}), violations {violations:?}",
            worst.1, worst.0
        ),
    );
    let rows = stirling_bell_sandwich(1024).unwrap();
    let lib_ok = rows.iter().all(|r| r.lower_holds && r.upper_holds);
    let mut oracle_ok = true;
    for (q, row) in StirlingRows::new().take(1025).enumerate().skip(1) {
        let max = row.iter().max().unwrap();
        oracle_ok &= max <= &oracle[q] && oracle[q] <= max * BigUint::from(q);
    }
    out.check(
        lib_ok && oracle_ok && rows.len() == 1024,
        "max_j S(q,j) <= B_q <= q max_j S(q,j) for q <= 1024",
    );
    out
}

fn determinism() -> Outcome {
    let mut out = Outcome::new();
    let args = [
        "simulate", "--w", "10", "--q", "4", "--trials", "4000", "--seed", "20240613", "--orders",
        "2,3,4", "--thresholds", "2,5*2^-1", "--lemma2-threshold",
    ];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_condbound"))
            .args(args)
            .args(["--threads", threads])
            .output()
            .expect("binary runs")
    };
    let one = run("1");
    let four = run("4");
    let via_env = Command::new(env!("CARGO_BIN_EXE_condbound"))
        .args(args)
        .env("CONDBOUND_THREADS", "3")
        .output()
        .expect("binary runs");
    out.check(
        one.status.success() && four.status.success() && via_env.status.success(),
        "all runs exit 0",
    );
    out.check(!one.stdout.is_empty() && one.stdout == four.stdout, "--threads 1 and --threads 4 byte-identical");
    out.check(one.stdout == via_env.stdout, "CONDBOUND_THREADS=3 byte-identical");
    out
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "closed-form moments equal exhaustive assignment averages", closed_form_matches_enumeration),
        (2, "Stirling and Bell numbers match partition enumeration", combinatorics_oracle),
        (3, "certificates sound against exhaustive seed enumeration", exhaustive_certificate_soundness),
        (4, "Bell certificate sound under Monte Carlo", monte_carlo_certificate_soundness),
        (5, "q = 64, k = 43 impossibility example", reference_example),
        (6, "positive parameters at log2(1/eps) = 64", positive_side),
        (7, "tightness ratio trend at k = 64", tightness_trend),
        (8, "scaled residual bound and Stirling-Bell sandwich", residuals_and_sandwich),
        (9, "simulate output independent of thread count", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            let mut o = Outcome::new();
            o.check(false, format!("panicked: {msg}"));
            o
        });
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {status}: {name} ({:.1}s)", start.elapsed().as_secs_f64());
        for d in &outcome.details {
            println!("    {d}");
        }
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?} (known red: {KNOWN_RED:?})");
    }
    if failed != KNOWN_RED {
        println!("acceptance: outcome differs from the known-red list");
        std::process::exit(1);
    }
}
