//! Batch front door: subcommands that wire the numeric modules to CSV/JSON
//! artifacts, plus golden-file comparison with per-field tolerances and
//! deterministic seed/thread plumbing.
//!
//! Exit-code contract: 0 on success with every embedded check passing,
//! 1 on an internal failure or a failed verification/golden comparison,
//! 2 on a rejected configuration (clap reports usage errors with 2 as well).
//! `TSRL_THREADS` overrides the worker count unless `--threads` is given;
//! artifacts for a fixed configuration are byte-identical at any thread
//! count, JSON modulo the `timestamp` envelope field.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use num::complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use tsrl_core::{arith, characters, constants, dispersion, lemmas, mainterm, series, sieve, smooth};

/// Seed for every randomized sweep unless overridden.
pub const DEFAULT_SEED: u64 = 0x2A;

/// Widest sieve dump the CLI will emit (values, 4 bytes each).
pub const MAX_DUMP_WIDTH: u64 = 1 << 26;

/// Failure modes mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Rejected configuration (exit 2).
    Invalid(String),
    /// Golden comparison requested but the file is absent (exit 2).
    MissingGolden(PathBuf),
    /// Failure after validation: computation or I/O (exit 1).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::MissingGolden(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::MissingGolden(p) => write!(f, "golden file not found: {}", p.display()),
            CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

fn invalid(e: tsrl_core::Error) -> CliError {
    CliError::Invalid(e.to_string())
}

fn internal(e: tsrl_core::Error) -> CliError {
    CliError::Internal(e.to_string())
}

/// Artifact format; each subcommand accepts a subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Junit,
}

/// Which smooth-kit curve to tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    /// Transition profile: columns x, sigma.
    Sigma,
    /// Plateau-bump transform: columns lambda, psi_hat_abs, envelope.
    Psihat,
    /// Truncated-cutoff transform along Re s = 1: columns t, F_delta_abs.
    Mellin,
}

/// Which sieved table to dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SieveKind {
    H,
    Tau,
}

/// Named verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma9,
    Lemma10,
    #[value(name = "lemma10.5")]
    Lemma10_5,
    Lemma11,
    Kloosterman,
    Trilinear,
    Shiu,
    Conductor,
    Smooth,
    Dispersion,
    All,
}

/// Accept plain ("120000") and scientific ("1e7", "2.5e3") count syntax.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() || v < 0.0 || v > 9.007_199_254_740_992e15 {
        return Err(format!("`{s}` is outside the exact integer range"));
    }
    if v.fract() != 0.0 {
        return Err(format!("`{s}` is not an integer"));
    }
    Ok(v as u64)
}

/// One parsed invocation: a subcommand plus global plumbing.
#[derive(Debug, Parser)]
#[command(
    name = "tsrl",
    version,
    about = "Desk-scale laboratory for sums of ratios of sums-of-two-squares counts"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub subcommand: Cmd,

    /// Worker threads (overrides TSRL_THREADS; default: one per logical CPU).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for the randomized sweeps inside `verify`.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Artifact format where a choice exists.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the artifact to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Compare the produced JSON artifact against this golden file.
    #[arg(long, global = true)]
    pub golden: Option<PathBuf>,

    /// Record the produced JSON artifact as a fresh golden file.
    #[arg(long, global = true)]
    pub write_golden: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Euler-product constants with empirical tail intervals (JSON).
    Constants {
        /// Truncate the products at this prime bound (accepts 1e7 syntax).
        #[arg(long, value_parser = parse_count, default_value = "1e7")]
        prime_limit: u64,
    },
    /// Partial sums Q(x); CSV columns x, Q, Q_normalized, terms_used.
    Qsum {
        /// Comma-separated cut points, e.g. 1e4,1e5,1e6.
        #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
        xs: Vec<u64>,
    },
    /// Q(x) next to its main term; CSV columns x, Q, Q_MT, ratio, H, H_asym, ratio_H.
    Qtable {
        #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
        xs: Vec<u64>,
        /// Add the main-term columns (otherwise the plain Q schema).
        #[arg(long)]
        with_mt: bool,
    },
    /// Split Q(x) into the three divisor-range classes at exponent A (JSON).
    Decompose {
        #[arg(long, value_parser = parse_count)]
        x: u64,
        /// Exponent in the cut points √x(ln x)^{∓A}.
        #[arg(long = "A", default_value_t = 2.0)]
        a: f64,
        /// Carry exact rationals and check the identity bit-for-bit.
        #[arg(long)]
        exact: bool,
    },
    /// Direct value of the middle-range error sum at (x, A) (JSON).
    Qerr2 {
        #[arg(long, value_parser = parse_count)]
        x: u64,
        #[arg(long = "A", default_value_t = 2.0)]
        a: f64,
    },
    /// Smooth-cutoff curves (CSV).
    Smooth {
        #[arg(long, value_enum)]
        curve: Curve,
        /// Transition width of the mollified cutoff (sigma default 0.5,
        /// mellin default 0.25; mellin needs δ < 1/2).
        #[arg(long)]
        delta: Option<f64>,
        /// Grid maximum (psihat: frequency, default 400; mellin: ordinate, default 50).
        #[arg(long = "T")]
        t_max: Option<f64>,
        /// Number of grid points.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Run one named verification suite (JSON or JUnit XML; exit 1 on failed cases).
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Every dispersion quantity at one parameter set (JSON).
    Dispersion {
        /// Modulus window (D, 2D].
        #[arg(long = "D", value_parser = parse_count)]
        d: u64,
        /// Prime-weight window (N, 2N].
        #[arg(long = "N", value_parser = parse_count)]
        n: u64,
        /// Divisor-weight window (M, 2M].
        #[arg(long = "M", value_parser = parse_count)]
        m: u64,
        /// Frequency of the m^{-it}, n^{-it} twists.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t: f64,
        /// Required count of distinct reservoir-prime factors in the α support.
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Reservoir window (J₁, J₂].
        #[arg(long, value_parser = parse_count, default_value = "2")]
        j1: u64,
        #[arg(long, value_parser = parse_count)]
        j2: u64,
        /// α support cap (default 2M).
        #[arg(long, value_parser = parse_count)]
        x_cap: Option<u64>,
        /// Truncation X of the W main term (default 2D).
        #[arg(long, value_parser = parse_count)]
        truncation: Option<u64>,
    },
    /// Binary dump of a sieved table: little-endian lo, hi, then raw 32-bit values.
    SieveDump {
        #[arg(long, value_parser = parse_count)]
        lo: u64,
        #[arg(long, value_parser = parse_count)]
        hi: u64,
        #[arg(long, value_enum, default_value = "h")]
        kind: SieveKind,
    },
}

/// Artifact bytes plus the aggregate pass/fail of any embedded checks.
#[derive(Debug)]
pub struct RunOutput {
    pub artifact: Vec<u8>,
    /// The parsed envelope when the artifact is JSON.
    pub value: Option<Value>,
    pub ok: bool,
}

/// Run a parsed configuration end to end and return the process exit code.
pub fn run(cfg: &RunConfig) -> u8 {
    match run_inner(cfg) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cfg: &RunConfig) -> Result<bool, CliError> {
    let out = execute(cfg)?;
    deliver(cfg, &out.artifact)?;
    let mut ok = out.ok;
    if let Some(path) = &cfg.write_golden {
        let v = require_json(&out, "--write-golden")?;
        let text = serde_json::to_string_pretty(&golden_template(v)).expect("golden template");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Internal(format!("write {}: {e}", path.display())))?;
    }
    if let Some(path) = &cfg.golden {
        let v = require_json(&out, "--golden")?;
        let report = golden_compare(path, v)?;
        eprintln!(
            "{}",
            serde_json::to_string_pretty(&report).expect("golden report")
        );
        ok &= report.pass;
    }
    Ok(ok)
}

fn require_json<'a>(out: &'a RunOutput, flag: &str) -> Result<&'a Value, CliError> {
    out.value
        .as_ref()
        .ok_or_else(|| CliError::Invalid(format!("{flag} requires a JSON artifact")))
}

fn deliver(cfg: &RunConfig, bytes: &[u8]) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| CliError::Internal(format!("write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Internal(format!("stdout: {e}"))),
    }
}

/// Produce the artifact without touching stdout or the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let body = match resolve_threads(cfg.threads)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
            .install(|| build(cfg)),
        None => build(cfg),
    }?;
    Ok(finish(body))
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        return Ok(Some(n));
    }
    match std::env::var("TSRL_THREADS") {
        Ok(s) => {
            let n: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("TSRL_THREADS={s:?} is not a thread count")))?;
            if n == 0 {
                return Err(CliError::Invalid("TSRL_THREADS must be at least 1".into()));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Invalid(format!("TSRL_THREADS: {e}"))),
    }
}

enum Artifact {
    Json {
        command: &'static str,
        data: Value,
        ok: bool,
    },
    Csv(String),
    Junit {
        text: String,
        ok: bool,
    },
    Binary(Vec<u8>),
}

fn finish(a: Artifact) -> RunOutput {
    match a {
        Artifact::Json { command, data, ok } => {
            let envelope = json!({
                "command": command,
                "data": data,
                "timestamp": timestamp(),
            });
            let mut artifact = serde_json::to_vec_pretty(&envelope).expect("json artifact");
            artifact.push(b'\n');
            RunOutput {
                artifact,
                value: Some(envelope),
                ok,
            }
        }
        Artifact::Csv(text) => RunOutput {
            artifact: text.into_bytes(),
            value: None,
            ok: true,
        },
        Artifact::Junit { text, ok } => RunOutput {
            artifact: text.into_bytes(),
            value: None,
            ok,
        },
        Artifact::Binary(artifact) => RunOutput {
            artifact,
            value: None,
            ok: true,
        },
    }
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// 17 significant digits, '.' decimal, locale-free.
fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn cplx(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn pick(choice: Option<Format>, default: Format, allowed: &[Format]) -> Result<Format, CliError> {
    let f = choice.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Invalid(format!(
            "{:?} output is not available for this subcommand",
            f
        )))
    }
}

fn build(cfg: &RunConfig) -> Result<Artifact, CliError> {
    match &cfg.subcommand {
        Cmd::Constants { prime_limit } => cmd_constants(cfg.format, *prime_limit),
        Cmd::Qsum { xs } => cmd_qsum(cfg.format, xs),
        Cmd::Qtable { xs, with_mt } => cmd_qtable(cfg.format, xs, *with_mt),
        Cmd::Decompose { x, a, exact } => cmd_decompose(cfg.format, *x, *a, *exact),
        Cmd::Qerr2 { x, a } => cmd_qerr2(cfg.format, *x, *a),
        Cmd::Smooth {
            curve,
            delta,
            t_max,
            points,
        } => cmd_smooth(cfg.format, *curve, *delta, *t_max, *points),
        Cmd::Verify { suite } => cmd_verify(cfg.format, *suite, cfg.seed),
        Cmd::Dispersion {
            d,
            n,
            m,
            t,
            k,
            j1,
            j2,
            x_cap,
            truncation,
        } => cmd_dispersion(
            cfg.format,
            dispersion::DispersionParams::new(
                *d,
                *n,
                *m,
                *t,
                *k,
                *j1,
                *j2,
                x_cap.unwrap_or(2 * m),
            )
            .map_err(invalid)?,
            *truncation,
        ),
        Cmd::SieveDump { lo, hi, kind } => cmd_sieve_dump(cfg.format, *lo, *hi, *kind),
    }
}

fn cmd_constants(format: Option<Format>, prime_limit: u64) -> Result<Artifact, CliError> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Csv])?;
    if !(constants::MIN_PRIME_LIMIT..=constants::MAX_PRIME_LIMIT).contains(&prime_limit) {
        return Err(CliError::Invalid(format!(
            "--prime-limit must lie in [{}, {}], got {prime_limit}",
            constants::MIN_PRIME_LIMIT,
            constants::MAX_PRIME_LIMIT
        )));
    }
    let rows: [(&str, constants::EulerProductValue); 5] = [
        ("c1", constants::c1_closed_form(prime_limit).map_err(internal)?),
        ("c1_identity", constants::c1_via_identity(prime_limit).map_err(internal)?),
        ("K", constants::korolev_k(prime_limit).map_err(internal)?),
        ("c", constants::const_c(prime_limit).map_err(internal)?),
        ("G1", constants::g_at_one(prime_limit).map_err(internal)?),
    ];
    match format {
        Format::Json => {
            let data: Vec<Value> = rows
                .iter()
                .map(|(name, v)| {
                    json!({
                        "name": name,
                        "value": v.value,
                        "interval_lo": v.interval.0,
                        "interval_hi": v.interval.1,
                        "prime_limit": v.prime_limit,
                    })
                })
                .collect();
            Ok(Artifact::Json {
                command: "constants",
                data: Value::Array(data),
                ok: true,
            })
        }
        _ => {
            let mut text = String::from("name,value,interval_lo,interval_hi,prime_limit\n");
            for (name, v) in &rows {
                text += &format!(
                    "{name},{},{},{},{}\n",
                    f17(v.value),
                    f17(v.interval.0),
                    f17(v.interval.1),
                    v.prime_limit
                );
            }
            Ok(Artifact::Csv(text))
        }
    }
}

fn check_xs(xs: &[u64], cap: u64) -> Result<(), CliError> {
    for &x in xs {
        if x == 0 || x > cap {
            return Err(CliError::Invalid(format!(
                "cut points must lie in [1, {cap}], got {x}"
            )));
        }
    }
    Ok(())
}

fn q_normalized(x: u64, q: f64) -> f64 {
    q * (x as f64).ln().powf(0.75) / x as f64
}

fn cmd_qsum(format: Option<Format>, xs: &[u64]) -> Result<Artifact, CliError> {
    let format = pick(format, Format::Csv, &[Format::Csv, Format::Json])?;
    check_xs(xs, series::MAX_FLOAT_X)?;
    let sums = series::q_of_x_many(xs).map_err(internal)?;
    match format {
        Format::Csv => {
            let mut text = String::from("x,Q,Q_normalized,terms_used\n");
            for s in &sums {
                text += &format!(
                    "{},{},{},{}\n",
                    s.x,
                    f17(s.value),
                    f17(q_normalized(s.x, s.value)),
                    s.terms_used
                );
            }
            Ok(Artifact::Csv(text))
        }
        _ => {
            let data: Vec<Value> = sums
                .iter()
                .map(|s| {
                    json!({
                        "x": s.x,
                        "Q": s.value,
                        "Q_normalized": q_normalized(s.x, s.value),
                        "terms_used": s.terms_used,
                    })
                })
                .collect();
            Ok(Artifact::Json {
                command: "qsum",
                data: Value::Array(data),
                ok: true,
            })
        }
    }
}

fn cmd_qtable(format: Option<Format>, xs: &[u64], with_mt: bool) -> Result<Artifact, CliError> {
    if !with_mt {
        return cmd_qsum(format, xs);
    }
    let format = pick(format, Format::Csv, &[Format::Csv, Format::Json])?;
    check_xs(xs, series::MAX_FLOAT_X)?;
    let reports = mainterm::main_term_table(xs).map_err(internal)?;
    match format {
        Format::Csv => {
            let mut text = String::from("x,Q,Q_MT,ratio,H,H_asym,ratio_H\n");
            for r in &reports {
                text += &format!(
                    "{},{},{},{},{},{},{}\n",
                    r.x,
                    f17(r.q_direct),
                    f17(r.q_mt),
                    f17(r.ratio),
                    f17(r.h),
                    f17(r.h_asym),
                    f17(r.ratio_h)
                );
            }
            Ok(Artifact::Csv(text))
        }
        _ => {
            let data: Vec<Value> = reports
                .iter()
                .map(|r| {
                    json!({
                        "x": r.x,
                        "Q": r.q_direct,
                        "Q_MT": r.q_mt,
                        "ratio": r.ratio,
                        "H": r.h,
                        "H_half": r.h_half,
                        "H_quarter": r.h_quarter,
                        "H_asym": r.h_asym,
                        "ratio_H": r.ratio_h,
                    })
                })
                .collect();
            Ok(Artifact::Json {
                command: "qtable",
                data: Value::Array(data),
                ok: true,
            })
        }
    }
}

fn check_xa(x: u64, a: f64, cap: u64) -> Result<(), CliError> {
    if x == 0 || x > cap {
        return Err(CliError::Invalid(format!(
            "--x must lie in [1, {cap}], got {x}"
        )));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(CliError::Invalid(format!("--A must be positive, got {a}")));
    }
    Ok(())
}

fn cmd_decompose(format: Option<Format>, x: u64, a: f64, exact: bool) -> Result<Artifact, CliError> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Csv])?;
    let cap = if exact {
        series::MAX_EXACT_X.min(series::MAX_DIVISOR_X)
    } else {
        series::MAX_DIVISOR_X
    };
    check_xa(x, a, cap)?;
    let d = series::q_decomposition(x, a, exact).map_err(internal)?;
    let q = series::q_of_x(x, exact).map_err(internal)?;
    let exact_identity = match (&d.exact_parts, &q.exact) {
        (Some(_), Some(qe)) => Some(d.exact_total().expect("exact parts present") == *qe),
        _ => None,
    };
    let total = d.total();
    let ok = exact_identity.unwrap_or(true);
    match format {
        Format::Json => Ok(Artifact::Json {
            command: "decompose",
            data: json!({
                "x": d.x,
                "A": d.a,
                "z1": d.z1,
                "z2": d.z2,
                "q1": d.parts[0],
                "q2": d.parts[1],
                "q3": d.parts[2],
                "total": total,
                "q_direct": q.value,
                "residual": total - q.value,
                "exact_identity": exact_identity,
            }),
            ok,
        }),
        _ => {
            let mut text = String::from("x,A,z1,z2,q1,q2,q3,total,q_direct,residual,exact_identity\n");
            text += &format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                d.x,
                f17(d.a),
                f17(d.z1),
                f17(d.z2),
                f17(d.parts[0]),
                f17(d.parts[1]),
                f17(d.parts[2]),
                f17(total),
                f17(q.value),
                f17(total - q.value),
                exact_identity.map(|b| b.to_string()).unwrap_or_default()
            );
            Ok(Artifact::Csv(text))
        }
    }
}

fn cmd_qerr2(format: Option<Format>, x: u64, a: f64) -> Result<Artifact, CliError> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Csv])?;
    check_xa(x, a, series::MAX_DIVISOR_X)?;
    let (z1, z2) = series::range_cuts(x, a);
    if z2 > x as f64 {
        return Err(CliError::Invalid(format!(
            "upper cut √x(ln x)^A = {z2:.1} exceeds x = {x}; pick a smaller A"
        )));
    }
    let v = series::qerr2_direct(x, a).map_err(internal)?;
    match format {
        Format::Json => Ok(Artifact::Json {
            command: "qerr2",
            data: json!({ "x": x, "A": a, "z1": z1, "z2": z2, "qerr2": v }),
            ok: true,
        }),
        _ => Ok(Artifact::Csv(format!(
            "x,A,z1,z2,qerr2\n{},{},{},{},{}\n",
            x,
            f17(a),
            f17(z1),
            f17(z2),
            f17(v)
        ))),
    }
}

fn cmd_smooth(
    format: Option<Format>,
    curve: Curve,
    delta: Option<f64>,
    t_max: Option<f64>,
    points: usize,
) -> Result<Artifact, CliError> {
    pick(format, Format::Csv, &[Format::Csv])?;
    if !(2..=100_000).contains(&points) {
        return Err(CliError::Invalid(format!(
            "--points must lie in [2, 100000], got {points}"
        )));
    }
    let grid = |hi: f64| -> Vec<f64> {
        (0..points)
            .map(|i| hi * i as f64 / (points - 1) as f64)
            .collect()
    };
    match curve {
        Curve::Sigma => {
            let spec = smooth::BumpSpec::new(0.75, 2.25, delta.unwrap_or(0.5)).map_err(invalid)?;
            let (lo, hi) = spec.support();
            let pad = 0.05 * (hi - lo);
            let mut text = String::from("x,sigma\n");
            for i in 0..points {
                let x = lo - pad + (hi - lo + 2.0 * pad) * i as f64 / (points - 1) as f64;
                text += &format!("{},{}\n", f17(x), f17(spec.eval(x)));
            }
            Ok(Artifact::Csv(text))
        }
        Curve::Psihat => {
            let hi = t_max.unwrap_or(400.0);
            if !(hi.is_finite() && hi > 0.0 && hi <= smooth::MAX_FREQ) {
                return Err(CliError::Invalid(format!(
                    "--T must lie in (0, {}], got {hi}",
                    smooth::MAX_FREQ
                )));
            }
            let rows: Result<Vec<(f64, f64)>, tsrl_core::Error> = grid(hi)
                .par_iter()
                .map(|&lam| smooth::psi_hat(lam).map(|(v, _)| (lam, v.norm())))
                .collect();
            let mut text = String::from("lambda,psi_hat_abs,envelope\n");
            for (lam, norm) in rows.map_err(internal)? {
                let envelope = 1e3 * (-lam.sqrt() / 2.0).exp();
                text += &format!("{},{},{}\n", f17(lam), f17(norm), f17(envelope));
            }
            Ok(Artifact::Csv(text))
        }
        Curve::Mellin => {
            let delta = delta.unwrap_or(0.25);
            smooth::BumpSpec::f_delta(delta).map_err(invalid)?;
            let hi = t_max.unwrap_or(50.0);
            if !(hi.is_finite() && hi > 0.0 && hi <= smooth::MAX_FREQ) {
                return Err(CliError::Invalid(format!(
                    "--T must lie in (0, {}], got {hi}",
                    smooth::MAX_FREQ
                )));
            }
            let rows: Result<Vec<(f64, f64)>, tsrl_core::Error> = grid(hi)
                .par_iter()
                .map(|&t| smooth::f_delta_mellin(delta, t).map(|(v, _)| (t, v.norm())))
                .collect();
            let mut text = String::from("t,F_delta_abs\n");
            for (t, norm) in rows.map_err(internal)? {
                text += &format!("{},{}\n", f17(t), f17(norm));
            }
            Ok(Artifact::Csv(text))
        }
    }
}

fn cmd_dispersion(
    format: Option<Format>,
    p: dispersion::DispersionParams,
    truncation: Option<u64>,
) -> Result<Artifact, CliError> {
    pick(format, Format::Json, &[Format::Json])?;
    let trunc = truncation.unwrap_or(2 * p.d);
    if trunc == 0 || trunc > 2 * p.d {
        return Err(CliError::Invalid(format!(
            "--truncation must lie in [1, 2D], got {trunc}"
        )));
    }
    let w = dispersion::build_weights(&p).map_err(internal)?;
    let ut = dispersion::u_tilde_with(&p, &w);
    let (ww, vv, uu) = dispersion::w_v_u_with(&p, &w);
    let umt = dispersion::u_mt_with(&p, &w).map_err(internal)?;
    let wmt = dispersion::w_mt_with(&p, &w, trunc).map_err(internal)?;
    let (lhs, rhs, ok) = dispersion::dispersion_inequality_check_with(&p, &w);
    Ok(Artifact::Json {
        command: "dispersion",
        data: json!({
            "params": {
                "D": p.d, "N": p.n, "M": p.m, "t": p.t, "k": p.k,
                "j1": p.j1, "j2": p.j2, "x_cap": p.x_cap, "truncation": trunc,
            },
            "a_norm_sq": w.a_norm_sq(),
            "b_support_len": w.b_support().len(),
            "u_tilde": cplx(ut),
            "w": cplx(ww),
            "v": cplx(vv),
            "u": cplx(uu),
            "u_mt": cplx(umt),
            "w_mt": cplx(wmt),
            "cauchy_schwarz": { "lhs": lhs, "rhs": rhs, "ok": ok },
        }),
        ok,
    })
}

fn cmd_sieve_dump(
    format: Option<Format>,
    lo: u64,
    hi: u64,
    kind: SieveKind,
) -> Result<Artifact, CliError> {
    if format.is_some() {
        return Err(CliError::Invalid(
            "sieve-dump emits a binary artifact; --format does not apply".into(),
        ));
    }
    if lo == 0 || hi <= lo || hi > sieve::MAX_SIEVE_VALUE + 1 {
        return Err(CliError::Invalid(format!(
            "need 1 ≤ lo < hi ≤ {}, got [{lo}, {hi})",
            sieve::MAX_SIEVE_VALUE + 1
        )));
    }
    if hi - lo > MAX_DUMP_WIDTH {
        return Err(CliError::Invalid(format!(
            "dump width caps at {MAX_DUMP_WIDTH} values, got {}",
            hi - lo
        )));
    }
    let table = match kind {
        SieveKind::H => sieve::sieve_h(lo, hi),
        SieveKind::Tau => sieve::sieve_tau(lo, hi),
    }
    .map_err(internal)?;
    let mut bytes = Vec::with_capacity(16 + 4 * (hi - lo) as usize);
    table
        .write_binary(&mut bytes)
        .map_err(|e| CliError::Internal(format!("serialize table: {e}")))?;
    Ok(Artifact::Binary(bytes))
}

// ---------------------------------------------------------------------------
// Verification suites

/// One named check inside a suite.
#[derive(Debug, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// JUnit-shaped summary of one suite run.
#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub total: usize,
    pub failures: usize,
    pub ok: bool,
    pub cases: Vec<CaseOutcome>,
}

struct SuiteBuilder {
    name: &'static str,
    cases: Vec<CaseOutcome>,
}

impl SuiteBuilder {
    fn new(name: &'static str) -> Self {
        SuiteBuilder {
            name,
            cases: Vec::new(),
        }
    }

    fn case(&mut self, name: &str, passed: bool, detail: String) {
        self.cases.push(CaseOutcome {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn finish(self) -> SuiteReport {
        let failures = self.cases.iter().filter(|c| !c.passed).count();
        SuiteReport {
            suite: self.name.to_string(),
            total: self.cases.len(),
            failures,
            ok: failures == 0,
            cases: self.cases,
        }
    }
}

fn cmd_verify(format: Option<Format>, suite: Suite, seed: u64) -> Result<Artifact, CliError> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Junit])?;
    let reports = run_suites(suite, seed)?;
    let ok = reports.iter().all(|r| r.ok);
    match format {
        Format::Junit => Ok(Artifact::Junit {
            text: junit(&reports),
            ok,
        }),
        _ => {
            let data = if reports.len() == 1 {
                serde_json::to_value(&reports[0]).expect("suite report")
            } else {
                serde_json::to_value(&reports).expect("suite reports")
            };
            Ok(Artifact::Json {
                command: "verify",
                data,
                ok,
            })
        }
    }
}

/// Run one suite (or all of them) and return the reports.
pub fn run_suites(suite: Suite, seed: u64) -> Result<Vec<SuiteReport>, CliError> {
    let order = [
        Suite::Lemma9,
        Suite::Lemma10,
        Suite::Lemma10_5,
        Suite::Lemma11,
        Suite::Kloosterman,
        Suite::Trilinear,
        Suite::Shiu,
        Suite::Conductor,
        Suite::Smooth,
        Suite::Dispersion,
    ];
    let picked: Vec<Suite> = match suite {
        Suite::All => order.to_vec(),
        s => vec![s],
    };
    picked
        .into_iter()
        .map(|s| match s {
            Suite::Lemma9 => suite_lemma9(),
            Suite::Lemma10 => suite_lemma10(),
            Suite::Lemma10_5 => suite_lemma10_5(),
            Suite::Lemma11 => suite_lemma11(),
            Suite::Kloosterman => suite_kloosterman(),
            Suite::Trilinear => suite_trilinear(seed),
            Suite::Shiu => suite_shiu(),
            Suite::Conductor => suite_conductor(),
            Suite::Smooth => suite_smooth(),
            Suite::Dispersion => suite_dispersion(seed),
            Suite::All => unreachable!("expanded above"),
        })
        .collect()
}

/// Exhaustive congruence-splitting check over Δ ≤ 12, Δ₁, Δ₂ ≤ 16.
fn suite_lemma9() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("lemma9");
    for delta in 1..=12u64 {
        let mut shapes = 0u64;
        let mut pairs = 0u64;
        let mut bad = None;
        for d1 in 1..=16u64 {
            for d2 in 1..=16u64 {
                if arith::decompose_delta(delta, d1, d2).is_err() {
                    continue;
                }
                let r = lemmas::lemma9_verify(delta, d1, d2).map_err(internal)?;
                shapes += 1;
                pairs += r.pairs_checked;
                if bad.is_none() {
                    if let Some(ce) = r.counterexample {
                        bad = Some((d1, d2, ce));
                    }
                }
            }
        }
        let detail = match bad {
            None => format!("{shapes} shapes, {pairs} residue pairs, zero counterexamples"),
            Some((d1, d2, ce)) => format!("counterexample at (Δ₁, Δ₂) = ({d1}, {d2}): {ce:?}"),
        };
        b.case(&format!("delta_{delta}"), bad.is_none(), detail);
    }
    Ok(b.finish())
}

/// 10⁴ seeded tuples through the exact mod-1 inverse-residue identity.
fn suite_lemma10() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("lemma10");
    let tuples = 10_000u64;
    let passed = lemmas::lemma10_sweep(tuples).map_err(internal)?;
    b.case(
        "seeded_sweep",
        passed == tuples,
        format!("{passed}/{tuples} tuples satisfied the identity exactly"),
    );
    Ok(b.finish())
}

/// Closed-form partial-fraction expansions against direct quadrature.
fn suite_lemma10_5() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("lemma10.5");
    let z = 1.0 / 6.0;
    let (f1, f2, f3) = lemmas::partial_closed_forms(z, 1.0, 0.0, 0.0);
    let worst = (f1 - z).abs().max((f2 - z).abs()).max((f3 - z).abs());
    b.case(
        "identity_map_collapse",
        worst <= 1e-12,
        format!("max |Fᵢ(z) − z| = {worst:.3e}"),
    );
    let lin = lemmas::lemma10_5_verify(|z| z, 1.0, [1.0, 2.0, 3.0]).map_err(internal)?;
    b.case("linear_integrand", lin <= 1e-8, format!("err = {lin:.3e}"));
    let exp = lemmas::lemma10_5_verify(f64::exp, 1.0, [1.0, 2.0, 3.0]).map_err(internal)?;
    b.case("exponential_integrand", exp <= 1e-6, format!("err = {exp:.3e}"));
    let e1 = lemmas::lemma10_5_verify(|z| z * z, 2.0, [1.5, 2.0, 3.0]).map_err(internal)?;
    let e2 = lemmas::lemma10_5_verify(|z| z * z, 2.0, [1.5, 3.0, 2.0]).map_err(internal)?;
    b.case(
        "argument_order_invariance",
        e1 == e2,
        format!("swapped-argument errors {e1:.3e} vs {e2:.3e}"),
    );
    Ok(b.finish())
}

/// Multidimensional partial summation at m ∈ {1, 2, 3}.
fn suite_lemma11() -> Result<SuiteReport, CliError> {
    use rand::{Rng, SeedableRng};
    let mut b = SuiteBuilder::new("lemma11");
    let tol = 1e-8;
    let e1 = lemmas::lemma11_verify(&|_| 1, &|p| p[0] * p[0], &[0.0], &[20.0]).map_err(internal)?;
    b.case("one_dimensional_abel", e1 <= tol, format!("err = {e1:.3e}"));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x2A);
    let table: Vec<i64> = (0..12 * 9).map(|_| rng.gen_range(-5..=5)).collect();
    let c = move |l: &[i64]| table[((l[0] - 1) * 9 + (l[1] - 1)) as usize];
    let f = |p: &[f64; 3]| (-(p[0] + p[1]) / 20.0).exp();
    let e2 = lemmas::lemma11_verify(&c, &f, &[0.0, 0.0], &[12.0, 9.0]).map_err(internal)?;
    b.case("two_dimensional_seeded_weights", e2 <= tol, format!("err = {e2:.3e}"));
    let e3 = lemmas::lemma11_verify(
        &|_| 0,
        &|p| (p[0] * p[1] + p[2]).sin(),
        &[0.0, 0.0, 0.0],
        &[4.0, 4.0, 4.0],
    )
    .map_err(internal)?;
    b.case("three_dimensional_zero_weights", e3 <= tol, format!("err = {e3:.3e}"));
    Ok(b.finish())
}

/// Complete exponential sums: pinned values, degenerate case, Weil window.
fn suite_kloosterman() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("kloosterman");
    let s = lemmas::kloosterman(1, 1, 5).map_err(internal)?;
    let golden = 2.0 - (1.0 + 5.0f64.sqrt()) / 2.0;
    b.case(
        "pinned_modulus_5",
        (s.re - golden).abs() <= 1e-10 && s.im.abs() <= 1e-10,
        format!("S(1,1;5) = {:.12} (closed form {golden:.12})", s.re),
    );
    let t = lemmas::kloosterman(0, 0, 7).map_err(internal)?;
    b.case(
        "degenerate_counts_units",
        (t.re - 6.0).abs() <= 1e-12 && t.im.abs() <= 1e-12,
        format!("S(0,0;7) = {:.12}", t.re),
    );
    let mut max_ratio = 0.0f64;
    let mut max_im = 0.0f64;
    for p in sieve::primes_upto(1_000).map_err(internal)?.iter() {
        let s = lemmas::kloosterman(1, 1, p).map_err(internal)?;
        max_ratio = max_ratio.max(s.norm() / (2.0 * (p as f64).sqrt()));
        max_im = max_im.max(s.im.abs());
    }
    b.case(
        "weil_window_primes_to_1000",
        max_ratio <= 1.0 + 1e-9 && max_im <= 1e-9,
        format!("max |S|/2√p = {max_ratio:.6}, max |Im| = {max_im:.3e}"),
    );
    Ok(b.finish())
}

/// Trilinear exponential-sum bound diagnostics.
fn suite_trilinear(seed: u64) -> Result<SuiteReport, CliError> {
    use rand::{Rng, SeedableRng};
    use std::f64::consts::TAU;
    let mut b = SuiteBuilder::new("trilinear");
    let spec = lemmas::TrilinearSpec::all_ones(8, 8, 8, 1);
    let (v, ratio) = lemmas::trilinear_b(&spec).map_err(internal)?;
    b.case(
        "all_ones_finite",
        v.norm().is_finite() && ratio.is_finite() && ratio > 0.0,
        format!("|B| = {:.6}, bound ratio = {ratio:.6}", v.norm()),
    );
    let mut even = lemmas::TrilinearSpec::all_ones(8, 8, 8, 1);
    for (i, mi) in lemmas::dyadic_support(8).enumerate() {
        if mi % 2 == 1 {
            even.alpha[i] = Complex64::new(0.0, 0.0);
            even.beta[i] = Complex64::new(0.0, 0.0);
        }
    }
    let (v0, _) = lemmas::trilinear_b(&even).map_err(internal)?;
    b.case(
        "coprimality_filter_vanishes",
        v0 == Complex64::new(0.0, 0.0),
        format!("|B| = {:.3e} on shared-factor support", v0.norm()),
    );
    let mut neg = lemmas::TrilinearSpec::all_ones(8, 8, 8, 1);
    neg.theta = -1;
    let (vneg, _) = lemmas::trilinear_b(&neg).map_err(internal)?;
    b.case(
        "frequency_conjugation",
        (vneg - v.conj()).norm() <= 1e-9,
        format!("|B(−θ) − conj B(θ)| = {:.3e}", (vneg - v.conj()).norm()),
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0f64;
    let mut all_finite = true;
    for _ in 0..50 {
        let m = rng.gen_range(4..=40u64);
        let n = rng.gen_range(4..=40u64);
        let a = rng.gen_range(4..=40u64);
        let theta = *[-2i64, -1, 1, 2, 3].get(rng.gen_range(0..5)).unwrap();
        let mut spec = lemmas::TrilinearSpec::all_ones(m, n, a, theta);
        for v in [&mut spec.alpha, &mut spec.beta, &mut spec.nu] {
            for z in v.iter_mut() {
                *z = Complex64::cis(rng.gen_range(0.0..TAU));
            }
        }
        let (value, ratio) = lemmas::trilinear_b(&spec).map_err(internal)?;
        all_finite &= value.norm().is_finite() && ratio.is_finite() && ratio >= 0.0;
        max_ratio = max_ratio.max(ratio);
    }
    b.case(
        "seeded_sweep_bound_ratio",
        all_finite && max_ratio > 0.0,
        format!("max bound ratio over 50 draws = {max_ratio:.6} (report-only diagnostic)"),
    );
    Ok(b.finish())
}

/// Short-interval progression and mean-value ratio diagnostics.
fn suite_shiu() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("shiu");
    for x in [10_000u64, 100_000, 1_000_000] {
        let r = lemmas::shiu_ratio(x, x / 2, 3, 1).map_err(internal)?;
        b.case(
            &format!("progression_ratio_x_{x}"),
            r.is_finite() && r > 0.0,
            format!("LHS/(RHS without constant) = {r:.6}"),
        );
    }
    for x in [10_000u64, 1_000_000] {
        let m = lemmas::mean_value_ratio(x).map_err(internal)?;
        b.case(
            &format!("mean_value_ratio_x_{x}"),
            m.is_finite() && m > 0.0,
            format!("ratio = {m:.6}"),
        );
    }
    Ok(b.finish())
}

/// Conductor of χ·χ₄ for every primitive χ of modulus 3 ≤ d ≤ 300.
fn suite_conductor() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("conductor");
    let mut counts = [0u64; 3];
    let mut mismatches: Vec<String> = Vec::new();
    let mut twice_odd_primitive = 0u64;
    for d in 3..=300u64 {
        let chars = characters::enumerate_characters(d).map_err(internal)?;
        if d % 4 == 2 {
            twice_odd_primitive += chars.iter().filter(|c| c.is_primitive()).count() as u64;
            continue;
        }
        let (class, expect) = if d % 2 == 1 {
            (0, 4 * d)
        } else if d % 8 == 4 {
            (1, d / 4)
        } else {
            (2, d)
        };
        for c in chars.iter().filter(|c| c.is_primitive()) {
            let (_, cond) = characters::times_chi4(c).map_err(internal)?;
            counts[class] += 1;
            if cond != expect {
                mismatches.push(format!("d={d}: conductor {cond}, expected {expect}"));
            }
        }
    }
    b.case(
        "twice_odd_moduli_have_no_primitive_characters",
        twice_odd_primitive == 0,
        format!("{twice_odd_primitive} primitive characters at d ≡ 2 (mod 4)"),
    );
    let labels = ["odd_modulus_gives_4d", "four_exactly_gives_d_over_4", "eight_divides_gives_d"];
    for (i, label) in labels.iter().enumerate() {
        let bad: Vec<&String> = mismatches
            .iter()
            .filter(|m| {
                let d: u64 = m[2..m.find(':').unwrap()].parse().unwrap();
                (if d % 2 == 1 { 0 } else if d % 8 == 4 { 1 } else { 2 }) == i
            })
            .collect();
        b.case(
            label,
            bad.is_empty(),
            if bad.is_empty() {
                format!("{} primitive characters matched", counts[i])
            } else {
                format!("{} mismatches, first: {}", bad.len(), bad[0])
            },
        );
    }
    Ok(b.finish())
}

/// Mollifier derivative bounds, transform decay, progression identity.
fn suite_smooth() -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("smooth");
    let mut worst = 0.0f64;
    for j in 0..=8u32 {
        let bound = (2.0f64.powi(j as i32) * (1..=j).product::<u32>() as f64).powi(2);
        for i in 0..1_000 {
            let x = -1.2 + 2.4 * i as f64 / 999.0;
            let v = smooth::rho_deriv(x, j).map_err(internal)?;
            worst = worst.max(v.abs() / bound);
        }
    }
    b.case(
        "mollifier_derivative_bounds",
        worst <= 1.0,
        format!("max |ρ^(j)|/(2^j j!)² over j ≤ 8 on 10³ points = {worst:.6}"),
    );
    let scaled: Result<Vec<f64>, tsrl_core::Error> = (0..=400u32)
        .into_par_iter()
        .map(|l| {
            let lam = l as f64;
            smooth::psi_hat(lam).map(|(v, _)| v.norm() * (lam.sqrt() / 2.0).exp())
        })
        .collect();
    let max_scaled = scaled
        .map_err(internal)?
        .into_iter()
        .fold(0.0f64, f64::max);
    b.case(
        "transform_decay_envelope",
        max_scaled <= 1e3,
        format!("max |ψ̂(λ)|·e^{{√λ/2}} over λ ≤ 400 = {max_scaled:.6}"),
    );
    let mut diffs = Vec::new();
    for m in [100.0f64, 1_000.0] {
        let h = smooth::progression_min_h(2, m).ceil() as u64;
        let c = smooth::poisson_check_progression(2, 1, m, h).map_err(internal)?;
        diffs.push(c.diff.abs());
    }
    b.case(
        "progression_identity_at_window_100",
        diffs[0] <= 1e-4,
        format!("|diff| = {:.3e}", diffs[0]),
    );
    // the truncation tail sits below f64 noise at both windows, so the
    // decreasing-in-M statement is checked through the 0.01/M envelope
    b.case(
        "progression_envelope_tightens",
        diffs[0] <= 1e-4 && diffs[1] <= 1e-5,
        format!(
            "|diff| = {:.3e} ≤ 1e-4 at M=100, {:.3e} ≤ 1e-5 at M=1000",
            diffs[0], diffs[1]
        ),
    );
    Ok(b.finish())
}

/// Cauchy–Schwarz majorant and main-term realness over the seeded sweep.
fn suite_dispersion(seed: u64) -> Result<SuiteReport, CliError> {
    let mut b = SuiteBuilder::new("dispersion");
    let sets = dispersion::seeded_parameter_sets(seed, 100);
    let mut violations = 0u32;
    let mut max_ratio = 0.0f64;
    let mut max_rel_im = 0.0f64;
    let mut degenerate = 0u32;
    for p in &sets {
        let w = dispersion::build_weights(p).map_err(internal)?;
        let (lhs, rhs, ok) = dispersion::dispersion_inequality_check_with(p, &w);
        if !ok {
            violations += 1;
        }
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        } else {
            degenerate += 1;
        }
        let umt = dispersion::u_mt_with(p, &w).map_err(internal)?;
        let rel = umt.im.abs() / umt.norm().max(f64::MIN_POSITIVE);
        max_rel_im = max_rel_im.max(rel);
    }
    b.case(
        "inequality_on_seeded_sets",
        violations == 0,
        format!(
            "{} sets, {violations} violations, max |Ũ|²/majorant = {max_ratio:.6} ({degenerate} degenerate)",
            sets.len()
        ),
    );
    b.case(
        "main_term_stays_real",
        max_rel_im <= 1e-10,
        format!("max relative imaginary part = {max_rel_im:.3e}"),
    );
    Ok(b.finish())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// JUnit XML rendering of suite reports.
fn junit(reports: &[SuiteReport]) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<testsuites>\n");
    for r in reports {
        s += &format!(
            "  <testsuite name=\"{}\" tests=\"{}\" failures=\"{}\">\n",
            xml_escape(&r.suite),
            r.total,
            r.failures
        );
        for c in &r.cases {
            if c.passed {
                s += &format!("    <testcase name=\"{}\"/>\n", xml_escape(&c.name));
            } else {
                s += &format!(
                    "    <testcase name=\"{}\">\n      <failure message=\"{}\"/>\n    </testcase>\n",
                    xml_escape(&c.name),
                    xml_escape(&c.detail)
                );
            }
        }
        s += "  </testsuite>\n";
    }
    s += "</testsuites>\n";
    s
}

// ---------------------------------------------------------------------------
// Golden files

/// Outcome of comparing a produced JSON artifact against a golden file.
#[derive(Debug, Serialize)]
pub struct GoldenReport {
    pub golden: String,
    pub compared: usize,
    pub pass: bool,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

fn golden_template(produced: &Value) -> Value {
    json!({
        "command": produced.get("command").cloned().unwrap_or(Value::Null),
        "default_tolerance": 0.0,
        "tolerances": {},
        "data": produced.get("data").cloned().unwrap_or(Value::Null),
    })
}

/// Field-by-field comparison with per-field tolerances from the golden
/// header; extra fields in the produced output warn without failing.
pub fn golden_compare(path: &Path, produced: &Value) -> Result<GoldenReport, CliError> {
    if !path.exists() {
        return Err(CliError::MissingGolden(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Internal(format!("read {}: {e}", path.display())))?;
    let golden: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("golden file {}: {e}", path.display())))?;
    let default_tol = golden
        .get("default_tolerance")
        .and_then(Value::as_f64)
        .unwrap_or(0.0);
    let tols: HashMap<String, f64> = golden
        .get("tolerances")
        .and_then(Value::as_object)
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| v.as_f64().map(|t| (k.clone(), t)))
                .collect()
        })
        .unwrap_or_default();
    let want = golden
        .get("data")
        .ok_or_else(|| CliError::Invalid(format!("golden file {} has no `data`", path.display())))?;
    let got = produced.get("data").unwrap_or(produced);
    let mut report = GoldenReport {
        golden: path.display().to_string(),
        compared: 0,
        pass: true,
        failures: Vec::new(),
        warnings: Vec::new(),
    };
    if let Some(wc) = golden.get("command") {
        if !wc.is_null() {
            report.compared += 1;
            if produced.get("command") != Some(wc) {
                report.failures.push(format!(
                    "command: golden {wc} vs {}",
                    produced.get("command").unwrap_or(&Value::Null)
                ));
            }
        }
    }
    walk(want, got, "", &mut report, &tols, default_tol);
    report.pass = report.failures.is_empty();
    Ok(report)
}

fn walk(
    want: &Value,
    got: &Value,
    path: &str,
    report: &mut GoldenReport,
    tols: &HashMap<String, f64>,
    default_tol: f64,
) {
    match (want, got) {
        (Value::Object(wm), Value::Object(gm)) => {
            for (k, wv) in wm {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match gm.get(k) {
                    Some(gv) => walk(wv, gv, &sub, report, tols, default_tol),
                    None => report.failures.push(format!("{sub}: missing from output")),
                }
            }
            for k in gm.keys() {
                if !wm.contains_key(k) {
                    let sub = if path.is_empty() {
                        k.clone()
                    } else {
                        format!("{path}.{k}")
                    };
                    report.warnings.push(format!("{sub}: extra field in output"));
                }
            }
        }
        (Value::Array(wa), Value::Array(ga)) => {
            if wa.len() != ga.len() {
                report.failures.push(format!(
                    "{path}: length {} in golden vs {} in output",
                    wa.len(),
                    ga.len()
                ));
                return;
            }
            for (i, (w, g)) in wa.iter().zip(ga).enumerate() {
                walk(w, g, &format!("{path}[{i}]"), report, tols, default_tol);
            }
        }
        (w, g) => {
            report.compared += 1;
            if let (Some(a), Some(b)) = (w.as_f64(), g.as_f64()) {
                let tol = tols.get(path).copied().unwrap_or(default_tol);
                if !((a - b).abs() <= tol) {
                    report.failures.push(format!(
                        "{path}: golden {a:e} vs {b:e} exceeds tolerance {tol:e}"
                    ));
                }
            } else if w != g {
                report.failures.push(format!("{path}: golden {w} vs {g}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_parsing() {
        assert_eq!(parse_count("120000").unwrap(), 120_000);
        assert_eq!(parse_count("1e7").unwrap(), 10_000_000);
        assert_eq!(parse_count("2.5e3").unwrap(), 2_500);
        assert_eq!(parse_count(" 1e4 ").unwrap(), 10_000);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("1e20").is_err());
        assert!(parse_count("abc").is_err());
        assert!(parse_count("").is_err());
    }

    #[test]
    fn float_rendering_has_17_significant_digits() {
        assert_eq!(f17(772.9416666666667), "7.7294166666666672e2");
        assert_eq!(f17(0.0), "0.0000000000000000e0");
        assert_eq!(f17(-1.5), "-1.5000000000000000e0");
        let v = 0.3393847;
        let round_trip: f64 = f17(v).parse().unwrap();
        assert_eq!(round_trip, v);
    }

    #[test]
    fn golden_walk_tolerances_and_warnings() {
        let want = json!({ "a": 1.0, "b": { "c": 2.0 }, "s": "x" });
        let got = json!({ "a": 1.05, "b": { "c": 2.0, "extra": 9 }, "s": "x" });
        let mut tols = HashMap::new();
        tols.insert("a".to_string(), 0.1);
        let mut report = GoldenReport {
            golden: String::new(),
            compared: 0,
            pass: true,
            failures: Vec::new(),
            warnings: Vec::new(),
        };
        walk(&want, &got, "", &mut report, &tols, 0.0);
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("b.extra"));
        // outside tolerance → named field
        let tight = json!({ "a": 1.0 });
        let off = json!({ "a": 1.2 });
        let mut r2 = GoldenReport {
            golden: String::new(),
            compared: 0,
            pass: true,
            failures: Vec::new(),
            warnings: Vec::new(),
        };
        walk(&tight, &off, "", &mut r2, &tols, 0.0);
        assert_eq!(r2.failures.len(), 1);
        assert!(r2.failures[0].starts_with("a:"));
        // golden field missing from output → failure
        let missing = json!({ "a": 1.0, "gone": 3 });
        let present = json!({ "a": 1.0 });
        let mut r3 = GoldenReport {
            golden: String::new(),
            compared: 0,
            pass: true,
            failures: Vec::new(),
            warnings: Vec::new(),
        };
        walk(&missing, &present, "", &mut r3, &tols, 0.0);
        assert!(r3.failures.iter().any(|f| f.contains("gone")));
    }

    #[test]
    fn junit_escapes_and_counts() {
        let reports = vec![SuiteReport {
            suite: "demo".into(),
            total: 2,
            failures: 1,
            ok: false,
            cases: vec![
                CaseOutcome {
                    name: "fine".into(),
                    passed: true,
                    detail: String::new(),
                },
                CaseOutcome {
                    name: "a<b".into(),
                    passed: false,
                    detail: "x & y".into(),
                },
            ],
        }];
        let xml = junit(&reports);
        assert!(xml.contains("tests=\"2\" failures=\"1\""));
        assert!(xml.contains("a&lt;b"));
        assert!(xml.contains("x &amp; y"));
    }

    #[test]
    fn thread_resolution_rejects_zero() {
        assert!(matches!(
            resolve_threads(Some(0)),
            Err(CliError::Invalid(_))
        ));
        assert!(matches!(resolve_threads(Some(3)), Ok(Some(3))));
    }
}
