//! Command-line front end: runs verifications and laboratory operations,
//! emitting deterministic JSON reports.
//!
//! Exit codes: 0 success, 1 verification negative (margin >= 0), 2 usage
//! or input error, 3 internal-consistency error (engine disagreement).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use minorarc::bounds::{sample_floor, verify_minor_arcs, BoundParams, VerificationReport};
use minorarc::minmax::Engine;
use minorarc::numlab::{
    check_prop_t600, exp_sum_averaged, exp_sum_pointwise, invariant_factors, null_count,
    poisson_check, singular_integral, singular_series_partial, smith_normal_form, CubicPoly,
    IntMatrix, NullMethod, PoissonConfig, QuadPoly,
};
use minorarc::rat::Rat;
use minorarc::Error;

const SCHEMA: &str = "1";

#[derive(Parser)]
#[command(
    name = "minorarc",
    version,
    about = "Exact minor-arc bound verification and exponential-sum laboratory"
)]
struct Cli {
    /// Output mode for reports.
    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    output: Output,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the minor-arc exponent bound for n (or a range of n).
    VerifyMinorArcs {
        #[arg(long)]
        n: i64,
        /// Verify every integer from n to n-max inclusive.
        #[arg(long)]
        n_max: Option<i64>,
        /// Major-arc cutoff exponent, an exact rational.
        #[arg(long, default_value = "993/7000")]
        delta: String,
        /// Slack in the Poisson height bracket, an exact rational.
        #[arg(long, default_value = "1/10000")]
        eps_prime: String,
        #[arg(long, default_value = "branch")]
        engine: String,
        /// Also probe this many random domain points as a sanity floor.
        #[arg(long, default_value_t = 0)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include the five bound expressions as s-expressions for audit.
        #[arg(long, default_value_t = false)]
        dump_bounds: bool,
    },
    /// Complete quadratic exponential sums, brute force.
    Expsum {
        #[arg(value_parser = ["pointwise", "averaged", "t600"])]
        mode: String,
        #[arg(long)]
        input: PathBuf,
    },
    /// Smith normal form of an integer matrix.
    Snf {
        #[arg(long)]
        input: PathBuf,
    },
    /// Count solutions of M x = 0 modulo q.
    Nullcount {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        q: u64,
        #[arg(long, value_parser = ["smith", "brute", "both"])]
        method: String,
    },
    /// Check the Poisson summation identity numerically.
    PoissonCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        q: u64,
        /// Frequency offset as a rational pair "p/q,p/q".
        #[arg(long)]
        z: String,
        #[arg(long)]
        big_p: u64,
        #[arg(long)]
        m_cut: i64,
    },
    /// Truncated singular series with per-q terms.
    SingularSeries {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r_max: u64,
    },
    /// Toy singular integral by tensor-grid quadrature.
    SingularIntegral {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        r: String,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        grid: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap maps --help/--version to success itself.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e);
            let code = match e {
                Error::EngineDisagreement { .. } => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::VerifyMinorArcs {
            n,
            n_max,
            delta,
            eps_prime,
            engine,
            samples,
            seed,
            dump_bounds,
        } => cmd_verify(
            cli.output,
            n,
            n_max,
            &delta,
            &eps_prime,
            &engine,
            samples,
            seed,
            dump_bounds,
        ),
        Command::Expsum { mode, input } => cmd_expsum(cli.output, &mode, &input),
        Command::Snf { input } => cmd_snf(cli.output, &input),
        Command::Nullcount { input, q, method } => cmd_nullcount(cli.output, &input, q, &method),
        Command::PoissonCheck {
            input,
            q,
            z,
            big_p,
            m_cut,
        } => cmd_poisson(cli.output, &input, q, &z, big_p, m_cut),
        Command::SingularSeries { input, r_max } => cmd_series(cli.output, &input, r_max),
        Command::SingularIntegral {
            input,
            r,
            rho,
            grid,
        } => cmd_integral(cli.output, &input, &r, &rho, grid),
    }
}

fn read_input<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MalformedInput(format!("cannot read {}: {}", path.display(), e)))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::MalformedInput(format!("{}: {}", path.display(), e)))
}

fn emit<T: Serialize>(
    output: Output,
    command: &str,
    params: serde_json::Value,
    payload: &T,
    text: String,
) {
    match output {
        Output::Json => {
            let report = json!({
                "schema": SCHEMA,
                "tool": "minorarc",
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "params": params,
                "result": payload,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("serializable report")
            );
        }
        Output::Text => println!("{}", text),
    }
}

#[derive(Serialize)]
struct VerifyEntry {
    #[serde(flatten)]
    report: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_floor: Option<Rat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<(String, String)>>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    output: Output,
    n: i64,
    n_max: Option<i64>,
    delta: &str,
    eps_prime: &str,
    engine: &str,
    samples: u64,
    seed: u64,
    dump_bounds: bool,
) -> Result<u8, Error> {
    let delta = Rat::parse(delta)?;
    let eps_prime = Rat::parse(eps_prime)?;
    let engine: Engine = engine.parse()?;
    let n_max = n_max.unwrap_or(n);
    if n_max < n {
        return Err(Error::InvalidParameter(
            "n-max must not be smaller than n".into(),
        ));
    }
    let mut entries = Vec::new();
    let mut any_failed = false;
    let mut lines = Vec::new();
    for cur in n..=n_max {
        let params = BoundParams::new(cur, delta.clone(), eps_prime.clone())?;
        let report = verify_minor_arcs(&params, engine)?;
        eprintln!(
            "n={}: margin {} in {:.2?}",
            cur, report.margin, report.wall_time
        );
        if !report.margin.is_negative() {
            any_failed = true;
        }
        let floor = if samples > 0 {
            Some(sample_floor(&params, seed, samples)?)
        } else {
            None
        };
        lines.push(format!(
            "n = {:>2}: max min = {} margin = {} ({:.6}) at {} [{}]{}",
            cur,
            report.value,
            report.margin,
            report.margin.to_f64(),
            format_point(&report.argmax),
            report.min_bound,
            floor
                .as_ref()
                .map(|f| format!(" floor = {}", f))
                .unwrap_or_default(),
        ));
        let bounds = if dump_bounds {
            Some(minorarc::bounds::build_bound_family(&params)?.to_sexprs())
        } else {
            None
        };
        entries.push(VerifyEntry {
            report,
            sample_floor: floor,
            bounds,
        });
    }
    let params = json!({
        "n": n,
        "n_max": n_max,
        "delta": delta.to_string(),
        "eps_prime": eps_prime.to_string(),
        "engine": engine,
        "samples": samples,
        "seed": seed,
    });
    emit(
        output,
        "verify-minor-arcs",
        params,
        &entries,
        lines.join("\n"),
    );
    Ok(if any_failed { 1 } else { 0 })
}

fn format_point(point: &minorarc::pwl::Point) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{}={}", k, v))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(serde::Deserialize)]
struct ExpsumInput {
    f: QuadPoly,
    g: QuadPoly,
    #[serde(default)]
    a: Option<[i64; 2]>,
    q: u64,
    m: Vec<i64>,
}

fn cmd_expsum(output: Output, mode: &str, input: &PathBuf) -> Result<u8, Error> {
    let data: ExpsumInput = read_input(input)?;
    let params = json!({
        "mode": mode,
        "input": input.display().to_string(),
        "q": data.q,
        "m": data.m,
        "a": data.a,
    });
    match mode {
        "pointwise" => {
            let a = data.a.ok_or_else(|| {
                Error::MalformedInput("pointwise sums need the numerator pair \"a\"".into())
            })?;
            let s = exp_sum_pointwise(&data.f, &data.g, (a[0], a[1]), data.q, &data.m)?;
            let text = format!(
                "S(a, {}; m) = {:.12} + {:.12}i (err {:.3e})",
                data.q, s.re, s.im, s.err
            );
            emit(output, "expsum-pointwise", params, &s, text);
        }
        "averaged" => {
            let s = exp_sum_averaged(&data.f, &data.g, data.q, &data.m)?;
            let text = format!(
                "S({}; m) = {:.12} + {:.12}i (err {:.3e})",
                data.q, s.re, s.im, s.err
            );
            emit(output, "expsum-averaged", params, &s, text);
        }
        "t600" => {
            let a = data.a.ok_or_else(|| {
                Error::MalformedInput("the bound check needs the numerator pair \"a\"".into())
            })?;
            let r = check_prop_t600(&data.f, &data.g, (a[0], a[1]), data.q, &data.m)?;
            let text = format!(
                "|S| = {:.9} <= {:.9} (delta = {}, holds = {})",
                r.lhs, r.rhs, r.delta, r.holds
            );
            emit(output, "expsum-t600", params, &r, text);
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown expsum mode `{}`",
                other
            )))
        }
    }
    Ok(0)
}

#[derive(serde::Deserialize)]
struct MatrixInput {
    matrix: IntMatrix,
}

#[derive(Serialize)]
struct SnfReport {
    s: IntMatrix,
    d: IntMatrix,
    t: IntMatrix,
    invariant_factors: Vec<String>,
}

fn cmd_snf(output: Output, input: &PathBuf) -> Result<u8, Error> {
    let data: MatrixInput = read_input(input)?;
    let (s, d, t) = smith_normal_form(&data.matrix)?;
    let factors = invariant_factors(&data.matrix)?
        .iter()
        .map(|f| f.to_string())
        .collect();
    let report = SnfReport {
        s,
        d,
        t,
        invariant_factors: factors,
    };
    let text = format!("invariant factors: {}", report.invariant_factors.join(", "));
    let params = json!({ "input": input.display().to_string() });
    emit(output, "snf", params, &report, text);
    Ok(0)
}

#[derive(Serialize)]
struct NullReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    smith: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    brute: Option<String>,
    count: String,
    agree: bool,
}

fn cmd_nullcount(output: Output, input: &PathBuf, q: u64, method: &str) -> Result<u8, Error> {
    let data: MatrixInput = read_input(input)?;
    let (smith, brute) = match method {
        "smith" => (Some(null_count(&data.matrix, q, NullMethod::Smith)?), None),
        "brute" => (None, Some(null_count(&data.matrix, q, NullMethod::Brute)?)),
        "both" => (
            Some(null_count(&data.matrix, q, NullMethod::Smith)?),
            Some(null_count(&data.matrix, q, NullMethod::Brute)?),
        ),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown method `{}` (expected smith, brute or both)",
                other
            )))
        }
    };
    let agree = match (&smith, &brute) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    };
    if !agree {
        return Err(Error::EngineDisagreement {
            branch: smith.unwrap().to_string(),
            vertex: brute.unwrap().to_string(),
        });
    }
    let count = smith
        .as_ref()
        .or(brute.as_ref())
        .expect("at least one method ran")
        .to_string();
    let report = NullReport {
        smith: smith.map(|v| v.to_string()),
        brute: brute.map(|v| v.to_string()),
        count: count.clone(),
        agree,
    };
    let params = json!({
        "input": input.display().to_string(),
        "q": q,
        "method": method,
    });
    emit(
        output,
        "nullcount",
        params,
        &report,
        format!("#Null_{}(M) = {}", q, count),
    );
    Ok(0)
}

#[derive(serde::Deserialize)]
struct PoissonInput {
    f: QuadPoly,
    g: QuadPoly,
    x0: Vec<Rat>,
    rho: Rat,
}

fn cmd_poisson(
    output: Output,
    input: &PathBuf,
    q: u64,
    z: &str,
    big_p: u64,
    m_cut: i64,
) -> Result<u8, Error> {
    let data: PoissonInput = read_input(input)?;
    let (z1, z2) = z
        .split_once(',')
        .ok_or_else(|| Error::InvalidParameter("z must be a pair \"p/q,p/q\"".into()))?;
    let cfg = PoissonConfig {
        q,
        z: (Rat::parse(z1)?, Rat::parse(z2)?),
        big_p,
        m_cut,
        rho: data.rho.clone(),
        x0: data.x0.clone(),
    };
    let report = poisson_check(&data.f, &data.g, &cfg)?;
    let params = json!({
        "input": input.display().to_string(),
        "q": q,
        "z": z,
        "big_p": big_p,
        "m_cut": m_cut,
        "rho": data.rho.to_string(),
    });
    let text = format!(
        "lhs = {:.9}+{:.9}i rhs = {:.9}+{:.9}i |diff| = {:.3e}",
        report.lhs.re, report.lhs.im, report.rhs.re, report.rhs.im, report.abs_diff
    );
    emit(output, "poisson-check", params, &report, text);
    Ok(0)
}

#[derive(serde::Deserialize)]
struct CubicPairInput {
    f: CubicPoly,
    g: CubicPoly,
    #[serde(default)]
    x0: Option<Vec<Rat>>,
}

fn cmd_series(output: Output, input: &PathBuf, r_max: u64) -> Result<u8, Error> {
    let data: CubicPairInput = read_input(input)?;
    let report = singular_series_partial(&data.f, &data.g, r_max)?;
    let params = json!({
        "input": input.display().to_string(),
        "r_max": r_max,
    });
    let text = format!(
        "SS({}) = {:.9} (err {:.3e}, {} terms)",
        r_max,
        report.value,
        report.err,
        report.terms.len()
    );
    emit(output, "singular-series", params, &report, text);
    Ok(0)
}

fn cmd_integral(
    output: Output,
    input: &PathBuf,
    r: &str,
    rho: &str,
    grid: usize,
) -> Result<u8, Error> {
    let data: CubicPairInput = read_input(input)?;
    let x0 = data.x0.ok_or_else(|| {
        Error::MalformedInput("singular-integral input needs the centre \"x0\"".into())
    })?;
    let r = Rat::parse(r)?;
    let rho = Rat::parse(rho)?;
    let value = singular_integral(&data.f, &data.g, &r, &rho, &x0, grid)?;
    // Half-grid value reported alongside as a refinement check.
    let coarse = singular_integral(&data.f, &data.g, &r, &rho, &x0, (grid / 2).max(1))?;
    let payload = json!({
        "value": value,
        "coarse": coarse,
        "refinement_shift": (value.re - coarse.re).abs(),
    });
    let params = json!({
        "input": input.display().to_string(),
        "r": r.to_string(),
        "rho": rho.to_string(),
        "grid": grid,
    });
    let text = format!(
        "J(R) = {:.9} + {:.9}i (refinement shift {:.3e})",
        value.re,
        value.im,
        (value.re - coarse.re).abs()
    );
    emit(output, "singular-integral", params, &payload, text);
    Ok(0)
}
