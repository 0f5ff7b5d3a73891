use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use zerocluster::bounds::{min_on_sphere, realify, realify_system, BoundOptions, DEFAULT_MAX_BOXES, DEFAULT_SAFETY};
use zerocluster::certify::{
    oracle_consistent, oracle_solve, run_pipeline, verify_cluster_certificate, ClusterCertificate, PipelineError,
    PipelineOptions, DEFAULT_EPS_RANGE,
};
use zerocluster::io::read_input;
use zerocluster::numlinalg::DEFAULT_TAU;
use zerocluster::sos::{assemble, export_problem, verify_certificate, SosCertificate, DEFAULT_LEVEL};
use zerocluster::Error;

#[derive(Parser)]
#[command(name = "zerocluster", version, about = "Certify clusters of zeros of square polynomial systems")]
struct Cli {
    /// Worker threads for the sphere bounder.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline at the input point and write a certificate.
    Certify(CertifyArgs),
    /// Lower-bound |Q| on the unit sphere for a quadratic system.
    Bound(BoundArgs),
    /// Re-verify a certificate against the input system.
    Check(CheckArgs),
    /// Write boundary points of a certified region as CSV.
    Region(RegionArgs),
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long)]
    target_c: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_BOXES)]
    max_boxes: usize,
    #[arg(long, default_value_t = DEFAULT_EPS_RANGE.0)]
    eps_lo: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_RANGE.1)]
    eps_hi: f64,
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    safety: f64,
    /// Radius to certify instead of the geometric mean of the feasible interval.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Take c from this SOS certificate (JSON) instead of subdividing.
    #[arg(long)]
    sos_cert: Option<PathBuf>,
    /// Write the SOS relaxation of the certified Q in SDPA sparse format.
    #[arg(long)]
    sos_export: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: usize,
    /// Certificate path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Failure report path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    input: PathBuf,
    /// Required lower bound on |Q|² (not |Q|).
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_BOXES)]
    max_boxes: usize,
    /// Write the SOS relaxation in SDPA sparse format.
    #[arg(long)]
    sos_export: Option<PathBuf>,
    /// Verify this SOS certificate instead of subdividing.
    #[arg(long)]
    sos_cert: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Also count zeros in the region with Newton's method (n ≤ 3).
    #[arg(long)]
    with_oracle: bool,
    #[arg(long, default_value_t = 6)]
    grid: usize,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    cert: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum Outcome {
    Ok,
    Failed,
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn read_certificate(path: &Path) -> Result<ClusterCertificate, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let j = zerocluster::io::from_json_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    ClusterCertificate::from_json(&j)
}

fn certify(args: CertifyArgs, threads: usize) -> Result<Outcome, Error> {
    let input = read_input(&args.input)?;
    let y = input.require_point()?;
    let sos = args.sos_cert.as_deref().map(SosCertificate::read).transpose()?;
    let opts = PipelineOptions {
        tau: args.tau,
        target_c: args.target_c,
        max_boxes: args.max_boxes,
        eps_range: (args.eps_lo, args.eps_hi),
        safety: args.safety,
        epsilon: args.epsilon,
        threads,
        sos,
    };
    match run_pipeline(&input.system, y, &opts) {
        Ok(cert) => {
            emit(args.output.as_deref(), &cert.to_json_string())?;
            if let Some(path) = &args.sos_export {
                export_problem(&assemble(&realify(&cert.q), args.level)?, path)?;
            }
            eprintln!(
                "certified {} zeros: kappa = {}, c = {}, epsilon = {} in [{}, {}]",
                cert.multiplicity, cert.kappa, cert.bound.c, cert.epsilon, cert.epsilon_interval.lo, cert.epsilon_interval.hi
            );
            Ok(Outcome::Ok)
        }
        Err(PipelineError::Invalid(e)) => Err(e),
        Err(PipelineError::Failed(report)) => {
            emit(args.report.as_deref(), &pretty(&report))?;
            eprintln!("{report}");
            Ok(Outcome::Failed)
        }
    }
}

#[derive(Serialize)]
struct SosReport {
    level: usize,
    c_claimed: f64,
    verified_bound: f64,
    residual: f64,
    psd_margin: f64,
    accepted: bool,
}

fn bound(args: BoundArgs, threads: usize) -> Result<Outcome, Error> {
    let input = read_input(&args.input)?;
    let rq = realify_system(&input.system)?;
    if let Some(path) = &args.sos_export {
        export_problem(&assemble(&rq, args.level)?, path)?;
        eprintln!("wrote level-{} SOS problem to {}", args.level, path.display());
    }
    if let Some(path) = &args.sos_cert {
        let mut cert = SosCertificate::read(path)?;
        let v = verify_certificate(&rq, &mut cert)?;
        let report = SosReport {
            level: v.level,
            c_claimed: v.c_claimed,
            verified_bound: v.verified_bound,
            residual: v.residual,
            psd_margin: v.psd_margin,
            accepted: v.accepted(),
        };
        emit(args.output.as_deref(), &pretty(&report))?;
        let met = args.target.is_none_or(|t| v.verified_bound >= t);
        return Ok(if v.accepted() && met { Outcome::Ok } else { Outcome::Failed });
    }
    let opts = BoundOptions { target: args.target, max_boxes: args.max_boxes, threads, ..BoundOptions::default() };
    let b = min_on_sphere(&rq, &opts);
    emit(args.output.as_deref(), &pretty(&b))?;
    eprintln!("q_lower = {} (c = {}) after {} boxes", b.q_lower, b.c, b.effort);
    Ok(if b.target_missed || b.q_lower <= 0.0 { Outcome::Failed } else { Outcome::Ok })
}

fn check(args: CheckArgs) -> Result<Outcome, Error> {
    let input = read_input(&args.input)?;
    let cert = read_certificate(&args.cert)?;
    if let Err(r) = verify_cluster_certificate(&input.system, &cert) {
        eprintln!("rejected: {r}");
        return Ok(Outcome::Failed);
    }
    println!("certificate verified: {} zeros in the region", cert.multiplicity);
    if args.with_oracle {
        if input.system.n() > 3 {
            return Err(Error::Unsupported("the Newton oracle handles n <= 3".into()));
        }
        let zeros = oracle_solve(&input.system, &cert.region(), args.grid);
        for z in &zeros {
            let coords: Vec<String> = z.point.iter().map(|c| format!("{:e}{:+e}i", c.re, c.im)).collect();
            println!("zero ({}) corank {} residual {:e}", coords.join(", "), z.corank, z.residual);
        }
        if !oracle_consistent(&zeros, cert.multiplicity) {
            eprintln!("oracle found {} zeros, expected {}", zeros.len(), cert.multiplicity);
            return Ok(Outcome::Failed);
        }
        println!("oracle agrees");
    }
    Ok(Outcome::Ok)
}

fn region(args: RegionArgs) -> Result<Outcome, Error> {
    let cert = read_certificate(&args.cert)?;
    let ball = cert.region();
    let mut csv = String::new();
    if ball.n() == 2 {
        csv.push_str("x,y\n");
        for p in ball.region_boundary(args.count)? {
            csv.push_str(&format!("{},{}\n", p[0].re, p[1].re));
        }
    } else {
        let cols: Vec<String> = (1..=ball.n()).map(|k| format!("x{k}")).collect();
        csv.push_str(&format!("i,j,{}\n", cols.join(",")));
        for ((i, j), pts) in ball.axis_profiles(args.count) {
            for p in pts {
                let vals: Vec<String> = p.iter().map(|z| z.re.to_string()).collect();
                csv.push_str(&format!("{i},{j},{}\n", vals.join(",")));
            }
        }
    }
    emit(args.output.as_deref(), &csv)?;
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    // clap's own usage-error code is 2, which is reserved here for sound failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli.threads.max(1);
    let result = match cli.command {
        Command::Certify(a) => certify(a, threads),
        Command::Bound(a) => bound(a, threads),
        Command::Check(a) => check(a),
        Command::Region(a) => region(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
