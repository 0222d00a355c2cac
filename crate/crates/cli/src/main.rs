//! Command-line front end: reproducible experiments over the width
//! table, the length-spectrum count, the sweepout mass scans, and the
//! ellipsoid calibration, emitted as self-describing JSON or CSV.
//!
//! Exit codes: 0 all checks pass, 1 a mathematical bound or numerical
//! run failed, 2 usage or configuration error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use pwidths::combinatorics::{self, WidthIndex};
use pwidths::curves;
use pwidths::ellipsoid;
use pwidths::integral_geometry::{self as ig, CircleSampling};
use pwidths::poly::{self, SpherePoly};

const EXIT_MATH: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "pwidths", version, about = "Width spectrum laboratory for the projective plane")]
struct Cli {
    /// Output format for the report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to a file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Width table: spectrum index and width for p = 1..=p_max, with
    /// the interval and closed-form definitions cross-checked per row.
    Widths {
        #[arg(long)]
        p_max: u64,
    },
    /// Enumerate the truncated length spectrum against the closed-form
    /// count for d = 0..=d_max (mu = 1/(4(d+1)) per row).
    CountR {
        #[arg(long)]
        d_max: u64,
    },
    /// Scan the sweep-coefficient sphere for the supremum of the
    /// projective mass; fails if the bound 2 pi d + 0.05 is exceeded.
    SweepScan {
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 1000)]
        n_params: u64,
        /// Circle samples per mass estimate.
        #[arg(long, default_value_t = 2000)]
        n_samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Tighten the supremum by coordinate ascent from the best sample.
        #[arg(long)]
        refine: bool,
    },
    /// Calibrate the ellipsoid so the axial geodesics have lengths
    /// (2pi, 2pi + 2mu, 2pi + 4mu).
    Calibrate {
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Estimate the length of a polynomial zero set on the sphere by
    /// sampling great-circle intersections.
    Crofton {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long, default_value_t = 10_000)]
        n_samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Deterministic Fibonacci-lattice circles instead of random ones.
        #[arg(long)]
        lattice: bool,
    },
    /// Trace the zero set explicitly on a geodesic grid and measure its
    /// arc length.
    Trace {
        #[command(flatten)]
        poly: PolyArgs,
        /// Icosahedral subdivision level (20 * 4^resolution triangles).
        #[arg(long, default_value_t = 6)]
        resolution: u32,
    },
    /// Sample intersection counts over random members and circles and
    /// audit the degree bound 4d; any violation fails the run.
    BezoutAudit {
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 100)]
        n_polys: u64,
        #[arg(long, default_value_t = 100)]
        n_circles: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Keep one row per (member, circle) pair in the report.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Emit the fixed monomial ordering of the invariant basis.
    Basis {
        #[arg(long)]
        d: u32,
    },
}

/// Curve selection shared by `crofton` and `trace`: either a member of
/// the invariant family (coefficients in the fixed basis ordering) or
/// one of the closed-form validation curves.
#[derive(Args)]
struct PolyArgs {
    /// Degree parameter for --coeffs.
    #[arg(long)]
    d: Option<u32>,
    /// JSON array of coefficients in the basis ordering (see `basis`).
    #[arg(long, requires = "d")]
    coeffs: Option<String>,
    /// Validation curve: the equator great circle (z = 0).
    #[arg(long)]
    equator: bool,
    /// Validation curve: latitude circle at this colatitude.
    #[arg(long)]
    latitude: Option<f64>,
}

enum Curve {
    Sweep(pwidths::SweepPolynomialF64),
    Test(pwidths::TestPolynomialF64),
}

impl Curve {
    fn as_dyn(&self) -> &dyn SpherePoly<f64> {
        match self {
            Curve::Sweep(p) => p,
            Curve::Test(p) => p,
        }
    }
}

struct Failure {
    exit: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { exit: EXIT_USAGE, message: message.into() }
    }

    fn math(message: impl Into<String>) -> Self {
        Self { exit: EXIT_MATH, message: message.into() }
    }
}

impl PolyArgs {
    fn build(&self) -> Result<(Curve, serde_json::Value), Failure> {
        match (self.equator, self.latitude, &self.coeffs, self.d) {
            (true, None, None, None) => Ok((
                Curve::Test(pwidths::TestPolynomialF64::equator()),
                json!({"curve": "equator"}),
            )),
            (false, Some(colat), None, None) => Ok((
                Curve::Test(pwidths::TestPolynomialF64::latitude(colat)),
                json!({"curve": "latitude", "colatitude": colat}),
            )),
            (false, None, Some(raw), Some(d)) => {
                let coeffs: Vec<f64> = serde_json::from_str(raw)
                    .map_err(|e| Failure::usage(format!("--coeffs is not a JSON array: {e}")))?;
                let p = pwidths::SweepPolynomialF64::new(d, coeffs.clone())
                    .map_err(|e| Failure::usage(e.to_string()))?;
                Ok((Curve::Sweep(p), json!({"curve": "sweep", "d": d, "coeffs": coeffs})))
            }
            _ => Err(Failure::usage(
                "select exactly one of --equator, --latitude <colat>, or --d <d> --coeffs <json>",
            )),
        }
    }
}

/// Everything needed to reproduce a run, embedded in every report.
#[derive(Serialize)]
struct RunConfig {
    command: &'static str,
    params: serde_json::Value,
    seed: Option<u64>,
    format: &'static str,
    out: Option<String>,
    version: String,
}

fn run_config(
    command: &'static str,
    params: serde_json::Value,
    seed: Option<u64>,
    cli_format: Format,
    out: &Option<PathBuf>,
) -> RunConfig {
    RunConfig {
        command,
        params,
        seed,
        format: cli_format.name(),
        out: out.as_ref().map(|p| p.display().to_string()),
        version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    config: RunConfig,
    report: T,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(rendered) => {
            if let Err(e) = emit(&cli.out, &rendered) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.exit)
        }
    }
}

fn emit(out: &Option<PathBuf>, rendered: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, rendered),
        None => std::io::stdout().write_all(rendered.as_bytes()),
    }
}

fn render<T: Serialize>(format: Format, report: &Report<T>, csv: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let config = serde_json::to_string(&report.config).expect("config serializes");
            format!("# {config}\n{}", csv())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Widths { p_max } => cmd_widths(cli, *p_max),
        Command::CountR { d_max } => cmd_count_r(cli, *d_max),
        Command::SweepScan { d, n_params, n_samples, seed, refine } => {
            cmd_sweep_scan(cli, *d, *n_params, *n_samples, *seed, *refine)
        }
        Command::Calibrate { mu, tol } => cmd_calibrate(cli, *mu, *tol),
        Command::Crofton { poly, n_samples, seed, lattice } => {
            cmd_crofton(cli, poly, *n_samples, *seed, *lattice)
        }
        Command::Trace { poly, resolution } => cmd_trace(cli, poly, *resolution),
        Command::BezoutAudit { d, n_polys, n_circles, seed, dump_samples } => {
            cmd_bezout_audit(cli, *d, *n_polys, *n_circles, *seed, *dump_samples)
        }
        Command::Basis { d } => cmd_basis(cli, *d),
    }
}

#[derive(Serialize)]
struct WidthRow {
    p: u64,
    d: u64,
    f_p: u64,
    omega_p: f64,
}

fn cmd_widths(cli: &Cli, p_max: u64) -> Result<String, Failure> {
    if p_max < 1 {
        return Err(Failure::usage("--p-max must be at least 1"));
    }
    let mut rows = Vec::with_capacity(p_max as usize);
    for p in 1..=p_max {
        let idx = WidthIndex::new(p).expect("p >= 1");
        let by_interval = combinatorics::f_interval(idx);
        let by_closed_form = combinatorics::f_closed(idx);
        if by_interval != by_closed_form {
            return Err(Failure::math(format!(
                "interval and closed-form spectrum indices disagree at p = {p}: {by_interval} vs {by_closed_form}"
            )));
        }
        rows.push(WidthRow {
            p,
            d: by_closed_form - 1,
            f_p: by_closed_form,
            omega_p: combinatorics::omega_std(idx),
        });
    }
    let report = Report {
        config: run_config("widths", json!({"p_max": p_max}), None, cli.format, &cli.out),
        report: rows,
    };
    Ok(render(cli.format, &report, || {
        let mut s = String::from("p,d,f_p,omega_p\n");
        for r in &report.report {
            let _ = writeln!(s, "{},{},{},{}", r.p, r.d, r.f_p, r.omega_p);
        }
        s
    }))
}

#[derive(Serialize)]
struct CountRow {
    d: u64,
    mu: f64,
    enumerated: u64,
    formula: u64,
    ok: bool,
}

fn cmd_count_r(cli: &Cli, d_max: u64) -> Result<String, Failure> {
    let mut rows = Vec::with_capacity(d_max as usize + 1);
    let mut all_ok = true;
    for d in 0..=d_max {
        let mu = 1.0 / (4.0 * (d + 1) as f64);
        let enumerated = combinatorics::enumerate_r::<f64>(d, mu)
            .map_err(|e| Failure::math(e.to_string()))?
            .len() as u64;
        let formula = combinatorics::card_r_formula(d);
        let ok = enumerated == formula;
        all_ok &= ok;
        rows.push(CountRow { d, mu, enumerated, formula, ok });
    }
    let report = Report {
        config: run_config("count-r", json!({"d_max": d_max}), None, cli.format, &cli.out),
        report: rows,
    };
    let rendered = render(cli.format, &report, || {
        let mut s = String::from("d,mu,enumerated,formula,ok\n");
        for r in &report.report {
            let _ = writeln!(s, "{},{},{},{},{}", r.d, r.mu, r.enumerated, r.formula, r.ok);
        }
        s
    });
    if all_ok {
        Ok(rendered)
    } else {
        emit(&cli.out, &rendered).map_err(|e| Failure::usage(e.to_string()))?;
        Err(Failure::math("enumerated spectrum count disagrees with the closed form"))
    }
}

fn cmd_sweep_scan(
    cli: &Cli,
    d: u32,
    n_params: u64,
    n_samples: u64,
    seed: u64,
    refine: bool,
) -> Result<String, Failure> {
    if d < 1 {
        return Err(Failure::usage("--d must be at least 1"));
    }
    if n_params < 1 || n_samples < 1 {
        return Err(Failure::usage("--n-params and --n-samples must be positive"));
    }
    let scan = ig::sup_mass_scan::<f64>(d, n_params, n_samples, seed, refine)
        .map_err(|e| Failure::math(e.to_string()))?;
    let params = json!({
        "d": d, "n_params": n_params, "n_samples": n_samples, "refine": refine,
    });
    let over_bound = scan.max_mass > scan.bound + 0.05;
    let report = Report {
        config: run_config("sweep-scan", params, Some(seed), cli.format, &cli.out),
        report: scan,
    };
    let rendered = render(cli.format, &report, || {
        let r = &report.report;
        let mut s = String::from(
            "d,n_params,n_samples_per,seed,refined,sampled_max_mass,max_mass,bound,degenerate_redraws\n",
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.d,
            r.n_params,
            r.n_samples_per,
            r.seed,
            r.refined,
            r.sampled_max_mass,
            r.max_mass,
            r.bound,
            r.degenerate_redraws
        );
        s
    });
    if over_bound {
        emit(&cli.out, &rendered).map_err(|e| Failure::usage(e.to_string()))?;
        return Err(Failure::math(format!(
            "max mass {} exceeds the bound {} + 0.05",
            report.report.max_mass, report.report.bound
        )));
    }
    Ok(rendered)
}

#[derive(Serialize)]
struct CalibrateBody {
    a: [f64; 3],
    lengths: [f64; 3],
    rp2_lengths: [f64; 3],
    residual: f64,
    iterations: u32,
}

fn cmd_calibrate(cli: &Cli, mu: f64, tol: f64) -> Result<String, Failure> {
    let cal = ellipsoid::calibrate::<f64>(mu, tol).map_err(|e| match e {
        ellipsoid::CalibrateError::MuOutOfRange | ellipsoid::CalibrateError::TolTooSmall => {
            Failure::usage(e.to_string())
        }
        _ => Failure::math(e.to_string()),
    })?;
    let body = CalibrateBody {
        a: cal.params.as_array(),
        lengths: cal.lengths.lengths,
        rp2_lengths: cal.lengths.rp2_lengths,
        residual: cal.residual,
        iterations: cal.iterations,
    };
    let report = Report {
        config: run_config("calibrate", json!({"mu": mu, "tol": tol}), None, cli.format, &cli.out),
        report: body,
    };
    Ok(render(cli.format, &report, || {
        let r = &report.report;
        let mut s = String::from(
            "mu,a1,a2,a3,l1,l2,l3,rp2_l1,rp2_l2,rp2_l3,residual,iterations\n",
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            mu,
            r.a[0],
            r.a[1],
            r.a[2],
            r.lengths[0],
            r.lengths[1],
            r.lengths[2],
            r.rp2_lengths[0],
            r.rp2_lengths[1],
            r.rp2_lengths[2],
            r.residual,
            r.iterations
        );
        s
    }))
}

#[derive(Serialize)]
struct CroftonBody {
    estimate: pwidths::CroftonEstimateF64,
    /// Projective mass (half the sphere length); only for members of
    /// the invariant family.
    #[serde(skip_serializing_if = "Option::is_none")]
    rp2_mass: Option<f64>,
}

fn cmd_crofton(
    cli: &Cli,
    poly_args: &PolyArgs,
    n_samples: u64,
    seed: u64,
    lattice: bool,
) -> Result<String, Failure> {
    let (curve, curve_params) = poly_args.build()?;
    let sampling = if lattice { CircleSampling::FibonacciLattice } else { CircleSampling::MonteCarlo };
    let estimate = ig::crofton_length_sphere_sampled(curve.as_dyn(), n_samples, seed, sampling)
        .map_err(|e| Failure::math(e.to_string()))?;
    let rp2_mass = match &curve {
        Curve::Sweep(_) => Some(estimate.length_estimate / 2.0),
        Curve::Test(_) => None,
    };
    let params = json!({
        "poly": curve_params, "n_samples": n_samples, "lattice": lattice,
    });
    let report = Report {
        config: run_config("crofton", params, Some(seed), cli.format, &cli.out),
        report: CroftonBody { estimate, rp2_mass },
    };
    Ok(render(cli.format, &report, || {
        let r = &report.report;
        let mut s = String::from(
            "n_samples,seed,mean_count,degenerate_redraws,length_sphere,standard_error,rp2_mass\n",
        );
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.estimate.n_samples,
            seed,
            r.estimate.mean_count,
            r.estimate.degenerate_redraws,
            r.estimate.length_estimate,
            r.estimate.standard_error,
            r.rp2_mass.map_or(String::new(), |m| m.to_string())
        );
        s
    }))
}

#[derive(Serialize)]
struct TraceBody {
    curve: pwidths::TracedCurveF64,
    /// Present when the antipodal pairing is total.
    #[serde(skip_serializing_if = "Option::is_none")]
    rp2_mass: Option<f64>,
}

fn cmd_trace(cli: &Cli, poly_args: &PolyArgs, resolution: u32) -> Result<String, Failure> {
    let (curve, curve_params) = poly_args.build()?;
    let traced = curves::trace_level_set(curve.as_dyn(), resolution)
        .map_err(|e| Failure::math(e.to_string()))?;
    let rp2_mass = curves::rp2_mass_from_trace(&traced).ok();
    let params = json!({"poly": curve_params, "resolution": resolution});
    let report = Report {
        config: run_config("trace", params, None, cli.format, &cli.out),
        report: TraceBody { curve: traced, rp2_mass },
    };
    Ok(render(cli.format, &report, || {
        let r = &report.report;
        let mut s = String::from("component,vertex,x,y,z\n");
        for (ci, comp) in r.curve.components.iter().enumerate() {
            for (vi, v) in comp.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{}", ci, vi, v[0], v[1], v[2]);
            }
        }
        s
    }))
}

fn cmd_bezout_audit(
    cli: &Cli,
    d: u32,
    n_polys: u64,
    n_circles: u64,
    seed: u64,
    dump_samples: bool,
) -> Result<String, Failure> {
    if d < 1 {
        return Err(Failure::usage("--d must be at least 1"));
    }
    let audit = ig::bezout_audit::<f64>(d, n_polys, n_circles, seed, dump_samples)
        .map_err(|e| match e {
            ig::EstimatorError::ZeroCount(_) => Failure::usage(e.to_string()),
            _ => Failure::math(e.to_string()),
        })?;
    let params = json!({
        "d": d, "n_polys": n_polys, "n_circles": n_circles, "dump_samples": dump_samples,
    });
    let violated = !audit.violations.is_empty();
    let report = Report {
        config: run_config("bezout-audit", params, Some(seed), cli.format, &cli.out),
        report: audit,
    };
    let rendered = render(cli.format, &report, || {
        let r = &report.report;
        let mut s = String::new();
        if let Some(samples) = &r.samples {
            s.push_str("poly_index,circle_index,count,redraws\n");
            for row in samples {
                let _ = writeln!(s, "{},{},{},{}", row.poly_index, row.circle_index, row.count, row.redraws);
            }
        } else {
            s.push_str("d,n_polys,n_circles,seed,bound,max_count,violations,degenerate_redraws,skipped\n");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.d,
                r.n_polys,
                r.n_circles,
                r.seed,
                r.bound,
                r.max_count,
                r.violations.len(),
                r.degenerate_redraws,
                r.skipped
            );
        }
        s
    });
    if violated {
        emit(&cli.out, &rendered).map_err(|e| Failure::usage(e.to_string()))?;
        return Err(Failure::math(format!(
            "{} intersection counts exceeded the bound {}",
            report.report.violations.len(),
            report.report.bound
        )));
    }
    Ok(rendered)
}

fn cmd_basis(cli: &Cli, d: u32) -> Result<String, Failure> {
    let basis = poly::build_basis(d).map_err(|e| Failure::usage(e.to_string()))?;
    let report = Report {
        config: run_config("basis", json!({"d": d}), None, cli.format, &cli.out),
        report: basis,
    };
    Ok(render(cli.format, &report, || {
        let b = &report.report;
        let mut s = String::from("part,slot,x_exp,y_exp\n");
        for (k, (i, j)) in b.even().iter().enumerate() {
            let _ = writeln!(s, "even,{},{},{}", k + 1, i, j);
        }
        for (k, (i, j)) in b.odd().iter().enumerate() {
            let _ = writeln!(s, "odd,{},{},{}", b.even().len() + k + 1, i, j);
        }
        s
    }))
}
