mod config;
mod manifest;

use bdf_vacuum::certificate::{self, Certificate};
use bdf_vacuum::lattice::{c_norm, source_density};
use bdf_vacuum::response::{b_lambda_1d, b_lambda_3d};
use bdf_vacuum::scf::{certificate_for, Solver, SolverReport, SolverState};
use bdf_vacuum::{build_lattice, snapshot, BdfError, LatticeSpec};
use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use manifest::ManifestBuilder;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bdf", version, about = "Polarized Dirac vacuum on a momentum lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the self-consistent vacuum solver
    Solve(SolveArgs),
    /// Tabulate the vacuum response function B_Λ(|k|)
    Response(ResponseArgs),
    /// Evaluate the analytic constants and, optionally, a certificate
    Constants(ConstantsArgs),
    /// Run the randomized inequality suite
    Validate(ValidateArgs),
    /// Describe the lattice of a config or of explicit parameters
    LatticeInfo(LatticeArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exit 1 before solving unless the existence certificate passes
    #[arg(long)]
    require_certificate: bool,
    /// Write the state here after every iteration
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Start from a saved state instead of (0, -n)
    #[arg(long)]
    restart: Option<PathBuf>,
    /// Optimality samples drawn during verification
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ResponseArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    kmax: f64,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    kappa_orders: usize,
    #[arg(long, conflicts_with = "config", requires = "n_norm")]
    alpha: Option<f64>,
    /// Weak-field parameter; defaults to 2√π α ‖n‖_C
    #[arg(long, requires = "alpha")]
    b: Option<f64>,
    /// ‖n‖_C of the source
    #[arg(long, requires = "alpha")]
    n_norm: Option<f64>,
    /// Take α and the source from a run config (Λ still comes from --lambda)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random lattice kernels for the exchange bound
    #[arg(long, default_value_t = 1000)]
    kernels: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long, conflicts_with_all = ["points", "spacing", "lambda"])]
    config: Option<PathBuf>,
    #[arg(long, requires_all = ["spacing", "lambda"])]
    points: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    /// bad input: exit 2
    Usage(String),
    /// the computation itself failed or did not certify: exit 1
    Domain(String),
}

impl From<BdfError> for Failure {
    fn from(e: BdfError) -> Self {
        match e {
            BdfError::InvalidLattice(_) | BdfError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Domain(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Domain(format!("json: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Response(a) => response(a),
        Command::Constants(a) => constants(a),
        Command::Validate(a) => validate(a),
        Command::LatticeInfo(a) => lattice_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))
}

// ---------------------------------------------------------------------------
// solve

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    x_increment: f64,
    energy_total: f64,
    energy_kinetic: f64,
    energy_direct: f64,
    energy_exchange: f64,
    charge: f64,
    min_abs_eig: f64,
}

fn load_restart(path: &Path, solver: &Solver) -> CliResult<SolverState> {
    let (q, rho) = snapshot::load(path).map_err(|e| Failure::Usage(format!("restart {}: {e}", path.display())))?;
    if q.lattice().spec() != solver.lattice().spec() {
        return Err(Failure::Usage(format!("restart {} was saved on a different lattice", path.display())));
    }
    Ok(SolverState::new(q, rho)?)
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let run = RunConfig::load(&args.config).map_err(Failure::Usage)?;
    let config = run.solver_config();
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    prepare_out(&args.out)?;
    let mut manifest = ManifestBuilder::new("solve", serde_json::to_value(&run)?);
    manifest.input(&args.config);

    let solver = Solver::new(config.clone())?;
    let pre = certificate_for(&config, c_norm(solver.source()));
    if args.require_certificate {
        match &pre {
            Ok(c) if c.pass => {}
            Ok(_) => return Err(Failure::Domain("certificate conditions fail for this config".into())),
            Err(e) => return Err(Failure::Domain(format!("no certificate: {e}"))),
        }
    }

    let initial = match &args.restart {
        Some(p) => {
            manifest.input(p);
            load_restart(p, &solver)?
        }
        None => solver.initial_state(),
    };
    let checkpoint = args.checkpoint.clone();
    let mut report = solver.run_with(initial, |_, state| match &checkpoint {
        Some(p) => snapshot::save(p, &state.q, &state.rho_prime),
        None => Ok(()),
    })?;
    if let Some(p) = &args.checkpoint {
        snapshot::save(p, &report.q, &report.rho_prime)?;
        manifest.output(p);
    }
    if report.converged {
        report.verification = Some(solver.verify(&report, args.samples, run.seed)?);
    }

    let trace_path = args.out.join("trace.csv");
    let mut w = csv::Writer::from_path(&trace_path)?;
    for r in &report.records {
        w.serialize(TraceRow {
            iter: r.iter,
            x_increment: r.x_increment,
            energy_total: r.energy.total,
            energy_kinetic: r.energy.kinetic,
            energy_direct: r.energy.direct(),
            energy_exchange: r.energy.exchange,
            charge: r.charge,
            min_abs_eig: r.min_abs_eig,
        })?;
    }
    w.flush()?;
    manifest.output(&trace_path);
    let report_path = args.out.join("report.json");
    write_json(&report_path, &report)?;
    manifest.output(&report_path);
    manifest.finish(&args.out)?;

    if !args.quiet {
        print_solve_summary(&report);
    }
    if !report.converged {
        return Err(Failure::Domain(format!("solver stopped: {:?}", report.verdict)));
    }
    match &report.verification {
        Some(v) if !v.pass => Err(Failure::Domain("post-solution verification failed".into())),
        _ => Ok(()),
    }
}

fn print_solve_summary(r: &SolverReport) {
    println!("verdict      {:?} after {} iterations", r.verdict, r.records.len());
    if let Some(rate) = r.rate {
        println!("rate         {rate:.4}");
    }
    println!("energy       {:.12e}", r.energy.total);
    println!("  kinetic    {:.12e}", r.energy.kinetic);
    println!("  direct     {:.12e}", r.energy.direct());
    println!("  exchange   {:.12e}", r.energy.exchange);
    println!("charge       {} (integral: {})", r.charge.integer, r.charge.integral);
    match &r.certificate {
        Some(c) => println!("certificate  {}", if c.pass { "pass" } else { "fail" }),
        None => println!("certificate  not applicable at this cutoff"),
    }
    if let Some(v) = &r.verification {
        println!("commutator   {:.3e}", v.commutator);
        println!("verification {}", if v.pass { "pass" } else { "fail" });
    }
}

// ---------------------------------------------------------------------------
// response

#[derive(Serialize)]
struct ResponseRow {
    k_abs: f64,
    lambda: f64,
    #[serde(rename = "B_1d")]
    b_1d: f64,
    #[serde(rename = "B_3d")]
    b_3d: f64,
    rel_diff: f64,
}

fn response(args: ResponseArgs) -> CliResult<()> {
    if args.points == 0 || !(args.kmax > 0.0) || !args.kmax.is_finite() {
        return Err(Failure::Usage("--points must be positive and --kmax finite and positive".into()));
    }
    prepare_out(&args.out)?;
    let cfg = serde_json::json!({ "lambda": args.lambda, "kmax": args.kmax, "points": args.points });
    let mut manifest = ManifestBuilder::new("response", cfg);
    let path = args.out.join("response.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for i in 1..=args.points {
        let k = args.kmax * i as f64 / args.points as f64;
        let b_1d = b_lambda_1d(k, args.lambda)?;
        let b_3d = b_lambda_3d([0.0, 0.0, k], args.lambda)?;
        let rel_diff = (b_3d - b_1d).abs() / b_1d.abs();
        if !args.quiet {
            println!("|k| = {k:10.6}  B_1d = {b_1d:.12e}  B_3d = {b_3d:.12e}  rel = {rel_diff:.2e}");
        }
        w.serialize(ResponseRow { k_abs: k, lambda: args.lambda, b_1d, b_3d, rel_diff })?;
    }
    w.flush()?;
    manifest.output(&path);
    manifest.finish(&args.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// constants

#[derive(Serialize)]
struct ConstantsOutput {
    table: certificate::ConstantsTable,
    certificate: Option<Certificate>,
}

fn constants(args: ConstantsArgs) -> CliResult<()> {
    prepare_out(&args.out)?;
    let mut cfg = serde_json::json!({ "lambda": args.lambda, "kappa_orders": args.kappa_orders });
    let mut inputs = Vec::new();
    let cert_inputs = if let Some(path) = &args.config {
        let run = RunConfig::load(path).map_err(Failure::Usage)?;
        let sc = run.solver_config();
        sc.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        let lat = build_lattice(sc.lattice)?;
        let n = c_norm(&source_density(&lat, &sc.source)?);
        inputs.push(path.clone());
        cfg["run"] = serde_json::to_value(&run)?;
        Some((run.alpha, n, 2.0 * PI.sqrt() * run.alpha * n))
    } else {
        args.alpha.map(|alpha| {
            let n = args.n_norm.unwrap_or(0.0);
            (alpha, n, args.b.unwrap_or(2.0 * PI.sqrt() * alpha * n))
        })
    };
    let table = certificate::constants_table(args.lambda, args.kappa_orders)?;
    let certificate = cert_inputs
        .map(|(alpha, n, b)| certificate::check_conditions(alpha, args.lambda, n, b))
        .transpose()?;
    let mut manifest = ManifestBuilder::new("constants", cfg);
    for p in &inputs {
        manifest.input(p);
    }
    let path = args.out.join("constants.json");
    let out = ConstantsOutput { table, certificate };
    write_json(&path, &out)?;
    manifest.output(&path);
    manifest.finish(&args.out)?;
    if !args.quiet {
        let t = &out.table;
        println!("Λ = {}", t.lambda);
        println!("C_6 = {:.8}  C_∞ = {:.8}  C_M = {:.6}  C_R = {:.8}", t.c6, t.c_inf, t.c_m, t.c_r.value);
        println!("κ_1 = {:.6}  κ_2 = {:.6}  κ_3 = {:.6}  κ_4 = {:.6}", t.kappa1, t.kappa2, t.kappa3, t.kappa4);
        println!("κ_n ≈ {:.6} √n", t.kappa_sqrt_coefficient);
        if let Some(c) = &out.certificate {
            println!(
                "certificate: α = {}, b = {:.6}, α_b = {:.6e}, R_b = {:.6}: {}",
                c.alpha,
                c.b,
                c.alpha_b,
                c.r_b,
                if c.pass { "pass" } else { "fail" }
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// validate

/// Small lattice on which random kernels test the exchange bound.
const EXCHANGE_LATTICE: LatticeSpec = LatticeSpec { points_per_axis: 4, spacing: 1.0, cutoff: 2.0 };

#[derive(Serialize)]
struct ValidateOutput {
    seed: u64,
    samples: usize,
    checks: Vec<certificate::InequalityCheck>,
    pass: bool,
}

fn validate(args: ValidateArgs) -> CliResult<()> {
    prepare_out(&args.out)?;
    let cfg = serde_json::json!({ "samples": args.samples, "seed": args.seed, "kernels": args.kernels });
    let mut manifest = ManifestBuilder::new("validate", cfg);
    let suite = certificate::inequality_suite(args.samples, args.seed)?;
    let mut checks = suite.checks;
    let lat = build_lattice(EXCHANGE_LATTICE)?;
    checks.push(certificate::exchange_bound_check(&lat, args.kernels, args.seed));
    let pass = checks.iter().all(|c| c.violations == 0);
    let out = ValidateOutput { seed: args.seed, samples: args.samples, checks, pass };
    let path = args.out.join("validate.json");
    write_json(&path, &out)?;
    manifest.output(&path);
    manifest.finish(&args.out)?;
    if !args.quiet {
        for c in &out.checks {
            println!("{:<28} {:>8} samples  {:>4} violations  worst ratio {:.4}", c.name, c.samples, c.violations, c.worst_ratio);
        }
        println!("{}", if pass { "all inequalities hold" } else { "counterexamples found" });
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Domain("inequality suite found counterexamples".into()))
    }
}

// ---------------------------------------------------------------------------
// lattice-info

#[derive(Serialize)]
struct LatticeInfo {
    spec: LatticeSpec,
    num_modes: usize,
    spinor_dimension: usize,
    num_diffs: usize,
    cell_volume: f64,
    max_mode_norm: f64,
}

fn lattice_info(args: LatticeArgs) -> CliResult<()> {
    let spec = match (&args.config, args.points, args.spacing, args.lambda) {
        (Some(p), ..) => RunConfig::load(p).map_err(Failure::Usage)?.solver_config().lattice,
        (None, Some(n), Some(s), Some(l)) => LatticeSpec::new(n, s, l),
        _ => return Err(Failure::Usage("give --config or all of --points, --spacing, --lambda".into())),
    };
    let lat = build_lattice(spec)?;
    let max_mode_norm = lat.modes().iter().map(|p| bdf_vacuum::lattice::norm_sqr(*p).sqrt()).fold(0.0, f64::max);
    let info = LatticeInfo {
        spec,
        num_modes: lat.num_modes(),
        spinor_dimension: lat.dim(),
        num_diffs: lat.num_diffs(),
        cell_volume: lat.cell_volume(),
        max_mode_norm,
    };
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(())
}
