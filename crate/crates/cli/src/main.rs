//! Command-line driver: builds fields, runs the transform stages and prints JSON.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use nahm::cohomology::{euler_characteristic, fm_transform_coh, ChernNumbers, Space};
use nahm::config::{InputSpec, RunConfig, THREADS_ENV};
use nahm::dolbeault::{classify_it1, zero_mode_frame};
use nahm::k3::{check_conditions, moduli_dimension, K3Class, MukaiVector};
use nahm::oracle::{frame_overlap, landau_zero_modes, predict, DEFAULT_TRUNCATION};
use nahm::pipeline::{exit_code_for, run_pipeline_with_threads, ExperimentReport, EXIT_CODE_TABLE, EXIT_NOT_IT1, EXIT_OK};
use nahm::transform::{transform_with_report, BerryBundle};
use nahm::Error;

#[derive(Parser)]
#[command(name = "nahm", version, about = "Lattice Nahm transform of instantons on the flat four-torus", after_help = EXIT_CODE_TABLE)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Eigensolver seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the environment and the configuration.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory for reports, tables and binary fields.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Quick input selection when no configuration file is given.
#[derive(Args, Clone)]
struct Quick {
    /// Constant flux `k` through the 12 and 34 planes (rank one).
    #[arg(long, allow_negative_numbers = true)]
    flux: Option<i64>,
    /// Lattice sites per direction.
    #[arg(long)]
    lattice: Option<usize>,
    /// Dual grid points per direction.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the input field and print its invariants.
    Field(Quick),
    /// Run the IT1 test on the dual grid.
    Index(Quick),
    /// Build the transformed bundle.
    Transform(Quick),
    /// Check that the transformed curvature is anti-self-dual.
    VerifyAsd(Quick),
    /// Transform twice and compare with the input.
    Invert(Quick),
    /// Test the transformed bundle for irreducibility.
    Irred(Quick),
    /// Cohomological transform of integer Chern data.
    Coh {
        #[arg(long, default_value_t = 1)]
        rank: i64,
        /// `c1` coefficients on e12, e13, e14, e23, e24, e34, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 6, allow_negative_numbers = true, default_value = "0,0,0,0,0,0")]
        c1: Vec<i64>,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        ch2: i64,
        /// Shorthand for rank 1, `c1 = k (e12 - e34)`, `ch2 = -k^2`.
        #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["rank", "c1", "ch2"])]
        flux: Option<i64>,
    },
    /// K3 lattice arithmetic.
    K3 {
        /// Polarisation `H`, 22 comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        h: Option<Vec<i64>>,
        /// Class `l`, 22 comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        l: Vec<i64>,
        #[arg(long, default_value_t = 2)]
        rank: i64,
        /// Second Chern class for the moduli dimension.
        #[arg(long, allow_negative_numbers = true)]
        c2: Option<i64>,
    },
    /// Closed-form predictions for constant flux, optionally compared with the lattice.
    Oracle {
        #[arg(long, allow_negative_numbers = true)]
        flux: i64,
        /// Compare with the lattice zero modes at `xi = 0` on this many sites.
        #[arg(long)]
        lattice: Option<usize>,
    },
    /// Run every stage enabled in the configuration and write the report.
    Report(Quick),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn print(v: &Value) -> nahm::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_config(cli: &Cli, quick: &Quick) -> nahm::Result<RunConfig> {
    let mut cfg = match (&cli.config, quick.flux) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(k)) => RunConfig::new(InputSpec::ConstantFlux { k }, 8, 6),
        (None, None) => return Err(Error::Config("give --config or --flux".into())),
    };
    if let Some(n) = quick.lattice {
        cfg.lattice = n;
    }
    if let Some(m) = quick.grid {
        cfg.grid = m;
    }
    if let (Some(_), Some(k)) = (&cli.config, quick.flux) {
        cfg.input = InputSpec::ConstantFlux { k };
    }
    if let Some(seed) = cli.seed {
        cfg.spectral.solver.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Option<&Path> {
    cfg.output.as_deref()
}

/// Runs the pipeline with only the stages of one subcommand and writes its outputs.
fn staged(cli: &Cli, quick: &Quick, select: impl FnOnce(&mut RunConfig)) -> nahm::Result<i32> {
    let mut cfg = load_config(cli, quick)?;
    select(&mut cfg);
    let report = run_pipeline_with_threads(&cfg, cli.threads);
    finish(&report)
}

fn finish(report: &ExperimentReport) -> nahm::Result<i32> {
    if let Some(dir) = out_dir(&report.config) {
        for p in report.write_outputs(dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    let summary = json!({
        "exit_code": report.exit_code,
        "rank": report.it1.as_ref().and_then(|r| r.rank),
        "failures": report.it1.as_ref().map(|r| r.failures.len()),
        "transform": report.transform,
        "prediction": report.prediction,
        "double_transform": report.double_transform,
        "twist_memory": report.twist_memory,
        "irreducibility": report.irreducibility,
        "checks": report.checks,
        "errors": report.errors,
    });
    print(&summary)?;
    Ok(report.exit_code)
}

/// Thread count with CLI and environment ahead of the configuration.
fn thread_count(cli: &Cli, cfg: &RunConfig) -> nahm::Result<Option<usize>> {
    match cli.threads.or(cfg.threads) {
        Some(0) => Err(Error::Config("threads must be at least 1".into())),
        t => Ok(t),
    }
}

fn run(cli: &Cli) -> nahm::Result<i32> {
    match &cli.command {
        Command::Field(q) => {
            let cfg = load_config(cli, q)?;
            let f = cfg.build_field()?;
            if let Some(dir) = out_dir(&cfg) {
                std::fs::create_dir_all(dir)?;
                f.save(&dir.join("field.bin"))?;
            }
            let tol = cfg.tolerances.rounding;
            print(&json!({
                "side": f.side(),
                "rank": f.rank(),
                "unitarity_defect": f.max_unitarity_defect(),
                "asd_residual": f.asd_residual()?,
                "chern": f.chern_numbers(tol)?,
            }))?;
            Ok(EXIT_OK)
        }
        Command::Index(q) => {
            let cfg = load_config(cli, q)?;
            let f = cfg.build_field()?;
            let threads = thread_count(cli, &cfg)?;
            let report = with_threads(threads, || classify_it1(&f, cfg.grid, &cfg.spectral))??;
            if let Some(dir) = out_dir(&cfg) {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("it1.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            print(&json!({
                "is_it1": report.is_it1,
                "rank": report.rank,
                "tau_ker": report.tau_ker,
                "rho_gap": report.rho_gap,
                "min_gap_ratio": report.min_gap_ratio,
                "failures": report.failures,
            }))?;
            Ok(if report.is_it1 && report.rank.unwrap_or(0) > 0 { EXIT_OK } else { EXIT_NOT_IT1 })
        }
        Command::Transform(q) => {
            let cfg = load_config(cli, q)?;
            let f = cfg.build_field()?;
            let threads = thread_count(cli, &cfg)?;
            let (b, report): (BerryBundle, _) = with_threads(threads, || transform_with_report(&f, cfg.grid, &cfg.spectral))??;
            if let Some(dir) = out_dir(&cfg) {
                std::fs::create_dir_all(dir)?;
                b.save(&dir.join("bundle.bin"))?;
            }
            print(&json!({
                "grid": b.grid(),
                "rank": b.rank(),
                "min_overlap": b.min_overlap,
                "tau_ker": report.tau_ker,
                "min_gap_ratio": report.min_gap_ratio,
            }))?;
            Ok(EXIT_OK)
        }
        Command::VerifyAsd(q) => staged(cli, q, |c| {
            c.checks.asd = true;
            c.checks.invariants = false;
            c.checks.invert = false;
            c.checks.irreducibility = false;
            c.checks.twist_memory = None;
        }),
        Command::Invert(q) => staged(cli, q, |c| {
            c.checks.asd = false;
            c.checks.invariants = true;
            c.checks.invert = true;
            c.checks.irreducibility = false;
        }),
        Command::Irred(q) => staged(cli, q, |c| {
            c.checks.asd = false;
            c.checks.invariants = false;
            c.checks.invert = false;
            c.checks.irreducibility = true;
            c.checks.twist_memory = None;
        }),
        Command::Report(q) => staged(cli, q, |_| {}),
        Command::Coh { rank, c1, ch2, flux } => {
            let ch = match flux {
                Some(k) => ChernNumbers::constant_flux(*k),
                None => ChernNumbers::new(*rank, [c1[0], c1[1], c1[2], c1[3], c1[4], c1[5]], *ch2),
            };
            let class = ch.to_class(Space::X)?;
            let image = fm_transform_coh(&class)?;
            print(&json!({
                "input": ch,
                "euler_characteristic": euler_characteristic(&class)?,
                "transform": ChernNumbers::from_class(&image)?,
                "transform_class": image.to_string(),
            }))?;
            Ok(EXIT_OK)
        }
        Command::K3 { h, l, rank, c2 } => {
            let l = K3Class::from_slice(l)?;
            let mut out = serde_json::Map::new();
            out.insert("l_square".into(), json!(l.square()));
            if let Some(h) = h {
                let h = K3Class::from_slice(h)?;
                out.insert("conditions".into(), serde_json::to_value(check_conditions(&h, &l))?);
            }
            if let Some(c2) = c2 {
                let v = MukaiVector::from_chern(*rank, l, *c2);
                out.insert("mukai_vector".into(), serde_json::to_value(v)?);
                out.insert("moduli_dimension".into(), json!(moduli_dimension(&v)));
            }
            print(&Value::Object(out))?;
            Ok(EXIT_OK)
        }
        Command::Oracle { flux, lattice } => {
            let p = predict(*flux)?;
            let mut out = serde_json::to_value(&p)?;
            if let Some(n) = lattice {
                let cfg = RunConfig::new(InputSpec::ConstantFlux { k: *flux }, *n, 2);
                let f = cfg.input.build(*n)?;
                let exact = landau_zero_modes(*flux, [0.0; 4], *n, DEFAULT_TRUNCATION)?;
                let numeric = zero_mode_frame(&f, [0.0; 4], p.r, &cfg.spectral)?;
                out["lattice"] = json!({ "side": n, "frame_overlap": frame_overlap(&exact, &numeric.matrix)? });
            }
            print(&out)?;
            Ok(EXIT_OK)
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> nahm::Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
