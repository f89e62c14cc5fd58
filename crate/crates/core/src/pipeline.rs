//! Runs a configured experiment end to end and writes its report and CSV tables.
//!
//! Stages: build the input field, classify IT1 on the dual grid, build the Berry
//! bundle, then the enabled checks. The JSON report holds every number a verdict
//! depends on; wall-clock timings are kept apart so that reruns are byte-identical.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cohomology::{euler_characteristic, transform_numbers, ChernNumbers, Space};
use crate::config::{InputSpec, RunConfig, Tolerances};
use crate::dolbeault::{classify_solutions, FiberSolver, It1Report};
use crate::error::{Error, Result};
use crate::gauge::LinkField;
use crate::linalg::C64;
use crate::transform::{
    bundle_from_solutions, compare_double_transform, irreducibility_test, plane_fluxes, raw_invariants,
    transform_asd_residual, twist_memory_check, wilson_traces, BerryBundle, DoubleTransformReport, IrreducibilityReport,
    RawInvariants, TwistMemoryReport, Verdict, MIN_OVERLAP_SINGULAR,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_IT1: i32 = 10;
pub const EXIT_SINGULAR_OVERLAP: i32 = 11;
pub const EXIT_THEOREM_VIOLATION: i32 = 12;
pub const EXIT_SOLVER_FAILURE: i32 = 13;
pub const EXIT_RESOLUTION: i32 = 14;

/// Exit code table, as printed by the command-line help.
pub const EXIT_CODE_TABLE: &str = "\
exit codes:
   0  ok, every enabled check passed
   1  file or I/O error
   2  configuration error
  10  input is not IT1 on the dual grid
  11  singular frame overlap between neighbouring grid points
  12  theorem-violation flag (a check failed)
  13  eigensolver failure
  14  lattice or dual grid too coarse";

/// Exit code of an error raised by any stage.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => EXIT_CONFIG,
        Error::NotIt1(_) => EXIT_NOT_IT1,
        Error::SingularOverlap { .. } => EXIT_SINGULAR_OVERLAP,
        Error::TheoremViolation(_) => EXIT_THEOREM_VIOLATION,
        Error::SolverFailure { .. } | Error::Oracle(_) => EXIT_SOLVER_FAILURE,
        Error::CurvatureTooLarge { .. } | Error::DualGridTooCoarse { .. } | Error::ResolutionInsufficient(_) => EXIT_RESOLUTION,
        Error::SpaceMismatch { .. } | Error::Format(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::SpaceMismatch { .. } => "space_mismatch",
        Error::CurvatureTooLarge { .. } => "curvature_too_large",
        Error::DualGridTooCoarse { .. } => "dual_grid_too_coarse",
        Error::NotIt1(_) => "not_it1",
        Error::SingularOverlap { .. } => "singular_overlap",
        Error::SolverFailure { .. } => "solver_failure",
        Error::ResolutionInsufficient(_) => "resolution_insufficient",
        Error::TheoremViolation(_) => "theorem_violation",
        Error::Oracle(_) => "oracle",
        Error::Config(_) => "config",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

/// A structured failure of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub stage: String,
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorEntry {
    pub fn from_error(stage: &str, e: &Error) -> Self {
        Self { stage: stage.into(), kind: error_kind(e).into(), message: e.to_string(), exit_code: exit_code_for(e) }
    }
}

/// Every threshold that enters a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTolerances {
    pub tau_ker: f64,
    pub rho_gap: f64,
    pub min_overlap_singular: f64,
    #[serde(flatten)]
    pub checks: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub side: usize,
    pub rank: usize,
    pub factorised: bool,
    pub gauge_seed: Option<u64>,
    pub asd_residual: Option<f64>,
    pub chern: Option<ChernNumbers>,
}

/// What the cohomology ring predicts for the transform of the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohomologyPrediction {
    pub transformed: ChernNumbers,
    /// `-chi(E)`, the expected rank of the transform.
    pub minus_euler: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSummary {
    pub grid: usize,
    pub rank: usize,
    pub min_overlap: f64,
    pub asd_residual: Option<f64>,
    pub raw_invariants: Option<RawInvariants>,
    pub invariants: Option<ChernNumbers>,
    /// Mean curvature per plane, `c1` coefficients over the rank times `2 pi`.
    pub plane_fluxes: Option<[f64; 6]>,
}

/// Outcome of one enabled theorem check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Straight Wilson-loop traces of the input and of the double transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonRow {
    pub direction: usize,
    pub base: [usize; 4],
    pub original: [f64; 2],
    pub returned: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub tolerances: Option<EffectiveTolerances>,
    pub input: Option<InputSummary>,
    pub prediction: Option<CohomologyPrediction>,
    pub it1: Option<It1Report>,
    pub transform: Option<TransformSummary>,
    pub double_transform: Option<DoubleTransformReport>,
    pub twist_memory: Option<TwistMemoryReport>,
    pub irreducibility: Option<IrreducibilityReport>,
    pub wilson: Vec<WilsonRow>,
    pub checks: Vec<CheckOutcome>,
    pub errors: Vec<ErrorEntry>,
    pub exit_code: i32,
    /// Wall-clock seconds per stage; written to a separate file.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl ExperimentReport {
    fn empty(config: RunConfig) -> Self {
        Self {
            config,
            tolerances: None,
            input: None,
            prediction: None,
            it1: None,
            transform: None,
            double_transform: None,
            twist_memory: None,
            irreducibility: None,
            wilson: Vec::new(),
            checks: Vec::new(),
            errors: Vec::new(),
            exit_code: EXIT_OK,
            timings: Vec::new(),
        }
    }

    fn fail(&mut self, stage: &str, e: &Error) {
        self.errors.push(ErrorEntry::from_error(stage, e));
    }

    fn record(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckOutcome { name: name.into(), passed, detail });
        if !passed {
            self.errors.push(ErrorEntry {
                stage: name.into(),
                kind: "theorem_violation".into(),
                message: format!("check {name} failed: {}", self.checks.last().map(|c| c.detail.as_str()).unwrap_or("")),
                exit_code: EXIT_THEOREM_VIOLATION,
            });
        }
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming { stage: stage.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.exit_code == EXIT_OK
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn timings_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.timings)?)
    }

    /// Writes `report.json`, `timings.json` and every CSV table into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, text: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
            Ok(())
        };
        put("report.json".into(), self.to_json()? + "\n")?;
        put("timings.json".into(), self.timings_json()? + "\n")?;
        for t in Table::ALL {
            put(format!("{t}.csv"), csv_string(self, t)?)?;
        }
        Ok(written)
    }
}

/// Runs `cfg` inside a thread pool sized by its thread budget.
pub fn run_pipeline(cfg: &RunConfig) -> ExperimentReport {
    run_pipeline_with_threads(cfg, None)
}

/// As [`run_pipeline`], with a thread count that overrides both the environment and the file.
pub fn run_pipeline_with_threads(cfg: &RunConfig, threads: Option<usize>) -> ExperimentReport {
    let mut report = ExperimentReport::empty(cfg.clone());
    if let Err(e) = cfg.validate() {
        report.fail("config", &e);
        report.exit_code = EXIT_CONFIG;
        return report;
    }
    let threads = match threads.map_or_else(|| cfg.thread_budget(), |t| Ok(Some(t))) {
        Ok(Some(0)) => {
            report.fail("config", &Error::Config("threads must be at least 1".into()));
            report.exit_code = EXIT_CONFIG;
            return report;
        }
        Ok(t) => t,
        Err(e) => {
            report.fail("config", &e);
            report.exit_code = EXIT_CONFIG;
            return report;
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build();
    match pool {
        Ok(pool) => pool.install(|| run_stages(&mut report)),
        Err(e) => report.fail("threads", &Error::Config(e.to_string())),
    }
    report.exit_code = report.errors.first().map_or(EXIT_OK, |e| e.exit_code);
    report
}

fn run_stages(report: &mut ExperimentReport) {
    let cfg = report.config.clone();
    let tol = cfg.tolerances;

    let field = match report.timed("field", || cfg.build_field()) {
        Ok(f) => f,
        Err(e) => return report.fail("field", &e),
    };
    let solver = match FiberSolver::new(&field, &cfg.spectral) {
        Ok(s) => s,
        Err(e) => return report.fail("field", &e),
    };
    report.tolerances = Some(EffectiveTolerances {
        tau_ker: solver.tau_ker(),
        rho_gap: cfg.spectral.rho_gap,
        min_overlap_singular: MIN_OVERLAP_SINGULAR,
        checks: tol,
    });
    let chern = field.chern_numbers(tol.rounding);
    report.input = Some(InputSummary {
        side: field.side(),
        rank: field.rank(),
        factorised: solver.is_factorised(),
        gauge_seed: cfg.gauge_seed,
        asd_residual: field.asd_residual().ok(),
        chern: chern.as_ref().ok().copied(),
    });
    if let Ok(ch) = &chern {
        match predict(ch) {
            Ok(p) => report.prediction = Some(p),
            Err(e) => report.fail("cohomology", &e),
        }
    }
    report.wilson = wilson_rows(&field, None);

    let sols = match report.timed("index", || solver.solve_grid(cfg.grid)) {
        Ok(s) => s,
        Err(e) => return report.fail("index", &e),
    };
    let it1 = classify_solutions(&solver, cfg.grid, &sols);
    let it1_ok = it1.is_it1 && it1.rank.unwrap_or(0) > 0;
    let it1_detail = match it1.rank {
        Some(r) if it1_ok => format!("rank {r} at all {} grid points", it1.points.len()),
        _ => format!("{} of {} grid points fail", it1.failures.len(), it1.points.len()),
    };
    report.checks.push(CheckOutcome { name: "it1".into(), passed: it1_ok, detail: it1_detail });
    let bundle = report.timed("transform", || bundle_from_solutions(&solver, cfg.grid, sols, &it1));
    report.it1 = Some(it1);
    let bundle = match bundle {
        Ok(b) => b,
        Err(e) => return report.fail("transform", &e),
    };
    if let (Some(p), Some(it1)) = (report.prediction, &report.it1) {
        let r = it1.rank.unwrap_or(0) as i64;
        report.record("rank_equals_minus_euler", r == p.minus_euler, format!("rank {r}, -chi = {}", p.minus_euler));
    }

    report.transform = Some(TransformSummary {
        grid: bundle.grid(),
        rank: bundle.rank(),
        min_overlap: bundle.min_overlap,
        asd_residual: None,
        raw_invariants: None,
        invariants: None,
        plane_fluxes: None,
    });
    if cfg.checks.asd {
        match report.timed("verify_asd", || transform_asd_residual(&bundle)) {
            Ok(res) => {
                set_summary(report, |s| s.asd_residual = Some(res));
                report.record("asd", res < tol.asd_residual, format!("residual {res:.6e} against {}", tol.asd_residual));
            }
            Err(e) => report.fail("verify_asd", &e),
        }
    }
    if cfg.checks.invariants {
        invariants_stage(report, &bundle, tol);
    }
    if cfg.checks.invert {
        let out = report
            .timed("invert", || compare_double_transform(&field, &bundle, &cfg.spectral, tol.rounding, tol.wilson));
        match out {
            Ok((d, back)) => {
                report.wilson = wilson_rows(&field, back.as_ref());
                let detail = match &d.theorem_violation {
                    Some(v) => v.clone(),
                    None => format!(
                        "returned {:?}, max Wilson deviation {:.3e} against {}",
                        d.returned, d.max_wilson_deviation, d.wilson_tol
                    ),
                };
                report.record("double_transform", d.passed(), detail);
                report.double_transform = Some(d);
            }
            Err(e) => report.fail("invert", &e),
        }
    }
    if let Some(zeta) = cfg.checks.twist_memory {
        match report.timed("twist_memory", || twist_memory_check(&field, cfg.grid, zeta, &cfg.spectral, tol.wilson)) {
            Ok(t) => {
                let worst = t.deviations.iter().copied().fold(0.0, f64::max);
                report.record("twist_memory", t.passed, format!("largest deviation {worst:.3e} against {}", t.tol));
                report.twist_memory = Some(t);
            }
            Err(e) => report.fail("twist_memory", &e),
        }
    }
    if cfg.checks.irreducibility {
        let samples = cfg.checks.irreducibility_samples;
        match report.timed("irred", || irreducibility_test(&bundle, samples, tol.irreducibility)) {
            Ok(ir) => {
                let expected = expected_verdict(&cfg.input, field.rank());
                let passed = expected.is_none_or(|v| v == ir.verdict);
                let detail = format!(
                    "{:?} (algebra {}, commutant {}), expected {}",
                    ir.verdict,
                    ir.algebra_dim,
                    ir.commutant_dim,
                    expected.map_or("any".to_string(), |v| format!("{v:?}"))
                );
                report.record("irreducibility", passed, detail);
                report.irreducibility = Some(ir);
            }
            Err(e) => report.fail("irred", &e),
        }
    }
}

fn set_summary(report: &mut ExperimentReport, f: impl FnOnce(&mut TransformSummary)) {
    if let Some(s) = report.transform.as_mut() {
        f(s);
    }
}

fn invariants_stage(report: &mut ExperimentReport, bundle: &BerryBundle, tol: Tolerances) {
    let raw = match report.timed("invariants", || raw_invariants(bundle)) {
        Ok(r) => r,
        Err(e) => return report.fail("invariants", &e),
    };
    let fluxes = plane_fluxes(bundle).ok();
    set_summary(report, |s| {
        s.raw_invariants = Some(raw);
        s.plane_fluxes = fluxes;
    });
    match crate::gauge::round_chern(raw.rank, raw.c1, raw.ch2, tol.rounding) {
        Ok(ch) => {
            set_summary(report, |s| s.invariants = Some(ch));
            if let Some(p) = report.prediction {
                report.record(
                    "invariants",
                    ch == p.transformed,
                    format!("numerical {:?}, cohomology {:?}", ch, p.transformed),
                );
            }
        }
        Err(e) => {
            report.fail("invariants", &e);
            report.record("invariants", false, e.to_string());
        }
    }
}

/// The verdict a correct transform must give: a sum of two or more summands is
/// reducible, a line bundle irreducible. Other inputs carry no expectation.
fn expected_verdict(input: &InputSpec, rank: usize) -> Option<Verdict> {
    if input.is_direct_sum() {
        Some(Verdict::Reducible)
    } else if rank == 1 {
        Some(Verdict::Irreducible)
    } else {
        None
    }
}

/// Cohomological prediction for the transform of `ch`.
pub fn predict(ch: &ChernNumbers) -> Result<CohomologyPrediction> {
    let chi = euler_characteristic(&ch.to_class(Space::X)?)?;
    Ok(CohomologyPrediction { transformed: transform_numbers(ch)?, minus_euler: -chi })
}

fn wilson_rows(f: &LinkField, back: Option<&LinkField>) -> Vec<WilsonRow> {
    let lat = f.lattice();
    let bases: Vec<(usize, [usize; 4])> = (0..4)
        .flat_map(|mu| (0..lat.volume()).filter(move |&s| lat.coords(s)[mu] == 0).map(move |s| (mu, lat.coords(s))))
        .collect();
    let split = |z: &C64| [z.re, z.im];
    let original = wilson_traces(f);
    let returned = back.filter(|b| b.side() == f.side()).map(wilson_traces);
    bases
        .into_iter()
        .enumerate()
        .map(|(i, (mu, base))| WilsonRow {
            direction: mu + 1,
            base,
            original: split(&original[i]),
            returned: returned.as_ref().map(|r| split(&r[i])),
        })
        .collect()
}

/// CSV tables a report can be rendered into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Eigenvalues,
    Residuals,
    Invariants,
    Wilson,
}

impl Table {
    pub const ALL: [Table; 4] = [Table::Eigenvalues, Table::Residuals, Table::Invariants, Table::Wilson];

    pub fn name(self) -> &'static str {
        match self {
            Table::Eigenvalues => "eigenvalues",
            Table::Residuals => "residuals",
            Table::Invariants => "invariants",
            Table::Wilson => "wilson",
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Table {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Table::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown table {s:?}; expected eigenvalues, residuals, invariants or wilson")))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Renders one table. Rows follow the lexicographic grid order.
pub fn csv_string(report: &ExperimentReport, table: Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match table {
        Table::Eigenvalues => {
            w.write_record(["i1", "i2", "i3", "i4", "xi1", "xi2", "xi3", "xi4", "n", "delta0", "delta1", "delta2"])?;
            let count = report.config.spectral.eigencount;
            for p in report.it1.iter().flat_map(|r| r.points.iter()) {
                for n in 0..count {
                    let mut row: Vec<String> = p.index.iter().map(|i| i.to_string()).collect();
                    row.extend(p.xi.iter().map(|&x| num(x)));
                    row.push(n.to_string());
                    for s in [&p.delta0, &p.delta1, &p.delta2] {
                        row.push(opt_num(s.eigenvalues.get(n).copied()));
                    }
                    w.write_record(&row)?;
                }
            }
        }
        Table::Residuals => {
            w.write_record(["quantity", "value", "threshold"])?;
            let tol = report.config.tolerances;
            let mut rows: Vec<(&str, Option<f64>, Option<f64>)> = Vec::new();
            if let Some(i) = &report.input {
                rows.push(("input_asd_residual", i.asd_residual, None));
            }
            if let Some(r) = &report.it1 {
                rows.push(("min_gap_ratio", Some(r.min_gap_ratio), Some(r.rho_gap)));
                rows.push(("min_lambda0", Some(r.min_lambda0), Some(r.tau_ker)));
                rows.push(("min_lambda2", Some(r.min_lambda2), Some(r.tau_ker)));
            }
            if let Some(t) = &report.transform {
                rows.push(("min_overlap", Some(t.min_overlap), Some(MIN_OVERLAP_SINGULAR)));
                rows.push(("transform_asd_residual", t.asd_residual, Some(tol.asd_residual)));
            }
            if let Some(d) = &report.double_transform {
                rows.push(("max_wilson_deviation", Some(d.max_wilson_deviation), Some(d.wilson_tol)));
            }
            if let Some(t) = &report.twist_memory {
                for (mu, &d) in ["twist_deviation_1", "twist_deviation_2", "twist_deviation_3", "twist_deviation_4"]
                    .iter()
                    .zip(t.deviations.iter())
                {
                    rows.push((mu, Some(d), Some(t.tol)));
                }
            }
            for (q, v, t) in rows {
                w.write_record([q.to_string(), opt_num(v), opt_num(t)])?;
            }
        }
        Table::Invariants => {
            w.write_record(["source", "space", "rank", "c1_12", "c1_13", "c1_14", "c1_23", "c1_24", "c1_34", "ch2"])?;
            let int_row = |src: &str, space: &str, c: &ChernNumbers| -> Vec<String> {
                let mut row = vec![src.to_string(), space.to_string(), c.rank.to_string()];
                row.extend(c.c1.iter().map(|v| v.to_string()));
                row.push(c.ch2.to_string());
                row
            };
            if let Some(c) = report.input.as_ref().and_then(|i| i.chern.as_ref()) {
                w.write_record(int_row("input_numerical", "x", c))?;
            }
            if let Some(p) = &report.prediction {
                w.write_record(int_row("transform_cohomological", "y", &p.transformed))?;
            }
            if let Some(t) = &report.transform {
                if let Some(raw) = &t.raw_invariants {
                    let mut row = vec!["transform_numerical_raw".to_string(), "y".into(), raw.rank.to_string()];
                    row.extend(raw.c1.iter().map(|&v| num(v)));
                    row.push(num(raw.ch2));
                    w.write_record(&row)?;
                }
                if let Some(c) = &t.invariants {
                    w.write_record(int_row("transform_numerical", "y", c))?;
                }
            }
            if let Some(d) = &report.double_transform {
                if d.theorem_violation.is_none() {
                    w.write_record(int_row("double_transform_numerical", "x", &d.returned))?;
                }
            }
        }
        Table::Wilson => {
            w.write_record(["direction", "x1", "x2", "x3", "x4", "original_re", "original_im", "returned_re", "returned_im"])?;
            for r in &report.wilson {
                let mut row = vec![r.direction.to_string()];
                row.extend(r.base.iter().map(|x| x.to_string()));
                row.extend(r.original.iter().map(|&v| num(v)));
                match r.returned {
                    Some([re, im]) => row.extend([num(re), num(im)]),
                    None => row.extend([String::new(), String::new()]),
                }
                w.write_record(&row)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Writes one table to `path`.
pub fn emit_csv(report: &ExperimentReport, table: &str, path: &Path) -> Result<()> {
    let t: Table = table.parse()?;
    std::fs::write(path, csv_string(report, t)?)?;
    Ok(())
}
