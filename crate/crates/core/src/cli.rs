//! The `skorohod` command line: partition | couple | sample | verify | quantile.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error. Errors are
//! printed to stderr as a JSON object `{"error": kind, "message": ...}`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::coupling::{build_plan, sample_coupled, CouplingPlan, PlanDiagnostics};
use crate::error::{Error, Result};
use crate::instance::InstanceSpec;
use crate::partition::{build_partition_tree, LevelSummary, PartitionTree};
use crate::quantile::{quantile_couple, uniform_grid, QuantileCoupling};
use crate::verification::{verify_plan, VerificationReport, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "skorohod",
    about = "Almost-sure couplings on finite metric spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the nested continuity partition of an instance.
    Partition(InstanceArgs),
    /// Build the coupling plan (levels ℓ(α) and remainder measures).
    Couple(InstanceArgs),
    /// Draw coupled samples from a plan as CSV.
    Sample {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run every exact and statistical check on a plan.
    Verify {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Quantile coupling of a line-mode instance.
    Quantile {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// "<count> uniform" or a comma-separated list of values in (0, 1).
        #[arg(long = "u-grid", default_value = "10000 uniform")]
        u_grid: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub tree: PartitionTree,
    pub summary: Vec<LevelSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub plan: CouplingPlan,
    pub diagnostics: Vec<PlanDiagnostics>,
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_instance(args: &InstanceArgs) -> Result<InstanceSpec> {
    let mut spec = InstanceSpec::load(&args.instance)?;
    if let Some(k) = args.k_max {
        spec.k_max = k;
    }
    if let Some(d) = args.delta {
        spec.delta = d;
    }
    if let Some(e) = args.eps {
        spec.eps = e;
    }
    Ok(spec)
}

pub fn cmd_partition(args: &InstanceArgs) -> Result<PartitionFile> {
    let spec = load_instance(args)?;
    let space = spec.space()?;
    let p_inf = spec.p_inf()?;
    let tree = build_partition_tree(space, &p_inf, spec.delta, spec.eps, spec.k_max)?;
    let broken = tree.violations(space, &p_inf);
    if !broken.is_empty() {
        return Err(Error::Domain(broken.join("; ")));
    }
    let file = PartitionFile {
        summary: tree.summary(space, &p_inf),
        tree,
    };
    write_json(&args.out, &file)?;
    Ok(file)
}

pub fn cmd_couple(args: &InstanceArgs) -> Result<PlanFile> {
    let spec = load_instance(args)?;
    let space = spec.space()?.clone();
    let p_inf = spec.p_inf()?;
    let family = spec.family()?;
    let tree = build_partition_tree(&space, &p_inf, spec.delta, spec.eps, spec.k_max)?;
    let plan = build_plan(space, p_inf, family, tree, spec.beta)?;
    let file = PlanFile {
        diagnostics: plan.diagnostics()?,
        plan,
    };
    write_json(&args.out, &file)?;
    Ok(file)
}

/// Writes `id,j,s,x_1..x_N`; point values are indices into the space.
pub fn cmd_sample(plan_path: &Path, n: usize, seed: u64, out: &Path) -> Result<usize> {
    let file = PlanFile::load(plan_path)?;
    let plan = &file.plan;
    let samples = sample_coupled(plan, seed, n)?;
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["id".to_string(), "j".into(), "s".into()];
    header.extend(plan.alphas().map(|a| format!("x_{a}")));
    w.write_record(&header)?;
    for (id, smp) in samples.iter().enumerate() {
        let mut row = vec![id.to_string(), smp.j.to_string(), smp.s.to_string()];
        row.extend(smp.x.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(samples.len())
}

pub fn cmd_verify(
    plan_path: &Path,
    options: VerifyOptions,
    out: &Path,
) -> Result<VerificationReport> {
    let file = PlanFile::load(plan_path)?;
    let report = verify_plan(&file.plan, options)?;
    write_json(out, &report)?;
    Ok(report)
}

/// Parses "<count> uniform", "uniform:<count>" or a comma-separated list.
pub fn parse_u_grid(spec: &str) -> Result<Vec<f64>> {
    let t = spec.trim();
    let words: Vec<&str> = t.split_whitespace().collect();
    let count = match words.as_slice() {
        [c, "uniform"] => Some(*c),
        _ => t.strip_prefix("uniform:"),
    };
    let grid = match count {
        Some(c) => {
            let c: usize = c
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad grid size in {spec:?}")))?;
            uniform_grid(c)
        }
        None => t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad grid value {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if let Some(u) = grid.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(Error::Domain(format!("grid value {u} outside (0, 1)")));
    }
    Ok(grid)
}

/// Writes `u,n,value,limit,converged` for every grid value and family member.
pub fn cmd_quantile(instance: &Path, u_grid: &str, out: &Path) -> Result<QuantileCoupling> {
    let spec = InstanceSpec::load(instance)?;
    let (fs, limit) = spec.line_family()?;
    let grid = parse_u_grid(u_grid)?;
    let table = quantile_couple(&fs, &limit, &grid)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["u", "n", "value", "limit", "converged"])?;
    for path in &table.paths {
        let flag = if path.converged() { "1" } else { "0" };
        for (i, v) in path.values.iter().enumerate() {
            w.write_record([
                path.u.to_string(),
                (i + 1).to_string(),
                v.to_string(),
                path.limit.to_string(),
                flag.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(table)
}

fn report_error(e: &Error) -> i32 {
    let obj = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{obj}");
    EXIT_INPUT
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Partition(args) => match cmd_partition(&args) {
            Ok(file) => {
                for l in &file.summary {
                    println!(
                        "k={} q={} P∞(C0)={:.3e} (≤ {:.3e}) max diam={:.4} (≤ {:.4})",
                        l.k,
                        l.q,
                        l.remainder_mass,
                        l.remainder_bound,
                        l.max_diameter,
                        l.diameter_bound
                    );
                }
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
        Command::Couple(args) => match cmd_couple(&args) {
            Ok(file) => {
                for d in &file.diagnostics {
                    println!(
                        "alpha={} ell={} eta∈[{:.4}, {:.4}] tv={:.3e}",
                        d.alpha, d.ell, d.eta_min, d.eta_max, d.tv_to_limit
                    );
                }
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
        Command::Sample { plan, out, n, seed } => match cmd_sample(&plan, n, seed, &out) {
            Ok(_) => EXIT_OK,
            Err(e) => report_error(&e),
        },
        Command::Verify { plan, out, n, seed } => {
            match cmd_verify(&plan, VerifyOptions { seed, n }, &out) {
                Ok(report) => {
                    println!("{}", report.summary());
                    if report.all_pass() {
                        EXIT_OK
                    } else {
                        let failed = report.failed_checks().join(",");
                        eprintln!("{}", serde_json::json!({ "failed": failed }));
                        EXIT_VERIFY_FAILED
                    }
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Quantile {
            instance,
            out,
            u_grid,
        } => match cmd_quantile(&instance, &u_grid, &out) {
            Ok(table) => {
                println!(
                    "{}",
                    serde_json::json!({
                        "failures": table.failures,
                        "limit_discontinuities": table.limit_discontinuities,
                    })
                );
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
    }
}
