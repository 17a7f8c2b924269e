//! `triflip`: command-line front end.
//!
//! Results go to stdout as JSON. Failures print `{"error": kind, "message": ...}`
//! to stdout and exit with 1; an invalid solution under `verify` exits with 2.

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use triflip::bounds::{distance_matrix, pairwise_distance, precompute_bound_table, BoundTable, DEFAULT_EXACT_LIMIT};
use triflip::cnf::{EncodeOptions, InsertionBound};
use triflip::instance::{
    export_svg, generate_random_instance, parse_instance, parse_solution, verify_solution, Instance, Solution,
};
use triflip::pipeline::{exact_solve, improve, proven_lower_bound, solve, ExactOptions, ImproveOptions, ProgressSink};
use triflip::sat::{SatOptions, SolverConfig};
use triflip::Error;

#[derive(Parser)]
#[command(name = "triflip", version, about = "Parallel flip reconfiguration of planar triangulations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Emit JSON-lines progress events on stderr.
    #[arg(long, global = true)]
    progress: bool,
    /// Wall-clock limit in seconds; the best result so far is reported.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// External SAT solver command with a `{cnf}` placeholder (overrides TRIFLIP_SAT_CMD).
    #[arg(long, global = true)]
    sat_cmd: Option<String>,
    /// External MaxSAT solver command with a `{wcnf}` placeholder (overrides TRIFLIP_MAXSAT_CMD).
    #[arg(long, global = true)]
    maxsat_cmd: Option<String>,
    /// Directory for formula files handed to external solvers.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Keep formula and solver output files.
    #[arg(long, global = true)]
    keep_cnf: bool,
    /// Assume the happy edges conjecture (faster, not proven).
    #[arg(long, global = true)]
    happy: bool,
    /// Use the crossing-string insertion bound with this precomputed table.
    #[arg(long, global = true, value_name = "FILE")]
    bound_table: Option<PathBuf>,
    /// Use the crossing-string insertion bound, exact up to this string length.
    #[arg(long, global = true, value_name = "LEN", conflicts_with = "bound_table")]
    string_bound: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Heuristic solution followed by SAT improvement.
    Solve {
        instance: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        improve: ImproveArgs,
    },
    /// Provably optimal solution.
    Exact {
        instance: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Checks a solution; exits with 2 if it is invalid.
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        /// Accept empty parallel flips.
        #[arg(long)]
        lenient: bool,
    },
    /// Parallel flip distance between two inputs, with a witness path.
    Distance {
        instance: PathBuf,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Cycle-packing lower bound and the pairwise distances behind it.
    Lb { instance: PathBuf },
    /// Improves an existing solution.
    Improve {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        improve: ImproveArgs,
    },
    /// Random instance: Delaunay inputs scrambled by k unit flips each.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// SVG drawing of an input or of a solution's center.
    Svg {
        instance: PathBuf,
        /// Index of the input to draw.
        #[arg(long, conflicts_with = "solution")]
        triangulation: Option<usize>,
        /// Solution whose center is drawn.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Draw the center of `--solution` (the default when a solution is given).
        #[arg(long, requires = "solution")]
        center: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Precomputes the crossing-string bound table.
    BoundTable {
        #[arg(long, default_value_t = 14)]
        max_len: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ImproveArgs {
    /// Only create edges crossing at most K edges of the previous solution.
    #[arg(long, value_name = "K")]
    proximity_k: Option<usize>,
    /// Trim radius for re-solving the neighbourhood of the center.
    #[arg(long, value_name = "R")]
    trim_r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after this many successful improvements.
    #[arg(long)]
    max_rounds: Option<usize>,
}

struct CliError {
    kind: &'static str,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Geometry(_) => "geometry",
            Error::Triangulation(_) => "triangulation",
            Error::Flip(_) => "flip",
            Error::Format(_) => "format",
            Error::Solver(_) => "solver",
            Error::Limit(_) => "limit",
            Error::Invalid(_) => "invalid",
            Error::Io(_) => "io",
        };
        Self { kind, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { kind: "usage", message: message.into() }
}

fn read(path: &FsPath) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError { kind: "io", message: format!("{}: {e}", path.display()) })
}

fn write(path: &FsPath, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError { kind: "io", message: format!("{}: {e}", path.display()) })
}

fn load_instance(path: &FsPath) -> Result<Instance, CliError> {
    parse_instance(&read(path)?).map_err(|e| CliError::from(Error::from(e)))
}

fn load_solution(inst: &Instance, path: &FsPath) -> Result<Solution, CliError> {
    let file = parse_solution(&read(path)?).map_err(Error::from)?;
    Ok(Solution::from_file(inst, &file, false)?.compress())
}

/// Verifies before anything is written, then writes the file or returns
/// the solution inline.
fn emit_solution(inst: &Instance, sol: &Solution, out: Option<&FsPath>) -> Result<Value, CliError> {
    let report = sol.verify(inst, true);
    if !report.valid {
        return Err(CliError {
            kind: "internal",
            message: format!("refusing to write an invalid solution: {}", report.first_violation.unwrap_or_default()),
        });
    }
    let text = sol.to_file().to_json();
    match out {
        Some(p) => {
            write(p, &text)?;
            Ok(json!(p.display().to_string()))
        }
        None => Ok(serde_json::from_str(&text).expect("solution JSON")),
    }
}

fn sat_options(g: &Global) -> Result<SatOptions, CliError> {
    let mut solver = SolverConfig::from_env();
    if let Some(c) = &g.sat_cmd {
        solver.sat_cmd = Some(c.clone());
    }
    if let Some(c) = &g.maxsat_cmd {
        solver.maxsat_cmd = Some(c.clone());
    }
    if let Some(w) = &g.workdir {
        solver.workdir = w.clone();
    }
    solver.keep_files = g.keep_cnf;
    if let Some(t) = g.time_limit {
        if !(t.is_finite() && t >= 0.0) {
            return Err(usage(format!("invalid time limit {t}")));
        }
        solver.deadline = Some(Instant::now() + Duration::from_secs_f64(t));
    }
    let insertion_bound = match (&g.bound_table, g.string_bound) {
        (Some(p), _) => InsertionBound::String(Arc::new(BoundTable::parse(&read(p)?).map_err(Error::from)?)),
        (None, Some(len)) => {
            if len > DEFAULT_EXACT_LIMIT {
                return Err(usage(format!("--string-bound is limited to {DEFAULT_EXACT_LIMIT}")));
            }
            InsertionBound::String(Arc::new(precompute_bound_table(len)))
        }
        (None, None) => InsertionBound::Log2,
    };
    let encode = EncodeOptions { happy_edges: g.happy, insertion_bound, ..Default::default() };
    Ok(SatOptions { encode, solver })
}

fn progress_sink(g: &Global) -> Option<ProgressSink> {
    if !g.progress {
        return None;
    }
    let err = Mutex::new(std::io::stderr());
    Some(Arc::new(move |ev| {
        let line = serde_json::to_string(ev).expect("event serializes");
        let mut e = err.lock().expect("stderr lock");
        let _ = writeln!(e, "{line}");
    }))
}

fn improve_options(g: &Global, a: &ImproveArgs) -> Result<ImproveOptions, CliError> {
    if a.trim_r == Some(0) {
        return Err(usage("--trim-r must be at least 1"));
    }
    Ok(ImproveOptions {
        exact: ExactOptions { sat: sat_options(g)?, powers: None, progress: progress_sink(g) },
        proximity_k: a.proximity_k,
        trim_r: a.trim_r,
        seed: a.seed,
        max_rounds: a.max_rounds,
    })
}

/// Returns the JSON to print and the exit code.
fn run(cli: Cli) -> Result<(Value, u8), CliError> {
    let g = &cli.global;
    if let Some(j) = g.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| usage(format!("cannot configure {j} workers: {e}")))?;
    }
    match &cli.cmd {
        Cmd::Solve { instance, out, improve } => {
            let inst = load_instance(instance)?;
            let rep = solve(&inst, &improve_options(g, improve)?)?;
            let solution = emit_solution(&inst, &rep.solution, out.as_deref())?;
            Ok((
                json!({
                    "objective": rep.solution.objective(),
                    "lower_bound": rep.lower_bound,
                    "optimal": rep.optimal,
                    "solution": solution,
                }),
                0,
            ))
        }
        Cmd::Exact { instance, out } => {
            let inst = load_instance(instance)?;
            let opts = ExactOptions { sat: sat_options(g)?, powers: None, progress: progress_sink(g) };
            let r = exact_solve(&inst, &opts)?;
            let solution = emit_solution(&inst, &r.solution, out.as_deref())?;
            Ok((
                json!({
                    "objective": r.solution.objective(),
                    "lower_bound": r.lower_bound,
                    "optimal": r.status == triflip::pipeline::SolveStatus::Optimal,
                    "status": r.status,
                    "solution": solution,
                }),
                0,
            ))
        }
        Cmd::Verify { instance, solution, lenient } => {
            let inst = load_instance(instance)?;
            let file = parse_solution(&read(solution)?).map_err(Error::from)?;
            let report = verify_solution(&inst, &file, !lenient);
            let code = if report.valid { 0 } else { 2 };
            Ok((serde_json::to_value(&report).expect("report serializes"), code))
        }
        Cmd::Distance { instance, from, to } => {
            let inst = load_instance(instance)?;
            for &i in [from, to] {
                if i >= inst.m() {
                    return Err(usage(format!("input index {i} out of range (instance has {})", inst.m())));
                }
            }
            let d = pairwise_distance(&inst.inputs[*from], &inst.inputs[*to], &sat_options(g)?)?;
            let path = Solution { instance_name: inst.name.clone(), center: inst.inputs[*to].clone(), paths: vec![d.path] }
                .to_file()
                .paths
                .remove(0);
            Ok((json!({ "distance": d.length, "exact": d.exact, "path": path }), 0))
        }
        Cmd::Lb { instance } => {
            let inst = load_instance(instance)?;
            let (dm, _) = distance_matrix(&inst, &sat_options(g)?)?;
            Ok((
                json!({
                    "lower_bound": proven_lower_bound(&dm),
                    "exact": dm.all_exact(),
                    "distances": dm.rows(),
                }),
                0,
            ))
        }
        Cmd::Improve { instance, solution, out, improve: args } => {
            let inst = load_instance(instance)?;
            let sol = load_solution(&inst, solution)?;
            let before = sol.objective();
            let better = improve(&inst, sol, &improve_options(g, args)?)?;
            let solution = emit_solution(&inst, &better, out.as_deref())?;
            Ok((json!({ "objective": better.objective(), "previous_objective": before, "solution": solution }), 0))
        }
        Cmd::Gen { n, m, k, seed, out } => {
            let inst = generate_random_instance(*n, *m, *k, *seed)?;
            let text = inst.to_json();
            match out {
                Some(p) => {
                    write(p, &text)?;
                    Ok((json!({ "instance": p.display().to_string(), "name": inst.name }), 0))
                }
                None => Ok((serde_json::from_str(&text).expect("instance JSON"), 0)),
            }
        }
        Cmd::Svg { instance, triangulation, solution, center: _, out } => {
            let inst = load_instance(instance)?;
            let t = match solution {
                Some(s) => load_solution(&inst, s)?.center,
                None => {
                    let i = triangulation.unwrap_or(0);
                    inst.inputs.get(i).cloned().ok_or_else(|| usage(format!("input index {i} out of range")))?
                }
            };
            let svg = export_svg(&t);
            match out {
                Some(p) => {
                    write(p, &svg)?;
                    Ok((json!({ "svg": p.display().to_string() }), 0))
                }
                None => {
                    print!("{svg}");
                    Ok((Value::Null, 0))
                }
            }
        }
        Cmd::BoundTable { max_len, out } => {
            if !(2..=DEFAULT_EXACT_LIMIT).contains(max_len) {
                return Err(usage(format!("--max-len must be between 2 and {DEFAULT_EXACT_LIMIT}")));
            }
            let table = precompute_bound_table(*max_len);
            match out {
                Some(p) => {
                    write(p, &table.to_text())?;
                    Ok((json!({ "table": p.display().to_string(), "entries": table.len() }), 0))
                }
                None => {
                    print!("{}", table.to_text());
                    Ok((Value::Null, 0))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            println!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok((value, code)) => {
            if !value.is_null() {
                println!("{value}");
            }
            ExitCode::from(code)
        }
        Err(e) => {
            println!("{}", json!({ "error": e.kind, "message": e.message }));
            ExitCode::from(1)
        }
    }
}
