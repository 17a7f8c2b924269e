//! SAT and MaxSAT back ends: external solver binaries driven through files,
//! or the built-in solver for small formulas.
//!
//! External commands are templates such as `cadical {cnf}` or
//! `maxsat-solver {wcnf}`; the placeholder is replaced by the path of a
//! formula file named after the SHA-256 of its contents. Output must follow
//! the SAT competition conventions (`s ...`, `v ...`, `o ...` lines).

mod cdcl;

use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::cnf::{Cnf, Lit};
use crate::error::{Error, SolverError};

pub use cdcl::{solve as builtin_solve_raw, Outcome};

pub const SAT_CMD_ENV: &str = "TRIFLIP_SAT_CMD";
pub const MAXSAT_CMD_ENV: &str = "TRIFLIP_MAXSAT_CMD";

/// Largest formula the built-in solver accepts by default.
pub const DEFAULT_BUILTIN_LIMIT: usize = 50_000;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Command template with a `{cnf}` placeholder.
    pub sat_cmd: Option<String>,
    /// Command template with a `{wcnf}` placeholder.
    pub maxsat_cmd: Option<String>,
    /// Per call.
    pub time_limit: Option<Duration>,
    /// Global cut-off shared by all calls.
    pub deadline: Option<Instant>,
    pub workdir: PathBuf,
    /// Keep formula and output files after the call.
    pub keep_files: bool,
    pub builtin_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sat_cmd: None,
            maxsat_cmd: None,
            time_limit: None,
            deadline: None,
            workdir: std::env::temp_dir(),
            keep_files: false,
            builtin_limit: DEFAULT_BUILTIN_LIMIT,
        }
    }
}

impl SolverConfig {
    /// Built-in solver only.
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Reads `TRIFLIP_SAT_CMD` and `TRIFLIP_MAXSAT_CMD`.
    pub fn from_env() -> Self {
        let get = |k: &str| std::env::var(k).ok().filter(|s| !s.trim().is_empty());
        Self { sat_cmd: get(SAT_CMD_ENV), maxsat_cmd: get(MAXSAT_CMD_ENV), ..Self::default() }
    }

    fn effective_deadline(&self) -> Option<Instant> {
        let per_call = self.time_limit.map(|d| Instant::now() + d);
        match (per_call, self.deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn expired(&self) -> bool {
        self.deadline.map_or(false, |d| Instant::now() >= d)
    }
}

/// Encoding choices together with the back end that solves the formulas.
#[derive(Clone, Debug, Default)]
pub struct SatOptions {
    pub encode: crate::cnf::EncodeOptions,
    pub solver: SolverConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatResult {
    pub status: Status,
    /// `model[v]` for `v` in `1..=num_vars`; index 0 unused.
    pub model: Option<Vec<bool>>,
    /// Weight of falsified soft clauses (MaxSAT only).
    pub cost: Option<u64>,
    pub diagnostics: Option<String>,
}

impl SatResult {
    fn sat(model: Vec<bool>, cost: Option<u64>) -> Self {
        Self { status: Status::Sat, model: Some(model), cost, diagnostics: None }
    }

    fn unsat() -> Self {
        Self { status: Status::Unsat, model: None, cost: None, diagnostics: None }
    }

    fn unknown(why: impl Into<String>) -> Self {
        Self { status: Status::Unknown, model: None, cost: None, diagnostics: Some(why.into()) }
    }

    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }
}

fn check_model(cnf: &Cnf, model: &[bool]) -> Result<(), Error> {
    match cnf.first_violated(model) {
        Some(i) => Err(SolverError::BadModel(i).into()),
        None => Ok(()),
    }
}

/// Complete built-in search.
pub fn builtin_solve(cnf: &Cnf, cfg: &SolverConfig) -> Result<SatResult, Error> {
    if cnf.num_vars as usize > cfg.builtin_limit {
        return Err(SolverError::LimitExceeded { vars: cnf.num_vars as usize, limit: cfg.builtin_limit }.into());
    }
    Ok(match cdcl::solve(cnf, cfg.effective_deadline()) {
        Outcome::Sat(model) => {
            check_model(cnf, &model)?;
            SatResult::sat(model, None)
        }
        Outcome::Unsat => SatResult::unsat(),
        Outcome::Interrupted => SatResult::unknown("time limit reached"),
    })
}

/// Decides the hard clauses of `cnf`. The model is checked before it is
/// returned.
pub fn solve_sat(cnf: &Cnf, cfg: &SolverConfig) -> Result<SatResult, Error> {
    if !cnf.soft.is_empty() {
        return Err(SolverError::UnexpectedSoft.into());
    }
    if cfg.expired() {
        return Ok(SatResult::unknown("deadline passed"));
    }
    if cnf.has_empty_clause() {
        return Ok(SatResult::unsat());
    }
    let Some(template) = &cfg.sat_cmd else {
        return builtin_solve(cnf, cfg);
    };
    let out = match run_external(template, "{cnf}", "cnf", &cnf.emit_dimacs(), cfg) {
        Ok(out) => out,
        Err(why) => return Ok(SatResult::unknown(why)),
    };
    let parsed = match parse_solver_output(&out, cnf.num_vars) {
        Ok(p) => p,
        Err(why) => return Ok(SatResult::unknown(why)),
    };
    match parsed.status {
        Status::Sat => {
            let model = parsed.model.ok_or(SolverError::BadModel(usize::MAX))?;
            check_model(cnf, &model)?;
            Ok(SatResult::sat(model, None))
        }
        Status::Unsat => Ok(SatResult::unsat()),
        Status::Unknown => Ok(SatResult::unknown("solver reported UNKNOWN")),
    }
}

/// Minimises the weight of falsified soft clauses subject to the hard ones.
/// The cost is recomputed from the model and must match the solver's claim.
pub fn solve_maxsat(cnf: &Cnf, cfg: &SolverConfig) -> Result<SatResult, Error> {
    if cnf.soft.is_empty() {
        return Err(SolverError::NoSoft.into());
    }
    if cfg.expired() {
        return Ok(SatResult::unknown("deadline passed"));
    }
    if cnf.has_empty_clause() {
        return Ok(SatResult::unsat());
    }
    let Some(template) = &cfg.maxsat_cmd else {
        return builtin_maxsat(cnf, cfg);
    };
    let out = match run_external(template, "{wcnf}", "wcnf", &cnf.emit_wcnf(), cfg) {
        Ok(out) => out,
        Err(why) => return Ok(SatResult::unknown(why)),
    };
    let parsed = match parse_solver_output(&out, cnf.num_vars) {
        Ok(p) => p,
        Err(why) => return Ok(SatResult::unknown(why)),
    };
    match parsed.status {
        Status::Sat if parsed.optimal => {
            let model = parsed.model.ok_or(SolverError::BadModel(usize::MAX))?;
            check_model(cnf, &model)?;
            let cost = cnf.cost(&model);
            if let Some(claimed) = parsed.cost {
                if claimed != cost {
                    return Err(Error::Invalid(format!("MaxSAT solver claimed cost {claimed}, model costs {cost}")));
                }
            }
            Ok(SatResult::sat(model, Some(cost)))
        }
        Status::Sat => Ok(SatResult::unknown("solver stopped before proving optimality")),
        Status::Unsat => Ok(SatResult::unsat()),
        Status::Unknown => Ok(SatResult::unknown("solver reported UNKNOWN")),
    }
}

/// "At most `k` of `lits` are true", sequential counter encoding.
fn at_most(cnf: &mut Cnf, lits: &[Lit], k: usize) {
    let n = lits.len();
    if k >= n {
        return;
    }
    if k == 0 {
        for &l in lits {
            cnf.add(vec![-l]);
        }
        return;
    }
    // s[i][j]: at least j + 1 of lits[0..=i] are true.
    let s: Vec<Vec<Lit>> = (0..n - 1).map(|_| (0..k).map(|_| cnf.new_var()).collect()).collect();
    cnf.add(vec![-lits[0], s[0][0]]);
    for j in 1..k {
        cnf.add(vec![-s[0][j]]);
    }
    for i in 1..n - 1 {
        cnf.add(vec![-lits[i], s[i][0]]);
        cnf.add(vec![-s[i - 1][0], s[i][0]]);
        for j in 1..k {
            cnf.add(vec![-lits[i], -s[i - 1][j - 1], s[i][j]]);
            cnf.add(vec![-s[i - 1][j], s[i][j]]);
        }
        cnf.add(vec![-lits[i], -s[i - 1][k - 1]]);
    }
    cnf.add(vec![-lits[n - 1], -s[n - 2][k - 1]]);
}

/// Linear search from above: each improvement adds a bound on the total
/// weight of relaxed soft clauses (weights expanded into repeated literals).
fn builtin_maxsat(cnf: &Cnf, cfg: &SolverConfig) -> Result<SatResult, Error> {
    let mut base = Cnf { num_vars: cnf.num_vars, hard: cnf.hard.clone(), soft: Vec::new() };
    let mut relax: Vec<(u64, Lit)> = Vec::with_capacity(cnf.soft.len());
    for (w, c) in &cnf.soft {
        let b = base.new_var();
        let mut c = c.clone();
        c.push(b);
        base.add(c);
        relax.push((*w, b));
    }
    let mut best: Option<(Vec<bool>, u64)> = None;
    loop {
        let mut f = base.clone();
        if let Some((_, cost)) = &best {
            let expanded: Vec<Lit> = relax.iter().flat_map(|&(w, b)| std::iter::repeat(b).take(w as usize)).collect();
            at_most(&mut f, &expanded, (*cost - 1) as usize);
        }
        let r = builtin_solve(&f, cfg)?;
        match r.status {
            Status::Sat => {
                let mut model = r.model.expect("SAT carries a model");
                model.truncate(cnf.num_vars as usize + 1);
                let cost = cnf.cost(&model);
                if cost == 0 {
                    return Ok(SatResult::sat(model, Some(0)));
                }
                best = Some((model, cost));
            }
            Status::Unsat => {
                return Ok(match best {
                    Some((model, cost)) => SatResult::sat(model, Some(cost)),
                    None => SatResult::unsat(),
                })
            }
            Status::Unknown => return Ok(SatResult::unknown(r.diagnostics.unwrap_or_default())),
        }
    }
}

static CALLS: AtomicU64 = AtomicU64::new(0);

/// Writes `content` to `<sha256>.<ext>` in the work directory, runs the
/// command and returns its standard output.
fn run_external(template: &str, placeholder: &str, ext: &str, content: &str, cfg: &SolverConfig) -> Result<String, String> {
    let hash = hex::encode(Sha256::digest(content.as_bytes()));
    let input = cfg.workdir.join(format!("{hash}.{ext}"));
    let call = CALLS.fetch_add(1, Ordering::Relaxed);
    let output = cfg.workdir.join(format!("{hash}.{}.{call}.out", std::process::id()));
    std::fs::write(&input, content).map_err(|e| format!("cannot write {}: {e}", input.display()))?;
    let cleanup = || {
        if !cfg.keep_files {
            let _ = std::fs::remove_file(&input);
            let _ = std::fs::remove_file(&output);
        }
    };
    let words = match shell_words::split(template) {
        Ok(w) if !w.is_empty() => w,
        _ => {
            cleanup();
            return Err(format!("cannot parse solver command {template:?}"));
        }
    };
    let path = input.to_string_lossy();
    let words: Vec<String> = words.iter().map(|w| w.replace(placeholder, &path)).collect();
    let result = (|| {
        let out_file = std::fs::File::create(&output).map_err(|e| format!("cannot create {}: {e}", output.display()))?;
        let mut child = Command::new(&words[0])
            .args(&words[1..])
            .stdin(Stdio::null())
            .stdout(out_file)
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot start {:?}: {e}", words[0]))?;
        let deadline = cfg.effective_deadline();
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) => {
                    if deadline.map_or(false, |d| Instant::now() >= d) {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err("solver timed out".to_string());
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(format!("waiting for solver: {e}")),
            }
        }
        std::fs::read_to_string(&output).map_err(|e| format!("cannot read solver output: {e}"))
    })();
    cleanup();
    result
}

/// What a solver printed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverOutput {
    pub status: Status,
    /// `s OPTIMUM FOUND`.
    pub optimal: bool,
    pub cost: Option<u64>,
    pub model: Option<Vec<bool>>,
}

/// Parses SAT competition output. `v` lines may hold literal lists
/// (optionally zero-terminated, possibly over several lines) or one 0/1
/// string with a character per variable.
pub fn parse_solver_output(text: &str, num_vars: u32) -> Result<SolverOutput, String> {
    let mut status = None;
    let mut optimal = false;
    let mut cost = None;
    let mut v_tokens: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let (tag, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match tag {
            "s" => {
                let st = match rest {
                    "SATISFIABLE" => Status::Sat,
                    "OPTIMUM FOUND" => {
                        optimal = true;
                        Status::Sat
                    }
                    "UNSATISFIABLE" => Status::Unsat,
                    "UNKNOWN" => Status::Unknown,
                    other => return Err(format!("unknown status line {other:?}")),
                };
                if status.replace(st).is_some() {
                    return Err("several status lines".into());
                }
            }
            "o" => {
                cost = Some(rest.parse::<u64>().map_err(|_| format!("bad cost line {rest:?}"))?);
            }
            "v" => v_tokens.extend(rest.split_whitespace()),
            _ => {}
        }
    }
    let status = status.ok_or("no status line")?;
    let nv = num_vars as usize;
    let model = if status == Status::Sat {
        let mut model = vec![false; nv + 1];
        let bitstring = v_tokens.len() == 1
            && v_tokens[0].len() == nv
            && nv > 1
            && v_tokens[0].bytes().all(|b| b == b'0' || b == b'1');
        if bitstring {
            for (i, b) in v_tokens[0].bytes().enumerate() {
                model[i + 1] = b == b'1';
            }
        } else {
            for tok in &v_tokens {
                let l: i64 = tok.parse().map_err(|_| format!("bad literal {tok:?}"))?;
                if l == 0 {
                    continue;
                }
                let v = l.unsigned_abs() as usize;
                if v > nv {
                    return Err(format!("literal {l} outside 1..={nv}"));
                }
                model[v] = l > 0;
            }
        }
        Some(model)
    } else {
        None
    };
    Ok(SolverOutput { status, optimal, cost, model })
}
