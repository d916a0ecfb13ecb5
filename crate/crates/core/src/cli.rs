//! `urm` command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when checks ran and at least one
//! failed, 2 for an invalid invocation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::collective::{mes_report, MesFamily, MesLabel};
use crate::mub::{unbiasedness_report, BasisLabel};
use crate::oracle::cross_validate;
use crate::protocol::{run_episode, sweep_protocol_a, sweep_protocol_b, Retrieval, SweepReport};
use crate::qstate::{seeded_rng, Qudit, DEFAULT_TOL};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "urm", version, about = "Verify unrecorded-measurement retrieval protocols for qudits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check pairwise unbiasedness of all d + 1 single-qudit bases.
    VerifyMub(Common),
    /// Check orthonormality, entanglement and mutual unbiasedness of the two MES bases.
    VerifyMes(Common),
    /// Run sampled episodes: prepare, hidden measurement, control, inference.
    Run(RunArgs),
    /// Exhaustive sweep over preparations, hidden records and control outcomes.
    Sweep(SweepArgs),
    /// Compare enumerated quantum supports against the modular predictions.
    CrossValidate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Qudit dimension (odd prime).
    #[arg(long)]
    pub d: u64,
    #[arg(long, env = "URM_TOLERANCE", default_value_t = DEFAULT_TOL)]
    pub tolerance: f64,
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    A,
    B,
}

impl From<FamilyArg> for MesFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::A => MesFamily::A,
            FamilyArg::B => MesFamily::B,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Control family: `a` retrieves the basis, `b` the outcome given the basis.
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Hidden basis: an integer in [0, d) or `c` for the computational basis.
    /// Drawn uniformly when omitted.
    #[arg(long)]
    pub b: Option<String>,
    /// Hidden outcome; requires --b. Born-sampled when omitted.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sweep only one control family; both when omitted.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
}

/// Machine-readable report. The field set is fixed for every command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub d: u32,
    pub params: BTreeMap<String, Value>,
    pub counts: BTreeMap<String, Value>,
    pub max_residual: f64,
    pub elapsed_ms: u128,
    pub pass: bool,
    #[serde(skip)]
    transcript: Vec<String>,
}

impl Report {
    fn new(command: &str, d: u32) -> Self {
        Self {
            command: command.to_string(),
            d,
            params: BTreeMap::new(),
            counts: BTreeMap::new(),
            max_residual: 0.0,
            elapsed_ms: 0,
            pass: false,
            transcript: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    fn count(&mut self, key: &str, value: impl Into<Value>) {
        self.counts.insert(key.to_string(), value.into());
    }

    fn render_text(&self) -> String {
        let mut s = String::new();
        if !self.transcript.is_empty() {
            for line in &self.transcript {
                s.push_str(line);
                s.push('\n');
            }
            s.push_str(&format!("pass: {}\n", self.pass));
            return s;
        }
        s.push_str(&format!("command      {}\n", self.command));
        s.push_str(&format!("d            {}\n", self.d));
        for (k, v) in &self.params {
            s.push_str(&format!("param        {k} = {v}\n"));
        }
        let width = self.counts.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in &self.counts {
            s.push_str(&format!("  {k:<width$}  {v}\n"));
        }
        s.push_str(&format!("max_residual {:e}\n", self.max_residual));
        s.push_str(&format!("elapsed_ms   {}\n", self.elapsed_ms));
        s.push_str(&format!("pass         {}\n", self.pass));
        s
    }

    fn render_csv(&self) -> Result<String, csv::Error> {
        let mut header = vec!["command".to_string(), "d".into(), "pass".into(), "max_residual".into(), "elapsed_ms".into()];
        let mut row = vec![
            self.command.clone(),
            self.d.to_string(),
            self.pass.to_string(),
            format!("{:e}", self.max_residual),
            self.elapsed_ms.to_string(),
        ];
        for (k, v) in self.params.iter().map(|(k, v)| (format!("param.{k}"), v)).chain(self.counts.iter().map(|(k, v)| (k.clone(), v))) {
            header.push(k);
            row.push(match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            });
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        w.write_record(&row)?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("utf-8 fields"))
    }
}

#[derive(Debug)]
struct UsageError(String);

fn qudit(d: u64) -> Result<Qudit, UsageError> {
    Qudit::new(d).map_err(|_| UsageError(format!("d must be an odd prime (got {d})")))
}

/// Parses arguments, runs the command and writes the report. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let common = match &cli.command {
        Command::VerifyMub(c) | Command::VerifyMes(c) | Command::CrossValidate(c) => c.clone(),
        Command::Run(r) => r.common.clone(),
        Command::Sweep(s) => s.common.clone(),
    };
    let report = match execute(&cli.command) {
        Ok(r) => r,
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let text = if common.json {
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        s
    } else if common.csv {
        match report.render_csv() {
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_FAIL;
            }
        }
    } else {
        report.render_text()
    };
    let written = match &common.out {
        Some(path) => fs::write(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write report: {e}");
        return EXIT_FAIL;
    }
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn execute(command: &Command) -> Result<Report, UsageError> {
    match command {
        Command::VerifyMub(c) => cmd_verify_mub(c),
        Command::VerifyMes(c) => cmd_verify_mes(c),
        Command::Run(r) => cmd_run(r),
        Command::Sweep(s) => cmd_sweep(s),
        Command::CrossValidate(c) => cmd_cross_validate(c),
    }
}

fn cmd_verify_mub(c: &Common) -> Result<Report, UsageError> {
    let q = qudit(c.d)?;
    let start = Instant::now();
    let r = unbiasedness_report(&q);
    let mut report = Report::new("verify-mub", r.d);
    report.elapsed_ms = start.elapsed().as_millis();
    report.param("tolerance", c.tolerance);
    report.count("bases", r.bases);
    report.count("basis_pairs", r.basis_pairs);
    report.count("overlaps_examined", r.overlaps_examined);
    report.count("max_deviation", r.max_deviation);
    report.count("max_gram_residual", r.max_gram_residual);
    report.max_residual = r.max_deviation;
    report.pass = r.max_deviation < c.tolerance;
    Ok(report)
}

fn cmd_verify_mes(c: &Common) -> Result<Report, UsageError> {
    let q = qudit(c.d)?;
    let start = Instant::now();
    let r = mes_report(&q);
    let mut report = Report::new("verify-mes", r.d);
    report.elapsed_ms = start.elapsed().as_millis();
    report.param("tolerance", c.tolerance);
    report.param("families", json!(["a", "b"]));
    report.count("states_per_family", r.states_per_family);
    report.count("family_a_gram_residual", r.family_a_gram_residual);
    report.count("family_b_gram_residual", r.family_b_gram_residual);
    report.count("max_partial_trace_deviation", r.max_partial_trace_deviation);
    report.count("cross_overlaps", r.cross_overlaps);
    report.count("cross_overlap_target", r.cross_overlap_target);
    report.count("max_cross_overlap_deviation", r.max_cross_overlap_deviation);
    report.max_residual = r.max_residual();
    report.pass = report.max_residual < c.tolerance;
    Ok(report)
}

fn parse_basis(q: &Qudit, raw: &str) -> Result<BasisLabel, UsageError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "c" | "comp" | "computational" => Ok(BasisLabel::Computational),
        other => match other.parse::<u64>() {
            Ok(b) if b < q.dim() as u64 => Ok(BasisLabel::Shifted(q.elem(b as i64))),
            _ => Err(UsageError(format!(
                "--b must be an integer in [0, {}) or `c` (got {raw})",
                q.dim()
            ))),
        },
    }
}

fn cmd_run(r: &RunArgs) -> Result<Report, UsageError> {
    let q = qudit(r.common.d)?;
    let basis = r.b.as_deref().map(|raw| parse_basis(&q, raw)).transpose()?;
    let outcome = match r.m {
        None => None,
        Some(_) if basis.is_none() => return Err(UsageError("--m requires --b".into())),
        Some(m) if m >= q.dim() as u64 => {
            return Err(UsageError(format!("--m must be in [0, {})", q.dim())))
        }
        Some(m) => Some(q.elem(m as i64)),
    };
    let control: MesFamily = r.family.into();
    let start = Instant::now();
    let mut rng = seeded_rng(r.seed);
    let mut report = Report::new("run", q.modulus().get());
    report.param("family", control.to_string());
    report.param("seed", r.seed);
    report.param("trials", r.trials);
    if let Some(b) = basis {
        report.param("b", b.to_string());
    }
    if let Some(m) = outcome {
        report.param("m", m.value());
    }
    report
        .transcript
        .push(format!("run d={} family={} seed={} trials={}", q.dim(), control, r.seed, r.trials));

    let (mut correct, mut undetermined, mut wrong) = (0u64, 0u64, 0u64);
    for episode in 1..=r.trials {
        let d = q.dim() as i64;
        let prepared = MesLabel::new(MesFamily::A, q.elem(rng.random_range(0..d)), q.elem(rng.random_range(0..d)));
        let t = run_episode(&q, prepared, basis, outcome, control, &mut rng)
            .map_err(|e| UsageError(e.to_string()))?;
        let verdict = t.verdict();
        match verdict {
            Some(true) => correct += 1,
            Some(false) => wrong += 1,
            None => undetermined += 1,
        }
        let retrieved = match t.retrieval {
            Retrieval::Basis(r) => r.to_string(),
            Retrieval::Outcome(Some(m)) => format!("outcome {m} given b={}", t.record.basis),
            Retrieval::Outcome(None) => "no outcome formula for the computational basis".to_string(),
        };
        let tag = match verdict {
            Some(true) => "correct",
            Some(false) => "WRONG",
            None => "nothing retrieved",
        };
        if r.trials == 1 {
            report.count("prepared", t.prepared.to_string());
            report.count("hidden_basis", t.record.basis.to_string());
            report.count("hidden_m", t.record.m.value());
            report.count("control", t.control.to_string());
            report.count("retrieved", retrieved.clone());
        }
        report.transcript.push(format!(
            "episode {episode}: prepared={} hidden=[{}] control={} -> {retrieved} [{tag}]",
            t.prepared, t.record, t.control
        ));
    }
    report.count("episodes", r.trials);
    report.count("correct", correct);
    report.count("undetermined", undetermined);
    report.count("wrong", wrong);
    report
        .transcript
        .push(format!("summary: episodes={} correct={correct} undetermined={undetermined} wrong={wrong}", r.trials));
    report.elapsed_ms = start.elapsed().as_millis();
    report.pass = wrong == 0;
    Ok(report)
}

fn add_sweep(report: &mut Report, prefix: &str, s: &SweepReport) {
    let key = |k: &str| format!("{prefix}{k}");
    report.count(&key("cases_total"), s.cases_total);
    report.count(&key("support_total"), s.support_total);
    report.count(&key("correct_definite"), s.correct_definite);
    report.count(&key("undetermined"), s.undetermined);
    report.count(&key("wrong_definite"), s.wrong_definite);
    report.count(&key("constraint_violations"), s.constraint_violations);
    report.count(&key("completeness_failures"), s.completeness_failures);
    report.count(&key("computational_cases"), s.computational_cases);
    report.count(&key("computational_support"), s.computational_support);
    report.count(&key("computational_observations"), json!(s.computational_observations));
    report.max_residual = report.max_residual.max(s.max_residual);
}

fn cmd_sweep(s: &SweepArgs) -> Result<Report, UsageError> {
    let q = qudit(s.common.d)?;
    let start = Instant::now();
    let mut report = Report::new("sweep", q.modulus().get());
    report.param("tolerance", s.common.tolerance);
    let families: Vec<MesFamily> = match s.family {
        Some(f) => vec![f.into()],
        None => vec![MesFamily::A, MesFamily::B],
    };
    report.param("family", families.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","));
    let mut pass = true;
    for family in &families {
        let r = match family {
            MesFamily::A => sweep_protocol_a(&q),
            MesFamily::B => sweep_protocol_b(&q),
        };
        let prefix = if families.len() > 1 { format!("{family}.") } else { String::new() };
        add_sweep(&mut report, &prefix, &r);
        pass &= r.passed();
    }
    report.elapsed_ms = start.elapsed().as_millis();
    report.pass = pass && report.max_residual < s.common.tolerance;
    Ok(report)
}

fn cmd_cross_validate(c: &Common) -> Result<Report, UsageError> {
    let q = qudit(c.d)?;
    let start = Instant::now();
    let r = cross_validate(&q);
    let mut report = Report::new("cross-validate", q.modulus().get());
    report.param("tolerance", c.tolerance);
    report.count("cases", r.cases);
    report.count("outcomes_compared", r.outcomes_compared);
    report.count("support_mismatches", r.support_mismatches);
    report.count("inference_disagreements", r.inference_disagreements);
    report.count("support_size_anomalies", r.support_size_anomalies);
    report.count("max_probability_residual", r.max_probability_residual);
    report.count("max_post_state_residual", r.max_post_state_residual);
    report.max_residual = r.max_probability_residual.max(r.max_post_state_residual);
    report.elapsed_ms = start.elapsed().as_millis();
    report.pass = r.passed(c.tolerance);
    Ok(report)
}
