//! Command-line front end: enumeration, sweeps, single-value queries,
//! packing inspection, derivation replay, and weighted-hypersurface
//! invariants.
//!
//! Exit codes: 0 success, 1 assertion or claim failure (including a
//! non-stabilized automatic cap), 2 usage error.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reidrr::b5::{B5Record, ConstraintSet};
use reidrr::basket::Basket;
use reidrr::fmt_rat;
use reidrr::ineq::DerivationScript;
use reidrr::rr::WeightedBasket;
use reidrr::s2::{enumerate_s2, reproduction_report, stabilization_sweep, summarize, S2Record};
use reidrr::whs::WeightedHypersurface;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Bad input (malformed baskets, unreadable files, out-of-range flags):
/// exit code 2, as opposed to assertion or claim failures (exit 1).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// The published cardinality the automatic mode checks against.
const S2_TARGET: usize = 263;

#[derive(Parser)]
#[command(
    name = "reidrr",
    version,
    about = "Weighted-basket calculus for minimal 3-folds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct EnumerateOpts {
    /// Tail cap: a number >= 5, or `auto` for the stabilization sweep.
    #[arg(long, default_value = "auto")]
    r_max: String,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output file; relative paths resolve against $REIDRR_OUT_DIR.
    /// Records go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate degree-5 candidate baskets.
    EnumerateB5(EnumerateOpts),
    /// Enumerate the packing-closed candidate list; prints the final
    /// count on the last line on success.
    EnumerateS2 {
        #[command(flatten)]
        opts: EnumerateOpts,
        /// Sweep range used by `--r-max auto`.
        #[arg(long, default_value_t = 5)]
        sweep_from: i64,
        #[arg(long, default_value_t = 10)]
        sweep_to: i64,
    },
    /// Run the stabilization sweep and print the count per tail cap.
    Sweep {
        /// Comma-separated increasing caps, e.g. `5,6,7,8`.
        #[arg(long, default_value = "5,6,7,8")]
        r_values: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Evaluate a formal plurigenus chi_m of a weighted basket.
    Chi {
        #[arg(long)]
        basket: String,
        #[arg(long)]
        p2: i64,
        #[arg(long)]
        chi: i64,
        #[arg(long)]
        m: i64,
    },
    /// Evaluate the canonical volume of a weighted basket.
    K3 {
        #[arg(long)]
        basket: String,
        #[arg(long)]
        p2: i64,
        #[arg(long)]
        chi: i64,
    },
    /// List the prime packings of a basket, or apply one by index.
    Pack {
        #[arg(long)]
        basket: String,
        /// Apply the move with this index and print the new basket.
        #[arg(long)]
        apply: Option<usize>,
    },
    /// Replay derivation scripts and verify every claimed bound.
    Replay {
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Invariants of a weighted hypersurface: `d a0 a1 a2 a3 a4`.
    Whs { spec: Vec<i64> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::EnumerateB5(opts) => enumerate_b5_cmd(opts),
        Command::EnumerateS2 {
            opts,
            sweep_from,
            sweep_to,
        } => enumerate_s2_cmd(opts, sweep_from, sweep_to),
        Command::Sweep {
            r_values,
            jobs,
            format,
        } => sweep_cmd(&r_values, jobs, format),
        Command::Chi { basket, p2, chi, m } => {
            let w = weighted(&basket, p2, chi)?;
            if m < 2 {
                return Err(usage("chi_m needs m >= 2"));
            }
            println!("{}", fmt_rat(&w.chi_m(m)));
            Ok(ExitCode::SUCCESS)
        }
        Command::K3 { basket, p2, chi } => {
            let w = weighted(&basket, p2, chi)?;
            println!("{}", fmt_rat(&w.k3()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Pack { basket, apply } => pack_cmd(&basket, apply),
        Command::Replay { files, format } => replay_cmd(&files, format),
        Command::Whs { spec } => whs_cmd(&spec),
    }
}

fn weighted(basket: &str, p2: i64, chi: i64) -> Result<WeightedBasket> {
    let basket: Basket = basket
        .parse()
        .map_err(|e| usage(format!("malformed basket: {e}")))?;
    Ok(WeightedBasket::new(basket, p2, chi))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")
}

fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("REIDRR_OUT_DIR") {
        Some(dir) => PathBuf::from(dir).join(path),
        None => path.to_path_buf(),
    }
}

fn parse_r_max(s: &str) -> Result<Option<i64>> {
    if s == "auto" {
        return Ok(None);
    }
    let r: i64 = s.parse().map_err(|_| usage(format!("bad --r-max `{s}`")))?;
    if r < 5 {
        return Err(usage("--r-max must be at least 5"));
    }
    Ok(Some(r))
}

fn emit(records: Vec<serde_json::Value>, format: Format, out: Option<&Path>) -> Result<()> {
    let mut text = String::new();
    match format {
        Format::Json => {
            for r in &records {
                writeln!(text, "{}", serde_json::to_string(r)?)?;
            }
        }
        Format::Csv | Format::Table => {
            let headers: Vec<String> = match records.first() {
                Some(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
                _ => Vec::new(),
            };
            let cell = |v: &serde_json::Value| -> String {
                match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                }
            };
            let sep = if format == Format::Csv { "," } else { "\t" };
            writeln!(text, "{}", headers.join(sep))?;
            for r in &records {
                if let serde_json::Value::Object(map) = r {
                    let row: Vec<String> = headers
                        .iter()
                        .map(|h| cell(map.get(h).unwrap_or(&serde_json::Value::Null)))
                        .collect();
                    writeln!(text, "{}", row.join(sep))?;
                }
            }
        }
    }
    match out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn enumerate_b5_cmd(opts: EnumerateOpts) -> Result<ExitCode> {
    let r_max = parse_r_max(&opts.r_max)?.unwrap_or(5);
    let c = ConstraintSet::standard(r_max);
    let candidates = pool(opts.jobs)?.install(|| reidrr::b5::enumerate_b5(&c))?;
    let records: Vec<serde_json::Value> = candidates
        .iter()
        .map(|cand| serde_json::to_value(B5Record::from(cand)).unwrap())
        .collect();
    let n = records.len();
    emit(records, opts.format, opts.out.as_deref())?;
    println!("{n}");
    Ok(ExitCode::SUCCESS)
}

fn enumerate_s2_cmd(opts: EnumerateOpts, sweep_from: i64, sweep_to: i64) -> Result<ExitCode> {
    let pool = pool(opts.jobs)?;
    let r_max = match parse_r_max(&opts.r_max)? {
        Some(r) => r,
        None => {
            // Automatic cap: only usable when the sweep stabilizes and
            // the tail analysis confirms no family survives past it.
            if sweep_from < 5 || sweep_to < sweep_from {
                return Err(usage(format!("bad sweep range {sweep_from}..{sweep_to}")));
            }
            let r_values: Vec<i64> = (sweep_from..=sweep_to).collect();
            let report = pool.install(|| {
                reproduction_report(&ConstraintSet::standard(5), &r_values, S2_TARGET)
            })?;
            match report.final_count {
                Some(_) => report.tail.cap.unwrap(),
                None => {
                    eprintln!("enumeration does not stabilize; refusing to report a final count");
                    eprintln!("{}", serde_json::to_string_pretty(&report)?);
                    return Ok(ExitCode::from(1));
                }
            }
        }
    };
    let c = ConstraintSet::standard(r_max);
    let entries = pool.install(|| enumerate_s2(&c))?;
    let records: Vec<serde_json::Value> = entries
        .iter()
        .map(|e| serde_json::to_value(S2Record::from(e)).unwrap())
        .collect();
    let n = records.len();
    emit(records, opts.format, opts.out.as_deref())?;
    if let Some(out) = opts.out.as_deref() {
        let summary = summarize(&entries);
        let mut path = resolve_out(out).into_os_string();
        path.push(".summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    }
    println!("{n}");
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(r_values: &str, jobs: usize, format: Format) -> Result<ExitCode> {
    let r_values: Vec<i64> = r_values
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| usage(format!("bad cap `{s}`")))
        })
        .collect::<Result<_>>()?;
    if r_values.windows(2).any(|w| w[0] >= w[1]) || r_values.iter().any(|&r| r < 5) {
        return Err(usage("caps must be increasing and at least 5"));
    }
    let report =
        pool(jobs)?.install(|| stabilization_sweep(&ConstraintSet::standard(5), &r_values))?;
    if format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for row in &report.rows {
            println!("r_max={}\tcount={}", row.r_max, row.count);
        }
        match report.stable_at {
            Some(r) => println!("stable at r_max = {r}"),
            None => println!("not stabilized"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn pack_cmd(basket: &str, apply: Option<usize>) -> Result<ExitCode> {
    let basket: Basket = basket
        .parse()
        .map_err(|e| usage(format!("malformed basket: {e}")))?;
    let moves = basket.available_packings();
    match apply {
        Some(i) => {
            let mv = moves
                .get(i)
                .ok_or_else(|| anyhow!("no move with index {i} ({} available)", moves.len()))?;
            let packed = basket.apply_packing(mv)?;
            println!("{packed}");
        }
        None => {
            for (i, mv) in moves.iter().enumerate() {
                let p = basket.points()[mv.first];
                let q = basket.points()[mv.second];
                println!("{i}: {p} + {q} -> {}", mv.result);
            }
            println!("{} moves", moves.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn replay_cmd(files: &[PathBuf], format: Format) -> Result<ExitCode> {
    if files.is_empty() {
        return Err(usage("replay needs at least one script file"));
    }
    let mut all_passed = true;
    let mut reports = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| usage(format!("reading {}: {e}", file.display())))?;
        let script = DerivationScript::parse(&text)
            .map_err(|e| usage(format!("{}: {e}", file.display())))?;
        let report = script.run();
        all_passed &= report.passed;
        if format == Format::Json {
            reports.push(report);
        } else {
            println!(
                "{}: {}",
                report.name,
                if report.passed { "PASS" } else { "FAIL" }
            );
            for step in &report.steps {
                println!(
                    "  [{}] {} -- {}",
                    if step.ok { "ok" } else { "FAIL" },
                    step.text,
                    step.detail
                );
            }
        }
    }
    if format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn whs_cmd(spec: &[i64]) -> Result<ExitCode> {
    if spec.len() != 6 {
        return Err(usage("expected 6 integers: d a0 a1 a2 a3 a4"));
    }
    let h = WeightedHypersurface::new(spec[0], [spec[1], spec[2], spec[3], spec[4], spec[5]])
        .map_err(|e| usage(e.to_string()))?;
    let out = serde_json::json!({
        "k3": fmt_rat(&h.k3()),
        "p": h.plurigenera(),
    });
    println!("{}", serde_json::to_string(&out)?);
    Ok(ExitCode::SUCCESS)
}
