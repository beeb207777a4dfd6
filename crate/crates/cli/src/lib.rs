//! Subcommands of the `p2pmac` tool. Each `cmd_*` function writes data to
//! `out`, diagnostics to `err`, and returns the process exit status.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use p2pmac_core::mac::{compile_policy, emit_contexts, emit_rules, make_challenge_for_path, parse_avc, verify_challenge, Challenge, ChallengeRequest};
use p2pmac_core::synth::synthetic_policy;
use p2pmac_core::xml::to_peer_policy;
use p2pmac_core::{parse_policy, parse_scenario, run_scenario, DecisionMode, PeerPolicy, PolicyConflict};

pub const EXIT_OK: i32 = 0;
/// Conflict found, challenge failed.
pub const EXIT_FAIL: i32 = 1;
/// Unreadable or malformed input.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "p2pmac", version, about = "Peer-to-peer security policies projected onto MAC rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile an XML policy into allow/neverallow rules and a context map.
    Compile {
        policy: PathBuf,
        /// Rules file; the context map goes next to it unless --contexts is given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        contexts: Option<PathBuf>,
    },
    /// List conflicting property pairs; exits 1 if there are any.
    Check { policy: PathBuf },
    /// Run a scenario file and print the transcript and metrics.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        refuse_threshold: Option<f64>,
        #[arg(long)]
        full_threshold: Option<f64>,
        /// Refuse whenever any required property conflicts, whatever the trust band.
        #[arg(long)]
        strict_conflicts: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an AVC log against a challenge.
    VerifyChallenge {
        challenge: PathBuf,
        avc_log: PathBuf,
        /// Derive the expected outcome from this policy when the challenge
        /// file holds only the request line.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Time policy compilation over synthetic policies of the given sizes.
    Bench {
        #[arg(default_values_t = [10, 20, 40, 80, 160, 320, 640])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        files_per_domain: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Compile { policy, out: path, contexts } => cmd_compile(&policy, path.as_deref(), contexts.as_deref(), out),
        Command::Check { policy } => cmd_check(&policy, out),
        Command::Simulate { scenario, seed, refuse_threshold, full_threshold, strict_conflicts, out: path } => {
            let flags = SimulateFlags { seed, refuse_threshold, full_threshold, strict_conflicts };
            cmd_simulate(&scenario, &flags, path.as_deref(), out)
        }
        Command::VerifyChallenge { challenge, avc_log, policy } => {
            cmd_verify_challenge(&challenge, &avc_log, policy.as_deref(), out)
        }
        Command::Bench { counts, files_per_domain, seed } => cmd_bench(&counts, files_per_domain, seed, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_policy(path: &Path) -> anyhow::Result<PeerPolicy> {
    let text = read(path)?;
    let doc = parse_policy(text.as_bytes()).with_context(|| path.display().to_string())?;
    to_peer_policy(&doc, "local").with_context(|| path.display().to_string())
}

/// Rules text and context map for a policy document.
pub fn compile_xml(xml: &str) -> anyhow::Result<(String, String)> {
    let doc = parse_policy(xml.as_bytes())?;
    let compiled = compile_policy(&to_peer_policy(&doc, "local")?);
    Ok((emit_rules(&compiled), emit_contexts(&compiled)))
}

pub fn cmd_compile(policy: &Path, rules_out: Option<&Path>, contexts_out: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<i32> {
    let (rules, contexts) = compile_xml(&read(policy)?).with_context(|| policy.display().to_string())?;
    match rules_out {
        Some(path) => {
            write_file(path, &rules)?;
            let ctx_path = contexts_out.map_or_else(|| path.with_extension("contexts"), Path::to_path_buf);
            write_file(&ctx_path, &contexts)?;
        }
        None => {
            out.write_all(rules.as_bytes())?;
            match contexts_out {
                Some(path) => write_file(path, &contexts)?,
                None => {
                    writeln!(out, "\n# contexts")?;
                    out.write_all(contexts.as_bytes())?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn describe_conflict(policy: &PeerPolicy, c: &PolicyConflict) -> String {
    let domain = policy.domain(c.domain).map_or_else(|| c.domain.to_string(), |d| d.name.clone());
    let mut s = format!("domain {domain}");
    if let Some(r) = c.resource.and_then(|r| policy.resource(r)) {
        let _ = write!(s, " file {}", r.path);
    }
    let _ = write!(s, ": {} x {}", c.first, c.second);
    s
}

pub fn cmd_check(policy: &Path, out: &mut dyn Write) -> anyhow::Result<i32> {
    let policy = load_policy(policy)?;
    let found = policy.conflicts();
    for c in &found {
        writeln!(out, "{}", describe_conflict(&policy, c))?;
    }
    writeln!(out, "{} conflict(s)", found.len())?;
    Ok(if found.is_empty() { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Clone, Default)]
pub struct SimulateFlags {
    pub seed: Option<u64>,
    pub refuse_threshold: Option<f64>,
    pub full_threshold: Option<f64>,
    pub strict_conflicts: bool,
}

/// Runs a scenario with command-line overrides and renders the report.
pub fn simulate_text(text: &str, flags: &SimulateFlags) -> anyhow::Result<String> {
    let mut scenario = parse_scenario(text)?;
    if let Some(seed) = flags.seed {
        scenario.seed = seed;
    }
    if let Some(t) = flags.refuse_threshold {
        scenario.config.refuse_threshold = t;
    }
    if let Some(t) = flags.full_threshold {
        scenario.config.full_trust_threshold = t;
    }
    if flags.strict_conflicts {
        scenario.mode = DecisionMode::Strict;
    }
    Ok(run_scenario(&scenario)?.render())
}

pub fn cmd_simulate(scenario: &Path, flags: &SimulateFlags, report_out: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<i32> {
    let report = simulate_text(&read(scenario)?, flags).with_context(|| scenario.display().to_string())?;
    match report_out {
        Some(path) => write_file(path, &report)?,
        None => out.write_all(report.as_bytes())?,
    }
    Ok(EXIT_OK)
}

/// Reads a challenge file. A bare request line needs `policy` to work out
/// what a correctly enforcing peer would log.
pub fn load_challenge(text: &str, policy: Option<&PeerPolicy>) -> anyhow::Result<Challenge> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if lines.len() > 1 {
        return Ok(Challenge::from_wire(text)?);
    }
    let line = lines.first().context("empty challenge")?;
    let request = ChallengeRequest::parse(line)?;
    let policy = policy.context("challenge has no expectation lines; pass --policy to derive them")?;
    let compiled = compile_policy(policy);
    Ok(make_challenge_for_path(&request.target_path, request.scontext, &request.command_stub, &compiled)?)
}

pub fn cmd_verify_challenge(challenge: &Path, avc_log: &Path, policy: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<i32> {
    let policy = policy.map(load_policy).transpose()?;
    let challenge = load_challenge(&read(challenge)?, policy.as_ref()).with_context(|| challenge.display().to_string())?;
    let log = read(avc_log)?;
    let trace = log
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_avc(l).with_context(|| format!("{}:{}", avc_log.display(), i + 1)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let verdict = verify_challenge(&challenge, &trace);
    writeln!(out, "{verdict}")?;
    Ok(if verdict.passed() { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub domains: usize,
    pub millis: f64,
}

/// Best per-compile time over several batches, for each domain count.
pub fn bench_compile(counts: &[usize], files_per_domain: usize, seed: u64) -> Vec<BenchRow> {
    const BATCHES: usize = 5;
    counts
        .iter()
        .map(|&n| {
            let policy = synthetic_policy(n, files_per_domain, seed);
            // enough iterations per batch to dwarf timer resolution
            let start = Instant::now();
            std::hint::black_box(compile_policy(&policy));
            let once = start.elapsed().as_secs_f64().max(1e-7);
            let iters = ((0.01 / once) as usize).clamp(1, 10_000);
            let best = (0..BATCHES)
                .map(|_| {
                    let start = Instant::now();
                    for _ in 0..iters {
                        std::hint::black_box(compile_policy(std::hint::black_box(&policy)));
                    }
                    start.elapsed().as_secs_f64() / iters as f64
                })
                .fold(f64::INFINITY, f64::min);
            BenchRow { domains: n, millis: best * 1e3 }
        })
        .collect()
}

/// Coefficient of determination of the least-squares line through the
/// points. `None` below two points or when x is constant.
pub fn r_squared(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    if syy == 0.0 {
        return Some(1.0);
    }
    Some(sxy * sxy / (sxx * syy))
}

fn fit(rows: &[BenchRow], min_domains: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.domains > min_domains).map(|r| (r.domains as f64, r.millis)).collect();
    r_squared(&pts)
}

pub fn render_bench(rows: &[BenchRow]) -> String {
    let mut s = String::from("domains  millis\n");
    for r in rows {
        let _ = writeln!(s, "{:>7}  {:.4}", r.domains, r.millis);
    }
    let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
    let _ = writeln!(s, "r2={}", show(fit(rows, 0)));
    let _ = writeln!(s, "r2_above_100={}", show(fit(rows, 100)));
    s
}

pub fn bench_r2_above(rows: &[BenchRow], min_domains: usize) -> Option<f64> {
    fit(rows, min_domains)
}

pub fn cmd_bench(counts: &[usize], files_per_domain: usize, seed: u64, out: &mut dyn Write) -> anyhow::Result<i32> {
    if let Some(bad) = counts.iter().find(|&&c| c == 0) {
        anyhow::bail!("domain counts must be positive, got {bad}");
    }
    let rows = bench_compile(counts, files_per_domain, seed);
    out.write_all(render_bench(&rows).as_bytes())?;
    Ok(EXIT_OK)
}
