use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use serde::Serialize;
use govsim_core::compliance::ComplianceRuleModule;
use govsim_core::interop::{convert_file, LegacyMapping};
use govsim_core::ledger::file::{parse_chain, ChainFileError};
use govsim_core::ledger::{verify_self_describing, Block};
use govsim_core::sim::{self, inspect, Scenario, SimReport};

#[derive(Parser)]
#[command(name = "govsim", version, about = "Deterministic AI-governance ledger simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write chain.db, report.json and report.csv.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replaces the scenario's rule pack.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Verify a chain file and the report stored beside it.
    Verify {
        chain: PathBuf,
        /// Report to check against the chain. Defaults to report.json next to the chain.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a JSON view of a chain file.
    #[command(group(ArgGroup::new("view").required(true).multiple(true).args(["did", "proposals", "audits", "balances"])))]
    Inspect {
        chain: PathBuf,
        /// Record and history of one DID. Combined with --audits, filters audits.
        #[arg(long)]
        did: Option<String>,
        #[arg(long, conflicts_with_all = ["did", "audits", "balances"])]
        proposals: bool,
        #[arg(long)]
        audits: bool,
        #[arg(long, conflicts_with_all = ["did", "audits"])]
        balances: bool,
    },
    /// Convert legacy delimited rows into canonical messages.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            scenario,
            seed,
            rules,
            out,
        } => run(&scenario, seed, rules.as_deref(), &out).map(|_| true),
        Command::Verify { chain, report } => verify(&chain, report.as_deref()),
        Command::Inspect {
            chain,
            did,
            proposals,
            audits,
            balances,
        } => {
            let blocks = load_chain(&chain)?;
            let json = if audits {
                to_json(&inspect::audits_view(&blocks, did.as_deref())?)
            } else if proposals {
                to_json(&inspect::proposals_view(&blocks)?)
            } else if balances {
                to_json(&inspect::balances_view(&blocks)?)
            } else {
                let did = did.expect("clap requires one view");
                match inspect::did_view(&blocks, &did)? {
                    Some(v) => to_json(&v),
                    None => bail!("no DID {did} in {}", chain.display()),
                }
            };
            match writeln!(std::io::stdout().lock(), "{json}") {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(true),
            }
        }
        Command::Convert { input, map, out } => convert(&input, &map, &out).map(|_| true),
    }
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("views serialize")
}

fn run(path: &Path, seed: Option<u64>, rules: Option<&Path>, out: &Path) -> Result<()> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(rules) = rules {
        let text = fs::read_to_string(rules).with_context(|| format!("reading {}", rules.display()))?;
        let pack: Vec<ComplianceRuleModule> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", rules.display()))?;
        scenario.rules = Some(pack);
    }
    scenario.validate()?;
    let outcome = sim::run(scenario)?;
    sim::write_outputs(&outcome, out)?;
    let r = &outcome.report;
    println!(
        "{} blocks, {} events, root {}",
        r.blocks, r.events, r.root_hash
    );
    println!("{}", r.tokens.checksum);
    println!("wrote {}", out.display());
    Ok(())
}

fn load_chain(path: &Path) -> Result<Vec<Block>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = parse_chain(&bytes);
    match parsed.error {
        Some(e) => bail!("{}: {e}", path.display()),
        None => Ok(parsed.blocks),
    }
}

fn verify(chain: &Path, report: Option<&Path>) -> Result<bool> {
    let bytes = fs::read(chain).with_context(|| format!("reading {}", chain.display()))?;
    let parsed = parse_chain(&bytes);
    let verdict = verify_self_describing(&parsed.blocks);
    // A parse error stops at the first unreadable block, so it wins unless
    // the readable prefix already fails lower down.
    let parse_height = parsed.error.as_ref().map(|e| match e {
        ChainFileError::Block { height, .. } => *height,
        _ => 0,
    });
    match (parse_height, verdict.failed_height()) {
        (Some(p), v) if v.map_or(true, |v| p <= v) => {
            println!("FAIL chain: {}", parsed.error.expect("parse error present"));
            eprintln!("chain verification failed at height {}", p.max(1));
            return Ok(false);
        }
        (_, Some(h)) => {
            println!("FAIL chain: {}", to_line(&verdict));
            eprintln!("chain verification failed at height {h}");
            return Ok(false);
        }
        _ => {}
    }
    println!("OK chain: {}", to_line(&verdict));
    let fresh = match SimReport::from_chain(&parsed.blocks) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL report fold: {e}");
            return Ok(false);
        }
    };
    println!("OK report fold: {}", fresh.tokens.checksum);
    let default = chain.with_file_name("report.json");
    let stored = match report {
        Some(p) => Some(p.to_path_buf()),
        None => default.exists().then_some(default),
    };
    let Some(stored) = stored else {
        println!("SKIP report consistency: no report.json beside the chain");
        return Ok(true);
    };
    let text = fs::read_to_string(&stored).with_context(|| format!("reading {}", stored.display()))?;
    let diffs = sim::report_mismatches(&parsed.blocks, &text)?;
    if diffs.is_empty() {
        println!("OK report consistency: {}", stored.display());
        Ok(true)
    } else {
        println!("FAIL report consistency: {}", stored.display());
        for d in diffs {
            println!("  {d}");
        }
        Ok(false)
    }
}

fn to_line(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("verdict serializes")
}

fn convert(input: &Path, map: &Path, out: &Path) -> Result<()> {
    let mapping: LegacyMapping = serde_json::from_str(
        &fs::read_to_string(map).with_context(|| format!("reading {}", map.display()))?,
    )
    .with_context(|| format!("parsing {}", map.display()))?;
    let rows = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let messages = convert_file(&rows, &mapping)?;
    let body: Vec<String> = messages.iter().map(|m| m.to_canonical_json()).collect();
    fs::write(out, format!("[{}]\n", body.join(",\n")))
        .with_context(|| format!("writing {}", out.display()))?;
    println!("converted {} rows into {}", messages.len(), out.display());
    Ok(())
}
