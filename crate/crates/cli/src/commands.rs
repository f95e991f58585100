use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gdr_core::evaluation::{curves_csv, inject_errors, ErrorSpec, SessionReport};
use gdr_core::learner::LearnerConfig;
use gdr_core::orchestrator::{run_strategy_baselines, Session, SessionConfig, Strategy};
use gdr_core::violation::detect_all;
use gdr_core::{parse_rules, Dataset, RuleSet};
use serde::Serialize;

use crate::args::{InjectArgs, Input, RankArgs, RepairArgs, ServeArgs, SimulateArgs, Tuning};
use crate::CliError;

fn at(path: &Path, e: impl Into<CliError>) -> CliError {
    let e = e.into();
    CliError {
        code: e.code,
        message: format!("{}: {}", path.display(), e.message),
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::from_csv_path(path).map_err(|e| at(path, e))
}

pub fn load(input: &Input) -> Result<(Dataset, Arc<RuleSet>), CliError> {
    let data = read_dataset(&input.data)?;
    let text = fs::read_to_string(&input.rules).map_err(|e| at(&input.rules, e))?;
    let rules = parse_rules(&text, data.schema()).map_err(|e| at(&input.rules, e))?;
    Ok((data, Arc::new(rules)))
}

/// `gdr` or any strategy name, or `all`.
pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>, CliError> {
    if s == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<Strategy>()
                .map_err(|e| CliError::usage(format!("--strategy: {e}")))
        })
        .collect()
}

/// `1..5` and `1..=5` are inclusive ranges; otherwise a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::usage(format!("--seeds: expected `a..b` or a comma list, got `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

/// A count, or a percentage of `dirty` rounded to the nearest answer.
pub fn parse_budget(s: &str, dirty: usize) -> Result<usize, CliError> {
    let bad = || CliError::usage(format!("--budget: expected a count or a percentage, got `{s}`"));
    match s.strip_suffix('%') {
        Some(p) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            if !(0.0..=100.0).contains(&p) {
                return Err(bad());
            }
            Ok((p / 100.0 * dirty as f64).round() as usize)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

pub fn session_config(strategy: Strategy, budget: Option<usize>, t: &Tuning) -> SessionConfig {
    SessionConfig {
        strategy,
        budget,
        batch_size: t.batch_size.max(1),
        seed: t.seed,
        threshold: t.threshold,
        k_reveal: t.k_reveal,
        learner: LearnerConfig {
            min_examples: t.min_examples,
            ..LearnerConfig::default()
        },
        ..SessionConfig::default()
    }
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| at(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

#[derive(Debug, Serialize)]
pub struct MatrixReport {
    pub schema_version: u32,
    pub reports: Vec<SessionReport>,
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let truth_path = a.truth.as_ref().ok_or_else(|| {
        CliError::usage("simulate needs --truth <CSV>: the clean instance the simulated user answers from")
    })?;
    let strategies = parse_strategies(&a.strategy)?;
    let seeds = match &a.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![a.tuning.seed],
    };
    let (data, rules) = load(&a.input)?;
    let truth = read_dataset(truth_path)?;
    data.check_aligned(&truth).map_err(|e| at(truth_path, e))?;
    let dirty = detect_all(&data, Arc::clone(&rules)).0.len();
    let budget = a.budget.as_deref().map(|b| parse_budget(b, dirty)).transpose()?;
    let base = session_config(strategies[0], budget, &a.tuning);
    let instances: Vec<(u64, Dataset)> = seeds.iter().map(|&s| (s, data.clone())).collect();
    let mut reports = run_strategy_baselines(&instances, &rules, &truth, &strategies, &base)?;
    for r in &mut reports {
        log::info!(
            "{} seed {}: {} labels, {} model decisions, improvement {:.4}, violations {} -> {}",
            r.strategy,
            r.seed,
            r.labels,
            r.model_decisions,
            r.improvement,
            r.initial_violations,
            r.terminal_violations
        );
        if a.no_events {
            r.events.clear();
        }
    }
    let csv = curves_csv(&reports)?;
    let mut json = if reports.len() == 1 {
        serde_json::to_vec_pretty(&reports[0])?
    } else {
        serde_json::to_vec_pretty(&MatrixReport {
            schema_version: SessionReport::SCHEMA_VERSION,
            reports,
        })?
    };
    json.push(b'\n');
    write_out(a.out.as_deref(), &json)?;
    if let Some(out) = &a.out {
        let p = csv_path(out);
        fs::write(&p, csv).map_err(|e| at(&p, e))?;
    }
    Ok(())
}

pub fn repair(a: &RepairArgs) -> Result<(), CliError> {
    let (data, rules) = load(&a.input)?;
    let cfg = session_config(Strategy::Auto, None, &a.tuning);
    let mut s = Session::new(data, rules, None, cfg)?;
    s.auto_repair()?;
    log::info!(
        "applied {} changes; violations {} -> {}; {} suggestions left",
        s.changes().len(),
        s.initial_violations(),
        s.state().total_violations(),
        s.state().pending_len()
    );
    let mut buf = Vec::new();
    s.state().data().to_csv_writer(&mut buf)?;
    write_out(a.out.as_deref(), &buf)
}

pub fn rank(a: &RankArgs) -> Result<(), CliError> {
    let (data, rules) = load(&a.input)?;
    let cfg = SessionConfig {
        strategy: Strategy::GdrNoLearning,
        ..SessionConfig::default()
    };
    let mut s = Session::new(data, rules, None, cfg)?;
    let mut groups = s.groups()?;
    if let Some(n) = a.top {
        groups.truncate(n);
    }
    let mut json = serde_json::to_vec_pretty(&groups)?;
    json.push(b'\n');
    write_out(a.out.as_deref(), &json)
}

pub fn inject(a: &InjectArgs) -> Result<(), CliError> {
    let clean = read_dataset(&a.data)?;
    let spec = ErrorSpec {
        tuple_rate: a.rate,
        seed: a.seed,
        ..ErrorSpec::default()
    };
    let dirty = inject_errors(&clean, &spec)?;
    let mut buf = Vec::new();
    dirty.to_csv_writer(&mut buf)?;
    write_out(a.out.as_deref(), &buf)
}

pub fn build_session(a: &ServeArgs) -> Result<Session, CliError> {
    let strategy = a
        .strategy
        .parse::<Strategy>()
        .map_err(|e| CliError::usage(format!("--strategy: {e}")))?;
    let (data, rules) = load(&a.input)?;
    let truth = a.truth.as_deref().map(read_dataset).transpose()?;
    if let (Some(t), Some(p)) = (&truth, &a.truth) {
        data.check_aligned(t).map_err(|e| at(p, e))?;
    }
    Ok(Session::new(
        data,
        rules,
        truth.as_ref(),
        session_config(strategy, None, &a.tuning),
    )?)
}

pub fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let session = build_session(a)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::server::serve(session, a.port))
}
