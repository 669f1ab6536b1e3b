//! Subcommand implementations.

use std::path::{Path, PathBuf};

use corral_core::loadgen::{matrix_csv, run_matrix, LoadProfile};
use corral_core::scenario::{Gating, Scenario, ScenarioError};
use corral_core::sim::{latency_csv, run_scenario, trajectory_csv, visits_csv};

use crate::workspace;
use crate::CliError;

pub fn run(
    scenario_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    gating: Option<Gating>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(scenario_path)
        .map_err(|e| CliError::usage(format!("{}: {e}", scenario_path.display())))?;
    let mut scenario: Scenario = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", scenario_path.display())))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(gating) = gating {
        scenario.gating = gating;
    }
    scenario.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let result = run_scenario(&scenario).map_err(|e| match e {
        ScenarioError::Invalid { .. } => CliError::usage(e.to_string()),
        ScenarioError::Run(e) => CliError::runtime(e),
    })?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("creating {}: {e}", out_dir.display())))?;
    let write = |name: &str, contents: String| -> Result<(), CliError> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
    };
    write("trajectory.csv", trajectory_csv(&result.trajectories))?;
    write("latency.csv", latency_csv(&result.latencies))?;
    write("visits.csv", visits_csv(&result.visits))?;
    write("blocks.log", result.block_log.clone())?;

    let summary = &result.summary;
    let verdict = if summary.waypoint_order_ok { "PASS" } else { "VIOLATED" };
    let mut text = String::new();
    text.push_str(&format!("delivered_hz: {:.3}\n", summary.delivered_hz));
    text.push_str(&format!("latency_p50_ms: {:.3}\n", summary.p50_ms));
    text.push_str(&format!("latency_p95_ms: {:.3}\n", summary.p95_ms));
    text.push_str(&format!("latency_p99_ms: {:.3}\n", summary.p99_ms));
    text.push_str(&format!("waypoint_order: {verdict}\n"));
    for (robot, variance) in &summary.yaw_rate_variance {
        text.push_str(&format!("yaw_rate_variance[{robot}]: {variance:.6}\n"));
    }
    write("summary.txt", text.clone())?;
    print!("{text}");
    Ok(())
}

pub fn issue(
    org: &str,
    subject: &str,
    attributes: &[String],
    workspace_dir: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let dir = workspace::resolve_dir(workspace_dir);
    let roster = workspace::load_or_init(&dir)?;
    let ca = workspace::ca_for(&roster, org)?;
    let attrs: Vec<&str> = attributes
        .iter()
        .map(|s| s.as_str())
        .filter(|s| !s.is_empty())
        .collect();
    let cert = ca
        .issue(subject, attrs)
        .map_err(|e| CliError::usage(e.to_string()))?;

    let out_dir = out.unwrap_or_else(|| dir.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("creating {}: {e}", out_dir.display())))?;
    let bin_path = out_dir.join(format!("{subject}.cert"));
    let txt_path = out_dir.join(format!("{subject}.cert.txt"));
    std::fs::write(&bin_path, cert.to_bytes())
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", bin_path.display())))?;
    std::fs::write(&txt_path, cert.to_text())
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", txt_path.display())))?;
    println!("issued {} ({} attributes) -> {}", subject, cert.attributes.len(), bin_path.display());
    Ok(())
}

fn parse_profile(spec: &str, duration: f64, seed: u64) -> Result<LoadProfile, CliError> {
    let bad = || CliError::usage(format!("bad profile {spec:?}; want <rate>x<publishers>:<on|off>"));
    let (load, gate) = spec.split_once(':').ok_or_else(bad)?;
    let (rate, publishers) = load.split_once('x').ok_or_else(bad)?;
    let rate_hz: f64 = rate.parse().map_err(|_| bad())?;
    let publishers: usize = publishers.parse().map_err(|_| bad())?;
    let gating: Gating = gate.parse().map_err(|_| bad())?;
    if !(rate_hz > 0.0) || publishers == 0 {
        return Err(bad());
    }
    let mut profile = LoadProfile::new(rate_hz, publishers, gating.is_on());
    profile.duration_s = duration;
    profile.seed = seed;
    Ok(profile)
}

pub fn bench(
    profiles: &[String],
    duration: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    if profiles.is_empty() {
        return Err(CliError::usage("profile list must be non-empty"));
    }
    if !(duration > 0.0) {
        return Err(CliError::usage("duration must be > 0"));
    }
    let parsed = profiles
        .iter()
        .map(|p| parse_profile(p, duration, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = run_matrix(parsed);
    let csv = matrix_csv(&rows);
    match out {
        Some(path) => std::fs::write(&path, csv)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn inspect_blocks(
    log: &Path,
    status: Option<&str>,
    function: Option<&str>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(log)
        .map_err(|e| CliError::usage(format!("{}: {e}", log.display())))?;
    let mut shown = 0usize;
    let mut total = 0usize;
    println!("{:<12} {:<10} {:<12} {:<12} {:>12} {:>12}", "tx_id", "function", "submitter", "status", "submit_ms", "commit_ms");
    for (lineno, line) in text.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::usage(format!("{}:{}: {e}", log.display(), lineno + 1)))?;
        total += 1;
        let line_status = v["status"].as_str().unwrap_or("");
        let line_function = v["function"].as_str().unwrap_or("");
        if status.is_some_and(|s| s != line_status) {
            continue;
        }
        if function.is_some_and(|f| f != line_function) {
            continue;
        }
        shown += 1;
        let commit = v["commit_ms"]
            .as_f64()
            .map(|c| format!("{c:.1}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<12} {:<10} {:<12} {:<12} {:>12.1} {:>12}",
            v["tx_id"].as_str().unwrap_or(""),
            line_function,
            v["submitter"].as_str().unwrap_or(""),
            line_status,
            v["submit_ms"].as_f64().unwrap_or(0.0),
            commit,
        );
    }
    eprintln!("{shown} of {total} transactions shown");
    Ok(())
}
