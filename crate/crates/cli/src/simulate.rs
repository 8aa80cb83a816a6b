use std::path::Path;

use futuresim_core::agents::{policy_catalog, run_batch, BatchResult, PolicyAssignment};
use futuresim_core::content::{load_scenario, ContentDir};
use futuresim_core::{RoleId, Scenario};
use serde_json::json;

use crate::{table, CmdResult, Failure, SimulateArgs};

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";

fn invalid(message: impl Into<String>) -> Failure {
    Failure::new(1, message)
}

pub fn load(scenario: &str, content_dir: Option<&Path>) -> Result<Scenario, Failure> {
    let path = Path::new(scenario);
    if path.is_file() {
        let bytes = std::fs::read(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        return load_scenario(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())));
    }
    ContentDir::new(content_dir.map(Path::to_path_buf))
        .load(scenario)
        .map_err(|e| invalid(e.to_string()))
}

/// Expands `role=policy` pairs; `*=policy` fills every role not named.
pub fn assignment(scenario: &Scenario, pairs: &[String]) -> Result<PolicyAssignment, Failure> {
    let known: Vec<&'static str> = policy_catalog().iter().map(|p| p.name()).collect();
    let mut out = PolicyAssignment::new();
    let mut fallback = None;
    for pair in pairs {
        let (role, policy) = pair
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected role=policy, got '{pair}'")))?;
        let (role, policy) = (role.trim(), policy.trim());
        if !known.contains(&policy) {
            return Err(invalid(format!(
                "unknown policy '{policy}' (known: {})",
                known.join(", ")
            )));
        }
        if role == "*" {
            fallback = Some(policy.to_owned());
            continue;
        }
        let role = RoleId::new(role);
        if scenario.role(&role).is_none() {
            return Err(invalid(format!("scenario '{}' has no role '{role}'", scenario.id)));
        }
        if out.insert(role.clone(), policy.to_owned()).is_some() {
            return Err(invalid(format!("role '{role}' assigned twice")));
        }
    }
    for r in &scenario.roles {
        if !out.contains_key(&r.id) {
            let p = fallback
                .clone()
                .ok_or_else(|| invalid(format!("no policy for role '{}'", r.id)))?;
            out.insert(r.id.clone(), p);
        }
    }
    Ok(out)
}

fn fmt(x: f64) -> String {
    format!("{x:.3}")
}

pub fn aggregate_table(result: &BatchResult) -> String {
    let rows: Vec<Vec<String>> = result
        .aggregates
        .iter()
        .map(|(k, a)| {
            vec![
                k.clone(),
                fmt(a.mean),
                fmt(a.min),
                fmt(a.q1),
                fmt(a.median),
                fmt(a.q3),
                fmt(a.max),
            ]
        })
        .collect();
    table::render(&["metric", "mean", "min", "q1", "median", "q3", "max"], &rows)
}

pub fn run(args: &SimulateArgs, json: bool) -> CmdResult {
    if args.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    let scenario = load(&args.scenario, args.content_dir.as_deref())?;
    let assignment = assignment(&scenario, &args.policies)?;
    let result = run_batch(&scenario, &assignment, args.n, args.seed)
        .map_err(|e| invalid(e.to_string()))?;
    let mut files = Vec::new();
    if let Some(out) = &args.out {
        let write = |name: &str, text: String| {
            let path = out.join(name);
            std::fs::write(&path, text)
                .map(|_| path.display().to_string())
                .map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
        };
        std::fs::create_dir_all(out)
            .map_err(|e| invalid(format!("cannot create {}: {e}", out.display())))?;
        files.push(write(RESULTS_JSON, result.to_json())?);
        files.push(write(RESULTS_CSV, result.to_csv())?);
    }
    if json {
        println!(
            "{}",
            json!({
                "ok": true,
                "scenario": result.scenario,
                "n_games": result.n_games,
                "base_seed": result.base_seed,
                "assignment": result.assignment,
                "aggregates": result.aggregates,
                "files": files,
            })
        );
    } else {
        println!(
            "{} games of '{}' from seed {}",
            result.n_games, result.scenario, result.base_seed
        );
        print!("{}", aggregate_table(&result));
        for f in &files {
            println!("wrote {f}");
        }
    }
    Ok(())
}
