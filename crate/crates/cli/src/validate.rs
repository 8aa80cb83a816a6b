use std::path::Path;

use futuresim_core::content::{load_scenario_file, LoadError};
use serde_json::json;

use crate::{CmdResult, Failure};

pub fn run(path: &Path, json: bool) -> CmdResult {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))?;
    match load_scenario_file(&bytes) {
        Ok(file) => {
            if json {
                println!("{}", json!({ "ok": true, "scenario": file.scenario.id }));
            } else {
                println!("OK");
            }
            Ok(())
        }
        Err(LoadError::InvalidScenario(violations)) => {
            if !json {
                for v in &violations {
                    println!("{}: {v}", v.rule());
                }
            }
            let mut f = Failure::new(1, format!("{} violation(s)", violations.len()));
            f.detail = json!(violations);
            Err(f)
        }
        Err(e) => Err(Failure::new(2, e.to_string())),
    }
}
