#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn railplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railplan"))
        .args(args)
        .output()
        .expect("spawn railplan")
}

/// Runs a subcommand on a fixture and returns stdout, panicking on failure.
pub fn run_ok(cmd: &str, config: &str, extra: &[&str]) -> String {
    let path = fixture(config);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = railplan(&args);
    assert!(
        out.status.success(),
        "railplan {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn csv_rows(text: &str) -> Vec<HashMap<String, String>> {
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| head.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

pub fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row.get(key)
        .unwrap_or_else(|| panic!("missing column {key}"))
        .parse()
        .unwrap_or_else(|_| panic!("column {key} is not numeric"))
}

/// `metric,value` CSV into a map.
pub fn metrics(text: &str) -> HashMap<String, f64> {
    csv_rows(text)
        .iter()
        .map(|r| (r["metric"].clone(), num(r, "value")))
        .collect()
}

pub fn verdict(id: &str, title: &str, ok: bool, detail: &str) {
    println!("{} criterion {id} ({title}): {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}
