//! Reproducibility gate for the command-line interface: the same
//! configuration and seed must produce byte-identical artifacts at any
//! worker thread count, and every manifest must describe exactly the
//! files next to it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

const CONFIG: &str = r#"
spec_version = 1

[run]
seed = 20260815
scenarios = 48

[economics]
stock_growth = 0.0773
stock_vol = 0.15
bond_growth = 0.0436
wage_growth = 0.0383
cpi = 0.02

[scheme]
kind = "single"
join_age = 25
retirement_age = 65
accrual_divisor = 80.0
closure_year = 100

[mortality]
kind = "bundled"

[strategy]
kind = "lifestyle"
start_age = 65
end_age = 85
"#;

fn run(config: &Path, out: &Path, threads: u32, command: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_cdc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .arg(command)
        .status()
        .expect("the binary should start");
    assert!(status.success(), "`{command}` with {threads} thread(s) exited with {status}");
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output directory should exist")
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().into_string().unwrap();
            (name, fs::read(entry.path()).unwrap())
        })
        .collect()
}

#[test]
fn criterion_13_reruns_are_byte_identical_at_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.toml");
    fs::write(&config_path, CONFIG).unwrap();
    let commands = ["simulate", "steady-state", "compare", "shock"];
    let thread_counts = [1u32, 3];
    for &threads in &thread_counts {
        for command in &commands {
            run(&config_path, &dir.path().join(format!("{command}_{threads}")), threads, command);
        }
    }

    let mut files_checked = 0usize;
    let mut bytes_checked = 0usize;
    for command in &commands {
        let baseline = dir_contents(&dir.path().join(format!("{command}_{}", thread_counts[0])));
        for &threads in &thread_counts[1..] {
            let rerun = dir_contents(&dir.path().join(format!("{command}_{threads}")));
            assert_eq!(
                baseline.keys().collect::<Vec<_>>(),
                rerun.keys().collect::<Vec<_>>(),
                "`{command}` wrote different file sets at {threads} thread(s)"
            );
            for (name, bytes) in &baseline {
                assert_eq!(
                    bytes,
                    &rerun[name],
                    "`{command}` artifact {name} differs between {} and {threads} thread(s)",
                    thread_counts[0]
                );
                files_checked += 1;
                bytes_checked += bytes.len();
            }
        }

        let manifest: serde_json::Value = serde_json::from_slice(&baseline["manifest.json"]).unwrap();
        let recorded = manifest["files"].as_object().expect("manifest lists its files");
        assert_eq!(recorded.len(), baseline.len() - 1, "`{command}` manifest should cover every artifact");
        for (name, hash) in recorded {
            let digest = hex::encode(Sha256::digest(&baseline[name.as_str()]));
            assert_eq!(hash.as_str().unwrap(), digest, "`{command}` manifest hash for {name} is stale");
        }
    }
    println!(
        "criterion 13: PASS ({files_checked} artifacts, {bytes_checked} bytes identical across thread counts {thread_counts:?})"
    );
}
