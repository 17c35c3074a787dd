//! End-to-end tests of the `sqem` binary: exit codes, CSV shape,
//! determinism, the shipped configs, and the documented oracle values.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqem"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn temp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("sqem-test-{}-{name}", std::process::id()));
    path
}

fn write_config(name: &str, text: &str) -> PathBuf {
    let path = temp_path(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Parse a CSV body into rows of string fields.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn field<'a>(header: &[String], row: &'a [String], name: &str) -> &'a str {
    let idx = header.iter().position(|h| h == name).unwrap();
    &row[idx]
}

#[test]
fn validate_accepts_every_shipped_config() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let output = bin().arg("validate").arg(&path).output().unwrap();
        assert!(
            output.status.success(),
            "validate failed on {}: {}",
            path.display(),
            String::from_utf8_lossy(&output.stderr)
        );
        assert!(stdout_of(&output).starts_with("ok:"));
    }
}

#[test]
fn empty_grid_exits_with_code_2() {
    let config = write_config(
        "empty.json",
        r#"{
            "version": 1, "scenario": "probabilistic", "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": []}], "d": [2]
        }"#,
    );
    let output = bin().arg("validate").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty"));

    let out_csv = temp_path("empty-out.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn sweep_rows_match_the_analytic_forms_when_fully_sensitive() {
    let config = write_config(
        "analytic.json",
        r#"{
            "version": 1,
            "scenario": "probabilistic",
            "gate": "cnot",
            "channels": [{"family": "dephasing", "p_ne": {"from": 0.5, "to": 1.0, "steps": 6}}],
            "d": [2, 3, 4],
            "aux": ["11", "++", "choi"],
            "seed": 11
        }"#,
    );
    let out_csv = temp_path("analytic-out.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&out_csv).unwrap();
    let (header, rows) = parse_csv(&text);
    assert_eq!(
        header.join(","),
        "scenario,gate,channel,p_ne,d,aux,omega1,omega2,P,R,F_CJ,F0_CJ,engine,ms"
    );
    assert_eq!(rows.len(), 6 * 3 * 3);

    let mut checked = 0;
    for row in &rows {
        let omega1: f64 = field(&header, row, "omega1").parse().unwrap();
        let omega2: f64 = field(&header, row, "omega2").parse().unwrap();
        let f0: f64 = field(&header, row, "F0_CJ").parse().unwrap();
        if (omega1 - 1.0).abs() > 1e-9 || (omega2 - 1.0).abs() > 1e-9 || f0 >= 1.0 - 1e-12 {
            continue;
        }
        let d: usize = field(&header, row, "d").parse().unwrap();
        let p: f64 = field(&header, row, "P").parse().unwrap();
        let r: f64 = field(&header, row, "R").parse().unwrap();
        let expected_p = f0.powi(d as i32) * (1.0 + (1.0 / f0 - 1.0) / d as f64);
        let expected_r = 1.0 + (d as f64 - 1.0) * f0;
        assert!(
            (p - expected_p).abs() < 1e-9,
            "P mismatch on row {row:?}: {p} vs {expected_p}"
        );
        assert!(
            (r - expected_r).abs() < 1e-9,
            "R mismatch on row {row:?}: {r} vs {expected_r}"
        );
        checked += 1;
    }
    // 5 noisy p_ne values x 3 branch counts x 2 fully sensitive
    // auxiliaries ("++" and "choi").
    assert_eq!(checked, 30, "unexpected fully sensitive row count");

    // The insensitive |11> auxiliary still shows an advantage (R >= 1) but
    // stays below the fully sensitive closed form.
    for row in rows.iter().filter(|row| field(&header, row, "aux") == "11") {
        let f0: f64 = field(&header, row, "F0_CJ").parse().unwrap();
        if f0 >= 1.0 - 1e-12 {
            continue;
        }
        let omega1: f64 = field(&header, row, "omega1").parse().unwrap();
        assert!(omega1.abs() < 1e-9, "expected omega1 = 0 for |11>, got {omega1}");
        let r: f64 = field(&header, row, "R").parse().unwrap();
        let d: usize = field(&header, row, "d").parse().unwrap();
        assert!(r >= 1.0 - 1e-9);
        assert!(r <= 1.0 + (d as f64 - 1.0) * f0 + 1e-9);
    }
}

#[test]
fn csv_is_deterministic_up_to_the_timing_column() {
    let config = write_config(
        "determinism.json",
        r#"{
            "version": 1,
            "scenario": "quasi_deterministic",
            "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.8, 0.9]}],
            "d": [2],
            "aux": ["choi"],
            "threshold": 1.0,
            "seed": 21
        }"#,
    );
    let strip_ms = |text: &str| -> String {
        text.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let out_a = temp_path("det-a.csv");
    let out_b = temp_path("det-b.csv");
    for out in [&out_a, &out_b] {
        let output = bin()
            .arg("sweep")
            .arg(&config)
            .arg("-o")
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    let a = strip_ms(&std::fs::read_to_string(&out_a).unwrap());
    let b = strip_ms(&std::fs::read_to_string(&out_b).unwrap());
    assert_eq!(a, b, "data columns differ between identical runs");

    // A different seed override changes the manifest but the optimizer still
    // converges to the same exact fidelities here.
    let out_c = temp_path("det-c.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_c)
        .arg("--seed")
        .arg("99")
        .output()
        .unwrap();
    assert!(output.status.success());
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_c.with_extension("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 99);
}

#[test]
fn single_branch_rows_reduce_to_the_incoherent_case() {
    let config = write_config(
        "d1.json",
        r#"{
            "version": 1,
            "scenario": "probabilistic",
            "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.7, 0.9]}],
            "d": [1],
            "aux": ["choi"],
            "seed": 31
        }"#,
    );
    let out_csv = temp_path("d1-out.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let (header, rows) = parse_csv(&text);
    for row in &rows {
        let p: f64 = field(&header, row, "P").parse().unwrap();
        let r: f64 = field(&header, row, "R").parse().unwrap();
        let f: f64 = field(&header, row, "F_CJ").parse().unwrap();
        let f0: f64 = field(&header, row, "F0_CJ").parse().unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-9);
        assert!((f - f0).abs() < 1e-12);
    }
}

#[test]
fn single_run_prints_the_documented_post_selection_probability() {
    let output = bin()
        .args([
            "single", "--gate", "cnot", "--channel", "dephasing", "--p-ne", "0.9", "--aux",
            "choi", "--d", "2",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = stdout_of(&output);
    let summary = stdout
        .lines()
        .find(|l| l.starts_with("post-selected:"))
        .expect("summary line present");
    let p: f64 = summary
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("P=").map(|v| v.parse().unwrap()))
        .unwrap();
    assert!((p - 0.855).abs() < 1e-12, "P = {p}");
    let r: f64 = summary
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("R=").map(|v| v.parse().unwrap()))
        .unwrap();
    assert!((r - 1.9).abs() < 1e-9, "R = {r}");
    // The table lists the control sign of every surviving outcome.
    assert!(stdout.lines().any(|l| l.starts_with('+')));
    assert!(stdout.lines().any(|l| l.starts_with('-')));
}

#[test]
fn optimize_writes_a_deterministic_full_probability_table() {
    let config = write_config(
        "optimize.json",
        r#"{
            "version": 1,
            "scenario": "quasi_deterministic",
            "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.9]}],
            "d": [2],
            "aux": ["choi"],
            "threshold": 1.0,
            "seed": 41
        }"#,
    );
    let out_json = temp_path("table.json");
    let output = bin()
        .arg("optimize")
        .arg(&config)
        .arg("-o")
        .arg(&out_json)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    let achieved = table["achieved_probability"].as_f64().unwrap();
    assert!((achieved - 1.0).abs() < 1e-9, "achieved_probability = {achieved}");
    assert!(table["achieved_f_cj"].as_f64().unwrap() > 0.9);
    assert!(!table["budget_exhausted"].as_bool().unwrap());

    // Multi-point configs are rejected for optimize.
    let multi = write_config(
        "optimize-multi.json",
        r#"{
            "version": 1,
            "scenario": "quasi_deterministic",
            "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.8, 0.9]}],
            "d": [2],
            "aux": ["choi"],
            "seed": 41
        }"#,
    );
    let output = bin()
        .arg("optimize")
        .arg(&multi)
        .arg("-o")
        .arg(temp_path("table2.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn oversize_rows_error_but_the_sweep_continues_with_code_3() {
    let config = write_config(
        "partial.json",
        r#"{
            "version": 1,
            "scenario": "probabilistic",
            "gate": "cnot",
            "channels": [{"family": "dephasing", "p_ne": [0.9]}],
            "d": [2, 8],
            "aux": ["choi"],
            "engine": "bruteforce",
            "seed": 51
        }"#,
    );
    let out_csv = temp_path("partial-out.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let (header, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(field(&header, &rows[0], "engine"), "bruteforce");
    assert_eq!(field(&header, &rows[1], "engine"), "error");
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_csv.with_extension("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["errors"], 1);
    assert!(manifest["row_errors"][0]["error"]
        .as_str()
        .unwrap()
        .contains("ceiling"));
}

#[test]
fn every_shipped_config_completes_within_budget() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let out_csv = temp_path(&format!("{name}.csv"));
        let started = Instant::now();
        let output = bin()
            .arg("sweep")
            .arg(&path)
            .arg("-o")
            .arg(&out_csv)
            .output()
            .unwrap();
        let elapsed = started.elapsed().as_secs_f64();
        assert!(
            output.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        assert!(elapsed < 300.0, "{name} took {elapsed:.0}s");
        let text = std::fs::read_to_string(&out_csv).unwrap();
        let (header, rows) = parse_csv(&text);
        assert!(!rows.is_empty());
        for row in &rows {
            assert_eq!(row.len(), header.len(), "ragged row in {name}");
        }
    }
}

#[test]
fn custom_channels_and_circuit_gates_load_from_files() {
    // A JSON-loaded dephasing channel must reproduce the named family, and
    // a JSON-loaded single-T circuit must reproduce the named gate.
    let channel_path = temp_path("channel.json");
    std::fs::write(
        &channel_path,
        sqem_core::channels::KrausChannel::dephasing(0.9)
            .unwrap()
            .to_json_string(),
    )
    .unwrap();
    let circuit_path = temp_path("circuit.json");
    std::fs::write(
        &circuit_path,
        r#"[{"gate": "t", "targets": [0]}]"#,
    )
    .unwrap();

    let extract_p = |output: &Output| -> f64 {
        stdout_of(output)
            .lines()
            .find(|l| l.starts_with("post-selected:"))
            .and_then(|l| {
                l.split_whitespace()
                    .find_map(|tok| tok.strip_prefix("P=").map(|v| v.parse().unwrap()))
            })
            .unwrap()
    };

    let named = bin()
        .args(["single", "--gate", "t", "--channel", "dephasing", "--p-ne", "0.9"])
        .output()
        .unwrap();
    assert!(named.status.success());

    let custom = bin()
        .args([
            "single",
            "--gate",
            &format!("circuit:{}", circuit_path.display()),
            "--channel",
            &format!("custom:{}", channel_path.display()),
            "--p-ne",
            "0.9",
        ])
        .output()
        .unwrap();
    assert!(custom.status.success(), "{}", String::from_utf8_lossy(&custom.stderr));
    assert!((extract_p(&named) - extract_p(&custom)).abs() < 1e-12);

    // A channel that fails completeness is rejected on load.
    std::fs::write(
        &channel_path,
        r#"{"n_qubits": 1, "operators": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.5, 0.0]]]]}"#,
    )
    .unwrap();
    let bad = bin()
        .args([
            "single",
            "--gate",
            "t",
            "--channel",
            &format!("custom:{}", channel_path.display()),
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn noisy_cswap_sweep_shows_the_advantage_crossover() {
    let config = write_config(
        "crossover.json",
        r#"{
            "version": 1,
            "scenario": "noisy_cswap",
            "gate": "identity",
            "channels": [{"family": "dephasing", "p_ne": {"from": 0.7, "to": 1.0, "steps": 13}}],
            "d": [2],
            "aux": ["choi"],
            "epsilon": 0.01,
            "seed": 61
        }"#,
    );
    let out_csv = temp_path("crossover-out.csv");
    let output = bin()
        .arg("sweep")
        .arg(&config)
        .arg("-o")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let (header, rows) = parse_csv(&text);
    // Grid is ascending in p_ne, so target noise shrinks along the rows:
    // R must start above 1 (strong target noise) and end below it.
    let ratios: Vec<f64> = rows
        .iter()
        .map(|row| field(&header, row, "R").parse().unwrap())
        .collect();
    assert!(ratios.first().unwrap() > &1.0);
    assert!(ratios.last().unwrap() < &1.0);
}
