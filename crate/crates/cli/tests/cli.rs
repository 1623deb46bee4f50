// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn streamcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamcov"))
        .args(args)
        .env_remove("STREAMCOV_SEED")
        .output()
        .unwrap()
}

fn gen(dir: &Path, profile: &str, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["gen", "--profile", profile, "--out-dir", d];
    args.extend_from_slice(extra);
    let out = streamcov(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn gen_then_validate() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "planted:24", &["--n", "40", "--m", "15", "--k", "3", "--churn", "0.3", "--seed", "9"]);
    for f in ["instance.txt", "stream.txt", "certificate.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let p = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
    let out = streamcov(&[
        "validate",
        "--instance",
        &p("instance.txt"),
        "--stream",
        &p("stream.txt"),
        "--certificate",
        &p("certificate.txt"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("opt 24 verified"));
}

#[test]
fn wrong_certificate_exits_one() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "disjoint", &["--n", "30", "--m", "6", "--k", "2"]);
    let cert = dir.path().join("certificate.txt");
    let text = std::fs::read_to_string(&cert).unwrap();
    let bumped = text.replacen("opt ", "opt 1", 1);
    std::fs::write(&cert, bumped).unwrap();
    let out = streamcov(&[
        "validate",
        "--instance",
        dir.path().join("instance.txt").to_str().unwrap(),
        "--certificate",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn greedy_is_exact_on_disjoint_sets() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "disjoint", &["--n", "60", "--m", "10", "--k", "3"]);
    let out = streamcov(&[
        "run",
        "--algorithm",
        "offline-greedy",
        "--instance",
        dir.path().join("instance.txt").to_str().unwrap(),
        "--certificate",
        dir.path().join("certificate.txt").to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let ratios = column(&csv, "ratio");
    assert_eq!(ratios.len(), 3);
    assert!(ratios.iter().all(|r| r.parse::<f64>().unwrap() == 1.0));
}

#[test]
fn config_file_and_flag_override() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "overlapping:0.2", &["--n", "40", "--m", "8", "--k", "2", "--seed", "3"]);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "algorithm = \"random-order\"\ninstance = \"instance.txt\"\ntrials = 4\nseed = 1\n",
    )
    .unwrap();
    let out_csv = dir.path().join("m.csv");
    let out = streamcov(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "2",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_csv).unwrap();
    assert_eq!(column(&csv, "algorithm"), vec!["random-order"; 2]);
    assert!(column(&csv, "passes").iter().all(|p| p == "1"));
}

#[test]
fn dynamic_run_on_stream() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "planted:20", &["--n", "30", "--m", "10", "--k", "2", "--churn", "0.2", "--seed", "4"]);
    let out = streamcov(&[
        "run",
        "--algorithm",
        "dynamic",
        "--stream",
        dir.path().join("stream.txt").to_str().unwrap(),
        "--n",
        "30",
        "--k",
        "2",
        "--certificate",
        dir.path().join("certificate.txt").to_str().unwrap(),
        "--epsilon",
        "0.2",
        "--trials",
        "2",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{}\n{csv}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(column(&csv, "passed"), vec!["true"; 2]);
}

#[test]
fn urn_writes_trials_and_summary() {
    let dir = TempDir::new().unwrap();
    let trials = dir.path().join("t.csv");
    let summary = dir.path().join("s.csv");
    let out = streamcov(&[
        "urn",
        "--process",
        "cascade",
        "--t",
        "3",
        "--sizes",
        "100,1000",
        "--trials",
        "5",
        "--adversary",
        "drawn-only,gold-fraction",
        "--out",
        trials.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = std::fs::read_to_string(trials).unwrap();
    assert_eq!(t.lines().count(), 1 + 2 * 2 * 5);
    assert!(t.starts_with("process,m,d,adversary,seed,phases,points,ended_by"));
    assert_eq!(std::fs::read_to_string(summary).unwrap().lines().count(), 1 + 4);
}

#[test]
fn seed_from_environment() {
    let dir = TempDir::new().unwrap();
    let run = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = Command::new(env!("CARGO_BIN_EXE_streamcov"))
            .args(["gen", "--profile", "overlapping:0.3", "--n", "50", "--m", "12", "--k", "3"])
            .args(["--out-dir", d.to_str().unwrap()])
            .env("STREAMCOV_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(d.join("instance.txt")).unwrap()
    };
    assert_eq!(run("17", "a"), run("17", "b"));
    assert_ne!(run("17", "c"), run("18", "d"));
}

#[test]
fn malformed_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "10 2 1\n0 1 2\n1 3 oops\n").unwrap();
    let out = streamcov(&["validate", "--instance", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = streamcov(&["run", "--algorithm", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
