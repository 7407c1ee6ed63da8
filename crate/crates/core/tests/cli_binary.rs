use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_brwlab");

fn run(config: &Path, out: &Path, threads: &str) -> i32 {
    Command::new(BIN)
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("BRWLAB_THREADS", threads)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "command = \"simulate\"\nseed = 4\n[graph]\nfamily = \"zd-srw\"\ndim = 1\n\
         [simulate]\nlambda = [1.2, 2.0]\ncaps = [2, \"inf\"]\nhorizon = 6\nreplicas = 400\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(run(&cfg, &a, "1"), 0);
    assert_eq!(run(&cfg, &b, "3"), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let bad = write("bad.toml", "command = \"drift\"\n[drift]\np = 2.0\n");
    assert_eq!(run(&bad, &out, "1"), 1);
    let tuning = write("tf.toml", "command = \"drift\"\n[drift]\np = 0.5\nq = 0.5\nlambda = 0.5\n");
    assert_eq!(run(&tuning, &out, "1"), 3);
    let nc = write(
        "nc.toml",
        "command = \"spectral\"\n[graph]\nfamily = \"zd-srw\"\ndim = 3\n[spectral]\nradii = [4]\nmax_iter = 2\n",
    );
    assert_eq!(run(&nc, &out, "1"), 2);
    let good = write("ok.toml", "command = \"drift\"\n");
    assert_eq!(run(&good, &out, "zero"), 1);
    assert_eq!(run(&good, &out, "2"), 0);
    let status = Command::new(BIN).arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(BIN).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn stdout_mode_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.toml");
    std::fs::write(&cfg, "command = \"drift\"\n").unwrap();
    let out = Command::new(BIN).args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("alpha,beta,g_value\n"));
    let manifest: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["tool"], "brwlab");
}
