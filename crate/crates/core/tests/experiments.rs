use std::fs;
use std::path::Path;
use std::process::Command as Process;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tubal_fgd::experiments::{
    cmd_bench, cmd_convergence, cmd_rip, decode_tensor, encode_tensor, parse_pairs, read_tensor,
    run, write_tensor, Command, ExperimentConfig,
};
use tubal_fgd::Tensor3;

fn load(cmd: Command, out: &Path, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut kv: Vec<(String, String)> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    kv.push(("out".into(), out.display().to_string()));
    ExperimentConfig::load(cmd, None, &kv).unwrap()
}

const SMALL: &[(&str, &str)] = &[
    ("n", "6"),
    ("n3", "2"),
    ("r_star", "2"),
    ("ranks", "2,3"),
    ("max_iters", "40"),
    ("seeds", "1,2"),
    ("eta", "0.05"),
];

/// CSV contents with the wall-time columns blanked.
fn without_times(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let timed: Vec<bool> = header.iter().map(|h| h.contains("time")).collect();
    let mut rows = vec![header.iter().map(String::from).collect()];
    for rec in r.records() {
        rows.push(
            rec.unwrap()
                .iter()
                .zip(&timed)
                .map(|(v, &t)| if t { String::new() } else { v.to_string() })
                .collect(),
        );
    }
    rows
}

#[test]
fn convergence_outputs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = cmd_convergence(&load(
        Command::Convergence,
        a.path(),
        &[SMALL, &[("threads", "1")]].concat(),
    ))
    .unwrap();
    let two = cmd_convergence(&load(
        Command::Convergence,
        b.path(),
        &[SMALL, &[("threads", "3")]].concat(),
    ))
    .unwrap();
    assert_eq!(one.runs.len(), 4);
    assert_eq!(one.records.len(), 2);
    for (fa, fb) in one.files.iter().zip(&two.files) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(without_times(fa), without_times(fb), "{}", fa.display());
    }
    for name in [
        "config.txt",
        "seeds.csv",
        "summary.csv",
        "aggregate.csv",
        "trace_r3_seed2.csv",
    ] {
        assert!(a.path().join(name).exists(), "{name}");
    }
    let seeds = fs::read_to_string(a.path().join("seeds.csv")).unwrap();
    assert_eq!(seeds, "seed\n1\n2\n");
}

#[test]
fn saved_config_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(Command::Convergence, dir.path(), SMALL);
    cmd_convergence(&cfg).unwrap();
    let path = dir.path().join("config.txt");
    let again = ExperimentConfig::load(Command::Convergence, Some(&path), &[]).unwrap();
    assert_eq!(again.serialize(), cfg.serialize());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    fs::write(&path, "# test\nn = 9\nv = 0.2\nseed = 4\n").unwrap();
    let cfg =
        ExperimentConfig::load(Command::Tables, Some(&path), &[("n".into(), "11".into())]).unwrap();
    assert_eq!((cfg.n, cfg.v, cfg.seeds[0]), (11, 0.2, 4));
    assert!(parse_pairs("n 3").is_err());
    fs::write(&path, "bogus_key = 1\n").unwrap();
    let e = ExperimentConfig::load(Command::Tables, Some(&path), &[]).unwrap_err();
    assert!(e.is_validation());
}

#[test]
fn empty_bench_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_bench(&load(Command::Bench, dir.path(), &[("shapes", "")])).unwrap();
    assert!(out.rows.is_empty() && out.scaling.is_empty());
    for f in &out.files {
        let text = fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().count(), 1, "{}", f.display());
    }
}

#[test]
fn bench_and_rip_run_small() {
    let dir = tempfile::tempdir().unwrap();
    let b = cmd_bench(&load(
        Command::Bench,
        dir.path(),
        &[("shapes", "8:2:4;16:2:4;16:4:4"), ("reps", "3")],
    ))
    .unwrap();
    assert_eq!(b.rows.len(), 3);
    assert!(b.doubling("n").is_some() && b.doubling("r").is_some());
    let dir = tempfile::tempdir().unwrap();
    let (rows, _) = cmd_rip(&load(
        Command::Rip,
        dir.path(),
        &[("n", "4"), ("n3", "2"), ("seeds", "1,2"), ("trials", "5")],
    ))
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.estimate.delta_hat.is_finite()));
}

#[test]
fn run_dispatches_phase_and_lemma() {
    let dir = tempfile::tempdir().unwrap();
    let phase = load(
        Command::Phase,
        &dir.path().join("phase"),
        &[
            ("n", "5"),
            ("n3", "2"),
            ("cells", "200:1;10:3"),
            ("seeds", "1,2"),
            ("max_iters", "50"),
        ],
    );
    let files = run(&phase).unwrap().files;
    assert!(files.iter().any(|f| f.ends_with("phase.csv")));
    let lemma = load(
        Command::LemmaCheck,
        &dir.path().join("lemma"),
        &[
            ("n", "6"),
            ("n3", "2"),
            ("r_star", "2"),
            ("ranks", "3"),
            ("max_iters", "30"),
            ("m", "400"),
        ],
    );
    let files = run(&lemma).unwrap().files;
    assert!(files.iter().any(|f| f.ends_with("rates.csv")));
}

#[test]
fn tensor_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor3::random_normal((3, 4, 2), 1.0, &mut ChaCha8Rng::seed_from_u64(1));
    let path = dir.path().join("x.t3r");
    write_tensor(&path, &t).unwrap();
    assert_eq!(read_tensor(&path).unwrap().data(), t.data());
    let mut bytes = encode_tensor(&t).unwrap();
    bytes.push(0);
    assert!(decode_tensor(&bytes).unwrap_err().is_validation());
}

fn cli(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_tubal-fgd"))
        .args(args)
        .env("TUBAL_FGD_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = cli(&[
        "convergence",
        "--out",
        out,
        "--seed",
        "3",
        "--measurement",
        "symmetrized",
        "--set",
        "n=5",
        "--set",
        "n3=2",
        "--set",
        "r_star=1",
        "--set",
        "ranks=1",
        "--set",
        "max_iters=20",
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let config = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(config.contains("measurement = symmetrized"));
    assert!(config.contains("seeds = 3"));

    let bad = cli(&["convergence", "--out", out, "--set", "n=0"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = cli(&["convergence", "--out", out, "--set", "noequals"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = cli(&["phase", "--config", "/nonexistent/cfg.txt", "--out", out]);
    assert_ne!(missing.status.code(), Some(0));

    let diverge = cli(&[
        "convergence",
        "--out",
        out,
        "--set",
        "n=5",
        "--set",
        "n3=2",
        "--set",
        "r_star=1",
        "--set",
        "ranks=1",
        "--set",
        "eta=50",
        "--set",
        "max_iters=50",
    ]);
    assert_eq!(
        diverge.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&diverge.stderr)
    );
}
