use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lung(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lung"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY: &str = "layers = 16_3_16\ndims = 8x10x10\nseed_count = 6\nfeedback_mode = none\ntotal_iterations = 80\n\
                    segments = 80\ngeneration_batch = 24\nlearning_rate = 0.005\nrng_seed = 1\n";

#[test]
fn seeds_writes_grids_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seeds");
    let o = lung(&["seeds", "--count", "20", "--seed", "7", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grids = fs::read_dir(&out).unwrap().filter(|e| {
        e.as_ref()
            .unwrap()
            .path()
            .extension()
            .is_some_and(|x| x == "grid")
    });
    assert_eq!(grids.count(), 20);
    assert_eq!(
        fs::read_to_string(out.join("manifest.txt"))
            .unwrap()
            .lines()
            .count(),
        20
    );

    let again = dir.path().join("again");
    lung(&["seeds", "--count", "20", "--seed", "7", "--out", p(&again)]);
    assert_eq!(
        fs::read(out.join("00003.grid")).unwrap(),
        fs::read(again.join("00003.grid")).unwrap()
    );

    let base = dir.path().join("base");
    let o = lung(&["augment", "--input", p(&out), "--out", p(&base)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(base.join("manifest.txt"))
            .unwrap()
            .lines()
            .count(),
        320
    );

    let pgm = dir.path().join("seeds.pgm");
    assert!(lung(&[
        "export-montage",
        "--input",
        p(&out),
        "--count",
        "3",
        "--out",
        p(&pgm)
    ])
    .status
    .success());
    assert!(fs::read(&pgm).unwrap().starts_with(b"P5\n"));
}

#[test]
fn gradcheck_passes() {
    let o = lung(&["gradcheck", "--seed", "3", "--count", "5"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("max_rel_error"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [&["bogus"][..], &["seeds", "--frobnicate"], &["seeds"], &[]] {
        let o = lung(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(lung(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        lung(&["score", "--run", p(dir.path())]).status.code(),
        Some(2)
    );
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "total_iterations = 10\nsegments = 3,3\n").unwrap();
    assert_eq!(
        lung(&[
            "train",
            "--config",
            p(&cfg),
            "--out",
            p(&dir.path().join("r"))
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn train_then_score_generate_interpolate_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let run = dir.path().join("run");
    let o = lung(&["train", "--config", p(&cfg), "--out", p(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("latent.csv").exists());

    let o = lung(&["score", "--run", p(&run)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("ac,mse,mse_x1000,"));
    assert!(text.contains("MSE"));

    let net = run.join("network.bin");
    let gen = dir.path().join("gen");
    let o = lung(&[
        "generate",
        "--config",
        p(&cfg),
        "--net",
        p(&net),
        "--count",
        "10",
        "--seed",
        "4",
        "--out",
        p(&gen),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(gen.join("manifest.txt"))
            .unwrap()
            .lines()
            .count(),
        10
    );

    let walk = dir.path().join("walk");
    let seeds = run.join("seeds");
    let o = lung(&[
        "interpolate",
        "--config",
        p(&cfg),
        "--net",
        p(&net),
        "--from",
        p(&seeds.join("00000.grid")),
        "--to",
        p(&seeds.join("00001.grid")),
        "--steps",
        "6",
        "--out",
        p(&walk),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(walk.join("interpolation.pgm").exists());
    assert_eq!(
        fs::read_to_string(walk.join("manifest.txt"))
            .unwrap()
            .lines()
            .count(),
        6
    );

    let csv = dir.path().join("features.csv");
    let o = lung(&[
        "analyze",
        "--input",
        p(&gen),
        "--seeds",
        p(&seeds),
        "--out",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);
}

#[test]
fn sweep_emits_one_row_per_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(
        &cfg,
        TINY.replace("total_iterations = 80", "total_iterations = 20")
            .replace("segments = 80", "segments = 20"),
    )
    .unwrap();
    let out = dir.path().join("sweep.csv");
    let o = lung(&[
        "sweep",
        "--config",
        p(&cfg),
        "--widths",
        "2,3",
        "--repeats",
        "1",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);
}
