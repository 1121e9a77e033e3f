//! Acceptance criterion 7: every command re-run with the same config and
//! seed produces byte-identical output files.

use std::path::{Path, PathBuf};
use std::process::Command;

use cpclust::dataset::save_csv;
use cpclust::synth::two_blobs;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cpclust")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cpclust-accept-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixture_csv(dir: &Path) -> PathBuf {
    let path = dir.join("blobs.csv");
    let data = two_blobs(20, 1.0, 0.05, 7);
    save_csv(&data, &path).unwrap();
    path
}

fn run_ok(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &PathBuf) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn criterion_7_determinism() {
    let dir = temp_dir("c7");
    let input = fixture_csv(&dir);
    let input = input.to_str().unwrap();

    // cluster: identical labels across re-runs, for a smoothed-tau
    // conformal method and for a deterministic-tau one.
    for (tag, extra) in [
        ("smoothed", vec![]),
        ("dtau", vec!["--deterministic-tau", "1.0"]),
    ] {
        let out1 = dir.join(format!("cluster-{tag}-1"));
        let out2 = dir.join(format!("cluster-{tag}-2"));
        for out in [&out1, &out2] {
            let mut args = vec![
                "cluster",
                "--input",
                input,
                "--label-column",
                "label",
                "--method",
                "cpsca",
                "--epsilon",
                "0.3",
                "--k-nn",
                "3",
                "--k-clusters",
                "2",
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ];
            args.extend(&extra);
            run_ok(&args);
        }
        assert_eq!(
            read(&out1.join("labels.csv")),
            read(&out2.join("labels.csv")),
            "cluster ({tag}) labels differ across identical runs"
        );
        assert_eq!(
            read(&out1.join("report.json")),
            read(&out2.join("report.json")),
            "cluster ({tag}) reports differ across identical runs"
        );
    }

    // tune: identical labels and grid.
    let tune1 = dir.join("tune-1");
    let tune2 = dir.join("tune-2");
    for out in [&tune1, &tune2] {
        run_ok(&[
            "tune",
            "--input",
            input,
            "--label-column",
            "label",
            "--method",
            "hybrid",
            "--k-clusters",
            "2",
            "--grid-epsilon",
            "0.2,0.3",
            "--grid-k",
            "2,3",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for file in ["labels.csv", "grid.csv", "report.json"] {
        assert_eq!(
            read(&tune1.join(file)),
            read(&tune2.join(file)),
            "tune {file} differs across identical runs"
        );
    }

    // benchmark: identical machine-readable output.
    let manifest = dir.join("manifest.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{
  "datasets": [{{"name": "blobs", "path": "{input}", "label_column": "label", "k_clusters": 2}}],
  "methods": [
    {{"id": "njw", "sigma": 0.1}},
    {{"id": "cpsca", "tune": true, "grid_epsilon": [0.2, 0.3], "grid_k": [2, 3]}}
  ]
}}
"#
        ),
    )
    .unwrap();
    let bench1 = dir.join("bench-1");
    let bench2 = dir.join("bench-2");
    for out in [&bench1, &bench2] {
        run_ok(&[
            "benchmark",
            "--manifest",
            manifest.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for file in ["runs.json", "ari.csv", "nmi.csv", "ce.csv"] {
        assert_eq!(
            read(&bench1.join(file)),
            read(&bench2.join(file)),
            "benchmark {file} differs across identical runs"
        );
    }

    println!(
        "[PASS] criterion 7 (determinism): cluster/tune/benchmark outputs \
         byte-identical across re-runs with fixed seeds"
    );
    std::fs::remove_dir_all(&dir).ok();
}
