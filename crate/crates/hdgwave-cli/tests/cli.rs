//! End-to-end checks of the command-line interface: dof accounting output,
//! the synthesize/invert loop on identical discretizations, seeded
//! reproducibility of artifacts, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hdgwave");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn mesh_info_reports_trace_and_volume_dofs() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "config.json",
        r#"{
            "mesh": { "generate": { "extent": [[0.0, 1.0], [0.0, 1.0]], "cells_per_axis": [1, 1] } },
            "model": { "uniform": { "c": 1.0, "rho": 1000.0 } },
            "frequencies_hz": [1.0],
            "orders": { "fixed": 3 },
            "acquisition": { "sources": [ { "position": [0.5, 0.9] } ], "receivers": [ [0.25, 0.8] ] }
        }"#,
    );
    let out = run(&["mesh-info", "--config", "config.json"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("trace dof (global system size): 20"), "{text}");
    assert!(text.contains("volume dof per unknown: 20"), "{text}");
}

/// Inverse-crime sanity loop: data synthesized on the same mesh and orders
/// used for inversion, no noise. The misfit must collapse.
#[test]
fn synthesize_then_invert_closes_the_loop() {
    let dir = tempfile::tempdir().unwrap();
    let acquisition = r#""acquisition": {
        "sources": [ { "position": [300.0, 950.0] }, { "position": [700.0, 950.0] } ],
        "receivers": [ [200.0, 900.0], [500.0, 900.0], [800.0, 900.0] ]
    }"#;
    let common = format!(
        r#""mesh": {{ "generate": {{ "extent": [[0.0, 1000.0], [0.0, 1000.0]], "cells_per_axis": [1, 1] }} }},
        "frequencies_hz": [4.0],
        "orders": {{ "fixed": 3 }},
        "boundaries": {{ "surface": "dirichlet",
                         "default": {{ "robin": {{ "alpha": [1.0, 0.0], "beta": [1.0, 0.0] }} }} }},
        {acquisition},
        "seed": 9,
        "data_path": "data.csv""#
    );
    write(
        dir.path(),
        "synth.json",
        &format!(
            r#"{{ {common},
            "model": {{ "uniform": {{ "c": 2020.0, "rho": 1000.0 }} }},
            "output_dir": "out_synth" }}"#
        ),
    );
    write(
        dir.path(),
        "invert.json",
        &format!(
            r#"{{ {common},
            "model": {{ "uniform": {{ "c": 2000.0, "rho": 1000.0 }} }},
            "inversion": {{ "iterations_per_freq": 60, "c_bounds": [1500.0, 2500.0] }},
            "output_dir": "out_inv" }}"#
        ),
    );
    let out = run(&["synthesize", "--config", "synth.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["invert", "--config", "invert.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let log = std::fs::read_to_string(dir.path().join("out_inv/inversion_log.csv")).unwrap();
    let rows: Vec<&str> = log.lines().skip(1).collect();
    assert!(!rows.is_empty());
    let first: Vec<&str> = rows[0].split(',').collect();
    let last: Vec<&str> = rows[rows.len() - 1].split(',').collect();
    let initial: f64 = first[2].parse().unwrap();
    let fin: f64 = last[3].parse().unwrap();
    assert!(
        fin < 1e-10 * initial,
        "inverse-crime misfit {fin:e} vs initial {initial:e}"
    );
    assert!(dir.path().join("out_inv/final_model.txt").exists());
}

#[test]
fn synthesize_is_byte_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "mesh": { "generate": { "extent": [[0.0, 100.0], [0.0, 100.0]], "cells_per_axis": [3, 3] } },
        "model": { "uniform": { "c": 1500.0, "rho": 1000.0 } },
        "frequencies_hz": [20.0],
        "orders": { "fixed": 1 },
        "acquisition": {
            "sources": [ { "position": [50.0, 90.0] } ],
            "receivers": [ [25.0, 80.0], [75.0, 80.0] ]
        },
        "noise_snr_db": 10.0,
        "seed": 1234,
        "output_dir": "OUTDIR",
        "data_path": "DATA"
    }"#;
    write(
        dir.path(),
        "a.json",
        &config.replace("OUTDIR", "out_a").replace("DATA", "a.csv"),
    );
    write(
        dir.path(),
        "b.json",
        &config.replace("OUTDIR", "out_b").replace("DATA", "b.csv"),
    );
    assert!(run(&["synthesize", "--config", "a.json"], dir.path()).status.success());
    assert!(run(&["synthesize", "--config", "b.json"], dir.path()).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical data");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // unreadable config -> I/O failure (4)
    let out = run(&["mesh-info", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    // schema violation -> config error (2)
    write(dir.path(), "bad.json", r#"{ "mesh": {}, "unknown_key": 1 }"#);
    let out = run(&["mesh-info", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"kind\""), "machine-readable record: {err}");
    // invert without a data path -> config error (2)
    write(
        dir.path(),
        "nodata.json",
        r#"{
            "mesh": { "generate": { "extent": [[0.0, 1.0], [0.0, 1.0]], "cells_per_axis": [1, 1] } },
            "model": { "uniform": { "c": 1.0, "rho": 1000.0 } },
            "frequencies_hz": [1.0],
            "acquisition": { "sources": [], "receivers": [ [0.5, 0.5] ] }
        }"#,
    );
    let out = run(&["invert", "--config", "nodata.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_report_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "gc.json",
        r#"{
            "mesh": { "generate": { "extent": [[0.0, 1000.0], [0.0, 1000.0]], "cells_per_axis": [2, 2] } },
            "model": { "uniform": { "c": 2000.0, "rho": 1000.0 } },
            "frequencies_hz": [5.0],
            "orders": { "fixed": 2 },
            "acquisition": {
                "sources": [ { "position": [300.0, 950.0] }, { "position": [700.0, 950.0] } ],
                "receivers": [ [250.0, 900.0], [750.0, 900.0] ]
            },
            "seed": 3,
            "output_dir": "out_gc"
        }"#,
    );
    let out = run(&["gradcheck", "--config", "gc.json", "--cells", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("out_gc/gradcheck.csv")).unwrap();
    let best = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap())
        .fold(f64::MAX, f64::min);
    assert!(best < 1e-5, "best relative error {best:e}");
    assert!(dir.path().join("out_gc/resolved_config.json").exists());
    assert!(dir.path().join("out_gc/VERSION").exists());
}
