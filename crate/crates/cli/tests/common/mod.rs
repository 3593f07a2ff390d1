//! Helpers shared by the command-line tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn dsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsm"))
        .args(args)
        .env("DSM_THREADS", "2")
        .output()
        .expect("dsm runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A word2vec text file with the given rows.
pub fn write_space(path: &Path, rows: &[(&str, Vec<f64>)]) {
    let dim = rows[0].1.len();
    let mut s = format!("{} {}\n", rows.len(), dim);
    for (w, v) in rows {
        s.push_str(w);
        for x in v {
            s.push_str(&format!(" {x}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Three tiny datasets: a similarity, a synonymy and a categorization file.
pub fn write_suite(dir: &Path) -> PathBuf {
    let suite = dir.join("suite");
    std::fs::create_dir_all(&suite).unwrap();
    std::fs::write(
        suite.join("SIM.similarity.tsv"),
        "cat\tdog\t8\ncat\tcar\t2\ndog\tbus\t1\ncar\tbus\t7\ncat\tbus\t1.5\n",
    )
    .unwrap();
    std::fs::write(suite.join("SYN.synonymy.tsv"), "cat\tdog|car|bus\t0\ncar\tbus|cat|dog\t0\n").unwrap();
    std::fs::write(
        suite.join("CAT.categorization.tsv"),
        "cat\tanimal\ndog\tanimal\ncar\tvehicle\nbus\tvehicle\n",
    )
    .unwrap();
    suite
}

pub fn animal_vehicle_rows(noise: f64) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("cat", vec![1.0, noise, 0.0]),
        ("dog", vec![0.9, 0.1, noise]),
        ("car", vec![noise, 1.0, 0.1]),
        ("bus", vec![0.1, 0.9, noise]),
    ]
}

pub fn ledger_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect()
}

/// A 2-model grid over the three-dataset suite; returns (grid file, ledger).
pub fn write_grid(dir: &Path) -> (PathBuf, PathBuf) {
    write_suite(dir);
    write_space(&dir.join("a.vec"), &animal_vehicle_rows(0.0));
    write_space(&dir.join("b.vec"), &animal_vehicle_rows(0.3));
    let grid = dir.join("grid.toml");
    std::fs::write(
        &grid,
        "suite = \"suite\"\nledger = \"results.jsonl\"\n\n\
         [[model]]\nid = \"A.w2.3\"\nspace = \"a.vec\"\n\n\
         [[model]]\nid = \"B.w10.3\"\nspace = \"b.vec\"\n",
    )
    .unwrap();
    (grid, dir.join("results.jsonl"))
}
