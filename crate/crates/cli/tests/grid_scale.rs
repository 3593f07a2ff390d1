mod common;

use dsm_cli::grid::{run_grid, GridConfig};

#[test]
fn forty_four_models_by_thirty_three_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let suite = d.join("suite");
    std::fs::create_dir_all(&suite).unwrap();
    for i in 0..33 {
        std::fs::write(
            suite.join(format!("D{i:02}.similarity.tsv")),
            format!("cat\tdog\t{}\ncat\tcar\t2\ncar\tbus\t{}\ndog\tbus\t1\n", 5 + i % 4, 3 + i % 5),
        )
        .unwrap();
    }
    let mut grid = String::from("suite = \"suite\"\nledger = \"results.jsonl\"\nthreads = 2\n");
    for m in 0..44 {
        common::write_space(&d.join(format!("m{m}.vec")), &common::animal_vehicle_rows(0.01 * m as f64));
        grid.push_str(&format!("\n[[model]]\nid = \"M{m}.w2.3\"\nspace = \"m{m}.vec\"\n"));
    }
    std::fs::write(d.join("grid.toml"), grid).unwrap();
    let cfg = GridConfig::load(&d.join("grid.toml")).unwrap();
    let s = run_grid(&cfg).unwrap();
    assert_eq!((s.evaluated, s.failed), (1452, 0));
    assert_eq!(common::ledger_lines(&d.join("results.jsonl")).len(), 1452);
    let again = run_grid(&cfg).unwrap();
    assert_eq!((again.evaluated, again.skipped), (0, 1452));
}
