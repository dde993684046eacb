use std::fs;

use overbook_bench::emit::{self, Format, RESULT_COLUMNS};
use overbook_bench::{preset, run_preset, RunOptions, StudyOutput};

fn small_run() -> StudyOutput {
    let p = preset("exp_a").unwrap().with_grid(vec![25.0, 50.0]).unwrap();
    run_preset(&p, &RunOptions { reps: Some(6), ..RunOptions::default() }).unwrap()
}

#[test]
fn empty_report_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit::emit_study(dir.path(), "exp_a", &StudyOutput::Replications(vec![]), Format::Csv).unwrap();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    assert_eq!(text, format!("{}\n", RESULT_COLUMNS.join(",")));
}

#[test]
fn result_schema_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    emit::emit_study(dir.path(), "exp_a", &small_run(), Format::Csv).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    for col in ["T", "B", "policy", "mean_obj", "stderr", "abs_loss", "rel_loss"] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // two grid points × (two benchmarks + one policy)
    assert_eq!(rows.len(), 6);
    assert_eq!(&rows[0][2], "25");
    assert_eq!(&rows[0][3], "5");

    let plot = fs::read_to_string(dir.path().join("plot_online_index_abs_loss.csv")).unwrap();
    assert!(plot.starts_with("x,y,ln_x,ln_y\n25.0,"));
    assert_eq!(plot.lines().count(), 3);
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit::emit_study(a.path(), "exp_a", &small_run(), Format::Csv).unwrap();
    emit::emit_study(b.path(), "exp_a", &small_run(), Format::Csv).unwrap();
    for name in ["results.csv", "plot_online_index_rel_loss.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn json_tables_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    emit::emit_study(dir.path(), "exp_a", &small_run(), Format::Json).unwrap();
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0]["T"], 25);
}

#[test]
fn unwritable_destination_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = emit::emit_study(&blocker.join("sub"), "exp_a", &StudyOutput::Replications(vec![]), Format::Csv).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
