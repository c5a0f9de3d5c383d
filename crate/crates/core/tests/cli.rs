use std::path::Path;
use std::process::Command;

use scalar_deform::cli::{render_json, ReportDocument};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scalar-deform"))
}

fn code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes_follow_verdicts() {
    assert_eq!(code(&["verify", "--problem", "lienard"]), 0);
    assert_eq!(code(&["check", "--problem", "conservative"]), 0);
    assert_eq!(code(&["classify", "--problem", "dissipative"]), 1);
    assert_eq!(code(&["check", "--problem", "/nonexistent/p.json"]), 3);
    assert_eq!(code(&["check", "--problem", "lienard", "--samples", "0"]), 3);
}

#[test]
fn degenerate_problem_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.json");
    std::fs::write(
        &path,
        r#"{"name": "flat", "dim": 1, "params": {}, "spray": ["0"], "lagrangian": "x1",
            "box": {"x1": [0, 1], "y1": [0.5, 1]},
            "sampling": {"count": 20, "seed": 1, "guard": 1e-6}}"#,
    )
    .unwrap();
    assert_eq!(code(&["check", "--problem", path.to_str().unwrap()]), 2);
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = bin()
        .args(["report", "--problem", "homogeneous", "--format", "json", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let doc: ReportDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(render_json(&doc).unwrap() + "\n", text);
    assert!(doc.trajectory.is_some());
}

#[test]
fn text_report_lines() {
    let out = bin().args(["synthesize", "--problem", "homogeneous"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("family: PowerShift(gamma=-0.5, a=0)"), "{text}");
    assert!(text.contains("theorem2: wedge residual"), "{text}");
    assert!(text.contains("verdict: DeformableSingular"), "{text}");
}

#[test]
fn geodesic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let status = bin()
        .args([
            "geodesic", "--problem", "rayleigh", "--x0", "0,0", "--y0", "1,1.5", "--step", "0.01",
            "--horizon", "0.5", "--csv",
        ])
        .arg(&csv)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let mut reader = csv::Reader::from_path(Path::new(&csv)).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["t", "x1", "x2", "y1", "y2", "E_L", "E_PhiL"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 51);
    let e_phi: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(e_phi.iter().all(|e| (e - e_phi[0]).abs() < 1e-9));
    assert_eq!(code(&["geodesic", "--problem", "rayleigh", "--x0", "0", "--y0", "1"]), 3);
}
