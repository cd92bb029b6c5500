use std::process::Command;

fn nlmp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlmp"))
}

#[test]
fn lists_bundled_cases() {
    let out = nlmp().arg("--list-cases").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["case1", "case2", "case3", "case4", "case5"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn unknown_case_exits_4() {
    let out = nlmp().args(["--case", "case9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn malformed_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "epsilon = 1e-3\nnonlinearity\n").unwrap();
    let out = nlmp().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn single_solve_reports_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlmp()
        .args(["--case", "case1", "--h", "2*pi/20", "--check-invariants", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap();
    assert!(header.starts_with("h,"), "{header}");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), header.split(',').count());
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
}

#[test]
fn neumann_solve_writes_extended_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlmp()
        .args(["--case", "case5", "--h", "0.15", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    // header plus 41 nodes on (-1.5, 4.5)
    assert_eq!(sol.lines().count(), 42);
}
