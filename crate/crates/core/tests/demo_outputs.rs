use std::path::Path;

use nalgebra::{DMatrix, DVector};

use simlearn::experiment::DemoExample;
use simlearn::{emit_outputs, principal_cosines, run_demo, BehaviorDecomposition};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[test]
fn example_one_transition_fixture() {
    let scenario = DemoExample::MultipleTasks.scenario().unwrap();
    let sys = scenario.system("sigma1").unwrap();
    let phi = sys.state_transition(2, 0).unwrap();
    // A(1) A(0) with A(t) = A₀ + 0.05 t I, worked by hand.
    let expected = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, 0.05, 1.0, -0.5, -1.85, -2.45, 1.225, 4.0325, 4.275],
    );
    assert!((phi - expected).amax() < 1e-14);
}

#[test]
fn example_one_free_response_fixture() {
    let scenario = DemoExample::MultipleTasks.scenario().unwrap();
    let sys = scenario.system("sigma1").unwrap();
    let free = &sys.lift().l * sys.x0();
    assert_eq!(free.len(), 25);
    assert!(free[0].abs() < 1e-15);
    assert!((free[1] - 1.02 * SQRT_2).abs() < 1e-14);
    assert!((free[2] - 1.02 * (2.0 - 2.45 * SQRT_2)).abs() < 1e-14);
}

#[test]
fn principal_vectors_reconstruct_cross_gram_for_nearly_aligned_behaviors() {
    // Most indexes of this pair lie within 1e-4 of one.
    let scenario = DemoExample::MultipleTasks.scenario().unwrap();
    let dec = |name: &str| {
        let sys = scenario.system(name).unwrap();
        BehaviorDecomposition::new(&sys.lift(), sys.x0()).unwrap()
    };
    let (h1, h2) = (dec("sigma1"), dec("sigma2"));
    let (s, u, v) = principal_cosines(h1.basis(), h2.basis()).unwrap();
    let cross = h1.basis().tr_mul(h2.basis());
    let back = &u * DMatrix::from_diagonal(&s) * v.transpose();
    assert!((back - cross).amax() < 1e-12);
}

fn file_names(paths: &[std::path::PathBuf]) -> Vec<String> {
    paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect()
}

#[test]
fn example_one_emits_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let written = emit_outputs(&run_demo(DemoExample::MultipleTasks).unwrap(), dir.path()).unwrap();
    assert_eq!(
        file_names(&written),
        [
            "similarity.csv",
            "trajectory_sigma2_r1.csv",
            "trajectory_sigma2_r2.csv",
            "summary.csv",
            "ilc_sigma2_r1.csv",
            "ilc_sigma2_r2.csv",
        ]
    );
    let similarity = std::fs::read_to_string(dir.path().join("similarity.csv")).unwrap();
    assert_eq!(similarity.lines().count(), 1 + 25);
    let ilc = std::fs::read_to_string(dir.path().join("ilc_sigma2_r1.csv")).unwrap();
    assert!(ilc.starts_with("iteration,error_norm\n0,"));
}

#[test]
fn example_two_compares_two_guests() {
    let dir = tempfile::tempdir().unwrap();
    let results = run_demo(DemoExample::DifferentSimilarity).unwrap();
    let written = emit_outputs(&results, dir.path()).unwrap();
    assert_eq!(written.len(), 6);
    let similarity = std::fs::read_to_string(dir.path().join("similarity.csv")).unwrap();
    assert_eq!(similarity.lines().count(), 1 + 2 * 25);
}

fn column(rows: &[csv::StringRecord], headers: &csv::StringRecord, name: &str) -> Vec<f64> {
    let idx = headers.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[idx].parse().unwrap()).collect()
}

fn read_csv(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let rows = reader.records().map(Result::unwrap).collect();
    (headers, rows)
}

#[test]
fn summary_distance_matches_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&run_demo(DemoExample::MultipleTasks).unwrap(), dir.path()).unwrap();
    let (sh, summary) = read_csv(&dir.path().join("summary.csv"));
    let task_idx = sh.iter().position(|h| h == "task").unwrap();
    let dist_idx = sh.iter().position(|h| h == "distance").unwrap();
    assert_eq!(summary.len(), 2);
    for row in &summary {
        let reported: f64 = row[dist_idx].parse().unwrap();
        let (th, traj) = read_csv(
            &dir.path()
                .join(format!("trajectory_{}.csv", &row[task_idx])),
        );
        let stack = |u: &str, y: &str| {
            let mut v = column(&traj, &th, u);
            v.extend(column(&traj, &th, y));
            DVector::from_vec(v)
        };
        let guest = stack("guest_u", "guest_y");
        let host = stack("host_u", "host_y");
        let recomputed = (guest - host).norm();
        assert!((recomputed - reported).abs() <= 1e-12 * (1.0 + reported));
    }
}
