use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cmtf_core::io::{read_matrix_csv, write_data};
use cmtf_core::prox::Regularizer;
use cmtf_core::solver::{multi_init_fit, Dataset, ProblemSpec, SolverConfig};
use cmtf_core::coupling::CouplingSpec;
use cmtf_core::synthgen::gen_experiment1;
use cmtf_core::tensor::{DataTensor, RaggedTensor};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cmtf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmtf")).args(args).output().expect("run cmtf")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const EXP1_CONFIG: &str = r#"{
    "datasets": [
        {"name": "X", "model": "parafac2", "path": "X", "rank": 3,
         "regularizers": [{"type": "nonneg"}, {"type": "nonneg"}, {"type": "nonneg"}]},
        {"name": "Y", "model": "matrix", "path": "Y.csv", "rank": 3,
         "regularizers": [{"type": "nonneg"}, {"type": "nonneg"}]}
    ],
    "coupling": {"participants": [{"dataset": "X"}, {"dataset": "Y"}]},
    "solver": {"initializations": 2, "seed": 5, "max_outer_iterations": 300}
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("fit.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fit_matches_library_on_dumped_data() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = gen_experiment1(0.2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    synth.dump(tmp.path()).unwrap();
    let config = write_config(tmp.path(), EXP1_CONFIG);
    let out_dir = tmp.path().join("out");
    let out = cmtf(&["fit", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let nn = || vec![Regularizer::NonNegativity];
    let mut x = Dataset::new("X", synth.datasets[0].clone(), 3, 0.5);
    x.regularizers = vec![nn(), nn(), nn()];
    let mut y = Dataset::new("Y", synth.datasets[1].clone(), 3, 0.5);
    y.regularizers = vec![nn(), nn()];
    let problem = ProblemSpec {
        datasets: vec![x, y],
        coupling: Some(CouplingSpec::exact(vec![0, 1], 3).unwrap()),
    };
    let config = SolverConfig {
        initializations: 2,
        seed: 5,
        max_outer_iterations: 300,
        ..SolverConfig::default()
    };
    let fit = multi_init_fit(&problem, &config).unwrap();

    let a = read_matrix_csv(&out_dir.join("X_A.csv")).unwrap();
    let f = read_matrix_csv(&out_dir.join("Y_F.csv")).unwrap();
    let delta = read_matrix_csv(&out_dir.join("dictionary.csv")).unwrap();
    let (lib_a, lib_f) = match (&fit.decompositions[0], &fit.decompositions[1]) {
        (cmtf_core::tensor::Decomposition::Parafac2(p), cmtf_core::tensor::Decomposition::Matrix(m)) => {
            (p.a.clone(), m.f.clone())
        }
        _ => panic!("unexpected model kinds"),
    };
    assert_eq!(a, lib_a);
    assert_eq!(f, lib_f);
    assert_eq!(&delta, fit.dictionary.as_ref().unwrap());
    assert!(out_dir.join("X_B").join("slice_000.csv").exists());

    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["iterations"].as_u64().unwrap() as usize, fit.iterations);
    assert_eq!(diag["seed"].as_u64().unwrap(), fit.seed);
    assert_eq!(diag["final_objective"].as_f64().unwrap(), fit.final_objective());
    assert_eq!(diag["datasets"].as_array().unwrap().len(), 2);
    let trace = fs::read_to_string(out_dir.join("objective_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), fit.objective_trace.len() + 1);
}

#[test]
fn missing_data_file_is_reported_with_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), EXP1_CONFIG);
    let out = cmtf(&["fit", "--config", &config, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains(tmp.path().join("X").to_str().unwrap()), "{err}");
}

#[test]
fn rank_above_slice_width_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let slices = (0..4).map(|k| Array2::from_elem((6, 2), 1.0 + k as f64)).collect();
    write_data(tmp.path(), "X", &DataTensor::Ragged(RaggedTensor::new(slices).unwrap())).unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"datasets": [{"name": "X", "model": "parafac2", "path": "X", "rank": 3}]}"#,
    );
    let out = cmtf(&["fit", "--config", &config, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("rank"), "{}", stderr(&out));
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &EXP1_CONFIG.replace(r#""rank": 3,
         "regularizers": [{"type": "nonneg"}, {"type": "nonneg"}]"#, r#""rank": -1,
         "regularizers": [{"type": "nonneg"}, {"type": "nonneg"}]"#));
    let out = cmtf(&["fit", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("datasets[1].rank"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(cmtf(&["experiment", "exp9"]).status.code(), Some(1));
    assert_eq!(cmtf(&["experiment", "exp1", "--replicates", "0"]).status.code(), Some(1));
    assert_eq!(cmtf(&["--help"]).status.code(), Some(0));
}

#[test]
fn experiment_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let out = cmtf(&["experiment", "exp1", "--replicates", "1", "--inits", "1", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("exp1.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("fms_A"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("coupled-nonneg"));
}
