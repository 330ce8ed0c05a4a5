use qubo_dr::eval::{run_experiment, write_json, ExperimentConfig, ExperimentReport, PolicyConfig, SuiteConfig};
use qubo_dr::io::{read_instance, read_trace, write_instance, write_trace, InstanceFile, TraceFile};
use qubo_dr::problems::{Family, ProblemInstance};
use qubo_dr::search::{IndexMode, Policy, Reducer};
use tempfile::tempdir;

#[test]
fn instance_and_trace_files_round_trip() {
    let dir = tempdir().unwrap();
    let inst = ProblemInstance::random(Family::BinClustering, 6, 11).unwrap();
    let path = dir.path().join("inst.json");
    write_instance(&path, &InstanceFile::from(inst.clone())).unwrap();
    let back = ProblemInstance::try_from(read_instance(&path).unwrap()).unwrap();
    assert_eq!(back, inst);
    assert_eq!(back.regenerate().unwrap(), inst.matrix);

    let trace = Reducer::new(IndexMode::All).run(&inst.matrix, &Policy::Base, 4).unwrap().best_trace;
    let tpath = dir.path().join("trace.json");
    write_trace(&tpath, &TraceFile::new(&trace, None)).unwrap();
    let loaded = read_trace(&tpath).unwrap().to_trace();
    assert_eq!(loaded, trace);
    assert_eq!(loaded.verify(24).unwrap(), None);
}

#[test]
fn report_json_reloads() {
    let dir = tempdir().unwrap();
    let config = ExperimentConfig {
        suites: vec![SuiteConfig {
            family: Family::SubsetSum,
            n: 5,
            count: 2,
            seed: 3,
        }],
        policies: vec![PolicyConfig::new(Policy::Base, IndexMode::Impact)],
        horizons: vec![3],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    let path = dir.path().join("report.json");
    write_json(&report, &path).unwrap();
    let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, report);
}
