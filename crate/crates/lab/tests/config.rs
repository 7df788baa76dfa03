use transport_lab::config::{ExperimentConfig, EXPERIMENTS};
use transport_lab::report::{ExperimentReport, Series, Verdict};
use transport_lab::{run_experiment, LabError};

fn config_error(text: &str) -> bool {
    ExperimentConfig::from_toml(text).is_err_and(|e| e.exit_code() == 2)
}

#[test]
fn defaults_validate_and_parse_round_trips() {
    let d = ExperimentConfig::default();
    d.validate().unwrap();
    assert_eq!(ExperimentConfig::from_toml("").unwrap(), d);
    let cfg = ExperimentConfig::from_toml(
        "experiment = \"uniqueness\"\nfield = \"rotation\"\ndatum = \"bump\"\np = 1.5\nsteps = 64\nmollify_ladder = [0.3, 0.1]\n",
    )
    .unwrap();
    assert_eq!((cfg.field.as_str(), cfg.datum.as_str(), cfg.p, cfg.steps), ("rotation", "bump", 1.5, 64));
    assert_eq!(cfg.mollify_ladder, vec![0.3, 0.1]);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(config_error("unknown_key = 1"));
    assert!(config_error("field = \"vortex\""));
    assert!(config_error("datum = \"square\""));
    assert!(config_error("experiment = \"everything\""));
    assert!(config_error("mollify_ladder = [0.1, 0.2]"));
    assert!(config_error("mollify_ladder = [0.2, 0.2]"));
    assert!(config_error("mollify_ladder = []"));
    assert!(config_error("cutoff_ladder = [4.0, 2.0]"));
    assert!(config_error("steps = 0"));
    assert!(config_error("p = 0.5"));
    assert!(config_error("theta = 1.5"));
    assert!(config_error("samples = 0"));
    assert!(config_error("flow_samples = 8"));
    assert!(config_error("direction = \"sideways\""));
    assert!(config_error("levels = 1"));
    assert!(config_error("box_half_width = -1.0"));
    assert!(config_error("p = \"two\""));
}

#[test]
fn echo_is_canonical() {
    let cfg = ExperimentConfig::default();
    let text = serde_json::to_string(&cfg.echo()).unwrap();
    let keys: Vec<String> = cfg.echo().as_object().unwrap().keys().cloned().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    // Field order in the source text does not matter.
    let a = ExperimentConfig::from_toml("seed = 5\np = 3.0\n").unwrap();
    let b = ExperimentConfig::from_toml("p = 3.0\nseed = 5\n").unwrap();
    assert_eq!(serde_json::to_string(&a.echo()).unwrap(), serde_json::to_string(&b.echo()).unwrap());
    assert!(text.contains("\"mollify_ladder\":[0.4,0.2,0.1,0.05]"));
}

#[test]
fn every_label_resolves() {
    for field in transport_lab::config::FIELD_LABELS {
        let cfg = ExperimentConfig { field: field.into(), ..Default::default() };
        assert!(cfg.drift().is_ok(), "{field}");
    }
    for datum in transport_lab::config::DATUM_LABELS {
        let cfg = ExperimentConfig { datum: datum.into(), ..Default::default() };
        assert!(cfg.datum().is_ok(), "{datum}");
    }
}

#[test]
fn experiment_name_must_match() {
    let cfg = ExperimentConfig { experiment: "persistence".into(), ..Default::default() };
    let err = run_experiment("uniqueness", &cfg).unwrap_err();
    assert!(matches!(err, LabError::Config(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(run_experiment("nothing", &ExperimentConfig::default()), Err(LabError::Config(_))));
    assert_eq!(EXPERIMENTS.len(), 7);
}

#[test]
fn csv_is_full_precision_with_header() {
    let mut s = Series::new("demo", &["a", "b"]);
    let values = [std::f64::consts::PI, -1.0 / 3.0, 1e-300, 123456789.0123];
    s.push(vec![values[0], values[1]]);
    s.push(vec![values[2], values[3]]);
    let csv = s.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,b"));
    let parsed: Vec<f64> = lines.flat_map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect();
    assert_eq!(parsed.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(s.column("b"), Some(vec![values[1], values[3]]));
}

#[test]
fn verdict_bounds() {
    assert!(Verdict::at_most("a", 1.0, 1.0, 1, "").passed);
    assert!(!Verdict::at_most("a", 1.0 + 1e-15, 1.0, 1, "").passed);
    assert!(Verdict::at_least("a", 2.0, 2.0, 1, "").passed);
    assert!(Verdict::within("a", 0.9, 0.9, 1.1, 1, "").passed);
    assert!(!Verdict::within("a", 1.2, 0.9, 1.1, 1, "").passed);
    assert!(!Verdict::at_most("a", f64::NAN, 1.0, 1, "").passed);
    assert!(!Verdict::holds("a", false, 1, "").passed);
}

#[test]
fn report_files_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = ExperimentReport::new("demo", ExperimentConfig::default().echo());
    let mut s = Series::new("table", &["x"]);
    s.push(vec![1.0]);
    r.series.push(s);
    r.verdicts.push(Verdict::at_most("ok", 0.0, 1.0, 3, "fine"));
    assert_eq!(r.exit_code(), 0);
    let written = r.write_to(dir.path()).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["demo.report.json", "demo.table.csv"]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&written[0]).unwrap()).unwrap();
    assert_eq!(json["verdicts"][0]["samples"], 3);
    assert_eq!(json["verdicts"][0]["upper"], 1.0);
    r.verdicts.push(Verdict::at_least("bad", 0.0, 1.0, 3, ""));
    assert_eq!(r.exit_code(), 1);
}
