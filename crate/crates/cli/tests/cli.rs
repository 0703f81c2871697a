use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use contactnet_cli::config::{parse_initial, parse_points, resolve, Settings};
use contactnet_cli::{run_experiment, CliError, Command, RESULTS};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_contactnet");

fn parse(args: &[&str]) -> Result<contactnet_cli::Parsed, CliError> {
    let argv = std::iter::once("contactnet").chain(args.iter().copied());
    resolve(Settings::try_parse_from(argv).map_err(CliError::Clap)?, None)
}

fn usage_message(r: Result<contactnet_cli::Parsed, CliError>) -> String {
    match r {
        Err(CliError::Usage(msg)) => msg,
        other => panic!("expected a usage error, got {other:?}"),
    }
}

fn results(dir: &Path) -> Vec<Value> {
    fs::read_to_string(dir.join(RESULTS))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn run(args: &[&str]) -> std::process::Output {
    Process::new(BIN)
        .args(args)
        .env_remove("CONTACTNET_SEED")
        .output()
        .unwrap()
}

#[test]
fn alpha_below_three_warns_for_rho_scan() {
    let p = parse(&["--alpha", "2.9", "--command", "rho-scan", "--k-min", "3"]).unwrap();
    assert_eq!(p.config.alpha, 2.9);
    assert_eq!(p.warnings.len(), 1);
    let p = parse(&["--alpha", "2.9", "--command", "gen-graph"]).unwrap();
    assert!(p.warnings.is_empty());
}

#[test]
fn validation_names_the_field() {
    assert!(usage_message(parse(&["--alpha", "0.5", "--command", "rho-scan"])).starts_with("alpha"));
    assert!(usage_message(parse(&["--command", "simulate", "--reps", "0"])).starts_with("reps"));
    assert!(usage_message(parse(&["--alpha", "3"])).starts_with("command"));
    assert!(usage_message(parse(&["--command", "star", "--k", "5", "--m", "6"])).starts_with("m:"));
    assert!(usage_message(parse(&["--command", "diameter", "--k-min", "2"])).starts_with("k-min"));
    assert!(usage_message(parse(&["--command", "rho-scan", "--epsilon", "1"])).starts_with("epsilon"));
    assert!(usage_message(parse(&["--command", "fit-beta"])).starts_with("points"));
    assert!(usage_message(parse(&["--command", "simulate", "--n", "5", "--initial", "5"]))
        .starts_with("initial"));
    assert!(usage_message(parse(&["--command", "star", "--lambda=-1"])).starts_with("lambda"));
    assert!(matches!(parse(&["--command", "nope"]), Err(CliError::Clap(_))));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        r#"{"command": "star", "lambda": 0.7, "k": 40, "master_seed": 3}"#,
    )
    .unwrap();
    let cfg_arg = path.to_str().unwrap();
    let p = parse(&["--config", cfg_arg, "--lambda", "0.2"]).unwrap();
    assert_eq!(p.config.command, Command::Star);
    assert_eq!(p.config.lambda, 0.2);
    assert_eq!(p.config.k, 40);
    assert_eq!(p.config.master_seed, 3);

    fs::write(&path, r#"{"command": "star", "lamda": 0.7}"#).unwrap();
    assert!(usage_message(parse(&["--config", cfg_arg])).contains("lamda"));
}

#[test]
fn environment_seed_wins() {
    let flags = Settings::try_parse_from(["contactnet", "--command", "star", "--master-seed", "1"])
        .unwrap();
    assert_eq!(resolve(flags.clone(), Some("99")).unwrap().config.master_seed, 99);
    assert!(matches!(resolve(flags, Some("x")), Err(CliError::Usage(_))));
}

#[test]
fn default_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = run(&[
        "--command", "star", "--k", "5", "--reps", "3", "--horizon", "1",
        "--output-path", out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["config"]["master_seed"].is_u64());
    assert!(manifest["created_at"].is_u64());
    assert_eq!(manifest["code_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn list_parsers() {
    assert_eq!(parse_initial("all", 4).unwrap(), None);
    assert_eq!(parse_initial("0, 2", 4).unwrap(), Some(vec![0, 2]));
    assert!(parse_initial("4", 4).is_err());
    assert!(parse_initial("a", 4).is_err());
    let pts = parse_points(&["0.1:0.5".into(), "0.2:1".into()]).unwrap();
    assert_eq!(pts, vec![(0.1, 0.5), (0.2, 1.0)]);
    assert!(parse_points(&["0.1".into()]).is_err());
}

#[test]
fn oracle_check_on_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "--command", "oracle-check", "--lambda", "1", "--reps", "20000", "--master-seed", "4",
        "--output-path", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &results(dir.path())[0]["result"];
    assert!(r["max_duality_gap"].as_f64().unwrap() < 1e-8);
    assert!(r["z_score"].as_f64().unwrap().abs() < 4.0);
    assert!((r["exact"].as_f64().unwrap() - 0.852_432_901_352_294).abs() < 1e-9);
}

#[test]
fn simulate_without_infection_dies_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "--command", "simulate", "--n", "300", "--lambda", "0", "--initial", "all", "--reps", "3",
        "--horizon", "1000", "--master-seed", "8", "--output-path", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        let csv = fs::read_to_string(dir.path().join(format!("trajectories/{i:05}.csv"))).unwrap();
        let last = csv.lines().last().unwrap();
        assert_eq!(last.split(',').nth(1), Some("0"), "{last}");
    }
    let rs = results(dir.path());
    assert_eq!(rs.len(), 4);
    assert_eq!(rs[3]["result"]["extinct"], 3);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--command", "simulate", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(run(&["--alpha", "0.5", "--command", "gen-graph"]).status.code(), Some(2));
    assert_eq!(run(&["--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--command", "duality-check", "--n", "13", "--output-path", out]);
    assert_eq!(o.status.code(), Some(4));
    // A degree law that cannot produce a simple graph on 2 vertices.
    let o = run(&[
        "--command", "gen-graph", "--n", "2", "--k-min", "3", "--k-max", "3",
        "--output-path", out,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let edges = dir.path().join("g.txt");
    fs::write(&edges, "3\n0 1\n1 2\n").unwrap();
    let o = run(&[
        "--command", "simulate", "--graph", edges.to_str().unwrap(), "--initial", "7",
        "--output-path", out,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_beta_from_points_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit");
    let o = run(&[
        "--command", "fit-beta", "--points", "0.1:0.002,0.2:0.016,0.4:0.128",
        "--output-path", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let beta = results(&out)[0]["result"]["beta_hat"].as_f64().unwrap();
    assert!((beta - 3.0).abs() < 1e-9);

    let input = dir.path().join("scan.jsonl");
    fs::write(
        &input,
        concat!(
            r#"{"experiment":"rho-scan","params":{"lambda":0.1,"replicate":0},"seed":1,"result":{"vertex":3,"survived":true}}"#, "\n",
            r#"{"experiment":"rho-scan","params":{"lambda":0.1},"seed":1,"result":{"rho":0.01}}"#, "\n",
            r#"{"experiment":"rho-scan","params":{"lambda":0.2},"seed":1,"result":{"rho":0.04}}"#, "\n",
            r#"{"experiment":"rho-scan","params":{"lambda":0.4},"seed":1,"result":{"rho":0.16}}"#, "\n",
        ),
    )
    .unwrap();
    let out2 = dir.path().join("fit2");
    let o = run(&[
        "--command", "fit-beta", "--input", input.to_str().unwrap(),
        "--output-path", out2.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let beta = results(&out2)[0]["result"]["beta_hat"].as_f64().unwrap();
    assert!((beta - 2.0).abs() < 1e-9);

    let o = run(&["--command", "fit-beta", "--points", "0.1:0.1,0.2:0.2", "--output-path",
        out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn gen_graph_writes_a_readable_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--command", "gen-graph", "--n", "500", "--master-seed", "2", "--output-path", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    let g = contactnet::Graph::from_edge_list(&text).unwrap();
    assert_eq!(g.n(), 500);
    assert!(g.degrees().iter().all(|&d| d >= 3));
    let r = &results(dir.path())[0]["result"];
    assert_eq!(r["graph"]["edges"].as_u64().unwrap() as usize, g.edge_count());
}

#[test]
fn star_duality_and_diameter_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "--command", "star", "--k", "20", "--lambda", "0.5", "--reps", "50", "--master-seed", "1",
        "--output-path", out,
    ]);
    assert!(o.status.success());
    let rs = results(dir.path());
    assert_eq!(rs.len(), 51);
    let h = rs[50]["params"]["horizon"].as_f64().unwrap();
    assert!((h - 0.5f64.exp()).abs() < 1e-12);

    let o = run(&[
        "--command", "duality-check", "--reps", "5", "--lambda", "0.3", "--horizon", "2",
        "--master-seed", "1", "--output-path", out,
    ]);
    assert!(o.status.success());
    let rs = results(dir.path());
    assert!(rs[5]["result"]["max_gap"].as_f64().unwrap() < 1e-8);

    let o = run(&[
        "--command", "diameter", "--k-min", "3", "--k-max", "3", "--n-grid", "50,200",
        "--reps", "4", "--master-seed", "1", "--output-path", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rs = results(dir.path());
    assert_eq!(rs.len(), 10);
    assert_eq!(rs[9]["params"]["nu"].as_f64(), Some(2.0));
}

#[test]
fn manifest_replay_and_worker_count() {
    let parsed = parse(&[
        "--command", "rho-scan", "--n", "300", "--sample-size", "40", "--lambda-grid", "0.3,0.6,1.2",
        "--horizon", "5", "--master-seed", "77", "--workers", "1",
    ])
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut serial = parsed.clone();
    serial.config.output_path = dir.path().join("serial");
    run_experiment(&serial).unwrap();
    let mut parallel = parsed;
    parallel.config.output_path = dir.path().join("parallel");
    parallel.config.workers = 4;
    run_experiment(&parallel).unwrap();
    let a = fs::read(dir.path().join("serial").join(RESULTS)).unwrap();
    let b = fs::read(dir.path().join("parallel").join(RESULTS)).unwrap();
    assert_eq!(a, b);

    let manifest = dir.path().join("serial/manifest.json");
    let replay = dir.path().join("replay");
    let o = run(&[
        "--config", manifest.to_str().unwrap(), "--output-path", replay.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(replay.join(RESULTS)).unwrap(), a);
}
