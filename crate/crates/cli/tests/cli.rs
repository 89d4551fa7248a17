use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn netplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netplan"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("OPENAI_API_KEY")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
    scenario: PathBuf,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scenario");
        let o = netplan(&["synth", "--out", s(&out), "--seed", &seed.to_string()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let scenario = PathBuf::from(String::from_utf8(o.stdout).unwrap().trim());
        Fixture { dir, scenario }
    }

    fn ws(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, cmd: &str, ws: &Path, extra: &[&str]) -> Output {
        let mut args = vec![cmd, "--scenario", s(&self.scenario), "--out", s(ws)];
        args.extend_from_slice(extra);
        netplan(&args)
    }

    fn edit(&self, f: impl FnOnce(&mut Value)) {
        let mut v: Value =
            serde_json::from_str(&std::fs::read_to_string(&self.scenario).unwrap()).unwrap();
        f(&mut v);
        std::fs::write(&self.scenario, v.to_string()).unwrap();
    }

    fn pipeline(&self, ws: &Path) {
        for cmd in ["demand", "links", "optimize", "verify"] {
            let o = self.run(cmd, ws, &[]);
            assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        }
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn demand_writes_nodes_and_candidates() {
    let fx = Fixture::new(1);
    let ws = fx.ws("ws");
    let o = fx.run("demand", &ws, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("demand nodes"));
    assert!(!read_json(&ws.join("demand.json"))
        .as_array()
        .unwrap()
        .is_empty());
    assert!(!read_json(&ws.join("candidates.json"))
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn missing_raster_is_an_input_error_naming_the_file() {
    let fx = Fixture::new(1);
    fx.edit(|v| v["population_path"] = json!("nowhere/population.asc"));
    let o = fx.run("demand", &fx.ws("ws"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("population.asc"), "{}", stderr(&o));
}

#[test]
fn region_flag_narrows_extraction() {
    let fx = Fixture::new(2);
    let full = fx.ws("full");
    let part = fx.ws("part");
    assert_eq!(code(&fx.run("demand", &full, &[])), 0);
    let r = read_json(&fx.scenario)["region"].clone();
    let f = |k: &str| r[k].as_f64().unwrap();
    let narrow = format!(
        "{},{},{},{}",
        f("lat_min"),
        (f("lat_min") + f("lat_max")) / 2.0,
        f("lon_min"),
        f("lon_max")
    );
    let o = fx.run("demand", &part, &["--region", &narrow]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let count = |ws: &Path| read_json(&ws.join("demand.json")).as_array().unwrap().len();
    assert!(count(&part) < count(&full));
}

#[test]
fn bad_region_is_an_input_error() {
    let fx = Fixture::new(1);
    let o = fx.run("demand", &fx.ws("ws"), &["--region", "21.3,21.1,43.5,43.7"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn links_without_demand_explains_what_to_run() {
    let fx = Fixture::new(1);
    let o = fx.run("links", &fx.ws("ws"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("demand.json"), "{}", stderr(&o));
}

#[test]
fn link_matrix_is_complete() {
    let fx = Fixture::new(3);
    let ws = fx.ws("ws");
    assert_eq!(code(&fx.run("demand", &ws, &[])), 0);
    assert_eq!(code(&fx.run("links", &ws, &[])), 0);
    let nodes = read_json(&ws.join("demand.json")).as_array().unwrap().len();
    let sites = read_json(&ws.join("candidates.json"))
        .as_array()
        .unwrap()
        .len();
    let rows = std::fs::read_to_string(ws.join("links.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, nodes * sites);
}

#[test]
fn full_pipeline_verifies_without_violations() {
    let fx = Fixture::new(4);
    let ws = fx.ws("ws");
    fx.pipeline(&ws);
    let plan = read_json(&ws.join("plan.json"));
    assert_eq!(plan["status"], "Optimal");
    let report = read_json(&ws.join("verify.json"));
    assert_eq!(report["violations"], json!([]));
    assert_eq!(report["coverage_fraction"], 1.0);
    assert!(ws.join("verify.geojson").exists());
}

#[test]
fn empty_plan_has_zero_coverage() {
    let fx = Fixture::new(1);
    let ws = fx.ws("ws");
    assert_eq!(code(&fx.run("demand", &ws, &[])), 0);
    let empty = fx.ws("empty.json");
    std::fs::write(&empty, r#"{"opened_sites": []}"#).unwrap();
    let o = fx.run("verify", &ws, &[s(&empty)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&ws.join("verify.json"));
    assert_eq!(report["coverage_fraction"], 0.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cost 0 units"));
}

#[test]
fn unknown_site_kind_is_rejected() {
    let fx = Fixture::new(1);
    let ws = fx.ws("ws");
    assert_eq!(code(&fx.run("demand", &ws, &[])), 0);
    let bad = fx.ws("bad.json");
    std::fs::write(
        &bad,
        r#"{"opened_sites": [{"kind": "blimp", "lat": 21.2, "lon": 43.6}]}"#,
    )
    .unwrap();
    let o = fx.run("verify", &ws, &[s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("blimp"), "{}", stderr(&o));
}

#[test]
fn compare_of_one_plan_is_one_row() {
    let fx = Fixture::new(5);
    let ws = fx.ws("ws");
    fx.pipeline(&ws);
    let plan = ws.join("plan.json");
    let o = fx.run("compare", &ws, &[s(&plan)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(ws.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn unreachable_rate_floor_exits_infeasible() {
    let fx = Fixture::new(1);
    fx.edit(|v| v["min_rate_bps"] = json!(5e8));
    let ws = fx.ws("ws");
    assert_eq!(code(&fx.run("demand", &ws, &[])), 0);
    assert_eq!(code(&fx.run("links", &ws, &[])), 0);
    let o = fx.run("optimize", &ws, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn agent_without_key_is_a_backend_error() {
    let fx = Fixture::new(1);
    let o = fx.run(
        "agent",
        &fx.ws("ws"),
        &["--endpoint", "http://127.0.0.1:9", "plan it"],
    );
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("OPENAI_API_KEY"), "{}", stderr(&o));
}

#[test]
fn agent_step_limit_exits_five() {
    let fx = Fixture::new(1);
    let script = fx.ws("script.json");
    let call =
        json!({"content": "checking", "tool_calls": [{"name": "verify_plan", "arguments": {}}]});
    std::fs::write(&script, json!([call, call, call]).to_string()).unwrap();
    let o = fx.run(
        "agent",
        &fx.ws("ws"),
        &["--script", s(&script), "--max-steps", "2", "plan it"],
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let lines = std::fs::read_to_string(fx.ws("ws").join("transcript.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}

#[test]
fn artifacts_are_reproducible() {
    let fx = Fixture::new(6);
    let (a, b) = (fx.ws("a"), fx.ws("b"));
    fx.pipeline(&a);
    fx.pipeline(&b);
    for f in [
        "demand.json",
        "candidates.json",
        "links.csv",
        "verify.json",
        "verify.geojson",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let timeless = |ws: &Path| {
        let mut v = read_json(&ws.join("plan.json"));
        v["report"]["wall_time_s"] = json!(0);
        v
    };
    assert_eq!(timeless(&a), timeless(&b));
}
