use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdoa::domain::jsonl::read_dataset;
use pdoa::learner::PolicyBundle;
use tempfile::TempDir;

const SMALL: &str = "seeds = [1]\n[data]\nepisodes_per_preference = 3\n[adapt]\nsteps = 40\nsamples = 16\n[eval]\nbaseline = false\n";
const CONSTRAINED: &str = "seeds = [1]\n[data]\nepisodes_per_preference = 2\nconstrained = true\nepsilon = 0.35\n[adapt]\nsteps = 40\nsamples = 16\nalpha = 0.5\n[targets]\npreferences = 2\nthresholds = 2\n";

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        Sandbox { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_pdoa"))
            .current_dir(self.dir.path())
            .env_remove("PDOA_OUT")
            .arg("--config")
            .arg("run.toml")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path(rel)).unwrap()
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn gen_data_is_reproducible_and_counted() {
    let a = Sandbox::new(SMALL);
    let b = Sandbox::new(SMALL);
    a.ok(&["gen-data"]);
    b.ok(&["gen-data"]);
    assert_eq!(a.read("pdoa-out/seed-1/dataset.jsonl"), b.read("pdoa-out/seed-1/dataset.jsonl"));
    let manifest: serde_json::Value = serde_json::from_str(&a.read("pdoa-out/seed-1/manifest.json")).unwrap();
    assert_eq!(manifest["requested_trajectories"], 18);
    assert_eq!(manifest["trajectories"], 18);
    assert_eq!(manifest["env_id"], "cmo-grid");
    let bad = Sandbox::new("env_id = \"nowhere\"\n");
    assert!(!bad.run(&["gen-data"]).status.success());
}

#[test]
fn out_dir_override_from_environment() {
    let s = Sandbox::new(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_pdoa"))
        .current_dir(s.dir.path())
        .env("PDOA_OUT", "elsewhere")
        .args(["--config", "run.toml", "gen-data", "--seed", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(s.path("elsewhere/seed-4/dataset.jsonl").exists());
    assert!(!s.path("pdoa-out").exists());
}

#[test]
fn train_needs_data_and_supports_both_learners() {
    let s = Sandbox::new(SMALL);
    assert!(!s.run(&["train"]).status.success());
    s.ok(&["gen-data"]);
    s.ok(&["train"]);
    let text = s.read("pdoa-out/seed-1/bundle.json");
    let bundle = PolicyBundle::read_json(text.as_bytes()).unwrap();
    assert_eq!(bundle.kind(), "regularized");
    let again = PolicyBundle::read_json(text.as_bytes()).unwrap();
    for s_id in 0..bundle.n_states() {
        let w = [0.7, 0.3];
        assert_eq!(bundle.action_probs(s_id, &w, None).unwrap(), again.action_probs(s_id, &w, None).unwrap());
        assert_eq!(bundle.v_value(s_id, &w).unwrap(), again.v_value(s_id, &w).unwrap());
    }
    let rc = Sandbox::new(&format!("{SMALL}[learner]\nkind = \"return_conditioned\"\n"));
    rc.ok(&["gen-data"]);
    rc.ok(&["train"]);
    let b = PolicyBundle::read_json(rc.read("pdoa-out/seed-1/bundle.json").as_bytes()).unwrap();
    assert_eq!(b.kind(), "return_conditioned");
    let ds = read_dataset(std::io::BufReader::new(std::fs::File::open(rc.path("pdoa-out/seed-1/dataset.jsonl")).unwrap())).unwrap();
    assert_eq!(ds.trajectories.len(), 18);
}

#[test]
fn adapt_writes_simplex_preferences_and_traces() {
    let s = Sandbox::new(SMALL);
    s.ok(&["gen-data"]);
    s.ok(&["train"]);
    s.ok(&["adapt", "--trace"]);
    let recs: serde_json::Value = serde_json::from_str(&s.read("pdoa-out/seed-1/adapted.json")).unwrap();
    let recs = recs.as_array().unwrap();
    assert_eq!(recs.len(), 11);
    for r in recs {
        let w: Vec<f64> = serde_json::from_value(r["preference"].clone()).unwrap();
        assert_eq!(w.len(), 2);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9 && w.iter().all(|x| *x >= 0.0));
    }
    assert_eq!(csv_rows(&s.path("pdoa-out/seed-1/trace.csv")).len(), 40 * 11);
}

#[test]
fn adapt_passes_cvar_level_through() {
    let s = Sandbox::new(CONSTRAINED);
    s.ok(&["gen-data"]);
    s.ok(&["train"]);
    s.ok(&["adapt"]);
    let recs: serde_json::Value = serde_json::from_str(&s.read("pdoa-out/seed-1/adapted.json")).unwrap();
    for r in recs.as_array().unwrap() {
        assert_eq!(r["alpha"], 0.5);
        let mean: Vec<f64> = serde_json::from_value(r["mean"].clone()).unwrap();
        let sd: Vec<f64> = serde_json::from_value(r["stddev"].clone()).unwrap();
        let w: Vec<f64> = serde_json::from_value(r["preference"].clone()).unwrap();
        // cost weight raised by σ φ(Φ⁻¹(0.5)) / 0.5 before normalizing
        let raw = [mean[0].max(0.0), mean[1].max(0.0), (mean[2] + sd[2] * 0.797_884_560_802_865_4).max(0.0)];
        let total: f64 = raw.iter().sum();
        for (a, b) in w.iter().zip(raw) {
            assert!((a - b / total).abs() < 1e-9);
        }
    }
}

#[test]
fn eval_rows_oracle_and_reproducibility() {
    let s = Sandbox::new(SMALL);
    s.ok(&["gen-data"]);
    s.ok(&["train"]);
    s.ok(&["eval"]);
    let rows = csv_rows(&s.path("pdoa-out/seed-1/rows.csv"));
    assert_eq!(rows.len(), 11);
    let first = (s.read("pdoa-out/seed-1/rows.csv"), s.read("pdoa-out/seed-1/summary.json"));
    s.ok(&["eval", "--workers", "1"]);
    assert_eq!(first, (s.read("pdoa-out/seed-1/rows.csv"), s.read("pdoa-out/seed-1/summary.json")));
    s.ok(&["eval", "--oracle"]);
    let rows = csv_rows(&s.path("pdoa-out/seed-1/rows.csv"));
    assert_eq!(rows.len(), 22);
    let oracle: Vec<_> = rows.iter().filter(|r| &r[1] == "oracle").collect();
    assert_eq!(oracle.len(), 11);
    for r in oracle {
        // oracle rows query the bundle at the target preference itself
        assert_eq!(r[3].trim_start_matches("w="), r[4].split('/').map(|x| format!("{:.4}", x.parse::<f64>().unwrap())).collect::<Vec<_>>().join("/"));
    }
}

#[test]
fn report_aggregates_seeds() {
    let s = Sandbox::new(&SMALL.replace("seeds = [1]", "seeds = [1, 2, 3]"));
    s.ok(&["gen-data"]);
    s.ok(&["train"]);
    s.ok(&["eval"]);
    s.ok(&["report"]);
    let rows = csv_rows(&s.path("pdoa-out/report.csv"));
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    assert_eq!(keys.len(), 4);
    assert!(keys.contains(&("pdoa@0.7".into(), "average_utility".into())));
    assert!(rows.iter().all(|r| &r[4] == "3"));
    s.ok(&["report", "pdoa-out/seed-2/summary.json"]);
    assert!(csv_rows(&s.path("pdoa-out/report.csv")).iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));

    let other = Sandbox::new(&SMALL.replace("seeds = [1]", "seeds = [9]").replace("[eval]", "[targets]\npreferences = 3\n[eval]"));
    other.ok(&["gen-data"]);
    other.ok(&["train"]);
    other.ok(&["eval"]);
    let foreign = other.path("pdoa-out/seed-9/summary.json");
    let out = s.run(&["report", "pdoa-out/seed-1/summary.json", foreign.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("target grid"));
}
