//! End-to-end checks of the `manifold` binary: outputs, exit codes and provenance.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use manifold::cli::{sha256_file, Manifest};
use manifold::quality::QualityReport;
use manifold::rng::Rng;
use serde_json::Value;
use tempfile::TempDir;

fn manifold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manifold")).args(args).env_remove("MANIFOLD_THREADS").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Generates a fixture with the binary and returns (embeddings, annotations).
fn fixture(dir: &TempDir, spec: &str, n: usize) -> (String, String) {
    let out = dir.path().join("data");
    let res =
        manifold(&["fixtures", "generate", "--spec", spec, "--n", &n.to_string(), "--seed", "7", "--out", &s(&out)]);
    assert!(res.status.success(), "{}", stderr(&res));
    (s(&out.join(format!("{spec}.embeddings.csv"))), s(&out.join(format!("{spec}.annotations.csv"))))
}

#[test]
fn help_exits_zero() {
    assert_eq!(manifold(&["--help"]).status.code(), Some(0));
    assert_eq!(manifold(&["embed", "--help"]).status.code(), Some(0));
    assert_eq!(manifold(&["embed"]).status.code(), Some(1));
}

#[test]
fn unknown_algorithm_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (input, _) = fixture(&dir, "line_1d", 20);
    let res = manifold(&["embed", "--algo", "umap", "--input", &input, "--out", &s(dir.path()), "--seed", "1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).starts_with("ConfigError"), "{}", stderr(&res));
}

#[test]
fn foreign_hyperparameter_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (input, _) = fixture(&dir, "line_1d", 20);
    let res = manifold(&[
        "embed",
        "--algo",
        "classical_mds",
        "--input",
        &input,
        "--out",
        &s(dir.path()),
        "--seed",
        "1",
        "--perplexity",
        "5",
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn disconnected_isomap_exits_three() {
    let dir = TempDir::new().unwrap();
    let (input, ann) = fixture(&dir, "gaussian_clusters", 90);
    let res = manifold(&[
        "embed",
        "--algo",
        "isomap",
        "--input",
        &input,
        "--annotations",
        &ann,
        "--out",
        &s(dir.path()),
        "--seed",
        "1",
        "--k",
        "5",
    ]);
    assert_eq!(res.status.code(), Some(3));
    let first = stderr(&res).lines().next().unwrap().to_string();
    assert_eq!(first, "DisconnectedGraph components=3 sizes=30,30,30");
    assert!(res.stdout.is_empty());
}

#[test]
fn bad_thread_count_exits_one() {
    let out = Command::new(env!("CARGO_BIN_EXE_manifold"))
        .args(["fixtures", "generate", "--spec", "line_1d", "--n", "10", "--seed", "1", "--out", "unused"])
        .env("MANIFOLD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tsne_runs_are_byte_identical_and_manifest_is_complete() {
    let dir = TempDir::new().unwrap();
    let (input, ann) = fixture(&dir, "gaussian_clusters", 300);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let res = manifold(&[
            "embed",
            "--algo",
            "tsne",
            "--input",
            &input,
            "--annotations",
            &ann,
            "--out",
            &s(&out),
            "--seed",
            "7",
        ]);
        assert!(res.status.success(), "{}", stderr(&res));
        csvs.push(std::fs::read(out.join("tsne.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);

    let out = dir.path().join("a");
    let manifest = Manifest::read(&out.join("tsne.manifest.json")).unwrap();
    assert_eq!(manifest.algorithm, "tsne");
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.n_samples, 300);
    assert_eq!(manifest.hyperparameters["perplexity"], 30.0);
    assert_eq!(manifest.hyperparameters["iters"], 1000);
    assert_eq!(manifest.inputs["embeddings"].sha256, sha256_file(Path::new(&input)).unwrap());
    assert_eq!(manifest.inputs["annotations"].sha256, sha256_file(Path::new(&ann)).unwrap());
    let loss = std::fs::read_to_string(out.join("tsne.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1002);
}

#[test]
fn embed_without_annotations_plots_one_class() {
    let dir = TempDir::new().unwrap();
    let (input, _) = fixture(&dir, "swiss_roll", 60);
    let out = dir.path().join("o");
    let res = manifold(&["embed", "--algo", "classical_mds", "--input", &input, "--out", &s(&out), "--seed", "3"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let svg = std::fs::read_to_string(out.join("classical_mds.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 60);
    assert!(svg.contains(">all</text>"));
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), s(&out.join("classical_mds.csv")));
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn identity_embedding_is_perfectly_trustworthy() {
    let dir = TempDir::new().unwrap();
    let mut rng = Rng::new(5);
    let mut features = String::new();
    let mut embedding = String::from("id,y1,y2\n");
    let mut ann = String::from("id,label\n");
    for i in 0..40 {
        let (a, b) = (rng.normal(), rng.normal());
        features.push_str(&format!("p{i},{a:?},{b:?}\n"));
        embedding.push_str(&format!("p{i},{a:?},{b:?}\n"));
        ann.push_str(&format!("p{i},{}\n", if i % 2 == 0 { "even" } else { "odd" }));
    }
    let (x, y, a) = (dir.path().join("x.csv"), dir.path().join("y.csv"), dir.path().join("a.csv"));
    write(&x, &features);
    write(&y, &embedding);
    write(&a, &ann);
    let res =
        manifold(&["evaluate", "--embedding", &s(&y), "--annotations", &s(&a), "--label", "label", "--input", &s(&x)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let report = QualityReport::read_json(&dir.path().join("y.quality.json")).unwrap();
    assert_eq!(report.trustworthiness, 1.0);
    assert_eq!(report.continuity, 1.0);
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.lines().any(|l| l.starts_with("trustworthiness") && l.ends_with("1.000000")), "{text}");
    assert_eq!(text, std::fs::read_to_string(dir.path().join("y.quality.txt")).unwrap());

    // Label column absent: configuration error.
    let res =
        manifold(&["evaluate", "--embedding", &s(&y), "--annotations", &s(&a), "--label", "period", "--input", &s(&x)]);
    assert_eq!(res.status.code(), Some(1));

    // Embedding id missing from the annotations: input error.
    write(&y, &(embedding.clone() + "stranger,0.0,0.0\n"));
    let res =
        manifold(&["evaluate", "--embedding", &s(&y), "--annotations", &s(&a), "--label", "label", "--input", &s(&x)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).starts_with("IdMismatch"), "{}", stderr(&res));
}

/// Checks a JSON value against the subset of JSON Schema used by the bundled report schema.
fn validate(value: &Value, schema: &Value) -> Result<(), String> {
    let obj = value.as_object().ok_or("report is not an object")?;
    let props = schema["properties"].as_object().unwrap();
    for req in schema["required"].as_array().unwrap() {
        let key = req.as_str().unwrap();
        if !obj.contains_key(key) {
            return Err(format!("missing {key}"));
        }
    }
    for (key, v) in obj {
        let rule = props.get(key).ok_or(format!("unexpected key {key}"))?;
        let types: Vec<&str> = match &rule["type"] {
            Value::String(t) => vec![t.as_str()],
            Value::Array(ts) => ts.iter().map(|t| t.as_str().unwrap()).collect(),
            _ => unreachable!(),
        };
        let ok = types.iter().any(|t| match *t {
            "string" => v.is_string(),
            "integer" => v.is_u64() || v.is_i64(),
            "number" => v.is_number(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{key} has wrong type"));
        }
        if let Some(x) = v.as_f64() {
            if rule.get("minimum").and_then(Value::as_f64).is_some_and(|m| x < m)
                || rule.get("maximum").and_then(Value::as_f64).is_some_and(|m| x > m)
            {
                return Err(format!("{key}={x} out of range"));
            }
        }
    }
    Ok(())
}

#[test]
fn report_json_matches_schema_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let (input, ann) = fixture(&dir, "gaussian_clusters", 90);
    let out = dir.path().join("o");
    let res = manifold(&[
        "embed",
        "--algo",
        "smacof",
        "--input",
        &input,
        "--annotations",
        &ann,
        "--out",
        &s(&out),
        "--seed",
        "2",
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    // No --input: the feature matrix is found through the manifest.
    let emb = out.join("smacof.csv");
    let res = manifold(&["evaluate", "--embedding", &s(&emb), "--annotations", &ann, "--label", "label", "--k", "7"]);
    assert!(res.status.success(), "{}", stderr(&res));
    let path = out.join("smacof.quality.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("quality_report.schema.json")).unwrap()).unwrap();
    validate(&serde_json::from_str(&text).unwrap(), &schema).unwrap();
    let report = QualityReport::read_json(&path).unwrap();
    assert_eq!(report.algorithm, "smacof");
    assert_eq!(report.k, 7);
    assert_eq!(report.to_json(), text.trim_end());
}

#[test]
fn plot_counts_and_join_failure() {
    let dir = TempDir::new().unwrap();
    let (y, a) = (dir.path().join("y.csv"), dir.path().join("a.csv"));
    write(&y, "id,y1,y2\nu,0.0,0.0\nv,1.0,2.0\nw,-3.0,1.0\n");
    write(&a, "id,label,artist\nu,b,x\nv,a,x\nw,b,x\n");
    let svg_path = dir.path().join("plots/p.svg");
    let args = ["plot", "--embedding", &s(&y), "--annotations", &s(&a), "--color-by", "label", "--out", &s(&svg_path)];
    let res = manifold(&args);
    assert!(res.status.success(), "{}", stderr(&res));
    let first = std::fs::read(&svg_path).unwrap();
    let svg = String::from_utf8_lossy(&first);
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(svg.matches("<text").count(), 2);
    assert!(manifold(&args).status.success());
    assert_eq!(first, std::fs::read(&svg_path).unwrap());

    write(&a, "id,label\nu,b\nv,a\n");
    let res = manifold(&args);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn broken_stage_keeps_earlier_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("p.toml");
    let out = dir.path().join("run");
    write(
        &cfg,
        r#"
seed = 1
[input.synthetic]
generator = "swiss_roll"
n = 40
seed = 1

[[stages]]
algorithm = "classical_mds"

[[stages]]
algorithm = "isomap"
k = 500

[[stages]]
algorithm = "smacof"
"#,
    );
    let res = manifold(&["pipeline", "--config", &s(&cfg), "--out", &s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).lines().any(|l| l.starts_with("KTooLarge")), "{}", stderr(&res));
    assert!(out.join("classical_mds.csv").exists());
    assert!(out.join("classical_mds.quality.json").exists());
    assert!(!out.join("smacof.csv").exists());
    assert!(!out.join("summary.txt").exists());
}

#[test]
fn renaissance_merge_yields_five_periods() {
    let dir = TempDir::new().unwrap();
    let ann = data_dir().join("annotations.csv");
    let table = manifold::dataset::load_annotations(&ann).unwrap();
    let mut rng = Rng::new(11);
    let mut features = String::new();
    for id in table.ids() {
        features.push_str(id);
        for _ in 0..6 {
            features.push_str(&format!(",{:?}", rng.normal()));
        }
        features.push('\n');
    }
    write(&dir.path().join("features.csv"), &features);
    let cfg = dir.path().join("art.toml");
    write(
        &cfg,
        &format!(
            r#"
seed = 3
label_column = "period"
out_dir = "{}"

[input]
embeddings = "features.csv"
annotations = "{}"

[merge]
column = "period"
mapping = {{ "Early Renaissance" = "Renaissance", "Northern Renaissance" = "Renaissance" }}

[[stages]]
algorithm = "smacof"
iters = 5
"#,
            s(&dir.path().join("run")),
            s(&ann)
        ),
    );
    let res = manifold(&["pipeline", "--config", &s(&cfg)]);
    assert!(res.status.success(), "{}", stderr(&res));
    let summary = std::fs::read_to_string(dir.path().join("run/summary.txt")).unwrap();
    assert!(summary.contains("labels: 5\n"), "{summary}");
    for (label, count) in
        [("Baroque", 724), ("Impressionism", 618), ("Medieval", 721), ("Renaissance", 833), ("Romanticism", 302)]
    {
        assert!(summary.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == [label, &count.to_string()]));
    }
    assert!(dir.path().join("run/input/annotations.merged.csv").exists());
    assert!(dir.path().join("run/smacof.svg").exists());
}

#[test]
fn fixtures_generate_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let res = manifold(&[
        "fixtures",
        "generate",
        "--spec",
        "trajectory",
        "--n",
        "25",
        "--seed",
        "4",
        "--out",
        &s(dir.path()),
    ]);
    assert!(res.status.success());
    let listed: Vec<String> = String::from_utf8_lossy(&res.stdout).lines().map(str::to_string).collect();
    assert_eq!(listed.len(), 3);
    assert!(listed.iter().all(|p| Path::new(p).exists()));
    let res =
        manifold(&["fixtures", "generate", "--spec", "torus", "--n", "25", "--seed", "4", "--out", &s(dir.path())]);
    assert_eq!(res.status.code(), Some(1));
}
