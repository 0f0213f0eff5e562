//! End-to-end tests of the `lta` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lta")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("vocab.csv", "kind,label\nverb,take\nverb,put\nverb,wash\nnoun,cup\nnoun,plate\n");
        f.write(
            "ann.jsonl",
            concat!(
                r#"{"clip_id":"c1","observed":[["take","cup"],["wash","cup"]],"future":[["put","cup"],["take","plate"]],"intention_gt":"prepare cup"}"#,
                "\n",
                r#"{"clip_id":"c2","observed":[["take","plate"],["wash","plate"]],"future":[["put","plate"],["take","cup"]],"intention_gt":"prepare plate"}"#,
                "\n",
            ),
        );
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) {
        std::fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn cooc_build_writes_verb_by_noun_csv() {
    let f = Fixture::new();
    let out = lta(&["cooc-build", "--vocab", &f.p("vocab.csv"), "--annotations", &f.p("ann.jsonl"), "--out", &f.p("c.csv")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = f.read("c.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "verb,cup,plate");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "take,1,1");
    assert_eq!(lines[3], "wash,1,1");
}

#[test]
fn cooc_build_rejects_unknown_labels_with_line_number() {
    let f = Fixture::new();
    f.write(
        "bad.jsonl",
        concat!(
            r#"{"clip_id":"a","observed":[["take","cup"]],"future":[]}"#,
            "\n",
            r#"{"clip_id":"b","observed":[["fly","cup"]],"future":[]}"#,
            "\n"
        ),
    );
    let out = lta(&["cooc-build", "--vocab", &f.p("vocab.csv"), "--annotations", &f.p("bad.jsonl"), "--out", &f.p("c.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn cooc_build_on_empty_annotations_is_all_zero() {
    let f = Fixture::new();
    f.write("empty.jsonl", "");
    let out = lta(&["cooc-build", "--vocab", &f.p("vocab.csv"), "--annotations", &f.p("empty.jsonl"), "--out", &f.p("c.csv")]);
    assert_eq!(code(&out), 0);
    assert_eq!(f.read("c.csv"), "verb,cup,plate\ntake,0,0\nput,0,0\nwash,0,0\n");
}

fn build_cooc(f: &Fixture) {
    let out = lta(&["cooc-build", "--vocab", &f.p("vocab.csv"), "--annotations", &f.p("ann.jsonl"), "--out", &f.p("c.csv"), "--include-future"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn correct_decodes_marginals() {
    let f = Fixture::new();
    f.write("cooc.csv", "verb,cup,plate\ntake,3,0\nput,0,2\nwash,1,0\n");
    f.write(
        "m.jsonl",
        concat!(
            r#"{"id":"one-hot","p_verb":[1,0,0],"p_noun":[1,0]}"#,
            "\n",
            r#"{"id":"adversarial","p_verb":[0.1,0.6,0.3],"p_noun":[0.55,0.45]}"#,
            "\n"
        ),
    );
    let out = lta(&["correct", "--vocab", &f.p("vocab.csv"), "--marginals", &f.p("m.jsonl"), "--cooc", &f.p("cooc.csv"), "--out", &f.p("o.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = jsonl(&f.path("o.jsonl"));
    assert_eq!((rows[0]["verb"].as_str(), rows[0]["noun"].as_str()), (Some("take"), Some("cup")));
    // Raw argmax is put/cup (never seen); brute force over the corrected
    // grid: take/cup .1*.55*(1+.75)/2 ≈ .048, put/plate .6*.45*(1+1)/2 =
    // .27, wash/cup .3*.55*(1+.25)/2 ≈ .103 → put/plate.
    assert_eq!((rows[1]["raw_verb"].as_str(), rows[1]["raw_noun"].as_str()), (Some("put"), Some("cup")));
    assert_eq!((rows[1]["verb"].as_str(), rows[1]["noun"].as_str()), (Some("put"), Some("plate")));
}

#[test]
fn correct_handles_empty_input_and_bad_dimensions() {
    let f = Fixture::new();
    build_cooc(&f);
    f.write("empty.jsonl", "");
    let out = lta(&["correct", "--vocab", &f.p("vocab.csv"), "--marginals", &f.p("empty.jsonl"), "--cooc", &f.p("c.csv"), "--out", &f.p("o.jsonl")]);
    assert_eq!(code(&out), 0);
    assert_eq!(f.read("o.jsonl"), "");

    f.write("bad.jsonl", r#"{"id":"x","p_verb":[0.5,0.5],"p_noun":[1,0]}"#);
    let out = lta(&["correct", "--vocab", &f.p("vocab.csv"), "--marginals", &f.p("bad.jsonl"), "--cooc", &f.p("c.csv"), "--out", &f.p("o.jsonl")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reward_scores_generations() {
    let f = Fixture::new();
    let exact = "<think>t</think>\\n<intention>prepare cup</intention>\\n<answer>put cup, take plate</answer>";
    let broken = "<think>t</think><answer>put cup, take plate</answer>";
    f.write(
        "gen.jsonl",
        &format!("{{\"id\":\"c1\",\"text\":\"{exact}\"}}\n{{\"id\":\"c1\",\"text\":\"{broken}\"}}\n"),
    );
    let out = lta(&["reward", "--vocab", &f.p("vocab.csv"), "--generations", &f.p("gen.jsonl"), "--truth", &f.p("ann.jsonl"), "--out", &f.p("r.jsonl")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = jsonl(&f.path("r.jsonl"));
    assert!((rows[0]["r_total"].as_f64().unwrap() - 0.9).abs() < 1e-9);
    assert_eq!(rows[1]["s_fmt"].as_f64(), Some(0.0));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["count"], 2);

    f.write("orphan.jsonl", "{\"id\":\"nope\",\"text\":\"x\"}\n");
    let out = lta(&["reward", "--vocab", &f.p("vocab.csv"), "--generations", &f.p("orphan.jsonl"), "--truth", &f.p("ann.jsonl"), "--out", &f.p("r.jsonl")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_writes_checkpoint_and_log() {
    let f = Fixture::new();
    let args = |out: &str| {
        vec![
            "train".to_string(), "--vocab".into(), f.p("vocab.csv"), "--annotations".into(), f.p("ann.jsonl"),
            "--out".into(), f.p(out), "--steps".into(), "1".into(), "--seed".into(), "5".into(),
        ]
    };
    for run in ["a", "b"] {
        let a: Vec<String> = args(run);
        let out = lta(&a.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let mut files: Vec<String> = std::fs::read_dir(f.path("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["policy.json", "training_log.csv"]);
    let log = f.read("a/training_log.csv");
    assert_eq!(log.lines().count(), 2, "{log}");
    assert_eq!(log, f.read("b/training_log.csv"));
    let ckpt = lta::policy::ToyPolicy::from_json(&f.read("a/policy.json")).unwrap();
    assert_eq!(ckpt.alphabet_size(), 7);
}

#[test]
fn train_rejects_bad_config() {
    let f = Fixture::new();
    f.write("g.json", r#"{"group_size": 1}"#);
    let out = lta(&["train", "--vocab", &f.p("vocab.csv"), "--annotations", &f.p("ann.jsonl"), "--config", &f.p("g.json"), "--out", &f.p("t")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_ego4d_mode() {
    let f = Fixture::new();
    let truth = r#"[["put","cup"],["take","plate"]]"#;
    let other = r#"[["wash","cup"],["wash","cup"]]"#;
    f.write(
        "pred.jsonl",
        &format!("{{\"clip_id\":\"c1\",\"candidates\":[{other},{other},{truth},{other},{other}]}}\n"),
    );
    let out = lta(&["eval", "--mode", "ego4d", "--vocab", &f.p("vocab.csv"), "--predictions", &f.p("pred.jsonl"), "--truth", &f.p("ann.jsonl"), "--out", &f.p("rep.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: Value = serde_json::from_str(&f.read("rep.json")).unwrap();
    for k in ["verb_ed", "noun_ed", "action_ed"] {
        assert_eq!(rep["mean"][k].as_f64(), Some(0.0), "{k}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("action"));

    f.write("four.jsonl", &format!("{{\"clip_id\":\"c1\",\"candidates\":[{truth},{truth},{truth},{truth}]}}\n"));
    let out = lta(&["eval", "--mode", "ego4d", "--vocab", &f.p("vocab.csv"), "--predictions", &f.p("four.jsonl"), "--truth", &f.p("ann.jsonl"), "--out", &f.p("rep.json")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_map_mode_perfect_scores() {
    let f = Fixture::new();
    f.write(
        "pred.jsonl",
        concat!(
            r#"{"clip_id":"a","scores":{"25":[0.9,0.1,0.8],"50":[0.9,0.2,0.1]}}"#, "\n",
            r#"{"clip_id":"b","scores":{"25":[0.1,0.9,0.2],"50":[0.2,0.9,0.8]}}"#, "\n",
        ),
    );
    f.write(
        "truth.jsonl",
        concat!(
            r#"{"clip_id":"a","labels":{"25":[1,0,1],"50":[1,0,0]}}"#, "\n",
            r#"{"clip_id":"b","labels":{"25":[0,1,0],"50":[0,1,1]}}"#, "\n",
        ),
    );
    f.write("split.json", r#"{"freq":[0,1],"rare":[2]}"#);
    let out = lta(&["eval", "--mode", "map", "--predictions", &f.p("pred.jsonl"), "--truth", &f.p("truth.jsonl"), "--out", &f.p("rep.json"), "--horizons", "25,50", "--freq-split", &f.p("split.json")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep: Value = serde_json::from_str(&f.read("rep.json")).unwrap();
    for h in rep["horizons"].as_array().unwrap() {
        for k in ["all", "freq", "rare"] {
            assert_eq!(h[k].as_f64(), Some(1.0));
        }
    }
    assert_eq!(rep["average"]["all"].as_f64(), Some(1.0));
}

#[test]
fn synth_is_reproducible_and_reparses() {
    let f = Fixture::new();
    for run in ["a", "b"] {
        let out = lta(&["synth", "--out", &f.p(run), "--seed", "3"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["vocab.csv", "annotations.jsonl", "transitions.json"] {
        assert_eq!(std::fs::read(f.path("a").join(name)).unwrap(), std::fs::read(f.path("b").join(name)).unwrap(), "{name}");
    }
    let vocab = lta::vocab::load_vocabulary(f.path("a/vocab.csv")).unwrap();
    let opts = lta::vocab::AnnotationOptions::strict(8, 20);
    let records = lta::vocab::parse_annotations_with(f.path("a/annotations.jsonl"), &vocab, &opts).unwrap();
    assert!(records.iter().all(|r| r.observed.len() == 8 && r.future.len() == 20));
    let text = f.read("a/transitions.json");
    lta::synth::TransitionTable::from_json(&text, &vocab).unwrap();
}

#[test]
fn missing_files_and_bad_flags_are_input_errors() {
    let f = Fixture::new();
    let out = lta(&["cooc-build", "--vocab", &f.p("nope.csv"), "--annotations", &f.p("ann.jsonl"), "--out", &f.p("c.csv")]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&lta(&["eval", "--mode", "nonsense"])), 2);
    assert_eq!(code(&lta(&["eval", "--mode", "map", "--predictions", "x", "--truth", "y", "--out", "z", "--horizons", "0"])), 2);
}
