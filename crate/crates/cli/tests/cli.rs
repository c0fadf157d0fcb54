use std::path::Path;
use std::process::{Command, Output};

use pu_kit::Model;
use pu_kit_cli::read_records;

const GAUSSIAN: &str = r#"
methods = ["pvu", "cvir"]
seeds = [0, 1, 2]
eval_size = 200

[task]
alpha = 0.5
n_p = 200
n_u = 200

[task.generator]
kind = "gaussian"
mean_pos = [1.0, 0.0]
mean_neg = [-1.0, 0.0]
sigma = 1.0

[model]
kind = "logistic"

[train]
epochs = 50
stop_on_convergence = false

[tedn]
warm_start_epochs = 3
max_epochs = 5
"#;

fn pu_kit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pu-kit"))
        .args(args)
        .current_dir(dir)
        .env_remove("PU_KIT_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workdir(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

#[test]
fn bench_emits_one_row_per_method_seed_epoch() {
    let dir = workdir(GAUSSIAN);
    let out = stdout(&pu_kit(&["bench", "--config", "exp.toml", "--summary", "summary.csv"], dir.path()));
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("version,method,seed,epoch,alpha_true,alpha_hat,abs_err,train_error,pvn_accuracy")
    );
    assert_eq!(lines.count(), 2 * 3 * 50);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = workdir(GAUSSIAN);
    let a = pu_kit(&["bench", "--config", "exp.toml", "--output", "a.csv"], dir.path());
    let b = pu_kit(&["bench", "--config", "exp.toml", "--output", "b.csv"], dir.path());
    assert!(a.status.success() && b.status.success());
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn seed_env_replaces_configured_seeds() {
    let dir = workdir(GAUSSIAN);
    let out = Command::new(env!("CARGO_BIN_EXE_pu-kit"))
        .args(["bench", "--config", "exp.toml"])
        .current_dir(dir.path())
        .env("PU_KIT_SEED", "17")
        .output()
        .unwrap();
    let rows = read_records(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 2 * 50);
    assert!(rows.iter().all(|r| r.seed == 17));
}

#[test]
fn estimate_reads_score_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "0.9\n0.8\n0.7\n0.6\n").unwrap();
    std::fs::write(dir.path().join("u.txt"), "0.9\n0.1\n0.2\n0.75\n").unwrap();
    for method in ["bbe", "scott", "naive"] {
        let out = stdout(&pu_kit(&["estimate", "--pos", "p.txt", "--unl", "u.txt", "--method", method], dir.path()));
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("alpha_hat,alpha_clamped,c_hat,q_p_at_c,q_u_at_c"));
        let fields: Vec<f64> = lines.next().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 5);
        assert!((0.0..=1.0).contains(&fields[1]));
    }
    // ratio 0.5 at c = 0.8 and c = 0.6; ties go to the smaller threshold
    let naive = stdout(&pu_kit(&["estimate", "--pos", "p.txt", "--unl", "u.txt", "--method", "naive"], dir.path()));
    assert!(naive.lines().nth(1).unwrap().starts_with("0.5,0.5,0.6,"), "{naive}");
}

#[test]
fn anchor_bbe_beats_naive() {
    let cfg = r#"
methods = ["bbe", "naive"]
seeds = [0, 1, 2, 3, 4]
eval_size = 10
scorer = "first_feature"

[task]
alpha = 0.5
n_p = 2000
n_u = 2000

[task.generator]
kind = "anchor"
gamma_margin = 0.3
"#;
    let dir = workdir(cfg);
    let rows = read_records(&stdout(&pu_kit(&["bench", "--config", "exp.toml"], dir.path()))).unwrap();
    let mean = |m: &str| {
        let e: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.abs_err.unwrap()).collect();
        e.iter().sum::<f64>() / e.len() as f64
    };
    assert!(mean("bbe") < mean("naive"), "bbe {} naive {}", mean("bbe"), mean("naive"));
}

#[test]
fn train_saves_a_loadable_model() {
    let dir = workdir(GAUSSIAN);
    let out = pu_kit(
        &["train", "--config", "exp.toml", "--method", "tedn", "--seed", "3", "--output", "t.csv", "--model-out", "m.json"],
        dir.path(),
    );
    stdout(&out);
    let rows = read_records(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3 + 5);
    assert!(rows.iter().all(|r| r.method == "tedn" && r.seed == 3 && r.alpha_hat.is_some()));
    let model = Model::from_json(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert!(matches!(model, Model::Logistic(_)));
}

#[test]
fn sweep_and_plotdata() {
    let dir = workdir(&GAUSSIAN.replace(r#"["pvu", "cvir"]"#, r#"["bbe"]"#));
    let out = stdout(&pu_kit(&["sweep", "--config", "exp.toml", "--alphas", "0.2,0.8"], dir.path()));
    let rows = read_records(&out).unwrap();
    assert_eq!(rows.len(), 2 * 3);

    let ucb = stdout(&pu_kit(&["plotdata", "--kind", "ucb_curve", "--config", "exp.toml"], dir.path()));
    assert!(ucb.starts_with("c,q_u_hat,q_p_hat,ratio,ucb\n"));
    let purity = stdout(&pu_kit(&["plotdata", "--kind", "purity_curve", "--config", "exp.toml"], dir.path()));
    assert!(purity.starts_with("c,bin_size,purity\n"));
    let rate = stdout(&pu_kit(&["plotdata", "--kind", "rate_loglog", "--config", "exp.toml", "--sizes", "50,500"], dir.path()));
    assert_eq!(rate.lines().count(), 3);

    std::fs::write(dir.path().join("exp.toml"), GAUSSIAN).unwrap();
    stdout(&pu_kit(&["bench", "--config", "exp.toml", "--output", "r.csv"], dir.path()));
    let epochwise = stdout(&pu_kit(&["plotdata", "--kind", "epochwise", "--records", "r.csv"], dir.path()));
    assert_eq!(epochwise.lines().count(), 1 + 300);
}

#[test]
fn exit_codes() {
    let dir = workdir("methods = [\"bbe\"]\nseeds = [0]\nbogus_key = 1\n");
    let bad = pu_kit(&["bench", "--config", "exp.toml"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus_key"));

    let missing = pu_kit(&["bench", "--config", "nope.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(3));

    std::fs::write(dir.path().join("p.txt"), "0.5\nabc\n").unwrap();
    std::fs::write(dir.path().join("u.txt"), "0.5\n").unwrap();
    let garbage = pu_kit(&["estimate", "--pos", "p.txt", "--unl", "u.txt"], dir.path());
    assert_eq!(garbage.status.code(), Some(3));

    let kind = pu_kit(&["plotdata", "--kind", "pie_chart"], dir.path());
    assert_eq!(kind.status.code(), Some(2));
}

#[test]
fn bench_skips_when_mnist_is_absent() {
    let dir = workdir("methods = [\"tedn\"]\nseeds = [0]\n\n[mnist]\ndir = \"no-such-dir\"\n");
    let out = pu_kit(&["bench", "--config", "exp.toml"], dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
}
