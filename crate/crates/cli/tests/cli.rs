use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn levydens(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levydens")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const GAMMA: &[&str] = &["density", "--symbol", "chain:n=1,eps=1.0", "--t", "2", "--x", "0.1:10:50:log"];

#[test]
fn gamma_density_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = levydens(&[GAMMA, &["--out", "d.csv"]].concat(), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,t,p,err_est,method,k_used"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 50);
    // the grid has no exact x = 1; take the closest row
    let row = rows
        .iter()
        .min_by(|a, b| {
            let da = (a[0].parse::<f64>().unwrap() - 1.0).abs();
            let db = (b[0].parse::<f64>().unwrap() - 1.0).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    let x: f64 = row[0].parse().unwrap();
    let p: f64 = row[2].parse().unwrap();
    assert!((p - x * (-x).exp()).abs() < 1e-6, "{row:?}");
    assert_eq!(row[1], "2.0");
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["density", "--symbol", "sym:n=2,eps=1.0", "--t", "1", "--x", "0.01:20:12:log", "--format", "json"];
    assert_eq!(code(&levydens(&[&args[..], &["--out", "a.json"]].concat(), dir.path())), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_levydens"))
        .args([&args[..], &["--out", "b.json"]].concat())
        .env("LEVYDENS_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    assert!(String::from_utf8(a).unwrap().contains("\"schema_version\": 1"));
}

#[test]
fn bad_time_is_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = levydens(
        &["density", "--symbol", "chain:n=1,eps=1.0", "--t", "-1", "--x", "0.1:1:3:log", "--out", "d.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("d.csv").exists());
    for bad in ["0:1:3:log", "1:2:0:linear", "1:2:3", "1:2:3:cubic"] {
        let o = levydens(&["density", "--symbol", "chain:n=1,eps=1.0", "--t", "1", "--x", bad], dir.path());
        assert_eq!(code(&o), 2, "{bad}");
    }
    let o = levydens(&["density", "--symbol", "wave:n=1,eps=1.0", "--t", "1", "--x", "1:2:2:log"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn assumptions_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = levydens(
        &["assumptions", "--symbol", "chain:n=2,eps=1.0", "--xi", "1:1e6:400:log", "--out", "a.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["schema_version"], 1);
    // eta_1 / s_n vanishes near zero
    let o = levydens(&["assumptions", "--symbol", "chain:n=1,eps=1.0", "--xi", "1e-6:1e6:400:log"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_keys_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "symbol = \"chain:n=1,eps=1.0\"\nt = 5.0\nx = \"0.5:2:4:linear\"\nformat = \"csv\"\n",
    )
    .unwrap();
    let o = levydens(&["density", "--config", "run.toml", "--t", "1", "--out", "c.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[1], "1.0");
    let p: f64 = first[2].parse().unwrap();
    assert!((p - (-0.5f64).exp()).abs() < 1e-8);
    fs::write(dir.path().join("bad.toml"), "colour = 1\n").unwrap();
    assert_eq!(code(&levydens(&["density", "--config", "bad.toml"], dir.path())), 2);
}

#[test]
fn weighted_integral_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["lemma22", "--symbol", "chain:n=2,eps=1.0", "--t", "1", "--x", "1:100:3:log"];
    assert_eq!(code(&levydens(&[&base[..], &["--case", "3", "--alpha", "-2"]].concat(), dir.path())), 0);
    assert_eq!(code(&levydens(&[&base[..], &["--case", "3", "--alpha", "-0.5"]].concat(), dir.path())), 3);
    assert_eq!(code(&levydens(&[&base[..], &["--case", "1", "--alpha", "-1.5"]].concat(), dir.path())), 2);
    assert_eq!(code(&levydens(&[&base[..], &["--case", "4", "--alpha", "0"]].concat(), dir.path())), 2);
}

#[test]
fn negative_half_line_of_a_subordinator() {
    let dir = tempfile::tempdir().unwrap();
    let o = levydens(
        &["density", "--symbol", "chain:n=2,eps=0.5", "--t", "1", "--x", "-10:-0.1:5:linear", "--method", "pairing"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    for line in String::from_utf8(o.stdout).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (p, e): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!(p.abs() <= e.max(1e-6), "{line}");
    }
}

#[test]
fn report_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["selfcheck", "--symbol", "sym:n=2,eps=1.0", "--xi", "1e-3:1e6:40:log"],
        &["convolve", "--symbol", "chain:n=1,eps=1.0", "--t", "1", "--x", "0.5:4:4:linear"],
        &["bounds", "--symbol", "sym:n=2,eps=1.0", "--t", "1", "--x", "1e-3:1e3:30:log"],
    ];
    for args in runs {
        let o = levydens(args, dir.path());
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["schema_version"], 1);
    }
    let o = levydens(
        &["bounds", "--symbol", "sym:n=2,eps=1.0", "--t", "1", "--x", "1e-3:1e3:30:log", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}
