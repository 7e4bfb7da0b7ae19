use std::path::Path;
use std::process::{Command, Output};

fn semilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semilab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = format!(
        r#"
[scenario]
id = "small"
d = 3
epsilons = [0.4, 0.2]
gamma = 1.0
q1 = [2.0, 0.0, 0.0]
N = 2.1
S0 = [{{ amplitude_re = 1.0, center = [0.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]
S1 = [{{ amplitude_re = 1.0, center = [2.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]

[[observables]]
id = "a"
phi = [{{ amplitude_re = 1.0, center = [0.5, 0.5, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]
psi = [{{ amplitude_re = 1.0, center = [-0.7, -0.7, 0.0], inv_variance = 2.0, modulation = [0.0, 0.0, 0.0] }}]

[[test_fields]]
id = "v"
atoms = [{{ amplitude_re = 1.0, center = [1.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]

[sweep]
functionals = ["mu", "a_eps_pairing", "lemma_l"]
observables = ["a"]
test_fields = ["v"]
criteria = [13]

[output]
dir = "{}"
"#,
        dir.join("out").display()
    );
    let p = dir.join("small.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("semilab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn solve_prints_one_row_per_point() {
    let o = semilab(&["solve", "--eps", "0.2", "--at", "0,0,0", "--at", "1,0,0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "point,value_re,value_im");
    assert_eq!(lines.len(), 3);
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(semilab(&["--config", "/nonexistent/semilab.toml", "mu"]).status.code(), Some(2));
    assert_eq!(semilab(&["solve", "--eps", "0.2", "--at", "1,2"]).status.code(), Some(2));
    assert_eq!(semilab(&["solve", "--eps", "0.2", "--kind", "bogus"]).status.code(), Some(2));
    assert_eq!(semilab(&["export", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(semilab(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(semilab(&["mu", "--id", "missing"]).status.code(), Some(2));
}

#[test]
fn pair_emits_csv_rows() {
    let dir = tempdir("pair");
    let out = dir.join("out");
    let o = semilab(&["pair", "--eps", "0.2", "--eps", "0.1", "--id", "v_axis", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("scenario_id,epsilon,functional,observable_id,value_re,value_im,error,n_samples,seed,wall_ms\n"));
    assert_eq!(text.lines().filter(|l| l.contains("a_eps_pairing,v_axis")).count(), 2);
}

#[test]
fn verify_writes_report_and_passes() {
    let dir = tempdir("verify");
    let o = semilab(&["verify", "13", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("[PASS] criterion 13"));
    let report = std::fs::read_to_string(dir.join("verify-13.json")).unwrap();
    assert!(report.contains("\"criteria\""));
}

#[test]
fn sweep_is_reproducible() {
    let dir = tempdir("sweep");
    let cfg = small_config(&dir);
    let o = semilab(&["--config", cfg.to_str().unwrap(), "sweep"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(dir.join("out/results.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 1 + 1 + 2 + 2);
    let o = semilab(&["--config", cfg.to_str().unwrap(), "--jobs", "3", "sweep"]);
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(dir.join("out/results.csv")).unwrap());
    let path = dir.join("report.json");
    let o = semilab(&["--config", cfg.to_str().unwrap(), "export", "--format", "json-report", "--path", path.to_str().unwrap()]);
    assert!(o.status.success());
    let json = std::fs::read_to_string(path).unwrap();
    assert_eq!(json.matches("\"status\"").count(), 13);
}
