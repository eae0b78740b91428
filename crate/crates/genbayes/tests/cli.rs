use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn genbayes(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genbayes")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

/// Data rows of a table: everything after the column line, comments dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate_cox(dir: &Path, name: &str, n: usize, beta: &str, censoring: f64, seed: u64) {
    write(
        dir,
        &format!("{name}.toml"),
        &format!(
            "seed = {seed}\nout = \"{name}.csv\"\n[generator]\nkind = \"cox\"\nn = {n}\nbeta = {beta}\nbaseline_hazard = 1.0\ncensoring = {censoring}\nmaf = 0.3\n"
        ),
    );
    let out = genbayes(dir, &["simulate", "--config", &format!("{name}.toml")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

const SCALAR_FIT: &str = "data = \"x.csv\"\nout = \"draws.csv\"\niterations = 3000\nburn_in = 1000\nthin = 4\n\
[loss]\nkind = \"absolute\"\n[prior]\nkind = \"normal\"\nmeans = 0.0\nvariances = 100.0\n";

fn scalar_data(dir: &Path, n: usize) {
    let mut text = String::from("x\n");
    for i in 0..n {
        text.push_str(&format!("{}\n", (i as f64 * 0.37).sin() * 2.0 + 1.0));
    }
    write(dir, "x.csv", &text);
}

#[test]
fn fit_writes_kept_draws_and_summary() {
    let dir = TempDir::new().unwrap();
    scalar_data(dir.path(), 100);
    write(dir.path(), "fit.toml", SCALAR_FIT);
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let draws = read(dir.path(), "draws.csv");
    assert!(draws.starts_with("# genbayes "));
    assert!(draws.lines().nth(1).unwrap() == "iter,theta_1");
    let r = rows(&draws);
    assert_eq!(r.len(), (3000 - 1000) / 4);
    assert_eq!(r[0][0], "1004");
    let summary = rows(&read(dir.path(), "draws.summary.csv"));
    assert_eq!(summary.len(), 1);
    let (lo, hi): (f64, f64) = (summary[0][3].parse().unwrap(), summary[0][4].parse().unwrap());
    assert!(lo < 1.0 && 1.0 < hi + 0.5 && lo < hi);
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    scalar_data(dir.path(), 50);
    write(dir.path(), "fit.toml", SCALAR_FIT);
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml", "--iters", "2000", "--burnin", "500", "--out", "other.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(rows(&read(dir.path(), "other.csv")).len(), (2000 - 500) / 4);
    assert!(read(dir.path(), "other.csv").lines().next().unwrap().contains("iterations=2000"));
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "x.csv", "x\n1.0\n2.0\nabc\n");
    write(dir.path(), "fit.toml", SCALAR_FIT);
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml"]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("row 4") && msg.contains("column `x`"), "{msg}");
    assert!(!dir.path().join("draws.csv").exists());
}

#[test]
fn unknown_config_keys_are_fatal() {
    let dir = TempDir::new().unwrap();
    scalar_data(dir.path(), 20);
    write(dir.path(), "fit.toml", &format!("{SCALAR_FIT}colour = \"blue\"\n"));
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}

#[test]
fn inapplicable_flags_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = genbayes(dir.path(), &["misspec", "--iters", "10", "--out", "m.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn perfect_fit_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "x.csv", "x\n0\n0\n0\n0\n0\n");
    let cfg = "data = \"x.csv\"\nout = \"d.csv\"\niterations = 200\nburn_in = 100\n[loss]\nkind = \"squared\"\n\
[prior]\nkind = \"normal\"\nmeans = 0.0\nvariances = 1.0\n[weight]\nrule = \"unit-information\"\nmc_draws = 100\n";
    write(dir.path(), "fit.toml", cfg);
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("perfect fit"), "{}", stderr(&out));
    assert!(!dir.path().join("d.csv").exists());
}

#[test]
fn hierarchical_fit_reports_w_column() {
    let dir = TempDir::new().unwrap();
    scalar_data(dir.path(), 60);
    let cfg = SCALAR_FIT.replace("kind = \"absolute\"", "kind = \"squared\"") + "[weight]\nrule = \"hierarchical\"\nxi = 1.0\n";
    write(dir.path(), "fit.toml", &cfg);
    let out = genbayes(dir.path(), &["fit", "--config", "fit.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let draws = read(dir.path(), "draws.csv");
    assert_eq!(draws.lines().nth(1).unwrap(), "iter,theta_1,w");
    assert!(rows(&draws).iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn null_scan_has_one_finite_row_per_marker() {
    let dir = TempDir::new().unwrap();
    let beta = format!("[{}]", vec!["0.0"; 200].join(", "));
    simulate_cox(dir.path(), "null", 150, &beta, 0.2, 3);
    let out = genbayes(dir.path(), &["cox-bf", "--data", "null.csv", "--out", "bf.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = read(dir.path(), "bf.csv");
    assert_eq!(table.lines().nth(1).unwrap(), "marker,logbf_laplace,se,flag");
    let r = rows(&table);
    assert_eq!(r.len(), 200);
    assert!(r.iter().all(|row| row[1].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn two_methods_agree_within_three_se() {
    let dir = TempDir::new().unwrap();
    simulate_cox(dir.path(), "d", 300, "[0.5, 0.0]", 0.3, 8);
    let out =
        genbayes(dir.path(), &["cox-bf", "--data", "d.csv", "--out", "bf.csv", "--method", "laplace,importance", "--is-draws", "500"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = read(dir.path(), "bf.csv");
    assert_eq!(table.lines().nth(1).unwrap(), "marker,logbf_laplace,logbf_importance,se,flag");
    for row in rows(&table) {
        let (a, b, se): (f64, f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((a - b).abs() <= 3.0 * se, "{row:?}");
    }
}

#[test]
fn constant_marker_is_flagged_degenerate() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("time,event,x1,x2\n");
    for i in 0..40 {
        text.push_str(&format!("{},{},{},1\n", 1.0 + i as f64 * 0.1, i % 3 != 0, i % 3));
    }
    let text = text.replace("true", "1").replace("false", "0");
    write(dir.path(), "d.csv", &text);
    let out = genbayes(dir.path(), &["cox-bf", "--data", "d.csv", "--out", "bf.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = rows(&read(dir.path(), "bf.csv"));
    assert_eq!(r[1], ["x2", "0", "", "degenerate"]);
    assert_eq!(r[0][3], "ok");
}

#[test]
fn selection_header_echoes_prior_defaults() {
    let dir = TempDir::new().unwrap();
    simulate_cox(dir.path(), "d", 120, "[0.9, 0.0, 0.0, 0.0]", 0.2, 2);
    let out = genbayes(dir.path(), &["cox-select", "--data", "d.csv", "--out", "incl.csv", "--iters", "3000", "--burnin", "1000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let incl = read(dir.path(), "incl.csv");
    let header = incl.lines().next().unwrap();
    assert!(header.contains(" v=0.5 ") && header.contains(" a=1/p "), "{header}");
    assert_eq!(rows(&incl).len(), 4);
    let states = read(dir.path(), "incl.states.csv");
    assert_eq!(states.lines().nth(1).unwrap(), "iter,accepted,model_size,delta_bitmask_hex");
    let r = rows(&states);
    assert_eq!(r.len(), 2000);
    for row in &r {
        let mask = u32::from_str_radix(&row[3], 16).unwrap();
        assert_eq!(mask.count_ones().to_string(), row[2]);
    }
}

#[test]
fn boxplot_rows_per_group_and_width_ordering() {
    let dir = TempDir::new().unwrap();
    let groups: Vec<String> = [("a", 13), ("b", 249), ("c", 30), ("d", 40), ("e", 50), ("f", 60)]
        .iter()
        .map(|(l, n)| format!("{{ label = \"{l}\", n = {n}, distribution = {{ kind = \"normal\", mean = 20.0, var = 25.0 }} }}"))
        .collect();
    write(dir.path(), "g.toml", &format!("seed = 3\nout = \"g.csv\"\n[generator]\nkind = \"grouped\"\ngroups = [{}]\n", groups.join(", ")));
    assert_eq!(code(&genbayes(dir.path(), &["simulate", "--config", "g.toml"])), 0);
    let out = genbayes(dir.path(), &["boxplot", "--data", "g.csv", "--out", "box.csv", "--iters", "20000", "--burnin", "5000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = read(dir.path(), "box.csv");
    assert!(table.lines().next().unwrap().contains("prior=N(10,100),N(20,100),N(30,100)"));
    let r = rows(&table);
    assert_eq!(r.len(), 6);
    let width = |row: &Vec<String>| row[9].parse::<f64>().unwrap() - row[8].parse::<f64>().unwrap();
    assert!(width(&r[0]) > width(&r[1]));
}

#[test]
fn boxplot_failed_group_gives_partial_output() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("group,value\nsmall,1.0\nsmall,2.0\n");
    for i in 0..40 {
        text.push_str(&format!("big,{}\n", 20.0 + (i as f64).cos() * 3.0));
    }
    write(dir.path(), "g.csv", &text);
    let out = genbayes(dir.path(), &["boxplot", "--data", "g.csv", "--out", "box.csv", "--iters", "4000", "--burnin", "1000"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let table = read(dir.path(), "box.csv");
    assert_eq!(rows(&table).len(), 1);
    assert!(table.contains("# failed group=small"));
}

#[test]
fn misspec_symmetric_mixture_centres_at_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = "out = \"m.csv\"\nschedule = [10, 100]\nn_seeds = 2\n[truth]\nkind = \"mixture\"\nweights = [0.5, 0.5]\nmeans = [-2.0, 2.0]\nvars = [1.0, 1.0]\n";
    write(dir.path(), "m.toml", cfg);
    let out = genbayes(dir.path(), &["misspec", "--config", "m.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = read(dir.path(), "m.csv");
    let header = table.lines().next().unwrap();
    let theta0: f64 = header.split(' ').find_map(|t| t.strip_prefix("theta0=")).unwrap().parse().unwrap();
    assert!(theta0.abs() < 1e-6, "{theta0}");
    assert!(header.contains("kl_min="));
    assert_eq!(rows(&table).len(), 2);
}

#[test]
fn misspec_radius_below_grid_step_is_rejected() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "m.toml", "out = \"m.csv\"\neps = 1e-4\nschedule = [10]\n[truth]\nkind = \"exponential\"\nrate = 1.0\n");
    let out = genbayes(dir.path(), &["misspec", "--config", "m.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("grid"), "{}", stderr(&out));
}

#[test]
fn zero_censoring_gives_all_events() {
    let dir = TempDir::new().unwrap();
    simulate_cox(dir.path(), "d", 50, "[0.3]", 0.0, 1);
    assert!(rows(&read(dir.path(), "d.csv")).iter().all(|r| r[1] == "1"));
}

#[test]
fn invalid_generator_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "s.toml",
        "out = \"d.csv\"\n[generator]\nkind = \"cox\"\nn = 10\nbeta = [0.1]\nbaseline_hazard = 1.0\ncensoring = 1.5\nmaf = 0.3\n",
    );
    let out = genbayes(dir.path(), &["simulate", "--config", "s.toml"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("d.csv").exists());
}

#[test]
fn manifest_regenerates_the_same_file() {
    let dir = TempDir::new().unwrap();
    simulate_cox(dir.path(), "d", 80, "[0.5, -0.2]", 0.25, 17);
    let manifest = read(dir.path(), "d.manifest.toml");
    assert!(manifest.contains("seed = 17"));
    let sub = dir.path().join("again");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("d.manifest.toml"), &manifest).unwrap();
    let out = genbayes(&sub, &["simulate", "--config", "d.manifest.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(dir.path().join("d.csv")).unwrap(), fs::read(sub.join("d.csv")).unwrap());
    assert_eq!(manifest, read(&sub, "d.manifest.toml"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    scalar_data(dir.path(), 40);
    write(dir.path(), "fit.toml", SCALAR_FIT);
    let run = |name: &str| {
        let out = genbayes(dir.path(), &["fit", "--config", "fit.toml", "--seed", "9", "--out", name]);
        assert_eq!(code(&out), 0);
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
    assert_ne!(fs::read(dir.path().join("a.csv")).unwrap(), {
        genbayes(dir.path(), &["fit", "--config", "fit.toml", "--seed", "10", "--out", "c.csv"]);
        fs::read(dir.path().join("c.csv")).unwrap()
    });
}
