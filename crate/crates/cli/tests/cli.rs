use pcw_core::heuristic::Designer;
use pcw_core::numerics::Tolerance;
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pcw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcw"))
        .args(args)
        .output()
        .expect("run pcw")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn fp_reference_and_validation() {
    let v = json(&pcw(&[
        "fp", "--h", "160", "--n", "3.46", "--lambda", "925",
    ]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "fp");
    let f = v["result"]["f_fp"].as_f64().unwrap();
    assert!((0.56..=0.72).contains(&f));

    let missing = pcw(&["fp", "--n", "3.46", "--lambda", "925"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("--h"));

    let zero = pcw(&["fp", "--h", "0", "--n", "3.46", "--lambda", "925"]);
    assert_eq!(zero.status.code(), Some(2));
    assert!(stderr(&zero).contains("h must be positive"));
}

#[test]
fn design_reference_and_infeasible() {
    let v = json(&pcw(&[
        "design", "--a", "238", "--lambda", "925", "--h", "160",
    ]));
    let r = v["result"]["spec"]["r_nm"].as_f64().unwrap();
    assert!((60.0..=100.0).contains(&r), "r = {r}");
    assert!(!v["result"]["trace"]["iterates"]
        .as_array()
        .unwrap()
        .is_empty());
    assert_eq!(
        v["config"]["model"]["conventions"]["emission_angle"],
        "mean_projection"
    );

    let bad = pcw(&["design", "--a", "50", "--lambda", "925", "--h", "160"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("infeasible"));

    let stuck = pcw(&[
        "design",
        "--a",
        "238",
        "--lambda",
        "925",
        "--h",
        "160",
        "--max-iter",
        "2",
    ]);
    assert_eq!(stuck.status.code(), Some(4));

    let invalid = pcw(&["design", "--a", "-1", "--lambda", "925", "--h", "160"]);
    assert_eq!(invalid.status.code(), Some(2));
}

#[test]
fn commands_are_pure() {
    let args = [
        "design",
        "--a",
        "230",
        "--lambda",
        "920",
        "--h",
        "160",
        "--theta-gr",
        "60",
    ];
    assert_eq!(pcw(&args).stdout, pcw(&args).stdout);
}

fn read_curve(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "a_nm,r_nm,c1_nm,c2,theta_wg_rad,F_PCW,beta,feasible"
    );
    lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn curve_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    json(&pcw(&[
        "curve",
        "--lambda",
        "925",
        "--h",
        "160",
        "--a-min",
        "238",
        "--a-max",
        "238",
        "--a-step",
        "5",
        "--out",
        p(&out),
    ]));
    assert_eq!(read_curve(&out).len(), 1);

    let out = dir.path().join("mixed.csv");
    json(&pcw(&[
        "curve",
        "--lambda",
        "925",
        "--h",
        "160",
        "--a-min",
        "100",
        "--a-max",
        "240",
        "--a-step",
        "20",
        "--out",
        p(&out),
    ]));
    let rows = read_curve(&out);
    let infeasible: Vec<_> = rows.iter().filter(|r| r[7] == "0").collect();
    assert!(!infeasible.is_empty());
    for r in &infeasible {
        assert!(r[1..7].iter().all(|c| c.is_empty()));
    }
    for r in rows.iter().filter(|r| r[7] == "1") {
        let c2: f64 = r[3].parse().unwrap();
        assert!(c2 > 0.0 && c2.is_finite());
    }
}

#[test]
fn curve_locus_matches_dense_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("locus.csv");
    json(&pcw(&[
        "curve",
        "--lambda",
        "925",
        "--h",
        "160",
        "--a-min",
        "210",
        "--a-max",
        "260",
        "--a-step",
        "5",
        "--out",
        p(&out),
    ]));
    let rows = read_curve(&out);
    assert_eq!(rows.len(), 11);
    let locus: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[7] == "1")
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert!(locus.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
    // Independent cold-started designs on a 1 nm grid.
    let designer = Designer::reference();
    let tol = Tolerance::default();
    for a in (210..=260).map(f64::from) {
        let cold = designer
            .design_radius(a, 925.0, None, &tol)
            .unwrap()
            .spec
            .r_nm;
        if let Some(&(_, r)) = locus.iter().find(|(x, _)| *x == a) {
            assert!((r - cold).abs() < 1e-8, "a = {a}: {r} vs {cold}");
        }
    }
}

#[test]
fn compound_peaks() {
    let base = ["compound", "--h", "160"];
    let run = |a1: &str, a2: &str, l1: &str, l2: &str| {
        let mut args = base.to_vec();
        args.extend(["--a1", a1, "--a2", a2, "--lambda1", l1, "--lambda2", l2]);
        json(&pcw(&args))["result"].clone()
    };
    assert_eq!(run("238", "238", "920", "930")["predicted_peak"], 925.0);
    assert_eq!(run("238", "238", "910", "910")["predicted_peak"], 910.0);
    let ab = run("233", "238", "920", "930");
    let ba = run("238", "233", "930", "920");
    assert_eq!(ab["predicted_peak"], ba["predicted_peak"]);
    assert_eq!(ab["half_1"], ba["half_2"]);

    let bad = pcw(&[
        "compound",
        "--h",
        "160",
        "--a1",
        "238",
        "--a2",
        "50",
        "--lambda1",
        "925",
        "--lambda2",
        "925",
    ]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("half 2"));
}

const CONFIG: &str = r#"{
  "compound": {"a1_nm": 233, "a2_nm": 238, "lambda1_nm": 925, "lambda2_nm": 925, "h_nm": 160},
  "perturbation": {"n_runs": 16}
}"#;

#[test]
fn perturb_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    json(&pcw(&[
        "perturb",
        "--config",
        p(&cfg),
        "--seed",
        "9",
        "--out",
        p(&a),
    ]));
    json(&pcw(&[
        "perturb",
        "--config",
        p(&cfg),
        "--seed",
        "9",
        "--out",
        p(&b),
    ]));
    let csv_a = fs::read(dir.path().join("a.csv")).unwrap();
    let csv_b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 17);

    let report: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["result"]["report"]["seed"], 9);
    assert_eq!(
        report["config"]["rng"]["algorithm"],
        "ChaCha8 (rand_chacha 0.3)"
    );

    let still = dir.path().join("still.json");
    let v = json(&pcw(&[
        "perturb",
        "--config",
        p(&cfg),
        "--seed",
        "9",
        "--out",
        p(&still),
        "--delta-r-max",
        "0",
    ]));
    assert_eq!(v["result"]["success_fraction"], 1.0);
}

#[test]
fn perturb_defaults_follow_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"compound": {"a1_nm": 238, "a2_nm": 238, "lambda1_nm": 925, "lambda2_nm": 925, "h_nm": 160}}"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let v = json(&pcw(&["perturb", "--config", p(&cfg), "--out", p(&out)]));
    assert_eq!(v["result"]["n_runs"], 100);
    assert_eq!(v["config"]["resolved"]["perturbation"]["delta_r_max"], 10.0);

    fs::write(&cfg, r#"{"compound": {"a1_nm": 238}, "bogus": true}"#).unwrap();
    let bad = pcw(&["perturb", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

fn holes(text: &str) -> Vec<[f64; 3]> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn export_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.json");
    let out = pcw(&["design", "--a", "238", "--lambda", "925", "--h", "160"]);
    fs::write(&design, json(&out).to_string()).unwrap();
    let geo = dir.path().join("geo.txt");
    json(&pcw(&[
        "export-geometry",
        "--design",
        p(&design),
        "--rows",
        "3",
        "--cols",
        "4",
        "--out",
        p(&geo),
    ]));
    let text = fs::read_to_string(&geo).unwrap();
    assert!(text.starts_with("# h_nm=160\n# lattice=triangular theta_gr_deg=60\n"));
    assert!(!text.contains('\r'));
    let hs = holes(&text);
    assert_eq!(hs.len(), 8);
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        for field in line.split(' ') {
            let digits = field.trim_start_matches('-').replace('.', "");
            assert!(digits.trim_start_matches('0').len() <= 6, "{field}");
        }
    }

    let compound = dir.path().join("compound.json");
    let out = pcw(&[
        "compound",
        "--h",
        "160",
        "--a1",
        "233",
        "--a2",
        "238",
        "--lambda1",
        "925",
        "--lambda2",
        "925",
    ]);
    fs::write(&compound, json(&out).to_string()).unwrap();
    json(&pcw(&[
        "export-geometry",
        "--design",
        p(&compound),
        "--rows",
        "7",
        "--cols",
        "10",
        "--out",
        p(&geo),
    ]));
    let hs = holes(&fs::read_to_string(&geo).unwrap());
    assert_eq!(hs.len(), 60);
    for (i, a) in hs.iter().enumerate() {
        for b in &hs[i + 1..] {
            assert!((a[0] - b[0]).hypot(a[1] - b[1]) >= a[2] + b[2]);
        }
    }
    let mut radii: Vec<f64> = hs.iter().map(|h| h[2]).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    assert_eq!(radii.len(), 2);

    let bad = pcw(&[
        "export-geometry",
        "--design",
        p(&compound),
        "--rows",
        "1",
        "--cols",
        "4",
        "--out",
        p(&geo),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
