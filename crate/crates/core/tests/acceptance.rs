//! Acceptance criteria 1-10. Runs with a custom harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use pcw_core::heuristic::{theta_wg_to_ratio, theta_wg_to_ratio_geometric, DesignResult, Designer};
use pcw_core::numerics::{fresnel_cs, Tolerance};
use pcw_core::radiometry::{
    average_emission_angle, bragg_family_fractions, sin3_integral, SIN3_FULL,
};
use pcw_core::robustness::{
    build_compound, compound_peak, run_perturbation, CompoundDesign, PerturbationConfig,
    RNG_ALGORITHM,
};
use pcw_core::slab_optics::{vertical_cavity, MaterialModel};
use pcw_core::units::deg_to_rad;
use pcw_core::LatticeSpec;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn reference() -> Designer {
    Designer::new(160.0, MaterialModel::gaas(), deg_to_rad(60.0)).unwrap()
}

fn criterion_1() -> Outcome {
    let f = vertical_cavity(160.0, 3.46, 925.0)
        .map_err(|e| e.to_string())?
        .f_fp;
    check(
        (0.56..=0.72).contains(&f),
        format!("F_FP = {f:.4} outside [0.56, 0.72]"),
    )?;
    Ok(format!("F_FP = {f:.4}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let d = reference()
        .design_radius(238.0, 925.0, None, &Tolerance::default())
        .map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    let last = d.trace.last_residual().unwrap_or(f64::INFINITY);
    check(d.trace.converged, "not converged")?;
    check(
        d.iterations() <= 50,
        format!("{} iterations", d.iterations()),
    )?;
    check(last <= 1e-3, format!("last |dr| = {last:e}"))?;
    let r = d.spec.r_nm;
    check(
        (60.0..=100.0).contains(&r),
        format!("r = {r:.3} nm outside [60, 100]"),
    )?;
    Ok(format!("r = {r:.3} nm after {} iterations", d.iterations()))
}

fn locus() -> Result<(Vec<DesignResult>, usize, Duration), String> {
    let grid: Vec<f64> = (0..=16).map(|i| 215.0 + 2.5 * i as f64).collect();
    let start = Instant::now();
    let pts = reference()
        .design_curve(925.0, &grid, &Tolerance::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let n = pts.len();
    let ok = pts.into_iter().filter_map(|p| p.result.ok()).collect();
    Ok((ok, n, elapsed))
}

fn criterion_3() -> Outcome {
    let (ok, n, elapsed) = locus()?;
    within(elapsed, 5.0)?;
    check(ok.len() >= 2, format!("only {} feasible points", ok.len()))?;
    check(
        ok.iter().all(|d| d.c2 > 0.0 && d.c2.is_finite()),
        "c2 <= 0 on the locus",
    )?;
    let increasing = ok
        .windows(2)
        .all(|w| w[1].spec.a_nm > w[0].spec.a_nm && w[1].spec.r_nm > w[0].spec.r_nm);
    check(increasing, "(a, r) locus not monotone increasing")?;
    Ok(format!(
        "{}/{n} points feasible, r from {:.2} to {:.2} nm",
        ok.len(),
        ok.first().unwrap().spec.r_nm,
        ok.last().unwrap().spec.r_nm
    ))
}

fn criterion_4() -> Outcome {
    let tol = Tolerance::default();
    let (ok, _, _) = locus()?;
    let designer = reference();
    let mut worst: f64 = 0.0;
    for d in &ok {
        let res = d.design_residual().abs();
        worst = worst.max(res);
        check(
            res <= 10.0 * tol.abs_tol,
            format!("a = {}: residual {res:e}", d.spec.a_nm),
        )?;
        let again = designer
            .design_radius(d.spec.a_nm, 925.0, Some(d.spec.r_nm), &tol)
            .map_err(|e| e.to_string())?;
        check(
            again.iterations() == 1,
            format!(
                "a = {}: restart took {} iterations",
                d.spec.a_nm,
                again.iterations()
            ),
        )?;
    }
    Ok(format!(
        "{} designs, max residual {worst:.1e} nm, restarts in 1 iteration",
        ok.len()
    ))
}

fn criterion_5() -> Outcome {
    let rows = [
        ((238.0, 238.0), (925.0, 925.0)),
        ((233.0, 238.0), (925.0, 925.0)),
        ((223.0, 238.0), (925.0, 925.0)),
        ((238.0, 238.0), (920.0, 930.0)),
        ((238.0, 238.0), (915.0, 935.0)),
        ((238.0, 238.0), (905.0, 945.0)),
    ];
    for (a, l) in rows {
        let p = compound_peak(l.0, l.1);
        check(p == 925.0, format!("{l:?} -> {p}"))?;
        check(compound_peak(l.1, l.0) == 925.0, "swap changed the peak")?;
        let c = build_compound(&reference(), a, l, &Tolerance::default())
            .map_err(|e| format!("{a:?} {l:?}: {e}"))?;
        check(
            c.predicted_peak == 925.0,
            format!("{a:?} {l:?}: {}", c.predicted_peak),
        )?;
    }
    Ok("all six pairings give 925 nm".into())
}

fn criterion_6() -> Outcome {
    let designer = reference();
    let tol = Tolerance::default();
    let peak_tol = Tolerance::with_abs(1e-6);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..12 {
        let a = 217.5 + 3.5 * i as f64;
        let Ok(d) = designer.design_radius(a, 925.0, None, &tol) else {
            continue;
        };
        let lambda = designer
            .peak_near(a, d.spec.r_nm, 915.0, 10.0, 10, &peak_tol)
            .map_err(|e| format!("a = {a}: {e}"))?;
        worst = worst.max((lambda - 925.0).abs());
        count += 1;
    }
    check(count >= 10, format!("only {count} feasible periods"))?;
    check(worst <= 0.5, format!("max |lambda* - 925| = {worst:e}"))?;
    Ok(format!(
        "{count} periods, max |lambda* - lambda| = {worst:.1e} nm"
    ))
}

fn criterion_7() -> Outcome {
    let k = 2.0;
    let base = reference();
    let scaled = Designer::new(k * 160.0, MaterialModel::gaas(), deg_to_rad(60.0)).unwrap();
    let tol = Tolerance::default();
    let tol_k = Tolerance {
        abs_tol: k * tol.abs_tol,
        ..tol
    };
    let d1 = base
        .design_radius(238.0, 925.0, Some(70.0), &tol)
        .map_err(|e| e.to_string())?;
    let d2 = scaled
        .design_radius(k * 238.0, k * 925.0, Some(k * 70.0), &tol_k)
        .map_err(|e| e.to_string())?;
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    check(rel(d2.theta_wg, d1.theta_wg) <= 1e-9, "theta_wg changed")?;
    check(rel(d2.c2, d1.c2) <= 1e-9, "c2 changed")?;
    check(
        d2.spec.r_nm == k * d1.spec.r_nm,
        format!("r: {} vs {}", d2.spec.r_nm, k * d1.spec.r_nm),
    )?;
    check(
        d2.c1 == k * d1.c1,
        format!("c1: {} vs {}", d2.c1, k * d1.c1),
    )?;
    Ok(format!(
        "theta_wg rel diff {:.1e}, r and c1 scale exactly",
        rel(d2.theta_wg, d1.theta_wg)
    ))
}

/// Maclaurin series: C sums the even powers of x = πu²/2, S the odd ones,
/// each term u·(−1)^⌊k/2⌋·x^k/(k!·(2k+1)).
fn fresnel_series(u: f64) -> (f64, f64) {
    let x = FRAC_PI_2 * u * u;
    let (mut c, mut s) = (0.0, 0.0);
    let mut power = u;
    for k in 0..80 {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * power / (2 * k + 1) as f64;
        if k % 2 == 0 {
            c += term;
        } else {
            s += term;
        }
        power *= x / (k + 1) as f64;
    }
    (c, s)
}

fn criterion_8() -> Outcome {
    check(
        (sin3_integral(0.0, PI) - 4.0 / 3.0).abs() < 1e-15,
        "sin^3 integral",
    )?;
    check(SIN3_FULL == 4.0 / 3.0, "SIN3_FULL")?;
    check(
        (average_emission_angle() * 2.0 * PI - 1.0).abs() < 1e-15,
        "alpha_avg",
    )?;
    for deg in [10.0, 30.0, 45.0, 60.0, 80.0] {
        let (s, p) = bragg_family_fractions(deg_to_rad(deg)).map_err(|e| e.to_string())?;
        check((s + p - 1.0).abs() < 1e-15, format!("eta sum at {deg} deg"))?;
    }
    let mut worst: f64 = 0.0;
    for u in [0.25, 0.5, 1.0, 2.0] {
        let (c, s) = fresnel_cs(u).map_err(|e| e.to_string())?;
        let (co, so) = fresnel_series(u);
        worst = worst.max((c - co).abs()).max((s - so).abs());
    }
    check(worst <= 1e-8, format!("Fresnel vs series {worst:e}"))?;
    let mut poles = 0;
    for i in 1..=20 {
        for j in 1..=20 {
            let tw = FRAC_PI_2 * i as f64 / 21.0;
            let tg = FRAC_PI_2 * j as f64 / 21.0;
            match (
                theta_wg_to_ratio(tw, tg),
                theta_wg_to_ratio_geometric(tw, tg),
            ) {
                (Ok(a), Ok(b)) => check(
                    ((a.c2 - b) / b).abs() <= 1e-12,
                    format!("ratio forms differ at ({tw}, {tg})"),
                )?,
                (Err(_), Err(_)) => poles += 1,
                _ => return Err(format!("forms disagree on the pole at ({tw}, {tg})")),
            }
        }
    }
    Ok(format!(
        "Fresnel max error {worst:.1e}, ratio forms agree on 20x20 grid ({poles} poles)"
    ))
}

fn criterion_9() -> Outcome {
    let designer = reference();
    let tol = Tolerance::default();
    let compound = build_compound(&designer, (233.0, 238.0), (925.0, 925.0), &tol)
        .map_err(|e| e.to_string())?;
    let start = Instant::now();

    let small = PerturbationConfig {
        n_runs: 50,
        seed: 2024,
        ..Default::default()
    };
    let a = run_perturbation(&compound, &small).map_err(|e| e.to_string())?;
    let b = run_perturbation(&compound, &small).map_err(|e| e.to_string())?;
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).map_err(|e| e.to_string())?;
    b.write_csv(&mut cb).map_err(|e| e.to_string())?;
    check(ca == cb && a == b, "same seed gave different reports")?;

    let still = PerturbationConfig {
        delta_r_max: 0.0,
        ..small.clone()
    };
    let z = run_perturbation(&compound, &still).map_err(|e| e.to_string())?;
    check(
        z.success_fraction == 1.0,
        format!(
            "success fraction {} at zero perturbation",
            z.success_fraction
        ),
    )?;

    let n = 10_000;
    let big = |seed| PerturbationConfig {
        n_runs: n,
        seed,
        ..Default::default()
    };
    let uniform = |spec: &LatticeSpec| CompoundDesign::uniform(spec.clone(), 925.0);
    let c = run_perturbation(&compound, &big(1)).map_err(|e| e.to_string())?;
    let u1 = run_perturbation(&uniform(&compound.half_1), &big(2)).map_err(|e| e.to_string())?;
    let u2 = run_perturbation(&uniform(&compound.half_2), &big(3)).map_err(|e| e.to_string())?;
    within(start.elapsed(), 60.0)?;
    let bound = 0.5 * (u1.std_peak1 + u2.std_peak1);
    // Standard error of a sample standard deviation, sigma/sqrt(2(n-1)).
    let se = |s: f64, runs: usize| s / (2.0 * (runs as f64 - 1.0)).sqrt();
    let slack = 3.0
        * (se(c.std_shift, n).powi(2)
            + 0.25 * se(u1.std_peak1, n).powi(2)
            + 0.25 * se(u2.std_peak1, n).powi(2))
        .sqrt();
    check(
        c.std_shift <= bound + slack,
        format!("std compound {:.4} > {bound:.4} + {slack:.4}", c.std_shift),
    )?;
    check(
        c.n_failed + u1.n_failed + u2.n_failed == 0,
        "failed runs in the ensembles",
    )?;
    Ok(format!(
        "std compound {:.3} nm <= {:.3} nm (half averages), {:.1} s",
        c.std_shift,
        bound,
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_10() -> Outcome {
    let compound = build_compound(
        &reference(),
        (238.0, 238.0),
        (925.0, 925.0),
        &Tolerance::default(),
    )
    .map_err(|e| e.to_string())?;
    let cfg = PerturbationConfig::default();
    check(
        cfg.n_runs == 100 && cfg.delta_r_max == 10.0,
        "default protocol is not 100 runs at 10 nm",
    )?;
    let rep = run_perturbation(&compound, &PerturbationConfig { n_runs: 3, ..cfg })
        .map_err(|e| e.to_string())?;
    let note = rep.scope_note.to_lowercase();
    for item in [
        "not reproduced",
        "fwhm",
        "probability",
        "design curve",
        "purcell factor",
    ] {
        check(note.contains(item), format!("scope note lacks '{item}'"))?;
    }
    check(
        rep.window_note.contains("success_window"),
        "window note missing",
    )?;
    check(rep.rng.algorithm == RNG_ALGORITHM, "RNG identity missing")?;
    let json = serde_json::to_string(&rep).map_err(|e| e.to_string())?;
    check(
        json.contains("\"rng\"") && json.contains("\"scope_note\""),
        "report JSON lacks provenance",
    )?;
    Ok("scope and window notes present, RNG identity pinned".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Fabry-Perot anchor", criterion_1),
        ("reference design", criterion_2),
        ("design locus", criterion_3),
        ("fixed-point self-consistency", criterion_4),
        ("compound rule", criterion_5),
        ("inverse consistency", criterion_6),
        ("scaling", criterion_7),
        ("analytic identities", criterion_8),
        ("Monte Carlo determinism and statistics", criterion_9),
        ("non-reproducibility statement", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
