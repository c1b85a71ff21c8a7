//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command as Process;
use std::time::Instant;

use nodal_core::census::{recursion_exponent, simulate_bad_cube_tree, subcube_census, CensusConfig, SpawnPolicy};
use nodal_core::fields::{make_harmonic_poly, sin_torus, Part};
use nodal_core::geom::Simplex;
use nodal_core::growth::{
    check_growth_sandwich, check_log_integral, doubling_index_ball, doubling_index_cube, CubeGrid, FrequencyProfile,
    SupConfig,
};
use nodal_core::nodal::{nodal_measure_crofton, nodal_measure_marching, NodalStatus};
use nodal_core::quadrature::QuadratureConfig;
use nodal_core::simplexcov::{covering_check, covering_shapes, max_enlargement};
use nodal_core::zoo::{harmonic_zoo, nodal_zoo};
use nodal_core::Cube64;
use nodal_lab::{run_config, ExperimentConfig};
use rayon::prelude::*;
use serde_json::Value;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn origin(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

fn unit_cube(n: usize) -> Cube64 {
    Cube64::from_bounds(-1.0, 1.0, n).unwrap()
}

fn frequency_exactness() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [2, 3] {
        for k in 0..=10u32 {
            let u = make_harmonic_poly(n, k, Part::Re).map_err(|e| e.to_string())?;
            let p = FrequencyProfile::compute(&u, &origin(n), &[0.25, 0.5, 1.0], &QuadratureConfig::default())
                .map_err(|e| e.to_string())?;
            let exact = (2 * k as usize + n - 1) as f64 / 2.0;
            worst = p.beta_values.iter().fold(worst, |w, b| w.max((b - exact).abs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 10.0, format!("max |beta - (2k+n-1)/2| = {worst:.2e}, {secs:.2} s"))
}

fn doubling_exactness() -> Verdict {
    let sup = SupConfig::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for n in [2, 3] {
        for k in 0..=10u32 {
            let u = make_harmonic_poly(n, k, Part::Re).map_err(|e| e.to_string())?;
            for r in [0.25, 0.5, 1.0] {
                let rep = doubling_index_ball(&u, &origin(n), r, &sup).map_err(|e| e.to_string())?;
                worst = worst.max((rep.index - k as f64).abs());
            }
            let cube = doubling_index_cube(&u, &unit_cube(n), &CubeGrid::default(), &sup).map_err(|e| e.to_string())?;
            let at_origin = cube
                .samples
                .iter()
                .filter(|s| s.center.iter().all(|&c| c == 0.0))
                .map(|s| s.index)
                .fold(f64::NEG_INFINITY, f64::max);
            if cube.index < k as f64 - 1e-9 || (cube.index - at_origin).abs() > 1e-9 {
                failures.push(format!("n={n} k={k}: N(Q)={} origin={at_origin}", cube.index));
            }
        }
    }
    check(
        worst < 1e-9 && failures.is_empty(),
        format!("max |N(0,r) - k| = {worst:.2e}; cube index failures {failures:?}"),
    )
}

fn log_integral_identity() -> Verdict {
    let zoo = harmonic_zoo();
    let residuals = zoo
        .par_iter()
        .map(|e| {
            check_log_integral(&e.field, &e.center, 0.1, 1.0, &QuadratureConfig::default())
                .map(|r| (e.name.clone(), r.residual))
                .map_err(|err| format!("{}: {err}", e.name))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (name, worst) = residuals
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    check(worst < 1e-6, format!("{} fields, max residual {worst:.2e} ({name})", residuals.len()))
}

fn growth_sandwich() -> Verdict {
    let sup = SupConfig::default();
    let mut checked = 0;
    let mut violations = Vec::new();
    for e in harmonic_zoo() {
        for rho in [0.1, 0.25] {
            for t in [3.0, 4.0, 8.0] {
                let rep = check_growth_sandwich(&e.field, &e.center, rho, t, 0.25, 0.0, &sup)
                    .map_err(|err| format!("{}: {err}", e.name))?;
                if rep.index_inner < 4.0 {
                    continue;
                }
                checked += 1;
                if !rep.holds(0.0) {
                    violations.push(format!(
                        "{} rho={rho} t={t}: slack ({:.3e}, {:.3e})",
                        e.name, rep.lower_slack, rep.upper_slack
                    ));
                }
            }
        }
    }
    check(
        checked > 0 && violations.is_empty(),
        format!("{checked} cases with N >= 4, violations = {} {violations:?}", violations.len()),
    )
}

const CROFTON_SEED: u64 = 20240611;

fn nodal_exactness() -> Verdict {
    let circle = nodal_core::fields::Field::Quadric { diag: vec![1.0, 1.0], offset: -0.25 };
    let c = nodal_measure_marching(&circle, &unit_cube(2), 8).map_err(|e| e.to_string())?;
    let circle_err = (c.value - PI).abs() / PI;

    let torus = sin_torus(2, 4).map_err(|e| e.to_string())?;
    let q = Cube64::from_bounds(0.0, 2.0 * PI, 2).unwrap();
    let exact = 32.0 * PI;
    let m = nodal_measure_marching(&torus, &q, 8).map_err(|e| e.to_string())?;
    let cr = nodal_measure_crofton(&torus, &q, 100_000, CROFTON_SEED).map_err(|e| e.to_string())?;
    let m_err = (m.value - exact).abs() / exact;
    let c_err = (cr.value - exact).abs() / exact;

    let mut gaps = Vec::new();
    let mut outside = Vec::new();
    for e in nodal_zoo() {
        let depth = if e.cube.dim() == 2 { 8 } else { 6 };
        let a = nodal_measure_marching(&e.field, &e.cube, depth).map_err(|err| format!("{}: {err}", e.name))?;
        let b = nodal_measure_crofton(&e.field, &e.cube, 100_000, CROFTON_SEED).map_err(|err| format!("{}: {err}", e.name))?;
        if a.status != NodalStatus::Ok || b.status != NodalStatus::Ok {
            outside.push(format!("{}: undefined", e.name));
            continue;
        }
        let gap = (a.value - b.value).abs();
        let band = 3.0 * (a.error_indicator + b.error_indicator);
        gaps.push(format!("{} {:.4}/{:.4}", e.name, gap, band));
        if gap > band {
            outside.push(format!("{}: gap {gap:.4e} > {band:.4e}", e.name));
        }
    }
    check(
        circle_err < 5e-3 && m_err < 1e-2 && c_err < 2e-2 && outside.is_empty(),
        format!(
            "circle rel err {circle_err:.2e}; torus m0=4 marching {m_err:.2e}, crofton {c_err:.2e}; cross-method gap/band [{}]{}",
            gaps.join(", "),
            if outside.is_empty() { String::new() } else { format!("; outside {outside:?}") }
        ),
    )
}

fn run_toml(src: &str, dir: &Path) -> Result<Value, String> {
    let cfg = ExperimentConfig::from_toml(src).map_err(|e| e.to_string())?;
    let cfg = cfg.resolve(None).map_err(|e| e.to_string())?;
    run_config(&cfg, dir).map_err(|e| e.to_string())?;
    let name = format!("{}.json", cfg.experiment.command().name());
    let text = std::fs::read_to_string(dir.join(name)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn yau_scaling() -> Verdict {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let planar = run_toml(
        "[experiment]\nkind = \"yau\"\ndim = 2\nm_values = [1, 2, 4, 8]\nmethod = \"marching\"\ndepth = 8\n",
        &tmp.path().join("n2"),
    )?;
    let spatial = run_toml(
        &format!(
            "seed = {CROFTON_SEED}\n[experiment]\nkind = \"yau\"\ndim = 3\nm_values = [1, 2, 3, 4]\nmethod = \"crofton\"\nlines = 100000\n"
        ),
        &tmp.path().join("n3"),
    )?;
    let e2 = planar["fitted_exponent"].as_f64().ok_or("missing exponent")?;
    let e3 = spatial["fitted_exponent"].as_f64().ok_or("missing exponent")?;
    let secs = start.elapsed().as_secs_f64();
    check(
        (e2 - 0.5).abs() <= 0.02 && (e3 - 0.5).abs() <= 0.05 && secs < 120.0,
        format!("n=2 exponent {e2:.5}, n=3 (crofton) exponent {e3:.5}, {secs:.1} s"),
    )
}

fn census_bound() -> Verdict {
    let cfg = CensusConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for a in [9usize, 27] {
        for k in 6..=12u32 {
            let u = make_harmonic_poly(2, k, Part::Re).map_err(|e| e.to_string())?;
            let rep = subcube_census(&u, &unit_cube(2), a, 0.5, 1.0, &cfg).map_err(|e| e.to_string())?;
            let pass = rep.verdict && rep.monotonicity_violations == 0;
            ok &= pass;
            let mut line = format!("A={a} k={k}: bad {} vs bound {:.1}, N(Q)={:.3}", rep.bad_count, rep.bound, rep.parent_index);
            if !pass {
                let w: Vec<String> = rep
                    .witnesses
                    .iter()
                    .map(|w| format!("{:?}@({:.3},{:.3}) r={:.4} N={:.3}", w.position, w.center[0], w.center[1], w.radius, w.index))
                    .collect();
                line.push_str(&format!(" witnesses [{}]", w.join("; ")));
            }
            lines.push(line);
        }
    }
    check(ok, lines.join(" | "))
}

fn recursion_model() -> Verdict {
    let m = recursion_exponent(2, 1.0).map_err(|e| e.to_string())?;
    let alpha_ok = m.alpha == 3.0 && m.alpha_exact == Some((3, 1));
    let levels_ok = m.levels.len() >= 64 && m.all_levels_hold();
    let seeds: Vec<u64> = (0..100).collect();
    let trees = seeds
        .iter()
        .map(|&s| simulate_bad_cube_tree(2, 2, 20, 0, s, SpawnPolicy::Uniform))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let extreme = simulate_bad_cube_tree(2, 2, 20, 0, 0, SpawnPolicy::Max).map_err(|e| e.to_string())?;
    let held = trees.iter().filter(|t| t.holds).count();
    check(
        alpha_ok && levels_ok && held == trees.len() && extreme.holds,
        format!(
            "alpha = {} (exact {:?}); {} majorant levels hold = {levels_ok}; tree bound held for {held}/{} seeds, max policy {}",
            m.alpha,
            m.alpha_exact,
            m.levels.len(),
            trees.len(),
            extreme.holds
        ),
    )
}

/// Enlargement `c₁` of the unit equilateral triangle at `K = 2`: root of
/// `4s² - (2h/d)s + (h/d)² - 4 = 0` with `h = d/√3`, less one.
fn equilateral_c1() -> f64 {
    let hd = 1.0 / 3f64.sqrt();
    let (a, b, c) = (4.0, -2.0 * hd, hd * hd - 4.0);
    (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a) - 1.0
}

fn covering_lemma() -> Verdict {
    let tri = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).unwrap();
    let c1 = max_enlargement(&tri, 2.0, 1e-9, &Default::default()).map_err(|e| e.to_string())?;
    let oracle = equilateral_c1();
    let shapes = covering_shapes(0.3, 2, 1000, 7).map_err(|e| e.to_string())?;
    let k = 2.0 / 0.3;
    let grid = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8];
    let broken = shapes
        .par_iter()
        .skip(1)
        .map(|s| {
            let holds = grid
                .iter()
                .map(|&c| covering_check(s, k, c).map(|r| r.holds))
                .collect::<Result<Vec<bool>, _>>()?;
            Ok(holds.windows(2).any(|w| !w[0] && w[1]))
        })
        .collect::<Result<Vec<bool>, nodal_core::Error>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|&b| b)
        .count();
    check(
        (c1 - oracle).abs() < 1e-4 && broken == 0,
        format!(
            "equilateral c1 {c1:.6} vs oracle {oracle:.6}; monotonicity broken on {broken}/{} simplices",
            shapes.len() - 1
        ),
    )
}

fn smallness_exponent() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ks: Vec<String> = (4..=24).map(|k| format!("{k}.0")).collect();
    let v = run_toml(
        &format!(
            "[experiment]\nkind = \"smallness\"\n[experiment.family]\nfamily = \"sinh\"\nk_values = [{}]\n[experiment.cube]\ncenter = [0.5, 0.5]\nhalf_side = 0.5\n",
            ks.join(", ")
        ),
        tmp.path(),
    )?;
    let alpha = v["report"]["fitted_alpha"].as_f64().ok_or("missing alpha")?;
    // On [0,1]² with data on {y = 0}: sup over [1/4,3/4]² decays like e^{-k/4}
    // while the Cauchy data decay like e^{-k}.
    let asymptotic = (1.0 - 0.75) / 1.0;
    let slack = v["envelope"]["slack"].as_array().ok_or("missing slack")?;
    let negative = slack.iter().filter(|s| s.as_f64().is_none_or(|x| x < 0.0)).count();
    let holds = v["envelope"]["holds"].as_bool() == Some(true);
    check(
        (alpha - asymptotic).abs() <= 0.03 && negative == 0 && holds,
        format!("fitted alpha {alpha:.5} vs {asymptotic}; {negative} negative envelope slacks of {}", slack.len()),
    )
}

fn run_binary(kind: &str, config: &Path, out: &Path) -> Result<(), String> {
    let status = Process::new(env!("CARGO_BIN_EXE_nodal-lab"))
        .args([kind, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), format!("{kind} exited with {status}")).map(|_| ())
}

fn manifest_without_times(dir: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| e.to_string())?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let obj = v.as_object_mut().ok_or("manifest is not an object")?;
    obj.remove("started_unix_ms");
    obj.remove("finished_unix_ms");
    Ok(v)
}

fn reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        ("freq", "[experiment]\nkind = \"freq\"\nradii = [0.1, 0.4, 0.7, 1.0]\n[experiment.field]\nkind = \"harmonic_poly\"\ndim = 3\ndegree = 4\npart = \"im\"\n"),
        ("nodal", "seed = 99\n[experiment]\nkind = \"nodal\"\ndepth = 6\nlines = 20000\n[experiment.field]\nkind = \"torus_eigen\"\nmodes = [2, 3]\nparity = [\"sin\", \"cos\"]\n[experiment.cube]\ncenter = [3.0, 3.0]\nhalf_side = 3.0\n"),
        ("exponent", "seed = 5\n[experiment]\nkind = \"exponent\"\na = 3\nc = 0.5\n[experiment.tree]\na0 = 2\nn = 2\ndepth = 12\npolicy = \"uniform\"\nruns = 3\n"),
    ];
    let mut compared = 0;
    for (kind, src) in configs {
        let path = tmp.path().join(format!("{kind}.toml"));
        std::fs::write(&path, src).map_err(|e| e.to_string())?;
        let (a, b) = (tmp.path().join(format!("{kind}_a")), tmp.path().join(format!("{kind}_b")));
        run_binary(kind, &path, &a)?;
        run_binary(kind, &path, &b)?;
        let ma = manifest_without_times(&a)?;
        if ma != manifest_without_times(&b)? {
            return Err(format!("{kind}: manifests differ beyond timestamps"));
        }
        for rec in ma["outputs"].as_array().ok_or("no outputs")? {
            let file = rec["file"].as_str().ok_or("bad output record")?;
            let (x, y) = (std::fs::read(a.join(file)), std::fs::read(b.join(file)));
            match (x, y) {
                (Ok(x), Ok(y)) if x == y => compared += 1,
                _ => return Err(format!("{kind}: {file} differs between runs")),
            }
        }
    }
    check(compared > 0, format!("{compared} output files byte-identical across repeated runs"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("frequency exactness", frequency_exactness),
        ("doubling exactness", doubling_exactness),
        ("log-integral identity", log_integral_identity),
        ("growth sandwich", growth_sandwich),
        ("nodal exactness", nodal_exactness),
        ("yau scaling", yau_scaling),
        ("subcube census bound", census_bound),
        ("recursion model", recursion_model),
        ("covering lemma", covering_lemma),
        ("smallness exponent", smallness_exponent),
        ("reproducibility", reproducibility),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} [{name}] ({secs:.1} s): {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
