//! Experiment execution: one driver per subcommand, each writing CSV + JSON
//! (and SVG where a plot applies) before the manifest.

use std::path::{Path, PathBuf};

use nodal_core::census::{hyperplane_census, recursion_exponent, simulate_bad_cube_tree, subcube_census, simplex_lemma_check};
use nodal_core::fields::sin_torus;
use nodal_core::growth::{doubling_index_ball, doubling_index_cube, FrequencyProfile};
use nodal_core::nodal::{nodal_measure_crofton, nodal_measure_marching, nodal_segments_2d, yau_scaling_fit, MeasureConfig, NodalMethod};
use nodal_core::simplexcov::covering_constants;
use nodal_core::smallness::{smallness_bound_check, smallness_experiment};
use nodal_core::{Field64, Simplex64};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    locate, CensusExperiment, CensusRule, Command, DoublingExperiment, Experiment, ExperimentConfig, ExponentExperiment,
    FreqExperiment, NodalExperiment, Numerics, SimplexExperiment, SmallnessExperiment, YauExperiment,
};
use crate::error::{ConfigError, RunError};
use crate::output::{config_hash, num, unix_ms, RunManifest, RunStatus, Sink, Table, ERROR_FILE};
use crate::plot::{render_svg, Figure, Plottable};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// Reads, validates and resolves a config for `command`.
pub fn load_config(command: Command, path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, RunError> {
    let src = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let cfg = ExperimentConfig::from_toml(&src)?;
    let kind = cfg.experiment.command();
    if kind != command {
        return Err(ConfigError {
            field: "experiment.kind".into(),
            line: locate(&src, "experiment.kind"),
            message: format!("config is a `{}` experiment but the subcommand is `{}`", kind.name(), command.name()),
        }
        .into());
    }
    cfg.resolve(seed).map_err(|mut e| {
        e.line = locate(&src, &e.field);
        e.into()
    })
}

/// Runs one experiment. Numerical failures still leave the outputs written so
/// far, an error record and a manifest in the output directory.
pub fn run(opts: &RunOptions) -> Result<RunManifest, RunError> {
    let cfg = load_config(opts.command, &opts.config, opts.seed)?;
    run_config(&cfg, &opts.out)
}

pub fn run_config(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, RunError> {
    let started = unix_ms();
    let mut sink = Sink::create(out)?;
    let failure = match execute(cfg, &mut sink) {
        Ok(()) => None,
        Err(e @ (RunError::Argument(_) | RunError::Degenerate(_))) => Some(e),
        Err(e) => return Err(e),
    };
    let status = match &failure {
        None => RunStatus::Ok,
        Some(RunError::Argument(_)) => RunStatus::InvalidArgument,
        Some(_) => RunStatus::Degenerate,
    };
    let error = failure.as_ref().map(ToString::to_string);
    if let Some(message) = &error {
        sink.json(ERROR_FILE, &json!({ "status": status, "error": message }))?;
    }
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.experiment.command().name().into(),
        config_hash: config_hash(cfg),
        started_unix_ms: started,
        finished_unix_ms: 0,
        status,
        error,
        outputs: sink.records().to_vec(),
        config: cfg.clone(),
    };
    manifest.finished_unix_ms = unix_ms();
    sink.finish(&manifest)?;
    failure.map_or(Ok(manifest), Err)
}

fn execute(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let n = &cfg.numerics;
    let seed = cfg.seed.unwrap_or(0);
    match &cfg.experiment {
        Experiment::Freq(e) => freq(e, n, sink),
        Experiment::Doubling(e) => doubling(e, n, sink),
        Experiment::Nodal(e) => nodal(e, seed, sink),
        Experiment::Census(e) => census(e, n, sink),
        Experiment::Simplex(e) => simplex(e, n, seed, sink),
        Experiment::Smallness(e) => smallness(e, n, sink),
        Experiment::Yau(e) => yau(e, seed, sink),
        Experiment::Exponent(e) => exponent(e, seed, sink),
    }
}

fn plot(sink: &mut Sink, name: &str, fig: &Figure) -> Result<(), RunError> {
    // Reports too small to draw simply get no plot.
    match render_svg(fig) {
        Ok(svg) => sink.write(name, svg.as_bytes()),
        Err(_) => Ok(()),
    }
}

fn coords(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |k| format!("{prefix}_{k}"))
}

fn center_or_origin(c: &Option<Vec<f64>>, u: &Field64) -> Vec<f64> {
    c.clone().unwrap_or_else(|| vec![0.0; u.dim()])
}

fn freq(e: &FreqExperiment, n: &Numerics, sink: &mut Sink) -> Result<(), RunError> {
    let center = center_or_origin(&e.center, &e.field);
    let profile = FrequencyProfile::compute(&e.field, &center, &e.radii, &n.quadrature)?;
    let mut t = Table::new(["r", "h", "beta"]);
    for ((&r, &h), &b) in profile.radii.iter().zip(&profile.h_values).zip(&profile.beta_values) {
        t.push(vec![num(r), num(h), num(b)]);
    }
    sink.csv("freq.csv", &t)?;
    sink.json("freq.json", &json!({ "field": e.field, "metadata": e.field.metadata(), "profile": profile }))?;
    plot(sink, "freq.svg", &profile.figure())
}

fn doubling(e: &DoublingExperiment, n: &Numerics, sink: &mut Sink) -> Result<(), RunError> {
    let center = center_or_origin(&e.center, &e.field);
    let dim = e.field.dim();
    let mut t = Table::new(
        ["scope", "radius", "index", "sup_inner", "sup_outer"]
            .into_iter()
            .map(String::from)
            .chain(coords("point", dim)),
    );
    let mut balls = Vec::new();
    let mut failure = None;
    for &r in &e.radii {
        match doubling_index_ball(&e.field, &center, r, &n.sup) {
            Ok(rep) => {
                let mut row = vec!["ball".into(), num(r), num(rep.index), num(rep.sup_inner.value), num(rep.sup_outer.value)];
                row.extend(rep.sup_outer.lower_witness.iter().map(|&v| num(v)));
                t.push(row);
                balls.push(rep);
            }
            Err(err) => {
                failure = Some(err);
                break;
            }
        }
    }
    let mut cube = None;
    if let (None, Some(spec)) = (&failure, &e.cube) {
        match spec.build().and_then(|q| doubling_index_cube(&e.field, &q, &n.grid, &n.sup)) {
            Ok(rep) => {
                let mut row = vec!["cube".into(), num(rep.argmax_radius), num(rep.index), String::new(), String::new()];
                row.extend(rep.argmax_center.iter().map(|&v| num(v)));
                t.push(row);
                cube = Some(rep);
            }
            Err(err) => failure = Some(err),
        }
    }
    sink.csv("doubling.csv", &t)?;
    sink.json("doubling.json", &json!({ "center": center, "balls": balls, "cube": cube }))?;
    failure.map_or(Ok(()), |err| Err(err.into()))
}

fn nodal(e: &NodalExperiment, seed: u64, sink: &mut Sink) -> Result<(), RunError> {
    let q = e.cube.build()?;
    let mut t = Table::new(["method", "value", "resolution", "error_indicator", "seed", "kinematic_constant", "status"]);
    let mut estimates = Vec::new();
    let mut failure = None;
    for &m in &e.methods {
        let est = match m {
            NodalMethod::Marching => nodal_measure_marching(&e.field, &q, e.depth),
            NodalMethod::Crofton => nodal_measure_crofton(&e.field, &q, e.lines, seed),
        };
        match est {
            Ok(est) => {
                t.push(vec![
                    json_name(&est.method),
                    num(est.value),
                    est.resolution.to_string(),
                    num(est.error_indicator),
                    est.seed.map_or_else(String::new, |s| s.to_string()),
                    est.kinematic_constant.map_or_else(String::new, num),
                    json_name(&est.status),
                ]);
                estimates.push(est);
            }
            Err(err) => {
                failure = Some(err);
                break;
            }
        }
    }
    sink.csv("nodal.csv", &t)?;
    sink.json("nodal.json", &json!({ "field": e.field, "estimates": estimates }))?;
    if let Some(err) = failure {
        return Err(err.into());
    }
    if e.svg && q.dim() == 2 {
        let segments = nodal_segments_2d(&e.field, &q, e.depth)?;
        let fig = Figure::Segments {
            title: "zero set".into(),
            bounds: [(q.lower(0), q.upper(0)), (q.lower(1), q.upper(1))],
            segments,
        };
        plot(sink, "nodal_segments.svg", &fig)?;
    }
    Ok(())
}

fn json_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn census(e: &CensusExperiment, n: &Numerics, sink: &mut Sink) -> Result<(), RunError> {
    let q = e.cube.build()?;
    let report = match e.rule {
        CensusRule::Subcube { a, c } => subcube_census(&e.field, &q, a, c, n.index_floor, &n.census)?,
        CensusRule::Hyperplane { a1, level, epsilon } => hyperplane_census(&e.field, &q, a1, level, epsilon, &n.census)?,
    };
    let dim = q.dim();
    let mut t = Table::new(
        coords("position", dim)
            .chain(["index".to_string(), "bad".to_string()])
            .chain(coords("argmax_center", dim))
            .chain(["argmax_radius".to_string()]),
    );
    for s in &report.subcubes {
        let mut row: Vec<String> = s.position.iter().map(usize::to_string).collect();
        row.push(num(s.index));
        row.push(s.bad.to_string());
        row.extend(s.argmax_center.iter().map(|&v| num(v)));
        row.push(num(s.argmax_radius));
        t.push(row);
    }
    sink.csv("census.csv", &t)?;
    sink.json("census.json", &report)?;
    plot(sink, "census.svg", &report.figure())
}

fn simplex(e: &SimplexExperiment, n: &Numerics, seed: u64, sink: &mut Sink) -> Result<(), RunError> {
    let constants = covering_constants(e.a, e.dim, e.shape_samples, seed)?;
    let mut t = Table::new(["k", "c1"]);
    for &(k, c1) in &constants.table {
        t.push(vec![num(k), num(c1)]);
    }
    sink.csv("simplex.csv", &t)?;
    let lemma = match &e.lemma {
        Some(l) => {
            let s = Simplex64::new(l.vertices.clone())?;
            Some(simplex_lemma_check(&l.field, &s, l.level, l.c, l.k, l.big_c, &n.sup))
        }
        None => None,
    };
    let (lemma, failure) = match lemma {
        Some(Ok(check)) => (Some(check), None),
        Some(Err(err)) => (None, Some(err)),
        None => (None, None),
    };
    sink.json("simplex.json", &json!({ "covering": constants, "lemma": lemma }))?;
    failure.map_or(Ok(()), |err| Err(err.into()))
}

fn smallness(e: &SmallnessExperiment, n: &Numerics, sink: &mut Sink) -> Result<(), RunError> {
    let q = e.cube.build()?;
    let members = e.family.members::<f64>()?;
    let report = smallness_experiment(&members, &q, e.face, e.family.label(), &n.sup)?;
    let envelope = smallness_bound_check(&report, report.envelope_c, report.fitted_alpha)?;
    let mut t = Table::new(["parameter", "epsilon", "sup_half", "normalization", "envelope_slack"]);
    for (s, &slack) in report.samples.iter().zip(&envelope.slack) {
        t.push(vec![num(s.parameter), num(s.epsilon), num(s.sup_half), num(s.normalization), num(slack)]);
    }
    sink.csv("smallness.csv", &t)?;
    sink.json("smallness.json", &json!({ "report": report, "envelope": envelope }))?;
    plot(sink, "smallness.svg", &report.figure())
}

fn yau(e: &YauExperiment, seed: u64, sink: &mut Sink) -> Result<(), RunError> {
    let family = e
        .m_values
        .iter()
        .map(|&m| sin_torus(e.dim, m))
        .collect::<nodal_core::Result<Vec<Field64>>>()?;
    let cfg = MeasureConfig { method: e.method, depth: e.depth, lines: e.lines, seed };
    let fit = yau_scaling_fit(&family, &cfg)?;
    let mut t = Table::new(["m", "lambda", "volume", "error_indicator", "exact"]);
    for ((&m, &(l, v)), (est, f)) in e.m_values.iter().zip(&fit.points).zip(fit.estimates.iter().zip(&family)) {
        let exact = f.metadata().nodal_per_period.map_or_else(String::new, num);
        t.push(vec![m.to_string(), num(l), num(v), num(est.error_indicator), exact]);
    }
    sink.csv("yau.csv", &t)?;
    sink.json("yau.json", &fit)?;
    plot(sink, "yau.svg", &fit.figure())
}

fn exponent(e: &ExponentExperiment, seed: u64, sink: &mut Sink) -> Result<(), RunError> {
    let model = recursion_exponent(e.a, e.c)?;
    let mut t = Table::new(["j", "log_majorant", "log_power_bound", "holds_exact", "holds_float"]);
    for l in &model.levels {
        t.push(vec![
            l.j.to_string(),
            num(l.log_majorant),
            num(l.log_power_bound),
            l.holds_exact.to_string(),
            l.holds_float.to_string(),
        ]);
    }
    sink.csv("exponent.csv", &t)?;
    let mut trees = Vec::new();
    if let Some(spec) = &e.tree {
        let mut tt = Table::new(["seed", "level", "count", "bound", "chain_count", "chain_bound", "approximated"]);
        for r in 0..spec.runs {
            let sim = simulate_bad_cube_tree(spec.a0, spec.n, spec.depth, spec.j0, seed.wrapping_add(r), spec.policy)?;
            for l in &sim.levels {
                tt.push(vec![
                    sim.seed.to_string(),
                    l.level.to_string(),
                    l.count.to_string(),
                    num(l.bound),
                    l.chain_count.to_string(),
                    num(l.chain_bound),
                    l.approximated.to_string(),
                ]);
            }
            trees.push(sim);
        }
        sink.csv("exponent_tree.csv", &tt)?;
    }
    sink.json(
        "exponent.json",
        &json!({
            "a": model.a,
            "c": model.c,
            "alpha": model.alpha,
            "alpha_exact": model.alpha_exact,
            "all_levels_hold": model.all_levels_hold(),
            "majorant_monotone": model.majorant_monotone(),
            "trees_hold": trees.iter().all(|s| s.holds),
            "levels": model.levels,
            "trees": trees,
        }),
    )
}
