//! Experiment configuration: TOML schema, defaults, validation and line lookup.

use std::collections::BTreeSet;

use nodal_core::census::{CensusConfig, SpawnPolicy, MAX_TREE_DEPTH};
use nodal_core::fields::{Field, FieldLimits};
use nodal_core::geom::{regular_simplex_relative_width, Cube};
use nodal_core::growth::{CubeGrid, SupConfig};
use nodal_core::nodal::{NodalMethod, MAX_MARCHING_DEPTH_2D, MAX_MARCHING_DEPTH_3D, MIN_CROFTON_LINES};
use nodal_core::quadrature::QuadratureConfig;
use nodal_core::smallness::{Face, Family, MIN_MEMBERS};
use nodal_core::Cube64;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by stochastic experiments unless given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub numerics: Numerics,
    pub experiment: Experiment,
}

/// Numerical knobs shared by all experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub quadrature: QuadratureConfig,
    pub sup: SupConfig,
    pub grid: CubeGrid,
    pub census: CensusConfig,
    /// Index floor `N₀` below which growth statements are not asserted.
    pub index_floor: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            quadrature: QuadratureConfig::default(),
            sup: SupConfig::default(),
            grid: CubeGrid::default(),
            census: CensusConfig::default(),
            index_floor: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Freq(FreqExperiment),
    Doubling(DoublingExperiment),
    Nodal(NodalExperiment),
    Census(CensusExperiment),
    Simplex(SimplexExperiment),
    Smallness(SmallnessExperiment),
    Yau(YauExperiment),
    Exponent(ExponentExperiment),
}

/// Subcommands, one per experiment kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Freq,
    Doubling,
    Nodal,
    Census,
    Simplex,
    Smallness,
    Yau,
    Exponent,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Freq => "freq",
            Command::Doubling => "doubling",
            Command::Nodal => "nodal",
            Command::Census => "census",
            Command::Simplex => "simplex",
            Command::Smallness => "smallness",
            Command::Yau => "yau",
            Command::Exponent => "exponent",
        }
    }
}

impl Experiment {
    pub fn command(&self) -> Command {
        match self {
            Experiment::Freq(_) => Command::Freq,
            Experiment::Doubling(_) => Command::Doubling,
            Experiment::Nodal(_) => Command::Nodal,
            Experiment::Census(_) => Command::Census,
            Experiment::Simplex(_) => Command::Simplex,
            Experiment::Smallness(_) => Command::Smallness,
            Experiment::Yau(_) => Command::Yau,
            Experiment::Exponent(_) => Command::Exponent,
        }
    }

    /// Whether outputs depend on a random seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Experiment::Nodal(e) => e.methods.contains(&NodalMethod::Crofton) || e.cube.center.len() > 3,
            Experiment::Simplex(e) => e.shape_samples > 0,
            Experiment::Yau(e) => e.method == NodalMethod::Crofton || e.dim > 3,
            Experiment::Exponent(e) => e.tree.as_ref().is_some_and(|t| t.policy == SpawnPolicy::Uniform),
            _ => false,
        }
    }
}

/// Cube `center ± half_side`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeSpec {
    pub center: Vec<f64>,
    pub half_side: f64,
}

impl CubeSpec {
    pub fn build(&self) -> nodal_core::Result<Cube64> {
        Cube::new(self.center.clone(), self.half_side)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqExperiment {
    pub field: Field<f64>,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingExperiment {
    pub field: Field<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Also sample the cube index `N(Q)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cube: Option<CubeSpec>,
}

fn both_methods() -> Vec<NodalMethod> {
    vec![NodalMethod::Marching, NodalMethod::Crofton]
}

fn default_depth() -> u32 {
    8
}

fn default_lines() -> u64 {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodalExperiment {
    pub field: Field<f64>,
    pub cube: CubeSpec,
    #[serde(default = "both_methods")]
    pub methods: Vec<NodalMethod>,
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default = "default_lines")]
    pub lines: u64,
    /// Draw the marching segments (planar fields only).
    #[serde(default)]
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CensusRule {
    /// `A^n` subcubes against `max(N(Q)/(1+c), N₀)`.
    Subcube { a: usize, c: f64 },
    /// Middle layer of `A₁^n` subcubes against `level / 2`.
    Hyperplane { a1: usize, level: f64, epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusExperiment {
    pub field: Field<f64>,
    pub cube: CubeSpec,
    pub rule: CensusRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSpec {
    pub field: Field<f64>,
    pub vertices: Vec<Vec<f64>>,
    /// Vertex index level `N`.
    pub level: f64,
    pub c: f64,
    pub k: f64,
    pub big_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexExperiment {
    /// Relative width floor.
    pub a: f64,
    pub dim: usize,
    /// Random simplices with `w(S) ≥ a` in addition to the regular one.
    #[serde(default)]
    pub shape_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaSpec>,
}

fn bottom_face() -> Face {
    Face { axis: 1, upper: false }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallnessExperiment {
    pub family: Family,
    pub cube: CubeSpec,
    #[serde(default = "bottom_face")]
    pub face: Face,
}

fn marching() -> NodalMethod {
    NodalMethod::Marching
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YauExperiment {
    pub dim: usize,
    /// Mode numbers `m₀` of `sin(m₀x₁)⋯sin(m₀xₙ)`.
    pub m_values: Vec<i64>,
    #[serde(default = "marching")]
    pub method: NodalMethod,
    #[serde(default = "default_depth")]
    pub depth: u32,
    #[serde(default = "default_lines")]
    pub lines: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub a0: u64,
    pub n: usize,
    pub depth: u32,
    #[serde(default)]
    pub j0: u32,
    pub policy: SpawnPolicy,
    /// Independent runs with seeds `seed, seed + 1, ...`.
    #[serde(default = "one")]
    pub runs: u64,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentExperiment {
    pub a: u64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSpec>,
}

impl ExperimentConfig {
    /// Parses TOML and validates, with line numbers taken from `src`.
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| refine_line(src, s, e.message()));
            let field = line.map_or_else(String::new, |l| table_at_line(src, l));
            ConfigError {
                field: if field.is_empty() { "<root>".into() } else { field },
                line,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = locate(src, &e.field);
            e
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    /// Applies a command-line seed and enforces the seed requirement.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        if seed_override.is_some() {
            self.seed = seed_override;
        }
        if self.experiment.is_stochastic() && self.seed.is_none() {
            return Err(ConfigError::new(
                "seed",
                "this experiment is stochastic; set `seed` in the config or pass --seed",
            ));
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.numerics.validate()?;
        self.experiment.validate()
    }
}

type Check = Result<(), ConfigError>;

fn ensure(ok: bool, field: &str, message: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, message()))
    }
}

fn positive_usize(v: usize, field: &str) -> Check {
    ensure(v > 0, field, || "must be positive".into())
}

fn positive_f64(v: f64, field: &str) -> Check {
    ensure(v > 0.0 && v.is_finite(), field, || format!("must be positive and finite, got {v}"))
}

impl Numerics {
    pub fn validate(&self) -> Check {
        let q = &self.quadrature;
        positive_usize(q.circle_nodes, "numerics.quadrature.circle_nodes")?;
        positive_usize(q.polar_nodes, "numerics.quadrature.polar_nodes")?;
        positive_usize(q.azimuth_nodes, "numerics.quadrature.azimuth_nodes")?;
        positive_usize(q.extra_polar_nodes, "numerics.quadrature.extra_polar_nodes")?;
        validate_sup(&self.sup, "numerics.sup")?;
        validate_grid(&self.grid, "numerics.grid")?;
        validate_sup(&self.census.sup, "numerics.census.sup")?;
        validate_grid(&self.census.grid, "numerics.census.grid")?;
        positive_f64(self.index_floor, "numerics.index_floor")
    }
}

fn validate_sup(s: &SupConfig, at: &str) -> Check {
    positive_usize(s.lattice_per_axis, &format!("{at}.lattice_per_axis"))?;
    positive_usize(s.max_lattice_points, &format!("{at}.max_lattice_points"))?;
    positive_usize(s.max_refine_starts, &format!("{at}.max_refine_starts"))?;
    positive_usize(s.ascent_iterations, &format!("{at}.ascent_iterations"))?;
    ensure(s.refine_fraction > 0.0 && s.refine_fraction <= 1.0, &format!("{at}.refine_fraction"), || {
        format!("must lie in (0, 1], got {}", s.refine_fraction)
    })
}

fn validate_grid(g: &CubeGrid, at: &str) -> Check {
    positive_usize(g.centers_per_axis, &format!("{at}.centers_per_axis"))?;
    positive_usize(g.radii_count, &format!("{at}.radii_count"))?;
    ensure(
        g.min_radius_fraction > 0.0 && g.min_radius_fraction < 1.0,
        &format!("{at}.min_radius_fraction"),
        || format!("must lie in (0, 1), got {}", g.min_radius_fraction),
    )
}

fn validate_field(f: &Field<f64>, at: &str) -> Check {
    f.validate(&FieldLimits::default()).map_err(|e| ConfigError::new(at, e.to_string()))
}

fn validate_point(p: &[f64], dim: usize, at: &str) -> Check {
    ensure(p.len() == dim, at, || format!("needs {dim} coordinates, got {}", p.len()))?;
    ensure(p.iter().all(|v| v.is_finite()), at, || "coordinates must be finite".into())
}

fn validate_cube(c: &CubeSpec, dim: usize, at: &str) -> Check {
    validate_point(&c.center, dim, &format!("{at}.center"))?;
    positive_f64(c.half_side, &format!("{at}.half_side"))
}

fn validate_radii(radii: &[f64], at: &str) -> Check {
    ensure(!radii.is_empty(), at, || "must list at least one radius".into())?;
    for (i, &r) in radii.iter().enumerate() {
        positive_f64(r, &format!("{at}[{i}]"))?;
    }
    ensure(radii.windows(2).all(|w| w[0] < w[1]), at, || "must be strictly increasing".into())
}

fn validate_depth(depth: u32, dim: usize, at: &str) -> Check {
    let cap = if dim == 2 { MAX_MARCHING_DEPTH_2D } else { MAX_MARCHING_DEPTH_3D };
    ensure(depth >= 1 && depth <= cap, at, || format!("must lie in 1..={cap} for dimension {dim}, got {depth}"))
}

fn validate_lines(lines: u64, at: &str) -> Check {
    ensure(lines >= MIN_CROFTON_LINES, at, || format!("must be at least {MIN_CROFTON_LINES}, got {lines}"))
}

impl Experiment {
    pub fn validate(&self) -> Check {
        match self {
            Experiment::Freq(e) => {
                validate_field(&e.field, "experiment.field")?;
                if let Some(c) = &e.center {
                    validate_point(c, e.field.dim(), "experiment.center")?;
                }
                validate_radii(&e.radii, "experiment.radii")
            }
            Experiment::Doubling(e) => {
                validate_field(&e.field, "experiment.field")?;
                if let Some(c) = &e.center {
                    validate_point(c, e.field.dim(), "experiment.center")?;
                }
                validate_radii(&e.radii, "experiment.radii")?;
                if let Some(q) = &e.cube {
                    validate_cube(q, e.field.dim(), "experiment.cube")?;
                }
                Ok(())
            }
            Experiment::Nodal(e) => {
                validate_field(&e.field, "experiment.field")?;
                let n = e.field.dim();
                ensure(n >= 2, "experiment.field", || "nodal measures need dimension >= 2".into())?;
                validate_cube(&e.cube, n, "experiment.cube")?;
                ensure(!e.methods.is_empty(), "experiment.methods", || "must name at least one estimator".into())?;
                let distinct: BTreeSet<_> = e.methods.iter().map(|m| *m as u8).collect();
                ensure(distinct.len() == e.methods.len(), "experiment.methods", || "must not repeat".into())?;
                if e.methods.contains(&NodalMethod::Marching) {
                    ensure(n <= 3, "experiment.methods", || "marching supports dimensions 2 and 3 only".into())?;
                    validate_depth(e.depth, n, "experiment.depth")?;
                }
                if e.methods.contains(&NodalMethod::Crofton) {
                    validate_lines(e.lines, "experiment.lines")?;
                }
                Ok(())
            }
            Experiment::Census(e) => {
                validate_field(&e.field, "experiment.field")?;
                validate_cube(&e.cube, e.field.dim(), "experiment.cube")?;
                match &e.rule {
                    CensusRule::Subcube { a, c } => {
                        ensure(*a >= 2, "experiment.rule.a", || format!("must be at least 2, got {a}"))?;
                        positive_f64(*c, "experiment.rule.c")
                    }
                    CensusRule::Hyperplane { a1, level, epsilon } => {
                        ensure(*a1 >= 3 && a1 % 2 == 1, "experiment.rule.a1", || {
                            format!("must be odd and at least 3, got {a1}")
                        })?;
                        positive_f64(*level, "experiment.rule.level")?;
                        positive_f64(*epsilon, "experiment.rule.epsilon")
                    }
                }
            }
            Experiment::Simplex(e) => {
                ensure(e.dim >= 2, "experiment.dim", || format!("must be at least 2, got {}", e.dim))?;
                let w = regular_simplex_relative_width(e.dim);
                ensure(e.a > 0.0 && e.a <= w + 1e-12, "experiment.a", || {
                    format!("must lie in (0, {w}] for dimension {}, got {}", e.dim, e.a)
                })?;
                if let Some(l) = &e.lemma {
                    validate_field(&l.field, "experiment.lemma.field")?;
                    ensure(l.field.dim() == e.dim, "experiment.lemma.field", || {
                        format!("dimension {} does not match experiment.dim = {}", l.field.dim(), e.dim)
                    })?;
                    ensure(l.vertices.len() == e.dim + 1, "experiment.lemma.vertices", || {
                        format!("needs {} vertices, got {}", e.dim + 1, l.vertices.len())
                    })?;
                    for (i, v) in l.vertices.iter().enumerate() {
                        validate_point(v, e.dim, &format!("experiment.lemma.vertices[{i}]"))?;
                    }
                    positive_f64(l.level, "experiment.lemma.level")?;
                    positive_f64(l.c, "experiment.lemma.c")?;
                    positive_f64(l.k, "experiment.lemma.k")?;
                    positive_f64(l.big_c, "experiment.lemma.big_c")?;
                }
                Ok(())
            }
            Experiment::Smallness(e) => {
                let count = match &e.family {
                    Family::Sinh { k_values } => {
                        for (i, &k) in k_values.iter().enumerate() {
                            positive_f64(k, &format!("experiment.family.k_values[{i}]"))?;
                        }
                        k_values.len()
                    }
                    Family::HarmonicIm { degrees } => {
                        let cap = FieldLimits::default().max_degree;
                        ensure(degrees.iter().all(|&d| d >= 1 && d <= cap), "experiment.family.degrees", || {
                            format!("degrees must lie in 1..={cap}")
                        })?;
                        degrees.len()
                    }
                };
                let field = if matches!(e.family, Family::Sinh { .. }) { "k_values" } else { "degrees" };
                ensure(count >= MIN_MEMBERS, &format!("experiment.family.{field}"), || {
                    format!("needs at least {MIN_MEMBERS} members, got {count}")
                })?;
                validate_cube(&e.cube, 2, "experiment.cube")?;
                ensure(e.face.axis < 2, "experiment.face.axis", || format!("must be 0 or 1, got {}", e.face.axis))
            }
            Experiment::Yau(e) => {
                ensure(e.dim >= 2, "experiment.dim", || format!("must be at least 2, got {}", e.dim))?;
                ensure(e.m_values.len() >= 4, "experiment.m_values", || {
                    format!("needs at least 4 mode numbers, got {}", e.m_values.len())
                })?;
                let cap = FieldLimits::default().max_degree as i64;
                ensure(e.m_values.iter().all(|&m| m >= 1 && m <= cap), "experiment.m_values", || {
                    format!("mode numbers must lie in 1..={cap}")
                })?;
                let distinct: BTreeSet<_> = e.m_values.iter().collect();
                ensure(distinct.len() == e.m_values.len(), "experiment.m_values", || "must be distinct".into())?;
                let lo = *e.m_values.iter().min().unwrap_or(&1) as f64;
                let hi = *e.m_values.iter().max().unwrap_or(&1) as f64;
                ensure(hi * hi >= 8.0 * lo * lo, "experiment.m_values", || {
                    "eigenvalues must span a factor of at least 8".into()
                })?;
                if e.method == NodalMethod::Marching && e.dim <= 3 {
                    validate_depth(e.depth, e.dim, "experiment.depth")?;
                } else {
                    validate_lines(e.lines, "experiment.lines")?;
                }
                Ok(())
            }
            Experiment::Exponent(e) => {
                ensure(e.a >= 2, "experiment.a", || format!("must be at least 2, got {}", e.a))?;
                positive_f64(e.c, "experiment.c")?;
                ensure(e.c < 4.0 * e.a as f64 - 1.0, "experiment.c", || {
                    format!("must be below 4A - 1 = {} so that alpha > 1", 4 * e.a - 1)
                })?;
                if let Some(t) = &e.tree {
                    ensure(t.a0 >= 1, "experiment.tree.a0", || "must be positive".into())?;
                    ensure(t.n >= 2, "experiment.tree.n", || format!("must be at least 2, got {}", t.n))?;
                    ensure(t.depth >= 1 && t.depth <= MAX_TREE_DEPTH, "experiment.tree.depth", || {
                        format!("must lie in 1..={MAX_TREE_DEPTH}, got {}", t.depth)
                    })?;
                    ensure(t.j0 <= t.depth, "experiment.tree.j0", || "must not exceed depth".into())?;
                    ensure(t.runs >= 1, "experiment.tree.runs", || "must be positive".into())?;
                }
                Ok(())
            }
        }
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of a parse error. Errors inside tagged tables are reported against the
/// whole table, so look inside its span for the token the message names.
fn refine_line(src: &str, span: std::ops::Range<usize>, message: &str) -> usize {
    let first = line_of_offset(src, span.start);
    let Some(token) = message.split(['`', '"']).nth(1).filter(|t| !t.is_empty()) else {
        return first;
    };
    let scope = table_at_line(src, first);
    let mut table = scope.clone();
    for (i, raw) in src.lines().enumerate().skip(first - 1) {
        if let Some(h) = header(raw) {
            table = h;
            continue;
        }
        let nested = table == scope || table.starts_with(&format!("{scope}."));
        let hit = strip_comment(raw).split_once('=').is_some_and(|(k, v)| {
            let v = v.trim();
            k.trim() == token || v == token || v.contains(&format!("\"{token}\""))
        });
        if nested && hit {
            return i + 1;
        }
    }
    first
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn header(line: &str) -> Option<String> {
    let l = strip_comment(line);
    l.starts_with('[').then(|| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

/// Innermost table header in force on `line` (1-based).
fn table_at_line(src: &str, line: usize) -> String {
    src.lines().take(line).filter_map(header).last().unwrap_or_default()
}

/// Source line defining the dotted `path`, falling back to its enclosing table.
pub fn locate(src: &str, path: &str) -> Option<usize> {
    let path: String = {
        let mut out = String::new();
        let mut depth = 0;
        for ch in path.chars() {
            match ch {
                '[' => depth += 1,
                ']' => depth -= 1,
                _ if depth == 0 => out.push(ch),
                _ => {}
            }
        }
        out
    };
    let parent = path.rsplit_once('.').map_or("", |(p, _)| p);
    let mut table = String::new();
    let mut parent_line = None;
    for (i, raw) in src.lines().enumerate() {
        if let Some(h) = header(raw) {
            if h == path {
                return Some(i + 1);
            }
            if h == parent && parent_line.is_none() {
                parent_line = Some(i + 1);
            }
            table = h;
            continue;
        }
        if let Some((key, _)) = strip_comment(raw).split_once('=') {
            let key = key.trim().trim_matches('"');
            let full = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
            // Inline tables define nested paths on the same line.
            if full == path || path.starts_with(&format!("{full}.")) {
                return Some(i + 1);
            }
        }
    }
    parent_line
}
