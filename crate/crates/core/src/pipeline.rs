//! End-to-end runs: abstraction, synthesis, determinization, partition and
//! the entropy bounds, plus the table sweeps behind `entrobound reproduce`.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::determinization::{coarse_partition, determinize, DetController, Determinizer, Partition, PartitionMode};
use crate::entropy_det::{self, CountMatrix, DetBound, LabeledDigraph, RightResolvingGraph};
use crate::entropy_unc::{self, UncBound, WeightedDigraph};
use crate::error::{Error, Result};
use crate::geometry::CoverMode;
use crate::synthesis::{forward_backward_domain, invariant_controller, Abstraction, MultiController};
use crate::systems::{builtin, pendulum, uncertain_linear, ProblemDef, BUILTIN_NAMES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    #[default]
    Det,
    Unc,
    Both,
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Det => "det",
            Pipeline::Unc => "unc",
            Pipeline::Both => "both",
        })
    }
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Pipeline::Det),
            "unc" => Ok(Pipeline::Unc),
            "both" => Ok(Pipeline::Both),
            _ => Err(Error::Config(format!("unknown pipeline `{s}`, expected det, unc or both"))),
        }
    }
}

impl Pipeline {
    fn det(self) -> bool {
        self != Pipeline::Unc
    }

    fn unc(self) -> bool {
        self != Pipeline::Det
    }
}

/// What to run. Unset fields fall back to the system file and the pipeline defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin name or path to a system TOML file.
    pub system: String,
    #[serde(default)]
    pub pipeline: Pipeline,
    pub eta_s: Option<Vec<f64>>,
    pub eta_i: Option<Vec<f64>>,
    pub tau: Option<usize>,
    pub determinizer: Option<Determinizer>,
    pub partition_mode: Option<PartitionMode>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default)]
    pub cover_mode: CoverMode,
}

impl RunConfig {
    pub fn new(system: &str, pipeline: Pipeline) -> Self {
        Self {
            system: system.to_string(),
            pipeline,
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }
}

pub fn load_problem(system: &str) -> Result<ProblemDef> {
    if BUILTIN_NAMES.contains(&system) {
        return builtin(system);
    }
    let path = Path::new(system);
    if path.exists() {
        return ProblemDef::from_file(path);
    }
    Err(Error::UnknownSystem(system.to_string()))
}

/// Fully resolved run parameters, as recorded in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub system: String,
    pub pipeline: Pipeline,
    pub eta_s: Vec<f64>,
    pub eta_i: Vec<f64>,
    pub tau: usize,
    pub determinizer: Determinizer,
    pub partition_mode: PartitionMode,
    pub seed: Option<u64>,
    pub cover_mode: CoverMode,
    pub sampling_time: Option<f64>,
}

impl Settings {
    pub fn resolve(problem: &ProblemDef, config: &RunConfig) -> Result<Self> {
        let pipeline = config.pipeline;
        let uncertain = problem.system.is_uncertain();
        if uncertain && pipeline.det() {
            return Err(Error::Config(format!(
                "`{}` is uncertain; use the unc pipeline",
                problem.name
            )));
        }
        let eta_s = match (&config.eta_s, config.full_scale, &problem.full_scale_eta_s) {
            (Some(e), _, _) => e.clone(),
            (None, true, Some(e)) => e.clone(),
            _ => problem.eta_s.clone(),
        };
        let eta_i = config.eta_i.clone().unwrap_or_else(|| problem.eta_i.clone());
        let tau = config.tau.unwrap_or(if pipeline.unc() { 1 } else { problem.tau });
        if pipeline.unc() && tau != 1 {
            return Err(Error::Config("the unc pipeline requires tau = 1".into()));
        }
        let determinizer = config.determinizer.unwrap_or(match pipeline {
            Pipeline::Unc => Determinizer::MinSucc,
            _ => Determinizer::MaxFreq,
        });
        if determinizer == Determinizer::MinSucc && tau != 1 {
            return Err(Error::Config("minsucc requires tau = 1".into()));
        }
        let partition_mode = config.partition_mode.unwrap_or(match pipeline {
            Pipeline::Unc => PartitionMode::ByCell,
            _ => PartitionMode::ByInput,
        });
        Ok(Self {
            system: problem.name.clone(),
            pipeline,
            eta_s,
            eta_i,
            tau,
            determinizer,
            partition_mode,
            seed: config.seed,
            cover_mode: config.cover_mode,
            sampling_time: problem.sampling_time(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub q_cells: usize,
    pub domain_cells: usize,
    pub partition_elements: usize,
    pub fixed_point_sweeps: usize,
    /// Domain size after each forward/backward alternation, when used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_backward: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetReport {
    pub h_ba: f64,
    /// `h_ba / tau`
    pub bound: f64,
    pub gamma_edges: usize,
    pub components: usize,
    pub nontrivial_components: usize,
    pub rr_nodes: usize,
    pub largest_component: Option<ComponentSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub cells: usize,
    pub rr_nodes: usize,
    pub rho: f64,
}

impl From<&DetBound> for DetReport {
    fn from(b: &DetBound) -> Self {
        Self {
            h_ba: b.h_ba,
            bound: b.bound,
            gamma_edges: b.gamma_edges,
            components: b.components,
            nontrivial_components: b.nontrivial.len(),
            rr_nodes: b.nontrivial.iter().map(|c| c.rr_nodes).sum(),
            largest_component: b.nontrivial.iter().max_by_key(|c| c.cells).map(|c| ComponentSummary {
                cells: c.cells,
                rr_nodes: c.rr_nodes,
                rho: c.rho,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncReport {
    pub w_star: f64,
    pub witness_cycle: Vec<u32>,
    pub nodes: usize,
    pub edges: usize,
    pub max_weight: f64,
}

impl From<&UncBound> for UncReport {
    fn from(b: &UncBound) -> Self {
        Self {
            w_star: b.w_star,
            witness_cycle: b.cycle.clone(),
            nodes: b.nodes,
            edges: b.edges,
            max_weight: b.max_weight,
        }
    }
}

/// Deterministic summary of a run; wall-clock times live in [`Timings`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub settings: Settings,
    pub empty_domain: bool,
    /// Bits per step: the smaller of the computed bounds.
    pub bound: Option<f64>,
    /// Bits per unit time, for sampled systems.
    pub bound_per_time: Option<f64>,
    pub theory: Option<f64>,
    pub sizes: Sizes,
    pub det: Option<DetReport>,
    pub unc: Option<UncReport>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<StageTime>,
    pub total_seconds: f64,
}

struct Clock {
    start: Instant,
    last: Instant,
    timings: Timings,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            timings: Timings::default(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.stages.push(StageTime {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }

    fn finish(mut self) -> Timings {
        self.timings.total_seconds = self.start.elapsed().as_secs_f64();
        self.timings
    }
}

/// Everything a run produced, for writing artifacts.
pub struct RunOutput {
    pub report: RunReport,
    pub timings: Timings,
    pub abstraction: Option<Abstraction>,
    pub controller: Option<MultiController>,
    pub det_controller: Option<DetController>,
    pub partition: Option<Partition>,
    pub gamma: Option<LabeledDigraph>,
    pub presentations: Vec<(RightResolvingGraph, CountMatrix)>,
    pub det_bound: Option<DetBound>,
    pub weighted: Option<WeightedDigraph>,
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let problem = load_problem(&config.system).map_err(Error::at("config"))?;
    let settings = Settings::resolve(&problem, config).map_err(Error::at("config"))?;
    execute(&problem, settings)
}

/// Runs the stages in order on an already loaded problem.
pub fn execute(problem: &ProblemDef, settings: Settings) -> Result<RunOutput> {
    let mut clock = Clock::new();
    let mut out = RunOutput {
        report: RunReport {
            theory: problem.theory,
            settings: settings.clone(),
            empty_domain: true,
            bound: None,
            bound_per_time: None,
            sizes: Sizes::default(),
            det: None,
            unc: None,
        },
        timings: Timings::default(),
        abstraction: None,
        controller: None,
        det_controller: None,
        partition: None,
        gamma: None,
        presentations: Vec::new(),
        det_bound: None,
        weighted: None,
    };
    let state_grid = problem.state_grid(&settings.eta_s).map_err(Error::at("abstraction"))?;
    let input_grid = problem.input_grid(&settings.eta_i).map_err(Error::at("abstraction"))?;

    let abs = if let Some(reverse) = &problem.reverse {
        let fb = forward_backward_domain(
            &problem.system,
            reverse,
            &problem.safe_set,
            &state_grid,
            &input_grid,
            settings.cover_mode,
        )
        .map_err(Error::at("domain"))?;
        out.report.sizes.forward_backward = Some(fb.sizes.clone());
        clock.lap("domain");
        if !fb.domain.iter().any(|&b| b) {
            out.timings = clock.finish();
            return Ok(out);
        }
        Abstraction::build_masked(
            &problem.system,
            fb.domain,
            state_grid,
            input_grid,
            settings.tau,
            settings.cover_mode,
        )
    } else {
        Abstraction::build(
            &problem.system,
            &problem.safe_set,
            state_grid,
            input_grid,
            settings.tau,
            settings.cover_mode,
        )
    };
    let abs = match abs {
        Ok(a) => a,
        Err(Error::EmptySafeSet) => {
            clock.lap("abstraction");
            out.timings = clock.finish();
            return Ok(out);
        }
        Err(e) => return Err(Error::at("abstraction")(e)),
    };
    out.report.sizes.q_cells = abs.q_cells().len();
    clock.lap("abstraction");

    let ctrl = invariant_controller(&abs);
    out.report.sizes.domain_cells = ctrl.len();
    out.report.sizes.fixed_point_sweeps = ctrl.sweeps();
    clock.lap("synthesis");
    if ctrl.is_empty() {
        out.abstraction = Some(abs);
        out.controller = Some(ctrl);
        out.timings = clock.finish();
        return Ok(out);
    }
    out.report.empty_domain = false;

    let d = determinize(settings.determinizer, &ctrl, &abs, settings.seed).map_err(Error::at("determinization"))?;
    clock.lap("determinization");
    let part = coarse_partition(&d, settings.partition_mode).map_err(Error::at("partition"))?;
    part.check(&d).map_err(Error::at("partition"))?;
    out.report.sizes.partition_elements = part.len();
    clock.lap("partition");

    let mut bounds = Vec::new();
    if settings.pipeline.det() {
        let a = entropy_det::analyze(&abs, &d, &part).map_err(Error::at("entropy-det"))?;
        bounds.push(a.bound.bound);
        out.report.det = Some(DetReport::from(&a.bound));
        out.gamma = Some(a.graph);
        out.presentations = a.presentations;
        out.det_bound = Some(a.bound);
        clock.lap("entropy-det");
    }
    if settings.pipeline.unc() {
        let g = entropy_unc::build_weighted_graph(&abs, &d, &part).map_err(Error::at("entropy-unc"))?;
        let b = entropy_unc::bound_of(&g).map_err(Error::at("entropy-unc"))?;
        bounds.push(b.w_star);
        out.report.unc = Some(UncReport::from(&b));
        out.weighted = Some(g);
        clock.lap("entropy-unc");
    }
    let bound = bounds.into_iter().fold(f64::INFINITY, f64::min);
    out.report.bound = Some(bound);
    out.report.bound_per_time = settings.sampling_time.map(|ts| bound / ts);
    out.abstraction = Some(abs);
    out.controller = Some(ctrl);
    out.det_controller = Some(d);
    out.partition = Some(part);
    out.timings = clock.finish();
    Ok(out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes report, timings, controller, partition, CSV and DOT files into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), out.report.to_json()? + "\n")?;
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&out.timings)? + "\n")?;
    if let Some(c) = &out.controller {
        let mut w = create(dir, "controller.txt")?;
        c.write_to(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &out.partition {
        let mut w = create(dir, "partition.csv")?;
        p.write_csv(&mut w)?;
        w.flush()?;
    }
    {
        let s = &out.report.settings;
        let mut w = create(dir, "bound.csv")?;
        writeln!(w, "system,pipeline,eta_s,tau,bound,bound_per_time,seconds")?;
        let eta: Vec<String> = s.eta_s.iter().map(f64::to_string).collect();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.system,
            s.pipeline,
            eta.join(" "),
            s.tau,
            opt(out.report.bound),
            opt(out.report.bound_per_time),
            out.timings.total_seconds
        )?;
        w.flush()?;
    }
    if let Some(g) = &out.gamma {
        let mut w = create(dir, "gamma.dot")?;
        g.write_dot(&mut w)?;
        w.flush()?;
        for (k, (rr, _)) in out.presentations.iter().enumerate() {
            let mut w = create(dir, &format!("gbar_{k}.dot"))?;
            rr.write_dot(g, &mut w)?;
            w.flush()?;
        }
    }
    if let Some(b) = &out.det_bound {
        let mut w = create(dir, "components.csv")?;
        entropy_det::write_components_csv(b, &mut w)?;
        w.flush()?;
    }
    if let Some(g) = &out.weighted {
        let mut w = create(dir, "weighted.dot")?;
        g.write_dot(&mut w)?;
        w.flush()?;
        let mut w = create(dir, "weights.csv")?;
        entropy_unc::write_weights_csv(g, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Graphs available to `export-dot`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DotGraph {
    Gamma,
    Gbar,
    Weighted,
    Partition,
}

impl FromStr for DotGraph {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(DotGraph::Gamma),
            "gbar" => Ok(DotGraph::Gbar),
            "weighted" => Ok(DotGraph::Weighted),
            "partition" => Ok(DotGraph::Partition),
            _ => Err(Error::Config(format!(
                "unknown graph `{s}`, expected gamma, gbar, weighted or partition"
            ))),
        }
    }
}

pub fn export_dot<W: Write>(out: &RunOutput, which: DotGraph, mut w: W) -> Result<()> {
    let missing = |what: &str| Error::Config(format!("this run produced no {what} graph"));
    match which {
        DotGraph::Gamma => out.gamma.as_ref().ok_or_else(|| missing("gamma"))?.write_dot(w),
        DotGraph::Gbar => {
            let g = out.gamma.as_ref().ok_or_else(|| missing("gbar"))?;
            if out.presentations.is_empty() {
                return Err(missing("gbar"));
            }
            for (rr, _) in &out.presentations {
                rr.write_dot(g, &mut w)?;
            }
            Ok(())
        }
        DotGraph::Weighted => out.weighted.as_ref().ok_or_else(|| missing("weighted"))?.write_dot(w),
        DotGraph::Partition => {
            let p = out.partition.as_ref().ok_or_else(|| missing("partition"))?;
            let abs = out.abstraction.as_ref().ok_or_else(|| missing("partition"))?;
            p.write_dot(abs.state_grid(), w)
        }
    }
}

pub const TABLES: [&str; 6] = ["ex1", "lin-tau", "pend-Ts", "pend-tau", "henon", "unc-eta"];

#[derive(Clone, Debug, Deserialize)]
struct ReferenceRow {
    table: String,
    row: String,
    reference: f64,
    theory: f64,
}

#[derive(Deserialize)]
struct ReferenceFile {
    row: Vec<ReferenceRow>,
}

fn references() -> Vec<ReferenceRow> {
    let file: ReferenceFile =
        toml::from_str(include_str!("../data/reference.toml")).expect("bundled reference table parses");
    file.row
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproRow {
    pub table: String,
    pub row: String,
    pub domain_cells: usize,
    pub elements: usize,
    /// Bits per step, or per unit time for sampled systems.
    pub bound: Option<f64>,
    pub reference: Option<f64>,
    pub theory: Option<f64>,
    pub note: String,
}

struct Case {
    row: String,
    problem: ProblemDef,
    config: RunConfig,
}

fn cases(table: &str, full_scale: bool) -> Result<Vec<Case>> {
    let case = |row: String, problem: ProblemDef, pipeline: Pipeline, tau: usize, det: Option<Determinizer>| Case {
        row,
        config: RunConfig {
            system: problem.name.clone(),
            pipeline,
            tau: Some(tau),
            determinizer: det,
            full_scale,
            ..RunConfig::default()
        },
        problem,
    };
    Ok(match table {
        "ex1" => vec![case("example1".into(), builtin("example1")?, Pipeline::Det, 1, None)],
        "lin-tau" => {
            let p = builtin("linear2d")?;
            (1..=3)
                .map(|t| case(format!("tau={t}"), p.clone(), Pipeline::Det, t, None))
                .collect()
        }
        "pend-Ts" => {
            let mut v = Vec::new();
            for ts in [0.8, 0.5, 0.1, 0.01, 0.001] {
                v.push(case(format!("rho=1 b=1 Ts={ts}"), pendulum(1.0, 1.0, ts), Pipeline::Det, 1, None));
            }
            for ts in [0.11, 0.1, 0.01, 0.001, 0.0001] {
                v.push(case(format!("rho=50 b=10 Ts={ts}"), pendulum(50.0, 10.0, ts), Pipeline::Det, 1, None));
            }
            v
        }
        "pend-tau" => {
            let top = if full_scale { 4 } else { 3 };
            (1..=top)
                .map(|t| case(format!("tau={t}"), pendulum(1.0, 1.0, 0.01), Pipeline::Det, t, None))
                .collect()
        }
        "henon" => {
            let p = builtin("henon")?;
            vec![
                case("det maxfreq".into(), p.clone(), Pipeline::Det, 1, Some(Determinizer::MaxFreq)),
                case("det minnorm".into(), p.clone(), Pipeline::Det, 1, Some(Determinizer::MinNorm)),
                case("unc minsucc".into(), p, Pipeline::Unc, 1, None),
            ]
        }
        "unc-eta" => [0.2, 0.1, 0.09, 0.06, 0.03]
            .into_iter()
            .map(|eta| case(format!("eta_s={eta}"), uncertain_linear(eta), Pipeline::Unc, 1, None))
            .collect(),
        other => {
            return Err(Error::Config(format!(
                "unknown table `{other}`, expected one of: {}",
                TABLES.join(", ")
            )))
        }
    })
}

/// Sweeps one table; each row carries our bound, the reference value and the
/// theoretical entropy (a lower bound for `unc-eta`).
pub fn reproduce(table: &str, full_scale: bool) -> Result<Vec<ReproRow>> {
    let refs = references();
    let mut rows = Vec::new();
    for c in cases(table, full_scale)? {
        let settings = Settings::resolve(&c.problem, &c.config)?;
        let out = execute(&c.problem, settings)?;
        let r = refs.iter().find(|r| r.table == table && r.row == c.row);
        let mut note = String::new();
        if out.report.empty_domain {
            note.push_str("empty domain");
        } else if table == "unc-eta" {
            note.push_str("theory column is a lower bound");
        }
        rows.push(ReproRow {
            table: table.to_string(),
            row: c.row,
            domain_cells: out.report.sizes.domain_cells,
            elements: out.report.sizes.partition_elements,
            bound: out.report.bound_per_time.or(out.report.bound),
            reference: r.map(|r| r.reference),
            theory: r.map(|r| r.theory),
            note,
        });
    }
    Ok(rows)
}

pub fn write_repro_csv<W: Write>(rows: &[ReproRow], mut w: W) -> Result<()> {
    writeln!(w, "table,row,domain_cells,elements,bound,reference,theory,note")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.table,
            r.row,
            r.domain_cells,
            r.elements,
            opt(r.bound),
            opt(r.reference),
            opt(r.theory),
            r.note
        )?;
    }
    Ok(())
}
