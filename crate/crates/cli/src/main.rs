use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entrobound_core::determinization::{Determinizer, PartitionMode};
use entrobound_core::geometry::CoverMode;
use entrobound_core::oracle::{expansion_check, karp_check, word_growth};
use entrobound_core::pipeline::{self, DotGraph, Pipeline, RunConfig, RunOutput};
use entrobound_core::synthesis::simulate_closed_loop;
use entrobound_core::Error;

/// Upper bounds on invariance entropy from grid abstractions.
#[derive(Parser)]
#[command(name = "entrobound", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "ENTROBOUND_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline on one system and write its artifacts.
    Run(RunArgs),
    /// Sweep one of the reference tables and print CSV.
    Reproduce {
        /// ex1, lin-tau, pend-Ts, pend-tau, henon or unc-eta
        table: String,
        /// Use the fine grids and the longest sequences.
        #[arg(long)]
        full_scale: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a pipeline and write one of its graphs as DOT.
    ExportDot {
        #[command(flatten)]
        run: RunArgs,
        /// gamma, gbar, weighted or partition
        #[arg(long, default_value = "gamma")]
        graph: DotGraph,
        /// Destination file (defaults to stdout).
        #[arg(short, long)]
        file: Option<PathBuf>,
    },
    /// Cross-check algorithms against brute force.
    Oracle {
        #[command(subcommand)]
        check: OracleCheck,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Builtin name (example1, linear2d, pendulum, henon, uncertain-linear) or system TOML file.
    system: Option<String>,
    /// Run configuration TOML; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pipeline: Option<Pipeline>,
    /// State grid spacing, one value per axis, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta_s: Option<Vec<f64>>,
    /// Input lattice spacing, comma separated.
    #[arg(long, value_delimiter = ',')]
    eta_i: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<usize>,
    /// maxfreq, minnorm or minsucc
    #[arg(long)]
    determinizer: Option<Determinizer>,
    /// by-input, by-input-connected or by-cell
    #[arg(long)]
    partition_mode: Option<PartitionMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// interior or closed
    #[arg(long)]
    cover_mode: Option<CoverMode>,
    #[arg(long)]
    full_scale: bool,
    /// Directory for report.json and the other artifacts.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.system {
            c.system = s.clone();
        }
        if c.system.is_empty() {
            return Err(Error::Config("no system given".into()));
        }
        if let Some(p) = self.pipeline {
            c.pipeline = p;
        }
        if self.eta_s.is_some() {
            c.eta_s = self.eta_s.clone();
        }
        if self.eta_i.is_some() {
            c.eta_i = self.eta_i.clone();
        }
        c.tau = self.tau.or(c.tau);
        c.determinizer = self.determinizer.or(c.determinizer);
        c.partition_mode = self.partition_mode.or(c.partition_mode);
        c.seed = self.seed.or(c.seed);
        if let Some(m) = self.cover_mode {
            c.cover_mode = m;
        }
        c.full_scale |= self.full_scale;
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir.clone();
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum OracleCheck {
    /// Compare log2 |W_{N+1}|/|W_N| with the spectral bound (at most 64 cells).
    Words {
        system: String,
        #[arg(long, default_value_t = 20)]
        length: usize,
    },
    /// Karp against simple-cycle enumeration on random graphs.
    Karp {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Minimal expansion number against the walk count on random instances.
    Expansion {
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 3)]
        elements: usize,
        #[arg(long, default_value_t = 3)]
        tau: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-loop simulation of the invariant controller.
    Simulate {
        system: String,
        #[arg(long, default_value_t = 1000)]
        trajectories: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn summary(out: &RunOutput) {
    let r = &out.report;
    let s = &r.settings;
    println!("system        {}", s.system);
    println!("pipeline      {}", s.pipeline);
    println!("Q cells       {}", r.sizes.q_cells);
    println!("domain cells  {}", r.sizes.domain_cells);
    if r.empty_domain {
        println!("bound         none (empty controller domain)");
        return;
    }
    println!("elements      {}", r.sizes.partition_elements);
    if let Some(d) = &r.det {
        println!("h(B,A)        {:.6}", d.h_ba);
        println!("components    {} ({} nontrivial)", d.components, d.nontrivial_components);
        println!("Gbar nodes    {}", d.rr_nodes);
    }
    if let Some(u) = &r.unc {
        println!("w*            {:.6}", u.w_star);
        println!("graph         {} nodes, {} edges", u.nodes, u.edges);
    }
    if let Some(b) = r.bound {
        println!("bound         {b:.6} bits/step");
    }
    if let Some(b) = r.bound_per_time {
        println!("bound         {b:.6} bits/time");
    }
    if let Some(t) = r.theory {
        println!("theory        {t:.6}");
    }
    println!("time          {:.3} s", out.timings.total_seconds);
}

fn exit_for(out: &RunOutput) -> ExitCode {
    if out.report.empty_domain {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn pass(ok: bool) -> ExitCode {
    println!("{}", if ok { "PASS" } else { "FAIL" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn oracle(check: OracleCheck) -> Result<ExitCode, Error> {
    match check {
        OracleCheck::Words { system, length } => {
            let out = pipeline::run(&RunConfig::new(&system, Pipeline::Det))?;
            let (Some(g), Some(d)) = (&out.gamma, &out.report.det) else {
                println!("empty controller domain");
                return Ok(ExitCode::from(2));
            };
            let growth = word_growth(g, length)?;
            let diff = (growth - d.h_ba).abs();
            println!("h(B,A) {:.6}  word growth {growth:.6}  difference {diff:.6}", d.h_ba);
            Ok(pass(diff <= 0.05))
        }
        OracleCheck::Karp { cases, nodes, seed } => {
            let r = karp_check(cases, nodes, seed)?;
            println!("{} cases, {} failures, max error {:e}", r.cases, r.failures, r.max_error);
            Ok(pass(r.passed()))
        }
        OracleCheck::Expansion {
            cases,
            elements,
            tau,
            seed,
        } => {
            let r = expansion_check(cases, elements, tau, seed)?;
            println!("{} cases, {} failures", r.cases, r.failures);
            Ok(pass(r.passed()))
        }
        OracleCheck::Simulate {
            system,
            trajectories,
            steps,
            seed,
        } => {
            let problem = pipeline::load_problem(&system)?;
            let pipe = if problem.system.is_uncertain() { Pipeline::Unc } else { Pipeline::Det };
            let out = pipeline::run(&RunConfig::new(&system, pipe))?;
            let (Some(abs), Some(ctrl)) = (&out.abstraction, &out.controller) else {
                println!("empty controller domain");
                return Ok(ExitCode::from(2));
            };
            if ctrl.is_empty() {
                println!("empty controller domain");
                return Ok(ExitCode::from(2));
            }
            let r = simulate_closed_loop(&problem.system, &problem.safe_set, abs, ctrl, trajectories, steps, seed)?;
            println!("{} trajectories x {} steps, {} violations", r.trajectories, r.steps, r.violations);
            Ok(pass(r.violations == 0))
        }
    }
}

fn main_inner(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(args) => {
            let config = args.config()?;
            let out = pipeline::run(&config)?;
            if let Some(dir) = &config.output_dir {
                pipeline::write_artifacts(&out, dir)?;
            }
            summary(&out);
            Ok(exit_for(&out))
        }
        Command::Reproduce {
            table,
            full_scale,
            output: path,
        } => {
            let rows = pipeline::reproduce(&table, full_scale)?;
            let mut w = output(&path)?;
            pipeline::write_repro_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportDot { run, graph, file } => {
            let out = pipeline::run(&run.config()?)?;
            if out.report.empty_domain {
                eprintln!("empty controller domain, nothing to export");
                return Ok(ExitCode::from(2));
            }
            let mut w = output(&file)?;
            pipeline::export_dot(&out, graph, &mut w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { check } => oracle(check),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match main_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
