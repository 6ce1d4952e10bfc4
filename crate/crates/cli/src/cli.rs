//! Argument parsing and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::{ArrayKind, Experiment, ExperimentConfig, SolverKind};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    decompose, doa_demo, exact_bench, generate, jbss_bench, rmax_table, sidecar, write_rmax_csv,
    write_solution,
};
use crate::report::write_csv;

/// DC-CPD experiment harness. Settings come from `--config` and are then
/// overridden by individual flags.
#[derive(Debug, Parser)]
#[command(name = "dccpd", version)]
pub struct Args {
    /// Experiment to run; overrides the config file.
    #[arg(value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output file; standard output when absent (CSV reports only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub threads: Option<usize>,

    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "r")]
    pub r: Option<usize>,
    #[arg(long = "m")]
    pub m: Option<usize>,
    #[arg(long = "l")]
    pub l: Option<usize>,
    #[arg(long = "t")]
    pub t: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "p")]
    pub p: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Option<Vec<SolverKind>>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Forces the rank instead of detecting it.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub nonsymmetric: bool,

    #[arg(long, value_enum)]
    pub array: Option<ArrayKind>,
    #[arg(long)]
    pub sensors: Option<usize>,
    /// Source directions as `azimuth:elevation` pairs in degrees.
    #[arg(long, value_delimiter = ',', value_parser = parse_direction)]
    pub sources: Option<Vec<[f64; 2]>>,
    #[arg(long)]
    pub samples_per_bin: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub fft_len: Option<usize>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub first_bin: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub speed: Option<f64>,
}

fn parse_direction(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected azimuth:elevation, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl Args {
    /// Configuration after loading `--config` and applying every flag.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        set!(c.experiment, self.experiment);
        set!(c.seed, self.seed);
        set!(c.runs, self.runs);
        if self.out.is_some() {
            c.output_path = self.out.clone();
        }
        set!(c.n, self.n);
        set!(c.r, self.r);
        set!(c.m, self.m);
        set!(c.l, self.l);
        if self.t.is_some() {
            c.t = self.t;
        }
        set!(c.alpha, self.alpha);
        set!(c.p, self.p);
        set!(c.snr_db_list, self.snr_db.clone());
        set!(c.solvers, self.solvers.clone());
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.rank.is_some() {
            c.rank = self.rank;
        }
        set!(c.n_list, self.n_list.clone());
        set!(c.trials, self.trials);
        set!(c.max_iter, self.max_iter);
        if self.rel_tol.is_some() {
            c.rel_tol = self.rel_tol;
        }
        c.nonsymmetric |= self.nonsymmetric;
        let d = &mut c.doa;
        set!(d.array, self.array);
        set!(d.sensors, self.sensors);
        set!(d.sources, self.sources.clone());
        set!(d.samples_per_bin, self.samples_per_bin);
        set!(d.segments, self.segments);
        set!(d.frame_len, self.frame_len);
        set!(d.fft_len, self.fft_len);
        set!(d.sample_rate, self.sample_rate);
        set!(d.first_bin, self.first_bin);
        set!(d.bins, self.bins);
        set!(d.speed, self.speed);
        c.validate()?;
        Ok(c)
    }
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn require_out(cfg: &ExperimentConfig) -> CliResult<&Path> {
    cfg.output_path
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("{} needs --out", cfg.experiment.name())))
}

/// Runs one resolved configuration and writes its outputs.
pub fn execute(cfg: &ExperimentConfig) -> CliResult<()> {
    let out = cfg.output_path.as_deref();
    match cfg.experiment {
        Experiment::Exact => write_csv(open_out(out)?, &exact_bench(cfg)?),
        Experiment::Jbss => write_csv(open_out(out)?, &jbss_bench(cfg)?),
        Experiment::Rmax => {
            let rows = rmax_table(cfg)?;
            for r in rows.iter().filter(|r| !r.matches) {
                eprintln!(
                    "warning: N={} gives R_max={} but the reference is {:?}",
                    r.n, r.rmax, r.reference_dccpd
                );
            }
            write_rmax_csv(open_out(out)?, &rows)
        }
        Experiment::Doa => {
            let (rows, report) = doa_demo(cfg)?;
            let path = require_out(cfg)?;
            write_csv(open_out(Some(path))?, &rows)?;
            Ok(dccpd::io::write_json(&sidecar(path, "doa.json"), &report)?)
        }
        Experiment::Decompose => {
            let path = require_out(cfg)?;
            let (sol, report) = decompose(cfg)?;
            write_solution(path, &sol)?;
            Ok(dccpd::io::write_json(
                &sidecar(path, "report.json"),
                &report,
            )?)
        }
        Experiment::Generate => {
            let path = require_out(cfg)?;
            Ok(dccpd::io::write_json(path, &generate(cfg)?)?)
        }
    }
}

pub fn run(args: &Args) -> CliResult<()> {
    let cfg = args.resolve()?;
    match args.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
            pool.install(|| execute(&cfg))
        }
        None => execute(&cfg),
    }
}
