use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use topocause::estimands::{effect_report, freeze_landscape_config, EffectValue};
use topocause::experiments::{
    emit_figure1_data, run_delta_sweep, run_noncommutation_demo, run_table1, with_jobs,
    ExperimentConfig,
};
use topocause::filtration::summarize;
use topocause::landscape::{DEFAULT_LANDSCAPE_NODES, DEFAULT_LAYERS};
use topocause::synth::{draw_observational_2d, Design1D, SeededRng};
use topocause::{
    DiagramMetric, GridSpec, InfiniteBarPolicy, LandscapeConfig, ObservationalSample, PointCloud,
    SummaryConfig, SummaryKind,
};

mod settings;

use settings::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "topocause", version, about = "Topological treatment effects on outcome distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adjusted topological and mean effects across mixture separations (no confounding).
    Sweep(Common),
    /// Confounded observational comparison: mean and topological contrasts vs. benchmark.
    Table1(Common),
    /// Analytic 1D densities and density-superlevel diagrams of the motivating example.
    Fig1(Common),
    /// Pooled-versus-averaged control landscapes (mixture non-commutation).
    Noncommute(Common),
    /// Persistence diagram of a CSV point cloud (columns y1..yp).
    Ph(Common),
    /// All estimators on a CSV observational sample (columns t,z,y1..yp).
    Effect(Common),
    /// Draw an observational sample from the confounded 2D design.
    Sample(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Input CSV for `ph` and `effect`.
    input: Option<PathBuf>,
    /// key = value file mirroring the flags below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Sample size: per arm (sweep), per replication (table1, sample),
    /// per cell (noncommute), per arm draw (fig1).
    #[arg(long)]
    n: Option<usize>,
    /// Mixture separation; a comma-separated list for `sweep`.
    #[arg(long)]
    delta: Option<String>,
    /// `bottleneck` or `wasserstein:p`.
    #[arg(long)]
    metric: Option<DiagramMetric>,
    /// `vr0`, `kde[:bandwidth]` or `dtm:m0`.
    #[arg(long)]
    summary: Option<SummaryKind>,
    /// Landscape layers K.
    #[arg(long)]
    layers: Option<usize>,
    /// `lo:hi:n`. Landscape grid for experiments and `effect`; evaluation
    /// grid for `fig1`; filtration grid for 1D summaries in `ph`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; output is identical for any value.
    #[arg(long)]
    jobs: Option<usize>,
    /// Benchmark points per arm per stratum (table1).
    #[arg(long)]
    n_big: Option<usize>,
    /// Benchmark replications (table1).
    #[arg(long)]
    gt_reps: Option<usize>,
    /// Essential-class handling: `drop` or `cap:<level>`.
    #[arg(long)]
    essential: Option<InfiniteBarPolicy>,
    /// noncommute: put both strata at the same center.
    #[arg(long)]
    same_centers: bool,
    /// sample: append both potential outcomes per unit.
    #[arg(long)]
    with_counterfactuals: bool,
}

#[derive(Clone, Copy, Debug)]
enum Task {
    Sweep,
    Table1,
    Fig1,
    Noncommute,
    Ph,
    Effect,
    Sample,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

/// Flags merged with the optional config file.
struct Resolved {
    raw: Common,
    file: ConfigFile,
}

impl Resolved {
    fn new(raw: Common) -> Result<Self> {
        let file = match &raw.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self { raw, file })
    }

    fn seed(&self) -> Result<Option<u64>> {
        self.file.pick(self.raw.seed, "seed")
    }
    fn reps(&self) -> Result<Option<usize>> {
        self.file.pick(self.raw.reps, "reps")
    }
    fn n(&self) -> Result<Option<usize>> {
        self.file.pick(self.raw.n, "n")
    }
    fn delta(&self) -> Result<Option<String>> {
        self.file.pick(self.raw.delta.clone(), "delta")
    }
    fn metric(&self) -> Result<Option<DiagramMetric>> {
        self.file.pick(self.raw.metric, "metric")
    }
    fn summary(&self) -> Result<Option<SummaryKind>> {
        self.file.pick(self.raw.summary, "summary")
    }
    fn layers(&self) -> Result<Option<usize>> {
        self.file.pick(self.raw.layers, "layers")
    }
    fn grid(&self) -> Result<Option<GridSpec>> {
        self.file.pick(self.raw.grid, "grid")
    }
    fn out(&self) -> Result<Option<PathBuf>> {
        self.file.pick(self.raw.out.clone(), "out")
    }
    fn format(&self) -> Result<Format> {
        Ok(self.file.pick(self.raw.format, "format")?.unwrap_or(Format::Csv))
    }
    fn jobs(&self) -> Result<usize> {
        let default = std::thread::available_parallelism().map_or(1, |n| n.get());
        Ok(self.file.pick(self.raw.jobs, "jobs")?.unwrap_or(default))
    }
    fn essential(&self) -> Result<InfiniteBarPolicy> {
        Ok(self.file.pick(self.raw.essential, "essential")?.unwrap_or_default())
    }
    fn input(&self) -> Result<PathBuf> {
        match self.file.pick(self.raw.input.clone(), "input")? {
            Some(p) => Ok(p),
            None => bail!("an input CSV path is required"),
        }
    }

    fn summary_config(&self) -> Result<SummaryConfig> {
        Ok(SummaryConfig {
            kind: self.summary()?.unwrap_or(SummaryKind::VietorisRips0D),
            infinite_bar_policy: self.essential()?,
        })
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(seed) = self.seed()? {
            cfg.seed = seed;
        }
        if let Some(reps) = self.reps()? {
            cfg.n_reps = reps;
        }
        if let Some(m) = self.metric()? {
            cfg.metric = m;
        }
        cfg.summary = self.summary_config()?;
        if let Some(k) = self.layers()? {
            cfg.n_layers = k;
        }
        cfg.landscape_grid = self.grid()?;
        if let Some(n) = self.file.pick(self.raw.n_big, "n-big")? {
            cfg.n_big = n;
        }
        if let Some(n) = self.file.pick(self.raw.gt_reps, "gt-reps")? {
            cfg.ground_truth_reps = n;
        }
        Ok(cfg)
    }

    fn single_delta(&self) -> Result<Option<f64>> {
        self.delta()?
            .map(|d| d.trim().parse::<f64>().with_context(|| format!("--delta {d:?}")))
            .transpose()
    }
}

fn parse_deltas(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|d| d.trim().parse::<f64>().with_context(|| format!("delta {d:?}")))
        .collect()
}

fn open_output(path: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (command, raw) = match cli.command {
        Command::Sweep(c) => (Task::Sweep, c),
        Command::Table1(c) => (Task::Table1, c),
        Command::Fig1(c) => (Task::Fig1, c),
        Command::Noncommute(c) => (Task::Noncommute, c),
        Command::Ph(c) => (Task::Ph, c),
        Command::Effect(c) => (Task::Effect, c),
        Command::Sample(c) => (Task::Sample, c),
    };
    let args = Resolved::new(raw)?;
    let format = args.format()?;
    let jobs = args.jobs()?;
    let mut out = open_output(args.out()?)?;

    match command {
        Task::Sweep => {
            let mut cfg = args.experiment()?;
            if let Some(n) = args.n()? {
                cfg.n_per_arm = n;
            }
            if let Some(d) = args.delta()? {
                cfg.deltas = parse_deltas(&d)?;
            }
            let report = with_jobs(jobs, || run_delta_sweep(&cfg))??;
            match format {
                Format::Csv => report.write_csv(&mut out)?,
                Format::Json => write_json(&mut out, &report)?,
            }
        }
        Task::Table1 => {
            let mut cfg = args.experiment()?;
            if let Some(n) = args.n()? {
                cfg.n_total = n;
            }
            if let Some(d) = args.single_delta()? {
                cfg.design.delta = d;
            }
            let report = with_jobs(jobs, || run_table1(&cfg))??;
            match format {
                Format::Csv => report.write_csv(&mut out)?,
                Format::Json => write_json(&mut out, &report)?,
            }
        }
        Task::Fig1 => {
            let grid = match args.grid()? {
                Some(g) => g,
                None => GridSpec::new(-4.0, 4.0, 401)?,
            };
            let summary = match args.summary()? {
                Some(kind) => SummaryConfig {
                    kind,
                    infinite_bar_policy: args.essential()?,
                },
                None => SummaryConfig {
                    kind: SummaryKind::DensitySuperlevel1D {
                        bandwidth: None,
                        grid: None,
                    },
                    infinite_bar_policy: args.essential()?,
                },
            };
            let mut treated = Design1D::figure_treated();
            if let Some(d) = args.single_delta()? {
                treated.delta = d;
            }
            let data = emit_figure1_data(
                &Design1D::figure_control(),
                &treated,
                grid,
                args.n()?.unwrap_or(5000),
                args.seed()?.unwrap_or(ExperimentConfig::default().seed),
                &summary,
            )?;
            match format {
                Format::Csv => data.write_csv(&mut out)?,
                Format::Json => write_json(&mut out, &data)?,
            }
        }
        Task::Noncommute => {
            let mut cfg = args.experiment()?;
            cfg.n_per_arm = args.n()?.unwrap_or(200);
            if let Some(d) = args.single_delta()? {
                cfg.design.delta = d;
            }
            if args.file.flag(args.raw.same_centers, "same-centers")? {
                cfg.design.m1 = cfg.design.m0;
            }
            let demo = with_jobs(jobs, || run_noncommutation_demo(&cfg))??;
            match format {
                Format::Csv => demo.write_csv(&mut out)?,
                Format::Json => write_json(&mut out, &demo)?,
            }
        }
        Task::Ph => {
            let path = args.input()?;
            let cloud = PointCloud::read_csv(
                File::open(&path).with_context(|| format!("opening {}", path.display()))?,
            )?;
            let mut summary = args.summary_config()?;
            if let Some(g) = args.grid()? {
                summary.kind = summary.kind.with_grid(g);
            }
            let diagram = summarize(&cloud, &summary)?;
            match format {
                Format::Csv => diagram.write_csv(&mut out)?,
                Format::Json => writeln!(out, "{}", diagram.to_json()?)?,
            }
        }
        Task::Effect => {
            let path = args.input()?;
            let sample = ObservationalSample::read_csv(
                File::open(&path).with_context(|| format!("opening {}", path.display()))?,
            )?;
            let summary = args.summary_config()?;
            let layers = args.layers()?.unwrap_or(DEFAULT_LAYERS);
            let lcfg = match args.grid()? {
                Some(g) => LandscapeConfig::new(layers, g)?,
                None => freeze_landscape_config(&sample, &summary, layers, DEFAULT_LANDSCAPE_NODES)?,
            };
            let metric = args.metric()?.unwrap_or_default();
            let report = effect_report(&sample, &summary, &lcfg, metric)?;
            match format {
                Format::Json => write_json(&mut out, &report)?,
                Format::Csv => {
                    writeln!(out, "estimator,value")?;
                    for (name, est) in &report.estimates {
                        let v = match &est.value {
                            EffectValue::Scalar(v) => *v,
                            EffectValue::Vector { norm, .. } => *norm,
                        };
                        writeln!(out, "{name},{v:.4}")?;
                    }
                }
            }
        }
        Task::Sample => {
            let mut cfg = args.experiment()?;
            if let Some(d) = args.single_delta()? {
                cfg.design.delta = d;
            }
            let n = args.n()?.unwrap_or(cfg.n_total);
            let mut rng = SeededRng::new(cfg.seed, 0);
            let draw = draw_observational_2d(&cfg.design, n, &mut rng)?;
            if format == Format::Json {
                bail!("sample export is CSV only");
            }
            draw.write_csv(&mut out, args.file.flag(args.raw.with_counterfactuals, "with-counterfactuals")?)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn delta_lists() {
        assert_eq!(parse_deltas("0, 0.2,1").unwrap(), vec![0.0, 0.2, 1.0]);
        assert!(parse_deltas("0,x").is_err());
    }
}
