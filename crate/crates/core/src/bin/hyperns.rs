use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperns::pipeline::{
    self, bench_to_csv, Config, HeatmapSource, InitMode, PointDistribution,
};
use hyperns::tns::DestroyMode;
use hyperns::{Instance, Result};

#[derive(Parser)]
#[command(name = "hyperns", about = "Hyper-tour-guided neighborhood search for Euclidean TSP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one TSPLIB instance end to end.
    Solve(SolveArgs),
    /// Generate a synthetic instance and write it as a TSPLIB file.
    Gen(GenArgs),
    /// Solve every .tsp file in a directory and aggregate a report.
    Bench(BenchArgs),
    /// Re-solve one instance under increasing heatmap noise.
    NoiseExp(NoiseArgs),
}

#[derive(Args, Clone)]
struct SolverParams {
    /// Candidate-set size (nearest neighbors per sampled subgraph).
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Grid-cell capacity for adaptive partitioning.
    #[arg(long, default_value_t = 30)]
    gamma: usize,
    /// Heatmap edges kept per vertex.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Nearest-neighbor count defining the coverage universe.
    #[arg(long = "k-cov", default_value_t = 10)]
    k_cov: usize,
    /// Distance-heat temperature.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Chunk / sub-tour length.
    #[arg(long = "ls", default_value_t = 100)]
    l_s: usize,
    /// Neighborhood size for the destroy step.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Score balance between weight and duration terms.
    #[arg(long, default_value_t = 1000.0)]
    alpha: f64,
    /// Sub-tour optimization passes.
    #[arg(long, default_value_t = 2)]
    i3: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destroy-repair round cap (0 = 20·n).
    #[arg(long = "iteration-cap", default_value_t = 0)]
    iteration_cap: usize,
    #[arg(long, value_enum, default_value = "hyper")]
    init: InitChoice,
    #[arg(long, value_enum, default_value = "distance")]
    heatmap: HeatmapChoice,
    #[arg(long = "heatmap-path")]
    heatmap_path: Option<PathBuf>,
    /// Evaluate with TSPLIB integer-rounded distances.
    #[arg(long = "tsplib-rounding")]
    tsplib_rounding: bool,
    /// Affected-set semantics for the destroy step.
    #[arg(long = "destroy-mode", value_enum, default_value = "union")]
    destroy_mode: DestroyChoice,
    /// Randomize sub-tour pass offsets instead of the deterministic schedule.
    #[arg(long = "random-starts")]
    random_starts: bool,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum InitChoice {
    Hyper,
    Greedy,
    Random,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum HeatmapChoice {
    Distance,
    File,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum DestroyChoice {
    Union,
    Intersection,
}

impl SolverParams {
    fn to_config(&self) -> Config {
        Config {
            p: self.p,
            gamma: self.gamma,
            k: self.k,
            k_cov: self.k_cov,
            tau: self.tau,
            l_s: self.l_s,
            m: self.m,
            alpha: self.alpha,
            i3: self.i3,
            seed: self.seed,
            iteration_cap: self.iteration_cap,
            init_mode: match self.init {
                InitChoice::Hyper => InitMode::Hyper,
                InitChoice::Greedy => InitMode::Greedy,
                InitChoice::Random => InitMode::Random,
            },
            heatmap_provider: match self.heatmap {
                HeatmapChoice::Distance => HeatmapSource::Distance,
                HeatmapChoice::File => HeatmapSource::File,
            },
            heatmap_path: self.heatmap_path.clone(),
            tsplib_rounding: self.tsplib_rounding,
            destroy_mode: match self.destroy_mode {
                DestroyChoice::Union => DestroyMode::Union,
                DestroyChoice::Intersection => DestroyMode::Intersection,
            },
            random_subtour_starts: self.random_starts,
            ..Config::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// TSPLIB .tsp input (EDGE_WEIGHT_TYPE: EUC_2D).
    input: PathBuf,
    #[command(flatten)]
    params: SolverParams,
    /// Reference length for gap reporting.
    #[arg(long = "ref-len")]
    ref_len: Option<f64>,
    /// Write the tour in TSPLIB .tour format.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print one line per destroy-repair round.
    #[arg(long)]
    trace: bool,
    /// Dump clusters and hyper tour to a text file
    /// (default <input stem>.hypertour.txt).
    #[arg(long = "dump-hypertour", num_args = 0..=1, default_missing_value = "")]
    dump_hypertour: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    dist: PointDistribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .tsp files.
    dir: PathBuf,
    #[command(flatten)]
    params: SolverParams,
    /// Reference lengths: one "name length" per line.
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Parallel workers (capped by HYPERNS_THREADS).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the aggregate report as JSON.
    #[arg(long)]
    report: PathBuf,
    /// Also write per-instance rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    input: PathBuf,
    #[command(flatten)]
    params: SolverParams,
    /// Comma-separated noise magnitudes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.05, 0.1, 0.2])]
    levels: Vec<f64>,
    /// Pipeline seeds per level.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long)]
    report: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Gen(args) => run_gen(args),
        Command::Bench(args) => run_bench(args),
        Command::NoiseExp(args) => run_noise(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let config = args.params.to_config();
    let instance =
        Instance::load_tsplib(&args.input)?.with_tsplib_rounding(config.tsplib_rounding);
    let result = pipeline::solve(&instance, &config)?;

    if args.trace {
        for r in &result.trace.tns_rounds {
            println!(
                "tns {} ({},{}) {:.6} {:.6} {:.3e}",
                r.iteration, r.selected.0, r.selected.1, r.l_old, r.l_new, r.rel_change
            );
        }
        for (i, len) in result.trace.subtour_pass_lengths.iter().enumerate() {
            println!("subtour pass {} {:.6}", i + 1, len);
        }
    }

    let mut report = result.report.clone();
    if let Some(r) = args.ref_len {
        report = report.with_reference(r);
    }

    println!("instance   : {} (n={})", report.instance, report.n);
    println!("initial    : {:.6}", report.init_len);
    println!("final      : {:.6}", report.final_len);
    if let Some(gap) = report.gap {
        println!("gap        : {:.4}%", gap * 100.0);
    }
    println!(
        "iterations : I1={} I2={} peak-edge-stats={}",
        report.i1, report.i2, report.peak_edge_stats
    );
    let t = &report.stage_times;
    println!(
        "stage times: heatmap {:.3}s hypertour {:.3}s init {:.3}s tns {:.3}s subtour {:.3}s",
        t.heatmap, t.hypertour, t.init, t.tns, t.subtour
    );

    if let Some(out) = &args.out {
        let f = std::fs::File::create(out)?;
        result.tour.write_tour_file(instance.name(), f)?;
        println!("tour       : {}", out.display());
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
        println!("report     : {}", path.display());
    }
    if let Some(dump) = &args.dump_hypertour {
        let path = if dump.as_os_str().is_empty() {
            let stem = args
                .input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".to_string());
            PathBuf::from(format!("{stem}.hypertour.txt"))
        } else {
            dump.clone()
        };
        let mut text = format!("VERTEX_CLUSTERS {}\n", result.trace.vertex_cluster.len());
        for &c in &result.trace.vertex_cluster {
            text.push_str(&format!("{c}\n"));
        }
        text.push_str(&format!(
            "SUPERNODE_ORDER {}\n",
            result.trace.supernode_order.len()
        ));
        let order: Vec<String> = result
            .trace
            .supernode_order
            .iter()
            .map(|c| c.to_string())
            .collect();
        text.push_str(&order.join(" "));
        text.push('\n');
        std::fs::write(&path, text)?;
        println!("hypertour  : {}", path.display());
    }
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let instance = pipeline::generate_instance(args.n, args.dist, args.seed)?;
    let f = std::fs::File::create(&args.out)?;
    instance.write_tsplib(f)?;
    println!("wrote {} (n={})", args.out.display(), instance.n());
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let config = args.params.to_config();
    let references = match &args.refs {
        Some(path) => Some(pipeline::load_reference_lengths(path)?),
        None => None,
    };
    let report = pipeline::benchmark(&args.dir, &config, references.as_ref(), args.jobs)?;
    for row in &report.rows {
        match &row.report {
            Some(r) => {
                let gap = r
                    .gap
                    .map(|g| format!(" gap {:.4}%", g * 100.0))
                    .unwrap_or_default();
                println!("{}: len {:.6}{} (n={})", row.file, r.final_len, gap, r.n);
            }
            None => println!(
                "{}: FAILED ({})",
                row.file,
                row.error.as_deref().unwrap_or("unknown")
            ),
        }
    }
    println!(
        "solved {}/{} mean-length {} mean-gap {} total {:.2}s",
        report.solved,
        report.rows.len(),
        report
            .mean_length
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".to_string()),
        report
            .mean_gap
            .map(|v| format!("{:.4}%", v * 100.0))
            .unwrap_or_else(|| "-".to_string()),
        report.total_time_s
    );
    write_json(&args.report, &report)?;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, bench_to_csv(&report))?;
    }
    Ok(())
}

fn run_noise(args: NoiseArgs) -> Result<()> {
    let config = args.params.to_config();
    let instance =
        Instance::load_tsplib(&args.input)?.with_tsplib_rounding(config.tsplib_rounding);
    let report = pipeline::noise_experiment(&instance, &args.levels, args.seeds, &config)?;
    println!("noise  runs  avg-initial  avg-final  avg-time");
    for bin in &report.bins {
        println!(
            "{:<6} {:<5} {:<12.4} {:<10.4} {:.2}s",
            bin.level, bin.runs, bin.avg_initial_length, bin.avg_final_length, bin.avg_time_s
        );
    }
    write_json(&args.report, &report)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
