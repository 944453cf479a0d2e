//! End-to-end orchestration: configuration, the five-stage solve
//! (heatmap → hyper tour → initialization → targeted search → sub-tour
//! optimization), instance generation, batch benchmarking and the
//! heatmap-noise robustness experiment.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::heatmap::{self, BuildOptions, DistanceHeatProvider};
use crate::hypertour::{self, HyperTour};
use crate::init::{self, InitResult};
use crate::instance::{Instance, Point};
use crate::lk::LkParams;
use crate::subtour;
use crate::tns::{self, DestroyMode, RoundTrace, TnsOptions};
use crate::tour::Tour;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Hyper,
    Greedy,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapSource {
    Distance,
    File,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub p: usize,
    pub gamma: usize,
    pub k: usize,
    pub k_cov: usize,
    pub tau: f64,
    pub l_s: usize,
    pub m: usize,
    pub alpha: f64,
    pub i3: usize,
    pub seed: u64,
    /// 0 means the default cap of 20·n destroy-repair rounds.
    pub iteration_cap: usize,
    pub init_mode: InitMode,
    pub heatmap_provider: HeatmapSource,
    pub heatmap_path: Option<PathBuf>,
    pub tsplib_rounding: bool,
    pub destroy_mode: DestroyMode,
    pub lk: LkParams,
    /// Reduced instances above this size are solved by a recursive pipeline
    /// run instead of plain LK.
    pub recursion_threshold: usize,
    pub random_subtour_starts: bool,
    /// Uniform noise injected into merged heats before top-k (magnitude,
    /// seed). Used by the noise experiment.
    pub heatmap_noise: Option<(f64, u64)>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            p: 100,
            gamma: 30,
            k: 2,
            k_cov: 10,
            tau: 1.0,
            l_s: 100,
            m: 100,
            alpha: 1000.0,
            i3: 2,
            seed: 0,
            iteration_cap: 0,
            init_mode: InitMode::Hyper,
            heatmap_provider: HeatmapSource::Distance,
            heatmap_path: None,
            tsplib_rounding: false,
            destroy_mode: DestroyMode::Union,
            lk: LkParams::default(),
            recursion_threshold: 5000,
            random_subtour_starts: false,
            heatmap_noise: None,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("gamma", self.gamma),
            ("k", self.k),
            ("k_cov", self.k_cov),
            ("m", self.m),
        ] {
            if v < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1, got {v}")));
            }
        }
        if self.l_s < 3 {
            return Err(Error::InvalidConfig(format!(
                "l_s must be >= 3, got {}",
                self.l_s
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        if self.heatmap_provider == HeatmapSource::File && self.heatmap_path.is_none() {
            return Err(Error::InvalidConfig(
                "heatmap provider 'file' requires heatmap_path".to_string(),
            ));
        }
        if self.heatmap_provider == HeatmapSource::File && self.heatmap_noise.is_some() {
            return Err(Error::InvalidConfig(
                "heatmap noise is only supported with the distance provider".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub heatmap: f64,
    pub hypertour: f64,
    pub init: f64,
    pub tns: f64,
    pub subtour: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub n: usize,
    pub init_len: f64,
    pub final_len: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub stage_times: StageTimes,
    /// Bridge-deletion passes.
    pub i1: usize,
    /// Destroy-repair rounds.
    pub i2: usize,
    pub peak_edge_stats: usize,
}

impl RunReport {
    /// Gap to an externally supplied reference length: (len − ref)/ref.
    pub fn with_reference(mut self, reference: f64) -> Self {
        if reference > 0.0 {
            self.gap = Some((self.final_len - reference) / reference);
        }
        self
    }
}

/// Diagnostics collected along the solve, not part of the JSON report.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub tns_rounds: Vec<RoundTrace>,
    pub subtour_pass_lengths: Vec<f64>,
    pub vertex_cluster: Vec<usize>,
    pub supernode_order: Vec<usize>,
}

#[derive(Debug)]
pub struct SolveResult {
    pub tour: Tour,
    pub report: RunReport,
    pub trace: SolveTrace,
}

/// Run the five-stage pipeline on one instance.
pub fn solve(instance: &Instance, config: &Config) -> Result<SolveResult> {
    config.validate()?;
    let n = instance.n();
    if n < 3 {
        return Err(Error::TooFewPoints(n, 3));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let heat_seed: u64 = seeds.random();
    let hyper_seed: u64 = seeds.random();
    let init_seed: u64 = seeds.random();
    let tns_seed: u64 = seeds.random();
    let subtour_seed: u64 = seeds.random();

    let mut times = StageTimes::default();

    // stage 1: sparse heatmap graph
    let t = Instant::now();
    let graph = match config.heatmap_provider {
        HeatmapSource::Distance => {
            let provider = DistanceHeatProvider { tau: config.tau };
            let opts = BuildOptions {
                p: config.p,
                gamma: config.gamma,
                k: config.k,
                k_cov: config.k_cov,
                seed: heat_seed,
                noise: config.heatmap_noise,
            };
            let (graph, _) = heatmap::build_sparse_heatmap(instance, &provider, &opts);
            graph
        }
        HeatmapSource::File => {
            let path = config.heatmap_path.as_ref().unwrap();
            heatmap::load_heatmap_file(path, instance, config.k)?
        }
    };
    for v in 0..n {
        if graph.vertex_entries(v).len() > config.k {
            return Err(Error::StageValidation {
                stage: "heatmap",
                detail: format!("vertex {v} kept more than k={} entries", config.k),
            });
        }
    }
    times.heatmap = t.elapsed().as_secs_f64();

    // stage 2: clustering and hyper tour
    let t = Instant::now();
    let clustering = hypertour::cluster_by_bridge_deletion(&graph, instance);
    let i1 = clustering.iterations;
    let covered: usize = clustering.clusters.iter().map(Vec::len).sum();
    if covered != n {
        return Err(Error::StageValidation {
            stage: "hypertour",
            detail: format!("clusters cover {covered} of {n} vertices"),
        });
    }
    let (clustering, ht) = if clustering.len() == 1 {
        hypertour::hilbert_fallback(instance, config.gamma)
    } else {
        let reduced = hypertour::build_reduced_instance(&clustering)?;
        let ht = if reduced.n() > config.recursion_threshold {
            let sub_cfg = Config {
                seed: hyper_seed,
                heatmap_provider: HeatmapSource::Distance,
                heatmap_path: None,
                ..config.clone()
            };
            let sub = solve(&reduced, &sub_cfg)?;
            HyperTour {
                order: sub.tour.order().to_vec(),
            }
        } else {
            hypertour::solve_hyper_tour(&reduced, hyper_seed)?
        };
        (clustering, ht)
    };
    times.hypertour = t.elapsed().as_secs_f64();

    // stage 3: initialization
    let t = Instant::now();
    let init_result: InitResult = match config.init_mode {
        InitMode::Hyper => {
            init::initialize_tour(instance, &ht, &clustering, config.l_s, &config.lk, init_seed)?
        }
        InitMode::Greedy => {
            let tour = Tour::new(init::nearest_neighbor_tour(instance, 0), instance)?;
            let worth_deletion = init::worth_deletion_edges(&tour, &clustering);
            InitResult {
                tour,
                worth_deletion,
            }
        }
        InitMode::Random => {
            let tour = Tour::new(init::random_order(n, init_seed), instance)?;
            let worth_deletion = init::worth_deletion_edges(&tour, &clustering);
            InitResult {
                tour,
                worth_deletion,
            }
        }
    };
    init_result.tour.check_valid(n).map_err(|e| Error::StageValidation {
        stage: "init",
        detail: e.to_string(),
    })?;
    let init_len = init_result.tour.length();
    times.init = t.elapsed().as_secs_f64();

    // stage 4: targeted neighborhood search
    let t = Instant::now();
    let tns_opts = TnsOptions {
        m: config.m,
        alpha: config.alpha,
        destroy_mode: config.destroy_mode,
        iteration_cap: config.iteration_cap,
        convergence_eps: 1e-4,
        window: 10,
        lk: config.lk.clone(),
    };
    let tns_out = tns::run_tns(instance, &init_result, &tns_opts, tns_seed)?;
    tns_out.tour.check_valid(n).map_err(|e| Error::StageValidation {
        stage: "tns",
        detail: e.to_string(),
    })?;
    if tns_out.peak_edge_stats != n {
        return Err(Error::StageValidation {
            stage: "tns",
            detail: format!(
                "peak edge-stat entries {} != n {n}",
                tns_out.peak_edge_stats
            ),
        });
    }
    let mut tour = tns_out.tour;
    times.tns = t.elapsed().as_secs_f64();

    // stage 5: sub-tour optimization
    let t = Instant::now();
    let pass_lengths = subtour::optimize_subtours(
        &mut tour,
        instance,
        config.l_s,
        config.i3,
        config.random_subtour_starts,
        &config.lk,
        subtour_seed,
    )?;
    tour.check_valid(n).map_err(|e| Error::StageValidation {
        stage: "subtour",
        detail: e.to_string(),
    })?;
    times.subtour = t.elapsed().as_secs_f64();

    let final_len = tour.length();
    if final_len > init_len + 1e-9 * init_len.max(1.0) {
        return Err(Error::StageValidation {
            stage: "subtour",
            detail: format!("final length {final_len} exceeds initial {init_len}"),
        });
    }

    let report = RunReport {
        instance: instance.name().to_string(),
        n,
        init_len,
        final_len,
        gap: None,
        stage_times: times,
        i1,
        i2: tns_out.iterations,
        peak_edge_stats: tns_out.peak_edge_stats,
    };
    let trace = SolveTrace {
        tns_rounds: tns_out.rounds,
        subtour_pass_lengths: pass_lengths,
        vertex_cluster: clustering.vertex_to_cluster.clone(),
        supernode_order: ht.order.clone(),
    };
    Ok(SolveResult {
        tour,
        report,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointDistribution {
    Uniform,
    Clustered,
    Explosion,
    Implosion,
}

impl std::str::FromStr for PointDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "clustered" => Ok(Self::Clustered),
            "explosion" => Ok(Self::Explosion),
            "implosion" => Ok(Self::Implosion),
            other => Err(Error::InvalidConfig(format!(
                "unknown distribution {other:?}"
            ))),
        }
    }
}

/// Points strictly inside the disk are pushed radially out to its boundary.
pub(crate) fn explosion_transform(points: &mut [Point], center: Point, radius: f64) {
    for p in points.iter_mut() {
        let dx = p.x - center.x;
        let dy = p.y - center.y;
        let r = (dx * dx + dy * dy).sqrt();
        if r >= radius {
            continue;
        }
        if r < 1e-12 {
            p.x = center.x + radius;
            p.y = center.y;
        } else {
            let scale = radius / r;
            p.x = center.x + dx * scale;
            p.y = center.y + dy * scale;
        }
    }
}

/// Points inside the disk are pulled toward the center (r -> r²/R), the
/// mirror image of the explosion push.
pub(crate) fn implosion_transform(points: &mut [Point], center: Point, radius: f64) {
    for p in points.iter_mut() {
        let dx = p.x - center.x;
        let dy = p.y - center.y;
        let r = (dx * dx + dy * dy).sqrt();
        if r >= radius || r < 1e-12 {
            continue;
        }
        let scale = r / radius;
        p.x = center.x + dx * scale;
        p.y = center.y + dy * scale;
    }
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    let mag = (-2.0 * u1.ln()).sqrt();
    let ang = 2.0 * std::f64::consts::PI * u2;
    (mag * ang.cos(), mag * ang.sin())
}

/// Synthetic benchmark instances in the four standard distributions.
pub fn generate_instance(n: usize, dist: PointDistribution, seed: u64) -> Result<Instance> {
    if n < 3 {
        return Err(Error::TooFewPoints(n, 3));
    }
    for attempt in 0..8u64 {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E3779B97F4A7C15)));
        let mut points: Vec<Point> = match dist {
            PointDistribution::Uniform => (0..n)
                .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect(),
            PointDistribution::Clustered => {
                let c = n.div_ceil(500);
                let centers: Vec<Point> = (0..c)
                    .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
                    .collect();
                (0..n)
                    .map(|_| {
                        let center = centers[rng.random_range(0..c)];
                        let (gx, gy) = gaussian_pair(&mut rng);
                        Point::new(center.x + 0.02 * gx, center.y + 0.02 * gy)
                    })
                    .collect()
            }
            PointDistribution::Explosion | PointDistribution::Implosion => (0..n)
                .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
                .collect(),
        };
        match dist {
            PointDistribution::Explosion => {
                let center = Point::new(rng.random::<f64>(), rng.random::<f64>());
                explosion_transform(&mut points, center, 0.2);
            }
            PointDistribution::Implosion => {
                let center = Point::new(rng.random::<f64>(), rng.random::<f64>());
                implosion_transform(&mut points, center, 0.2);
            }
            _ => {}
        }
        let name = format!("{}-{}-s{}", dist_name(dist), n, seed);
        match Instance::new(name, points) {
            Ok(inst) => return Ok(inst),
            Err(Error::DuplicatePoint { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidConfig(
        "failed to generate distinct points".to_string(),
    ))
}

fn dist_name(d: PointDistribution) -> &'static str {
    match d {
        PointDistribution::Uniform => "uniform",
        PointDistribution::Clustered => "clustered",
        PointDistribution::Explosion => "explosion",
        PointDistribution::Implosion => "implosion",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub solved: usize,
    pub failed: usize,
    pub mean_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_gap: Option<f64>,
    pub total_time_s: f64,
}

/// Parse a `name <whitespace> length` reference file.
pub fn load_reference_lengths(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let name = it.next().unwrap().to_string();
        let len: f64 = it
            .next()
            .ok_or_else(|| Error::TsplibParse {
                line: idx + 1,
                msg: "reference line needs a length".to_string(),
            })?
            .parse()
            .map_err(|e| Error::TsplibParse {
                line: idx + 1,
                msg: format!("bad reference length: {e}"),
            })?;
        map.insert(name, len);
    }
    Ok(map)
}

/// Solve every `.tsp` file in a directory. Per-instance failures are
/// recorded and the batch continues. `jobs` is capped by the
/// HYPERNS_THREADS environment variable when set.
pub fn benchmark(
    dir: impl AsRef<Path>,
    config: &Config,
    references: Option<&HashMap<String, f64>>,
    jobs: usize,
) -> Result<BenchReport> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("tsp")))
        .collect();
    files.sort();

    let env_cap = std::env::var("HYPERNS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(usize::MAX);
    let jobs = jobs.max(1).min(env_cap.max(1)).min(files.len().max(1));

    let start = Instant::now();
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<(usize, BenchRow)>> = Mutex::new(Vec::with_capacity(files.len()));

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                let file = &files[i];
                let row = solve_file(file, config, references);
                rows.lock().unwrap().push((i, row));
            });
        }
    });

    let mut rows = rows.into_inner().unwrap();
    rows.sort_by_key(|(i, _)| *i);
    let rows: Vec<BenchRow> = rows.into_iter().map(|(_, r)| r).collect();

    let solved_reports: Vec<&RunReport> = rows.iter().filter_map(|r| r.report.as_ref()).collect();
    let solved = solved_reports.len();
    let mean_length = if solved > 0 {
        Some(solved_reports.iter().map(|r| r.final_len).sum::<f64>() / solved as f64)
    } else {
        None
    };
    let gaps: Vec<f64> = solved_reports.iter().filter_map(|r| r.gap).collect();
    let mean_gap = if gaps.is_empty() {
        None
    } else {
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    };
    Ok(BenchReport {
        failed: rows.len() - solved,
        solved,
        rows,
        mean_length,
        mean_gap,
        total_time_s: start.elapsed().as_secs_f64(),
    })
}

fn solve_file(
    file: &Path,
    config: &Config,
    references: Option<&HashMap<String, f64>>,
) -> BenchRow {
    let file_name = file
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let run = || -> Result<RunReport> {
        let instance =
            Instance::load_tsplib(file)?.with_tsplib_rounding(config.tsplib_rounding);
        let result = solve(&instance, config)?;
        let mut report = result.report;
        if let Some(refs) = references {
            let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned());
            let reference = refs
                .get(instance.name())
                .or_else(|| stem.as_deref().and_then(|s| refs.get(s)));
            if let Some(&r) = reference {
                report = report.with_reference(r);
            }
        }
        Ok(report)
    };
    match run() {
        Ok(report) => BenchRow {
            file: file_name,
            report: Some(report),
            error: None,
        },
        Err(e) => BenchRow {
            file: file_name,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// CSV rendering of a benchmark report (one row per instance).
pub fn bench_to_csv(report: &BenchReport) -> String {
    let mut out = String::from(
        "file,instance,n,init_len,final_len,gap,i1,i2,peak_edge_stats,heatmap_s,hypertour_s,init_s,tns_s,subtour_s,error\n",
    );
    for row in &report.rows {
        match &row.report {
            Some(r) => {
                let gap = r.gap.map(|g| g.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},\n",
                    row.file,
                    r.instance,
                    r.n,
                    r.init_len,
                    r.final_len,
                    gap,
                    r.i1,
                    r.i2,
                    r.peak_edge_stats,
                    r.stage_times.heatmap,
                    r.stage_times.hypertour,
                    r.stage_times.init,
                    r.stage_times.tns,
                    r.stage_times.subtour
                ));
            }
            None => {
                out.push_str(&format!(
                    "{},,,,,,,,,,,,,,{}\n",
                    row.file,
                    row.error.as_deref().unwrap_or("unknown error")
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseBin {
    pub level: f64,
    pub runs: usize,
    pub avg_initial_length: f64,
    pub avg_final_length: f64,
    pub avg_time_s: f64,
    pub initial_lengths: Vec<f64>,
    pub final_lengths: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseReport {
    pub instance: String,
    pub n: usize,
    pub seeds: usize,
    pub bins: Vec<NoiseBin>,
}

/// Solve the same instance under increasing heatmap noise; per level, report
/// mean initial length, mean final length and mean time over the seeds.
pub fn noise_experiment(
    instance: &Instance,
    levels: &[f64],
    seeds: usize,
    config: &Config,
) -> Result<NoiseReport> {
    let mut bins = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut init_lens = Vec::with_capacity(seeds);
        let mut final_lens = Vec::with_capacity(seeds);
        let mut times = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(s as u64);
            cfg.heatmap_noise = if level > 0.0 {
                let noise_seed = config
                    .seed
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add(level.to_bits())
                    .wrapping_add(s as u64);
                Some((level, noise_seed))
            } else {
                None
            };
            let start = Instant::now();
            let result = solve(instance, &cfg)?;
            times.push(start.elapsed().as_secs_f64());
            init_lens.push(result.report.init_len);
            final_lens.push(result.report.final_len);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        bins.push(NoiseBin {
            level,
            runs: seeds,
            avg_initial_length: mean(&init_lens),
            avg_final_length: mean(&final_lens),
            avg_time_s: mean(&times),
            initial_lengths: init_lens,
            final_lengths: final_lens,
        });
    }
    Ok(NoiseReport {
        instance: instance.name().to_string(),
        n: instance.n(),
        seeds,
        bins,
    })
}
