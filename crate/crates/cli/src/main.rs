use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use topofuse::fusion::{count_peaks, parameterize_multibranch, spline_density_histogram, Histogram1D};
use topofuse::histogram::{compute_joint_histogram, log_normalize, pair_selection_report, AxisRange, Histogram2D};
use topofuse::pathfind::WeightedGraph;
use topofuse::pipeline::{
    cmd_fuse, fit_branches, run_topology, select_paths, write_histogram1d, write_histogram_artifacts,
    write_path_artifacts, write_topology_artifacts, ArtifactEntry, ArtifactWriter, PathSet, PipelineConfig, SplineSet,
};
use topofuse::synth::CircularGaussians;
use topofuse::volio::{
    import_json, read_volume, to_json_string, write_volume, GridData, Volume, VolumeFormat, WriteOptions,
    SCHEMA_VERSION,
};
use topofuse::{Error, Result};

/// Topology-guided fusion of two co-registered volumes.
#[derive(Debug, Parser)]
#[command(name = "topofuse", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank volume pairs by Pearson correlation, least correlated first.
    Correlate {
        #[arg(required = true, num_args = 2..)]
        volumes: Vec<PathBuf>,
        /// Joint histogram resolution used for each pair.
        #[arg(long, default_value_t = 256)]
        bins: usize,
    },
    /// Joint histogram and log-normalized density of a volume pair.
    Histogram {
        #[arg(long)]
        v1: PathBuf,
        #[arg(long)]
        v2: PathBuf,
        #[arg(long, default_value_t = 1000)]
        bins: usize,
        /// Axis 1 range as `min,max`.
        #[arg(long, value_parser = parse_range)]
        range1: Option<[f64; 2]>,
        /// Axis 2 range as `min,max`.
        #[arg(long, value_parser = parse_range)]
        range2: Option<[f64; 2]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Persistence pairs, simplification, extremum graph and spanning tree.
    Topo {
        /// Histogram stem or its `.json` file.
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diameter path or explicit node-pair paths through a spanning tree.
    Path {
        #[arg(long)]
        histogram: PathBuf,
        /// `mst.json` written by `topo`.
        #[arg(long)]
        mst: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        #[arg(long)]
        hop_metric: bool,
        /// Node pair `a,b`; repeat for several branches.
        #[arg(long = "branch", value_parser = parse_pair)]
        branches: Vec<[usize; 2]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spline fit of paths and the parameterized histogram grid.
    Spline {
        #[arg(long)]
        histogram: PathBuf,
        /// `paths.json` written by `path`.
        #[arg(long)]
        paths: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        smoothing: f64,
        #[arg(long, default_value_t = topofuse::spline::DEFAULT_SAMPLE_COUNT)]
        sample_count: usize,
        #[arg(long, default_value_t = topofuse::fusion::DEFAULT_SPLINE_BINS)]
        spline_bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline from a config file, with command-line overrides.
    Fuse(FuseArgs),
    /// Persistence peaks of a 1D histogram artifact.
    Peaks {
        histogram: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        min_persistence: f64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circular-Gaussians volume pair.
    Synth {
        /// TOML table of fixture parameters.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Replaces the domain with 64x64xZ voxels holding this many per blob.
        #[arg(long)]
        voxels_per_blob: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Nrrd)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Nrrd,
    Raw,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the synthetic circular-Gaussians setup.
    #[arg(long)]
    synth: bool,
    #[arg(long, requires = "v2")]
    v1: Option<PathBuf>,
    #[arg(long, requires = "v1")]
    v2: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    persistence_threshold: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    sample_count: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    hop_metric: bool,
    #[arg(long = "branch", value_parser = parse_pair)]
    branches: Vec<[usize; 2]>,
    #[arg(long)]
    continuous: bool,
    #[arg(long)]
    spline_bins: Option<usize>,
    #[arg(long)]
    min_persistence: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected min,max")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok([lo, hi])
}

fn parse_pair(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok([a, b])
}

/// 2 for usage and configuration problems, including unreadable inputs;
/// 1 for failures while running.
fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn report(artifacts: BTreeMap<String, ArtifactEntry>, extra: Value) -> Value {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "artifacts": artifacts });
    if let (Some(obj), Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

fn read_any(path: &Path) -> Result<Volume> {
    read_volume(path, VolumeFormat::detect(path))
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn fuse_config(a: FuseArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            toml::from_str::<PipelineConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None if a.synth => PipelineConfig::synthetic(),
        None => PipelineConfig::default(),
    };
    if a.synth && cfg.input.synth.is_none() && cfg.input.v1.is_none() {
        cfg.input.synth = Some(CircularGaussians::default());
    }
    if let (Some(v1), Some(v2)) = (a.v1, a.v2) {
        cfg.input.synth = None;
        cfg.input.v1 = Some(v1);
        cfg.input.v2 = Some(v2);
    }
    if let Some(v) = a.bins {
        cfg.bins = v;
    }
    if let Some(v) = a.persistence_threshold {
        cfg.persistence_threshold = v;
    }
    if let Some(v) = a.smoothing {
        cfg.smoothing = v;
    }
    if let Some(v) = a.sample_count {
        cfg.sample_count = v;
    }
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if a.hop_metric {
        cfg.hop_metric = true;
    }
    if !a.branches.is_empty() {
        cfg.branches = a.branches;
    }
    if a.continuous {
        cfg.continuous = true;
    }
    if let Some(v) = a.spline_bins {
        cfg.spline_bins = v;
    }
    if let Some(v) = a.min_persistence {
        cfg.min_persistence = v;
    }
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Correlate { volumes, bins } => {
            let vols = volumes.iter().map(|p| read_any(p)).collect::<Result<Vec<_>>>()?;
            let rows = pair_selection_report(&vols, bins)?;
            for r in &rows {
                println!(
                    "{}\t{}\t{:.3}",
                    volumes[r.pair.0].display(),
                    volumes[r.pair.1].display(),
                    r.correlation
                );
            }
            Ok(Value::Null)
        }
        Command::Histogram { v1, v2, bins, range1, range2, out } => {
            let (a, b) = (read_any(&v1)?, read_any(&v2)?);
            let ranges = match (range1, range2) {
                (None, None) => None,
                (r1, r2) => {
                    let axis = |r: Option<[f64; 2]>, v: &Volume| match r {
                        Some([lo, hi]) => AxisRange::new(lo, hi).map_err(|e| Error::Config(e.to_string())),
                        None => AxisRange::new(v.value_range().0, v.value_range().1),
                    };
                    Some([axis(r1, &a)?, axis(r2, &b)?])
                }
            };
            let h = compute_joint_histogram(&a, &b, bins, ranges)?;
            let mut w = ArtifactWriter::new(&out)?;
            write_histogram_artifacts(&mut w, &h, &log_normalize(&h))?;
            Ok(report(w.into_entries(), json!({ "n": bins, "total_count": h.total_count() })))
        }
        Command::Topo { histogram, threshold, out } => {
            check_unit("threshold", threshold)?;
            let h = Histogram2D::import(&histogram)?;
            let t = run_topology(&log_normalize(&h), threshold)?;
            let mut w = ArtifactWriter::new(&out)?;
            write_topology_artifacts(&mut w, &t)?;
            Ok(report(w.into_entries(), json!({ "critical": t.critical })))
        }
        Command::Path { histogram, mst, tau, hop_metric, branches, out } => {
            check_unit("tau", tau)?;
            let h = Histogram2D::import(&histogram)?;
            let tree: WeightedGraph = import_json(&mst)?;
            let opts = topofuse::pathfind::DiameterOptions { tau, hop_metric };
            let paths = select_paths(&tree, &log_normalize(&h), &branches, opts)?;
            let mut w = ArtifactWriter::new(&out)?;
            write_path_artifacts(&mut w, &paths)?;
            let nodes: Vec<&Vec<usize>> = paths.iter().map(|p| &p.nodes).collect();
            Ok(report(w.into_entries(), json!({ "nodes": nodes })))
        }
        Command::Spline { histogram, paths, smoothing, sample_count, spline_bins, out } => {
            if !(smoothing >= 0.0 && smoothing.is_finite()) {
                return Err(Error::Config(format!("smoothing must be finite and >= 0, got {smoothing}")));
            }
            let h = Histogram2D::import(&histogram)?;
            let d = log_normalize(&h);
            let set: PathSet = import_json(&paths)?;
            let branches = fit_branches(&set.paths, h.n(), smoothing, sample_count)?;
            let samples: Vec<_> = branches.iter().map(|b| b.samples.clone()).collect();
            let idxs: Vec<_> = branches.iter().map(|b| b.index.clone()).collect();
            let field = parameterize_multibranch(&d, &samples, &idxs)?;
            let sh = spline_density_histogram(&h, &field, spline_bins)?;
            let mut w = ArtifactWriter::new(&out)?;
            w.json("splines", "splines.json", &SplineSet::from_branches(&branches))?;
            w.grid("fused_field", "fused_field.grid", field.n, &GridData::F64(field.values.clone()))?;
            w.grid(
                "branch_assignment",
                "branch_assignment.grid",
                field.n,
                &GridData::U32(field.branch_assignment.clone()),
            )?;
            write_histogram1d(&mut w, "spline_histogram", &sh)?;
            Ok(report(w.into_entries(), json!({ "branches": branches.len() })))
        }
        Command::Fuse(args) => {
            let cfg = fuse_config(args)?;
            let m = cmd_fuse(&cfg)?;
            Ok(report(
                m.artifacts,
                json!({
                    "output_dir": cfg.output_dir,
                    "peaks": m.peaks,
                    "critical": m.critical,
                    "warnings": m.warnings,
                    "timings": m.timings,
                }),
            ))
        }
        Command::Peaks { histogram, min_persistence, out } => {
            if !(min_persistence >= 0.0 && min_persistence.is_finite()) {
                return Err(Error::Config(format!("min_persistence must be >= 0, got {min_persistence}")));
            }
            let h: Histogram1D = import_json(&histogram)?;
            let r = count_peaks(&h, min_persistence)?;
            let text = to_json_string(&r)?;
            if let Some(p) = out {
                std::fs::write(&p, &text).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            }
            println!("{text}");
            Ok(Value::Null)
        }
        Command::Synth { spec, k, seed, voxels_per_blob, format, out } => {
            let mut s = match &spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    toml::from_str::<CircularGaussians>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => CircularGaussians::default(),
            };
            if let Some(k) = k {
                s.k = k;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(v) = voxels_per_blob {
                s = s.with_voxels_per_blob(v);
            }
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
            let (a, b) = s.generate()?;
            let ext = match format {
                Format::Nrrd => "nrrd",
                Format::Raw => "raw",
            };
            let mut w = ArtifactWriter::new(&out)?;
            for (name, v) in [("v1", &a), ("v2", &b)] {
                let file = format!("{name}.{ext}");
                let path = out.join(&file);
                write_volume(v, &path, VolumeFormat::detect(&path), &WriteOptions::default())?;
                w.record(name, &file)?;
                if let Format::Raw = format {
                    w.record(&format!("{name}_meta"), &format!("{name}.meta"))?;
                }
            }
            Ok(report(w.into_entries(), json!({ "warnings": s.warnings() })))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("reports serialize"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
