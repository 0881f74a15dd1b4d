//! End-to-end driver: histogram, simplification, extremum graph, spanning
//! tree, path selection, spline fit, parameterization and pullback, with
//! every intermediate artifact written to disk and hashed in a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::{
    axis_projection_histogram, count_peaks, fuse_volumes, fuse_volumes_continuous, parameterize_multibranch,
    spline_density_histogram, FusedField, Histogram1D, PeakReport,
};
use crate::histogram::{compute_joint_histogram, log_normalize, AxisRange, DensityField, Histogram2D};
use crate::pathfind::{
    build_weighted_graph, minimum_spanning_tree, select_branches, subpath_between, tree_diameter_path,
    trim_low_density, DiameterOptions, TreePath, WeightedGraph,
};
use crate::spline::{
    build_projection_index, fit_path_spline, sample_arclength, DecimatedSpline, FitReport,
    ProjectionIndex, SplineSamples,
};
use crate::synth::CircularGaussians;
use crate::topology::{
    classify_critical_points, compute_persistence_pairs, count_kind, extract_extremum_graph, simplify,
    CriticalKind, ExtremumGraph, GridField, PersistencePair,
};
use crate::volio::{
    self, encode_grid, read_volume, to_json_string, write_volume, Artifact, DType, GridData, Volume,
    VolumeFormat, WriteOptions,
};

fn default_bins() -> usize {
    1000
}
fn default_smoothing() -> f64 {
    0.01
}
fn default_sample_count() -> usize {
    crate::spline::DEFAULT_SAMPLE_COUNT
}
fn default_spline_bins() -> usize {
    crate::fusion::DEFAULT_SPLINE_BINS
}
fn default_min_persistence() -> f64 {
    0.05
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Where the volume pair comes from: a synthetic fixture or two files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<CircularGaussians>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<PathBuf>,
}

/// The full parameter set of one fusion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Explicit `[[min1, max1], [min2, max2]]` histogram ranges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<[[f64; 2]; 2]>,
    /// Fraction of the density range.
    #[serde(default)]
    pub persistence_threshold: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    /// Minimum log density of path endpoints and of kept path ends.
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub hop_metric: bool,
    /// Node id pairs in the spanning tree. Empty selects the diameter; two
    /// or more pairs give a merged multi-branch parameterization.
    #[serde(default)]
    pub branches: Vec<[usize; 2]>,
    /// Project each voxel's exact value pair instead of its cell center.
    #[serde(default)]
    pub continuous: bool,
    #[serde(default = "default_spline_bins")]
    pub spline_bins: usize,
    #[serde(default = "default_min_persistence")]
    pub min_persistence: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub input: InputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bins: default_bins(),
            ranges: None,
            persistence_threshold: 0.0,
            smoothing: default_smoothing(),
            sample_count: default_sample_count(),
            tau: 0.0,
            hop_metric: false,
            branches: Vec::new(),
            continuous: false,
            spline_bins: default_spline_bins(),
            min_persistence: default_min_persistence(),
            output_dir: default_output_dir(),
            input: InputConfig::default(),
        }
    }
}

pub const MAX_BINS: usize = 8192;
pub const MAX_SAMPLE_COUNT: usize = 100_000_000;

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl PipelineConfig {
    /// The synthetic circular-Gaussians setup with an endpoint density
    /// floor that keeps the diameter off sparse histogram tails.
    pub fn synthetic() -> Self {
        Self {
            tau: 0.5,
            input: InputConfig {
                synth: Some(CircularGaussians::default()),
                ..InputConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(8..=MAX_BINS).contains(&self.bins) {
            return Err(Error::Config(format!("bins must lie in [8, {MAX_BINS}], got {}", self.bins)));
        }
        unit_interval("persistence_threshold", self.persistence_threshold)?;
        unit_interval("tau", self.tau)?;
        unit_interval("min_persistence", self.min_persistence)?;
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config(format!("smoothing must be finite and >= 0, got {}", self.smoothing)));
        }
        if !(2..=MAX_SAMPLE_COUNT).contains(&self.sample_count) {
            return Err(Error::Config(format!(
                "sample_count must lie in [2, {MAX_SAMPLE_COUNT}], got {}",
                self.sample_count
            )));
        }
        if self.spline_bins < 3 {
            return Err(Error::Config(format!("spline_bins must be at least 3, got {}", self.spline_bins)));
        }
        if let Some(r) = self.ranges {
            for (axis, [lo, hi]) in r.iter().enumerate() {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!("ranges[{axis}] must satisfy min < max")));
                }
            }
        }
        let inp = &self.input;
        match (&inp.synth, &inp.v1, &inp.v2) {
            (Some(s), None, None) => s.validate().map_err(|e| Error::Config(format!("input.synth: {e}"))),
            (None, Some(_), Some(_)) => Ok(()),
            _ => Err(Error::Config(
                "input needs either a synth table or both v1 and v2 paths".into(),
            )),
        }
    }

    pub fn diameter_options(&self) -> DiameterOptions {
        DiameterOptions {
            tau: self.tau,
            hop_metric: self.hop_metric,
        }
    }

    pub fn fusion_params(&self) -> FusionParams {
        FusionParams {
            smoothing: self.smoothing,
            sample_count: self.sample_count,
            continuous: self.continuous,
            spline_bins: self.spline_bins,
            min_persistence: self.min_persistence,
        }
    }

    pub fn axis_ranges(&self) -> Result<Option<[AxisRange; 2]>> {
        self.ranges
            .map(|r| Ok([AxisRange::new(r[0][0], r[0][1])?, AxisRange::new(r[1][0], r[1][1])?]))
            .transpose()
    }
}

pub fn load_inputs(input: &InputConfig) -> Result<(Volume, Volume)> {
    match (&input.synth, &input.v1, &input.v2) {
        (Some(s), None, None) => s.generate(),
        (None, Some(a), Some(b)) => Ok((
            read_volume(a, VolumeFormat::detect(a))?,
            read_volume(b, VolumeFormat::detect(b))?,
        )),
        _ => Err(Error::Config("input needs either synth or v1 and v2".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub range: (f64, f64),
    pub pairs: Vec<PersistencePair>,
}

impl Artifact for PersistenceDiagram {
    const KIND: &'static str = "persistence_pairs";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub maxima: usize,
    pub saddles: usize,
    pub minima: usize,
}

/// Simplified field, its extremum graph, and the weighted graph and
/// spanning tree over it.
#[derive(Clone, Debug)]
pub struct TopologyStage {
    pub threshold: f64,
    pub diagram: PersistenceDiagram,
    pub simplified: GridField,
    pub critical: CriticalSummary,
    pub graph: ExtremumGraph,
    pub weighted: WeightedGraph,
    pub mst: WeightedGraph,
}

pub fn run_topology(d: &DensityField, threshold: f64) -> Result<TopologyStage> {
    unit_interval("persistence threshold", threshold)?;
    let field = GridField::from_density(d);
    let pairs = compute_persistence_pairs(&field);
    let simplified = simplify(&field, &pairs, threshold)?;
    let cps = classify_critical_points(&simplified);
    let critical = CriticalSummary {
        maxima: count_kind(&cps, CriticalKind::Maximum),
        saddles: count_kind(&cps, CriticalKind::Saddle),
        minima: count_kind(&cps, CriticalKind::Minimum),
    };
    let graph = extract_extremum_graph(&simplified);
    let weighted = build_weighted_graph(&graph, d)?;
    let mst = minimum_spanning_tree(&weighted)?;
    Ok(TopologyStage {
        threshold,
        diagram: PersistenceDiagram {
            range: field.value_range(),
            pairs,
        },
        simplified,
        critical,
        graph,
        weighted,
        mst,
    })
}

/// Diameter path or explicit node pairs, trimmed at `tau`. Branch ids follow
/// the selection order.
pub fn select_paths(
    mst: &WeightedGraph,
    d: &DensityField,
    branches: &[[usize; 2]],
    opts: DiameterOptions,
) -> Result<Vec<TreePath>> {
    let raw = match branches {
        [] => vec![tree_diameter_path(mst, opts)?],
        [[a, b]] => vec![subpath_between(mst, *a, *b)?],
        many => select_branches(mst, &many.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())?,
    };
    raw.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut t = trim_low_density(p, d, opts.tau)?;
            t.branch_id = i;
            Ok(t)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub smoothing: f64,
    pub sample_count: usize,
    pub continuous: bool,
    pub spline_bins: usize,
    pub min_persistence: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        PipelineConfig::default().fusion_params()
    }
}

/// One fitted branch.
#[derive(Clone, Debug)]
pub struct FittedBranch {
    pub report: FitReport,
    pub samples: SplineSamples,
    pub index: ProjectionIndex,
}

#[derive(Clone, Debug)]
pub struct FusionStage {
    pub branches: Vec<FittedBranch>,
    pub field: FusedField,
    pub fused: Volume,
    pub spline_histogram: Histogram1D,
    pub spline_peaks: PeakReport,
}

pub fn fit_branches(paths: &[TreePath], n: usize, smoothing: f64, sample_count: usize) -> Result<Vec<FittedBranch>> {
    paths
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let fit = fit_path_spline(&p.polyline, smoothing, n)?;
            let mut samples = sample_arclength(&fit.spline, sample_count)?;
            samples.branch_id = b;
            let index = build_projection_index(&samples, None);
            Ok(FittedBranch {
                report: fit.report,
                samples,
                index,
            })
        })
        .collect()
}

pub fn run_fusion(
    v1: &Volume,
    v2: &Volume,
    h: &Histogram2D,
    d: &DensityField,
    paths: &[TreePath],
    params: &FusionParams,
) -> Result<FusionStage> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no path to fuse along".into()));
    }
    if params.spline_bins < 3 {
        return Err(Error::InvalidArgument("spline_bins must be at least 3".into()));
    }
    let branches = fit_branches(paths, d.n(), params.smoothing, params.sample_count).map_err(|e| e.in_stage("spline"))?;
    let samples: Vec<SplineSamples> = branches.iter().map(|b| b.samples.clone()).collect();
    let idxs: Vec<ProjectionIndex> = branches.iter().map(|b| b.index.clone()).collect();
    let field = parameterize_multibranch(d, &samples, &idxs).map_err(|e| e.in_stage("parameterize"))?;
    let fused = if params.continuous {
        fuse_volumes_continuous(v1, v2, h.binning(), &samples, &idxs)
    } else {
        fuse_volumes(v1, v2, &field, h.binning())
    }
    .map_err(|e| e.in_stage("fuse"))?;
    let spline_histogram = spline_density_histogram(h, &field, params.spline_bins)?;
    let spline_peaks = count_peaks(&spline_histogram, params.min_persistence)?;
    Ok(FusionStage {
        branches,
        field,
        fused,
        spline_histogram,
        spline_peaks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<TreePath>,
}

impl Artifact for PathSet {
    const KIND: &'static str = "paths";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineBranchRecord {
    pub report: FitReport,
    pub samples: DecimatedSpline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSet {
    pub branches: Vec<SplineBranchRecord>,
}

impl Artifact for SplineSet {
    const KIND: &'static str = "splines";
}

/// Decimated samples kept in exported spline artifacts.
pub const SPLINE_EXPORT_POINTS: usize = 4096;

impl SplineSet {
    pub fn from_branches(branches: &[FittedBranch]) -> Self {
        Self {
            branches: branches
                .iter()
                .map(|b| SplineBranchRecord {
                    report: b.report.clone(),
                    samples: b
                        .samples
                        .decimate((b.samples.len() / SPLINE_EXPORT_POINTS).max(1)),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub spline: usize,
    pub axis1: usize,
    pub axis2: usize,
}

/// Record of one run: parameters, artifact hashes, peak counts, timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
    pub peaks: PeakSummary,
    pub critical: CriticalSummary,
    pub warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
}

impl Artifact for Manifest {
    const KIND: &'static str = "manifest";
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes files into one directory and records their hashes.
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: BTreeMap<String, ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn bytes(&mut self, name: &str, file: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.entries.insert(
            name.to_string(),
            ArtifactEntry {
                file: file.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    /// Hashes a file some other writer already produced.
    pub fn record(&mut self, name: &str, file: &str) -> Result<()> {
        let path = self.path(file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.entries.insert(
            name.to_string(),
            ArtifactEntry {
                file: file.to_string(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn json<A: Artifact>(&mut self, name: &str, file: &str, a: &A) -> Result<()> {
        self.bytes(name, file, to_json_string(a)?.as_bytes())
    }

    pub fn grid(&mut self, name: &str, file: &str, n: usize, data: &GridData) -> Result<()> {
        self.bytes(name, file, &encode_grid(n, n, data)?)
    }

    pub fn entries(&self) -> &BTreeMap<String, ArtifactEntry> {
        &self.entries
    }

    pub fn into_entries(self) -> BTreeMap<String, ArtifactEntry> {
        self.entries
    }
}

pub fn write_histogram_artifacts(w: &mut ArtifactWriter, h: &Histogram2D, d: &DensityField) -> Result<()> {
    h.export(&w.path("histogram"))?;
    w.record("histogram_counts", "histogram.bin")?;
    w.record("histogram_meta", "histogram.json")?;
    w.grid("density", "density.grid", d.n(), &GridData::F64(d.values().to_vec()))
}

pub fn write_topology_artifacts(w: &mut ArtifactWriter, t: &TopologyStage) -> Result<()> {
    w.json("persistence_pairs", "persistence_pairs.json", &t.diagram)?;
    w.grid(
        "simplified",
        "simplified.grid",
        t.simplified.n(),
        &GridData::F64(t.simplified.values().to_vec()),
    )?;
    w.json("extremum_graph", "extremum_graph.json", &t.graph)?;
    w.json("weighted_graph", "weighted_graph.json", &t.weighted)?;
    w.json("mst", "mst.json", &t.mst)
}

pub fn write_path_artifacts(w: &mut ArtifactWriter, paths: &[TreePath]) -> Result<()> {
    w.json("paths", "paths.json", &PathSet { paths: paths.to_vec() })
}

pub fn write_histogram1d(w: &mut ArtifactWriter, name: &str, h: &Histogram1D) -> Result<()> {
    w.bytes(&format!("{name}_csv"), &format!("{name}.csv"), h.to_csv().as_bytes())?;
    w.json(name, &format!("{name}.json"), h)
}

pub fn write_fusion_artifacts(w: &mut ArtifactWriter, f: &FusionStage) -> Result<()> {
    w.json("splines", "splines.json", &SplineSet::from_branches(&f.branches))?;
    w.grid("fused_field", "fused_field.grid", f.field.n, &GridData::F64(f.field.values.clone()))?;
    w.grid(
        "branch_assignment",
        "branch_assignment.grid",
        f.field.n,
        &GridData::U32(f.field.branch_assignment.clone()),
    )?;
    write_volume(
        &f.fused,
        &w.path("fused.nrrd"),
        VolumeFormat::Nrrd,
        &WriteOptions::with_dtype(DType::F32),
    )?;
    w.record("fused_volume", "fused.nrrd")?;
    write_histogram1d(w, "spline_histogram", &f.spline_histogram)?;
    w.json("spline_peaks", "spline_peaks.json", &f.spline_peaks)
}

/// In-memory results of a full run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub histogram: Histogram2D,
    pub density: DensityField,
    pub topology: TopologyStage,
    pub paths: Vec<TreePath>,
    pub fusion: FusionStage,
    pub axis_histograms: [Histogram1D; 2],
    pub axis_peaks: [PeakReport; 2],
    pub warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
}

struct Clock(Vec<StageTiming>, Instant);

impl Clock {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.1).as_secs_f64(),
        });
        self.1 = now;
    }
}

/// Marginal histograms of both axes and their peaks.
pub fn axis_peak_stage(h: &Histogram2D, min_persistence: f64) -> Result<([Histogram1D; 2], [PeakReport; 2])> {
    let hs = [axis_projection_histogram(h, 1)?, axis_projection_histogram(h, 2)?];
    let peaks = [count_peaks(&hs[0], min_persistence)?, count_peaks(&hs[1], min_persistence)?];
    Ok((hs, peaks))
}

/// Advisory messages about the fitted branches.
pub fn fusion_warnings(cfg: &PipelineConfig, fusion: &FusionStage) -> Vec<String> {
    let mut warnings = Vec::new();
    for b in &fusion.branches {
        if b.report.interpolating && cfg.smoothing > 0.0 {
            warnings.push(format!(
                "branch {}: smoothing budget not met, spline interpolates the path",
                b.samples.branch_id
            ));
        }
    }
    if let Some(s) = &cfg.input.synth {
        warnings.extend(s.warnings());
    }
    warnings
}

/// Runs every stage in memory on a given volume pair.
pub fn run_on_volumes(cfg: &PipelineConfig, v1: &Volume, v2: &Volume) -> Result<PipelineRun> {
    let mut clock = Clock(Vec::new(), Instant::now());
    let h = compute_joint_histogram(v1, v2, cfg.bins, cfg.axis_ranges()?).map_err(|e| e.in_stage("histogram"))?;
    let d = log_normalize(&h);
    clock.lap("histogram");
    let topology = run_topology(&d, cfg.persistence_threshold).map_err(|e| e.in_stage("topology"))?;
    clock.lap("simplification_and_graph");
    let paths = select_paths(&topology.mst, &d, &cfg.branches, cfg.diameter_options()).map_err(|e| e.in_stage("path"))?;
    clock.lap("path");
    let fusion = run_fusion(v1, v2, &h, &d, &paths, &cfg.fusion_params())?;
    clock.lap("spline_and_fusion");
    let (axis_histograms, axis_peaks) = axis_peak_stage(&h, cfg.min_persistence).map_err(|e| e.in_stage("peaks"))?;
    clock.lap("peaks");
    let warnings = fusion_warnings(cfg, &fusion);
    Ok(PipelineRun {
        histogram: h,
        density: d,
        topology,
        paths,
        fusion,
        axis_histograms,
        axis_peaks,
        warnings,
        timings: clock.0,
    })
}

pub fn run(cfg: &PipelineConfig) -> Result<(PipelineRun, Volume, Volume)> {
    cfg.validate()?;
    let t0 = Instant::now();
    let (v1, v2) = load_inputs(&cfg.input).map_err(|e| e.in_stage("load"))?;
    let mut out = run_on_volumes(cfg, &v1, &v2)?;
    out.timings.insert(
        0,
        StageTiming {
            stage: "load".into(),
            seconds: t0.elapsed().as_secs_f64() - out.timings.iter().map(|t| t.seconds).sum::<f64>(),
        },
    );
    Ok((out, v1, v2))
}

/// Writes every artifact of a run plus the manifest into `dir`.
pub fn write_run(cfg: &PipelineConfig, r: &PipelineRun, dir: &Path) -> Result<Manifest> {
    let mut w = ArtifactWriter::new(dir)?;
    write_histogram_artifacts(&mut w, &r.histogram, &r.density)?;
    write_topology_artifacts(&mut w, &r.topology)?;
    write_path_artifacts(&mut w, &r.paths)?;
    write_fusion_artifacts(&mut w, &r.fusion)?;
    write_histogram1d(&mut w, "axis1_histogram", &r.axis_histograms[0])?;
    write_histogram1d(&mut w, "axis2_histogram", &r.axis_histograms[1])?;
    w.json("axis1_peaks", "axis1_peaks.json", &r.axis_peaks[0])?;
    w.json("axis2_peaks", "axis2_peaks.json", &r.axis_peaks[1])?;
    let manifest = Manifest {
        config: cfg.clone(),
        artifacts: w.into_entries(),
        peaks: PeakSummary {
            spline: r.fusion.spline_peaks.count,
            axis1: r.axis_peaks[0].count,
            axis2: r.axis_peaks[1].count,
        },
        critical: r.topology.critical,
        warnings: r.warnings.clone(),
        timings: r.timings.clone(),
    };
    volio::export_json(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Full pipeline from config to artifacts in `cfg.output_dir`.
pub fn cmd_fuse(cfg: &PipelineConfig) -> Result<Manifest> {
    let (r, _, _) = run(cfg)?;
    write_run(cfg, &r, &cfg.output_dir).map_err(|e| e.in_stage("write"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            bins: 64,
            sample_count: 20_000,
            tau: 0.5,
            input: InputConfig {
                synth: Some(CircularGaussians::default().with_voxels_per_blob(20_000)),
                ..InputConfig::default()
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn toml_roundtrip_and_validation() {
        let cfg = small();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(matches!(
            PipelineConfig::from_toml_str("persistence_threshold = -1.0\n[input.synth]\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_toml_str("bogus = 1\n[input.synth]\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(PipelineConfig::from_toml_str(""), Err(Error::Config(_))));
        let ok = PipelineConfig::from_toml_str("[input.synth]\nk = 4\n").unwrap();
        assert_eq!(ok.bins, 1000);
        assert_eq!(ok.input.synth.unwrap().k, 4);
    }

    #[test]
    fn small_synthetic_run_writes_hashed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.output_dir = dir.path().join("a");
        let m = cmd_fuse(&cfg).unwrap();
        for e in m.artifacts.values() {
            let bytes = fs::read(cfg.output_dir.join(&e.file)).unwrap();
            assert_eq!(sha256_hex(&bytes), e.sha256);
        }
        assert!(m.artifacts.contains_key("fused_volume"));
        let back: Manifest = volio::import_json(&cfg.output_dir.join(MANIFEST_FILE)).unwrap();
        assert_eq!(back.artifacts, m.artifacts);
    }
}
