//! Acceptance criteria 1 to 7, run in order with one result line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topofuse::fusion::{fuse_volumes, parameterize_grid, parameterize_multibranch, FusionMode, MERGED_ELL_MAX};
use topofuse::histogram::{compute_joint_histogram, log_normalize};
use topofuse::pathfind::{minimum_spanning_tree, tree_diameter_path, DiameterOptions};
use topofuse::pipeline::{cmd_fuse, run, run_on_volumes, sha256_hex, Manifest, PipelineConfig};
use topofuse::spline::{
    build_projection_index, fit_smoothing_spline, project_point, project_point_from, sample_arclength, Point,
    ProjectionIndex, SplineSamples,
};
use topofuse::synth::CircularGaussians;
use topofuse::topology::{compute_persistence_pairs, simplify, GridField};
use topofuse::volio::Volume;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_criterion(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn full_config(dir: &Path) -> PipelineConfig {
    PipelineConfig {
        output_dir: dir.to_path_buf(),
        ..PipelineConfig::synthetic()
    }
}

fn verify_on_disk(m: &Manifest, dir: &Path) -> Result<(), String> {
    for (name, e) in &m.artifacts {
        let bytes = std::fs::read(dir.join(&e.file)).map_err(|err| format!("{name}: {err}"))?;
        check(sha256_hex(&bytes) == e.sha256, || format!("{name}: hash on disk differs from manifest"))?;
    }
    Ok(())
}

/// Circular Gaussians end to end: 8 spline peaks, 3 peaks per axis, within 120 s.
fn criterion_1(dir: &Path) -> Outcome {
    let cfg = full_config(dir);
    check(cfg.bins == 1000 && cfg.persistence_threshold == 0.0 && cfg.smoothing == 0.01, || {
        "synthetic config drifted from 1000 bins / threshold 0 / smoothing 0.01".into()
    })?;
    check(cfg.input.synth.as_ref().is_some_and(|s| s.k == 8), || "fixture k != 8".into())?;
    let t0 = Instant::now();
    let m = cmd_fuse(&cfg).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    verify_on_disk(&m, dir)?;
    let p = m.peaks;
    let detail = format!(
        "spline {} axis1 {} axis2 {} in {secs:.1} s (min_persistence {})",
        p.spline, p.axis1, p.axis2, cfg.min_persistence
    );
    check(cfg.min_persistence == 0.05, || format!("min_persistence {} != 0.05", cfg.min_persistence))?;
    check(p.spline == 8 && p.axis1 == 3 && p.axis2 == 3, || detail.clone())?;
    check(secs <= 120.0, || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn random_spline(rng: &mut ChaCha8Rng, count: usize) -> SplineSamples {
    loop {
        let m = rng.gen_range(4..12);
        let scale = rng.gen_range(1.0..500.0);
        let pts: Vec<Point> = (0..m).map(|_| [rng.gen::<f64>() * scale, rng.gen::<f64>() * scale]).collect();
        let s = [0.0, 0.01, 1.0][rng.gen_range(0..3)] * scale;
        if let Ok(fit) = fit_smoothing_spline(&pts, s) {
            if let Ok(samples) = sample_arclength(&fit.spline, count) {
                return samples;
            }
        }
    }
}

fn random_query(rng: &mut ChaCha8Rng, s: &SplineSamples) -> Point {
    let (lo, hi) = s.points.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let ext = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    match rng.gen_range(0..10) {
        // On a sample.
        0 => s.points[rng.gen_range(0..s.len())],
        // Midway between consecutive samples.
        1 => {
            let i = rng.gen_range(0..s.len() - 1);
            let (a, b) = (s.points[i], s.points[i + 1]);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        }
        // Far outside the curve's bounding box.
        2 => [lo[0] + rng.gen_range(-5.0..6.0) * ext, lo[1] + rng.gen_range(-5.0..6.0) * ext],
        _ => [
            lo[0] + rng.gen_range(-0.5..1.5) * ext,
            lo[1] + rng.gen_range(-0.5..1.5) * ext,
        ],
    }
}

/// Accelerated projection against an exhaustive scan.
fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0usize;
    let mut queries = 0usize;
    for _ in 0..50 {
        let s = random_spline(&mut rng, 1000);
        let idx = build_projection_index(&s, None);
        let mut hint = None;
        for _ in 0..10_000 {
            let q = random_query(&mut rng, &s);
            let fast = if rng.gen_bool(0.5) {
                project_point(&idx, &s, q).index
            } else {
                project_point_from(&idx, &s, q, hint).index
            };
            hint = Some(fast);
            mismatches += usize::from(fast != brute_nearest(&s.points, q));
            queries += 1;
        }
    }
    let big = random_spline(&mut rng, 1_000_000);
    let idx: ProjectionIndex = build_projection_index(&big, None);
    for _ in 0..1000 {
        let q = random_query(&mut rng, &big);
        mismatches += usize::from(project_point(&idx, &big, q).index != brute_nearest(&big.points, q));
        queries += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!("{mismatches} mismatches in {queries} queries, {secs:.1} s");
    check(mismatches == 0 && secs <= 60.0, || detail.clone())?;
    Ok(detail)
}

/// Persistence pairs against the flood-fill oracle, and simplification
/// leaving no pair below the threshold.
fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pair_total = 0usize;
    for trial in 0..200 {
        let n = rng.gen_range(2..=32);
        let values = random_field(&mut rng, n);
        let f = GridField::new(n, values.clone()).map_err(|e| e.to_string())?;
        let mut got: Vec<(usize, usize, f64)> = compute_persistence_pairs(&f)
            .iter()
            .map(|p| (p.creator.vertex, p.destroyer.vertex, p.persistence))
            .collect();
        got.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let want = brute_persistence_pairs(n, &values, f.offsets());
        check(got.len() == want.len(), || {
            format!("field {trial} (n={n}): {} pairs, oracle {}", got.len(), want.len())
        })?;
        for (g, w) in got.iter().zip(&want) {
            check(g.0 == w.0 && g.1 == w.1 && (g.2 - w.2).abs() <= 1e-12, || {
                format!("field {trial} (n={n}): pair {g:?}, oracle {w:?}")
            })?;
        }
        pair_total += got.len();

        let t = rng.gen_range(0.0..0.4);
        let (lo, hi) = f.value_range();
        let cut = t * (hi - lo);
        let pairs = compute_persistence_pairs(&f);
        let s = simplify(&f, &pairs, t).map_err(|e| e.to_string())?;
        let left = brute_persistence_pairs(n, s.values(), s.offsets());
        if let Some(p) = left.iter().find(|p| p.2 < cut) {
            return Err(format!("field {trial} (n={n}) t={t:.3}: pair {p:?} survives below {cut}"));
        }
    }
    Ok(format!("200 fields, {pair_total} pairs matched exactly"))
}

/// Spanning forest weight against exhaustive search, and tree diameter
/// against all-pairs path weights.
fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let count = rng.gen_range(1..=10);
        let mut all: Vec<(usize, usize)> = (0..count).flat_map(|u| (u + 1..count).map(move |v| (u, v))).collect();
        let keep = rng.gen_range(0..=all.len().min(14));
        let mut edges = Vec::new();
        while edges.len() < keep {
            let (u, v) = all.swap_remove(rng.gen_range(0..all.len()));
            let w = if rng.gen_bool(0.3) { rng.gen_range(1..4) as f64 } else { rng.gen::<f64>() * 10.0 };
            edges.push((u, v, w));
        }
        let g = graph_from_edges(count, &edges);
        let t = minimum_spanning_tree(&g).map_err(|e| e.to_string())?;
        let want = exhaustive_msf_weight(count, &edges);
        let want = if want.is_finite() { want } else { 0.0 };
        check((t.total_weight() - want).abs() <= 1e-9, || {
            format!("graph {trial}: forest weight {}, exhaustive {want}", t.total_weight())
        })?;
    }
    for trial in 0..100 {
        let count = rng.gen_range(1..=12);
        let edges: Vec<(usize, usize, f64)> = (1..count)
            .map(|v| (rng.gen_range(0..v), v, rng.gen::<f64>() * 10.0))
            .collect();
        let g = graph_from_edges(count, &edges);
        let p = tree_diameter_path(&g, DiameterOptions::default()).map_err(|e| e.to_string())?;
        let want = all_pairs_tree_diameter(count, &edges);
        check((p.total_weight - want).abs() <= 1e-9, || {
            format!("tree {trial}: diameter {}, all-pairs {want}", p.total_weight)
        })?;
    }
    Ok("100 graphs and 100 trees agree".into())
}

fn random_volume_pair(rng: &mut ChaCha8Rng) -> (Volume, Volume) {
    let len = 32 * 32 * 32;
    let a: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() * 100.0).collect();
    let slope = rng.gen_range(-2.0..2.0);
    let b: Vec<f64> = a.iter().map(|&x| slope * x + rng.gen::<f64>() * 40.0).collect();
    (
        Volume::new([32, 32, 32], a).unwrap(),
        Volume::new([32, 32, 32], b).unwrap(),
    )
}

fn grid_spline(rng: &mut ChaCha8Rng, n: usize) -> (SplineSamples, ProjectionIndex) {
    loop {
        let pts: Vec<Point> = (0..rng.gen_range(3..8))
            .map(|_| [rng.gen::<f64>() * (n - 1) as f64, rng.gen::<f64>() * (n - 1) as f64])
            .collect();
        if let Ok(fit) = fit_smoothing_spline(&pts, 1.0) {
            if let Ok(s) = sample_arclength(&fit.spline, 5000) {
                let idx = build_projection_index(&s, None);
                return (s, idx);
            }
        }
    }
}

/// Histogram conservation, fused value ranges, and voxelwise pullback.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..6 {
        let (v1, v2) = random_volume_pair(&mut rng);
        let n = [16, 64, 100][trial % 3];
        let h = compute_joint_histogram(&v1, &v2, n, None).map_err(|e| e.to_string())?;
        check(h.total_count() == v1.len() as u64 && h.counts().iter().sum::<u64>() == 32 * 32 * 32, || {
            format!("pair {trial}: histogram holds {} of {} voxels", h.total_count(), v1.len())
        })?;
        let d = log_normalize(&h);
        let (s0, i0) = grid_spline(&mut rng, n);
        let (s1, i1) = grid_spline(&mut rng, n);
        let single = parameterize_grid(&d, &s0, &i0);
        let merged =
            parameterize_multibranch(&d, &[s0.clone(), s1.clone()], &[i0.clone(), i1.clone()]).map_err(|e| e.to_string())?;
        check(single.mode == FusionMode::Single && merged.mode == FusionMode::Merged, || "modes".into())?;
        for (field, k) in [(&single, 1usize), (&merged, 2usize)] {
            let fused = fuse_volumes(&v1, &v2, field, h.binning()).map_err(|e| e.to_string())?;
            for (c, &v) in field.values.iter().enumerate() {
                let ok = if k == 1 {
                    (0.0..=1.0).contains(&v)
                } else {
                    v >= 0.0 && v < k as f64 && v.floor() as u32 == field.branch_assignment[c]
                };
                check(ok, || format!("pair {trial} k={k}: cell {c} holds {v}"))?;
            }
            let (a0, a1) = (v1.values().iter().cloned().fold(f64::INFINITY, f64::min), v1.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let (b0, b1) = (v2.values().iter().cloned().fold(f64::INFINITY, f64::min), v2.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            for _ in 0..10_000 {
                let t = rng.gen_range(0..v1.len());
                let (i, j) = (oracle_bin(v1.values()[t], a0, a1, n), oracle_bin(v2.values()[t], b0, b1, n));
                let want = field.values[i + n * j];
                check(fused.values()[t] == want, || {
                    format!("pair {trial} k={k}: voxel {t} fused {} expected {want}", fused.values()[t])
                })?;
            }
        }
    }
    Ok("6 volume pairs of 32^3, single and merged".into())
}

/// Two identical full runs give identical artifact hashes; the second run
/// uses a four-thread pool.
fn criterion_6(dir: &Path, first: Option<&Manifest>) -> Outcome {
    let cfg = full_config(dir);
    let a = match first {
        Some(m) => m.clone(),
        None => cmd_fuse(&cfg).map_err(|e| e.to_string())?,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(|e| e.to_string())?;
    let b = pool.install(|| cmd_fuse(&cfg)).map_err(|e| e.to_string())?;
    verify_on_disk(&b, dir)?;
    check(a.artifacts.len() == b.artifacts.len(), || "artifact sets differ".into())?;
    for (name, e) in &a.artifacts {
        let other = b.artifacts.get(name).ok_or_else(|| format!("{name} missing in second run"))?;
        check(other.sha256 == e.sha256, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts identical", a.artifacts.len()))
}

/// Two branches on the synthetic fixture give a merged field covering [0, 2).
fn criterion_7() -> Outcome {
    let mut cfg = PipelineConfig {
        bins: 256,
        sample_count: 200_000,
        ..PipelineConfig::synthetic()
    };
    let synth = CircularGaussians {
        levels: 256,
        ..CircularGaussians::default().with_voxels_per_blob(40_000)
    };
    cfg.input.synth = Some(synth);
    let (r, v1, v2) = run(&cfg).map_err(|e| e.to_string())?;
    let nodes = &r.paths[0].nodes;
    check(nodes.len() >= 3, || format!("diameter has {} nodes", nodes.len()))?;
    let mid = nodes[nodes.len() / 2];
    cfg.branches = vec![[nodes[0], mid], [mid, *nodes.last().unwrap()]];
    let two = run_on_volumes(&cfg, &v1, &v2).map_err(|e| e.to_string())?;
    let f = &two.fusion.field;
    check(f.mode == FusionMode::Merged && f.branch_count == 2, || "not a two-branch merge".into())?;
    let (lo, hi) = f.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    check(lo == 0.0 && hi == 1.0 + MERGED_ELL_MAX, || format!("field spans [{lo}, {hi}]"))?;
    for (c, &v) in f.values.iter().enumerate() {
        check(v.floor() as u32 == f.branch_assignment[c], || format!("cell {c}: {v} vs branch {}", f.branch_assignment[c]))?;
    }
    let used = [0u32, 1].map(|b| f.branch_assignment.iter().filter(|&&a| a == b).count());
    check(used[0] > 0 && used[1] > 0, || format!("branch cell counts {used:?}"))?;
    let (vlo, vhi) = two.fusion.fused.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    check(vlo >= 0.0 && vhi < 2.0, || format!("fused volume spans [{vlo}, {vhi}]"))?;
    Ok(format!(
        "field [{lo}, {hi:.7}], fused volume [{vlo:.4}, {vhi:.4}], branch cells {used:?}"
    ))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fuse");
    let mut first: Option<Manifest> = None;
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    results.push((
        1,
        run_criterion(|| {
            let r = criterion_1(&out);
            first = topofuse::volio::import_json(&out.join(topofuse::pipeline::MANIFEST_FILE)).ok();
            r
        }),
    ));
    results.push((2, run_criterion(criterion_2)));
    results.push((3, run_criterion(criterion_3)));
    results.push((4, run_criterion(criterion_4)));
    results.push((5, run_criterion(criterion_5)));
    results.push((6, run_criterion(|| criterion_6(&out, first.as_ref()))));
    results.push((7, run_criterion(criterion_7)));
    let mut failed = Vec::new();
    for (k, r) in &results {
        match r {
            Ok(msg) => println!("criterion {k}: PASS - {msg}"),
            Err(msg) => {
                println!("criterion {k}: FAIL - {msg}");
                failed.push(*k);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
