//! Smoothing B-spline fits of extracted paths, equal arc-length sampling,
//! and exact nearest-sample projection.

mod arclength;
mod bspline;
mod index;

pub use arclength::{sample_arclength, DecimatedSpline, SplineSamples};
pub use bspline::{fit_smoothing_spline, BSpline, FitReport, Point, SplineFit};
pub use index::{build_projection_index, project_point, project_point_from, Projection, ProjectionIndex};

/// Default number of arc-length samples.
pub const DEFAULT_SAMPLE_COUNT: usize = 1_000_000;

/// Fits a path given in grid coordinates of an `n x n` histogram, with the
/// smoothing budget `s` applied in coordinates scaled to the unit square:
/// the summed squared residual in grid units is at most `s * n^2`. The
/// returned spline and report are in grid units.
pub fn fit_path_spline(polyline: &[[usize; 2]], s: f64, n: usize) -> crate::Result<SplineFit> {
    if n == 0 {
        return Err(crate::Error::InvalidArgument("grid size must be positive".into()));
    }
    let scale = n as f64;
    let pts: Vec<Point> = polyline
        .iter()
        .map(|p| [p[0] as f64 / scale, p[1] as f64 / scale])
        .collect();
    let fit = fit_smoothing_spline(&pts, s)?;
    let b = &fit.spline;
    let mut control: Vec<Point> = b.control_points().iter().map(|c| [c[0] * scale, c[1] * scale]).collect();
    // Pinned ends stay exactly on the end vertices.
    let last = control.len() - 1;
    control[0] = polyline_points(&polyline[..1])[0];
    control[last] = polyline_points(&polyline[polyline.len() - 1..])[0];
    let spline = BSpline::new(b.degree(), b.knots().to_vec(), control)?;
    let mut report = fit.report;
    report.residual *= scale * scale;
    report.max_residual *= scale;
    Ok(SplineFit { spline, report })
}

/// Path polyline vertices as floating-point grid coordinates.
pub fn polyline_points(polyline: &[[usize; 2]]) -> Vec<Point> {
    polyline.iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}
