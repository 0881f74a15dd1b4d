use serde::{Deserialize, Serialize};

use super::GridField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub vertex: usize,
    pub coords: [usize; 2],
    pub kind: CriticalKind,
    pub value: f64,
    /// Number of simple saddles a multi-saddle splits into; 1 otherwise.
    pub multiplicity: usize,
}

impl CriticalPoint {
    pub(crate) fn at(f: &GridField, vertex: usize, kind: CriticalKind, multiplicity: usize) -> Self {
        Self {
            vertex,
            coords: f.coords(vertex),
            kind,
            value: f.value(vertex),
            multiplicity,
        }
    }
}

/// Classifies `v` from its link under the vertex order.
///
/// A vertex with an empty upper link is a maximum and one with an empty
/// lower link a minimum. A vertex whose upper link splits into `c >= 2`
/// components is a saddle of multiplicity `c - 1`. On interior vertices this
/// agrees with counting lower-link components; on the truncated boundary
/// link the upper link is the one that decides whether superlevel
/// components merge.
pub fn classify_vertex(f: &GridField, v: usize) -> Option<CriticalPoint> {
    let upper = f.upper_link_count(v);
    if upper == 0 {
        return Some(CriticalPoint::at(f, v, CriticalKind::Maximum, 1));
    }
    if upper >= 2 {
        return Some(CriticalPoint::at(f, v, CriticalKind::Saddle, upper - 1));
    }
    if f.lower_link_count(v) == 0 {
        return Some(CriticalPoint::at(f, v, CriticalKind::Minimum, 1));
    }
    None
}

/// All critical vertices in index order.
pub fn classify_critical_points(f: &GridField) -> Vec<CriticalPoint> {
    (0..f.len()).filter_map(|v| classify_vertex(f, v)).collect()
}

pub fn count_kind(points: &[CriticalPoint], kind: CriticalKind) -> usize {
    points.iter().filter(|p| p.kind == kind).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_one_maximum_and_no_saddles() {
        let f = GridField::new(16, vec![0.0; 256]).unwrap();
        let cps = classify_critical_points(&f);
        assert_eq!(count_kind(&cps, CriticalKind::Maximum), 1);
        assert_eq!(count_kind(&cps, CriticalKind::Saddle), 0);
        assert_eq!(count_kind(&cps, CriticalKind::Minimum), 1);
        let max = cps.iter().find(|c| c.kind == CriticalKind::Maximum).unwrap();
        assert_eq!(max.vertex, 255);
    }

    #[test]
    fn monkey_saddle_has_multiplicity_two() {
        // Upper link alternates three times around the center vertex.
        let mut vals = vec![0.0; 9];
        let f0 = GridField::new(3, vals.clone()).unwrap();
        let link = f0.link(4).map(|u| u.unwrap());
        for (k, &u) in link.iter().enumerate() {
            vals[u] = if k % 2 == 0 { 2.0 } else { 0.0 };
        }
        vals[4] = 1.0;
        let f = GridField::new(3, vals).unwrap();
        let cp = classify_vertex(&f, 4).unwrap();
        assert_eq!(cp.kind, CriticalKind::Saddle);
        assert_eq!(cp.multiplicity, 2);
    }
}
