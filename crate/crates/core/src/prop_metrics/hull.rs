//! Convex-hull volume in two and three dimensions.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Hull measure (area for k = 2) and whether the input was affinely degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVolume {
    pub volume: f64,
    pub degenerate: bool,
}

impl HullVolume {
    fn degenerate() -> Self {
        HullVolume {
            volume: 0.0,
            degenerate: true,
        }
    }
}

const REL_EPS: f64 = 1e-10;

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn area_2d(points: &[Vec<f64>]) -> HullVolume {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return HullVolume::degenerate();
    }
    // Andrew's monotone chain
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let area = 0.5
        * (0..hull.len())
            .map(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            .abs();
    let extent = bounding_extent(points);
    if hull.len() < 3 || area <= REL_EPS * extent * extent {
        HullVolume::degenerate()
    } else {
        HullVolume {
            volume: area,
            degenerate: false,
        }
    }
}

fn bounding_extent(points: &[Vec<f64>]) -> f64 {
    let k = points[0].len();
    (0..k)
        .map(|j| {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

struct Face {
    v: [usize; 3],
    normal: V3,
    offset: f64,
}

impl Face {
    fn new(pts: &[V3], v: [usize; 3]) -> Face {
        let n = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
        let len = norm(n);
        let normal = [n[0] / len, n[1] / len, n[2] / len];
        Face {
            v,
            normal,
            offset: dot(normal, pts[v[0]]),
        }
    }

    fn distance(&self, p: V3) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

fn farthest<F: Fn(V3) -> f64>(pts: &[V3], f: F) -> (usize, f64) {
    pts.iter()
        .enumerate()
        .map(|(i, &p)| (i, f(p)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Incremental 3-D hull; O(n·F) with F the number of faces.
fn volume_3d(points: &[Vec<f64>]) -> HullVolume {
    let pts: Vec<V3> = points.iter().map(|p| [p[0], p[1], p[2]]).collect();
    let scale = bounding_extent(points);
    if scale == 0.0 {
        return HullVolume::degenerate();
    }
    let eps = REL_EPS * scale;

    let (i0, _) = farthest(&pts, |p| -p[0]);
    let (i1, d1) = farthest(&pts, |p| norm(sub(p, pts[i0])));
    if d1 <= eps {
        return HullVolume::degenerate();
    }
    let axis = sub(pts[i1], pts[i0]);
    let (i2, d2) = farthest(&pts, |p| norm(cross(axis, sub(p, pts[i0]))) / norm(axis));
    if d2 <= eps {
        return HullVolume::degenerate();
    }
    let base = Face::new(&pts, [i0, i1, i2]);
    let (i3, d3) = farthest(&pts, |p| base.distance(p).abs());
    if d3 <= eps {
        return HullVolume::degenerate();
    }

    let interior = {
        let s = [pts[i0], pts[i1], pts[i2], pts[i3]];
        [
            (s[0][0] + s[1][0] + s[2][0] + s[3][0]) / 4.0,
            (s[0][1] + s[1][1] + s[2][1] + s[3][1]) / 4.0,
            (s[0][2] + s[1][2] + s[2][2] + s[3][2]) / 4.0,
        ]
    };
    let outward = |v: [usize; 3]| {
        let f = Face::new(&pts, v);
        if f.distance(interior) > 0.0 {
            Face::new(&pts, [v[0], v[2], v[1]])
        } else {
            f
        }
    };
    let mut faces: Vec<Face> = vec![
        outward([i0, i1, i2]),
        outward([i0, i1, i3]),
        outward([i0, i2, i3]),
        outward([i1, i2, i3]),
    ];

    for (p_idx, &p) in pts.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&p_idx) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| f.distance(p) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for e in 0..3 {
                edge_owner.insert((f.v[e], f.v[(e + 1) % 3]), fi);
            }
        }
        let mut horizon = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            if !visible[fi] {
                continue;
            }
            for e in 0..3 {
                let (a, b) = (f.v[e], f.v[(e + 1) % 3]);
                let twin = edge_owner.get(&(b, a)).copied();
                if twin.is_none_or(|t| !visible[t]) {
                    horizon.push((a, b));
                }
            }
        }
        let mut kept: Vec<Face> = faces
            .into_iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| f)
            .collect();
        for (a, b) in horizon {
            kept.push(Face::new(&pts, [a, b, p_idx]));
        }
        faces = kept;
    }

    let volume: f64 = faces
        .iter()
        .map(|f| {
            let a = sub(pts[f.v[0]], interior);
            let b = sub(pts[f.v[1]], interior);
            let c = sub(pts[f.v[2]], interior);
            dot(a, cross(b, c)).abs() / 6.0
        })
        .sum();
    HullVolume {
        volume,
        degenerate: false,
    }
}

/// Volume of the convex hull of `points` (area when k = 2).
///
/// Affinely dependent input yields volume 0 with `degenerate` set.
pub fn convex_hull_volume(points: &[Vec<f64>]) -> Result<HullVolume> {
    let Some(first) = points.first() else {
        return Err(Error::Empty("convex hull needs points"));
    };
    let k = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != k) {
        return Err(Error::DimensionMismatch(k, p.len()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite coordinate".into()));
    }
    match k {
        2 | 3 if points.len() < k + 1 => Ok(HullVolume::degenerate()),
        2 => Ok(area_2d(points)),
        3 => Ok(volume_3d(points)),
        _ => Err(Error::Unsupported(format!(
            "convex-hull volume is implemented for 2 or 3 dimensions, got {k}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_square() {
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(convex_hull_volume(&tri).unwrap().volume, 0.5);
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(convex_hull_volume(&sq).unwrap().volume, 1.0);
    }

    #[test]
    fn cube_with_interior_and_coplanar_points() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        pts.push(vec![0.5, 0.5, 1.0]);
        pts.push(vec![0.0, 0.5, 0.5]);
        let v = convex_hull_volume(&pts).unwrap();
        assert!(!v.degenerate);
        assert!((v.volume - 1.0).abs() < 1e-12, "{}", v.volume);
    }

    #[test]
    fn tetrahedron() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!((convex_hull_volume(&pts).unwrap().volume - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(convex_hull_volume(&line).unwrap(), HullVolume::degenerate());
        let plane = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert!(convex_hull_volume(&plane).unwrap().degenerate);
        assert!(convex_hull_volume(&vec![vec![0.0; 4]; 6]).is_err());
    }
}
