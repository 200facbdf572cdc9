//! Exact hypervolume indicator by recursive slicing.
//!
//! Points are maximised against a reference point. Dominated points are
//! removed first and the survivors are sorted canonically, so the result
//! does not depend on input order or on dominated points. The k = 2 base
//! case is an O(n log n) sweep; each extra dimension slices along its axis
//! and recurses, giving O(n^(k−1) log n) overall.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// `a` weakly dominates `b` when it is at least as large in every coordinate.
fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

fn pareto_front(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    // descending lexicographic order: a point can only be weakly dominated by earlier ones
    points.sort_by(|a, b| lexicographic(b, a));
    let mut front: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !front.iter().any(|f| weakly_dominates(f, &p)) {
            front.push(p);
        }
    }
    front
}

fn sweep_2d(points: &mut [&[f64]]) -> f64 {
    points.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut height = 0.0f64;
    for i in 0..points.len() {
        height = height.max(points[i][1]);
        let next_x = points.get(i + 1).map_or(0.0, |p| p[0]);
        area += (points[i][0] - next_x) * height;
    }
    area
}

/// Hypervolume of points already shifted so the reference is the origin,
/// using the first `dim` coordinates.
fn slice(points: &mut Vec<&[f64]>, dim: usize) -> f64 {
    match dim {
        1 => points.iter().fold(0.0f64, |acc, p| acc.max(p[0])),
        2 => sweep_2d(points),
        _ => {
            let axis = dim - 1;
            points.sort_by(|a, b| b[axis].total_cmp(&a[axis]).then(lexicographic(b, a)));
            let mut volume = 0.0;
            let mut active: Vec<&[f64]> = Vec::with_capacity(points.len());
            for i in 0..points.len() {
                active.push(points[i]);
                let next = points.get(i + 1).map_or(0.0, |p| p[axis]);
                let depth = points[i][axis] - next;
                if depth > 0.0 {
                    let mut layer = active.clone();
                    volume += depth * slice(&mut layer, dim - 1);
                }
            }
            volume
        }
    }
}

/// Lebesgue measure of the union of boxes `[reference, p]` over all points.
///
/// `reference` defaults to the origin. Every coordinate of every point must
/// exceed the matching reference coordinate.
pub fn hypervolume_indicator(points: &[Vec<f64>], reference: Option<&[f64]>) -> Result<f64> {
    let Some(first) = points.first() else {
        return Ok(0.0);
    };
    let k = first.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "hypervolume needs at least 2 objectives, got {k}"
        )));
    }
    let origin = vec![0.0; k];
    let reference = reference.unwrap_or(&origin);
    if reference.len() != k {
        return Err(Error::DimensionMismatch(k, reference.len()));
    }
    let mut shifted = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.len() != k {
            return Err(Error::DimensionMismatch(k, p.len()));
        }
        if let Some(j) = (0..k).find(|&j| !p[j].is_finite() || p[j].partial_cmp(&reference[j]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidParameter(format!(
                "point {i} does not dominate the reference point in objective {j} ({} vs {})",
                p[j], reference[j]
            )));
        }
        shifted.push(p.iter().zip(reference).map(|(x, r)| x - r).collect::<Vec<f64>>());
    }
    let front = pareto_front(shifted);
    let mut refs: Vec<&[f64]> = front.iter().map(Vec::as_slice).collect();
    Ok(slice(&mut refs, k))
}
