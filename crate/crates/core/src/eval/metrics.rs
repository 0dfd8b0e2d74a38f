use rand::Rng;

use crate::domain::PreferenceVector;
use crate::{Error, Result};

use super::EvaluationRow;

/// Mean utility of `rows`, optionally restricted to one threshold group.
pub fn average_utility(rows: &[EvaluationRow], group: Option<&[f64]>) -> Result<f64> {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| match group {
            None => true,
            Some(b) => r.target.threshold().is_some_and(|t| same_threshold(t, b)),
        })
        .map(|r| r.utility)
        .collect();
    if picked.is_empty() {
        return Err(Error::Empty("evaluation rows in group"));
    }
    Ok(picked.iter().sum::<f64>() / picked.len() as f64)
}

pub(crate) fn same_threshold(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// Utility weights of a target: its preference, or all ones when it has none.
pub fn utility_weights(pref: Option<&PreferenceVector>, n: usize) -> Vec<f64> {
    pref.map_or_else(|| vec![1.0; n], |p| p.as_slice().to_vec())
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Points not dominated by any other point, duplicates kept once, in input order.
pub fn pareto_filter(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if points.iter().any(|q| dominates(q, p)) || points[..i].contains(p) {
            continue;
        }
        out.push(p.clone());
    }
    out
}

fn check_dims(points: &[Vec<f64>], reference: &[f64]) -> Result<()> {
    for p in points {
        if p.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: p.len(),
            });
        }
    }
    Ok(())
}

/// Exact hypervolume dominated by `points` above `reference`, for up to three
/// objectives. Points that do not weakly dominate the reference are ignored.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check_dims(points, reference)?;
    let kept: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x >= r))
        .map(|p| p.iter().zip(reference).map(|(x, r)| x - r).collect())
        .collect();
    match reference.len() {
        0 => Err(Error::invalid("hypervolume needs at least one objective")),
        1 => Ok(kept.iter().map(|p| p[0]).fold(0.0, f64::max)),
        2 => {
            let pts: Vec<(f64, f64)> = kept.iter().map(|p| (p[0], p[1])).collect();
            Ok(area_2d(pts))
        }
        3 => Ok(volume_3d(kept)),
        _ => Err(Error::Unsupported {
            op: "exact hypervolume",
            kind: "more than three objective",
        }),
    }
}

/// Area dominated by nonnegative points above the origin.
fn area_2d(mut pts: Vec<(f64, f64)>) -> f64 {
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut top = 0.0;
    let mut area = 0.0;
    for (x, y) in pts {
        if y > top {
            area += x * (y - top);
            top = y;
        }
    }
    area
}

/// Slices along the last axis from the top down.
fn volume_3d(mut pts: Vec<Vec<f64>>) -> f64 {
    pts.sort_by(|a, b| b[2].total_cmp(&a[2]));
    let mut vol = 0.0;
    for i in 0..pts.len() {
        let below = pts.get(i + 1).map_or(0.0, |p| p[2]);
        let depth = pts[i][2] - below;
        if depth > 0.0 {
            vol += depth * area_2d(pts[..=i].iter().map(|p| (p[0], p[1])).collect());
        }
    }
    vol
}

/// Hit-count estimate of the hypervolume inside the bounding box of the points.
pub fn hypervolume_monte_carlo<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_dims(points, reference)?;
    if samples == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let kept: Vec<&Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x >= r))
        .collect();
    if kept.is_empty() {
        return Ok(0.0);
    }
    let upper: Vec<f64> = (0..reference.len())
        .map(|i| kept.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let boxvol: f64 = upper.iter().zip(reference).map(|(u, r)| u - r).product();
    if boxvol <= 0.0 {
        return Ok(0.0);
    }
    let mut x = vec![0.0; reference.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (xi, (r, u)) in x.iter_mut().zip(reference.iter().zip(&upper)) {
            *xi = r + (u - r) * rng.random::<f64>();
        }
        if kept.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a >= b)) {
            hits += 1;
        }
    }
    Ok(boxvol * hits as f64 / samples as f64)
}
