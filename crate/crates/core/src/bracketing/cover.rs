//! Greedy farthest-point nets.

use rayon::prelude::*;

use super::lattice::LatticeNorm;
use crate::error::{Error, Result};

/// Indices of a farthest-point `ε`-net of `points`, starting from index 0.
///
/// Every point lies within `ε` of a center and centers are pairwise more
/// than `ε` apart. Ties go to the lowest index.
pub fn greedy_cover(points: &[Vec<f64>], eps: f64, metric: &LatticeNorm) -> Result<Vec<usize>> {
    if !(eps >= 0.0) {
        return Err(Error::Scale(format!("cover radius {eps} must be nonnegative")));
    }
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points differ in dimension".into()));
    }
    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = points.par_iter().map(|p| metric.norm_diff(p, &points[0])).collect();
    loop {
        let (far, dist) = nearest
            .par_iter()
            .enumerate()
            .map(|(i, d)| (i, *d))
            .reduce(
                || (usize::MAX, f64::NEG_INFINITY),
                |a, b| {
                    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            );
        if dist <= eps {
            return Ok(centers);
        }
        centers.push(far);
        let c = &points[far];
        nearest
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(n, p)| *n = n.min(metric.norm_diff(p, c)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_cluster_has_one_center() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 1e-3, 0.0]).collect();
        assert_eq!(greedy_cover(&pts, 0.1, &LatticeNorm::L2).unwrap(), vec![0]);
        assert!(greedy_cover(&[], 0.1, &LatticeNorm::L2).unwrap().is_empty());
    }

    #[test]
    fn unit_square_at_half_needs_at_most_four() {
        let mut pts = Vec::new();
        for i in 0..=20 {
            for j in 0..=20 {
                pts.push(vec![i as f64 / 20.0, j as f64 / 20.0]);
            }
        }
        let c = greedy_cover(&pts, 0.5, &LatticeNorm::Sup).unwrap();
        assert!(c.len() <= 4, "{}", c.len());
        for p in &pts {
            assert!(c.iter().any(|&k| LatticeNorm::Sup.norm_diff(p, &pts[k]) <= 0.5));
        }
    }

    #[test]
    fn deterministic_under_repeats() {
        let pts: Vec<Vec<f64>> = (0..300).map(|i| vec![((i * 37) % 101) as f64 / 101.0]).collect();
        let a = greedy_cover(&pts, 0.05, &LatticeNorm::L1).unwrap();
        let b = greedy_cover(&pts, 0.05, &LatticeNorm::L1).unwrap();
        assert_eq!(a, b);
    }
}
