//! Lloyd k-means with k-means++ seeding, used to merge spectrum-peak candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            iterations: 50,
            restarts: 5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist2(p, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, iterations: usize) -> Clustering {
    let dim = points[0].len();
    let mut labels = vec![0; points.len()];
    for _ in 0..iterations {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (s, n)) in centers.iter_mut().zip(sums.into_iter().zip(counts)) {
            // An emptied cluster keeps its previous center.
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centers).0;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centers[l]))
        .sum();
    Clustering {
        centers,
        labels,
        inertia,
    }
}

/// Best-of-restarts k-means. Returns `None` when there are fewer points than clusters.
pub fn kmeans(points: &[Vec<f64>], k: usize, params: &KMeansParams) -> Option<Clustering> {
    if k == 0 || points.len() < k {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..params.restarts.max(1) {
        let init = seed_centers(points, k, &mut rng);
        let run = lloyd(points, init, params.iterations.max(1));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_groups() {
        let pts: Vec<Vec<f64>> = [0.30, 0.3005, 0.2995, -0.5, -0.5005, -0.4995]
            .iter()
            .map(|x| vec![*x])
            .collect();
        let c = kmeans(&pts, 2, &KMeansParams::default()).unwrap();
        let mut centers: Vec<f64> = c.centers.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] + 0.5).abs() < 1e-12);
        assert!((centers[1] - 0.3).abs() < 1e-12);
        assert_eq!(c.labels[0], c.labels[1]);
        assert_ne!(c.labels[0], c.labels[3]);
    }

    #[test]
    fn deterministic_and_guarded() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let p = KMeansParams::default();
        assert_eq!(kmeans(&pts, 3, &p), kmeans(&pts, 3, &p));
        assert!(kmeans(&pts[..2], 3, &p).is_none());
        assert!(kmeans(&pts, 0, &p).is_none());
    }
}
