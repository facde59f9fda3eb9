//! Seeded Lloyd's k-means over embedding vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

fn nearest(point: &[f32], centroids: &[Vec<f32>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// k-means++ seeding from `rng`.
fn seed_centroids(points: &[&[f32]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].to_vec()];
    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            weights
                .iter()
                .position(|&w| {
                    target -= w;
                    target < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[pick].to_vec());
    }
    centroids
}

/// Cluster index for every point. Clusters that end an iteration empty are
/// re-seeded with the point farthest from its own centroid (taken from a
/// cluster with more than one member). Clusters can still come back empty
/// when points coincide; callers must tolerate that.
pub fn kmeans(points: &[&[f32]], k: usize, seed: u64, iterations: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let dims = points[0].len();

    for _ in 0..iterations {
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        let empties: Vec<usize> = (0..k).filter(|&c| sizes[c] == 0).collect();
        for empty in empties {
            let donor = (0..n).filter(|&i| sizes[assignment[i]] > 1).max_by(|&i, &j| {
                let di = dist2(points[i], &centroids[assignment[i]]);
                let dj = dist2(points[j], &centroids[assignment[j]]);
                di.total_cmp(&dj).then(j.cmp(&i))
            });
            if let Some(i) = donor {
                sizes[assignment[i]] -= 1;
                sizes[empty] = 1;
                assignment[i] = empty;
                centroids[empty] = points[i].to_vec();
            }
        }

        let mut sums = vec![vec![0f64; dims]; k];
        for (p, &a) in points.iter().zip(&assignment) {
            for (s, &v) in sums[a].iter_mut().zip(p.iter()) {
                *s += f64::from(v);
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|&s| (s / sizes[c] as f64) as f32).collect();
            }
        }

        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    assignment
}
