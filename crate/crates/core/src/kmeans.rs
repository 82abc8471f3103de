//! Lloyd's k-means with k-means++ seeding and best-of-N restarts.

use rand::Rng;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansSettings {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: SeedSpec,
}

impl KMeansSettings {
    /// Ten restarts of at most 300 Lloyd iterations.
    pub fn new(k: usize, seed: SeedSpec) -> Self {
        Self {
            k,
            restarts: 10,
            max_iters: 300,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k-means needs k >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Parameter("k-means needs at least one restart".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("k-means needs max_iters >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub assignment: ClusterAssignment,
    /// `k × d` centroids, row `c` belonging to label `c`.
    pub centroids: DataMatrix,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init<R: Rng>(points: &DataMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut centroids = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // every point coincides with a centroid
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &DataMatrix, mut centroids: Vec<Vec<f64>>, max_iters: usize) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let (n, d) = points.shape();
    let k = centroids.len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(points.row(i), &centroids);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Empty cluster: move it onto the point worst served by its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), &centroids[labels[a]]);
                        let db = sq_dist(points.row(b), &centroids[labels[b]]);
                        da.total_cmp(&db)
                    })
                    .expect("n >= k >= 1");
                centroids[c] = points.row(far).to_vec();
                labels[far] = c;
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centroids[labels[i]]))
        .sum();
    (labels, centroids, inertia)
}

/// Renumbers clusters in order of first appearance.
fn canonicalize(labels: &mut [usize], centroids: &mut Vec<Vec<f64>>) {
    let k = centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in labels.iter() {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for slot in map.iter_mut().filter(|m| **m == usize::MAX) {
        *slot = next;
        next += 1;
    }
    for l in labels.iter_mut() {
        *l = map[*l];
    }
    let mut reordered = vec![Vec::new(); k];
    for (old, c) in centroids.drain(..).enumerate() {
        reordered[map[old]] = c;
    }
    *centroids = reordered;
}

/// Clusters the rows of `points` into `settings.k` groups.
pub fn kmeans(points: &DataMatrix, settings: &KMeansSettings) -> Result<ClusterAssignment> {
    Ok(kmeans_fit(points, settings)?.assignment)
}

pub fn kmeans_fit(points: &DataMatrix, settings: &KMeansSettings) -> Result<KMeansFit> {
    settings.validate()?;
    let (n, d) = points.shape();
    if n < settings.k {
        return Err(Error::Parameter(format!(
            "k-means with k = {} on only {n} points",
            settings.k
        )));
    }
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    for restart in 0..settings.restarts {
        let mut rng = settings.seed.child(restart as u64).rng();
        let init = plus_plus_init(points, settings.k, &mut rng);
        let run = lloyd(points, init, settings.max_iters);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (mut labels, mut centroids, inertia) = best.expect("at least one restart");
    canonicalize(&mut labels, &mut centroids);
    let centroids = DataMatrix::new(settings.k, d, centroids.concat())?;
    Ok(KMeansFit {
        assignment: ClusterAssignment::new(labels, settings.k, (0..n).collect())?,
        centroids,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::clustering_error;
    use crate::matrix::uniform_random_matrix;

    #[test]
    fn single_cluster_centroid_is_mean() {
        let pts = uniform_random_matrix(30, 4, SeedSpec::new(1, 1)).unwrap();
        let fit = kmeans_fit(&pts, &KMeansSettings::new(1, SeedSpec::new(1, 2))).unwrap();
        assert!(fit.assignment.labels.iter().all(|&l| l == 0));
        for j in 0..4 {
            let mean = (0..30).map(|i| pts.get(i, j)).sum::<f64>() / 30.0;
            assert!((fit.centroids.get(0, j) - mean).abs() <= 1e-12);
        }
    }

    /// Two groups whose gap is 100 times their diameter.
    fn separated_groups(seed: u64) -> (DataMatrix, Vec<usize>) {
        let a = uniform_random_matrix(25, 3, SeedSpec::new(seed, 1)).unwrap();
        let b = uniform_random_matrix(15, 3, SeedSpec::new(seed, 2)).unwrap();
        let diameter = 3f64.sqrt();
        let shifted: Vec<f64> = b.as_slice().iter().map(|v| v + 100.0 * diameter).collect();
        let b = DataMatrix::new(15, 3, shifted).unwrap();
        let pts = DataMatrix::vstack(&[&a, &b]).unwrap();
        let truth = (0..40).map(|i| usize::from(i >= 25)).collect();
        (pts, truth)
    }

    #[test]
    fn separated_groups_are_found_exactly() {
        for seed in 0..10 {
            let (pts, truth) = separated_groups(seed);
            let found = kmeans(&pts, &KMeansSettings::new(2, SeedSpec::new(seed, 9))).unwrap();
            assert_eq!(clustering_error(&found, &truth).unwrap(), 0);
            // brute-force check: the two groups are exactly the two label classes
            assert!(found.labels[..25].iter().all(|&l| l == found.labels[0]));
            assert!(found.labels[25..].iter().all(|&l| l == found.labels[25]));
            assert_ne!(found.labels[0], found.labels[25]);
        }
    }

    #[test]
    fn duplicated_points_keep_the_partition() {
        let (pts, _) = separated_groups(4);
        let doubled = DataMatrix::vstack(&[&pts, &pts]).unwrap();
        let s = KMeansSettings::new(2, SeedSpec::new(4, 4));
        let once = kmeans(&pts, &s).unwrap();
        let twice = kmeans(&doubled, &s).unwrap();
        let first_half = ClusterAssignment::new(twice.labels[..40].to_vec(), 2, (0..40).collect()).unwrap();
        assert_eq!(clustering_error(&first_half, &once.labels).unwrap(), 0);
        assert_eq!(twice.labels[..40], twice.labels[40..]);
    }

    #[test]
    fn too_few_points() {
        let pts = DataMatrix::zeros(2, 3);
        assert!(matches!(
            kmeans(&pts, &KMeansSettings::new(3, SeedSpec::new(0, 0))),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn identical_points_do_not_break_seeding() {
        let pts = DataMatrix::new(6, 2, vec![1.0; 12]).unwrap();
        let a = kmeans(&pts, &KMeansSettings::new(3, SeedSpec::new(0, 0))).unwrap();
        assert_eq!(a.labels.len(), 6);
        assert!(a.labels.iter().all(|&l| l < 3));
    }

    #[test]
    fn deterministic_given_seed() {
        let pts = uniform_random_matrix(50, 5, SeedSpec::new(2, 2)).unwrap();
        let s = KMeansSettings::new(3, SeedSpec::new(6, 1));
        assert_eq!(kmeans(&pts, &s).unwrap(), kmeans(&pts, &s).unwrap());
    }
}
