//! Clustering of subspace data through the rows of an NMF weight matrix.

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansSettings};
use crate::matrix::DataMatrix;
use crate::nmf::{nmf_factorize, SolverSettings};
use crate::seed::SeedSpec;

/// Cluster label per row, plus the source-matrix row each entry refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub row_indices: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize, row_indices: Vec<usize>) -> Result<Self> {
        if labels.len() != row_indices.len() {
            return Err(Error::Parameter(format!(
                "{} labels for {} rows",
                labels.len(),
                row_indices.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!("label {bad} is not below k = {k}")));
        }
        let mut seen = row_indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("row appears twice in an assignment".into()));
        }
        Ok(Self {
            labels,
            k,
            row_indices,
        })
    }

    /// Source rows assigned to `cluster`, in assignment order.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .zip(&self.row_indices)
            .filter(|(&l, _)| l == cluster)
            .map(|(_, &row)| row)
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Factorizes `x ≈ WH` with `r` topics and runs k-means on the rows of `W`.
///
/// `r` should bound the summed dimension of the generating subspaces.
pub fn cluster_via_nmf(
    x: &DataMatrix,
    r: usize,
    km: &KMeansSettings,
    solver: &SolverSettings,
    seed: SeedSpec,
) -> Result<ClusterAssignment> {
    km.validate()?;
    let f = nmf_factorize(x, r, solver, seed)?;
    kmeans(&f.w, km)
}

/// Misclassified rows under the best matching of found labels to true labels.
pub fn clustering_error(found: &ClusterAssignment, truth: &[usize]) -> Result<usize> {
    if found.labels.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} found labels vs {} true labels",
            found.labels.len(),
            truth.len()
        )));
    }
    let k = truth
        .iter()
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0)
        .max(found.k);
    if k > 8 {
        return Err(Error::Parameter(format!("clustering error enumerates k! matchings; k = {k} is too large")));
    }
    // confusion[f][t] = rows with found label f and true label t
    let mut confusion = vec![vec![0usize; k]; k];
    for (&f, &t) in found.labels.iter().zip(truth) {
        confusion[f][t] += 1;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_match = 0;
    permute(&mut perm, 0, &mut |p| {
        let matched: usize = p.iter().enumerate().map(|(f, &t)| confusion[f][t]).sum();
        best_match = best_match.max(matched);
    });
    Ok(truth.len() - best_match)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{assemble_block_dataset, Subspace};

    fn assignment(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::new(labels.to_vec(), k, (0..labels.len()).collect()).unwrap()
    }

    #[test]
    fn error_examples() {
        let truth = [0, 0, 1, 1];
        assert_eq!(clustering_error(&assignment(&truth, 2), &truth).unwrap(), 0);
        assert_eq!(clustering_error(&assignment(&[1, 1, 0, 0], 2), &truth).unwrap(), 0);
        assert_eq!(clustering_error(&assignment(&[0, 1, 1, 1], 2), &truth).unwrap(), 1);
        assert_eq!(clustering_error(&assignment(&[1, 0, 0, 0], 2), &truth).unwrap(), 1);
        assert!(clustering_error(&assignment(&[0, 1], 2), &truth).is_err());
    }

    #[test]
    fn error_is_invariant_under_all_relabelings() {
        let truth = [0, 1, 2, 2, 1, 0, 0, 2, 1, 1];
        let found = [0, 1, 1, 2, 1, 0, 2, 2, 0, 1];
        let base = clustering_error(&assignment(&found, 3), &truth).unwrap();
        let mut perm = vec![0, 1, 2];
        permute(&mut perm, 0, &mut |p| {
            let relabeled: Vec<usize> = found.iter().map(|&l| p[l]).collect();
            assert_eq!(clustering_error(&assignment(&relabeled, 3), &truth).unwrap(), base);
        });
        // brute force over the 6 matchings by hand
        let manual = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
            .iter()
            .map(|p| found.iter().zip(&truth).filter(|(&f, &t)| p[f] != t).count())
            .min()
            .unwrap();
        assert_eq!(base, manual);
    }

    #[test]
    fn assignment_validation() {
        assert!(ClusterAssignment::new(vec![0, 2], 2, vec![0, 1]).is_err());
        assert!(ClusterAssignment::new(vec![0, 1], 2, vec![0, 0]).is_err());
        assert!(ClusterAssignment::new(vec![0], 2, vec![0, 1]).is_err());
        let a = ClusterAssignment::new(vec![1, 0, 1], 2, vec![5, 6, 7]).unwrap();
        assert_eq!(a.members(1), vec![5, 7]);
        assert_eq!(a.cluster_sizes(), vec![1, 2]);
    }

    #[test]
    fn coordinate_subspaces_cluster_perfectly() {
        let u = Subspace::coordinate(80, 0..5).unwrap();
        let v = Subspace::coordinate(80, 5..10).unwrap();
        let ds = assemble_block_dataset(&u, &v, 100, true, SeedSpec::new(12, 0)).unwrap();
        let found = cluster_via_nmf(
            &ds.x,
            10,
            &KMeansSettings::new(2, SeedSpec::new(12, 1)),
            &SolverSettings::default(),
            SeedSpec::new(12, 2),
        )
        .unwrap();
        assert_eq!(clustering_error(&found, &ds.true_labels).unwrap(), 0);
    }

    #[test]
    fn single_subspace_still_yields_two_clusters() {
        let u = Subspace::coordinate(20, 0..3).unwrap();
        let ds = assemble_block_dataset(&u, &u, 30, false, SeedSpec::new(2, 0)).unwrap();
        let half = ds.x.select_rows(&(0..30).collect::<Vec<_>>()).unwrap();
        let found = cluster_via_nmf(
            &half,
            6,
            &KMeansSettings::new(2, SeedSpec::new(2, 1)),
            &SolverSettings::with_iters(100),
            SeedSpec::new(2, 2),
        )
        .unwrap();
        assert_eq!(found.labels.len(), 30);
        assert_eq!(found.k, 2);
        assert!(found.labels.iter().all(|&l| l < 2));
    }
}
