use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::{Error, Result};

/// Clouds smaller than this are linked by exhaustive pair checks; larger
/// ones go through a spatial hash with cell size `ε`.
pub const BRUTE_FORCE_LIMIT: usize = 2000;

/// Indices (ascending) of one connected group of points.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Cluster {
    pub indices: Vec<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

fn cell_of(p: &nalgebra::Point3<f64>, eps: f64) -> (i64, i64, i64) {
    (
        libm::floor(p.x / eps) as i64,
        libm::floor(p.y / eps) as i64,
        libm::floor(p.z / eps) as i64,
    )
}

fn link_pairs(cloud: &PointCloud, eps: f64, set: &mut DisjointSet) {
    let pts = cloud.points();
    let eps2 = eps * eps;
    if pts.len() < BRUTE_FORCE_LIMIT {
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if (pts[i] - pts[j]).norm_squared() <= eps2 {
                    set.union(i, j);
                }
            }
        }
        return;
    }
    let mut grid: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in pts.iter().enumerate() {
        grid.entry(cell_of(p, eps)).or_default().push(i);
    }
    for (i, p) in pts.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, eps);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (pts[i] - pts[j]).norm_squared() <= eps2 {
                            set.union(i, j);
                        }
                    }
                }
            }
        }
    }
}

/// Connected components of the graph linking points at distance `≤ ε`,
/// keeping components with at least `min_points` members. Clusters come
/// largest first, ties broken by smallest member index.
pub fn euclidean_cluster(cloud: &PointCloud, epsilon: f64, min_points: usize) -> Result<Vec<Cluster>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be positive and finite"));
    }
    if min_points == 0 {
        return Err(Error::invalid("min_points", "must be at least one"));
    }
    let n = cloud.len();
    let mut set = DisjointSet::new(n);
    link_pairs(cloud, epsilon, &mut set);

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = set.find(i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .filter(|members| members.len() >= min_points)
        .map(|indices| Cluster { indices })
        .collect();
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a.indices[0].cmp(&b.indices[0])));
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_cluster() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap();
        let c = euclidean_cluster(&cloud, 0.01, 1).unwrap();
        assert_eq!(c, vec![Cluster { indices: vec![0] }]);
    }

    #[test]
    fn small_blob_discarded() {
        let pts: Vec<[f64; 3]> = (0..5).map(|i| [i as f64 * 0.001, 0.0, 0.0]).collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        assert!(euclidean_cluster(&cloud, 0.01, 10).unwrap().is_empty());
    }

    #[test]
    fn link_at_exactly_epsilon() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let c = euclidean_cluster(&cloud, 0.5, 1).unwrap();
        assert_eq!(c[0].indices, vec![0, 1]);
        assert_eq!(c[1].indices, vec![2]);
    }

    #[test]
    fn chain_connectivity() {
        // consecutive points 0.9ε apart; the ends are far beyond ε
        let pts: Vec<[f64; 3]> = (0..20).map(|i| [i as f64 * 0.009, 0.0, 0.0]).collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        let c = euclidean_cluster(&cloud, 0.01, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 20);
    }

    #[test]
    fn ordering_by_size_then_index() {
        let cloud = PointCloud::from_xyz(&[
            [5.0, 0.0, 0.0],
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.001],
            [9.0, 0.0, 0.0],
        ])
        .unwrap();
        let c = euclidean_cluster(&cloud, 0.01, 1).unwrap();
        assert_eq!(c[0].indices, vec![1, 2]);
        assert_eq!(c[1].indices, vec![0]);
        assert_eq!(c[2].indices, vec![3]);
    }
}
