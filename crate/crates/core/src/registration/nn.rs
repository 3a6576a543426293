//! Nearest-neighbour correspondence.
//!
//! Small targets are scanned linearly; larger ones go through a static
//! kd-tree (median splits on the widest axis). Both paths break distance
//! ties towards the lowest target index, so they agree exactly.

use crate::geom::{dist2, Alignment, PointCloud};
use crate::registration::Matching;
use crate::{Error, Result};

const BRUTE_FORCE_BELOW: usize = 64;
const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Read-only nearest-neighbour index over a target cloud.
#[derive(Clone, Debug)]
pub struct SpatialIndex<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> SpatialIndex<'a> {
    pub fn build(cloud: &'a PointCloud) -> Self {
        let mut index = Self {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
        };
        if cloud.len() >= BRUTE_FORCE_BELOW {
            index.build_node(0, cloud.len());
        }
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let d = self.cloud.dim();
        let axis = (0..d)
            .max_by(|&a, &b| self.spread(start, end, a).total_cmp(&self.spread(start, end, b)))
            .unwrap_or(0);
        let mid = (start + end) / 2;
        let cloud = self.cloud;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            cloud.point(i)[axis].total_cmp(&cloud.point(j)[axis])
        });
        let value = cloud.point(self.order[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn spread(&self, start: usize, end: usize, axis: usize) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            let x = self.cloud.point(i)[axis];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        hi - lo
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Nearest target `(index, squared distance)`; `None` on an empty cloud.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        self.nearest_within(query, f64::INFINITY)
    }

    /// Nearest target with squared distance `≤ max_d2`.
    pub fn nearest_within(&self, query: &[f64], max_d2: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut radius = max_d2;
        if self.nodes.is_empty() {
            for i in 0..self.cloud.len() {
                consider(&mut best, &mut radius, i, dist2(query, self.cloud.point(i)));
            }
        } else {
            self.search(0, query, &mut best, &mut radius);
        }
        best
    }

    fn search(&self, node: usize, query: &[f64], best: &mut Option<(usize, f64)>, radius: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    consider(best, radius, i, dist2(query, self.cloud.point(i)));
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best, radius);
                // `<=`: an equally distant point with a lower index may sit
                // on the far side.
                if diff * diff <= *radius {
                    self.search(far, query, best, radius);
                }
            }
        }
    }
}

#[inline]
fn consider(best: &mut Option<(usize, f64)>, radius: &mut f64, i: usize, d2: f64) {
    if d2 > *radius {
        return;
    }
    let take = match *best {
        None => true,
        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
    };
    if take {
        *best = Some((i, d2));
        *radius = d2;
    }
}

/// `m(i) = argmin_j ‖R·pᵢ − t − q_j‖₂`, ties to the lowest `j`.
pub fn nearest_neighbor_match(p: &PointCloud, q: &PointCloud, a: &Alignment) -> Result<Matching> {
    if q.is_empty() {
        return Err(Error::invalid("nearest-neighbour target cloud is empty"));
    }
    p.check_same_dim(q)?;
    if a.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: a.dim(),
        });
    }
    let index = SpatialIndex::build(q);
    Ok(match_with_index(p, a, &index))
}

pub(crate) fn match_with_index(p: &PointCloud, a: &Alignment, index: &SpatialIndex<'_>) -> Matching {
    let mut buf = vec![0.0; p.dim()];
    let map = (0..p.len())
        .map(|i| {
            a.apply_into(p.point(i), &mut buf);
            index.nearest(&buf).map(|(j, _)| j).unwrap_or(0)
        })
        .collect();
    Matching::new_unchecked(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(q: &PointCloud, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for j in 0..q.len() {
            let d = dist2(x, q.point(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    #[test]
    fn identity_and_closer_point() {
        let p = PointCloud::from_points(2, [[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let m = nearest_neighbor_match(&p, &p, &Alignment::identity(2)).unwrap();
        assert!(m.is_identity());

        let p = PointCloud::from_points(2, [[0.0, 0.0]]).unwrap();
        let q = PointCloud::from_points(2, [[1.0, 0.0], [0.1, 0.0]]).unwrap();
        let m = nearest_neighbor_match(&p, &q, &Alignment::identity(2)).unwrap();
        assert_eq!(m.as_slice(), &[1]);

        assert!(nearest_neighbor_match(&p, &PointCloud::empty(2), &Alignment::identity(2)).is_err());
    }

    #[test]
    fn kd_tree_agrees_with_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 3, 5] {
            let q = PointCloud::new(d, (0..500 * d).map(|_| rng.random::<f64>()).collect()).unwrap();
            let index = SpatialIndex::build(&q);
            for _ in 0..300 {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 1.2 - 0.1).collect();
                assert_eq!(index.nearest(&x).unwrap().0, brute(&q, &x));
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // A lattice with many exact ties.
        let pts: Vec<[f64; 2]> = (0..100).map(|i| [(i % 10) as f64, (i / 10) as f64]).collect();
        let mut dup = pts.clone();
        dup.extend(pts.iter().copied());
        let q = PointCloud::from_points(2, &dup).unwrap();
        let index = SpatialIndex::build(&q);
        for x in [[0.5, 0.5], [3.5, 7.0], [9.0, 9.0], [4.5, 4.5]] {
            assert_eq!(index.nearest(&x).unwrap().0, brute(&q, &x));
        }
    }

    #[test]
    fn bounded_query() {
        let q = PointCloud::new(1, (0..100).map(|i| i as f64).collect()).unwrap();
        let index = SpatialIndex::build(&q);
        let (j, d2) = index.nearest_within(&[10.4], 0.25).unwrap();
        assert_eq!(j, 10);
        assert!((d2 - 0.16).abs() < 1e-12);
        assert_eq!(index.nearest_within(&[-3.0], 4.0), None);
    }
}
