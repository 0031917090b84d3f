//! Waypoint graph: trajectory points, the ground-station point, the link
//! set, and device placements.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attempts before giving up on sampling a connected geometric graph.
const MAX_GRAPH_ATTEMPTS: usize = 10_000;

/// An undirected graph of trajectory points with a distinguished
/// ground-station point and per-point device counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointGraph {
    points: Vec<(f64, f64)>,
    base_station: usize,
    /// Sorted neighbor lists; symmetric by construction.
    adjacency: Vec<Vec<usize>>,
    iot_counts: Vec<u32>,
}

impl WaypointGraph {
    /// Builds a graph from explicit parts, validating symmetry,
    /// connectivity, and device-count consistency.
    pub fn new(
        points: Vec<(f64, f64)>,
        edges: &[(usize, usize)],
        base_station: usize,
        iot_counts: Vec<u32>,
    ) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "graph needs at least two waypoints".into(),
            ));
        }
        if base_station >= n {
            return Err(Error::InvalidArgument(format!(
                "base station index {base_station} out of range"
            )));
        }
        if iot_counts.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: iot_counts.len(),
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidArgument(format!("bad edge ({a},{b})")));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Self {
            points,
            base_station,
            adjacency,
            iot_counts,
        };
        if !graph.is_connected() {
            return Err(Error::InvalidArgument("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// Samples a random geometric graph: points uniform over the area,
    /// links between pairs within `radius`, resampled until connected.
    /// Devices are spread multinomially over the non-station points.
    pub fn random<R: Rng>(
        waypoint_count: usize,
        area: (f64, f64),
        radius: f64,
        iot_total: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if waypoint_count < 2 {
            return Err(Error::InvalidArgument(
                "need at least two waypoints".into(),
            ));
        }
        for _ in 0..MAX_GRAPH_ATTEMPTS {
            let points: Vec<(f64, f64)> = (0..waypoint_count)
                .map(|_| (rng.gen_range(0.0..area.0), rng.gen_range(0.0..area.1)))
                .collect();
            let mut adjacency = vec![Vec::new(); waypoint_count];
            for a in 0..waypoint_count {
                for b in (a + 1)..waypoint_count {
                    let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
                    if dx.hypot(dy) <= radius {
                        adjacency[a].push(b);
                        adjacency[b].push(a);
                    }
                }
            }
            let mut iot_counts = vec![0u32; waypoint_count];
            for _ in 0..iot_total {
                let p = rng.gen_range(1..waypoint_count);
                iot_counts[p] += 1;
            }
            let graph = Self {
                points,
                base_station: 0,
                adjacency,
                iot_counts,
            };
            if graph.is_connected() {
                return Ok(graph);
            }
        }
        Err(Error::InvalidArgument(format!(
            "no connected geometric graph found in {MAX_GRAPH_ATTEMPTS} attempts \
             (waypoints={waypoint_count}, radius={radius})"
        )))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base_station(&self) -> usize {
        self.base_station
    }

    pub fn point(&self, p: usize) -> (f64, f64) {
        self.points[p]
    }

    /// Neighbors of `p`, ascending; never includes `p` itself.
    pub fn neighbors(&self, p: usize) -> &[usize] {
        &self.adjacency[p]
    }

    pub fn degree(&self, p: usize) -> usize {
        self.adjacency[p].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn iot_count(&self, p: usize) -> u32 {
        self.iot_counts[p]
    }

    pub fn total_iot(&self) -> u32 {
        self.iot_counts.iter().sum()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Ground-plane distance between two waypoints.
    pub fn horizontal_distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.points[a];
        let (bx, by) = self.points[b];
        (ax - bx).hypot(ay - by)
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![self.base_station];
        seen[self.base_station] = true;
        let mut count = 1;
        while let Some(p) = stack.pop() {
            for &q in &self.adjacency[p] {
                if !seen[q] {
                    seen[q] = true;
                    count += 1;
                    stack.push(q);
                }
            }
        }
        count == n
    }
}
