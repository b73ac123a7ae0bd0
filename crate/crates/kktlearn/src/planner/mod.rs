//! Grid search through unions of safe boxes, and a three-way safety check for trajectories.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SafeBox;

/// Cap on expanded lattice nodes before the search gives up.
pub const MAX_NODES: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub path: Vec<Vec<f64>>,
    pub length: f64,
    /// Every waypoint and every segment sample lies in the union of safe boxes.
    pub guarantee: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryVerdict {
    GuaranteedSafe,
    NotDefinitelyUnsafe,
    IntersectsUnsafe,
}

impl TrajectoryVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GuaranteedSafe => "GuaranteedSafe",
            Self::NotDefinitelyUnsafe => "NotDefinitelyUnsafe",
            Self::IntersectsUnsafe => "IntersectsUnsafe",
        }
    }
}

fn in_union(boxes: &[SafeBox], p: &[f64]) -> bool {
    boxes.iter().any(|b| b.contains(p))
}

/// Points along the polyline, consecutive ones at most `spacing` apart, vertices included.
pub fn sample_polyline(points: &[Vec<f64>], spacing: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if let Some(first) = points.first() {
        out.push(first.clone());
    }
    for w in points.windows(2) {
        let len = dist(&w[0], &w[1]);
        let k = if spacing > 0.0 {
            (len / spacing).ceil().max(1.0) as usize
        } else {
            1
        };
        for i in 1..=k {
            let s = i as f64 / k as f64;
            out.push(
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| a + s * (b - a))
                    .collect(),
            );
        }
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A segment lies in the union if one box holds both ends (boxes are convex), otherwise
/// if every sample does.
fn segment_ok(boxes: &[SafeBox], a: &[f64], b: &[f64], spacing: f64) -> bool {
    if boxes.iter().any(|bx| bx.contains(a) && bx.contains(b)) {
        return true;
    }
    sample_polyline(&[a.to_vec(), b.to_vec()], spacing)
        .iter()
        .all(|p| in_union(boxes, p))
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path on the lattice `start + resolution * k` (all 3^d - 1 neighbour moves),
/// restricted to waypoints inside the union of `boxes`, then joined to `goal`.
pub fn plan(start: &[f64], goal: &[f64], boxes: &[SafeBox], resolution: f64) -> Result<Plan> {
    let d = start.len();
    if goal.len() != d
        || boxes
            .iter()
            .any(|b| b.lower.len() != d || b.upper.len() != d)
    {
        return Err(Error::Dimension(
            "start, goal and boxes must share one dimension".into(),
        ));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Spec(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    if !in_union(boxes, start) {
        return Err(Error::Planning("start is outside the safe boxes".into()));
    }
    if !in_union(boxes, goal) {
        return Err(Error::Planning("goal is outside the safe boxes".into()));
    }
    let spacing = resolution / 2.0;
    if segment_ok(boxes, start, goal, spacing) {
        let path = vec![start.to_vec(), goal.to_vec()];
        return Ok(finish(path, boxes, spacing));
    }
    let lo: Vec<i64> = (0..d)
        .map(|i| {
            let m = boxes
                .iter()
                .map(|b| b.lower[i])
                .fold(f64::INFINITY, f64::min);
            ((m - start[i]) / resolution).floor() as i64
        })
        .collect();
    let hi: Vec<i64> = (0..d)
        .map(|i| {
            let m = boxes
                .iter()
                .map(|b| b.upper[i])
                .fold(f64::NEG_INFINITY, f64::max);
            ((m - start[i]) / resolution).ceil() as i64
        })
        .collect();
    let point = |k: &[i64]| -> Vec<f64> {
        (0..d)
            .map(|i| start[i] + resolution * k[i] as f64)
            .collect()
    };
    let moves: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let v = (c % 3) as i64 - 1;
                    c /= 3;
                    v
                })
                .collect()
        })
        .filter(|m: &Vec<i64>| m.iter().any(|&v| v != 0))
        .collect();

    let mut keys: Vec<Vec<i64>> = vec![vec![0; d]];
    let mut ids: HashMap<Vec<i64>, usize> = HashMap::from([(vec![0; d], 0)]);
    let mut g = vec![0.0];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut closed = vec![false];
    let mut heap = BinaryHeap::from([Open {
        f: dist(start, goal),
        node: 0,
    }]);
    // goal reached through the node with the best total cost
    let mut best: Option<(f64, usize)> = None;
    let mut expanded = 0;
    while let Some(Open { f, node }) = heap.pop() {
        if closed[node] {
            continue;
        }
        if let Some((c, _)) = best {
            if f >= c {
                break;
            }
        }
        closed[node] = true;
        expanded += 1;
        if expanded > MAX_NODES {
            return Err(Error::Planning(format!(
                "search exceeded {MAX_NODES} nodes; increase the resolution"
            )));
        }
        let here = point(&keys[node]);
        let to_goal = dist(&here, goal);
        if to_goal <= resolution * (d as f64).sqrt() + 1e-12
            && segment_ok(boxes, &here, goal, spacing)
        {
            let c = g[node] + to_goal;
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, node));
            }
        }
        for m in &moves {
            let k: Vec<i64> = keys[node].iter().zip(m).map(|(a, b)| a + b).collect();
            if k.iter()
                .zip(lo.iter().zip(&hi))
                .any(|(v, (l, h))| v < l || v > h)
            {
                continue;
            }
            let p = point(&k);
            if !in_union(boxes, &p) || !segment_ok(boxes, &here, &p, spacing) {
                continue;
            }
            let cand = g[node] + dist(&here, &p);
            let id = match ids.get(&k) {
                Some(&id) => id,
                None => {
                    let id = keys.len();
                    ids.insert(k.clone(), id);
                    keys.push(k);
                    g.push(f64::INFINITY);
                    parent.push(None);
                    closed.push(false);
                    id
                }
            };
            if cand < g[id] {
                g[id] = cand;
                parent[id] = Some(node);
                heap.push(Open {
                    f: cand + dist(&p, goal),
                    node: id,
                });
            }
        }
    }
    let (_, last) = best.ok_or_else(|| Error::Planning("no path through the safe boxes".into()))?;
    let mut chain = vec![last];
    while let Some(p) = parent[*chain.last().expect("non-empty")] {
        chain.push(p);
    }
    chain.reverse();
    let mut path: Vec<Vec<f64>> = chain.iter().map(|&n| point(&keys[n])).collect();
    path[0] = start.to_vec();
    if dist(path.last().expect("non-empty"), goal) > 0.0 {
        path.push(goal.to_vec());
    }
    Ok(finish(path, boxes, spacing))
}

fn finish(path: Vec<Vec<f64>>, boxes: &[SafeBox], spacing: f64) -> Plan {
    let length = path.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    let guarantee = sample_polyline(&path, spacing)
        .iter()
        .all(|p| in_union(boxes, p));
    Plan {
        path,
        length,
        guarantee,
    }
}

/// Classifies the sampled trajectory against explicit safe and unsafe box sets.
pub fn check_safety(
    points: &[Vec<f64>],
    safe: &[SafeBox],
    unsafe_boxes: &[SafeBox],
    spacing: f64,
) -> TrajectoryVerdict {
    let samples = sample_polyline(points, spacing);
    if samples.iter().all(|p| in_union(safe, p)) {
        TrajectoryVerdict::GuaranteedSafe
    } else if samples.iter().any(|p| in_union(unsafe_boxes, p)) {
        TrajectoryVerdict::IntersectsUnsafe
    } else {
        TrajectoryVerdict::NotDefinitelyUnsafe
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lower: [f64; 2], upper: [f64; 2]) -> SafeBox {
        SafeBox {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        }
    }

    #[test]
    fn straight_when_one_box_holds_both_ends() {
        let p = plan(&[0.0, 0.0], &[1.0, 1.0], &[bx([0.0, 0.0], [1.0, 1.0])], 0.1).unwrap();
        assert_eq!(p.path.len(), 2);
        assert!(p.guarantee);
    }

    #[test]
    fn samples_include_vertices() {
        let s = sample_polyline(&[vec![0.0], vec![1.0]], 0.3);
        assert_eq!(s.len(), 5);
        assert_eq!(s[4], vec![1.0]);
    }

    #[test]
    fn rejects_start_outside() {
        let e = plan(&[5.0, 5.0], &[0.5, 0.5], &[bx([0.0, 0.0], [1.0, 1.0])], 0.1);
        assert!(matches!(e, Err(Error::Planning(_))));
    }
}
