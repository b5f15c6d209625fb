//! Undirected weighted edge sets over metric points, shortest paths on their
//! unions, and exact girth for small multigraphs.

use std::collections::BTreeMap;

use crate::metric::PointId;

/// Undirected edge set with idempotent inserts (re-adding an edge is a no-op,
/// matching the "add path to H" semantics of the online algorithms).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeSet {
    edges: BTreeMap<(usize, usize), f64>,
}

fn key(u: PointId, v: PointId) -> (usize, usize) {
    if u.0 < v.0 {
        (u.0, v.0)
    } else {
        (v.0, u.0)
    }
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the edge was new.
    pub fn insert(&mut self, u: PointId, v: PointId, len: f64) -> bool {
        assert!(u != v, "self-loop {u}");
        self.edges.insert(key(u, v), len).is_none()
    }

    pub fn contains(&self, u: PointId, v: PointId) -> bool {
        self.edges.contains_key(&key(u, v))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, PointId, f64)> + '_ {
        self.edges
            .iter()
            .map(|(&(u, v), &l)| (PointId(u), PointId(v), l))
    }

    pub fn union(sets: &[&EdgeSet]) -> EdgeSet {
        let mut out = EdgeSet::new();
        for s in sets {
            for (u, v, l) in s.iter() {
                out.insert(u, v, l);
            }
        }
        out
    }
}

impl FromIterator<(PointId, PointId, f64)> for EdgeSet {
    fn from_iter<T: IntoIterator<Item = (PointId, PointId, f64)>>(it: T) -> Self {
        let mut s = EdgeSet::new();
        for (u, v, l) in it {
            s.insert(u, v, l);
        }
        s
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed for a min-heap; ties by node id for determinism.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn adjacency(n: usize, graphs: &[&EdgeSet]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for g in graphs {
        for (u, v, l) in g.iter() {
            if u.0 < n && v.0 < n {
                adj[u.0].push((v.0, l));
                adj[v.0].push((u.0, l));
            }
        }
    }
    adj
}

/// Multi-source Dijkstra over the union of `graphs` restricted to nodes < n.
/// Returns (dist, parent); unreachable nodes have dist = ∞.
pub fn dijkstra(
    n: usize,
    graphs: &[&EdgeSet],
    sources: &[PointId],
) -> (Vec<f64>, Vec<Option<usize>>) {
    let adj = adjacency(n, graphs);
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut heap = std::collections::BinaryHeap::new();
    for &s in sources {
        if s.0 < n {
            dist[s.0] = 0.0;
            heap.push(HeapEntry {
                dist: 0.0,
                node: s.0,
            });
        }
    }
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, l) in &adj[u] {
            let nd = d + l;
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = Some(u);
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    (dist, parent)
}

/// Shortest-path distance between two points in the union of `graphs`.
pub fn graph_dist(n: usize, graphs: &[&EdgeSet], u: PointId, v: PointId) -> f64 {
    let (dist, _) = dijkstra(n, graphs, &[u]);
    dist[v.0]
}

/// Shortest path from `from` to the nearest member of `targets`; ties broken
/// by smallest target id. Returns (target, length, path from→target).
pub fn shortest_path_to_set(
    n: usize,
    graphs: &[&EdgeSet],
    from: PointId,
    targets: &[PointId],
) -> Option<(PointId, f64, Vec<PointId>)> {
    let (dist, parent) = dijkstra(n, graphs, &[from]);
    let mut best: Option<PointId> = None;
    for &t in targets {
        if dist[t.0].is_finite() {
            let better = match best {
                None => true,
                Some(b) => dist[t.0] < dist[b.0] || (dist[t.0] == dist[b.0] && t < b),
            };
            if better {
                best = Some(t);
            }
        }
    }
    let t = best?;
    let mut path = vec![t];
    let mut cur = t.0;
    while let Some(p) = parent[cur] {
        path.push(PointId(p));
        cur = p;
    }
    // parent chain may legitimately stop early if `from` is itself a target
    path.reverse();
    debug_assert_eq!(path[0], from);
    Some((t, dist[t.0], path))
}

/// Exact girth of a small multigraph given as an edge list over `n` nodes.
/// Parallel edges form 2-cycles; self-loops are not allowed. `None` = acyclic.
pub fn girth(n: usize, edges: &[(usize, usize)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (skip, &(a, b)) in edges.iter().enumerate() {
        assert!(a != b, "self-loop in girth input");
        // BFS from a to b without edge `skip`.
        let mut dist = vec![usize::MAX; n];
        dist[a] = 0;
        let mut q = std::collections::VecDeque::from([a]);
        while let Some(u) = q.pop_front() {
            if u == b {
                break;
            }
            for (i, &(x, y)) in edges.iter().enumerate() {
                if i == skip {
                    continue;
                }
                let v = if x == u {
                    y
                } else if y == u {
                    x
                } else {
                    continue;
                };
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        if dist[b] != usize::MAX {
            let cycle = dist[b] + 1;
            if best.map_or(true, |g| cycle < g) {
                best = Some(cycle);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> PointId {
        PointId(i)
    }

    #[test]
    fn edge_set_idempotent() {
        let mut s = EdgeSet::new();
        assert!(s.insert(p(0), p(1), 2.0));
        assert!(!s.insert(p(1), p(0), 2.0));
        assert_eq!(s.len(), 1);
        assert_eq!(s.total_length(), 2.0);
        assert!(s.contains(p(1), p(0)));
    }

    #[test]
    fn dijkstra_path_and_ties() {
        let mut s = EdgeSet::new();
        s.insert(p(0), p(1), 1.0);
        s.insert(p(1), p(2), 1.0);
        s.insert(p(0), p(3), 2.0);
        // targets 2 and 3 both at distance 2; smallest id wins
        let (t, d, path) = shortest_path_to_set(4, &[&s], p(0), &[p(2), p(3)]).unwrap();
        assert_eq!(t, p(2));
        assert_eq!(d, 2.0);
        assert_eq!(path, vec![p(0), p(1), p(2)]);
    }

    #[test]
    fn dijkstra_disconnected() {
        let mut s = EdgeSet::new();
        s.insert(p(0), p(1), 1.0);
        assert!(graph_dist(3, &[&s], p(0), p(2)).is_infinite());
        assert!(shortest_path_to_set(3, &[&s], p(0), &[p(2)]).is_none());
    }

    #[test]
    fn from_is_target() {
        let mut s = EdgeSet::new();
        s.insert(p(0), p(1), 1.0);
        let (t, d, path) = shortest_path_to_set(2, &[&s], p(0), &[p(0), p(1)]).unwrap();
        assert_eq!((t, d), (p(0), 0.0));
        assert_eq!(path, vec![p(0)]);
    }

    #[test]
    fn girth_cases() {
        // triangle
        assert_eq!(girth(3, &[(0, 1), (1, 2), (2, 0)]), Some(3));
        // tree
        assert_eq!(girth(3, &[(0, 1), (1, 2)]), None);
        // parallel edges
        assert_eq!(girth(2, &[(0, 1), (0, 1)]), Some(2));
        // C4 plus a pendant
        assert_eq!(girth(5, &[(0, 1), (1, 2), (2, 3), (3, 0), (3, 4)]), Some(4));
    }
}
