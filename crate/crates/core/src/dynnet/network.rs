use std::io::Write;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::diffcomp::Matrix;

/// Binary directed adjacency matrix with an empty diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    n: usize,
    cells: Vec<u8>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    /// Builds from a list of directed links; self-loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut a = Self::new(n);
        for (i, j) in edges {
            a.set(i, j, true);
        }
        a
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j] != 0
    }

    /// Sets a cell. Writes to the diagonal are ignored.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, linked: bool) {
        if i != j {
            self.cells[i * self.n + j] = linked as u8;
        }
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.cells[i * self.n..(i + 1) * self.n]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|&x| x as usize).sum()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, j)).count()
    }

    pub fn edge_count(&self) -> usize {
        self.cells.iter().map(|&x| x as usize).sum()
    }

    /// Fraction of the `n(n-1)` off-diagonal cells that are links.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Links in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(idx, _)| (idx / n, idx % n))
    }

    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(j, _)| j)
    }

    pub fn symmetrized(&self) -> Adjacency {
        let mut out = self.clone();
        for (i, j) in self.edges() {
            out.set(j, i, true);
        }
        out
    }
}

/// Fixed node set with an ordered sequence of snapshots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicNetwork {
    labels: Vec<String>,
    snapshots: Vec<Adjacency>,
}

impl DynamicNetwork {
    pub fn new(labels: Vec<String>, snapshots: Vec<Adjacency>) -> Result<Self, NetError> {
        let n = labels.len();
        if n == 0 {
            return Err(NetError::EmptyNetwork);
        }
        if let Some(bad) = snapshots.iter().position(|a| a.n() != n) {
            return Err(NetError::Argument(format!(
                "snapshot {bad} has dimension {} but the network has {n} nodes",
                snapshots[bad].n()
            )));
        }
        Ok(Self { labels, snapshots })
    }

    /// Labels `0..n` as strings.
    pub fn unlabeled(snapshots: Vec<Adjacency>) -> Result<Self, NetError> {
        let n = snapshots.first().map_or(0, Adjacency::n);
        Self::new((0..n).map(|i| i.to_string()).collect(), snapshots)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn snapshots(&self) -> &[Adjacency] {
        &self.snapshots
    }

    pub fn snapshot(&self, k: usize) -> Result<&Adjacency, NetError> {
        self.snapshots.get(k).ok_or(NetError::Index {
            what: "snapshot",
            index: k,
            len: self.snapshots.len(),
        })
    }

    /// A network holding the chosen snapshots in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<DynamicNetwork, NetError> {
        let snapshots = indices
            .iter()
            .map(|&k| self.snapshot(k).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DynamicNetwork {
            labels: self.labels.clone(),
            snapshots,
        })
    }

    pub fn symmetrized(&self) -> DynamicNetwork {
        DynamicNetwork {
            labels: self.labels.clone(),
            snapshots: self.snapshots.iter().map(Adjacency::symmetrized).collect(),
        }
    }

    /// Rows `A_start(i,:) .. A_{start+len-1}(i,:)` as an independent copy.
    pub fn history(&self, node: usize, start: usize, len: usize) -> Result<NodeHistory, NetError> {
        let n = self.node_count();
        if node >= n {
            return Err(NetError::Index {
                what: "node",
                index: node,
                len: n,
            });
        }
        if len == 0 || start + len > self.snapshots.len() {
            return Err(NetError::Index {
                what: "window end",
                index: start + len,
                len: self.snapshots.len(),
            });
        }
        let rows = self.snapshots[start..start + len]
            .iter()
            .map(|a| a.row(node).to_vec())
            .collect();
        Ok(NodeHistory { node, rows })
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            nodes: self.node_count(),
            snapshots: self.num_snapshots(),
            links_per_snapshot: self.snapshots.iter().map(Adjacency::edge_count).collect(),
            density_per_snapshot: self.snapshots.iter().map(Adjacency::density).collect(),
        }
    }

    /// Writes snapshot `k` as `k,i,j` lines, one per link.
    pub fn write_snapshot_csv<W: Write>(&self, k: usize, mut out: W) -> Result<(), NetError> {
        let a = self.snapshot(k)?;
        writeln!(out, "k,i,j")?;
        for (i, j) in a.edges() {
            writeln!(out, "{k},{i},{j}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub snapshots: usize,
    pub links_per_snapshot: Vec<usize>,
    pub density_per_snapshot: Vec<f64>,
}

/// Node `i`'s adjacency rows over the input window, oldest first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeHistory {
    node: usize,
    rows: Vec<Vec<u8>>,
}

impl NodeHistory {
    /// Entries must be 0/1 and the owner's own column must be 0.
    pub fn new(node: usize, rows: Vec<Vec<u8>>) -> Result<Self, NetError> {
        let width = rows.first().map_or(0, Vec::len);
        if node >= width {
            return Err(NetError::Index {
                what: "node",
                index: node,
                len: width,
            });
        }
        for row in &rows {
            if row.len() != width || row.iter().any(|&x| x > 1) || row[node] != 0 {
                return Err(NetError::Argument(
                    "history rows must be equal-width binary with a zero self entry".into(),
                ));
            }
        }
        Ok(Self { node, rows })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    /// Number of snapshots N.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row width n.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    #[inline]
    pub fn get(&self, k: usize, v: usize) -> bool {
        self.rows[k][v] != 0
    }

    /// Toggles cell `(k, v)` and returns its new state. The self cell is never touched.
    pub fn flip(&mut self, k: usize, v: usize) -> bool {
        assert_ne!(v, self.node, "self cell of a history cannot be flipped");
        self.rows[k][v] ^= 1;
        self.rows[k][v] != 0
    }

    /// The same rows, newest first.
    pub fn reversed(&self) -> NodeHistory {
        NodeHistory {
            node: self.node,
            rows: self.rows.iter().rev().cloned().collect(),
        }
    }

    /// Each row as an `n x 1` column, the model's input layout.
    pub fn to_columns(&self) -> Vec<Matrix> {
        self.rows
            .iter()
            .map(|r| Matrix::column(r.iter().map(|&x| x as f64).collect()))
            .collect()
    }

    /// Number of cells that differ from `other`.
    pub fn hamming(&self, other: &NodeHistory) -> usize {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> DynamicNetwork {
        let a0 = Adjacency::from_edges(3, [(0, 1), (1, 2)]);
        let a1 = Adjacency::from_edges(3, [(0, 2), (2, 0)]);
        DynamicNetwork::unlabeled(vec![a0, a1]).unwrap()
    }

    #[test]
    fn history_extraction_and_reversal() {
        let h = net().history(0, 0, 2).unwrap();
        assert_eq!(h.rows(), &[vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(h.reversed().rows(), &[vec![0, 0, 1], vec![0, 1, 0]]);
    }

    #[test]
    fn history_is_an_independent_copy() {
        let net = net();
        let mut h = net.history(0, 0, 2).unwrap();
        h.flip(0, 2);
        assert!(!net.snapshot(0).unwrap().get(0, 2));
        assert_eq!(h.hamming(&net.history(0, 0, 2).unwrap()), 1);
    }

    #[test]
    fn history_out_of_range() {
        let net = net();
        assert!(matches!(net.history(3, 0, 2), Err(NetError::Index { .. })));
        assert!(matches!(net.history(0, 1, 2), Err(NetError::Index { .. })));
    }

    #[test]
    fn self_entries_stay_zero() {
        let mut a = Adjacency::new(3);
        a.set(1, 1, true);
        assert!(!a.get(1, 1));
        let h = DynamicNetwork::unlabeled(vec![a]).unwrap().history(1, 0, 1).unwrap();
        assert!(!h.get(0, 1));
    }

    #[test]
    fn mismatched_snapshot_dimension_rejected() {
        let r = DynamicNetwork::unlabeled(vec![Adjacency::new(3), Adjacency::new(4)]);
        assert!(matches!(r, Err(NetError::Argument(_))));
    }

    #[test]
    fn snapshot_csv_dump() {
        let mut buf = Vec::new();
        net().write_snapshot_csv(1, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,i,j\n1,0,2\n1,2,0\n");
    }
}
