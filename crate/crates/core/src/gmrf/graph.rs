use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected neighbourhood structure over areal units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Builds a graph from undirected edges. Each edge may appear in either or
    /// both orientations; the result is symmetrized and deduplicated.
    pub fn from_edges<I>(n_units: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n_units == 0 {
            return Err(Error::InvalidGraph("graph has no units".into()));
        }
        let mut neighbors = vec![Vec::new(); n_units];
        for (a, b) in edges {
            if a >= n_units || b >= n_units {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a unit outside [0, {n_units})"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on unit {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(AdjacencyGraph { neighbors })
    }

    /// Validates an explicit neighbour list (must already be symmetric).
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no units".into()));
        }
        let mut neighbors = neighbors;
        for (u, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate neighbour of unit {u}"
                )));
            }
            if list.iter().any(|&m| m >= n) {
                return Err(Error::InvalidGraph(format!(
                    "unit {u} has an out-of-range neighbour"
                )));
            }
            if list.contains(&u) {
                return Err(Error::InvalidGraph(format!("self-loop on unit {u}")));
            }
        }
        for (u, list) in neighbors.iter().enumerate() {
            for &m in list {
                if neighbors[m].binary_search(&u).is_err() {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric adjacency: {u} lists {m} but not vice versa"
                    )));
                }
            }
        }
        Ok(AdjacencyGraph { neighbors })
    }

    /// Rook adjacency between tiles of a `tiles_x` by `tiles_y` lattice.
    /// Tile `(tx, ty)` has index `ty * tiles_x + tx`.
    pub fn lattice(tiles_x: usize, tiles_y: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let u = ty * tiles_x + tx;
                if tx + 1 < tiles_x {
                    edges.push((u, u + 1));
                }
                if ty + 1 < tiles_y {
                    edges.push((u, u + tiles_x));
                }
            }
        }
        Self::from_edges(tiles_x * tiles_y, edges)
    }

    pub fn n_units(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, unit: usize) -> &[usize] {
        &self.neighbors[unit]
    }

    pub fn degree(&self, unit: usize) -> usize {
        self.neighbors[unit].len()
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Connected component label per unit, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_units();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(u) = stack.pop() {
                for &m in &self.neighbors[u] {
                    if label[m] == usize::MAX {
                        label[m] = next;
                        stack.push(m);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Reads `unit_id,neighbor_id` rows. The unit count is `max id + 1` unless
    /// `n_units` is given.
    pub fn read_csv<R: Read>(reader: R, n_units: Option<usize>, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| parse_err(source, 1, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    path: source.to_string(),
                    row: 1,
                    message: format!("missing column `{name}`"),
                })
        };
        let (ci, cj) = (col("unit_id")?, col("neighbor_id")?);
        let mut edges = Vec::new();
        let mut max_id = 0usize;
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 2;
            let rec = rec.map_err(|e| parse_err(source, row, e))?;
            let parse = |c: usize| -> Result<usize> {
                let cell = rec.get(c).unwrap_or("");
                cell.parse::<usize>().map_err(|_| Error::Parse {
                    path: source.to_string(),
                    row,
                    message: format!("invalid unit index `{cell}`"),
                })
            };
            let (a, b) = (parse(ci)?, parse(cj)?);
            max_id = max_id.max(a).max(b);
            edges.push((a, b));
        }
        let n = n_units.unwrap_or(if edges.is_empty() { 0 } else { max_id + 1 });
        Self::from_edges(n, edges)
    }

    pub fn load(path: &Path, n_units: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(
            std::io::BufReader::new(file),
            n_units,
            &path.display().to_string(),
        )
    }

    /// Writes each undirected edge once.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "unit_id,neighbor_id")?;
        for (a, b) in self.edges() {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

fn parse_err(path: &str, row: usize, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        row,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loader_symmetrizes() {
        let csv = "unit_id,neighbor_id\n0,1\n1,2\n";
        let g = AdjacencyGraph::read_csv(csv.as_bytes(), None, "mem").unwrap();
        assert_eq!(g.n_units(), 3);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn rejects_self_loop_and_range() {
        assert!(AdjacencyGraph::from_edges(2, [(1, 1)]).is_err());
        assert!(AdjacencyGraph::from_edges(2, [(0, 2)]).is_err());
        assert!(AdjacencyGraph::from_neighbors(vec![vec![1], vec![]]).is_err());
    }

    #[test]
    fn lattice_is_rook_connected() {
        let g = AdjacencyGraph::lattice(3, 2).unwrap();
        assert_eq!(g.n_units(), 6);
        assert_eq!(g.neighbors(0), &[1, 3]);
        assert_eq!(g.neighbors(4), &[1, 3, 5]);
        assert_eq!(g.n_components(), 1);
        assert_eq!(g.n_edges(), 7);
    }

    #[test]
    fn csv_round_trip() {
        let g = AdjacencyGraph::lattice(4, 3).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = AdjacencyGraph::read_csv(buf.as_slice(), Some(12), "mem").unwrap();
        assert_eq!(g, back);
    }
}
