use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{Adjacency, DynamicNetwork, NetError};

/// One interaction from a KONECT-style temporal edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalEdge {
    pub src: String,
    pub dst: String,
    pub weight: f64,
    pub timestamp: u64,
}

/// How a temporal edge list is cut into snapshots.
///
/// Nodes are those active in `[observe_start, focus_window_end)`. The span
/// `[focus_window_end, observe_end)` is split into `num_snapshots` equal
/// half-open intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSpec {
    pub observe_start: u64,
    pub focus_window_end: u64,
    pub observe_end: u64,
    pub num_snapshots: usize,
    #[serde(default)]
    pub symmetrize: bool,
}

impl SnapshotSpec {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.observe_end <= self.focus_window_end {
            return Err(NetError::Spec(format!(
                "observe_end {} must be after focus_window_end {}",
                self.observe_end, self.focus_window_end
            )));
        }
        if self.observe_start >= self.focus_window_end {
            return Err(NetError::Spec(format!(
                "observe_start {} must be before focus_window_end {}",
                self.observe_start, self.focus_window_end
            )));
        }
        if self.num_snapshots < 2 {
            return Err(NetError::Spec("num_snapshots must be at least 2".into()));
        }
        Ok(())
    }

    /// Interval index of `t`, if it lies in the sliced span.
    pub fn interval_of(&self, t: u64) -> Option<usize> {
        if t < self.focus_window_end || t >= self.observe_end {
            return None;
        }
        let offset = (t - self.focus_window_end) as u128;
        let span = (self.observe_end - self.focus_window_end) as u128;
        Some((offset * self.num_snapshots as u128 / span) as usize)
    }
}

/// Parses `src dst weight timestamp` lines. `%` and `#` start comment lines.
/// Fields beyond the fourth are ignored.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<TemporalEdge>, NetError> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(NetError::Parse {
                line: lineno,
                message: format!("expected `src dst weight timestamp`, got {} fields", fields.len()),
            });
        }
        let weight = fields[2].parse::<f64>().map_err(|e| NetError::Parse {
            line: lineno,
            message: format!("bad weight {:?}: {e}", fields[2]),
        })?;
        let timestamp = fields[3].parse::<u64>().map_err(|e| NetError::Parse {
            line: lineno,
            message: format!("bad timestamp {:?}: {e}", fields[3]),
        })?;
        edges.push(TemporalEdge {
            src: fields[0].to_string(),
            dst: fields[1].to_string(),
            weight,
            timestamp,
        });
    }
    Ok(edges)
}

/// Reads a temporal edge list and slices it into a [`DynamicNetwork`].
///
/// Node indices follow first appearance (source before destination) among
/// focus-window edges in stream order. Repeated interactions within an
/// interval collapse to one link; self-loops are dropped.
pub fn ingest_edge_list<R: BufRead>(reader: R, spec: &SnapshotSpec) -> Result<DynamicNetwork, NetError> {
    spec.validate()?;
    let edges = parse_edge_list(reader)?;

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut labels = Vec::new();
    for e in &edges {
        if e.timestamp >= spec.observe_start && e.timestamp < spec.focus_window_end {
            for id in [e.src.as_str(), e.dst.as_str()] {
                index.entry(id).or_insert_with(|| {
                    labels.push(id.to_string());
                    labels.len() - 1
                });
            }
        }
    }
    if labels.is_empty() {
        return Err(NetError::EmptyNetwork);
    }

    let n = labels.len();
    let mut snapshots = vec![Adjacency::new(n); spec.num_snapshots];
    for e in &edges {
        let Some(k) = spec.interval_of(e.timestamp) else {
            continue;
        };
        if let (Some(&i), Some(&j)) = (index.get(e.src.as_str()), index.get(e.dst.as_str())) {
            snapshots[k].set(i, j, true);
            if spec.symmetrize {
                snapshots[k].set(j, i, true);
            }
        }
    }
    DynamicNetwork::new(labels, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SnapshotSpec {
        SnapshotSpec {
            observe_start: 0,
            focus_window_end: 100,
            observe_end: 400,
            num_snapshots: 3,
            symmetrize: false,
        }
    }

    const DATA: &str = "% sym unweighted\n\
        # another comment\n\
        1 2 1 10\n\
        2 3 1 50\n\
        1 2 1 250\n\
        1 2 1 260\n\
        3 9 1 120\n\
        2 1 1 399\n\
        2 1 1 400\n\
        3 3 1 150\n";

    #[test]
    fn slices_into_intervals() {
        let net = ingest_edge_list(DATA.as_bytes(), &spec()).unwrap();
        assert_eq!(net.labels(), &["1", "2", "3"]);
        assert_eq!(net.num_snapshots(), 3);
        let (i1, i2) = (0, 1);
        // t=250 -> interval 1 (200..300); repeated interaction collapses
        assert!(net.snapshot(1).unwrap().get(i1, i2));
        assert_eq!(net.snapshot(1).unwrap().edge_count(), 1);
        // t=399 -> last interval; t=400 == observe_end dropped
        assert!(net.snapshot(2).unwrap().get(i2, i1));
        assert_eq!(net.snapshot(2).unwrap().edge_count(), 1);
        // node 9 never in focus window -> edge dropped; self-loop dropped
        assert_eq!(net.snapshot(0).unwrap().edge_count(), 0);
    }

    #[test]
    fn single_line_lands_in_interval_two() {
        let s = SnapshotSpec {
            observe_start: 1262304000,
            focus_window_end: 1262400000,
            observe_end: 1262700000,
            num_snapshots: 3,
            symmetrize: false,
        };
        let text = "1 2 1 1262350000\n1 2 1 1262654010\n";
        let net = ingest_edge_list(text.as_bytes(), &s).unwrap();
        assert!(net.snapshot(2).unwrap().get(0, 1));
    }

    #[test]
    fn deterministic() {
        let a = ingest_edge_list(DATA.as_bytes(), &spec()).unwrap();
        let b = ingest_edge_list(DATA.as_bytes(), &spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetrize_flag() {
        let s = SnapshotSpec {
            symmetrize: true,
            ..spec()
        };
        let net = ingest_edge_list(DATA.as_bytes(), &s).unwrap();
        assert!(net.snapshot(1).unwrap().get(1, 0));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = ingest_edge_list("1 2 1 10\n1 2 x\n".as_bytes(), &spec()).unwrap_err();
        assert!(matches!(err, NetError::Parse { line: 2, .. }), "{err}");
        let err = ingest_edge_list("1 2 1 -5\n".as_bytes(), &spec()).unwrap_err();
        assert!(matches!(err, NetError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_node_set() {
        let err = ingest_edge_list("1 2 1 300\n".as_bytes(), &spec()).unwrap_err();
        assert!(matches!(err, NetError::EmptyNetwork));
    }

    #[test]
    fn spec_errors() {
        let bad = SnapshotSpec {
            observe_end: 50,
            ..spec()
        };
        assert!(matches!(
            ingest_edge_list(DATA.as_bytes(), &bad),
            Err(NetError::Spec(_))
        ));
        let bad = SnapshotSpec {
            num_snapshots: 1,
            ..spec()
        };
        assert!(matches!(bad.validate(), Err(NetError::Spec(_))));
    }
}
