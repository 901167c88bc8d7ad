use std::collections::{BTreeMap, VecDeque};

use super::{Adjacency, NetError};
use crate::par::{self, Parallelism};

fn check_index(a: &Adjacency, i: usize) -> Result<(), NetError> {
    if i >= a.n() {
        return Err(NetError::Index {
            what: "node",
            index: i,
            len: a.n(),
        });
    }
    Ok(())
}

/// Nodes adjacent to both `i` and `j`, ignoring link direction.
pub fn common_neighbors(a: &Adjacency, i: usize, j: usize) -> Result<usize, NetError> {
    check_index(a, i)?;
    check_index(a, j)?;
    if i == j {
        return Err(NetError::Argument(format!(
            "common_neighbors needs distinct nodes, got {i} twice"
        )));
    }
    let adjacent = |x: usize, u: usize| a.get(x, u) || a.get(u, x);
    Ok((0..a.n())
        .filter(|&u| u != i && u != j && adjacent(i, u) && adjacent(j, u))
        .count())
}

/// Total (in + out) degree of `i` plus that of `j`.
pub fn link_degree(a: &Adjacency, i: usize, j: usize) -> Result<usize, NetError> {
    check_index(a, i)?;
    check_index(a, j)?;
    let deg = |x| a.in_degree(x) + a.out_degree(x);
    Ok(deg(i) + deg(j))
}

const SOURCES_PER_CHUNK: usize = 32;

/// Directed, unweighted edge betweenness.
///
/// For every existing link, sums over ordered pairs `(s, t)` the fraction of
/// shortest `s -> t` paths that traverse it. One BFS per source with
/// Brandes-style dependency accumulation. Sources are processed in fixed
/// chunks and summed in chunk order, so the result does not depend on the
/// parallelism mode.
pub fn edge_betweenness(a: &Adjacency, mode: Parallelism) -> BTreeMap<(usize, usize), f64> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|v| a.out_neighbors(v).collect()).collect();
    let chunks = n.div_ceil(SOURCES_PER_CHUNK);
    let partials = par::map_range(mode, chunks, |c| {
        let mut acc = vec![0.0; n * n];
        let start = c * SOURCES_PER_CHUNK;
        for s in start..(start + SOURCES_PER_CHUNK).min(n) {
            accumulate_source(&adj, s, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; n * n];
    for p in &partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    a.edges().map(|(i, j)| ((i, j), total[i * n + j])).collect()
}

fn accumulate_source(adj: &[Vec<usize>], s: usize, acc: &mut [f64]) {
    let n = adj.len();
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for &v in &preds[w] {
            let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
            acc[v * n + w] += c;
            delta[v] += c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Adjacency {
        let mut a = Adjacency::new(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(p) {
                    a.set(i, j, true);
                }
            }
        }
        a
    }

    #[test]
    fn triangle_common_neighbors() {
        let a = Adjacency::from_edges(3, [(0, 1), (1, 2), (2, 0)]);
        assert_eq!(common_neighbors(&a, 0, 1).unwrap(), 1);
        assert_eq!(common_neighbors(&Adjacency::new(4), 0, 3).unwrap(), 0);
        assert!(matches!(common_neighbors(&a, 1, 1), Err(NetError::Argument(_))));
    }

    #[test]
    fn common_neighbors_matches_set_intersection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_graph(&mut rng, 8, 0.3);
            for i in 0..8 {
                for j in 0..8 {
                    if i == j {
                        continue;
                    }
                    let nbrs = |x: usize| -> std::collections::BTreeSet<usize> {
                        (0..8)
                            .filter(|&u| u != x && (a.get(x, u) || a.get(u, x)))
                            .collect()
                    };
                    let mut ni = nbrs(i);
                    ni.remove(&j);
                    let mut nj = nbrs(j);
                    nj.remove(&i);
                    let expected = ni.intersection(&nj).count();
                    let got = common_neighbors(&a, i, j).unwrap();
                    assert_eq!(got, expected);
                    assert_eq!(got, common_neighbors(&a, j, i).unwrap());
                }
            }
        }
    }

    #[test]
    fn link_degree_examples() {
        // node 0: out 2, node 1: in 1
        let a = Adjacency::from_edges(3, [(0, 1), (0, 2)]);
        assert_eq!(link_degree(&a, 0, 1).unwrap(), 3);
        assert_eq!(link_degree(&Adjacency::new(2), 0, 1).unwrap(), 0);
    }

    #[test]
    fn link_degree_matches_row_column_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let a = random_graph(&mut rng, 10, 0.25);
            for i in 0..10 {
                for j in 0..10 {
                    let mut expected = 0;
                    for x in [i, j] {
                        for u in 0..10 {
                            expected += a.get(x, u) as usize + a.get(u, x) as usize;
                        }
                    }
                    assert_eq!(link_degree(&a, i, j).unwrap(), expected);
                }
            }
        }
    }

    #[test]
    fn betweenness_small_examples() {
        let path = Adjacency::from_edges(3, [(0, 1), (1, 2)]);
        let eb = edge_betweenness(&path, Parallelism::Sequential);
        assert_eq!(eb[&(0, 1)], 2.0);
        assert_eq!(eb[&(1, 2)], 2.0);
        let single = Adjacency::from_edges(2, [(0, 1)]);
        assert_eq!(edge_betweenness(&single, Parallelism::Sequential)[&(0, 1)], 1.0);
    }

    #[test]
    fn betweenness_modes_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_graph(&mut rng, 70, 0.05);
        let s = edge_betweenness(&a, Parallelism::Sequential);
        let p = edge_betweenness(&a, Parallelism::Parallel);
        assert_eq!(s, p);
    }
}
