//! The multi-version conflict graph.
//!
//! Vertices are the transactions of the completed history (initializer and
//! aborted transactions included); an edge `(Ti, Tj)` exists for every
//! real-time pair and for every multi-version conflict pair between an
//! operation of `Ti` and one of `Tj`. Acyclicity of this graph decides
//! multi-version conflict opacity; a topological order doubles as a
//! serialization witness.
//!
//! Edges are deduplicated and carry reason sets plus the contributing
//! conflict pairs for diagnostics. Cycle checks run a full DFS per call;
//! the graphs in play are desk-scale.

use crate::conflict::{self, ConflictPair, InvalidHistory};
use crate::history::{History, TxnId};
use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::fmt::Write as _;

/// Why an edge is in the graph. One edge may carry several reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeReason {
    RealTime,
    CommitCommit,
    CommitRead,
    ReadCommit,
}

impl EdgeReason {
    pub fn code(self) -> &'static str {
        match self {
            EdgeReason::RealTime => "RT",
            EdgeReason::CommitCommit => "CC",
            EdgeReason::CommitRead => "CR",
            EdgeReason::ReadCommit => "RC",
        }
    }
}

impl fmt::Display for EdgeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Reasons and contributing conflict pairs for one edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeInfo {
    pub reasons: BTreeSet<EdgeReason>,
    /// Multi-version conflict pairs justifying the edge; empty for pure
    /// real-time edges.
    pub pairs: Vec<ConflictPair>,
}

/// A directed cycle, reported as a closed vertex walk. The walk starts and
/// ends at the smallest transaction id on the cycle, so witnesses are
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub vertices: Vec<TxnId>,
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

impl Cycle {
    /// Rotates a closed walk (without the repeated endpoint) so it starts
    /// at its smallest vertex, then closes it.
    fn normalized(mut walk: Vec<TxnId>) -> Cycle {
        let min_idx = walk
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(i, _)| i)
            .unwrap_or(0);
        walk.rotate_left(min_idx);
        let first = walk[0];
        walk.push(first);
        Cycle { vertices: walk }
    }
}

/// A proposed edge for [`Mvcg::try_add_edges`].
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub from: TxnId,
    pub to: TxnId,
    pub reason: EdgeReason,
    /// The conflict pair that produced the edge, when there is one.
    pub pair: Option<ConflictPair>,
}

impl EdgeSpec {
    pub fn real_time(from: TxnId, to: TxnId) -> EdgeSpec {
        EdgeSpec {
            from,
            to,
            reason: EdgeReason::RealTime,
            pair: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownVertex(pub TxnId);

impl fmt::Display for UnknownVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown vertex {}", self.0)
    }
}

impl core::error::Error for UnknownVertex {}

/// The multi-version conflict graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mvcg {
    vertices: BTreeSet<TxnId>,
    edges: BTreeMap<(TxnId, TxnId), EdgeInfo>,
}

impl Mvcg {
    pub fn new() -> Mvcg {
        Mvcg::default()
    }

    pub fn add_vertex(&mut self, t: TxnId) {
        self.vertices.insert(t);
    }

    pub fn vertices(&self) -> &BTreeSet<TxnId> {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, from: TxnId, to: TxnId) -> Option<&EdgeInfo> {
        self.edges.get(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (TxnId, TxnId, &EdgeInfo)> {
        self.edges.iter().map(|(&(a, b), info)| (a, b, info))
    }

    /// Endpoints and reasons only, for structural comparisons that should
    /// ignore provenance.
    pub fn shape(&self) -> BTreeMap<(TxnId, TxnId), BTreeSet<EdgeReason>> {
        self.edges
            .iter()
            .map(|(&e, info)| (e, info.reasons.clone()))
            .collect()
    }

    fn out_neighbors(&self, v: TxnId) -> impl Iterator<Item = TxnId> {
        self.edges
            .range((v, TxnId(u32::MIN))..=(v, TxnId(u32::MAX)))
            .map(|(&(_, to), _)| to)
    }

    /// Cycle check by iterative three-color DFS from the smallest vertex
    /// up. On failure returns one directed cycle.
    pub fn is_acyclic(&self) -> Result<(), Cycle> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color: BTreeMap<TxnId, Color> =
            self.vertices.iter().map(|&v| (v, Color::White)).collect();

        for &root in &self.vertices {
            if color[&root] != Color::White {
                continue;
            }
            // Stack of (vertex, its out-neighbor list, next index).
            let mut stack: Vec<(TxnId, Vec<TxnId>, usize)> = Vec::new();
            color.insert(root, Color::Gray);
            stack.push((root, self.out_neighbors(root).collect(), 0));
            while let Some(frame) = stack.last_mut() {
                let (v, neighbors, idx) = (frame.0, &frame.1, frame.2);
                if idx == neighbors.len() {
                    color.insert(v, Color::Black);
                    stack.pop();
                    continue;
                }
                frame.2 += 1;
                let next = neighbors[idx];
                match color[&next] {
                    Color::White => {
                        color.insert(next, Color::Gray);
                        stack.push((next, self.out_neighbors(next).collect(), 0));
                    }
                    Color::Gray => {
                        // Back edge: the cycle is the stack suffix from
                        // `next` through `v`.
                        let start = stack.iter().position(|f| f.0 == next).unwrap();
                        let walk: Vec<TxnId> = stack[start..].iter().map(|f| f.0).collect();
                        return Err(Cycle::normalized(walk));
                    }
                    Color::Black => {}
                }
            }
        }
        Ok(())
    }

    /// True when `to` is reachable from `from`.
    fn reaches(&self, from: TxnId, to: TxnId) -> Option<Vec<TxnId>> {
        // DFS recording the path; neighbors in ascending order.
        let mut visited: BTreeSet<TxnId> = BTreeSet::new();
        let mut stack: Vec<(TxnId, Vec<TxnId>, usize)> = Vec::new();
        visited.insert(from);
        stack.push((from, self.out_neighbors(from).collect(), 0));
        while let Some(frame) = stack.last_mut() {
            let (v, neighbors, idx) = (frame.0, &frame.1, frame.2);
            if idx == neighbors.len() {
                stack.pop();
                continue;
            }
            frame.2 += 1;
            let next = neighbors[idx];
            let _ = v;
            if next == to {
                let mut path: Vec<TxnId> = stack.iter().map(|f| f.0).collect();
                path.push(to);
                return Some(path);
            }
            if visited.insert(next) {
                stack.push((next, self.out_neighbors(next).collect(), 0));
            }
        }
        None
    }

    /// Atomically adds a batch of edges iff the result stays acyclic.
    /// Unknown endpoints become vertices. On rejection the graph is left
    /// untouched and a cycle through one of the batch edges is returned.
    pub fn try_add_edges(&mut self, batch: &[EdgeSpec]) -> Result<(), Cycle> {
        let mut candidate = self.clone();
        for spec in batch {
            if spec.from == spec.to {
                return Err(Cycle {
                    vertices: alloc::vec![spec.from, spec.to],
                });
            }
            candidate.add_vertex(spec.from);
            candidate.add_vertex(spec.to);
            let info = candidate.edges.entry((spec.from, spec.to)).or_default();
            info.reasons.insert(spec.reason);
            if let Some(pair) = &spec.pair {
                if !info.pairs.contains(pair) {
                    info.pairs.push(pair.clone());
                }
            }
        }
        if candidate.is_acyclic().is_ok() {
            *self = candidate;
            return Ok(());
        }
        // Report a cycle through a batch edge: a path to -> from closed by
        // the edge (from, to).
        for spec in batch {
            if let Some(path) = candidate.reaches(spec.to, spec.from) {
                return Err(Cycle::normalized(path));
            }
        }
        // Only possible if the graph was cyclic before the batch.
        Err(candidate.is_acyclic().unwrap_err())
    }

    /// Removes a vertex and all its incident edges.
    pub fn remove_vertex(&mut self, t: TxnId) -> Result<(), UnknownVertex> {
        if !self.vertices.remove(&t) {
            return Err(UnknownVertex(t));
        }
        self.edges.retain(|&(a, b), _| a != t && b != t);
        Ok(())
    }

    /// Topological order with smallest-id tie-break; `None` when cyclic.
    pub fn topological_order(&self) -> Option<Vec<TxnId>> {
        let mut indegree: BTreeMap<TxnId, usize> =
            self.vertices.iter().map(|&v| (v, 0)).collect();
        for &(_, to) in self.edges.keys() {
            *indegree.get_mut(&to).unwrap() += 1;
        }
        let mut ready: BinaryHeap<Reverse<TxnId>> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| Reverse(v))
            .collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for w in self.out_neighbors(v) {
                let d = indegree.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(w));
                }
            }
        }
        (order.len() == self.vertices.len()).then_some(order)
    }

    /// DOT rendering with reason-labeled edges; byte-deterministic.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph mvcg {\n");
        for v in &self.vertices {
            let _ = writeln!(out, "  \"{v}\";");
        }
        for ((from, to), info) in &self.edges {
            let mut label = String::new();
            for (i, r) in info.reasons.iter().enumerate() {
                if i > 0 {
                    label.push(',');
                }
                label.push_str(r.code());
            }
            let _ = writeln!(out, "  \"{from}\" -> \"{to}\" [label=\"{label}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the multi-version conflict graph of `h`: one vertex per
/// transaction of the completion (plus the initializer), real-time edges
/// from the real-time order of `h`, and one edge per multi-version
/// conflict pair. Rejects invalid histories.
pub fn build_mvcg(h: &History) -> Result<Mvcg, InvalidHistory> {
    let mvco = conflict::mvc_order(h)?;
    let mut g = Mvcg::new();
    g.add_vertex(TxnId::INITIAL);
    for t in mvco.source().txns() {
        g.add_vertex(t);
    }
    for (from, to) in h.real_time_pairs() {
        let info = g.edges.entry((from, to)).or_default();
        info.reasons.insert(EdgeReason::RealTime);
    }
    for pair in mvco.pairs() {
        let reason = match pair.kind {
            crate::conflict::ConflictKind::CommitCommit => EdgeReason::CommitCommit,
            crate::conflict::ConflictKind::CommitRead => EdgeReason::CommitRead,
            crate::conflict::ConflictKind::ReadCommit => EdgeReason::ReadCommit,
            _ => unreachable!("mvc_order yields only multi-version kinds"),
        };
        debug_assert_ne!(pair.from.txn, pair.to.txn);
        let info = g.edges.entry((pair.from.txn, pair.to.txn)).or_default();
        info.reasons.insert(reason);
        info.pairs.push(pair.clone());
    }
    Ok(g)
}

/// Expands a transaction order over the completion of `h` into a
/// t-sequential history: per-transaction event sequences, concatenated in
/// order. The order must start with the initializer.
pub fn expand_order(h: &History, order: &[TxnId]) -> History {
    debug_assert_eq!(order.first(), Some(&TxnId::INITIAL));
    let completed = h.completion();
    let mut events = Vec::with_capacity(completed.input_events().len());
    for &t in order {
        if t.is_initial() {
            continue;
        }
        events.extend(completed.txn_events(t).map(|(_, e)| e.clone()));
    }
    History::from_events(events)
}

/// If `g` (the graph of `h`) is acyclic, expands its deterministic
/// topological order into a t-sequential history; `None` when cyclic.
pub fn serialization_witness(h: &History, g: &Mvcg) -> Option<History> {
    let order = g.topological_order()?;
    Some(expand_order(h, &order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::{mvc_order, satisfies};
    use crate::fixtures;
    use crate::history::Event;
    use alloc::vec;
    use alloc::vec::Vec;

    fn shape_of(h: &crate::history::History) -> BTreeMap<(u32, u32), Vec<&'static str>> {
        build_mvcg(h)
            .unwrap()
            .shape()
            .into_iter()
            .map(|((a, b), rs)| ((a.0, b.0), rs.into_iter().map(|r| r.code()).collect()))
            .collect()
    }

    #[test]
    fn mvcg_of_h1() {
        let shape = shape_of(&fixtures::h1());
        assert_eq!(
            shape,
            BTreeMap::from([
                ((0, 1), vec!["RT", "CR"]),
                ((0, 2), vec!["RT", "CC"]),
                ((1, 2), vec!["RC"]),
            ])
        );
        assert!(build_mvcg(&fixtures::h1()).unwrap().is_acyclic().is_ok());
    }

    #[test]
    fn mvcg_of_h2_is_cyclic_through_t2_t3() {
        let g = build_mvcg(&fixtures::h2()).unwrap();
        assert!(g.edge(TxnId(2), TxnId(3)).is_some());
        assert!(g.edge(TxnId(3), TxnId(2)).is_some());
        let cycle = g.is_acyclic().unwrap_err();
        assert_eq!(cycle.vertices, vec![TxnId(2), TxnId(3), TxnId(2)]);
    }

    #[test]
    fn mvcg_of_h3_is_cyclic_through_real_time() {
        let g = build_mvcg(&fixtures::h3()).unwrap();
        let cycle = g.is_acyclic().unwrap_err();
        assert_eq!(cycle.vertices, vec![TxnId(1), TxnId(2), TxnId(1)]);
        assert!(
            g.edge(TxnId(1), TxnId(2))
                .unwrap()
                .reasons
                .contains(&EdgeReason::RealTime)
        );
        assert!(
            g.edge(TxnId(2), TxnId(1))
                .unwrap()
                .reasons
                .contains(&EdgeReason::ReadCommit)
        );
    }

    #[test]
    fn empty_graph_is_acyclic() {
        assert!(Mvcg::new().is_acyclic().is_ok());
        assert_eq!(Mvcg::new().to_dot(), "digraph mvcg {\n}\n");
    }

    #[test]
    fn witness_for_h1_is_t0_t1_t2() {
        let h1 = fixtures::h1();
        let g = build_mvcg(&h1).unwrap();
        let s = serialization_witness(&h1, &g).unwrap();
        assert_eq!(
            s.input_events(),
            &[
                Event::read(1, "x", 0),
                Event::read(1, "y", 0),
                Event::commit(1),
                Event::write(2, "x", 10),
                Event::write(2, "y", 10),
                Event::commit(2),
            ]
        );
        assert!(s.is_legal());
        assert!(s.is_t_sequential());
        assert!(satisfies(&s, &mvc_order(&h1).unwrap()).is_ok());
    }

    #[test]
    fn witness_for_h2_is_none() {
        let h2 = fixtures::h2();
        let g = build_mvcg(&h2).unwrap();
        assert!(serialization_witness(&h2, &g).is_none());
    }

    #[test]
    fn witness_for_h4_is_t0_t2_t1() {
        let h4 = fixtures::h4();
        let g = build_mvcg(&h4).unwrap();
        let s = serialization_witness(&h4, &g).unwrap();
        assert_eq!(
            s.input_events(),
            &[
                Event::read(2, "x", 0),
                Event::commit(2),
                Event::write(1, "x", 5),
                Event::commit(1),
            ]
        );
    }

    #[test]
    fn try_add_edges_accepts_acyclic_batches() {
        let mut g = Mvcg::new();
        g.try_add_edges(&[EdgeSpec::real_time(TxnId(1), TxnId(2))])
            .unwrap();
        g.try_add_edges(&[EdgeSpec::real_time(TxnId(2), TxnId(3))])
            .unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn try_add_edges_rejects_and_reports_the_cycle() {
        let mut g = Mvcg::new();
        g.try_add_edges(&[EdgeSpec::real_time(TxnId(1), TxnId(2))])
            .unwrap();
        let cycle = g
            .try_add_edges(&[EdgeSpec {
                from: TxnId(2),
                to: TxnId(1),
                reason: EdgeReason::ReadCommit,
                pair: None,
            }])
            .unwrap_err();
        assert_eq!(cycle.vertices, vec![TxnId(1), TxnId(2), TxnId(1)]);
        assert_eq!(g.edge_count(), 1);
        assert!(g.edge(TxnId(2), TxnId(1)).is_none());
    }

    #[test]
    fn try_add_edges_is_atomic() {
        let mut g = Mvcg::new();
        let before = g.clone();
        let batch = [
            EdgeSpec::real_time(TxnId(1), TxnId(2)),
            EdgeSpec::real_time(TxnId(2), TxnId(3)),
            EdgeSpec::real_time(TxnId(3), TxnId(1)),
        ];
        assert!(g.try_add_edges(&batch).is_err());
        assert_eq!(g, before);
    }

    #[test]
    fn remove_vertex_drops_incident_edges() {
        let mut g = build_mvcg(&fixtures::h1()).unwrap();
        g.remove_vertex(TxnId(1)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.edge(TxnId(0), TxnId(2)).is_some());
        assert_eq!(g.remove_vertex(TxnId(9)), Err(UnknownVertex(TxnId(9))));
    }

    #[test]
    fn removing_the_cycle_vertex_of_h2_leaves_a_dag() {
        let mut g = build_mvcg(&fixtures::h2()).unwrap();
        g.remove_vertex(TxnId(3)).unwrap();
        assert!(g.is_acyclic().is_ok());
    }

    #[test]
    fn dot_output_is_deterministic_and_labeled() {
        let g = build_mvcg(&fixtures::h1()).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot, g.to_dot());
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(dot.contains("\"T0\" -> \"T1\" [label=\"RT,CR\"];"));
        assert!(dot.contains("\"T0\" -> \"T2\" [label=\"RT,CC\"];"));
        assert!(dot.contains("\"T1\" -> \"T2\" [label=\"RC\"];"));
    }
}
