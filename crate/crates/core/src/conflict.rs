//! Conflict extraction and the satisfaction relation.
//!
//! Two conflict notions are supported, both defined over the completion of
//! a history and restricted to successfully executed operations:
//!
//! - the single-version conflict order (w-w, w-r, r-w), which orders
//!   operations by commit position and plain precedence, and
//! - the multi-version conflict order (c-c, c-r, r-c), which anchors each
//!   read at its valid-write so that reads of older versions stay
//!   serializable.
//!
//! The r-c rule places a read before every committed writer of the same
//! object whose commit is strictly after the read's valid-write. Anchoring
//! at the valid-write (rather than the last-write) is what makes a
//! multi-versioned read representable: the read can be serialized before
//! the newer writers it skipped.
//!
//! Pairs between operations of one transaction are dropped: program order
//! satisfies them in every equivalent history, so they constrain nothing.
//! Pairs involving the initializer are kept.

use crate::history::{History, TxnId};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Kind of an extracted conflict pair. The first three belong to the
/// single-version order, the last three to the multi-version order; one
/// [`ConflictSet`] never mixes the two families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    WriteWrite,
    WriteRead,
    ReadWrite,
    CommitCommit,
    CommitRead,
    ReadCommit,
}

impl ConflictKind {
    /// Two-letter code used in text and JSON output.
    pub fn code(self) -> &'static str {
        match self {
            ConflictKind::WriteWrite => "ww",
            ConflictKind::WriteRead => "wr",
            ConflictKind::ReadWrite => "rw",
            ConflictKind::CommitCommit => "cc",
            ConflictKind::CommitRead => "cr",
            ConflictKind::ReadCommit => "rc",
        }
    }

    pub fn is_multi_version(self) -> bool {
        matches!(
            self,
            ConflictKind::CommitCommit | ConflictKind::CommitRead | ConflictKind::ReadCommit
        )
    }
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Reference to one operation: the transaction it belongs to and its event
/// position in the completed history the conflicts were extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpRef {
    pub txn: TxnId,
    pub pos: usize,
}

impl PartialOrd for OpRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpRef {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.pos, self.txn).cmp(&(other.pos, other.txn))
    }
}

/// One ordered conflict between two operations of distinct transactions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConflictPair {
    pub kind: ConflictKind,
    pub from: OpRef,
    pub to: OpRef,
    pub object: String,
}

impl PartialOrd for ConflictPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConflictPair {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.from, self.to, self.kind, &self.object).cmp(&(
            other.from,
            other.to,
            other.kind,
            &other.object,
        ))
    }
}

impl fmt::Display for ConflictPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: ({}, {}) via {}",
            self.kind,
            self.source_op(self.from),
            self.source_op(self.to),
            self.object
        )
    }
}

impl ConflictPair {
    fn source_op(&self, op: OpRef) -> alloc::string::String {
        alloc::format!("{}@{}", op.txn, op.pos)
    }
}

/// A deduplicated, deterministically ordered set of conflict pairs
/// together with the (completed) history they were extracted from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictSet {
    pairs: Vec<ConflictPair>,
    source: History,
}

impl ConflictSet {
    fn new(mut pairs: Vec<ConflictPair>, source: History) -> ConflictSet {
        pairs.sort();
        pairs.dedup();
        ConflictSet { pairs, source }
    }

    /// Pairs ordered by from-position, then to-position.
    pub fn pairs(&self) -> &[ConflictPair] {
        &self.pairs
    }

    /// The completed history the pairs refer to; all positions index into
    /// its event sequence.
    pub fn source(&self) -> &History {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConflictPair> {
        self.pairs.iter()
    }
}

/// A successful read with no valid-write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidHistory {
    /// Position of the offending read in the completed history.
    pub read_pos: usize,
}

impl fmt::Display for InvalidHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid history: read at position {} has no valid write",
            self.read_pos
        )
    }
}

impl core::error::Error for InvalidHistory {}

/// Committed transactions writing each object, with commit positions,
/// ordered by commit position.
fn committed_writers(h: &History) -> BTreeMap<&str, Vec<(usize, TxnId)>> {
    let mut writers: BTreeMap<&str, Vec<(usize, TxnId)>> = BTreeMap::new();
    for t in h.committed() {
        let cpos = h
            .txn_events(t)
            .find(|(_, e)| e.is_successful_commit())
            .map(|(p, _)| p)
            .expect("committed txn has a commit event");
        for o in h.write_set(t) {
            writers.entry(o).or_default().push((cpos, t));
        }
    }
    for list in writers.values_mut() {
        list.sort();
    }
    writers
}

/// Extracts the single-version conflict order (w-w, w-r, r-w) of the
/// completion of `h`.
pub fn conflict_order(h: &History) -> ConflictSet {
    let completed = h.completion();
    let writers = committed_writers(&completed);
    let mut pairs = Vec::new();

    // w-w: commits of write-set-intersecting transactions, in commit order.
    for (object, list) in &writers {
        for (i, &(p_i, t_i)) in list.iter().enumerate() {
            for &(p_j, t_j) in &list[i + 1..] {
                pairs.push(ConflictPair {
                    kind: ConflictKind::WriteWrite,
                    from: OpRef { txn: t_i, pos: p_i },
                    to: OpRef { txn: t_j, pos: p_j },
                    object: String::from(*object),
                });
            }
        }
    }

    // w-r and r-w: a committed writer against every successful read of the
    // object, ordered by position.
    for read_pos in completed.successful_reads() {
        let event = &completed.events()[read_pos];
        let reader = event.txn();
        let (object, _) = event.successful_read().unwrap();
        let Some(list) = writers.get(object) else {
            continue;
        };
        for &(cpos, writer) in list {
            if writer == reader {
                continue;
            }
            let (kind, from, to) = if cpos < read_pos {
                (
                    ConflictKind::WriteRead,
                    OpRef { txn: writer, pos: cpos },
                    OpRef { txn: reader, pos: read_pos },
                )
            } else {
                (
                    ConflictKind::ReadWrite,
                    OpRef { txn: reader, pos: read_pos },
                    OpRef { txn: writer, pos: cpos },
                )
            };
            pairs.push(ConflictPair {
                kind,
                from,
                to,
                object: String::from(object),
            });
        }
    }

    ConflictSet::new(pairs, completed)
}

/// Extracts the multi-version conflict order (c-c, c-r, r-c) of the
/// completion of `h`. Rejects invalid histories.
pub fn mvc_order(h: &History) -> Result<ConflictSet, InvalidHistory> {
    let completed = h.completion();
    let writers = committed_writers(&completed);
    let mut pairs = Vec::new();

    // c-c: commits of two committed writers of the same object.
    for (object, list) in &writers {
        for (i, &(p_i, t_i)) in list.iter().enumerate() {
            for &(p_j, t_j) in &list[i + 1..] {
                pairs.push(ConflictPair {
                    kind: ConflictKind::CommitCommit,
                    from: OpRef { txn: t_i, pos: p_i },
                    to: OpRef { txn: t_j, pos: p_j },
                    object: String::from(*object),
                });
            }
        }
    }

    // c-r and r-c: committed writers of the read's object, split around the
    // read's valid-write.
    for read_pos in completed.successful_reads() {
        let valw = completed
            .valid_write(read_pos)
            .ok_or(InvalidHistory { read_pos })?;
        let event = &completed.events()[read_pos];
        let reader = event.txn();
        let (object, _) = event.successful_read().unwrap();
        for &(cpos, writer) in writers.get(object).expect("valid-write implies a writer") {
            if writer == reader {
                continue;
            }
            let (kind, from, to) = if cpos <= valw.pos {
                (
                    ConflictKind::CommitRead,
                    OpRef { txn: writer, pos: cpos },
                    OpRef { txn: reader, pos: read_pos },
                )
            } else {
                (
                    ConflictKind::ReadCommit,
                    OpRef { txn: reader, pos: read_pos },
                    OpRef { txn: writer, pos: cpos },
                )
            };
            pairs.push(ConflictPair {
                kind,
                from,
                to,
                object: String::from(object),
            });
        }
    }

    Ok(ConflictSet::new(pairs, completed))
}

/// True iff the two histories have the same multiset of events and each
/// transaction's internal event order is identical.
pub fn equivalent(a: &History, b: &History) -> bool {
    if a.txns() != b.txns() {
        return false;
    }
    a.txns().into_iter().all(|t| {
        let ea: Vec<_> = a.txn_events(t).map(|(_, e)| e).collect();
        let eb: Vec<_> = b.txn_events(t).map(|(_, e)| e).collect();
        ea == eb
    })
}

/// Why a candidate fails to satisfy a conflict order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unsatisfied {
    /// The candidate is not equivalent to the order's source history.
    NotEquivalent,
    /// The first pair (in set order) whose operations the candidate orders
    /// the wrong way.
    Violated(ConflictPair),
}

impl fmt::Display for Unsatisfied {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unsatisfied::NotEquivalent => f.write_str("candidate is not equivalent"),
            Unsatisfied::Violated(p) => write!(f, "violated pair {p}"),
        }
    }
}

/// Maps operations of the order's source into candidate positions by
/// per-transaction ordinal, then checks every pair.
pub fn satisfies(candidate: &History, order: &ConflictSet) -> Result<(), Unsatisfied> {
    let source = order.source();
    if !equivalent(candidate, source) {
        return Err(Unsatisfied::NotEquivalent);
    }

    // Ordinal of each source event within its transaction.
    let mut ordinal = alloc::vec![0usize; source.events().len()];
    let mut counters: BTreeMap<TxnId, usize> = BTreeMap::new();
    for (i, e) in source.events().iter().enumerate() {
        let c = counters.entry(e.txn()).or_insert(0);
        ordinal[i] = *c;
        *c += 1;
    }

    // Candidate position of each (txn, ordinal).
    let mut candidate_pos: BTreeMap<(TxnId, usize), usize> = BTreeMap::new();
    counters.clear();
    for (i, e) in candidate.events().iter().enumerate() {
        let c = counters.entry(e.txn()).or_insert(0);
        candidate_pos.insert((e.txn(), *c), i);
        *c += 1;
    }

    let locate = |op: OpRef| candidate_pos[&(op.txn, ordinal[op.pos])];
    for pair in order.pairs() {
        if locate(pair.from) >= locate(pair.to) {
            return Err(Unsatisfied::Violated(pair.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::history::Event;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    /// Compact (kind, from-txn, to-txn, object) view for assertions.
    fn summary(set: &ConflictSet) -> BTreeSet<(&'static str, u32, u32, String)> {
        set.iter()
            .map(|p| (p.kind.code(), p.from.txn.0, p.to.txn.0, p.object.clone()))
            .collect()
    }

    #[test]
    fn conflict_order_of_h1() {
        let co = conflict_order(&fixtures::h1());
        let s = summary(&co);
        // The two-transaction ordering contradiction.
        assert!(s.contains(&("rw", 1, 2, String::from("x"))));
        assert!(s.contains(&("wr", 2, 1, String::from("y"))));
        assert_eq!(
            s,
            BTreeSet::from([
                ("ww", 0, 2, String::from("x")),
                ("ww", 0, 2, String::from("y")),
                ("wr", 0, 1, String::from("x")),
                ("wr", 0, 1, String::from("y")),
                ("wr", 2, 1, String::from("y")),
                ("rw", 1, 2, String::from("x")),
            ])
        );
    }

    #[test]
    fn conflict_order_of_h0_only_touches_the_initializer() {
        let co = conflict_order(&fixtures::h0());
        assert!(co.iter().all(|p| p.from.txn.is_initial() || p.to.txn.is_initial()));
        assert!(!co.is_empty());
    }

    #[test]
    fn conflict_order_of_h2_write_write_pairs() {
        let s = summary(&conflict_order(&fixtures::h2()));
        assert!(s.contains(&("ww", 1, 2, String::from("x"))));
        assert!(s.contains(&("ww", 2, 3, String::from("y"))));
    }

    #[test]
    fn mvc_order_of_h1() {
        let mvco = mvc_order(&fixtures::h1()).unwrap();
        let s = summary(&mvco);
        assert_eq!(
            s,
            BTreeSet::from([
                ("cc", 0, 2, String::from("x")),
                ("cc", 0, 2, String::from("y")),
                ("cr", 0, 1, String::from("x")),
                ("cr", 0, 1, String::from("y")),
                ("rc", 1, 2, String::from("x")),
                ("rc", 1, 2, String::from("y")),
            ])
        );
        assert!(mvco.iter().all(|p| p.kind.is_multi_version()));
    }

    #[test]
    fn mvc_order_of_h2_contains_the_blocking_pairs() {
        let mvco = mvc_order(&fixtures::h2()).unwrap();
        let s = summary(&mvco);
        // (r3(x,5), c2) and (c2, c3): the pairs that forbid serialization.
        assert!(s.contains(&("rc", 3, 2, String::from("x"))));
        assert!(s.contains(&("cc", 2, 3, String::from("y"))));
        // The read anchors at its valid-write, so same-transaction pairs
        // like (r2(x,5), c2) are absent.
        assert!(s.iter().all(|&(_, a, b, _)| a != b));
    }

    #[test]
    fn mvc_order_of_h0() {
        let mvco = mvc_order(&fixtures::h0()).unwrap();
        let s = summary(&mvco);
        assert_eq!(s, BTreeSet::from([("cr", 0, 1, String::from("x"))]));
    }

    #[test]
    fn mvc_order_rejects_invalid_histories() {
        let invalid = crate::history::History::from_events(vec![
            Event::read(1, "x", 7),
            Event::commit(1),
        ]);
        let err = mvc_order(&invalid).unwrap_err();
        assert_eq!(err.read_pos, invalid.init_len());
    }

    #[test]
    fn equivalence_ignores_interleaving_but_not_per_txn_order() {
        let h1 = fixtures::h1();
        let reordered = crate::history::History::from_events(vec![
            Event::write(2, "x", 10),
            Event::write(2, "y", 10),
            Event::commit(2),
            Event::read(1, "x", 0),
            Event::read(1, "y", 0),
            Event::commit(1),
        ]);
        assert!(equivalent(&h1, &reordered));
        assert!(equivalent(&h1, &h1));
        assert!(!equivalent(&h1, &fixtures::h0()));

        let swapped = crate::history::History::from_events(vec![
            Event::read(1, "y", 0),
            Event::write(2, "x", 10),
            Event::write(2, "y", 10),
            Event::commit(2),
            Event::read(1, "x", 0),
            Event::commit(1),
        ]);
        assert!(!equivalent(&h1, &swapped));
    }

    #[test]
    fn h1_does_not_satisfy_its_own_mvc_order() {
        let h1 = fixtures::h1();
        let mvco = mvc_order(&h1).unwrap();
        match satisfies(&h1, &mvco) {
            Err(Unsatisfied::Violated(p)) => {
                // First violated pair is (r1(y,0), c2).
                assert_eq!(p.kind, ConflictKind::ReadCommit);
                assert_eq!(p.from.txn, TxnId(1));
                assert_eq!(p.to.txn, TxnId(2));
                let ev = &mvco.source().events()[p.from.pos];
                assert_eq!(ev.successful_read(), Some(("y", 0)));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn the_t_sequential_reordering_of_h1_satisfies_its_mvc_order() {
        let h1 = fixtures::h1();
        let mvco = mvc_order(&h1).unwrap();
        let t0_t1_t2 = crate::history::History::from_events(vec![
            Event::read(1, "x", 0),
            Event::read(1, "y", 0),
            Event::commit(1),
            Event::write(2, "x", 10),
            Event::write(2, "y", 10),
            Event::commit(2),
        ]);
        assert!(satisfies(&t0_t1_t2, &mvco).is_ok());
    }

    #[test]
    fn h0_satisfies_its_own_mvc_order() {
        let h0 = fixtures::h0();
        let mvco = mvc_order(&h0).unwrap();
        assert!(satisfies(&h0, &mvco).is_ok());
    }

    #[test]
    fn satisfies_requires_equivalence() {
        let mvco = mvc_order(&fixtures::h1()).unwrap();
        assert_eq!(
            satisfies(&fixtures::h0(), &mvco),
            Err(Unsatisfied::NotEquivalent)
        );
    }

    #[test]
    fn conflicts_relate_only_successful_operations() {
        // The aborted read and the aborted transaction's write produce no
        // pairs at all.
        let h = crate::history::History::from_events(vec![
            Event::write(1, "x", 5),
            Event::abort(1),
            Event::Read {
                txn: TxnId(2),
                object: String::from("x"),
                value: None,
            },
            Event::write(3, "x", 7),
            Event::commit(3),
        ]);
        let co = conflict_order(&h);
        let mv = mvc_order(&h).unwrap();
        for p in co.iter().chain(mv.iter()) {
            assert_ne!(p.from.txn, TxnId(1));
            assert_ne!(p.to.txn, TxnId(1));
            assert_ne!(p.from.txn, TxnId(2));
            assert_ne!(p.to.txn, TxnId(2));
        }
    }
}
