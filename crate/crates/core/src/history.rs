//! Event and history model for multi-version transactional executions.
//!
//! A [`History`] is one global sequential interleaving of transactional
//! operations (reads, writes, commit and abort attempts), each folded with
//! its response into a single atomic [`Event`]. Every history implicitly
//! starts with a committed initializer transaction `T0` that writes `0` to
//! every object mentioned by the input events; [`History::from_events`]
//! materializes that block up front so event positions are stable across
//! all downstream analyses.
//!
//! The per-transaction shape of a well-formed history is a read-only
//! prefix, then a write-only part, then at most one terminal event (a
//! commit/abort attempt or a forcefully aborted operation). Nothing may
//! follow a transaction's terminal event.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Transaction identifier. Id 0 is reserved for the initializer, which is
/// always committed and precedes every input event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TxnId(pub u32);

impl TxnId {
    /// The initializer transaction.
    pub const INITIAL: TxnId = TxnId(0);

    pub fn is_initial(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// One atomic transactional operation together with its response.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    /// `r_k(x, v)`; `value` is `None` for the forcefully aborted form
    /// `r_k(x, A)`.
    Read {
        txn: TxnId,
        object: String,
        value: Option<i64>,
    },
    /// `w_k(x, v)`; `aborted` marks the forcefully aborted form
    /// `w_k(x, v, A)`.
    Write {
        txn: TxnId,
        object: String,
        value: i64,
        aborted: bool,
    },
    /// A commit attempt, returning commit (`c_k`) or abort.
    TryCommit { txn: TxnId, committed: bool },
    /// An explicit abort (`a_k`); always succeeds in aborting.
    TryAbort { txn: TxnId },
}

impl Event {
    pub fn read(txn: u32, object: &str, value: i64) -> Event {
        Event::Read {
            txn: TxnId(txn),
            object: String::from(object),
            value: Some(value),
        }
    }

    pub fn write(txn: u32, object: &str, value: i64) -> Event {
        Event::Write {
            txn: TxnId(txn),
            object: String::from(object),
            value,
            aborted: false,
        }
    }

    pub fn commit(txn: u32) -> Event {
        Event::TryCommit {
            txn: TxnId(txn),
            committed: true,
        }
    }

    pub fn abort(txn: u32) -> Event {
        Event::TryAbort { txn: TxnId(txn) }
    }

    pub fn txn(&self) -> TxnId {
        match *self {
            Event::Read { txn, .. }
            | Event::Write { txn, .. }
            | Event::TryCommit { txn, .. }
            | Event::TryAbort { txn } => txn,
        }
    }

    /// The object the operation touches; terminal attempts touch none.
    pub fn object(&self) -> Option<&str> {
        match self {
            Event::Read { object, .. } | Event::Write { object, .. } => Some(object),
            _ => None,
        }
    }

    /// True for every event whose response ends the transaction.
    pub fn is_terminal(&self) -> bool {
        match self {
            Event::Read { value, .. } => value.is_none(),
            Event::Write { aborted, .. } => *aborted,
            Event::TryCommit { .. } | Event::TryAbort { .. } => true,
        }
    }

    /// True when the response is an abort (of the operation or transaction).
    pub fn is_abort_response(&self) -> bool {
        match self {
            Event::Read { value, .. } => value.is_none(),
            Event::Write { aborted, .. } => *aborted,
            Event::TryCommit { committed, .. } => !committed,
            Event::TryAbort { .. } => true,
        }
    }

    pub fn is_successful_commit(&self) -> bool {
        matches!(self, Event::TryCommit { committed: true, .. })
    }

    pub fn successful_read(&self) -> Option<(&str, i64)> {
        match self {
            Event::Read {
                object,
                value: Some(v),
                ..
            } => Some((object, *v)),
            _ => None,
        }
    }

    pub fn successful_write(&self) -> Option<(&str, i64)> {
        match self {
            Event::Write {
                object,
                value,
                aborted: false,
                ..
            } => Some((object, *value)),
            _ => None,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Read {
                txn,
                object,
                value: Some(v),
            } => write!(f, "r{}({object},{v})", txn.0),
            Event::Read {
                txn,
                object,
                value: None,
            } => write!(f, "r{}({object},A)", txn.0),
            Event::Write {
                txn,
                object,
                value,
                aborted: false,
            } => write!(f, "w{}({object},{value})", txn.0),
            Event::Write {
                txn,
                object,
                value,
                aborted: true,
            } => write!(f, "w{}({object},{value},A)", txn.0),
            Event::TryCommit {
                txn,
                committed: true,
            } => write!(f, "c{}", txn.0),
            Event::TryCommit {
                txn,
                committed: false,
            } => write!(f, "tryc{}(A)", txn.0),
            Event::TryAbort { txn } => write!(f, "a{}", txn.0),
        }
    }
}

/// Status of a transaction, derived purely from its events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnStatus {
    Live,
    Committed,
    Aborted,
}

/// Reference to a successful `TryCommit` event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CommitRef {
    pub txn: TxnId,
    pub pos: usize,
}

/// Why a history is not well-formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellFormedRule {
    /// Transaction id 0 appeared in the input events.
    ReservedTxnId,
    /// A read occurred after the transaction's first write.
    ReadAfterWrite,
    /// An event followed the transaction's terminal event.
    EventAfterTerminal,
}

impl fmt::Display for WellFormedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WellFormedRule::ReservedTxnId => "transaction id 0 is reserved for the initializer",
            WellFormedRule::ReadAfterWrite => "read after write within a transaction",
            WellFormedRule::EventAfterTerminal => "event after the transaction's terminal event",
        };
        f.write_str(s)
    }
}

/// A well-formedness violation, naming the offending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WellFormedViolation {
    /// Position of the offending event in [`History::events`].
    pub pos: usize,
    pub rule: WellFormedRule,
}

impl fmt::Display for WellFormedViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.pos, self.rule)
    }
}

impl core::error::Error for WellFormedViolation {}

/// A duplicate written value, reported by the strict uniqueness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateWrite {
    pub pos: usize,
    pub object: String,
    pub value: i64,
}

impl fmt::Display for DuplicateWrite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "event {}: value {} written to {} more than once",
            self.pos, self.value, self.object
        )
    }
}

impl core::error::Error for DuplicateWrite {}

/// An ordered sequence of events, with the initializer block materialized
/// at the front.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct History {
    events: Vec<Event>,
    /// Length of the synthesized initializer block (`T0`'s writes plus its
    /// commit). Everything at or beyond this index is an input event.
    init_len: usize,
}

impl History {
    /// Builds a history from input events, synthesizing the initializer
    /// transaction: a write of `0` to every object mentioned anywhere in
    /// the input, in object order, followed by `c0`.
    pub fn from_events(input: Vec<Event>) -> History {
        let objects: BTreeSet<&str> = input.iter().filter_map(|e| e.object()).collect();
        let mut events: Vec<Event> = objects
            .iter()
            .map(|o| Event::write(0, o, 0))
            .collect();
        events.push(Event::commit(0));
        let init_len = events.len();
        events.extend(input);
        History { events, init_len }
    }

    pub fn empty() -> History {
        History::from_events(Vec::new())
    }

    /// All events, initializer block included.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Length of the synthesized initializer block.
    pub fn init_len(&self) -> usize {
        self.init_len
    }

    /// The events as supplied by the caller (everything after `c0`).
    pub fn input_events(&self) -> &[Event] {
        &self.events[self.init_len..]
    }

    /// Objects written by the initializer, i.e. every object the history
    /// mentions.
    pub fn objects(&self) -> BTreeSet<&str> {
        self.events[..self.init_len]
            .iter()
            .filter_map(|e| e.object())
            .collect()
    }

    /// All transaction ids appearing in the history, initializer included.
    pub fn txns(&self) -> BTreeSet<TxnId> {
        self.events.iter().map(|e| e.txn()).collect()
    }

    /// Status of `t`, or `None` if the history contains no event of `t`.
    pub fn status(&self, t: TxnId) -> Option<TxnStatus> {
        let mut seen = false;
        for e in &self.events {
            if e.txn() != t {
                continue;
            }
            seen = true;
            if e.is_successful_commit() {
                return Some(TxnStatus::Committed);
            }
            if e.is_abort_response() {
                return Some(TxnStatus::Aborted);
            }
        }
        seen.then_some(TxnStatus::Live)
    }

    pub fn committed(&self) -> BTreeSet<TxnId> {
        self.by_status(TxnStatus::Committed)
    }

    pub fn aborted(&self) -> BTreeSet<TxnId> {
        self.by_status(TxnStatus::Aborted)
    }

    pub fn incomplete(&self) -> BTreeSet<TxnId> {
        self.by_status(TxnStatus::Live)
    }

    fn by_status(&self, want: TxnStatus) -> BTreeSet<TxnId> {
        self.txns()
            .into_iter()
            .filter(|&t| self.status(t) == Some(want))
            .collect()
    }

    /// Position of the first event of `t`.
    pub fn first_pos(&self, t: TxnId) -> Option<usize> {
        self.events.iter().position(|e| e.txn() == t)
    }

    /// Position of the last event of `t`.
    pub fn last_pos(&self, t: TxnId) -> Option<usize> {
        self.events.iter().rposition(|e| e.txn() == t)
    }

    /// Events of `t` with their positions, in history order.
    pub fn txn_events(&self, t: TxnId) -> impl Iterator<Item = (usize, &Event)> {
        self.events
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.txn() == t)
    }

    /// Objects successfully written by `t`.
    pub fn write_set(&self, t: TxnId) -> BTreeSet<&str> {
        self.events
            .iter()
            .filter(|e| e.txn() == t)
            .filter_map(|e| e.successful_write())
            .map(|(o, _)| o)
            .collect()
    }

    /// True when `t` successfully wrote `value` to `object`.
    pub fn wrote(&self, t: TxnId, object: &str, value: i64) -> bool {
        self.events
            .iter()
            .filter(|e| e.txn() == t)
            .filter_map(|e| e.successful_write())
            .any(|(o, v)| o == object && v == value)
    }

    /// Checks the per-transaction shape rules: a read-only prefix, then a
    /// write-only part, then at most one terminal event, and no use of the
    /// reserved initializer id. Reports the first offending event.
    pub fn validate_well_formed(&self) -> Result<(), WellFormedViolation> {
        #[derive(PartialEq)]
        enum Phase {
            Reads,
            Writes,
            Done,
        }
        let mut phases: BTreeMap<TxnId, Phase> = BTreeMap::new();
        for (i, e) in self.events.iter().enumerate().skip(self.init_len) {
            let t = e.txn();
            if t.is_initial() {
                return Err(WellFormedViolation {
                    pos: i,
                    rule: WellFormedRule::ReservedTxnId,
                });
            }
            let phase = phases.entry(t).or_insert(Phase::Reads);
            if *phase == Phase::Done {
                return Err(WellFormedViolation {
                    pos: i,
                    rule: WellFormedRule::EventAfterTerminal,
                });
            }
            match e {
                Event::Read { .. } => {
                    if *phase == Phase::Writes {
                        return Err(WellFormedViolation {
                            pos: i,
                            rule: WellFormedRule::ReadAfterWrite,
                        });
                    }
                }
                Event::Write { .. } => *phase = Phase::Writes,
                Event::TryCommit { .. } | Event::TryAbort { .. } => {}
            }
            if e.is_terminal() {
                *phase = Phase::Done;
            }
        }
        Ok(())
    }

    /// Strict-mode check: rejects a value written more than once to the
    /// same object anywhere in the history (the initializer's zeroes
    /// count). Not required by any analysis; duplicate values merely make
    /// valid-write resolution fall back to the closest-commit tie-break.
    pub fn validate_unique_writes(&self) -> Result<(), DuplicateWrite> {
        let mut seen: BTreeSet<(&str, i64)> = BTreeSet::new();
        for (i, e) in self.events.iter().enumerate() {
            if let Some((o, v)) = e.successful_write() {
                if !seen.insert((o, v)) {
                    return Err(DuplicateWrite {
                        pos: i,
                        object: String::from(o),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// The completion: every live transaction gets an abort inserted
    /// immediately after its last event. Idempotent.
    pub fn completion(&self) -> History {
        let live = self.incomplete();
        if live.is_empty() {
            return self.clone();
        }
        let last_pos: BTreeMap<usize, TxnId> = live
            .iter()
            .map(|&t| (self.last_pos(t).expect("live txn has events"), t))
            .collect();
        let mut events = Vec::with_capacity(self.events.len() + live.len());
        for (i, e) in self.events.iter().enumerate() {
            events.push(e.clone());
            if let Some(&t) = last_pos.get(&i) {
                events.push(Event::TryAbort { txn: t });
            }
        }
        History {
            events,
            init_len: self.init_len,
        }
    }

    /// True when no transaction is live.
    pub fn is_complete(&self) -> bool {
        self.incomplete().is_empty()
    }

    /// The real-time order: `(a, b)` is included iff `a` is complete and
    /// its last event precedes `b`'s first event.
    pub fn real_time_pairs(&self) -> BTreeSet<(TxnId, TxnId)> {
        struct Span {
            first: usize,
            last: usize,
            complete: bool,
        }
        let spans: Vec<(TxnId, Span)> = self
            .txns()
            .into_iter()
            .map(|t| {
                let first = self.first_pos(t).unwrap();
                let last = self.last_pos(t).unwrap();
                let complete = self.status(t) != Some(TxnStatus::Live);
                (t, Span { first, last, complete })
            })
            .collect();
        let mut pairs = BTreeSet::new();
        for (a, sa) in &spans {
            if !sa.complete {
                continue;
            }
            for (b, sb) in &spans {
                if a != b && sa.last < sb.first {
                    pairs.insert((*a, *b));
                }
            }
        }
        pairs
    }

    /// True when transactions never overlap.
    pub fn is_t_sequential(&self) -> bool {
        let rt = self.real_time_pairs();
        let txns: Vec<TxnId> = self.txns().into_iter().collect();
        for (i, &a) in txns.iter().enumerate() {
            for &b in &txns[i + 1..] {
                if !rt.contains(&(a, b)) && !rt.contains(&(b, a)) {
                    return false;
                }
            }
        }
        true
    }

    /// The valid-write of the successful read at `read_pos`: the closest
    /// preceding commit whose transaction wrote the read's value to the
    /// read's object. `None` means the read is invalid.
    pub fn valid_write(&self, read_pos: usize) -> Option<CommitRef> {
        let (object, value) = self.events[read_pos]
            .successful_read()
            .expect("valid_write requires a successful read");
        self.commits_before(read_pos)
            .find(|c| self.wrote(c.txn, object, value))
    }

    /// The last-write of the successful read at `read_pos`: the latest
    /// preceding commit whose transaction has the read's object in its
    /// write set. The initializer guarantees one exists.
    pub fn last_write(&self, read_pos: usize) -> CommitRef {
        let (object, _) = self.events[read_pos]
            .successful_read()
            .expect("last_write requires a successful read");
        self.commits_before(read_pos)
            .find(|c| self.write_set(c.txn).contains(object))
            .expect("initializer writes every mentioned object")
    }

    /// Commits strictly before `pos`, latest first.
    fn commits_before(&self, pos: usize) -> impl Iterator<Item = CommitRef> {
        self.events[..pos]
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, e)| e.is_successful_commit())
            .map(|(i, e)| CommitRef {
                txn: e.txn(),
                pos: i,
            })
    }

    /// Positions of all successful reads.
    pub fn successful_reads(&self) -> impl Iterator<Item = usize> {
        self.events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.successful_read().is_some())
            .map(|(i, _)| i)
    }

    /// Every successful read has a valid-write.
    pub fn is_valid(&self) -> bool {
        self.first_invalid_read().is_none()
    }

    /// Position of the first successful read without a valid-write.
    pub fn first_invalid_read(&self) -> Option<usize> {
        self.successful_reads()
            .find(|&p| self.valid_write(p).is_none())
    }

    /// Every successful read returns the value written by its last-write's
    /// transaction.
    pub fn is_legal(&self) -> bool {
        self.successful_reads().all(|p| {
            let (object, value) = self.events[p].successful_read().unwrap();
            let lw = self.last_write(p);
            self.wrote(lw.txn, object, value)
        })
    }

    /// Valid but not legal: some read returned an older version than the
    /// latest committed one.
    pub fn is_multi_versioned(&self) -> bool {
        self.is_valid() && !self.is_legal()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for e in self.input_events() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
            first = false;
        }
        Ok(())
    }
}
