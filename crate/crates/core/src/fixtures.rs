//! Canonical example histories used across tests and documentation.

use crate::history::{Event, History};
use alloc::vec;

/// A single read-only transaction: `r1(x,0) c1`.
pub fn h0() -> History {
    History::from_events(vec![Event::read(1, "x", 0), Event::commit(1)])
}

/// The motivating multi-versioned history:
/// `r1(x,0) w2(x,10) w2(y,10) c2 r1(y,0) c1`.
///
/// T1's read of `y` returns the initial 0 even though T2 committed 10
/// in between; only multiple versions make that possible.
pub fn h1() -> History {
    History::from_events(vec![
        Event::read(1, "x", 0),
        Event::write(2, "x", 10),
        Event::write(2, "y", 10),
        Event::commit(2),
        Event::read(1, "y", 0),
        Event::commit(1),
    ])
}

/// Opaque but not multi-version-conflict serializable:
/// `r1(x,0) r2(z,0) r3(z,0) w1(x,5) c1 r2(x,5) w2(x,10) w2(y,15) c2
///  r3(x,5) w3(y,25) c3`.
pub fn h2() -> History {
    History::from_events(vec![
        Event::read(1, "x", 0),
        Event::read(2, "z", 0),
        Event::read(3, "z", 0),
        Event::write(1, "x", 5),
        Event::commit(1),
        Event::read(2, "x", 5),
        Event::write(2, "x", 10),
        Event::write(2, "y", 15),
        Event::commit(2),
        Event::read(3, "x", 5),
        Event::write(3, "y", 25),
        Event::commit(3),
    ])
}

/// A real-time/conflict contradiction: `w1(x,5) c1 r2(x,0) c2`.
///
/// The real-time edge T1→T2 plus the read-commit edge T2→T1 make the
/// conflict graph cyclic.
pub fn h3() -> History {
    History::from_events(vec![
        Event::write(1, "x", 5),
        Event::commit(1),
        Event::read(2, "x", 0),
        Event::commit(2),
    ])
}

/// Acyclic with witness order T0 T2 T1: `r2(x,0) w1(x,5) c1 c2`.
pub fn h4() -> History {
    History::from_events(vec![
        Event::read(2, "x", 0),
        Event::write(1, "x", 5),
        Event::commit(1),
        Event::commit(2),
    ])
}
