//! Global hash-consing table. Children are interned before their parents,
//! so a shallow key (variant tag plus child addresses) identifies a node
//! structurally.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, Weak};

use dashmap::mapref::entry::Entry;
use dashmap::DashMap;

use super::{ComplexExpr, Inner, Node, Var};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64, u64),
    Var(Var),
    Binary(u8, usize, usize),
    Powi(usize, i32),
    Unary(u8, usize),
}

impl Key {
    fn of(node: &Node) -> Key {
        match node {
            Node::Const(c) => Key::Const(c.re.to_bits(), c.im.to_bits()),
            Node::Var(v) => Key::Var(*v),
            Node::Add(a, b) => Key::Binary(0, a.id(), b.id()),
            Node::Sub(a, b) => Key::Binary(1, a.id(), b.id()),
            Node::Mul(a, b) => Key::Binary(2, a.id(), b.id()),
            Node::Div(a, b) => Key::Binary(3, a.id(), b.id()),
            Node::Powi(a, k) => Key::Powi(a.id(), *k),
            Node::Exp(a) => Key::Unary(0, a.id()),
            Node::Log(a) => Key::Unary(1, a.id()),
            Node::Conj(a) => Key::Unary(2, a.id()),
            Node::Neg(a) => Key::Unary(3, a.id()),
        }
    }
}

struct Table {
    map: DashMap<Key, Weak<Inner>>,
    inserts: AtomicUsize,
    sweep_at: AtomicUsize,
}

const FIRST_SWEEP: usize = 1 << 16;

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| Table {
        map: DashMap::new(),
        inserts: AtomicUsize::new(0),
        sweep_at: AtomicUsize::new(FIRST_SWEEP),
    })
}

// A stale entry can only collide with a new key after its node died: a live
// node keeps its children alive, so their addresses cannot be reused.
pub(super) fn intern(inner: Inner) -> ComplexExpr {
    let t = table();
    let key = Key::of(&inner.node);
    let expr = match t.map.entry(key) {
        Entry::Occupied(mut slot) => {
            if let Some(live) = slot.get().upgrade() {
                return ComplexExpr(live);
            }
            let fresh = Arc::new(inner);
            slot.insert(Arc::downgrade(&fresh));
            ComplexExpr(fresh)
        }
        Entry::Vacant(slot) => {
            let fresh = Arc::new(inner);
            slot.insert(Arc::downgrade(&fresh));
            ComplexExpr(fresh)
        }
    };
    let n = t.inserts.fetch_add(1, Ordering::Relaxed) + 1;
    if n >= t.sweep_at.load(Ordering::Relaxed) {
        sweep(t);
    }
    expr
}

fn sweep(t: &Table) {
    t.map.retain(|_, w| w.strong_count() > 0);
    let live = t.map.len();
    t.inserts.store(0, Ordering::Relaxed);
    t.sweep_at.store(FIRST_SWEEP.max(2 * live), Ordering::Relaxed);
}
