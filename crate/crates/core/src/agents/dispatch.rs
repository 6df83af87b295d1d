use crate::grid::Cell;
use crate::orders::{Order, OrderId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdleRider {
    pub id: usize,
    pub position: Cell,
    pub zone: usize,
}

/// Greedy platform matching: orders in creation order, each to the nearest
/// unmatched idle rider whose zone choice is the order's zone (ties to the
/// lowest rider id). Returns `(order, rider)` pairs.
pub fn dispatch<'a>(open: impl IntoIterator<Item = &'a Order>, idle: &[IdleRider]) -> Vec<(OrderId, usize)> {
    let mut orders: Vec<&Order> = open.into_iter().filter(|o| o.is_open()).collect();
    orders.sort_by_key(|o| (o.created_step, o.id));
    let mut taken = vec![false; idle.len()];
    let mut out = Vec::new();
    for o in orders {
        let pick = idle
            .iter()
            .enumerate()
            .filter(|(i, r)| !taken[*i] && r.zone == o.zone)
            .min_by_key(|(_, r)| (r.position.manhattan(o.pickup), r.id));
        if let Some((i, r)) = pick {
            taken[i] = true;
            out.push((o.id, r.id));
        }
    }
    out
}
