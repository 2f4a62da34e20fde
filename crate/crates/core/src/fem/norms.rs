use super::State;
use crate::network::{refined_node_index, Network};

/// `(Σ_e ∫ |∂u|² + |∂r|²)^{1/2}`, exact for P1 states.
pub fn v_norm(net: &Network, s: &State) -> f64 {
    let mut acc = 0.0;
    for e in 0..net.edge_count() {
        let [a, b] = net.edge(e).endpoints;
        let h = net.edge_length(e);
        acc += ((s.u[b] - s.u[a]).norm_squared() + (s.r[b] - s.r[a]).norm_squared()) / h;
    }
    acc.sqrt()
}

/// `(Σ_e ∫ |u|² + |r|²)^{1/2}`, exact for P1 states.
pub fn l2_norm(net: &Network, s: &State) -> f64 {
    let mut acc = 0.0;
    for e in 0..net.edge_count() {
        let [a, b] = net.edge(e).endpoints;
        let h = net.edge_length(e);
        for (p, q) in [(&s.u[a], &s.u[b]), (&s.r[a], &s.r[b])] {
            acc += h / 3.0 * (p.norm_squared() + p.dot(q) + q.norm_squared());
        }
    }
    acc.sqrt()
}

/// Linear interpolation of a state on `coarse` onto `refine(coarse, n_splits)`.
pub fn prolongate(coarse: &Network, s: &State, n_splits: u32) -> State {
    let segs = 1usize << n_splits;
    let n_fine = coarse.node_count() + coarse.edge_count() * (segs - 1);
    let mut out = State::zeros(n_fine);
    out.time = s.time;
    out.u[..coarse.node_count()].copy_from_slice(&s.u);
    out.r[..coarse.node_count()].copy_from_slice(&s.r);
    for e in 0..coarse.edge_count() {
        let [a, b] = coarse.edge(e).endpoints;
        for k in 1..segs {
            let t = k as f64 / segs as f64;
            let i = refined_node_index(coarse, e, k, n_splits);
            out.u[i] = s.u[a] * (1.0 - t) + s.u[b] * t;
            out.r[i] = s.r[a] * (1.0 - t) + s.r[b] * t;
        }
    }
    out
}

/// Linear interpolation of a state on `refine(base, from)` onto `refine(base, to)`, `from <= to`.
/// Level 0 is `base` itself.
pub fn transfer(base: &Network, s: &State, from: u32, to: u32) -> State {
    assert!(from <= to, "transfer only interpolates onto finer levels");
    if from == to {
        return s.clone();
    }
    let fine_segs = 1usize << to;
    let ratio = 1usize << (to - from);
    let n_fine = base.node_count() + base.edge_count() * (fine_segs - 1);
    let mut out = State::zeros(n_fine);
    out.time = s.time;
    out.u[..base.node_count()].copy_from_slice(&s.u[..base.node_count()]);
    out.r[..base.node_count()].copy_from_slice(&s.r[..base.node_count()]);
    for e in 0..base.edge_count() {
        for k in 1..fine_segs {
            let (kc, rem) = (k / ratio, k % ratio);
            let a = refined_node_index(base, e, kc, from);
            let t = rem as f64 / ratio as f64;
            let i = refined_node_index(base, e, k, to);
            if rem == 0 {
                out.u[i] = s.u[a];
                out.r[i] = s.r[a];
            } else {
                let b = refined_node_index(base, e, kc + 1, from);
                out.u[i] = s.u[a] * (1.0 - t) + s.u[b] * t;
                out.r[i] = s.r[a] * (1.0 - t) + s.r[b] * t;
            }
        }
    }
    out
}
