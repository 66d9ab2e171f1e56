//! Building blocks of one spatial-group layer, each recorded on a tape.
//!
//! Group representations of a node are laid out side by side: a matrix
//! with `groups * d` columns holds `z_{i,0} .. z_{i,groups-1}` for node `i`
//! in consecutive width-`d` blocks, the central group last.

use std::rc::Rc;

use crate::error::Result;
use crate::graph::SpatialGraph;
use crate::numerics::{Csr, Tape, Var};
use crate::partition::Partition;

/// Neighborhood size used in the normalization; isolated nodes count as 1
/// so their central coefficient is 1.
fn norm_degree(graph: &SpatialGraph, v: usize) -> f64 {
    graph.out_degree(v).max(1) as f64
}

/// Sparse `(n * groups) x n` operator whose row `i * groups + g` holds the
/// normalized coefficients of node `i`'s group `g`. Groups are the cells of
/// `part` followed by the central node.
pub fn aggregation_operator(graph: &SpatialGraph, part: &Partition) -> Result<Csr> {
    let n = graph.num_nodes();
    let groups = part.cells() + 1;
    let mut triplets = Vec::with_capacity(graph.num_edges() + n);
    for i in 0..n {
        let di = norm_degree(graph, i);
        for (&j, &e) in graph.neighborhood(i).iter().zip(graph.out_edges(i)) {
            let (distance, bearing) = graph.geometry_of(e);
            let g = part.cell_of(distance, bearing);
            triplets.push((i * groups + g, j, 1.0 / (di * norm_degree(graph, j)).sqrt()));
        }
        triplets.push((i * groups + groups - 1, i, 1.0 / di));
    }
    Csr::from_triplets(n * groups, n, &triplets)
}

/// Single-group operator over the neighborhood plus the node itself, with
/// the same coefficients as [`aggregation_operator`].
pub fn gcn_operator(graph: &SpatialGraph) -> Result<Csr> {
    let n = graph.num_nodes();
    let mut triplets = Vec::with_capacity(graph.num_edges() + n);
    for i in 0..n {
        let di = norm_degree(graph, i);
        for &j in graph.neighborhood(i) {
            triplets.push((i, j, 1.0 / (di * norm_degree(graph, j)).sqrt()));
        }
        triplets.push((i, i, 1.0 / di));
    }
    Csr::from_triplets(n, n, &triplets)
}

/// `z_{i,g} = sum_{j in g} c_ij h_j W_g`, with `w_groups` stacking the
/// per-group transforms row-wise.
pub fn group_aggregate(
    t: &mut Tape,
    op: &Rc<Csr>,
    groups: usize,
    h: Var,
    w_groups: Var,
) -> Result<Var> {
    let pooled = t.spmm(op.clone(), h, groups)?;
    t.grouped_matmul(pooled, w_groups, groups)
}

/// Commonality-weighted mixture of transformed groups. Returns the
/// enhanced representations and the attention weights.
pub fn commonality_enhance(t: &mut Tape, z: Var, w_c: Var, groups: usize) -> Result<(Var, Var)> {
    let zh = t.block_matmul(z, w_c, groups)?;
    let scores = t.block_gram(zh, zh, groups)?;
    let alpha = t.softmax_blocks(scores, groups)?;
    Ok((t.block_attend(alpha, zh, groups)?, alpha))
}

/// Discrepancy-weighted mixture of group differences `a_p - b_q`. Returns
/// the enhanced representations and the attention weights.
pub fn discrepancy_enhance(
    t: &mut Tape,
    z: Var,
    w_a: Var,
    w_b: Var,
    groups: usize,
) -> Result<(Var, Var)> {
    let a = t.block_matmul(z, w_a, groups)?;
    let b = t.block_matmul(z, w_b, groups)?;
    // <a_p, a_p - b_q> differs from -<a_p, b_q> by a term constant in q,
    // which the softmax over q cancels
    let cross = t.block_gram(a, b, groups)?;
    let scores = t.scale(cross, -1.0)?;
    let alpha = t.softmax_blocks(scores, groups)?;
    // sum_q alpha_pq (a_p - b_q) = a_p - sum_q alpha_pq b_q
    let mixed = t.block_attend(alpha, b, groups)?;
    Ok((t.sub(a, mixed)?, alpha))
}

/// Gate `beta = sigmoid([z^C, z^D] W_t)`, one scalar per row, blending
/// `beta z^C + (1 - beta) z^D`.
pub fn attentive_select(t: &mut Tape, zc: Var, zd: Var, w_t: Var) -> Result<(Var, Var)> {
    let logit = t.concat_matmul(&[zc, zd], w_t)?;
    let beta = t.sigmoid(logit)?;
    Ok((t.row_lerp(zc, zd, beta)?, beta))
}

/// `sigmoid(g) h_s W_s + (1 - sigmoid(g)) h_r W_r`.
pub fn fuse_views(
    t: &mut Tape,
    hs: Var,
    hr: Var,
    gamma_raw: Var,
    w_s: Var,
    w_r: Var,
) -> Result<Var> {
    let gamma = t.sigmoid(gamma_raw)?;
    let neg = t.scale(gamma, -1.0)?;
    let rest = t.add_scalar(neg, 1.0)?;
    let ps = t.matmul(hs, w_s)?;
    let pr = t.matmul(hr, w_r)?;
    let ws = t.mul_col(ps, gamma)?;
    let wr = t.mul_col(pr, rest)?;
    t.add(ws, wr)
}

/// Degree-normalized aggregation over the neighborhood and self, then `W`.
pub fn gcn_layer(t: &mut Tape, op: &Rc<Csr>, h: Var, w: Var) -> Result<Var> {
    let pooled = t.spmm(op.clone(), h, 1)?;
    t.matmul(pooled, w)
}
