//! Discrete optimal transport between bucketed mass vectors.
//!
//! [`sinkhorn_wd`] is the entropic solver used for scoring; [`exact_wd_1d`]
//! is the closed form for ordinal costs on a line and serves as its oracle.

use ndarray::Array2;

use crate::error::{Error, Result};

const BALANCE_TOL: f64 = 1e-12;
const STAGE_ITERS: usize = 20;
const EPS_DECAY: f64 = 0.5;
/// Plain iterations at the target regularization before Newton polishing.
const POLISH_AFTER: usize = 20;

/// Symmetric, non-negative ground cost with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundCost {
    matrix: Array2<f64>,
}

impl GroundCost {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::InvalidArgument("ground cost must be square".into()));
        }
        for i in 0..n {
            if matrix[[i, i]] != 0.0 {
                return Err(Error::InvalidArgument(
                    "ground cost diagonal must be zero".into(),
                ));
            }
            for j in 0..n {
                let c = matrix[[i, j]];
                if !c.is_finite() || c < 0.0 || c != matrix[[j, i]] {
                    return Err(Error::InvalidArgument(format!(
                        "ground cost entry ({i}, {j}) = {c} breaks symmetry or sign"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// `|i - j|` over bucket indices.
    pub fn ordinal(buckets: usize) -> Self {
        Self {
            matrix: Array2::from_shape_fn((buckets, buckets), |(i, j)| i.abs_diff(j) as f64),
        }
    }

    /// 0 on the diagonal, 1 elsewhere.
    pub fn uniform(buckets: usize) -> Self {
        Self {
            matrix: Array2::from_shape_fn((buckets, buckets), |(i, j)| f64::from(u8::from(i != j))),
        }
    }

    /// Appends one bucket at cost `pad_cost` from every existing bucket.
    pub fn padded(&self, pad_cost: f64) -> Self {
        let n = self.len();
        let matrix = Array2::from_shape_fn((n + 1, n + 1), |(i, j)| match (i == n, j == n) {
            (false, false) => self.matrix[[i, j]],
            (true, true) => 0.0,
            _ => pad_cost,
        });
        Self { matrix }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[[i, j]]
    }

    pub fn max_cost(&self) -> f64 {
        self.matrix.iter().copied().fold(0.0, f64::max)
    }
}

fn check_balanced(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "distributions have {} and {} buckets",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidArgument(
            "masses must be finite and non-negative".into(),
        ));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if (sp - sq).abs() > BALANCE_TOL * sp.max(sq).max(1.0) {
        return Err(Error::Unbalanced { lhs: sp, rhs: sq });
    }
    Ok(sp)
}

/// Closed-form transport cost under `|i - j|`: the summed absolute
/// difference of the two cumulative distributions.
pub fn exact_wd_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    check_balanced(p, q)?;
    let mut cp = 0.0;
    let mut cq = 0.0;
    let mut total = 0.0;
    for k in 0..p.len().saturating_sub(1) {
        cp += p[k];
        cq += q[k];
        total += (cp - cq).abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    /// Regularization relative to the largest ground cost.
    pub epsilon: f64,
    pub max_iters: usize,
    /// L1 tolerance on the row marginal.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iters: 1000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornResult {
    /// Transport cost of the regularized plan after rounding it onto the
    /// exact marginals; the entropy term is not included.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_error: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn iteration with epsilon scaling, finished by Newton
/// steps on the same entropic dual once the target regularization is
/// reached. Costs are divided by their maximum before regularization; the
/// reported cost uses the original scale.
/// Zero-mass buckets are dropped from the support since they carry no
/// plan mass. On hitting `max_iters` the last iterate is returned with
/// `converged = false`.
pub fn sinkhorn_wd(
    p: &[f64],
    q: &[f64],
    cost: &GroundCost,
    params: &SinkhornParams,
) -> Result<SinkhornResult> {
    let total = check_balanced(p, q)?;
    if p.len() != cost.len() {
        return Err(Error::InvalidArgument(format!(
            "{} buckets for a {}x{} ground cost",
            p.len(),
            cost.len(),
            cost.len()
        )));
    }
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let done = |cost| SinkhornResult {
        cost,
        iterations: 0,
        converged: true,
        marginal_error: 0.0,
    };
    if total == 0.0 || p == q {
        return Ok(done(0.0));
    }
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| p[i] / total).collect();
    let b: Vec<f64> = cols.iter().map(|&j| q[j] / total).collect();

    // a single source or sink admits exactly one feasible plan
    if rows.len() == 1 || cols.len() == 1 {
        let c: f64 = rows
            .iter()
            .zip(&a)
            .flat_map(|(&i, &ai)| {
                cols.iter()
                    .zip(&b)
                    .map(move |(&j, &bj)| ai * bj * cost.get(i, j))
            })
            .sum();
        return Ok(done(c * total));
    }

    let scale = cost.max_cost();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let eps = params.epsilon;
    let (n, m) = (rows.len(), cols.len());
    // normalized cost over the reduced support, row-major n x m
    let c: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j) / scale))
        .collect();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];

    let row_error = |f: &[f64], g: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let s: f64 = (0..m)
                    .map(|j| ((f[i] + g[j] - c[i * m + j]) / eps).exp())
                    .sum();
                (s - a[i]).abs()
            })
            .sum()
    };

    // epsilon scaling: anneal from a coarse regularization and warm-start
    // the potentials, then polish the target-level dual with Newton steps
    let mut stage_eps = 1.0f64.max(eps);
    let mut iterations = 0;
    loop {
        let budget = if stage_eps <= eps {
            POLISH_AFTER
        } else {
            STAGE_ITERS
        };
        let mut k = 0;
        while k < budget && iterations < params.max_iters {
            k += 1;
            iterations += 1;
            sweep(&mut f, &mut g, &c, &log_a, &log_b, stage_eps);
        }
        if stage_eps <= eps || iterations >= params.max_iters {
            break;
        }
        stage_eps = (stage_eps * EPS_DECAY).max(eps);
    }
    let mut err = row_error(&f, &g);
    if stage_eps <= eps {
        while err >= params.tol && iterations < params.max_iters {
            iterations += 1;
            if !newton_step(&mut f, &mut g, &c, &a, &b, eps) {
                sweep(&mut f, &mut g, &c, &log_a, &log_b, eps);
            }
            err = row_error(&f, &g);
        }
        // one more step past the tolerance is nearly free at quadratic
        // convergence and removes the residual marginal error from the cost
        if err < params.tol && newton_step(&mut f, &mut g, &c, &a, &b, eps) {
            err = row_error(&f, &g);
        }
    }

    let mut plan: Vec<f64> = (0..n * m)
        .map(|ij| ((f[ij / m] + g[ij % m] - c[ij]) / eps).exp())
        .collect();
    round_to_marginals(&mut plan, &a, &b);
    let transport: f64 = plan.iter().zip(&c).map(|(x, cij)| x * cij).sum();
    Ok(SinkhornResult {
        cost: transport * scale * total,
        iterations,
        converged: err < params.tol,
        marginal_error: err,
    })
}

/// One pair of alternating log-domain potential updates.
fn sweep(f: &mut [f64], g: &mut [f64], c: &[f64], log_a: &[f64], log_b: &[f64], eps: f64) {
    let (n, m) = (f.len(), g.len());
    for i in 0..n {
        let lse = log_sum_exp((0..m).map(|j| (g[j] - c[i * m + j]) / eps));
        f[i] = eps * (log_a[i] - lse);
    }
    for j in 0..m {
        let lse = log_sum_exp((0..n).map(|i| (f[i] - c[i * m + j]) / eps));
        g[j] = eps * (log_b[j] - lse);
    }
}

fn marginal_gap(f: &[f64], g: &[f64], c: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    let m = g.len();
    let mut cols = vec![0.0; m];
    let mut gap = 0.0;
    for (i, ai) in a.iter().enumerate() {
        let mut row = 0.0;
        for j in 0..m {
            let x = ((f[i] + g[j] - c[i * m + j]) / eps).exp();
            row += x;
            cols[j] += x;
        }
        gap += (row - ai).abs();
    }
    gap + cols.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn dual_objective(f: &[f64], g: &[f64], c: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    let m = g.len();
    let mass: f64 = (0..f.len() * m)
        .map(|ij| ((f[ij / m] + g[ij % m] - c[ij]) / eps).exp())
        .sum();
    f.iter().zip(a).map(|(x, y)| x * y).sum::<f64>()
        + g.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
        - eps * mass
}

/// One damped Newton ascent step on the entropic dual. The last column
/// potential is held fixed to remove the constant shift degeneracy.
/// Returns false when no improving step is found.
fn newton_step(f: &mut [f64], g: &mut [f64], c: &[f64], a: &[f64], b: &[f64], eps: f64) -> bool {
    let (n, m) = (f.len(), g.len());
    let plan: Vec<f64> = (0..n * m)
        .map(|ij| ((f[ij / m] + g[ij % m] - c[ij]) / eps).exp())
        .collect();
    let dim = n + m - 1;
    // augmented system [J | grad], J = -Hessian * eps
    let mut sys = vec![0.0; dim * (dim + 1)];
    let w = dim + 1;
    for i in 0..n {
        let r: f64 = plan[i * m..(i + 1) * m].iter().sum();
        sys[i * w + i] = r;
        sys[i * w + dim] = eps * (a[i] - r);
        for j in 0..m - 1 {
            sys[i * w + n + j] = plan[i * m + j];
            sys[(n + j) * w + i] = plan[i * m + j];
        }
    }
    for j in 0..m - 1 {
        let s: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        sys[(n + j) * w + n + j] = s;
        sys[(n + j) * w + dim] = eps * (b[j] - s);
    }
    let ridge = 1e-14 * (0..dim).map(|k| sys[k * w + k]).fold(0.0, f64::max);
    (0..dim).for_each(|k| sys[k * w + k] += ridge);
    let Some(step) = solve_augmented(&mut sys, dim) else {
        return false;
    };
    let base = dual_objective(f, g, c, a, b, eps);
    let base_gap = marginal_gap(f, g, c, a, b, eps);
    let mut t = 1.0;
    for _ in 0..80 {
        let nf: Vec<f64> = (0..n).map(|i| f[i] + t * step[i]).collect();
        let mut ng = g.to_vec();
        (0..m - 1).for_each(|j| ng[j] += t * step[n + j]);
        let val = dual_objective(&nf, &ng, c, a, b, eps);
        // near the optimum the objective stalls at rounding level while
        // the marginal gap still shrinks
        if val.is_finite() && (val > base || marginal_gap(&nf, &ng, c, a, b, eps) < base_gap) {
            f.copy_from_slice(&nf);
            g.copy_from_slice(&ng);
            return true;
        }
        t *= 0.5;
    }
    false
}

/// Gaussian elimination with partial pivoting on a dim x (dim + 1)
/// augmented matrix.
fn solve_augmented(sys: &mut [f64], dim: usize) -> Option<Vec<f64>> {
    let w = dim + 1;
    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&x, &y| sys[x * w + col].abs().total_cmp(&sys[y * w + col].abs()))?;
        if sys[piv * w + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..w {
                sys.swap(piv * w + k, col * w + k);
            }
        }
        for row in col + 1..dim {
            let factor = sys[row * w + col] / sys[col * w + col];
            if factor != 0.0 {
                for k in col..w {
                    sys[row * w + k] -= factor * sys[col * w + k];
                }
            }
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let tail: f64 = (row + 1..dim).map(|k| sys[row * w + k] * x[k]).sum();
        x[row] = (sys[row * w + dim] - tail) / sys[row * w + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Projects a nonnegative n x m plan onto the transport polytope with
/// marginals `a` and `b`: scale rows and columns down to their targets, then
/// restore the missing mass with a rank-one correction.
fn round_to_marginals(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let row = &mut plan[i * m..(i + 1) * m];
        let r: f64 = row.iter().sum();
        if r > a[i] {
            row.iter_mut().for_each(|x| *x *= a[i] / r);
        }
    }
    for j in 0..m {
        let col: f64 = (0..n).map(|i| plan[i * m + j]).sum();
        if col > b[j] {
            (0..n).for_each(|i| plan[i * m + j] *= b[j] / col);
        }
    }
    let dr: Vec<f64> = (0..n)
        .map(|i| (a[i] - plan[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0))
        .collect();
    let dc: Vec<f64> = (0..m)
        .map(|j| (b[j] - (0..n).map(|i| plan[i * m + j]).sum::<f64>()).max(0.0))
        .collect();
    let missing: f64 = dr.iter().sum();
    if missing > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += dr[i] * dc[j] / missing;
            }
        }
    }
}
