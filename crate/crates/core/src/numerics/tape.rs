use std::rc::Rc;

use ndarray::{s, Array2, ArrayView2, Axis};

use super::params::{ParamId, ParamStore};
use super::sparse::Csr;
use crate::error::{shape_err, Error, Result};

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatMatMul(Vec<Var>, Var),
    RowLerp(Var, Var, Var),
    RowSelect(Var, Rc<Vec<usize>>),
    RowDot(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    SoftmaxBlocks(Var, usize),
    Sum(Var),
    Mse(Var, Rc<Array2<f64>>),
    CrossEntropy(Var, Rc<Vec<usize>>, Array2<f64>),
    Spmm(Rc<Csr>, Var),
    GroupedMatMul(Var, Var, usize),
    BlockMatMul(Var, Var, usize),
    BlockGram(Var, Var, usize),
    BlockAttend(Var, Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation over dense matrices and replays it in
/// reverse to accumulate parameter gradients.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dims(a: &Array2<f64>) -> String {
    format!("{}x{}", a.nrows(), a.ncols())
}

/// Splits a width into `blocks` equal parts.
fn block_width(op: &'static str, width: usize, blocks: usize) -> Result<usize> {
    if blocks == 0 || width % blocks != 0 {
        return Err(shape_err(
            op,
            format!("width {width} not divisible into {blocks} blocks"),
        ));
    }
    Ok(width / blocks)
}

fn reshaped(a: Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let a = if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    };
    a.into_shape_with_order((rows, cols))
        .expect("element count preserved")
}

/// Row-major view of a standard-layout array under a new shape.
fn reshaped_view(a: &Array2<f64>, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    a.view()
        .into_shape_with_order((rows, cols))
        .expect("standard layout, element count preserved")
}

fn all_finite(v: &Array2<f64>) -> bool {
    match v.as_slice_memory_order() {
        Some(s) => {
            // x - x is NaN exactly for NaN and infinities
            let mut acc = [0.0f64; 8];
            let chunks = s.chunks_exact(8);
            let tail = chunks.remainder();
            for c in chunks {
                for (a, x) in acc.iter_mut().zip(c) {
                    *a += x - x;
                }
            }
            acc.iter().sum::<f64>() == 0.0 && tail.iter().all(|x| x.is_finite())
        }
        None => v.iter().all(|x| x.is_finite()),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    fn val(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Array2<f64>,
        op: Op,
        needs_grad: bool,
    ) -> Result<Var> {
        if !all_finite(&value) {
            return Err(Error::NonFinite(name));
        }
        let value = if value.is_standard_layout() {
            value
        } else {
            value.as_standard_layout().into_owned()
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Result<Var> {
        self.push("constant", value, Op::Constant, false)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push("param", store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.val(a), self.val(b));
        if x.ncols() != y.nrows() {
            return Err(shape_err(
                "matmul",
                format!("{} times {}", dims(x), dims(y)),
            ));
        }
        let out = mm(x.view(), y.view());
        let g = self.grad_of(&[a, b]);
        self.push("matmul", out, Op::MatMul(a, b), g)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.val(a), self.val(b));
        if x.dim() != y.dim() {
            return Err(shape_err(op, format!("{} vs {}", dims(x), dims(y))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.val(a) + self.val(b);
        let g = self.grad_of(&[a, b]);
        self.push("add", out, Op::Add(a, b), g)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.val(a) - self.val(b);
        let g = self.grad_of(&[a, b]);
        self.push("sub", out, Op::Sub(a, b), g)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.val(a) * self.val(b);
        let g = self.grad_of(&[a, b]);
        self.push("mul", out, Op::Mul(a, b), g)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.val(a) * c;
        let g = self.grad_of(&[a]);
        self.push("scale", out, Op::Scale(a, c), g)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.val(a) + c;
        let g = self.grad_of(&[a]);
        self.push("add_scalar", out, Op::AddScalar(a), g)
    }

    /// Adds a `1 x k` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.val(a), self.val(row));
        if r.nrows() != 1 || r.ncols() != x.ncols() {
            return Err(shape_err(
                "add_row",
                format!("{} plus row {}", dims(x), dims(r)),
            ));
        }
        let out = x + r;
        let g = self.grad_of(&[a, row]);
        self.push("add_row", out, Op::AddRow(a, row), g)
    }

    /// Scales each row of `a` by the matching entry of an `n x 1` column,
    /// or every entry by a `1 x 1` scalar.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (x, c) = (self.val(a), self.val(col));
        if c.ncols() != 1 || (c.nrows() != 1 && c.nrows() != x.nrows()) {
            return Err(shape_err(
                "mul_col",
                format!("{} times column {}", dims(x), dims(c)),
            ));
        }
        let out = x * c;
        let g = self.grad_of(&[a, col]);
        self.push("mul_col", out, Op::MulCol(a, col), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(shape_err("concat_cols", "no inputs"));
        };
        let rows = self.val(*first).nrows();
        if let Some(bad) = parts.iter().find(|p| self.val(**p).nrows() != rows) {
            return Err(shape_err(
                "concat_cols",
                format!("{} rows vs {}", self.val(*bad).nrows(), rows),
            ));
        }
        let widths: Vec<usize> = parts.iter().map(|p| self.val(*p).ncols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Array2::zeros((rows, total));
        if total > 0 {
            let os = out.as_slice_mut().expect("fresh array");
            let mut start = 0;
            for (p, &w) in parts.iter().zip(&widths) {
                if w > 0 {
                    let src = self.val(*p).as_slice().expect("standard layout");
                    for (orow, srow) in os.chunks_exact_mut(total).zip(src.chunks_exact(w)) {
                        orow[start..start + w].copy_from_slice(srow);
                    }
                }
                start += w;
            }
        }
        let g = self.grad_of(parts);
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), g)
    }

    /// `[p_1 p_2 ..] * w` for the column-wise concatenation of `parts`,
    /// without materializing it.
    pub fn concat_matmul(&mut self, parts: &[Var], w: Var) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(shape_err("concat_matmul", "no inputs"));
        };
        let rows = self.val(*first).nrows();
        let wv = self.val(w);
        let width: usize = parts.iter().map(|p| self.val(*p).ncols()).sum();
        if parts.iter().any(|p| self.val(*p).nrows() != rows) || width != wv.nrows() {
            return Err(shape_err("concat_matmul", format!("{rows} rows, width {width}, weights {}", dims(wv))));
        }
        let mut out = Array2::zeros((rows, wv.ncols()));
        let mut start = 0;
        for p in parts {
            let x = self.val(*p);
            let k = x.ncols();
            out += &mm(x.view(), wv.slice(s![start..start + k, ..]));
            start += k;
        }
        let g = self.grad_of(parts) || self.grad_of(&[w]);
        self.push("concat_matmul", out, Op::ConcatMatMul(parts.to_vec(), w), g)
    }

    /// `b + w (a - b)` with `w` an `n x 1` column of per-row weights.
    pub fn row_lerp(&mut self, a: Var, b: Var, w: Var) -> Result<Var> {
        self.same_shape("row_lerp", a, b)?;
        let (av, bv, wv) = (self.val(a), self.val(b), self.val(w));
        if wv.dim() != (av.nrows(), 1) {
            return Err(shape_err("row_lerp", format!("{} with weights {}", dims(av), dims(wv))));
        }
        let mut out = bv.clone();
        for ((mut o, x), &c) in out.rows_mut().into_iter().zip(av.rows()).zip(wv.iter()) {
            o.zip_mut_with(&x, |o, &x| *o += c * (x - *o));
        }
        let g = self.grad_of(&[a, b, w]);
        self.push("row_lerp", out, Op::RowLerp(a, b, w), g)
    }

    pub fn row_select(&mut self, a: Var, rows: Rc<Vec<usize>>) -> Result<Var> {
        let x = self.val(a);
        if let Some(&r) = rows.iter().find(|&&r| r >= x.nrows()) {
            return Err(shape_err("row_select", format!("row {r} of {}", dims(x))));
        }
        let out = x.select(Axis(0), &rows);
        let g = self.grad_of(&[a]);
        self.push("row_select", out, Op::RowSelect(a, rows), g)
    }

    /// Row-wise inner products, `n x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("row_dot", a, b)?;
        let out = (self.val(a) * self.val(b))
            .sum_axis(Axis(1))
            .insert_axis(Axis(1));
        let g = self.grad_of(&[a, b]);
        self.push("row_dot", out, Op::RowDot(a, b), g)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).mapv(|x| x.max(0.0));
        let g = self.grad_of(&[a]);
        self.push("relu", out, Op::Relu(a), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).mapv(sigmoid);
        let g = self.grad_of(&[a]);
        self.push("sigmoid", out, Op::Sigmoid(a), g)
    }

    /// Softmax within each run of `width` consecutive columns.
    pub fn softmax_blocks(&mut self, a: Var, width: usize) -> Result<Var> {
        let x = self.val(a);
        if width == 0 || x.ncols() % width != 0 {
            return Err(shape_err(
                "softmax",
                format!("{} in blocks of {width}", dims(x)),
            ));
        }
        let mut out = x.clone();
        for chunk in out
            .as_slice_mut()
            .expect("standard layout")
            .chunks_mut(width)
        {
            softmax_in_place(chunk);
        }
        let g = self.grad_of(&[a]);
        self.push("softmax", out, Op::SoftmaxBlocks(a, width), g)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let w = self.val(a).ncols();
        self.softmax_blocks(a, w)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Array2::from_elem((1, 1), self.val(a).sum());
        let g = self.grad_of(&[a]);
        self.push("sum", out, Op::Sum(a), g)
    }

    /// Mean squared error over all entries.
    pub fn mse_loss(&mut self, pred: Var, target: Rc<Array2<f64>>) -> Result<Var> {
        let x = self.val(pred);
        if x.dim() != target.dim() {
            return Err(shape_err(
                "mse_loss",
                format!("{} vs target {}", dims(x), dims(&target)),
            ));
        }
        if x.is_empty() {
            return Err(shape_err("mse_loss", "empty prediction"));
        }
        let loss = (x - &*target).mapv(|d| d * d).mean().expect("non-empty");
        let g = self.grad_of(&[pred]);
        self.push(
            "mse_loss",
            Array2::from_elem((1, 1), loss),
            Op::Mse(pred, target),
            g,
        )
    }

    /// Mean softmax cross-entropy of row logits against class indices.
    pub fn cross_entropy_loss(&mut self, logits: Var, classes: Rc<Vec<usize>>) -> Result<Var> {
        let x = self.val(logits);
        if x.nrows() != classes.len() || x.nrows() == 0 {
            return Err(shape_err(
                "cross_entropy",
                format!("{} logits for {} labels", dims(x), classes.len()),
            ));
        }
        if let Some(&c) = classes.iter().find(|&&c| c >= x.ncols()) {
            return Err(shape_err(
                "cross_entropy",
                format!("class {c} with {} logits", x.ncols()),
            ));
        }
        let mut probs = x.as_standard_layout().into_owned();
        let w = probs.ncols();
        let mut loss = 0.0;
        for (row, &c) in probs
            .as_slice_mut()
            .expect("standard layout")
            .chunks_mut(w)
            .zip(classes.iter())
        {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[c];
            row.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        loss /= classes.len() as f64;
        let g = self.grad_of(&[logits]);
        self.push(
            "cross_entropy",
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy(logits, classes, probs),
            g,
        )
    }

    /// Sparse product `s * a` with `s` held constant. When `s` has
    /// `groups * n` rows, row `i * groups + g` of the product lands in block
    /// `g` of output row `i`, giving an `n x (groups * d)` result.
    pub fn spmm(&mut self, s: Rc<Csr>, a: Var, groups: usize) -> Result<Var> {
        let (rows, _) = s.shape();
        if groups == 0 || rows % groups != 0 {
            return Err(shape_err("spmm", format!("{rows} rows in {groups} groups")));
        }
        let prod = s.matmul(self.val(a).view())?;
        let d = prod.ncols();
        let out = reshaped(prod, rows / groups, groups * d);
        let g = self.grad_of(&[a]);
        self.push("spmm", out, Op::Spmm(s, a), g)
    }

    /// Block `g` of `x` (width `d`) times row block `g` of `w`
    /// (`(groups * d) x e`), giving `n x (groups * e)`.
    pub fn grouped_matmul(&mut self, x: Var, w: Var, groups: usize) -> Result<Var> {
        let (xv, wv) = (self.val(x), self.val(w));
        let d = block_width("grouped_matmul", xv.ncols(), groups)?;
        if wv.nrows() != xv.ncols() {
            return Err(shape_err(
                "grouped_matmul",
                format!("{} with weights {}", dims(xv), dims(wv)),
            ));
        }
        let e = wv.ncols();
        let n = xv.nrows();
        let mut out = Array2::zeros((n, groups * e));
        if d > 0 && e > 0 {
            let (xs, ws) = (
                xv.as_slice().expect("standard layout"),
                wv.as_slice().expect("standard layout"),
            );
            let os = out.as_slice_mut().expect("fresh array");
            for (xr, or) in xs
                .chunks_exact(groups * d)
                .zip(os.chunks_exact_mut(groups * e))
            {
                for g in 0..groups {
                    let ob = &mut or[g * e..(g + 1) * e];
                    for (p, &c) in xr[g * d..(g + 1) * d].iter().enumerate() {
                        if c != 0.0 {
                            let r = (g * d + p) * e;
                            axpy(c, &ws[r..r + e], ob);
                        }
                    }
                }
            }
        }
        let gr = self.grad_of(&[x, w]);
        self.push("grouped_matmul", out, Op::GroupedMatMul(x, w, groups), gr)
    }

    /// Every width-`d` block of `x` times the shared `d x e` matrix `w`.
    pub fn block_matmul(&mut self, x: Var, w: Var, blocks: usize) -> Result<Var> {
        let (xv, wv) = (self.val(x), self.val(w));
        let d = block_width("block_matmul", xv.ncols(), blocks)?;
        if wv.nrows() != d {
            return Err(shape_err(
                "block_matmul",
                format!("blocks of {d} with weights {}", dims(wv)),
            ));
        }
        let n = xv.nrows();
        let out = reshaped(
            mm(reshaped_view(xv, n * blocks, d), wv.view()),
            n,
            blocks * wv.ncols(),
        );
        let g = self.grad_of(&[x, w]);
        self.push("block_matmul", out, Op::BlockMatMul(x, w, blocks), g)
    }

    /// Per-row Gram matrix between blocks: `out[i, p * b + q] = <x_ip, y_iq>`.
    pub fn block_gram(&mut self, x: Var, y: Var, blocks: usize) -> Result<Var> {
        self.same_shape("block_gram", x, y)?;
        let (xv, yv) = (self.val(x), self.val(y));
        let d = block_width("block_gram", xv.ncols(), blocks)?;
        let n = xv.nrows();
        let mut out = Array2::zeros((n, blocks * blocks));
        let xs = xv.as_slice().expect("standard layout");
        let ys = yv.as_slice().expect("standard layout");
        let os = out.as_slice_mut().expect("fresh array");
        let w = blocks * d;
        for i in 0..n {
            let (xr, yr) = (&xs[i * w..(i + 1) * w], &ys[i * w..(i + 1) * w]);
            let orow = &mut os[i * blocks * blocks..(i + 1) * blocks * blocks];
            for p in 0..blocks {
                let xp = &xr[p * d..(p + 1) * d];
                for q in 0..blocks {
                    orow[p * blocks + q] = dot(xp, &yr[q * d..(q + 1) * d]);
                }
            }
        }
        let g = self.grad_of(&[x, y]);
        self.push("block_gram", out, Op::BlockGram(x, y, blocks), g)
    }

    /// Attention-weighted block sums: `out_ip = sum_q a[i, p * b + q] y_iq`.
    pub fn block_attend(&mut self, a: Var, y: Var, blocks: usize) -> Result<Var> {
        let (av, yv) = (self.val(a), self.val(y));
        let d = block_width("block_attend", yv.ncols(), blocks)?;
        if av.nrows() != yv.nrows() || av.ncols() != blocks * blocks {
            return Err(shape_err(
                "block_attend",
                format!("weights {} with values {}", dims(av), dims(yv)),
            ));
        }
        let n = yv.nrows();
        let w = blocks * d;
        let mut out = Array2::zeros((n, w));
        let as_ = av.as_slice().expect("standard layout");
        let ys = yv.as_slice().expect("standard layout");
        let os = out.as_slice_mut().expect("fresh array");
        for i in 0..n {
            let yr = &ys[i * w..(i + 1) * w];
            let ar = &as_[i * blocks * blocks..(i + 1) * blocks * blocks];
            let orow = &mut os[i * w..(i + 1) * w];
            for p in 0..blocks {
                let op = &mut orow[p * d..(p + 1) * d];
                for q in 0..blocks {
                    axpy(ar[p * blocks + q], &yr[q * d..(q + 1) * d], op);
                }
            }
        }
        let g = self.grad_of(&[a, y]);
        self.push("block_attend", out, Op::BlockAttend(a, y, blocks), g)
    }

    /// Reverse pass from a `1 x 1` loss. Parameter gradients are added to
    /// the store's gradient buffers.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let l = self.val(loss);
        if l.dim() != (1, 1) {
            return Err(Error::NotScalar(l.nrows(), l.ncols()));
        }
        let mut grads: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for k in (0..=loss.0).rev() {
            let Some(dout) = grads[k].take() else {
                continue;
            };
            let node = &self.nodes[k];
            if !node.needs_grad {
                continue;
            }
            let dout = if dout.is_standard_layout() {
                dout
            } else {
                dout.as_standard_layout().into_owned()
            };
            self.propagate(&node.op, &node.value, dout, &mut grads, store);
        }
        Ok(())
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Array2<f64>,
        dout: Array2<f64>,
        grads: &mut [Option<Array2<f64>>],
        store: &mut ParamStore,
    ) {
        let mut send = |v: Var, g: Array2<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => *acc += &g,
                slot => *slot = Some(g),
            }
        };
        match op {
            Op::Constant => {}
            Op::Param(id) => *store.grad_mut(*id) += &dout,
            Op::MatMul(a, b) => {
                send(*a, mm_bt(dout.view(), self.val(*b).view()));
                send(*b, mm_at(self.val(*a).view(), dout.view()));
            }
            Op::Add(a, b) => {
                send(*a, dout.clone());
                send(*b, dout);
            }
            Op::Sub(a, b) => {
                send(*a, dout.clone());
                send(*b, -dout);
            }
            Op::Mul(a, b) => {
                send(*a, &dout * self.val(*b));
                send(*b, &dout * self.val(*a));
            }
            Op::Scale(a, c) => send(*a, dout * *c),
            Op::AddScalar(a) => send(*a, dout),
            Op::AddRow(a, row) => {
                send(*row, dout.sum_axis(Axis(0)).insert_axis(Axis(0)));
                send(*a, dout);
            }
            Op::MulCol(a, col) => {
                let c = self.val(*col);
                let weighted = &dout * self.val(*a);
                let dc = if c.nrows() == 1 {
                    Array2::from_elem((1, 1), weighted.sum())
                } else {
                    weighted.sum_axis(Axis(1)).insert_axis(Axis(1))
                };
                send(*col, dc);
                send(*a, dout * c);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.val(*p).ncols();
                    send(*p, dout.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::ConcatMatMul(parts, w) => {
                let wv = self.val(*w);
                let mut dw = Array2::zeros(wv.raw_dim());
                let mut start = 0;
                for p in parts {
                    let x = self.val(*p);
                    let k = x.ncols();
                    let wp = wv.slice(s![start..start + k, ..]);
                    if self.nodes[w.0].needs_grad {
                        dw.slice_mut(s![start..start + k, ..]).assign(&mm_at(x.view(), dout.view()));
                    }
                    send(*p, mm_bt(dout.view(), wp));
                    start += k;
                }
                send(*w, dw);
            }
            Op::RowLerp(a, b, w) => {
                let (av, bv, wv) = (self.val(*a), self.val(*b), self.val(*w));
                let mut da = dout.clone();
                let mut db = dout;
                let mut dw = Array2::zeros(wv.raw_dim());
                for ((((mut ra, mut rb), x), y), (&c, g)) in da
                    .rows_mut()
                    .into_iter()
                    .zip(db.rows_mut())
                    .zip(av.rows())
                    .zip(bv.rows())
                    .zip(wv.iter().zip(dw.iter_mut()))
                {
                    let mut acc = 0.0;
                    for (((ga, gb), &xa), &yb) in ra.iter_mut().zip(rb.iter_mut()).zip(x.iter()).zip(y.iter()) {
                        acc += *ga * (xa - yb);
                        *ga *= c;
                        *gb *= 1.0 - c;
                    }
                    *g = acc;
                }
                send(*w, dw);
                send(*a, da);
                send(*b, db);
            }
            Op::RowSelect(a, rows) => {
                let mut g = Array2::zeros(self.val(*a).raw_dim());
                for (k, &r) in rows.iter().enumerate() {
                    let mut dst = g.row_mut(r);
                    dst += &dout.row(k);
                }
                send(*a, g);
            }
            Op::RowDot(a, b) => {
                send(*a, self.val(*b) * &dout);
                send(*b, self.val(*a) * &dout);
            }
            Op::Relu(a) => {
                let mut g = dout;
                g.zip_mut_with(self.val(*a), |gv, &x| {
                    if x <= 0.0 {
                        *gv = 0.0;
                    }
                });
                send(*a, g);
            }
            Op::Sigmoid(a) => {
                let mut g = dout;
                g.zip_mut_with(out, |gv, &y| *gv *= y * (1.0 - y));
                send(*a, g);
            }
            Op::SoftmaxBlocks(a, width) => {
                let mut g = dout;
                let gs = g.as_slice_mut().expect("standard layout");
                let ps = out.as_slice().expect("standard layout");
                for (gc, pc) in gs.chunks_mut(*width).zip(ps.chunks(*width)) {
                    let inner = dot(gc, pc);
                    gc.iter_mut()
                        .zip(pc)
                        .for_each(|(gv, pv)| *gv = pv * (*gv - inner));
                }
                send(*a, g);
            }
            Op::Sum(a) => {
                let s = dout[[0, 0]];
                send(*a, Array2::from_elem(self.val(*a).raw_dim(), s));
            }
            Op::Mse(pred, target) => {
                let x = self.val(*pred);
                let c = 2.0 * dout[[0, 0]] / x.len() as f64;
                send(*pred, (x - &**target) * c);
            }
            Op::CrossEntropy(logits, classes, probs) => {
                let mut g = probs.clone();
                for (k, &c) in classes.iter().enumerate() {
                    g[[k, c]] -= 1.0;
                }
                send(*logits, g * (dout[[0, 0]] / classes.len() as f64));
            }
            Op::Spmm(sp, a) => {
                let rows = sp.shape().0;
                let d = self.val(*a).ncols();
                let flat = reshaped_view(&dout, rows, d);
                send(*a, sp.t_matmul(flat).expect("shapes fixed at record time"));
            }
            Op::GroupedMatMul(x, w, groups) => {
                let (xv, wv) = (self.val(*x), self.val(*w));
                let d = xv.ncols() / groups;
                let e = wv.ncols();
                let mut dx = Array2::zeros(xv.raw_dim());
                let mut dw = Array2::zeros(wv.raw_dim());
                if d > 0 && e > 0 {
                    let (xs, ws) = (
                        xv.as_slice().expect("standard layout"),
                        wv.as_slice().expect("standard layout"),
                    );
                    let gs = dout.as_slice().expect("standard layout");
                    let dxs = dx.as_slice_mut().expect("fresh array");
                    let dws = dw.as_slice_mut().expect("fresh array");
                    let (wx, wy) = (groups * d, groups * e);
                    for ((xr, gr), dxr) in xs
                        .chunks_exact(wx)
                        .zip(gs.chunks_exact(wy))
                        .zip(dxs.chunks_exact_mut(wx))
                    {
                        for g in 0..*groups {
                            let gy = &gr[g * e..(g + 1) * e];
                            for p in 0..d {
                                let r = (g * d + p) * e;
                                dxr[g * d + p] = dot(gy, &ws[r..r + e]);
                                let c = xr[g * d + p];
                                if c != 0.0 {
                                    axpy(c, gy, &mut dws[r..r + e]);
                                }
                            }
                        }
                    }
                }
                send(*x, dx);
                send(*w, dw);
            }
            Op::BlockMatMul(x, w, blocks) => {
                let (xv, wv) = (self.val(*x), self.val(*w));
                let n = xv.nrows();
                let (d, e) = (wv.nrows(), wv.ncols());
                let dy = reshaped_view(&dout, n * blocks, e);
                send(*w, mm_at(reshaped_view(xv, n * blocks, d), dy));
                send(*x, reshaped(mm_bt(dy, wv.view()), n, blocks * d));
            }
            Op::BlockGram(x, y, blocks) => {
                let b = *blocks;
                let (xv, yv) = (self.val(*x), self.val(*y));
                let w = xv.ncols();
                let d = w / b;
                let mut dx = Array2::zeros(xv.raw_dim());
                let mut dy = Array2::zeros(yv.raw_dim());
                {
                    let (xs, ys) = (xv.as_slice().unwrap(), yv.as_slice().unwrap());
                    let gs = dout.as_slice().expect("standard layout");
                    let dxs = dx.as_slice_mut().unwrap();
                    let dys = dy.as_slice_mut().unwrap();
                    for i in 0..xv.nrows() {
                        let row = i * w..(i + 1) * w;
                        let (xr, yr) = (&xs[row.clone()], &ys[row.clone()]);
                        let gr = &gs[i * b * b..(i + 1) * b * b];
                        let (dxr, dyr) = (&mut dxs[row.clone()], &mut dys[row]);
                        for p in 0..b {
                            for q in 0..b {
                                let c = gr[p * b + q];
                                if c == 0.0 {
                                    continue;
                                }
                                axpy(c, &yr[q * d..(q + 1) * d], &mut dxr[p * d..(p + 1) * d]);
                                axpy(c, &xr[p * d..(p + 1) * d], &mut dyr[q * d..(q + 1) * d]);
                            }
                        }
                    }
                }
                send(*x, dx);
                send(*y, dy);
            }
            Op::BlockAttend(a, y, blocks) => {
                let b = *blocks;
                let (av, yv) = (self.val(*a), self.val(*y));
                let w = yv.ncols();
                let d = w / b;
                let mut da = Array2::zeros(av.raw_dim());
                let mut dy = Array2::zeros(yv.raw_dim());
                {
                    let (as_, ys) = (av.as_slice().unwrap(), yv.as_slice().unwrap());
                    let gs = dout.as_slice().expect("standard layout");
                    let das = da.as_slice_mut().unwrap();
                    let dys = dy.as_slice_mut().unwrap();
                    for i in 0..yv.nrows() {
                        let row = i * w..(i + 1) * w;
                        let (yr, gr) = (&ys[row.clone()], &gs[row.clone()]);
                        let ar = &as_[i * b * b..(i + 1) * b * b];
                        let dar = &mut das[i * b * b..(i + 1) * b * b];
                        let dyr = &mut dys[row];
                        for p in 0..b {
                            let gp = &gr[p * d..(p + 1) * d];
                            for q in 0..b {
                                dar[p * b + q] = dot(gp, &yr[q * d..(q + 1) * d]);
                                axpy(ar[p * b + q], gp, &mut dyr[q * d..(q + 1) * d]);
                            }
                        }
                    }
                }
                send(*a, da);
                send(*y, dy);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

/// Tiny or vector-shaped right operands use the direct kernels below;
/// everything else goes to the blocked routine.
fn direct(k: usize, n: usize) -> bool {
    k <= 4 || n <= 4 || k * n <= 64
}

/// `a * b`.
fn mm(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let (Some(xs), Some(ws)) = (a.as_slice(), b.as_slice()) else {
        return a.dot(&b);
    };
    if !direct(k, n) {
        return a.dot(&b);
    }
    let mut out = Array2::zeros((m, n));
    if n == 0 || k == 0 {
        return out;
    }
    let os = out.as_slice_mut().expect("fresh array");
    if n == 1 {
        for (xr, o) in xs.chunks_exact(k).zip(os.iter_mut()) {
            *o = dot(xr, ws);
        }
        return out;
    }
    for (xr, or) in xs.chunks_exact(k).zip(os.chunks_exact_mut(n)) {
        for (p, &c) in xr.iter().enumerate() {
            if c != 0.0 {
                axpy(c, &ws[p * n..(p + 1) * n], or);
            }
        }
    }
    out
}

/// `a * b^T`.
fn mm_bt(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (m, k, n) = (a.nrows(), a.ncols(), b.nrows());
    let (Some(xs), Some(ws)) = (a.as_slice(), b.as_slice()) else {
        return a.dot(&b.t());
    };
    if !direct(k, n) {
        return a.dot(&b.t());
    }
    let mut out = Array2::zeros((m, n));
    if n == 0 || k == 0 {
        return out;
    }
    let os = out.as_slice_mut().expect("fresh array");
    if k == 1 {
        for (&c, or) in xs.iter().zip(os.chunks_exact_mut(n)) {
            or.iter_mut().zip(ws).for_each(|(o, w)| *o = c * w);
        }
        return out;
    }
    for (xr, or) in xs.chunks_exact(k).zip(os.chunks_exact_mut(n)) {
        for (o, wr) in or.iter_mut().zip(ws.chunks_exact(k)) {
            *o = dot(xr, wr);
        }
    }
    out
}

/// `a^T * b`, summing over the shared rows.
fn mm_at(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (k, n) = (a.ncols(), b.ncols());
    let (Some(xs), Some(gs)) = (a.as_slice(), b.as_slice()) else {
        return a.t().dot(&b);
    };
    if !direct(k, n) {
        return a.t().dot(&b);
    }
    let mut out = Array2::zeros((k, n));
    if n == 0 || k == 0 {
        return out;
    }
    let os = out.as_slice_mut().expect("fresh array");
    for (xr, gr) in xs.chunks_exact(k).zip(gs.chunks_exact(n)) {
        for (p, &c) in xr.iter().enumerate() {
            if c != 0.0 {
                axpy(c, gr, &mut os[p * n..(p + 1) * n]);
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // eight independent partial sums let the loop vectorize
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yv, xv)| *yv += c * xv);
}
