//! The closed set of differentiable primitives.
//!
//! Each primitive has a pure forward rule ([`forward`]) and a vector-Jacobian
//! rule ([`backward`]). LSTM cells, attention and the copy mixture are all
//! compositions of these.

use super::{AutodiffError, Tensor};

/// Smallest argument `Ln` will take the logarithm of; smaller inputs are
/// clamped and receive zero gradient.
pub const LN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// `[m, k] x [k, n] -> [m, n]`
    MatMul,
    Add,
    /// Elementwise product.
    Mul,
    Sigmoid,
    Tanh,
    /// Row-wise softmax of a rank-2 tensor.
    Softmax,
    /// Concatenation of rank-2 tensors along `axis` (0 = rows, 1 = columns).
    Concat { axis: usize },
    /// `len` rows (axis 0) or columns (axis 1) starting at `start`.
    Slice { axis: usize, start: usize, len: usize },
    /// Gathers rows of the `[vocab, dim]` table.
    Embedding { ids: Vec<usize> },
    Transpose,
    /// Natural log, clamped below at [`LN_FLOOR`].
    Ln,
    /// Multiplication by a constant.
    Scale(f64),
    /// Sum of all elements into a `[1, 1]` tensor.
    Sum,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Softmax => "softmax",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Embedding { .. } => "embedding",
            Op::Transpose => "transpose",
            Op::Ln => "ln",
            Op::Scale(_) => "scale",
            Op::Sum => "sum",
        }
    }
}

fn shape_error(op: &Op, inputs: &[&Tensor], detail: impl Into<String>) -> AutodiffError {
    AutodiffError::Shape {
        op: op.name(),
        shapes: inputs.iter().map(|t| t.shape().to_vec()).collect(),
        detail: detail.into(),
    }
}

fn expect_arity(op: &Op, inputs: &[&Tensor], n: usize) -> Result<(), AutodiffError> {
    if inputs.len() != n {
        return Err(shape_error(
            op,
            inputs,
            format!("expected {n} input(s), got {}", inputs.len()),
        ));
    }
    Ok(())
}

fn expect_rank2(op: &Op, inputs: &[&Tensor]) -> Result<(), AutodiffError> {
    if inputs.iter().any(|t| t.rank() != 2) {
        return Err(shape_error(op, inputs, "expected rank-2 tensors"));
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

fn softmax_rows(t: &Tensor) -> Tensor {
    let cols = t.cols();
    let mut data = Vec::with_capacity(t.len());
    for row in t.data().chunks(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        data.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::matrix(t.rows(), cols, data)
}

/// Evaluates `op` on `inputs` without recording anything.
pub fn forward(op: &Op, inputs: &[&Tensor]) -> Result<Tensor, AutodiffError> {
    match op {
        Op::MatMul => {
            expect_arity(op, inputs, 2)?;
            expect_rank2(op, inputs)?;
            let (a, b) = (inputs[0], inputs[1]);
            if a.cols() != b.rows() {
                return Err(shape_error(op, inputs, "inner dimensions differ"));
            }
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            Ok(Tensor::matrix(m, n, matmul_raw(a.data(), b.data(), m, k, n)))
        }
        Op::Add | Op::Mul => {
            expect_arity(op, inputs, 2)?;
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() {
                return Err(shape_error(op, inputs, "operand shapes differ"));
            }
            Ok(if *op == Op::Add {
                a.zip_map(b, |x, y| x + y)
            } else {
                a.zip_map(b, |x, y| x * y)
            })
        }
        Op::Sigmoid => {
            expect_arity(op, inputs, 1)?;
            Ok(inputs[0].map(sigmoid))
        }
        Op::Tanh => {
            expect_arity(op, inputs, 1)?;
            Ok(inputs[0].map(f64::tanh))
        }
        Op::Softmax => {
            expect_arity(op, inputs, 1)?;
            expect_rank2(op, inputs)?;
            Ok(softmax_rows(inputs[0]))
        }
        Op::Concat { axis } => {
            if inputs.is_empty() {
                return Err(shape_error(op, inputs, "nothing to concatenate"));
            }
            expect_rank2(op, inputs)?;
            match axis {
                0 => {
                    let cols = inputs[0].cols();
                    if inputs.iter().any(|t| t.cols() != cols) {
                        return Err(shape_error(op, inputs, "column counts differ"));
                    }
                    let rows = inputs.iter().map(|t| t.rows()).sum();
                    let data = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
                    Ok(Tensor::matrix(rows, cols, data))
                }
                1 => {
                    let rows = inputs[0].rows();
                    if inputs.iter().any(|t| t.rows() != rows) {
                        return Err(shape_error(op, inputs, "row counts differ"));
                    }
                    let cols: usize = inputs.iter().map(|t| t.cols()).sum();
                    let mut data = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        for t in inputs {
                            let c = t.cols();
                            data.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
                        }
                    }
                    Ok(Tensor::matrix(rows, cols, data))
                }
                _ => Err(shape_error(op, inputs, format!("axis {axis} out of range"))),
            }
        }
        Op::Slice { axis, start, len } => {
            expect_arity(op, inputs, 1)?;
            expect_rank2(op, inputs)?;
            let t = inputs[0];
            let extent = match axis {
                0 => t.rows(),
                1 => t.cols(),
                _ => return Err(shape_error(op, inputs, format!("axis {axis} out of range"))),
            };
            if *len == 0 || start + len > extent {
                return Err(shape_error(
                    op,
                    inputs,
                    format!("range {start}..{} outside axis of length {extent}", start + len),
                ));
            }
            let cols = t.cols();
            Ok(if *axis == 0 {
                Tensor::matrix(*len, cols, t.data()[start * cols..(start + len) * cols].to_vec())
            } else {
                let mut data = Vec::with_capacity(t.rows() * len);
                for r in 0..t.rows() {
                    data.extend_from_slice(&t.data()[r * cols + start..r * cols + start + len]);
                }
                Tensor::matrix(t.rows(), *len, data)
            })
        }
        Op::Embedding { ids } => {
            expect_arity(op, inputs, 1)?;
            expect_rank2(op, inputs)?;
            let table = inputs[0];
            if ids.is_empty() {
                return Err(shape_error(op, inputs, "empty id list"));
            }
            if let Some(bad) = ids.iter().find(|&&i| i >= table.rows()) {
                return Err(shape_error(
                    op,
                    inputs,
                    format!("id {bad} outside table of {} rows", table.rows()),
                ));
            }
            let dim = table.cols();
            let mut data = Vec::with_capacity(ids.len() * dim);
            for &id in ids {
                data.extend_from_slice(&table.data()[id * dim..(id + 1) * dim]);
            }
            Ok(Tensor::matrix(ids.len(), dim, data))
        }
        Op::Transpose => {
            expect_arity(op, inputs, 1)?;
            expect_rank2(op, inputs)?;
            let t = inputs[0];
            Ok(Tensor::matrix(
                t.cols(),
                t.rows(),
                transpose_raw(t.data(), t.rows(), t.cols()),
            ))
        }
        Op::Ln => {
            expect_arity(op, inputs, 1)?;
            Ok(inputs[0].map(|v| v.max(LN_FLOOR).ln()))
        }
        Op::Scale(factor) => {
            expect_arity(op, inputs, 1)?;
            let f = *factor;
            Ok(inputs[0].map(|v| v * f))
        }
        Op::Sum => {
            expect_arity(op, inputs, 1)?;
            Ok(Tensor::scalar(inputs[0].sum()))
        }
    }
}

/// Vector-Jacobian products: given the upstream gradient `grad` of `output`,
/// returns one gradient per input, each shaped like that input. Inputs with
/// `needs[i] == false` may get `None`.
pub(crate) fn backward(op: &Op, inputs: &[&Tensor], needs: &[bool], output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
    match op {
        Op::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let da = needs[0].then(|| {
                let mut out = a.zeros_like();
                matmul_grad_a(b, grad, out.data_mut());
                out
            });
            let db = needs[1].then(|| {
                let mut out = b.zeros_like();
                matmul_grad_b(a, grad, out.data_mut());
                out
            });
            vec![da, db]
        }
        _ => backward_dense(op, inputs, output, grad).into_iter().map(Some).collect(),
    }
}

/// `acc += G B^T` for `C = A B`.
pub(crate) fn matmul_grad_a(b: &Tensor, grad: &Tensor, acc: &mut [f64]) {
    let (k, n) = (b.rows(), b.cols());
    for (i, grow) in grad.data().chunks(n).enumerate() {
        for p in 0..k {
            let brow = &b.data()[p * n..(p + 1) * n];
            acc[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `acc += A^T G` for `C = A B`.
pub(crate) fn matmul_grad_b(a: &Tensor, grad: &Tensor, acc: &mut [f64]) {
    let (k, n) = (a.cols(), grad.cols());
    for (i, grow) in grad.data().chunks(n).enumerate() {
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &gv) in acc[p * n..(p + 1) * n].iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

fn backward_dense(op: &Op, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
    match op {
        Op::MatMul => unreachable!("handled in backward"),
        Op::Add => vec![grad.clone(), grad.clone()],
        Op::Mul => vec![grad.zip_map(inputs[1], |g, b| g * b), grad.zip_map(inputs[0], |g, a| g * a)],
        Op::Sigmoid => vec![grad.zip_map(output, |g, s| g * s * (1.0 - s))],
        Op::Tanh => vec![grad.zip_map(output, |g, t| g * (1.0 - t * t))],
        Op::Softmax => {
            let cols = output.cols();
            let mut data = Vec::with_capacity(output.len());
            for (srow, grow) in output.data().chunks(cols).zip(grad.data().chunks(cols)) {
                let dot: f64 = srow.iter().zip(grow).map(|(s, g)| s * g).sum();
                data.extend(srow.iter().zip(grow).map(|(s, g)| s * (g - dot)));
            }
            vec![Tensor::matrix(output.rows(), cols, data)]
        }
        Op::Concat { axis } => {
            let mut grads = Vec::with_capacity(inputs.len());
            let mut offset = 0;
            for t in inputs {
                let len = if *axis == 0 { t.rows() } else { t.cols() };
                let slice = Op::Slice {
                    axis: *axis,
                    start: offset,
                    len,
                };
                grads.push(forward(&slice, &[grad]).expect("concat gradient slice"));
                offset += len;
            }
            grads
        }
        Op::Slice { axis, start, len } => {
            let t = inputs[0];
            let mut out = t.zeros_like();
            let cols = t.cols();
            if *axis == 0 {
                out.data_mut()[start * cols..(start + len) * cols].copy_from_slice(grad.data());
            } else {
                for r in 0..t.rows() {
                    out.data_mut()[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&grad.data()[r * len..(r + 1) * len]);
                }
            }
            vec![out]
        }
        Op::Embedding { ids } => {
            let table = inputs[0];
            let dim = table.cols();
            let mut out = table.zeros_like();
            for (row, &id) in ids.iter().enumerate() {
                let dst = &mut out.data_mut()[id * dim..(id + 1) * dim];
                for (d, g) in dst.iter_mut().zip(&grad.data()[row * dim..(row + 1) * dim]) {
                    *d += g;
                }
            }
            vec![out]
        }
        Op::Transpose => {
            let (r, c) = (grad.rows(), grad.cols());
            vec![Tensor::matrix(c, r, transpose_raw(grad.data(), r, c))]
        }
        Op::Ln => vec![grad.zip_map(inputs[0], |g, x| if x > LN_FLOOR { g / x } else { 0.0 })],
        Op::Scale(factor) => {
            let f = *factor;
            vec![grad.map(|g| g * f)]
        }
        Op::Sum => {
            let g = grad.item();
            vec![inputs[0].map(|_| g)]
        }
    }
}
