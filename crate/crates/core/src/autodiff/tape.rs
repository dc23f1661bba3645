use std::collections::BTreeMap;

use super::ops::{self, Op};
use super::{AutodiffError, Tensor};

/// Handle to a value recorded on a [`Tape`]. Only meaningful for the tape
/// that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Origin {
    Constant,
    Param,
    Op { op: Op, inputs: Vec<Var> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    origin: Origin,
    requires_grad: bool,
}

/// Wengert list of executed primitives.
///
/// Nodes are appended in execution order, so every node's inputs precede it.
/// Constants and parameters are leaves; only parameters (and values derived
/// from them) take part in the backward sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every parameter leaf of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, param: Var) -> Option<&Tensor> {
        self.by_param.get(&param)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.by_param.iter().map(|(v, t)| (*v, t))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
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

    fn push(&mut self, value: Tensor, origin: Origin, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            origin,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that is not differentiated.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Origin::Constant, false)
    }

    /// Records a trainable leaf; [`Tape::gradient`] reports a gradient for it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Origin::Param, true)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn params(&self) -> Vec<Var> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.origin, Origin::Param))
            .map(|(i, _)| Var(i))
            .collect()
    }

    /// Runs `op` on recorded values and appends the result.
    pub fn apply(&mut self, op: Op, inputs: &[Var]) -> Result<Var, AutodiffError> {
        let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let out = ops::forward(&op, &values)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let origin = Origin::Op {
            op,
            inputs: inputs.to_vec(),
        };
        Ok(self.push(out, origin, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Sigmoid, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Tanh, &[a])
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Softmax, &[a])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        self.apply(Op::Concat { axis }, parts)
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, AutodiffError> {
        self.apply(Op::Slice { axis, start, len }, &[a])
    }

    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, AutodiffError> {
        self.apply(Op::Embedding { ids: ids.to_vec() }, &[table])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Transpose, &[a])
    }

    pub fn ln(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Ln, &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, AutodiffError> {
        self.apply(Op::Scale(factor), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Op::Sum, &[a])
    }

    /// Reverse sweep from a scalar `loss`. Every parameter leaf gets an entry,
    /// zero-filled when the loss does not depend on it.
    pub fn gradient(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        let loss_value = &self.nodes[loss.0].value;
        if !loss_value.is_scalar() {
            return Err(AutodiffError::NonScalarLoss {
                shape: loss_value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(loss_value.map(|_| 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Origin::Op { op, inputs } = &node.origin else {
                continue;
            };
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            if let Op::Embedding { ids } = op {
                // scatter rows straight into the table's accumulator
                let table = inputs[0];
                if self.nodes[table.0].requires_grad {
                    let acc = grads[table.0].get_or_insert_with(|| self.nodes[table.0].value.zeros_like());
                    let dim = acc.cols();
                    for (row, &id) in ids.iter().enumerate() {
                        let dst = &mut acc.data_mut()[id * dim..(id + 1) * dim];
                        for (d, g) in dst.iter_mut().zip(&grad.data()[row * dim..(row + 1) * dim]) {
                            *d += g;
                        }
                    }
                }
                continue;
            }
            if let Op::MatMul = op {
                let (a, b) = (inputs[0], inputs[1]);
                if self.nodes[a.0].requires_grad {
                    let acc = grads[a.0].get_or_insert_with(|| self.nodes[a.0].value.zeros_like());
                    ops::matmul_grad_a(&self.nodes[b.0].value, &grad, acc.data_mut());
                }
                if self.nodes[b.0].requires_grad {
                    let acc = grads[b.0].get_or_insert_with(|| self.nodes[b.0].value.zeros_like());
                    ops::matmul_grad_b(&self.nodes[a.0].value, &grad, acc.data_mut());
                }
                continue;
            }
            let values: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let needs: Vec<bool> = inputs.iter().map(|v| self.nodes[v.0].requires_grad).collect();
            let input_grads = ops::backward(op, &values, &needs, &node.value, &grad);
            for (input, g) in inputs.iter().zip(input_grads) {
                let Some(g) = g else {
                    continue;
                };
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }

        let by_param = self
            .params()
            .into_iter()
            .map(|p| {
                let g = grads
                    .get_mut(p.0)
                    .and_then(Option::take)
                    .unwrap_or_else(|| self.nodes[p.0].value.zeros_like());
                (p, g)
            })
            .collect();
        Ok(Gradients { by_param })
    }

    /// Re-executes every recorded primitive from the leaf values and returns
    /// the recomputed node values in tape order.
    pub fn replay(&self) -> Result<Vec<Tensor>, AutodiffError> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.origin {
                Origin::Constant | Origin::Param => node.value.clone(),
                Origin::Op { op, inputs } => {
                    let ins: Vec<&Tensor> = inputs.iter().map(|v| &values[v.0]).collect();
                    ops::forward(op, &ins)?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// True when every node's inputs were recorded before it.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| match &n.origin {
            Origin::Op { inputs, .. } => inputs.iter().all(|v| v.0 < i),
            _ => true,
        })
    }
}
