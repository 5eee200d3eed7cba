//! Reverse-mode differentiation over a per-forward tape.
//!
//! A [`Graph`] borrows the parameter store read-only, so independent samples
//! can build their own graphs in parallel and return [`Grads`] to be summed.

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{dot, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<F> {
    Param(ParamId),
    Input,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, F),
    Tanh(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    /// Saved per-row inverse standard deviations.
    NormalizeRows(Var, Vec<F>),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    /// Saved norms of both operands.
    Cosine(Var, Var, F, F),
}

struct Node<F> {
    op: Op<F>,
    value: Option<Tensor<F>>,
}

pub struct Graph<'s, F: Scalar> {
    store: &'s ParamStore<F>,
    nodes: Vec<Node<F>>,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'s, F: Scalar> Graph<'s, F> {
    pub fn new(store: &'s ParamStore<F>) -> Self {
        Graph {
            store,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn store(&self) -> &'s ParamStore<F> {
        self.store
    }

    fn push(&mut self, op: Op<F>, value: Option<Tensor<F>>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (_, Some(t)) => t,
            (Op::Param(id), None) => self.store.get(*id),
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Op::Param(id), None)
    }

    pub fn input(&mut self, t: Tensor<F>) -> Var {
        self.push(Op::Input, Some(t))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), Some(v))
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(Op::MatMulBt(a, b), Some(v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(Op::Add(a, b), Some(v))
    }

    /// Adds a `1×n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows, 1, "add_row expects a row vector");
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            for (x, &b) in v.row_mut(i).iter_mut().zip(&r.data) {
                *x = *x + b;
            }
        }
        self.push(Op::AddRow(a, row), Some(v))
    }

    /// Multiplies every row of `a` elementwise by a `1×n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows, 1, "mul_row expects a row vector");
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            for (x, &b) in v.row_mut(i).iter_mut().zip(&r.data) {
                *x = *x * b;
            }
        }
        self.push(Op::MulRow(a, row), Some(v))
    }

    pub fn scale(&mut self, a: Var, s: F) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), Some(v))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(Op::Tanh(a), Some(v))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let (c, k) = (F::of(GELU_C), F::of(GELU_A));
        let half = F::of(0.5);
        let v = self
            .value(a)
            .map(|x| half * x * (F::one() + (c * (x + k * x * x * x)).tanh()));
        self.push(Op::Gelu(a), Some(v))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            let row = v.row_mut(i);
            let m = row.iter().copied().fold(F::neg_infinity(), F::max);
            let mut s = F::zero();
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s = s + *x;
            }
            for x in row.iter_mut() {
                *x = *x / s;
            }
        }
        self.push(Op::SoftmaxRows(a), Some(v))
    }

    /// Zero-mean, unit-variance rows (the parameter-free half of layer norm).
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        let n = F::of_usize(v.cols);
        let mut inv = Vec::with_capacity(v.rows);
        for i in 0..v.rows {
            let row = v.row_mut(i);
            let mean = row.iter().copied().sum::<F>() / n;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
            let is = F::one() / (var + F::of(LN_EPS)).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * is;
            }
            inv.push(is);
        }
        self.push(Op::NormalizeRows(a, inv), Some(v))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let src = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * src.cols);
        for &i in idx {
            data.extend_from_slice(src.row(i));
        }
        let v = Tensor::from_vec(idx.len(), src.cols, data);
        self.push(Op::GatherRows(a, idx.to_vec()), Some(v))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let src = self.value(a);
        let mut data = Vec::with_capacity(src.rows * len);
        for i in 0..src.rows {
            data.extend_from_slice(&src.row(i)[start..start + len]);
        }
        let v = Tensor::from_vec(src.rows, len, data);
        self.push(Op::SliceCols(a, start), Some(v))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let t = self.value(p);
                assert_eq!(t.rows, rows, "concat_cols row mismatch");
                v.row_mut(i)[off..off + t.cols].copy_from_slice(t.row(i));
                off += t.cols;
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), Some(v))
    }

    /// Cosine similarity of two `1×n` rows; a zero norm yields NaN, checked by callers.
    pub fn cosine(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let na = ta.sum_sq().sqrt();
        let nb = tb.sum_sq().sqrt();
        let c = dot(&ta.data, &tb.data) / (na * nb);
        self.push(Op::Cosine(a, b, na, nb), Some(Tensor::from_vec(1, 1, vec![c])))
    }

    /// Back-propagate the given output gradients into parameter gradients.
    pub fn backward(&self, seeds: &[(Var, Tensor<F>)]) -> Grads<F> {
        let mut grads = self.store.zeros_like();
        self.backward_into(seeds, &mut grads);
        grads
    }

    pub fn backward_into(&self, seeds: &[(Var, Tensor<F>)], out: &mut Grads<F>) {
        let mut g: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, t) in seeds {
            assert_eq!(self.value(*v).shape(), t.shape(), "seed gradient shape");
            accumulate(&mut g, *v, t.clone());
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(dy) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.get_mut(*id).add_assign(&dy),
                Op::MatMul(a, b) => {
                    let da = dy.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&dy);
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = dy.matmul(self.value(*b));
                    let db = dy.matmul_at(self.value(*a));
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g, *b, dy.clone());
                    accumulate(&mut g, *a, dy);
                }
                Op::AddRow(a, r) => {
                    let mut dr = Tensor::zeros(1, dy.cols);
                    for i in 0..dy.rows {
                        for (s, &x) in dr.data.iter_mut().zip(dy.row(i)) {
                            *s = *s + x;
                        }
                    }
                    accumulate(&mut g, *r, dr);
                    accumulate(&mut g, *a, dy);
                }
                Op::MulRow(a, r) => {
                    let (ta, tr) = (self.value(*a), self.value(*r));
                    let mut da = dy.clone();
                    let mut dr = Tensor::zeros(1, dy.cols);
                    for i in 0..dy.rows {
                        for j in 0..dy.cols {
                            let d = dy.get(i, j);
                            da.data[i * dy.cols + j] = d * tr.data[j];
                            dr.data[j] = dr.data[j] + d * ta.get(i, j);
                        }
                    }
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *r, dr);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut g, *a, dy.map(|x| x * s));
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().expect("tanh value");
                    let mut da = dy;
                    for (d, &yv) in da.data.iter_mut().zip(&y.data) {
                        *d = *d * (F::one() - yv * yv);
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let (c, k, half) = (F::of(GELU_C), F::of(GELU_A), F::of(0.5));
                    let mut da = dy;
                    for (d, &xv) in da.data.iter_mut().zip(&x.data) {
                        let t = (c * (xv + k * xv * xv * xv)).tanh();
                        let dt = (F::one() - t * t) * c * (F::one() + F::of(3.0) * k * xv * xv);
                        *d = *d * (half * (F::one() + t) + half * xv * dt);
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().expect("softmax value");
                    let mut da = dy;
                    for i in 0..y.rows {
                        let yr = y.row(i);
                        let dr = da.row_mut(i);
                        let s = dot(dr, yr);
                        for (d, &yv) in dr.iter_mut().zip(yr) {
                            *d = yv * (*d - s);
                        }
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::NormalizeRows(a, inv) => {
                    let y = node.value.as_ref().expect("normalize value");
                    let n = F::of_usize(y.cols);
                    let mut da = dy;
                    for (i, &is) in inv.iter().enumerate() {
                        let yr = y.row(i);
                        let dr = da.row_mut(i);
                        let mean_d = dr.iter().copied().sum::<F>() / n;
                        let mean_dy = dot(dr, yr) / n;
                        for (d, &yv) in dr.iter_mut().zip(yr) {
                            *d = is * (*d - mean_d - yv * mean_dy);
                        }
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::GatherRows(a, idx_list) => {
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(src.rows, src.cols);
                    for (k, &r) in idx_list.iter().enumerate() {
                        for (d, &x) in da.row_mut(r).iter_mut().zip(dy.row(k)) {
                            *d = *d + x;
                        }
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut da = Tensor::zeros(src.rows, src.cols);
                    for i in 0..dy.rows {
                        da.row_mut(i)[*start..*start + dy.cols].copy_from_slice(dy.row(i));
                    }
                    accumulate(&mut g, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut dp = Tensor::zeros(dy.rows, cols);
                        for i in 0..dy.rows {
                            dp.row_mut(i).copy_from_slice(&dy.row(i)[off..off + cols]);
                        }
                        off += cols;
                        accumulate(&mut g, p, dp);
                    }
                }
                Op::Cosine(a, b, na, nb) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let c = node.value.as_ref().expect("cosine value").data[0];
                    let d = dy.data[0];
                    let inv = F::one() / (*na * *nb);
                    let da: Vec<F> = ta
                        .data
                        .iter()
                        .zip(&tb.data)
                        .map(|(&x, &y)| d * (y * inv - c * x / (*na * *na)))
                        .collect();
                    let db: Vec<F> = ta
                        .data
                        .iter()
                        .zip(&tb.data)
                        .map(|(&x, &y)| d * (x * inv - c * y / (*nb * *nb)))
                        .collect();
                    accumulate(&mut g, *a, Tensor::from_vec(ta.rows, ta.cols, da));
                    accumulate(&mut g, *b, Tensor::from_vec(tb.rows, tb.cols, db));
                }
            }
        }
    }
}

fn accumulate<F: Scalar>(g: &mut [Option<Tensor<F>>], v: Var, t: Tensor<F>) {
    match &mut g[v.0] {
        Some(acc) => acc.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Builds a scalar from every op, then compares with central differences.
    fn check(build: impl Fn(&mut Graph<'_, f64>, &[Var]) -> Var, shapes: &[(usize, usize)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::<f64>::default();
        let ids: Vec<_> = shapes
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| store.add_random(format!("p{i}"), r, c, 0.8, &mut rng))
            .collect();
        let eval = |store: &ParamStore<f64>, with_grads: bool| {
            let mut g = Graph::new(store);
            let vars: Vec<_> = ids.iter().map(|&id| g.param(id)).collect();
            let out = build(&mut g, &vars);
            let value = g.value(out).data.iter().sum::<f64>();
            let grads = with_grads.then(|| {
                let (r, c) = g.value(out).shape();
                g.backward(&[(out, Tensor::from_vec(r, c, vec![1.0; r * c]))])
            });
            (value, grads)
        };
        let grads = eval(&store, true).1.unwrap();
        let h = 1e-5;
        for &id in &ids {
            for k in 0..store.get(id).len() {
                let orig = store.get(id).data[k];
                store.get_mut(id).data[k] = orig + h;
                let up = eval(&store, false).0;
                store.get_mut(id).data[k] = orig - h;
                let down = eval(&store, false).0;
                store.get_mut(id).data[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.get(id).data[k];
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "param {} elem {k}: fd {fd} vs analytic {an}",
                    store.name(id)
                );
            }
        }
    }

    #[test]
    fn matmul_family() {
        check(|g, v| g.matmul(v[0], v[1]), &[(2, 3), (3, 4)]);
        check(|g, v| g.matmul_bt(v[0], v[1]), &[(2, 3), (4, 3)]);
    }

    #[test]
    fn broadcast_and_pointwise() {
        check(
            |g, v| {
                let a = g.add_row(v[0], v[1]);
                let b = g.mul_row(a, v[2]);
                let c = g.tanh(b);
                let d = g.gelu(c);
                let e = g.add(d, v[0]);
                g.scale(e, 0.3)
            },
            &[(3, 4), (1, 4), (1, 4)],
        );
    }

    #[test]
    fn softmax_and_normalize() {
        check(
            |g, v| {
                let s = g.softmax_rows(v[0]);
                let w = g.mul_row(s, v[1]);
                let n = g.normalize_rows(w);
                g.mul_row(n, v[2])
            },
            &[(3, 5), (1, 5), (1, 5)],
        );
    }

    #[test]
    fn gather_slice_concat_cosine() {
        check(
            |g, v| {
                let rows = g.gather_rows(v[0], &[2, 0, 2]);
                let left = g.slice_cols(rows, 1, 2);
                let cat = g.concat_cols(&[left, rows]);
                let r0 = g.gather_rows(cat, &[0]);
                let r1 = g.gather_rows(cat, &[1]);
                let c = g.cosine(r0, r1);
                let t = g.tanh(cat);
                let s = g.matmul_bt(c, v[1]);
                let sum = g.gather_rows(t, &[2]);
                g.concat_cols(&[s, sum])
            },
            &[(4, 3), (2, 1)],
        );
    }
}
