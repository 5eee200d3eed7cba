use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let std = (2.0 / (input + output) as f64).sqrt();
        Linear {
            weight: store.add_random(format!("{name}.weight"), input, output, std, rng),
            bias: store.add_const(format!("{name}.bias"), 1, output, 0.0),
        }
    }

    pub fn forward<F: Scalar>(&self, g: &mut Graph<'_, F>, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new<F: Scalar>(store: &mut ParamStore<F>, name: &str, width: usize) -> Self {
        LayerNorm {
            gain: store.add_const(format!("{name}.gain"), 1, width, 1.0),
            bias: store.add_const(format!("{name}.bias"), 1, width, 0.0),
        }
    }

    pub fn forward<F: Scalar>(&self, g: &mut Graph<'_, F>, x: Var) -> Var {
        let n = g.normalize_rows(x);
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        let scaled = g.mul_row(n, gain);
        g.add_row(scaled, bias)
    }
}

/// Size of a bidirectional transformer encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    /// Learned absolute position embeddings; off gives a permutation-equivariant encoder.
    pub use_positions: bool,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("encoder: {m}")));
        if self.width == 0 || self.heads == 0 || self.vocab_size == 0 || self.max_len == 0 {
            return bad("width, heads, vocab_size and max_len must be positive");
        }
        if self.width % self.heads != 0 {
            return bad("width must be divisible by heads");
        }
        if self.layers > 0 && self.ff_width == 0 {
            return bad("ff_width must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct EncoderBlock {
    ln_attn: LayerNorm,
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    ln_ff: LayerNorm,
    ff_in: Linear,
    ff_out: Linear,
}

/// Pre-norm transformer encoder with learned token (and optional position) embeddings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub tokens: ParamId,
    pub positions: Option<ParamId>,
    blocks: Vec<EncoderBlock>,
    ln_final: LayerNorm,
}

impl Encoder {
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        name: &str,
        config: EncoderConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.width;
        let emb_std = 1.0 / (d as f64).sqrt();
        let tokens = store.add_random(format!("{name}.tokens"), config.vocab_size, d, emb_std, rng);
        let positions = config
            .use_positions
            .then(|| store.add_random(format!("{name}.positions"), config.max_len, d, emb_std, rng));
        let blocks = (0..config.layers)
            .map(|l| {
                let p = format!("{name}.block{l}");
                EncoderBlock {
                    ln_attn: LayerNorm::new(store, &format!("{p}.ln_attn"), d),
                    query: Linear::new(store, &format!("{p}.query"), d, d, rng),
                    key: Linear::new(store, &format!("{p}.key"), d, d, rng),
                    value: Linear::new(store, &format!("{p}.value"), d, d, rng),
                    out: Linear::new(store, &format!("{p}.out"), d, d, rng),
                    ln_ff: LayerNorm::new(store, &format!("{p}.ln_ff"), d),
                    ff_in: Linear::new(store, &format!("{p}.ff_in"), d, config.ff_width, rng),
                    ff_out: Linear::new(store, &format!("{p}.ff_out"), config.ff_width, d, rng),
                }
            })
            .collect();
        let ln_final = LayerNorm::new(store, &format!("{name}.ln_final"), d);
        Ok(Encoder {
            config,
            tokens,
            positions,
            blocks,
            ln_final,
        })
    }

    /// Final hidden states, one row per input token.
    pub fn forward<F: Scalar>(&self, g: &mut Graph<'_, F>, ids: &[usize]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::Shape("encoder input is empty".into()));
        }
        if ids.len() > self.config.max_len {
            return Err(Error::Shape(format!(
                "sequence of {} tokens exceeds encoder capacity {}",
                ids.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::Shape(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        let table = g.param(self.tokens);
        let mut x = g.gather_rows(table, ids);
        if let Some(pos) = self.positions {
            let p = g.param(pos);
            let idx: Vec<usize> = (0..ids.len()).collect();
            let pe = g.gather_rows(p, &idx);
            x = g.add(x, pe);
        }
        let heads = self.config.heads;
        let hd = self.config.width / heads;
        let scale = F::one() / F::of_usize(hd).sqrt();
        for b in &self.blocks {
            let h = b.ln_attn.forward(g, x);
            let q = b.query.forward(g, h);
            let k = b.key.forward(g, h);
            let v = b.value.forward(g, h);
            let mut outs = Vec::with_capacity(heads);
            for head in 0..heads {
                let (qh, kh, vh) = if heads == 1 {
                    (q, k, v)
                } else {
                    (
                        g.slice_cols(q, head * hd, hd),
                        g.slice_cols(k, head * hd, hd),
                        g.slice_cols(v, head * hd, hd),
                    )
                };
                let scores = g.matmul_bt(qh, kh);
                let scores = g.scale(scores, scale);
                let attn = g.softmax_rows(scores);
                outs.push(g.matmul(attn, vh));
            }
            let joined = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
            let attn_out = b.out.forward(g, joined);
            x = g.add(x, attn_out);

            let h = b.ln_ff.forward(g, x);
            let f = b.ff_in.forward(g, h);
            let f = g.gelu(f);
            let f = b.ff_out.forward(g, f);
            x = g.add(x, f);
        }
        Ok(self.ln_final.forward(g, x))
    }
}

/// Tanh perceptron; `widths` lists input, hidden and output sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        name: &str,
        widths: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn forward<F: Scalar>(&self, g: &mut Graph<'_, F>, x: Var) -> Var {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(g, h);
            if i + 1 < self.layers.len() {
                h = g.tanh(h);
            }
        }
        h
    }

    /// Plain forward pass without a tape.
    pub fn eval<F: Scalar>(&self, store: &ParamStore<F>, x: &Tensor<F>) -> Tensor<F> {
        let mut g = Graph::new(store);
        let input = g.input(x.clone());
        let out = self.forward(&mut g, input);
        g.value(out).clone()
    }
}
