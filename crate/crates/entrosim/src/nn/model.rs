//! The shared-weight encoder and classification head.
//!
//! All parameters live in one flat vector behind a named layout
//! (`enc.block{b}.conv{k}.w|b`, `head.fc1.w|b`, `head.embed.w|b`,
//! `head.logits.w|b`, `centers`, `class_weights`), which keeps the optimizer,
//! checkpoint format, and finite-difference harness on a single code path.
//! Both Siamese branches run through the same parameter vector, so weight
//! sharing holds by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyGraph, FillPolicy};
use crate::error::{Error, Result};
use crate::nn::layers::{
    conv2d_grad_slice, conv2d_slice, dense_grad_slice, dense_slice, maxpool2_grad_slice,
    maxpool2_slice, relu_grad_slice, relu_slice,
};
use crate::nn::loss::CenterBank;
use crate::nn::tensor::{Scalar, Tensor};

/// Graph cells are divided by this before entering the encoder, mapping the
/// [0, 8] entropy range onto [0, 1].
pub const INPUT_SCALE: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub n_conv: usize,
    pub filters: usize,
}

/// Encoder/head geometry plus the dataset identity and extraction settings a
/// checkpoint needs to be self-contained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub blocks: Vec<BlockSpec>,
    pub fc1_units: usize,
    pub embed_units: usize,
    pub n_classes: usize,
    pub family_names: Vec<String>,
    pub segment_len: usize,
    pub fill_policy: FillPolicy,
}

impl ModelConfig {
    /// Small configuration for fast CPU runs: 64x64 input, three thin blocks.
    pub fn desk(family_names: Vec<String>) -> Self {
        let n_classes = family_names.len();
        Self {
            input_h: 64,
            input_w: 64,
            blocks: vec![
                BlockSpec { n_conv: 1, filters: 8 },
                BlockSpec { n_conv: 1, filters: 16 },
                BlockSpec { n_conv: 2, filters: 32 },
            ],
            fc1_units: 128,
            embed_units: 64,
            n_classes,
            family_names,
            segment_len: 200,
            fill_policy: FillPolicy::Resample,
        }
    }

    /// Full-scale configuration: 224x224 input, the five-block 64/128/256/512/512
    /// stack with 1024- and 512-unit dense layers.
    pub fn paper(family_names: Vec<String>) -> Self {
        let n_classes = family_names.len();
        Self {
            input_h: 224,
            input_w: 224,
            blocks: vec![
                BlockSpec { n_conv: 2, filters: 64 },
                BlockSpec { n_conv: 2, filters: 128 },
                BlockSpec { n_conv: 3, filters: 256 },
                BlockSpec { n_conv: 3, filters: 512 },
                BlockSpec { n_conv: 3, filters: 512 },
            ],
            fc1_units: 1024,
            embed_units: 512,
            n_classes,
            family_names,
            segment_len: 200,
            fill_policy: FillPolicy::Resample,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Config("encoder needs at least one block".into()));
        }
        if self.blocks.iter().any(|b| b.n_conv == 0 || b.filters == 0) {
            return Err(Error::Config("block with zero convs or filters".into()));
        }
        if self.fc1_units == 0 || self.embed_units == 0 {
            return Err(Error::Config("dense layer with zero units".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.family_names.len() != self.n_classes {
            return Err(Error::Config(format!(
                "{} family names for {} classes",
                self.family_names.len(),
                self.n_classes
            )));
        }
        let (mut h, mut w) = (self.input_h, self.input_w);
        for (i, _) in self.blocks.iter().enumerate() {
            if h < 2 || w < 2 {
                return Err(Error::Config(format!(
                    "spatial size {h}x{w} too small to pool at block {}",
                    i + 1
                )));
            }
            h /= 2;
            w /= 2;
        }
        Ok(())
    }

    /// Channel/spatial dims entering each block, and the flattened size after
    /// the last pool.
    fn stage_dims(&self) -> (Vec<(usize, usize, usize)>, usize) {
        let mut dims = Vec::with_capacity(self.blocks.len());
        let (mut ch, mut h, mut w) = (1usize, self.input_h, self.input_w);
        for b in &self.blocks {
            dims.push((ch, h, w));
            ch = b.filters;
            h /= 2;
            w /= 2;
        }
        (dims, ch * h * w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    entries: Vec<ParamEntry>,
    params: Vec<T>,
    trainable_len: usize,
}

fn build_layout(config: &ModelConfig) -> (Vec<ParamEntry>, usize, usize) {
    let mut entries = Vec::new();
    let mut offset = 0usize;
    let mut push = |name: String, shape: Vec<usize>, trainable: bool, offset: &mut usize| {
        let len: usize = shape.iter().product();
        entries.push(ParamEntry {
            name,
            shape,
            offset: *offset,
            len,
            trainable,
        });
        *offset += len;
    };
    let (stage, flat) = config.stage_dims();
    for (bi, block) in config.blocks.iter().enumerate() {
        let mut in_ch = stage[bi].0;
        for ci in 0..block.n_conv {
            push(
                format!("enc.block{}.conv{}.w", bi + 1, ci + 1),
                vec![block.filters, in_ch, 3, 3],
                true,
                &mut offset,
            );
            push(
                format!("enc.block{}.conv{}.b", bi + 1, ci + 1),
                vec![block.filters],
                true,
                &mut offset,
            );
            in_ch = block.filters;
        }
    }
    push("head.fc1.w".into(), vec![config.fc1_units, flat], true, &mut offset);
    push("head.fc1.b".into(), vec![config.fc1_units], true, &mut offset);
    push(
        "head.embed.w".into(),
        vec![config.embed_units, config.fc1_units],
        true,
        &mut offset,
    );
    push("head.embed.b".into(), vec![config.embed_units], true, &mut offset);
    push(
        "head.logits.w".into(),
        vec![config.n_classes, config.embed_units],
        true,
        &mut offset,
    );
    push("head.logits.b".into(), vec![config.n_classes], true, &mut offset);
    let trainable_len = offset;
    push(
        "centers".into(),
        vec![config.n_classes, config.embed_units],
        false,
        &mut offset,
    );
    push("class_weights".into(), vec![config.n_classes], false, &mut offset);
    (entries, trainable_len, offset)
}

impl<T: Scalar> Model<T> {
    /// He-uniform weights, zero biases, centers ~ N(0, 0.01), unit class
    /// weights; every draw comes from one seeded stream in layout order.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (entries, trainable_len, total) = build_layout(&config);
        let mut params = vec![T::zero(); total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center_dist = Normal::new(0.0f64, 0.01).expect("valid normal");
        for e in &entries {
            let dst = &mut params[e.offset..e.offset + e.len];
            if e.name.ends_with(".w") {
                let fan_in: usize = e.shape[1..].iter().product();
                let limit = (6.0 / fan_in as f64).sqrt();
                for v in dst {
                    *v = T::from_f64(rng.random_range(-limit..limit));
                }
            } else if e.name == "centers" {
                for v in dst {
                    *v = T::from_f64(center_dist.sample(&mut rng));
                }
            } else if e.name == "class_weights" {
                dst.fill(T::one());
            }
            // biases stay zero
        }
        Ok(Self {
            config,
            entries,
            params,
            trainable_len,
        })
    }

    /// Rebuild a model from checkpoint data; `params` must match the layout
    /// derived from `config`.
    pub fn from_parts(config: ModelConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let (entries, trainable_len, total) = build_layout(&config);
        if params.len() != total {
            return Err(Error::shape(
                "model params",
                format!("{} values, layout needs {total}", params.len()),
            ));
        }
        Ok(Self {
            config,
            entries,
            params,
            trainable_len,
        })
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn trainable_len(&self) -> usize {
        self.trainable_len
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn tensor_data(&self, name: &str) -> Option<&[T]> {
        self.entry(name)
            .map(|e| &self.params[e.offset..e.offset + e.len])
    }

    pub fn tensor_data_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let e = self.entries.iter().find(|e| e.name == name)?.clone();
        Some(&mut self.params[e.offset..e.offset + e.len])
    }

    /// Name of the parameter block containing flat trainable index `i`.
    pub fn name_of_trainable_index(&self, i: usize) -> &str {
        self.entries
            .iter()
            .find(|e| e.trainable && i >= e.offset && i < e.offset + e.len)
            .map(|e| e.name.as_str())
            .unwrap_or("params")
    }

    pub fn center_bank(&self) -> CenterBank<T> {
        CenterBank {
            centers: self.tensor_data("centers").expect("layout has centers").to_vec(),
            class_weights: self
                .tensor_data("class_weights")
                .expect("layout has class_weights")
                .to_vec(),
            n_classes: self.config.n_classes,
            embed_dim: self.config.embed_units,
        }
    }

    pub fn store_center_bank(&mut self, bank: &CenterBank<T>) {
        self.tensor_data_mut("centers")
            .expect("layout has centers")
            .copy_from_slice(&bank.centers);
        self.tensor_data_mut("class_weights")
            .expect("layout has class_weights")
            .copy_from_slice(&bank.class_weights);
    }

    pub fn set_class_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.config.n_classes {
            return Err(Error::shape("class_weights", "length mismatch"));
        }
        let dst = self.tensor_data_mut("class_weights").expect("layout");
        for (d, &w) in dst.iter_mut().zip(weights) {
            *d = T::from_f64(w);
        }
        Ok(())
    }

    /// Convert a graph to the scaled `[1, H, W]` input tensor.
    pub fn graph_input(&self, graph: &EntropyGraph) -> Result<Tensor<T>> {
        if graph.h() != self.config.input_h || graph.w() != self.config.input_w {
            return Err(Error::shape(
                "encoder input",
                format!(
                    "graph {}x{} vs configured {}x{}",
                    graph.h(),
                    graph.w(),
                    self.config.input_h,
                    self.config.input_w
                ),
            ));
        }
        let scale = T::from_f64(1.0 / INPUT_SCALE);
        let data: Vec<T> = graph
            .cells()
            .iter()
            .map(|&c| T::from_f64(c as f64) * scale)
            .collect();
        Tensor::new(vec![1, graph.h(), graph.w()], data)
    }

    /// Branch embedding of one graph.
    pub fn encoder_forward(&self, graph: &EntropyGraph) -> Result<Vec<T>> {
        let input = self.graph_input(graph)?;
        Ok(self.forward_tape(input.data()).embedding)
    }

    /// Forward pass recording every intermediate needed by the backward pass.
    /// `input` must already be the scaled `[1, H, W]` buffer.
    pub fn forward_tape(&self, input: &[T]) -> EncoderTape<T> {
        let (stage, _flat) = self.config.stage_dims();
        let mut blocks = Vec::with_capacity(self.config.blocks.len());
        let mut cur = input.to_vec();
        for (bi, block) in self.config.blocks.iter().enumerate() {
            let (mut ch, h, w) = stage[bi];
            let mut convs = Vec::with_capacity(block.n_conv);
            for ci in 0..block.n_conv {
                let wname = format!("enc.block{}.conv{}.w", bi + 1, ci + 1);
                let bname = format!("enc.block{}.conv{}.b", bi + 1, ci + 1);
                let we = self.entry(&wname).expect("layout has conv weight");
                let be = self.entry(&bname).expect("layout has conv bias");
                let weight = &self.params[we.offset..we.offset + we.len];
                let bias = &self.params[be.offset..be.offset + be.len];
                let mut out = vec![T::zero(); block.filters * h * w];
                conv2d_slice(&cur, ch, h, w, weight, bias, block.filters, &mut out);
                let preact = out.clone();
                relu_slice(&mut out);
                convs.push(ConvTrace {
                    input: std::mem::replace(&mut cur, out),
                    preact,
                    in_ch: ch,
                });
                ch = block.filters;
            }
            let (pooled, argmax, _oh, _ow) = maxpool2_slice(&cur, ch, h, w);
            blocks.push(BlockTrace {
                convs,
                pool_in: std::mem::replace(&mut cur, pooled),
                pool_in_dims: (ch, h, w),
                pool_argmax: argmax,
            });
        }
        let flat = cur;
        let fc1w = self.entry("head.fc1.w").expect("layout");
        let fc1b = self.entry("head.fc1.b").expect("layout");
        let mut fc1_pre = vec![T::zero(); self.config.fc1_units];
        dense_slice(
            &flat,
            &self.params[fc1w.offset..fc1w.offset + fc1w.len],
            &self.params[fc1b.offset..fc1b.offset + fc1b.len],
            self.config.fc1_units,
            flat.len(),
            &mut fc1_pre,
        );
        let mut fc1_post = fc1_pre.clone();
        relu_slice(&mut fc1_post);
        let ew = self.entry("head.embed.w").expect("layout");
        let eb = self.entry("head.embed.b").expect("layout");
        let mut embedding = vec![T::zero(); self.config.embed_units];
        dense_slice(
            &fc1_post,
            &self.params[ew.offset..ew.offset + ew.len],
            &self.params[eb.offset..eb.offset + eb.len],
            self.config.embed_units,
            self.config.fc1_units,
            &mut embedding,
        );
        EncoderTape {
            blocks,
            flat,
            fc1_pre,
            fc1_post,
            embedding,
        }
    }

    /// Accumulate encoder parameter gradients for one branch into `grads`
    /// (the flat trainable prefix), given the loss gradient at the embedding.
    pub fn encoder_backward(&self, tape: &EncoderTape<T>, grad_embed: &[T], grads: &mut [T]) {
        debug_assert_eq!(grads.len(), self.trainable_len);
        let ew = self.entry("head.embed.w").expect("layout").clone();
        let eb = self.entry("head.embed.b").expect("layout").clone();
        let mut grad_fc1_post = vec![T::zero(); self.config.fc1_units];
        {
            let (gw, gb) = two_ranges(grads, ew.offset, ew.len, eb.offset, eb.len);
            dense_grad_slice(
                &tape.fc1_post,
                &self.params[ew.offset..ew.offset + ew.len],
                grad_embed,
                self.config.embed_units,
                self.config.fc1_units,
                &mut grad_fc1_post,
                gw,
                gb,
            );
        }
        let grad_fc1_pre = relu_grad_slice(&grad_fc1_post, &tape.fc1_pre);
        let fw = self.entry("head.fc1.w").expect("layout").clone();
        let fb = self.entry("head.fc1.b").expect("layout").clone();
        let mut grad_flat = vec![T::zero(); tape.flat.len()];
        {
            let (gw, gb) = two_ranges(grads, fw.offset, fw.len, fb.offset, fb.len);
            dense_grad_slice(
                &tape.flat,
                &self.params[fw.offset..fw.offset + fw.len],
                &grad_fc1_pre,
                self.config.fc1_units,
                tape.flat.len(),
                &mut grad_flat,
                gw,
                gb,
            );
        }
        let mut grad_cur = grad_flat;
        for (bi, bt) in tape.blocks.iter().enumerate().rev() {
            let (ch, h, w) = bt.pool_in_dims;
            grad_cur = maxpool2_grad_slice(&grad_cur, &bt.pool_argmax, ch * h * w);
            for (ci, ct) in bt.convs.iter().enumerate().rev() {
                // grad_cur is wrt this conv's post-relu output.
                let grad_pre = relu_grad_slice(&grad_cur, &ct.preact);
                let wname = format!("enc.block{}.conv{}.w", bi + 1, ci + 1);
                let bname = format!("enc.block{}.conv{}.b", bi + 1, ci + 1);
                let we = self.entry(&wname).expect("layout").clone();
                let be = self.entry(&bname).expect("layout").clone();
                let first_layer = bi == 0 && ci == 0;
                let mut grad_in = if first_layer {
                    Vec::new()
                } else {
                    vec![T::zero(); ct.input.len()]
                };
                {
                    let (gw, gb) = two_ranges(grads, we.offset, we.len, be.offset, be.len);
                    conv2d_grad_slice(
                        &ct.input,
                        ct.in_ch,
                        h,
                        w,
                        &self.params[we.offset..we.offset + we.len],
                        self.config.blocks[bi].filters,
                        &grad_pre,
                        if first_layer { None } else { Some(&mut grad_in) },
                        gw,
                        gb,
                    );
                }
                grad_cur = grad_in;
            }
        }
    }

    /// Logits of the classification head from a fused embedding.
    pub fn head_logits(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.config.embed_units {
            return Err(Error::shape(
                "head.logits",
                format!("embedding {} vs {}", z.len(), self.config.embed_units),
            ));
        }
        let lw = self.entry("head.logits.w").expect("layout");
        let lb = self.entry("head.logits.b").expect("layout");
        let mut out = vec![T::zero(); self.config.n_classes];
        dense_slice(
            z,
            &self.params[lw.offset..lw.offset + lw.len],
            &self.params[lb.offset..lb.offset + lb.len],
            self.config.n_classes,
            self.config.embed_units,
            &mut out,
        );
        Ok(out)
    }

    /// Backward through the head: accumulates head parameter gradients into
    /// `grads` and returns the gradient at the fused embedding.
    pub fn head_backward(&self, z: &[T], grad_logits: &[T], grads: &mut [T]) -> Vec<T> {
        let lw = self.entry("head.logits.w").expect("layout").clone();
        let lb = self.entry("head.logits.b").expect("layout").clone();
        let mut grad_z = vec![T::zero(); self.config.embed_units];
        let (gw, gb) = two_ranges(grads, lw.offset, lw.len, lb.offset, lb.len);
        dense_grad_slice(
            z,
            &self.params[lw.offset..lw.offset + lw.len],
            grad_logits,
            self.config.n_classes,
            self.config.embed_units,
            &mut grad_z,
            gw,
            gb,
        );
        grad_z
    }

    pub fn map_to<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            entries: self.entries.clone(),
            params: self.params.iter().map(|v| U::from_f64(v.into_f64())).collect(),
            trainable_len: self.trainable_len,
        }
    }
}

/// Two disjoint mutable ranges out of one slice (weight + bias blocks).
fn two_ranges<T>(
    buf: &mut [T],
    off_a: usize,
    len_a: usize,
    off_b: usize,
    len_b: usize,
) -> (&mut [T], &mut [T]) {
    assert!(off_a + len_a <= off_b, "blocks must be ordered and disjoint");
    let (head, tail) = buf.split_at_mut(off_b);
    (&mut head[off_a..off_a + len_a], &mut tail[..len_b])
}

#[derive(Clone, Debug)]
pub struct ConvTrace<T> {
    pub input: Vec<T>,
    pub preact: Vec<T>,
    pub in_ch: usize,
}

#[derive(Clone, Debug)]
pub struct BlockTrace<T> {
    pub convs: Vec<ConvTrace<T>>,
    pub pool_in: Vec<T>,
    pub pool_in_dims: (usize, usize, usize),
    pub pool_argmax: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct EncoderTape<T> {
    pub blocks: Vec<BlockTrace<T>>,
    pub flat: Vec<T>,
    pub fc1_pre: Vec<T>,
    pub fc1_post: Vec<T>,
    pub embedding: Vec<T>,
}
