use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Conv2d, Dense, KERNEL};
use super::{Activation, NetError, Tensor};
use crate::env::{Observation, Policy};

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const ACTOR_GAIN: f64 = 0.01;
const CRITIC_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Network layout.
///
/// The input is an optional channels-first image followed by a plain vector.
/// The image goes through the convolutions; their flattened output is joined
/// with the vector and fed to the dense hidden layers. Every trunk layer uses
/// `activation`; both heads are linear and read the last trunk output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetSpec {
    pub image: Option<ImageShape>,
    pub vector_inputs: usize,
    pub conv_channels: Vec<usize>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub action_count: usize,
}

/// One layer of an expanded [`NetSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
    },
}

impl NetSpec {
    /// 12 inputs, three shared tanh layers of 32, 32 actions.
    pub fn card_game() -> Self {
        Self {
            image: None,
            vector_inputs: crate::card_game::OBSERVATION_SIZE,
            conv_channels: vec![],
            hidden: vec![32, 32, 32],
            activation: Activation::Tanh,
            action_count: crate::card_game::ACTION_COUNT,
        }
    }

    /// 20x7x7 view through three ReLU convolutions, joined with the
    /// inventory, then two ReLU dense layers of 64; 4 actions.
    pub fn grid_world() -> Self {
        use crate::grid_world::{ACTION_COUNT, CHANNELS, ITEM_KINDS, VIEW_SIZE};
        Self {
            image: Some(ImageShape {
                channels: CHANNELS,
                height: VIEW_SIZE,
                width: VIEW_SIZE,
            }),
            vector_inputs: ITEM_KINDS,
            conv_channels: vec![16, 32, 64],
            hidden: vec![64, 64],
            activation: Activation::Relu,
            action_count: ACTION_COUNT,
        }
    }

    pub fn input_size(&self) -> usize {
        self.image.map_or(0, |i| i.len()) + self.vector_inputs
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let fail = |msg: &str| Err(NetError::InvalidSpec(msg.to_string()));
        if self.action_count == 0 {
            return fail("action_count must be positive");
        }
        if self.input_size() == 0 {
            return fail("network has no inputs");
        }
        match self.image {
            None if !self.conv_channels.is_empty() => {
                return fail("convolutions need an image input")
            }
            Some(img) if img.is_empty() => return fail("image has a zero extent"),
            Some(img) if img.height < 1 + self.conv_channels.len() || img.width < 1 + self.conv_channels.len() => {
                return fail("image too small for the number of 2x2 convolutions")
            }
            _ => {}
        }
        if self.conv_channels.iter().chain(&self.hidden).any(|&n| n == 0) {
            return fail("layer widths must be positive");
        }
        Ok(())
    }

    /// Trunk layers in evaluation order, then the actor and critic heads.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        let mut channels = self.image.map_or(0, |i| i.channels);
        for &c in &self.conv_channels {
            out.push(LayerSpec::Conv2d {
                in_channels: channels,
                out_channels: c,
                activation: self.activation,
            });
            channels = c;
        }
        let mut width = self.trunk_join_width();
        for &h in &self.hidden {
            out.push(LayerSpec::Dense {
                inputs: width,
                outputs: h,
                activation: self.activation,
            });
            width = h;
        }
        out.push(LayerSpec::Dense {
            inputs: width,
            outputs: self.action_count,
            activation: Activation::Identity,
        });
        out.push(LayerSpec::Dense {
            inputs: width,
            outputs: 1,
            activation: Activation::Identity,
        });
        out
    }

    /// Width of the vector entering the first dense layer.
    fn trunk_join_width(&self) -> usize {
        let conv_flat = match self.image {
            Some(img) if !self.conv_channels.is_empty() => {
                let shrink = self.conv_channels.len() * (KERNEL - 1);
                self.conv_channels.last().unwrap() * (img.height - shrink) * (img.width - shrink)
            }
            Some(img) => img.len(),
            None => 0,
        };
        conv_flat + self.vector_inputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Activations recorded by [`ActorCritic::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    conv_outputs: Vec<Tensor>,
    dense_input: Vec<f64>,
    hidden_outputs: Vec<Tensor>,
    output: NetOutput,
}

impl ForwardCache {
    pub fn output(&self) -> &NetOutput {
        &self.output
    }

    /// Output of the last shared layer, read by both heads.
    pub fn features(&self) -> &[f64] {
        self.hidden_outputs
            .last()
            .map_or(&self.dense_input, |t| t.data())
    }
}

/// Gradient vector laid out like [`ActorCritic::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn reset(&mut self) {
        self.0.fill(0.0);
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.0 {
            *g *= factor;
        }
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

/// Shared-trunk policy/value network.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    spec: NetSpec,
    params: Vec<f64>,
    convs: Vec<Conv2d>,
    hidden: Vec<Dense>,
    actor: Dense,
    critic: Dense,
}

impl ActorCritic {
    /// All parameters zero.
    pub fn zeros(spec: NetSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let mut offset = 0;
        let mut convs = Vec::new();
        let (mut h, mut w) = spec.image.map_or((0, 0), |i| (i.height, i.width));
        let mut channels = spec.image.map_or(0, |i| i.channels);
        for &c in &spec.conv_channels {
            let layer = Conv2d {
                in_channels: channels,
                out_channels: c,
                in_height: h,
                in_width: w,
                activation: spec.activation,
                offset,
            };
            offset += layer.parameter_count();
            h = layer.out_height();
            w = layer.out_width();
            channels = c;
            convs.push(layer);
        }
        let mut width = spec.trunk_join_width();
        let mut hidden = Vec::new();
        for &n in &spec.hidden {
            let layer = Dense {
                inputs: width,
                outputs: n,
                activation: spec.activation,
                offset,
            };
            offset += layer.parameter_count();
            width = n;
            hidden.push(layer);
        }
        let actor = Dense {
            inputs: width,
            outputs: spec.action_count,
            activation: Activation::Identity,
            offset,
        };
        offset += actor.parameter_count();
        let critic = Dense {
            inputs: width,
            outputs: 1,
            activation: Activation::Identity,
            offset,
        };
        offset += critic.parameter_count();
        Ok(Self {
            spec,
            params: vec![0.0; offset],
            convs,
            hidden,
            actor,
            critic,
        })
    }

    /// Scaled-uniform weights (std = gain / sqrt(fan_in)), zero biases.
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self, NetError> {
        let mut net = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks: Vec<(usize, usize, usize, f64)> = Vec::new();
        for c in &net.convs {
            let fan_in = c.in_channels * KERNEL * KERNEL;
            blocks.push((c.offset, c.parameter_count() - c.out_channels, fan_in, HIDDEN_GAIN));
        }
        for d in &net.hidden {
            blocks.push((d.offset, d.inputs * d.outputs, d.inputs, HIDDEN_GAIN));
        }
        let (a, c) = (net.actor, net.critic);
        blocks.push((a.offset, a.inputs * a.outputs, a.inputs, ACTOR_GAIN));
        blocks.push((c.offset, c.inputs * c.outputs, c.inputs, CRITIC_GAIN));
        for (offset, count, fan_in, gain) in blocks {
            let bound = gain * (3.0 / fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + count] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn from_params(spec: NetSpec, params: Vec<f64>) -> Result<Self, NetError> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(NetError::ShapeMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros(self.params.len())
    }

    pub fn forward(&self, input: &[f64]) -> Result<NetOutput, NetError> {
        self.forward_cached(input).map(|cache| cache.output)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, NetError> {
        let expected = self.spec.input_size();
        if input.len() != expected {
            return Err(NetError::ShapeMismatch {
                expected,
                got: input.len(),
            });
        }
        let image_len = self.spec.image.map_or(0, |i| i.len());
        let (image, vector) = input.split_at(image_len);

        let mut conv_outputs = Vec::with_capacity(self.convs.len());
        let mut x: &[f64] = image;
        for conv in &self.convs {
            let out = conv.forward(&self.params, x);
            conv_outputs.push(Tensor {
                shape: vec![conv.out_channels, conv.out_height(), conv.out_width()],
                data: out,
            });
            x = conv_outputs.last().unwrap().data();
        }
        let mut dense_input = Vec::with_capacity(x.len() + vector.len());
        dense_input.extend_from_slice(x);
        dense_input.extend_from_slice(vector);

        let mut hidden_outputs: Vec<Tensor> = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let h_in = hidden_outputs.last().map_or(&dense_input[..], |t| t.data());
            let out = layer.forward(&self.params, h_in);
            hidden_outputs.push(Tensor {
                shape: vec![layer.outputs],
                data: out,
            });
        }
        let features = hidden_outputs.last().map_or(&dense_input[..], |t| t.data());
        let logits = self.actor.forward(&self.params, features);
        let value = self.critic.forward(&self.params, features)[0];
        Ok(ForwardCache {
            input: input.to_vec(),
            conv_outputs,
            dense_input,
            hidden_outputs,
            output: NetOutput { logits, value },
        })
    }

    /// Accumulates into `grads` the gradient of `sum_j g_j * logit_j + g_v * value`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grad_value: f64,
        grads: &mut Gradients,
    ) -> Result<(), NetError> {
        if grad_logits.len() != self.spec.action_count {
            return Err(NetError::GradientShape {
                expected: self.spec.action_count,
                got: grad_logits.len(),
            });
        }
        if grads.0.len() != self.params.len() {
            return Err(NetError::ShapeMismatch {
                expected: self.params.len(),
                got: grads.0.len(),
            });
        }
        let g = &mut grads.0;
        let p = &self.params;
        let features = cache.features();
        let need_trunk = !self.hidden.is_empty() || !self.convs.is_empty();

        let mut d = self
            .actor
            .backward(p, features, &cache.output.logits, grad_logits, g, need_trunk)
            .unwrap_or_default();
        if let Some(dc) = self.critic.backward(
            p,
            features,
            &[cache.output.value],
            &[grad_value],
            g,
            need_trunk,
        ) {
            for (a, b) in d.iter_mut().zip(dc) {
                *a += b;
            }
        }
        if !need_trunk {
            return Ok(());
        }

        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let layer_in = if i == 0 {
                &cache.dense_input[..]
            } else {
                cache.hidden_outputs[i - 1].data()
            };
            let out = cache.hidden_outputs[i].data();
            let want = i > 0 || !self.convs.is_empty();
            match layer.backward(p, layer_in, out, &d, g, want) {
                Some(next) => d = next,
                None => return Ok(()),
            }
        }

        // only the convolution part of the joined vector flows further back
        let conv_flat = cache.conv_outputs.last().map_or(0, |t| t.len());
        d.truncate(conv_flat);
        let image_len = self.spec.image.map_or(0, |i| i.len());
        for (i, conv) in self.convs.iter().enumerate().rev() {
            let layer_in = if i == 0 {
                &cache.input[..image_len]
            } else {
                cache.conv_outputs[i - 1].data()
            };
            let out = cache.conv_outputs[i].data();
            match conv.backward(p, layer_in, out, &d, g, i > 0) {
                Some(next) => d = next,
                None => break,
            }
        }
        Ok(())
    }
}

impl Policy for ActorCritic {
    fn action_logits(&self, observation: &Observation) -> Vec<f64> {
        self.forward(observation.values())
            .expect("observation size matches the network input")
            .logits
    }
}
