//! Dense and 2x2 convolution layers over a flat parameter vector.
//!
//! A layer only stores its geometry and the offset of its parameters; weights
//! live in the owning network's parameter vector. Backward passes take the
//! post-activation output from the forward pass and accumulate into a
//! gradient vector with the same layout as the parameters.

use super::Activation;

pub const KERNEL: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub offset: usize,
}

impl Dense {
    pub fn parameter_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    /// Row-major `[outputs][inputs]` weights followed by `outputs` biases.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.inputs);
        let weights = &params[self.offset..self.bias_offset()];
        let bias = &params[self.bias_offset()..self.bias_offset() + self.outputs];
        weights
            .chunks_exact(self.inputs)
            .zip(bias)
            .map(|(row, b)| {
                let pre = b + dot(row, input);
                self.activation.apply(pre)
            })
            .collect()
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        output: &[f64],
        grad_output: &[f64],
        grads: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let pre: Vec<f64> = output
            .iter()
            .zip(grad_output)
            .map(|(&y, &g)| g * self.activation.derivative_at_output(y))
            .collect();
        let bias_offset = self.bias_offset();
        {
            let (weight_grads, bias_grads) = grads[self.offset..bias_offset + self.outputs]
                .split_at_mut(self.inputs * self.outputs);
            for ((row, bg), &d) in weight_grads
                .chunks_exact_mut(self.inputs)
                .zip(bias_grads.iter_mut())
                .zip(&pre)
            {
                if d == 0.0 {
                    continue;
                }
                *bg += d;
                axpy(d, input, row);
            }
        }
        want_input_grad.then(|| {
            let weights = &params[self.offset..bias_offset];
            let mut grad_input = vec![0.0; self.inputs];
            for (row, &d) in weights.chunks_exact(self.inputs).zip(&pre) {
                if d == 0.0 {
                    continue;
                }
                axpy(d, row, &mut grad_input);
            }
            grad_input
        })
    }
}

/// 2x2 kernel, stride 1, no padding, channels-first `[channels][height][width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub activation: Activation,
    pub offset: usize,
}

impl Conv2d {
    pub fn out_height(&self) -> usize {
        self.in_height + 1 - KERNEL
    }

    pub fn out_width(&self) -> usize {
        self.in_width + 1 - KERNEL
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * KERNEL * KERNEL
    }

    pub fn parameter_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    /// Unrolls the input into one row of `in_channels * 4` values per output
    /// position, ordered like a weight row: `[in][ky][kx]`.
    fn patches(&self, input: &[f64]) -> Vec<f64> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let (w, plane) = (self.in_width, self.in_height * self.in_width);
        let row_len = self.in_channels * KERNEL * KERNEL;
        let mut out = vec![0.0; oh * ow * row_len];
        for y in 0..oh {
            for x in 0..ow {
                let row = &mut out[(y * ow + x) * row_len..][..row_len];
                for (ci, k) in row.chunks_exact_mut(4).enumerate() {
                    let at = ci * plane + y * w + x;
                    k[0] = input[at];
                    k[1] = input[at + 1];
                    k[2] = input[at + w];
                    k[3] = input[at + w + 1];
                }
            }
        }
        out
    }

    /// Weights `[out][in][ky][kx]` followed by `out` biases.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.input_len());
        let positions = self.out_height() * self.out_width();
        let row_len = self.in_channels * KERNEL * KERNEL;
        let weights = &params[self.offset..self.offset + self.weight_count()];
        let bias = &params[self.offset + self.weight_count()..][..self.out_channels];
        let patches = self.patches(input);
        let mut out = Vec::with_capacity(self.output_len());
        for (w_row, &b) in weights.chunks_exact(row_len).zip(bias) {
            out.extend(
                patches
                    .chunks_exact(row_len)
                    .take(positions)
                    .map(|patch| self.activation.apply(b + dot(w_row, patch))),
            );
        }
        out
    }

    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        output: &[f64],
        grad_output: &[f64],
        grads: &mut [f64],
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let positions = oh * ow;
        let row_len = self.in_channels * KERNEL * KERNEL;
        let pre: Vec<f64> = output
            .iter()
            .zip(grad_output)
            .map(|(&y, &g)| g * self.activation.derivative_at_output(y))
            .collect();
        let weights = &params[self.offset..self.offset + self.weight_count()];
        let patches = self.patches(input);
        let mut grad_patches = want_input_grad.then(|| vec![0.0; patches.len()]);
        let (weight_grads, bias_grads) =
            grads[self.offset..self.offset + self.parameter_count()].split_at_mut(self.weight_count());
        for (co, d_plane) in pre.chunks_exact(positions).enumerate() {
            bias_grads[co] += d_plane.iter().sum::<f64>();
            let w_row = &weights[co * row_len..][..row_len];
            let g_row = &mut weight_grads[co * row_len..][..row_len];
            for (pos, &d) in d_plane.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, &patches[pos * row_len..][..row_len], g_row);
                if let Some(gp) = grad_patches.as_mut() {
                    axpy(d, w_row, &mut gp[pos * row_len..][..row_len]);
                }
            }
        }
        grad_patches.map(|gp| {
            let (w, plane) = (self.in_width, self.in_height * self.in_width);
            let mut grad_input = vec![0.0; self.input_len()];
            for y in 0..oh {
                for x in 0..ow {
                    let row = &gp[(y * ow + x) * row_len..][..row_len];
                    for (ci, k) in row.chunks_exact(4).enumerate() {
                        let at = ci * plane + y * w + x;
                        grad_input[at] += k[0];
                        grad_input[at + 1] += k[1];
                        grad_input[at + w] += k[2];
                        grad_input[at + w + 1] += k[3];
                    }
                }
            }
            grad_input
        })
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (a4, b4) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = a4.remainder().iter().zip(b4.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in a4.zip(b4) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_hand_computed() {
        let layer = Dense {
            inputs: 2,
            outputs: 2,
            activation: Activation::Identity,
            offset: 0,
        };
        // W = [[1, 2], [3, 4]], b = [0.5, -1]
        let params = [1.0, 2.0, 3.0, 4.0, 0.5, -1.0];
        let out = layer.forward(&params, &[1.0, -2.0]);
        assert_eq!(out, vec![1.0 - 4.0 + 0.5, 3.0 - 8.0 - 1.0]);
    }

    #[test]
    fn dense_weight_gradient_is_outer_product() {
        let layer = Dense {
            inputs: 3,
            outputs: 2,
            activation: Activation::Identity,
            offset: 0,
        };
        let params = vec![0.1; layer.parameter_count()];
        let input = [1.0, 2.0, -3.0];
        let out = layer.forward(&params, &input);
        let upstream = [0.5, -2.0];
        let mut grads = vec![0.0; layer.parameter_count()];
        let gi = layer
            .backward(&params, &input, &out, &upstream, &mut grads, true)
            .unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(grads[o * 3 + i], upstream[o] * input[i]);
            }
        }
        assert_eq!(&grads[6..], &upstream);
        assert_eq!(gi, vec![0.1 * -1.5; 3]);
    }

    #[test]
    fn conv_hand_computed() {
        let layer = Conv2d {
            in_channels: 1,
            out_channels: 1,
            in_height: 2,
            in_width: 3,
            activation: Activation::Identity,
            offset: 0,
        };
        // kernel [[1, 0], [0, -1]], bias 0.25
        let params = [1.0, 0.0, 0.0, -1.0, 0.25];
        let input = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(layer.forward(&params, &input), vec![1.0 - 5.0 + 0.25, 2.0 - 6.0 + 0.25]);
    }

    #[test]
    fn relu_blocks_gradient_of_inactive_units() {
        let layer = Dense {
            inputs: 1,
            outputs: 2,
            activation: Activation::Relu,
            offset: 0,
        };
        let params = [1.0, -1.0, 0.0, 0.0];
        let out = layer.forward(&params, &[2.0]);
        assert_eq!(out, vec![2.0, 0.0]);
        let mut grads = vec![0.0; 4];
        layer.backward(&params, &[2.0], &out, &[1.0, 1.0], &mut grads, false);
        assert_eq!(grads, vec![2.0, 0.0, 1.0, 0.0]);
    }
}
