//! Small sequential networks with hand-written reverse-mode gradients.
//!
//! Besides the ordinary forward/backward pair, every layer supports a *dual*
//! pass that propagates a tangent (a forward-mode directional derivative)
//! alongside the primal activations, and the reverse of that dual pass. This
//! is what the gradient penalties need: the gradient of `||J^T v||^2`-style
//! terms with respect to the weights is the reverse-mode gradient of a
//! forward-mode directional derivative.
//!
//! Weights are stored unscaled and multiplied by `1/sqrt(fan_in)` at run time
//! (equalized learning rate), so Adam steps have a comparable effect on every
//! layer.

mod kernels;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(len: usize) -> Self {
        Self::new(len, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// Per-pixel noise input, broadcast across channels with learned per-channel strength.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl NoiseMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn standard_normal(height: usize, width: usize, rng: &mut Rng) -> Self {
        Self {
            height,
            width,
            data: rng::normal_vec(rng, height * width),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense { input: usize, output: usize, offset: usize },
    Conv { input: Shape, output_channels: usize, kernel: usize, offset: usize },
    Upsample { input: Shape },
    AvgPool { input: Shape },
    Noise { shape: Shape, slot: usize, offset: usize },
    LeakyRelu { slope: f64 },
    Sigmoid,
}

impl Layer {
    fn param_count(&self) -> usize {
        match self {
            Layer::Dense { input, output, .. } => input * output + output,
            Layer::Conv { input, output_channels, kernel, .. } => {
                output_channels * input.channels * kernel * kernel + output_channels
            }
            Layer::Noise { shape, .. } => shape.channels,
            _ => 0,
        }
    }

    /// Weight slice, bias slice and equalized-lr gain of a parametric layer.
    fn weights<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        match *self {
            Layer::Dense { input, output, offset } => {
                let n = input * output;
                (
                    &params[offset..offset + n],
                    &params[offset + n..offset + n + output],
                    1.0 / (input as f64).sqrt(),
                )
            }
            Layer::Conv { input, output_channels, kernel, offset } => {
                let fan_in = input.channels * kernel * kernel;
                let n = output_channels * fan_in;
                (
                    &params[offset..offset + n],
                    &params[offset + n..offset + n + output_channels],
                    1.0 / (fan_in as f64).sqrt(),
                )
            }
            _ => unreachable!("layer has no weights"),
        }
    }
}

fn weight_grads<'a>(layer: &Layer, grads: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
    match *layer {
        Layer::Dense { input, output, offset } => {
            let n = input * output;
            grads[offset..offset + n + output].split_at_mut(n)
        }
        Layer::Conv { input, output_channels, kernel, offset } => {
            let n = output_channels * input.channels * kernel * kernel;
            grads[offset..offset + n + output_channels].split_at_mut(n)
        }
        _ => unreachable!("layer has no weights"),
    }
}

pub struct NetworkBuilder {
    input: Shape,
    current: Shape,
    layers: Vec<Layer>,
    params: usize,
    noise: Vec<(usize, usize)>,
}

impl NetworkBuilder {
    pub fn new(input: Shape) -> Self {
        Self {
            input,
            current: input,
            layers: Vec::new(),
            params: 0,
            noise: Vec::new(),
        }
    }

    fn push(mut self, layer: Layer, output: Shape) -> Self {
        self.params += layer.param_count();
        self.layers.push(layer);
        self.current = output;
        self
    }

    /// Fully connected layer; the output is reinterpreted as `output`.
    pub fn dense(self, output: Shape) -> Self {
        let layer = Layer::Dense {
            input: self.current.len(),
            output: output.len(),
            offset: self.params,
        };
        self.push(layer, output)
    }

    pub fn conv(self, output_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        let input = self.current;
        let layer = Layer::Conv {
            input,
            output_channels,
            kernel,
            offset: self.params,
        };
        self.push(layer, Shape::new(output_channels, input.height, input.width))
    }

    pub fn upsample(self) -> Self {
        let input = self.current;
        self.push(
            Layer::Upsample { input },
            Shape::new(input.channels, input.height * 2, input.width * 2),
        )
    }

    pub fn avg_pool(self) -> Self {
        let input = self.current;
        assert!(input.height % 2 == 0 && input.width % 2 == 0, "pooling needs even sides");
        self.push(
            Layer::AvgPool { input },
            Shape::new(input.channels, input.height / 2, input.width / 2),
        )
    }

    pub fn noise(mut self) -> Self {
        let shape = self.current;
        let slot = self.noise.len();
        self.noise.push((shape.height, shape.width));
        let layer = Layer::Noise {
            shape,
            slot,
            offset: self.params,
        };
        self.push(layer, shape)
    }

    pub fn leaky_relu(self, slope: f64) -> Self {
        let s = self.current;
        self.push(Layer::LeakyRelu { slope }, s)
    }

    pub fn sigmoid(self) -> Self {
        let s = self.current;
        self.push(Layer::Sigmoid, s)
    }

    pub fn build(self) -> Network {
        Network {
            input: self.input,
            output: self.current,
            shapes: {
                // activation shape after every layer, recomputed for the trace
                let mut shapes = vec![self.input];
                let mut cur = self.input;
                for l in &self.layers {
                    cur = match *l {
                        Layer::Dense { output, .. } => Shape::flat(output),
                        Layer::Conv { input, output_channels, .. } => {
                            Shape::new(output_channels, input.height, input.width)
                        }
                        Layer::Upsample { input } => {
                            Shape::new(input.channels, input.height * 2, input.width * 2)
                        }
                        Layer::AvgPool { input } => {
                            Shape::new(input.channels, input.height / 2, input.width / 2)
                        }
                        _ => cur,
                    };
                    shapes.push(cur);
                }
                shapes
            },
            layers: self.layers,
            noise: self.noise,
            params: vec![0.0; self.params],
        }
    }
}

/// Activations of every layer from one forward pass; `acts[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace holds the input at least")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.acts.pop().expect("trace holds the input at least")
    }
}

/// Primal and tangent activations of a dual forward pass.
#[derive(Clone, Debug)]
pub struct DualTrace {
    primal: Vec<Vec<f64>>,
    tangent: Vec<Vec<f64>>,
}

impl DualTrace {
    pub fn output(&self) -> &[f64] {
        self.primal.last().expect("non-empty")
    }

    pub fn tangent_output(&self) -> &[f64] {
        self.tangent.last().expect("non-empty")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input: Shape,
    output: Shape,
    shapes: Vec<Shape>,
    layers: Vec<Layer>,
    noise: Vec<(usize, usize)>,
    pub params: Vec<f64>,
}

fn noise_value(noise: Option<&[NoiseMap]>, slot: usize, p: usize) -> f64 {
    noise.map_or(0.0, |n| n[slot].data[p])
}

impl Network {
    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn output_len(&self) -> usize {
        self.output.len()
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// (height, width) of every noise input, in slot order.
    pub fn noise_shapes(&self) -> &[(usize, usize)] {
        &self.noise
    }

    pub fn zero_noise(&self) -> Vec<NoiseMap> {
        self.noise.iter().map(|&(h, w)| NoiseMap::zeros(h, w)).collect()
    }

    pub fn random_noise(&self, rng: &mut Rng) -> Vec<NoiseMap> {
        self.noise
            .iter()
            .map(|&(h, w)| NoiseMap::standard_normal(h, w, rng))
            .collect()
    }

    /// Standard-normal weights, zero biases, zero noise strengths.
    pub fn init(&mut self, rng: &mut Rng) {
        self.params.fill(0.0);
        for layer in self.layers.clone() {
            if let Layer::Dense { input, output, offset } = layer {
                rng::fill_normal(rng, &mut self.params[offset..offset + input * output]);
            }
            if let Layer::Conv { input, output_channels, kernel, offset } = layer {
                let n = output_channels * input.channels * kernel * kernel;
                rng::fill_normal(rng, &mut self.params[offset..offset + n]);
            }
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input.len(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn check_noise(&self, noise: &[NoiseMap]) -> Result<()> {
        if noise.len() != self.noise.len() {
            return Err(Error::ShapeMismatch {
                expected: self.noise.len(),
                actual: noise.len(),
            });
        }
        for (n, &(h, w)) in noise.iter().zip(&self.noise) {
            if n.height != h || n.width != w || n.data.len() != h * w {
                return Err(Error::ShapeMismatch {
                    expected: h * w,
                    actual: n.data.len(),
                });
            }
        }
        Ok(())
    }

    fn layer_forward(&self, i: usize, x: &[f64], noise: Option<&[NoiseMap]>) -> Vec<f64> {
        let layer = &self.layers[i];
        let mut y = vec![0.0; self.shapes[i + 1].len()];
        match *layer {
            Layer::Dense { .. } => {
                let (w, b, g) = layer.weights(&self.params);
                kernels::dense_forward(w, Some(b), g, x, &mut y);
            }
            Layer::Conv { input, output_channels, kernel, .. } => {
                let (w, b, g) = layer.weights(&self.params);
                kernels::conv_forward(w, Some(b), g, input, output_channels, kernel, x, &mut y);
            }
            Layer::Upsample { input } => kernels::upsample_forward(input, x, &mut y),
            Layer::AvgPool { input } => kernels::pool_forward(input, x, &mut y),
            Layer::Noise { shape, slot, offset } => {
                let plane = shape.plane();
                for c in 0..shape.channels {
                    let s = self.params[offset + c];
                    for p in 0..plane {
                        y[c * plane + p] = x[c * plane + p] + s * noise_value(noise, slot, p);
                    }
                }
            }
            Layer::LeakyRelu { slope } => {
                for (yi, &xi) in y.iter_mut().zip(x) {
                    *yi = if xi > 0.0 { xi } else { slope * xi };
                }
            }
            Layer::Sigmoid => {
                for (yi, &xi) in y.iter_mut().zip(x) {
                    *yi = sigmoid(xi);
                }
            }
        }
        y
    }

    /// Directional derivative of layer `i` at `x` along `dx`.
    fn layer_tangent(&self, i: usize, x: &[f64], y: &[f64], dx: &[f64]) -> Vec<f64> {
        let layer = &self.layers[i];
        let mut dy = vec![0.0; self.shapes[i + 1].len()];
        match *layer {
            Layer::Dense { .. } => {
                let (w, _, g) = layer.weights(&self.params);
                kernels::dense_forward(w, None, g, dx, &mut dy);
            }
            Layer::Conv { input, output_channels, kernel, .. } => {
                let (w, _, g) = layer.weights(&self.params);
                kernels::conv_forward(w, None, g, input, output_channels, kernel, dx, &mut dy);
            }
            Layer::Upsample { input } => kernels::upsample_forward(input, dx, &mut dy),
            Layer::AvgPool { input } => kernels::pool_forward(input, dx, &mut dy),
            Layer::Noise { .. } => dy.copy_from_slice(dx),
            Layer::LeakyRelu { slope } => {
                for ((d, &xi), &t) in dy.iter_mut().zip(x).zip(dx) {
                    *d = if xi > 0.0 { t } else { slope * t };
                }
            }
            Layer::Sigmoid => {
                for ((d, &s), &t) in dy.iter_mut().zip(y).zip(dx) {
                    *d = s * (1.0 - s) * t;
                }
            }
        }
        dy
    }

    /// Reverse of one layer; accumulates into `gx`, parameter and noise gradients.
    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        i: usize,
        x: &[f64],
        y: &[f64],
        gy: &[f64],
        gx: &mut [f64],
        noise: Option<&[NoiseMap]>,
        param_grad: Option<&mut [f64]>,
        noise_grad: Option<&mut [NoiseMap]>,
        with_bias: bool,
    ) {
        let layer = &self.layers[i];
        match *layer {
            Layer::Dense { .. } => {
                let (w, _, g) = layer.weights(&self.params);
                let grads = param_grad.map(|pg| {
                    let (gw, gb) = weight_grads(layer, pg);
                    (gw, with_bias.then_some(gb))
                });
                kernels::dense_backward(w, g, x, gy, gx, grads);
            }
            Layer::Conv { input, output_channels, kernel, .. } => {
                let (w, _, g) = layer.weights(&self.params);
                let grads = param_grad.map(|pg| {
                    let (gw, gb) = weight_grads(layer, pg);
                    (gw, with_bias.then_some(gb))
                });
                kernels::conv_backward(w, g, input, output_channels, kernel, x, gy, gx, grads);
            }
            Layer::Upsample { input } => kernels::upsample_backward(input, gy, gx),
            Layer::AvgPool { input } => kernels::pool_backward(input, gy, gx),
            Layer::Noise { shape, slot, offset } => {
                for (a, &b) in gx.iter_mut().zip(gy) {
                    *a += b;
                }
                let plane = shape.plane();
                if let Some(pg) = param_grad {
                    if with_bias {
                        for c in 0..shape.channels {
                            pg[offset + c] += (0..plane)
                                .map(|p| gy[c * plane + p] * noise_value(noise, slot, p))
                                .sum::<f64>();
                        }
                    }
                }
                if let Some(ng) = noise_grad {
                    let map = &mut ng[slot].data;
                    for c in 0..shape.channels {
                        let s = self.params[offset + c];
                        for p in 0..plane {
                            map[p] += s * gy[c * plane + p];
                        }
                    }
                }
            }
            Layer::LeakyRelu { slope } => {
                for ((a, &xi), &g) in gx.iter_mut().zip(x).zip(gy) {
                    *a += if xi > 0.0 { g } else { slope * g };
                }
            }
            Layer::Sigmoid => {
                for ((a, &s), &g) in gx.iter_mut().zip(y).zip(gy) {
                    *a += s * (1.0 - s) * g;
                }
            }
        }
    }

    pub fn forward(&self, input: &[f64], noise: Option<&[NoiseMap]>) -> Result<Trace> {
        self.check_input(input)?;
        if let Some(n) = noise {
            self.check_noise(n)?;
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for i in 0..self.layers.len() {
            let y = self.layer_forward(i, &acts[i], noise);
            acts.push(y);
        }
        Ok(Trace { acts })
    }

    pub fn output(&self, input: &[f64], noise: Option<&[NoiseMap]>) -> Result<Vec<f64>> {
        Ok(self.forward(input, noise)?.into_output())
    }

    /// Gradient of `<grad_out, output>` with respect to the input. Parameter and
    /// noise gradients are accumulated into the optional buffers.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        noise: Option<&[NoiseMap]>,
        mut param_grad: Option<&mut [f64]>,
        mut noise_grad: Option<&mut [NoiseMap]>,
    ) -> Vec<f64> {
        assert_eq!(grad_out.len(), self.output.len(), "gradient has the output's shape");
        let mut gy = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let mut gx = vec![0.0; self.shapes[i].len()];
            self.layer_backward(
                i,
                &trace.acts[i],
                &trace.acts[i + 1],
                &gy,
                &mut gx,
                noise,
                param_grad.as_deref_mut(),
                noise_grad.as_deref_mut(),
                true,
            );
            gy = gx;
        }
        gy
    }

    /// Forward pass carrying the directional derivative along `tangent`.
    /// Noise inputs are treated as constants.
    pub fn forward_dual(
        &self,
        input: &[f64],
        tangent: &[f64],
        noise: Option<&[NoiseMap]>,
    ) -> Result<DualTrace> {
        self.check_input(input)?;
        self.check_input(tangent)?;
        if let Some(n) = noise {
            self.check_noise(n)?;
        }
        let mut primal = Vec::with_capacity(self.layers.len() + 1);
        let mut tangents = Vec::with_capacity(self.layers.len() + 1);
        primal.push(input.to_vec());
        tangents.push(tangent.to_vec());
        for i in 0..self.layers.len() {
            let y = self.layer_forward(i, &primal[i], noise);
            let dy = self.layer_tangent(i, &primal[i], &y, &tangents[i]);
            primal.push(y);
            tangents.push(dy);
        }
        Ok(DualTrace {
            primal,
            tangent: tangents,
        })
    }

    /// Reverse of [`Network::forward_dual`]: given cotangents of the primal and
    /// tangent outputs, returns cotangents of the primal and tangent inputs and
    /// accumulates parameter gradients.
    pub fn backward_dual(
        &self,
        trace: &DualTrace,
        grad_out: &[f64],
        grad_tangent_out: &[f64],
        noise: Option<&[NoiseMap]>,
        mut param_grad: Option<&mut [f64]>,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut gy = grad_out.to_vec();
        let mut gdy = grad_tangent_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let n = self.shapes[i].len();
            let (x, y) = (&trace.primal[i], &trace.primal[i + 1]);
            let dx = &trace.tangent[i];
            let mut gx = vec![0.0; n];
            let mut gdx = vec![0.0; n];
            match self.layers[i] {
                Layer::LeakyRelu { .. } | Layer::Upsample { .. } | Layer::AvgPool { .. } => {
                    self.layer_backward(i, x, y, &gy, &mut gx, noise, None, None, false);
                    self.layer_backward(i, x, y, &gdy, &mut gdx, noise, None, None, false);
                }
                Layer::Sigmoid => {
                    for j in 0..n {
                        let s = y[j];
                        let d1 = s * (1.0 - s);
                        let d2 = d1 * (1.0 - 2.0 * s);
                        gx[j] = d1 * gy[j] + d2 * dx[j] * gdy[j];
                        gdx[j] = d1 * gdy[j];
                    }
                }
                Layer::Noise { .. } => {
                    self.layer_backward(i, x, y, &gy, &mut gx, noise, param_grad.as_deref_mut(), None, true);
                    gdx.copy_from_slice(&gdy);
                }
                Layer::Dense { .. } | Layer::Conv { .. } => {
                    self.layer_backward(i, x, y, &gy, &mut gx, noise, param_grad.as_deref_mut(), None, true);
                    self.layer_backward(i, dx, y, &gdy, &mut gdx, noise, param_grad.as_deref_mut(), None, false);
                }
            }
            gy = gx;
            gdy = gdx;
        }
        (gy, gdy)
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

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Central-difference gradient of `f` with respect to `params`.
    pub fn numeric_grad(params: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; params.len()];
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            let plus = f(params);
            params[i] = orig - h;
            let minus = f(params);
            params[i] = orig;
            out[i] = (plus - minus) / (2.0 * h);
        }
        out
    }

    pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn randomize(net: &mut Network, rng: &mut Rng, scale: f64) {
        for p in &mut net.params {
            *p = scale * rng::normal(rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn tiny_net() -> Network {
        NetworkBuilder::new(Shape::flat(3))
            .dense(Shape::new(2, 2, 2))
            .leaky_relu(0.2)
            .upsample()
            .conv(2, 3)
            .noise()
            .sigmoid()
            .avg_pool()
            .conv(1, 1)
            .build()
    }

    #[test]
    fn parameter_and_input_gradients_match_finite_differences() {
        let mut rng = rng::seeded(1);
        let mut net = tiny_net();
        randomize(&mut net, &mut rng, 0.8);
        let x = rng::normal_vec(&mut rng, 3);
        let noise = net.random_noise(&mut rng);
        let gout = rng::normal_vec(&mut rng, net.output_len());
        let objective = |n: &Network, x: &[f64], noise: &[NoiseMap]| -> f64 {
            let y = n.output(x, Some(noise)).unwrap();
            y.iter().zip(&gout).map(|(a, b)| a * b).sum()
        };

        let trace = net.forward(&x, Some(&noise)).unwrap();
        let mut pg = vec![0.0; net.param_count()];
        let mut ng = net.zero_noise();
        let gx = net.backward(&trace, &gout, Some(&noise), Some(&mut pg), Some(&mut ng));

        let mut params = net.params.clone();
        let mut probe = net.clone();
        let num_p = numeric_grad(&mut params, 1e-6, |p| {
            probe.params.copy_from_slice(p);
            objective(&probe, &x, &noise)
        });
        assert!(relative_error(&pg, &num_p) < 1e-6, "params");

        let mut xv = x.clone();
        let num_x = numeric_grad(&mut xv, 1e-6, |xx| objective(&net, xx, &noise));
        assert!(relative_error(&gx, &num_x) < 1e-6, "input");

        let mut flat: Vec<f64> = noise[0].data.clone();
        let num_n = numeric_grad(&mut flat, 1e-6, |d| {
            let mut n2 = noise.clone();
            n2[0].data.copy_from_slice(d);
            objective(&net, &x, &n2)
        });
        assert!(relative_error(&ng[0].data, &num_n) < 1e-6, "noise");
    }

    #[test]
    fn tangent_is_directional_derivative() {
        let mut rng = rng::seeded(2);
        let mut net = tiny_net();
        randomize(&mut net, &mut rng, 0.8);
        let x = rng::normal_vec(&mut rng, 3);
        let v = rng::normal_vec(&mut rng, 3);
        let dual = net.forward_dual(&x, &v, None).unwrap();
        let h = 1e-6;
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let yp = net.output(&plus, None).unwrap();
        let ym = net.output(&minus, None).unwrap();
        let fd: Vec<f64> = yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        assert!(relative_error(dual.tangent_output(), &fd) < 1e-6);
    }

    #[test]
    fn dual_backward_matches_finite_differences() {
        // objective: <a, y> + <b, dy> as a function of params, input and tangent
        let mut rng = rng::seeded(3);
        let mut net = tiny_net();
        randomize(&mut net, &mut rng, 0.8);
        let x = rng::normal_vec(&mut rng, 3);
        let v = rng::normal_vec(&mut rng, 3);
        let noise = net.random_noise(&mut rng);
        let a = rng::normal_vec(&mut rng, net.output_len());
        let b = rng::normal_vec(&mut rng, net.output_len());
        let obj = |n: &Network, x: &[f64], v: &[f64]| {
            let d = n.forward_dual(x, v, Some(&noise)).unwrap();
            d.output().iter().zip(&a).map(|(p, q)| p * q).sum::<f64>()
                + d.tangent_output().iter().zip(&b).map(|(p, q)| p * q).sum::<f64>()
        };
        let dual = net.forward_dual(&x, &v, Some(&noise)).unwrap();
        let mut pg = vec![0.0; net.param_count()];
        let (gx, gv) = net.backward_dual(&dual, &a, &b, Some(&noise), Some(&mut pg));

        let mut probe = net.clone();
        let mut params = net.params.clone();
        let num_p = numeric_grad(&mut params, 1e-6, |p| {
            probe.params.copy_from_slice(p);
            obj(&probe, &x, &v)
        });
        assert!(relative_error(&pg, &num_p) < 1e-6);
        let mut xv = x.clone();
        assert!(relative_error(&gx, &numeric_grad(&mut xv, 1e-6, |xx| obj(&net, xx, &v))) < 1e-6);
        let mut vv = v.clone();
        assert!(relative_error(&gv, &numeric_grad(&mut vv, 1e-6, |t| obj(&net, &x, t))) < 1e-6);
    }

    #[test]
    fn rejects_wrong_input_length() {
        let net = tiny_net();
        assert!(matches!(
            net.forward(&[0.0; 4], None),
            Err(Error::DimensionMismatch { expected: 3, actual: 4 })
        ));
    }
}
