//! SRCNN and VDSR architectures and whole-image inference.

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};
use crate::nn::conv::{backward_accumulate, conv2d_forward, Activation, ConvLayer, LayerGrads};
use crate::nn::tensor::Tensor;
use crate::rng::{seeded, Rng, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Srcnn,
    Vdsr,
}

impl Arch {
    pub fn code(self) -> u8 {
        match self {
            Arch::Srcnn => 0,
            Arch::Vdsr => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Arch::Srcnn),
            1 => Some(Arch::Vdsr),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Srcnn => "srcnn",
            Arch::Vdsr => "vdsr",
        }
    }

    /// `(out, in, f, activation)` for every layer.
    pub fn layer_shapes(self) -> Vec<(usize, usize, usize, Activation)> {
        match self {
            Arch::Srcnn => {
                vec![(64, 1, 9, Activation::ReLU), (32, 64, 1, Activation::ReLU), (1, 32, 5, Activation::Linear)]
            }
            Arch::Vdsr => {
                let mut v = vec![(64, 1, 3, Activation::ReLU)];
                v.extend(std::iter::repeat_n((64, 64, 3, Activation::ReLU), 18));
                v.push((1, 64, 3, Activation::Linear));
                v
            }
        }
    }

    pub fn residual(self) -> bool {
        matches!(self, Arch::Vdsr)
    }
}

/// An ordered stack of convolutions, optionally predicting a residual that is
/// added back onto its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<ConvLayer>,
    pub residual: bool,
}

impl Network {
    pub fn zeros(shapes: &[(usize, usize, usize, Activation)], residual: bool) -> Self {
        Self { layers: shapes.iter().map(|&(o, i, f, a)| ConvLayer::zeros(o, i, f, a)).collect(), residual }
    }

    /// Zero biases; weights uniform with variance `2 / fan_in`.
    pub fn random(shapes: &[(usize, usize, usize, Activation)], residual: bool, rng: &mut SeededRng) -> Self {
        let mut net = Self::zeros(shapes, residual);
        for layer in &mut net.layers {
            // A uniform on [-s, s] has variance s^2 / 3.
            let s = (3.0 * 2.0 / layer.fan_in() as f64).sqrt();
            layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-s..s));
        }
        net
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::param_count).sum()
    }

    pub fn validate_chain(&self) -> Result<()> {
        let first = self.layers.first().ok_or_else(|| Error::Validation("network has no layers".into()))?;
        if first.in_channels != 1 || self.layers.last().map(|l| l.out_channels) != Some(1) {
            return Err(Error::Validation("network must map 1 channel to 1 channel".into()));
        }
        for l in &self.layers {
            l.validate()?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::Validation("adjacent layer channel counts disagree".into()));
            }
        }
        Ok(())
    }

    /// Network prediction; for residual networks this is `input + residual`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = conv2d_forward(&x, layer)?;
        }
        if self.residual {
            x.data_mut().iter_mut().zip(input.data()).for_each(|(o, i)| *o += i);
        }
        Ok(x)
    }

    /// Raw output of the last layer together with every intermediate activation
    /// (`acts[0]` is the input, `acts[l + 1]` is the output of layer `l`).
    pub(crate) fn forward_cached(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for layer in &self.layers {
            let next = conv2d_forward(acts.last().expect("non-empty"), layer)?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Backpropagates `grad_top` (gradient with respect to the last layer's
    /// raw output) and accumulates parameter gradients into `grads`.
    pub(crate) fn backward(&self, acts: &[Tensor], grad_top: Tensor, grads: &mut [LayerGrads]) -> Result<()> {
        let mut g = grad_top;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let gi = backward_accumulate(&acts[l], layer, &acts[l + 1], &g, &mut grads[l], l > 0)?;
            if let Some(gi) = gi {
                g = gi;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers.iter().map(LayerGrads::zeros_like).collect()
    }
}

/// A super-resolution network tied to one of the supported architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct SrModel {
    pub arch: Arch,
    pub net: Network,
}

impl SrModel {
    pub fn new(arch: Arch, net: Network) -> Result<Self> {
        let model = Self { arch, net };
        model.validate()?;
        Ok(model)
    }

    pub fn zeros(arch: Arch) -> Self {
        Self { arch, net: Network::zeros(&arch.layer_shapes(), arch.residual()) }
    }

    pub fn random(arch: Arch, seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self { arch, net: Network::random(&arch.layer_shapes(), arch.residual(), &mut rng) }
    }

    pub fn residual(&self) -> bool {
        self.net.residual
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.net.layers
    }

    /// Checks the layer stack against the architecture's fixed shapes.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.arch.layer_shapes();
        if self.net.residual != self.arch.residual() {
            return Err(Error::Validation(format!("{} requires residual={}", self.arch.name(), self.arch.residual())));
        }
        if self.net.layers.len() != shapes.len() {
            return Err(Error::Validation(format!(
                "{} has {} layers, found {}",
                self.arch.name(),
                shapes.len(),
                self.net.layers.len()
            )));
        }
        for (idx, (layer, &(o, i, f, a))) in self.net.layers.iter().zip(&shapes).enumerate() {
            if (layer.out_channels, layer.in_channels, layer.kernel_size, layer.activation) != (o, i, f, a) {
                return Err(Error::Validation(format!(
                    "{} layer {idx} must be {i}->{o} f={f} {a:?}, found {}->{} f={} {:?}",
                    self.arch.name(),
                    layer.in_channels,
                    layer.out_channels,
                    layer.kernel_size,
                    layer.activation
                )));
            }
        }
        self.net.validate_chain()
    }
}

pub fn image_to_tensor(img: &GrayImage) -> Tensor {
    let data = img.pixels().iter().map(|&v| v as f64 / 255.0).collect();
    Tensor::from_raw(1, img.height(), img.width(), data)
}

pub fn tensor_to_image(t: &Tensor) -> GrayImage {
    GrayImage::new(t.width(), t.height(), t.plane(0).iter().map(|&v| quantize(v * 255.0)).collect())
        .expect("tensor dimensions are positive")
}

/// Runs a network over a whole (already upscaled) image.
pub fn forward_network(net: &Network, img: &GrayImage) -> Result<GrayImage> {
    let out = net.forward(&image_to_tensor(img))?;
    Ok(tensor_to_image(&out))
}

/// Super-resolves an image that has already been upscaled to the target size.
pub fn forward_sr(model: &SrModel, lr_upscaled: &GrayImage) -> Result<GrayImage> {
    forward_network(&model.net, lr_upscaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 29 + y * 53) % 256) as u8).unwrap()
    }

    #[test]
    fn architecture_shapes() {
        let s = SrModel::zeros(Arch::Srcnn);
        assert_eq!(s.layers().len(), 3);
        assert!(!s.residual());
        assert_eq!(s.layers()[0].kernel_size, 9);
        assert_eq!(s.layers()[2].kernel_size, 5);
        s.validate().unwrap();
        let v = SrModel::zeros(Arch::Vdsr);
        assert_eq!(v.layers().len(), 20);
        assert!(v.residual());
        assert!(v.layers()[..19].iter().all(|l| l.activation == Activation::ReLU));
        assert_eq!(v.layers()[19].activation, Activation::Linear);
        v.validate().unwrap();
    }

    #[test]
    fn validation_rejects_wrong_shapes() {
        let mut m = SrModel::zeros(Arch::Srcnn);
        m.net.layers[1] = ConvLayer::zeros(32, 64, 3, Activation::ReLU);
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
        let mut m = SrModel::zeros(Arch::Vdsr);
        m.net.residual = false;
        assert!(m.validate().is_err());
        let mut m = SrModel::zeros(Arch::Vdsr);
        m.net.layers.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn zero_vdsr_is_identity() {
        let img = test_image(23, 17);
        assert_eq!(forward_sr(&SrModel::zeros(Arch::Vdsr), &img).unwrap(), img);
    }

    #[test]
    fn srcnn_passthrough_construction() {
        // Unit centre tap on channel 0 through every stage; inputs are
        // non-negative so the ReLUs pass them unchanged.
        let mut m = SrModel::zeros(Arch::Srcnn);
        let l0 = &mut m.net.layers[0];
        let idx = l0.weight_index(0, 0, 4, 4);
        l0.weights[idx] = 1.0;
        let l1 = &mut m.net.layers[1];
        let idx = l1.weight_index(0, 0, 0, 0);
        l1.weights[idx] = 1.0;
        let l2 = &mut m.net.layers[2];
        let idx = l2.weight_index(0, 0, 2, 2);
        l2.weights[idx] = 1.0;
        let img = test_image(20, 14);
        assert_eq!(forward_sr(&m, &img).unwrap(), img);
    }

    #[test]
    fn output_keeps_dimensions() {
        for (arch, seed) in [(Arch::Srcnn, 1), (Arch::Vdsr, 2)] {
            let img = test_image(13, 9);
            let out = forward_sr(&SrModel::random(arch, seed), &img).unwrap();
            assert_eq!(out.dimensions(), img.dimensions());
        }
    }

    #[test]
    fn random_init_statistics() {
        let m = SrModel::random(Arch::Srcnn, 7);
        let w = &m.layers()[1].weights;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 2.0 / 64.0).abs() < 0.1 * 2.0 / 64.0);
        assert!(m.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(SrModel::random(Arch::Srcnn, 7), m);
    }
}
