//! Patch sampling, SGD with momentum, and the training loop.

use crate::error::{invalid, Error, Result};
use crate::image::GrayImage;
use crate::nn::conv::LayerGrads;
use crate::nn::model::{Arch, Network, SrModel};
use crate::nn::tensor::Tensor;
use crate::rng::{seeded, Rng, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Optimizer steps per epoch.
    pub steps_per_epoch: usize,
    pub patch_size: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub base_lr: f64,
    pub per_layer_lr_scale: Vec<f64>,
    pub lr_decay_factor: f64,
    /// Epochs between decays.
    pub lr_decay_every: usize,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    /// 100 epochs on 41x41 patches, lr 0.1 divided by 10 every 10 epochs,
    /// momentum 0.9, element-wise gradient clipping at 0.4.
    pub fn vdsr() -> Self {
        Self {
            epochs: 100,
            steps_per_epoch: 20,
            patch_size: 41,
            batch_size: 16,
            momentum: 0.9,
            base_lr: 0.1,
            per_layer_lr_scale: vec![1.0; 20],
            lr_decay_factor: 0.1,
            lr_decay_every: 10,
            grad_clip: Some(0.4),
            seed: 0,
        }
    }

    /// Constant lr of 1e-4 on the first two layers and 1e-5 on the last.
    pub fn srcnn() -> Self {
        Self {
            epochs: 10,
            steps_per_epoch: 20,
            patch_size: 33,
            batch_size: 16,
            momentum: 0.9,
            base_lr: 1e-4,
            per_layer_lr_scale: vec![1.0, 1.0, 0.1],
            lr_decay_factor: 1.0,
            lr_decay_every: 1,
            grad_clip: None,
            seed: 0,
        }
    }

    pub fn preset(arch: Arch) -> Self {
        match arch {
            Arch::Srcnn => Self::srcnn(),
            Arch::Vdsr => Self::vdsr(),
        }
    }

    /// Learning rate multiplier shared by every layer at `epoch` (0-based).
    pub fn schedule(&self, epoch: usize) -> f64 {
        self.base_lr * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }

    pub fn layer_rates(&self, epoch: usize) -> Vec<f64> {
        let s = self.schedule(epoch);
        self.per_layer_lr_scale.iter().map(|k| k * s).collect()
    }

    pub fn validate(&self, layer_count: usize) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch_size == 0 || self.patch_size == 0 {
            return Err(invalid("epochs, steps per epoch, batch size and patch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.base_lr > 0.0) {
            return Err(invalid("base learning rate must be positive"));
        }
        if self.per_layer_lr_scale.len() != layer_count || self.per_layer_lr_scale.iter().any(|&s| !(s > 0.0)) {
            return Err(invalid(format!("expected {layer_count} positive per-layer lr scales")));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) || self.lr_decay_every == 0 {
            return Err(invalid("lr decay factor must lie in (0, 1] with a positive period"));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(invalid("gradient clip must be positive"));
        }
        Ok(())
    }
}

/// Optimizer state. `velocities` mirrors the model's parameters one to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: SrModel,
    pub velocities: Vec<LayerGrads>,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: SeededRng,
    /// `(epoch, mean minibatch loss)` per completed epoch, epochs counted from 1.
    pub loss_history: Vec<(usize, f64)>,
    /// Loss of every optimizer step in order.
    pub step_losses: Vec<f64>,
}

impl TrainState {
    pub fn new(model: SrModel, seed: u64) -> Self {
        let velocities = model.net.zero_grads();
        Self { model, velocities, epoch: 0, rng: seeded(seed), loss_history: Vec::new(), step_losses: Vec::new() }
    }
}

/// One SGD-with-momentum update: optional element-wise clip of the gradient
/// to `[-clip, clip]`, then `v <- momentum * v - lr * g` and `w <- w + v`.
pub fn sgdm_update(
    net: &mut Network,
    velocities: &mut [LayerGrads],
    grads: &[LayerGrads],
    lr_per_layer: &[f64],
    momentum: f64,
    grad_clip: Option<f64>,
) -> Result<()> {
    if grads.len() != net.layers.len() || velocities.len() != net.layers.len() || lr_per_layer.len() != net.layers.len()
    {
        return Err(Error::Shape("gradient, velocity and lr lists must match the layer count".into()));
    }
    for (((layer, vel), g), &lr) in net.layers.iter_mut().zip(velocities.iter_mut()).zip(grads).zip(lr_per_layer) {
        if g.weights.len() != layer.weights.len() || g.biases.len() != layer.biases.len() {
            return Err(Error::Shape("gradient shape does not mirror the layer".into()));
        }
        let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
        let vs = vel.weights.iter_mut().chain(vel.biases.iter_mut());
        let gs = g.weights.iter().chain(&g.biases);
        for ((w, v), &g) in params.zip(vs).zip(gs) {
            let g = match grad_clip {
                Some(c) => g.clamp(-c, c),
                None => g,
            };
            *v = momentum * *v - lr * g;
            *w += *v;
        }
    }
    Ok(())
}

pub fn sgdm_step(
    state: &mut TrainState,
    grads: &[LayerGrads],
    lr_per_layer: &[f64],
    momentum: f64,
    grad_clip: Option<f64>,
) -> Result<()> {
    sgdm_update(&mut state.model.net, &mut state.velocities, grads, lr_per_layer, momentum, grad_clip)
}

/// Where training patches come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchSampling {
    /// `count` patches at uniformly random offsets.
    Random { count: usize },
    /// Every offset on a regular grid with the given stride.
    Grid { stride: usize },
}

/// Default grid strides: 14 for SRCNN, non-overlapping 41 for VDSR.
pub fn default_stride(arch: Arch) -> usize {
    match arch {
        Arch::Srcnn => 14,
        Arch::Vdsr => 41,
    }
}

fn crop_tensor(img: &GrayImage, x0: usize, y0: usize, size: usize) -> Tensor {
    let mut data = Vec::with_capacity(size * size);
    for y in y0..y0 + size {
        data.extend(img.row(y)[x0..x0 + size].iter().map(|&v| v as f64 / 255.0));
    }
    Tensor::from_raw(1, size, size, data)
}

/// Aligned `(input, target)` patch pairs scaled to `[0, 1]`. Residual targets
/// are `hr - lr_upscaled`.
pub fn extract_patches(
    lr_upscaled: &GrayImage,
    hr: &GrayImage,
    patch_size: usize,
    sampling: PatchSampling,
    rng: &mut SeededRng,
    residual: bool,
) -> Result<Vec<(Tensor, Tensor)>> {
    if lr_upscaled.dimensions() != hr.dimensions() {
        return Err(Error::Shape("low- and high-resolution images must have equal dimensions".into()));
    }
    let (w, h) = hr.dimensions();
    if patch_size == 0 || patch_size > w || patch_size > h {
        return Err(invalid(format!("patch size {patch_size} does not fit a {w}x{h} image")));
    }
    let offsets: Vec<(usize, usize)> = match sampling {
        PatchSampling::Random { count } => {
            if count == 0 {
                return Err(invalid("patch count must be positive"));
            }
            (0..count)
                .map(|_| (rng.random_range(0..w - patch_size + 1), rng.random_range(0..h - patch_size + 1)))
                .collect()
        }
        PatchSampling::Grid { stride } => {
            if stride == 0 {
                return Err(invalid("patch stride must be positive"));
            }
            let xs: Vec<usize> = (0..=w - patch_size).step_by(stride).collect();
            (0..=h - patch_size).step_by(stride).flat_map(|y| xs.iter().map(move |&x| (x, y))).collect()
        }
    };
    Ok(offsets
        .into_iter()
        .map(|(x, y)| {
            let input = crop_tensor(lr_upscaled, x, y, patch_size);
            let mut target = crop_tensor(hr, x, y, patch_size);
            if residual {
                target.data_mut().iter_mut().zip(input.data()).for_each(|(t, i)| *t -= i);
            }
            (input, target)
        })
        .collect())
}

/// Mean squared error of the network's raw output against `target`, and
/// the parameter gradients of that loss accumulated into `grads` with the
/// given weight (`1 / batch` for a minibatch mean).
pub(crate) fn accumulate_example(
    net: &Network,
    input: &Tensor,
    target: &Tensor,
    weight: f64,
    grads: &mut [LayerGrads],
) -> Result<f64> {
    let acts = net.forward_cached(input)?;
    let pred = acts.last().expect("at least one layer");
    let n = pred.data().len() as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d * weight / n
        })
        .collect();
    let (c, h, w) = pred.shape();
    net.backward(&acts, Tensor::from_raw(c, h, w, grad), grads)?;
    Ok(loss / n)
}

/// Loss and parameter gradients of a minibatch mean squared error.
pub fn batch_gradients(net: &Network, batch: &[(Tensor, Tensor)]) -> Result<(f64, Vec<LayerGrads>)> {
    let mut grads = net.zero_grads();
    let weight = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (input, target) in batch {
        loss += accumulate_example(net, input, target, weight, &mut grads)? * weight;
    }
    Ok((loss, grads))
}

/// Summary of one finished epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Learning rate multiplier in effect (before per-layer scaling).
    pub lr: f64,
    pub loss: f64,
}

impl std::fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "epoch={} lr={:e} loss={:.8}", self.epoch, self.lr, self.loss)
    }
}

pub fn train(model: SrModel, corpus: &[(GrayImage, GrayImage)], cfg: &TrainConfig) -> Result<TrainState> {
    train_with(model, corpus, cfg, |_| {})
}

/// Trains on random patches drawn from `corpus` (`(lr_upscaled, hr)` pairs),
/// calling `on_epoch` after every epoch. Fully determined by `cfg.seed`.
pub fn train_with(
    model: SrModel,
    corpus: &[(GrayImage, GrayImage)],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainState> {
    if corpus.is_empty() {
        return Err(invalid("training corpus is empty"));
    }
    model.validate()?;
    cfg.validate(model.layers().len())?;
    for (lr, hr) in corpus {
        if lr.dimensions() != hr.dimensions() {
            return Err(Error::Shape("training pair dimensions differ".into()));
        }
        if lr.width() < cfg.patch_size || lr.height() < cfg.patch_size {
            return Err(invalid(format!(
                "training image {}x{} smaller than patch size {}",
                lr.width(),
                lr.height(),
                cfg.patch_size
            )));
        }
    }

    let residual = model.residual();
    let mut state = TrainState::new(model, cfg.seed);
    for epoch in 0..cfg.epochs {
        let rates = cfg.layer_rates(epoch);
        let mut epoch_loss = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let (lr, hr) = &corpus[state.rng.random_range(0..corpus.len())];
                let sampling = PatchSampling::Random { count: 1 };
                batch.extend(extract_patches(lr, hr, cfg.patch_size, sampling, &mut state.rng, residual)?);
            }
            let (loss, grads) = batch_gradients(&state.model.net, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1, lr: cfg.schedule(epoch) });
            }
            sgdm_step(&mut state, &grads, &rates, cfg.momentum, cfg.grad_clip)?;
            state.step_losses.push(loss);
            epoch_loss += loss;
        }
        let record =
            EpochRecord { epoch: epoch + 1, lr: cfg.schedule(epoch), loss: epoch_loss / cfg.steps_per_epoch as f64 };
        state.epoch = epoch + 1;
        state.loss_history.push((record.epoch, record.loss));
        on_epoch(&record);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::Activation;

    #[test]
    fn plain_sgd_without_momentum() {
        let mut net = Network::zeros(&[(1, 1, 1, Activation::Linear)], false);
        net.layers[0].weights[0] = 0.5;
        let mut vel = net.zero_grads();
        let g = vec![LayerGrads { weights: vec![2.0], biases: vec![-1.0] }];
        sgdm_update(&mut net, &mut vel, &g, &[0.1], 0.0, None).unwrap();
        assert_eq!(net.layers[0].weights[0], 0.5 - 0.1 * 2.0);
        assert_eq!(net.layers[0].biases[0], 0.1);
    }

    #[test]
    fn zero_gradient_coasts_on_velocity() {
        let mut net = Network::zeros(&[(1, 1, 1, Activation::Linear)], false);
        let mut vel = vec![LayerGrads { weights: vec![0.2], biases: vec![0.0] }];
        let g = vec![LayerGrads { weights: vec![0.0], biases: vec![0.0] }];
        sgdm_update(&mut net, &mut vel, &g, &[0.1], 0.9, None).unwrap();
        assert!((vel[0].weights[0] - 0.18).abs() < 1e-15);
        assert!((net.layers[0].weights[0] - 0.18).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps() {
        let mut net = Network::zeros(&[(1, 1, 1, Activation::Linear)], false);
        let mut vel = net.zero_grads();
        let g = vec![LayerGrads { weights: vec![1.0], biases: vec![0.0] }];
        sgdm_update(&mut net, &mut vel, &g, &[0.1], 0.9, None).unwrap();
        assert!((net.layers[0].weights[0] + 0.1).abs() < 1e-15);
        sgdm_update(&mut net, &mut vel, &g, &[0.1], 0.9, None).unwrap();
        assert!((net.layers[0].weights[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_the_step() {
        let mut net = Network::zeros(&[(1, 1, 1, Activation::Linear)], false);
        let mut vel = net.zero_grads();
        let g = vec![LayerGrads { weights: vec![100.0], biases: vec![-100.0] }];
        sgdm_update(&mut net, &mut vel, &g, &[1.0], 0.0, Some(0.4)).unwrap();
        assert_eq!(net.layers[0].weights[0], -0.4);
        assert_eq!(net.layers[0].biases[0], 0.4);
    }

    #[test]
    fn presets_and_schedule() {
        let v = TrainConfig::vdsr();
        assert_eq!((v.epochs, v.patch_size, v.lr_decay_every), (100, 41, 10));
        assert_eq!(v.schedule(0), 0.1);
        assert_eq!(v.schedule(9), 0.1);
        assert!((v.schedule(10) - 0.01).abs() < 1e-15);
        assert!((v.schedule(25) - 0.001).abs() < 1e-15);
        let s = TrainConfig::srcnn();
        let r = s.layer_rates(7);
        assert_eq!(r.len(), 3);
        assert!((r[0] - 1e-4).abs() < 1e-18 && (r[1] - 1e-4).abs() < 1e-18 && (r[2] - 1e-5).abs() < 1e-18);
        assert!(s.validate(3).is_ok());
        assert!(s.validate(20).is_err());
    }

    #[test]
    fn patches_of_identical_pair_have_zero_residual() {
        let img = GrayImage::from_fn(20, 20, |x, y| (x * 7 + y * 3) as u8).unwrap();
        let mut rng = seeded(3);
        let p = extract_patches(&img, &img, 8, PatchSampling::Random { count: 5 }, &mut rng, true).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.iter().all(|(_, t)| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn full_size_patch_has_single_offset() {
        let img = GrayImage::from_fn(9, 9, |x, y| (x * 20 + y) as u8).unwrap();
        let mut rng = seeded(3);
        let p = extract_patches(&img, &img, 9, PatchSampling::Random { count: 3 }, &mut rng, false).unwrap();
        for (i, t) in &p {
            assert_eq!(i.get(0, 0, 0), 0.0);
            assert_eq!(t.get(0, 8, 8), img.get(8, 8) as f64 / 255.0);
        }
        let g = extract_patches(&img, &img, 9, PatchSampling::Grid { stride: 4 }, &mut rng, false).unwrap();
        assert_eq!(g.len(), 1);
        let g = extract_patches(&img, &img, 5, PatchSampling::Grid { stride: 2 }, &mut rng, false).unwrap();
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn patch_sampling_is_seeded() {
        let a = GrayImage::from_fn(30, 30, |x, y| ((x * 13) ^ (y * 7)) as u8).unwrap();
        let b = GrayImage::from_fn(30, 30, |x, y| ((x * 5) ^ (y * 11)) as u8).unwrap();
        let run = || {
            let mut rng = seeded(99);
            extract_patches(&a, &b, 10, PatchSampling::Random { count: 4 }, &mut rng, true).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn patch_errors() {
        let a = GrayImage::filled(10, 10, 0).unwrap();
        let b = GrayImage::filled(10, 12, 0).unwrap();
        let mut rng = seeded(0);
        assert!(matches!(
            extract_patches(&a, &b, 4, PatchSampling::Random { count: 1 }, &mut rng, false),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            extract_patches(&a, &a, 11, PatchSampling::Random { count: 1 }, &mut rng, false),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn identical_pairs_leave_zero_vdsr_untouched() {
        let img = GrayImage::from_fn(48, 48, |x, y| ((x * 5 + y * 3) % 256) as u8).unwrap();
        let corpus = vec![(img.clone(), img)];
        let cfg = TrainConfig { epochs: 2, steps_per_epoch: 2, batch_size: 2, patch_size: 41, ..TrainConfig::vdsr() };
        let model = SrModel::zeros(Arch::Vdsr);
        let state = train(model.clone(), &corpus, &cfg).unwrap();
        assert!(state.loss_history.iter().all(|&(_, l)| l == 0.0));
        assert_eq!(state.model, model);
        assert_eq!(state.loss_history.len(), 2);
    }

    #[test]
    fn training_rejects_bad_input() {
        let cfg = TrainConfig::srcnn();
        let model = SrModel::zeros(Arch::Srcnn);
        assert!(matches!(train(model.clone(), &[], &cfg), Err(Error::InvalidArgument(_))));
        let small = GrayImage::filled(20, 20, 0).unwrap();
        assert!(train(model, &[(small.clone(), small)], &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let img = GrayImage::from_fn(40, 40, |x, y| ((x * 37 + y * 11) % 256) as u8).unwrap();
        let hr = GrayImage::from_fn(40, 40, |x, y| ((x * 3 + y * 91) % 256) as u8).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            steps_per_epoch: 2,
            batch_size: 1,
            base_lr: 1e6,
            momentum: 0.0,
            ..TrainConfig::srcnn()
        };
        let err = train(SrModel::random(Arch::Srcnn, 1), &[(img, hr)], &cfg).unwrap_err();
        match err {
            Error::Divergence { epoch, lr } => {
                assert!(epoch >= 1);
                assert_eq!(lr, 1e6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
