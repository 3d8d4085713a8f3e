//! The conditional U-Net denoiser and its hand-written backward pass.

use rand::Rng;

use super::embedding::{time_embedding, TimeEmbeddingConfig};
use crate::numerics::{
    bilinear_upsample2x, bilinear_upsample2x_backward, conv3x3, conv3x3_backward, dense,
    dense_backward, gelu, gelu_backward, maxpool2x2, maxpool2x2_backward, relu, relu_backward,
    Scalar, Tensor,
};
use crate::{Error, Result};

/// Image, measurement and mask planes ahead of the embedding planes.
pub const DATA_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UNetConfig {
    /// Number of diffusion steps the network is conditioned on.
    pub steps: usize,
    pub base_channels: usize,
    pub levels: usize,
    pub embed_dim: usize,
}

impl UNetConfig {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            base_channels: 32,
            levels: 3,
            embed_dim: 16,
        }
    }

    pub fn in_channels(&self) -> usize {
        DATA_CHANNELS + self.embed_dim
    }

    pub fn out_channels(&self) -> usize {
        1
    }

    /// Spatial sizes must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << self.levels
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 || self.base_channels == 0 || self.levels == 0 || self.levels > 8 {
            return Err(Error::InvalidArgument(format!("bad U-Net config {self:?}")));
        }
        if self.embed_dim != TimeEmbeddingConfig::default().dim() {
            return Err(Error::InvalidArgument(format!(
                "embed_dim must be {}",
                TimeEmbeddingConfig::default().dim()
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<LayerShape> {
        let c = self.base_channels;
        let e = self.embed_dim;
        let mut shapes = vec![
            (String::from("time_mlp.0"), LayerKind::Dense { n_in: e, n_out: e }),
            ("time_mlp.1".into(), LayerKind::Dense { n_in: e, n_out: e }),
            ("input_proj".into(), LayerKind::Conv { c_in: self.in_channels(), c_out: c }),
        ];
        for l in 0..self.levels {
            for k in 0..2 {
                shapes.push((format!("enc{l}.conv{k}"), LayerKind::Conv { c_in: c, c_out: c }));
            }
        }
        for k in 0..2 {
            shapes.push((format!("bottleneck.conv{k}"), LayerKind::Conv { c_in: c, c_out: c }));
        }
        for l in 0..self.levels {
            shapes.push((format!("dec{l}.conv0"), LayerKind::Conv { c_in: 2 * c, c_out: c }));
            shapes.push((format!("dec{l}.conv1"), LayerKind::Conv { c_in: c, c_out: c }));
        }
        shapes.push(("output".into(), LayerKind::Conv { c_in: c, c_out: self.out_channels() }));

        let mut offset = 0;
        shapes
            .into_iter()
            .map(|(name, kind)| {
                let shape = LayerShape { name, kind, offset };
                offset += shape.len();
                shape
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(LayerShape::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense { n_in: usize, n_out: usize },
    Conv { c_in: usize, c_out: usize },
}

/// One layer's slot in the flat parameter vector: weights, then bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub kind: LayerKind,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_in, n_out } => n_in * n_out,
            LayerKind::Conv { c_in, c_out } => c_in * c_out * 9,
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_out, .. } => n_out,
            LayerKind::Conv { c_out, .. } => c_out,
        }
    }

    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { n_in, .. } => n_in,
            LayerKind::Conv { c_in, .. } => c_in * 9,
        }
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.bias_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector of the denoiser in layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParameters<F> {
    config: UNetConfig,
    layers: Vec<LayerShape>,
    values: Vec<F>,
}

impl<F: Scalar> DenoiserParameters<F> {
    pub fn zeros(config: UNetConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layout();
        let n = layers.iter().map(LayerShape::len).sum();
        Ok(Self {
            config,
            layers,
            values: vec![F::zero(); n],
        })
    }

    /// Weights uniform in `±√(1/fan_in)`, biases zero.
    pub fn init(config: UNetConfig, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        for i in 0..p.layers.len() {
            let bound = (1.0 / p.layers[i].fan_in() as f64).sqrt();
            for w in p.weight_mut(i) {
                *w = F::lit(rng.random_range(-bound..bound));
            }
        }
        Ok(p)
    }

    pub fn from_values(config: UNetConfig, values: Vec<F>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if values.len() != p.values.len() {
            return Err(Error::CheckpointMismatch(format!(
                "{} parameters for a layout of {}",
                values.len(),
                p.values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn weight(&self, layer: usize) -> &[F] {
        let s = &self.layers[layer];
        &self.values[s.offset..s.offset + s.weight_len()]
    }

    pub fn bias(&self, layer: usize) -> &[F] {
        let s = &self.layers[layer];
        &self.values[s.offset + s.weight_len()..s.offset + s.len()]
    }

    fn weight_mut(&mut self, layer: usize) -> &mut [F] {
        let s = &self.layers[layer];
        let range = s.offset..s.offset + s.weight_len();
        &mut self.values[range]
    }

    pub fn cast<G: Scalar>(&self) -> DenoiserParameters<G> {
        DenoiserParameters {
            config: self.config.clone(),
            layers: self.layers.clone(),
            values: self
                .values
                .iter()
                .map(|v| G::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(G::nan()))
                .collect(),
        }
    }

    fn enc(&self, level: usize, k: usize) -> usize {
        3 + 2 * level + k
    }

    fn mid(&self, k: usize) -> usize {
        3 + 2 * self.config.levels + k
    }

    fn dec(&self, level: usize, k: usize) -> usize {
        5 + 2 * self.config.levels + 2 * level + k
    }

    fn out(&self) -> usize {
        5 + 4 * self.config.levels
    }
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    emb: Vec<F>,
    mlp_hidden: Vec<F>,
    input: Tensor<F>,
    /// `(conv input, pre-activation)` per ReLU conv, in forward order.
    convs: Vec<(Tensor<F>, Tensor<F>)>,
    skip_shapes: Vec<(usize, usize, usize)>,
    pool_argmax: Vec<Vec<usize>>,
    up_shapes: Vec<(usize, usize, usize)>,
    out_input: Tensor<F>,
}

fn conv_relu<F: Scalar>(
    p: &DenoiserParameters<F>,
    layer: usize,
    x: Tensor<F>,
    cache: &mut Option<&mut Vec<(Tensor<F>, Tensor<F>)>>,
) -> Result<Tensor<F>> {
    let pre = conv3x3(&x, p.weight(layer), p.bias(layer))?;
    let out = relu(&pre);
    if let Some(c) = cache {
        c.push((x, pre));
    }
    Ok(out)
}

fn check_inputs<F: Scalar>(
    config: &UNetConfig,
    x_t: &Tensor<F>,
    y: &Tensor<F>,
    mask: &Tensor<F>,
) -> Result<()> {
    let (c, h, w) = x_t.shape();
    if c != 1 || !x_t.same_shape(y) || !x_t.same_shape(mask) {
        return Err(Error::Shape(format!(
            "denoiser inputs must be single-channel and equal: {:?} {:?} {:?}",
            x_t.shape(),
            y.shape(),
            mask.shape()
        )));
    }
    let m = config.size_multiple();
    if h == 0 || w == 0 || h % m != 0 || w % m != 0 {
        return Err(Error::Shape(format!(
            "spatial size {h}x{w} not divisible by {m}"
        )));
    }
    Ok(())
}

fn forward_impl<F: Scalar>(
    p: &DenoiserParameters<F>,
    x_t: &Tensor<F>,
    y: &Tensor<F>,
    mask: &Tensor<F>,
    t: usize,
    keep: bool,
) -> Result<(Tensor<F>, Option<ForwardCache<F>>)> {
    let cfg = &p.config;
    check_inputs(cfg, x_t, y, mask)?;
    let (_, h, w) = x_t.shape();

    let emb: Vec<F> = time_embedding(t, cfg.steps, &TimeEmbeddingConfig::default())?
        .into_iter()
        .map(F::lit)
        .collect();
    let mlp_hidden = dense(&emb, p.weight(0), p.bias(0))?;
    let t_feat = dense(&gelu(&mlp_hidden), p.weight(1), p.bias(1))?;

    let mut planes = Vec::with_capacity(cfg.in_channels() * h * w);
    planes.extend_from_slice(x_t.data());
    planes.extend_from_slice(y.data());
    planes.extend_from_slice(mask.data());
    for &v in &t_feat {
        planes.extend(std::iter::repeat_n(v, h * w));
    }
    let input = Tensor::from_vec(cfg.in_channels(), h, w, planes)?;

    let mut convs = Vec::new();
    let mut sink = if keep { Some(&mut convs) } else { None };
    let mut x = conv3x3(&input, p.weight(2), p.bias(2))?;
    let mut skips = Vec::with_capacity(cfg.levels);
    let mut pool_argmax = Vec::new();
    for l in 0..cfg.levels {
        x = conv_relu(p, p.enc(l, 0), x, &mut sink)?;
        x = conv_relu(p, p.enc(l, 1), x, &mut sink)?;
        let (pooled, arg) = maxpool2x2(&x)?;
        skips.push(x);
        if keep {
            pool_argmax.push(arg);
        }
        x = pooled;
    }
    x = conv_relu(p, p.mid(0), x, &mut sink)?;
    x = conv_relu(p, p.mid(1), x, &mut sink)?;
    let skip_shapes: Vec<_> = skips.iter().map(Tensor::shape).collect();
    let mut up_shapes = Vec::new();
    for l in 0..cfg.levels {
        up_shapes.push(x.shape());
        let skip = skips.pop().expect("one skip per level");
        let joined = Tensor::concat_channels(&[&bilinear_upsample2x(&x), &skip])?;
        x = conv_relu(p, p.dec(l, 0), joined, &mut sink)?;
        x = conv_relu(p, p.dec(l, 1), x, &mut sink)?;
    }
    let out = conv3x3(&x, p.weight(p.out()), p.bias(p.out()))?;
    let cache = keep.then_some(ForwardCache {
        emb,
        mlp_hidden,
        input,
        convs,
        skip_shapes,
        pool_argmax,
        up_shapes,
        out_input: x,
    });
    Ok((out, cache))
}

/// Predicts the clean image from `x_t`, the measurement `y` and the mask.
///
/// All three inputs are `1×H×W` with `H`, `W` divisible by `2^levels`.
pub fn denoiser_forward<F: Scalar>(
    params: &DenoiserParameters<F>,
    x_t: &Tensor<F>,
    y: &Tensor<F>,
    mask: &Tensor<F>,
    t: usize,
) -> Result<Tensor<F>> {
    forward_impl(params, x_t, y, mask, t, false).map(|(out, _)| out)
}

/// Like [`denoiser_forward`], also returning the activations needed by
/// [`denoiser_backward`].
pub fn denoiser_forward_cached<F: Scalar>(
    params: &DenoiserParameters<F>,
    x_t: &Tensor<F>,
    y: &Tensor<F>,
    mask: &Tensor<F>,
    t: usize,
) -> Result<(Tensor<F>, ForwardCache<F>)> {
    let (out, cache) = forward_impl(params, x_t, y, mask, t, true)?;
    Ok((out, cache.expect("cache requested")))
}

fn add_into<F: Scalar>(dst: &mut [F], src: &[F]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Accumulates `∂L/∂params` into `grads` given `∂L/∂output`.
pub fn denoiser_backward<F: Scalar>(
    params: &DenoiserParameters<F>,
    cache: ForwardCache<F>,
    output_grad: &Tensor<F>,
    grads: &mut [F],
) -> Result<()> {
    if grads.len() != params.count() {
        return Err(Error::Shape(format!(
            "gradient buffer of {} for {} parameters",
            grads.len(),
            params.count()
        )));
    }
    let cfg = &params.config;
    let c = cfg.base_channels;
    let mut acc = |layer: usize, pg: &[Vec<F>]| {
        let s = &params.layers[layer];
        add_into(&mut grads[s.offset..s.offset + s.weight_len()], &pg[0]);
        add_into(&mut grads[s.offset + s.weight_len()..s.offset + s.len()], &pg[1]);
    };

    let ForwardCache {
        emb,
        mlp_hidden,
        input,
        mut convs,
        skip_shapes,
        mut pool_argmax,
        up_shapes,
        out_input,
    } = cache;

    let out = params.out();
    let lg = conv3x3_backward(&out_input, params.weight(out), output_grad)?;
    acc(out, &lg.param_grads);
    let mut g = lg.input_grad;

    let mut conv_back = |layer: usize, g: Tensor<F>| -> Result<Tensor<F>> {
        let (x, pre) = convs.pop().expect("cached conv");
        let g = relu_backward(&pre, &g)?;
        let lg = conv3x3_backward(&x, params.weight(layer), &g)?;
        acc(layer, &lg.param_grads);
        Ok(lg.input_grad)
    };

    let mut skip_grads = Vec::with_capacity(cfg.levels);
    for l in (0..cfg.levels).rev() {
        g = conv_back(params.dec(l, 1), g)?;
        g = conv_back(params.dec(l, 0), g)?;
        let (g_up, g_skip) = g.split_channels(c)?;
        skip_grads.push(g_skip);
        g = bilinear_upsample2x_backward(up_shapes[l], &g_up)?;
    }
    g = conv_back(params.mid(1), g)?;
    g = conv_back(params.mid(0), g)?;
    // skip_grads now runs shallow to deep
    for l in (0..cfg.levels).rev() {
        let arg = pool_argmax.pop().expect("argmax per level");
        let mut up = maxpool2x2_backward(skip_shapes[l], &arg, &g)?;
        add_into(up.data_mut(), skip_grads[l].data());
        g = conv_back(params.enc(l, 1), up)?;
        g = conv_back(params.enc(l, 0), g)?;
    }

    let lg = conv3x3_backward(&input, params.weight(2), &g)?;
    let mut acc = |layer: usize, pg: &[Vec<F>]| {
        let s = &params.layers[layer];
        add_into(&mut grads[s.offset..s.offset + s.weight_len()], &pg[0]);
        add_into(&mut grads[s.offset + s.weight_len()..s.offset + s.len()], &pg[1]);
    };
    acc(2, &lg.param_grads);
    let t_grad: Vec<F> = (0..cfg.embed_dim)
        .map(|k| lg.input_grad.plane(DATA_CHANNELS + k).iter().copied().sum())
        .collect();
    let hidden_act = gelu(&mlp_hidden);
    let (d_act, dw1, db1) = dense_backward(&hidden_act, params.weight(1), &t_grad)?;
    acc(1, &[dw1, db1]);
    let d_hidden = gelu_backward(&mlp_hidden, &d_act)?;
    let (_, dw0, db0) = dense_backward(&emb, params.weight(0), &d_hidden)?;
    acc(0, &[dw0, db0]);
    Ok(())
}
