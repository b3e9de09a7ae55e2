use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Head, ModelConfig, POOL_STRIDE, POOL_WINDOW};
use super::CountingNet;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

const LINEAR_INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    /// `[C_out, C_in, k, k]`
    pub kernel: Tensor,
    /// `[C_out]`
    pub bias: Tensor,
}

/// Conv front-end, global pooling head and scalar linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct CountModel {
    config: ModelConfig,
    convs: Vec<ConvParams>,
    weight: Tensor,
    bias: Tensor,
}

/// Which parameters receive gradients in [`CountModel::forward`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Trainable {
    #[default]
    All,
    /// Conv kernels and biases are constants.
    LinearOnly,
    Frozen,
}

/// Graph handles produced by [`CountModel::forward`].
#[derive(Clone, Debug)]
pub struct ForwardVars {
    pub count: Var,
    pub features: Var,
    pub pooled: Var,
    /// Parameters in [`CountModel::parameters`] order.
    pub params: Vec<Var>,
}

impl CountModel {
    /// Builds a model with seeded He-normal conv kernels, zero conv biases,
    /// small positive linear weights and zero linear bias.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut convs = Vec::with_capacity(config.blocks.len());
        let mut c_in = config.in_channels;
        for b in &config.blocks {
            let fan_in = c_in * b.kernel * b.kernel;
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let n = b.out_channels * fan_in;
            let kernel = (0..n).map(|_| normal.sample(&mut rng)).collect();
            convs.push(ConvParams {
                kernel: Tensor::new(vec![b.out_channels, c_in, b.kernel, b.kernel], kernel)?,
                bias: Tensor::zeros(&[b.out_channels]),
            });
            c_in = b.out_channels;
        }
        let normal = Normal::new(0.0, LINEAR_INIT_STD).expect("positive std");
        let weight = (0..config.feature_dim()).map(|_| normal.sample(&mut rng).abs()).collect();
        Ok(CountModel {
            weight: Tensor::new(vec![config.feature_dim()], weight)?,
            bias: Tensor::scalar(0.0),
            convs,
            config,
        })
    }

    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_parts(config: ModelConfig, convs: Vec<ConvParams>, weight: Tensor, bias: f64) -> Result<Self> {
        config.validate()?;
        let model = CountModel {
            convs,
            weight,
            bias: Tensor::scalar(bias),
            config,
        };
        let template = CountModel::new(model.config.clone())?;
        if model.convs.len() != template.convs.len() {
            return Err(Error::Config(format!(
                "{} conv parameter sets for {} blocks",
                model.convs.len(),
                template.convs.len()
            )));
        }
        for ((name, a), b) in model.named_parameters().iter().zip(template.parameters()) {
            if a.shape() != b.shape() {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, config implies {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn convs(&self) -> &[ConvParams] {
        &self.convs
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> f64 {
        self.bias.item()
    }

    pub fn set_linear(&mut self, weight: Vec<f64>, bias: f64) -> Result<()> {
        if weight.len() != self.weight.len() {
            return Err(Error::dim(format!(
                "linear weight needs {} values, got {}",
                self.weight.len(),
                weight.len()
            )));
        }
        self.weight = Tensor::new(vec![weight.len()], weight)?;
        self.bias = Tensor::scalar(bias);
        Ok(())
    }

    /// Same parameters with a different pooling head.
    pub fn with_head(&self, head: Head) -> CountModel {
        let mut m = self.clone();
        m.config.head = head;
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &self.convs {
            out.push(&c.kernel);
            out.push(&c.bias);
        }
        out.push(&self.weight);
        out.push(&self.bias);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(2 * self.convs.len() + 2);
        for c in &mut self.convs {
            out.push(&mut c.kernel);
            out.push(&mut c.bias);
        }
        out.push(&mut self.weight);
        out.push(&mut self.bias);
        out
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(2 * self.convs.len() + 2);
        for i in 0..self.convs.len() {
            names.push(format!("conv{i}.kernel"));
            names.push(format!("conv{i}.bias"));
        }
        names.push("linear.weight".into());
        names.push("linear.bias".into());
        names
    }

    pub fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.parameter_names().into_iter().zip(self.parameters()).collect()
    }

    /// Checks the image against the channel count and minimum size.
    pub fn check_input(&self, image: &Tensor) -> Result<()> {
        let (c, h, w) = image.dims3()?;
        if c != self.config.in_channels {
            return Err(Error::dim(format!(
                "model expects {} input channels, image has {c}",
                self.config.in_channels
            )));
        }
        let min = self.config.min_input_size();
        if h < min || w < min {
            return Err(Error::dim(format!(
                "input {h}x{w} is smaller than the model minimum {min}x{min}"
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `g`. Parameters selected by `trainable`
    /// are inserted as gradient leaves, the rest as constants.
    pub fn forward(&self, g: &mut Graph, image: Var, trainable: Trainable) -> Result<ForwardVars> {
        let n_conv = 2 * self.convs.len();
        let params: Vec<Var> = self
            .parameters()
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let leaf = match trainable {
                    Trainable::All => true,
                    Trainable::LinearOnly => i >= n_conv,
                    Trainable::Frozen => false,
                };
                if leaf {
                    g.leaf(p.clone())
                } else {
                    g.constant(p.clone())
                }
            })
            .collect();
        self.forward_with(g, image, params)
    }

    /// Forward pass using caller-inserted parameter nodes, in
    /// [`CountModel::parameters`] order. Only the architecture of `self` is used.
    pub fn forward_with(&self, g: &mut Graph, image: Var, params: Vec<Var>) -> Result<ForwardVars> {
        self.check_input(g.value(image))?;
        let expected = self.parameters().len();
        if params.len() != expected {
            return Err(Error::dim(format!("{} parameter nodes for {expected} parameters", params.len())));
        }
        let mut x = image;
        for (i, block) in self.config.blocks.iter().enumerate() {
            x = g.conv2d(x, params[2 * i], params[2 * i + 1], block.stride, block.padding)?;
            x = g.relu(x)?;
            if block.pool_after {
                x = g.maxpool2d(x, POOL_WINDOW, POOL_STRIDE)?;
            }
        }
        let features = x;
        let pooled = match self.config.head {
            Head::Gsp => g.gsp(features)?,
            Head::Gap => g.gap(features)?,
        };
        let n = params.len();
        let count = g.linear(pooled, params[n - 2], params[n - 1])?;
        Ok(ForwardVars {
            count,
            features,
            pooled,
            params,
        })
    }

    /// Runs a forward pass and returns `(count, feature map)`.
    pub fn forward_eval(&self, image: &Tensor) -> Result<(f64, Tensor)> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let out = self.forward(&mut g, x, Trainable::Frozen)?;
        Ok((g.value(out.count).item(), g.value(out.features).clone()))
    }
}

impl CountingNet for CountModel {
    fn head(&self) -> Head {
        self.config.head
    }

    fn min_input_size(&self) -> usize {
        self.config.min_input_size()
    }

    fn feature_map(&self, image: &Tensor) -> Result<Tensor> {
        self.forward_eval(image).map(|(_, f)| f)
    }

    fn linear_weight(&self) -> &[f64] {
        self.weight.data()
    }

    fn linear_bias(&self) -> f64 {
        self.bias()
    }

    fn predict(&self, image: &Tensor) -> Result<f64> {
        self.forward_eval(image).map(|(c, _)| c)
    }
}
