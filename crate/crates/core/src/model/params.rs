use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weight `in×out` and bias `out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<H> {
    pub weight: H,
    pub bias: H,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams<H> {
    pub gamma: H,
    pub beta: H,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<H> {
    pub ln_attn: LayerNormParams<H>,
    /// Projects to `[Q | K | V]`, each `E` wide with heads in ascending order.
    pub qkv: Linear<H>,
    pub proj: Linear<H>,
    /// One table of `2M − 1` offsets per head.
    pub rel_bias: Vec<H>,
    pub ln_mlp: LayerNormParams<H>,
    pub fc1: Linear<H>,
    pub fc2: Linear<H>,
}

/// Structure of the network with handles of type `H` at the leaves: indices
/// into [`ModelParams`] storage, or graph variables once bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Net<H> {
    pub embed: Linear<H>,
    pub layers: Vec<Layer<H>>,
    pub head_fc1: Linear<H>,
    pub head_fc2: Linear<H>,
}

impl<H: Copy> Net<H> {
    pub fn map<G>(&self, f: &impl Fn(H) -> G) -> Net<G> {
        let lin = |l: &Linear<H>| Linear {
            weight: f(l.weight),
            bias: f(l.bias),
        };
        let ln = |n: &LayerNormParams<H>| LayerNormParams {
            gamma: f(n.gamma),
            beta: f(n.beta),
        };
        Net {
            embed: lin(&self.embed),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    ln_attn: ln(&l.ln_attn),
                    qkv: lin(&l.qkv),
                    proj: lin(&l.proj),
                    rel_bias: l.rel_bias.iter().map(|&h| f(h)).collect(),
                    ln_mlp: ln(&l.ln_mlp),
                    fc1: lin(&l.fc1),
                    fc2: lin(&l.fc2),
                })
                .collect(),
            head_fc1: lin(&self.head_fc1),
            head_fc2: lin(&self.head_fc2),
        }
    }
}

enum Init {
    /// Uniform in ±1/√fan_in.
    FanIn(usize),
    Zeros,
    Ones,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

struct LayoutBuilder {
    specs: Vec<Spec>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.specs.push(Spec { name, shape, init });
        self.specs.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear<usize> {
        Linear {
            weight: self.add(format!("{name}.weight"), vec![fan_in, fan_out], Init::FanIn(fan_in)),
            bias: self.add(format!("{name}.bias"), vec![fan_out], Init::FanIn(fan_in)),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> LayerNormParams<usize> {
        LayerNormParams {
            gamma: self.add(format!("{name}.gamma"), vec![width], Init::Ones),
            beta: self.add(format!("{name}.beta"), vec![width], Init::Zeros),
        }
    }
}

fn layout(cfg: &ModelConfig) -> (Net<usize>, Vec<Spec>) {
    let e = cfg.embed_dim;
    let m = cfg.features();
    let mut b = LayoutBuilder { specs: Vec::new() };
    let embed = b.linear("embed", cfg.patch_width(), e);
    let layers = (0..cfg.num_layers)
        .map(|l| {
            let p = format!("layers.{l}");
            Layer {
                ln_attn: b.norm(&format!("{p}.ln_attn"), e),
                qkv: b.linear(&format!("{p}.attn.qkv"), e, 3 * e),
                proj: b.linear(&format!("{p}.attn.proj"), e, e),
                rel_bias: (0..cfg.num_heads)
                    .map(|h| b.add(format!("{p}.attn.rel_bias.{h}"), vec![2 * m - 1], Init::Zeros))
                    .collect(),
                ln_mlp: b.norm(&format!("{p}.ln_mlp"), e),
                fc1: b.linear(&format!("{p}.mlp.fc1"), e, cfg.mlp_hidden),
                fc2: b.linear(&format!("{p}.mlp.fc2"), cfg.mlp_hidden, e),
            }
        })
        .collect();
    let head_fc1 = b.linear("head.fc1", e, cfg.mlp_hidden);
    let head_fc2 = b.linear("head.fc2", cfg.mlp_hidden, cfg.patch_size);
    (
        Net {
            embed,
            layers,
            head_fc1,
            head_fc2,
        },
        b.specs,
    )
}

/// Every learnable tensor of the model in a fixed order, plus the layout
/// that locates each one.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    net: Net<usize>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (net, specs) = layout(config);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for spec in specs {
            let t = match spec.init {
                Init::Zeros => Tensor::zeros(&spec.shape),
                Init::Ones => Tensor::full(&spec.shape, T::one()),
                Init::FanIn(fan_in) => {
                    let a = 1.0 / (fan_in as f64).sqrt();
                    let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
                    let n = spec.shape.iter().product();
                    let data = (0..n).map(|_| T::of(dist.sample(rng))).collect();
                    Tensor::new(&spec.shape, data)?
                }
            };
            names.push(spec.name);
            tensors.push(t);
        }
        Ok(ModelParams {
            config: config.clone(),
            names,
            tensors,
            net,
        })
    }

    /// Reassembles parameters from named tensors; names and shapes must
    /// match the layout for `config` exactly.
    pub fn from_named(config: &ModelConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let (net, specs) = layout(config);
        if specs.len() != named.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                specs.len(),
                named.len()
            )));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (spec, (name, t)) in specs.into_iter().zip(named) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {:?} does not match expected {} {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(ModelParams {
            config: config.clone(),
            names,
            tensors,
            net,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn net(&self) -> &Net<usize> {
        &self.net
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors.iter_mut().collect()
    }

    pub fn get(&self, index: usize) -> &Tensor<T> {
        &self.tensors[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Tensor<T> {
        &mut self.tensors[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every tensor as a differentiable leaf of `g`.
    /// The returned vector is in parameter order.
    pub fn bind(&self, g: &mut Graph<T>) -> Result<(Net<Var>, Vec<Var>)> {
        let vars = self
            .tensors
            .iter()
            .map(|t| g.variable(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let net = self.net.map(&|i| vars[i]);
        Ok((net, vars))
    }

    pub fn to_f64(&self) -> ModelParams<f64> {
        ModelParams {
            config: self.config.clone(),
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| {
                    Tensor::new(t.shape(), t.data().iter().map(|v| v.as_f64()).collect())
                        .expect("same shape")
                })
                .collect(),
            net: self.net.clone(),
        }
    }

    /// Zeroes the attention output projections and second MLP layers so
    /// every Transformer layer reduces to the identity.
    pub fn zero_residual_branches(&mut self) {
        let idx: Vec<usize> = self
            .net
            .layers
            .iter()
            .flat_map(|l| [l.proj.weight, l.proj.bias, l.fc2.weight, l.fc2.bias])
            .collect();
        for i in idx {
            let shape = self.tensors[i].shape().to_vec();
            self.tensors[i] = Tensor::zeros(&shape);
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn shapes_follow_config() {
        let cfg = ModelConfig {
            data_dim: 3,
            window_size: 8,
            patch_size: 2,
            embed_dim: 8,
            num_layers: 2,
            num_heads: 2,
            mlp_hidden: 16,
        };
        let p = ModelParams::<f64>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.get(p.net().embed.weight).shape(), &[6, 8]);
        assert_eq!(p.net().layers.len(), 2);
        for l in &p.net().layers {
            assert_eq!(l.rel_bias.len(), 2);
            for &t in &l.rel_bias {
                assert_eq!(p.get(t).shape(), &[7]);
                assert!(p.get(t).data().iter().all(|&v| v == 0.0));
            }
            assert_eq!(p.get(l.qkv.weight).shape(), &[8, 24]);
        }
        assert_eq!(p.get(p.net().head_fc2.weight).shape(), &[16, 2]);
        let bound = 1.0 / (6f64).sqrt();
        assert!(p.get(p.net().embed.weight).data().iter().all(|v| v.abs() <= bound));
        assert!(p.by_name("layers.1.attn.rel_bias.1").is_some());
    }

    #[test]
    fn names_are_unique() {
        let cfg = ModelConfig::simplified(2);
        let p = ModelParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut names = p.names().to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), p.names().len());
    }
}
