pub mod data;
pub mod degradation;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use data::TimeSeries;
pub use degradation::{DegradationConfig, OutlierKind};
pub use error::{Error, Result};
pub use graph::{Gradients, Graph, Var};
pub use model::{Checkpoint, ModelConfig, ModelParams};
pub use optim::{clip_grad_norm, lr_at_step, AdamW, AdamWConfig};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use training::{train, TrainConfig, TrainLog, Trainer};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Graph64 = Graph<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
