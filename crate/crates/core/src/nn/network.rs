use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{LayerSpec, Sequential, Trace};
use super::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};

/// A single-path network that records its forward pass so that `backward`
/// can follow it.
#[derive(Debug, Clone)]
pub struct Network {
    store: ParamStore,
    stack: Sequential,
    tape: Vec<Trace>,
}

impl Network {
    pub fn new(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = Sequential::build(specs, input_shape, &mut store, "net", &mut rng)?;
        Ok(Self {
            store,
            stack,
            tape: Vec::new(),
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn stack(&self) -> &Sequential {
        &self.stack
    }

    /// Runs a batch and stacks the flattened outputs into `[N × out]`,
    /// replacing any previously recorded pass.
    pub fn forward(&mut self, inputs: &[Tensor]) -> Result<Tensor> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        self.tape.clear();
        let mut rows = Vec::new();
        let mut width = 0;
        for x in inputs {
            let (y, trace) = self.stack.forward(&self.store, x)?;
            width = y.len();
            rows.extend_from_slice(y.data());
            self.tape.push(trace);
        }
        Tensor::new(vec![inputs.len(), width], rows)
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.stack.infer(&self.store, input)
    }

    /// Reverse-mode gradients for the recorded batch given `d loss / d output`
    /// as `[N × out]`. Consumes the recorded pass.
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<Gradients> {
        if self.tape.is_empty() {
            return Err(Error::State("backward called before forward".into()));
        }
        let n = self.tape.len();
        let out_shape = self.stack.output_shape().to_vec();
        let width: usize = out_shape.iter().product();
        loss_grad.ensure_shape(&[n, width])?;
        let mut grads = Gradients::zeros_like(&self.store);
        for (i, trace) in self.tape.iter().enumerate() {
            let g = Tensor::from_slice(&out_shape, loss_grad.row(i))?;
            self.stack.backward(&self.store, trace, &g, &mut grads)?;
        }
        self.tape.clear();
        Ok(grads)
    }
}
