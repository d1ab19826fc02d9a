use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Running statistics and other buffers are stored but not optimized.
    pub trainable: bool,
}

/// An ordered collection of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> ParamId {
        self.push(name.into(), shape, data, true)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> ParamId {
        self.push(name.into(), shape, data, false)
    }

    fn push(&mut self, name: String, shape: &[usize], data: Vec<f64>, trainable: bool) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor {name}");
        self.tensors.push(Tensor {
            name,
            shape: shape.to_vec(),
            data,
            trainable,
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.0].data
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_trainable(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Copies values from `other` by name; every tensor here must be
    /// present there with the same shape.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        for t in &mut self.tensors {
            let src = other
                .tensors
                .iter()
                .find(|o| o.name == t.name)
                .ok_or_else(|| Error::Format(format!("missing tensor {}", t.name)))?;
            if src.shape != t.shape {
                return Err(Error::shape(&t.name, format!("{:?}", t.shape), format!("{:?}", src.shape)));
            }
            t.data.clone_from(&src.data);
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            grads: vec![None; self.tensors.len()],
            sizes: self.tensors.iter().map(|t| t.data.len()).collect(),
        }
    }
}

/// Gradients aligned with a [`ParamSet`]; untouched tensors stay
/// unallocated and read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl Grads {
    pub fn slot(&mut self, id: ParamId) -> &mut [f64] {
        let size = self.sizes[id.0];
        self.grads[id.0].get_or_insert_with(|| vec![0.0; size])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    /// Gradient value of one coordinate, zero when never touched.
    pub fn value(&self, id: ParamId, index: usize) -> f64 {
        self.grads[id.0].as_ref().map_or(0.0, |g| g[index])
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                let dst = self.slot(ParamId(i));
                for (d, s) in dst.iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.grads.iter_mut().flatten() {
            for v in g.iter_mut() {
                *v *= k;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
    }
}
