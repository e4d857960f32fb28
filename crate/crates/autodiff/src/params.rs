use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{AutodiffError, Result};

const CHECKPOINT_FORMAT: &str = "flowcast-params";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    params: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(AutodiffError::Param(format!("duplicate parameter name `{name}`")));
        }
        if !value.all_finite() {
            return Err(AutodiffError::Param(format!("parameter `{name}` is not finite")));
        }
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        Ok(ParamId(id))
    }

    /// Uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| AutodiffError::Param(e.to_string()))?;
        let n = shape.iter().product();
        let data = (0..n).map(|_| dist.sample(rng)).collect();
        self.add(name, Array::from_parts(shape.to_vec(), data))
    }

    /// Standard normal entries.
    pub fn add_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        rng: &mut R,
    ) -> Result<ParamId> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        self.add(name, Array::from_parts(shape.to_vec(), data))
    }

    pub fn add_full(&mut self, name: impl Into<String>, shape: &[usize], v: f64) -> Result<ParamId> {
        self.add(name, Array::full(shape, v))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name).ok_or_else(|| AutodiffError::Param(format!("unknown parameter `{name}`")))
    }

    pub fn get(&self, id: ParamId) -> &Array {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params: self
                .names
                .iter()
                .zip(&self.values)
                .map(|(n, v)| Entry { name: n.clone(), shape: v.shape().to_vec(), data: v.data().to_vec() })
                .collect(),
        };
        serde_json::to_string(&ck).map_err(|e| AutodiffError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| AutodiffError::Format(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(AutodiffError::Format(format!("unexpected format tag `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(AutodiffError::Format(format!("unsupported version {}", ck.version)));
        }
        let mut store = Self::new();
        for e in ck.params {
            let arr = Array::new(e.shape, e.data).map_err(|err| AutodiffError::Format(err.to_string()))?;
            store.add(e.name, arr)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Copies values from `other`, which must hold the same names and shapes.
    pub fn assign_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.names != self.names {
            return Err(AutodiffError::Param("parameter names differ".into()));
        }
        for (i, v) in other.values.iter().enumerate() {
            if v.shape() != self.values[i].shape() {
                return Err(AutodiffError::Param(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    self.names[i],
                    v.shape(),
                    self.values[i].shape()
                )));
            }
        }
        self.values.clone_from(&other.values);
        Ok(())
    }
}
