use flowcast_core::calendar::N_FEATURES;
use flowcast_core::TimeFeatureVector;

use crate::error::{GbrtError, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_features: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_features {
            return Err(GbrtError::Data(format!("{} values for {n_rows} x {n_features}", data.len())));
        }
        if n_features == 0 {
            return Err(GbrtError::Data("no feature columns".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GbrtError::Data("features must be finite".into()));
        }
        Ok(Self { n_rows, n_features, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nf = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nf) {
            return Err(GbrtError::Data("ragged rows".into()));
        }
        Self::new(rows.len(), nf, rows.concat())
    }

    /// Ordinal calendar features; column `k` is kept when `include[k]`.
    pub fn from_time_features(feats: &[TimeFeatureVector], include: &[bool; N_FEATURES]) -> Result<Self> {
        let cols: Vec<usize> = (0..N_FEATURES).filter(|&k| include[k]).collect();
        let mut data = Vec::with_capacity(feats.len() * cols.len());
        for f in feats {
            let o = f.ordinals();
            data.extend(cols.iter().map(|&k| o[k]));
        }
        Self::new(feats.len(), cols.len(), data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn get(&self, i: usize, f: usize) -> f64 {
        self.data[i * self.n_features + f]
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        let nf = self.n_features;
        FeatureMatrix { n_rows: range.len(), n_features: nf, data: self.data[range.start * nf..range.end * nf].to_vec() }
    }
}

/// Per feature: the sorted distinct values and each row's rank among them.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    pub(crate) values: Vec<Vec<f64>>,
    pub(crate) rank: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut values = Vec::with_capacity(x.n_features);
        let mut rank = Vec::with_capacity(x.n_features);
        for f in 0..x.n_features {
            let mut v: Vec<f64> = (0..x.n_rows).map(|i| x.get(i, f)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            let r = (0..x.n_rows)
                .map(|i| v.binary_search_by(|p| p.total_cmp(&x.get(i, f))).expect("value present") as u32)
                .collect();
            values.push(v);
            rank.push(r);
        }
        Self { values, rank }
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    pub fn distinct(&self, f: usize) -> &[f64] {
        &self.values[f]
    }
}
