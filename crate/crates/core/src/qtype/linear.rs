use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse feature vector as `(index, value)` pairs.
pub type SparseVec = Vec<(u32, f64)>;

pub fn binary(indices: &[u32]) -> SparseVec {
    indices.iter().map(|&i| (i, 1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            seed: 13,
        }
    }
}

/// One-vs-rest linear classifier. Each weight vector has `dim + 1` entries,
/// the last being the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub hyperparams: HyperParams,
}

struct ScaledVec {
    scale: f64,
    v: Vec<f64>,
}

impl ScaledVec {
    fn dot(&self, x: &[(u32, f64)], bias: usize) -> f64 {
        let s: f64 = x.iter().map(|&(i, val)| self.v[i as usize] * val).sum::<f64>() + self.v[bias];
        s * self.scale
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.scale = 1.0;
            self.v.fill(0.0);
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            for w in &mut self.v {
                *w *= self.scale;
            }
            self.scale = 1.0;
        }
    }

    fn add(&mut self, x: &[(u32, f64)], bias: usize, step: f64) {
        let step = step / self.scale;
        for &(i, val) in x {
            self.v[i as usize] += step * val;
        }
        self.v[bias] += step;
    }

    fn into_weights(self) -> Vec<f64> {
        self.v.into_iter().map(|w| w * self.scale).collect()
    }
}

/// Trains one hinge-loss, L2-regularized linear classifier per class with
/// stochastic subgradient steps (step size `1 / (lambda t)`). Examples are
/// visited in a seeded shuffled order each epoch, so training is fully
/// deterministic. `labels` are arbitrary strings; classes are sorted.
pub fn train_linear(examples: &[(SparseVec, String)], dim: usize, params: HyperParams) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::EmptySet("training set".into()));
    }
    if !(params.lambda > 0.0) || params.epochs == 0 {
        return Err(Error::Config("lambda must be positive and epochs at least 1".into()));
    }
    if let Some(&(i, _)) = examples.iter().flat_map(|(x, _)| x).find(|(i, _)| *i as usize >= dim) {
        return Err(Error::Contract(format!("feature index {i} outside dimension {dim}")));
    }
    let mut classes: Vec<String> = examples.iter().map(|(_, y)| y.clone()).collect();
    classes.sort();
    classes.dedup();
    let label_idx: Vec<usize> = examples
        .iter()
        .map(|(_, y)| classes.binary_search(y).expect("label collected above"))
        .collect();

    let bias = dim;
    let mut models: Vec<ScaledVec> = classes
        .iter()
        .map(|_| ScaledVec {
            scale: 1.0,
            v: vec![0.0; dim + 1],
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &e in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let x = &examples[e].0;
            for (c, m) in models.iter_mut().enumerate() {
                let y = if label_idx[e] == c { 1.0 } else { -1.0 };
                let margin = y * m.dot(x, bias);
                m.shrink(1.0 - 1.0 / t as f64);
                if margin < 1.0 {
                    m.add(x, bias, eta * y);
                }
            }
        }
    }
    Ok(LinearModel {
        classes,
        dim,
        weights: models.into_iter().map(ScaledVec::into_weights).collect(),
        hyperparams: params,
    })
}

impl LinearModel {
    /// Per-class scores `w . x + b`; indices outside the model are ignored.
    pub fn scores(&self, x: &[(u32, f64)]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                x.iter()
                    .filter(|(i, _)| (*i as usize) < self.dim)
                    .map(|&(i, v)| w[i as usize] * v)
                    .sum::<f64>()
                    + w[self.dim]
            })
            .collect()
    }

    /// Highest-scoring class; equal scores resolve to the class that sorts first.
    pub fn predict(&self, x: &[(u32, f64)]) -> &str {
        let scores = self.scores(x);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        &self.classes[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<(SparseVec, String)> {
        let mut out = Vec::new();
        for k in 0..30 {
            out.push((binary(&[0, 3 + k % 2]), "A".to_string()));
            out.push((binary(&[1, 3 + k % 2]), "B".to_string()));
            out.push((binary(&[2, 3 + k % 2]), "C".to_string()));
        }
        out
    }

    #[test]
    fn separable_toy_problem() {
        let m = train_linear(&toy(), 5, HyperParams { lambda: 0.01, ..Default::default() }).unwrap();
        assert_eq!(m.classes, vec!["A", "B", "C"]);
        assert!(m.weights.iter().all(|w| w.len() == 6));
        assert_eq!(m.predict(&binary(&[0])), "A");
        assert_eq!(m.predict(&binary(&[1, 4])), "B");
        assert_eq!(m.predict(&binary(&[2, 3])), "C");
    }

    #[test]
    fn deterministic() {
        let p = HyperParams::default();
        assert_eq!(train_linear(&toy(), 5, p).unwrap(), train_linear(&toy(), 5, p).unwrap());
    }

    #[test]
    fn single_class() {
        let data = vec![(binary(&[0]), "X".to_string()), (binary(&[1]), "X".to_string())];
        let m = train_linear(&data, 3, HyperParams::default()).unwrap();
        for x in [binary(&[]), binary(&[0, 1, 2]), binary(&[2])] {
            assert_eq!(m.predict(&x), "X");
        }
    }

    #[test]
    fn equal_scores_pick_first_class() {
        let m = LinearModel {
            classes: vec!["HUM".into(), "LOC".into()],
            dim: 1,
            weights: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            hyperparams: HyperParams::default(),
        };
        assert_eq!(m.predict(&binary(&[0])), "HUM");
    }

    #[test]
    fn prediction_invariant_under_weight_scaling() {
        let m = train_linear(&toy(), 5, HyperParams::default()).unwrap();
        for c in [0.001, 0.5, 3.0, 1e4] {
            let mut scaled = m.clone();
            for w in &mut scaled.weights {
                for v in w.iter_mut() {
                    *v *= c;
                }
            }
            for x in [binary(&[0]), binary(&[1, 3]), binary(&[2, 4]), binary(&[3])] {
                assert_eq!(m.predict(&x), scaled.predict(&x));
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_linear(&[], 3, HyperParams::default()).is_err());
        assert!(train_linear(&toy(), 2, HyperParams::default()).is_err());
    }
}
