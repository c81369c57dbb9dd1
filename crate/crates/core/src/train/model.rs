use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{batch_loss_grad, LossSpec, Targets};
use crate::{Error, Result};

/// Bias-free by default: `P(y = +1 | x) = sigmoid(w.x [+ b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBinaryModel {
    params: Vec<f64>,
    has_bias: bool,
}

impl LinearBinaryModel {
    pub fn zeros(d: usize) -> Self {
        LinearBinaryModel {
            params: vec![0.0; d],
            has_bias: false,
        }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        LinearBinaryModel {
            params: w,
            has_bias: false,
        }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        if self.has_bias {
            *self.params.last_mut().expect("bias slot") = bias;
        } else {
            self.params.push(bias);
            self.has_bias = true;
        }
        self
    }

    /// Weights drawn from `U(-1/sqrt(d), 1/sqrt(d))`.
    pub fn uniform_init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        LinearBinaryModel::from_weights((0..d).map(|_| rng.random_range(-bound..=bound)).collect())
    }

    pub fn d(&self) -> usize {
        self.params.len() - usize::from(self.has_bias)
    }

    pub fn w(&self) -> &[f64] {
        &self.params[..self.d()]
    }

    pub fn bias(&self) -> Option<f64> {
        self.has_bias.then(|| self.params[self.d()])
    }
}

/// Multiclass linear model with softmax output; `W` is `k x d`, plus `k`
/// biases.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLinear {
    k: usize,
    d: usize,
    params: Vec<f64>,
}

impl SoftmaxLinear {
    pub fn zeros(d: usize, k: usize) -> Self {
        SoftmaxLinear { k, d, params: vec![0.0; k * d + k] }
    }

    pub fn uniform_init<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let params = (0..k * d + k).map(|_| rng.random_range(-bound..=bound)).collect();
        SoftmaxLinear { k, d, params }
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.k, self.d), &self.params[..self.k * self.d]).expect("layout")
    }

    pub fn biases(&self) -> &[f64] {
        &self.params[self.k * self.d..]
    }
}

/// Two-layer ReLU network `W2 relu(W1 x + b1) + b2`. Parameters are stored
/// flat in the order `W1 (h x d), b1, W2 (k x h), b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    d: usize,
    h: usize,
    k: usize,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(d: usize, h: usize, k: usize) -> Self {
        MlpModel {
            d,
            h,
            k,
            params: vec![0.0; h * d + h + k * h + k],
        }
    }

    /// Fan-in uniform init: layer weights and biases in `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn uniform_init<R: Rng + ?Sized>(d: usize, h: usize, k: usize, rng: &mut R) -> Self {
        let mut m = MlpModel::zeros(d, h, k);
        let b1 = 1.0 / (d as f64).sqrt();
        let b2 = 1.0 / (h as f64).sqrt();
        let first = h * d + h;
        for (i, p) in m.params.iter_mut().enumerate() {
            let bound = if i < first { b1 } else { b2 };
            *p = rng.random_range(-bound..=bound);
        }
        m
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    fn split(&self) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        split_mlp(&self.params, self.d, self.h, self.k)
    }

    pub fn w1(&self) -> ArrayView2<'_, f64> {
        self.split().0
    }

    pub fn w2(&self) -> ArrayView2<'_, f64> {
        self.split().2
    }

    /// Mutable view of the output layer weights.
    pub fn w2_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let start = self.h * self.d + self.h;
        let (h, k) = (self.h, self.k);
        ArrayViewMut2::from_shape((k, h), &mut self.params[start..start + k * h]).expect("layout")
    }
}

fn split_mlp(p: &[f64], d: usize, h: usize, k: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
    let (w1, rest) = p.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(k * h);
    (
        ArrayView2::from_shape((h, d), w1).expect("layout"),
        ArrayView1::from(b1),
        ArrayView2::from_shape((k, h), w2).expect("layout"),
        ArrayView1::from(b2),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearBinaryModel),
    Softmax(SoftmaxLinear),
    Mlp(MlpModel),
}

/// Result of a forward pass. `hidden` holds post-ReLU activations (`n x h`)
/// for MLPs when capture was requested.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Array2<f64>,
    pub hidden: Option<Array2<f64>>,
}

impl From<LinearBinaryModel> for Model {
    fn from(m: LinearBinaryModel) -> Self {
        Model::Linear(m)
    }
}

impl From<SoftmaxLinear> for Model {
    fn from(m: SoftmaxLinear) -> Self {
        Model::Softmax(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}

impl Model {
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.d(),
            Model::Softmax(m) => m.d,
            Model::Mlp(m) => m.d,
        }
    }

    /// Number of classes; binary models report 2.
    pub fn classes(&self) -> usize {
        match self {
            Model::Linear(_) => 2,
            Model::Softmax(m) => m.k,
            Model::Mlp(m) => m.k,
        }
    }

    /// Logit columns: 1 for the binary sigmoid model, `k` otherwise.
    pub fn logit_dim(&self) -> usize {
        match self {
            Model::Linear(_) => 1,
            _ => self.classes(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Linear(m) => &m.params,
            Model::Softmax(m) => &m.params,
            Model::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Linear(m) => &mut m.params,
            Model::Softmax(m) => &mut m.params,
            Model::Mlp(m) => &mut m.params,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearBinaryModel> {
        match self {
            Model::Linear(m) => Some(m),
            _ => None,
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("model expects {} features, got {}", self.input_dim(), x.ncols())));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>, capture: bool) -> Result<Forward> {
        self.check_input(&x)?;
        Ok(match self {
            Model::Linear(m) => {
                let mut z = x.dot(&ArrayView1::from(m.w()));
                if let Some(b) = m.bias() {
                    z += b;
                }
                Forward {
                    logits: z.insert_axis(Axis(1)),
                    hidden: None,
                }
            }
            Model::Softmax(m) => Forward {
                logits: x.dot(&m.weights().t()) + &ArrayView1::from(m.biases()),
                hidden: None,
            },
            Model::Mlp(m) => {
                let (w1, b1, w2, b2) = m.split();
                let mut hidden = x.dot(&w1.t()) + &b1;
                hidden.mapv_inplace(|v| v.max(0.0));
                let logits = hidden.dot(&w2.t()) + &b2;
                Forward {
                    logits,
                    hidden: capture.then_some(hidden),
                }
            }
        })
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x, false)?.logits)
    }

    /// Class probabilities, `n x k` (binary: columns for -1 and +1).
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(probabilities(self.logits(x)?.view()))
    }

    /// Predicted class indices (binary: 0 for -1, 1 for +1).
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let z = self.logits(x)?;
        Ok(z.rows()
            .into_iter()
            .map(|r| {
                if r.len() == 1 {
                    usize::from(r[0] > 0.0)
                } else {
                    r.iter().enumerate().fold(0, |best, (j, &v)| if v > r[best] { j } else { best })
                }
            })
            .collect())
    }

    pub fn error_rate(&self, x: ArrayView2<f64>, classes: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        if pred.len() != classes.len() {
            return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), classes.len())));
        }
        let wrong = pred.iter().zip(classes).filter(|(p, y)| p != y).count();
        Ok(wrong as f64 / classes.len().max(1) as f64)
    }

    /// Mean batch loss and its gradient with respect to the flat parameters.
    pub fn loss_grad(&self, x: ArrayView2<f64>, targets: Targets<'_>, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
        let fwd = self.forward(x, true)?;
        let (loss, g) = batch_loss_grad(fwd.logits.view(), targets, spec)?;
        let grad = match self {
            Model::Linear(m) => {
                let gz = g.column(0);
                let mut grad = x.t().dot(&gz).to_vec();
                if m.has_bias {
                    grad.push(gz.sum());
                }
                grad
            }
            Model::Softmax(_) => {
                let mut grad = g.t().dot(&x).into_raw_vec_and_offset().0;
                grad.extend(g.sum_axis(Axis(0)).iter());
                grad
            }
            Model::Mlp(m) => {
                let hidden = fwd.hidden.expect("captured");
                let (_, _, w2, _) = m.split();
                let gw2 = g.t().dot(&hidden);
                let gb2 = g.sum_axis(Axis(0));
                let mut gh = g.dot(&w2);
                gh.zip_mut_with(&hidden, |v, &a| {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                });
                let gw1 = gh.t().dot(&x);
                let gb1 = gh.sum_axis(Axis(0));
                let mut grad = Vec::with_capacity(m.params.len());
                grad.extend(gw1.iter());
                grad.extend(gb1.iter());
                grad.extend(gw2.iter());
                grad.extend(gb2.iter());
                grad
            }
        };
        Ok((loss, grad))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelDocument::from(self)).map_err(|e| Error::Numeric(format!("model serialisation: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::parse("model json", e.to_string()))?;
        doc.into_model()
    }
}

/// Softmax rows of a logit matrix; a single column is read as a binary logit.
pub fn probabilities(z: ArrayView2<f64>) -> Array2<f64> {
    if z.ncols() == 1 {
        let mut p = Array2::zeros((z.nrows(), 2));
        for (i, &v) in z.column(0).iter().enumerate() {
            let s = crate::losses::sigmoid(v);
            p[[i, 0]] = 1.0 - s;
            p[[i, 1]] = s;
        }
        return p;
    }
    let mut p = z.to_owned();
    for mut row in p.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

pub const MODEL_FORMAT: &str = "labelaug-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    kind: String,
    /// `[d]` linear, `[k, d]` softmax, `[d, h, k]` MLP.
    shape: Vec<usize>,
    bias: bool,
    params: Vec<f64>,
}

impl From<&Model> for ModelDocument {
    fn from(m: &Model) -> Self {
        let (kind, shape, bias) = match m {
            Model::Linear(l) => ("linear_binary", vec![l.d()], l.has_bias),
            Model::Softmax(s) => ("softmax_linear", vec![s.k, s.d], true),
            Model::Mlp(p) => ("mlp_relu", vec![p.d, p.h, p.k], true),
        };
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: kind.into(),
            shape,
            bias,
            params: m.params().to_vec(),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<Model> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(Error::parse("model json", format!("unsupported format {} v{}", self.format, self.version)));
        }
        let bad_shape = || Error::parse("model json", format!("shape {:?} does not fit {} parameters", self.shape, self.params.len()));
        let model = match (self.kind.as_str(), self.shape.as_slice()) {
            ("linear_binary", &[d]) => {
                if self.params.len() != d + usize::from(self.bias) {
                    return Err(bad_shape());
                }
                Model::Linear(LinearBinaryModel {
                    params: self.params,
                    has_bias: self.bias,
                })
            }
            ("softmax_linear", &[k, d]) => {
                if self.params.len() != k * d + k {
                    return Err(bad_shape());
                }
                Model::Softmax(SoftmaxLinear { k, d, params: self.params })
            }
            ("mlp_relu", &[d, h, k]) => {
                if self.params.len() != h * d + h + k * h + k {
                    return Err(bad_shape());
                }
                Model::Mlp(MlpModel { d, h, k, params: self.params })
            }
            _ => return Err(Error::parse("model json", format!("unknown model kind {} with shape {:?}", self.kind, self.shape))),
        };
        if model.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::parse("model json", "non-finite parameter"));
        }
        Ok(model)
    }
}

/// Flat parameter vector as an owned array (helper for norm computations).
pub fn param_vector(m: &Model) -> Array1<f64> {
    Array1::from(m.params().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn linear_zero_weights_give_half() {
        let m = Model::from(LinearBinaryModel::zeros(3));
        let p = m.predict_proba(array![[1.0, 2.0, 3.0], [-4.0, 0.0, 9.0]].view()).unwrap();
        assert!(p.column(1).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn linear_dot_product() {
        let m = Model::from(LinearBinaryModel::from_weights(vec![1.0, 0.1]));
        let z = m.logits(array![[1.0, 0.1]].view()).unwrap();
        assert!((z[[0, 0]] - 1.01).abs() < 1e-15);
        assert!(m.logits(array![[1.0]].view()).is_err());
    }

    #[test]
    fn mlp_with_zero_output_layer_is_uniform() {
        let mut mlp = MlpModel::uniform_init(4, 6, 5, &mut seeded(1));
        mlp.w2_mut().fill(0.0);
        let len = mlp.params.len();
        mlp.params[len - 5..].iter_mut().for_each(|b| *b = 0.0);
        let p = Model::from(mlp).predict_proba(array![[1.0, -1.0, 0.5, 2.0]].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn mlp_captures_relu_activations() {
        let mlp = Model::from(MlpModel::uniform_init(3, 8, 2, &mut seeded(2)));
        let f = mlp.forward(array![[1.0, 2.0, -1.0], [0.0, 0.5, 0.5]].view(), true).unwrap();
        let h = f.hidden.unwrap();
        assert_eq!(h.dim(), (2, 8));
        assert!(h.iter().all(|&v| v >= 0.0));
        assert!(mlp.forward(array![[1.0, 2.0, -1.0]].view(), false).unwrap().hidden.is_none());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let models = [
            Model::from(LinearBinaryModel::uniform_init(4, &mut seeded(3)).with_bias(0.25)),
            Model::from(SoftmaxLinear::uniform_init(3, 4, &mut seeded(4))),
            Model::from(MlpModel::uniform_init(3, 5, 2, &mut seeded(5))),
        ];
        for m in models {
            let back = Model::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
        }
        assert!(Model::from_json(r#"{"format":"labelaug-model","version":1,"kind":"linear_binary","shape":[3],"bias":false,"params":[1.0]}"#).is_err());
        assert!(Model::from_json(r#"{"format":"other","version":1,"kind":"linear_binary","shape":[1],"bias":false,"params":[1.0]}"#).is_err());
    }

    #[test]
    fn prediction_and_error_rate() {
        let m = Model::from(LinearBinaryModel::from_weights(vec![1.0]));
        assert_eq!(m.predict(array![[2.0], [-1.0]].view()).unwrap(), vec![1, 0]);
        assert_eq!(m.error_rate(array![[2.0], [-1.0]].view(), &[1, 1]).unwrap(), 0.5);
    }
}
