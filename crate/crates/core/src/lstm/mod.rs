//! The Strategy-1 predictor: a 2-stacked LSTM with a scalar output head
//! that predicts the next location shift from a window of fused features.
//!
//! The network consumes windows of four features per timestep, in this
//! order: previous location shift (m), accelerator pedal position (%),
//! steering angle (deg), speed (m/s). Inputs and target are min/max scaled
//! to [0, 1] with ranges learned from the training split; predictions are
//! inverse-scaled back to meters.

mod gradcheck;
mod model_file;
mod train;

pub use gradcheck::{analytic_gradient, gradient_check, max_relative_deviation, numeric_gradient};
pub use model_file::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{evaluate, train, EpochLoss, EvalMetrics};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint};
use crate::ingest::{AlignedFrame, FeatureScaler};

/// Input features per timestep.
pub const FEATURE_COUNT: usize = 4;

/// Canonical feature order fed to the network.
pub const FEATURE_ORDER: [&str; FEATURE_COUNT] =
    ["prev_shift_m", "accel_pct", "steering_deg", "speed_mps"];

/// Index of the target (next location shift) in the scaler's columns; the
/// four input features occupy columns 0..=3.
pub const TARGET_COLUMN: usize = FEATURE_COUNT;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out += M x
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (row, out_r) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *out_r += acc;
        }
    }

    /// out += M^T y
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (row, &yr) in self.data.chunks_exact(self.cols).zip(y.iter()) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += yr * a;
            }
        }
    }

    /// M += y x^T
    pub fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (row, &yr) in self.data.chunks_exact_mut(self.cols).zip(y.iter()) {
            for (m, a) in row.iter_mut().zip(x) {
                *m += yr * a;
            }
        }
    }
}

/// Weights of one gate: input path, recurrent path, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Mat,
    pub u: Mat,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize, input: usize) -> Self {
        GateParams {
            w: Mat::zeros(hidden, input),
            u: Mat::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    fn param_count(&self) -> usize {
        self.w.data.len() + self.u.data.len() + self.b.len()
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w.data);
        out.extend_from_slice(&self.u.data);
        out.extend_from_slice(&self.b);
    }

    fn unflatten_from(&mut self, it: &mut std::slice::Iter<'_, f64>) {
        for v in self
            .w
            .data
            .iter_mut()
            .chain(self.u.data.iter_mut())
            .chain(self.b.iter_mut())
        {
            *v = *it.next().expect("parameter vector too short");
        }
    }
}

/// One LSTM layer: four gates over the input and recurrent paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_gate: GateParams,
    pub forget_gate: GateParams,
    pub cell_gate: GateParams,
    pub output_gate: GateParams,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayerParams {
            input_size,
            hidden_size,
            input_gate: GateParams::zeros(hidden_size, input_size),
            forget_gate: GateParams::zeros(hidden_size, input_size),
            cell_gate: GateParams::zeros(hidden_size, input_size),
            output_gate: GateParams::zeros(hidden_size, input_size),
        }
    }

    pub fn param_count(&self) -> usize {
        self.input_gate.param_count()
            + self.forget_gate.param_count()
            + self.cell_gate.param_count()
            + self.output_gate.param_count()
    }

    fn gates(&self) -> [&GateParams; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.cell_gate,
            &self.output_gate,
        ]
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        for g in self.gates() {
            g.flatten_into(out);
        }
    }

    fn unflatten_from(&mut self, it: &mut std::slice::Iter<'_, f64>) {
        self.input_gate.unflatten_from(it);
        self.forget_gate.unflatten_from(it);
        self.cell_gate.unflatten_from(it);
        self.output_gate.unflatten_from(it);
    }

    /// Run the layer over an input sequence and return the hidden states,
    /// starting from zero hidden and cell state.
    pub fn forward_sequence(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut h = vec![0.0; self.hidden_size];
        let mut c = vec![0.0; self.hidden_size];
        let mut out = Vec::with_capacity(inputs.len());
        let mut pre = GateBuffers::new(self.hidden_size);
        for x in inputs {
            if x.len() != self.input_size {
                return Err(Error::Dimension(format!(
                    "layer expects input width {}, got {}",
                    self.input_size,
                    x.len()
                )));
            }
            self.step(x, &mut h, &mut c, &mut pre);
            out.push(h.clone());
        }
        Ok(out)
    }

    /// One cell step, updating `h` and `c` in place.
    fn step(&self, x: &[f64], h: &mut [f64], c: &mut [f64], buf: &mut GateBuffers) {
        buf.fill_preactivations(self, x, h);
        for k in 0..self.hidden_size {
            let i = sigmoid(buf.i[k]);
            let f = sigmoid(buf.f[k]);
            let g = buf.g[k].tanh();
            let o = sigmoid(buf.o[k]);
            c[k] = f * c[k] + i * g;
            h[k] = o * c[k].tanh();
        }
    }
}

/// Scratch space for one cell step's pre-activations.
pub(crate) struct GateBuffers {
    pub(crate) i: Vec<f64>,
    pub(crate) f: Vec<f64>,
    pub(crate) g: Vec<f64>,
    pub(crate) o: Vec<f64>,
}

impl GateBuffers {
    pub(crate) fn new(hidden: usize) -> Self {
        GateBuffers {
            i: vec![0.0; hidden],
            f: vec![0.0; hidden],
            g: vec![0.0; hidden],
            o: vec![0.0; hidden],
        }
    }

    pub(crate) fn fill_preactivations(&mut self, p: &LstmLayerParams, x: &[f64], h: &[f64]) {
        for (buf, gate) in [
            (&mut self.i, &p.input_gate),
            (&mut self.f, &p.forget_gate),
            (&mut self.g, &p.cell_gate),
            (&mut self.o, &p.output_gate),
        ] {
            buf.copy_from_slice(&gate.b);
            gate.w.matvec_add(x, buf);
            gate.u.matvec_add(h, buf);
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Affine output head mapping the last hidden state to a scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Network hidden-layer sizes. The input width is fixed by the feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for NetworkDims {
    fn default() -> Self {
        NetworkDims {
            hidden1: 128,
            hidden2: 64,
        }
    }
}

/// Model metadata carried alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub version: u32,
    pub window_len: usize,
    pub feature_order: Vec<String>,
    pub validation_rmse_m: f64,
    pub validation_max_abs_error_m: f64,
    pub validation_mae_m: f64,
    pub seed: u64,
    /// Fingerprint of the training configuration, when trained via a tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// The 2-stacked LSTM shift predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub head: OutputHead,
    /// Min/max ranges for the four input features plus the target
    /// (column [`TARGET_COLUMN`]).
    pub scaler: FeatureScaler,
    pub metadata: ModelMetadata,
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub window_len: usize,
    /// Leading fraction of the dataset used for training; the rest
    /// validates (contiguous temporal split).
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 500,
            batch_size: 50,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            window_len: 10,
            train_fraction: 0.7,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.window_len == 0 {
            return Err(Error::invalid(
                "epochs, batch size, window length must be positive",
            ));
        }
        if !(self.learning_rate > 0.0
            && self.adam_beta1 > 0.0
            && self.adam_beta1 < 1.0
            && self.adam_beta2 > 0.0
            && self.adam_beta2 < 1.0
            && self.adam_epsilon > 0.0)
        {
            return Err(Error::invalid("bad optimizer constants"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// One training example: a window of per-timestep features plus the next
/// location shift in meters.
///
/// Windows come out of [`build_windows`] with raw (unscaled) features;
/// [`train`] fits the scaler on its training split and scales internally,
/// after which training inputs lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindow {
    pub inputs: Vec<[f64; FEATURE_COUNT]>,
    pub target_m: f64,
}

impl SupervisedWindow {
    pub fn new(inputs: Vec<[f64; FEATURE_COUNT]>, target_m: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty window"));
        }
        if !(target_m.is_finite() && target_m >= 0.0) {
            return Err(Error::invalid(format!("bad window target {target_m}")));
        }
        Ok(SupervisedWindow { inputs, target_m })
    }
}

/// Slide a stride-1 window over an aligned trace.
///
/// The "previous shift" feature at a step is the GNSS-derived shift ending
/// at that step; the target is the shift from the window's last frame to
/// the following frame.
pub fn build_windows(frames: &[AlignedFrame], window_len: usize) -> Result<Vec<SupervisedWindow>> {
    if window_len == 0 {
        return Err(Error::invalid("window length must be >= 1"));
    }
    if frames.len() < window_len + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least {} frames for window length {window_len}, got {}",
            window_len + 2,
            frames.len()
        )));
    }
    let points: Vec<(f64, GeoPoint)> = frames
        .iter()
        .map(|f| Ok((f.t, GeoPoint::from_degrees(f.lat_deg, f.lon_deg)?)))
        .collect::<Result<_>>()?;
    let shifts = geo::location_shift_series(&points)?.shifts;

    let mut windows = Vec::with_capacity(frames.len() - window_len - 1);
    for end in window_len..frames.len() - 1 {
        let mut inputs = Vec::with_capacity(window_len);
        for s in end + 1 - window_len..=end {
            let f = &frames[s];
            inputs.push([shifts[s - 1], f.accel_pct, f.steering_deg, f.speed_mps]);
        }
        windows.push(SupervisedWindow::new(inputs, shifts[end])?);
    }
    Ok(windows)
}

/// Deterministic seeded initialization: weights uniform in +-1/sqrt(fan-in),
/// biases zero except the forget gate's at +1.
pub fn init_network(dims: NetworkDims, window_len: usize, seed: u64) -> LstmNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer1 = LstmLayerParams::zeros(FEATURE_COUNT, dims.hidden1);
    let mut layer2 = LstmLayerParams::zeros(dims.hidden1, dims.hidden2);
    for layer in [&mut layer1, &mut layer2] {
        let w_bound = 1.0 / (layer.input_size as f64).sqrt();
        let u_bound = 1.0 / (layer.hidden_size as f64).sqrt();
        for gate in [
            &mut layer.input_gate,
            &mut layer.forget_gate,
            &mut layer.cell_gate,
            &mut layer.output_gate,
        ] {
            for v in gate.w.data.iter_mut() {
                *v = rng.gen_range(-w_bound..w_bound);
            }
            for v in gate.u.data.iter_mut() {
                *v = rng.gen_range(-u_bound..u_bound);
            }
        }
        for v in layer.forget_gate.b.iter_mut() {
            *v = 1.0;
        }
    }
    let head_bound = 1.0 / (dims.hidden2 as f64).sqrt();
    let head = OutputHead {
        w: (0..dims.hidden2)
            .map(|_| rng.gen_range(-head_bound..head_bound))
            .collect(),
        b: 0.0,
    };
    LstmNetwork {
        layer1,
        layer2,
        head,
        scaler: identity_scaler(),
        metadata: ModelMetadata {
            version: model_file::MODEL_FORMAT_VERSION,
            window_len,
            feature_order: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
            validation_rmse_m: 0.0,
            validation_max_abs_error_m: 0.0,
            validation_mae_m: 0.0,
            seed,
            config_hash: None,
        },
    }
}

/// Scaler whose apply/invert are the identity on every column.
pub fn identity_scaler() -> FeatureScaler {
    FeatureScaler {
        ranges: vec![(0.0, 1.0); FEATURE_COUNT + 1],
        degenerate: vec![],
    }
}

impl LstmNetwork {
    pub fn dims(&self) -> NetworkDims {
        NetworkDims {
            hidden1: self.layer1.hidden_size,
            hidden2: self.layer2.hidden_size,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer1.param_count() + self.layer2.param_count() + self.head.w.len() + 1
    }

    /// All parameters in canonical order (layer1 gates i/f/g/o each as
    /// w,u,b; layer2 likewise; head weights; head bias).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.layer1.flatten_into(&mut out);
        self.layer2.flatten_into(&mut out);
        out.extend_from_slice(&self.head.w);
        out.push(self.head.b);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        self.layer1.unflatten_from(&mut it);
        self.layer2.unflatten_from(&mut it);
        for v in self.head.w.iter_mut() {
            *v = *it.next().unwrap();
        }
        self.head.b = *it.next().unwrap();
        Ok(())
    }

    fn check_window_shape(&self, len: usize) -> Result<()> {
        if len != self.metadata.window_len {
            return Err(Error::Dimension(format!(
                "window length {len} does not match model window {}",
                self.metadata.window_len
            )));
        }
        Ok(())
    }

    /// Head output for a window of *scaled* inputs, before inverse scaling.
    pub fn forward_scaled(&self, inputs: &[[f64; FEATURE_COUNT]]) -> Result<f64> {
        self.check_window_shape(inputs.len())?;
        let mut h1 = vec![0.0; self.layer1.hidden_size];
        let mut c1 = vec![0.0; self.layer1.hidden_size];
        let mut h2 = vec![0.0; self.layer2.hidden_size];
        let mut c2 = vec![0.0; self.layer2.hidden_size];
        let mut buf1 = GateBuffers::new(self.layer1.hidden_size);
        let mut buf2 = GateBuffers::new(self.layer2.hidden_size);
        for x in inputs {
            self.layer1.step(x, &mut h1, &mut c1, &mut buf1);
            self.layer2.step(&h1, &mut h2, &mut c2, &mut buf2);
        }
        let mut y = self.head.b;
        for (w, h) in self.head.w.iter().zip(&h2) {
            y += w * h;
        }
        Ok(y)
    }

    /// Predicted next location shift in meters for a window of *scaled*
    /// inputs.
    pub fn forward(&self, inputs: &[[f64; FEATURE_COUNT]]) -> Result<f64> {
        let y = self.forward_scaled(inputs)?;
        Ok(self.scaler.invert(TARGET_COLUMN, y))
    }

    /// Scale a raw feature window with the attached scaler and predict the
    /// next location shift in meters.
    pub fn predict_raw(&self, inputs: &[[f64; FEATURE_COUNT]]) -> Result<f64> {
        let scaled = self.scale_inputs(inputs);
        self.forward(&scaled)
    }

    pub(crate) fn scale_inputs(
        &self,
        inputs: &[[f64; FEATURE_COUNT]],
    ) -> Vec<[f64; FEATURE_COUNT]> {
        inputs
            .iter()
            .map(|row| {
                let mut out = [0.0; FEATURE_COUNT];
                for (j, v) in row.iter().enumerate() {
                    out[j] = self.scaler.apply(j, *v);
                }
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_window(len: usize) -> Vec<[f64; FEATURE_COUNT]> {
        (0..len).map(|i| [0.1 * i as f64, 0.2, 0.3, 0.4]).collect()
    }

    #[test]
    fn same_seed_identical_parameters() {
        let dims = NetworkDims {
            hidden1: 6,
            hidden2: 3,
        };
        let a = init_network(dims, 5, 42);
        let b = init_network(dims, 5, 42);
        assert_eq!(a.params_flat(), b.params_flat());
    }

    #[test]
    fn different_seeds_differ() {
        let dims = NetworkDims {
            hidden1: 6,
            hidden2: 3,
        };
        let a = init_network(dims, 5, 42);
        let b = init_network(dims, 5, 43);
        assert_ne!(a.params_flat(), b.params_flat());
    }

    #[test]
    fn forget_bias_offset_applied() {
        let net = init_network(
            NetworkDims {
                hidden1: 4,
                hidden2: 2,
            },
            5,
            1,
        );
        assert!(net.layer1.forget_gate.b.iter().all(|&b| b == 1.0));
        assert!(net.layer2.forget_gate.b.iter().all(|&b| b == 1.0));
        assert!(net.layer1.input_gate.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn all_zero_network_outputs_head_bias() {
        let mut net = init_network(
            NetworkDims {
                hidden1: 4,
                hidden2: 2,
            },
            5,
            1,
        );
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        net.head.b = 0.25;
        let w = tiny_window(5);
        // zero cell state forces zero hidden state, so only the bias remains
        assert_eq!(net.forward_scaled(&w).unwrap(), 0.25);
        // identity-range scaler keeps the value in meters
        assert_eq!(net.forward(&w).unwrap(), 0.25);
    }

    #[test]
    fn forward_is_deterministic() {
        let net = init_network(
            NetworkDims {
                hidden1: 8,
                hidden2: 4,
            },
            6,
            9,
        );
        let w = tiny_window(6);
        let a = net.forward(&w).unwrap();
        let b = net.forward(&w).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a.is_finite());
    }

    #[test]
    fn forward_rejects_wrong_window_length() {
        let net = init_network(
            NetworkDims {
                hidden1: 4,
                hidden2: 2,
            },
            5,
            1,
        );
        assert!(matches!(
            net.forward(&tiny_window(4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_cell_hand_computation() {
        // 1-unit, 1-step cell with every weight 0.5 and zero bias, input 1:
        //   gates sigma(0.5), candidate tanh(0.5),
        //   c = sigma(0.5) * tanh(0.5), h = sigma(0.5) * tanh(c)
        let mut layer = LstmLayerParams::zeros(1, 1);
        for gate in [
            &mut layer.input_gate,
            &mut layer.forget_gate,
            &mut layer.cell_gate,
            &mut layer.output_gate,
        ] {
            gate.w.data[0] = 0.5;
            gate.u.data[0] = 0.5;
        }
        let hs = layer.forward_sequence(&[vec![1.0]]).unwrap();

        // independent scalar oracle, written from the cell equations
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let i = sig(0.5);
        let g = 0.5f64.tanh();
        let c = i * g;
        let expected_h = sig(0.5) * c.tanh();

        assert!((hs[0][0] - expected_h).abs() < 1e-12);
        assert!((c - 0.287649).abs() < 1e-6);
        assert!((expected_h - 0.174270).abs() < 1e-6);
    }

    #[test]
    fn params_flat_round_trip() {
        let net = init_network(
            NetworkDims {
                hidden1: 5,
                hidden2: 3,
            },
            4,
            7,
        );
        let flat = net.params_flat();
        assert_eq!(flat.len(), net.param_count());
        let mut other = init_network(
            NetworkDims {
                hidden1: 5,
                hidden2: 3,
            },
            4,
            99,
        );
        other.set_params_flat(&flat).unwrap();
        assert_eq!(other.params_flat(), flat);
    }

    #[test]
    fn build_windows_shapes_and_features() {
        // constant eastward motion: shift per step is v * dt
        let dt = 1.0 / 120.0;
        let v = 12.0;
        let start = GeoPoint::from_degrees(37.0, -122.0).unwrap();
        let mut p = start;
        let mut frames = Vec::new();
        for i in 0..30 {
            frames.push(AlignedFrame {
                t: i as f64 * dt,
                lat_deg: p.lat_deg(),
                lon_deg: p.lon_deg(),
                speed_mps: v,
                accel_pct: 20.0,
                steering_deg: 0.0,
            });
            p = geo::destination(p, std::f64::consts::FRAC_PI_2, v * dt, Default::default())
                .unwrap();
        }
        let windows = build_windows(&frames, 10).unwrap();
        assert_eq!(windows.len(), 30 - 10 - 1);
        for w in &windows {
            assert_eq!(w.inputs.len(), 10);
            assert!((w.target_m - v * dt).abs() < 1e-6);
            assert!((w.inputs[0][0] - v * dt).abs() < 1e-6);
            assert_eq!(w.inputs[0][3], v);
        }
    }

    #[test]
    fn build_windows_insufficient_frames() {
        let frames = vec![
            AlignedFrame {
                t: 0.0,
                lat_deg: 0.0,
                lon_deg: 0.0,
                speed_mps: 0.0,
                accel_pct: 0.0,
                steering_deg: 0.0
            };
            5
        ];
        assert!(build_windows(&frames, 10).is_err());
    }
}
