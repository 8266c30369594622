//! Training: backpropagation through time over each window, MAE loss,
//! Adam updates, and the evaluation metrics recorded in model metadata.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureScaler;

use super::{
    init_network, sigmoid, LstmLayerParams, LstmNetwork, NetworkDims, SupervisedWindow,
    TrainingConfig, FEATURE_COUNT, TARGET_COLUMN,
};

/// Per-epoch loss pair, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mae_m: f64,
    pub val_mae_m: f64,
}

/// Prediction-error metrics over a dataset, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub rmse_m: f64,
    pub max_abs_error_m: f64,
    pub mae_m: f64,
}

/// Per-timestep forward caches of one layer over one window.
pub(crate) struct LayerCache {
    pub i: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub o: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

pub(crate) fn forward_cached(p: &LstmLayerParams, xs: &[Vec<f64>]) -> LayerCache {
    let n = p.hidden_size;
    let steps = xs.len();
    let mut cache = LayerCache {
        i: Vec::with_capacity(steps),
        f: Vec::with_capacity(steps),
        g: Vec::with_capacity(steps),
        o: Vec::with_capacity(steps),
        c: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        h: Vec::with_capacity(steps),
    };
    let mut h_prev = vec![0.0; n];
    let mut c_prev = vec![0.0; n];
    let mut buf = super::GateBuffers::new(n);
    for x in xs {
        buf.fill_preactivations(p, x, &h_prev);
        let mut i_t = vec![0.0; n];
        let mut f_t = vec![0.0; n];
        let mut g_t = vec![0.0; n];
        let mut o_t = vec![0.0; n];
        let mut c_t = vec![0.0; n];
        let mut tanh_c_t = vec![0.0; n];
        let mut h_t = vec![0.0; n];
        for k in 0..n {
            i_t[k] = sigmoid(buf.i[k]);
            f_t[k] = sigmoid(buf.f[k]);
            g_t[k] = buf.g[k].tanh();
            o_t[k] = sigmoid(buf.o[k]);
            c_t[k] = f_t[k] * c_prev[k] + i_t[k] * g_t[k];
            tanh_c_t[k] = c_t[k].tanh();
            h_t[k] = o_t[k] * tanh_c_t[k];
        }
        h_prev.copy_from_slice(&h_t);
        c_prev.copy_from_slice(&c_t);
        cache.i.push(i_t);
        cache.f.push(f_t);
        cache.g.push(g_t);
        cache.o.push(o_t);
        cache.c.push(c_t);
        cache.tanh_c.push(tanh_c_t);
        cache.h.push(h_t);
    }
    cache
}

/// BPTT through one layer. `dh_inject[t]` carries the loss gradient w.r.t.
/// `h_t` coming from above (the next layer or the output head). Parameter
/// gradients accumulate into `grads`; the return value is the gradient
/// w.r.t. each input step.
pub(crate) fn backward(
    p: &LstmLayerParams,
    xs: &[Vec<f64>],
    cache: &LayerCache,
    dh_inject: &[Vec<f64>],
    grads: &mut LstmLayerParams,
) -> Vec<Vec<f64>> {
    let n = p.hidden_size;
    let steps = xs.len();
    let zeros = vec![0.0; n];
    let mut dxs = vec![vec![0.0; p.input_size]; steps];
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut da_i = vec![0.0; n];
    let mut da_f = vec![0.0; n];
    let mut da_g = vec![0.0; n];
    let mut da_o = vec![0.0; n];

    for t in (0..steps).rev() {
        let c_prev = if t > 0 { &cache.c[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.h[t - 1] } else { &zeros };
        for k in 0..n {
            let dh = dh_inject[t][k] + dh_next[k];
            let o = cache.o[t][k];
            let tc = cache.tanh_c[t][k];
            let d_o = dh * tc;
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            let i = cache.i[t][k];
            let f = cache.f[t][k];
            let g = cache.g[t][k];
            da_o[k] = d_o * o * (1.0 - o);
            da_f[k] = dc * c_prev[k] * f * (1.0 - f);
            da_i[k] = dc * g * i * (1.0 - i);
            da_g[k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (da, gate, ggrad) in [
            (&da_i, &p.input_gate, &mut grads.input_gate),
            (&da_f, &p.forget_gate, &mut grads.forget_gate),
            (&da_g, &p.cell_gate, &mut grads.cell_gate),
            (&da_o, &p.output_gate, &mut grads.output_gate),
        ] {
            ggrad.w.outer_add(da, &xs[t]);
            ggrad.u.outer_add(da, h_prev);
            for (b, d) in ggrad.b.iter_mut().zip(da.iter()) {
                *b += d;
            }
            gate.w.matvec_t_add(da, &mut dxs[t]);
            gate.u.matvec_t_add(da, &mut dh_next);
        }
    }
    dxs
}

/// Gradient buffer shaped like a network.
pub(crate) struct NetGrads {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl NetGrads {
    pub(crate) fn zeros_like(net: &LstmNetwork) -> Self {
        NetGrads {
            layer1: LstmLayerParams::zeros(net.layer1.input_size, net.layer1.hidden_size),
            layer2: LstmLayerParams::zeros(net.layer2.input_size, net.layer2.hidden_size),
            head_w: vec![0.0; net.head.w.len()],
            head_b: 0.0,
        }
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.layer1.flatten_into(&mut out);
        self.layer2.flatten_into(&mut out);
        out.extend_from_slice(&self.head_w);
        out.push(self.head_b);
        out
    }
}

/// MAE loss of one window in the scaled domain.
pub(crate) fn window_loss_scaled(
    net: &LstmNetwork,
    xs: &[Vec<f64>],
    target_scaled: f64,
) -> Result<f64> {
    let inputs: Vec<[f64; FEATURE_COUNT]> = xs
        .iter()
        .map(|v| {
            let mut a = [0.0; FEATURE_COUNT];
            a.copy_from_slice(v);
            a
        })
        .collect();
    Ok((net.forward_scaled(&inputs)? - target_scaled).abs())
}

/// Forward + backward for one window; accumulates parameter gradients of
/// the MAE loss and returns `(loss, residual)` in the scaled domain.
///
/// The MAE subgradient at an exactly-zero residual is taken as 0.
pub(crate) fn accumulate_window_gradient(
    net: &LstmNetwork,
    xs: &[Vec<f64>],
    target_scaled: f64,
    grads: &mut NetGrads,
) -> (f64, f64) {
    let cache1 = forward_cached(&net.layer1, xs);
    let cache2 = forward_cached(&net.layer2, &cache1.h);
    let steps = xs.len();
    let h2_last = &cache2.h[steps - 1];
    let mut pred = net.head.b;
    for (w, h) in net.head.w.iter().zip(h2_last) {
        pred += w * h;
    }
    let residual = pred - target_scaled;
    let loss = residual.abs();
    let sign = if residual > 0.0 {
        1.0
    } else if residual < 0.0 {
        -1.0
    } else {
        0.0
    };
    if sign != 0.0 {
        grads.head_b += sign;
        for (gw, h) in grads.head_w.iter_mut().zip(h2_last) {
            *gw += sign * h;
        }
        let mut dh2 = vec![vec![0.0; net.layer2.hidden_size]; steps];
        for (d, w) in dh2[steps - 1].iter_mut().zip(&net.head.w) {
            *d = sign * w;
        }
        let dh1 = backward(&net.layer2, &cache1.h, &cache2, &dh2, &mut grads.layer2);
        backward(&net.layer1, xs, &cache1, &dh1, &mut grads.layer1);
    }
    (loss, residual)
}

/// Adam optimizer state over the flat parameter vector.
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub(crate) fn new(config: &TrainingConfig, param_count: usize) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_epsilon,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, theta: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(theta.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..theta.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            theta[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

struct ScaledWindow {
    xs: Vec<Vec<f64>>,
    target_scaled: f64,
    target_m: f64,
}

fn scale_window(w: &SupervisedWindow, scaler: &FeatureScaler) -> ScaledWindow {
    let xs = w
        .inputs
        .iter()
        .map(|row| (0..FEATURE_COUNT).map(|j| scaler.apply(j, row[j])).collect())
        .collect();
    ScaledWindow {
        xs,
        target_scaled: scaler.apply(TARGET_COLUMN, w.target_m),
        target_m: w.target_m,
    }
}

fn mean_abs_error_m(net: &LstmNetwork, windows: &[ScaledWindow]) -> f64 {
    let mut sum = 0.0;
    for w in windows {
        let inputs: Vec<[f64; FEATURE_COUNT]> = w
            .xs
            .iter()
            .map(|v| {
                let mut a = [0.0; FEATURE_COUNT];
                a.copy_from_slice(v);
                a
            })
            .collect();
        let pred_m = net
            .forward(&inputs)
            .expect("window shape checked at train start");
        sum += (pred_m - w.target_m).abs();
    }
    sum / windows.len() as f64
}

/// Train a fresh network on `windows` (raw features, meters targets).
///
/// The dataset splits contiguously: the leading `train_fraction` trains,
/// the remainder validates. The scaler is fit on the training split only.
/// Returns the trained network (metadata filled from the validation split)
/// and one `(train MAE, validation MAE)` pair per epoch.
pub fn train(
    windows: &[SupervisedWindow],
    dims: NetworkDims,
    config: &TrainingConfig,
) -> Result<(LstmNetwork, Vec<EpochLoss>)> {
    config.validate()?;
    if windows.len() < 2 {
        return Err(Error::InsufficientData(
            "training needs at least 2 windows".into(),
        ));
    }
    for w in windows {
        if w.inputs.len() != config.window_len {
            return Err(Error::Dimension(format!(
                "window of length {} in a run configured for {}",
                w.inputs.len(),
                config.window_len
            )));
        }
    }
    let split = ((windows.len() as f64 * config.train_fraction).round() as usize)
        .clamp(1, windows.len() - 1);
    let (train_raw, val_raw) = windows.split_at(split);

    // scaler learned from the training split only
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); FEATURE_COUNT + 1];
    for w in train_raw {
        for row in &w.inputs {
            for j in 0..FEATURE_COUNT {
                columns[j].push(row[j]);
            }
        }
        columns[TARGET_COLUMN].push(w.target_m);
    }
    let col_refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let scaler = FeatureScaler::fit_columns(&col_refs)?;

    let train_set: Vec<ScaledWindow> = train_raw.iter().map(|w| scale_window(w, &scaler)).collect();
    let val_set: Vec<ScaledWindow> = val_raw.iter().map(|w| scale_window(w, &scaler)).collect();

    let mut net = init_network(dims, config.window_len, config.seed);
    net.scaler = scaler;

    let mut adam = Adam::new(config, net.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c_4e55_0123);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = NetGrads::zeros_like(&net);
            for &idx in batch {
                let w = &train_set[idx];
                accumulate_window_gradient(&net, &w.xs, w.target_scaled, &mut grads);
            }
            let mut gflat = grads.flatten();
            let inv = 1.0 / batch.len() as f64;
            gflat.iter_mut().for_each(|g| *g *= inv);
            let mut theta = net.params_flat();
            adam.step(&mut theta, &gflat);
            net.set_params_flat(&theta)?;
        }
        let train_mae_m = mean_abs_error_m(&net, &train_set);
        let val_mae_m = mean_abs_error_m(&net, &val_set);
        if !train_mae_m.is_finite() || !val_mae_m.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochLoss {
            epoch,
            train_mae_m,
            val_mae_m,
        });
    }

    let metrics = evaluate(&net, val_raw)?;
    net.metadata.validation_rmse_m = metrics.rmse_m;
    net.metadata.validation_max_abs_error_m = metrics.max_abs_error_m;
    net.metadata.validation_mae_m = metrics.mae_m;
    Ok((net, history))
}

/// Standard error metrics of the model over raw windows, in meters.
pub fn evaluate(net: &LstmNetwork, windows: &[SupervisedWindow]) -> Result<EvalMetrics> {
    if windows.is_empty() {
        return Err(Error::InsufficientData("evaluate on empty dataset".into()));
    }
    let mut sq_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut max_abs = 0.0f64;
    for w in windows {
        let pred = net.predict_raw(&w.inputs)?;
        let err = pred - w.target_m;
        sq_sum += err * err;
        abs_sum += err.abs();
        max_abs = max_abs.max(err.abs());
    }
    let n = windows.len() as f64;
    Ok(EvalMetrics {
        rmse_m: (sq_sum / n).sqrt(),
        max_abs_error_m: max_abs,
        mae_m: abs_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dims_small() -> NetworkDims {
        NetworkDims {
            hidden1: 8,
            hidden2: 4,
        }
    }

    /// Synthetic supervised set whose target is a smooth function of the
    /// speed feature, mimicking shift = speed * dt.
    fn synthetic_windows(count: usize, window_len: usize, seed: u64) -> Vec<SupervisedWindow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = 1.0 / 120.0;
        (0..count)
            .map(|_| {
                let speed: f64 = rng.gen_range(3.0..15.0);
                let inputs = (0..window_len)
                    .map(|_| [speed * dt, 20.0, 0.0, speed])
                    .collect();
                SupervisedWindow::new(inputs, speed * dt).unwrap()
            })
            .collect()
    }

    #[test]
    fn loss_history_has_one_entry_per_epoch() {
        let windows = synthetic_windows(40, 5, 3);
        let config = TrainingConfig {
            epochs: 3,
            batch_size: 8,
            window_len: 5,
            ..Default::default()
        };
        let (_, history) = train(&windows, dims_small(), &config).unwrap();
        assert_eq!(history.len(), 3);
        assert_eq!(history[0].epoch, 1);
        assert_eq!(history[2].epoch, 3);
    }

    #[test]
    fn table_defaults_accepted() {
        let config = TrainingConfig::default();
        assert_eq!(config.epochs, 500);
        assert_eq!(config.batch_size, 50);
        assert_eq!(config.learning_rate, 0.01);
        config.validate().unwrap();
        assert_eq!(NetworkDims::default().hidden1, 128);
        assert_eq!(NetworkDims::default().hidden2, 64);
    }

    #[test]
    fn training_learns_speed_dt_function() {
        let windows = synthetic_windows(300, 5, 11);
        let config = TrainingConfig {
            epochs: 40,
            batch_size: 50,
            window_len: 5,
            seed: 5,
            ..Default::default()
        };
        let (net, history) = train(&windows, dims_small(), &config).unwrap();
        let first = history.first().unwrap();
        let last = history.last().unwrap();
        assert!(
            last.train_mae_m < first.train_mae_m,
            "train curve must decrease: {first:?} -> {last:?}"
        );
        assert!(last.val_mae_m < first.val_mae_m);
        assert!(
            net.metadata.validation_mae_m < 0.01,
            "mae {}",
            net.metadata.validation_mae_m
        );
        assert!(net.metadata.validation_max_abs_error_m >= 0.0);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let windows = synthetic_windows(60, 4, 21);
        let config = TrainingConfig {
            epochs: 4,
            batch_size: 10,
            window_len: 4,
            seed: 77,
            ..Default::default()
        };
        let (a, ha) = train(&windows, dims_small(), &config).unwrap();
        let (b, hb) = train(&windows, dims_small(), &config).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        assert_eq!(ha, hb);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let windows = synthetic_windows(30, 4, 2);
        let config = TrainingConfig {
            epochs: 10,
            batch_size: 10,
            window_len: 4,
            learning_rate: 1e308,
            ..Default::default()
        };
        match train(&windows, dims_small(), &config) {
            Err(Error::TrainingDiverged { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let config = TrainingConfig::default();
        let mut adam = Adam::new(&config, 6);
        let mut theta = vec![1.0, -2.0, 0.5, 3.0, -0.25, 0.0];
        let before = theta.clone();
        adam.step(&mut theta, &[0.0; 6]);
        assert_eq!(theta, before);
    }

    #[test]
    fn evaluate_perfect_predictor_is_zero() {
        // zero network with head bias equal to the constant target
        let mut net = init_network(dims_small(), 3, 1);
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        net.head.b = 0.25;
        let windows: Vec<SupervisedWindow> = (0..5)
            .map(|_| SupervisedWindow::new(vec![[0.0, 0.0, 0.0, 0.0]; 3], 0.25).unwrap())
            .collect();
        let m = evaluate(&net, &windows).unwrap();
        assert_eq!(m.rmse_m, 0.0);
        assert_eq!(m.max_abs_error_m, 0.0);
        assert_eq!(m.mae_m, 0.0);
    }

    #[test]
    fn evaluate_constant_zero_predictor_hand_arithmetic() {
        let mut net = init_network(dims_small(), 3, 1);
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        let windows = vec![
            SupervisedWindow::new(vec![[0.0; 4]; 3], 0.1).unwrap(),
            SupervisedWindow::new(vec![[0.0; 4]; 3], 0.3).unwrap(),
        ];
        let m = evaluate(&net, &windows).unwrap();
        assert!((m.rmse_m - 0.05f64.sqrt()).abs() < 1e-12);
        assert!((m.max_abs_error_m - 0.3).abs() < 1e-12);
        assert!((m.mae_m - 0.2).abs() < 1e-12);
    }

    #[test]
    fn evaluate_empty_dataset_is_error() {
        let net = init_network(dims_small(), 3, 1);
        assert!(evaluate(&net, &[]).is_err());
    }

    #[test]
    fn train_rejects_mismatched_window_length() {
        let windows = synthetic_windows(10, 4, 2);
        let config = TrainingConfig {
            epochs: 1,
            window_len: 6,
            ..Default::default()
        };
        assert!(matches!(
            train(&windows, dims_small(), &config),
            Err(Error::Dimension(_))
        ));
    }
}
