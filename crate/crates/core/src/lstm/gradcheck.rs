//! Finite-difference verification of the analytic BPTT gradients.
//!
//! The check compares every analytic parameter gradient of the window MAE
//! loss against central finite differences. Exact-zero-residual windows are
//! skipped (the MAE subgradient there is defined as 0 while the numeric
//! estimate sees the kink), as are parameters where both estimates vanish.

use crate::error::Result;

use super::train::{accumulate_window_gradient, window_loss_scaled, NetGrads};
use super::{LstmNetwork, FEATURE_COUNT};

/// Floor below which a gradient pair counts as locally flat and is skipped.
pub const GRAD_SKIP_FLOOR: f64 = 1e-8;

fn to_xs(inputs: &[[f64; FEATURE_COUNT]]) -> Vec<Vec<f64>> {
    inputs.iter().map(|r| r.to_vec()).collect()
}

/// Analytic gradient of the scaled-domain MAE loss for one window, flat and
/// in the network's canonical parameter order.
pub fn analytic_gradient(
    net: &LstmNetwork,
    inputs: &[[f64; FEATURE_COUNT]],
    target_scaled: f64,
) -> Result<Vec<f64>> {
    net.forward_scaled(inputs)?; // shape check
    let xs = to_xs(inputs);
    let mut grads = NetGrads::zeros_like(net);
    accumulate_window_gradient(net, &xs, target_scaled, &mut grads);
    Ok(grads.flatten())
}

/// Central finite differences of the same loss, step `h` per parameter.
pub fn numeric_gradient(
    net: &LstmNetwork,
    inputs: &[[f64; FEATURE_COUNT]],
    target_scaled: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let xs = to_xs(inputs);
    let theta = net.params_flat();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let mut plus = theta.clone();
        plus[k] += h;
        probe.set_params_flat(&plus)?;
        let l_plus = window_loss_scaled(&probe, &xs, target_scaled)?;
        let mut minus = theta.clone();
        minus[k] -= h;
        probe.set_params_flat(&minus)?;
        let l_minus = window_loss_scaled(&probe, &xs, target_scaled)?;
        out.push((l_plus - l_minus) / (2.0 * h));
    }
    Ok(out)
}

/// Largest relative deviation between two gradient vectors, skipping
/// entries where both magnitudes fall below `skip_floor`.
pub fn max_relative_deviation(analytic: &[f64], numeric: &[f64], skip_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale < skip_floor {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Compare analytic vs numeric gradients for one window; returns the max
/// relative deviation. An exactly-zero residual yields 0 (nothing to
/// compare: the subgradient there is 0 by definition).
pub fn gradient_check(
    net: &LstmNetwork,
    inputs: &[[f64; FEATURE_COUNT]],
    target_scaled: f64,
    h: f64,
) -> Result<f64> {
    let residual = net.forward_scaled(inputs)? - target_scaled;
    if residual == 0.0 {
        return Ok(0.0);
    }
    let analytic = analytic_gradient(net, inputs, target_scaled)?;
    let numeric = numeric_gradient(net, inputs, target_scaled, h)?;
    Ok(max_relative_deviation(&analytic, &numeric, GRAD_SKIP_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{init_network, NetworkDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_net(seed: u64) -> LstmNetwork {
        init_network(
            NetworkDims {
                hidden1: 8,
                hidden2: 4,
            },
            6,
            seed,
        )
    }

    fn random_window(seed: u64, len: usize) -> Vec<[f64; FEATURE_COUNT]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| {
                [
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in [1u64, 2, 3] {
            let net = small_net(seed);
            let window = random_window(seed + 100, 6);
            let target = 0.9; // keeps the residual well away from zero
            let residual = net.forward_scaled(&window).unwrap() - target;
            assert!(residual.abs() > 1e-3, "degenerate test window");
            let dev = gradient_check(&net, &window, target, 1e-5).unwrap();
            assert!(dev < 1e-4, "seed {seed}: deviation {dev}");
        }
    }

    #[test]
    fn flat_parameters_are_skipped() {
        // all-zero network: hidden states vanish, so the loss is locally
        // flat in the head weights; both estimates must be ~0 there
        let mut net = small_net(1);
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        net.head.b = 0.3;
        let window = random_window(5, 6);
        let target = 0.1;
        let analytic = analytic_gradient(&net, &window, target).unwrap();
        let numeric = numeric_gradient(&net, &window, target, 1e-5).unwrap();
        // head weight gradients sit at the very end before the bias
        let p = analytic.len();
        for k in p - 5..p - 1 {
            assert!(analytic[k].abs() < 1e-8);
            assert!(numeric[k].abs() < 1e-8);
        }
        let dev = max_relative_deviation(&analytic, &numeric, GRAD_SKIP_FLOOR);
        assert!(dev < 1e-4, "deviation {dev}");
    }

    #[test]
    fn zero_residual_window_is_skipped() {
        let mut net = small_net(1);
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        net.head.b = 0.5;
        let window = random_window(9, 6);
        // prediction is exactly the bias, so this residual is exactly zero
        let dev = gradient_check(&net, &window, 0.5, 1e-5).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let net = small_net(4);
        let window = random_window(40, 6);
        let target = 0.9;
        let mut analytic = analytic_gradient(&net, &window, target).unwrap();
        let numeric = numeric_gradient(&net, &window, target, 1e-5).unwrap();
        // sanity: honest gradients agree
        assert!(max_relative_deviation(&analytic, &numeric, GRAD_SKIP_FLOOR) < 1e-4);
        // negate the largest term and the checker must flag it
        let k = analytic
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        assert!(analytic[k].abs() > 1e-3);
        analytic[k] = -analytic[k];
        let dev = max_relative_deviation(&analytic, &numeric, GRAD_SKIP_FLOOR);
        assert!(dev > 1e-2, "deviation {dev}");
    }
}
