//! Parameter gradient of the WGAN gradient penalty.
//!
//! The penalty for an interpolate `u` is `p = (||grad_u D(u)|| - 1)^2`, a
//! function of second derivatives of the critic. Its parameter gradient is
//! computed without a general higher-order tape:
//!
//! 1. reverse pass for `g = grad_u D(u)` and the cotangent `c = dp/dg`,
//! 2. a forward (JVP) pass in direction `c`, whose scalar result is
//!    `s = c . grad_u D(u)`, so `dp/dtheta = ds/dtheta` with `c` frozen,
//! 3. a reverse pass over that augmented forward computation.
//!
//! Step 3 needs activation second derivatives; they vanish for the
//! piecewise-linear activations and are analytic for tanh.

use crate::error::Result;
use crate::nn::net::{Mlp, Tape};
use crate::nn::{l2_norm, Real};

/// Gradient penalty at input `u` and its gradient with respect to the critic
/// parameters. The critic must have scalar output.
pub fn gradient_penalty<F: Real>(critic: &Mlp<F>, u: &[F]) -> Result<(F, Vec<F>)> {
    let tape = critic.forward(u)?;
    let g = critic.input_gradient(&tape)?;
    let norm = l2_norm(&g);
    let penalty = (norm - F::one()) * (norm - F::one());

    // Cotangent dp/dg; at g = 0 the subgradient 0 is used.
    let mut c = vec![F::zero(); g.len()];
    if norm > F::zero() {
        let scale = F::of(2.0) * (norm - F::one()) / norm;
        for (ci, gi) in c.iter_mut().zip(g.iter()) {
            *ci = scale * *gi;
        }
    }

    let grad = jvp_reverse(critic, &tape, &c)?;
    Ok((penalty, grad))
}

/// Reverse pass over the JVP computation `s = c . grad_u D(u)`, returning
/// `ds/dtheta`.
fn jvp_reverse<F: Real>(critic: &Mlp<F>, tape: &Tape<F>, c: &[F]) -> Result<Vec<F>> {
    let spec = &critic.spec;
    let layout = critic.layer_layout();
    let n_layers = spec.layers.len();

    // Forward JVP: dot_h[l] is the directional derivative of layer l's
    // output along c, dot_z[l] of its pre-activation.
    let mut dot_z: Vec<Vec<F>> = Vec::with_capacity(n_layers);
    let mut dot_h: Vec<Vec<F>> = Vec::with_capacity(n_layers);
    let mut dot_prev: Vec<F> = c.to_vec();
    for l in 0..n_layers {
        let layer = &spec.layers[l];
        let (w_off, _, fan_in, fan_out) = layout[l];
        let mut dz = vec![F::zero(); fan_out];
        for o in 0..fan_out {
            let row = &critic.params[w_off + o * fan_in..w_off + (o + 1) * fan_in];
            let mut acc = F::zero();
            for (w, v) in row.iter().zip(dot_prev.iter()) {
                acc += *w * *v;
            }
            dz[o] = acc;
        }
        let z = &tape.pre[l];
        let mut dh: Vec<F> = (0..fan_out)
            .map(|o| layer.activation.derivative(z[o]) * dz[o])
            .collect();
        if layer.residual {
            for (a, b) in dh.iter_mut().zip(dot_prev.iter()) {
                *a += *b;
            }
        }
        dot_z.push(dz);
        dot_h.push(dh.clone());
        dot_prev = dh;
    }

    // Reverse over the augmented graph. Seeds: ds/d(dot_h[last]) = [1],
    // ds/d(h[last]) = 0.
    let mut grad = vec![F::zero(); spec.param_count()];
    let mut bar_h = vec![F::zero(); spec.output_width()];
    let mut bar_dot_h = vec![F::zero(); spec.output_width()];
    bar_dot_h[0] = F::one();

    for l in (0..n_layers).rev() {
        let layer = &spec.layers[l];
        let (w_off, b_off, fan_in, fan_out) = layout[l];
        let z = &tape.pre[l];
        let h_in = tape.layer_input(l);
        let dot_in: &[F] = if l == 0 { c } else { &dot_h[l - 1] };

        let mut bar_h_prev = vec![F::zero(); fan_in];
        let mut bar_dot_prev = vec![F::zero(); fan_in];
        if layer.residual {
            bar_h_prev.copy_from_slice(&bar_h);
            bar_dot_prev.copy_from_slice(&bar_dot_h);
        }

        for o in 0..fan_out {
            let phi1 = layer.activation.derivative(z[o]);
            let phi2 = layer.activation.second_derivative(z[o]);
            // dot_a = phi'(z) * dot_z  contributes to both bar_dot_z and bar_z;
            // a = phi(z) contributes phi' * bar_a.
            let bar_dot_z = phi1 * bar_dot_h[o];
            let bar_z = phi2 * dot_z[l][o] * bar_dot_h[o] + phi1 * bar_h[o];

            let row_off = w_off + o * fan_in;
            grad[b_off + o] += bar_z;
            for i in 0..fan_in {
                grad[row_off + i] += bar_z * h_in[i] + bar_dot_z * dot_in[i];
                bar_h_prev[i] += critic.params[row_off + i] * bar_z;
                bar_dot_prev[i] += critic.params[row_off + i] * bar_dot_z;
            }
        }
        bar_h = bar_h_prev;
        bar_dot_h = bar_dot_prev;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::{Activation, LayerSpec, NetSpec};
    use crate::rng::derive_rng;
    use rand::Rng;

    fn critic(acts: &[Activation], seed: u64) -> Mlp<f64> {
        let mut layers: Vec<LayerSpec> = acts
            .iter()
            .map(|a| LayerSpec::new(5, *a))
            .collect();
        layers.push(LayerSpec::new(1, Activation::Identity));
        Mlp::init(NetSpec::new(4, layers).unwrap(), seed)
    }

    fn penalty_value(net: &Mlp<f64>, u: &[f64]) -> f64 {
        let tape = net.forward(u).unwrap();
        let g = net.input_gradient(&tape).unwrap();
        let norm = l2_norm(&g);
        (norm - 1.0) * (norm - 1.0)
    }

    fn check_against_fd(acts: &[Activation], seed: u64, tol: f64) {
        let net = critic(acts, seed);
        let mut rng = derive_rng(seed, "penalty-fd", 0);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (p, grad) = gradient_penalty(&net, &u).unwrap();
        assert!((p - penalty_value(&net, &u)).abs() < 1e-12);

        let h = 1e-6;
        let mut probe = net.clone();
        for idx in 0..net.params.len() {
            probe.params[idx] = net.params[idx] + h;
            let up = penalty_value(&probe, &u);
            probe.params[idx] = net.params[idx] - h;
            let down = penalty_value(&probe, &u);
            probe.params[idx] = net.params[idx];
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[idx].abs()).max(1e-3);
            assert!(
                (fd - grad[idx]).abs() / denom < tol,
                "param {idx}: fd {fd} vs analytic {}",
                grad[idx]
            );
        }
    }

    #[test]
    fn penalty_gradient_matches_fd_for_tanh() {
        check_against_fd(&[Activation::Tanh, Activation::Tanh], 1, 1e-5);
    }

    #[test]
    fn penalty_gradient_matches_fd_for_leaky_relu() {
        // Piecewise-linear: exact almost everywhere; random inputs stay off
        // the kinks.
        check_against_fd(&[Activation::LeakyRelu, Activation::LeakyRelu], 2, 1e-5);
    }

    #[test]
    fn penalty_gradient_matches_fd_for_mixed_activations() {
        check_against_fd(&[Activation::LeakyRelu, Activation::Tanh], 3, 1e-5);
    }

    #[test]
    fn residual_penalty_gradient_matches_fd() {
        let spec = NetSpec::new(
            4,
            vec![
                LayerSpec::new(4, Activation::Tanh),
                LayerSpec::residual(4, Activation::Tanh),
                LayerSpec::new(1, Activation::Identity),
            ],
        )
        .unwrap();
        let net: Mlp<f64> = Mlp::init(spec, 4);
        let u = vec![0.3, -0.6, 0.1, 0.8];
        let (_, grad) = gradient_penalty(&net, &u).unwrap();
        let h = 1e-6;
        let mut probe = net.clone();
        for idx in 0..net.params.len() {
            probe.params[idx] = net.params[idx] + h;
            let up = penalty_value(&probe, &u);
            probe.params[idx] = net.params[idx] - h;
            let down = penalty_value(&probe, &u);
            probe.params[idx] = net.params[idx];
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(grad[idx].abs()).max(1e-3);
            assert!((fd - grad[idx]).abs() / denom < 1e-5);
        }
    }
}
