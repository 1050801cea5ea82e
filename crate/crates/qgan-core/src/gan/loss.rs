//! Adversarial loss values and their derivatives with respect to the
//! discriminator's probabilities.
//!
//! The discriminator loss is the minimax value
//! `-mean[log D(x)] - mean[log(1 - D(G(z)))]`. The generator trains on the
//! non-saturating form `-mean[log D(G(z))]`, which is also the logged value:
//! at the `D = 0.5` equilibrium it sits at `log 2` with the discriminator
//! loss at twice that.

/// Probabilities are clamped this far away from {0, 1} before any log.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `(loss_D, loss_G)` from the discriminator's outputs on real and fake
/// batches.
pub fn gan_value(d_real: &[f64], d_fake: &[f64]) -> (f64, f64) {
    let loss_d = -mean_ln(d_real) - mean_ln_complement(d_fake);
    let loss_g = generator_loss(d_fake);
    (loss_d, loss_g)
}

/// Non-saturating generator loss `-mean[log p]`.
pub fn generator_loss(d_fake: &[f64]) -> f64 {
    -mean_ln(d_fake)
}

fn mean_ln(ps: &[f64]) -> f64 {
    ps.iter().map(|&p| clamp_prob(p).ln()).sum::<f64>() / ps.len() as f64
}

fn mean_ln_complement(ps: &[f64]) -> f64 {
    ps.iter().map(|&p| (1.0 - clamp_prob(p)).ln()).sum::<f64>() / ps.len() as f64
}

/// Derivatives of `loss_D` with respect to each real and fake probability.
/// Clamped denominators keep the gradient finite when D saturates.
pub fn loss_d_grads(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nr = d_real.len() as f64;
    let nf = d_fake.len() as f64;
    let g_real = d_real.iter().map(|&p| -1.0 / (nr * clamp_prob(p))).collect();
    let g_fake = d_fake
        .iter()
        .map(|&p| 1.0 / (nf * (1.0 - clamp_prob(p))))
        .collect();
    (g_real, g_fake)
}

/// Derivative of the non-saturating generator loss with respect to each fake
/// probability.
pub fn loss_g_grads(d_fake: &[f64]) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake.iter().map(|&p| -1.0 / (n * clamp_prob(p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn equilibrium_anchors_are_exact() {
        let (loss_d, loss_g) = gan_value(&[0.5], &[0.5]);
        assert_eq!(loss_d, 2.0 * LN_2);
        assert_eq!(loss_g, LN_2);
    }

    #[test]
    fn perfect_discriminator_drives_loss_d_to_zero() {
        let (loss_d, _) = gan_value(&[1.0 - 1e-9], &[1e-9]);
        assert!(loss_d < 1e-6, "loss_d = {loss_d}");
    }

    #[test]
    fn clamping_keeps_losses_finite_at_the_boundary() {
        let (loss_d, loss_g) = gan_value(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(loss_d.is_finite() && loss_g.is_finite());
        let (gr, gf) = loss_d_grads(&[0.0], &[1.0]);
        assert!(gr[0].is_finite() && gf[0].is_finite());
        assert!(loss_g_grads(&[0.0])[0].is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-7;
        let ps = [0.23, 0.71, 0.5];
        let (gr, gf) = loss_d_grads(&ps, &ps);
        let gg = loss_g_grads(&ps);
        for i in 0..ps.len() {
            let mut plus = ps;
            let mut minus = ps;
            plus[i] += h;
            minus[i] -= h;
            let fd_d_real = (gan_value(&plus, &ps).0 - gan_value(&minus, &ps).0) / (2.0 * h);
            let fd_d_fake = (gan_value(&ps, &plus).0 - gan_value(&ps, &minus).0) / (2.0 * h);
            let fd_g = (generator_loss(&plus) - generator_loss(&minus)) / (2.0 * h);
            assert!((fd_d_real - gr[i]).abs() < 1e-5 * gr[i].abs());
            assert!((fd_d_fake - gf[i]).abs() < 1e-5 * gf[i].abs());
            assert!((fd_g - gg[i]).abs() < 1e-5 * gg[i].abs());
        }
    }
}
