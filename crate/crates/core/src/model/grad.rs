use super::{forward_unchecked, logistic_loss, sigmoid, Layer, ModelError, ModelParams};

/// Gradient with the same layout as the [`ModelParams`] it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    layers: Vec<Layer>,
}

impl GradientBuffer {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let layers = params
            .layers()
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect();
        Self { layers }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Entries in the same order as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| *v == 0.0))
    }
}

/// Gradient of `sum_i w_i l(theta; x_i, y_i)` with respect to the parameters.
///
/// The ReLU derivative at 0 is taken as 0.
pub fn backward(
    params: &ModelParams,
    rows: &[&[f64]],
    labels: &[u8],
    sample_weights: &[f64],
) -> Result<GradientBuffer, ModelError> {
    let mut grad = GradientBuffer::zeros_like(params);
    accumulate(params, rows, labels, sample_weights, &mut grad)?;
    Ok(grad)
}

/// Adds the weighted gradient into `grad`, which must match `params`.
pub(crate) fn accumulate(
    params: &ModelParams,
    rows: &[&[f64]],
    labels: &[u8],
    sample_weights: &[f64],
    grad: &mut GradientBuffer,
) -> Result<(), ModelError> {
    if rows.len() != labels.len() || rows.len() != sample_weights.len() {
        return Err(ModelError::Shape(format!(
            "{} rows, {} labels and {} weights",
            rows.len(),
            labels.len(),
            sample_weights.len()
        )));
    }
    if let Some(w) = sample_weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(ModelError::Shape(format!(
            "sample weights must be non-negative, found {w}"
        )));
    }
    let mut hidden = Vec::new();
    for ((x, &y), &w) in rows.iter().zip(labels).zip(sample_weights) {
        params.check_input(x)?;
        if w == 0.0 {
            continue;
        }
        let z = forward_unchecked(params, x, &mut hidden);
        // d loss / d logit
        let g = w * (sigmoid(z) - f64::from(y));
        match (params.layers(), grad.layers.as_mut_slice()) {
            ([_], [gl]) => {
                for (gw, xi) in gl.weights.iter_mut().zip(x.iter()) {
                    *gw += g * xi;
                }
                gl.bias[0] += g;
            }
            ([_, last], [g1, g2]) => {
                for (gw, h) in g2.weights.iter_mut().zip(&hidden) {
                    *gw += g * h;
                }
                g2.bias[0] += g;
                for (k, h) in hidden.iter().enumerate() {
                    if *h <= 0.0 {
                        continue;
                    }
                    let dh = g * last.weights[k];
                    let row = &mut g1.weights[k * g1.inputs..(k + 1) * g1.inputs];
                    for (gw, xi) in row.iter_mut().zip(x.iter()) {
                        *gw += dh * xi;
                    }
                    g1.bias[k] += dh;
                }
            }
            _ => unreachable!("gradient buffer matches its parameters"),
        }
    }
    Ok(())
}

/// Max relative error between [`backward`] and central differences of the
/// weighted loss, with denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check(
    params: &ModelParams,
    rows: &[&[f64]],
    labels: &[u8],
    sample_weights: &[f64],
    h: f64,
) -> Result<f64, ModelError> {
    if !(h > 0.0) {
        return Err(ModelError::Shape(format!("step must be positive, got {h}")));
    }
    let analytic = backward(params, rows, labels, sample_weights)?.to_flat();
    let weighted_loss = |p: &ModelParams| -> f64 {
        let mut hidden = Vec::new();
        rows.iter()
            .zip(labels)
            .zip(sample_weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|((x, &y), w)| w * logistic_loss(forward_unchecked(p, x, &mut hidden), y))
            .sum()
    };
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        flat[i] = base[i] + h;
        probe.set_flat(&flat)?;
        let up = weighted_loss(&probe);
        flat[i] = base[i] - h;
        probe.set_flat(&flat)?;
        let down = weighted_loss(&probe);
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(
        rng: &mut ChaCha8Rng,
        n: usize,
        d: usize,
    ) -> (Vec<Vec<f64>>, Vec<u8>, Vec<f64>) {
        let rows = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let weights = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        (rows, labels, weights)
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ModelParams::init(Architecture::Mlp { hidden: 4 }, 3, &mut rng).unwrap();
        let (rows, labels, _) = random_batch(&mut rng, 5, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let g = backward(&p, &refs, &labels, &[0.0; 5]).unwrap();
        assert!(g.is_zero());
        assert_eq!(
            finite_difference_check(&p, &refs, &labels, &[0.0; 5], 1e-5).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_sample_linear_gradient() {
        let mut p = ModelParams::zeros(Architecture::Linear, 2).unwrap();
        p.set_flat(&[0.5, -1.0, 0.25]).unwrap();
        let x = [2.0, 3.0];
        let z: f64 = 0.5 * 2.0 - 3.0 + 0.25;
        let r = sigmoid(z) - 1.0;
        let g = backward(&p, &[&x], &[1], &[1.0]).unwrap().to_flat();
        assert_abs_diff_eq!(g[0], r * 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], r * 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], r, epsilon = 1e-15);
    }

    #[test]
    fn batch_gradient_is_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::init(Architecture::Mlp { hidden: 5 }, 3, &mut rng).unwrap();
        let (rows, labels, weights) = random_batch(&mut rng, 6, 3);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let total = backward(&p, &refs, &labels, &weights).unwrap().to_flat();
        let mut summed = vec![0.0; total.len()];
        for i in 0..rows.len() {
            let g = backward(&p, &refs[i..=i], &labels[i..=i], &[1.0])
                .unwrap()
                .to_flat();
            for (s, gi) in summed.iter_mut().zip(g) {
                *s += weights[i] * gi;
            }
        }
        for (a, b) in total.iter().zip(&summed) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn finite_differences_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for arch in [Architecture::Linear, Architecture::Mlp { hidden: 6 }] {
            let p = ModelParams::init(arch, 4, &mut rng).unwrap();
            let (rows, labels, weights) = random_batch(&mut rng, 8, 4);
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let err = finite_difference_check(&p, &refs, &labels, &weights, 1e-5).unwrap();
            assert!(err <= 1e-4, "{arch:?}: {err}");
        }
    }

    #[test]
    fn rejects_shape_mismatch() {
        let p = ModelParams::zeros(Architecture::Linear, 2).unwrap();
        assert!(backward(&p, &[&[1.0]], &[1], &[1.0]).is_err());
        assert!(backward(&p, &[&[1.0, 2.0]], &[1], &[]).is_err());
        assert!(backward(&p, &[&[1.0, 2.0]], &[1], &[-1.0]).is_err());
    }
}
