//! Central finite-difference gradient checking.

/// Central-difference gradient of a scalar function of flat f64 buffers.
/// `f` receives the perturbed copy of all inputs.
pub fn central_diff_gradient(
    f: &mut dyn FnMut(&[Vec<f64>]) -> f64,
    inputs: &[Vec<f64>],
    h: f64,
) -> Vec<Vec<f64>> {
    let mut work: Vec<Vec<f64>> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = vec![0.0; inputs[i].len()];
        for j in 0..inputs[i].len() {
            let orig = work[i][j];
            work[i][j] = orig + h;
            let fp = f(&work);
            work[i][j] = orig - h;
            let fm = f(&work);
            work[i][j] = orig;
            g[j] = (fp - fm) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Relative error with a floor so near-zero gradients compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst relative error between an analytic gradient set and its
/// finite-difference counterpart.
pub fn max_rel_err(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&x, &y) in a.iter().zip(n) {
            worst = worst.max(rel_err(x, y));
        }
    }
    worst
}
