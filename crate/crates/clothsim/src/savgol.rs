use crate::error::{Result, SimError};

/// Savitzky–Golay smoothing. Every output sample is the value at that
/// sample of the least-squares polynomial of degree `order` fitted over the
/// centred window; near the ends the window is truncated to the signal.
pub fn savgol_smooth(signal: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) {
        return Err(SimError::Argument(format!(
            "window must be odd, got {window}"
        )));
    }
    if order >= window {
        return Err(SimError::Argument(format!(
            "polynomial order {order} must be below window {window}"
        )));
    }
    if signal.len() < window {
        return Err(SimError::Argument(format!(
            "signal of length {} is shorter than window {window}",
            signal.len()
        )));
    }
    let half = window / 2;
    let n = signal.len();
    let interior = fit_weights(half, window, order);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let w = if hi - lo == window {
            std::borrow::Cow::Borrowed(&interior)
        } else {
            std::borrow::Cow::Owned(fit_weights(i - lo, hi - lo, order))
        };
        out.push(w.iter().zip(&signal[lo..hi]).map(|(a, b)| a * b).sum());
    }
    Ok(out)
}

/// Weights mapping `len` samples to the fitted value at sample `at`.
fn fit_weights(at: usize, len: usize, order: usize) -> Vec<f64> {
    let scale = (len as f64 / 2.0).max(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut q: Vec<f64> = (0..len)
            .map(|j| ((j as f64 - at as f64) / scale).powi(k as i32))
            .collect();
        // Two passes of modified Gram–Schmidt keep the basis orthogonal.
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in q.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let nrm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut q {
            *x /= nrm;
        }
        basis.push(q);
    }
    (0..len)
        .map(|j| basis.iter().map(|b| b[at] * b[j]).sum())
        .collect()
}
