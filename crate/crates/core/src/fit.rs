//! Least-squares fringe fits.

use serde::{Deserialize, Serialize};

/// Model `y = offset + amplitude·cos θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub offset: f64,
    pub amplitude: f64,
}

impl CosineFit {
    /// Fringe contrast (max − min)/(max + min) of the fitted curve.
    pub fn visibility(&self) -> f64 {
        if self.offset == 0.0 {
            0.0
        } else {
            self.amplitude.abs() / self.offset
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.offset + self.amplitude * theta.cos()
    }
}

/// Rows of the pseudo-inverse of the `[1, cos θ]` design matrix, so that
/// `offset = Σ a_k y_k` and `amplitude = Σ b_k y_k`.
pub fn cosine_weights(thetas: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = thetas.len() as f64;
    let sc: f64 = thetas.iter().map(|t| t.cos()).sum();
    let scc: f64 = thetas.iter().map(|t| t.cos().powi(2)).sum();
    let det = n * scc - sc * sc;
    if det.abs() < 1e-12 * n * n.max(scc) {
        return None;
    }
    let a = thetas.iter().map(|t| (scc - sc * t.cos()) / det).collect();
    let b = thetas.iter().map(|t| (n * t.cos() - sc) / det).collect();
    Some((a, b))
}

pub fn fit_cosine(thetas: &[f64], ys: &[f64]) -> Option<CosineFit> {
    let (a, b) = cosine_weights(thetas)?;
    Some(CosineFit {
        offset: a.iter().zip(ys).map(|(w, y)| w * y).sum(),
        amplitude: b.iter().zip(ys).map(|(w, y)| w * y).sum(),
    })
}

/// `k` equally spaced phases on [0, 2π).
pub fn theta_grid(k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / k as f64)
        .collect()
}

/// Slope and centered R² of a least-squares line through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_fringe() {
        let t = theta_grid(8);
        let y: Vec<f64> = t.iter().map(|t| 0.3 + 0.2 * t.cos()).collect();
        let f = fit_cosine(&t, &y).unwrap();
        assert!((f.offset - 0.3).abs() < 1e-14);
        assert!((f.amplitude - 0.2).abs() < 1e-14);
        assert!((f.visibility() - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn degenerate_grid() {
        assert!(fit_cosine(&[0.0, 0.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn origin_line() {
        let (s, r2) = fit_through_origin(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert!((s - 2.0).abs() < 1e-15);
        assert!((r2 - 1.0).abs() < 1e-15);
    }
}
