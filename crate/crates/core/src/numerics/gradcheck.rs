use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Check at most this many coordinates (sampled without replacement); `None` checks all.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: FD_STEP,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub coords_checked: usize,
    /// Coordinates left out because the probe crossed a kink.
    pub coords_skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares `analytic` against central differences of `loss` around `params`.
///
/// The relative error per coordinate is `|g_a − g_n| / max(|g_a|, |g_n|, 1e−8)`.
pub fn grad_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    grad_check_piecewise(|p| (loss(p), Vec::new()), params, analytic, opts)
}

/// Like [`grad_check`] for piecewise-smooth losses. `loss` also returns the
/// activation pattern (e.g. ReLU signs) at the probe; a coordinate whose two
/// probes land in different pieces has no central difference to compare
/// against and is skipped.
pub fn grad_check_piecewise<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<bool>),
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let coords: Vec<usize> = match opts.max_coords {
        Some(limit) if limit < params.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut idx = sample(&mut rng, params.len(), limit).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..params.len()).collect(),
    };
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        coords_checked: 0,
        coords_skipped: 0,
    };
    for &i in &coords {
        let orig = probe[i];
        probe[i] = orig + opts.step;
        let (up, up_pattern) = loss(&probe);
        probe[i] = orig - opts.step;
        let (down, down_pattern) = loss(&probe);
        probe[i] = orig;
        if up_pattern != down_pattern {
            report.coords_skipped += 1;
            continue;
        }
        report.coords_checked += 1;
        let numeric = (up - down) / (2.0 * opts.step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p: Vec<f64> = (0..50).map(|i| (i as f64 - 25.0) * 0.13).collect();
        let report = grad_check(
            |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            &p,
            &p,
            &GradCheckOptions::default(),
        );
        assert!(report.max_rel_error < 1e-7, "{report:?}");
        assert_eq!(report.coords_checked, 50);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let p = vec![1.0, 2.0];
        let report = grad_check(
            |x| x[0] * x[0] + x[1],
            &p,
            &[2.0, 2.0],
            &GradCheckOptions::default(),
        );
        assert_eq!(report.worst_index, 1);
        assert!(report.max_rel_error > 0.4);
    }

    #[test]
    fn subset_sampling_is_bounded() {
        let p = vec![0.5; 1000];
        let opts = GradCheckOptions {
            max_coords: Some(200),
            ..Default::default()
        };
        let report = grad_check(|x| x.iter().sum(), &p, &vec![1.0; 1000], &opts);
        assert_eq!(report.coords_checked, 200);
        assert!(report.max_rel_error < 1e-6);
    }

    #[test]
    fn kink_crossings_are_skipped() {
        let relu_sum = |x: &[f64]| {
            let loss = x.iter().map(|v| v.max(0.0)).sum();
            (loss, x.iter().map(|&v| v > 0.0).collect())
        };
        // The middle coordinate sits on the kink; its probes straddle it.
        let p = [1.0, 0.0, -1.0];
        let report =
            grad_check_piecewise(relu_sum, &p, &[1.0, 7.0, 0.0], &GradCheckOptions::default());
        assert_eq!((report.coords_checked, report.coords_skipped), (2, 1));
        assert!(report.max_rel_error < 1e-9);
        let plain = grad_check(
            |x| relu_sum(x).0,
            &p,
            &[1.0, 7.0, 0.0],
            &GradCheckOptions::default(),
        );
        assert!(plain.max_rel_error > 0.5);
    }
}
