//! Experiment harnesses: synthetic Monte-Carlo error rates, recall/cost
//! curves on stored collections, closed-form error bounds, and CSV output.

pub mod bounds;
pub mod csvout;
pub mod recall;
pub mod synthetic;

/// One plotted point: the swept value, the measured rate, and its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

/// `sqrt(y·(1−y)/trials)` — the standard error of an observed rate `y`.
pub fn binomial_stderr(y: f64, trials: u64) -> f64 {
    (y * (1.0 - y) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_degenerate_rates_is_zero() {
        assert_eq!(binomial_stderr(0.0, 100), 0.0);
        assert_eq!(binomial_stderr(1.0, 100), 0.0);
    }

    #[test]
    fn stderr_matches_the_closed_form() {
        let se = binomial_stderr(0.5, 10_000);
        assert!((se - 0.005).abs() < 1e-15);
        let se = binomial_stderr(0.1, 400);
        assert!((se - (0.1f64 * 0.9 / 400.0).sqrt()).abs() < 1e-15);
    }
}
