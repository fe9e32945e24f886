//! Counting statistics shared by the simulator and the acceptance checks.

use statrs::distribution::{DiscreteCDF, Poisson};

/// Coverage of a +-3 sigma Gaussian band.
pub const THREE_SIGMA_COVERAGE: f64 = 0.9973;

/// One-sigma Poisson uncertainty of a count. A zero count gets the 84.1%
/// upper limit instead of zero.
pub fn poisson_sigma(count: u64) -> f64 {
    if count == 0 {
        -(1.0 - 0.8413_f64).ln()
    } else {
        (count as f64).sqrt()
    }
}

/// Whether `observed` lies in the central `coverage` interval of a Poisson
/// law with mean `expected`. This is the small-count analogue of |k - m| <= n sigma.
pub fn within_poisson_interval(observed: u64, expected: f64, coverage: f64) -> bool {
    if expected <= 0.0 {
        return observed == 0;
    }
    let tail = (1.0 - coverage) / 2.0;
    let Ok(p) = Poisson::new(expected) else { return false };
    let below = p.cdf(observed);
    let above = if observed == 0 { 1.0 } else { p.sf(observed - 1) };
    below >= tail && above >= tail
}

/// Poisson check at the 3 sigma level.
pub fn within_three_sigma(observed: u64, expected: f64) -> bool {
    within_poisson_interval(observed, expected, THREE_SIGMA_COVERAGE)
}
