use serde::Serialize;
use std::fmt;

/// Physics-validity warnings. These never abort a computation; they are
/// collected and reported next to the results they qualify.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// |Δ| is not large enough compared to the strongest one-photon coupling.
    Adiabaticity { ratio: f64, required: f64 },
    /// Ω_d ≥ Γ_e/2: the drive no longer acts as a pure broadening of |s⟩.
    DriveNotWeak { omega_d: f64, half_gamma_e: f64 },
    /// γ is not much larger than Γ_s/2 or |δ̃_e|.
    BroadeningTooSmall { gamma: f64, competitor: f64, what: String },
    /// Fewer than the recommended number of grid points across a fitted width.
    CoarseAngularGrid { axis: char, points_across_width: f64 },
    /// The angular map does not span ±4 fitted widths around the lobe centre.
    NarrowAngularGrid { axis: char, span_in_widths: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Adiabaticity { ratio, required } => write!(
                f,
                "intermediate detuning is only {ratio:.2}x the largest coupling (want >= {required})"
            ),
            Warning::DriveNotWeak { omega_d, half_gamma_e } => write!(
                f,
                "drive Rabi frequency {omega_d:.4e} rad/s is not below Gamma_e/2 = {half_gamma_e:.4e} rad/s"
            ),
            Warning::BroadeningTooSmall { gamma, competitor, what } => write!(
                f,
                "effective broadening gamma = {gamma:.4e} rad/s is not >> {what} = {competitor:.4e} rad/s"
            ),
            Warning::CoarseAngularGrid { axis, points_across_width } => write!(
                f,
                "angular grid has {points_across_width:.1} points across the fitted width along theta_{axis} (want >= 8)"
            ),
            Warning::NarrowAngularGrid { axis, span_in_widths } => write!(
                f,
                "angular grid spans only {span_in_widths:.2} fitted widths along theta_{axis} (want >= 4)"
            ),
        }
    }
}

/// Sample mean and standard deviation (n − 1 denominator; zero for one sample).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// ‖a − b‖₂ / ‖b‖₂.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
