//! The degree-dependence family `phi(alpha, d)`.
//!
//! A [`WeightFunction`] pairs a family with a fixed `alpha`. The canonical
//! family is the power law `d^alpha`; arbitrary families can be registered
//! in code through [`WeightFunction::custom`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Family {
    /// `phi(alpha, d) = d^alpha`, with `0^0 = 1`.
    Power,
    Custom { name: String, eval: Evaluator },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Power => write!(f, "Power"),
            Family::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightFunction {
    family: Family,
    alpha: f64,
}

impl WeightFunction {
    pub fn power(alpha: f64) -> Self {
        WeightFunction { family: Family::Power, alpha }
    }

    /// Registers a custom family. `eval(alpha, d)` should be finite and
    /// positive for `d > 0`; [`validate_properties`] reports how far it
    /// honors the remaining structural requirements.
    pub fn custom<F>(name: impl Into<String>, alpha: f64, eval: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        WeightFunction {
            family: Family::Custom { name: name.into(), eval: Arc::new(eval) },
            alpha,
        }
    }

    /// Parses a family name as accepted by configuration files.
    pub fn from_name(name: &str, alpha: f64) -> Result<Self> {
        match name {
            "power" => Ok(Self::power(alpha)),
            other => Err(Error::InvalidArgument(format!(
                "unknown weight family '{other}' (only 'power' is configurable)"
            ))),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Power => "power".to_string(),
            Family::Custom { name, .. } => name.clone(),
        }
    }

    /// Same family, different `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        WeightFunction { family: self.family.clone(), alpha }
    }

    /// `phi(self.alpha, d)`.
    pub fn evaluate(&self, d: f64) -> Result<f64> {
        self.eval_at(self.alpha, d)
    }

    /// `phi(alpha, d)` for an arbitrary `alpha` in this family.
    pub fn eval_at(&self, alpha: f64, d: f64) -> Result<f64> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Domain { alpha, degree: d });
        }
        let value = match &self.family {
            Family::Power => {
                if alpha == 0.0 {
                    // phi(0, d) = 1 on [0, inf), including 0^0.
                    1.0
                } else if d == 0.0 {
                    if alpha < 0.0 {
                        return Err(Error::Domain { alpha, degree: d });
                    }
                    0.0
                } else {
                    d.powf(alpha)
                }
            }
            Family::Custom { eval, .. } => eval(alpha, d),
        };
        if !value.is_finite() || value < 0.0 || (d > 0.0 && value == 0.0) {
            return Err(Error::InvalidWeight { alpha, degree: d, value });
        }
        Ok(value)
    }
}

/// `g(alpha) = phi(alpha, d2) / phi(alpha, d1)`.
pub fn g(phi: &WeightFunction, alpha: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "g needs positive degrees, got d1 = {d1}, d2 = {d2}"
        )));
    }
    if d1 == d2 {
        return Err(Error::DegenerateRatio(d1));
    }
    if let Family::Power = phi.family {
        // Stays finite where the separate powers would overflow.
        return Ok((d2 / d1).powf(alpha));
    }
    Ok(phi.eval_at(alpha, d2)? / phi.eval_at(alpha, d1)?)
}

/// The `alpha` with `g(alpha) = x`.
///
/// Power family: `ln x / ln(d2 / d1)`. Other families: bisection on a
/// bracket grown by doubling from `[-1, 1]`.
pub fn g_inverse(phi: &WeightFunction, x: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("g_inverse needs x > 0, got {x}")));
    }
    if d1 == d2 {
        return Err(Error::DegenerateRatio(d1));
    }
    if let Family::Power = phi.family {
        if !(d1 > 0.0 && d2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "g needs positive degrees, got d1 = {d1}, d2 = {d2}"
            )));
        }
        return Ok(x.ln() / (d2 / d1).ln());
    }

    let residual = |alpha: f64| -> Option<f64> {
        g(phi, alpha, d1, d2).ok().filter(|v| v.is_finite()).map(|v| v - x)
    };
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let (mut r_lo, mut r_hi);
    loop {
        r_lo = residual(lo);
        r_hi = residual(hi);
        if let (Some(a), Some(b)) = (r_lo, r_hi) {
            if a == 0.0 {
                return Ok(lo);
            }
            if b == 0.0 {
                return Ok(hi);
            }
            if a.signum() != b.signum() {
                break;
            }
        }
        lo *= 2.0;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoInverse { target: x });
        }
    }
    let (mut r_lo, _) = (r_lo.unwrap(), r_hi.unwrap());
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r_mid = residual(mid).ok_or(Error::NoInverse { target: x })?;
        if r_mid.abs() <= 1e-12 * x {
            return Ok(mid);
        }
        if r_mid.signum() == r_lo.signum() {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    match residual(mid) {
        Some(r) if r.abs() <= 1e-12 * x => Ok(mid),
        _ => Err(Error::NoInverse { target: x }),
    }
}

/// Where a property check failed worst.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub alpha: f64,
    pub degree: f64,
    /// Secondary degree for pairwise checks (the degree ratio).
    pub other_degree: Option<f64>,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub passed: bool,
    pub worst: Option<Violation>,
}

impl PropertyCheck {
    fn from_worst(worst: Option<Violation>) -> Self {
        PropertyCheck { passed: worst.is_none(), worst }
    }
}

/// Grid-based verdicts for the three structural properties of `phi`.
///
/// Finite grids can only falsify the asymptotic sensitivity condition;
/// a pass means "no counterexample on these grids".
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub alpha_range: (f64, f64),
    pub degree_range: (f64, f64),
    /// phi(0, d) = 1, nonnegativity, monotonicity in alpha and in d.
    pub monotone: PropertyCheck,
    /// phi(alpha, d_small) / phi(alpha, d_large) strictly decreasing in alpha.
    pub ratio_decreasing: PropertyCheck,
    /// The two log-derivative quotients stay bounded along the degree grid.
    pub bounded_sensitivity: PropertyCheck,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.monotone.passed && self.ratio_decreasing.passed && self.bounded_sensitivity.passed
    }
}

const REL_STEP: f64 = 1e-5;
// Second differences lose accuracy at the first-derivative step.
const REL_STEP_2: f64 = 1e-4;
const PROP3_FACTOR: f64 = 10.0;
const PROP3_SLACK: f64 = 1e-6;

fn keep_worst(slot: &mut Option<Violation>, v: Violation) {
    if slot.as_ref().is_none_or(|w| v.magnitude > w.magnitude) {
        *slot = Some(v);
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Checks the three weight-function properties on the given grids with
/// central differences.
pub fn validate_properties(
    phi: &WeightFunction,
    alpha_grid: &[f64],
    d_grid: &[f64],
) -> Result<PropertyReport> {
    if alpha_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::InvalidArgument("property grids must be nonempty".into()));
    }
    if !strictly_increasing(alpha_grid) || !strictly_increasing(d_grid) {
        return Err(Error::InvalidArgument("property grids must be strictly increasing".into()));
    }
    if d_grid[0] <= 0.0 {
        return Err(Error::InvalidArgument("degree grid must be positive".into()));
    }
    // Evaluation failures count as violations of magnitude infinity.
    let eval = |a: f64, d: f64| phi.eval_at(a, d).unwrap_or(f64::NAN);
    let bad = |x: f64| if x.is_finite() { x } else { f64::INFINITY };

    // Normalization and monotonicity.
    let mut p1: Option<Violation> = None;
    for &d in d_grid {
        let at_zero = eval(0.0, d);
        if (at_zero - 1.0).abs() > 1e-12 || !at_zero.is_finite() {
            keep_worst(
                &mut p1,
                Violation { alpha: 0.0, degree: d, other_degree: None, magnitude: bad((at_zero - 1.0).abs()) },
            );
        }
        for &a in alpha_grid {
            let v = eval(a, d);
            if !(v >= 0.0) || !v.is_finite() {
                keep_worst(&mut p1, Violation { alpha: a, degree: d, other_degree: None, magnitude: f64::INFINITY });
                continue;
            }
            let ha = REL_STEP * a.abs().max(1.0);
            let da = (eval(a + ha, d) - eval(a - ha, d)) / (2.0 * ha);
            let hd = REL_STEP * d;
            let dd = (eval(a, d + hd) - eval(a, d - hd)) / (2.0 * hd);
            let tol = 1e-8 * v.max(1e-300);
            // Increasing in alpha.
            if !(da >= -tol) {
                keep_worst(&mut p1, Violation { alpha: a, degree: d, other_degree: None, magnitude: bad(-da) });
            }
            // Increasing in d for alpha > 0, decreasing for alpha < 0.
            let slope_violation = if a > 0.0 {
                -dd
            } else if a < 0.0 {
                dd
            } else {
                dd.abs()
            };
            if !(slope_violation <= tol / d) {
                keep_worst(
                    &mut p1,
                    Violation { alpha: a, degree: d, other_degree: None, magnitude: bad(slope_violation) },
                );
            }
        }
    }

    // Degree ratio strictly decreasing along the alpha grid.
    let mut p2: Option<Violation> = None;
    for (i, &d_large) in d_grid.iter().enumerate() {
        for &d_small in &d_grid[..i] {
            let ratios: Vec<f64> =
                alpha_grid.iter().map(|&a| eval(a, d_small) / eval(a, d_large)).collect();
            for (k, w) in ratios.windows(2).enumerate() {
                if !(w[1] < w[0]) {
                    let magnitude = if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else { w[1] - w[0] };
                    keep_worst(
                        &mut p2,
                        Violation {
                            alpha: alpha_grid[k + 1],
                            degree: d_large,
                            other_degree: Some(d_small),
                            magnitude: bad(magnitude.max(0.0)),
                        },
                    );
                }
            }
        }
    }

    // Sensitivity: |q(d)| <= 10 |q(d_median)| for both quotients.
    let mut p3: Option<Violation> = None;
    let median = d_grid[d_grid.len() / 2];
    let quotients = |a: f64, d: f64| -> (f64, f64) {
        let v = eval(a, d);
        let h1 = REL_STEP * d;
        let first = (eval(a, d + h1) - eval(a, d - h1)) / (2.0 * h1);
        let h2 = REL_STEP_2 * d;
        let first_2 = (eval(a, d + h2) - eval(a, d - h2)) / (2.0 * h2);
        let second = (eval(a, d + h2) - 2.0 * v + eval(a, d - h2)) / (h2 * h2);
        let q1 = d * first / v;
        // Both numerator and denominator vanish for a d-independent phi.
        let q2 = if first_2 == 0.0 && second == 0.0 { 0.0 } else { d * second / first_2 };
        (q1, q2)
    };
    for &a in alpha_grid {
        let (m1, m2) = quotients(a, median);
        for &d in d_grid {
            let (q1, q2) = quotients(a, d);
            for (q, m) in [(q1, m1), (q2, m2)] {
                let bound = PROP3_FACTOR * m.abs() + PROP3_SLACK;
                if !(q.abs() <= bound) {
                    keep_worst(
                        &mut p3,
                        Violation { alpha: a, degree: d, other_degree: None, magnitude: bad(q.abs() / bound) },
                    );
                }
            }
        }
    }

    Ok(PropertyReport {
        alpha_range: (alpha_grid[0], *alpha_grid.last().unwrap()),
        degree_range: (d_grid[0], *d_grid.last().unwrap()),
        monotone: PropertyCheck::from_worst(p1),
        ratio_decreasing: PropertyCheck::from_worst(p2),
        bounded_sensitivity: PropertyCheck::from_worst(p3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
    }

    fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
        linspace(a.ln(), b.ln(), k).into_iter().map(f64::exp).collect()
    }

    #[test]
    fn power_family_values() {
        assert_eq!(WeightFunction::power(0.0).evaluate(7.0).unwrap(), 1.0);
        assert_eq!(WeightFunction::power(1.0).evaluate(5.0).unwrap(), 5.0);
        assert_eq!(WeightFunction::power(-1.0).evaluate(4.0).unwrap(), 0.25);
    }

    #[test]
    fn zero_degree_edge_cases() {
        assert_eq!(WeightFunction::power(0.0).evaluate(0.0).unwrap(), 1.0);
        assert_eq!(WeightFunction::power(2.0).evaluate(0.0).unwrap(), 0.0);
        assert!(matches!(WeightFunction::power(-0.5).evaluate(0.0), Err(Error::Domain { .. })));
        assert!(WeightFunction::power(1.0).evaluate(-1.0).is_err());
    }

    #[test]
    fn g_values() {
        let phi = WeightFunction::power(0.0);
        assert_eq!(g(&phi, 0.0, 240.0, 360.0).unwrap(), 1.0);
        assert!((g(&phi, 1.0, 240.0, 360.0).unwrap() - 1.5).abs() < 1e-15);
        let want = 1.0 / (1.5f64 * 1.5);
        assert!((g(&phi, -2.0, 240.0, 360.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.4444).abs() < 1e-4);
        assert!(matches!(g(&phi, 1.0, 5.0, 5.0), Err(Error::DegenerateRatio(_))));
    }

    #[test]
    fn g_limits() {
        let phi = WeightFunction::power(0.0);
        // d1 > d2: g -> 0 at +inf, -> inf at -inf.
        assert!(g(&phi, 30.0, 360.0, 240.0).unwrap() < 1e-5);
        assert!(g(&phi, -30.0, 360.0, 240.0).unwrap() > 1e5);
        assert!(g(&phi, 30.0, 240.0, 360.0).unwrap() > 1e5);
        assert!(g(&phi, -30.0, 240.0, 360.0).unwrap() < 1e-5);
    }

    // Independent oracle: plain bisection on g, no bracket logic shared.
    fn bisect_oracle(x: f64, d1: f64, d2: f64) -> f64 {
        let f = |a: f64| (d2 / d1).powf(a) - x;
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f(hi) > 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn g_inverse_threshold_for_two_group_spec() {
        let phi = WeightFunction::power(0.0);
        let a = g_inverse(&phi, 0.25, 240.0, 360.0).unwrap();
        let oracle = bisect_oracle(0.25, 240.0, 360.0);
        assert!((a - oracle).abs() < 1e-10);
        assert!((a - (-3.4190)).abs() < 5e-5);
        assert_eq!(g_inverse(&phi, 1.0, 240.0, 360.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_family_uses_bisection() {
        let phi = WeightFunction::custom("pow-custom", 0.0, |a: f64, d: f64| d.powf(a));
        for x in [0.1, 1.0, 10.0] {
            let a = g_inverse(&phi, x, 240.0, 360.0).unwrap();
            assert!((g(&phi, a, 240.0, 360.0).unwrap() - x).abs() <= 1e-10 * x.max(1.0));
            assert!((a - bisect_oracle(x, 240.0, 360.0)).abs() < 1e-8);
        }
        let a0 = g_inverse(&phi, 1.0, 240.0, 360.0).unwrap();
        assert!(a0.abs() < 1e-12);
    }

    #[test]
    fn bracket_exhaustion_is_an_error() {
        // Ratio bounded in (1/2, 2): targets outside are unreachable.
        let phi = WeightFunction::custom("bounded", 0.0, |a: f64, d: f64| {
            if d > 300.0 {
                1.0 + 0.5 * a.tanh()
            } else {
                1.0
            }
        });
        assert!(matches!(g_inverse(&phi, 5.0, 240.0, 360.0), Err(Error::NoInverse { .. })));
    }

    #[test]
    fn power_family_passes_all_properties() {
        let report = validate_properties(
            &WeightFunction::power(0.0),
            &linspace(-5.0, 5.0, 41),
            &logspace(1.0, 1000.0, 25),
        )
        .unwrap();
        assert!(report.monotone.passed, "{:?}", report.monotone);
        assert!(report.ratio_decreasing.passed, "{:?}", report.ratio_decreasing);
        assert!(report.bounded_sensitivity.passed, "{:?}", report.bounded_sensitivity);
    }

    #[test]
    fn exponential_family_fails_sensitivity_check() {
        let phi = WeightFunction::custom("exp", 0.0, |a: f64, d: f64| (a * d).exp());
        let report =
            validate_properties(&phi, &linspace(-0.5, 0.5, 11), &logspace(1.0, 1000.0, 25)).unwrap();
        assert!(!report.bounded_sensitivity.passed);
        assert!(report.bounded_sensitivity.worst.as_ref().unwrap().degree > 100.0);
        assert!(report.ratio_decreasing.passed);
    }

    #[test]
    fn constant_family_fails_ratio_check() {
        let phi = WeightFunction::custom("one", 0.0, |_a: f64, _d: f64| 1.0);
        let report =
            validate_properties(&phi, &linspace(-2.0, 2.0, 9), &logspace(1.0, 100.0, 5)).unwrap();
        assert!(!report.ratio_decreasing.passed);
        assert!(report.monotone.passed);
    }

    #[test]
    fn rejects_unsorted_grids() {
        let phi = WeightFunction::power(0.0);
        assert!(validate_properties(&phi, &[1.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(validate_properties(&phi, &[0.0, 1.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn family_names_from_config() {
        assert_eq!(WeightFunction::from_name("power", 1.5).unwrap().alpha(), 1.5);
        assert!(WeightFunction::from_name("exp", 1.0).is_err());
    }

    proptest! {
        #[test]
        fn g_is_strictly_monotone(a in -10.0f64..10.0, step in 1e-3f64..1.0) {
            let phi = WeightFunction::power(0.0);
            let lo = g(&phi, a, 240.0, 360.0).unwrap();
            let hi = g(&phi, a + step, 240.0, 360.0).unwrap();
            prop_assert!(hi > lo);
            let lo = g(&phi, a, 360.0, 240.0).unwrap();
            let hi = g(&phi, a + step, 360.0, 240.0).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn g_inverse_round_trips(a in -10.0f64..10.0) {
            let phi = WeightFunction::power(0.0);
            let x = g(&phi, a, 240.0, 360.0).unwrap();
            let back = g_inverse(&phi, x, 240.0, 360.0).unwrap();
            prop_assert!((back - a).abs() < 1e-10);
        }
    }
}
