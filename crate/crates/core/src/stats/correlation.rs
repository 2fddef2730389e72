use super::ranksum::midranks;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Confidence intervals on `r` come from the Fisher z-transform.
pub const CI_METHOD: &str = "fisher_z";

const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult<T> {
    pub r: T,
    /// Two-sided p-value of the t-test on `r`.
    pub p: T,
    pub ci95: (T, T),
    pub n: usize,
}

/// Sample Pearson correlation with a two-sided t-test and a 95% Fisher-z
/// interval.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<CorrelationResult<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples { required: 3, found: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let nf = T::of_usize(n);
    let mx = x.iter().copied().sum::<T>() / nf;
    let my = y.iter().copied().sum::<T>() / nf;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::ConstantVector);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one());
    let (p, ci95) = significance(r.as_f64(), n);
    Ok(CorrelationResult {
        r,
        p: T::of(p),
        ci95: (T::of(ci95.0).min(r), T::of(ci95.1).max(r)),
        n,
    })
}

fn significance(r: f64, n: usize) -> (f64, (f64, f64)) {
    if r.abs() >= 1.0 {
        return (0.0, (r, r));
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    let ci = if n > 3 {
        let z = r.atanh();
        let half = Z_975 / ((n - 3) as f64).sqrt();
        ((z - half).tanh(), (z + half).tanh())
    } else {
        (-1.0, 1.0)
    };
    (p, ci)
}

/// Spearman rank correlation: Pearson on midranks.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<CorrelationResult<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let rx: Vec<T> = midranks(x).into_iter().map(T::of).collect();
    let ry: Vec<T> = midranks(y).into_iter().map(T::of).collect();
    pearson(&rx, &ry)
}
