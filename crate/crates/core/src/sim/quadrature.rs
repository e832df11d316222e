//! Adaptive Gauss-Kronrod quadrature for low-dimensional posteriors.

use crate::error::{Error, Result};
use crate::laplace::LaplaceEngine;
use crate::model::ModelStructure;

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 2000;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for k in 0..7 {
        let dx = h * KRONROD_NODES[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += KRONROD_WEIGHTS[k] * s;
        if k % 2 == 1 {
            gauss += GAUSS_WEIGHTS[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive G7-K15 integral of `f` over `[a, b]` to relative
/// tolerance `rel_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut intervals = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let error: f64 = intervals.iter().map(|i| i.3).sum();
        if !total.is_finite() || !error.is_finite() {
            return Err(Error::InvalidModel(
                "non-integrable quadrature input".into(),
            ));
        }
        if error <= rel_tol * total.abs() || error < f64::MIN_POSITIVE {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                iterations: intervals.len(),
                trace: vec![total, error],
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Nested adaptive integral over the box `[a0, b0] x [a1, b1]`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    (a0, b0): (f64, f64),
    (a1, b1): (f64, f64),
    rel_tol: f64,
) -> Result<f64> {
    let mut failure = None;
    let value = integrate(
        |x| match integrate(|y| f(x, y), a1, b1, 0.1 * rel_tol) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        a0,
        b0,
        rel_tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Posterior moments by direct integration of the unnormalized density.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureMoments {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Covariance of the two components in 2-D, zero in 1-D.
    pub covariance: f64,
    /// Log of the integral of `exp(log_density)`.
    pub log_normalizer: f64,
}

/// Integrates `exp(log_density)` and its first two moments over the box
/// `center +- 10 * scale`. `log_density` is shifted by its value at `center`.
pub fn posterior_moments<F: Fn(&[f64]) -> f64>(
    log_density: F,
    center: &[f64],
    scale: &[f64],
    rel_tol: f64,
) -> Result<QuadratureMoments> {
    let d = center.len();
    if d == 0 || d > 2 || scale.len() != d {
        return Err(Error::InvalidModel(format!(
            "quadrature needs 1 or 2 latent dimensions, got {d}"
        )));
    }
    let shift = log_density(center);
    if !shift.is_finite() {
        return Err(Error::InvalidModel(
            "log density not finite at the box center".into(),
        ));
    }
    let dens = |x: &[f64]| -> f64 {
        let v = log_density(x) - shift;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    let box_of = |k: usize| (center[k] - 10.0 * scale[k], center[k] + 10.0 * scale[k]);
    if d == 1 {
        let (a, b) = box_of(0);
        // Moments about the center avoid cancellation.
        let c = center[0];
        let z = integrate(|x| dens(&[x]), a, b, rel_tol)?;
        let m1 = integrate(|x| (x - c) * dens(&[x]), a, b, rel_tol)? / z;
        let m2 = integrate(|x| (x - c).powi(2) * dens(&[x]), a, b, rel_tol)? / z;
        return Ok(QuadratureMoments {
            mean: vec![c + m1],
            sd: vec![(m2 - m1 * m1).max(0.0).sqrt()],
            covariance: 0.0,
            log_normalizer: z.ln() + shift,
        });
    }
    let (bx, by) = (box_of(0), box_of(1));
    let (c0, c1) = (center[0], center[1]);
    let m = |g: &dyn Fn(f64, f64) -> f64| {
        integrate_2d(|x, y| g(x - c0, y - c1) * dens(&[x, y]), bx, by, rel_tol)
    };
    let z = m(&|_, _| 1.0)?;
    let e0 = m(&|x, _| x)? / z;
    let e1 = m(&|_, y| y)? / z;
    let e00 = m(&|x, _| x * x)? / z;
    let e11 = m(&|_, y| y * y)? / z;
    let e01 = m(&|x, y| x * y)? / z;
    Ok(QuadratureMoments {
        mean: vec![c0 + e0, c1 + e1],
        sd: vec![
            (e00 - e0 * e0).max(0.0).sqrt(),
            (e11 - e1 * e1).max(0.0).sqrt(),
        ],
        covariance: e01 - e0 * e1,
        log_normalizer: z.ln() + shift,
    })
}

/// Exact posterior moments of an unconstrained model with at most two
/// latent components at fixed `theta`. The integration box is centered on
/// the latent mode and spans ten Laplace standard deviations each way.
pub fn quadrature_oracle(
    model: &ModelStructure,
    theta: f64,
    rel_tol: f64,
) -> Result<QuadratureMoments> {
    if model.latent_dim() > 2 {
        return Err(Error::InvalidModel(format!(
            "quadrature oracle needs at most 2 latent dimensions, got {}",
            model.latent_dim()
        )));
    }
    if !model.layout.constraint.is_empty() {
        return Err(Error::InvalidModel(
            "quadrature oracle needs an unconstrained model".into(),
        ));
    }
    let engine = LaplaceEngine::new(model)?;
    let mode = engine.find_mode(theta, None)?;
    let scale: Vec<f64> = mode
        .factor
        .selected_inverse()
        .diagonal()
        .iter()
        .map(|v| v.sqrt())
        .collect();
    posterior_moments(
        |eta| engine.objective(eta, theta).unwrap_or(f64::NEG_INFINITY),
        &mode.mode,
        &scale,
        rel_tol,
    )
}
