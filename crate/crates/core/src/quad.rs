//! Adaptive Gauss-Kronrod quadrature, deterministic summation, and
//! Richardson extrapolation.
//!
//! The 7-15 nested pair provides the per-panel error estimate; the driver
//! always splits the interval with the largest estimated error. Every
//! integral in this crate (classical quadratures, phase integrals, the
//! geometry integrals of the experiment models) goes through this engine.

// Test builds link std, whose inherent f64 methods shadow this trait.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::error::{invalid, AbError, Result};

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

// 15-point Kronrod abscissae (positive half, descending), QUADPACK dqk15.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

// Kronrod weights matching XGK.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// 7-point Gauss weights; Gauss points sit at the odd-index Kronrod nodes.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// QUADPACK-style conservative rescaling of the raw Gauss/Kronrod difference.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One 15-point Kronrod panel; returns (integral, error, resabs).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];

    // The center is both a Kronrod node and the middle Gauss node.
    let mut res_gauss = f_center * WG[3];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();

    for j in 0..7 {
        let abscissa = half * XGK[j];
        let f1 = f(center - abscissa);
        let f2 = f(center + abscissa);
        fv1[j] = f1;
        fv2[j] = f2;
        let fsum = f1 + f2;
        res_kronrod += WGK[j] * fsum;
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * fsum;
        }
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = ((res_kronrod - res_gauss) * half).abs();
    (
        res_kronrod * half,
        rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
        res_abs * half.abs(),
    )
}

const MAX_PANELS: usize = 8192;

/// Fraction of the total |integrand| mass that scales the cancellation
/// floor: integrals that vanish by cancellation are resolved to
/// eps_rel * CANCELLATION_FLOOR * Int |f|.
const CANCELLATION_FLOOR: f64 = 1e-3;

/// Adaptive integration of `f` over `[a, b]` with both relative and absolute
/// error targets; stops once the summed error estimate is below
/// `max(eps_abs, eps_rel * |value|, eps_rel * 1e-3 * Int|f|)`. The last term
/// keeps cancellation-dominated integrals from demanding precision below
/// what their own magnitude scale supports, independent of units.
pub fn adaptive_quad_ae<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    eps_rel: f64,
    eps_abs: f64,
) -> Result<QuadratureResult> {
    if !(eps_rel > 0.0 || eps_abs > 0.0) {
        return Err(invalid("quadrature tolerance must be positive"));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(invalid("quadrature bounds must be finite"));
    }
    if a == b {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
        abs_mass: f64,
    }

    let (v0, e0, m0) = gk15(&f, a, b);
    if !v0.is_finite() {
        return Err(invalid("integrand not finite on the integration interval"));
    }
    let mut panels = Vec::with_capacity(64);
    panels.push(Panel { a, b, value: v0, err: e0, abs_mass: m0 });
    let mut evaluations = 15usize;

    loop {
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut total_mass = 0.0;
        let mut worst = 0usize;
        let mut worst_err = -1.0;
        for (i, p) in panels.iter().enumerate() {
            total += p.value;
            total_err += p.err;
            total_mass += p.abs_mass;
            if p.err > worst_err {
                worst_err = p.err;
                worst = i;
            }
        }

        // The per-panel estimates are floored at 50 eps |f| mass, so no
        // target below ~machine epsilon times the mass is reachable.
        let target = eps_abs
            .max(eps_rel * total.abs())
            .max((eps_rel * CANCELLATION_FLOOR).max(120.0 * f64::EPSILON) * total_mass);
        if total_err <= target {
            return Ok(QuadratureResult { value: total, error_estimate: total_err, evaluations });
        }
        if panels.len() >= MAX_PANELS {
            return Err(AbError::QuadratureTolerance {
                best: total,
                error_estimate: total_err,
                requested: target,
            });
        }

        let Panel { a: pa, b: pb, .. } = panels[worst];
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Interval no longer splittable in f64.
            let total_err_now = total_err;
            return Err(AbError::QuadratureTolerance {
                best: total,
                error_estimate: total_err_now,
                requested: target,
            });
        }
        let (vl, el, ml) = gk15(&f, pa, mid);
        let (vr, er, mr) = gk15(&f, mid, pb);
        if !(vl.is_finite() && vr.is_finite()) {
            return Err(invalid("integrand not finite on the integration interval"));
        }
        evaluations += 30;
        panels[worst] = Panel { a: pa, b: mid, value: vl, err: el, abs_mass: ml };
        panels.push(Panel { a: mid, b: pb, value: vr, err: er, abs_mass: mr });
    }
}

/// Adaptive integration with relative tolerance `tol` and no absolute
/// floor beyond the cancellation term of [`adaptive_quad_ae`].
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    adaptive_quad_ae(f, a, b, tol, 0.0)
}

/// Deterministic pairwise summation: a fixed-shape reduction tree, so the
/// result is independent of evaluation order and run-to-run identical.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Richardson extrapolation to the zero-spacing limit. `coarse` and `fine`
/// were computed at spacings h and h/ratio; the leading error is O(h^order).
pub fn richardson(coarse: f64, fine: f64, order: f64, ratio: f64) -> f64 {
    let rp = ratio.powf(order);
    (rp * fine - coarse) / (rp - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomials_integrate_exactly() {
        // K15 is exact far beyond degree 10; single-panel machine accuracy.
        for deg in 0..=10u32 {
            let exact = 1.0 / (deg as f64 + 1.0); // int_0^1 x^deg
            let r = adaptive_quad(|x| x.powi(deg as i32), 0.0, 1.0, 1e-12).unwrap();
            assert!((r.value - exact).abs() < 1e-14, "deg {deg}: {}", r.value);
        }
    }

    #[test]
    fn zero_integrand() {
        let r = adaptive_quad(|_| 0.0, 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn ring_kernel_integral_is_pi() {
        for r in [0.1, 0.5, 0.9] {
            let q = adaptive_quad(
                |th: f64| th.sin().powi(2) / (1.0 + r * r - 2.0 * r * th.cos()),
                0.0,
                2.0 * PI,
                1e-12,
            )
            .unwrap();
            assert!((q.value - PI).abs() < 1e-10, "r={r}: {}", q.value);
        }
    }

    #[test]
    fn log_kernel_matches_by_parts_closed_form() {
        // int_0^{2pi} cos(t) ln(R^2 + a^2 - 2 a R cos t) dt = -2 pi a / R for a < R.
        let (a, rr) = (1.0, 10.0);
        let q = adaptive_quad(
            |th: f64| th.cos() * (rr * rr + a * a - 2.0 * a * rr * th.cos()).ln(),
            0.0,
            2.0 * PI,
            1e-12,
        )
        .unwrap();
        let closed = -2.0 * PI * a / rr;
        assert!((q.value - closed).abs() < 1e-9, "{} vs {}", q.value, closed);
    }

    #[test]
    fn subdivision_limit_reports_best_estimate() {
        // a million oscillations cannot be resolved within the panel budget
        let err = adaptive_quad_ae(|x: f64| (1.0e6 * x).sin(), 0.0, 1.0, 1e-12, 0.0);
        match err {
            Err(AbError::QuadratureTolerance { best, error_estimate, requested }) => {
                assert!(best.is_finite());
                assert!(error_estimate > requested);
            }
            other => panic!("expected tolerance failure, got {other:?}"),
        }
    }

    #[test]
    fn pairwise_sum_is_deterministic_and_accurate() {
        let xs: alloc::vec::Vec<f64> = (0..10001).map(|i| (i as f64) * 1e-4).collect();
        let s1 = pairwise_sum(&xs);
        let s2 = pairwise_sum(&xs);
        assert_eq!(s1.to_bits(), s2.to_bits());
        let exact = 1e-4 * (10000.0 * 10001.0) / 2.0;
        assert!((s1 - exact).abs() / exact < 1e-14);
    }

    #[test]
    fn richardson_removes_leading_error() {
        // f(h) = 3 + 2 h^2 + h^4; the h^2 term (2e-2 at h = 0.1) must go.
        let f = |h: f64| 3.0 + 2.0 * h * h + h.powi(4);
        let est = richardson(f(0.1), f(0.05), 2.0, 2.0);
        assert!((est - 3.0).abs() < 1e-4);
    }
}
