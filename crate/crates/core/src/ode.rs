//! Embedded Dormand-Prince 5(4) integrator for two-component states.
//!
//! Only the (position, velocity) pair ever needs integrating here, so the
//! state is a fixed `[f64; 2]`. Accepted nodes keep the state derivative so
//! trajectories can be interpolated with cubic Hermite segments downstream.

// Test builds link std, whose inherent f64 methods shadow this trait.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, AbError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; also bounds the Hermite interpolation
    /// error of the stored trajectory.
    pub max_step: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64, span: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol * 1e-2,
            max_step: span / 128.0,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<[f64; 2]>,
    /// Right-hand side evaluated at each node.
    pub dy: Vec<[f64; 2]>,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn axpy(y: [f64; 2], h: f64, terms: &[(f64, [f64; 2])]) -> [f64; 2] {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate `dy/dt = f(t, y)` over `t_span` with adaptive step control.
pub fn integrate<F>(f: F, t_span: (f64, f64), y0: [f64; 2], opts: &OdeOptions) -> Result<OdeSolution>
where
    F: Fn(f64, [f64; 2]) -> [f64; 2],
{
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(invalid("ODE span must have positive length"));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0 && opts.max_step > 0.0) {
        return Err(invalid("ODE tolerances and max step must be positive"));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, y);
    let mut h = (opts.max_step / 4.0).min(t1 - t0);

    let mut sol = OdeSolution {
        t: alloc::vec![t],
        y: alloc::vec![y],
        dy: alloc::vec![k1],
    };

    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(AbError::Configuration(format!(
                "ODE step limit {} exhausted at t = {t:e}",
                opts.max_steps
            )));
        }
        h = h.min(opts.max_step).min(t1 - t);
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(AbError::StepUnderflow { time_reached: t });
        }

        let k2 = f(t + C2 * h, axpy(y, h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, axpy(y, h, &[(A31, k1), (A32, k2)]));
        let k4 = f(t + C4 * h, axpy(y, h, &[(A41, k1), (A42, k2), (A43, k3)]));
        let k5 = f(
            t + C5 * h,
            axpy(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
        );
        let k6 = f(
            t + h,
            axpy(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
        );
        let y_new = axpy(y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        let k7 = f(t + h, y_new);

        let mut err_norm: f64 = 0.0;
        let mut finite = true;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            if !r.is_finite() {
                finite = false;
            }
            err_norm += r * r;
        }
        err_norm = (err_norm / 2.0).sqrt();

        if !finite {
            h *= 0.25;
            continue;
        }
        if err_norm <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7; // first-same-as-last
            sol.t.push(t);
            sol.y.push(y);
            sol.dy.push(k1);
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }

    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let sol = integrate(
            |_, y| [y[1], -y[0]],
            (0.0, 10.0),
            [1.0, 0.0],
            &OdeOptions::with_tolerance(1e-12, 10.0),
        )
        .unwrap();
        let xe = 10.0f64.cos();
        let ve = -(10.0f64.sin());
        let last = *sol.y.last().unwrap();
        assert!((last[0] - xe).abs() < 1e-9, "{} vs {xe}", last[0]);
        assert!((last[1] - ve).abs() < 1e-9);
    }

    #[test]
    fn singular_force_underflows_with_time_reached() {
        // Acceleration blows up as x -> 1; the solver must stop early and
        // report how far it got.
        let res = integrate(
            |_, y| [y[1], 1.0 / (1.0 - y[0]).powi(2)],
            (0.0, 10.0),
            [0.0, 1.0],
            &OdeOptions::with_tolerance(1e-10, 10.0),
        );
        match res {
            Err(AbError::StepUnderflow { time_reached }) => {
                assert!(time_reached > 0.0 && time_reached < 10.0);
            }
            other => panic!("expected step underflow, got {other:?}"),
        }
    }
}
