//! Analytic Gaussian wave-packet evolution and phase accounting.
//!
//! For time-only forces the packet shape is rigid and the phase has the
//! closed form p(T)^2 T/2m - q Int V dt + q v0 W(T) at the packet center
//! (all with ħ = 1). For general forces the phase is assembled from the
//! classical trajectory as p(T)[x - x(T)] + Int p^2/2m dt - q Int V dt.
//! Both routes live here, together with the numerical check that they agree
//! when the force has no spatial dependence.
//!
//! Phases are stored unwrapped; only probability formulas ever take a
//! cosine. Every packet carries an error budget for the two terms the
//! analytic solution drops: the quantum-potential term, bounded by
//! T/(8 m sigma^2), and the q^2 A^2/(2 m c^2) contribution.

// Test builds link std, whose inherent f64 methods shadow this trait.
#[allow(unused_imports)]
use num_traits::Float;

use core::f64::consts::PI;
use num_complex::Complex64;

use crate::dynamics::{
    solve_time_dep_tol, time_dep_quadratures, ClassicalTrajectory, GeneralPotentialSpec,
    TimeDepForceSpec, DEFAULT_QUAD_TOL,
};
use crate::error::{invalid, AbError, Result};
use crate::quad::adaptive_quad;
use crate::schrodinger::{Grid, GridWavefunction};
use crate::units::{check_regime, PacketRegime, DEFAULT_TOL_SPREAD, DEFAULT_TOL_WAVELENGTH};

/// Decomposed phase of a packet at its final time T.
///
/// The full phase at position x is
/// `momentum_at_t * (x - center_at_t) + kinetic_term + potential_term`;
/// the local term vanishes at the packet center. For packets evolved under
/// time-only forces the kinetic term is stored in its reduced form
/// `legacy_kinetic + legacy_w_term` (endpoint kinetic plus the
/// momentum-weighted potential-gradient integral), which equals
/// Int p^2/2m dt through first order in the charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLedger {
    /// p_cl(T), the coefficient of the local term.
    pub momentum_at_t: f64,
    /// x_cl(T), where the local term vanishes.
    pub center_at_t: f64,
    /// Int_0^T p^2/2m dt (or its reduced equivalent for time-only forces).
    pub kinetic_term: f64,
    /// -q Int_0^T V dt.
    pub potential_term: f64,
    /// p_cl(T)^2 T / 2m, when the packet came from the time-only route.
    pub legacy_kinetic: Option<f64>,
    /// q v0 W(T) with W = Int t' V'(t') dt', time-only route only.
    pub legacy_w_term: Option<f64>,
}

impl PhaseLedger {
    pub fn free(p: f64, x: f64) -> Self {
        PhaseLedger {
            momentum_at_t: p,
            center_at_t: x,
            kinetic_term: 0.0,
            potential_term: 0.0,
            legacy_kinetic: None,
            legacy_w_term: None,
        }
    }

    /// Unwrapped phase at position x.
    pub fn total_at(&self, x: f64) -> f64 {
        self.momentum_at_t * (x - self.center_at_t) + self.kinetic_term + self.potential_term
    }

    /// Unwrapped phase at the packet center.
    pub fn total_at_center(&self) -> f64 {
        self.kinetic_term + self.potential_term
    }
}

/// Sizes of the two contributions the analytic evolution neglects.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseErrorBudget {
    /// Bound T/(8 m sigma^2) on the neglected quantum-potential phase.
    pub quantum_potential: f64,
    /// (q^2 / 2 m c^2) Int A^2 dt, the dropped square-in-potential phase.
    pub dropped_a_squared: f64,
}

/// A rigid Gaussian packet exp(-(x - center)^2 / 4 sigma^2) with mean
/// momentum `p_mean` (ħ = 1, so momentum and wavenumber coincide) and an
/// unwrapped phase ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPacket {
    pub sigma: f64,
    pub x_center: f64,
    pub p_mean: f64,
    pub ledger: PhaseLedger,
    pub normalized: bool,
    pub budget: PhaseErrorBudget,
}

impl GaussianPacket {
    pub fn free(sigma: f64, x_center: f64, p_mean: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        Ok(GaussianPacket {
            sigma,
            x_center,
            p_mean,
            ledger: PhaseLedger::free(p_mean, x_center),
            normalized: true,
            budget: PhaseErrorBudget::default(),
        })
    }

    /// Amplitude at x, with the L2-normalizing prefactor.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.25);
        let env =
            (-(x - self.x_center) * (x - self.x_center) / (4.0 * self.sigma * self.sigma)).exp();
        Complex64::from_polar(norm * env, self.ledger.total_at(x))
    }

    /// Sample onto a grid (not re-normalized; the analytic normalization
    /// already integrates to one).
    pub fn sample(&self, grid: Grid, time: f64) -> GridWavefunction {
        let amplitudes = (0..grid.n).map(|i| self.evaluate(grid.x(i))).collect();
        GridWavefunction { grid, amplitudes, time }
    }

    /// Analytic value of Int |psi|^2 dx; exactly 1 for a normalized packet.
    pub fn norm_integral(&self) -> f64 {
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.25);
        norm * norm * self.sigma * (2.0 * PI).sqrt()
    }
}

/// Regime tolerances for [`evolve_packet_gated`].
#[derive(Debug, Clone, Copy)]
pub struct RegimeGate {
    pub tol_wavelength: f64,
    pub tol_spread: f64,
}

impl Default for RegimeGate {
    fn default() -> Self {
        RegimeGate {
            tol_wavelength: DEFAULT_TOL_WAVELENGTH,
            tol_spread: DEFAULT_TOL_SPREAD,
        }
    }
}

/// Evolve a packet of width `sigma` under the time-only-force spec for time
/// `t_final`, with the default regime gate.
pub fn evolve_packet_timedep(
    spec: &TimeDepForceSpec,
    sigma: f64,
    t_final: f64,
) -> Result<GaussianPacket> {
    evolve_packet_gated(spec, sigma, t_final, Some(&RegimeGate::default()), DEFAULT_QUAD_TOL)
}

/// Evolve with an explicit (or disabled) regime gate. Passing `None`
/// skips the wavelength/spreading check; the error budget is still filled
/// in, so callers in the static-source limit (speed ~ 0) can account for
/// the neglected terms themselves.
pub fn evolve_packet_gated(
    spec: &TimeDepForceSpec,
    sigma: f64,
    t_final: f64,
    gate: Option<&RegimeGate>,
    quad_tol: f64,
) -> Result<GaussianPacket> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    if !(t_final > 0.0) {
        return Err(invalid("evolution time must be positive"));
    }
    if let Some(gate) = gate {
        let regime = PacketRegime::natural(sigma, spec.m, spec.v0.abs(), t_final);
        let report = check_regime(&regime, gate.tol_wavelength, gate.tol_spread)?;
        if !report.pass() {
            let failed = if !report.wavelength_pass { "wavelength" } else { "spreading" };
            return Err(AbError::Regime {
                wavelength_ratio: report.wavelength_ratio,
                spreading_ratio: report.spreading_ratio,
                failed,
            });
        }
    }

    let end = solve_time_dep_tol(spec, t_final, quad_tol)?;
    let quads = time_dep_quadratures(spec, t_final, quad_tol)?;
    let potential = adaptive_quad(|t| spec.scalar_potential(t), 0.0, t_final, quad_tol)?.value;

    let legacy_kinetic = end.p * end.p * t_final / (2.0 * spec.m);
    let legacy_w = spec.q * spec.v0 * quads.w;
    let dropped_a2 = if spec.q != 0.0 {
        let a2 = adaptive_quad(|t| spec.a(t) * spec.a(t), 0.0, t_final, quad_tol)?.value;
        spec.q * spec.q / (2.0 * spec.m * spec.c * spec.c) * a2
    } else {
        0.0
    };

    Ok(GaussianPacket {
        sigma,
        x_center: end.x,
        p_mean: end.p,
        ledger: PhaseLedger {
            momentum_at_t: end.p,
            center_at_t: end.x,
            kinetic_term: legacy_kinetic + legacy_w,
            potential_term: -spec.q * potential,
            legacy_kinetic: Some(legacy_kinetic),
            legacy_w_term: Some(legacy_w),
        },
        normalized: true,
        budget: PhaseErrorBudget {
            quantum_potential: t_final / (8.0 * spec.m * sigma * sigma),
            dropped_a_squared: dropped_a2,
        },
    })
}

/// Integrate `f(t)` over `[t0, t1]` splitting at the trajectory nodes, so
/// the quadrature never straddles an interpolation seam.
pub(crate) fn integrate_along(
    traj: &ClassicalTrajectory,
    t0: f64,
    t1: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = t0;
    for &node in traj.times() {
        if node > t0 && node < t1 {
            total += adaptive_quad(&f, lo, node, tol)?.value;
            lo = node;
        }
    }
    total += adaptive_quad(&f, lo, t1, tol)?.value;
    Ok(total)
}

/// General-force phase at position x and time T, assembled from a
/// classical trajectory:
/// p(T)[x - x(T)] + Int_0^T p^2/2m dt - q Int_0^T V(x(t), t) dt.
pub fn phase_general(
    traj: &ClassicalTrajectory,
    spec: &GeneralPotentialSpec,
    x: f64,
    t_final: f64,
) -> Result<f64> {
    phase_general_tol(traj, spec, x, t_final, DEFAULT_QUAD_TOL)
}

pub fn phase_general_tol(
    traj: &ClassicalTrajectory,
    spec: &GeneralPotentialSpec,
    x: f64,
    t_final: f64,
    tol: f64,
) -> Result<f64> {
    if t_final < traj.start() || t_final > traj.end() + 1e-12 {
        return Err(invalid("trajectory does not span the requested time"));
    }
    let t0 = traj.start();
    let kinetic = integrate_along(traj, t0, t_final, tol, |t| {
        let p = traj.momentum(t);
        p * p / (2.0 * spec.m)
    })?;
    let potential = integrate_along(traj, t0, t_final, tol, |t| spec.v(traj.position(t), t))?;
    let p_end = traj.momentum(t_final);
    let x_end = traj.position(t_final);
    Ok(p_end * (x - x_end) + kinetic - spec.q * potential)
}

/// Both sides of the identity between the time-only closed-form phase and
/// the general phase formula, evaluated at the packet center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseIdentityReport {
    /// Closed form: p(T)^2 T/2m - q Int V + q v0 W(T).
    pub closed_form: f64,
    /// General form: Int p^2/2m dt - q Int V.
    pub general_form: f64,
    pub abs_difference: f64,
    pub rel_difference: f64,
    /// Int_0^T p^2/2m dt evaluated directly.
    pub kinetic_integral: f64,
    /// p(T)^2 T / 2m.
    pub kinetic_endpoint_term: f64,
    /// q v0 W(T).
    pub momentum_weighted_term: f64,
}

/// Check numerically that the general phase formula reduces to the
/// time-only closed form when the force has no spatial dependence. The two
/// sides are computed through independent quadrature chains; they agree up
/// to terms quadratic in the potentials.
pub fn phase_reduction_check(
    spec: &TimeDepForceSpec,
    t_final: f64,
    tol: f64,
) -> Result<PhaseIdentityReport> {
    if !(t_final > 0.0) {
        return Err(invalid("evolution time must be positive"));
    }
    let end = solve_time_dep_tol(spec, t_final, tol)?;
    let quads = time_dep_quadratures(spec, t_final, tol)?;
    let potential = adaptive_quad(|t| spec.scalar_potential(t), 0.0, t_final, tol)?.value;

    let kinetic_endpoint = end.p * end.p * t_final / (2.0 * spec.m);
    let w_term = spec.q * spec.v0 * quads.w;
    let closed_form = kinetic_endpoint + w_term - spec.q * potential;

    // Independent route: integrate p(t)^2/2m with p(t) rebuilt from its own
    // nested quadrature at every evaluation point.
    let kinetic_integral = adaptive_quad(
        |t| {
            let p = solve_time_dep_tol(spec, t, tol).map(|pt| pt.p).unwrap_or(f64::NAN);
            p * p / (2.0 * spec.m)
        },
        0.0,
        t_final,
        tol,
    )?
    .value;
    let general_form = kinetic_integral - spec.q * potential;

    let abs_difference = (closed_form - general_form).abs();
    let scale = closed_form.abs().max(general_form.abs()).max(f64::MIN_POSITIVE);
    Ok(PhaseIdentityReport {
        closed_form,
        general_form,
        abs_difference,
        rel_difference: abs_difference / scale,
        kinetic_integral,
        kinetic_endpoint_term: kinetic_endpoint,
        momentum_weighted_term: w_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_general;

    #[test]
    fn free_packet_center_and_phase() {
        let spec = TimeDepForceSpec::new(0.0, 5000.0, 0.5, 0.2);
        let packet = evolve_packet_timedep(&spec, 1.0, 3.0).unwrap();
        let p0 = 5000.0 * 0.2;
        assert!((packet.x_center - (0.5 + 0.2 * 3.0)).abs() < 1e-12);
        assert!((packet.p_mean - p0).abs() < 1e-12);
        let expect = p0 * p0 * 3.0 / (2.0 * 5000.0);
        assert!((packet.ledger.total_at_center() - expect).abs() < 1e-9);
    }

    #[test]
    fn analytic_normalization_is_exactly_one() {
        let packet = GaussianPacket::free(0.37, 1.0, 5.0).unwrap();
        assert!((packet.norm_integral() - 1.0).abs() < 1e-14);
        // and the sampled norm agrees on a wide grid
        let grid = Grid::centered(1.0, 8.0, 1024).unwrap();
        let psi = packet.sample(grid, 0.0);
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_force_potential_phase_matches_direct_quadrature() {
        // V'(t) = F/q constant, A = 0: the ledger's potential and W pieces
        // must equal their direct quadratures.
        let (q, m, f) = (0.5, 4000.0, 0.25);
        let spec = TimeDepForceSpec::new(q, m, 0.0, 0.2)
            .with_potential_gradient(move |_| f / q)
            .with_potential_offset(|_| 0.3);
        let t = 2.0;
        let packet = evolve_packet_timedep(&spec, 1.0, t).unwrap();
        let w_direct = adaptive_quad(|s| s * (f / q), 0.0, t, 1e-12).unwrap().value;
        let v_direct = adaptive_quad(|s| 0.3 + (0.0 + 0.2 * s) * (f / q), 0.0, t, 1e-12)
            .unwrap()
            .value;
        assert!((packet.ledger.legacy_w_term.unwrap() - q * 0.2 * w_direct).abs() < 1e-10);
        assert!((packet.ledger.potential_term + q * v_direct).abs() < 1e-10);
    }

    #[test]
    fn constant_potential_shift_moves_only_the_potential_term() {
        let (q, m) = (0.3, 4000.0);
        let base = TimeDepForceSpec::new(q, m, 0.0, 0.25)
            .with_potential_gradient(|t: f64| 0.4 * t.sin());
        let shifted = base.clone().with_potential_offset(|_| 1.7);
        let t = 2.0;
        let a = evolve_packet_timedep(&base, 1.0, t).unwrap();
        let b = evolve_packet_timedep(&shifted, 1.0, t).unwrap();
        let dv = b.ledger.potential_term - a.ledger.potential_term;
        assert!((dv + q * 1.7 * t).abs() < 1e-10, "dv {dv}");
        assert!((a.ledger.kinetic_term - b.ledger.kinetic_term).abs() < 1e-12);
        assert_eq!(a.x_center, b.x_center);
    }

    #[test]
    fn regime_failure_reports_failed_ratio() {
        // narrow slow packet: wavelength condition fails
        let spec = TimeDepForceSpec::new(0.0, 1.0, 0.0, 0.01);
        match evolve_packet_timedep(&spec, 1.0, 0.1) {
            Err(AbError::Regime { failed, .. }) => assert_eq!(failed, "wavelength"),
            other => panic!("expected regime error, got {other:?}"),
        }
    }

    #[test]
    fn general_phase_free_motion() {
        let gen = GeneralPotentialSpec::new(0.0, 1500.0, |_, _| 0.0, |_, _| 0.0);
        let traj = integrate_general(&gen, 0.0, 0.3, (0.0, 2.0), 1e-12).unwrap();
        let phase = phase_general(&traj, &gen, traj.position(2.0), 2.0).unwrap();
        let expect = 1500.0 * 0.3 * 0.3 / 2.0 * 2.0; // m v^2/2 * T
        assert!((phase - expect).abs() < 1e-8, "{phase} vs {expect}");
    }

    #[test]
    fn general_phase_reduces_to_closed_form_for_time_only_forces() {
        let (q, m) = (1e-3, 800.0);
        let spec = TimeDepForceSpec::new(q, m, 0.1, 0.25)
            .with_vector_potential(|t: f64| 0.6 * (1.1 * t).sin())
            .with_potential_gradient(|t: f64| 0.5 * (0.7 * t).cos());
        let report = phase_reduction_check(&spec, 2.0, 1e-12).unwrap();
        assert!(report.rel_difference < 1e-10, "rel diff {}", report.rel_difference);
        // term-wise rearrangement: Int p^2/2m = p(T)^2 T/2m + q v0 W
        let lhs = report.kinetic_integral;
        let rhs = report.kinetic_endpoint_term + report.momentum_weighted_term;
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn reduction_identity_trivial_for_free_motion() {
        let spec = TimeDepForceSpec::new(0.0, 100.0, 0.0, 1.0);
        let report = phase_reduction_check(&spec, 1.0, 1e-12).unwrap();
        let expect = 100.0 / 2.0; // m v0^2 T / 2
        assert!((report.closed_form - expect).abs() < 1e-10);
        assert!(report.abs_difference < 1e-12);
    }

    #[test]
    fn analytic_evolution_matches_grid_propagation() {
        // One oscillating-force spec; the full randomized comparison lives
        // in the acceptance suite.
        let (q, m, v0, t) = (0.25, 1.0e4, 0.072, 2.0);
        let spec = TimeDepForceSpec::new(q, m, 0.0, v0)
            .with_vector_potential(|s: f64| 0.8 * (1.9 * s + 0.4).sin())
            .with_potential_gradient(|s: f64| 0.9 * (1.3 * s).cos())
            .with_potential_offset(|s: f64| 0.5 * (0.7 * s).sin());
        let p0 = m * v0 + q * spec.a(0.0);
        let drift = v0 * t;
        let grid = Grid::centered(drift / 2.0, 14.0 + drift / 2.0, 8192).unwrap();

        let start = GaussianPacket::free(1.0, 0.0, p0).unwrap();
        let psi0 = start.sample(grid, 0.0);
        let num = crate::schrodinger::propagate_schrodinger_1d(&spec, &psi0, t, 2048).unwrap();

        let packet = evolve_packet_timedep(&spec, 1.0, t).unwrap();
        let ana = packet.sample(grid, t);
        let (mag, phase) = crate::schrodinger::extract_global_phase(&num, &ana).unwrap();
        assert!(mag >= 0.999, "overlap {mag}");
        assert!(phase.abs() <= 1e-3, "phase discrepancy {phase}");
    }

    #[test]
    fn error_budget_tracks_neglected_terms() {
        let (q, m, c) = (0.2, 5000.0, 3.0);
        let spec = TimeDepForceSpec::new(q, m, 0.0, 0.2)
            .with_c(c)
            .with_vector_potential(|t: f64| 0.5 * t.cos());
        let t = 1.5;
        let packet = evolve_packet_timedep(&spec, 1.0, t).unwrap();
        assert!((packet.budget.quantum_potential - t / (8.0 * m)).abs() < 1e-15);
        let a2 = adaptive_quad(|s: f64| 0.25 * s.cos() * s.cos(), 0.0, t, 1e-12)
            .unwrap()
            .value;
        let expect = q * q / (2.0 * m * c * c) * a2;
        assert!((packet.budget.dropped_a_squared - expect).abs() < 1e-12);
    }
}
