//! Interference of interacting localized particles: packet overlaps,
//! interaction phases, and two-outcome detection probabilities.
//!
//! The model is one "electron" interacting with N source particles through
//! their mutual scalar potential and a gauge-dependent current-current term
//! built from a symmetric dyad. Every particle follows a classical track;
//! the joint wave function is a product of localized packets, and the
//! product picks up one extra phase equal to minus the time integral of the
//! interaction energy with operators replaced by classical values. In the
//! detection probabilities that extra phase cancels the electron's own
//! contribution, which is why the assembled phase can be attributed to the
//! sources alone, or to the electron alone, without changing anything
//! observable.

// Test builds link std, whose inherent f64 methods shadow this trait.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dynamics::{ClassicalTrajectory, GeneralPotentialSpec, TimeDepForceSpec};
use crate::error::{invalid, AbError, Result};
use crate::packet::{integrate_along, GaussianPacket};
use crate::quad::adaptive_quad;
use crate::units::UnitSystem;
use crate::vec3::{Mat3, Vec3};

/// Gauge choice for the current-current interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Lorenz,
    Coulomb,
}

/// The symmetric tensor mediating the current-current term: 1/r times the
/// identity in the Lorenz gauge, (1/2)(1/r + r r/r^3) in the Coulomb gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaugeDyad {
    pub gauge: Gauge,
}

impl GaugeDyad {
    pub fn new(gauge: Gauge) -> Self {
        GaugeDyad { gauge }
    }

    pub fn tensor(&self, r: Vec3) -> Result<Mat3> {
        let d = r.norm();
        if d == 0.0 {
            return Err(AbError::Singularity { time: f64::NAN });
        }
        Ok(match self.gauge {
            Gauge::Lorenz => Mat3::identity_scaled(1.0 / d),
            Gauge::Coulomb => {
                let unit = r * (1.0 / d);
                Mat3::identity_scaled(0.5 / d).add(Mat3::outer_scaled(unit, unit, 0.5 / d))
            }
        })
    }

    /// D(r) . v without materializing the tensor.
    pub fn apply(&self, r: Vec3, v: Vec3) -> Result<Vec3> {
        let d = r.norm();
        if d == 0.0 {
            return Err(AbError::Singularity { time: f64::NAN });
        }
        Ok(match self.gauge {
            Gauge::Lorenz => v * (1.0 / d),
            Gauge::Coulomb => {
                let unit = r * (1.0 / d);
                v * (0.5 / d) + unit * (0.5 / d * unit.dot(v))
            }
        })
    }
}

type PathFn = Arc<dyn Fn(f64) -> Vec3 + Send + Sync>;

/// A particle on a prescribed classical track in 3-space.
#[derive(Clone)]
pub struct Track3 {
    pub charge: f64,
    pub mass: f64,
    position: PathFn,
    velocity: PathFn,
}

impl Track3 {
    pub fn new<P, V>(charge: f64, mass: f64, position: P, velocity: V) -> Self
    where
        P: Fn(f64) -> Vec3 + Send + Sync + 'static,
        V: Fn(f64) -> Vec3 + Send + Sync + 'static,
    {
        Track3 { charge, mass, position: Arc::new(position), velocity: Arc::new(velocity) }
    }

    /// Uniform circular motion of angular velocity `omega` at height z,
    /// starting from angle `phi0`.
    pub fn circular(charge: f64, mass: f64, radius: f64, z: f64, omega: f64, phi0: f64) -> Self {
        Track3::new(
            charge,
            mass,
            move |t| {
                let phi = phi0 + omega * t;
                Vec3::new(radius * phi.cos(), radius * phi.sin(), z)
            },
            move |t| {
                let phi = phi0 + omega * t;
                Vec3::new(-radius * omega * phi.sin(), radius * omega * phi.cos(), 0.0)
            },
        )
    }

    pub fn position(&self, t: f64) -> Vec3 {
        (self.position)(t)
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        (self.velocity)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchLabel {
    A,
    B,
}

/// All particle tracks of one interferometer branch over [0, duration].
#[derive(Clone)]
pub struct BranchConfiguration {
    pub label: BranchLabel,
    pub electron: Track3,
    pub sources: Vec<Track3>,
    pub duration: f64,
}

/// Interaction energy at time t: the electron-source scalar potential plus
/// the gauge dyad current-current term (no source-source interaction).
pub fn interaction_energy(
    branch: &BranchConfiguration,
    gauge: Gauge,
    c: f64,
    t: f64,
) -> Result<f64> {
    let dyad = GaugeDyad::new(gauge);
    let xe = branch.electron.position(t);
    let ve = branch.electron.velocity(t);
    let qe = branch.electron.charge;
    let mut total = 0.0;
    for source in &branch.sources {
        let r = xe - source.position(t);
        let dist = r.norm();
        if dist == 0.0 {
            return Err(AbError::Singularity { time: t });
        }
        let coulomb = qe * source.charge / dist;
        let current = qe * source.charge / (c * c) * ve.dot(dyad.apply(r, source.velocity(t))?);
        total += coulomb - current;
    }
    Ok(total)
}

/// The interaction phase of one branch: -(1/ħ) Int_0^T H_int dt with all
/// operators replaced by their classical values. This is both the extra
/// phase (with opposite sign) and the per-branch phase contributed by
/// either particle group.
pub fn interaction_phase(
    branch: &BranchConfiguration,
    gauge: Gauge,
    units: &UnitSystem,
    tol: f64,
) -> Result<f64> {
    let c = units.c;
    let q = adaptive_quad(
        |t| match interaction_energy(branch, gauge, c, t) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        },
        0.0,
        branch.duration,
        tol,
    );
    match q {
        Ok(r) => Ok(-r.value / units.hbar),
        Err(e) => {
            // distinguish a particle (near-)crossing from an ordinary
            // tolerance failure: coarse-scan the pair distances, refine
            // around the minimum, and call anything below 1e-4 of the
            // system size a singularity
            let steps = 1997usize;
            let scan = |lo: f64, hi: f64| -> (f64, f64, f64) {
                let mut min_d = f64::INFINITY;
                let mut min_t = lo;
                let mut max_d: f64 = 0.0;
                for i in 0..=steps {
                    let t = lo + (hi - lo) * i as f64 / steps as f64;
                    let xe = branch.electron.position(t);
                    for s in &branch.sources {
                        let d = (xe - s.position(t)).norm();
                        max_d = max_d.max(d);
                        if d < min_d {
                            min_d = d;
                            min_t = t;
                        }
                    }
                }
                (min_d, min_t, max_d)
            };
            let (_, coarse_t, max_dist) = scan(0.0, branch.duration);
            let window = branch.duration / steps as f64;
            let (min_dist, min_t, _) = scan(
                (coarse_t - window).max(0.0),
                (coarse_t + window).min(branch.duration),
            );
            if min_dist <= 1e-4 * max_dist {
                Err(AbError::Singularity { time: min_t })
            } else {
                Err(e)
            }
        }
    }
}

/// Which particle's viewpoint to integrate when attributing the
/// interaction phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribution {
    Electron,
    Source(usize),
}

/// The same phase as [`interaction_phase`], but assembled from one
/// particle's perspective: (1/ħ) Int [ (q_i/c) v_i . A_other(x_i) -
/// q_i V_other(x_i) ] dt. By the symmetry of the interaction the electron
/// view equals the sum of all source views.
pub fn interaction_phase_attributed(
    branch: &BranchConfiguration,
    gauge: Gauge,
    units: &UnitSystem,
    tol: f64,
    attribution: Attribution,
) -> Result<f64> {
    let dyad = GaugeDyad::new(gauge);
    let c = units.c;
    let integrand = |t: f64| -> f64 {
        let inner = || -> Result<f64> {
            match attribution {
                Attribution::Electron => {
                    let xe = branch.electron.position(t);
                    let ve = branch.electron.velocity(t);
                    let qe = branch.electron.charge;
                    let mut vector = Vec3::ZERO;
                    let mut scalar = 0.0;
                    for s in &branch.sources {
                        let r = xe - s.position(t);
                        // vector potential of source s at the electron
                        vector = vector + dyad.apply(r, s.velocity(t))? * (s.charge / c);
                        scalar += s.charge / r.norm();
                    }
                    Ok(qe / c * ve.dot(vector) - qe * scalar)
                }
                Attribution::Source(k) => {
                    let s = branch.sources.get(k).ok_or_else(|| invalid("source index"))?;
                    let xs = s.position(t);
                    let vs = s.velocity(t);
                    let r = xs - branch.electron.position(t);
                    let a_e = dyad.apply(r, branch.electron.velocity(t))? * (branch.electron.charge / c);
                    let v_e = branch.electron.charge / r.norm();
                    Ok(s.charge / c * vs.dot(a_e) - s.charge * v_e)
                }
            }
        };
        inner().unwrap_or(f64::NAN)
    };
    let q = adaptive_quad(integrand, 0.0, branch.duration, tol)?;
    Ok(q.value / units.hbar)
}

/// Overlap <b|a> of two equal-width Gaussian packets: magnitude
/// exp(-(x_a-x_b)^2/8 sigma^2) exp(-sigma^2 (p_a-p_b)^2/2) and phase
/// (p_a+p_b)(x_b-x_a)/2 plus the difference of the accumulated center
/// phases.
pub fn gaussian_overlap(a: &GaussianPacket, b: &GaussianPacket) -> Result<(f64, f64)> {
    let sigma = a.sigma;
    if ((a.sigma - b.sigma) / sigma).abs() > 1e-12 {
        return Err(AbError::Unsupported(alloc::format!(
            "gaussian overlap requires equal widths (got {} and {})",
            a.sigma,
            b.sigma
        )));
    }
    let dx = a.x_center - b.x_center;
    let dp = a.p_mean - b.p_mean;
    let magnitude = (-dx * dx / (8.0 * sigma * sigma)).exp() * (-sigma * sigma * dp * dp / 2.0).exp();
    let phase = 0.5 * (a.p_mean + b.p_mean) * (b.x_center - a.x_center)
        + (a.ledger.total_at_center() - b.ledger.total_at_center());
    Ok((magnitude, phase))
}

/// Everything the two-outcome measurement produces.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceResult {
    /// (magnitude, phase) of <B|A> per particle; electron first.
    pub per_particle_overlap: Vec<(f64, f64)>,
    pub interaction_phase_a: f64,
    pub interaction_phase_b: f64,
    /// Product of the source overlap magnitudes.
    pub visibility: f64,
    /// Full assembly: extra phase + electron phase + source phases.
    pub total_phase: f64,
    /// Source-packet phases alone (the extra phase cancels the electron's).
    pub phase_sources_only: f64,
    /// Electron phase alone, i.e. the interaction-phase difference.
    pub phase_electron_only: f64,
    pub p_plus: f64,
    pub p_minus: f64,
}

/// Recombination slack for the electron packets, in units of sigma.
const RECOMBINATION_TOL: f64 = 1e-12;

/// Assemble detection probabilities P± = (1 ± visibility cos Phi)/2 from
/// the two branches. `packets_a`/`packets_b` hold the electron packet first
/// and then one packet per source, in branch order.
pub fn detection_probabilities(
    branch_a: &BranchConfiguration,
    branch_b: &BranchConfiguration,
    packets_a: &[GaussianPacket],
    packets_b: &[GaussianPacket],
    gauge: Gauge,
    units: &UnitSystem,
    tol: f64,
) -> Result<InterferenceResult> {
    let n = branch_a.sources.len();
    if branch_b.sources.len() != n {
        return Err(invalid("branches carry different source counts"));
    }
    if packets_a.len() != n + 1 || packets_b.len() != n + 1 {
        return Err(invalid("need one packet per particle, electron first"));
    }
    let (ea, eb) = (&packets_a[0], &packets_b[0]);
    let sigma = ea.sigma;
    if (ea.x_center - eb.x_center).abs() > RECOMBINATION_TOL * sigma
        || (ea.p_mean - eb.p_mean).abs() * sigma > RECOMBINATION_TOL
    {
        return Err(invalid(
            "electron packets are not recombined (centers or momenta differ)",
        ));
    }

    // Recombined electron: overlap magnitude is exactly 1, the phase is the
    // difference of accumulated center phases.
    let phase_electron_only = ea.ledger.total_at_center() - eb.ledger.total_at_center();
    let mut per_particle_overlap = alloc::vec![(1.0, phase_electron_only)];

    let mut visibility = 1.0;
    let mut phase_sources_only = 0.0;
    for k in 0..n {
        let (mag, phase) = gaussian_overlap(&packets_a[k + 1], &packets_b[k + 1])?;
        per_particle_overlap.push((mag, phase));
        visibility *= mag;
        phase_sources_only += phase;
    }

    let interaction_phase_a = interaction_phase(branch_a, gauge, units, tol)?;
    let interaction_phase_b = interaction_phase(branch_b, gauge, units, tol)?;
    // extra phase per branch is minus the interaction phase
    let total_phase =
        -(interaction_phase_a - interaction_phase_b) + phase_electron_only + phase_sources_only;

    let interference = visibility * total_phase.cos();
    let p_plus = 0.5 * (1.0 + interference);
    let p_minus = 0.5 * (1.0 - interference);

    Ok(InterferenceResult {
        per_particle_overlap,
        interaction_phase_a,
        interaction_phase_b,
        visibility,
        total_phase,
        phase_sources_only,
        phase_electron_only,
        p_plus,
        p_minus,
    })
}

/// Both routes to a single particle's branch phase difference, for branches
/// that do not recombine: the packet-ledger assembly
/// (local + kinetic + potential terms) and the compact vector-potential
/// form (q v0 / c) Int [A_a - A_b] dt - q Int [V_a - V_b] dt. They agree up
/// to terms quadratic in the charge.
pub fn per_particle_phase_routes(
    spec_a: &TimeDepForceSpec,
    spec_b: &TimeDepForceSpec,
    t_final: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if (spec_a.v0 - spec_b.v0).abs() > 1e-12 || (spec_a.x0 - spec_b.x0).abs() > 1e-12 {
        return Err(invalid("branches must share initial conditions"));
    }
    let end_a = crate::dynamics::solve_time_dep_tol(spec_a, t_final, tol)?;
    let end_b = crate::dynamics::solve_time_dep_tol(spec_b, t_final, tol)?;

    let kinetic = |spec: &TimeDepForceSpec| -> Result<f64> {
        Ok(adaptive_quad(
            |t| {
                let p = crate::dynamics::solve_time_dep_tol(spec, t, tol)
                    .map(|pt| pt.p)
                    .unwrap_or(f64::NAN);
                p * p / (2.0 * spec.m)
            },
            0.0,
            t_final,
            tol,
        )?
        .value)
    };
    let potential = |spec: &TimeDepForceSpec| -> Result<f64> {
        Ok(adaptive_quad(|t| spec.scalar_potential(t), 0.0, t_final, tol)?.value)
    };

    let local = 0.5 * (end_a.p + end_b.p) * (end_b.x - end_a.x);
    let ledger_route = local + (kinetic(spec_a)? - kinetic(spec_b)?)
        - (spec_a.q * potential(spec_a)? - spec_b.q * potential(spec_b)?);

    let vector = adaptive_quad(
        |t| spec_a.q * spec_a.v0 / spec_a.c * (spec_a.a(t) - spec_b.a(t)),
        0.0,
        t_final,
        tol,
    )?
    .value;
    let compact_route = vector
        - (spec_a.q * potential(spec_a)? - spec_b.q * potential(spec_b)?);

    Ok((ledger_route, compact_route))
}

/// Numerical check that the kinetic-phase difference of two recombining
/// branches reduces to the vector-potential form once the double integral
/// of the field difference cancels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticReductionReport {
    /// Int [p_a^2 - p_b^2]/2m dt.
    pub kinetic_difference: f64,
    /// (q v0 / c) Int [A(x_a(t), t) - A(x_b(t), t)] dt.
    pub vector_potential_form: f64,
    /// kinetic_difference - vector_potential_form; scales as q^2.
    pub residual: f64,
    /// q v0 Int_0^T (T - t) [E_a(t) - E_b(t)] dt, the cancelled term.
    pub field_double_integral: f64,
}

/// `spec_a`/`spec_b` carry the (generally branch-dependent) potentials each
/// trajectory moved in; pass the same spec twice when the field does not
/// depend on the branch.
pub fn kinetic_phase_reduction_check(
    traj_a: &ClassicalTrajectory,
    traj_b: &ClassicalTrajectory,
    spec_a: &GeneralPotentialSpec,
    spec_b: &GeneralPotentialSpec,
    t_final: f64,
    tol: f64,
) -> Result<KineticReductionReport> {
    let xa_end = traj_a.position(t_final);
    let xb_end = traj_b.position(t_final);
    let scale = xa_end.abs().max(xb_end.abs()).max(1.0);
    if (xa_end - xb_end).abs() > 1e-6 * scale {
        return Err(invalid("branch endpoints do not coincide"));
    }
    let v0 = traj_a.velocity(traj_a.start());
    let t0 = traj_a.start();

    let kin = |traj: &ClassicalTrajectory, m: f64| -> Result<f64> {
        integrate_along(traj, t0, t_final, tol, |t| {
            let p = traj.momentum(t);
            p * p / (2.0 * m)
        })
    };
    let kinetic_difference = kin(traj_a, spec_a.m)? - kin(traj_b, spec_b.m)?;

    let vector_potential_form = spec_a.q * v0 / spec_a.c
        * integrate_along(traj_a, t0, t_final, tol, |t| {
            spec_a.a(traj_a.position(t), t) - spec_b.a(traj_b.position(t), t)
        })?;

    // Int_0^T dt Int_0^t dt' f(t') = Int_0^T (T - t') f(t') dt'
    let field_double_integral = spec_a.q * v0
        * integrate_along(traj_a, t0, t_final, tol, |t| {
            (t_final - t)
                * (spec_a.efield(traj_a.position(t), t) - spec_b.efield(traj_b.position(t), t))
        })?;

    Ok(KineticReductionReport {
        kinetic_difference,
        vector_potential_form,
        residual: kinetic_difference - vector_potential_form,
        field_double_integral,
    })
}
