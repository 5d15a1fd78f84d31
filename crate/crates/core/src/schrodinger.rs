//! Direct grid propagation of the 1D time-dependent Schrödinger equation,
//! used as the independent oracle for the analytic packet solutions.
//!
//! The Hamiltonian is the time-only-force form
//! H = (1/2m)[p - (q/c) A(t)]^2 + q g(t) + q x V'(t) with ħ = 1.
//! Propagation is Strang splitting: half a step of the position-local
//! potential, a full exact kinetic step in momentum space (the vector
//! potential only shifts the momentum argument, so the whole bracket is
//! diagonal there), then the second potential half step. Every factor is
//! unitary, so the discrete norm is conserved to rounding.

// Test builds link std, whose inherent f64 methods shadow this trait.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::dynamics::TimeDepForceSpec;
use crate::error::{invalid, AbError, Result};

/// Uniform spatial grid; the point count must be a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(invalid("grid needs x_max > x_min"));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid("grid size must be a power of two, at least 8"));
        }
        Ok(Grid { x_min, x_max, n })
    }

    pub fn centered(center: f64, half_width: f64, n: usize) -> Result<Self> {
        Grid::new(center - half_width, center + half_width, n)
    }

    /// Default oracle grid: 2^14 points spanning `center ± 12 sigma`.
    /// Callers comparing against moving packets usually widen this to keep
    /// the whole trajectory and the momentum content resolved.
    pub fn default_for_packet(center: f64, sigma: f64) -> Result<Self> {
        Grid::centered(center, 12.0 * sigma, 1 << 14)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.dx() * i as f64
    }
}

/// Complex amplitudes sampled on a [`Grid`] at one instant.
#[derive(Debug, Clone)]
pub struct GridWavefunction {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl GridWavefunction {
    /// Normalized Gaussian packet exp(-(x-x0)^2/4 sigma^2 + i p0 x).
    pub fn gaussian(grid: Grid, sigma: f64, x0: f64, p0: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        let mut amplitudes = Vec::with_capacity(grid.n);
        for i in 0..grid.n {
            let x = grid.x(i);
            let env = (-(x - x0) * (x - x0) / (4.0 * sigma * sigma)).exp();
            amplitudes.push(Complex64::from_polar(env, p0 * x));
        }
        let mut psi = GridWavefunction { grid, amplitudes, time: 0.0 };
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(invalid("packet vanishes on this grid"));
        }
        let scale = 1.0 / norm.sqrt();
        for a in &mut psi.amplitudes {
            *a *= scale;
        }
        Ok(psi)
    }

    /// Discrete norm  sum |psi|^2 dx.
    pub fn norm(&self) -> f64 {
        let dx = self.grid.dx();
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx
    }

    /// Position expectation value.
    pub fn centroid(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let w = a.norm_sqr();
            num += w * self.grid.x(i);
            den += w;
        }
        num / den
    }
}

/// Iterative radix-2 FFT with precomputed twiddles and bit-reversal.
pub(crate) struct Fft {
    n: usize,
    rev: Vec<u32>,
    // twiddles[k] = exp(-2 pi i k / n), k < n/2
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let mut rev = Vec::with_capacity(n);
        for i in 0..n as u32 {
            rev.push(i.reverse_bits() >> (32 - bits));
        }
        let mut twiddles = Vec::with_capacity(n / 2);
        for k in 0..n / 2 {
            let angle = -2.0 * PI * k as f64 / n as f64;
            twiddles.push(Complex64::from_polar(1.0, angle));
        }
        Fft { n, rev, twiddles }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + len / 2] * w;
                    data[start + k] = a + b;
                    data[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
        if inverse {
            let scale = 1.0 / n as f64;
            for d in data.iter_mut() {
                *d *= scale;
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }
}

/// Wavenumbers in FFT ordering for an n-point grid of spacing dx.
fn momentum_grid(n: usize, dx: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * dx);
    (0..n)
        .map(|j| {
            let j = if j < n / 2 { j as isize } else { j as isize - n as isize };
            dk * j as f64
        })
        .collect()
}

fn relative_edge_amplitude(psi: &[Complex64], band: usize) -> f64 {
    let peak = psi.iter().map(|a| a.norm()).fold(0.0f64, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let n = psi.len();
    let edge = psi[..band]
        .iter()
        .chain(psi[n - band..].iter())
        .map(|a| a.norm())
        .fold(0.0f64, f64::max);
    edge / peak
}

/// Relative boundary amplitude above which propagation aborts.
pub const BOUNDARY_LEAK_LIMIT: f64 = 1e-12;

/// Propagate `psi0` for `duration` in `steps` equal Strang-splitting steps.
pub fn propagate_schrodinger_1d(
    spec: &TimeDepForceSpec,
    psi0: &GridWavefunction,
    duration: f64,
    steps: usize,
) -> Result<GridWavefunction> {
    if !(duration > 0.0) || steps == 0 {
        return Err(invalid("duration and step count must be positive"));
    }
    let n = psi0.grid.n;
    let dx = psi0.grid.dx();
    let band = (n / 64).max(2);
    let initial_leak = relative_edge_amplitude(&psi0.amplitudes, band);
    if initial_leak > BOUNDARY_LEAK_LIMIT {
        return Err(AbError::BoundaryLeak { magnitude: initial_leak });
    }

    let fft = Fft::new(n);
    let ks = momentum_grid(n, dx);
    let xs: Vec<f64> = (0..n).map(|i| psi0.grid.x(i)).collect();

    let dt = duration / steps as f64;
    let mut psi = psi0.amplitudes.clone();
    let t0 = psi0.time;

    for step in 0..steps {
        let tm = t0 + (step as f64 + 0.5) * dt;
        let g = spec.g(tm);
        let vp = spec.vprime(tm);
        let a = spec.a(tm);

        // half potential step: exp(-i dt/2 q (g + x V'))
        for (amp, &x) in psi.iter_mut().zip(&xs) {
            let phase = -0.5 * dt * spec.q * (g + x * vp);
            *amp *= Complex64::from_polar(1.0, phase);
        }
        // full kinetic step, exact in momentum space
        fft.forward(&mut psi);
        for (amp, &k) in psi.iter_mut().zip(&ks) {
            let kin = k - spec.q / spec.c * a;
            let phase = -dt * kin * kin / (2.0 * spec.m);
            *amp *= Complex64::from_polar(1.0, phase);
        }
        fft.inverse(&mut psi);
        // second half potential step
        for (amp, &x) in psi.iter_mut().zip(&xs) {
            let phase = -0.5 * dt * spec.q * (g + x * vp);
            *amp *= Complex64::from_polar(1.0, phase);
        }

        if step % 64 == 63 || step == steps - 1 {
            let leak = relative_edge_amplitude(&psi, band);
            if leak > BOUNDARY_LEAK_LIMIT {
                return Err(AbError::BoundaryLeak { magnitude: leak });
            }
        }
    }

    Ok(GridWavefunction {
        grid: psi0.grid,
        amplitudes: psi,
        time: t0 + duration,
    })
}

/// Magnitude and principal-value phase of the overlap <a|b>.
pub fn extract_global_phase(a: &GridWavefunction, b: &GridWavefunction) -> Result<(f64, f64)> {
    if a.grid != b.grid {
        return Err(invalid("wavefunctions live on different grids"));
    }
    let dx = a.grid.dx();
    let mut overlap = Complex64::new(0.0, 0.0);
    for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
        overlap += x.conj() * y;
    }
    overlap *= dx;
    let magnitude = overlap.norm();
    if magnitude < 1e-12 {
        return Err(AbError::DegenerateOverlap { magnitude });
    }
    Ok((magnitude, overlap.arg()))
}

/// Same as [`extract_global_phase`] but the phase is unwrapped to the
/// 2-pi branch closest to `previous`; use inside swept sequences.
pub fn extract_global_phase_unwrapped(
    a: &GridWavefunction,
    b: &GridWavefunction,
    previous: f64,
) -> Result<(f64, f64)> {
    let (magnitude, phase) = extract_global_phase(a, b)?;
    Ok((magnitude, unwrap_phase_near(phase, previous)))
}

/// Shift `phase` by multiples of 2 pi so it lands nearest `previous`.
pub fn unwrap_phase_near(phase: f64, previous: f64) -> f64 {
    let two_pi = 2.0 * PI;
    phase + two_pi * ((previous - phase) / two_pi).round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::solve_time_dep_tol;

    fn free_spec(m: f64, v0: f64) -> TimeDepForceSpec {
        TimeDepForceSpec::new(0.0, m, 0.0, v0)
    }

    #[test]
    fn fft_round_trip_and_parseval() {
        let fft = Fft::new(256);
        let mut data: Vec<Complex64> = (0..256)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let original = data.clone();
        let power: f64 = data.iter().map(|z| z.norm_sqr()).sum();
        fft.forward(&mut data);
        let k_power: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() / 256.0;
        assert!((power - k_power).abs() < 1e-9 * power);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&original) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn free_packet_center_moves_ballistically() {
        let grid = Grid::centered(0.0, 40.0, 2048).unwrap();
        let psi0 = GridWavefunction::gaussian(grid, 1.0, -5.0, 20.0).unwrap();
        let spec = free_spec(20.0, 1.0); // v0 = p0/m = 1
        let psi = propagate_schrodinger_1d(&spec, &psi0, 4.0, 400).unwrap();
        assert!((psi.centroid() - (-1.0)).abs() < 1e-6, "centroid {}", psi.centroid());
    }

    #[test]
    fn constant_force_matches_mean_motion_exactly() {
        // For a linear potential the packet mean obeys the classical
        // equation exactly; displacement v0 T + F T^2 / 2m.
        let grid = Grid::centered(0.0, 60.0, 4096).unwrap();
        let m = 30.0;
        let psi0 = GridWavefunction::gaussian(grid, 1.2, -6.0, 24.0).unwrap();
        let force = 2.0; // = -q V' with q = 1
        let spec = TimeDepForceSpec::new(1.0, m, -6.0, 24.0 / m)
            .with_potential_gradient(move |_| -force);
        let t = 5.0;
        let psi = propagate_schrodinger_1d(&spec, &psi0, t, 600).unwrap();
        let expect = -6.0 + (24.0 / m) * t + force * t * t / (2.0 * m);
        let got = psi.centroid();
        assert!(
            (got - expect).abs() / expect.abs() < 1e-6,
            "centroid {got} vs {expect}"
        );
    }

    #[test]
    fn norm_conserved_over_many_steps() {
        let grid = Grid::centered(0.0, 30.0, 512).unwrap();
        let psi0 = GridWavefunction::gaussian(grid, 1.0, 0.0, 6.0).unwrap();
        let spec = TimeDepForceSpec::new(0.2, 50.0, 0.0, 6.0 / 50.0)
            .with_vector_potential(|t: f64| 0.4 * t.sin())
            .with_potential_gradient(|t: f64| 0.3 * (1.3 * t).cos());
        let psi = propagate_schrodinger_1d(&spec, &psi0, 1.0, 10_000).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10, "norm drift {}", psi.norm() - 1.0);
    }

    #[test]
    fn second_order_convergence_in_step_count() {
        // Time-varying force sampled at step midpoints: the center-position
        // error scales as dt^2.
        let grid = Grid::centered(0.0, 50.0, 4096).unwrap();
        let m = 25.0;
        let psi0 = GridWavefunction::gaussian(grid, 1.0, -4.0, 25.0).unwrap();
        let spec = TimeDepForceSpec::new(1.0, m, -4.0, 1.0)
            .with_potential_gradient(|t: f64| 3.0 * (5.0 * t).sin());
        let t = 2.0;
        let exact = solve_time_dep_tol(&spec, t, 1e-13).unwrap().x;
        let err = |steps: usize| {
            let psi = propagate_schrodinger_1d(&spec, &psi0, t, steps).unwrap();
            (psi.centroid() - exact).abs()
        };
        let (e1, e2) = (err(40), err(80));
        let ratio = e1 / e2;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio} (e1 {e1}, e2 {e2})");
    }

    #[test]
    fn boundary_leak_is_detected() {
        let grid = Grid::centered(0.0, 6.0, 256).unwrap();
        let psi0 = GridWavefunction::gaussian(grid, 1.0, 0.0, 3.0).unwrap();
        let spec = free_spec(1.0, 3.0);
        // The packet runs into the right boundary well before t = 4.
        let res = propagate_schrodinger_1d(&spec, &psi0, 4.0, 400);
        match res {
            Err(AbError::BoundaryLeak { magnitude }) => assert!(magnitude > BOUNDARY_LEAK_LIMIT),
            other => panic!("expected boundary leak, got {other:?}"),
        }
    }

    #[test]
    fn identical_states_have_unit_overlap_and_zero_phase() {
        let grid = Grid::centered(0.0, 20.0, 512).unwrap();
        let psi = GridWavefunction::gaussian(grid, 1.0, 0.0, 2.0).unwrap();
        let (m, p) = extract_global_phase(&psi, &psi).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn constructed_global_phase_is_recovered() {
        let grid = Grid::centered(0.0, 20.0, 512).unwrap();
        let psi = GridWavefunction::gaussian(grid, 1.0, 0.0, 2.0).unwrap();
        let mut rotated = psi.clone();
        for a in &mut rotated.amplitudes {
            *a *= Complex64::from_polar(1.0, 0.7);
        }
        let (m, p) = extract_global_phase(&psi, &rotated).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
        assert!((p - 0.7).abs() < 1e-12);
    }

    #[test]
    fn disjoint_packets_are_degenerate() {
        let grid = Grid::centered(0.0, 30.0, 1024).unwrap();
        let a = GridWavefunction::gaussian(grid, 0.5, -20.0, 0.0).unwrap();
        let b = GridWavefunction::gaussian(grid, 0.5, 20.0, 0.0).unwrap();
        assert!(matches!(
            extract_global_phase(&a, &b),
            Err(AbError::DegenerateOverlap { .. })
        ));
    }

    #[test]
    fn unwrapping_follows_previous_sample() {
        assert!((unwrap_phase_near(0.1, 6.3) - (0.1 + 2.0 * PI)).abs() < 1e-12);
        assert!((unwrap_phase_near(-0.1, -6.3) - (-0.1 - 2.0 * PI)).abs() < 1e-12);
        assert_eq!(unwrap_phase_near(0.3, 0.2), 0.3);
    }
}
