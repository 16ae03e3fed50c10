//! The linearized operator around a Fowler orbit: mode operators, explicit
//! Jacobi fields, monodromy matrices, and Floquet indicial roots.
//!
//! Separating variables on the cylinder turns the linearization into a
//! family of Hill equations psi'' + q_l(t) psi = 0, one per spherical
//! harmonic degree l, with the periodic potential
//! q_l = (n(n+2)/4) v^{4/(n-2)} - (n-2)^2/4 - lambda_l. The indicial root
//! gamma_l is the Floquet exponent of that equation: the monodromy matrix
//! over one period has trace 2 cosh(gamma_l T).

use crate::error::{Error, Result};
use crate::fowler::FowlerOrbit;
use crate::geometry::sphere_eigen;
use crate::ode::{integrate_span, HermiteSpline, OdeSystem};
use serde::{Deserialize, Serialize};

/// Mode index: either a harmonic degree l or a multiplicity-expanded index j
/// (j = 0 is degree 0; j = 1..n is degree 1; j = n+1.. starts degree 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeIndex {
    Degree(u32),
    Flat(u32),
}

impl ModeIndex {
    /// Resolve to a harmonic degree for dimension n.
    pub fn degree(self, n: u32) -> u32 {
        match self {
            ModeIndex::Degree(l) => l,
            ModeIndex::Flat(j) => {
                let mut j = j as u64;
                let mut l = 0u32;
                loop {
                    let m = sphere_eigen(l, n).map(|e| e.multiplicity).unwrap_or(1);
                    if j < m {
                        return l;
                    }
                    j -= m;
                    l += 1;
                }
            }
        }
    }
}

/// One separated mode of the linearized operator.
pub struct ModeOperator<'a> {
    pub orbit: &'a FowlerOrbit,
    /// Harmonic degree l.
    pub degree: u32,
    /// Sphere eigenvalue lambda = l(l+n-2).
    pub lambda: f64,
}

impl<'a> ModeOperator<'a> {
    pub fn new(orbit: &'a FowlerOrbit, index: ModeIndex) -> Result<Self> {
        let degree = index.degree(orbit.n);
        let eig = sphere_eigen(degree, orbit.n)?;
        Ok(ModeOperator { orbit, degree, lambda: eig.lambda as f64 })
    }

    /// The periodic potential q(t) of the Hill equation psi'' + q psi = 0.
    pub fn potential(&self, t: f64) -> f64 {
        let d = &self.orbit.dynamics;
        let nf = self.orbit.n as f64;
        let v = self.orbit.eval_v(t);
        nf * (nf + 2.0) / 4.0 * v.powf(d.p_lin) - d.quad - self.lambda
    }

    fn potential_dot(&self, t: f64) -> f64 {
        let d = &self.orbit.dynamics;
        let nf = self.orbit.n as f64;
        let v = self.orbit.eval_v(t);
        let w = self.orbit.eval_w(t);
        nf * (nf + 2.0) / (nf - 2.0) * v.powf(d.p_lin2) * w
    }
}

/// Both basis solutions of the Hill equation integrated together:
/// y = (psi1, psi1', psi2, psi2').
struct HillSystem<'a, 'b> {
    op: &'b ModeOperator<'a>,
}

impl OdeSystem<4> for HillSystem<'_, '_> {
    fn rhs(&self, t: f64, y: &[f64; 4], dy: &mut [f64; 4]) {
        let q = self.op.potential(t);
        dy[0] = y[1];
        dy[1] = -q * y[0];
        dy[2] = y[3];
        dy[3] = -q * y[2];
    }
    fn rhs_dot(&self, t: f64, y: &[f64; 4], f: &[f64; 4], fd: &mut [f64; 4]) {
        let q = self.op.potential(t);
        let qd = self.op.potential_dot(t);
        fd[0] = f[1];
        fd[1] = -qd * y[0] - q * f[0];
        fd[2] = f[3];
        fd[3] = -qd * y[2] - q * f[2];
    }
}

/// Floquet data of one mode over one period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetResult {
    /// Harmonic degree of the mode.
    pub degree: u32,
    /// Sphere eigenvalue lambda.
    pub lambda: f64,
    /// State-transition matrix over one period, row-major
    /// [[psi1(T), psi2(T)], [psi1'(T), psi2'(T)]].
    pub monodromy: [[f64; 2]; 2],
    /// Trace of the monodromy matrix.
    pub trace: f64,
    /// Determinant, computed stably as the product of segment determinants.
    pub det: f64,
    /// Indicial root gamma >= 0: arccosh(|trace|/2)/T when |trace| > 2,
    /// zero at the parabolic point trace = 2.
    pub gamma: f64,
    /// Period of the underlying orbit.
    pub period: f64,
}

/// Tolerance for treating the trace as the parabolic double-unit multiplier.
const PARABOLIC_TOL: f64 = 1e-7;

/// Integrate the mode equation over one period from the bases (1,0), (0,1)
/// and extract the Floquet data.
///
/// The integration is split into segments so that each segment's transition
/// matrix has moderate entries; the determinant (a Wronskian, exactly 1 for
/// the true flow) is then the product of well-conditioned segment
/// determinants, avoiding the cancellation a direct 2x2 determinant of an
/// e^{gamma T}-sized matrix would suffer.
pub fn monodromy(op: &ModeOperator<'_>, tol: f64) -> Result<FloquetResult> {
    let period = op.orbit.period;
    let rtol = tol.clamp(1e-13, 1e-6);
    let atol = rtol * 1e-2;
    // growth-rate bound sqrt((n-2)^2/4 + lambda) sets the segment length
    let gamma_bound = (op.orbit.dynamics.quad + op.lambda).sqrt().max(0.5);
    let segments = ((gamma_bound * period / 6.9).ceil() as usize).max(1);

    let sys = HillSystem { op };
    let mut m = [[1.0f64, 0.0], [0.0, 1.0]];
    let mut det = 1.0f64;
    for s in 0..segments {
        let t0 = period * s as f64 / segments as f64;
        let t1 = period * (s + 1) as f64 / segments as f64;
        let spline = integrate_span(&sys, t0, [1.0, 0.0, 0.0, 1.0], t1, rtol, atol)
            .map_err(|e| Error::IntegrationFailed(format!("mode degree {}: {e}", op.degree)))?;
        let y = spline.eval_state(t1);
        let seg = [[y[0], y[2]], [y[1], y[3]]];
        det *= seg[0][0] * seg[1][1] - seg[0][1] * seg[1][0];
        m = mat_mul(seg, m);
    }

    let trace = m[0][0] + m[1][1];
    let gamma = if (trace - 2.0).abs() <= PARABOLIC_TOL {
        0.0
    } else if trace.abs() > 2.0 {
        (trace.abs() / 2.0).acosh() / period
    } else {
        return Err(Error::EllipticMode { degree: op.degree, trace });
    };
    Ok(FloquetResult {
        degree: op.degree,
        lambda: op.lambda,
        monodromy: m,
        trace,
        det,
        gamma,
        period,
    })
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Convenience wrapper: build the orbit and mode operator, return gamma.
pub fn indicial_root(eps: f64, n: u32, index: ModeIndex) -> Result<f64> {
    let orbit = crate::fowler::compute_orbit(eps, n, 1e-10)?;
    let op = ModeOperator::new(&orbit, index)?;
    Ok(monodromy(&op, 1e-12)?.gamma)
}

/// The translation Jacobi field: d/dT v_eps(t+T) at T = 0, i.e. v'(t).
/// Periodic; solves the degree-0 mode equation.
pub fn jacobi_translation(orbit: &FowlerOrbit) -> impl Fn(f64) -> f64 + '_ {
    move |t| orbit.eval_w(t)
}

/// The necksize Jacobi field d/d eps v_eps(t), by integrating the
/// variational equation along the orbit from (1, 0). Grows linearly in t.
pub struct NecksizeField {
    spline: HermiteSpline<4>,
    t_end: f64,
}

impl NecksizeField {
    pub fn eval(&self, t: f64) -> f64 {
        assert!(
            (0.0..=self.t_end).contains(&t),
            "necksize field evaluated outside its integrated span"
        );
        self.spline.eval(t, 2)
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        self.spline.eval(t, 3)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }
}

/// Integrate the necksize Jacobi field over `periods` periods of the orbit.
pub fn jacobi_necksize(orbit: &FowlerOrbit, periods: u32) -> Result<NecksizeField> {
    let t_end = orbit.period * periods.max(1) as f64;
    let spline = orbit.variational_spline(t_end)?;
    Ok(NecksizeField { spline, t_end })
}

/// The degree-1 decaying Jacobi field:
/// t -> e^{-t} (-v'(t) + ((n-2)/2) v(t)).
pub fn jacobi_mode1(orbit: &FowlerOrbit) -> impl Fn(f64) -> f64 + '_ {
    let c = (orbit.n as f64 - 2.0) / 2.0;
    move |t| (-t).exp() * (-orbit.eval_w(t) + c * orbit.eval_v(t))
}

/// The periodic part of the degree-1 field: -v'(s) + ((n-2)/2) v(s).
/// `jacobi_mode1(t) = e^{-t} * mode1_profile(t)`; the fitting module matches
/// degree-1 data against this profile.
pub fn mode1_profile(orbit: &FowlerOrbit, s: f64) -> f64 {
    let c = (orbit.n as f64 - 2.0) / 2.0;
    -orbit.eval_w(s) + c * orbit.eval_v(s)
}

/// One row of the spectrum report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub degree: u32,
    pub lambda: f64,
    pub gamma: f64,
    pub trace: f64,
    pub period: f64,
}

/// Floquet data for a list of harmonic degrees at one necksize.
pub fn spectrum(eps: f64, n: u32, degrees: &[u32], tol: f64) -> Result<Vec<SpectrumEntry>> {
    let orbit = crate::fowler::compute_orbit(eps, n, 1e-10)?;
    degrees
        .iter()
        .map(|&l| {
            let op = ModeOperator::new(&orbit, ModeIndex::Degree(l))?;
            let r = monodromy(&op, tol)?;
            Ok(SpectrumEntry {
                degree: l,
                lambda: r.lambda,
                gamma: r.gamma,
                trace: r.trace,
                period: r.period,
            })
        })
        .collect()
}

/// Residual of a candidate Jacobi field in its mode equation, with the
/// second derivative taken by Richardson-extrapolated central differences.
/// Independent of the analytic derivative chain, for testing.
pub fn mode_residual<F: Fn(f64) -> f64>(op: &ModeOperator<'_>, psi: &F, t: f64, h: f64) -> f64 {
    let d2 = |h: f64| (psi(t + h) - 2.0 * psi(t) + psi(t - h)) / (h * h);
    let fine = d2(h / 2.0);
    let coarse = d2(h);
    let second = (4.0 * fine - coarse) / 3.0;
    second + op.potential(t) * psi(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fowler::compute_orbit;
    use approx::assert_relative_eq;

    #[test]
    fn flat_index_to_degree() {
        // j = 0 -> l = 0; j = 1..n -> l = 1; j = n+1 -> l = 2
        for n in [3u32, 4] {
            assert_eq!(ModeIndex::Flat(0).degree(n), 0);
            for j in 1..=n {
                assert_eq!(ModeIndex::Flat(j).degree(n), 1);
            }
            assert_eq!(ModeIndex::Flat(n + 1).degree(n), 2);
        }
        assert_eq!(ModeIndex::Degree(5).degree(3), 5);
    }

    #[test]
    fn degree0_is_parabolic() {
        let orbit = compute_orbit(0.5, 3, 1e-10).unwrap();
        let op = ModeOperator::new(&orbit, ModeIndex::Degree(0)).unwrap();
        let r = monodromy(&op, 1e-12).unwrap();
        assert!((r.trace - 2.0).abs() < 1e-7, "trace = {}", r.trace);
        assert_eq!(r.gamma, 0.0);
        assert!((r.det - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degree1_root_is_one() {
        for &(eps, n) in &[(0.2, 3u32), (0.5, 3), (0.4, 4), (0.7, 4)] {
            let gamma = indicial_root(eps, n, ModeIndex::Degree(1)).unwrap();
            assert!((gamma - 1.0).abs() < 1e-6, "eps={eps} n={n} gamma={gamma}");
        }
    }

    #[test]
    fn degree2_root_approaches_limit() {
        // gamma -> sqrt((n-2)^2/4 + lambda) = 2.5 for n = 3, l = 2 as eps -> 0
        let g03 = indicial_root(0.3, 3, ModeIndex::Degree(2)).unwrap();
        let g01 = indicial_root(0.1, 3, ModeIndex::Degree(2)).unwrap();
        assert!((g01 - 2.5).abs() < (g03 - 2.5).abs(), "g(0.1)={g01} g(0.3)={g03}");
        assert!(g01 > 2.0 && g01 < 2.5);
    }

    #[test]
    fn gamma_nondecreasing_in_degree() {
        let orbit = compute_orbit(0.4, 3, 1e-10).unwrap();
        let mut prev = -1.0;
        for l in [1u32, 2, 3] {
            let op = ModeOperator::new(&orbit, ModeIndex::Degree(l)).unwrap();
            let r = monodromy(&op, 1e-12).unwrap();
            assert!(r.gamma >= prev, "gamma decreased at degree {l}");
            assert!((r.det - 1.0).abs() < 1e-8, "det = {} at degree {l}", r.det);
            prev = r.gamma;
        }
    }

    #[test]
    fn strictly_positive_root_in_maximum_principle_regime() {
        // lambda >= 2n
        let orbit = compute_orbit(0.6, 3, 1e-10).unwrap();
        for l in [2u32, 3] {
            let op = ModeOperator::new(&orbit, ModeIndex::Degree(l)).unwrap();
            let r = monodromy(&op, 1e-12).unwrap();
            assert!(r.gamma > 0.0);
        }
    }

    #[test]
    fn constant_orbit_roots_are_explicit() {
        // at eps0 the potential is constant (n-2) - lambda, so
        // gamma = sqrt(lambda - (n-2)) for l >= 1
        let n = 3;
        let eps0 = (1.0f64 / 3.0).powf(0.25);
        for l in [1u32, 2] {
            let lam = (l * (l + n - 2)) as f64;
            let gamma = indicial_root(eps0, n, ModeIndex::Degree(l)).unwrap();
            assert_relative_eq!(gamma, (lam - 1.0).sqrt(), epsilon = 1e-8);
        }
    }

    #[test]
    fn translation_field_solves_mode0() {
        let orbit = compute_orbit(0.5, 3, 1e-10).unwrap();
        let op = ModeOperator::new(&orbit, ModeIndex::Degree(0)).unwrap();
        let psi = jacobi_translation(&orbit);
        // value at the minimum is zero, periodic
        assert!(psi(0.0).abs() < 1e-12);
        assert!((psi(orbit.period) - psi(0.0)).abs() < 1e-10);
        let mut worst: f64 = 0.0;
        for i in 0..60 {
            let t = 3.0 * orbit.period * i as f64 / 59.0 + 0.05;
            worst = worst.max(mode_residual(&op, &psi, t, 1e-2).abs());
        }
        assert!(worst < 1e-6, "sup residual {worst}");
    }

    #[test]
    fn necksize_field_solves_mode0_and_grows() {
        let orbit = compute_orbit(0.5, 3, 1e-10).unwrap();
        let op = ModeOperator::new(&orbit, ModeIndex::Degree(0)).unwrap();
        let field = jacobi_necksize(&orbit, 6).unwrap();
        assert_relative_eq!(field.eval(0.0), 1.0, epsilon = 1e-12);
        let psi = |t: f64| field.eval(t);
        let mut worst: f64 = 0.0;
        for i in 0..60 {
            let t = 0.05 + (3.0 * orbit.period - 0.1) * i as f64 / 59.0;
            worst = worst.max(mode_residual(&op, &psi, t, 1e-2).abs());
        }
        assert!(worst < 1e-6, "sup residual {worst}");
        // linear growth: sup over [0, m T] roughly proportional to m
        let sup_m: Vec<f64> = (1..=5)
            .map(|m| {
                let mut s: f64 = 0.0;
                let t1 = orbit.period * m as f64;
                for i in 0..400 {
                    s = s.max(field.eval(t1 * i as f64 / 399.0).abs());
                }
                s
            })
            .collect();
        for m in 1..5 {
            assert!(sup_m[m] >= sup_m[m - 1]);
        }
        let increments: Vec<f64> = (1..5).map(|m| sup_m[m] - sup_m[m - 1]).collect();
        let mean_inc = increments.iter().sum::<f64>() / increments.len() as f64;
        assert!(mean_inc > 0.0);
        for inc in &increments {
            assert!((inc - mean_inc).abs() < 0.5 * mean_inc, "uneven growth: {increments:?}");
        }
    }

    #[test]
    fn mode1_field_solves_mode1() {
        let orbit = compute_orbit(0.5, 3, 1e-10).unwrap();
        let op = ModeOperator::new(&orbit, ModeIndex::Degree(1)).unwrap();
        let psi = jacobi_mode1(&orbit);
        let mut worst: f64 = 0.0;
        for i in 0..60 {
            let t = 0.05 + (3.0 * orbit.period - 0.1) * i as f64 / 59.0;
            worst = worst.max(mode_residual(&op, &psi, t, 1e-2).abs());
        }
        assert!(worst < 1e-6, "sup residual {worst}");
        // envelope bound |psi| <= e^{-t} max |profile|
        let mut profile_max: f64 = 0.0;
        for i in 0..200 {
            let s = orbit.period * i as f64 / 199.0;
            profile_max = profile_max.max(mode1_profile(&orbit, s).abs());
        }
        for i in 0..50 {
            let t = 2.0 * orbit.period * i as f64 / 49.0;
            assert!(psi(t).abs() <= (-t).exp() * profile_max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mode1_at_constant_orbit() {
        let n = 3u32;
        let eps0 = (1.0f64 / 3.0).powf(0.25);
        let orbit = compute_orbit(eps0, n, 1e-10).unwrap();
        let psi = jacobi_mode1(&orbit);
        for &t in &[0.0, 1.0, 2.5] {
            assert_relative_eq!(
                psi(t),
                (-t).exp() * (n as f64 - 2.0) / 2.0 * eps0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn necksize_field_matches_orbit_differences() {
        let orbit = compute_orbit(0.5, 3, 1e-10).unwrap();
        let field = jacobi_necksize(&orbit, 1).unwrap();
        let h = 1e-5;
        let op = compute_orbit(0.5 + h, 3, 1e-10).unwrap();
        let om = compute_orbit(0.5 - h, 3, 1e-10).unwrap();
        for i in 1..6 {
            let t = orbit.period * i as f64 / 6.4;
            let fd = (op.eval_v(t) - om.eval_v(t)) / (2.0 * h);
            assert!((fd - field.eval(t)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }
}
