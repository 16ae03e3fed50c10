//! The radial Fowler ODE on the cylinder: Hamiltonian structure, periodic
//! orbits, periods, and evaluation.
//!
//! On the cylinder the radial equation reduces to the autonomous system
//! v' = w, w' = ((n-2)^2/4) v - (n(n-2)/4) v^{(n+2)/(n-2)}, whose conserved
//! energy is H(v,w) = w^2 - ((n-2)^2/4) v^2 + ((n-2)^2/4) v^{2n/(n-2)}.
//! Orbits with H < 0 and v > 0 are periodic; the necksize eps is the minimum
//! of v over a period, and every orbit here is normalized so that
//! v(0) = eps, w(0) = 0.

use crate::error::{Error, Result};
use crate::geometry::{self, GeometrySetup};
use crate::ode::{integrate_span, Dopri5, HermiteSpline, OdeSystem};
use std::io::Write;
use std::path::Path;

/// A point (v, w) = (v, dv/dt) in the phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub v: f64,
    pub w: f64,
}

/// Cached powers of the nonlinearity for a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dynamics {
    pub n: u32,
    /// (n-2)^2 / 4
    pub quad: f64,
    /// n (n-2) / 4
    pub cubic: f64,
    /// (n+2)/(n-2)
    pub p_crit: f64,
    /// 2n/(n-2)
    pub p_energy: f64,
    /// 4/(n-2)
    pub p_lin: f64,
    /// (6-n)/(n-2)
    pub p_lin2: f64,
}

impl Dynamics {
    pub fn new(n: u32) -> Self {
        let nf = n as f64;
        Dynamics {
            n,
            quad: (nf - 2.0) * (nf - 2.0) / 4.0,
            cubic: nf * (nf - 2.0) / 4.0,
            p_crit: (nf + 2.0) / (nf - 2.0),
            p_energy: 2.0 * nf / (nf - 2.0),
            p_lin: 4.0 / (nf - 2.0),
            p_lin2: (6.0 - nf) / (nf - 2.0),
        }
    }

    /// Right-hand side of w': g(v) = quad v - cubic v^{(n+2)/(n-2)}.
    pub fn accel(&self, v: f64) -> f64 {
        self.quad * v - self.cubic * v.powf(self.p_crit)
    }

    /// g'(v) = quad - (n(n+2)/4) v^{4/(n-2)}.
    pub fn accel_v(&self, v: f64) -> f64 {
        let nf = self.n as f64;
        self.quad - nf * (nf + 2.0) / 4.0 * v.powf(self.p_lin)
    }

    /// g''(v) = -(n(n+2)/(n-2)) v^{(6-n)/(n-2)}.
    pub fn accel_vv(&self, v: f64) -> f64 {
        let nf = self.n as f64;
        -nf * (nf + 2.0) / (nf - 2.0) * v.powf(self.p_lin2)
    }

    pub fn energy(&self, v: f64, w: f64) -> f64 {
        w * w - self.quad * v * v + self.quad * v.powf(self.p_energy)
    }
}

struct FowlerSystem {
    dyn_: Dynamics,
}

impl OdeSystem<2> for FowlerSystem {
    fn rhs(&self, _t: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
        dy[0] = y[1];
        dy[1] = self.dyn_.accel(y[0]);
    }
    fn rhs_dot(&self, _t: f64, y: &[f64; 2], f: &[f64; 2], fd: &mut [f64; 2]) {
        fd[0] = f[1];
        fd[1] = self.dyn_.accel_v(y[0]) * y[1];
    }
}

/// Orbit plus its first variation with respect to the necksize:
/// (v, w, dv/deps, dw/deps).
pub(crate) struct VariationalSystem {
    dyn_: Dynamics,
}

impl OdeSystem<4> for VariationalSystem {
    fn rhs(&self, _t: f64, y: &[f64; 4], dy: &mut [f64; 4]) {
        dy[0] = y[1];
        dy[1] = self.dyn_.accel(y[0]);
        dy[2] = y[3];
        dy[3] = self.dyn_.accel_v(y[0]) * y[2];
    }
    fn rhs_dot(&self, _t: f64, y: &[f64; 4], f: &[f64; 4], fd: &mut [f64; 4]) {
        fd[0] = f[1];
        fd[1] = self.dyn_.accel_v(y[0]) * y[1];
        fd[2] = f[3];
        fd[3] = self.dyn_.accel_vv(y[0]) * y[1] * y[2] + self.dyn_.accel_v(y[0]) * y[3];
    }
}

/// Hamiltonian energy H(v, w) for dimension n. Rejects v <= 0.
pub fn hamiltonian(p: PhasePoint, n: u32) -> Result<f64> {
    geometry::setup(n)?;
    if p.v <= 0.0 {
        return Err(Error::InvalidConfiguration(format!("hamiltonian needs v > 0, got {}", p.v)));
    }
    Ok(Dynamics::new(n).energy(p.v, p.w))
}

/// Energy level of the necksize-eps orbit:
/// ((n-2)^2/4)(eps^{2n/(n-2)} - eps^2), strictly negative on (0, eps0].
pub fn energy_level(eps: f64, n: u32) -> Result<f64> {
    let g = geometry::setup(n)?;
    if !(eps > 0.0 && eps <= g.eps0 + 1e-14) {
        return Err(Error::InvalidNecksize { eps, eps0: g.eps0 });
    }
    let d = Dynamics::new(n);
    Ok(d.quad * (eps.powf(d.p_energy) - eps * eps))
}

/// Invert the energy map: the unique eps in (0, eps0] with
/// energy_level(eps) = h. The map is strictly decreasing on (0, eps0).
pub fn necksize_from_energy(h: f64, n: u32) -> Result<f64> {
    let g = geometry::setup(n)?;
    let h_min = energy_level(g.eps0, n)?;
    if !(h >= h_min && h < 0.0) {
        return Err(Error::EnergyOutOfRange { h, h_min });
    }
    // the energy map is quadratically flat at eps0, so inverting exactly at
    // the bottom of the range is ill-conditioned; snap to the endpoint
    if h - h_min <= 1e-13 * h_min.abs() {
        return Ok(g.eps0);
    }
    let d = Dynamics::new(n);
    let f = |eps: f64| {
        if eps <= 0.0 {
            -h // energy_level -> 0 > h as eps -> 0
        } else {
            d.quad * (eps.powf(d.p_energy) - eps * eps) - h
        }
    };
    // f(0+) = -h > 0, f(eps0) = h_min - h <= 0
    Ok(crate::ode::bisect_root(f, 0.0, g.eps0))
}

/// A computed periodic Fowler orbit with dense output over one period.
#[derive(Debug, Clone)]
pub struct FowlerOrbit {
    pub n: u32,
    /// Necksize: minimum of v over the period; v(0) = eps, w(0) = 0.
    pub eps: f64,
    /// Period of the orbit.
    pub period: f64,
    /// Conserved energy H(eps).
    pub energy: f64,
    pub(crate) geometry: GeometrySetup,
    pub(crate) dynamics: Dynamics,
    spline: HermiteSpline<2>,
}

/// Treat eps within this absolute distance of eps0 as the constant orbit.
const EPS0_SNAP: f64 = 1e-8;

/// Compute the necksize-eps orbit with a Hamiltonian-drift budget of
/// tol * |H(eps)| + 1e-12 over the period.
pub fn compute_orbit(eps: f64, n: u32, tol: f64) -> Result<FowlerOrbit> {
    let g = geometry::setup(n)?;
    if !(eps > 0.0 && eps <= g.eps0 + 1e-14) {
        return Err(Error::InvalidNecksize { eps, eps0: g.eps0 });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfiguration(format!("tolerance must be positive, got {tol}")));
    }
    let d = Dynamics::new(n);
    let t_limit = 2.0 * std::f64::consts::PI / (n as f64 - 2.0).sqrt();

    if (eps - g.eps0).abs() <= EPS0_SNAP {
        // constant orbit; period is the limiting linearization period
        let eps = g.eps0;
        let energy = d.energy(eps, 0.0);
        let sys = FowlerSystem { dyn_: d };
        let mut knots = Vec::new();
        for &t in &[0.0, t_limit] {
            let y = [eps, 0.0];
            let mut f = [0.0; 2];
            sys.rhs(t, &y, &mut f);
            let mut fd = [0.0; 2];
            sys.rhs_dot(t, &y, &f, &mut fd);
            knots.push(crate::ode::Knot { t, y, f, fd });
        }
        return Ok(FowlerOrbit {
            n,
            eps,
            period: t_limit,
            energy,
            geometry: g,
            dynamics: d,
            spline: HermiteSpline { knots },
        });
    }

    let energy = d.energy(eps, 0.0);
    let budget = 0.5 * (tol * energy.abs() + 1e-12);
    let sys = FowlerSystem { dyn_: d };
    let t_max = 100.0 * t_limit;

    // Integrate with period detection; if the measured energy drift exceeds
    // the budget, retry the whole orbit at a tighter tolerance.
    let mut rtol = (tol * 1e-2).clamp(1e-13, 1e-8);
    let mut last_drift = f64::NAN;
    for _attempt in 0..5 {
        let atol = rtol * 1e-2;
        let mut stepper = Dopri5::new(&sys, 0.0, [eps, 0.0], rtol, atol);
        stepper.set_h_max(0.1);
        let mut knots = vec![stepper.knot()];
        let mut prev_w = 0.0f64;
        let mut period = None;
        while stepper.t < t_max {
            let step = stepper.step(|_, _| true)?;
            knots.push(stepper.knot());
            // period = first w-crossing from - to + (the second crossing
            // overall; the first one, + to -, is the maximum of v)
            if prev_w < 0.0 && step.y1[1] >= 0.0 {
                let spline = HermiteSpline { knots: knots.clone() };
                let a = knots[knots.len() - 2].t;
                let b = step.t1;
                let root = crate::ode::bisect_root(|t| spline.eval(t, 1), a, b);
                period = Some(root);
                break;
            }
            prev_w = step.y1[1];
        }
        let period = period.ok_or(Error::PeriodSearchFailed { t_max })?;

        // trim the spline to [0, period]: replace the overshooting final
        // knot by an interpolated knot exactly at the period
        let full = HermiteSpline { knots };
        let y_end = full.eval_state(period);
        let mut knots: Vec<_> = full.knots.into_iter().filter(|k| k.t < period).collect();
        let mut f = [0.0; 2];
        sys.rhs(period, &y_end, &mut f);
        let mut fd = [0.0; 2];
        sys.rhs_dot(period, &y_end, &f, &mut fd);
        knots.push(crate::ode::Knot { t: period, y: y_end, f, fd });

        let orbit = FowlerOrbit {
            n,
            eps,
            period,
            energy,
            geometry: g,
            dynamics: d,
            spline: HermiteSpline { knots },
        };
        last_drift = orbit.max_energy_drift();
        if last_drift <= budget {
            return Ok(orbit);
        }
        rtol = (rtol * 0.1).max(1e-14);
    }
    Err(Error::IntegrationFailed(format!(
        "energy drift {last_drift:.3e} exceeds budget {budget:.3e} at eps = {eps}, n = {n}"
    )))
}

impl FowlerOrbit {
    /// v at time t, reduced modulo the period.
    pub fn eval_v(&self, t: f64) -> f64 {
        self.spline.eval(t.rem_euclid(self.period), 0)
    }

    /// w = dv/dt at time t, reduced modulo the period.
    pub fn eval_w(&self, t: f64) -> f64 {
        self.spline.eval(t.rem_euclid(self.period), 1)
    }

    /// Maximum of v over the period, refined between samples by locating
    /// the w-crossing from + to -.
    pub fn v_max(&self) -> f64 {
        let knots = &self.spline.knots;
        for i in 1..knots.len() {
            if knots[i - 1].y[1] > 0.0 && knots[i].y[1] <= 0.0 {
                let root = crate::ode::bisect_root(
                    |t| self.spline.eval(t, 1),
                    knots[i - 1].t,
                    knots[i].t,
                );
                return self.spline.eval(root, 0);
            }
        }
        // constant orbit
        self.eps
    }

    /// Maximum |H(v,w) - H(eps)| over the stored dense-output samples.
    pub fn max_energy_drift(&self) -> f64 {
        self.spline
            .knots
            .iter()
            .map(|k| (self.dynamics.energy(k.y[0], k.y[1]) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    /// The dense-output samples (t, v, w).
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.spline.knots.iter().map(|k| (k.t, k.y[0], k.y[1])).collect()
    }

    /// Write the orbit as CSV with header `t,v,w`, one row per sample.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,v,w")?;
        for (t, v, w) in self.samples() {
            writeln!(f, "{:.16e},{:.16e},{:.16e}", t, v, w)?;
        }
        Ok(())
    }

    /// Solve the variational equation (d v/d eps, d w/d eps) along the orbit
    /// from the initial data (1, 0) over [0, t_end]. Used for the
    /// necksize Jacobi field.
    pub(crate) fn variational_spline(&self, t_end: f64) -> Result<HermiteSpline<4>> {
        let sys = VariationalSystem { dyn_: self.dynamics };
        integrate_span(&sys, 0.0, [self.eps, 0.0, 1.0, 0.0], t_end, 1e-12, 1e-14)
    }
}

/// The limiting (sphere) solution on the cylinder: (cosh t)^{(2-n)/2}.
pub fn homoclinic(t: f64, n: u32) -> f64 {
    t.cosh().powf((2.0 - n as f64) / 2.0)
}

/// d/dt of the homoclinic solution.
pub fn homoclinic_deriv(t: f64, n: u32) -> f64 {
    let e = (2.0 - n as f64) / 2.0;
    e * t.cosh().powf(e - 1.0) * t.sinh()
}
