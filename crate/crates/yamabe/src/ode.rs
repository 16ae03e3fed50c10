//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4)) with
//! dense output.
//!
//! Dense output is a two-point quintic Hermite built from the state, its
//! first derivative (the right-hand side), and its second derivative (the
//! time derivative of the right-hand side along the flow, supplied by the
//! system). With the tight step sizes used here the interpolant is accurate
//! to well below 1e-12, which the event refinement and downstream finite
//! differencing rely on.

use crate::error::{Error, Result};

/// A first-order ODE system y' = f(t, y) that can also report the time
/// derivative of f along the flow (for quintic dense output).
pub(crate) trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]);
    /// d/dt of rhs along a trajectory: df/dt + (df/dy) f.
    fn rhs_dot(&self, t: f64, y: &[f64; N], f: &[f64; N], fd: &mut [f64; N]);
}

/// One accepted integration knot.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Knot<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub f: [f64; N],
    pub fd: [f64; N],
}

/// Piecewise quintic Hermite interpolant over a knot sequence.
#[derive(Debug, Clone)]
pub(crate) struct HermiteSpline<const N: usize> {
    pub knots: Vec<Knot<N>>,
}

impl<const N: usize> HermiteSpline<N> {
    pub fn t_start(&self) -> f64 {
        self.knots.first().map(|k| k.t).unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.knots.last().map(|k| k.t).unwrap_or(0.0)
    }

    fn segment(&self, t: f64) -> usize {
        // binary search for the segment containing t (clamped)
        let n = self.knots.len();
        debug_assert!(n >= 2);
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid].t <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Evaluate component `c` at time t (t must lie within the knot span).
    pub fn eval(&self, t: f64, c: usize) -> f64 {
        let i = self.segment(t);
        let (k0, k1) = (&self.knots[i], &self.knots[i + 1]);
        let h = k1.t - k0.t;
        if h == 0.0 {
            return k0.y[c];
        }
        let tau = (t - k0.t) / h;
        quintic(
            tau,
            k0.y[c],
            h * k0.f[c],
            h * h * k0.fd[c],
            k1.y[c],
            h * k1.f[c],
            h * h * k1.fd[c],
        )
    }

    /// Evaluate the derivative of component `c` at time t.
    pub fn eval_deriv(&self, t: f64, c: usize) -> f64 {
        let i = self.segment(t);
        let (k0, k1) = (&self.knots[i], &self.knots[i + 1]);
        let h = k1.t - k0.t;
        if h == 0.0 {
            return k0.f[c];
        }
        let tau = (t - k0.t) / h;
        quintic_deriv(
            tau,
            k0.y[c],
            h * k0.f[c],
            h * h * k0.fd[c],
            k1.y[c],
            h * k1.f[c],
            h * h * k1.fd[c],
        ) / h
    }

    pub fn eval_state(&self, t: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.eval(t, c);
        }
        out
    }
}

/// Two-point quintic Hermite in tau on [0,1]; arguments are scaled so that
/// p(0)=y0, p'(0)=g0, p''(0)=a0, p(1)=y1, p'(1)=g1, p''(1)=a1.
fn quintic(tau: f64, y0: f64, g0: f64, a0: f64, y1: f64, g1: f64, a1: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let t5 = t4 * tau;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = tau - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    y0 * h0 + g0 * h1 + a0 * h2 + y1 * h3 + g1 * h4 + a1 * h5
}

fn quintic_deriv(tau: f64, y0: f64, g0: f64, a0: f64, y1: f64, g1: f64, a1: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let h0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let h1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let h2 = 0.5 * (2.0 * tau - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let h3 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let h4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let h5 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    y0 * h0 + g0 * h1 + a0 * h2 + y1 * h3 + g1 * h4 + a1 * h5
}

// Dormand-Prince 5(4) tableau.
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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// b - bhat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Outcome of one adaptive step.
pub(crate) struct StepResult<const N: usize> {
    pub t1: f64,
    pub y1: [f64; N],
}

/// Adaptive Dormand-Prince 5(4) stepper with FSAL.
pub(crate) struct Dopri5<'a, const N: usize, S: OdeSystem<N>> {
    sys: &'a S,
    pub t: f64,
    pub y: [f64; N],
    f: [f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
    h_max: f64,
}

impl<'a, const N: usize, S: OdeSystem<N>> Dopri5<'a, N, S> {
    pub fn new(sys: &'a S, t0: f64, y0: [f64; N], rtol: f64, atol: f64) -> Self {
        let mut f = [0.0; N];
        sys.rhs(t0, &y0, &mut f);
        // crude initial step from derivative scale
        let d0 = y0.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1e-4);
        let d1 = f.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1e-4);
        let h = (0.01 * d0 / d1).min(0.1).max(1e-6);
        Dopri5 { sys, t: t0, y: y0, f, h, rtol, atol, h_max: f64::INFINITY }
    }

    pub fn set_h_max(&mut self, h_max: f64) {
        self.h_max = h_max;
        self.h = self.h.min(h_max);
    }

    /// Current knot (state plus derivative jet) for dense output.
    pub fn knot(&self) -> Knot<N> {
        let mut fd = [0.0; N];
        self.sys.rhs_dot(self.t, &self.y, &self.f, &mut fd);
        Knot { t: self.t, y: self.y, f: self.f, fd }
    }

    /// Take one accepted step. `gate` may veto an otherwise acceptable step
    /// (e.g. an invariant-drift budget); a veto halves the step.
    pub fn step<G: FnMut(f64, &[f64; N]) -> bool>(&mut self, mut gate: G) -> Result<StepResult<N>> {
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];
        let mut ytmp = [0.0; N];
        let mut y1 = [0.0; N];

        loop {
            let h = self.h;
            if !(h.is_finite()) || h < 1e-13 * (1.0 + self.t.abs()) {
                return Err(Error::IntegrationFailed(format!(
                    "step size underflow at t = {}",
                    self.t
                )));
            }
            let k1 = self.f;
            for i in 0..N {
                ytmp[i] = self.y[i] + h * A21 * k1[i];
            }
            self.sys.rhs(self.t + C2 * h, &ytmp, &mut k2);
            for i in 0..N {
                ytmp[i] = self.y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            self.sys.rhs(self.t + C3 * h, &ytmp, &mut k3);
            for i in 0..N {
                ytmp[i] = self.y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.sys.rhs(self.t + C4 * h, &ytmp, &mut k4);
            for i in 0..N {
                ytmp[i] =
                    self.y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.sys.rhs(self.t + C5 * h, &ytmp, &mut k5);
            for i in 0..N {
                ytmp[i] = self.y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.sys.rhs(self.t + h, &ytmp, &mut k6);
            for i in 0..N {
                y1[i] = self.y[i]
                    + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            self.sys.rhs(self.t + h, &y1, &mut k7);

            // embedded error estimate
            let mut err2 = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.atol + self.rtol * self.y[i].abs().max(y1[i].abs());
                err2 += (e / sc) * (e / sc);
            }
            let err = (err2 / N as f64).sqrt();

            if err <= 1.0 && gate(self.t + h, &y1) {
                let fac = (0.9 * err.powf(-0.2)).min(5.0).max(0.2);
                let t1 = self.t + h;
                self.t = t1;
                self.y = y1;
                self.f = k7; // FSAL
                self.h = (h * fac).min(self.h_max);
                return Ok(StepResult { t1, y1 });
            }
            // reject: shrink harder on gate vetos than on error rejections
            if err > 1.0 {
                let fac = (0.9 * err.powf(-0.2)).min(1.0).max(0.1);
                self.h = h * fac;
            } else {
                self.h = h * 0.5;
            }
        }
    }
}

/// Integrate to exactly t_end and collect the dense-output spline.
pub(crate) fn integrate_span<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<HermiteSpline<N>> {
    let mut stepper = Dopri5::new(sys, t0, y0, rtol, atol);
    let mut knots = vec![stepper.knot()];
    while stepper.t < t_end {
        if stepper.t + stepper.h > t_end {
            stepper.h = t_end - stepper.t;
        }
        stepper.step(|_, _| true)?;
        knots.push(stepper.knot());
    }
    Ok(HermiteSpline { knots })
}

/// Locate a root of `f` on [a, b] by bisection, assuming a sign change.
pub(crate) fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa > 0.0) == (fm > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}
