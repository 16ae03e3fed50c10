//! Dimension-dependent constants, spherical-harmonic eigendata, and product
//! quadrature on the unit sphere S^{n-1}.
//!
//! The quadrature is a product rule over hyperspherical angles: a Gauss rule
//! in each polar angle with the sin-power measure absorbed into the weight,
//! and a uniform (trapezoid) rule in the periodic azimuth. Such a rule is
//! exact on polynomials restricted to the sphere up to the declared degree.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Dimension-dependent constants of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySetup {
    /// Ambient dimension, n >= 3.
    pub n: u32,
    /// Maximal necksize: the constant cylindrical solution, ((n-2)/n)^{(n-2)/4}.
    pub eps0: f64,
    /// Volume of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
    pub omega: f64,
    /// Critical exponent (n+2)/(n-2).
    pub crit_exp: f64,
}

/// Build the constants for dimension `n`. Rejects n < 3.
pub fn setup(n: u32) -> Result<GeometrySetup> {
    if n < 3 {
        return Err(Error::InvalidDimension { n });
    }
    let nf = n as f64;
    Ok(GeometrySetup {
        n,
        eps0: ((nf - 2.0) / nf).powf((nf - 2.0) / 4.0),
        omega: sphere_volume(n),
        crit_exp: (nf + 2.0) / (nf - 2.0),
    })
}

/// Gamma(k/2) for integer k >= 1 by the half-integer recursion.
/// Exact (to rounding) for the integer and half-integer arguments we need.
pub(crate) fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1);
    match k {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Volume of the unit sphere S^{n-1} in R^n.
pub fn sphere_volume(n: u32) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// One eigenvalue of the Laplacian on S^{n-1} with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereEigenvalue {
    /// Harmonic degree l >= 0.
    pub degree: u32,
    /// Eigenvalue l(l+n-2), stored exactly as an integer.
    pub lambda: u64,
    /// Dimension of the degree-l spherical harmonics on S^{n-1}.
    pub multiplicity: u64,
}

impl SphereEigenvalue {
    pub fn lambda_f64(&self) -> f64 {
        self.lambda as f64
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Eigendata of the degree-l spherical harmonics on S^{n-1}.
pub fn sphere_eigen(l: u32, n: u32) -> Result<SphereEigenvalue> {
    if n < 3 {
        return Err(Error::InvalidDimension { n });
    }
    let lambda = l as u64 * (l as u64 + n as u64 - 2);
    // dim of degree-l harmonic polynomials in R^n
    let multiplicity = match l {
        0 => 1,
        1 => n as u64,
        _ => {
            binomial(n as u64 + l as u64 - 1, l as u64)
                - binomial(n as u64 + l as u64 - 3, l as u64 - 2)
        }
    };
    Ok(SphereEigenvalue { degree: l, lambda, multiplicity })
}

/// Structured angular grid underlying a product rule. Kept so that callers
/// can take finite differences of sampled data along the angular directions.
#[derive(Debug, Clone)]
pub struct ProductGrid {
    /// Polar angles per axis (each in (0, pi)), outermost axis first.
    pub polar: Vec<Vec<f64>>,
    /// Uniform azimuth angles in [0, 2 pi).
    pub azimuth: Vec<f64>,
}

impl ProductGrid {
    /// Number of nodes = product of per-axis counts times azimuth count.
    pub fn len(&self) -> usize {
        self.polar.iter().map(|p| p.len()).product::<usize>() * self.azimuth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat node index from the multi-index (polar indices, azimuth index).
    pub fn flat_index(&self, polar_idx: &[usize], az_idx: usize) -> usize {
        let mut idx = 0;
        for (k, &i) in polar_idx.iter().enumerate() {
            idx = idx * self.polar[k].len() + i;
        }
        idx * self.azimuth.len() + az_idx
    }
}

/// Quadrature rule on S^{n-1}: unit-vector nodes and positive weights that
/// sum to the sphere volume.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub n: u32,
    /// Declared polynomial exactness degree.
    pub degree: u32,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// The angular grid the nodes were generated from.
    pub grid: ProductGrid,
}

/// Gauss nodes/weights for the weight (1-s^2)^{(k-1)/2} on [-1, 1]
/// (Gegenbauer; k is the sin-power of the absorbed measure).
/// Golub-Welsch on the symmetric Jacobi recurrence.
fn gauss_gegenbauer(m: usize, k: u32) -> (Vec<f64>, Vec<f64>) {
    let alpha = (k as f64 - 1.0) / 2.0; // exponent on both (1-s) and (1+s)
    // total weight: 2^k Gamma((k+1)/2)^2 / Gamma(k+1)
    let mu0 = 2f64.powi(k as i32) * gamma_half(k + 1).powi(2) / gamma_half(2 * k + 2);
    if m == 1 {
        return (vec![0.0], vec![mu0]);
    }
    // Symmetric Jacobi matrix: zero diagonal, off-diagonals sqrt(beta_k).
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for j in 1..m {
        let jf = j as f64;
        let beta = if j == 1 {
            4.0 * (alpha + 1.0) * (alpha + 1.0)
                / ((2.0 * alpha + 2.0).powi(2) * (2.0 * alpha + 3.0))
        } else {
            let s = 2.0 * jf + 2.0 * alpha;
            4.0 * jf * (jf + alpha) * (jf + alpha) * (jf + 2.0 * alpha)
                / (s * s * (s + 1.0) * (s - 1.0))
        };
        let b = beta.sqrt();
        jac[(j - 1, j)] = b;
        jac[(j, j - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (mut nodes, mut weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    // enforce the exact +/- symmetry of the rule
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let s = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -s;
        nodes[j] = s;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Build a product quadrature rule on S^{n-1} exact for sphere-restricted
/// polynomials up to `degree`. Supports 3 <= n <= 8.
pub fn build_quadrature(n: u32, degree: u32) -> Result<QuadratureRule> {
    if !(3..=8).contains(&n) {
        return Err(Error::UnsupportedQuadratureDim { n });
    }
    let degree = degree.max(1);
    let m = (degree as usize + 2) / 2; // 2m-1 >= degree
    let n_az = (degree as usize + 1).max(2);

    // polar axis i (0-based) carries the measure sin^{n-2-i}
    let mut polar_nodes = Vec::new();
    let mut polar_weights = Vec::new();
    let mut polar_angles = Vec::new();
    for i in 0..(n as usize - 2) {
        let k = (n as usize - 2 - i) as u32;
        let (s, w) = gauss_gegenbauer(m, k);
        polar_angles.push(s.iter().map(|&si| si.acos()).collect::<Vec<f64>>());
        polar_nodes.push(s);
        polar_weights.push(w);
    }
    let azimuth: Vec<f64> = (0..n_az).map(|j| 2.0 * PI * j as f64 / n_az as f64).collect();
    let az_weight = 2.0 * PI / n_az as f64;

    let grid = ProductGrid { polar: polar_angles, azimuth: azimuth.clone() };
    let total = grid.len();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);

    // iterate over the multi-index in the same order as ProductGrid::flat_index
    let n_polar = n as usize - 2;
    let mut idx = vec![0usize; n_polar];
    loop {
        // weight for this polar multi-index
        let mut wpol = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            wpol *= polar_weights[k][i];
        }
        for &phi in &azimuth {
            let mut x = vec![0.0; n as usize];
            let mut sinprod = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                let c = polar_nodes[k][i];
                x[k] = sinprod * c;
                sinprod *= (1.0 - c * c).max(0.0).sqrt();
            }
            x[n as usize - 2] = sinprod * phi.cos();
            x[n as usize - 1] = sinprod * phi.sin();
            // renormalize to kill rounding drift
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut x {
                *v /= norm;
            }
            nodes.push(x);
            weights.push(wpol * az_weight);
        }
        // advance the polar multi-index, last axis fastest
        let mut k = n_polar;
        let mut done = true;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < polar_nodes[k].len() {
                done = false;
                break;
            }
            idx[k] = 0;
        }
        if done {
            break;
        }
    }

    Ok(QuadratureRule { n, degree, nodes, weights, grid })
}

/// Integrate a scalar field over S^{n-1} with the given rule.
/// Reports an error if the field is non-finite at any node.
pub fn integrate_sphere<F: FnMut(&[f64]) -> f64>(rule: &QuadratureRule, mut f: F) -> Result<f64> {
    let mut acc = 0.0;
    for (node, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(node);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                context: format!("integrand at node {:?}", node),
            });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Closed-form moment of a monomial over S^{n-1}:
/// zero when any exponent is odd, else 2 prod Gamma((a_i+1)/2) / Gamma((|a|+n)/2).
pub fn sphere_monomial_moment(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|&a| a % 2 == 1) {
        return 0.0;
    }
    let mut num = 2.0;
    let mut tot = 0;
    for &a in alpha {
        num *= gamma_half(a + 1);
        tot += a;
    }
    num / gamma_half(tot + alpha.len() as u32)
}

/// Squared tangential gradient of grid-sampled data at every node, by finite
/// differences along the angular parameter grid. `values` is indexed like the
/// rule's nodes. First-order accurate at the polar-grid ends, second-order
/// inside and in the periodic azimuth.
pub fn grad_theta_sq_on_grid(rule: &QuadratureRule, values: &[f64]) -> Vec<f64> {
    let grid = &rule.grid;
    let n_polar = grid.polar.len();
    let n_az = grid.azimuth.len();
    let total = rule.nodes.len();
    assert_eq!(values.len(), total);
    let mut out = vec![0.0; total];

    // walk all multi-indices
    let counts: Vec<usize> = grid.polar.iter().map(|p| p.len()).collect();
    let mut idx = vec![0usize; n_polar];
    loop {
        for az in 0..n_az {
            let flat = grid.flat_index(&idx, az);
            let mut g2 = 0.0;
            // metric factor: axis k divides by prod_{j<k} sin^2(phi_j)
            let mut sin2prod = 1.0;
            for k in 0..n_polar {
                let phis = &grid.polar[k];
                let i = idx[k];
                let dv_dphi = if counts[k] == 1 {
                    0.0
                } else if counts[k] == 2 {
                    let mut j = idx.clone();
                    j[k] = 1 - i;
                    let d = (values[grid.flat_index(&j, az)] - values[flat])
                        / (phis[1 - i] - phis[i]);
                    d
                } else if i == 0 || i == counts[k] - 1 {
                    // second-order one-sided 3-point derivative
                    let (i0, i1, i2) = if i == 0 { (0, 1, 2) } else { (i, i - 1, i - 2) };
                    let mut j1 = idx.clone();
                    j1[k] = i1;
                    let mut j2 = idx.clone();
                    j2[k] = i2;
                    let h1 = phis[i1] - phis[i0];
                    let h2 = phis[i2] - phis[i1];
                    let (f0, f1, f2) = (
                        values[flat],
                        values[grid.flat_index(&j1, az)],
                        values[grid.flat_index(&j2, az)],
                    );
                    -f0 * (2.0 * h1 + h2) / (h1 * (h1 + h2)) + f1 * (h1 + h2) / (h1 * h2)
                        - f2 * h1 / (h2 * (h1 + h2))
                } else {
                    // 3-point nonuniform centered derivative
                    let mut jm = idx.clone();
                    jm[k] = i - 1;
                    let mut jp = idx.clone();
                    jp[k] = i + 1;
                    let (x0, x1, x2) = (phis[i - 1], phis[i], phis[i + 1]);
                    let (f0, f1, f2) = (
                        values[grid.flat_index(&jm, az)],
                        values[flat],
                        values[grid.flat_index(&jp, az)],
                    );
                    let h1 = x1 - x0;
                    let h2 = x2 - x1;
                    -f0 * h2 / (h1 * (h1 + h2)) + f1 * (h2 - h1) / (h1 * h2)
                        + f2 * h1 / (h2 * (h1 + h2))
                };
                g2 += dv_dphi * dv_dphi / sin2prod;
                let s = grid.polar[k][idx[k]].sin();
                sin2prod *= s * s;
            }
            // azimuth: uniform, periodic; 4th-order centered when possible
            if n_az > 4 {
                let h = 2.0 * PI / n_az as f64;
                let v = |k: usize| values[grid.flat_index(&idx, k % n_az)];
                let d = (8.0 * (v(az + 1) - v(az + n_az - 1))
                    - (v(az + 2) - v(az + n_az - 2)))
                    / (12.0 * h);
                g2 += d * d / sin2prod;
            } else if n_az > 2 {
                let ap = (az + 1) % n_az;
                let am = (az + n_az - 1) % n_az;
                let h = 2.0 * PI / n_az as f64;
                let d = (values[grid.flat_index(&idx, ap)] - values[grid.flat_index(&idx, am)])
                    / (2.0 * h);
                g2 += d * d / sin2prod;
            }
            out[flat] = g2;
        }
        // advance
        let mut k = n_polar;
        let mut done = true;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            if idx[k] < counts[k] {
                done = false;
                break;
            }
            idx[k] = 0;
        }
        if done {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn setup_constants() {
        let g3 = setup(3).unwrap();
        assert_relative_eq!(g3.eps0, (1.0f64 / 3.0).powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(g3.eps0, 0.759_835_685_651_592_5, epsilon = 1e-12);
        assert_relative_eq!(g3.omega, 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(g3.crit_exp, 5.0, epsilon = 1e-15);
        let g4 = setup(4).unwrap();
        assert_relative_eq!(g4.eps0, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g4.omega, 2.0 * PI * PI, epsilon = 1e-13);
        assert!(setup(2).is_err());
    }

    #[test]
    fn eps0_algebraic_identity() {
        // eps0^{4/(n-2)} = (n-2)/n exactly within 1e-14
        for n in 3..=8 {
            let g = setup(n).unwrap();
            let lhs = g.eps0.powf(4.0 / (n as f64 - 2.0));
            assert!((lhs - (n as f64 - 2.0) / n as f64).abs() < 1e-14, "n = {}", n);
            assert!(g.eps0 > 0.0 && g.eps0 < 1.0);
        }
    }

    #[test]
    fn eigenvalues_and_multiplicities() {
        let e = sphere_eigen(0, 3).unwrap();
        assert_eq!((e.lambda, e.multiplicity), (0, 1));
        let e = sphere_eigen(1, 3).unwrap();
        assert_eq!((e.lambda, e.multiplicity), (2, 3));
        let e = sphere_eigen(2, 3).unwrap();
        assert_eq!((e.lambda, e.multiplicity), (6, 5));
        // lambda_1 = ... = lambda_n = n-1, lambda_{n+1} = 2n in the flat indexing
        for n in 3..=6 {
            let e1 = sphere_eigen(1, n).unwrap();
            assert_eq!(e1.lambda, (n - 1) as u64);
            assert_eq!(e1.multiplicity, n as u64);
            let e2 = sphere_eigen(2, n).unwrap();
            assert_eq!(e2.lambda, 2 * n as u64);
        }
        // S^3 harmonics have dimension (l+1)^2
        for l in 0..5 {
            assert_eq!(sphere_eigen(l, 4).unwrap().multiplicity, ((l + 1) * (l + 1)) as u64);
        }
    }

    #[test]
    fn quadrature_total_measure() {
        for n in 3..=6 {
            let rule = build_quadrature(n, 7).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, sphere_volume(n), epsilon = 1e-10);
            for node in &rule.nodes {
                let norm: f64 = node.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    /// Every monomial up to the declared degree integrates to its closed-form
    /// sphere moment.
    #[test]
    fn quadrature_monomial_exactness() {
        for &(n, degree) in &[(3u32, 6u32), (4, 5), (5, 4), (8, 3)] {
            let rule = build_quadrature(n, degree).unwrap();
            let omega = sphere_volume(n);
            let mut alpha = vec![0u32; n as usize];
            loop {
                let total: u32 = alpha.iter().sum();
                if total <= degree {
                    let exact = sphere_monomial_moment(&alpha);
                    let got = integrate_sphere(&rule, |x| {
                        x.iter().zip(&alpha).map(|(&xi, &a)| xi.powi(a as i32)).product()
                    })
                    .unwrap();
                    assert!(
                        (got - exact).abs() <= 1e-10 * omega,
                        "n={} alpha={:?} got={} exact={}",
                        n,
                        alpha,
                        got,
                        exact
                    );
                }
                // next multi-index with sum <= degree (skip heavy tails early)
                let mut k = 0;
                loop {
                    if k == alpha.len() {
                        break;
                    }
                    alpha[k] += 1;
                    if alpha.iter().sum::<u32>() <= degree {
                        break;
                    }
                    alpha[k] = 0;
                    k += 1;
                }
                if k == alpha.len() {
                    break;
                }
            }
        }
    }

    #[test]
    fn quadrature_known_values() {
        let rule = build_quadrature(3, 5).unwrap();
        // total measure of S^2
        let one = integrate_sphere(&rule, |_| 1.0).unwrap();
        assert_relative_eq!(one, 4.0 * PI, epsilon = 1e-12);
        // odd symmetry
        let a = [0.3, -1.2, 0.5];
        let lin = integrate_sphere(&rule, |x| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum())
            .unwrap();
        assert!(lin.abs() < 1e-12);
        // second moment: (e1.theta)^2 -> omega/n = 4 pi / 3
        let sq = integrate_sphere(&rule, |x| x[0] * x[0]).unwrap();
        assert_relative_eq!(sq, 4.0 * PI / 3.0, epsilon = 1e-12);
        // mixed second moment vanishes
        let mixed = integrate_sphere(&rule, |x| x[0] * x[1]).unwrap();
        assert!(mixed.abs() < 1e-12);
        // (a.theta)(b.theta) = omega (a.b) / n
        let b = [1.0, 0.4, -0.2];
        let ab = integrate_sphere(&rule, |x| {
            let da: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            let db: f64 = b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
            da * db
        })
        .unwrap();
        let dot = a.iter().zip(&b).map(|(ai, bi)| ai * bi).sum::<f64>();
        assert_relative_eq!(ab, 4.0 * PI * dot / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_rejects_bad_dimension() {
        assert!(build_quadrature(2, 3).is_err());
        assert!(build_quadrature(9, 3).is_err());
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let rule = build_quadrature(3, 3).unwrap();
        let r = integrate_sphere(&rule, |x| 1.0 / (x[0] - x[0]));
        assert!(r.is_err());
    }

    /// v(theta) = a . theta has |grad_theta v|^2 = |a|^2 - (a.theta)^2.
    /// The differencing is low order; what the radial-invariant consumer
    /// sees is the quadrature-weighted mean, so that is what we bound.
    fn angular_gradient_error(degree: u32) -> (f64, f64) {
        let rule = build_quadrature(3, degree).unwrap();
        let a = [0.7, -0.3, 0.2];
        let values: Vec<f64> = rule
            .nodes
            .iter()
            .map(|x| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum())
            .collect();
        let g2 = grad_theta_sq_on_grid(&rule, &values);
        let a2: f64 = a.iter().map(|v| v * v).sum();
        let mut max_err: f64 = 0.0;
        let mut mean_err = 0.0;
        let total: f64 = rule.weights.iter().sum();
        for (i, node) in rule.nodes.iter().enumerate() {
            let adot: f64 = a.iter().zip(node).map(|(ai, xi)| ai * xi).sum();
            let exact = a2 - adot * adot;
            max_err = max_err.max((g2[i] - exact).abs());
            mean_err += rule.weights[i] * (g2[i] - exact);
        }
        (max_err, (mean_err / total).abs())
    }

    #[test]
    fn angular_gradient_of_linear_field() {
        let (max11, mean11) = angular_gradient_error(11);
        assert!(max11 < 0.2, "sup angular-gradient error {}", max11);
        assert!(mean11 < 0.05, "weighted-mean angular-gradient error {}", mean11);
        let (max23, mean23) = angular_gradient_error(23);
        assert!(max23 < max11, "no sup convergence: {} vs {}", max23, max11);
        assert!(mean23 < 0.5 * mean11, "no mean convergence: {} vs {}", mean23, mean11);
    }
}
