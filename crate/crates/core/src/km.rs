//! Closed-form spectral laws for d-regular graphs: the Kesten-McKay density, the
//! semicircle and Kesten-McKay Stieltjes transforms, classical eigenvalue
//! locations, and the spectral-domain / error-parameter predicates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::NumericError;
use crate::quad;

const QUAD_TOL: f64 = 1e-13;
const QUANTILE_TOL: f64 = 4.0 * f64::EPSILON;

/// A point `E + i eta` of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralPoint {
    e: f64,
    eta: f64,
}

impl SpectralPoint {
    pub fn new(e: f64, eta: f64) -> Result<Self, NumericError> {
        if !(eta > 0.0) || !e.is_finite() || !eta.is_finite() {
            return Err(NumericError::NotUpperHalfPlane(eta));
        }
        Ok(Self { e, eta })
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Distance of `E` to the nearest spectral edge, `min(|E-2|, |E+2|)`.
    pub fn kappa(&self) -> f64 {
        (self.e - 2.0).abs().min((self.e + 2.0).abs())
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }
}

impl std::fmt::Display for SpectralPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}i", self.e, self.eta)
    }
}

/// Degree and the small constants controlling domains, radii and depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LawParams {
    pub d: usize,
    pub a: f64,
    pub c: f64,
    pub ell: usize,
}

impl LawParams {
    pub fn new(d: usize, a: f64, c: f64, ell: usize) -> Result<Self, NumericError> {
        if d < 3 {
            return Err(NumericError::LawParams(format!("degree {d} < 3")));
        }
        if !(0.0 < c && c < a && a < 1.0) {
            return Err(NumericError::LawParams(format!("need 0 < c < a < 1, got c={c}, a={a}")));
        }
        if ell < 1 {
            return Err(NumericError::LawParams("depth ell must be >= 1".into()));
        }
        Ok(Self { d, a, c, ell })
    }
}

/// Kesten-McKay density of the normalized adjacency spectrum.
pub fn rho_d(d: usize, x: f64) -> f64 {
    if !(-2.0..=2.0).contains(&x) {
        return 0.0;
    }
    let d = d as f64;
    let shape = 1.0 + 1.0 / (d - 1.0) - x * x / d;
    (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI * shape)
}

/// Mass of the Kesten-McKay law on `[x, 2]`.
///
/// Integrated in the angle `x = 2 cos(theta)`, where the square-root edge becomes a
/// smooth `sin^2` factor.
pub fn km_upper_mass(d: usize, x: f64) -> f64 {
    if x >= 2.0 {
        return 0.0;
    }
    let x = x.max(-2.0);
    let df = d as f64;
    let theta_x = (x / 2.0).acos();
    let integrand = |t: f64| {
        let (s, c) = t.sin_cos();
        2.0 * s * s / (PI * (1.0 + 1.0 / (df - 1.0) - 4.0 * c * c / df))
    };
    quad::integrate(integrand, 0.0, theta_x, QUAD_TOL)
}

/// Kesten-McKay cumulative distribution function.
pub fn km_cdf(d: usize, x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        (1.0 - km_upper_mass(d, x)).clamp(0.0, 1.0)
    }
}

fn sqrt_z2_minus_4(z: Complex64) -> Complex64 {
    // product of principal roots: analytic off [-2, 2] and ~ z at infinity
    (z - 2.0).sqrt() * (z + 2.0).sqrt()
}

/// Semicircle Stieltjes transform at a raw complex point (upper half-plane).
pub fn m_sc_raw(z: Complex64) -> Complex64 {
    // -2 / (z + sqrt(z^2 - 4)) equals (-z + sqrt(z^2 - 4)) / 2 without cancellation
    let m = -2.0 / (z + sqrt_z2_minus_4(z));
    if m.im < 0.0 {
        1.0 / m
    } else {
        m
    }
}

/// Semicircle Stieltjes transform, the root of `m^2 + z m + 1 = 0` with `Im m > 0`.
pub fn m_sc(z: SpectralPoint) -> Complex64 {
    m_sc_raw(z.z())
}

pub fn m_d_raw(z: Complex64, d: usize) -> Complex64 {
    let ratio = d as f64 / (d as f64 - 1.0);
    1.0 / (-z - ratio * m_sc_raw(z))
}

/// Kesten-McKay Stieltjes transform `1 / (-z - d/(d-1) m_sc(z))`.
pub fn m_d(z: SpectralPoint, d: usize) -> Complex64 {
    m_d_raw(z.z(), d)
}

/// Classical locations `gamma_2 > ... > gamma_n` of the nontrivial eigenvalues.
///
/// The k-th nontrivial location (k = i - 1) carries upper mass `(k - 1/2) / (n - 1)`,
/// solved by bisection on `[-2, 2]`.
pub fn classical_locations(n: usize, d: usize) -> Vec<f64> {
    assert!(n >= 3, "classical locations need n >= 3");
    (2..=n)
        .map(|i| {
            let level = (i as f64 - 1.5) / (n as f64 - 1.0);
            km_quantile_from_right(d, level)
        })
        .collect()
}

/// The point `x` with `km_upper_mass(d, x) = level`.
pub fn km_quantile_from_right(d: usize, level: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        // upper mass decreases in x
        if km_upper_mass(d, mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Membership in the domain where the optimal local law is asserted.
pub fn in_spectral_domain(z: SpectralPoint, n: usize, params: &LawParams) -> bool {
    let nf = n as f64;
    let a = params.a;
    z.e().abs() <= 2.0 + a
        && z.eta() > 0.0
        && z.eta() <= 1.0 / a
        && nf * z.eta() * (z.kappa() + z.eta()).sqrt() >= nf.powf(a)
}

/// Error parameters of the polynomial local law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorParams {
    /// With the configured `(log N)^p` prefactor.
    pub eps_prime: f64,
    pub eps: f64,
    /// With the asymptotic `(log N)^100` prefactor, for reference.
    pub eps_prime_asymptotic: f64,
    pub eps_asymptotic: f64,
}

/// `eps' = (log N)^p (N^-r + sqrt(Im m_d / (N eta)) + (N eta)^(-2/3))` and
/// `eps = eps' / sqrt(kappa + eta + eps')`.
pub fn error_params(z: SpectralPoint, r_frac: f64, n: usize, d: usize, log_power: f64) -> ErrorParams {
    let nf = n as f64;
    let n_eta = nf * z.eta();
    let core = nf.powf(-r_frac) + (m_d(z, d).im / n_eta).sqrt() + n_eta.powf(-2.0 / 3.0);
    let shaped = |prefactor: f64| {
        let eps_prime = prefactor * core;
        (eps_prime, eps_prime / (z.kappa() + z.eta() + eps_prime).sqrt())
    };
    let log_n = nf.ln();
    let (eps_prime, eps) = shaped(log_n.powf(log_power));
    let (eps_prime_asymptotic, eps_asymptotic) = shaped(log_n.powf(100.0));
    ErrorParams { eps_prime, eps, eps_prime_asymptotic, eps_asymptotic }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(e: f64, eta: f64) -> SpectralPoint {
        SpectralPoint::new(e, eta).unwrap()
    }

    #[test]
    fn density_values() {
        assert!((rho_d(3, 0.0) - 2.0 / (3.0 * PI)).abs() < 1e-15);
        assert!((rho_d(3, 0.0) - 0.212_206_6).abs() < 1e-7);
        assert_eq!(rho_d(3, 2.0), 0.0);
        assert_eq!(rho_d(5, -2.0), 0.0);
        assert_eq!(rho_d(3, 2.5), 0.0);
    }

    #[test]
    fn density_has_unit_mass() {
        for d in 3..=10 {
            assert!((km_upper_mass(d, -2.0) - 1.0).abs() < 1e-10, "d={d}");
        }
    }

    #[test]
    fn upper_mass_matches_direct_quadrature() {
        for &x in &[-1.5, -0.3, 0.0, 0.8, 1.9] {
            let direct = quad::integrate(|t| rho_d(4, t), x, 2.0, 1e-13);
            assert!((km_upper_mass(4, x) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn semicircle_at_i() {
        let m = m_sc(sp(0.0, 1.0));
        assert!(m.re.abs() < 1e-15);
        assert!((m.im - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((m.im - 0.618_034_0).abs() < 1e-7);
    }

    #[test]
    fn kesten_mckay_at_i() {
        let m = m_d(sp(0.0, 1.0), 3);
        assert!(m.re.abs() < 1e-15);
        assert!((m.im - 0.518_927_630_227_215_3).abs() < 1e-12);
    }

    #[test]
    fn semicircle_branch_far_away() {
        for &(e, eta) in &[(1e6, 1.0), (-1e6, 1e-3), (3.0, 1e-12), (-2.5, 1e-9)] {
            let z = sp(e, eta);
            let m = m_sc(z);
            assert!(m.im > 0.0, "{z}");
            let res = m * m + z.z() * m + 1.0;
            assert!(res.norm() < 1e-12, "{z}: {res}");
        }
    }

    #[test]
    fn spectral_point_rejects_lower_half_plane() {
        assert!(SpectralPoint::new(0.0, 0.0).is_err());
        assert!(SpectralPoint::new(0.0, -1.0).is_err());
        assert!(SpectralPoint::new(f64::NAN, 1.0).is_err());
        assert_eq!(sp(2.5, 1.0).kappa(), 0.5);
        assert_eq!(sp(-1.5, 1.0).kappa(), 0.5);
    }

    #[test]
    fn law_params_validate() {
        assert!(LawParams::new(3, 0.3, 0.1, 1).is_ok());
        assert!(LawParams::new(2, 0.3, 0.1, 1).is_err());
        assert!(LawParams::new(3, 0.1, 0.3, 1).is_err());
        assert!(LawParams::new(3, 0.3, 0.1, 0).is_err());
    }

    #[test]
    fn classical_locations_small() {
        let g = classical_locations(10, 3);
        assert_eq!(g.len(), 9);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!(g.iter().all(|x| x.abs() < 2.0));
        // median of 9 nontrivial locations is gamma_6
        assert!(g[4].abs() < 1e-10);

        // n = 3: gamma_2 has upper mass 1/4, gamma_3 has 3/4
        let g3 = classical_locations(3, 3);
        assert!((km_upper_mass(3, g3[0]) - 0.25).abs() < 1e-9);
        assert!((km_upper_mass(3, g3[1]) - 0.75).abs() < 1e-9);
        assert!((g3[0] + g3[1]).abs() < 1e-9);
        // frozen from an independent scipy quad + brentq computation
        assert!((g3[1] - (-1.126_032_500_610_493_6)).abs() < 1e-9, "{}", g3[1]);
    }

    #[test]
    fn spectral_domain_predicate() {
        let params = LawParams::new(3, 0.3, 0.1, 1).unwrap();
        assert!(!in_spectral_domain(sp(10.0, 1.0), 1000, &params));
        assert!(in_spectral_domain(sp(0.5, 0.7), 1000, &params));
        assert!(!in_spectral_domain(sp(0.0, 4.0), 1000, &params));
        // boundary: N eta sqrt(kappa + eta) = N^a exactly, at E = 2 (kappa = 0)
        let n = 1000usize;
        let eta = ((n as f64).powf(params.a) / n as f64).powf(2.0 / 3.0);
        let lhs = n as f64 * eta * eta.sqrt();
        assert!((lhs - (n as f64).powf(params.a)).abs() < 1e-9);
        assert!(in_spectral_domain(sp(2.0, eta * (1.0 + 1e-12)), n, &params));
        assert!(!in_spectral_domain(sp(2.0, eta * (1.0 - 1e-9)), n, &params));
    }

    #[test]
    fn error_parameter_shapes() {
        let n = 1000;
        let big = error_params(sp(0.3, 1e6), 0.2, n, 3, 1.0);
        let floor = (n as f64).ln() * (n as f64).powf(-0.2);
        assert!((big.eps_prime - floor).abs() / floor < 1e-2);

        let etas: Vec<f64> = (0..40).map(|k| 1e-3 * 1.25f64.powi(k)).collect();
        let eps: Vec<f64> = etas.iter().map(|&eta| error_params(sp(0.3, eta), 0.2, n, 3, 1.0).eps_prime).collect();
        assert!(eps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));

        for &eta in &etas {
            let p = error_params(sp(1.99, eta), 0.2, n, 3, 1.0);
            assert!(p.eps < p.eps_prime.sqrt());
            assert!(p.eps_asymptotic > p.eps);
        }
    }
}
