use std::f64::consts::{FRAC_PI_4, PI};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::integrate_adaptive;

/// Lebesgue volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Factor `2^d / kappa_d` converting surface measure into `H^d` under the
/// normalization `H^d(B(0,1)) = 2^d`. Equal to 1 for curves.
pub fn hausdorff_factor(d: usize) -> f64 {
    if d == 1 {
        return 1.0;
    }
    2f64.powi(d as i32) / unit_ball_volume(d)
}

/// Surface area of the unit `(d-1)`-sphere, `2 pi^{d/2} / Gamma(d/2)`.
pub fn omega_d(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("omega_d needs d >= 1".into()));
    }
    let h = d as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma(h))
}

/// Constant of the Fourier representation of the Riesz energy,
/// `c(s,d) = pi^{s - d/2} Gamma((d-s)/2) / Gamma(s/2)`, for `0 < s < d`.
pub fn c_sd(s: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    if !(s > 0.0 && s < df) {
        return Err(Error::ExponentOutOfRange { s, range: format!("(0, {d})") });
    }
    Ok(PI.powf(s - df / 2.0) * gamma((df - s) / 2.0) / gamma(s / 2.0))
}

/// Riesz `s`-energy of the uniform probability measure on the unit cube
/// `[0,1]^d`, for `0 < s < d` and `d` in {1, 2}.
///
/// For `d = 2` the radial integral is done in closed form and the angular
/// integral by adaptive quadrature.
pub fn uniform_cube_energy(d: usize, s: f64) -> Result<f64> {
    let df = d as f64;
    if !(s > 0.0 && s < df) {
        return Err(Error::ExponentOutOfRange { s, range: format!("(0, {d})") });
    }
    match d {
        1 => Ok(2.0 / ((1.0 - s) * (2.0 - s))),
        2 => {
            // I = int_{[-1,1]^2} (1-|u|)(1-|v|) |(u,v)|^{-s}; eight symmetric wedges.
            let wedge = |theta: f64| {
                let (sn, c) = theta.sin_cos();
                let r = 1.0 / c;
                r.powf(2.0 - s) / (2.0 - s) - (c + sn) * r.powf(3.0 - s) / (3.0 - s)
                    + c * sn * r.powf(4.0 - s) / (4.0 - s)
            };
            Ok(8.0 * integrate_adaptive(wedge, 0.0, FRAC_PI_4, 1e-13))
        }
        _ => Err(Error::Unsupported(format!("self-cell energy is implemented for d = 1, 2 (got d = {d})"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((omega_d(1).unwrap() - 2.0).abs() < 1e-14);
        assert!((omega_d(2).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((omega_d(3).unwrap() - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn c_one_two_is_one() {
        assert!((c_sd(1.0, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!(c_sd(2.0, 2).is_err());
        assert!(c_sd(0.0, 2).is_err());
    }

    #[test]
    fn normalization_factors() {
        assert_eq!(hausdorff_factor(1), 1.0);
        assert!((hausdorff_factor(2) - 4.0 / PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn cube_energy_at_s_one_in_2d() {
        // mean inverse distance between two uniform points of the unit square
        let sqrt2 = 2f64.sqrt();
        let exact = 4.0 * (1.0 + sqrt2).ln() - (4.0 / 3.0) * (sqrt2 - 1.0);
        let t = uniform_cube_energy(2, 1.0).unwrap();
        assert!((t - exact).abs() < 1e-12, "{t} vs {exact}");
        assert!(uniform_cube_energy(3, 1.0).is_err());
    }
}
