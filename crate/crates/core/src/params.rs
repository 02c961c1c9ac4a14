//! Model parameters and the Emden phase-plane vector field.
//!
//! The dynamical variables are (x, w, sigma) with x = log Z; the planar field
//! is w' = -Delta1/Delta, sigma' = -Delta2/Delta where Delta, Delta1, Delta2
//! are cubic polynomials in (w, sigma) depending on (d, ell, r).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameter bundle for dimension d, odd integer exponent p and blow-up speed r.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub p: u32,
    /// ell = 4/(p-1)
    pub ell: f64,
    /// blow-up speed, 2 < r < r_star
    pub r: f64,
    /// e = (r-2)/r
    pub e: f64,
    /// mu = 1/r
    pub mu: f64,
    /// phi = (mu/2) sqrt(ell)
    pub phi: f64,
    /// r_star = (ell + d)/(ell + sqrt(d))
    pub r_star: f64,
    /// w_e = ell (r-1)/d
    pub w_e: f64,
}

/// Critical blow-up speed (ell + d)/(ell + sqrt(d)).
pub fn r_star(d: u32, ell: f64) -> f64 {
    (ell + d as f64) / (ell + (d as f64).sqrt())
}

/// Admissibility bound ell_2(d) = d - 2 sqrt(d); the Eulerian regime needs ell < ell_2(d).
pub fn ell2(d: u32) -> f64 {
    d as f64 - 2.0 * (d as f64).sqrt()
}

/// Build the parameter bundle, rejecting inadmissible (d, p, r).
pub fn make_params(d: u32, p: u32, r: f64) -> Result<ModelParams> {
    assert!(d >= 3, "dimension must be >= 3");
    assert!(p >= 3 && p % 2 == 1, "p must be an odd integer >= 3");
    assert!(r > 0.0);
    let ell = 4.0 / (p as f64 - 1.0);
    let l2 = ell2(d);
    if ell >= l2 {
        return Err(Error::InadmissibleDimension { d, ell, ell2: l2 });
    }
    let rs = r_star(d, ell);
    if r <= 2.0 || r >= rs {
        return Err(Error::SpeedOutOfRange { r, r_star: rs });
    }
    let mu = 1.0 / r;
    let e = (r - 2.0) / r;
    Ok(ModelParams {
        d,
        p,
        ell,
        r,
        e,
        mu,
        phi: 0.5 * mu * ell.sqrt(),
        r_star: rs,
        w_e: ell * (r - 1.0) / d as f64,
    })
}

impl ModelParams {
    /// Same bundle at a different speed r (used by the speed scan).
    pub fn with_speed(&self, r: f64) -> Result<ModelParams> {
        make_params(self.d, self.p, r)
    }
}

/// Phase-plane state; sigma > 0 along physical profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmdenPoint {
    /// x = log Z
    pub x: f64,
    pub w: f64,
    pub sigma: f64,
}

impl EmdenPoint {
    pub fn z(&self) -> f64 {
        self.x.exp()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Determinants {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// Delta = (w-1)^2 - sigma^2, Delta1 = w(w-1)(w-r) - d(w-w_e) sigma^2,
/// Delta2 = (sigma/ell)[(ell+d-1)w^2 - w(ell+d+ell r-r) + ell r - ell sigma^2].
pub fn determinants(w: f64, sigma: f64, p: &ModelParams) -> Determinants {
    let d = p.d as f64;
    let (ell, r) = (p.ell, p.r);
    let s2 = sigma * sigma;
    Determinants {
        delta: (w - 1.0) * (w - 1.0) - s2,
        delta1: w * (w - 1.0) * (w - r) - d * (w - p.w_e) * s2,
        delta2: (sigma / ell)
            * ((ell + d - 1.0) * w * w - w * (ell + d + ell * r - r) + ell * r - ell * s2),
    }
}

/// Scale-invariant guard for the sonic singularity of the x-parametrized field.
pub fn sonic_guard(w: f64, sigma: f64) -> f64 {
    1e-12 * (1.0 + w * w + sigma * sigma)
}

/// (dw/dx, dsigma/dx) = (-Delta1/Delta, -Delta2/Delta); errors with SonicSingular
/// when |Delta| falls below the scale-invariant guard.
pub fn vector_field(pt: &EmdenPoint, params: &ModelParams) -> Result<(f64, f64)> {
    let det = determinants(pt.w, pt.sigma, params);
    if det.delta.abs() < sonic_guard(pt.w, pt.sigma) {
        return Err(Error::SonicSingular {
            w: pt.w,
            sigma: pt.sigma,
            delta_abs: det.delta.abs(),
        });
    }
    Ok((-det.delta1 / det.delta, -det.delta2 / det.delta))
}

/// Residual of the sonic-line identity (w-1) Delta1 + ell sigma Delta2, which
/// vanishes identically on sigma = |1-w|.
pub fn sonic_line_identity(w: f64, sigma: f64, params: &ModelParams) -> f64 {
    let det = determinants(w, sigma, params);
    (w - 1.0) * det.delta1 + params.ell * sigma * det.delta2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derived_fields_9_3_21() {
        let p = make_params(9, 3, 2.1).unwrap();
        assert_relative_eq!(p.ell, 2.0);
        assert_relative_eq!(p.e, 1.0 / 21.0, max_relative = 1e-15);
        assert_relative_eq!(p.mu, 1.0 / 2.1, max_relative = 1e-15);
        assert_relative_eq!(p.w_e, 2.0 * 1.1 / 9.0, max_relative = 1e-15);
        // exact parameter identities, to rounding
        assert!((p.mu * p.r - 1.0).abs() < 1e-15);
        assert!((p.e - (1.0 - 2.0 * p.mu)).abs() < 1e-15);
        assert!((p.mu * (p.r - 2.0) - p.e).abs() < 1e-16);
    }

    #[test]
    fn r_star_values() {
        assert!((r_star(9, 2.0) - 2.2).abs() < 1e-12);
        assert!((r_star(8, 2.0) - 10.0 / (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9);
        // ell -> 0 limit is sqrt(d)
        assert_relative_eq!(r_star(7, 1e-12), 7f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn d4_rejected() {
        // ell_2(4) = 0, so every p is inadmissible
        assert!(matches!(
            make_params(4, 3, 2.05),
            Err(Error::InadmissibleDimension { .. })
        ));
    }

    #[test]
    fn speed_range_rejected() {
        // r_star(9, 2) = 2.2 exactly, so r = 2.2 is out of range
        assert!(matches!(
            make_params(9, 3, 2.2),
            Err(Error::SpeedOutOfRange { .. })
        ));
        assert!(matches!(
            make_params(9, 3, 1.9),
            Err(Error::SpeedOutOfRange { .. })
        ));
    }

    #[test]
    fn determinant_examples() {
        let p = make_params(9, 3, 2.1).unwrap();
        let det = determinants(0.0, 0.0, &p);
        assert_relative_eq!(det.delta, 1.0);
        assert_relative_eq!(det.delta1, 0.0);
        assert_relative_eq!(det.delta2, 0.0);

        let det = determinants(1.0, 0.0, &p);
        assert_relative_eq!(det.delta, 0.0);
        assert_relative_eq!(det.delta1, 0.0);
        assert_relative_eq!(det.delta2, 0.0);

        // hand evaluation on the sonic line
        let det = determinants(0.0, 1.0, &p);
        assert_relative_eq!(det.delta, 0.0, epsilon = 1e-15);
        assert_relative_eq!(det.delta1, 2.2, max_relative = 1e-14);
        assert_relative_eq!(det.delta2, 1.1, max_relative = 1e-14);
        assert!(sonic_line_identity(0.0, 1.0, &p).abs() < 1e-14);
    }

    #[test]
    fn vector_field_examples() {
        let p = make_params(9, 3, 2.1).unwrap();
        let det = determinants(0.0, 0.5, &p);
        assert_relative_eq!(det.delta, 0.75);
        assert_relative_eq!(det.delta1, 0.55, max_relative = 1e-14);
        assert_relative_eq!(det.delta2, 0.925, max_relative = 1e-14);
        let (dw, ds) = vector_field(
            &EmdenPoint { x: 0.0, w: 0.0, sigma: 0.5 },
            &p,
        )
        .unwrap();
        assert_relative_eq!(dw, -11.0 / 15.0, max_relative = 1e-14);
        assert_relative_eq!(ds, -37.0 / 30.0, max_relative = 1e-14);

        // w = 1: Delta1 = -d (1 - w_e) sigma^2
        let det = determinants(1.0, 0.5, &p);
        assert_relative_eq!(det.delta, -0.25);
        assert_relative_eq!(det.delta1, -9.0 * (1.0 - p.w_e) * 0.25, max_relative = 1e-14);

        // points on the sonic line error out
        let err = vector_field(&EmdenPoint { x: 0.0, w: 0.3, sigma: 0.7 }, &p);
        assert!(matches!(err, Err(Error::SonicSingular { .. })));
    }
}
