//! Weighted-norm schedule: the piecewise-linear weight exponents sigma(m) and
//! sigma~(k), the continuity slope alpha, the interior decay exponent nu_0
//! tied to the spectral gap by 2 mu (nu_0 + 2(r-1)/(p-1)) = delta_g, and the
//! weight functions entering the diagnostic norms.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSchedule {
    pub k_m: usize,
    pub k_0: usize,
    pub nu: f64,
    pub nu_tilde: f64,
    pub sigma_nu: f64,
    pub m_0: usize,
    pub alpha: f64,
    pub beta: f64,
    pub n_p: usize,
    pub delta_g: f64,
    pub nu_0: f64,
    pub sigma: Vec<f64>,
    pub sigma_tilde: Vec<f64>,
}

/// Build the schedule for regularity levels up to k_m with dampening
/// exponent n_p and spectral gap delta_g.
pub fn norm_schedule(
    params: &ModelParams,
    k_m: usize,
    k_0: usize,
    nu: f64,
    n_p: usize,
    delta_g: f64,
) -> Result<NormSchedule> {
    assert!(k_0 < k_m && nu > 0.0);
    let d = params.d as f64;
    let pm1 = params.p as f64 - 1.0;
    let r = params.r;
    let sigma_nu = nu + d / 2.0 - (r - 1.0);
    let m_0 = (4 * k_m) / 9 + 1;
    let alpha = (m_0 as f64 - sigma_nu) / (k_m - m_0) as f64;
    if alpha >= 1.0 {
        return Err(Error::ScheduleInfeasible { alpha });
    }
    let nu_tilde = nu + 2.0 * (r - 1.0) / pm1;
    let tilde_top = n_p as f64 - 2.0 * (r - 1.0) / pm1 - (r - 2.0) + 2.0 * nu_tilde;
    let beta = 3.0 * tilde_top / k_m as f64;
    let sigma: Vec<f64> = (0..=k_m)
        .map(|m| {
            if m <= m_0 {
                sigma_nu - m as f64
            } else {
                -alpha * (k_m - m) as f64
            }
        })
        .collect();
    // continuity at 2 k_m / 3: (k_m/3) beta = tilde_top, so the min form is
    // exactly the continuous piecewise profile and keeps the step <= beta
    let sigma_tilde: Vec<f64> = (0..=k_m)
        .map(|k| tilde_top.min(beta * (k_m - k) as f64))
        .collect();
    let nu_0 = -2.0 * (r - 1.0) / pm1 + delta_g / (2.0 * params.mu);
    Ok(NormSchedule {
        k_m,
        k_0,
        nu,
        nu_tilde,
        sigma_nu,
        m_0,
        alpha,
        beta,
        n_p,
        delta_g,
        nu_0,
        sigma,
        sigma_tilde,
    })
}

impl NormSchedule {
    /// chi_{m,k,sigma}(Z) = <Z>^{-2(m-k+sigma(m))} xi_m(Z/Z*).
    pub fn chi(&self, m: usize, k: usize, z: f64, zstar: f64) -> f64 {
        let zb = (1.0 + z * z).sqrt();
        zb.powf(-2.0 * (m as f64 - k as f64 + self.sigma[m])) * self.xi(m, z / zstar)
    }

    /// xi_m(x) = 1 for x <= 1, x^{2 sigma~(m)} beyond.
    pub fn xi(&self, m: usize, x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else {
            x.powf(2.0 * self.sigma_tilde[m])
        }
    }

    /// chi_{nu_0, m}(Z) = <Z>^{-(d - 2(r-1) + 2(nu_0 - m))} * cut(Z/Z*), with a
    /// smooth cut equal to 1 below 2 and 0 above 3.
    pub fn chi_nu0(&self, params: &ModelParams, m: usize, z: f64, zstar: f64) -> f64 {
        let d = params.d as f64;
        let r = params.r;
        let zb = (1.0 + z * z).sqrt();
        let expo = -(d - 2.0 * (r - 1.0) + 2.0 * (self.nu_0 - m as f64));
        zb.powf(expo) * smooth_cut(z / zstar)
    }
}

fn smooth_cut(x: f64) -> f64 {
    if x <= 2.0 {
        1.0
    } else if x >= 3.0 {
        0.0
    } else {
        let t = x - 2.0;
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        1.0 - s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    #[test]
    fn schedule_invariants() {
        let p = make_params(9, 3, 2.18).unwrap();
        let s = norm_schedule(&p, 90, 10, 0.01, 12, 0.05).unwrap();
        // continuity at m_0 holds exactly by construction
        let at_m0 = s.sigma_nu - s.m_0 as f64;
        let from_right = -s.alpha * (s.k_m - s.m_0) as f64;
        assert!((at_m0 - from_right).abs() < 1e-12);
        // alpha = 4/5 + O(1/k_m)
        assert!((s.alpha - 0.8).abs() < 0.05, "alpha = {}", s.alpha);
        // step inequalities
        for m in 1..=s.k_m {
            assert!(s.sigma[m - 1] >= s.sigma[m] - s.alpha - 1e-12);
            assert!(s.sigma_tilde[m - 1] <= s.sigma_tilde[m] + s.beta + 1e-12);
        }
        // gap identity is exact
        let lhs = 2.0 * p.mu * (s.nu_0 + 2.0 * (p.r - 1.0) / (p.p as f64 - 1.0));
        assert!((lhs - s.delta_g).abs() < 1e-15);
    }

    #[test]
    fn alpha_below_one_for_admissible_pairs() {
        // sigma_nu > 0 for every admissible pair, which keeps alpha < 1; the
        // ScheduleInfeasible arm guards pathological inputs only
        for (d, pp) in [(5u32, 9u32), (6, 5), (8, 3), (9, 3)] {
            let ell = 4.0 / (pp as f64 - 1.0);
            let rs = crate::params::r_star(d, ell);
            let p = make_params(d, pp, 2.0 + 0.5 * (rs - 2.0)).unwrap();
            for km in [18usize, 45, 90] {
                let s = norm_schedule(&p, km, 4, 0.01, 12, 0.05).unwrap();
                assert!(s.alpha < 1.0 && s.alpha > 0.0);
            }
        }
    }
}
