//! Physical profile fields on a geometric grid: density, phase, potentials.
//!
//! rho_P = (phi Z sigma)^{ell/2}, Psi'_P = -(mu/2) Z w, Psi_P(0) = 0,
//! H2 = mu (1 - w), H1 = (mu ell / 2)(1 - w) F / sigma, H3 = Lap rho_P / rho_P.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::profile::Profile;
use serde::{Deserialize, Serialize};

/// One node of the sampled physical profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldNode {
    pub z: f64,
    pub w: f64,
    pub sigma: f64,
    pub rho: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub q: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub f: f64,
    pub lambda_w: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileFields {
    pub params: ModelParams,
    /// Z2 of the generating profile (0 when reconstructed from a bare CSV)
    pub z2: f64,
    pub nodes: Vec<FieldNode>,
}

/// Sample the physical fields on a geometric grid of n nodes spanning
/// [z_lo, z_hi].
pub fn emden_to_physical(profile: &Profile, z_lo: f64, z_hi: f64, n: usize) -> Result<ProfileFields> {
    let p = profile.params;
    let d = p.d as f64;
    let x_lo = z_lo.ln();
    let h = (z_hi.ln() - x_lo) / (n - 1) as f64;
    let mut nodes = Vec::with_capacity(n);
    // cumulative Simpson for Psi with midpoint evaluations
    let gpsi = |x: f64| {
        let (w, _, _, _) = profile.state(x);
        -(p.mu / 2.0) * (2.0 * x).exp() * w
    };
    let mut psi = profile.incoming.series.psi_at(z_lo, &p);
    let mut g_prev = gpsi(x_lo);
    for i in 0..n {
        let x = x_lo + h * i as f64;
        let z = x.exp();
        let (w, sigma, lw, ls) = profile.state(x);
        if sigma <= 0.0 {
            return Err(Error::NonPositiveDensity { z, sigma });
        }
        if i > 0 {
            let gm = gpsi(x - 0.5 * h);
            let g = gpsi(x);
            psi += (h / 6.0) * (g_prev + 4.0 * gm + g);
            g_prev = g;
        }
        let f = sigma + ls;
        let rho = (p.phi * z * sigma).powf(p.ell / 2.0);
        let q = (p.phi * z * sigma).powi(2);
        let h2 = p.mu * (1.0 - w);
        let h1 = 0.5 * p.mu * p.ell * (1.0 - w) * f / sigma;
        // H3 = [L2 + L1^2 + (d-2) L1] / Z^2 with L = log rho
        let (_, l2s) = profile.state2(x);
        let l1 = 0.5 * p.ell * f / sigma;
        let l2 = 0.5 * p.ell * (l2s / sigma - (ls / sigma) * (ls / sigma));
        let h3 = (l2 + l1 * l1 + (d - 2.0) * l1) / (z * z);
        nodes.push(FieldNode {
            z,
            w,
            sigma,
            rho,
            psi,
            dpsi: -(p.mu / 2.0) * z * w,
            q,
            h1,
            h2,
            h3,
            f,
            lambda_w: lw,
            delta: (w - 1.0) * (w - 1.0) - sigma * sigma,
        });
    }
    Ok(ProfileFields { params: p, z2: profile.z2, nodes })
}

/// Fitted far-field behavior of the potentials.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PotentialsDecayReport {
    /// fitted log-log slope of |H2 - mu| (expected ~ -r)
    pub h2_slope: f64,
    /// fitted limit of H1 (expected -2 mu (r-1)/(p-1))
    pub h1_limit: f64,
    /// fitted log-log slope of |H1 - h1_limit|
    pub h1_slope: f64,
    /// fitted slope of |mu * Lambda rho / rho + 2 mu (r-1)/(p-1)|
    pub logrho_slope: f64,
}

/// Fit the far-field decay of H2 - mu, H1 and the density log-derivative over
/// the last decade of the grid. Needs the grid to reach Z >= 100.
pub fn potentials_decay_report(fields: &ProfileFields) -> Result<PotentialsDecayReport> {
    let z_max = fields.nodes.last().map(|n| n.z).unwrap_or(0.0);
    if z_max < 100.0 {
        return Err(Error::InsufficientRange { z_max, needed: 100.0 });
    }
    let p = &fields.params;
    let h1_inf = -2.0 * p.mu * (p.r - 1.0) / (p.p as f64 - 1.0);
    let sel: Vec<&FieldNode> = fields
        .nodes
        .iter()
        .filter(|n| n.z >= z_max / 10.0 && n.z <= z_max)
        .collect();
    let fit = |vals: Vec<(f64, f64)>| -> f64 {
        let pts: Vec<(f64, f64)> = vals
            .into_iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(x, v)| (x, v.ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let h2_slope = fit(sel.iter().map(|n| (n.z.ln(), (n.h2 - p.mu).abs())).collect());
    let h1_slope = fit(sel.iter().map(|n| (n.z.ln(), (n.h1 - h1_inf).abs())).collect());
    // mu * Lambda rho / rho = mu (ell/2) F / sigma
    let logrho_slope = fit(
        sel.iter()
            .map(|n| (n.z.ln(), (p.mu * 0.5 * p.ell * n.f / n.sigma - h1_inf).abs()))
            .collect(),
    );
    // fitted limit of H1 from the farthest nodes
    let tail: Vec<&&FieldNode> = sel.iter().filter(|n| n.z >= z_max / 2.0).collect();
    let h1_limit = tail.iter().map(|n| n.h1).sum::<f64>() / tail.len() as f64;
    Ok(PotentialsDecayReport { h2_slope, h1_limit, h1_slope, logrho_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_identities_synthetic() {
        // (p-1) Q = mu^2 Z^2 sigma^2 and H2 = mu (1 - w) at every node follow
        // from the construction; check them on a real profile in the
        // integration tests and on the formula level here.
        let p = crate::params::make_params(9, 3, 2.1).unwrap();
        let (z, sigma) = (2.0, 0.7);
        let q = (p.phi * z * sigma).powi(2);
        let rhs = p.mu * p.mu * z * z * sigma * sigma / (p.p as f64 - 1.0);
        approx::assert_relative_eq!(q, rhs, max_relative = 1e-14);
    }
}
