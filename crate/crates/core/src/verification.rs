//! Pointwise checks on a sampled profile: repulsivity minima inside and
//! outside the acoustic cone, the surface-gravity cross-check, the coupled
//! quadratic-form floor, and the parameter-level Sobolev growth rates.
//!
//! Lambda-derivatives are recomputed here by 4th-order centered finite
//! differences on the log grid, independently of the values stored by the
//! profile constructor, so the identity checks compare two computation paths.

use crate::error::{Error, Result};
use crate::fields::ProfileFields;
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

/// 4th-order FD of a sampled function on a uniform grid (one-sided at the ends).
fn fd4(vals: &[f64], h: f64) -> Vec<f64> {
    let n = vals.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if i >= 2 && i + 2 < n {
            (vals[i - 2] - 8.0 * vals[i - 1] + 8.0 * vals[i + 1] - vals[i + 2]) / (12.0 * h)
        } else if i + 4 < n && i < 2 {
            (-25.0 * vals[i] + 48.0 * vals[i + 1] - 36.0 * vals[i + 2] + 16.0 * vals[i + 3]
                - 3.0 * vals[i + 4])
                / (12.0 * h)
        } else {
            (25.0 * vals[i] - 48.0 * vals[i - 1] + 36.0 * vals[i - 2] - 16.0 * vals[i - 3]
                + 3.0 * vals[i - 4])
                / (12.0 * h)
        };
    }
    out
}

fn grid_spacing(fields: &ProfileFields) -> Result<f64> {
    let n = fields.nodes.len();
    if n < 8 {
        return Err(Error::Parse("profile grid too short".into()));
    }
    let h = (fields.nodes[1].z / fields.nodes[0].z).ln();
    // the verification path assumes a uniform log grid
    for w in fields.nodes.windows(2) {
        let hi = (w[1].z / w[0].z).ln();
        if (hi - h).abs() > 1e-8 * h.abs() {
            return Err(Error::Parse("profile grid is not geometric".into()));
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RepulsivityReport {
    pub z2: f64,
    /// min over [0, Z2] of (1-w-Lw)^2 - F^2
    pub inside_quad: f64,
    /// min over [0, Z2] of 1-w-Lw - (1-w)F/sigma
    pub inside_linear: f64,
    /// min over [Z2, Zmax] of (1-w-Lw)^2 - F^2
    pub outside_quad: f64,
    /// min over [Z2, Zmax] of 1-w-Lw
    pub outside_linear: f64,
    /// kappa from the repulsivity expression extrapolated to Z2
    pub kappa_direct: f64,
    /// min of rho_P over the grid
    pub min_rho: f64,
    /// min of H2 + Lambda H2 = mu (1-w-Lw)
    pub min_h2_plus: f64,
    /// max |Lw(FD) - Lw(exact)| outside the near-sonic window
    pub disc_error: f64,
    /// grid minima minus 3x the route-agreement estimate
    pub certified_inside_quad: f64,
    pub certified_inside_linear: f64,
    pub certified_outside_quad: f64,
    pub certified_outside_linear: f64,
}

/// Exact log-derivatives from the phase-plane system: Lw = -Delta1/Delta,
/// Ls = -Delta2/Delta, computed from the sampled (w, sigma) columns. The
/// algebra holds to roundoff at every node except Z2 itself.
fn ode_route(fields: &ProfileFields) -> (Vec<f64>, Vec<f64>) {
    let p = &fields.params;
    let mut lw = Vec::with_capacity(fields.nodes.len());
    let mut ls = Vec::with_capacity(fields.nodes.len());
    for n in &fields.nodes {
        let det = crate::params::determinants(n.w, n.sigma, p);
        lw.push(-det.delta1 / det.delta);
        ls.push(-det.delta2 / det.delta);
    }
    (lw, ls)
}

fn locate_z2(fields: &ProfileFields) -> f64 {
    if fields.z2 > 0.0 {
        return fields.z2;
    }
    for i in 1..fields.nodes.len() {
        if fields.nodes[i - 1].delta < 0.0 && fields.nodes[i].delta >= 0.0 {
            return fields.nodes[i].z;
        }
    }
    0.0
}

/// Near-sonic window (in log Z relative to Z2) holding the genuine crossover
/// feature of the continued profile, which sits below the grid scale of any
/// practical interchange grid; the FD route is cross-checked against the
/// exact route only outside it.
const SONIC_WINDOW: (f64, f64) = (-0.10, 0.35);

fn in_window(z: f64, z2: f64) -> bool {
    let t = (z / z2).ln();
    t >= SONIC_WINDOW.0 && t <= SONIC_WINDOW.1
}

/// Evaluate the repulsivity quantities on the exact route, report minima
/// inside/outside the cone, the surface gravity at Z2, and the agreement of
/// the independent 4th-order FD route away from the sonic window.
pub fn check_repulsivity(fields: &ProfileFields) -> Result<RepulsivityReport> {
    let h = grid_spacing(fields)?;
    let n = fields.nodes.len();
    let w: Vec<f64> = fields.nodes.iter().map(|n| n.w).collect();
    let s: Vec<f64> = fields.nodes.iter().map(|n| n.sigma).collect();
    let (lw, ls) = ode_route(fields);
    let lw_fd = fd4(&w, h);
    let z2 = locate_z2(fields);
    let mut rep = RepulsivityReport {
        z2,
        inside_quad: f64::INFINITY,
        inside_linear: f64::INFINITY,
        outside_quad: f64::INFINITY,
        outside_linear: f64::INFINITY,
        kappa_direct: f64::NAN,
        min_rho: f64::INFINITY,
        min_h2_plus: f64::INFINITY,
        disc_error: 0.0,
        certified_inside_quad: 0.0,
        certified_inside_linear: 0.0,
        certified_outside_quad: 0.0,
        certified_outside_linear: 0.0,
    };
    let mu = fields.params.mu;
    let mut kappa_pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let nd = &fields.nodes[i];
        // the exact route degenerates only where Delta = 0 exactly
        if ((nd.z / z2).ln()).abs() < 1e-6 {
            continue;
        }
        let f = s[i] + ls[i];
        let q = (1.0 - w[i] - lw[i]) * (1.0 - w[i] - lw[i]) - f * f;
        let lin_in = 1.0 - w[i] - lw[i] - (1.0 - w[i]) * f / s[i];
        let lin_out = 1.0 - w[i] - lw[i];
        rep.min_rho = rep.min_rho.min(nd.rho);
        rep.min_h2_plus = rep.min_h2_plus.min(mu * lin_out);
        if nd.z <= z2 {
            rep.inside_quad = rep.inside_quad.min(q);
            rep.inside_linear = rep.inside_linear.min(lin_in);
        } else {
            rep.outside_quad = rep.outside_quad.min(q);
            rep.outside_linear = rep.outside_linear.min(lin_out);
        }
        let t = (nd.z / z2).ln();
        if t > -0.05 && t < 0.0 {
            kappa_pts.push((t, lin_in));
        }
    }
    // linear extrapolation of the incoming-side expression to Z2
    if kappa_pts.len() >= 2 {
        let m = kappa_pts.len() as f64;
        let sx: f64 = kappa_pts.iter().map(|p| p.0).sum();
        let sy: f64 = kappa_pts.iter().map(|p| p.1).sum();
        let sxx: f64 = kappa_pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = kappa_pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        rep.kappa_direct = (sy - slope * sx) / m;
    }
    // independent route agreement away from the sonic window
    let mut disc = 0.0f64;
    for i in 2..n - 2 {
        if !in_window(fields.nodes[i].z, z2) {
            disc = disc.max((lw_fd[i] - lw[i]).abs());
        }
    }
    rep.disc_error = disc;
    // the quadratic form sees roughly 3x the Lw route error
    let margin = 9.0 * disc;
    rep.certified_inside_quad = rep.inside_quad - margin;
    rep.certified_inside_linear = rep.inside_linear - margin;
    rep.certified_outside_quad = rep.outside_quad - margin;
    rep.certified_outside_linear = rep.outside_linear - margin;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadraticFormReport {
    /// min over the grid of (1-w-Lw)^2 - F^2
    pub floor: f64,
    /// min over the grid of the scaled discriminant 4 mu^2 (p-1) rho^2 Q [(1-w-Lw)^2 - F^2]
    pub scaled_floor: f64,
    /// max nodewise-relative residual of (p-1)(dQ/dZ)^2/Q = 4 mu^2 F^2 with
    /// dQ/dZ by FD, outside the near-sonic window, over nodes where
    /// |Lambda Q / Q| >= 0.02 (below that both sides vanish together and the
    /// comparison amplifies the f64 floor of the data)
    pub identity_residual: f64,
    /// max |lhs - rhs| / max(rhs) over every node outside the window
    pub identity_residual_global: f64,
    /// the same residual inside the window (reported; the crossover there sits
    /// below the grid scale)
    pub identity_residual_window: f64,
    /// max relative deviation of the stored F column from sigma + Lambda sigma
    /// on the exact route
    pub f_column_residual: f64,
}

/// Coupled quadratic-form floor and the nodewise pressure identity
/// (p-1)(dQ/dZ)^2/Q = 4 mu^2 F^2: dQ/dZ by 4th-order FD of the stored Q
/// column against the stored F column, asserted outside the near-sonic
/// window, plus the exact-route integrity of the F column itself.
pub fn quadratic_form_floor(fields: &ProfileFields) -> Result<QuadraticFormReport> {
    let h = grid_spacing(fields)?;
    let n = fields.nodes.len();
    let p = &fields.params;
    let (lw, ls) = ode_route(fields);
    let z2 = locate_z2(fields);
    let lnq: Vec<f64> = fields.nodes.iter().map(|n| n.q.ln()).collect();
    let dlnq = fd4(&lnq, h); // = Lambda Q / Q
    let mut floor = f64::INFINITY;
    let mut scaled = f64::INFINITY;
    let pm1 = p.p as f64 - 1.0;
    let mut rhs_all = vec![0.0; n];
    let mut lhs_all = vec![0.0; n];
    let mut f_col_err = 0.0f64;
    for i in 0..n {
        let nd = &fields.nodes[i];
        if ((nd.z / z2).ln()).abs() > 1e-6 {
            let f_exact = nd.sigma + ls[i];
            f_col_err = f_col_err.max((nd.f - f_exact).abs() / (1.0 + f_exact.abs()));
            let q = (1.0 - nd.w - lw[i]) * (1.0 - nd.w - lw[i]) - f_exact * f_exact;
            floor = floor.min(q);
            scaled = scaled.min(4.0 * p.mu * p.mu * pm1 * nd.rho * nd.rho * nd.q * q);
        }
        let dq = nd.q * dlnq[i] / nd.z;
        lhs_all[i] = pm1 * dq * dq / nd.q;
        rhs_all[i] = 4.0 * p.mu * p.mu * nd.f * nd.f;
    }
    // nodewise residual where F carries scale (elsewhere both sides vanish
    // quadratically and the comparison measures FD roundoff of 0 ~ 0), plus a
    // global-scale residual over every node outside the window
    let rhs_max = rhs_all.iter().cloned().fold(0.0f64, f64::max);
    let mut resid = 0.0f64;
    let mut resid_global = 0.0f64;
    let mut resid_window = 0.0f64;
    for i in 2..n - 2 {
        let rel = (lhs_all[i] - rhs_all[i]).abs() / rhs_all[i].max(1e-300);
        if in_window(fields.nodes[i].z, z2) {
            resid_window = resid_window.max(rel);
        } else {
            resid_global = resid_global.max((lhs_all[i] - rhs_all[i]).abs() / rhs_max);
            // dlnQ = 2(1 + dln sigma) cancels as Z -> 0 (Q -> 1 there), which
            // amplifies the f64 floor of the sigma data; the nodewise check is
            // meaningful where Lambda Q / Q carries scale
            let nd = &fields.nodes[i];
            if (2.0 * nd.f / nd.sigma).abs() >= 0.02 {
                resid = resid.max(rel);
            }
        }
    }
    Ok(QuadraticFormReport {
        floor,
        scaled_floor: scaled,
        identity_residual: resid,
        identity_residual_global: resid_global,
        identity_residual_window: resid_window,
        f_column_residual: f_col_err,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    /// critical Sobolev exponent d/2 - 2/(p-1)
    pub s_c: f64,
    /// threshold regularity above which Sobolev norms blow up
    pub sigma_th: f64,
    /// amplitude exponent of ||u||_inf in (T-t) units, (1+e)/(p-1)
    pub amp_exponent: f64,
    /// per-s growth exponents in tau units
    pub growth: Vec<(f64, f64)>,
}

/// Sobolev growth exponents: sigma_th = [s_c - e(d/2 + 2/(p-1))]/(1+e) and the
/// growth rate (s-s_c)/2 + (e/2)(s + d/2 + 2/(p-1)) per requested s.
pub fn sobolev_rates(params: &ModelParams, s_list: &[f64]) -> RateReport {
    let d = params.d as f64;
    let pm1 = params.p as f64 - 1.0;
    let e = params.e;
    let s_c = d / 2.0 - 2.0 / pm1;
    let sigma_th = (s_c - e * (d / 2.0 + 2.0 / pm1)) / (1.0 + e);
    let growth = s_list
        .iter()
        .map(|&s| (s, 0.5 * (s - s_c) + 0.5 * e * (s + d / 2.0 + 2.0 / pm1)))
        .collect();
    RateReport {
        s_c,
        sigma_th,
        amp_exponent: (1.0 + e) / pm1,
        growth,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct H1Report {
    /// d - ell(r-1) - 2 evaluated at r (integrability of the gradient term)
    pub grad_margin: f64,
    /// d/2 - (r-1)(1 + ell/2) (integrability of the phase term)
    pub phase_margin: f64,
    pub both_integrable: bool,
}

/// The two closing inequalities guaranteeing a bounded Dirichlet energy of
/// the profile, evaluated at speed r.
pub fn h1_boundedness_check(params: &ModelParams, r: f64) -> H1Report {
    let d = params.d as f64;
    let ell = params.ell;
    let grad_margin = d - ell * (r - 1.0) - 2.0;
    let phase_margin = d / 2.0 - (r - 1.0) * (1.0 + ell / 2.0);
    H1Report {
        grad_margin,
        phase_margin,
        both_integrable: grad_margin > 0.0 && phase_margin > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;
    use approx::assert_relative_eq;

    #[test]
    fn rates_9_3_21() {
        let p = make_params(9, 3, 2.1).unwrap();
        let rep = sobolev_rates(&p, &[2.0, 3.0, 4.0]);
        assert_relative_eq!(rep.s_c, 3.5);
        assert!((rep.sigma_th - 34.0 / 11.0).abs() < 1e-12);
        assert_relative_eq!(rep.amp_exponent, 11.0 / 21.0, max_relative = 1e-14);
        // slope in s is exactly (1+e)/2
        let sl = (rep.growth[2].1 - rep.growth[0].1) / 2.0;
        assert_relative_eq!(sl, 0.5 * (1.0 + p.e), max_relative = 1e-14);
    }

    #[test]
    fn sigma_th_between_one_and_sc() {
        for (d, pp) in [(5u32, 9u32), (6, 5), (8, 3), (9, 3)] {
            let ell = 4.0 / (pp as f64 - 1.0);
            let rs = crate::params::r_star(d, ell);
            for frac in [0.1, 0.5, 0.9] {
                let r = 2.0 + frac * (rs - 2.0);
                let p = make_params(d, pp, r).unwrap();
                let rep = sobolev_rates(&p, &[]);
                assert!(rep.sigma_th > 1.0 && rep.sigma_th < rep.s_c, "({d},{pp}) r={r}");
            }
        }
        // e -> 0 limit: sigma_th -> s_c
        let p = make_params(9, 3, 2.0001).unwrap();
        let rep = sobolev_rates(&p, &[]);
        assert!((rep.sigma_th - rep.s_c).abs() < 1e-3);
    }

    #[test]
    fn h1_examples() {
        // (d=9, ell=2): (d-2) sqrt d + ell (sqrt d - 2) = 23 > 0 at r_star
        let p = make_params(9, 3, 2.1).unwrap();
        let rep = h1_boundedness_check(&p, p.r_star);
        let lhs = (9.0f64 - 2.0) * 3.0 + 2.0 * (3.0 - 2.0);
        assert!(lhs > 0.0 && rep.grad_margin > 0.0);
        // (d=5, ell=0.5): d(sqrt d - 2) + (ell+2) sqrt d ~ 6.77 > 0 at r_star
        let p = make_params(5, 9, 2.005).unwrap();
        let rep = h1_boundedness_check(&p, p.r_star);
        let lhs = 5.0 * (5f64.sqrt() - 2.0) + 2.5 * 5f64.sqrt();
        assert!((lhs - 6.7705).abs() < 1e-3 && rep.phase_margin > 0.0);
        // both inequalities hold for every pair at r_star and mid-range r
        for (d, pp) in [(5u32, 9u32), (6, 5), (8, 3), (9, 3)] {
            let ell = 4.0 / (pp as f64 - 1.0);
            let rs = crate::params::r_star(d, ell);
            let p = make_params(d, pp, 2.0 + 0.5 * (rs - 2.0)).unwrap();
            assert!(h1_boundedness_check(&p, rs).both_integrable);
            assert!(h1_boundedness_check(&p, p.r).both_integrable);
        }
    }
}
