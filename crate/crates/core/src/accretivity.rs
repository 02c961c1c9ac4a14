//! Shifted-cone geometry, the degenerate measure g, the damping coefficients
//! A5/A6 with their floors, and a desk-scale discretized spectrum of the
//! commuted drift-wave operator.
//!
//! The elliptic part is L_g Phi = mu^2/(g Z^{d-1}) d_Z(Z^{d+1} g (-D_a) d_Z Phi).
//! Two assemblies are provided: a conservative flux form (manifestly
//! symmetric nonpositive in the g-inner product) and a nonconservative
//! collocation form using Z^2 (-D_a) g'/g = -Z*G, whose coefficients stay
//! bounded at every k even where g itself under- or overflows.

use crate::error::{Error, Result};
use crate::profile::Profile;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShiftedGeometry {
    pub a: f64,
    pub z2: f64,
    pub z_a: f64,
}

/// Pointwise fields entering the measure and the coefficients.
#[derive(Debug, Clone, Copy)]
pub struct ConeFields {
    pub z: f64,
    pub w: f64,
    pub sigma: f64,
    pub lw: f64,
    pub ls: f64,
    pub f: f64,
    pub d_a: f64,
    pub ld_a: f64,
    pub h2: f64,
    pub lh2: f64,
    pub h1: f64,
    pub a1: f64,
    pub a2: f64,
    pub a2_tilde: f64,
    /// the 4k-bracket (1-a)^2(1-w) - sigma F - (1-a)^2 (1-w)(w + Lw)
    pub bracket: f64,
}

pub fn cone_fields(profile: &Profile, a: f64, z: f64) -> ConeFields {
    let p = &profile.params;
    let (w, sigma, lw, ls) = profile.state(z.ln());
    let f = sigma + ls;
    let oma = 1.0 - a;
    let d_a = oma * oma * (w - 1.0) * (w - 1.0) - sigma * sigma;
    let ld_a = 2.0 * oma * oma * (w - 1.0) * lw - 2.0 * sigma * ls;
    let h2 = p.mu * (1.0 - w);
    let lh2 = -p.mu * lw;
    let h1 = 0.5 * p.mu * p.ell * (1.0 - w) * f / sigma;
    let lqoq = 2.0 * f / sigma;
    let e = p.mu * (p.r - 2.0);
    let a1 = h2 * h1 - h2 * lh2 + h2 * (h1 - e) + h2 * h2 * lqoq;
    let a2 = 2.0 * h1 - e + h2 * lqoq;
    let a2_tilde = a1 + (2.0 * a - a * a) * h2 * lh2 - a * a2 * h2;
    let bracket = oma * oma * (1.0 - w) - sigma * f - oma * oma * (1.0 - w) * (w + lw);
    ConeFields { z, w, sigma, lw, ls, f, d_a, ld_a, h2, lh2, h1, a1, a2, a2_tilde, bracket }
}

/// G of the measure equation (-D_a) Lambda g / g = -G.
pub fn measure_g_source(cf: &ConeFields, params_mu: f64, d: f64, k: usize) -> f64 {
    let omw = 1.0 - cf.w;
    -(d - 1.0) * cf.sigma * cf.sigma + omw * omw - (d + 1.0) * cf.d_a - cf.ld_a
        + 4.0 * k as f64 * cf.bracket
        - cf.a2_tilde / (params_mu * params_mu)
}

/// Solve D_a(Z_a) = 0 just past Z2 by bracketed bisection on the profile.
pub fn shifted_root(profile: &Profile, a: f64) -> Result<ShiftedGeometry> {
    let da = |x: f64| {
        let (w, s, _, _) = profile.state(x);
        (1.0 - a) * (1.0 - a) * (w - 1.0) * (w - 1.0) - s * s
    };
    let x2 = profile.x2;
    let x_end = profile.outgoing.stop[0];
    let mut lo = x2 + 1e-12;
    if da(lo) >= 0.0 {
        // a = 0 degenerates to Z2 itself
        return Ok(ShiftedGeometry { a, z2: profile.z2, z_a: profile.z2 });
    }
    let mut hi = lo;
    let mut step = 0.05;
    loop {
        hi += step;
        if hi > x_end {
            return Err(Error::RootEscaped { a });
        }
        if da(hi) >= 0.0 {
            break;
        }
        step *= 1.7;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if da(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_a = 0.5 * (lo + hi);
    Ok(ShiftedGeometry { a, z2: profile.z2, z_a: x_a.exp() })
}

#[derive(Debug, Clone)]
pub struct MeasureProfile {
    pub k: usize,
    pub a: f64,
    pub z_a: f64,
    /// normalization at the origin: exp of the integral's lower limit
    pub g_at_zero: f64,
    /// staggered nodes Z_j = (j + 1/2) h
    pub z: Vec<f64>,
    pub log_g: Vec<f64>,
    pub g_source: Vec<f64>,
    pub d_a: Vec<f64>,
    /// fitted vanishing exponent of g at Z_a
    pub c_g: f64,
    /// G(Z_a) / Lambda D_a (Z_a), the analytic exponent
    pub c_g_analytic: f64,
}

/// Build the measure g on [0, Z_a) by quadrature of Lambda log g = -G/(-D_a),
/// normalized to g(0) = 1, and fit its vanishing exponent at Z_a.
pub fn build_measure(profile: &Profile, geom: &ShiftedGeometry, k: usize, n: usize) -> Result<MeasureProfile> {
    assert!(k >= 1);
    let p = &profile.params;
    let d = p.d as f64;
    let h = geom.z_a / n as f64;
    let mut z = Vec::with_capacity(n);
    let mut gsrc = Vec::with_capacity(n);
    let mut dav = Vec::with_capacity(n);
    let mut integrand = Vec::with_capacity(n);
    for j in 0..n {
        let zj = (j as f64 + 0.5) * h;
        let cf = cone_fields(profile, geom.a, zj);
        let g = measure_g_source(&cf, p.mu, d, k);
        // d(log g)/dZ = -G / ((-D_a) Z)
        let val = -g / ((-cf.d_a) * zj);
        if j == 0 && val.abs() * zj > 1e3 {
            return Err(Error::QuadratureBlowup { z: zj, value: val });
        }
        z.push(zj);
        gsrc.push(g);
        dav.push(cf.d_a);
        integrand.push(val);
    }
    let mut log_g = vec![0.0; n];
    // head piece 0..z0: integrand ~ c Z, trapezoid with the zero limit
    log_g[0] = 0.5 * integrand[0] * z[0];
    for j in 1..n {
        log_g[j] = log_g[j - 1] + 0.5 * (integrand[j] + integrand[j - 1]) * h;
    }
    // fit c_g over the asymptotic stretch gap <= 0.04 (Z_a - Z2): the interior
    // profile of g takes over at larger gaps. The uniform grid barely reaches
    // that regime, so the tail is sampled on its own geometric gap sequence
    // with Gauss-Legendre increments of the same integrand.
    let width = (geom.z_a - geom.z2).max(10.0 * h);
    let dlogg = |zz: f64| {
        let cf = cone_fields(profile, geom.a, zz);
        let g = measure_g_source(&cf, p.mu, d, k);
        -g / ((-cf.d_a) * zz)
    };
    let gauss = |a: f64, b: f64| -> f64 {
        const XG: [f64; 4] = [0.18343464249564980, 0.52553240991632899, 0.79666647741362674, 0.96028985649753623];
        const WG: [f64; 4] = [0.36268378337836198, 0.31370664587788729, 0.22238103445337447, 0.10122854851842002];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for i in 0..4 {
            acc += WG[i] * (dlogg(mid + half * XG[i]) + dlogg(mid - half * XG[i]));
        }
        acc * half
    };
    // anchor at the last uniform node below the fit window
    let gap0 = 0.08 * width;
    let j0 = z.iter().rposition(|&zz| geom.z_a - zz >= gap0).unwrap_or(n - 1);
    let mut pts = Vec::new();
    let mut acc = log_g[j0];
    let mut z_prev = z[j0];
    for j in 0..9 {
        let gap = 0.04 * width * 0.5f64.powi(j);
        let z_next = geom.z_a - gap;
        acc += gauss(z_prev, z_next);
        pts.push((gap.ln(), acc));
        z_prev = z_next;
    }
    let c_g = fit_slope(&pts);
    let cf_a = cone_fields(profile, geom.a, geom.z_a - 1e-9 * geom.z_a);
    let c_g_analytic = measure_g_source(&cf_a, p.mu, d, k) / cf_a.ld_a;
    Ok(MeasureProfile {
        k,
        a: geom.a,
        z_a: geom.z_a,
        g_at_zero: (0.0f64).exp(),
        z,
        log_g,
        g_source: gsrc,
        d_a: dav,
        c_g,
        c_g_analytic,
    })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorReport {
    pub k: usize,
    pub a: f64,
    pub z_a: f64,
    /// min over [0, Z_a - eps] of A5 (Z_a - Z)/k
    pub floor_a5: f64,
    /// min over [0, Z_a - eps] of A6 (Z_a - Z)/k
    pub floor_a6: f64,
    /// fitted divergence exponent of A5 at Z_a (expected -1)
    pub a5_exponent: f64,
    pub a6_exponent: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub z: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    pub a2_tilde: Vec<f64>,
    pub a5: Vec<f64>,
    pub a6: Vec<f64>,
    pub g_log: Vec<f64>,
    pub d_a: Vec<f64>,
    pub g_source: Vec<f64>,
    pub report: FloorReport,
}

/// A5, A6 and the scaled floors over [0, Z_a - eps], eps = 1e-3 Z_a.
pub fn coefficient_floors(
    profile: &Profile,
    geom: &ShiftedGeometry,
    k: usize,
    n: usize,
) -> Result<CoefficientSet> {
    assert!(k >= 2);
    let p = &profile.params;
    let d = p.d as f64;
    let measure = build_measure(profile, geom, k, n)?;
    let eps = 1e-3 * geom.z_a;
    let kf = k as f64;
    let mut out = CoefficientSet {
        z: measure.z.clone(),
        a1: Vec::with_capacity(n),
        a2: Vec::with_capacity(n),
        a3: Vec::with_capacity(n),
        a2_tilde: Vec::with_capacity(n),
        a5: Vec::with_capacity(n),
        a6: Vec::with_capacity(n),
        g_log: measure.log_g.clone(),
        d_a: measure.d_a.clone(),
        g_source: measure.g_source.clone(),
        report: FloorReport {
            k,
            a: geom.a,
            z_a: geom.z_a,
            floor_a5: f64::INFINITY,
            floor_a6: f64::INFINITY,
            a5_exponent: 0.0,
            a6_exponent: 0.0,
        },
    };
    let mut tail5 = Vec::new();
    let mut tail6 = Vec::new();
    for (j, &zj) in measure.z.iter().enumerate() {
        let cf = cone_fields(profile, geom.a, zj);
        // Lambda g / g = G / D_a
        let lgog = measure.g_source[j] / cf.d_a;
        let a5 = -0.5 * (d + lgog + cf.lh2 / cf.h2) + 2.0 * kf * (1.0 + cf.lh2 / cf.h2)
            - cf.a2 / ((2.0 - geom.a) * cf.h2);
        let a6 = 2.0 * kf * (cf.h2 + cf.lh2)
            - 0.5 * cf.h2 * (cf.ld_a / cf.d_a + d - cf.lh2 / cf.h2 + lgog);
        // A3 needs H3 and Lambda H1 (second log-derivatives)
        let (_, l2s) = profile.state2(zj.ln());
        let l1 = 0.5 * p.ell * cf.f / cf.sigma;
        let l2 = 0.5 * p.ell * (l2s / cf.sigma - (cf.ls / cf.sigma) * (cf.ls / cf.sigma));
        let h3 = (l2 + l1 * l1 + (d - 2.0) * l1) / (zj * zj);
        let (lw2, _) = profile.state2(zj.ln());
        // Lambda H1 by the product rule on H1 = (mu ell / 2)(1-w) F / sigma
        let lf = cf.ls + l2s;
        let lh1 = 0.5 * p.mu * p.ell
            * (-cf.lw * cf.f / cf.sigma
                + (1.0 - cf.w) * (lf / cf.sigma - cf.f * cf.ls / (cf.sigma * cf.sigma)));
        let _ = lw2;
        let e = p.mu * (p.r - 2.0);
        let lqoq = 2.0 * cf.f / cf.sigma;
        let pm1q = p.mu * p.mu * zj * zj * cf.sigma * cf.sigma;
        let a3 = -(cf.h1 - e) * cf.h1 + cf.h2 * lh1 - cf.h2 * (cf.h1 - e) * lqoq - pm1q * h3;
        out.a1.push(cf.a1);
        out.a2.push(cf.a2);
        out.a3.push(a3);
        out.a2_tilde.push(cf.a2_tilde);
        out.a5.push(a5);
        out.a6.push(a6);
        let gap = geom.z_a - zj;
        if gap >= eps {
            out.report.floor_a5 = out.report.floor_a5.min(a5 * gap / kf);
            out.report.floor_a6 = out.report.floor_a6.min(a6 * gap / kf);
        }
        if gap < 0.05 * geom.z_a && gap > eps && a5 > 0.0 && a6 > 0.0 {
            tail5.push((gap.ln(), a5.ln()));
            tail6.push((gap.ln(), a6.ln()));
        }
    }
    out.report.a5_exponent = fit_slope(&tail5);
    out.report.a6_exponent = fit_slope(&tail6);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub k: usize,
    pub a: f64,
    pub n_grid: usize,
    /// eigenvalues sorted by descending real part, as (re, im)
    pub eigenvalues: Vec<(f64, f64)>,
    pub unstable_count: usize,
    /// 90th percentile of the stable real parts (bulk bound)
    pub bulk_re_q90: f64,
    /// fitted c in Re <= -c a k for the bulk
    pub c_fit: f64,
}

/// Assemble the commuted operator m_k on (Phi_k, T_k) over a staggered
/// uniform grid on [0, Z_a], with the elliptic part in nonconservative
/// collocation form and upwinded (backward) drift differences; return the
/// full matrix (2n x 2n). The lumped-mass generalized problem (W A, W)
/// reduces exactly to this collocation matrix, which is eigensolved directly.
pub fn assemble_commuted(
    profile: &Profile,
    geom: &ShiftedGeometry,
    k: usize,
    n: usize,
) -> DMatrix<f64> {
    let p = &profile.params;
    let d = p.d as f64;
    let h = geom.z_a / n as f64;
    let mu2 = p.mu * p.mu;
    let kf = k as f64;
    let mut cfv = Vec::with_capacity(n);
    for j in 0..n {
        let zj = (j as f64 + 0.5) * h;
        cfv.push(cone_fields(profile, geom.a, zj));
    }
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    // drift rows: coefficient * Z d/dZ with backward (upwind) differences;
    // the left edge mirrors evenly through Z = 0
    let drift = |m: &mut DMatrix<f64>, row0: usize, col0: usize, coefs: &[f64]| {
        for (j, &c) in coefs.iter().enumerate() {
            let cz = c * (j as f64 + 0.5) * h / h;
            if j > 0 {
                m[(row0 + j, col0 + j)] += cz;
                m[(row0 + j, col0 + j - 1)] -= cz;
            }
            // j = 0: mirrored neighbor equals the node itself; derivative 0
        }
    };
    // row block 1: -a H2 Lambda Phi_k - 2 a k (H2 + LH2) Phi_k + T_k
    let coefs: Vec<f64> = cfv.iter().map(|c| -geom.a * c.h2).collect();
    drift(&mut m, 0, 0, &coefs);
    for j in 0..n {
        m[(j, j)] += -2.0 * geom.a * kf * (cfv[j].h2 + cfv[j].lh2);
        m[(j, n + j)] += 1.0;
    }
    // row block 2: L_g Phi_k - (2-a) H2 Lambda T_k - 2k(2-a)(H2+LH2) T_k + A2 T_k
    for j in 0..n {
        let cf = &cfv[j];
        let zj = cf.z;
        // L_g = c2 d2/dZ2 + c1 d/dZ with
        // c2 = mu^2 Z^2 (-D_a),
        // c1 = mu^2 Z [(d-1) s^2 - (1-w)^2 - 4k*bracket + A2~/mu^2]
        //    (= mu^2 Z [(d+1)(-D_a) - G - Lambda D_a]/1, identical identity)
        let c2 = mu2 * zj * zj * (-cf.d_a);
        let c1 = mu2
            * zj
            * ((d - 1.0) * cf.sigma * cf.sigma - (1.0 - cf.w) * (1.0 - cf.w) - 4.0 * kf * cf.bracket
                + cf.a2_tilde / mu2);
        let (r, c0) = (n + j, 0);
        if j == 0 {
            // mirror: f_{-1} = f_0
            m[(r, c0)] += c2 * (-1.0) / (h * h) + c1 * (-0.5) / h;
            m[(r, c0 + 1)] += c2 * 1.0 / (h * h) + c1 * 0.5 / h;
        } else if j == n - 1 {
            // one-sided second difference at the degenerate end
            m[(r, c0 + j - 2)] += c2 / (h * h);
            m[(r, c0 + j - 1)] += -2.0 * c2 / (h * h) - c1 / h;
            m[(r, c0 + j)] += c2 / (h * h) + c1 / h;
        } else {
            m[(r, c0 + j - 1)] += c2 / (h * h) - c1 * 0.5 / h;
            m[(r, c0 + j)] += -2.0 * c2 / (h * h);
            m[(r, c0 + j + 1)] += c2 / (h * h) + c1 * 0.5 / h;
        }
    }
    let coefs: Vec<f64> = cfv.iter().map(|c| -(2.0 - geom.a) * c.h2).collect();
    drift(&mut m, n, n, &coefs);
    for j in 0..n {
        let cf = &cfv[j];
        m[(n + j, n + j)] += -2.0 * kf * (2.0 - geom.a) * (cf.h2 + cf.lh2) + cf.a2;
    }
    m
}

/// Conservative flux assembly of the L_g block alone, together with the
/// g-inner-product weights (returned as logs); used by the self-adjointness
/// checks and as the cross-validation route for the collocation assembly.
pub fn lg_conservative(
    profile: &Profile,
    geom: &ShiftedGeometry,
    k: usize,
    n: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let p = &profile.params;
    let d = p.d as f64;
    let measure = build_measure(profile, geom, k, n)?;
    let h = geom.z_a / n as f64;
    let mu2 = p.mu * p.mu;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let log_g = &measure.log_g;
    // flux at the interior half-node between j and j+1 (Z = (j+1) h)
    let mut flux = vec![0.0; n]; // flux[j] couples j and j+1; flux[n-1] = 0 (degenerate end)
    for j in 0..n - 1 {
        let zh = (j as f64 + 1.0) * h;
        let cf = cone_fields(profile, geom.a, zh);
        let lgh = 0.5 * (log_g[j] + log_g[j + 1]);
        flux[j] = zh.powf(d + 1.0) * lgh.exp() * (-cf.d_a) / h;
    }
    for j in 0..n {
        let zj = measure.z[j];
        let wj = log_g[j].exp() * zj.powf(d - 1.0);
        if j > 0 {
            mat[(j, j - 1)] += mu2 * flux[j - 1] / (wj * h);
            mat[(j, j)] -= mu2 * flux[j - 1] / (wj * h);
        }
        if j < n - 1 {
            mat[(j, j + 1)] += mu2 * flux[j] / (wj * h);
            mat[(j, j)] -= mu2 * flux[j] / (wj * h);
        }
    }
    Ok((mat, measure.log_g.clone()))
}

/// Eigenvalues of the discretized commuted operator; the unstable count and
/// a bulk bound Re <= -c a k.
pub fn discrete_spectrum(
    profile: &Profile,
    geom: &ShiftedGeometry,
    k: usize,
    n: usize,
) -> Result<SpectrumResult> {
    assert!(k >= 2, "commuted operator needs k >= 2");
    let m = assemble_commuted(profile, geom, k, n);
    let eig = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| m.complex_eigenvalues()))
        .map_err(|_| Error::EigenFailure("Schur iteration did not converge".into()))?;
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let unstable_count = eigenvalues.iter().filter(|e| e.0 >= 0.0).count();
    let stable: Vec<f64> = eigenvalues.iter().map(|e| e.0).filter(|&x| x < 0.0).collect();
    let bulk_re_q90 = if stable.is_empty() {
        f64::NAN
    } else {
        stable[(0.1 * stable.len() as f64) as usize]
    };
    let c_fit = -bulk_re_q90 / (geom.a * k as f64);
    Ok(SpectrumResult {
        k,
        a: geom.a,
        n_grid: n,
        eigenvalues,
        unstable_count,
        bulk_re_q90,
        c_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;
    use crate::profile::{extend_and_fit, ProfileOptions};
    use std::sync::OnceLock;

    fn profile() -> &'static Profile {
        static P: OnceLock<Profile> = OnceLock::new();
        P.get_or_init(|| {
            let base = make_params(9, 3, 2.1).unwrap();
            extend_and_fit(&base, 2.19, &ProfileOptions::default()).unwrap()
        })
    }

    #[test]
    fn shifted_root_basics() {
        let prof = profile();
        // a = 0 pins Z_a = Z2
        let g0 = shifted_root(prof, 0.0).unwrap();
        assert!((g0.z_a - prof.z2).abs() < 1e-10 * prof.z2);
        // finite-difference dZ_a/da at 0 vs 2 sigma2^2 / D0'(Z2)
        let da = 1e-6;
        let g1 = shifted_root(prof, da).unwrap();
        let fd = (g1.z_a - g0.z_a) / da;
        let expected = 2.0 * prof.sonic.sigma2 * prof.sonic.sigma2 * prof.z2
            / prof.sonic.lambda_plus.abs();
        assert!(
            (fd - expected).abs() / expected < 0.05,
            "dZa/da fd = {fd}, expected = {expected}"
        );
        // monotone in a, and D_a < 0 strictly inside
        let g2 = shifted_root(prof, 0.01).unwrap();
        assert!(g2.z_a > g1.z_a && g1.z_a > g0.z_a);
        for frac in [0.1, 0.5, 0.9] {
            let z = frac * g2.z_a;
            let cf = cone_fields(prof, 0.01, z);
            assert!(cf.d_a < 0.0, "D_a = {} at Z = {z}", cf.d_a);
        }
    }

    #[test]
    fn measure_normalization_and_exponent() {
        let prof = profile();
        let geom = shifted_root(prof, 0.01).unwrap();
        let meas = build_measure(prof, &geom, 8, 4000).unwrap();
        // g(0) = 1: the first node's log g is the tiny head correction
        assert!(meas.log_g[0].abs() < 1e-3);
        // g = 1 + O(Z^2) near the origin: quadratic scaling between Z ~ 0.05 and 0.1
        let at = |zt: f64| {
            let j = meas.z.iter().position(|&z| z > zt).unwrap();
            meas.log_g[j]
        };
        let (g05, g10) = (at(0.05), at(0.1));
        assert!(g10.abs() < 0.05, "log g(0.1) = {g10}");
        let ratio = g10 / g05;
        assert!((ratio - 4.0).abs() < 2.0, "quadratic scaling ratio {ratio}");
        // fitted exponent against the analytic ratio
        assert!(
            (meas.c_g - meas.c_g_analytic).abs() / meas.c_g_analytic.abs() < 0.10,
            "c_g = {} vs analytic {}",
            meas.c_g,
            meas.c_g_analytic
        );
        // c_g ~ 2k for large k at fixed a
        let m32 = build_measure(prof, &geom, 32, 4000).unwrap();
        let m64 = build_measure(prof, &geom, 64, 4000).unwrap();
        let r32 = m32.c_g_analytic / 64.0;
        let r64 = m64.c_g_analytic / 128.0;
        assert!((r64 - 1.0).abs() < (r32 - 1.0).abs() + 1e-9, "c_g/2k: {r32} then {r64}");
    }

    #[test]
    fn key_quantity_at_p2() {
        // [(1-w) - sigma F - (1-w)(w + Lw)] at P2 equals |lambda_+|/2
        let prof = profile();
        let cf = cone_fields(prof, 0.0, prof.z2);
        let key = (1.0 - cf.w) - cf.sigma * cf.f - (1.0 - cf.w) * (cf.w + cf.lw);
        let expected = 0.5 * prof.sonic.lambda_plus.abs();
        assert!(
            (key - expected).abs() < 1e-5,
            "key = {key}, |lambda+|/2 = {expected}"
        );
    }

    #[test]
    fn a5_small_a_large_k_limit() {
        // A5 (-D_a) / (2k) -> (1-w) - sigma F - (1-w)(w+Lw) + (-Delta)(1 - Lw/(1-w))
        let prof = profile();
        let p = &prof.params;
        let a = 1e-5;
        let k = 4096usize;
        let geom = shifted_root(prof, a).unwrap();
        let meas = build_measure(prof, &geom, k, 512).unwrap();
        for (j, &zj) in meas.z.iter().enumerate().step_by(64) {
            if zj > 0.98 * geom.z_a || zj < 0.05 * geom.z_a {
                continue;
            }
            let cf = cone_fields(prof, a, zj);
            let lgog = meas.g_source[j] / cf.d_a;
            let a5 = -0.5 * ((p.d as f64) + lgog + cf.lh2 / cf.h2)
                + 2.0 * k as f64 * (1.0 + cf.lh2 / cf.h2)
                - cf.a2 / ((2.0 - a) * cf.h2);
            let lhs = a5 * (-cf.d_a) / (2.0 * k as f64);
            let delta = (cf.w - 1.0) * (cf.w - 1.0) - cf.sigma * cf.sigma;
            let rhs = (1.0 - cf.w) - cf.sigma * cf.f - (1.0 - cf.w) * (cf.w + cf.lw)
                + (-delta) * (1.0 - cf.lw / (1.0 - cf.w));
            assert!(
                (lhs - rhs).abs() < 2e-3 * (1.0 + rhs.abs()),
                "limit identity at Z = {zj}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn lg_conservative_is_symmetric_nonpositive() {
        let prof = profile();
        let geom = shifted_root(prof, 0.01).unwrap();
        let n = 300;
        let (lg, log_g) = lg_conservative(prof, &geom, 4, n).unwrap();
        let d = prof.params.d as f64;
        let h = geom.z_a / n as f64;
        // W L symmetric: check the flux identity w_i L[i][i+1] = w_{i+1} L[i+1][i]
        for j in 0..n - 1 {
            let zi = (j as f64 + 0.5) * h;
            let zj = (j as f64 + 1.5) * h;
            let wi = log_g[j].exp() * zi.powf(d - 1.0);
            let wj = log_g[j + 1].exp() * zj.powf(d - 1.0);
            let lhs = wi * lg[(j, j + 1)];
            let rhs = wj * lg[(j + 1, j)];
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()),
                "flux symmetry at {j}"
            );
        }
        // quadratic form nonpositive on random vectors
        let mut s = 7u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..5 {
            let u: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let mut q = 0.0;
            for i in 0..n {
                let zi = (i as f64 + 0.5) * h;
                let wi = log_g[i].exp() * zi.powf(d - 1.0);
                let mut row = 0.0;
                for j in i.saturating_sub(1)..(i + 2).min(n) {
                    row += lg[(i, j)] * u[j];
                }
                q += wi * u[i] * row;
            }
            assert!(q <= 1e-9 * q.abs().max(1.0), "quadratic form = {q}");
        }
    }

    #[test]
    fn assemblies_agree_under_refinement() {
        // conservative and collocation L_g agree on a smooth vector, with the
        // difference shrinking under grid refinement
        let prof = profile();
        let geom = shifted_root(prof, 0.01).unwrap();
        let diff_at = |n: usize| -> f64 {
            let (cons, _) = lg_conservative(prof, &geom, 4, n).unwrap();
            let full = assemble_commuted(prof, &geom, 4, n);
            let h = geom.z_a / n as f64;
            let u: Vec<f64> = (0..n)
                .map(|j| {
                    let z = (j as f64 + 0.5) * h;
                    (std::f64::consts::PI * z / (2.0 * geom.z_a)).cos()
                })
                .collect();
            let mut worst = 0.0f64;
            for i in n / 8..(7 * n / 8) {
                let mut a = 0.0;
                let mut b = 0.0;
                for j in i.saturating_sub(1)..(i + 2).min(n) {
                    a += cons[(i, j)] * u[j];
                    b += full[(n + i, j)] * u[j];
                }
                worst = worst.max((a - b).abs());
            }
            worst
        };
        let d1 = diff_at(250);
        let d2 = diff_at(500);
        assert!(d2 < d1 / 2.5, "assembly agreement: {d1} -> {d2}");
    }
}
