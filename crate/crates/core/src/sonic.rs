//! Sonic-point location on Delta = 0 and the local structure at P2:
//! partial derivatives c1..c4, branch slopes c-, c+, eigenvalues lambda-,
//! lambda+, and the smooth-branch power series used to restart integration
//! on both sides of the sonic point.

use crate::error::{Error, Result};
use crate::params::{determinants, ModelParams};
use serde::{Deserialize, Serialize};

/// Sonic point P2 = (w2, 1 - w2) with its local linearization data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SonicPoint {
    pub w2: f64,
    pub sigma2: f64,
    /// d(Delta1)/dw at P2
    pub c1: f64,
    /// d(Delta2)/dw at P2
    pub c2: f64,
    /// d(Delta1)/dsigma at P2
    pub c3: f64,
    /// d(Delta2)/dsigma at P2 (equals -2 sigma2^2)
    pub c4: f64,
    /// smooth branch slope in (-1, 0)
    pub c_minus: f64,
    /// the complementary slope, > 0
    pub c_plus: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// surface gravity |lambda_+| / (2 sigma2)
    pub kappa: f64,
    /// branch series W(S) = sum a_m S^m (a_0 = 0, a_1 = c_minus)
    pub branch: Vec<f64>,
}

/// All sonic-line roots of Delta1 in 0 < w < 1, increasing in w. Delta1
/// restricted to sigma = 1 - w fact{o}rs as (w - 1) h(w) with h quadratic,
/// but the roots are located by bracketed bisection on the cubic itself.
pub fn find_sonic_points(params: &ModelParams) -> Result<Vec<f64>> {
    let f = |w: f64| determinants(w, 1.0 - w, params).delta1;
    let n = 2000;
    let mut roots = Vec::new();
    let mut w_prev = 1e-9;
    let mut f_prev = f(w_prev);
    for i in 1..=n {
        let w = 1e-9 + (1.0 - 2e-9) * i as f64 / n as f64;
        let fv = f(w);
        if f_prev == 0.0 {
            roots.push(w_prev);
        } else if f_prev * fv < 0.0 {
            let (mut lo, mut hi) = (w_prev, w);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) * f(lo) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        w_prev = w;
        f_prev = fv;
    }
    // w = 1 is always a root of the cubic but not a sonic point (sigma = 0)
    roots.retain(|&w| w < 1.0 - 1e-9);
    if roots.is_empty() {
        return Err(Error::NoSonicPoint { r: params.r });
    }
    Ok(roots)
}

/// Closed-form partial derivatives of (Delta1, Delta2) at a sonic root and the
/// slope/eigenvalue data. Errors with DegenerateSlopes when the slope
/// quadratic has no real roots.
pub fn linearize_at_p2(w2: f64, params: &ModelParams) -> Result<SonicPoint> {
    let d = params.d as f64;
    let (ell, r) = (params.ell, params.r);
    let s2 = 1.0 - w2;
    let c1 = (w2 - 1.0) * (w2 - r) + w2 * (w2 - r) + w2 * (w2 - 1.0) - d * s2 * s2;
    let c3 = -2.0 * d * (w2 - params.w_e) * s2;
    let c2 = (s2 / ell) * (2.0 * (ell + d - 1.0) * w2 - (ell + d + ell * r - r));
    let c4 = -2.0 * s2 * s2;
    // slopes solve c2 c^2 + (c4 - c1) c - c3 = 0
    let disc = (c4 - c1) * (c4 - c1) + 4.0 * c2 * c3;
    if disc <= 0.0 {
        return Err(Error::DegenerateSlopes { disc });
    }
    let sq = disc.sqrt();
    let ra = (-(c4 - c1) + sq) / (2.0 * c2);
    let rb = (-(c4 - c1) - sq) / (2.0 * c2);
    let (c_minus, c_plus) = if ra < rb { (ra, rb) } else { (rb, ra) };
    let lambda_plus = c2 * c_minus + c4;
    let lambda_minus = c2 * c_plus + c4;
    Ok(SonicPoint {
        w2,
        sigma2: s2,
        c1,
        c2,
        c3,
        c4,
        c_minus,
        c_plus,
        lambda_minus,
        lambda_plus,
        kappa: lambda_plus.abs() / (2.0 * s2),
        branch: Vec::new(),
    })
}

// -- truncated polynomial helpers (coefficients of S^0..S^n) --

fn pmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j <= n {
                c[i + j] += ai * bj;
            }
        }
    }
    c
}

fn paxpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Residual series of Delta2(W(S), S) W'(S) - Delta1(W(S), S) up to order n.
fn branch_residual(a: &[f64], sp: &SonicPoint, params: &ModelParams, n: usize) -> Vec<f64> {
    let d = params.d as f64;
    let (ell, r) = (params.ell, params.r);
    let mut wf = a.to_vec();
    wf[0] += sp.w2; // w = w2 + W
    let mut sf = vec![0.0; n + 1];
    sf[0] = sp.sigma2;
    sf[1] = 1.0; // sigma = sigma2 + S
    let mut wm1 = wf.clone();
    wm1[0] -= 1.0;
    let mut wmr = wf.clone();
    wmr[0] -= r;
    let mut wmwe = wf.clone();
    wmwe[0] -= params.w_e;
    let s2 = pmul(&sf, &sf, n);
    // Delta1 = w (w-1)(w-r) - d (w - w_e) sigma^2
    let mut d1 = pmul(&pmul(&wf, &wm1, n), &wmr, n);
    paxpy(&mut d1, -d, &pmul(&wmwe, &s2, n));
    // Delta2 = (sigma/ell) [(ell+d-1) w^2 - (ell+d+ell r-r) w + ell r - ell sigma^2]
    let mut inner = pmul(&wf, &wf, n);
    for v in inner.iter_mut() {
        *v *= ell + d - 1.0;
    }
    paxpy(&mut inner, -(ell + d + ell * r - r), &wf);
    paxpy(&mut inner, -ell, &s2);
    inner[0] += ell * r;
    let mut d2 = pmul(&sf, &inner, n);
    for v in d2.iter_mut() {
        *v /= ell;
    }
    let mut wp = vec![0.0; n + 1];
    for m in 1..=n {
        wp[m - 1] = m as f64 * a[m];
    }
    let mut res = pmul(&d2, &wp, n);
    paxpy(&mut res, -1.0, &d1);
    res
}

/// Coefficients a_m of the smooth branch W(S) = c_minus S + sum_{m>=2} a_m S^m
/// through P2, by order-matching in dw/dsigma = Delta1/Delta2. The matching
/// equation at order m has pivot m*lambda_+ - lambda_-, which degenerates at
/// the eigenvalue-ratio resonance.
pub fn branch_series(sp: &SonicPoint, params: &ModelParams, order: usize) -> Result<Vec<f64>> {
    let mut a = vec![0.0; order + 1];
    a[1] = sp.c_minus;
    for m in 2..=order {
        let r0 = branch_residual(&a, sp, params, order)[m];
        let mut probe = a.clone();
        probe[m] = 1.0;
        let r1 = branch_residual(&probe, sp, params, order)[m];
        let pivot = r1 - r0;
        if pivot.abs() < 1e-10 * (1.0 + r0.abs()) {
            return Err(Error::ResonantOrder { order: m, pivot });
        }
        a[m] = -r0 / pivot;
        if !a[m].is_finite() || a[m].abs() > 1e12 {
            return Err(Error::SeriesDiverged { order: m, magnitude: a[m].abs() });
        }
    }
    Ok(a)
}

/// Fill in the branch series on a linearized sonic point.
pub fn with_branch(mut sp: SonicPoint, params: &ModelParams, order: usize) -> Result<SonicPoint> {
    sp.branch = branch_series(&sp, params, order)?;
    Ok(sp)
}

impl SonicPoint {
    /// W(S) on the smooth branch.
    pub fn branch_w(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &am in self.branch.iter().rev() {
            acc = acc * s + am;
        }
        acc
    }

    /// W'(S) on the smooth branch.
    pub fn branch_dw(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for m in (1..self.branch.len()).rev() {
            v = v * s + m as f64 * self.branch[m];
        }
        v
    }

    /// dx/dSigma = -Delta/Delta2 along the branch (finite at S = 0).
    pub fn branch_dxds(&self, s: f64, params: &ModelParams) -> f64 {
        if s.abs() < 1e-13 {
            return 2.0 * self.sigma2 * (1.0 + self.c_minus) / self.lambda_plus;
        }
        let w = self.w2 + self.branch_w(s);
        let sg = self.sigma2 + s;
        let det = determinants(w, sg, params);
        -det.delta / det.delta2
    }

    /// x-offset from P2 to the branch point at Sigma = s, by Gauss-Legendre
    /// quadrature of dx/dSigma.
    pub fn branch_x_offset(&self, s: f64, params: &ModelParams) -> f64 {
        // 16-point Gauss-Legendre on [0, s]
        const XG: [f64; 8] = [
            0.09501250983763744,
            0.2816035507792589,
            0.45801677765722739,
            0.61787624440264375,
            0.755404408355003,
            0.86563120238783174,
            0.94457502307323258,
            0.98940093499164993,
        ];
        const WG: [f64; 8] = [
            0.18945061045506850,
            0.18260341504492359,
            0.16915651939500254,
            0.14959598881657673,
            0.12462897125553387,
            0.09515851168249278,
            0.06225352393864789,
            0.02715245941175409,
        ];
        let half = 0.5 * s;
        let mut acc = 0.0;
        for i in 0..8 {
            for sg in [-XG[i], XG[i]] {
                acc += WG[i] * self.branch_dxds(half + half * sg, params);
            }
        }
        acc * half
    }
}
