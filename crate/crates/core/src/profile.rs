//! Shooting from the origin, the sonic-point miss function, the speed scan,
//! and the globally continued profile with far-field fits.
//!
//! The integration runs in a regularized time s with
//! (x, w, sigma)' = orient * (-Delta, Delta1, Delta2), which is smooth across
//! the sonic line; orient = +1 inside the acoustic cone (Delta < 0) and -1
//! beyond it, so that x = log Z always increases along the run.

use crate::error::{Error, Result};
use crate::ode::{integrate, Direction, Event, OdeOptions, State, Trajectory};
use crate::origin::{origin_series, OriginSeries};
use crate::params::{determinants, ModelParams};
use crate::sonic::{find_sonic_points, linearize_at_p2, with_branch, SonicPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// lower end of emitted grids and of the Psi quadrature
    pub z0: f64,
    /// integration start and series/trajectory handoff radius; the origin
    /// series is exact to roundoff well beyond it
    pub z_start: f64,
    /// outer radius of the continued profile
    pub z_max: f64,
    /// origin series order (highest power of Z)
    pub origin_order: usize,
    /// branch series order at P2
    pub branch_order: usize,
    /// |Delta| level at which the incoming leg hands off to the branch series
    pub eps_stop: f64,
    /// Sigma offset at which integration restarts on the outgoing side
    pub delta_branch: f64,
    /// relative integrator tolerance
    pub rtol: f64,
    /// minimal sonic-line clearance accepted on the outgoing leg
    pub clearance_min: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            z0: 1e-3,
            z_start: 2e-2,
            z_max: 1e4,
            origin_order: 6,
            branch_order: 12,
            eps_stop: 1e-10,
            delta_branch: 1e-3,
            rtol: 1e-12,
            clearance_min: 1e-4,
        }
    }
}

fn field_in(p: &ModelParams) -> impl Fn(&State) -> State + '_ {
    move |y: &State| {
        let det = determinants(y[1], y[2], p);
        [-det.delta, det.delta1, det.delta2]
    }
}

fn field_out(p: &ModelParams) -> impl Fn(&State) -> State + '_ {
    move |y: &State| {
        let det = determinants(y[1], y[2], p);
        [det.delta, -det.delta1, -det.delta2]
    }
}

/// Offsets sigma - sigma2 at which incoming checkpoints are recorded for the
/// extrapolation of trajectory quantities to P2.
pub const SIGMA_CHECKPOINTS: [f64; 6] = [1e-2, 3e-3, 1e-3, 1e-4, 3e-5, 1e-5];

/// Incoming leg: origin series start -> first |Delta| = eps_stop approach.
pub struct Incoming {
    pub traj: Trajectory,
    pub series: OriginSeries,
    /// states recorded at sigma - sigma2 = SIGMA_CHECKPOINTS (present when the
    /// leg enters the sonic point)
    pub checkpoints: Vec<State>,
    pub stop: State,
}

pub fn shoot_incoming(p: &ModelParams, sigma2: f64, opts: &ProfileOptions) -> Result<Incoming> {
    let series = origin_series(p, opts.origin_order)?;
    let start = series.start(opts.z_start);
    if start.sigma <= 0.0 {
        return Err(Error::NonPositiveDensity { z: opts.z_start, sigma: start.sigma });
    }
    let eps = opts.eps_stop;
    let mut events = vec![
        Event {
            name: "sonic",
            f: Box::new(move |y: &State| determinants(y[1], y[2], p).delta + eps),
            direction: Direction::Rising,
            terminal: true,
        },
        Event {
            name: "vacuum",
            f: Box::new(|y: &State| y[2]),
            direction: Direction::Falling,
            terminal: true,
        },
        Event {
            name: "zmax",
            f: Box::new(|y: &State| y[0] - (1e6f64).ln()),
            direction: Direction::Rising,
            terminal: true,
        },
    ];
    for (i, &cp) in SIGMA_CHECKPOINTS.iter().enumerate() {
        let name: &'static str = ["cp0", "cp1", "cp2", "cp3", "cp4", "cp5"][i];
        events.push(Event {
            name,
            f: Box::new(move |y: &State| y[2] - sigma2 - cp),
            direction: Direction::Falling,
            terminal: false,
        });
    }
    // a tighter tolerance on this leg keeps the accepted-step error kinks of
    // the sampled fields below the 4th-order FD floor of downstream checks
    let ode_opts = OdeOptions {
        rtol: 0.1 * opts.rtol,
        atol: 0.1 * opts.rtol,
        h_init: 1e-6,
        max_steps: 8_000_000,
        step_subdivide: 0.125,
    };
    let traj = integrate(field_in(p), [start.x, start.w, start.sigma], 1e5, &events, &ode_opts)?;
    if traj.hit("sonic").is_none() {
        return Err(Error::NoSonicPoint { r: p.r });
    }
    let stop = traj.y_end;
    let checkpoints = (0..SIGMA_CHECKPOINTS.len())
        .filter_map(|i| traj.hit(["cp0", "cp1", "cp2", "cp3", "cp4", "cp5"][i]).map(|h| h.y))
        .collect();
    Ok(Incoming { traj, series, checkpoints, stop })
}

/// How the continued (outgoing) leg ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutgoingFate {
    /// re-crossed the sonic line (fold; no global profile)
    Recross,
    /// reached z_max with a clean run to the far field
    FarField,
}

pub struct Outgoing {
    /// forward continuation from the branch series; prone to peeling off the
    /// smooth branch (the fast mode amplifies noise) but decides the fate
    pub forward: Trajectory,
    /// backward-integrated leg from the far-field anchor down to the branch
    /// handoff; contracts onto the smooth branch and carries the usable fields
    pub traj: Trajectory,
    pub fate: OutgoingFate,
    /// minimal sonic-line clearance ((1-w) - sigma)/sqrt(2) past the departure zone
    pub clearance: f64,
    /// state at the end of the forward leg (re-crossing point or z_max state)
    pub stop: State,
    /// |w(backward) - w(series)| at the handoff offset
    pub handoff_mismatch: f64,
}

/// Forward continuation from the branch series at Sigma = -delta_branch: the
/// run that decides the fate (fold vs far field). Its fields past the node
/// are NOT the smooth branch — the fast mode amplifies noise off it.
pub fn continue_forward(
    p: &ModelParams,
    sp: &SonicPoint,
    x2: f64,
    opts: &ProfileOptions,
) -> Result<(Trajectory, OutgoingFate)> {
    let s0 = -opts.delta_branch;
    let w0 = sp.w2 + sp.branch_w(s0);
    let sg0 = sp.sigma2 + s0;
    let x0 = x2 + sp.branch_x_offset(s0, p);
    let x_stop = opts.z_max.ln();
    let events = vec![
        Event {
            name: "recross",
            f: Box::new(move |y: &State| determinants(y[1], y[2], p).delta - 1e-12),
            direction: Direction::Falling,
            terminal: true,
        },
        Event {
            name: "wone",
            f: Box::new(|y: &State| y[1] - 1.0),
            direction: Direction::Rising,
            terminal: true,
        },
        Event {
            name: "zmax",
            f: Box::new(move |y: &State| y[0] - x_stop),
            direction: Direction::Rising,
            terminal: true,
        },
    ];
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.rtol * 1e-2,
        h_init: 1e-6,
        max_steps: 4_000_000,
        step_subdivide: 1.0,
    };
    let traj = integrate(field_out(p), [x0, w0, sg0], 1e5, &events, &ode_opts)?;
    let fate = if traj.hit("zmax").is_some() && traj.hit("recross").is_none() && traj.hit("wone").is_none()
    {
        OutgoingFate::FarField
    } else {
        OutgoingFate::Recross
    };
    Ok((traj, fate))
}

/// Continue from the branch series out to z_max: the forward run classifies
/// the fate; for far-field runs the usable fields come from a backward
/// integration from the forward run's endpoint, which contracts onto the
/// smooth branch (the backward dynamics is stable).
pub fn continue_outgoing(
    p: &ModelParams,
    sp: &SonicPoint,
    x2: f64,
    opts: &ProfileOptions,
) -> Result<Outgoing> {
    let (forward, fate) = continue_forward(p, sp, x2, opts)?;
    let stop = forward.y_end;
    if fate == OutgoingFate::Recross {
        return Ok(Outgoing {
            traj: forward.clone(),
            forward,
            fate,
            clearance: 0.0,
            stop,
            handoff_mismatch: f64::NAN,
        });
    }
    // Backward leg from the far-field anchor (the forward endpoint). The
    // node attracts backward orbits at the fast rate, so every anchor in the
    // basin collapses onto the same branch curve to roundoff well before the
    // handoff offset; a single backward run therefore carries the usable
    // outgoing fields with no further matching.
    let sigma_stop = sp.sigma2 - opts.delta_branch;
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.rtol * 1e-2,
        h_init: 1e-6,
        max_steps: 8_000_000,
        step_subdivide: 0.125,
    };
    let events = vec![
        Event {
            name: "handoff",
            f: Box::new(move |y: &State| y[2] - sigma_stop),
            direction: Direction::Rising,
            terminal: true,
        },
        Event {
            name: "undershoot",
            f: Box::new(move |y: &State| y[0] - (x2 - 1.0)),
            direction: Direction::Falling,
            terminal: true,
        },
    ];
    let traj = integrate(field_in(p), stop, 1e5, &events, &ode_opts)?;
    if traj.hit("handoff").is_none() {
        return Err(Error::MatchFailure { mismatch: f64::NAN, tol: 0.0 });
    }
    let end = traj.y_end;
    let handoff_mismatch = (end[1] - (sp.w2 + sp.branch_w(end[2] - sp.sigma2))).abs();
    // the optimized anchor (start of the accepted backward orbit) carries the
    // far-field state of the branch member actually used
    let stop = traj.eval(traj.t_start());
    // clearance of the backward (smooth-branch) fields past the departure zone
    let mut clearance = f64::INFINITY;
    let t0 = traj.t_start();
    let n = 4000;
    for i in 0..=n {
        let t = t0 + (traj.t_end - t0) * i as f64 / n as f64;
        let y = traj.eval(t);
        if y[0] > x2 + 0.1 {
            clearance = clearance.min(((1.0 - y[1]) - y[2]) / 2f64.sqrt());
        }
    }
    if !clearance.is_finite() {
        clearance = 0.0;
    }
    Ok(Outgoing { forward, traj, fate, clearance, stop, handoff_mismatch })
}

/// Everything the miss function learns about one shot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissInfo {
    pub r: f64,
    /// signed sonic-line distance: positive when the continued trajectory
    /// re-crosses the sonic line (coordinate gap from P2 along the line),
    /// negative when it runs cleanly to the far field (minus the closest
    /// approach to the line)
    pub miss: f64,
    /// eigenvalue ratio lambda_- / lambda_+ at P2
    pub ratio: f64,
    pub w2: f64,
    pub z2: f64,
    pub fate: OutgoingFate,
    /// true when the incoming leg converged into P2 rather than hitting the
    /// sonic line at a distant point
    pub node_entry: bool,
}

/// Signed coordinate along the sonic line sigma = 1 - w, relative to (w2, 1-w2).
fn line_coordinate(w: f64, sigma: f64, w2: f64) -> f64 {
    ((w - w2) - (sigma - (1.0 - w2))) / 2f64.sqrt()
}

/// x2 from the incoming stop state, correcting the residual Sigma offset
/// along the branch.
pub fn sonic_x2(stop: &State, sp: &SonicPoint, p: &ModelParams) -> f64 {
    let sig_e = stop[2] - sp.sigma2;
    stop[0] - sp.branch_x_offset(sig_e, p)
}

/// The miss function: shoot from the origin through P2 (branch-series
/// restart) and measure the signed sonic-line distance of the continuation.
pub fn miss_function(base: &ModelParams, r: f64, opts: &ProfileOptions) -> Result<MissInfo> {
    let p = base.with_speed(r)?;
    let roots = find_sonic_points(&p)?;
    let sp = with_branch(linearize_at_p2(roots[0], &p)?, &p, opts.branch_order)?;
    let inc = shoot_incoming(&p, sp.sigma2, opts)?;
    let stop = inc.stop;
    // nearest sonic root to the incoming stop
    let nearest = *roots
        .iter()
        .min_by(|&&a, &&b| {
            let da = (stop[1] - a).abs() + (stop[2] - (1.0 - a)).abs();
            let db = (stop[1] - b).abs() + (stop[2] - (1.0 - b)).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let dist_to_p2 = (stop[1] - sp.w2).hypot(stop[2] - sp.sigma2);
    let node_entry = dist_to_p2 < 1e-6;
    if !node_entry {
        // the incoming leg met the sonic line away from P2: geometric miss
        return Ok(MissInfo {
            r,
            miss: line_coordinate(stop[1], stop[2], nearest),
            ratio: sp.lambda_minus / sp.lambda_plus,
            w2: sp.w2,
            z2: stop[0].exp(),
            fate: OutgoingFate::Recross,
            node_entry,
        });
    }
    let x2 = sonic_x2(&stop, &sp, &p);
    let (forward, fate) = continue_forward(&p, &sp, x2, opts)?;
    let miss = match fate {
        OutgoingFate::Recross => line_coordinate(forward.y_end[1], forward.y_end[2], sp.w2),
        OutgoingFate::FarField => {
            // closest approach of the forward orbit to the sonic line
            let mut clearance = f64::INFINITY;
            let t0 = forward.t_start();
            for i in 0..=4000 {
                let t = t0 + (forward.t_end - t0) * i as f64 / 4000.0;
                let y = forward.eval(t);
                if y[0] > x2 + 0.1 {
                    clearance = clearance.min(((1.0 - y[1]) - y[2]) / 2f64.sqrt());
                }
            }
            -clearance.max(0.0)
        }
    };
    Ok(MissInfo {
        r,
        miss,
        ratio: sp.lambda_minus / sp.lambda_plus,
        w2: sp.w2,
        z2: x2.exp(),
        fate,
        node_entry,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRoot {
    /// bracket endpoints after bisection (miss > 0 at lo, miss < 0 at hi)
    pub r_lo: f64,
    pub r_hi: f64,
    pub miss_lo: f64,
    pub miss_hi: f64,
    /// validated speed promoted for downstream use (smallest clean candidate >= r_hi)
    pub r_hat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedScan {
    pub samples: Vec<MissInfo>,
    pub roots: Vec<ScanRoot>,
    /// speeds where lambda_-/lambda_+ crosses an integer (smooth-passage
    /// resonances; they accumulate at r_star from below)
    pub resonances: Vec<(u32, f64)>,
}

/// Sample the miss over (2 + eps, r_star - eps), bracket its sign changes,
/// refine each bracket by bisection to width `tol`, and validate a usable
/// far-field speed per root.
pub fn scan_speeds(base: &ModelParams, n_grid: usize, tol: f64, opts: &ProfileOptions) -> Result<SpeedScan> {
    let eps = 1e-3;
    let (lo, hi) = (2.0 + eps, base.r_star - eps);
    let rs: Vec<f64> = (0..n_grid)
        .map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64)
        .collect();
    let samples: Vec<MissInfo> = rs
        .par_iter()
        .map(|&r| miss_function(base, r, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    for pair in samples.windows(2) {
        let (m0, m1) = (&pair[0], &pair[1]);
        if m0.miss > 0.0 && m1.miss < 0.0 {
            let (mut rl, mut rh) = (m0.r, m1.r);
            let (mut ml, mut mh) = (m0.miss, m1.miss);
            while rh - rl > tol {
                let rm = 0.5 * (rl + rh);
                let mm = miss_function(base, rm, opts)?;
                if mm.miss > 0.0 {
                    rl = rm;
                    ml = mm.miss;
                } else {
                    rh = rm;
                    mh = mm.miss;
                }
            }
            // promote the smallest validated clean speed at or above r_hi
            let mut r_hat = rh;
            let mut step = tol;
            let mut found = false;
            for _ in 0..40 {
                if validate_speed(base, r_hat, opts).is_ok() {
                    found = true;
                    break;
                }
                r_hat = rh + step;
                step *= 2.0;
                if r_hat >= base.r_star - 1e-9 {
                    break;
                }
            }
            if !found {
                // keep the bracket even if no clean candidate validated
                r_hat = rh;
            }
            roots.push(ScanRoot { r_lo: rl, r_hi: rh, miss_lo: ml, miss_hi: mh, r_hat });
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRootFound { lo, hi });
    }

    // resonance crossings of the eigenvalue ratio (monotone in r)
    let ratio_of = |r: f64| -> Result<f64> {
        let p = base.with_speed(r)?;
        let w2 = find_sonic_points(&p)?[0];
        let sp = linearize_at_p2(w2, &p)?;
        Ok(sp.lambda_minus / sp.lambda_plus)
    };
    let mut resonances = Vec::new();
    // the ratio diverges at r_star; only the desk-scale resonances are kept
    let n_cap = samples.first().map(|s| s.ratio).unwrap_or(2.0).ceil() as i64 + 100;
    for pair in samples.windows(2) {
        let (q0, q1) = (pair[0].ratio, pair[1].ratio);
        let (n0, n1) = (q0.ceil() as i64, (q1.floor() as i64).min(n_cap));
        for n in n0..=n1 {
            let target = n as f64;
            if target < q0 || target > q1 {
                continue;
            }
            let (mut rl, mut rh) = (pair[0].r, pair[1].r);
            while rh - rl > tol {
                let rm = 0.5 * (rl + rh);
                if ratio_of(rm)? < target {
                    rl = rm;
                } else {
                    rh = rm;
                }
            }
            resonances.push((n as u32, 0.5 * (rl + rh)));
        }
    }
    Ok(SpeedScan { samples, roots, resonances })
}

/// Far-field fit data of a continued profile.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FarField {
    pub slope_w: f64,
    pub slope_sigma: f64,
    pub slope_q: f64,
    pub c_w: f64,
    pub c_sigma: f64,
    pub c_p: f64,
    pub c_psi: f64,
    pub psi_infinity: f64,
}

/// A continued profile with all diagnostics.
pub struct Profile {
    pub params: ModelParams,
    pub r_hat: f64,
    pub sonic: SonicPoint,
    pub x2: f64,
    pub z2: f64,
    pub incoming: Incoming,
    pub outgoing: Outgoing,
    pub farfield: FarField,
    /// |dw/dsigma(trajectory) - W'(series)| at the comparison offset
    pub c1_mismatch: f64,
    /// Lambda Delta extrapolated to P2 along the incoming trajectory
    pub lambda_delta_at_z2: f64,
    /// kappa extrapolated to P2 along the incoming trajectory
    pub kappa_trajectory: f64,
    pub opts: ProfileOptions,
}

fn validate_speed(base: &ModelParams, r: f64, opts: &ProfileOptions) -> Result<Profile> {
    let profile = extend_and_fit(base, r, opts)?;
    if profile.outgoing.fate != OutgoingFate::FarField {
        return Err(Error::MatchFailure { mismatch: profile.outgoing.clearance, tol: 0.0 });
    }
    if profile.outgoing.clearance < opts.clearance_min {
        return Err(Error::MatchFailure {
            mismatch: profile.outgoing.clearance,
            tol: opts.clearance_min,
        });
    }
    let rel = (profile.farfield.slope_sigma + r).abs() / r;
    if rel > 0.02 {
        return Err(Error::MatchFailure { mismatch: rel, tol: 0.02 });
    }
    Ok(profile)
}

/// Build the full profile at speed r: origin -> P2 -> branch restart -> z_max,
/// with far-field fits and the P2 matching diagnostics.
pub fn extend_and_fit(base: &ModelParams, r: f64, opts: &ProfileOptions) -> Result<Profile> {
    let p = base.with_speed(r)?;
    let roots = find_sonic_points(&p)?;
    let sp = with_branch(linearize_at_p2(roots[0], &p)?, &p, opts.branch_order)?;
    let inc = shoot_incoming(&p, sp.sigma2, opts)?;
    let dist = (inc.stop[1] - sp.w2).hypot(inc.stop[2] - sp.sigma2);
    if dist > 1e-6 {
        return Err(Error::MatchFailure { mismatch: dist, tol: 1e-6 });
    }
    let x2 = sonic_x2(&inc.stop, &sp, &p);
    let out = continue_outgoing(&p, &sp, x2, opts)?;

    // C1 mismatch at the comparison checkpoint (sigma - sigma2 = 3e-3); closer
    // to the node the direction Delta1/Delta2 amplifies state noise like 1/Sigma
    let c1_mismatch = inc
        .checkpoints
        .iter()
        .find(|y| (y[2] - sp.sigma2 - 3e-3).abs() < 1e-4)
        .map(|y| {
            let det = determinants(y[1], y[2], &p);
            let sig = y[2] - sp.sigma2;
            (det.delta1 / det.delta2 - sp.branch_dw(sig)).abs()
        })
        .unwrap_or(f64::NAN);

    // Lambda Delta and kappa extrapolated to P2 from the checkpoints:
    // linear least squares in Sigma over the three smallest offsets
    let mut pts_ld = Vec::new();
    let mut pts_kp = Vec::new();
    for y in &inc.checkpoints {
        let sig = y[2] - sp.sigma2;
        if sig > 2e-4 {
            continue;
        }
        let det = determinants(y[1], y[2], &p);
        let lw = -det.delta1 / det.delta;
        let ls = -det.delta2 / det.delta;
        let ld = 2.0 * (y[1] - 1.0) * lw - 2.0 * y[2] * ls;
        pts_ld.push((sig, ld));
        let f = y[2] + ls;
        pts_kp.push((sig, 1.0 - y[1] - lw - (1.0 - y[1]) * f / y[2]));
    }
    let extrap = |pts: &[(f64, f64)]| -> f64 {
        if pts.len() < 2 {
            return f64::NAN;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (sy - slope * sx) / n
    };
    let lambda_delta_at_z2 = extrap(&pts_ld);
    let kappa_trajectory = extrap(&pts_kp);

    // far-field fits over the last two decades (or what the run reached);
    // the backward leg spans [handoff, anchor] with x decreasing in time
    let x_hi = out.stop[0];
    let x_lo = (x_hi - 2.0 * 10f64.ln()).max(x2 + 0.5);
    let m = 256;
    let mut xs = Vec::with_capacity(m);
    let mut lw_abs = Vec::with_capacity(m);
    let mut ls_v = Vec::with_capacity(m);
    for i in 0..m {
        let x = x_lo + (x_hi - x_lo) * i as f64 / (m - 1) as f64;
        if let Some((_, y)) = out.traj.solve_component(0, x) {
            xs.push(x);
            lw_abs.push(y[1].abs().max(1e-300).ln());
            ls_v.push(y[2].max(1e-300).ln());
        }
    }
    let fit_slope = |ys: &[f64]| -> f64 {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let slope_w = fit_slope(&lw_abs);
    let slope_sigma = fit_slope(&ls_v);
    let slope_q = 2.0 + 2.0 * slope_sigma;

    let end = out.stop;
    let z_end = end[0].exp();
    let c_w = end[1] * z_end.powf(p.r);
    let c_sigma = end[2] * z_end.powf(p.r);
    let rho_end = (p.phi * z_end * end[2]).powf(p.ell / 2.0);
    let c_p = rho_end * z_end.powf(2.0 * (p.r - 1.0) / (p.p as f64 - 1.0));

    // Psi_P by composite quadrature: series head + incoming leg + branch zone
    // + outgoing leg + analytic far tail
    let psi_end = psi_up_to_end(&p, &sp, &inc, &out, x2, opts);
    let psi_tail = -(p.mu / 2.0) * end[1] * z_end * z_end / (p.r - 2.0);
    let psi_infinity = psi_end + psi_tail;
    let c_psi = -psi_tail * z_end.powf(p.r - 2.0);

    let farfield = FarField {
        slope_w,
        slope_sigma,
        slope_q,
        c_w,
        c_sigma,
        c_p,
        c_psi,
        psi_infinity,
    };
    Ok(Profile {
        params: p,
        r_hat: r,
        sonic: sp,
        x2,
        z2: x2.exp(),
        incoming: inc,
        outgoing: out,
        farfield,
        c1_mismatch,
        lambda_delta_at_z2,
        kappa_trajectory,
        opts: *opts,
    })
}

/// Simpson quadrature of dPsi/dx = -(mu/2) Z^2 w over both legs plus the
/// series head and the branch zone.
fn psi_up_to_end(
    p: &ModelParams,
    sp: &SonicPoint,
    inc: &Incoming,
    out: &Outgoing,
    x2: f64,
    opts: &ProfileOptions,
) -> f64 {
    let integrand = |traj: &Trajectory, x: f64| -> f64 {
        let y = traj
            .solve_component(0, x)
            .map(|(_, y)| y)
            .unwrap_or(traj.y_end);
        -(p.mu / 2.0) * (2.0 * x).exp() * y[1]
    };
    let simpson = |traj: &Trajectory, a: f64, b: f64, n: usize| -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut acc = integrand(traj, a) + integrand(traj, b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(traj, a + h * i as f64);
        }
        acc * h / 3.0
    };
    let head = inc.series.psi_at(opts.z_start, p);
    // incoming leg stops at the handoff offset Sigma = delta_branch
    let x_hand_in = inc
        .traj
        .solve_component(2, sp.sigma2 + opts.delta_branch)
        .map(|(_, y)| y[0])
        .unwrap_or(inc.stop[0]);
    let body_in = simpson(&inc.traj, opts.z_start.ln(), x_hand_in, 4000);
    // branch zone: dPsi/dSigma = -(mu/2) Z^2 (w2 + W) dx/dSigma, Gauss on
    // [delta_branch, -delta_branch]
    let branch_piece = {
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
        let a = opts.delta_branch;
        let b = -opts.delta_branch;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let f = |s: f64| {
            let w = sp.w2 + sp.branch_w(s);
            let x = x2 + sp.branch_x_offset(s, p);
            -(p.mu / 2.0) * (2.0 * x).exp() * w * sp.branch_dxds(s, p)
        };
        let mut acc = 0.0;
        for i in 0..8 {
            acc += WG[i] * (f(mid + half * XG[i]) + f(mid - half * XG[i]));
        }
        acc * half
    };
    let x_hand_out = out
        .traj
        .solve_component(2, sp.sigma2 - opts.delta_branch)
        .map(|(_, y)| y[0])
        .unwrap_or(out.traj.y_end[0]);
    let body_out = simpson(&out.traj, x_hand_out, out.stop[0], 6000);
    head + body_in + branch_piece + body_out
}

impl Profile {
    /// (w, sigma, Lambda w, Lambda sigma) at x = log Z, using the origin
    /// series, the dense trajectories, the branch series near P2, and the
    /// seam-matched far-field power laws beyond the grid.
    pub fn state(&self, x: f64) -> (f64, f64, f64, f64) {
        let p = &self.params;
        let x0 = self.opts.z_start.ln();
        if x <= x0 {
            let z = x.exp();
            let (w, s) = self.incoming.series.eval(z);
            let (lw, ls) = self.incoming.series.eval_lambda(z);
            return (w, s, lw, ls);
        }
        let sp = &self.sonic;
        let dx_in = sp.branch_x_offset(self.opts.delta_branch, p).abs();
        let dx_out = sp.branch_x_offset(-self.opts.delta_branch, p).abs();
        if x >= self.x2 - dx_in && x <= self.x2 + dx_out {
            // branch zone: invert x(Sigma) by bisection
            let (mut s_lo, mut s_hi) = (self.opts.delta_branch, -self.opts.delta_branch);
            for _ in 0..80 {
                let sm = 0.5 * (s_lo + s_hi);
                if self.x2 + sp.branch_x_offset(sm, p) < x {
                    s_lo = sm;
                } else {
                    s_hi = sm;
                }
            }
            let s = 0.5 * (s_lo + s_hi);
            let w = sp.w2 + sp.branch_w(s);
            let sg = sp.sigma2 + s;
            let dxds = sp.branch_dxds(s, p);
            return (w, sg, sp.branch_dw(s) / dxds, 1.0 / dxds);
        }
        let x_end = self.outgoing.stop[0];
        if x > x_end {
            // seam-matched far-field power law
            let y = self.outgoing.stop;
            let decay = (-(p.r) * (x - x_end)).exp();
            let (w, s) = (y[1] * decay, y[2] * decay);
            return (w, s, -p.r * w, -p.r * s);
        }
        let traj = if x < self.x2 { &self.incoming.traj } else { &self.outgoing.traj };
        let y = traj
            .solve_component(0, x)
            .map(|(_, y)| y)
            .unwrap_or(traj.y_end);
        let det = determinants(y[1], y[2], p);
        (y[1], y[2], -det.delta1 / det.delta, -det.delta2 / det.delta)
    }

    /// Second log-derivatives by central differencing of the exact first ones.
    pub fn state2(&self, x: f64) -> (f64, f64) {
        let h = 5e-4;
        let mut lw = [0.0; 4];
        let mut ls = [0.0; 4];
        for (i, dx) in [-2.0 * h, -h, h, 2.0 * h].iter().enumerate() {
            let (_, _, a, b) = self.state(x + dx);
            lw[i] = a;
            ls[i] = b;
        }
        let d = |v: [f64; 4]| (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h);
        (d(lw), d(ls))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn base() -> ModelParams {
        make_params(9, 3, 2.1).unwrap()
    }

    #[test]
    fn miss_is_fold_at_low_r() {
        let opts = ProfileOptions::default();
        let m = miss_function(&base(), 2.05, &opts).unwrap();
        assert!(m.node_entry, "incoming leg should converge into P2");
        assert_eq!(m.fate, OutgoingFate::Recross);
        assert!(m.miss > 0.0);
    }

    #[test]
    fn miss_is_far_near_rstar() {
        let opts = ProfileOptions::default();
        let m = miss_function(&base(), 2.19, &opts).unwrap();
        assert!(m.node_entry);
        assert_eq!(m.fate, OutgoingFate::FarField);
        assert!(m.miss < 0.0);
    }

    #[test]
    fn profile_at_clean_speed() {
        let opts = ProfileOptions::default();
        let prof = extend_and_fit(&base(), 2.19, &opts).unwrap();
        assert!(prof.outgoing.fate == OutgoingFate::FarField);
        // far-field exponents
        assert!((prof.farfield.slope_sigma + 2.19).abs() / 2.19 < 0.02);
        assert!((prof.farfield.slope_q + 2.0 * 1.19).abs() / (2.0 * 1.19) < 0.02);
        // Psi(inf) ~ 1/e
        let e = prof.params.e;
        assert!(
            (prof.farfield.psi_infinity - 1.0 / e).abs() * e < 0.01,
            "psi_inf = {} vs 1/e = {}",
            prof.farfield.psi_infinity,
            1.0 / e
        );
        // C1 matching at Z2 and the two-route Lambda Delta check
        assert!(prof.c1_mismatch < 1e-6, "c1 mismatch {}", prof.c1_mismatch);
        let rel = (prof.lambda_delta_at_z2 - prof.sonic.lambda_plus.abs()).abs()
            / prof.sonic.lambda_plus.abs();
        assert!(rel < 1e-4, "LambdaDelta rel err {}", rel);
        // kappa two ways
        assert!(
            (prof.kappa_trajectory - prof.sonic.kappa).abs() < 1e-6,
            "kappa {} vs {}",
            prof.kappa_trajectory,
            prof.sonic.kappa
        );
        // positivity: sigma > 0 and w < 1 globally; w >= 0 inside the cone
        for i in 0..400 {
            let x = (1e-3f64).ln() + (prof.outgoing.stop[0] - (1e-3f64).ln()) * i as f64 / 399.0;
            let (w, s, _, _) = prof.state(x);
            assert!(s > 0.0 && w < 1.0);
            if x <= prof.x2 {
                assert!(w >= 0.0);
            }
        }
    }
}
