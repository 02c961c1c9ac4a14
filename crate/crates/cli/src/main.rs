//! Command-line front end: parameter algebra, speed scans, profile solves,
//! pointwise verification, cone spectra, flow simulation and SVG plots, each
//! run leaving a reproducibility manifest next to its outputs.

mod manifest;
mod svg;

use anyhow::Context;
use blowuplab_core::error::Error as CoreError;
use blowuplab_core::io::fmt_f64;
use blowuplab_core::{accretivity, euler, fields, flow, io, profile, verification};
use blowuplab_core::{make_params, ModelParams, ProfileOptions};
use clap::{Args, Parser, Subcommand};
use manifest::ManifestBuilder;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "blowuplab", version, about = "Self-similar blow-up profile laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// space dimension
    #[arg(short = 'd', long, default_value_t = 9)]
    dim: u32,
    /// odd integer nonlinearity exponent
    #[arg(short = 'p', long, default_value_t = 3)]
    power: u32,
    /// blow-up speed r in (2, r_star)
    #[arg(short = 'r', long)]
    speed: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the derived parameter bundle and admissibility
    Params(ParamArgs),
    /// Scan blow-up speeds, bracket the admissible threshold, emit scan.csv + roots.json
    Scan {
        #[command(flatten)]
        pa: ParamArgs,
        /// number of scan samples
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// bisection width for roots
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value = "out/scan")]
        out: PathBuf,
    },
    /// Solve the profile at a given speed and emit profile.csv + manifest
    Solve {
        #[command(flatten)]
        pa: ParamArgs,
        /// output grid nodes
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long, default_value = "out/solve")]
        out: PathBuf,
    },
    /// Verify pointwise conditions on a profile CSV, emit verify.json
    Verify {
        #[command(flatten)]
        pa: ParamArgs,
        /// profile CSV produced by `solve`
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value = "out/verify")]
        out: PathBuf,
    },
    /// Shifted-cone measure, coefficient floors and discretized spectrum
    Spectrum {
        #[command(flatten)]
        pa: ParamArgs,
        /// cone shift a
        #[arg(long, default_value_t = 0.01)]
        a: f64,
        /// derivative level k
        #[arg(short = 'k', long, default_value_t = 8)]
        k: usize,
        /// eigenproblem grid nodes
        #[arg(long, default_value_t = 500)]
        grid: usize,
        #[arg(long, default_value = "out/spectrum")]
        out: PathBuf,
    },
    /// Front-renormalized flow simulation; emits diag.csv and physical.csv
    Simulate {
        #[command(flatten)]
        pa: ParamArgs,
        #[arg(long, default_value_t = 1e-2)]
        b0: f64,
        #[arg(long = "tau-span", default_value_t = 5.0)]
        tau_span: f64,
        /// spatial grid nodes
        #[arg(long, default_value_t = 3072)]
        grid: usize,
        /// dampening exponent n_P
        #[arg(long = "np", default_value_t = 12)]
        n_p: usize,
        /// interior perturbation amplitude (0 disables)
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        /// keep the undampened profile tail
        #[arg(long)]
        undampened: bool,
        #[arg(long, default_value = "out/simulate")]
        out: PathBuf,
    },
    /// Sobolev growth exponents and Dirichlet-energy margins
    Rates {
        #[command(flatten)]
        pa: ParamArgs,
        /// regularities s to tabulate
        #[arg(long, value_delimiter = ',', default_value = "1.0,2.0,3.0,4.0")]
        s: Vec<f64>,
        #[arg(long, default_value = "out/rates")]
        out: PathBuf,
    },
    /// Compressible-Euler dictionary and system-equivalence residual
    EulerCompare {
        /// adiabatic exponent
        #[arg(long)]
        gamma: f64,
        /// NLS speed to match
        #[arg(long = "match-r")]
        match_r: f64,
        #[arg(short = 'd', long, default_value_t = 9)]
        dim: u32,
        #[arg(short = 'p', long, default_value_t = 3)]
        power: u32,
    },
    /// Render SVG plots from previously produced CSV files
    Plot {
        /// directory holding scan.csv / profile.csv / diag.csv / physical.csv
        #[arg(long, default_value = "out")]
        from: PathBuf,
        #[arg(long, default_value = "out/plots")]
        out: PathBuf,
        #[command(flatten)]
        pa: ParamArgs,
    },
}

fn main() {
    // usage errors exit with 64
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    std::process::exit(0);
                }
                _ => 64,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Ok(threads) = std::env::var("BLOWUPLAB_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<CoreError>()
                .map(|ce| match ce {
                    CoreError::InadmissibleDimension { .. } | CoreError::SpeedOutOfRange { .. } => 1,
                    CoreError::MissingInput(_) | CoreError::Parse(_) => 1,
                    _ => 2,
                })
                .unwrap_or(2);
            std::process::exit(code);
        }
    }
}

fn params_of(pa: &ParamArgs) -> anyhow::Result<ModelParams> {
    let r = pa.speed.unwrap_or_else(|| {
        // a mid-window default when no speed is requested
        let ell = 4.0 / (pa.power as f64 - 1.0);
        2.0 + 0.5 * (blowuplab_core::r_star(pa.dim, ell) - 2.0)
    });
    Ok(make_params(pa.dim, pa.power, r)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Params(pa) => {
            let p = params_of(&pa)?;
            println!("d        = {}", p.d);
            println!("p        = {}", p.p);
            println!("ell      = {}", fmt_f64(p.ell));
            println!("r        = {}", fmt_f64(p.r));
            println!("e        = {}", fmt_f64(p.e));
            println!("mu       = {}", fmt_f64(p.mu));
            println!("phi      = {}", fmt_f64(p.phi));
            println!("r_star   = {}", fmt_f64(p.r_star));
            println!("w_e      = {}", fmt_f64(p.w_e));
            println!("admissible = true");
            Ok(())
        }
        Cmd::Scan { pa, grid, tol, out } => cmd_scan(&pa, grid, tol, &out),
        Cmd::Solve { pa, grid, out } => cmd_solve(&pa, grid, &out),
        Cmd::Verify { pa, profile, out } => cmd_verify(&pa, &profile, &out),
        Cmd::Spectrum { pa, a, k, grid, out } => cmd_spectrum(&pa, a, k, grid, &out),
        Cmd::Simulate { pa, b0, tau_span, grid, n_p, perturb, undampened, out } => {
            cmd_simulate(&pa, b0, tau_span, grid, n_p, perturb, !undampened, &out)
        }
        Cmd::Rates { pa, s, out } => cmd_rates(&pa, &s, &out),
        Cmd::EulerCompare { gamma, match_r, dim, power } => cmd_euler(gamma, match_r, dim, power),
        Cmd::Plot { from, out, pa } => cmd_plot(&from, &out, &pa),
    }
}

fn base_params(pa: &ParamArgs) -> anyhow::Result<ModelParams> {
    let ell = 4.0 / (pa.power as f64 - 1.0);
    let mid = 2.0 + 0.5 * (blowuplab_core::r_star(pa.dim, ell) - 2.0);
    Ok(make_params(pa.dim, pa.power, mid)?)
}

fn cmd_scan(pa: &ParamArgs, grid: usize, tol: f64, out: &std::path::Path) -> anyhow::Result<()> {
    let base = base_params(pa)?;
    let opts = ProfileOptions::default();
    let mut mb = ManifestBuilder::new(out);
    mb.params(base)
        .setting("grid", grid)
        .setting("tol", tol)
        .setting("profile_options", opts);
    let scan = profile::scan_speeds(&base, grid, tol, &opts)?;
    let mut csv = String::from("r,miss,ratio,offset\n");
    for s in &scan.samples {
        let offset = s.ratio - s.ratio.round();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(s.r),
            fmt_f64(s.miss),
            fmt_f64(s.ratio),
            fmt_f64(offset)
        ));
    }
    mb.emit("scan.csv", &csv)?;
    mb.emit(
        "roots.json",
        &serde_json::to_string_pretty(&serde_json::json!({
            "roots": scan.roots,
            "resonances": scan
                .resonances
                .iter()
                .map(|(n, r)| serde_json::json!({"n": n, "r": r}))
                .collect::<Vec<_>>(),
        }))?,
    )?;
    for root in &scan.roots {
        println!(
            "root: bracket [{}, {}], width {:.2e}, promoted r_hat = {}",
            fmt_f64(root.r_lo),
            fmt_f64(root.r_hi),
            root.r_hi - root.r_lo,
            fmt_f64(root.r_hat)
        );
    }
    println!("{} resonance speeds recorded", scan.resonances.len());
    mb.finish()
}

fn cmd_solve(pa: &ParamArgs, grid: usize, out: &std::path::Path) -> anyhow::Result<()> {
    let pr = params_of(pa)?;
    let opts = ProfileOptions::default();
    let mut mb = ManifestBuilder::new(out);
    mb.params(pr).setting("grid", grid).setting("profile_options", opts);
    let prof = profile::extend_and_fit(&pr, pr.r, &opts)?;
    let f = fields::emden_to_physical(&prof, opts.z0, opts.z_max, grid)?;
    let mut csv = Vec::new();
    io::write_profile_csv(&mut csv, &f)?;
    mb.emit("profile.csv", std::str::from_utf8(&csv)?)?;
    mb.setting("z2", prof.z2)
        .setting("sonic", &prof.sonic)
        .setting("farfield", prof.farfield)
        .setting("c1_mismatch", prof.c1_mismatch)
        .setting("lambda_delta_at_z2", prof.lambda_delta_at_z2)
        .setting("kappa_trajectory", prof.kappa_trajectory)
        .setting("outgoing_fate", format!("{:?}", prof.outgoing.fate))
        .setting("outgoing_clearance", prof.outgoing.clearance)
        .setting("handoff_mismatch", prof.outgoing.handoff_mismatch);
    println!(
        "solved r = {}: Z2 = {}, kappa = {}, sigma slope {} (expected {})",
        fmt_f64(pr.r),
        fmt_f64(prof.z2),
        fmt_f64(prof.sonic.kappa),
        fmt_f64(prof.farfield.slope_sigma),
        fmt_f64(-pr.r)
    );
    mb.finish()
}

fn cmd_verify(pa: &ParamArgs, csv: &std::path::Path, out: &std::path::Path) -> anyhow::Result<()> {
    let pr = params_of(pa)?;
    if !csv.exists() {
        return Err(CoreError::MissingInput(csv.display().to_string()).into());
    }
    let file = std::fs::File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let f = io::read_profile_csv(std::io::BufReader::new(file), pr)?;
    let rep = verification::check_repulsivity(&f)?;
    let quad = verification::quadratic_form_floor(&f)?;
    let rates = verification::sobolev_rates(&pr, &[1.0, 2.0, 3.0]);
    let h1 = verification::h1_boundedness_check(&pr, pr.r);
    let kappa_expected = {
        let roots = blowuplab_core::sonic::find_sonic_points(&pr)?;
        blowuplab_core::sonic::linearize_at_p2(roots[0], &pr)?.kappa
    };
    let pass = rep.certified_inside_quad > 0.0
        && rep.certified_inside_linear > 0.0
        && rep.certified_outside_quad > 0.0
        && rep.certified_outside_linear > 0.0
        && rep.min_rho > 0.0
        && quad.identity_residual < 1e-8;
    let doc = serde_json::json!({
        "repulsivity": rep,
        "quadratic_form": quad,
        "rates": rates,
        "h1_boundedness": h1,
        "kappa_direct": rep.kappa_direct,
        "kappa_expected": kappa_expected,
        "pass": pass,
    });
    let mut mb = ManifestBuilder::new(out);
    mb.params(pr);
    mb.emit("verify.json", &serde_json::to_string_pretty(&doc)?)?;
    println!(
        "repulsivity minima: inside ({:.6}, {:.6}) outside ({:.6}, {:.6}); identity residual {:.2e}; pass = {pass}",
        rep.inside_quad,
        rep.inside_linear,
        rep.outside_quad,
        rep.outside_linear,
        quad.identity_residual
    );
    mb.finish()
}

fn cmd_spectrum(pa: &ParamArgs, a: f64, k: usize, grid: usize, out: &std::path::Path) -> anyhow::Result<()> {
    let pr = params_of(pa)?;
    let opts = ProfileOptions::default();
    let prof = profile::extend_and_fit(&pr, pr.r, &opts)?;
    let geom = accretivity::shifted_root(&prof, a)?;
    let coeffs = accretivity::coefficient_floors(&prof, &geom, k, 4000)?;
    let meas = accretivity::build_measure(&prof, &geom, k, 4000)?;
    let spec = accretivity::discrete_spectrum(&prof, &geom, k, grid)?;
    let mut mb = ManifestBuilder::new(out);
    mb.params(pr)
        .setting("a", a)
        .setting("k", k)
        .setting("grid", grid)
        .setting("z2", prof.z2)
        .setting("z_a", geom.z_a)
        .setting("c_g", meas.c_g)
        .setting("c_g_analytic", meas.c_g_analytic)
        .setting("floors", &coeffs.report);
    let mut csv = String::from("Z,D_a,g,G,A5,A6\n");
    for i in 0..coeffs.z.len() {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(coeffs.z[i]),
            fmt_f64(coeffs.d_a[i]),
            fmt_f64(coeffs.g_log[i].exp()),
            fmt_f64(coeffs.g_source[i]),
            fmt_f64(coeffs.a5[i]),
            fmt_f64(coeffs.a6[i])
        ));
    }
    mb.emit("measure.csv", &csv)?;
    let doc = serde_json::json!({
        "eigenvalues": spec.eigenvalues.iter().take(200).collect::<Vec<_>>(),
        "unstable_count": spec.unstable_count,
        "bulk_re_q90": spec.bulk_re_q90,
        "c_fit": spec.c_fit,
        "floors": coeffs.report,
        "c_g": meas.c_g,
        "c_g_analytic": meas.c_g_analytic,
    });
    mb.emit("spectrum.json", &serde_json::to_string_pretty(&doc)?)?;
    println!(
        "Z_a = {:.6}; c_g = {:.4} (analytic {:.4}); floors A5 = {:.4}, A6 = {:.4}; unstable = {}; bulk q90 = {:.4}",
        geom.z_a,
        meas.c_g,
        meas.c_g_analytic,
        coeffs.report.floor_a5,
        coeffs.report.floor_a6,
        spec.unstable_count,
        spec.bulk_re_q90
    );
    mb.finish()
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    pa: &ParamArgs,
    b0: f64,
    tau_span: f64,
    grid: usize,
    n_p: usize,
    perturb: f64,
    dampened: bool,
    out: &std::path::Path,
) -> anyhow::Result<()> {
    let pr = params_of(pa)?;
    let opts = ProfileOptions::default();
    let prof = profile::extend_and_fit(&pr, pr.r, &opts)?;
    let perturbation = (perturb != 0.0).then(|| flow::Bump {
        amplitude: perturb,
        z_lo: 0.2 * prof.z2,
        z_hi: 0.8 * prof.z2,
    });
    let cfg = flow::SimConfig {
        b0,
        tau_span,
        n_grid: grid,
        n_p,
        dampened,
        perturbation,
        ..Default::default()
    };
    let mut mb = ManifestBuilder::new(out);
    mb.params(pr).setting("config", &cfg).setting("z2", prof.z2);
    let sim = flow::Simulator::new(&prof, cfg)?;
    let recs = sim.run()?;
    let mut csv = String::from(
        "tau,b,zstar,min_rho,sup_rel,h1_inner,h0_local,h1_local,h2_local,h3_local,h4_local,I0,I1,I2,max_rho\n",
    );
    for c in &recs {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(c.tau),
            fmt_f64(c.b),
            fmt_f64(c.zstar),
            fmt_f64(c.min_rho),
            fmt_f64(c.sup_rel),
            fmt_f64(c.h1_inner),
            fmt_f64(c.hk_local[0]),
            fmt_f64(c.hk_local[1]),
            fmt_f64(c.hk_local[2]),
            fmt_f64(c.hk_local[3]),
            fmt_f64(c.hk_local[4]),
            fmt_f64(c.i_k[0]),
            fmt_f64(c.i_k[1]),
            fmt_f64(c.i_k[2]),
            fmt_f64(c.max_rho)
        ));
    }
    mb.emit("diag.csv", &csv)?;
    let trace = flow::unfold_physical(&recs, &prof);
    let mut csv = String::from("t_minus,sup_u,phase_x1,phase_x2,phase_x3,amp_x1,amp_x2,amp_x3\n");
    for (i, (tm, su)) in trace.decay.iter().enumerate() {
        let ph = &trace.phase_samples[i];
        let am = &trace.amp_samples[i];
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(*tm),
            fmt_f64(*su),
            fmt_f64(ph[0]),
            fmt_f64(ph[1]),
            fmt_f64(ph[2]),
            fmt_f64(am[0]),
            fmt_f64(am[1]),
            fmt_f64(am[2])
        ));
    }
    mb.emit("physical.csv", &csv)?;
    mb.setting("slope", trace.slope)
        .setting("slope_expected", trace.slope_expected)
        .setting("c_p", prof.farfield.c_p);
    println!(
        "simulated tau span {}: ||u||_inf slope {:.6} (expected {:.6}), min rho {:.3e}",
        tau_span,
        trace.slope,
        trace.slope_expected,
        recs.iter().map(|c| c.min_rho).fold(f64::INFINITY, f64::min)
    );
    mb.finish()
}

fn cmd_rates(pa: &ParamArgs, s: &[f64], out: &std::path::Path) -> anyhow::Result<()> {
    let pr = params_of(pa)?;
    let rep = verification::sobolev_rates(&pr, s);
    let h1 = verification::h1_boundedness_check(&pr, pr.r);
    let h1_star = verification::h1_boundedness_check(&pr, pr.r_star);
    println!("s_c      = {}", fmt_f64(rep.s_c));
    println!("sigma_th = {}", fmt_f64(rep.sigma_th));
    println!("amp_exp  = {}", fmt_f64(rep.amp_exponent));
    for (sv, g) in &rep.growth {
        println!("growth({sv}) = {}", fmt_f64(*g));
    }
    println!(
        "H1 margins at r: grad = {}, phase = {}",
        fmt_f64(h1.grad_margin),
        fmt_f64(h1.phase_margin)
    );
    let mut mb = ManifestBuilder::new(out);
    mb.params(pr);
    mb.emit(
        "rates.json",
        &serde_json::to_string_pretty(&serde_json::json!({
            "rates": rep, "h1_at_r": h1, "h1_at_r_star": h1_star,
        }))?,
    )?;
    mb.finish()
}

fn cmd_euler(gamma: f64, match_r: f64, dim: u32, power: u32) -> anyhow::Result<()> {
    let e = euler::front_speed_for(gamma, match_r);
    let ep = euler::euler_params_map(gamma, e);
    let nls = make_params(dim, power, match_r)?;
    let residual = euler::system_equivalence(&nls, &ep, 1000, 20240901);
    println!("gamma = {gamma}, front speed e = {}", fmt_f64(e));
    println!("dictionary: ell = {}, r = {}", fmt_f64(ep.ell), fmt_f64(ep.r));
    println!("NLS:        ell = {}, r = {}", fmt_f64(nls.ell), fmt_f64(nls.r));
    println!("equivalence residual over 1000 states = {:.3e}", residual);
    Ok(())
}

fn read_csv(path: &std::path::Path) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    if !path.exists() {
        return Err(CoreError::MissingInput(path.display().to_string()).into());
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CoreError::MissingInput(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        if l.trim().is_empty() {
            continue;
        }
        rows.push(
            l.split(',')
                .map(|t| t.trim().parse::<f64>().unwrap_or(f64::NAN))
                .collect(),
        );
    }
    if rows.is_empty() {
        return Err(CoreError::MissingInput(format!("{} has no data rows", path.display())).into());
    }
    Ok((header, rows))
}

fn cmd_plot(from: &std::path::Path, out: &std::path::Path, pa: &ParamArgs) -> anyhow::Result<()> {
    let mut mb = ManifestBuilder::new(out);
    let mut made = 0usize;

    let prof_csv = ["solve/profile.csv", "profile.csv"]
        .iter()
        .map(|p| from.join(p))
        .find(|p| p.exists());
    if let Some(path) = &prof_csv {
        let (_h, rows) = read_csv(path)?;
        let w: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        let sg: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2])).collect();
        let rho: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[3])).collect();
        // phase portrait with the sonic line and P2
        let traj: Vec<(f64, f64)> = rows.iter().map(|r| (r[2], r[1])).collect();
        let line: Vec<(f64, f64)> = (0..=100)
            .map(|i| {
                let s = 0.01 + 1.2 * i as f64 / 100.0;
                (s, 1.0 - s)
            })
            .collect();
        let mut markers = Vec::new();
        if let Ok(pr) = params_of(pa) {
            if let Ok(roots) = blowuplab_core::sonic::find_sonic_points(&pr) {
                markers.push((1.0 - roots[0], roots[0], "P2".to_string()));
            }
        }
        let spec = svg::PlotSpec {
            title: "Phase portrait".into(),
            x_label: "sigma".into(),
            y_label: "w".into(),
            log_x: false,
            log_y: false,
            series: vec![
                svg::Series { label: "trajectory".into(), color: "#1965b0", points: traj, dashed: false },
                svg::Series {
                    label: "sonic line sigma = 1 - w".into(),
                    color: "#888",
                    points: line,
                    dashed: true,
                },
            ],
            markers,
        };
        mb.emit("phase.svg", &svg::render(&spec))?;
        let spec = svg::PlotSpec {
            title: "Profile fields".into(),
            x_label: "Z".into(),
            y_label: "value".into(),
            log_x: true,
            log_y: false,
            series: vec![
                svg::Series { label: "w".into(), color: "#1965b0", points: w, dashed: false },
                svg::Series { label: "sigma".into(), color: "#dc050c", points: sg, dashed: false },
                svg::Series { label: "rho".into(), color: "#4eb265", points: rho, dashed: false },
            ],
            markers: vec![],
        };
        mb.emit("profile.svg", &svg::render(&spec))?;
        made += 2;
    }

    let scan_csv = ["scan/scan.csv", "scan.csv"].iter().map(|p| from.join(p)).find(|p| p.exists());
    if let Some(path) = &scan_csv {
        let (_h, rows) = read_csv(path)?;
        let spec = svg::PlotSpec {
            title: "Speed scan".into(),
            x_label: "r".into(),
            y_label: "miss".into(),
            log_x: false,
            log_y: false,
            series: vec![svg::Series {
                label: "miss(r)".into(),
                color: "#1965b0",
                points: rows.iter().map(|r| (r[0], r[1])).collect(),
                dashed: false,
            }],
            markers: vec![],
        };
        mb.emit("scan.svg", &svg::render(&spec))?;
        made += 1;
    }

    let diag_csv = ["simulate/diag.csv", "diag.csv"].iter().map(|p| from.join(p)).find(|p| p.exists());
    if let Some(path) = &diag_csv {
        let (_h, rows) = read_csv(path)?;
        let spec = svg::PlotSpec {
            title: "Norm decay".into(),
            x_label: "tau".into(),
            y_label: "norm".into(),
            log_x: false,
            log_y: true,
            series: vec![
                svg::Series {
                    label: "H1 (Z <= Z2)".into(),
                    color: "#1965b0",
                    points: rows.iter().map(|r| (r[0], r[5])).collect(),
                    dashed: false,
                },
                svg::Series {
                    label: "I_0".into(),
                    color: "#dc050c",
                    points: rows.iter().map(|r| (r[0], r[11])).collect(),
                    dashed: false,
                },
            ],
            markers: vec![],
        };
        mb.emit("decay.svg", &svg::render(&spec))?;
        made += 1;
    }

    let phys_csv = ["simulate/physical.csv", "physical.csv"]
        .iter()
        .map(|p| from.join(p))
        .find(|p| p.exists());
    if let Some(path) = &phys_csv {
        let (_h, rows) = read_csv(path)?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        // reference slope -(1+e)/(p-1) through the first sample
        let mut reference = Vec::new();
        if let Ok(pr) = params_of(pa) {
            if let Some(&(t0, u0)) = pts.first() {
                let sl = -(1.0 + pr.e) / (pr.p as f64 - 1.0);
                for &(t, _) in &pts {
                    reference.push((t, u0 * (t / t0).powf(sl)));
                }
            }
        }
        let spec = svg::PlotSpec {
            title: "Blow-up rate".into(),
            x_label: "T - t".into(),
            y_label: "||u||_inf".into(),
            log_x: true,
            log_y: true,
            series: vec![
                svg::Series { label: "||u||_inf".into(), color: "#1965b0", points: pts, dashed: false },
                svg::Series {
                    label: "reference slope -(1+e)/(p-1)".into(),
                    color: "#888",
                    points: reference,
                    dashed: true,
                },
            ],
            markers: vec![],
        };
        mb.emit("blowup.svg", &svg::render(&spec))?;
        made += 1;
    }

    if made == 0 {
        return Err(CoreError::MissingInput(format!(
            "no plottable CSV files under {}",
            from.display()
        ))
        .into());
    }
    println!("wrote {made} SVG plots to {}", out.display());
    mb.finish()
}
