use blowuplab_core::io::read_profile_csv;
use blowuplab_core::params::{determinants, make_params};
use std::io::BufRead;

fn main() {
    let p = make_params(9, 3, 2.19).unwrap();
    let f = std::fs::File::open("out/solve/profile.csv").unwrap();
    let fields = read_profile_csv(std::io::BufReader::new(f), p).unwrap();
    let n = fields.nodes.len();
    let h = (fields.nodes[1].z / fields.nodes[0].z).ln();
    let lnq: Vec<f64> = fields.nodes.iter().map(|n| n.q.ln()).collect();
    let pm1 = 2.0;
    let mut worst = (0.0f64, 0usize);
    let mut z2 = 0.0;
    for i in 1..n {
        if fields.nodes[i - 1].delta < 0.0 && fields.nodes[i].delta >= 0.0 { z2 = fields.nodes[i].z; }
    }
    let rhs_max = fields.nodes.iter().map(|nd| 4.0 * p.mu * p.mu * nd.f * nd.f).fold(0.0f64, f64::max);
    for i in 2..n - 2 {
        let nd = &fields.nodes[i];
        let t = (nd.z / z2).ln();
        if t >= -0.10 && t <= 0.35 { continue; }
        let dlnq = (lnq[i - 2] - 8.0 * lnq[i - 1] + 8.0 * lnq[i + 1] - lnq[i + 2]) / (12.0 * h);
        let dq = nd.q * dlnq / nd.z;
        let lhs = pm1 * dq * dq / nd.q;
        let rhs = 4.0 * p.mu * p.mu * nd.f * nd.f;
        let rel = (lhs - rhs).abs() / (rhs + 1e-6 * rhs_max);
        if rel > worst.0 { worst = (rel, i); }
    }
    let i = worst.1;
    let nd = &fields.nodes[i];
    let det = determinants(nd.w, nd.sigma, &p);
    println!("worst rel={:.3e} at i={i} Z={:.6} (Z2={z2:.4}, t={:.4})", worst.0, nd.z, (nd.z/z2).ln());
    println!("F_col={:.6e} sigma={:.6e} Delta={:.3e} ls_ode={:.6e}", nd.f, nd.sigma, det.delta, -det.delta2/det.delta);
    let dlnq = (lnq[i - 2] - 8.0 * lnq[i - 1] + 8.0 * lnq[i + 1] - lnq[i + 2]) / (12.0 * h);
    println!("dlnq_fd={:.6e} 2F/sigma={:.6e}", dlnq, 2.0*nd.f/nd.sigma);
    for j in i-2..=i+2 {
        println!("  j={j} Z={:.4} lnq={:.8} w={:.6} F={:.6e}", fields.nodes[j].z, lnq[j], fields.nodes[j].w, fields.nodes[j].f);
    }
}
