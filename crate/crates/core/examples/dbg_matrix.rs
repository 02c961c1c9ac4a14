use blowuplab_core::flow::{SimConfig, Simulator};
use blowuplab_core::params::make_params;
use blowuplab_core::profile::{extend_and_fit, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    let prof = extend_and_fit(&base, 2.1761804130975930, &ProfileOptions::default()).unwrap();
    for (qp, damp, n) in [(true, true, 3072usize), (false, true, 3072), (true, false, 3072), (true, true, 1536), (true, true, 2048)] {
        let cfg = SimConfig { tau_span: 5.0, n_checkpoints: 10, n_grid: n, quantum_pressure: qp, dampened: damp, ..Default::default() };
        let sim = Simulator::new(&prof, cfg).unwrap();
        match sim.run() {
            Ok(recs) => println!("qp={qp} damp={damp} n={n}: OK, min_rho={:.2e}, sup_rel={:.2e}", recs.iter().map(|c| c.min_rho).fold(f64::INFINITY, f64::min), recs.last().unwrap().sup_rel),
            Err(e) => println!("qp={qp} damp={damp} n={n}: FAIL {e}"),
        }
    }
}
