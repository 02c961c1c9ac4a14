use blowuplab_core::flow::{SimConfig, Simulator};
use blowuplab_core::params::make_params;
use blowuplab_core::profile::{extend_and_fit, scan_speeds, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    let scan = scan_speeds(&base, 200, 1e-8, &ProfileOptions::default()).unwrap();
    let r_hat = scan.roots[0].r_hat;
    println!("r_hat = {r_hat}");
    let prof = extend_and_fit(&base, r_hat, &ProfileOptions::default()).unwrap();
    let cfg = SimConfig { tau_span: 5.0, n_checkpoints: 40, ..Default::default() };
    let sim = Simulator::new(&prof, cfg).unwrap();
    let mut st = sim.initial_state();
    let mut dtau = 1e-4f64;
    let mut step = 0usize;
    loop {
        match sim.step_adaptive(&mut st, dtau, 0.02) {
            Ok((_, next)) => {
                dtau = next;
                step += 1;
                if step % 200 == 0 {
                    let rho_d = sim.rho_d(st.tau);
                    let mut devmax = (0.0f64, 0usize);
                    let mut rhomin = (f64::INFINITY, 0usize);
                    for i in 0..sim.grid.n {
                        let v = (st.rho[i] - rho_d[i]) / rho_d[i];
                        if v.abs() > devmax.0.abs() { devmax = (v, i); }
                        if st.rho[i] / rho_d[i] < rhomin.0 { rhomin = (st.rho[i] / rho_d[i], i); }
                    }
                    println!("step {step} tau={:.4} dtau={dtau:.1e} dev={:+.3e}@Z={:.3e} minratio={:.3e}@Z={:.3e}",
                        st.tau, devmax.0, sim.grid.z[devmax.1], rhomin.0, sim.grid.z[rhomin.1]);
                }
                if st.tau > sim.tau0 + 5.0 { println!("DONE"); break; }
            }
            Err(e) => { println!("FAILED step {step} tau {}: {e}", st.tau); break; }
        }
    }
}
