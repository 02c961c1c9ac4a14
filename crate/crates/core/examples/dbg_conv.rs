use blowuplab_core::flow::{SimConfig, Simulator};
use blowuplab_core::params::make_params;
use blowuplab_core::profile::{extend_and_fit, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    let prof = extend_and_fit(&base, 2.19, &ProfileOptions::default()).unwrap();
    let mut errs_in = Vec::new();
    let mut errs_all = Vec::new();
    for n in [1024usize, 2048, 4096, 8192] {
        let cfg = SimConfig { n_grid: n, dampened: false, quantum_pressure: false, b0: 1e-2, tau_span: 1.0, ..Default::default() };
        let sim = Simulator::new(&prof, cfg).unwrap();
        let (rr, rp) = sim.profile_residual(sim.tau0);
        let mut w_in = 0.0f64;
        let mut w_all = 0.0f64;
        for i in 0..sim.grid.n {
            let z = sim.grid.z[i];
            let v = rr[i].abs().max(rp[i].abs());
            if z <= prof.z2 { w_in = w_in.max(v); }
            if z <= 9e3 { w_all = w_all.max(v); }
        }
        errs_in.push(w_in);
        errs_all.push(w_all);
        println!("n={n}: interior(Z<=Z2)={w_in:.3e} all(Z<9e3)={w_all:.3e}");
    }
    for k in 0..errs_in.len()-1 {
        println!("ratios in={:.1} all={:.1}", errs_in[k]/errs_in[k+1], errs_all[k]/errs_all[k+1]);
    }
}
