use blowuplab_core::params::make_params;
use blowuplab_core::profile::{extend_and_fit, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    let prof = extend_and_fit(&base, 2.19, &ProfileOptions::default()).unwrap();
    let p = &prof.params;
    println!("handoff_mismatch={:.2e} clearance={:.5} psi_inf={:.8}", prof.outgoing.handoff_mismatch, prof.outgoing.clearance, prof.farfield.psi_infinity);
    let dx_out = prof.sonic.branch_x_offset(-1e-3, p).abs();
    let xh = prof.x2 + dx_out;
    for dx in [0.0, 0.005, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let (w, s, lw, ls) = prof.state(xh + dx);
        // compare against series where it applies
        let sig = s - prof.sonic.sigma2;
        let wser = if sig > -0.12 { prof.sonic.w2 + prof.sonic.branch_w(sig) } else { f64::NAN };
        println!("xh+{dx:.3}: w={w:.8} (series {wser:.8}) s={s:.6} lw={lw:+.5} ls={ls:+.5}");
    }
}
