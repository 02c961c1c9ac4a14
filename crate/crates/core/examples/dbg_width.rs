use blowuplab_core::params::make_params;
use blowuplab_core::profile::{extend_and_fit, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    for r in [2.19, 2.1763] {
        let prof = extend_and_fit(&base, r, &ProfileOptions::default()).unwrap();
        let p = &prof.params;
        let dx_out = prof.sonic.branch_x_offset(-1e-3, p).abs();
        let xh = prof.x2 + dx_out;
        let mut prev_lw = f64::NAN;
        let mut max_rate = 0.0f64;
        let n = 2000;
        let h = 0.04 / n as f64;
        let mut lw_min = f64::INFINITY;
        for i in 0..=n {
            let x = xh - 0.005 + h * i as f64;
            let (_, _, lw, _) = prof.state(x);
            if prev_lw.is_finite() {
                max_rate = max_rate.max(((lw - prev_lw) / h).abs());
            }
            lw_min = lw_min.min(lw);
            prev_lw = lw;
        }
        // swing ~ |lw_min - lw(branch)|; width ~ swing / max_rate
        println!("r={r}: Lw swings to {lw_min:.3}, max |dLw/dx| = {max_rate:.1}, width ~ {:.2e}", (lw_min.abs() + 0.01) / max_rate);
    }
}
