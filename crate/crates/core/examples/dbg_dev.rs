use blowuplab_core::ode::{integrate, Direction, Event, OdeOptions};
use blowuplab_core::params::{determinants, make_params};
use blowuplab_core::profile::{extend_and_fit, ProfileOptions};

fn main() {
    let base = make_params(9, 3, 2.1).unwrap();
    let prof = extend_and_fit(&base, 2.19, &ProfileOptions::default()).unwrap();
    let p = prof.params;
    let sp = &prof.sonic;
    let stop = prof.outgoing.forward.y_end;
    let x2 = prof.x2;
    let sigma_chk = 0.04;
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, h_init: 1e-6, max_steps: 4_000_000 };
    for t in [-8e-3, -4e-3, -2e-3, -1e-3, 0.0, 1e-3, 2e-3, 4e-3, 8e-3] {
        let anchor = [stop[0], stop[1], stop[2] * (1.0 + t)];
        let s2 = sp.sigma2;
        let field = |y: &[f64; 3]| {
            let det = determinants(y[1], y[2], &p);
            [-det.delta, det.delta1, det.delta2]
        };
        let events = vec![
            Event { name: "chk", f: Box::new(move |y: &[f64; 3]| y[2] - (s2 - sigma_chk)), direction: Direction::Rising, terminal: false },
            Event { name: "handoff", f: Box::new(move |y: &[f64; 3]| y[2] - (s2 - 1e-3)), direction: Direction::Rising, terminal: true },
            Event { name: "under", f: Box::new(move |y: &[f64; 3]| y[0] - (x2 - 1.0)), direction: Direction::Falling, terminal: true },
        ];
        match integrate(field, anchor, 1e5, &events, &opts) {
            Ok(traj) => {
                let dev = traj.hit("chk").map(|h| h.y[1] - (sp.w2 + sp.branch_w(h.y[2] - sp.sigma2)));
                let hand = traj.hit("handoff").map(|h| (h.y[1] - (sp.w2 + sp.branch_w(h.y[2] - sp.sigma2))).abs());
                println!("t={t:+.0e}: dev={dev:?} handoff_mis={hand:?} end_x={:.4}", traj.y_end[0]);
            }
            Err(e) => println!("t={t:+.0e}: ERR {e}"),
        }
    }
}
