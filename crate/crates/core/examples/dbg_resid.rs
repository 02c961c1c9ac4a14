use blowuplab_core::io::read_profile_csv;
use blowuplab_core::params::make_params;

fn main() {
    let p = make_params(9, 3, 2.19).unwrap();
    let f = std::fs::File::open("out/solve/profile.csv").unwrap();
    let fields = read_profile_csv(std::io::BufReader::new(f), p).unwrap();
    let n = fields.nodes.len();
    let h = (fields.nodes[1].z / fields.nodes[0].z).ln();
    let lnq: Vec<f64> = fields.nodes.iter().map(|n| n.q.ln()).collect();
    let pm1 = 2.0;
    let mut z2 = 0.0;
    for i in 1..n {
        if fields.nodes[i - 1].delta < 0.0 && fields.nodes[i].delta >= 0.0 { z2 = fields.nodes[i].z; }
    }
    let rhs_max = fields.nodes.iter().map(|nd| 4.0 * p.mu * p.mu * nd.f * nd.f).fold(0.0f64, f64::max);
    println!("rhs_max = {rhs_max:.3e}");
    for (zlo, zhi) in [(0.001, 0.05), (0.05, 0.3), (0.3, 1.0), (1.0, 5.0), (5.0, 24.0), (40.0, 200.0), (200.0, 9000.0)] {
        let mut worst = 0.0f64;
        let mut worst_nodewise = 0.0f64;
        for i in 2..n - 2 {
            let nd = &fields.nodes[i];
            if nd.z < zlo || nd.z > zhi { continue; }
            let t = (nd.z / z2).ln();
            if t >= -0.10 && t <= 0.35 { continue; }
            let dlnq = (lnq[i - 2] - 8.0 * lnq[i - 1] + 8.0 * lnq[i + 1] - lnq[i + 2]) / (12.0 * h);
            let dq = nd.q * dlnq / nd.z;
            let lhs = pm1 * dq * dq / nd.q;
            let rhs = 4.0 * p.mu * p.mu * nd.f * nd.f;
            worst = worst.max((lhs - rhs).abs() / rhs_max);
            if rhs > 1e-4 * rhs_max {
                worst_nodewise = worst_nodewise.max((lhs - rhs).abs() / rhs);
            }
        }
        println!("Z in [{zlo}, {zhi}]: global-rel {worst:.2e}, nodewise-rel (F at scale) {worst_nodewise:.2e}");
    }
}
