use sffsim_core::hilbert::{ModelSpec, SpinRegister};
use sffsim_core::protocol::{simulate_floquet_shots, TwoDesignKind};
use std::time::Instant;

fn main() {
    sffsim_core::init_backend();
    let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
    let reg = SpinRegister::new(6).unwrap();
    for &(n, m) in &[
        (1u64, 2000usize),
        (5, 2000),
        (10, 2000),
        (64, 1000),
        (128, 1000),
    ] {
        let t0 = Instant::now();
        let shots =
            simulate_floquet_shots(&model, reg, n, 0, m, TwoDesignKind::CliffordGroup1Q, 1)
                .unwrap();
        let dt = t0.elapsed();
        println!(
            "n={n:4} m={m}: {:?} total, {:.3} ms/shot ({} shots, weight sum {})",
            dt,
            dt.as_secs_f64() * 1000.0 / m as f64,
            shots.len(),
            shots.iter().map(|s| s.weight() as u64).sum::<u64>()
        );
    }
}
