use rayon::prelude::*;
use sffsim_core::hilbert::{canonical_chain, SpinRegister};
use sffsim_core::linalg::sym_eig;
use std::time::Instant;

fn main() {
    sffsim_core::init_backend();
    let reg = SpinRegister::new(6).unwrap();
    let chains: Vec<_> = (0..400)
        .map(|k| {
            let fields: Vec<f64> = (0..6).map(|s| 0.01 * (k * 7 + s) as f64 % 1.0 - 0.5).collect();
            canonical_chain(1.0, &fields, reg)
        })
        .collect();

    let t0 = Instant::now();
    for c in &chains {
        std::hint::black_box(sym_eig(c).unwrap());
    }
    let serial = t0.elapsed();
    println!("serial  : {serial:?} ({:.3} ms/eig)", serial.as_secs_f64() * 1000.0 / 400.0);

    let t0 = Instant::now();
    chains.par_iter().for_each(|c| {
        std::hint::black_box(sym_eig(c).unwrap());
    });
    let par = t0.elapsed();
    println!("2-thread: {par:?} ({:.3} ms/eig) speedup {:.2}x", par.as_secs_f64() * 1000.0 / 400.0, serial.as_secs_f64() / par.as_secs_f64());
}
