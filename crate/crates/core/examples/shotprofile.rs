use ndarray::Array1;
use sffsim_core::hilbert::{
    canonical_chain, sample_disorder, KickedPropagator, ModelSpec, SpinRegister,
};
use sffsim_core::linalg::sym_eig;
use sffsim_core::C64;
use std::time::Instant;

fn main() {
    sffsim_core::init_backend();
    let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
    let reg = SpinRegister::new(6).unwrap();
    let reps = 500u64;

    let t0 = Instant::now();
    for r in 0..reps {
        let dis = sample_disorder(&model, reg, 1, r);
        std::hint::black_box(&dis);
    }
    println!("sample_disorder: {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);

    let dis = sample_disorder(&model, reg, 1, 0);
    let fields: Vec<f64> = (0..6).map(|k| 0.1 * k as f64 - 0.2).collect();

    let t0 = Instant::now();
    for _ in 0..reps {
        let c = canonical_chain(1.0, &fields, reg);
        std::hint::black_box(&c);
    }
    println!("canonical_chain: {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);

    let chain = canonical_chain(1.0, &fields, reg);
    let t0 = Instant::now();
    for _ in 0..reps {
        let e = sym_eig(&chain).unwrap();
        std::hint::black_box(&e);
    }
    println!("sym_eig 64:      {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);

    let t0 = Instant::now();
    for _ in 0..reps {
        let p = KickedPropagator::new(&model, &dis, reg).unwrap();
        std::hint::black_box(&p);
    }
    println!("propagator::new: {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);

    let prop = KickedPropagator::new(&model, &dis, reg).unwrap();
    let mut v = Array1::<C64>::zeros(64);
    v[0] = C64::new(1.0, 0.0);
    let t0 = Instant::now();
    for _ in 0..reps {
        for _ in 0..5 {
            prop.apply_period(&mut v);
        }
    }
    println!("5 periods apply: {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);

    let t0 = Instant::now();
    for _ in 0..reps {
        let u = prop.to_unitary().unwrap();
        std::hint::black_box(&u);
    }
    println!("to_unitary:      {:.3} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);
}
