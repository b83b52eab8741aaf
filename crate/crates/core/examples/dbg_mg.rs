use ndarray::s;
use tandemq_core::*;
use ndarray::array;

fn chars_for(model: &Model, x: &StationaryDistribution) -> DelayCharacteristics {
    let hat = kernel::build(model, KernelVariant::Hat).unwrap();
    let tilde = kernel::build(model, KernelVariant::Tilde).unwrap();
    delay::delay_characteristics(model, x, &hat, &tilde, &CpdOptions::default()).unwrap()
}

fn main() {
    for (name, s1, v, vt) in [
        ("case1", 0.6429, array![0.6545, 0.3455], array![[0.3035, 0.0617], [0.6738, 0.1916]]),
        ("case2", 0.1667, array![0.6969, 0.3031], array![[0.6378, 0.1007], [0.4613, 0.3278]]),
    ] {
        let model = Model::new(
            DMap::new(
                array![[0.2359, 0.1938], [0.2792, 0.2805]],
                array![[0.1236, 0.4467], [0.2644, 0.1759]],
            ).unwrap(),
            DPh::scalar(s1).unwrap(),
            DPh::scalar(0.5455).unwrap(),
            DPh::new(v, vt).unwrap(),
            10, 15,
        ).unwrap();
        let l = model.layout();
        let k = kernel::build(&model, KernelVariant::Plain).unwrap();
        let p = k.assemble(l);
        let (xd, _) = stationary::solve_direct(&p).unwrap();

        // level masses
        print!("{name} level masses (direct): ");
        for i1 in 0..=l.cap1 {
            let off = l.level_offset(i1);
            let m: f64 = xd.slice(s![off..off + l.level_dim(i1)]).sum();
            print!("{:.4} ", m);
        }
        println!();

        // literal matrix-geometric route (with delta-based acceptance of the sweep)
        let r = stationary::compute_r(&k.hold, &k.up, &k.down, 1e-13, 100000).unwrap();
        // power estimate of spectral radius
        let mut rm = r.mat.clone();
        for _ in 0..6 { rm = rm.dot(&rm); }
        let p64 = rm.iter().cloned().fold(0.0, f64::max);
        println!("  rho(R) ~ {:.4}", p64.powf(1.0/64.0));

        match stationary::solve_boundary_jacobi(
            &k.empty_hold, &k.empty_up, &k.drain, &k.hold, &k.down, &r, 1e-12, 100000, 0.5,
        ) {
            Ok(_) => println!("  jacobi reached residual tol"),
            Err(e) => println!("  jacobi: {e}"),
        }
    }
}
