use masem::benchmarks::disks::{cap_area_fractions, make_disks};
use masem::kernels::KernelConfig;
use masem::resampler::{masem_run, MasemConfig};

fn main() {
    let problem = make_disks(false).unwrap();
    println!("alpha* = {:?}", cap_area_fractions());
    for seed in 0..3u64 {
        let mut cfg = MasemConfig::new(500, KernelConfig::nhr());
        cfg.n_iterations = 20;
        cfg.rejuvenation_steps = 50;
        cfg.k_max = 4;
        cfg.temperature = 1.0;
        cfg.seed = seed;
        let (ens, _) = masem_run(&problem, &cfg, |_, _| {}).unwrap();
        let counts = ens.component_counts(&problem).unwrap();
        println!(
            "seed {seed}: final counts {:?} -> frac A = {:.4}",
            counts,
            counts[0] as f64 / 500.0
        );
    }
}
