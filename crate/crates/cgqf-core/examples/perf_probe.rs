use cgqf_core::confluent::build_pole_zero;
use cgqf_core::distribution::ClosedFormDistribution;
use cgqf_core::reduction::{reduce, SpectralForm};
use cgqf_core::residues::{rationalize, residues_recursive, DEFAULT_MAX_DENOMINATOR};
use cgqf_core::mrc::{MrcScenario, ShapeSelection};
use std::time::Instant;

fn main() {
    for (p, k, m) in [
        (2usize, vec![1.0, 0.5], 40u32),
        (2, vec![1.0, 0.5], 80),
        (2, vec![6.0, 4.0], 150),
        (4, vec![8.0, 7.0, 6.0, 6.0], 150),
    ] {
        let sc = MrcScenario::new(p, k.clone(), 0.5, 16)
            .unwrap()
            .with_shape(ShapeSelection::Fixed(m));
        let sf: SpectralForm = reduce(&sc.build_channel().unwrap()).unwrap();
        let t = Instant::now();
        let pz = build_pole_zero(&sf, m).unwrap();
        let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR).unwrap();
        eprintln!("P={p} m={m}: rationalize {:?}", t.elapsed());
        let t = Instant::now();
        let rt = residues_recursive(&rpz);
        eprintln!("P={p} m={m}: residues {:?}", t.elapsed());
        let t = Instant::now();
        let dist = ClosedFormDistribution::from_residues(&rt, 512);
        eprintln!("P={p} m={m}: coefficients {:?}", t.elapsed());
        let t = Instant::now();
        let v = dist.cdf(sf.mean()).unwrap();
        eprintln!("P={p} m={m}: one cdf eval {:?} ({v:.6})", t.elapsed());
    }
}
