//! The `validate` subcommand: end-to-end invariant suite over randomly
//! generated systems, printing one line per check and failing the process
//! when any check fails.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use cgqf_core::confluent::{build_pole_zero, mgf_confluent, mgf_original, select_m};
use cgqf_core::distribution::ClosedFormDistribution;
use cgqf_core::montecarlo::{ks_critical_1pct, ks_distance, sample_qm, SimConfig};
use cgqf_core::reduction::SpectralForm;
use cgqf_core::residues::{
    bruteforce, check_reconstruction, rationalize, residues_closed_form, residues_recursive,
    RationalPoleZeroSystem, DEFAULT_MAX_DENOMINATOR,
};

pub struct Outcome {
    pub passed: usize,
    pub failed: usize,
}

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
            println!("ok   {name}: {detail}");
        } else {
            self.failed += 1;
            println!("FAIL {name}: {detail}");
        }
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn random_rational_system(rng: &mut ChaCha12Rng, max_total: u32) -> RationalPoleZeroSystem {
    loop {
        let n_poles = rng.gen_range(1..=4usize);
        let mut used: Vec<BigRational> = Vec::new();
        let mut pick = |rng: &mut ChaCha12Rng, used: &mut Vec<BigRational>| loop {
            let num = rng.gen_range(1..24i64) * if rng.gen_bool(0.35) { -1 } else { 1 };
            let den = rng.gen_range(1..8i64);
            let v = rat(num, den);
            if !v.is_zero() && !used.contains(&v) {
                used.push(v.clone());
                return v;
            }
        };
        let mut poles: Vec<(BigRational, u32)> = (0..n_poles)
            .map(|_| {
                let v = pick(rng, &mut used);
                (v, rng.gen_range(1..=5u32))
            })
            .collect();
        let zeros: Vec<(BigRational, u32)> = (0..rng.gen_range(0..=3usize))
            .map(|_| {
                let v = pick(rng, &mut used);
                (v, rng.gen_range(1..=3u32))
            })
            .collect();
        let tp: u32 = poles.iter().map(|&(_, p)| p).sum();
        let tq: u32 = zeros.iter().map(|&(_, q)| q).sum();
        if tp <= tq {
            poles[0].1 += tq - tp + 1;
        }
        let total: u32 = poles.iter().map(|&(_, p)| p).sum();
        if total <= max_total {
            return RationalPoleZeroSystem {
                m: 1,
                dim: (total
                    - zeros.iter().map(|&(_, q)| q).sum::<u32>()) as usize,
                poles,
                zeros,
                lambda: vec![],
                mu: vec![],
            };
        }
    }
}

pub fn run(quick: bool, seed: u64, inject_fault: bool) -> Outcome {
    let mut suite = Suite { passed: 0, failed: 0 };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // 1) residue route equivalence + reconstruction identity
    let n_systems = if quick { 10 } else { 50 };
    let mut equiv_ok = true;
    let mut recon_ok = true;
    let mut fault_detected = false;
    for idx in 0..n_systems {
        let rpz = random_rational_system(&mut rng, 20);
        let brute = bruteforce::residues(&rpz);
        let rec = residues_recursive(&rpz);
        let closed = residues_closed_form(&rpz).expect("within guard");
        if rec.a != brute.a || rec.c != brute.c || closed.a != brute.a || closed.c != brute.c {
            equiv_ok = false;
        }
        let mut table = rec;
        if inject_fault && idx == 0 {
            table.a[0][0] += BigRational::one();
            if check_reconstruction(&table, &rpz, 10, seed ^ 0xfa17).is_err() {
                fault_detected = true;
            }
            continue;
        }
        if check_reconstruction(&table, &rpz, 10, seed.wrapping_add(idx as u64)).is_err() {
            recon_ok = false;
        }
    }
    suite.check(
        "residue-route-equivalence",
        equiv_ok,
        format!("recursive = closed-form = brute-force on {n_systems} systems (exact)"),
    );
    suite.check(
        "reconstruction-identity",
        recon_ok,
        "partial fractions reproduce R(s) and R(s)/s at 10 rational points".into(),
    );
    if inject_fault {
        suite.check(
            "fault-injection",
            fault_detected,
            "corrupted residue table correctly rejected by the reconstruction check".into(),
        );
    }

    // 2) moment identities through the full pipeline
    let spectra = [
        (vec![1.0, 2.0], vec![0.5, 1.5], 12u32),
        (vec![0.8, -0.6, 1.4], vec![0.0, 2.0, 1.0], 16),
        (vec![-1.2, 0.4], vec![3.0, 0.0], 20),
    ];
    let n_spectra = if quick { 2 } else { spectra.len() };
    let mut max_rel = 0.0f64;
    for (lambda, mu, m) in spectra.iter().take(n_spectra) {
        let sf = SpectralForm::from_spectrum(lambda.clone(), mu.clone());
        let pz = build_pole_zero(&sf, *m).expect("valid spectrum");
        let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR).expect("no collision");
        let d = ClosedFormDistribution::from_residues(&residues_recursive(&rpz), 320);
        let mean = d.moment(1).expect("precision ok");
        max_rel = max_rel.max((mean - sf.mean()).abs() / sf.mean().abs().max(1.0));
    }
    suite.check(
        "moment-identity",
        max_rel < 1e-8,
        format!("max |E[Q_m] - sum lambda(1+mu)| rel = {max_rel:.2e} over {n_spectra} forms"),
    );

    // 3) MGF confluence on the imaginary axis
    let sf = SpectralForm::from_spectrum(vec![1.0, -0.5], vec![2.0, 1.0]);
    let grid_err = |m: u32| -> f64 {
        let pz = build_pole_zero(&sf, m).expect("valid");
        (1..=20)
            .map(|k| {
                let s = num_complex::Complex64::new(0.0, -5.0 + 0.5 * k as f64);
                (mgf_confluent(&pz, s).unwrap() - mgf_original(&sf, s).unwrap()).norm()
            })
            .fold(0.0f64, f64::max)
    };
    let (e64, e128) = (grid_err(64), grid_err(128));
    suite.check(
        "mgf-confluence",
        e128 <= 0.6 * e64,
        format!("grid error {e64:.3e} at m=64 -> {e128:.3e} at m=128"),
    );

    // 4) weak convergence: analytic CDF vs empirical CDF of the original Q
    let n_samples = if quick { 20_000 } else { 100_000 };
    let sf = SpectralForm::from_spectrum(vec![0.5, 0.33], vec![1.0, 0.5]);
    let m = select_m(&sf, 1e-2, 100_000).expect("reachable");
    let pz = build_pole_zero(&sf, m).expect("valid");
    let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR).expect("no collision");
    let d = ClosedFormDistribution::from_residues(&residues_recursive(&rpz), 512);
    let samples: Vec<f64> = sample_qm(&sf, 1, &SimConfig::new(seed ^ 0x1234, 0, n_samples))
        .into_iter()
        .map(|(q, _)| q)
        .collect();
    let ks = ks_distance(&samples, |x| d.cdf(x).unwrap_or(f64::NAN));
    let crit = ks_critical_1pct(n_samples);
    suite.check(
        "weak-convergence-ks",
        ks < crit,
        format!("KS = {ks:.5} < {crit:.5} at N = {n_samples}, m = {m}"),
    );

    println!(
        "validate: {} passed, {} failed",
        suite.passed, suite.failed
    );
    Outcome { passed: suite.passed, failed: suite.failed }
}
