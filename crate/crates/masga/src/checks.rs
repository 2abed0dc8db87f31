//! Self-checks of the closed-form oracles against brute-force enumeration.

use masga_core::oracles::{
    ou_kernel, ou_variance_exact, subsample_fourth_moment_enumerated, subsample_fourth_moment_termwise,
    subsample_variance_enumerated, subsample_variance_exact, OuSpec, ENUMERATION_MAX_M,
};
use masga_core::rng::{NoiseSource, Role};
use masga_core::ReplacementMode;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn dataset(m: usize, seed: u64) -> Vec<f64> {
    let mut n = NoiseSource::from_seed(seed, Role::Custom(11));
    (0..m).map(|_| n.gaussian() * 2.0 + 0.5).collect()
}

pub fn oracle_checks() -> Vec<Check> {
    let mut out = Vec::new();

    let spec = OuSpec { alpha: 1.0, h: 0.1, m: 1, data: vec![0.0], v0: 0.0, s: 1 };
    let v1 = ou_variance_exact(&spec, 1);
    let v2 = ou_variance_exact(&spec, 2);
    out.push(check(
        "ou variance closed form",
        (v1 - 0.1).abs() < 1e-15 && (v2 - 0.181).abs() < 1e-15,
        format!("k=1: {v1}, k=2: {v2}"),
    ));

    let mut worst = 0.0f64;
    for m in 1..=ENUMERATION_MAX_M {
        let data = dataset(m, m as u64);
        for s in 1..=m {
            for mode in [ReplacementMode::With, ReplacementMode::Without] {
                if mode == ReplacementMode::With && m.pow(s as u32) > 100_000 {
                    continue;
                }
                let e = subsample_variance_enumerated(&data, s, mode).unwrap();
                let c = subsample_variance_exact(&data, s, mode).unwrap();
                worst = worst.max((e - c).abs());
            }
        }
    }
    out.push(check("batch-mean variance: enumeration vs closed form", worst <= 1e-12, format!("max abs diff {worst:.2e}")));

    let mut worst = 0.0f64;
    for m in 2..=6 {
        let data = dataset(m, 100 + m as u64);
        for s in 1..=m.min(4) {
            for mode in [ReplacementMode::With, ReplacementMode::Without] {
                let e = subsample_fourth_moment_enumerated(&data, 0.3, s, mode, ou_kernel(1.0)).unwrap();
                let t = subsample_fourth_moment_termwise(&data, 0.3, s, mode, ou_kernel(1.0)).unwrap();
                worst = worst.max((e - t).abs());
            }
        }
    }
    out.push(check("fourth moment: enumeration vs term-wise sum", worst <= 1e-12, format!("max abs diff {worst:.2e}")));

    let data = dataset(8, 42);
    let r = |mode| {
        let a = subsample_fourth_moment_enumerated(&data, 0.0, 1, mode, ou_kernel(1.0)).unwrap();
        let b = subsample_fourth_moment_enumerated(&data, 0.0, 2, mode, ou_kernel(1.0)).unwrap();
        b / a
    };
    let (rw, rwo) = (r(ReplacementMode::With), r(ReplacementMode::Without));
    out.push(check(
        "fourth moment decays faster than 1/s",
        rw <= 0.6 && rwo <= 0.6,
        format!("ratio s=2/s=1: with {rw:.4}, without {rwo:.4}"),
    ));
    out
}
