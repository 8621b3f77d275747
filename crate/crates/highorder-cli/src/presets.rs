//! Built-in benchmark presets mirroring the experimental setups.

use highorder::methods::MethodKind;
use highorder::problems::{Lipschitz, ProblemKind, SynthKind};

use crate::config::{
    BenchmarkConfig, MethodSpec, OutputBlock, ProblemConfig, RunBlock, SynthSpec, X0Spec,
};

pub const PRESET_NAMES: [&str; 4] = [
    "a9a-logreg-strong",
    "a9a-logreg-convex",
    "nesterov-lb",
    "poisson-synth",
];

pub fn preset(name: &str) -> Option<BenchmarkConfig> {
    match name {
        "a9a-logreg-strong" => Some(a9a(1e-4, vec![
            MethodSpec::new(MethodKind::Gd, 1),
            MethodSpec::new(MethodKind::Crn, 2),
            MethodSpec::new(MethodKind::Btm, 3),
        ])),
        "a9a-logreg-convex" => Some(a9a(0.0, vec![
            MethodSpec::new(MethodKind::Crn, 2),
            MethodSpec::new(MethodKind::Natm, 2),
            MethodSpec::new(MethodKind::Nata, 2),
        ])),
        "nesterov-lb" => Some(nesterov_lb()),
        "poisson-synth" => Some(poisson_synth()),
        _ => None,
    }
}

/// Logistic regression on a9a: x0 = 3e, normalized rows, L2 = 0.1.
/// The dataset file is user-supplied through the config overlay.
fn a9a(mu: f64, methods: Vec<MethodSpec>) -> BenchmarkConfig {
    BenchmarkConfig {
        problem: ProblemConfig {
            kind: ProblemKind::Logistic,
            dataset: None,
            synth: None,
            dim: None,
            dim_override: Some(123),
            remap_01_labels: true,
            normalize: true,
            mu,
            lipschitz: Lipschitz {
                // Unit rows bound the gradient Lipschitz constant by 1/4.
                l1: Some(0.25 + mu),
                l2: Some(0.1),
                l3: Some(0.1),
            },
            x0: X0Spec::Ones { scale: 3.0 },
            expected_shape: Some((32561, 123)),
        },
        methods,
        run: RunBlock {
            max_iters: Some(30),
            grad_tol: Some(1e-12),
            fstar_prerun: 200,
            fstar_tol: 1e-13,
        },
        output: OutputBlock::default(),
    }
}

fn nesterov_lb() -> BenchmarkConfig {
    BenchmarkConfig {
        problem: ProblemConfig {
            kind: ProblemKind::NesterovLb,
            dataset: None,
            synth: None,
            dim: Some(20),
            dim_override: None,
            remap_01_labels: true,
            normalize: false,
            mu: 1e-3,
            lipschitz: Lipschitz {
                l1: None,
                l2: Some(10.0),
                l3: Some(10.0),
            },
            x0: X0Spec::Zeros,
            expected_shape: None,
        },
        methods: vec![
            MethodSpec::new(MethodKind::Crn, 2),
            MethodSpec::new(MethodKind::Btm, 3),
        ],
        run: RunBlock {
            max_iters: Some(30),
            grad_tol: Some(1e-12),
            fstar_prerun: 500,
            fstar_tol: 1e-13,
        },
        output: OutputBlock::default(),
    }
}

fn poisson_synth() -> BenchmarkConfig {
    BenchmarkConfig {
        problem: ProblemConfig {
            kind: ProblemKind::Poisson,
            dataset: None,
            synth: Some(SynthSpec {
                kind: SynthKind::Poisson,
                n: 6000,
                d: 21,
                seed: 42,
            }),
            dim: None,
            dim_override: None,
            remap_01_labels: true,
            normalize: false,
            mu: 0.0,
            lipschitz: Lipschitz {
                l1: Some(1.0),
                l2: Some(1.0),
                l3: Some(1.0),
            },
            x0: X0Spec::Ones { scale: 1.0 },
            expected_shape: Some((6000, 21)),
        },
        methods: vec![MethodSpec::new(MethodKind::Crn, 2), {
            // The nominal L2 = 1 understates the smoothness of the
            // exponential loss by orders of magnitude, so the adaptive
            // schedule gets a deep floor to back off below the M = L
            // pairing's theoretical nu.
            let mut nata = MethodSpec::new(MethodKind::Nata, 2);
            nata.nu_min = Some(1e-9);
            nata.nu_max = Some(100.0 / 24.0);
            nata
        }],
        run: RunBlock {
            max_iters: Some(30),
            grad_tol: Some(1e-12),
            fstar_prerun: 300,
            fstar_tol: 1e-13,
        },
        output: OutputBlock::default(),
    }
}
