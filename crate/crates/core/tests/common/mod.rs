//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gsde_core::data::Domain;
use gsde_core::diffcore::Matrix;
use gsde_core::losses::{backward_step, evaluate_step, freeze_step, CentroidBank, LossBreakdown, LossSwitches, MixMatchConfig, StepInputs, StepSettings};
use gsde_core::model::{init_model, Dims, GsdeModel};
use gsde_core::rng::seeded;
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero gradients from
/// turning round-off into large relative errors.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Gradients below this magnitude are compared with absolute tolerance
/// `1e-4 · GRAD_FLOOR`; central differences of an O(1) loss carry about
/// `1e-10` of round-off at `h = 1e-5`.
pub const GRAD_FLOOR: f64 = 1e-5;

pub struct Case {
    model: GsdeModel,
    bank: CentroidBank,
    source_x: Matrix,
    source_labels: Vec<usize>,
    source_domains: Vec<Domain>,
    target_x: Matrix,
    extra_x: Matrix,
    extra_labels: Vec<usize>,
    settings: StepSettings,
}

pub fn case(seed: u64, with_extra: bool) -> Case {
    let mut rng = seeded(seed);
    let dims = Dims { input: 3, hidden: 6, bottleneck: 4, classes: 3, disc_hidden: 5, extractor_depth: 2 };
    let model = init_model(dims, 3, seed).unwrap();
    let source_x = random_matrix(4, 3, &mut rng);
    let source_labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
    let source_domains = vec![Domain::Source, Domain::PseudoSource, Domain::Source, Domain::PseudoSource];
    let target_x = random_matrix(4, 3, &mut rng);
    // a bank with history, so both the first-sighting and the momentum branch are exercised
    let mut bank = CentroidBank::new(3, 4, 0.7).unwrap();
    let hist = random_matrix(2, 4, &mut rng);
    bank.update_centroids(&hist, &[0, 1], Domain::Source).unwrap();
    bank.update_centroids(&hist, &[2, 0], Domain::Target).unwrap();
    let extra_x = random_matrix(2, 3, &mut rng);
    let extra_labels = if with_extra { vec![1, 2] } else { vec![] };
    let settings = StepSettings {
        switches: LossSwitches::ALL,
        l_am: rng.random_range(0.2..0.95),
        mixmatch: MixMatchConfig::default(),
        mixmatch_pseudo_as_unlabeled: seed % 2 == 1,
    };
    Case { model, bank, source_x, source_labels, source_domains, target_x, extra_x, extra_labels, settings }
}

/// Largest relative error between the analytic gradient of the total loss
/// and central differences, over every parameter of a random 4-sample case.
pub fn total_gradient_error(seed: u64, with_extra: bool) -> f64 {
    let c = case(seed, with_extra);
    let inputs = StepInputs {
        source_x: &c.source_x,
        source_labels: &c.source_labels,
        source_domains: &c.source_domains,
        target_x: &c.target_x,
        extra: with_extra.then_some((&c.extra_x, c.extra_labels.as_slice())),
    };
    let frozen = freeze_step(&c.model, &inputs, &c.settings, &mut seeded(seed ^ 0xabc)).unwrap();
    let mut model = c.model.clone();
    model.zero_grad();
    let outcome = backward_step(&mut model, &c.bank, &inputs, &frozen, &c.settings).unwrap();
    assert!(outcome.losses.semantic != 0.0 && outcome.losses.semi_supervised > 0.0 && outcome.losses.adversarial > 0.0);

    let eval = |m: &GsdeModel| -> LossBreakdown { evaluate_step(m, &c.bank, &inputs, &frozen, &c.settings).unwrap() };
    let base = eval(&c.model);
    assert!((base.total - outcome.losses.total).abs() < 1e-12);

    let h = 1e-5;
    let names: Vec<String> = c.model.named_layers().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<(Matrix, Matrix)> =
        model.named_layers().into_iter().map(|(_, l)| (l.grad_weight.clone(), l.grad_bias.clone())).collect();
    let mut worst = 0.0f64;
    for (li, name) in names.iter().enumerate() {
        let is_disc = name.starts_with("discriminator");
        for which in 0..2 {
            let len = {
                let l = c.model.named_layers()[li].1;
                if which == 0 { l.weight.as_slice().len() } else { l.bias.as_slice().len() }
            };
            for idx in 0..len {
                let perturbed = |delta: f64| {
                    let mut m = c.model.clone();
                    let layer = m.layers_mut().nth(li).unwrap();
                    let p = if which == 0 { &mut layer.weight } else { &mut layer.bias };
                    p.as_mut_slice()[idx] += delta;
                    eval(&m)
                };
                let (lp, lm) = (perturbed(h), perturbed(-h));
                let fd = |f: fn(&LossBreakdown) -> f64| (f(&lp) - f(&lm)) / (2.0 * h);
                // reversal layer: feature-path parameters descend on -l_am·L_AD
                let expected = if is_disc {
                    fd(|l| l.total)
                } else {
                    fd(|l| l.classification + l.semantic + l.semi_supervised) - c.settings.l_am * fd(|l| l.adversarial)
                };
                let got = if which == 0 { analytic[li].0.as_slice()[idx] } else { analytic[li].1.as_slice()[idx] };
                let err = rel_err(got, expected, GRAD_FLOOR);
                worst = worst.max(err);
            }
        }
    }
    worst
}

/// Dense `(I + λ L_sym)` built straight from the weight matrix.
pub fn dense_system(w: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let n = w.len();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| w[i][j]).sum()).collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
        if deg[i] == 0.0 {
            continue;
        }
        a[i][i] += lambda;
        for j in 0..n {
            if j != i && w[i][j] > 0.0 {
                a[i][j] -= lambda * w[i][j] / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn random_graph(rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(2..=10);
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                let v = rng.random_range(0.0..1.0);
                w[i][j] = v;
                w[j][i] = v;
            }
        }
    }
    w
}

