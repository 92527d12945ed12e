use bridger::baselines::{
    ddpm_train, residual_train, DdpmConfig, DdpmModel, DdpmSchedule, ResidualConfig, ResidualModel,
};
use bridger::data::Dataset;
use bridger::numeric::{Activation, Layer, Matrix, MlpNet, Rng};
use bridger::source::SourcePolicy;
use bridger::train::{LrSchedule, NetConfig};

fn tiny(time_embed_width: usize) -> NetConfig {
    NetConfig {
        hidden: vec![6, 5],
        activation: Activation::Tanh,
        time_embed_width,
    }
}

fn fd_relative_error(net: &MlpNet, analytic: &[f64], loss: impl Fn(&MlpNet) -> f64) -> f64 {
    let h = 1e-6;
    let mut probe = net.clone();
    let lens: Vec<usize> = net.blocks().iter().map(|b| b.1.len()).collect();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for (bi, len) in lens.into_iter().enumerate() {
        for j in 0..len {
            let orig = net.blocks()[bi].1[j];
            probe.blocks_mut()[bi].1[j] = orig + h;
            let lp = loss(&probe);
            probe.blocks_mut()[bi].1[j] = orig - h;
            let lm = loss(&probe);
            probe.blocks_mut()[bi].1[j] = orig;
            let num = (lp - lm) / (2.0 * h);
            worst = worst.max((analytic[k] - num).abs() / analytic[k].abs().max(num.abs()).max(1e-6));
            k += 1;
        }
    }
    worst
}

fn random(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, rng.normal_vec(rows * cols)).unwrap()
}

#[test]
fn ddpm_gradient_matches_finite_differences() {
    let mut rng = Rng::new(1);
    let cfg = DdpmConfig {
        k_train: 10,
        net: tiny(4),
        ..DdpmConfig::default()
    };
    let model = DdpmModel::new(&cfg, 2, 1, &mut rng).unwrap();
    let (a1, x, z) = (random(&mut rng, 5, 2), random(&mut rng, 5, 1), random(&mut rng, 5, 2));
    let ks = [0, 3, 9, 5, 1];
    let (_, grads) = model.loss_batch(&a1, &x, &ks, &z).unwrap();
    let flat: Vec<f64> = grads.blocks().into_iter().flatten().copied().collect();
    let err = fd_relative_error(&model.g_net, &flat, |net| {
        let m = DdpmModel::from_parts(net.clone(), model.schedule.clone(), 1, 2).unwrap();
        m.loss_batch(&a1, &x, &ks, &z).unwrap().0
    });
    assert!(err < 1e-4, "{err}");
}

#[test]
fn residual_gradient_matches_finite_differences() {
    let mut rng = Rng::new(2);
    let cfg = ResidualConfig {
        net: tiny(0),
        ..ResidualConfig::default()
    };
    let model = ResidualModel::new(SourcePolicy::standard_normal(2), &cfg, 2, 1, &mut rng).unwrap();
    let (a0, a1, x) = (random(&mut rng, 5, 2), random(&mut rng, 5, 2), random(&mut rng, 5, 1));
    let (_, grads) = model.loss_batch(&a0, &a1, &x).unwrap();
    let flat: Vec<f64> = grads.blocks().into_iter().flatten().copied().collect();
    let err = fd_relative_error(&model.r_net, &flat, |net| {
        let m = ResidualModel::from_parts(net.clone(), model.source.clone(), 1, 2).unwrap();
        m.loss_batch(&a0, &a1, &x).unwrap().0
    });
    assert!(err < 1e-4, "{err}");
}

#[test]
fn exact_noise_predictor_has_zero_loss() {
    // one-step schedule and zero data: the noisy input is √(1−ᾱ)·z, so a
    // linear net with weight 1/√(1−ᾱ) on the action recovers z exactly
    let schedule = DdpmSchedule::from_betas(vec![0.75]).unwrap();
    let w = 1.0 / (1.0 - schedule.alpha_bars()[0]).sqrt();
    let net = MlpNet::from_layers(
        vec![Layer {
            weight: Matrix::from_rows(&[[0.0, w]]).unwrap(),
            bias: vec![0.0],
        }],
        Activation::Tanh,
    )
    .unwrap();
    let model = DdpmModel::from_parts(net, schedule, 0, 1).unwrap();
    let z = Matrix::from_rows(&[[0.3], [-1.2], [2.5]]).unwrap();
    let (loss, _) = model.loss_batch(&Matrix::zeros(3, 1), &Matrix::zeros(3, 0), &[0, 0, 0], &z).unwrap();
    assert!(loss < 1e-28, "{loss}");
}

#[test]
fn zero_predictor_ddim_is_the_composed_rescaling() {
    let cfg = DdpmConfig {
        net: tiny(8),
        ..DdpmConfig::default()
    };
    let mut model = DdpmModel::new(&cfg, 2, 0, &mut Rng::new(0)).unwrap();
    model.g_net = MlpNet::zeros(model.g_net.widths(), Activation::Tanh).unwrap().with_time_embed_width(8);
    let a_t = Matrix::from_rows(&[[0.4, -1.0], [2.0, 0.1]]).unwrap();
    let x = Matrix::zeros(2, 0);
    for k_infer in [100, 7, 1] {
        let out = model.ddim_from_noise(&x, &a_t, k_infer).unwrap();
        // each step maps a ↦ sqrt(ᾱ_prev / ᾱ) · a
        let ab = model.schedule.alpha_bars();
        let steps = model.schedule.subsequence(k_infer).unwrap();
        let mut factor = 1.0;
        for i in (0..steps.len()).rev() {
            let prev = if i == 0 { 1.0 } else { ab[steps[i - 1]] };
            factor *= (prev / ab[steps[i]]).sqrt();
        }
        for (o, a) in out.as_slice().iter().zip(a_t.as_slice()) {
            assert!((o - factor * a).abs() <= 1e-9 * (factor * a).abs(), "K={k_infer}: {o} vs {}", factor * a);
        }
        let closed = 1.0 / ab[99].sqrt();
        assert!((factor - closed).abs() <= 1e-9 * closed);
    }
}

fn point_mass(p: f64, n: usize) -> Dataset {
    Dataset::unconditional(Matrix::from_vec(n, 1, vec![p; n]).unwrap()).unwrap()
}

#[test]
fn ddim_reaches_a_point_mass() {
    let p = 1.7;
    let cfg = DdpmConfig {
        net: NetConfig {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            time_embed_width: 8,
        },
        optim: bridger::train::OptimConfig {
            epochs: 400,
            batch_size: 256,
            lr: LrSchedule::constant(3e-3),
            adam: Default::default(),
        },
        ..DdpmConfig::default()
    };
    let out = ddpm_train(&point_mass(p, 512), &cfg, &mut Rng::new(3)).unwrap();
    assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    let mut rng = Rng::new(4);
    let many = out.model.generate(&[], 2000, 20, &mut rng).unwrap();
    let mean = many.column(0).iter().sum::<f64>() / many.n() as f64;
    assert!((mean - p).abs() < 0.2, "mean {mean}");
    let one = out.model.ddim_sample(&[], 1, &mut rng).unwrap();
    assert!((one[0] - p).abs() < 0.5, "one step {}", one[0]);
    let a = out.model.ddim_sample(&[], 10, &mut Rng::new(9)).unwrap();
    let b = out.model.ddim_sample(&[], 10, &mut Rng::new(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn residual_on_identical_point_masses_is_near_zero() {
    let p = -0.6;
    let source = SourcePolicy::gaussian(vec![p], 1e-9).unwrap();
    let cfg = ResidualConfig {
        net: tiny(0),
        optim: bridger::train::OptimConfig {
            epochs: 300,
            batch_size: 64,
            lr: LrSchedule::constant(3e-3),
            adam: Default::default(),
        },
    };
    let out = residual_train(&point_mass(p, 128), &source, &cfg, &mut Rng::new(0)).unwrap();
    let r = out.model.r_net.forward(&[p]).unwrap()[0];
    assert!(r.abs() < 0.02, "residual {r}");
    let s = out.model.generate(&[], 100, &mut Rng::new(1)).unwrap();
    assert!(s.iter().all(|v| (v[0] - p).abs() < 0.02));
}

#[test]
fn checkpoints_round_trip() {
    let mut rng = Rng::new(6);
    let d = DdpmModel::new(&DdpmConfig::default(), 2, 1, &mut rng).unwrap();
    let text = serde_json::to_string(&d.to_checkpoint(6, "h").unwrap()).unwrap();
    assert_eq!(DdpmModel::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap(), d);
    let r = ResidualModel::new(SourcePolicy::ring(vec![0.0, 3.0], 2.0, 0.1).unwrap(), &ResidualConfig::default(), 2, 1, &mut rng).unwrap();
    let text = serde_json::to_string(&r.to_checkpoint(6, "h").unwrap()).unwrap();
    let ck: bridger::numeric::ModelCheckpoint = serde_json::from_str(&text).unwrap();
    assert!(DdpmModel::from_checkpoint(&ck).is_err());
    assert_eq!(ResidualModel::from_checkpoint(&ck).unwrap(), r);
}
