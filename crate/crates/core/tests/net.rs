use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slp_core::model::{
    build_dataset, db_to_linear, gen_channels, gen_symbols, DatasetConfig, ModulationSpec, Rotation, SlpInstance,
};
use slp_core::net::{
    checkpoint_to_bytes, infer, loss_eval, softplus, train, training_instances, Conv2d, Depth, Multipliers, NetConfig,
    Param, SlpDnet, TensorBuffer, TrainConfig,
};
use slp_core::prox::{BarrierParams, ProxDirection};
use slp_core::solvers::{forward_backward, prox_sweep, SlpKind};

fn instances(n: usize, k: usize, nt: usize, db: f64, seed: u64) -> Vec<SlpInstance> {
    let q = ModulationSpec::qpsk();
    let set = gen_channels(n, k, nt, seed).unwrap();
    let syms = gen_symbols(n, k, &q, seed + 7).unwrap();
    set.samples
        .iter()
        .zip(&syms)
        .map(|(h, s)| SlpInstance::from_channel(h, s, vec![db_to_linear(db); k], 1.0, q, Rotation::PerUser).unwrap())
        .collect()
}

fn tiny(kind: SlpKind) -> SlpDnet {
    let mut cfg = NetConfig::new(kind, 2, 2);
    cfg.blocks = 1;
    cfg.seed = 11;
    let mut net = SlpDnet::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for w in net.apb.conv3.weight.value.iter_mut() {
        *w = rng.random_range(-0.3..0.3);
    }
    net.apb.act1.slope.value[0] = 0.3;
    for p in &mut net.multipliers {
        p.value = vec![4.0, 3.0];
    }
    net
}

fn loss_value(net: &mut SlpDnet, batch: &[SlpInstance], vartheta: f64) -> f64 {
    net.loss_and_gradients(batch, Depth::Full, vartheta, true).unwrap().0.total
}

/// Worst relative error over every trainable entry, with an absolute floor for vanishing gradients.
fn gradient_check(kind: SlpKind, batch: &[SlpInstance]) -> (f64, usize) {
    let mut net = tiny(kind);
    let vartheta = 0.3;
    let (_, pass) = net.loss_and_gradients(batch, Depth::Full, vartheta, true).unwrap();
    assert_eq!(pass.skipped_count(), 0, "{kind:?}: test batch must stay interior");
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    let n_params = analytic.len();
    let base = loss_value(&mut net, batch, vartheta).abs();
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for j in 0..n_params {
        for e in 0..analytic[j].len() {
            let orig = net.params()[j].value[e];
            // prox roots carry last-ulp jitter, so those parameters need the wider step;
            // APB entries use a narrow one to stay clear of PReLU kinks
            let rel = if net.params()[j].name.starts_with("apb") { 1e-5 } else { 1e-4 };
            let h = rel * orig.abs().max(1.0);
            let mut at = |x: f64| {
                net.params_mut()[j].value[e] = x;
                loss_value(&mut net, batch, vartheta)
            };
            // fourth-order central stencil
            let fd = (8.0 * (at(orig + h) - at(orig - h)) - (at(orig + 2.0 * h) - at(orig - 2.0 * h))) / (12.0 * h);
            net.params_mut()[j].value[e] = orig;
            let a = analytic[j][e];
            // rounding floor of the stencil; entries below it are structural zeros
            let noise = 512.0 * f64::EPSILON * base.max(1.0) / h;
            let err = ((a - fd).abs() - noise).max(0.0) / a.abs().max(fd.abs()).max(1e-12);
            worst = worst.max(err);
            entries += 1;
        }
    }
    (worst, entries)
}

/// First batch on which every prox step of the tiny models is applied, so the loss is smooth.
fn interior_batch() -> Vec<SlpInstance> {
    (40..200)
        .map(|seed| instances(4, 2, 2, 3.0, seed))
        .find(|b| {
            [SlpKind::Relaxed, SlpKind::Strict, SlpKind::Robust].iter().all(|&k| {
                let b: Vec<SlpInstance> = b.iter().map(|i| i.clone().with_error_bound(0.01).unwrap()).collect();
                tiny(k).forward(&b, Depth::Full, true).map(|p| p.skipped_count() == 0).unwrap_or(false)
            })
        })
        .expect("an interior batch among 160 seeds")
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let batch = interior_batch();
    for kind in [SlpKind::Relaxed, SlpKind::Strict] {
        let (worst, entries) = gradient_check(kind, &batch);
        assert!(entries > 6000);
        assert!(worst < 1e-4, "{kind:?}: worst relative error {worst:e}");
    }
    let robust: Vec<SlpInstance> = batch.into_iter().map(|i| i.with_error_bound(0.01).unwrap()).collect();
    let (worst, _) = gradient_check(SlpKind::Robust, &robust);
    assert!(worst < 1e-4, "robust: worst relative error {worst:e}");
}

#[test]
fn constant_blocks_replay_algorithm_one() {
    // at 0 dB with unit noise the network's unit-scale instance is the instance itself
    let batch = instances(3, 4, 4, 0.0, 2);
    for kind in [SlpKind::Relaxed, SlpKind::Strict] {
        let mut net = SlpDnet::new(NetConfig::new(kind, 4, 4)).unwrap();
        for b in &mut net.blocks {
            b.set_constant_outputs(0.8, 0.15, 0.4);
        }
        let pass = net.forward(&batch, Depth::Blocks(2), false).unwrap();
        for (s, inst) in batch.iter().enumerate() {
            let params: Vec<BarrierParams> = (0..2)
                .map(|r| {
                    let (mu, gamma, lambda) = pass.block_outputs(r)[s];
                    BarrierParams::new(mu, gamma, lambda).unwrap()
                })
                .collect();
            // λ of the second block carries the first block's λ through the skip path
            assert_eq!(params[1].lambda, 2.0 * params[0].lambda);
            let trace = forward_backward(kind, inst, &pass.w0[s], &params, ProxDirection::Quadrature).unwrap();
            assert_eq!(trace[2], pass.w[s], "{kind:?} sample {s}");
        }
    }
}

#[test]
fn vanishing_barrier_half_step_is_prox_of_zero() {
    let batch = instances(2, 4, 4, 0.0, 3);
    let mut net = SlpDnet::new(NetConfig::new(SlpKind::Strict, 4, 4)).unwrap();
    net.blocks[0].set_constant_outputs(1e-9, 0.5, 0.0);
    let pass = net.forward(&batch, Depth::Blocks(1), false).unwrap();
    for (s, inst) in batch.iter().enumerate() {
        let (mu, gamma, lambda) = pass.block_outputs(0)[s];
        assert_eq!(lambda, 0.0);
        assert!((gamma - 0.5).abs() < 1e-12);
        let zero = DVector::zeros(8);
        let (w, _) = prox_sweep(SlpKind::Strict, inst, &zero, gamma, mu, ProxDirection::Quadrature).unwrap();
        assert!((&w - &pass.w[s]).amax() < 1e-12);
        assert!(w.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn inference_is_row_wise_and_total() {
    let batch = instances(2, 4, 4, 20.0, 4);
    let mut net = SlpDnet::new(NetConfig::new(SlpKind::Relaxed, 4, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for w in net.apb.conv3.weight.value.iter_mut() {
        *w = rng.random_range(-0.1..0.1);
    }
    net.apb.bn1.running_mean.iter_mut().for_each(|m| *m = 0.2);
    let single = infer(&mut net, &batch[..1], true).unwrap();
    let dup = infer(&mut net, &[batch[0].clone(), batch[0].clone()], true).unwrap();
    assert_eq!(single.precoders[0], dup.precoders[0]);
    assert_eq!(dup.precoders[0], dup.precoders[1]);
    let both = infer(&mut net, &batch, false).unwrap();
    assert!(both.power.iter().all(|p| p.is_finite()));
    assert_eq!(both.residuals.len(), 2);
    assert!(both.residuals.iter().all(|r| r.len() == 4));
    assert!(both.rescaled.is_none());
    if let Some(Some(r)) = single.rescaled.as_ref().map(|v| v[0].clone()) {
        assert!(r.factor >= 1.0);
    }
}

fn small_training_set(n: usize, seed: u64) -> Vec<SlpInstance> {
    let q = ModulationSpec::qpsk();
    let set = gen_channels(n, 4, 4, seed).unwrap();
    let syms = gen_symbols(n, 4, &q, seed + 1).unwrap();
    let data = build_dataset(&set, &syms, &DatasetConfig::default()).unwrap();
    training_instances(&data, &TrainConfig { seed, ..TrainConfig::default() }, q).unwrap()
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = small_training_set(40, 5);
    let mut net = SlpDnet::new(NetConfig::new(SlpKind::Relaxed, 4, 4)).unwrap();
    let before: Vec<Param> = net.params().into_iter().cloned().collect();
    let cfg = TrainConfig { learning_rate: 0.0, batch_size: 40, pum_iterations: 3, apb_iterations: 3, ..TrainConfig::default() };
    let trace = train(&mut net, &data, &cfg).unwrap();
    assert_eq!(trace.len(), 9);
    for (a, b) in before.iter().zip(net.params()) {
        assert_eq!(a.value, b.value, "{}", a.name);
    }
    for phase in trace.chunks(3) {
        assert!(phase.iter().all(|r| r.loss.total.to_bits() == phase[0].loss.total.to_bits()));
    }
}

#[test]
fn fixed_batch_descends() {
    let data = small_training_set(200, 6);
    let mut cfg = NetConfig::new(SlpKind::Relaxed, 4, 4);
    cfg.blocks = 1;
    let mut net = SlpDnet::new(cfg).unwrap();
    let tc = TrainConfig { pum_iterations: 30, apb_iterations: 0, ..TrainConfig::default() };
    let trace = train(&mut net, &data, &tc).unwrap();
    assert_eq!(trace.len(), 30);
    let loss: Vec<f64> = trace.iter().map(|r| r.loss.total).collect();
    assert!(loss[29] < loss[0]);
    // prox steps switch between applied and skipped, so the raw trace has jumps
    let smooth: Vec<f64> = loss
        .iter()
        .scan(loss[0], |e, &l| {
            *e = 0.8 * *e + 0.2 * l;
            Some(*e)
        })
        .collect();
    assert!(smooth.windows(2).all(|w| w[1] < w[0]), "{loss:?}");
}

#[test]
fn training_is_deterministic() {
    let data = small_training_set(60, 7);
    let run = || {
        let mut net = SlpDnet::new(NetConfig::new(SlpKind::Relaxed, 4, 4)).unwrap();
        let tc = TrainConfig { batch_size: 20, pum_iterations: 2, apb_iterations: 2, ..TrainConfig::default() };
        let trace = train(&mut net, &data, &tc).unwrap();
        (trace, checkpoint_to_bytes(&net))
    };
    let (t1, c1) = run();
    let (t2, c2) = run();
    assert_eq!(t1, t2);
    assert_eq!(c1, c2);
}

#[test]
fn larger_vartheta_never_grows_weights() {
    let data = small_training_set(50, 8);
    let norm_after = |vartheta: f64| {
        let mut cfg = NetConfig::new(SlpKind::Relaxed, 4, 4);
        cfg.blocks = 1;
        let mut net = SlpDnet::new(cfg).unwrap();
        let tc = TrainConfig {
            batch_size: 50,
            learning_rate: 1e-2,
            decay: 1.0,
            vartheta,
            pum_iterations: 60,
            apb_iterations: 20,
            ..TrainConfig::default()
        };
        train(&mut net, &data, &tc).unwrap();
        net.params().iter().filter(|p| p.regularized).map(|p| p.sq_norm()).sum::<f64>()
    };
    let small = norm_after(1e-3);
    let large = norm_after(10.0);
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn loss_matches_scalar_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batch = instances(6, 3, 2, 12.0, 12);
    let w: Vec<DVector<f64>> = (0..6).map(|_| DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0))).collect();
    let m: Vec<Multipliers> = (0..6)
        .map(|_| Multipliers::new((0..3).map(|_| rng.random_range(0.0..1.0)).collect(), (0..3).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
        .collect();
    let theta = Param::new("x", vec![3], vec![1.0, -2.0, 0.5], true);
    let got = loss_eval(SlpKind::Relaxed, &batch, &w, &m, &[&theta], 4, 0.2).unwrap();
    let t = (std::f64::consts::PI / 4.0).tan();
    let mut expect = 0.0;
    for ((inst, w), m) in batch.iter().zip(&w).zip(&m) {
        let (wr, wi) = (&w.as_slice()[..2], &w.as_slice()[2..]);
        let mut term = wr.iter().chain(wi).map(|x| x * x).sum::<f64>();
        for u in 0..3 {
            let l = inst.channels[u].as_slice();
            let (hr, hi) = (&l[..2], &l[2..]);
            // ĥᵀw with w = w_R − j·(stacked imaginary part)
            let (mut re, mut im) = (0.0, 0.0);
            for a in 0..2 {
                re += hr[a] * wr[a] + hi[a] * wi[a];
                im += hi[a] * wr[a] - hr[a] * wi[a];
            }
            let c = inst.margin(u);
            term += m.first[u] * (im - t * re + t * c) + m.second[u] * (-im - t * re + t * c);
        }
        expect += term / 6.0;
    }
    expect += 0.2 / 4.0 * 5.25;
    assert!((got.total - expect).abs() < 1e-10 * expect.abs().max(1.0), "{} vs {expect}", got.total);
}

#[test]
fn layer_examples() {
    assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut conv = Conv2d::new("c", 1, 1, 3, 1, &mut rng);
    conv.bias.value[0] = 0.0;
    let mut delta = vec![0.0; 9];
    delta[4] = 1.0;
    let (y, _) = conv.forward(&TensorBuffer::new(vec![1, 1, 3, 3], delta).unwrap()).unwrap();
    // cross-correlation of a centred delta returns the kernel flipped in both axes
    for j in 0..9 {
        assert_eq!(y.values()[j], conv.weight.value[8 - j]);
    }
}

/// Direct loops for conv, batch-norm (inference) and PReLU.
fn reference_apb(net: &SlpDnet, x: &[f64], b: usize, h: usize, w: usize) -> Vec<f64> {
    let conv = |c: &Conv2d, input: &[f64], cin: usize| -> Vec<f64> {
        let mut out = vec![0.0; b * c.out_channels * h * w];
        for s in 0..b {
            for o in 0..c.out_channels {
                for y in 0..h {
                    for xx in 0..w {
                        let mut acc = c.bias.value[o];
                        for ci in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let (iy, ix) = (y as isize + ky as isize - 1, xx as isize + kx as isize - 1);
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        acc += c.weight.value[((o * cin + ci) * 3 + ky) * 3 + kx]
                                            * input[((s * cin + ci) * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                        }
                        out[((s * c.out_channels + o) * h + y) * w + xx] = acc;
                    }
                }
            }
        }
        out
    };
    let bn_act = |bn: &slp_core::net::BatchNorm2d, a: f64, v: &mut Vec<f64>, ch: usize| {
        for (j, x) in v.iter_mut().enumerate() {
            let c = (j / (h * w)) % ch;
            let y = bn.scale.value[c] * (*x - bn.running_mean[c]) / (bn.running_var[c] + bn.eps).sqrt() + bn.shift.value[c];
            *x = if y >= 0.0 { y } else { a * y };
        }
    };
    let apb = &net.apb;
    let mut y = conv(&apb.conv1, x, 1);
    bn_act(&apb.bn1, apb.act1.slope.value[0], &mut y, apb.conv1.out_channels);
    let mut y = conv(&apb.conv2, &y, apb.conv1.out_channels);
    bn_act(&apb.bn2, apb.act2.slope.value[0], &mut y, apb.conv2.out_channels);
    conv(&apb.conv3, &y, apb.conv2.out_channels)
}

#[test]
fn apb_matches_reference_layers() {
    let mut net = SlpDnet::new(NetConfig::new(SlpKind::Relaxed, 2, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in net.apb.params_mut() {
        for v in p.value.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    for v in net.apb.bn2.running_var.iter_mut() {
        *v = rng.random_range(0.5..2.0);
    }
    let x: Vec<f64> = (0..2 * 4 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = TensorBuffer::new(vec![2, 1, 4, 3], x.clone()).unwrap();
    let (y, _) = net.apb.forward(&t, false).unwrap();
    let r = reference_apb(&net, &x, 2, 4, 3);
    for (a, b) in y.values().iter().zip(&r) {
        assert!((a - b).abs() < 1e-10);
    }
}
