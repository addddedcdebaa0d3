use affect_ssl::dataset::{split_labeled, SequenceSample};
use affect_ssl::models::{train_sgan, train_supervised, NetShape, SganNet, SupervisedNet, TrainConfig};
use affect_ssl::nn::checkpoint::write_checkpoint;
use affect_ssl::nn::ParamStore;
use affect_ssl::seed::rng_from;
use rand_distr::{Distribution, StandardNormal};

/// Two Gaussian classes of unit variance whose column 0 differs by `sep`.
fn gaussian_classes(n: usize, sep: f64, seed: u64) -> Vec<SequenceSample> {
    let shape = NetShape::default();
    let mut rng = rng_from(seed, &[]);
    (0..n)
        .map(|k| {
            let label = (k % 2) as u8;
            let inputs = (0..shape.input_len())
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if i % shape.features == 0 { z + sep * f64::from(label) - sep / 2.0 } else { z }
                })
                .collect();
            SequenceSample { inputs, label, subject_id: "S0".into(), labeled: true, window_index: k }
        })
        .collect()
}

fn accuracy(probs: &[f64], samples: &[SequenceSample]) -> f64 {
    let hits = probs.iter().zip(samples).filter(|(p, s)| (**p >= 0.5) == (s.label == 1)).count();
    hits as f64 / samples.len() as f64
}

#[test]
fn supervised_learns_separable_classes() {
    let train = gaussian_classes(2000, 6.0, 1);
    let cfg = TrainConfig { seed: 3, ..TrainConfig::supervised() };
    let (net, trace) = train_supervised(SupervisedNet::new(NetShape::default(), &cfg, 2), &train, &cfg).unwrap();
    assert_eq!(trace.len(), 15);
    assert!(trace.iter().all(|l| l.is_finite()));
    assert!(accuracy(&net.predict(&train).unwrap(), &train) >= 0.97);
    let ma: Vec<f64> = trace.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    assert!(ma.windows(2).all(|w| w[1] <= w[0]), "moving average {ma:?}");
}

fn sgan_accuracy(fraction: f64) -> f64 {
    let train = split_labeled(gaussian_classes(1000, 6.0, 4), fraction, 5).unwrap();
    let test = gaussian_classes(400, 6.0, 6);
    let cfg = TrainConfig { seed: 7, labeled_fraction: fraction, ..TrainConfig::sgan() };
    let (net, trace) = train_sgan(SganNet::new(NetShape::default(), &cfg, 8), &train, &cfg).unwrap();
    assert_eq!(trace.len(), cfg.epochs);
    assert!(net.store.all_finite());
    accuracy(&net.predict(&test).unwrap(), &test)
}

#[test]
fn sgan_with_every_label_visible() {
    let acc = sgan_accuracy(1.0);
    assert!(acc >= 0.95, "{acc}");
}

#[test]
fn sgan_with_thirty_percent_labels() {
    let acc = sgan_accuracy(0.3);
    assert!(acc >= 0.90, "{acc}");
}

fn checkpoint_bytes(store: &ParamStore, ids: &[affect_ssl::nn::ParamId]) -> Vec<u8> {
    let mut sub = ParamStore::new();
    for &id in ids {
        sub.add(store.name(id), store.tensor(id).clone());
    }
    let mut out = Vec::new();
    write_checkpoint(&sub, &mut out).unwrap();
    out
}

#[test]
fn heads_read_one_backbone_throughout_training() {
    let shape = NetShape { steps: 4, features: 3, hidden: 3, dropout: 0.2 };
    let cfg = TrainConfig { epochs: 1, batch_size: 4, latent_dim: 5, generator_hidden: 7, ..TrainConfig::sgan() };
    let mut net = SganNet::new(shape, &cfg, 1);
    let samples: Vec<SequenceSample> = (0..8)
        .map(|k| SequenceSample {
            inputs: (0..12).map(|i| ((i * k) % 5) as f64 - 2.0).collect(),
            label: (k % 2) as u8,
            subject_id: "S0".into(),
            labeled: true,
            window_index: k,
        })
        .collect();
    let bb = net.backbone.params().len();
    let mut rng = rng_from(2, &[]);
    for _ in 0..3 {
        let via_c = net.classifier_params();
        let via_d = net.discriminator_params();
        assert_eq!(checkpoint_bytes(&net.store, &via_c[..bb]), checkpoint_bytes(&net.store, &via_d[..bb]));
        let refs: Vec<&SequenceSample> = samples.iter().collect();
        net.train_step(&refs[..4], &refs, &mut rng).unwrap();
    }
}

#[test]
fn parameter_counts_differ_only_in_the_head() {
    let shape = NetShape::default();
    let sup = SupervisedNet::new(shape, &TrainConfig::supervised(), 0);
    let sgan = SganNet::new(shape, &TrainConfig::sgan(), 0);
    let backbone = sgan.store.scalar_count_of(&sgan.backbone.params());
    assert_eq!(sup.store.scalar_count_of(&sup.backbone.params()), backbone);
    // Dense(20 -> 1) against dense(20 -> 2).
    assert_eq!(sup.store.scalar_count(), backbone + 21);
    assert_eq!(sgan.store.scalar_count_of(&sgan.classifier_params()), backbone + 42);
}

#[test]
fn five_hundred_steps_stay_finite() {
    // Bounded inputs with a few extreme rows; 8 batches × 63 epochs = 504 steps.
    let shape = NetShape { steps: 3, hidden: 4, ..NetShape::default() };
    let mut rng = rng_from(11, &[]);
    let train: Vec<SequenceSample> = (0..64)
        .map(|k| {
            let scale = if k % 16 == 0 { 50.0 } else { 1.0 };
            let inputs = (0..shape.input_len())
                .map(|_| scale * rand::Rng::random_range(&mut rng, -1.0..1.0))
                .collect();
            SequenceSample { inputs, label: (k % 2) as u8, subject_id: "S0".into(), labeled: true, window_index: k }
        })
        .collect();
    let cfg = TrainConfig { epochs: 63, batch_size: 8, lr: 0.01, ..TrainConfig::supervised() };
    let (net, trace) = train_supervised(SupervisedNet::new(shape, &cfg, 1), &train, &cfg).unwrap();
    assert!(net.store.all_finite() && trace.iter().all(|l| l.is_finite()));
    assert!(net.predict(&train).unwrap().iter().all(|p| p.is_finite()));

    let cfg = TrainConfig { labeled_fraction: 0.3, ..TrainConfig::sgan() };
    let cfg = TrainConfig { epochs: 63, batch_size: 8, lr: 0.01, latent_dim: 5, generator_hidden: 8, ..cfg };
    let train = split_labeled(train, 0.3, 3).unwrap();
    let (net, trace) = train_sgan(SganNet::new(shape, &cfg, 2), &train, &cfg).unwrap();
    assert!(net.store.all_finite());
    assert!(trace.iter().all(|l| [l.c_loss, l.d_loss_real, l.d_loss_fake, l.g_loss].iter().all(|v| v.is_finite())));
    assert!(net.predict(&train).unwrap().iter().all(|p| p.is_finite()));
}
