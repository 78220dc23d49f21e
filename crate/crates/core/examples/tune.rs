// Scratch harness for calibrating the imbalanced-modality experiment.
// Usage: cargo run -p mmbal-core --example tune --release -- [dim_a frac_a dim_b frac_b hidden embed seeds epochs]

use mmbal_core::balance::BalanceConfig;
use mmbal_core::datagen::{generate, DatasetSpec, ModalitySpec};
use mmbal_core::nn::MlpSpec;
use mmbal_core::trainer::{
    train_run, unimodal_probe, Fusion, ModelSpec, ProbeConfig, TrainConfig,
};
use mmbal_core::rng::substream_seed_indexed;

struct Knobs {
    dim_a: usize,
    frac_a: f64,
    dim_b: usize,
    frac_b: f64,
    hidden_a: usize,
    embed_a: usize,
    hidden_b: usize,
    embed_b: usize,
    seeds: u64,
    epochs: usize,
}

fn dataset_spec(k: &Knobs, seed: u64) -> DatasetSpec {
    DatasetSpec {
        num_classes: 4,
        modalities: vec![
            ModalitySpec {
                dim: k.dim_a,
                class_separation: 3.0,
                noise_sigma: 0.5,
                informative_fraction: k.frac_a,
            },
            ModalitySpec {
                dim: k.dim_b,
                class_separation: 1.0,
                noise_sigma: 1.0,
                informative_fraction: k.frac_b,
            },
        ],
        n_train: 2000,
        n_val: 500,
        n_test: 1000,
        seed: substream_seed_indexed(seed, "data", 0),
    }
}

fn model_spec(k: &Knobs) -> ModelSpec {
    ModelSpec {
        encoder_specs: vec![
            MlpSpec::new(k.dim_a, vec![k.hidden_a], k.embed_a),
            MlpSpec::new(k.dim_b, vec![k.hidden_b], k.embed_b),
        ],
        fusion: Fusion::Concat,
        num_classes: 4,
        unimodal_heads: false,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: f64| args.get(i).map(|s| s.parse::<f64>().unwrap()).unwrap_or(d);
    let k = Knobs {
        dim_a: get(0, 24.0) as usize,
        frac_a: get(1, 0.25),
        dim_b: get(2, 8.0) as usize,
        frac_b: get(3, 1.0),
        hidden_a: get(4, 32.0) as usize,
        embed_a: get(5, 16.0) as usize,
        hidden_b: get(6, 32.0) as usize,
        embed_b: get(7, 16.0) as usize,
        seeds: get(8, 10.0) as u64,
        epochs: get(9, 100.0) as usize,
    };
    let lr = get(10, 1e-3);
    let batch = get(11, 32.0) as usize;
    let data_seed = get(12, 0.0) as u64;
    println!(
        "dim_a={} frac_a={} dim_b={} frac_b={} enc_a=[{}]->{} enc_b=[{}]->{} seeds={} epochs={} lr={} batch={}",
        k.dim_a, k.frac_a, k.dim_b, k.frac_b, k.hidden_a, k.embed_a, k.hidden_b, k.embed_b, k.seeds, k.epochs, lr, batch
    );

    let start = std::time::Instant::now();
    let mut wins = 0usize;
    let mut diffs = Vec::new();
    let mut alpha_order_ok = 0usize;
    let mut drop_events = 0usize;
    let mut drop_hits = 0usize;
    let mut recover_events = 0usize;
    let mut recover_hits = 0usize;
    let mut probe_b_diffs = Vec::new();
    let mut probe_a_diffs = Vec::new();

    let data = generate(&dataset_spec(&k, data_seed)).unwrap();
    for seed in 0..k.seeds {
        let model = model_spec(&k);
        let base_cfg = TrainConfig {
            epochs: k.epochs,
            seed,
            lr,
            batch_size: batch,
            ..TrainConfig::default()
        };
        let bal_cfg = TrainConfig {
            balance: Some(BalanceConfig::new(20, 3.0)),
            ..base_cfg.clone()
        };
        let base = train_run(&data, &model, &base_cfg).unwrap();
        let bal = train_run(&data, &model, &bal_cfg).unwrap();

        let base_acc = base.records.last().unwrap().test_acc;
        let bal_acc = bal.records.last().unwrap().test_acc;
        let base_peak = base.records.iter().map(|r| r.test_acc).fold(0.0, f64::max);
        let bal_peak = bal.records.iter().map(|r| r.test_acc).fold(0.0, f64::max);
        diffs.push(bal_acc - base_acc);
        if bal_acc > base_acc {
            wins += 1;
        }

        // alpha ordering: mean alpha per modality over events
        let mut alpha = [0.0f64; 2];
        let mut gaps = [0.0f64; 2];
        let mut events = 0usize;
        for r in &bal.records {
            for d in &r.diagnoses {
                alpha[d.modality] += d.alpha;
                gaps[d.modality] += d.gap;
                if d.modality == 0 {
                    events += 1;
                }
                eprintln!(
                    "  seed {seed} epoch {:>3} mod {} purity_train {:.3} purity_val {:.3} gap {:.3} alpha {:.3}",
                    d.epoch, d.modality, d.purity_train, d.purity_val, d.gap, d.alpha
                );
            }
        }
        let mean_alpha = [alpha[0] / events as f64, alpha[1] / events as f64];
        if mean_alpha[0] > mean_alpha[1] {
            alpha_order_ok += 1;
        }

        // drop / recover per event with a pre-event record
        let recs = &bal.records;
        for (i, r) in recs.iter().enumerate() {
            if r.diagnoses.is_empty() || i == 0 {
                continue;
            }
            let pre = recs[i - 1].test_acc;
            drop_events += 1;
            if r.test_acc < pre {
                drop_hits += 1;
            } else {
                eprintln!(
                    "  no-drop: seed {seed} epoch {} pre {pre:.4} post {:.4}",
                    r.epoch, r.test_acc
                );
            }
            recover_events += 1;
            let horizon = r.epoch + 20;
            if recs[i + 1..]
                .iter()
                .take_while(|x| x.epoch <= horizon)
                .any(|x| x.test_acc >= pre - 0.01)
            {
                recover_hits += 1;
            }
        }

        // probes
        for (m, out) in [(0usize, &base), (1, &base)].iter().map(|&(m, o)| (m, o)) {
            let _ = (m, out);
        }
        let probe = |out: &mmbal_core::trainer::TrainOutput, m: usize| {
            let cfg = ProbeConfig {
                seed: substream_seed_indexed(seed, "probe", m as u64),
                ..ProbeConfig::default()
            };
            unimodal_probe(
                &model.encoder_specs[m],
                &out.params.encoders[m],
                &data.train.modalities[m],
                &data.train.labels,
                &data.test.modalities[m],
                &data.test.labels,
                4,
                &cfg,
            )
            .unwrap()
            .0
        };
        let pa_base = probe(&base, 0);
        let pa_bal = probe(&bal, 0);
        let pb_base = probe(&base, 1);
        let pb_bal = probe(&bal, 1);
        probe_a_diffs.push(pa_bal - pa_base);
        probe_b_diffs.push(pb_bal - pb_base);

        // linear probes on raw features: headroom reference
        let raw = |m: usize| {
            mmbal_core::trainer::probe_on_features(
                &data.train.modalities[m],
                &data.train.labels,
                &data.test.modalities[m],
                &data.test.labels,
                4,
                &ProbeConfig { seed, ..ProbeConfig::default() },
            )
            .unwrap()
            .0
        };
        let (raw_a, raw_b) = (raw(0), raw(1));

        println!(
            "seed {seed}: base {base_acc:.4} (peak {base_peak:.4}) bal {bal_acc:.4} (peak {bal_peak:.4}) diff {:+.4} | alpha A {:.3} B {:.3} gap A {:.3} B {:.3} | probeA {pa_base:.3}->{pa_bal:.3} probeB {pb_base:.3}->{pb_bal:.3} | raw A {raw_a:.3} B {raw_b:.3}",
            bal_acc - base_acc,
            mean_alpha[0],
            mean_alpha[1],
            gaps[0] / events as f64,
            gaps[1] / events as f64,
        );
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("---");
    println!(
        "mean diff {:+.4} | wins {}/{} | alpha order {}/{} | drops {}/{} | recoveries {}/{} | probeB diff {:+.4} | probeA diff {:+.4}",
        mean(&diffs),
        wins,
        k.seeds,
        alpha_order_ok,
        k.seeds,
        drop_hits,
        drop_events,
        recover_hits,
        recover_events,
        mean(&probe_b_diffs),
        mean(&probe_a_diffs),
    );
    println!("elapsed: {:.1}s", start.elapsed().as_secs_f64());
}
