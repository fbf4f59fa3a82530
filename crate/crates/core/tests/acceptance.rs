//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 5-8 train desk-scale models for hours and only run with
//! `cargo test --release --test acceptance -- --include-ignored` (or
//! `--ignored` for just those). Trained runs are cached under the target
//! directory so criteria share them and reruns are cheap.

use evfield::events::{
    count_events, events_to_delta_l, uniform_edges, sync_offset, Event, EventCountFrame, EventGenerator,
    EventStream, Polarity, Thresholds,
};
use evfield::io::{decode_events, encode_events, read_events, write_events, Dataset, Split};
use evfield::metrics::{evaluate, EvalOptions, EvalReport};
use evfield::nn::{positional_encode, Activation, MlpParams};
use evfield::radiance::{
    composite_segment, delta_l_gradients, look_at, render_delta_l, Camera, ModelConfig, Ray, RaySampleSet,
    RenderOptions, SceneModel,
};
use evfield::synth::{gen_dataset, AnalyticScene, DatasetConfig};
use evfield::training::{deadzone_loss, deadzone_term, run, TrainConfig, Trainer};
use evfield::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (u32, &'static str, bool, fn() -> Outcome);

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include = args.iter().any(|a| a == "--include-ignored");
    let only_ignored = args.iter().any(|a| a == "--ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 10] = [
        (1, "event-model exactness", false, event_model_exactness),
        (2, "discretization dip", false, discretization_dip),
        (3, "gradient fidelity", false, gradient_fidelity),
        (4, "compositing invariants", false, compositing_invariants),
        (5, "desk-scale end-to-end training", true, desk_training),
        (6, "varied-batching ablation", true, batching_ablation),
        (7, "transfer fine-tuning", true, transfer),
        (8, "views ablation", true, views_ablation),
        (9, "burst synchronization", false, burst_sync),
        (10, "EVD1 codec", false, codec),
    ];
    let mut failed = 0;
    for (id, name, long, f) in criteria {
        let label = format!("criterion {id}");
        if !filters.is_empty() && !filters.iter().any(|p| label.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let selected = if long { include || only_ignored } else { !only_ignored };
        if !selected {
            println!("criterion {id:>2} SKIP {name}: long-running, needs --include-ignored");
            continue;
        }
        let start = Instant::now();
        let o = match std::panic::catch_unwind(f) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            }
        };
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name}: {} [{:.1?}]", o.detail, start.elapsed());
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn within(elapsed: Duration, budget_secs: f64) -> bool {
    elapsed.as_secs_f64() < budget_secs
}

// ---------------------------------------------------------------- 1

fn random_stream(rng: &mut ChaCha8Rng, mixed: bool) -> (Vec<Event>, usize, usize) {
    let w = rng.gen_range(1..=64usize);
    let h = rng.gen_range(1..=64usize);
    let n = if rng.gen_bool(0.02) { 100_000 } else { 10f64.powf(rng.gen_range(0.0..5.0)) as usize };
    let flip = rng.gen::<u64>();
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let x = rng.gen_range(0..w) as u16;
            let y = rng.gen_range(0..h) as u16;
            let positive = if mixed {
                rng.gen_bool(0.5)
            } else {
                (flip >> ((x as usize * 7 + y as usize * 13) % 64)) & 1 == 1
            };
            let p = if positive { Polarity::Positive } else { Polarity::Negative };
            Event::new(rng.gen_range(0.0..1.0), x, y, p)
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    (events, w, h)
}

fn event_model_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut additive, mut counted, mut total_events) = (0, 0, 0usize);
    for s in 0..1000 {
        let mixed = s % 2 == 0;
        let (events, w, h) = random_stream(&mut rng, mixed);
        total_events += events.len();
        // arbitrary thresholds; symmetric when a pixel mixes polarities
        let c = rng.gen_range(0.05..0.5);
        let th = if mixed {
            Thresholds::new(c, -c).unwrap()
        } else {
            Thresholds::new(c, -rng.gen_range(0.05..0.5)).unwrap()
        };
        let whole = events_to_delta_l::<f64>(&events, th, (w, h), (0.0, 1.0)).unwrap();
        let raw = EventCountFrame::from_events(&events, w, h, (0.0, 1.0)).unwrap();
        if count_events(&whole, &th).counts == raw.counts {
            counted += 1;
        }
        // dyadic thresholds make sums of frames exact in floating point
        let dy = Thresholds::new((th.c_pos * 64.0).round().max(1.0) / 64.0, (th.c_neg * 64.0).round().min(-1.0) / 64.0)
            .unwrap();
        let cut = rng.gen_range(0.0..1.0);
        let k = events.partition_point(|e| e.t < cut);
        let a = events_to_delta_l::<f64>(&events[..k], dy, (w, h), (0.0, cut)).unwrap();
        let b = events_to_delta_l::<f64>(&events[k..], dy, (w, h), (cut, 1.0)).unwrap();
        let full = events_to_delta_l::<f64>(&events, dy, (w, h), (0.0, 1.0)).unwrap();
        let ca = count_events(&a, &dy);
        let cb = count_events(&b, &dy);
        let count_add = ca.counts.iter().zip(&cb.counts).map(|(x, y)| x + y).eq(raw.counts.iter().copied());
        if a.add(&b).unwrap().values == full.values && count_add {
            additive += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        additive == 1000 && counted == 1000 && within(elapsed, 10.0),
        format!(
            "additive {additive}/1000, counts exact {counted}/1000 over {total_events} events in {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn discretization_dip() -> Outcome {
    let start = Instant::now();
    let th = Thresholds::<f64>::new(0.2, -0.2).unwrap();
    let depth = 2.5 * th.c_neg.abs();
    let (t1, t2) = (0.5, 1.0);
    // linear dip to the bottom at t1, recovery by t2
    let mut gen = EventGenerator::new(&[0.0], 1, 0.0, th);
    let down = gen.advance(&[-depth], t1).unwrap();
    let up = gen.advance(&[0.0], t2).unwrap();
    // smooth dip sampled on 200 sub-steps
    let curve = |t: f64| -depth * (std::f64::consts::PI * t / t2).sin();
    let mut smooth = EventGenerator::new(&[curve(0.0)], 1, 0.0, th);
    let mut smooth_events = Vec::new();
    for j in 1..=200 {
        let t = t2 * j as f64 / 200.0;
        smooth_events.extend(smooth.advance(&[curve(t)], t).unwrap());
    }
    let mut checks = Vec::new();
    for (name, first, all) in [
        ("linear", down.clone(), [down.clone(), up].concat()),
        ("smooth", smooth_events.iter().filter(|e| e.t < t1).copied().collect(), smooth_events.clone()),
    ] {
        let neg = first.iter().filter(|e| e.p == Polarity::Negative).count();
        let pos = first.len() - neg;
        let f01 = events_to_delta_l::<f64>(&first, th, (1, 1), (0.0, t1)).unwrap();
        let f02 = events_to_delta_l::<f64>(&all, th, (1, 1), (0.0, t2 + 1e-9)).unwrap();
        let net = f02.values[0];
        let ok = neg == 2 && pos == 0 && f01.values[0] == 2.0 * th.c_neg && net.abs() <= th.c_pos;
        checks.push((ok, format!("{name}: {neg} negative events over (t0,t1), net dL {net:+.2} over (t0,t2)")));
    }
    let elapsed = start.elapsed();
    outcome(
        checks.iter().all(|c| c.0) && within(elapsed, 1.0),
        checks.into_iter().map(|c| c.1).collect::<Vec<_>>().join("; "),
    )
}

// ---------------------------------------------------------------- 3

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let model_cfg = ModelConfig {
        bound: 2.0,
        x_freq: 4,
        t_freq: 2,
        d_freq: 2,
        use_view_dirs: true,
        deform_width: 32,
        deform_hidden: 3,
        canonical_width: 32,
        canonical_hidden: 3,
        density_bias: 0.0,
    };
    let opts = RenderOptions {
        samples_per_ray: 8,
        ..RenderOptions::default()
    };
    let h = 1e-5;
    let guard = 1e-6;
    let (mut configs, mut checked, mut excluded, mut kinked, mut worst) = (0, 0, 0, 0, 0.0f64);
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    while configs < 100 {
        let seed = rng.gen();
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let mut model = SceneModel::<f64>::new(model_cfg.clone(), &mut init).unwrap();
        for w in model.deform.layers.last_mut().unwrap().weight.iter_mut() {
            *w = init.gen_range(-0.3..0.3);
        }
        let c = rng.gen_range(0.1..0.4);
        let th = Thresholds::new(c, -rng.gen_range(0.1..0.4)).unwrap();
        let az: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let eye = [3.0 * az.sin(), rng.gen_range(-1.0..1.0), 3.0 * az.cos()];
        let cam = Camera::from_fov(4, 3, 0.9, look_at(eye, [0.0; 3], [0.0, 1.0, 0.0]), 1.0, 5.0).unwrap();
        let rays = cam.all_rays();
        let t0 = rng.gen_range(0.0..0.8);
        let window = (t0, t0 + rng.gen_range(0.05..0.2));
        let targets: Vec<f64> = (0..rays.len())
            .map(|_| match rng.gen_range(0..3) {
                0 => 0.0,
                1 => th.c_pos * rng.gen_range(1..4) as f64,
                _ => th.c_neg * rng.gen_range(1..4) as f64,
            })
            .collect();
        let kinks = |m: &SceneModel<f64>| relu_signs(m, &rays, cam.near, cam.far, window, opts.samples_per_ray);
        let preds = |m: &SceneModel<f64>| render_delta_l(m, &rays, cam.near, cam.far, window, &opts).unwrap();
        let loss = |p: &[f64]| deadzone_loss(p, &targets, &th).unwrap();
        let near_boundary = |p: &[f64]| {
            p.iter().zip(&targets).any(|(&v, &y)| {
                let edges = if y == 0.0 { [th.c_neg, th.c_pos] } else if y > 0.0 { [y, y + th.c_pos] } else { [y + th.c_neg, y] };
                edges.iter().any(|e| (v - e).abs() < guard)
            })
        };
        let inside = |p: &[f64]| -> Vec<bool> { p.iter().zip(&targets).map(|(&v, &y)| deadzone_term(v, y, &th).0 == 0.0).collect() };
        let base = preds(&model);
        if near_boundary(&base) {
            excluded += 1;
            continue;
        }
        let n = rays.len() as f64;
        let seed_grad: Vec<f64> = base.iter().zip(&targets).map(|(&v, &y)| deadzone_term(v, y, &th).1 / n).collect();
        let (_, grads) = delta_l_gradients(&model, &rays, cam.near, cam.far, window, &opts, &seed_grad).unwrap();
        configs += 1;
        for net in 0..2 {
            let n_layers = if net == 0 { model.deform.layers.len() } else { model.canonical.layers.len() };
            for li in 0..n_layers {
                let bias = rng.gen_bool(0.3);
                let layer = if net == 0 { &model.deform.layers[li] } else { &model.canonical.layers[li] };
                let len = if bias { layer.bias.len() } else { layer.weight.len() };
                let k = rng.gen_range(0..len);
                let bumped = |delta: f64| {
                    let mut p = model.clone();
                    let l = if net == 0 { &mut p.deform.layers[li] } else { &mut p.canonical.layers[li] };
                    if bias {
                        l.bias[k] += delta;
                    } else {
                        l.weight[k] += delta;
                    }
                    p
                };
                let bump = |delta: f64| preds(&bumped(delta));
                let (plus, minus) = (bump(h), bump(-h));
                if near_boundary(&plus) || near_boundary(&minus) || inside(&plus) != inside(&minus) {
                    excluded += 1;
                    continue;
                }
                if kinks(&bumped(h)) != kinks(&bumped(-h)) {
                    kinked += 1;
                    continue;
                }
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let g = &grads.nets[net][li];
                let an = if bias { g.bias[k] } else { g.weight[k] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(guard);
                worst = worst.max(rel);
                checked += 1;
                if rel > 1e-4 {
                    failures.push(format!("net {net} layer {li} {} {k}: fd {fd:e} vs {an:e}", if bias { "b" } else { "w" }));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, 120.0),
        format!(
            "{configs} configs, {checked} parameters, worst relative error {worst:.2e} (< 1e-4), \
             {excluded} dead-zone boundary exclusions, {kinked} perturbations crossing a ReLU kink{}",
            failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
        ),
    )
}

/// Sign of every hidden ReLU pre-activation the render touches. Central
/// differences are only meaningful when both probes share one pattern.
fn relu_signs(m: &SceneModel<f64>, rays: &[Ray<f64>], near: f64, far: f64, window: (f64, f64), samples: usize) -> Vec<bool> {
    let batch = m.sample_batch(rays, near, far, samples, None::<&mut ChaCha8Rng>);
    let c = &m.config;
    let mut signs = Vec::new();
    let mut forward = |net: &MlpParams<f64>, input: Vec<f64>| {
        let mut h = input;
        for layer in &net.layers {
            let pre: Vec<f64> = (0..layer.out_dim)
                .map(|o| layer.weight_row(o).iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + layer.bias[o])
                .collect();
            if layer.activation == Activation::Relu {
                signs.extend(pre.iter().map(|v| *v > 0.0));
            }
            h = pre.iter().map(|v| layer.activation.apply(*v)).collect();
        }
        h
    };
    for t in [window.0, window.1] {
        for (p, d) in batch.positions.iter().zip(&batch.dirs) {
            let mut input = positional_encode(p, c.x_freq, true);
            input.extend(positional_encode(&[t], c.t_freq, true));
            let raw = forward(&m.deform, input);
            let moved: Vec<f64> = (0..3).map(|i| p[i] + t * raw[i]).collect();
            let mut input = positional_encode(&moved, c.x_freq, true);
            if c.use_view_dirs {
                input.extend(positional_encode(d, c.d_freq, true));
            }
            forward(&m.canonical, input);
        }
    }
    signs
}

// ---------------------------------------------------------------- 4

fn compositing_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=128);
        let regime = rng.gen_range(0..3);
        let sigma: Vec<f64> = (0..n)
            .map(|_| match regime {
                0 => rng.gen_range(0.0..1.0),
                1 => if rng.gen_bool(0.7) { 0.0 } else { rng.gen_range(0.0..200.0) },
                _ => 10f64.powf(rng.gen_range(-6.0..6.0)),
            })
            .collect();
        let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-4..0.5)).collect();
        let color: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let s = RaySampleSet::new(Vec::new(), deltas.clone(), sigma.clone(), color.clone()).unwrap();
        let c = composite_segment(&sigma, &color, &deltas).unwrap();
        let ok = s.transmittance[0] == 1.0
            && s.transmittance.windows(2).all(|w| w[1] <= w[0])
            && s.weights.iter().sum::<f64>() <= 1.0
            && s.weights.iter().all(|w| *w >= 0.0)
            && (0.0..=1.0).contains(&c)
            && c == s.intensity();
        bad += usize::from(!ok);
    }
    let opaque = composite_segment(&[1e12, 3.0, 5.0], &[0.37, 0.9, 0.1], &[0.1; 3]).unwrap();
    let empty = composite_segment(&[0.0; 16], &[0.8; 16], &[0.1; 16]).unwrap();
    let elapsed = start.elapsed();
    outcome(
        bad == 0 && opaque == 0.37 && empty == 0.0 && within(elapsed, 5.0),
        format!("{bad}/10000 rays violate an invariant; opaque limit {opaque} (0.37), empty scene {empty} (0)"),
    )
}

// ---------------------------------------------------------------- 9

fn burst_sync() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut hits = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let span: f64 = rng.gen_range(1.0..10.0);
        let bin = span / rng.gen_range(100.0..1000.0);
        let onset = rng.gen_range(0.2 * span..0.8 * span);
        // background of 0.2-20 events per bin, then a motion burst of
        // 2k-20k events spread over 1-20 bins
        let noise = (rng.gen_range(0.2..20.0) * span / bin) as usize;
        let burst = rng.gen_range(2_000..20_000);
        let burst_end = (onset + bin * rng.gen_range(1.0..20.0f64)).min(span);
        let mut times: Vec<f64> = (0..noise).map(|_| rng.gen_range(0.0..span)).collect();
        times.extend((0..burst).map(|_| rng.gen_range(onset..burst_end)));
        times.sort_by(f64::total_cmp);
        let events = times
            .into_iter()
            .map(|t| Event::new(t, rng.gen_range(0..32), rng.gen_range(0..32), Polarity::Positive))
            .collect();
        let stream = EventStream::new(events, 32, 32, Thresholds::default()).unwrap();
        if let Ok(t) = sync_offset(&stream, bin) {
            let err = (t - onset).abs() / bin;
            worst = worst.max(err);
            hits += usize::from(err <= 1.0);
        } else {
            worst = f64::INFINITY;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        hits == 100 && within(elapsed, 5.0),
        format!("{hits}/100 onsets within one bin (worst {worst:.2} bins) in {:.2}s (< 5s)", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 10

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (w, h) = (640u32, 480u32);
    let mut t = 0.0;
    let events: Vec<Event> = (0..1_000_000)
        .map(|_| {
            t += rng.gen_range(0.0..1e-5);
            let p = if rng.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            Event::new(t, rng.gen_range(0..w) as u16, rng.gen_range(0..h) as u16, p)
        })
        .collect();
    let stream = EventStream::new(events, w, h, Thresholds::new(0.17, -0.23).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.evd1");
    write_events(&path, &stream).unwrap();
    let back = read_events(&path).unwrap();
    let bit_exact = back.events().len() == stream.len()
        && back.thresholds() == stream.thresholds()
        && back
            .events()
            .iter()
            .zip(stream.events())
            .all(|(a, b)| a.t.to_bits() == b.t.to_bits() && a.x == b.x && a.y == b.y && a.p == b.p);

    let small = EventStream::new(stream.events()[..200].to_vec(), w, h, stream.thresholds()).unwrap();
    let bytes = encode_events(&small);
    let (mut format_errors, mut other, mut crashes) = (0, Vec::new(), 0);
    for m in 0..1000 {
        let corrupted = corrupt(&bytes, m % 9, &mut rng);
        match std::panic::catch_unwind(|| decode_events(&corrupted)) {
            Ok(Err(Error::Format { .. })) => format_errors += 1,
            Ok(r) => other.push(format!("mutation kind {}: {:?}", m % 9, r.map(|s| s.len()))),
            Err(_) => crashes += 1,
        }
    }
    // unstructured byte flips must never crash; they may still decode
    let mut flips_ok = 0;
    for _ in 0..1000 {
        let mut b = bytes.clone();
        for _ in 0..rng.gen_range(1..8) {
            let i = rng.gen_range(0..b.len());
            b[i] ^= 1 << rng.gen_range(0..8);
        }
        if matches!(
            std::panic::catch_unwind(|| decode_events(&b)),
            Ok(Ok(_)) | Ok(Err(Error::Format { .. }))
        ) {
            flips_ok += 1;
        }
    }
    outcome(
        bit_exact && format_errors == 1000 && crashes == 0 && flips_ok == 1000,
        format!(
            "1e6-event roundtrip bit-exact: {bit_exact}; {format_errors}/1000 corruptions gave format errors, {crashes} crashes; \
             {flips_ok}/1000 random bit flips handled{}",
            other.first().map(|o| format!("; unexpected {o}")).unwrap_or_default()
        ),
    )
}

/// One structural corruption of a valid EVD1 file.
fn corrupt(bytes: &[u8], kind: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut b = bytes.to_vec();
    let n = (b.len() - 36) / 16;
    let rec = 36 + 16 * rng.gen_range(0..n);
    match kind {
        0 => b.truncate(rng.gen_range(0..b.len())),
        1 => b.extend((0..rng.gen_range(1..40)).map(|_| rng.gen::<u8>())),
        2 => b[rng.gen_range(0..4)] ^= 1 << rng.gen_range(0..8),
        3 => b[rec + 13 + rng.gen_range(0..3)] = rng.gen_range(1..=255),
        4 => b[rec + 12] = [0u8, 2, 0x7f, 0x80, 0xfe][rng.gen_range(0..5)],
        5 => {
            let x = u16::from_le_bytes([b[4], b[5]]).max(1);
            let bad = rng.gen_range(u32::from(x)..=u32::from(u16::MAX)) as u16;
            b[rec + 8..rec + 10].copy_from_slice(&bad.to_le_bytes());
        }
        6 => {
            let t = [f64::NAN, f64::INFINITY, -1.0, -rng.gen_range(1e-9..1e3)][rng.gen_range(0..4)];
            b[rec..rec + 8].copy_from_slice(&t.to_le_bytes());
        }
        7 => {
            // bump the declared count past the records present
            let count = u64::from_le_bytes(b[28..36].try_into().unwrap()) + rng.gen_range(1..1000);
            b[28..36].copy_from_slice(&count.to_le_bytes());
        }
        _ => {
            // break time ordering: a later record's time goes before its predecessor
            let i = rng.gen_range(1..n);
            let at = 36 + 16 * i;
            let prev = f64::from_le_bytes(b[at - 16..at - 8].try_into().unwrap());
            let t = prev - rng.gen_range(1e-9..1.0) * prev.max(1e-9);
            b[at..at + 8].copy_from_slice(&t.max(0.0).min(prev * (1.0 - 1e-12)).to_le_bytes());
        }
    }
    b
}

// ---------------------------------------------------------------- 5-8

const ITERATIONS: u64 = 20_000;

fn work_dir() -> PathBuf {
    std::env::var_os("EVFIELD_ACCEPTANCE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"))
}

fn desk_dataset(scene: &AnalyticScene, name: &str) -> Dataset {
    let cfg = DatasetConfig {
        n_views: 8,
        n_frames: 32,
        width: 48,
        height: 48,
        validation_offset_deg: Some(10.0),
        ..DatasetConfig::default()
    };
    let root = work_dir().join(name);
    if Dataset::load(&root).is_err() {
        gen_dataset(scene, &cfg, &root).unwrap();
    }
    Dataset::load(&root).unwrap()
}

fn desk_train_config(seed: u64, halving: bool) -> TrainConfig {
    TrainConfig {
        total_iterations: ITERATIONS,
        rays_per_iteration: 1024,
        milestones: if halving { vec![10_000, 15_000] } else { Vec::new() },
        checkpoint_every: 5_000,
        seed,
        ..TrainConfig::default()
    }
}

struct Run {
    checkpoints: Vec<PathBuf>,
    elapsed: Duration,
}

/// Trains (or reuses a finished cached run) and returns its 5k-step checkpoints.
fn train_cached(dataset: &Dataset, tag: &str, cfg: &TrainConfig, views: &[usize]) -> Run {
    let dir = work_dir().join(format!("run-{tag}"));
    let done = dir.join("done.json");
    if let Ok(text) = std::fs::read_to_string(&done) {
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let ckpts: Vec<PathBuf> = v["checkpoints"].as_array().unwrap().iter().map(|p| p.as_str().unwrap().into()).collect();
        if ckpts.iter().all(|p| p.exists()) {
            let secs = v["seconds"].as_f64().unwrap();
            return Run {
                checkpoints: ckpts,
                elapsed: Duration::from_secs_f64(secs),
            };
        }
    }
    let start = Instant::now();
    let mut trainer = Trainer::<f32>::with_views(cfg.clone(), ModelConfig::desk(), dataset, views).unwrap();
    let fitted = run(&mut trainer, &dir).unwrap();
    let elapsed = start.elapsed();
    std::fs::write(
        &done,
        serde_json::json!({ "checkpoints": fitted.checkpoints, "seconds": elapsed.as_secs_f64() }).to_string(),
    )
    .unwrap();
    Run {
        checkpoints: fitted.checkpoints,
        elapsed,
    }
}

fn held_out(model: &SceneModel<f32>, dataset: &Dataset, n_windows: usize) -> EvalReport {
    let edges = uniform_edges(0.0, 1.0, n_windows);
    let windows: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let opts = EvalOptions {
        write_png: false,
        ..EvalOptions::default()
    };
    evaluate(model, dataset, &windows, &dataset.meta.view_indices(Split::Val), &[], &opts, None).unwrap()
}

fn load_model(path: &Path) -> SceneModel<f32> {
    evfield::io::load_checkpoint::<f32>(path).unwrap().model
}

fn all_train_views(dataset: &Dataset) -> Vec<usize> {
    dataset.meta.view_indices(Split::Train)
}

fn sphere_run(seed: u64, halving: bool) -> (Dataset, Run) {
    let ds = desk_dataset(&AnalyticScene::translating_sphere(), "sphere");
    let views = all_train_views(&ds);
    let tag = format!("sphere-s{seed}-{}", if halving { "halving" } else { "fixed" });
    let run = train_cached(&ds, &tag, &desk_train_config(seed, halving), &views);
    (ds, run)
}

fn desk_training() -> Outcome {
    let (ds, run) = sphere_run(0, true);
    let windows = ds.meta.n_frames - 1;
    let scores: Vec<(f64, f64)> = run
        .checkpoints
        .iter()
        .map(|p| {
            let r = held_out(&load_model(p), &ds, windows);
            (r.psnr.mean, r.zero_psnr.mean)
        })
        .collect();
    let (psnr, zero) = *scores.last().unwrap();
    let drops = scores.windows(2).filter(|w| w[1].0 < w[0].0).count();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let core_hours = run.elapsed.as_secs_f64() * cores as f64 / 3600.0;
    outcome(
        psnr - zero >= 6.0 && drops <= 1 && core_hours <= 16.0,
        format!(
            "held-out PSNR {psnr:.2} dB vs zero predictor {zero:.2} dB (margin {:+.2}, need +6); per-5k PSNR [{}], {drops} drops; {:.2} h on {cores} cores",
            psnr - zero,
            scores.iter().map(|s| format!("{:.2}", s.0)).collect::<Vec<_>>().join(", "),
            run.elapsed.as_secs_f64() / 3600.0
        ),
    )
}

fn batching_ablation() -> Outcome {
    let mut with = Vec::new();
    let mut without = Vec::new();
    let mut fine = 0;
    for seed in 0..3 {
        for halving in [true, false] {
            let (ds, run) = sphere_run(seed, halving);
            fine = 4 * (ds.meta.n_frames - 1);
            let r = held_out(&load_model(run.checkpoints.last().unwrap()), &ds, fine);
            if halving { with.push(r.psnr.mean) } else { without.push(r.psnr.mean) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    outcome(
        mean(&with) > mean(&without),
        format!(
            "PSNR at {fine} windows: with halving {:.3} dB {with:.2?}, without {:.3} dB {without:.2?}",
            mean(&with),
            mean(&without)
        ),
    )
}

fn transfer() -> Outcome {
    let (_, sphere) = sphere_run(0, true);
    let boxes = desk_dataset(&AnalyticScene::translating_box(), "box");
    let windows = boxes.meta.n_frames - 1;
    let views = all_train_views(&boxes);
    let scratch = train_cached(&boxes, "box-s0-halving", &desk_train_config(0, true), &views);
    let target = held_out(&load_model(scratch.checkpoints.last().unwrap()), &boxes, windows).psnr.mean;

    let budget = ITERATIONS / 4;
    let parent = evfield::io::load_checkpoint::<f32>(sphere.checkpoints.last().unwrap()).unwrap();
    let cfg = TrainConfig {
        total_iterations: budget,
        ..desk_train_config(0, true)
    };
    let mut trainer = Trainer::from_model(cfg, parent.model, parent.adam, &boxes, &views).unwrap();
    let mut trace = Vec::new();
    let mut reached = None;
    while trainer.state.iteration < budget {
        trainer.train_step().unwrap();
        if trainer.state.iteration % 500 == 0 {
            let p = held_out(&trainer.model, &boxes, windows).psnr.mean;
            trace.push(format!("{}:{p:.2}", trainer.state.iteration));
            if p >= target {
                reached = Some(trainer.state.iteration);
                break;
            }
        }
    }
    outcome(
        reached.is_some(),
        format!(
            "from-scratch box PSNR {target:.2} dB after {ITERATIONS}; fine-tuned reached it at {} (budget {budget}); trace [{}]",
            reached.map_or("never".to_string(), |i| i.to_string()),
            trace.join(", ")
        ),
    )
}

fn views_ablation() -> Outcome {
    let ds = desk_dataset(&AnalyticScene::translating_sphere(), "sphere");
    let train = all_train_views(&ds);
    let windows = ds.meta.n_frames - 1;
    let mut means = Vec::new();
    for n in [2usize, 4, 8] {
        let views: Vec<usize> = train.iter().copied().step_by(train.len() / n).take(n).collect();
        let mut scores = Vec::new();
        for seed in 0..3 {
            let run = if n == train.len() {
                sphere_run(seed, true).1
            } else {
                train_cached(&ds, &format!("sphere-s{seed}-halving-v{n}"), &desk_train_config(seed, true), &views)
            };
            scores.push(held_out(&load_model(run.checkpoints.last().unwrap()), &ds, windows).psnr.mean);
        }
        means.push((n, scores.iter().sum::<f64>() / 3.0));
    }
    outcome(
        means.windows(2).all(|w| w[1].1 >= w[0].1),
        format!(
            "mean held-out PSNR at {ITERATIONS} iterations: {}",
            means.iter().map(|(n, p)| format!("{n} views {p:.3} dB")).collect::<Vec<_>>().join(", ")
        ),
    )
}
