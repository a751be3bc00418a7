//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any failed.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use doorsom::corpus::{generate_corpus, load_corpus, CorpusImage};
use doorsom::eval::{curve_text, evaluate_corpus, train_corpus};
use doorsom::model_io::{from_bytes, load_model, save_model, to_bytes, ModelError};
use doorsom_core::canny::{canny, quantized_offset, sobel_gradients, CannyParams, EdgeMap};
use doorsom_core::doorfeat::{
    bottom_gap_profile, build_feature_vector, concavity, find_post_candidates, post_distance,
    FeatureParams,
};
use doorsom_core::image::gaussian_blur;
use doorsom_core::linefit::{
    detect_lines, merge_segments, split_ranges, track_edge_chains, LineParams, LineSegment,
};
use doorsom_core::pipeline::{extract_candidates, DoorModel, PipelineConfig};
use doorsom_core::som::{train, Node, SomLattice, TrainSchedule};
use doorsom_core::synth::{render_scene, sample_scene, Category, GapPolarity};
use doorsom_core::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn out_dir() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&d).unwrap();
    d
}

// 1 --------------------------------------------------------------------------

fn oracle_bmu(weights: &[f64], dim: usize, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, w) in weights.chunks(dim).enumerate() {
        let d: f64 = w.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

fn bmu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut ties = 0;
    for case in 0..1000 {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=12);
        let dim = rng.random_range(1..=16);
        // Every third case draws from a coarse grid so exact ties occur.
        let coarse = case % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if coarse {
                f64::from(rng.random_range(0..3u8)) * 0.5
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let weights: Vec<f64> = (0..rows * cols * dim).map(|_| draw(&mut rng)).collect();
        let x: Vec<f64> = (0..dim).map(|_| draw(&mut rng)).collect();
        let lattice = SomLattice::from_weights(rows, cols, dim, weights.clone()).unwrap();
        let got = lattice.best_matching_unit(&x).unwrap();
        let want = oracle_bmu(&weights, dim, &x);
        let want = Node {
            row: want / cols,
            col: want % cols,
        };
        ensure!(got == want, "case {case}: got {got:?}, oracle {want:?}");
        let d0 = |k: usize| -> f64 {
            weights[k * dim..(k + 1) * dim]
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let best = d0(want.row * cols + want.col);
        ties += usize::from((0..rows * cols).filter(|&k| d0(k) == best).count() > 1);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("1000/1000 exact, {ties} with ties, {secs:.3} s"))
}

// 2 --------------------------------------------------------------------------

fn update_arithmetic() -> Outcome {
    let mut one = SomLattice::from_weights(1, 1, 1, vec![0.5]).unwrap();
    one.update(&[1.0], 0.12, 1.0, 1.0).unwrap();
    let w = one.weights()[0];
    ensure!((w - 0.56).abs() <= 1e-12, "single node moved to {w}");

    // BMU at column 0, neighbour at grid distance 2 with sigma 2.
    let (eta, sigma, x) = (0.12, 2.0, 1.0);
    let init = [0.9, 0.1, 0.3];
    let mut l = SomLattice::from_weights(1, 3, 1, init.to_vec()).unwrap();
    let bmu = l.update(&[x], eta, sigma, 1.0).unwrap();
    ensure!(bmu == Node { row: 0, col: 0 }, "unexpected BMU {bmu:?}");
    let want = init[2] + eta * (-1.0f64).exp() * (x - init[2]);
    let got = l.weights()[2];
    ensure!(
        (got - want).abs() <= 1e-12,
        "neighbour at d=sigma: {got} vs {want}"
    );
    let ratio = (got - init[2]) / (l.weights()[0] - init[0]) * (x - init[0]) / (x - init[2]);
    ensure!((ratio - (-1.0f64).exp()).abs() <= 1e-12, "ratio {ratio}");
    Ok(format!(
        "0.56 exact to {:.1e}; e^-1 ratio off by {:.1e}",
        (w - 0.56).abs(),
        (ratio - (-1.0f64).exp()).abs()
    ))
}

// 3 --------------------------------------------------------------------------

fn geometric_convergence() -> Outcome {
    let eta = 0.12;
    let x = [0.9, -0.3, 0.4];
    let mut l = SomLattice::init(4, 4, 3, 5).unwrap();
    let bmu = l.best_matching_unit(&x).unwrap();
    let err = |l: &SomLattice| {
        let w = l.weight(bmu);
        w.iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let e0 = err(&l);
    let mut prev = e0;
    let mut worst = 0.0f64;
    for n in 1..=100 {
        let b = l.update(&x, eta, 1e-9, 1.0).unwrap();
        ensure!(b == bmu, "BMU moved at step {n}");
        let e = err(&l);
        worst = worst.max((e / prev - (1.0 - eta)).abs());
        let rel = (e - e0 * (1.0 - eta).powi(n)).abs() / (e0 * (1.0 - eta).powi(n));
        ensure!(
            rel <= 1e-9,
            "step {n}: relative deviation {rel:.2e} from e0(1-eta)^n"
        );
        prev = e;
    }
    ensure!(worst <= 1e-9, "per-step factor off by {worst:.2e}");
    Ok(format!(
        "per-step factor within {worst:.1e} of 1-eta over 100 steps"
    ))
}

// 4 --------------------------------------------------------------------------

fn schedule_properties() -> Outcome {
    let s = TrainSchedule::default();
    let (e0, s0) = s.at(0).unwrap();
    ensure!(e0 == 0.12 && s0 == 4.0, "at(0) = ({e0}, {s0})");
    let mut prev = (e0, s0);
    for n in 1..s.iterations {
        let (e, sg) = s.at(n).unwrap();
        ensure!(
            e <= prev.0 && sg <= prev.1,
            "increase at n={n}: {prev:?} -> ({e}, {sg})"
        );
        if n >= s.ordering_len() {
            ensure!(e == 0.001, "convergence eta {e} at n={n}");
        }
        prev = (e, sg);
    }
    ensure!(s.at(s.iterations).is_err(), "schedule accepts n = N");
    Ok(format!(
        "monotone over {} iterations; convergence from n={} at eta=0.001",
        s.iterations,
        s.ordering_len()
    ))
}

// 5 --------------------------------------------------------------------------

fn clustered_training() -> Outcome {
    let centers = [(0.15, 0.2), (0.85, 0.25), (0.5, 0.85)];
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    // Spread is small against the 0.65+ separation of the centres; the
    // achievable error floor grows with it (0.04 leaves seeds near 30%).
    let noise = Normal::new(0.0, 0.02).unwrap();
    let data: Vec<Vec<f64>> = (0..600)
        .map(|i| {
            let (cx, cy) = centers[i % 3];
            vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)]
        })
        .collect();
    let schedule = TrainSchedule::default();
    let mut summary = Vec::new();
    for seed in 0..5u64 {
        let start = Instant::now();
        let mut l = SomLattice::init(8, 8, 2, seed).unwrap();
        let report = train(&mut l, &data, &schedule, seed + 100).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let (first, last) = (
            report.initial_error().unwrap(),
            report.final_error().unwrap(),
        );
        let path = out_dir().join(format!("som_curve_seed{seed}.txt"));
        fs::write(&path, curve_text(&report)).unwrap();
        ensure!(
            report.quantization.last().unwrap().0 == schedule.iterations,
            "curve stops early"
        );
        ensure!(last < 0.25 * first, "seed {seed}: {first:.4} -> {last:.4}");
        ensure!(secs < 10.0, "seed {seed}: {secs:.2} s");
        summary.push(format!("{:.1}%", 100.0 * last / first));
    }
    Ok(format!(
        "final/initial error {} ; curves in {}",
        summary.join(" "),
        out_dir().display()
    ))
}

// 6 --------------------------------------------------------------------------

fn canny_localization() -> Outcome {
    let (w, h, boundary) = (96usize, 400usize, 48usize);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let data: Vec<u8> = (0..w * h)
        .map(|i| {
            let base = if i % w < boundary { 80.0 } else { 160.0 };
            (base + rng.random_range(-10.0..=10.0f64)).round() as u8
        })
        .collect();
    let img = GrayImage::from_raw(w, h, data).unwrap();
    let params = CannyParams::default();
    let edges = canny(&img, &params).unwrap();

    // The true boundary falls between columns boundary-1 and boundary.
    let rows = 2..h - 2;
    let n_rows = rows.len();
    let good = rows
        .filter(|&y| {
            let xs: Vec<usize> = (2..w - 2).filter(|&x| edges.get(x, y)).collect();
            !xs.is_empty()
                && xs
                    .iter()
                    .all(|&x| x + 1 >= boundary - 1 && x <= boundary + 1)
        })
        .count();
    let rate = good as f64 / n_rows as f64;
    ensure!(rate >= 0.99, "only {good}/{n_rows} rows localized");

    let thick = thick_pixels(&img, &params, &edges);
    ensure!(
        thick == 0,
        "{thick} edge pixels have edge neighbours on both sides of the normal"
    );
    Ok(format!("{good}/{n_rows} rows within 1 px, no thick pixels"))
}

/// Edge pixels with an edge neighbour on both sides along the quantized
/// gradient direction.
fn thick_pixels(img: &GrayImage, params: &CannyParams, edges: &EdgeMap) -> usize {
    let grad = sobel_gradients(&gaussian_blur(img, params.sigma).unwrap()).unwrap();
    edges
        .pixels()
        .filter(|&(x, y)| {
            let (dx, dy) = quantized_offset(grad.direction(x, y));
            let (x, y) = (x as isize, y as isize);
            edges.get_signed(x + dx, y + dy) && edges.get_signed(x - dx, y - dy)
        })
        .count()
}

// 7 --------------------------------------------------------------------------

fn raster_line(map: &mut EdgeMap, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        map.set(x as usize, y as usize, true);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn perp_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len = (vx * vx + vy * vy).sqrt();
    if len == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    ((p.0 - a.0) * vy - (p.1 - a.1) * vx).abs() / len
}

fn linefit_soundness() -> Outcome {
    let params = LineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut segments = 0;
    for case in 0..200 {
        let (w, h) = (96usize, 96usize);
        let mut map = EdgeMap::new(w, h);
        let n = rng.random_range(2..=6);
        let verts: Vec<(i64, i64)> = (0..n)
            .map(|_| {
                (
                    rng.random_range(1..w as i64 - 1),
                    rng.random_range(1..h as i64 - 1),
                )
            })
            .collect();
        for pair in verts.windows(2) {
            raster_line(&mut map, pair[0], pair[1]);
        }

        let chains = track_edge_chains(&map);
        let mut seen = vec![0u32; w * h];
        for c in &chains {
            for &(x, y) in &c.points {
                seen[y * w + x] += 1;
            }
        }
        let total: usize = chains.iter().map(|c| c.points.len()).sum();
        ensure!(
            total == map.count(),
            "case {case}: {total} chain points for {} pixels",
            map.count()
        );
        for (x, y) in map.pixels() {
            ensure!(
                seen[y * w + x] == 1,
                "case {case}: pixel ({x},{y}) in {} chains",
                seen[y * w + x]
            );
        }

        let mut segs = Vec::new();
        for c in &chains {
            let pts = &c.points;
            let ranges = split_ranges(pts, params.dev_tol);
            if pts.len() >= 2 {
                ensure!(
                    ranges.first().map(|r| r.0) == Some(0)
                        && ranges.last().map(|r| r.1) == Some(pts.len() - 1),
                    "case {case}: chain ends not covered"
                );
            }
            for win in ranges.windows(2) {
                ensure!(win[0].1 == win[1].0, "case {case}: ranges not contiguous");
            }
            for &(i, j) in &ranges {
                let f = |k: usize| (pts[k].0 as f64, pts[k].1 as f64);
                for k in i..=j {
                    let d = perp_distance(f(k), f(i), f(j));
                    ensure!(
                        d <= params.dev_tol + 1e-12,
                        "case {case}: point {k} is {d:.3} px off its segment"
                    );
                }
                if f(i) != f(j) {
                    segs.push(LineSegment::from_coords(f(i).0, f(i).1, f(j).0, f(j).1));
                }
            }
        }
        segments += segs.len();
        let once = merge_segments(&segs, &params);
        let twice = merge_segments(&once, &params);
        ensure!(once == twice, "case {case}: merge not idempotent");
    }
    Ok(format!(
        "200 polylines, {segments} segments sound; partition and idempotence hold"
    ))
}

// 8 --------------------------------------------------------------------------

fn feature_recovery() -> Outcome {
    let p = FeatureParams::default();
    let cfg = PipelineConfig::default();
    let (mut dark, mut bright) = (0, 0);
    let (mut worst_c, mut worst_d) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let cat = Category::ALL[i % 3];
        let mut spec = sample_scene(cat, i, 8008, 320, 240);
        spec.noise = 0.0;
        ensure!(
            (2..=10).contains(&spec.concavity),
            "scene {i}: concavity {}",
            spec.concavity
        );
        let (img, truth) = render_scene(&spec).unwrap();
        let cands = extract_candidates(&img, &cfg).unwrap();
        let best = cands
            .iter()
            .map(|c| (c.region(img.width(), img.height()).iou(&truth.door), c))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let Some((iou, c)) = best else {
            return Err(format!("scene {i} ({}): no candidates", cat.name()));
        };
        ensure!(iou >= 0.5, "scene {i}: best candidate IoU {iou:.2}");
        let conc = concavity(c, &p).ok_or(format!("scene {i}: concavity not measured"))?;
        let dc = (conc - truth.concavity).abs();
        ensure!(
            dc <= 1.0,
            "scene {i}: concavity {conc:.2} vs {}",
            truth.concavity
        );
        let dd = (post_distance(c) - truth.post_distance()).abs();
        ensure!(dd <= 2.0, "scene {i}: post distance off by {dd:.2}");
        let g = bottom_gap_profile(c, &img, &p).ok_or(format!("scene {i}: no gap profile"))?;
        let want_bright = spec.gap_polarity == GapPolarity::Bright;
        ensure!(
            (g.signed_contrast > 0.0) == want_bright && g.signed_contrast != 0.0,
            "scene {i}: contrast {} for {:?} gap",
            g.signed_contrast,
            spec.gap_polarity
        );
        if want_bright {
            bright += 1;
        } else {
            dark += 1;
        }
        worst_c = worst_c.max(dc);
        worst_d = worst_d.max(dd);
    }
    ensure!(dark > 0 && bright > 0, "only one polarity sampled");
    Ok(format!(
        "50/50 scenes; worst concavity error {worst_c:.2} px, worst distance error {worst_d:.2} px; {dark} dark / {bright} bright gaps"
    ))
}

// 9-11 -----------------------------------------------------------------------

struct EndToEnd {
    train: Vec<CorpusImage>,
    model: DoorModel,
}

fn end_to_end(shared: &mut Option<EndToEnd>) -> Outcome {
    let start = Instant::now();
    let train_dir = tempfile::tempdir().unwrap();
    let test_dir = tempfile::tempdir().unwrap();
    generate_corpus(train_dir.path(), 100, 9001, 320, 240).map_err(|e| e.to_string())?;
    generate_corpus(test_dir.path(), 100, 9002, 320, 240).map_err(|e| e.to_string())?;
    let train = load_corpus(train_dir.path()).map_err(|e| e.to_string())?;
    let test = load_corpus(test_dir.path()).map_err(|e| e.to_string())?;
    let (model, _, counts) =
        train_corpus(&train, &PipelineConfig::default(), 11).map_err(|e| e.to_string())?;
    let report = evaluate_corpus(&model, &test).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    println!("{}", report.to_table());
    *shared = Some(EndToEnd { train, model });

    let mut rates = Vec::new();
    for cat in Category::ALL {
        let c = report.get(cat);
        ensure!(c.images == 100, "{}: {} test images", cat.name(), c.images);
        let acc = c.accuracy().unwrap();
        ensure!(acc >= 90.0, "{} detection {acc:.1}% < 90%", cat.name());
        rates.push(format!("{} {acc:.0}%", cat.name()));
    }
    ensure!(secs < 300.0, "run took {secs:.1} s");
    Ok(format!(
        "{}; {} training candidates ({} doors); {secs:.1} s",
        rates.join(", "),
        counts.candidates,
        counts.doors
    ))
}

fn classification_timing(shared: &Option<EndToEnd>) -> Outcome {
    let Some(e2e) = shared else {
        return Err("no trained model".into());
    };
    let model = &e2e.model;
    ensure!(
        (
            model.lattice.rows(),
            model.lattice.cols(),
            model.lattice.dim()
        ) == (8, 8, 11),
        "lattice is {}x{}x{}",
        model.lattice.rows(),
        model.lattice.cols(),
        model.lattice.dim()
    );
    let img = &e2e.train[0].image;
    let cand = find_post_candidates(
        &detect_lines(
            &canny(img, &model.config.canny).unwrap(),
            &model.config.lines,
        ),
        img,
        &model.config.features,
    );
    let c = cand
        .first()
        .ok_or("first training image has no candidates")?;
    let x = build_feature_vector(c, img, &model.config.features, Some(&model.norm))
        .unwrap()
        .values;
    let mut times: Vec<f64> = (0..1000)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(model.classify(std::hint::black_box(&x)).unwrap());
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = (times[499] + times[500]) / 2.0;
    ensure!(median < 1e-3, "median {median:.6} s");
    Ok(format!("median {median:.7} s over 1000 reps"))
}

fn determinism_and_persistence(shared: &Option<EndToEnd>) -> Outcome {
    let Some(e2e) = shared else {
        return Err("no trained model".into());
    };
    let bytes = to_bytes(&e2e.model);
    let (again, _, _) =
        train_corpus(&e2e.train, &PipelineConfig::default(), 11).map_err(|e| e.to_string())?;
    ensure!(
        to_bytes(&again) == bytes,
        "retraining changed the model bytes"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&path, &e2e.model).map_err(|e| e.to_string())?;
    ensure!(
        fs::read(&path).unwrap() == bytes,
        "file differs from encoder output"
    );
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    ensure!(loaded == e2e.model, "loaded model differs");
    ensure!(to_bytes(&loaded) == bytes, "re-encoding differs");

    let mut bad = bytes.clone();
    bad[0] = b'X';
    ensure!(
        from_bytes(&bad) == Err(ModelError::BadMagic),
        "bad magic accepted"
    );
    let msg = ModelError::BadMagic.to_string();
    ensure!(msg == "bad magic", "magic error reads {msg:?}");

    let mut bad = bytes.clone();
    bad[8] = 9;
    ensure!(
        matches!(from_bytes(&bad), Err(ModelError::Version { found: 9, .. })),
        "version mismatch accepted"
    );

    let cut = 8 + 4 + 12 + 100;
    let err = from_bytes(&bytes[..cut]).unwrap_err();
    ensure!(
        err == ModelError::Truncated {
            field: "weights",
            expected: 8 * 64 * 11,
            found: 100
        },
        "truncation reported as {err}"
    );
    let text = err.to_string();
    ensure!(
        text.contains("weights") && text.contains("5632") && text.contains("100"),
        "message {text:?}"
    );

    let key = b"canny.sigma=";
    let at = bytes.windows(key.len()).position(|w| w == key).unwrap() + key.len();
    let mut bad = bytes.clone();
    bad[at] = b'x';
    let err = from_bytes(&bad).unwrap_err().to_string();
    ensure!(
        err.contains("canny.sigma"),
        "config corruption reported as {err:?}"
    );

    Ok(format!(
        "{} byte model reproduced exactly; errors name their field",
        bytes.len()
    ))
}

fn main() {
    let mut shared = None;
    let mut failed = 0;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} ({secs:.2} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({secs:.2} s): {detail}");
            }
        }
    };
    run(1, "BMU oracle", &mut bmu_oracle);
    run(2, "update arithmetic", &mut update_arithmetic);
    run(3, "geometric convergence", &mut geometric_convergence);
    run(4, "schedule properties", &mut schedule_properties);
    run(5, "clustered training error", &mut clustered_training);
    run(6, "canny localization", &mut canny_localization);
    run(7, "line-fit soundness", &mut linefit_soundness);
    run(8, "feature recovery", &mut feature_recovery);
    run(9, "end-to-end detection", &mut || end_to_end(&mut shared));
    run(10, "classification timing", &mut || {
        classification_timing(&shared)
    });
    run(11, "determinism and persistence", &mut || {
        determinism_and_persistence(&shared)
    });
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
