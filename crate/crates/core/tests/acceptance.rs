//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the report is always printed.

mod common;

use std::time::{Duration, Instant};

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scenetok::codec::{canonicalize, compression_report, decode, encode, MeshVocabulary, Scheme};
use scenetok::corpus;
use scenetok::geometry::{back_project, CameraIntrinsics, DepthMap};
use scenetok::mesh::{TriangleMesh, Vec3};
use scenetok::metrics::{
    box_iou, chamfer, chamfer_single, evaluate_scene, fscore, nearest_sq_dists, MetricConfig,
    SceneObject,
};
use scenetok::pose::{
    corners_from_box, decode_corners, encode_pose, fit_affine, pose_transform, yaw_rotation,
    AffineTransform, CornerSet, GravityBox,
};
use scenetok::preprocess::{
    preprocess_asset, quadric_decimate, select_best, CandidateResult, PreprocessConfig,
};
use scenetok::quantize::QuantizationGrid;
use scenetok::sequence::{
    assemble, parse, validate_prefix, ObjectRecord, PrefixStatus, UnifiedVocabulary,
};

type Outcome = Result<String, String>;
/// Id, name, runtime limit in seconds, check.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn grid(n: u32) -> QuantizationGrid {
    QuantizationGrid::new(n).unwrap()
}

fn vocab(scheme: Scheme, n: u32) -> MeshVocabulary {
    MeshVocabulary::new(scheme, grid(n))
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_pose_lengths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let b = common::any_box(&mut rng);
        for n in QuantizationGrid::STANDARD {
            for (scheme, want) in [
                (Scheme::Coordinate, 24),
                (Scheme::Compact, 24),
                (Scheme::BlockPatch, 16),
            ] {
                let len = encode_pose(&b, vocab(scheme, n)).len();
                ensure(
                    len == want,
                    format!("{scheme} N={n}: {len} tokens, expected {want}"),
                )?;
            }
        }
    }
    Ok("1000 boxes x 4 resolutions: 24 per-axis, 16 block-offset".into())
}

fn c2_fit_exact() -> Outcome {
    const ENTRY_TOL: f64 = 1e-9;
    const RESIDUAL_TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_entry, mut worst_res) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let b = common::any_box(&mut rng);
        // the transform is built independently of the box helpers
        let truth = AffineTransform {
            linear: yaw_rotation(b.yaw) * nalgebra::Matrix3::from_diagonal(&(b.scale / 2.0)),
            translation: b.center,
        };
        let global = CornerSet(
            CornerSet::canonical()
                .0
                .map(|c| truth.linear * c + truth.translation),
        );
        let fit = fit_affine(&CornerSet::canonical(), &global).map_err(|e| e.to_string())?;
        let entry = (fit.transform.linear - truth.linear)
            .amax()
            .max((fit.transform.translation - truth.translation).amax());
        worst_entry = worst_entry.max(entry);
        worst_res = worst_res.max(fit.residual);
    }
    ensure(
        worst_entry < ENTRY_TOL,
        format!("max entry error {worst_entry:e}"),
    )?;
    ensure(
        worst_res < RESIDUAL_TOL,
        format!("max residual {worst_res:e}"),
    )?;
    Ok(format!(
        "10000 transforms: max entry error {worst_entry:.2e}, max residual {worst_res:.2e}"
    ))
}

fn c3_pose_roundtrip() -> Outcome {
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for n in [128u32, 512] {
        let bound = 1.0 / n as f64 + 1e-12;
        let mut rng = ChaCha8Rng::seed_from_u64(3 + n as u64);
        let (mut vs_decoded, mut vs_original, mut over) = (0.0f64, 0.0f64, 0usize);
        for k in 0..10_000 {
            let v = vocab(Scheme::ALL[k % 3], n);
            // sides of at least two bins keep the fit clear of collapse inflation
            let b = common::box_inside(&mut rng, 4.0 / n as f64);
            let tokens = encode_pose(&b, v).tokens;
            let fit = pose_transform(&tokens, v).map_err(|e| e.to_string())?;
            let fitted = fit.transform.apply_corners(&CornerSet::canonical());
            let decoded = decode_corners(&tokens, v).map_err(|e| e.to_string())?;
            let original = fitted.max_abs_diff(&corners_from_box(&b));
            vs_decoded = vs_decoded.max(fitted.max_abs_diff(&decoded));
            vs_original = vs_original.max(original);
            over += (original > bound) as usize;
        }
        let line = format!(
            "N={n}: max {:.3}/N vs decoded corners, {:.3}/N vs original corners ({over} of 10000 boxes over 1/N)",
            vs_decoded * n as f64,
            vs_original * n as f64
        );
        if vs_decoded > bound || vs_original > bound {
            failures.push(line.clone());
        }
        report.push(line);
    }
    ensure(failures.is_empty(), report.join("; "))?;
    Ok(report.join("; "))
}

fn c4_lossless() -> Outcome {
    let check = |m: &TriangleMesh, n: u32, what: &str| -> Result<(), String> {
        let canon = canonicalize(m, grid(n)).map_err(|e| format!("{what}: {e}"))?;
        for scheme in Scheme::ALL {
            let v = vocab(scheme, n);
            let back = decode(&encode(&canon, v).tokens, v)
                .map_err(|e| format!("{what} {scheme}: {e}"))?;
            ensure(
                back == canon,
                format!("{what} {scheme} N={n}: decode differs"),
            )?;
        }
        Ok(())
    };
    let bundled = corpus::bundled();
    ensure(bundled.len() >= 20, "corpus has fewer than 20 meshes")?;
    for e in &bundled {
        for n in QuantizationGrid::STANDARD {
            check(&e.mesh, n, e.name)?;
        }
    }
    let fuzz: Vec<(TriangleMesh, u32)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (0..1000)
            .map(|_| {
                let m = common::small_manifold(&mut rng);
                (m, QuantizationGrid::STANDARD[rng.gen_range(0..4)])
            })
            .collect()
    };
    fuzz.par_iter()
        .enumerate()
        .try_for_each(|(i, (m, n))| check(m, *n, &format!("fuzz #{i}")))?;
    Ok(format!(
        "{} bundled meshes x 4 resolutions and 1000 fuzzed meshes, all schemes",
        bundled.len()
    ))
}

fn c5_vocab() -> Outcome {
    let compact = vocab(Scheme::Compact, 512).size();
    let block = vocab(Scheme::BlockPatch, 128).size();
    ensure(
        compact == 518,
        format!("compact at N=512 has {compact} ids"),
    )?;
    ensure(
        block == 40_960,
        format!("block-patch at N=128 has {block} ids"),
    )?;
    Ok(format!("compact {compact}, block-patch {block}"))
}

fn c6_compression() -> Outcome {
    const COMPACT_MAX: f64 = 0.60;
    const BLOCK_MAX: f64 = 0.40;
    let cfg = PreprocessConfig::default();
    let prepared = corpus::bundled()
        .iter()
        .map(|e| {
            preprocess_asset(&e.mesh, &cfg)
                .map(|c| c.mesh)
                .map_err(|err| format!("{}: {err}", e.name))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max_faces = prepared.iter().map(|m| m.faces.len()).max().unwrap_or(0);
    ensure(
        max_faces <= 4000,
        format!("a preprocessed mesh has {max_faces} faces"),
    )?;
    let compact = compression_report(&prepared, grid(512)).map_err(|e| e.to_string())?;
    let block = compression_report(&prepared, grid(128)).map_err(|e| e.to_string())?;
    let c = compact.scheme(Scheme::Compact).unwrap().mean_ratio;
    let b = block.scheme(Scheme::BlockPatch).unwrap().mean_ratio;
    let msg = format!(
        "mean per-mesh ratio compact {c:.3} (N=512), block-patch {b:.3} (N=128); aggregate {:.3} / {:.3}",
        compact.scheme(Scheme::Compact).unwrap().aggregate_ratio,
        block.scheme(Scheme::BlockPatch).unwrap().aggregate_ratio
    );
    ensure(c <= COMPACT_MAX && b <= BLOCK_MAX, msg.clone())?;
    Ok(msg)
}

fn brute_sq(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn c7_metric_oracle() -> Outcome {
    const TOL: f64 = 1e-12;
    let pairs: Vec<(Vec<Vec3>, Vec<Vec3>, f64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..500)
            .map(|_| {
                let (na, nb) = (rng.gen_range(1..=2000), rng.gen_range(1..=2000));
                (
                    common::random_cloud(&mut rng, na),
                    common::random_cloud(&mut rng, nb),
                    rng.gen_range(0.01..0.3),
                )
            })
            .collect()
    };
    let worst = pairs
        .par_iter()
        .map(|(a, b, t)| -> Result<f64, String> {
            let ab = brute_sq(a, b);
            let ba = brute_sq(b, a);
            let fast = nearest_sq_dists(a, b).map_err(|e| e.to_string())?;
            let mut err = fast
                .iter()
                .zip(&ab)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let cd = 0.5 * (mean(&ab) + mean(&ba));
            err = err.max((chamfer(a, b).map_err(|e| e.to_string())? - cd).abs());
            err = err.max((chamfer_single(b, a).map_err(|e| e.to_string())? - mean(&ba)).abs());
            let pct = |v: &[f64]| {
                100.0 * v.iter().filter(|d| d.sqrt() <= *t).count() as f64 / v.len() as f64
            };
            let (p, r) = (pct(&ab), pct(&ba));
            let f = if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            };
            let fs = fscore(a, b, *t).map_err(|e| e.to_string())?;
            err = err
                .max((fs.fscore - f).abs())
                .max((fs.precision - p).abs())
                .max((fs.recall - r).abs());
            Ok(err)
        })
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))?;
    ensure(worst <= TOL, format!("max deviation {worst:e}"))?;
    Ok(format!("500 pairs: max deviation {worst:.1e}"))
}

fn in_box(b: &GravityBox, p: &Vec3) -> bool {
    let local = yaw_rotation(b.yaw).transpose() * (p - b.center);
    (0..3).all(|i| local[i].abs() <= 0.5 * b.scale[i])
}

fn monte_carlo_iou(a: &GravityBox, b: &GravityBox, samples: usize, seed: u64) -> f64 {
    let ca = corners_from_box(a).0;
    let cb = corners_from_box(b).0;
    let lo = ca
        .iter()
        .chain(&cb)
        .fold(Vec3::repeat(f64::INFINITY), |m, c| m.inf(c));
    let hi = ca
        .iter()
        .chain(&cb)
        .fold(Vec3::repeat(f64::NEG_INFINITY), |m, c| m.sup(c));
    let chunks = 64;
    let (inter, union) = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = SmallRng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(k));
            let (mut i, mut u) = (0u64, 0u64);
            for _ in 0..samples / chunks as usize {
                let p = Vec3::from_fn(|d, _| rng.gen_range(lo[d]..hi[d]));
                let (x, y) = (in_box(a, &p), in_box(b, &p));
                i += (x && y) as u64;
                u += (x || y) as u64;
            }
            (i, u)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    inter as f64 / union as f64
}

fn c8_box_iou() -> Outcome {
    const TOL: f64 = 0.003;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let a = common::any_box(&mut rng);
        // overlapping partner: nearby center, similar size
        let b = GravityBox::new(
            a.center + Vec3::from_fn(|i, _| rng.gen_range(-0.5..0.5) * a.scale[i]),
            a.scale.map(|s| s * rng.gen_range(0.5..1.5)),
            a.yaw + rng.gen_range(-1.0..1.0),
        )
        .unwrap();
        let exact = box_iou(&a, &b).map_err(|e| e.to_string())?;
        let mc = monte_carlo_iou(&a, &b, 10_000_000, k);
        worst = worst.max((exact - mc).abs());
    }
    ensure(worst <= TOL, format!("max |exact - MC| {worst:.4}"))?;
    for _ in 0..100 {
        let a = common::any_box(&mut rng);
        let iou = box_iou(&a, &a).map_err(|e| e.to_string())?;
        ensure(iou == 1.0, format!("identity IoU {iou}"))?;
        let mut far = a;
        far.center.x += a.scale.amax() * 2.0;
        let iou = box_iou(&a, &far).map_err(|e| e.to_string())?;
        ensure(iou == 0.0, format!("disjoint IoU {iou}"))?;
    }
    Ok(format!(
        "100 pairs: max |exact - MC| {worst:.4}; identity 1, disjoint 0"
    ))
}

fn c9_alignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let place = |mesh: TriangleMesh, id: u32, s: f64, t: Vec3| SceneObject {
        id,
        mesh,
        transform: AffineTransform {
            linear: nalgebra::Matrix3::identity() * s,
            translation: t,
        },
    };
    let gt = vec![
        place(corpus::chair(), 1, 0.4, Vec3::new(-0.5, 0.0, 0.3)),
        place(corpus::table(), 2, 0.5, Vec3::new(0.4, -0.1, -0.2)),
        place(corpus::icosphere(2), 3, 0.2, Vec3::new(0.0, 0.5, 0.0)),
    ];
    let mut pred = gt.clone();
    pred[0].transform.translation += Vec3::new(0.004, 0.0, -0.003);
    pred[1].transform.linear *= 1.02;
    pred[2].mesh = corpus::icosphere(1);
    let cfg = MetricConfig {
        samples_per_mesh: 5000,
        ..MetricConfig::default()
    };
    let base = evaluate_scene(&pred, &gt, &cfg).map_err(|e| e.to_string())?;
    for trial in 0..20 {
        let s = rng.gen_range(0.1..10.0);
        let t = Vec3::from_fn(|_, _| rng.gen_range(-5.0..5.0));
        let global = AffineTransform {
            linear: nalgebra::Matrix3::identity() * s,
            translation: t,
        };
        let moved: Vec<SceneObject> = pred
            .iter()
            .map(|o| SceneObject {
                transform: global.compose(&o.transform),
                ..o.clone()
            })
            .collect();
        let r = evaluate_scene(&moved, &gt, &cfg).map_err(|e| e.to_string())?;
        ensure(
            r == base,
            format!("trial {trial}: report changed under scale {s} and shift {t:?}"),
        )?;
    }
    Ok(format!(
        "20 similarity transforms, scene F {:.2}",
        base.scene.fscore
    ))
}

/// The selection rule restated by enumeration.
fn select_oracle(c: &[CandidateResult], tau: f64) -> Option<(usize, f64)> {
    let key = |x: &CandidateResult| (x.faces, x.hausdorff);
    let below: Vec<(usize, f64)> = c.iter().filter(|x| x.hausdorff < tau).map(key).collect();
    if !below.is_empty() {
        let fewest = below.iter().map(|k| k.0).min().unwrap();
        let h = below
            .iter()
            .filter(|k| k.0 == fewest)
            .map(|k| k.1)
            .fold(f64::INFINITY, f64::min);
        return Some((fewest, h));
    }
    let h = c.iter().map(|x| x.hausdorff).fold(f64::INFINITY, f64::min);
    c.iter()
        .filter(|x| x.hausdorff == h)
        .map(|x| x.faces)
        .min()
        .map(|f| (f, h))
}

fn c10_preprocess() -> Outcome {
    let ico = corpus::icosphere(3);
    let mut reached = Vec::new();
    for target in [800, 400, 100] {
        let d = quadric_decimate(&ico, target).map_err(|e| e.to_string())?;
        ensure(
            d.reached_target && d.mesh.faces.len() <= target,
            format!("target {target}: {} faces", d.mesh.faces.len()),
        )?;
        reached.push(format!("{}->{}", target, d.mesh.faces.len()));
    }
    let tau = 0.01;
    let cand = |faces, hausdorff| CandidateResult {
        mesh: TriangleMesh::default(),
        quant_level: 512,
        face_target: faces,
        hausdorff,
        faces,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let levels = [0.002, 0.005, 0.0099, 0.01, 0.02, 0.05];
    for _ in 0..2000 {
        let k = rng.gen_range(1..8);
        let c: Vec<CandidateResult> = (0..k)
            .map(|_| {
                cand(
                    [100, 800, 2000, 4000][rng.gen_range(0..4)],
                    levels[rng.gen_range(0..levels.len())],
                )
            })
            .collect();
        let got = select_best(&c, tau).map(|x| (x.faces, x.hausdorff));
        ensure(
            got == select_oracle(&c, tau),
            format!(
                "selection {got:?} for {:?}",
                c.iter().map(|x| (x.faces, x.hausdorff)).collect::<Vec<_>>()
            ),
        )?;
    }
    Ok(format!(
        "icosphere 1280 faces: {}; 2000 candidate sets match the rule",
        reached.join(", ")
    ))
}

fn c11_backprojection() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let (w, h) = (640, 480);
        let k = CameraIntrinsics::new(
            rng.gen_range(400.0..700.0),
            rng.gen_range(400.0..700.0),
            rng.gen_range(300.0..340.0),
            rng.gen_range(220.0..260.0),
            w,
            h,
        )
        .map_err(|e| e.to_string())?;
        let values: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.3..8.0)).collect();
        let depth = DepthMap::new(w, h, values).map_err(|e| e.to_string())?;
        let cloud = back_project(&depth, &k, None).map_err(|e| e.to_string())?;
        ensure(cloud.len() == w * h, "every pixel should produce a point")?;
        for (p, px) in cloud.points.iter().zip(cloud.pixels.as_ref().unwrap()) {
            let (u, v) = k.project(p).map_err(|e| e.to_string())?;
            worst = worst.max((u - px[0]).abs()).max((v - px[1]).abs());
            worst = worst.max((p.z - depth.get(px[0] as usize, px[1] as usize)).abs());
        }
    }
    ensure(worst <= TOL, format!("max reprojection error {worst:e}"))?;
    Ok(format!("3 frames of 640x480: max error {worst:.1e}"))
}

fn c12_grammar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut mutations, mut accepted_valid) = (0usize, 0usize);
    for i in 0..1000 {
        let scheme = Scheme::ALL[i % 3];
        let n = [128, 512][rng.gen_range(0..2)];
        let v = UnifiedVocabulary::new(vocab(scheme, n)).unwrap();
        let canon =
            canonicalize(&common::small_manifold(&mut rng), grid(n)).map_err(|e| e.to_string())?;
        let record = ObjectRecord::encode(&common::box_inside(&mut rng, 0.05), &canon, v);
        let seq = assemble(&record, v).map_err(|e| e.to_string())?;
        let back = parse(&seq, v).map_err(|e| format!("sequence {i}: {e}"))?;
        ensure(
            back == record,
            format!("sequence {i}: parse(assemble(r)) != r"),
        )?;

        for k in 0..seq.len() {
            let status = validate_prefix(&seq[..k], v);
            ensure(
                status == PrefixStatus::ValidPrefix,
                format!("sequence {i}: prefix {k} is {status:?}"),
            )?;
        }
        ensure(
            validate_prefix(&seq, v) == PrefixStatus::Complete,
            format!("sequence {i} not complete"),
        )?;

        // a rejected mutation must be flagged at or after the edit; an
        // accepted one must be a canonical stream in its own right
        let mut check = |m: &[u32], at: usize, what: &str| -> Result<(), String> {
            mutations += 1;
            match validate_prefix(m, v) {
                PrefixStatus::Invalid { offset, .. } => ensure(
                    offset >= at && offset <= m.len(),
                    format!("sequence {i} {what} at {at}: offset {offset}"),
                ),
                PrefixStatus::ValidPrefix => Ok(()),
                PrefixStatus::Complete => {
                    let r = parse(m, v).map_err(|e| e.to_string())?;
                    let again = assemble(&r, v).map_err(|e| e.to_string())?;
                    accepted_valid += 1;
                    ensure(
                        again == m,
                        format!("sequence {i} {what} at {at}: accepted non-canonical stream"),
                    )
                }
            }
        };
        for at in 0..seq.len() {
            let mut del = seq.clone();
            del.remove(at);
            check(&del, at, "deletion")?;
            let mut sub = seq.clone();
            sub[at] = rng.gen_range(0..v.size());
            if sub[at] != seq[at] {
                check(&sub, at, "substitution")?;
            }
        }
    }
    Ok(format!(
        "1000 sequences, {mutations} mutations ({accepted_valid} yield other well-formed objects)"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "pose sequence lengths", 1, c1_pose_lengths),
        (2, "affine fit exactness", 10, c2_fit_exact),
        (3, "pose roundtrip bound", 30, c3_pose_roundtrip),
        (4, "tokenizer losslessness", 120, c4_lossless),
        (5, "vocabulary sizes", 1, c5_vocab),
        (6, "compression ratios", 120, c6_compression),
        (7, "metric oracle equivalence", 60, c7_metric_oracle),
        (8, "box IoU vs Monte Carlo", 120, c8_box_iou),
        (9, "scene alignment invariance", 60, c9_alignment),
        (10, "preprocess contract", 30, c10_preprocess),
        (11, "back-projection roundtrip", 5, c11_backprojection),
        (12, "sequence grammar", 30, c12_grammar),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > Duration::from_secs(limit) => Err(format!("{msg}; too slow")),
            o => o,
        };
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        failed += outcome.is_err() as u32;
        println!(
            "[{tag}] {id:>2} {name}: {msg} ({:.2}s, limit {limit}s)",
            took.as_secs_f64()
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
