//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and time budgets are pinned below.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use narrative_eval::attention::{
    build_constant_map, mask_attention_loss, AttentionMap, CharacterRegion, ConstantMapParams,
    RegionSpec,
};
use narrative_eval::distribution::{
    cvc_evaluate, fit_gaussian, frechet_distance, sqrtm_psd, EmbeddingSet, GaussianStats,
    DEFAULT_EPSILON,
};
use narrative_eval::mask::{extract_contour, mean_overlap, overlap, BinaryMask};
use narrative_eval::scoring::{aggregate_overall, check_desiderata, Candidate, RawMetricVector};
use narrative_eval::surface::surface_distances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const TABLE_TOLERANCE: f64 = 0.015;
const SURFACE_TOLERANCE: f64 = 1e-9;
const OVERLAP_TOLERANCE: f64 = 1e-12;
const FID_1D_TOLERANCE: f64 = 1e-9;
const FID_SELF_LIMIT: f64 = 1e-6;
const SQRTM_TOLERANCE: f64 = 1e-8;
const ATTENTION_TOLERANCE: f64 = 1e-12;
const GRADIENT_TOLERANCE: f64 = 1e-6;
const RANDOM_PAIRS: usize = 1000;

type Check = fn() -> Outcome;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

fn ms(d: Duration) -> String {
    format!("{:.1} ms", d.as_secs_f64() * 1e3)
}

fn ac1_tables() -> Outcome {
    let start = Instant::now();
    let rows = reference_rows();
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for row in &rows {
        let raw = RawMetricVector {
            cn: row.cn,
            sr: row.sr,
            la: row.la,
            bdp: row.bdp,
            mc: row.mc,
            ads: row.ads,
        };
        let got = aggregate_overall(&raw)
            .map(|s| s.overall)
            .unwrap_or(f64::NAN);
        let dev = (got - row.overall).abs();
        worst = worst.max(dev);
        if dev.is_nan() || dev > TABLE_TOLERANCE {
            misses.push(format!("{}/{}", row.table, row.model));
        }
    }
    let elapsed = start.elapsed();
    let ok =
        rows.len() == 19 && misses.is_empty() && within_budget(elapsed, Duration::from_secs(1));
    outcome(
        ok,
        format!(
            "{}/{} rows within ±{TABLE_TOLERANCE}, max deviation {worst:.4}, {}{}",
            rows.len() - misses.len(),
            rows.len(),
            ms(elapsed),
            if misses.is_empty() {
                String::new()
            } else {
                format!("; misses {misses:?}")
            }
        ),
    )
}

fn ac2_desiderata() -> Outcome {
    let start = Instant::now();
    let reports: Vec<_> = Candidate::ALL
        .iter()
        .map(|&c| check_desiderata(c))
        .collect();
    let passing: Vec<Candidate> = reports
        .iter()
        .filter(|r| r.all_passed())
        .map(|r| r.candidate)
        .collect();
    let rate_failures: Vec<Candidate> = reports
        .iter()
        .filter(|r| r.criterion("iv").is_some_and(|c| !c.passed))
        .map(|r| r.candidate)
        .collect();

    let cli = Command::new(env!("CARGO_BIN_EXE_narrative-eval"))
        .arg("check-functions")
        .output();
    let cli_ok = cli.is_ok_and(|out| {
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        let met = |f: &str| {
            text.lines()
                .any(|l| l.starts_with(f) && l.ends_with("all criteria met"))
        };
        out.status.success() && met("f1") && met("f4") && !met("f2") && !met("f3")
    });
    let elapsed = start.elapsed();
    let ok = passing == [Candidate::F1, Candidate::F4]
        && rate_failures == [Candidate::F2, Candidate::F3]
        && cli_ok
        && within_budget(elapsed, Duration::from_secs(1));
    outcome(
        ok,
        format!(
            "all criteria met by {passing:?}; uniform rate failed by {rate_failures:?}; \
             derivative ratios {:.3} / {:.0} / {:.0} / {:.3}; CLI agrees: {cli_ok}; {}",
            reports[0].derivative_ratio,
            reports[1].derivative_ratio,
            reports[2].derivative_ratio,
            reports[3].derivative_ratio,
            ms(elapsed)
        ),
    )
}

fn random_pairs(seed: u64) -> Vec<(BinaryMask, BinaryMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..RANDOM_PAIRS)
        .map(|_| {
            let a = random_mask(&mut rng, 64);
            let b = random_mask_sized(&mut rng, a.width(), a.height());
            (a, b)
        })
        .collect()
}

fn ac3_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let pairs = random_pairs(0xAC3);
    let (mut surface_dev, mut overlap_dev): (f64, f64) = (0.0, 0.0);
    let (mut dice_sum, mut iou_sum) = (0.0, 0.0);
    for (a, b) in &pairs {
        let (ca, cb) = (extract_contour(a), extract_contour(b));
        let fast = surface_distances(&ca, &cb).expect("random masks are never empty");
        let brute = surface_oracle(ca.points(), cb.points());
        for (x, y) in [
            (fast.hausdorff, brute.hausdorff),
            (fast.modified_hausdorff, brute.modified_hausdorff),
            (fast.average_surface_distance, brute.asd),
        ] {
            surface_dev = surface_dev.max((x - y).abs());
        }
        let o = overlap(a, b).expect("same shape");
        let (dice, iou) = overlap_oracle(a, b);
        overlap_dev = overlap_dev
            .max((o.dice - dice).abs())
            .max((o.iou - iou).abs());
        dice_sum += dice;
        iou_sum += iou;
    }
    let (mean_dice, mean_iou) = mean_overlap(&pairs).expect("non-empty");
    let n = pairs.len() as f64;
    overlap_dev = overlap_dev
        .max((mean_dice - dice_sum / n).abs())
        .max((mean_iou - iou_sum / n).abs());
    let elapsed = start.elapsed();
    let ok = surface_dev <= SURFACE_TOLERANCE
        && overlap_dev <= OVERLAP_TOLERANCE
        && within_budget(elapsed, Duration::from_secs(60));
    outcome(
        ok,
        format!(
            "{} pairs: surface max deviation {surface_dev:.2e} (≤ {SURFACE_TOLERANCE:e}), \
             Dice/mIoU max deviation {overlap_dev:.2e} (≤ {OVERLAP_TOLERANCE:e}), {}",
            pairs.len(),
            ms(elapsed)
        ),
    )
}

fn ac4_fid() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC4);

    let mut closed_form_dev: f64 = 0.0;
    for _ in 0..100 {
        let (mu1, mu2) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let (sd1, sd2) = (rng.random_range(0.01..20.0), rng.random_range(0.01..20.0));
        let g = |mu: f64, sd: f64| {
            GaussianStats::new(
                DVector::from_element(1, mu),
                DMatrix::from_element(1, 1, sd * sd),
            )
        };
        let fid = frechet_distance(&g(mu1, sd1), &g(mu2, sd2), DEFAULT_EPSILON)
            .map(|r| r.fid)
            .unwrap_or(f64::NAN);
        let want: f64 = (mu1 - mu2) * (mu1 - mu2) + (sd1 - sd2) * (sd1 - sd2);
        closed_form_dev = closed_form_dev.max((fid - want).abs() / want.max(1.0));
    }

    let mut self_fid: f64 = 0.0;
    for d in [1, 8, 64] {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let x = EmbeddingSet::from_rows(&rows).expect("finite rows");
        let g = fit_gaussian(&x);
        self_fid = self_fid.max(
            frechet_distance(&g, &g, DEFAULT_EPSILON)
                .map(|r| r.fid)
                .unwrap_or(f64::NAN),
        );
    }

    let mut sqrtm_dev: f64 = 0.0;
    for _ in 0..5 {
        let b = DMatrix::from_fn(64, 64, |_, _| rng.random_range(-1.0..1.0));
        let a = b.transpose() * &b;
        let rel = sqrtm_psd(&a)
            .map(|s| (&s * &s - &a).norm() / a.norm())
            .unwrap_or(f64::NAN);
        sqrtm_dev = sqrtm_dev.max(rel);
    }

    let elapsed = start.elapsed();
    let ok = closed_form_dev <= FID_1D_TOLERANCE
        && self_fid <= FID_SELF_LIMIT
        && sqrtm_dev <= SQRTM_TOLERANCE
        && within_budget(elapsed, Duration::from_secs(30));
    outcome(
        ok,
        format!(
            "1-D closed form max relative deviation {closed_form_dev:.2e} over 100 draws; \
             max FID(X,X) {self_fid:.2e}; sqrtm reconstruction {sqrtm_dev:.2e} on 64x64; {}",
            ms(elapsed)
        ),
    )
}

fn ac5_attention() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC5);
    let mut linear_dev: f64 = 0.0;
    let mut lambda_dev: f64 = 0.0;
    let mut gradient_dev: f64 = 0.0;
    let mut mass_exact = true;
    let random_map = |rng: &mut ChaCha8Rng, pixels: usize, words: usize| {
        let values = (0..pixels * words)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        AttentionMap::new(pixels, words, values).expect("valid map")
    };
    for _ in 0..100 {
        let (pixels, words) = (rng.random_range(1..48), rng.random_range(1..8));
        let a = random_map(&mut rng, pixels, words);
        let b = random_map(&mut rng, pixels, words);
        let characters: Vec<CharacterRegion> = (0..rng.random_range(1..=3))
            .map(|_| {
                let ws: Vec<usize> = (0..rng.random_range(1..=3))
                    .map(|_| rng.random_range(0..words))
                    .collect();
                let px: Vec<usize> = (0..pixels).filter(|_| rng.random_bool(0.4)).collect();
                CharacterRegion::new(ws, px, pixels).expect("in range")
            })
            .collect();
        let regions = RegionSpec::new(characters.clone());
        let loss = |m: &AttentionMap, lambda: f64| {
            mask_attention_loss(m, &regions, lambda).unwrap_or(f64::NAN)
        };

        let (alpha, beta) = (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
        let mixed: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let mixed = AttentionMap::new(pixels, words, mixed).expect("valid map");
        let lc = loss(&mixed, 0.5);
        linear_dev = linear_dev
            .max((lc - (alpha * loss(&a, 0.5) + beta * loss(&b, 0.5))).abs() / lc.abs().max(1.0));

        let lambda = rng.random_range(0.0..3.0);
        let inside = loss(&a, 0.0);
        let outside = loss(&a, 1.0) - inside;
        let got = loss(&a, lambda);
        lambda_dev = lambda_dev.max((got - (inside + lambda * outside)).abs() / got.abs().max(1.0));

        // gradient check on a single character, perturbing one entry at a time
        let single = RegionSpec::new(vec![characters[0].clone()]);
        let base = mask_attention_loss(&a, &single, lambda).unwrap_or(f64::NAN);
        let h = 1e-3;
        for p in 0..pixels {
            for w in 0..words {
                let mut values = a.values().to_vec();
                values[p * words + w] += h;
                let bumped = AttentionMap::new(pixels, words, values).expect("valid map");
                let grad =
                    (mask_attention_loss(&bumped, &single, lambda).unwrap_or(f64::NAN) - base) / h;
                let c = &characters[0];
                let want = if !c.words().contains(&w) {
                    0.0
                } else if c.in_target(p) {
                    1.0
                } else {
                    lambda
                };
                gradient_dev = gradient_dev.max((grad - want).abs());
            }
        }

        let (w, h) = (rng.random_range(1..16), rng.random_range(1..16));
        let mask = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(0.5)).expect("valid shape");
        let word_count_sum = rng.random_range(1..40);
        let selected = rng.random_range(0..words);
        let params = ConstantMapParams {
            word_count_sum,
            mask: mask.clone(),
        };
        let zero = AttentionMap::zeros(w * h, words).expect("valid shape");
        match build_constant_map(&zero, &params, &[selected]) {
            Ok(map) => {
                let unit = 1.0 / word_count_sum as f64;
                let placed = (0..w * h)
                    .filter(|&p| map.get(p, selected).to_bits() == unit.to_bits())
                    .count();
                let untouched = (0..w * h).all(|p| mask.data()[p] || map.get(p, selected) == 0.0)
                    && (0..words)
                        .filter(|&k| k != selected)
                        .all(|k| map.word_mass(k) == 0.0);
                let expected = mask.foreground_count() as f64 / word_count_sum as f64;
                let mass_close = (map.word_mass(selected) - expected).abs()
                    <= ATTENTION_TOLERANCE * expected.max(1.0);
                mass_exact &= placed == mask.foreground_count() && untouched && mass_close;
            }
            Err(_) => mass_exact = false,
        }
    }
    let ok = linear_dev <= ATTENTION_TOLERANCE
        && lambda_dev <= ATTENTION_TOLERANCE
        && gradient_dev <= GRADIENT_TOLERANCE
        && mass_exact;
    outcome(
        ok,
        format!(
            "linearity/homogeneity {linear_dev:.2e}, lambda decomposition {lambda_dev:.2e} \
             (relative, ≤ {ATTENTION_TOLERANCE:e}); gradient {{1, λ, 0}} max deviation {gradient_dev:.2e} \
             (≤ {GRADIENT_TOLERANCE:e}); constant-map entries exactly 1/word_count_sum on every \
             foreground pixel: {mass_exact}"
        ),
    )
}

fn ac6_invariants() -> Outcome {
    let start = Instant::now();
    let pairs = random_pairs(0xAC6);
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC6);
    let mut violations = Vec::new();
    let mut identity_dev: f64 = 0.0;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let (ca, cb) = (extract_contour(a), extract_contour(b));
        let (ab, ba) = match (surface_distances(&ca, &cb), surface_distances(&cb, &ca)) {
            (Ok(ab), Ok(ba)) => (ab, ba),
            _ => {
                violations.push(format!("{i}: empty contour"));
                continue;
            }
        };
        if ab.hausdorff != ba.hausdorff
            || ab.modified_hausdorff != ba.modified_hausdorff
            || (ab.average_surface_distance - ba.average_surface_distance).abs() > 1e-12
        {
            violations.push(format!("{i}: asymmetric"));
        }
        if ab.modified_hausdorff > ab.hausdorff || ab.average_surface_distance > ab.hausdorff {
            violations.push(format!("{i}: mean exceeds max"));
        }
        let (dx, dy) = (rng.random_range(0..50), rng.random_range(0..50));
        match surface_distances(&ca.translated(dx, dy), &cb.translated(dx, dy)) {
            Ok(t)
                if t.hausdorff == ab.hausdorff
                    && t.modified_hausdorff == ab.modified_hausdorff
                    && (t.average_surface_distance - ab.average_surface_distance).abs()
                        <= 1e-12 => {}
            _ => violations.push(format!("{i}: translation")),
        }
        if let Ok(o) = overlap(a, b) {
            identity_dev = identity_dev.max((o.dice - 2.0 * o.iou / (1.0 + o.iou)).abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = violations.is_empty() && identity_dev <= OVERLAP_TOLERANCE;
    outcome(
        ok,
        format!(
            "{} pairs: {} violations of symmetry / MC ≤ HD / ASD ≤ HD / translation; \
             Dice = 2IoU/(1+IoU) max deviation {identity_dev:.2e}; {}{}",
            pairs.len(),
            violations.len(),
            ms(elapsed),
            violations
                .first()
                .map(|v| format!("; first: {v}"))
                .unwrap_or_default()
        ),
    )
}

fn ac7_determinism() -> Outcome {
    let dir = match tempfile::TempDir::new() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("temp dir: {e}")),
    };
    let manifest = write_random_manifest(dir.path(), 0xAC7, 40);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_narrative-eval"))
            .args([
                "eval",
                manifest.to_str().unwrap_or_default(),
                "--threads",
                threads,
            ])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| o.stdout)
    };
    match (run("1"), run("4"), run("3")) {
        (Some(one), Some(four), Some(three)) => outcome(
            one == four && one == three && !one.is_empty(),
            format!(
                "40-pair manifest, --threads 1 / 4 / 3: {} bytes, identical: {}",
                one.len(),
                one == four && one == three
            ),
        ),
        _ => outcome(false, "eval failed"),
    }
}

fn ac8_statement() -> Outcome {
    println!(
        "     The published absolute FID and CLIP numbers need the trained diffusion models, \
         the curated StorySalon subset and an Inception/CLIP feature extractor. None of those \
         are in scope, so CVC acceptance rests on AC4 and on convergence to the analytic \
         Fréchet distance for synthetic Gaussians, checked here."
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC8);
    let (mu1, sd1) = ([0.0, 1.0, -1.0], [1.0, 0.5, 2.0]);
    let (mu2, sd2) = ([1.0, 1.0, 0.5], [1.5, 0.5, 1.0]);
    let analytic: f64 = (0..3)
        .map(|i| (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]) + (sd1[i] - sd2[i]) * (sd1[i] - sd2[i]))
        .sum();
    let mut sample = |n: usize, mu: &[f64; 3], sd: &[f64; 3]| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..3)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mu[i] + sd[i] * z
                    })
                    .collect()
            })
            .collect();
        EmbeddingSet::from_rows(&rows).expect("finite rows")
    };
    let mut errors = Vec::new();
    for n in [100, 1000, 50_000] {
        let (g, r) = (sample(n, &mu1, &sd1), sample(n, &mu2, &sd2));
        let fid = cvc_evaluate(&g, &r, DEFAULT_EPSILON)
            .map(|e| e.frechet.fid)
            .unwrap_or(f64::NAN);
        errors.push((fid - analytic).abs() / analytic);
    }
    let ok = errors[2] < 0.02 && errors[2] < errors[0];
    outcome(
        ok,
        format!(
            "published FID/CLIP comparison not reproduced (out of scope); synthetic Gaussian relative error \
             n=100: {:.3}, n=1000: {:.3}, n=50000: {:.4}",
            errors[0], errors[1], errors[2]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Check); 8] = [
        ("AC1", "table reproduction", ac1_tables),
        ("AC2", "desiderata reproduction", ac2_desiderata),
        ("AC3", "oracle equivalence", ac3_oracle_equivalence),
        ("AC4", "FID correctness", ac4_fid),
        ("AC5", "attention-ops properties", ac5_attention),
        ("AC6", "metric-suite invariants", ac6_invariants),
        ("AC7", "determinism", ac7_determinism),
        ("AC8", "non-reproducibility statement", ac8_statement),
    ];
    let mut failures = 0;
    for (id, name, check) in criteria {
        let result = check();
        if !result.passed {
            failures += 1;
        }
        println!(
            "{} {id} {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
