//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lrcc_core::bounds::{self, BoundCase, Symbols};
use lrcc_core::conversion::{
    self, build_merge_pair, default_reencode_procedure, merge_optimal_procedure,
};
use lrcc_core::entropy::{self, check_download_constraint};
use lrcc_core::lrc::{construct_pyramid, LrcCode};
use lrcc_core::{Element, Field, FieldMatrix, LrcParams, MergeSpec};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MESSAGES_PER_SPEC: usize = 100;
const RANDOM_SPECS: usize = 600;
const LEMMA_TRIALS: usize = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn spec(
    ki: usize,
    gi: usize,
    r: usize,
    delta: usize,
    lambda: usize,
    gf: usize,
    alpha: usize,
) -> MergeSpec {
    MergeSpec::new(ki, gi, r, delta, lambda, gf, alpha).expect("valid spec")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid() -> Vec<LrcParams> {
    let mut out = Vec::new();
    for k in [2, 4, 6, 9] {
        for g in 0..=3 {
            for r in [2, 3] {
                for delta in [1, 2] {
                    if k % r != 0 {
                        continue;
                    }
                    let p = LrcParams::new(k, g, r, delta, 1).unwrap();
                    if p.n() <= 20 {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn grid_codes() -> Result<Vec<LrcCode>, String> {
    let field = Field::gf256();
    grid()
        .into_iter()
        .map(|p| construct_pyramid(p, &field, 1).map_err(|e| format!("{p:?}: {e}")))
        .collect()
}

/// Minimum number of nonzero nodes over all nonzero codewords, by brute
/// force over every message.
fn brute_force_distance(code: &LrcCode) -> usize {
    let p = code.params();
    let q = code.field().q() as usize;
    let total = q.pow(p.k as u32);
    (1..total)
        .map(|mut m| {
            let msg: Vec<Element> = (0..p.k)
                .map(|_| {
                    let s = (m % q) as Element;
                    m /= q;
                    s
                })
                .collect();
            let cw = code.encode(&msg).unwrap();
            (0..p.n())
                .filter(|&pos| cw.node(p, pos).iter().any(|&x| x != 0))
                .count()
        })
        .min()
        .unwrap()
}

fn criterion1() -> Outcome {
    let field = Field::gf256();
    let small = Field::gf16();
    let mut count = 0;
    let mut cross = 0;
    for p in grid() {
        let code = construct_pyramid(p, &field, 1).map_err(|e| format!("{p:?}: {e}"))?;
        let d = code.distance().expect("distance is verified").d;
        ensure(d == p.g + p.delta + 1, || format!("{p:?}: d = {d}"))?;
        count += 1;
        if p.k <= 4 {
            let code = construct_pyramid(p, &small, 1).map_err(|e| format!("{p:?}: {e}"))?;
            let oracle = brute_force_distance(&code);
            let d = code.distance().unwrap().d;
            ensure(oracle == d, || {
                format!("{p:?} over GF(16): enumeration {d}, codeword weight {oracle}")
            })?;
            cross += 1;
        }
    }
    Ok(format!(
        "{count} grid codes reach d = g + delta + 1 ({cross} cross-checked by codeword weight)"
    ))
}

fn tightness_specs() -> Vec<MergeSpec> {
    let mut out = Vec::new();
    for lambda in [2, 3] {
        for gf in [1, 2] {
            out.push(spec(4, 2, 2, 1, lambda, gf, 1));
        }
    }
    for gf in [1, 2, 3] {
        out.push(spec(9, 3, 3, 1, 2, gf, 1));
    }
    out
}

fn criterion2() -> Outcome {
    let field = Field::gf256();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (seed, s) in tightness_specs().into_iter().enumerate() {
        let pair = build_merge_pair(&s, &field, seed as u64).map_err(|e| format!("{s}: {e}"))?;
        let proc = merge_optimal_procedure(&pair, &s).map_err(|e| e.to_string())?;
        let bound = bounds::theorem1_bound(&s)
            .map_err(|e| e.to_string())?
            .bound_gamma_r;
        for _ in 0..MESSAGES_PER_SPEC {
            let m = conversion::random_message(&s, &field, &mut rng);
            let (cw, report) =
                conversion::execute(&proc, &pair, &m).map_err(|e| format!("{s}: {e}"))?;
            let direct = pair.final_code().encode(&m).unwrap();
            ensure(cw == direct, || format!("{s}: final codeword differs"))?;
            let expected = s.lambda * s.g_final * s.alpha;
            ensure(report.gamma_r == expected, || {
                format!("{s}: gammaR {} != {expected}", report.gamma_r)
            })?;
            ensure(
                Symbols::from(report.gamma_r) == bound && report.gap.is_zero(),
                || format!("{s}: gammaR {} vs bound {bound}", report.gamma_r),
            )?;
        }
    }
    Ok(format!(
        "{} specs at gap 0, {MESSAGES_PER_SPEC} bit-exact messages each",
        tightness_specs().len()
    ))
}

fn criterion3() -> Outcome {
    let table = [
        (spec(8, 4, 4, 1, 2, 3, 1), BoundCase::GfLeGiAndR, 6),
        (spec(8, 2, 4, 1, 3, 4, 1), BoundCase::GiLtGfLeR, 18),
        (spec(4, 3, 2, 1, 2, 3, 1), BoundCase::MinGAboveR, 4),
        (spec(9, 3, 3, 1, 2, 4, 1), BoundCase::Otherwise, 6),
    ];
    for (s, case, value) in table {
        let report = bounds::theorem1_bound(&s).map_err(|e| e.to_string())?;
        ensure(
            report.case_label == case && report.bound_gamma_r == Symbols::int(value),
            || {
                format!(
                    "{s}: {} {} (want {case} {value})",
                    report.case_label, report.bound_gamma_r
                )
            },
        )?;
    }
    Ok("cases reproduce 6, 18, 4, 6".into())
}

/// The four cases written as one expression with `m = min{gF, r}`.
fn combined_bound(s: &MergeSpec) -> Rational64 {
    let q = |x: usize| Rational64::from_integer(x as i64);
    let (lambda, alpha, mu, r) = (q(s.lambda), q(s.alpha), q(s.mu_initial()), s.r);
    let m = s.g_final.min(r);
    let low = s.g_initial.min(s.g_final).min(r);
    let ratio = mu * q(r + 1) / q(m + 1);
    lambda * q(m) * alpha + (ratio - q(1)) * (lambda * q(m) * alpha - lambda * q(low) * alpha)
}

fn random_spec(rng: &mut impl Rng) -> MergeSpec {
    let ki = rng.random_range(1..=12);
    let divisors: Vec<usize> = (1..=ki).filter(|d| ki % d == 0).collect();
    let r = divisors[rng.random_range(0..divisors.len())];
    spec(
        ki,
        rng.random_range(0..=6),
        r,
        1,
        rng.random_range(2..=4),
        rng.random_range(0..=6),
        rng.random_range(1..=3),
    )
}

fn criterion4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut tight, mut strict) = (0, 0);
    for _ in 0..RANDOM_SPECS {
        let s = random_spec(&mut rng);
        let bound = bounds::lower_bound(&s).map_err(|e| e.to_string())?;
        let cost = bounds::construction_cost(&s).map_err(|e| e.to_string())?;
        ensure(bound.0 == combined_bound(&s), || {
            format!("{s}: bound {bound} vs combined form {}", combined_bound(&s))
        })?;
        ensure(cost >= bound, || {
            format!("{s}: cost {cost} below bound {bound}")
        })?;
        if s.g_final <= s.r {
            ensure(cost == bound, || {
                format!("{s}: cost {cost} != bound {bound} with gF <= r")
            })?;
            tight += 1;
        } else if cost > bound {
            strict += 1;
        }
    }
    Ok(format!(
        "{RANDOM_SPECS} specs, 0 violations ({tight} tight, {strict} strictly above)"
    ))
}

fn criterion5() -> Outcome {
    let field = Field::gf256();
    let mut checked = 0;
    for (seed, s) in tightness_specs().into_iter().enumerate() {
        let pair = build_merge_pair(&s, &field, seed as u64).map_err(|e| format!("{s}: {e}"))?;
        for proc in [
            merge_optimal_procedure(&pair, &s).map_err(|e| e.to_string())?,
            default_reencode_procedure(&pair, &s).map_err(|e| e.to_string())?,
        ] {
            let c = check_download_constraint(&pair, &proc.plan).map_err(|e| e.to_string())?;
            ensure(c.holds, || {
                format!("{s} {}: {} < {}", proc.name, c.lhs, c.rhs)
            })?;
            checked += 1;
        }

        let merge = merge_optimal_procedure(&pair, &s).unwrap();
        let message: Vec<Element> = (0..s.message_len())
            .map(|i| ((i * 37 + 5) % 256) as Element)
            .collect();
        for t in 0..s.lambda {
            // zero the contents, keep the shape
            let mut zeroed = merge.clone();
            for i in 0..s.g_final {
                zeroed.plan.global_maps[t * s.g_initial + i] = FieldMatrix::zeros(s.alpha, s.alpha);
            }
            let c = check_download_constraint(&pair, &zeroed.plan).map_err(|e| e.to_string())?;
            let run = conversion::run(&zeroed, &pair, &message).map_err(|e| e.to_string())?;
            ensure(c.holds || !run.correct(), || {
                format!("{s}: zeroed U-block {t} is correct below the bound")
            })?;

            // drop the downloads and let the coordinator try to re-derive
            let mut dropped = merge.plan.clone();
            for i in 0..s.g_final {
                dropped.global_maps[t * s.g_initial + i] = FieldMatrix::zeros(0, s.alpha);
            }
            let c = check_download_constraint(&pair, &dropped).map_err(|e| e.to_string())?;
            let derived = conversion::ConversionProcedure::from_plan("dropped", &pair, dropped);
            if let Ok(proc) = derived {
                let run = conversion::run(&proc, &pair, &message).map_err(|e| e.to_string())?;
                ensure(c.holds || !run.correct(), || {
                    format!("{s}: dropped U-block {t} is correct below the bound")
                })?;
            }
            checked += 2;
        }
    }
    Ok(format!(
        "{checked} plans and mutations, none correct below the bound"
    ))
}

fn criterion6() -> Outcome {
    let budget = 2_000_000;
    let codes = grid_codes()?;
    for code in &codes {
        let reports =
            entropy::run_checks(code, &["prop1", "prop2", "prop3", "dist-entropy"], budget)
                .map_err(|e| format!("{:?}: {e}", code.params()))?;
        for r in reports {
            ensure(r.passed(), || {
                format!("{:?}: {} {:?}", code.params(), r.check, r.verdict)
            })?;
        }
    }
    let l3 = entropy::check_lemma3(LEMMA_TRIALS, 3).map_err(|e| e.to_string())?;
    ensure(l3.passed(), || format!("lemma3 {:?}", l3.verdict))?;
    let l4 = entropy::check_lemma4(LEMMA_TRIALS, 4).map_err(|e| e.to_string())?;
    ensure(l4.passed(), || format!("lemma4 {:?}", l4.verdict))?;
    Ok(format!(
        "4 checks on {} grid codes, {LEMMA_TRIALS} instances each for the two sampled inequalities",
        codes.len()
    ))
}

fn criterion7() -> Outcome {
    let s = spec(8, 4, 4, 1, 2, 3, 1);
    let field = Field::gf256();
    let pair = build_merge_pair(&s, &field, 7).map_err(|e| e.to_string())?;
    let proc = default_reencode_procedure(&pair, &s).map_err(|e| e.to_string())?;
    let message: Vec<Element> = (0..s.message_len()).map(|i| (i + 1) as Element).collect();
    let (_, report) = conversion::execute(&proc, &pair, &message).map_err(|e| e.to_string())?;
    ensure(
        report.gamma_r == 16 && report.bound == Symbols::int(6) && report.gap == Symbols::int(10),
        || {
            format!(
                "gammaR {} bound {} gap {}",
                report.gamma_r, report.bound, report.gap
            )
        },
    )?;
    Ok("default re-encode reads 16 symbols against bound 6 (gap 10)".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("optimal-distance grid", criterion1, Duration::from_secs(60)),
        (
            "tightness for gF <= gI",
            criterion2,
            Duration::from_secs(30),
        ),
        ("bound case table", criterion3, Duration::MAX),
        ("cost dominates bound", criterion4, Duration::MAX),
        (
            "download constraint on procedures",
            criterion5,
            Duration::MAX,
        ),
        (
            "entropy verification suite",
            criterion6,
            Duration::from_secs(60),
        ),
        ("re-encode baseline gap", criterion7, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => {
                Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg} [{elapsed:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
