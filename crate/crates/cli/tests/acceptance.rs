//! Acceptance suite: one test per release criterion. Each test prints a
//! `PASS criterion NN` line on success, so `--nocapture` reads as a
//! checklist; a failing criterion fails its test.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read as _, Write as _};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use f3_core::corpus::Veracity;
use f3_core::detect::Prediction;
use f3_core::evaluate::macro_f1;
use f3_core::hashing;
use f3_core::prompt::{Catalog, PromptError, Strategy, VariantId};
use f3_core::purify::{
    compute_hybrid_thresholds, factual_filter, logical_filter, nli_decision, semantic_distance,
    ConsistencyScores, FilterDecision, JudgeVerdict, JudgeVote, NliDecision, PurifyReason,
    PurifySummary, PurifyVerdict, ThresholdConfig, ThresholdProvenance,
};
use f3_gateway::{
    ApiShape, Gateway, GenerationParams, HttpTransport, ProviderConfig, RecordStatus, Store,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root exists")
}

// ---------------------------------------------------------------------------
// Criterion 1: hybrid thresholds vs a brute-force oracle
// ---------------------------------------------------------------------------

/// Quantile oracle: explicit rank arithmetic on a sorted copy, written
/// independently of the implementation under test.
fn oracle_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * (n as f64 - 1.0);
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Two-pass sample standard deviation (the textbook formula, not Welford).
fn oracle_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

fn oracle_thresholds(fake: &[f64], real: &[f64]) -> (f64, f64) {
    let stats = |scores: &[f64]| {
        let q90 = oracle_quantile(scores, 0.90);
        let iqr = oracle_quantile(scores, 0.75) - oracle_quantile(scores, 0.25);
        (q90, iqr, oracle_sigma(scores))
    };
    let (fq90, fiqr, fsigma) = stats(fake);
    let (rq90, riqr, rsigma) = stats(real);
    (
        ((fq90 + (fiqr + fsigma)) / 2.0).clamp(0.0, 1.0),
        ((rq90 + (riqr - rsigma)) / 2.0).clamp(0.0, 1.0),
    )
}

#[test]
fn criterion_01_hybrid_thresholds_match_brute_force_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF3);
    let mut lists = 0usize;

    for round in 0..500 {
        // Pin the extremes in round 0, draw sizes freely afterwards; every
        // seventh round quantizes values to force ties at the quantile ranks.
        let (fake_len, real_len) = if round == 0 {
            (4usize, 10_000usize)
        } else {
            (rng.random_range(4..=10_000), rng.random_range(4..=10_000))
        };
        let mut draw = |len: usize, quantized: bool| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    if quantized {
                        rng.random_range(0..=10) as f64 / 10.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        };
        let quantized = round % 7 == 3;
        let fake = draw(fake_len, quantized);
        let real = draw(real_len, quantized);
        lists += 2;

        let got = compute_hybrid_thresholds(&fake, &real).expect("valid inputs");
        let (want_fake, want_real) = oracle_thresholds(&fake, &real);
        assert!(
            (got.theta_fake - want_fake).abs() <= 1e-9,
            "round {round}: theta_fake {} vs oracle {want_fake}",
            got.theta_fake
        );
        assert!(
            (got.theta_real - want_real).abs() <= 1e-9,
            "round {round}: theta_real {} vs oracle {want_real}",
            got.theta_real
        );
        assert_eq!(got.provenance, ThresholdProvenance::Computed);
        assert!(got.inputs_digest.is_some());
    }

    let elapsed = started.elapsed();
    assert_eq!(lists, 1000);
    assert!(
        elapsed.as_secs() < 10,
        "threshold sweep took {elapsed:?}, budget is 10s"
    );
    println!("PASS criterion 01: 1000 seeded lists match the quantile+sigma oracle within 1e-9 in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Criterion 2: degenerate distributions
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_constant_scores_halve_exactly() {
    let fake = vec![0.2; 8];
    let real = vec![0.8; 8];
    let got = compute_hybrid_thresholds(&fake, &real).expect("valid inputs");
    // Constant lists have zero IQR and exactly zero deviation, so each
    // threshold is the constant halved — with no floating-point residue.
    assert_eq!(got.theta_fake, 0.1);
    assert_eq!(got.theta_real, 0.4);
    println!("PASS criterion 02: constant fake scores 0.2 yield theta_fake = 0.1 exactly");
}

// ---------------------------------------------------------------------------
// Criterion 3: published default thresholds and their boundary behavior
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_default_thresholds_reproduce_worked_decisions() {
    let defaults = ThresholdConfig::defaults();
    assert_eq!(defaults.theta_fake, 0.36);
    assert_eq!(defaults.theta_real, 0.61);
    assert_eq!(defaults.provenance, ThresholdProvenance::PaperDefault);

    let decide = |veracity, score| factual_filter(veracity, score, &defaults).unwrap();
    // The worked real-news case: 0.60 sits below the 0.61 bar and is removed.
    assert_eq!(
        decide(Veracity::Real, 0.60),
        FilterDecision::Remove(PurifyReason::FactualMisalignment)
    );
    // Both boundaries are inclusive.
    assert_eq!(decide(Veracity::Real, 0.61), FilterDecision::Keep);
    assert_eq!(decide(Veracity::Fake, 0.36), FilterDecision::Keep);
    assert_eq!(
        decide(Veracity::Fake, 0.37),
        FilterDecision::Remove(PurifyReason::FactualMisalignment)
    );
    assert_eq!(decide(Veracity::Real, 1.0), FilterDecision::Keep);
    assert_eq!(decide(Veracity::Fake, 0.0), FilterDecision::Keep);
    println!("PASS criterion 03: defaults are (0.36, 0.61) and real at 0.60 is removed");
}

// ---------------------------------------------------------------------------
// Criterion 4: exhaustive three-judge vote truth table
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_vote_truth_table_is_exhaustive() {
    let started = Instant::now();
    let mut combos = 0usize;
    for a in JudgeVote::ALL {
        for b in JudgeVote::ALL {
            for c in JudgeVote::ALL {
                let votes = [a, b, c];
                let entail = votes.iter().filter(|v| **v == JudgeVote::Entail).count();
                let not_entail = votes.iter().filter(|v| **v == JudgeVote::NotEntail).count();
                let expected = match entail.cmp(&not_entail) {
                    std::cmp::Ordering::Greater => NliDecision::Entail,
                    std::cmp::Ordering::Less => NliDecision::NotEntail,
                    std::cmp::Ordering::Equal => NliDecision::Unresolved,
                };
                assert_eq!(
                    nli_decision(&votes),
                    expected,
                    "votes {votes:?} resolved wrongly"
                );
                combos += 1;
            }
        }
    }
    assert_eq!(combos, 27);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1);
    println!("PASS criterion 04: all 27 vote combinations resolve as expected in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Criterion 5: Macro-F1 vs a confusion-matrix oracle
// ---------------------------------------------------------------------------

/// Independent scorer: accumulate the full confusion matrix per class, then
/// apply the textbook precision/recall/F1 formulas with zero-denominator
/// guards.
fn oracle_macro_f1(preds: &[Prediction], golds: &[Veracity]) -> f64 {
    let mut total = 0.0;
    for class in [Veracity::Real, Veracity::Fake] {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (pred, gold) in preds.iter().zip(golds) {
            let called = matches!(
                (pred, class),
                (Prediction::Real, Veracity::Real) | (Prediction::Fake, Veracity::Fake)
            );
            match (called, *gold == class) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => {}
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        total += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    total / 2.0
}

#[test]
fn criterion_05_macro_f1_matches_oracle_and_worked_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5F1);
    for instance in 0..1000 {
        let len = rng.random_range(1..=500);
        let preds: Vec<Prediction> = (0..len)
            .map(|_| match rng.random_range(0..3) {
                0 => Prediction::Real,
                1 => Prediction::Fake,
                _ => Prediction::Unknown,
            })
            .collect();
        let golds: Vec<Veracity> = (0..len)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Veracity::Real
                } else {
                    Veracity::Fake
                }
            })
            .collect();
        let got = macro_f1(&preds, &golds).expect("equal lengths");
        let want = oracle_macro_f1(&preds, &golds);
        assert!(
            (got - want).abs() <= 1e-12,
            "instance {instance}: {got} vs oracle {want}"
        );
        assert!((0.0..=1.0).contains(&got));
    }

    // Hand-worked example: one real miscalled fake gives F1 2/3 on the real
    // class and 4/5 on the fake class — macro 11/15, printed as 0.7333.
    let golds = [Veracity::Real, Veracity::Real, Veracity::Fake, Veracity::Fake];
    let preds = [Prediction::Real, Prediction::Fake, Prediction::Fake, Prediction::Fake];
    let worked = macro_f1(&preds, &golds).unwrap();
    assert!((worked - 11.0 / 15.0).abs() <= 1e-12);
    assert_eq!(format!("{worked:.4}"), "0.7333");
    println!("PASS criterion 05: 1000 random instances match the confusion-matrix oracle; worked example is 0.7333");
}

// ---------------------------------------------------------------------------
// Criterion 6: semantic distance reference points
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_semantic_distance_reference_points() {
    let same = [0.3, 0.4, 0.5];
    assert!(semantic_distance(&same, &same).unwrap().abs() <= 1e-12);

    let x = [1.0, 0.0];
    let y = [0.0, 1.0];
    assert!((semantic_distance(&x, &y).unwrap() - 1.0).abs() <= 1e-12);

    let diagonal = [1.0, 1.0];
    let expected = 1.0 - 1.0 / 2.0_f64.sqrt();
    assert!((semantic_distance(&x, &diagonal).unwrap() - expected).abs() <= 1e-12);
    println!("PASS criterion 06: identical 0, orthogonal 1, diagonal 1 - 1/sqrt(2)");
}

// ---------------------------------------------------------------------------
// Criterion 7: full pipeline on the scripted fixture, twice, byte-identical
// ---------------------------------------------------------------------------

fn run_f3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_f3"))
        .args(args)
        .output()
        .expect("f3 binary runs")
}

fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .map(|line| serde_json::from_str(line).expect("valid JSONL"))
        .collect()
}

/// Map each generated sample id to its text marker (`PAR-MIN SRC01` style),
/// the stable key the fixture expectations are written against.
fn marker_index(out: &Path) -> HashMap<String, String> {
    read_jsonl(&out.join("generated.jsonl"))
        .into_iter()
        .map(|row| {
            let id = row["id"].as_str().unwrap().to_string();
            let text = row["text"].as_str().unwrap();
            let marker = text.split(':').next().unwrap().to_string();
            (id, marker)
        })
        .collect()
}

#[test]
fn criterion_07_pipeline_replays_byte_identically_on_fixture() {
    let started = Instant::now();
    let root = repo_root();
    let config = root.join("fixtures/demo/run_config.json");
    let out_dir = tempfile::tempdir().expect("tempdir");
    let out = out_dir.path();
    let config_arg = config.to_str().unwrap();
    let out_arg = out.to_str().unwrap();

    let first = run_f3(&["all", "--config", config_arg, "--out", out_arg]);
    assert!(
        first.status.success(),
        "first run failed: {}",
        String::from_utf8_lossy(&first.stderr)
    );

    // Generation: 6 variants x 10 sources, one scripted refusal.
    let ledger = read_jsonl(&out.join("generation_ledger.jsonl"));
    assert_eq!(ledger.len(), 60);
    let status_count = |status: &str| ledger.iter().filter(|r| r["status"] == status).count();
    assert_eq!(status_count("ok"), 59);
    assert_eq!(status_count("refused"), 1);
    assert_eq!(status_count("error"), 0);
    let generated = read_jsonl(&out.join("generated.jsonl"));
    assert_eq!(generated.len(), 59);

    // Purify: the ledger must reproduce the hand-computed verdicts.
    let markers = marker_index(out);
    let verdicts = read_jsonl(&out.join("purify_ledger.jsonl"));
    assert_eq!(verdicts.len(), 59);

    let mut expected_removed: BTreeMap<&str, (&str, &str, Option<f64>)> = BTreeMap::new();
    // marker -> (reason, vote initials for the three judges, align score)
    expected_removed.insert("PAR-MIN SRC04", ("logical_misalignment", "nnn", None));
    expected_removed.insert("PERT-MAJ SRC07", ("logical_misalignment", "eee", None));
    expected_removed.insert("PAR-MAJ SRC05", ("vote_unresolved", "ena", None));
    expected_removed.insert("PAR-CRIT SRC02", ("factual_misalignment", "eee", Some(0.55)));
    expected_removed.insert("PERT-MIN SRC08", ("factual_misalignment", "nnn", Some(0.5)));

    let mut kept = 0usize;
    let mut removed_seen: BTreeMap<String, ()> = BTreeMap::new();
    for verdict in &verdicts {
        let marker = markers[verdict["sample_id"].as_str().unwrap()].clone();
        let votes: String = verdict["scores"]["nli_votes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| match v["vote"].as_str().unwrap() {
                "entail" => 'e',
                "not_entail" => 'n',
                "abstain" => 'a',
                other => panic!("unexpected vote {other}"),
            })
            .collect();
        if verdict["kept"].as_bool().unwrap() {
            kept += 1;
            assert!(
                !expected_removed.contains_key(marker.as_str()),
                "{marker} was kept but should be removed"
            );
            // Every kept sample carries its evidence: three votes, an
            // alignment score, and both embedding diagnostics.
            assert_eq!(votes.len(), 3);
            let align = verdict["scores"]["align_score"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&align));
            assert!(verdict["scores"]["contextual_score"].is_number());
            assert!(verdict["scores"]["semantic_distance"].is_number());
            if marker == "PERT-MIN SRC03" {
                // Boundary case: exactly at the fake threshold, kept.
                assert_eq!(align, 0.36);
            }
        } else {
            let (reason, want_votes, want_align) = expected_removed
                .get(marker.as_str())
                .unwrap_or_else(|| panic!("{marker} removed unexpectedly"));
            assert_eq!(verdict["reason"].as_str().unwrap(), *reason, "{marker}");
            assert_eq!(votes, *want_votes, "{marker}");
            assert_eq!(verdict["scores"]["align_score"].as_f64(), *want_align, "{marker}");
            removed_seen.insert(marker, ());
        }
    }
    assert_eq!(removed_seen.len(), expected_removed.len());
    assert_eq!(kept, 54);

    // Conservation: kept + removed covers every non-refused generation.
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("purify_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["input"], 59);
    assert_eq!(summary["kept"], 54);
    assert_eq!(summary["removed_logical_misalignment"], 2);
    assert_eq!(summary["removed_vote_unresolved"], 1);
    assert_eq!(summary["removed_factual_misalignment"], 2);
    assert_eq!(54 + 2 + 1 + 2, 60 - 1);

    let thresholds: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("thresholds.json")).unwrap())
            .unwrap();
    assert_eq!(thresholds["theta_fake"], 0.36);
    assert_eq!(thresholds["theta_real"], 0.61);
    assert_eq!(thresholds["provenance"], "paper_default");

    // Detection: the full strategy matrix over the evaluation splits.
    let splits = read_jsonl(&out.join("splits.jsonl"));
    let eval_ids: HashSet<String> = splits
        .iter()
        .filter(|row| matches!(row["split"].as_str().unwrap(), "test" | "ood_full"))
        .map(|row| row["sample_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(eval_ids.len(), 34, "7 test + 27 ood_full samples");
    let detections = read_jsonl(&out.join("detections.jsonl"));
    assert_eq!(detections.len(), eval_ids.len() * Strategy::ALL.len());
    let strategies: HashSet<&str> = detections
        .iter()
        .map(|row| row["strategy"].as_str().unwrap())
        .collect();
    assert_eq!(strategies.len(), 10);
    let detected_ids: HashSet<String> = detections
        .iter()
        .map(|row| row["sample_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(detected_ids, eval_ids);

    // Byte determinism: a second run over the same directory, then a replay
    // run, must reproduce every report byte and every manifest digest.
    let reports = ["report.csv", "report.md", "plotdata.jsonl"];
    let snapshot =
        |name: &str| std::fs::read(out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let first_bytes: Vec<Vec<u8>> = reports.iter().map(|n| snapshot(n)).collect();
    let manifest_sans_cache = |out: &Path| -> serde_json::Value {
        let mut value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
                .unwrap();
        value.as_object_mut().unwrap().remove("cache");
        value
    };
    let first_manifest = manifest_sans_cache(out);

    let second = run_f3(&["all", "--config", config_arg, "--out", out_arg]);
    assert!(second.status.success());
    for (name, bytes) in reports.iter().zip(&first_bytes) {
        assert_eq!(&snapshot(name), bytes, "{name} changed on rerun");
    }
    assert_eq!(manifest_sans_cache(out), first_manifest);

    let replay = run_f3(&["all", "--config", config_arg, "--out", out_arg, "--replay"]);
    assert!(
        replay.status.success(),
        "replay failed: {}",
        String::from_utf8_lossy(&replay.stderr)
    );
    for (name, bytes) in reports.iter().zip(&first_bytes) {
        assert_eq!(&snapshot(name), bytes, "{name} changed under replay");
    }
    assert_eq!(manifest_sans_cache(out), first_manifest);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "fixture runs took {elapsed:?}");
    println!("PASS criterion 07: 60 generations, exact purify verdicts, full matrix, byte-identical reports in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Criterion 8: ledger conservation on randomized fixtures
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_ledger_conservation_on_randomized_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ED6E8);
    let thresholds = ThresholdConfig::defaults();
    for fixture in 0..100 {
        let input = rng.random_range(1..=200);
        let mut verdicts = Vec::with_capacity(input);
        let mut logical_kept = 0usize;
        let mut factual_kept = 0usize;
        let mut by_reason: BTreeMap<PurifyReason, usize> = BTreeMap::new();

        for index in 0..input {
            let veracity = if rng.random_bool(0.5) { Veracity::Real } else { Veracity::Fake };
            let votes: Vec<JudgeVote> = (0..3)
                .map(|_| JudgeVote::ALL[rng.random_range(0..3)])
                .collect();
            let attributed: Vec<JudgeVerdict> = votes
                .iter()
                .enumerate()
                .map(|(judge, vote)| JudgeVerdict {
                    judge_id: format!("judge-{judge}"),
                    vote: *vote,
                })
                .collect();
            let id = format!("sample-{fixture}-{index}");
            let scores = ConsistencyScores { nli_votes: attributed, ..Default::default() };

            match logical_filter(veracity, nli_decision(&votes)) {
                FilterDecision::Remove(reason) => {
                    *by_reason.entry(reason).or_default() += 1;
                    verdicts.push(PurifyVerdict::remove(id, reason, scores));
                }
                FilterDecision::Keep => {
                    logical_kept += 1;
                    let align = rng.random::<f64>();
                    let scores = ConsistencyScores { align_score: Some(align), ..scores };
                    match factual_filter(veracity, align, &thresholds).unwrap() {
                        FilterDecision::Remove(reason) => {
                            *by_reason.entry(reason).or_default() += 1;
                            verdicts.push(PurifyVerdict::remove(id, reason, scores));
                        }
                        FilterDecision::Keep => {
                            factual_kept += 1;
                            verdicts.push(PurifyVerdict::keep(id, scores));
                        }
                    }
                }
            }
        }

        let summary = PurifySummary::from_verdicts(&verdicts);
        assert!(summary.conserved(), "fixture {fixture} leaked samples");
        assert_eq!(summary.input, input);
        assert_eq!(summary.kept, factual_kept);
        // Stage identities: logical removals account for everything the
        // first stage dropped, factual removals for the rest.
        assert_eq!(
            logical_kept,
            input
                - by_reason.get(&PurifyReason::LogicalMisalignment).copied().unwrap_or(0)
                - by_reason.get(&PurifyReason::VoteUnresolved).copied().unwrap_or(0)
        );
        assert_eq!(
            summary.removed_logical_misalignment,
            by_reason.get(&PurifyReason::LogicalMisalignment).copied().unwrap_or(0)
        );
        assert_eq!(
            summary.removed_vote_unresolved,
            by_reason.get(&PurifyReason::VoteUnresolved).copied().unwrap_or(0)
        );
        assert_eq!(
            summary.removed_factual_misalignment,
            by_reason.get(&PurifyReason::FactualMisalignment).copied().unwrap_or(0)
        );
        assert_eq!(summary.input, summary.kept + summary.removed());
    }
    println!("PASS criterion 08: conservation holds on 100 randomized fixtures");
}

// ---------------------------------------------------------------------------
// Criterion 9: prompt catalog integrity
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_prompt_catalog_integrity() {
    let catalog = Catalog::builtin().expect("embedded catalog is valid");
    assert_eq!(catalog.specs().len(), 16);

    // The on-disk catalog is the same artifact the binary embeds.
    let prompts_dir = repo_root().join("crates/core/prompts");
    let from_disk = Catalog::load(&prompts_dir).expect("disk catalog is valid");
    assert_eq!(from_disk.version(), catalog.version());
    assert_eq!(from_disk.checksums(), catalog.checksums());

    // Checksums in the manifest are the actual digests of the body files.
    for (name, expected) in catalog.checksums() {
        let body = std::fs::read(prompts_dir.join(format!("{name}.txt")))
            .unwrap_or_else(|e| panic!("{name}.txt: {e}"));
        assert_eq!(&hashing::sha256_hex(&body), expected, "{name} drifted");
    }

    // Anchor wording must survive verbatim.
    let spec = |strategy| {
        catalog
            .spec(&VariantId::Detection { strategy })
            .unwrap()
            .instructor
            .clone()
    };
    assert!(spec(Strategy::VaN)
        .contains("Analyze the given text and determine if it is real or fake news."));
    let z_cot = spec(Strategy::ZCoT);
    assert!(z_cot.contains("Deeply Analyze"));
    assert!(z_cot.contains("think step-by-step"));
    let cld2 = spec(Strategy::AnalyzeCld2);
    for anchor in [
        "(1)Inaccurate or misleading information",
        "(2) Lack of evidence for claims",
        "(3)Emotionally charged language with the intent to provoke outrage or shock",
        "(4) Biased portrayal of events or people",
        "(5) Unverified sources or 'experts'",
        "(6) Logical fallacies or conspiracy theories without proof",
        "respond 'False'",
        "respond 'True'",
    ] {
        assert!(cld2.contains(anchor), "missing anchor {anchor:?}");
    }

    // Tampering with any body file must fail the load.
    let tampered = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(&prompts_dir).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), tampered.path().join(entry.file_name())).unwrap();
    }
    let target = tampered.path().join("detection_VaN.txt");
    let mut body = std::fs::read_to_string(&target).unwrap();
    body.push('x');
    std::fs::write(&target, body).unwrap();
    assert!(matches!(
        Catalog::load(tampered.path()),
        Err(PromptError::ChecksumMismatch { .. })
    ));
    println!("PASS criterion 09: 16 specs, digests match, anchors verbatim, tampering detected");
}

// ---------------------------------------------------------------------------
// Criterion 10: recorded live run replays bit-identically offline
// ---------------------------------------------------------------------------

/// Minimal one-shot HTTP/1.1 server: answers `count` chat-completion
/// requests with a deterministic transform of the prompt, then exits.
fn spawn_chat_stub(listener: TcpListener, count: usize) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || {
        for served in 0..count {
            let (mut socket, _) = listener.accept().expect("accept");
            let mut raw = Vec::new();
            let mut chunk = [0u8; 4096];
            // Read headers, then exactly content-length body bytes.
            let (headers_end, content_length) = loop {
                let n = socket.read(&mut chunk).expect("read");
                raw.extend_from_slice(&chunk[..n]);
                if let Some(pos) = raw.windows(4).position(|w| w == b"\r\n\r\n") {
                    let headers = String::from_utf8_lossy(&raw[..pos]).to_string();
                    let length = headers
                        .lines()
                        .find_map(|line| {
                            let (name, value) = line.split_once(':')?;
                            name.eq_ignore_ascii_case("content-length")
                                .then(|| value.trim().parse::<usize>().ok())?
                        })
                        .unwrap_or(0);
                    break (pos + 4, length);
                }
            };
            while raw.len() < headers_end + content_length {
                let n = socket.read(&mut chunk).expect("read body");
                raw.extend_from_slice(&chunk[..n]);
            }
            let request: serde_json::Value =
                serde_json::from_slice(&raw[headers_end..headers_end + content_length])
                    .expect("JSON body");
            let prompt = request["messages"][0]["content"].as_str().unwrap_or("");
            let reply = serde_json::json!({
                "choices": [{"message": {
                    "content": format!("recorded answer {served} to: {prompt}")
                }}]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
            socket.write_all(response.as_bytes()).expect("write");
        }
    })
}

#[test]
fn criterion_10_recorded_live_run_replays_bit_identically() {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind localhost");
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let stub = spawn_chat_stub(listener, 2);

    std::env::set_var("F3_ACCEPTANCE_TOKEN", "local-stub-token");
    let provider = ProviderConfig {
        provider_id: "recorded".to_string(),
        model_name: "stub-model".to_string(),
        api: ApiShape::OpenaiChat,
        endpoint,
        params: GenerationParams::default(),
        rate_limit_rpm: 6000,
        auth_env_var: "F3_ACCEPTANCE_TOKEN".to_string(),
    };

    let cache = tempfile::tempdir().unwrap();
    let store = Store::open(cache.path()).expect("store opens");
    let prompts = ["first recorded question", "second recorded question"];

    let mut live = Gateway::live(store.clone(), Box::new(HttpTransport::new().unwrap()));
    let recorded: Vec<_> = prompts
        .iter()
        .map(|prompt| live.complete(&provider, prompt).expect("live call"))
        .collect();
    assert_eq!(live.stats().requests_sent, 2);
    for (index, record) in recorded.iter().enumerate() {
        assert_eq!(record.status, RecordStatus::Ok);
        assert!(record
            .response_text
            .contains(&format!("recorded answer {index}")));
    }
    drop(live);
    // The stub exits after its two requests; from here the network target
    // is gone and only the recorded store can answer.
    stub.join().expect("stub server finished");

    let mut replay = Gateway::replay(store);
    for (prompt, original) in prompts.iter().zip(&recorded) {
        let replayed = replay.complete(&provider, prompt).expect("replay hit");
        assert_eq!(&replayed, original, "replay altered the record");
    }
    assert_eq!(replay.stats().requests_sent, 0);
    assert_eq!(replay.stats().cache_hits, 2);
    assert_eq!(replay.stats().cache_misses, 0);
    assert!(replay.complete(&provider, "never recorded").is_err());
    println!("PASS criterion 10: recorded exchange replays bit-identically with no network");
}
