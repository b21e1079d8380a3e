//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use quantum_lottery::cli::run_cli;
use quantum_lottery::config::{AdversaryConfig, LinkTarget, RunConfig, Scheme, Widths};
use quantum_lottery::keylink::entangled::{encode_block_with, ent_decode_block};
use quantum_lottery::keylink::{
    bb84_qkd, bell_distribute_and_check, ent_deliver_tid, one_key_posterior, semiquantum_qkd,
    split_deliver, Authority, Carrier, CheckOutcome, CheckParams, CooperationGate, ErrorCount,
    EveBasis, Interception, QkdParams, SwapTable,
};
use quantum_lottery::protocol::{
    check_invariants, run_lottery, trial_seed, verify_transcript, EventPayload, Transcript,
    TranscriptVerdict,
};
use quantum_lottery::qds;
use quantum_lottery::qsim::{apply_pauli, bell_project, prepare_bell, BellState, PauliCode};
use quantum_lottery::tickets::xor_fold;
use quantum_lottery::{BitString, RandomStream};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gate() -> CooperationGate {
    CooperationGate::convene(Authority::Lat1, Authority::Lat2).unwrap()
}

fn public_tids(t: &Transcript) -> BTreeMap<usize, String> {
    t.payloads()
        .filter_map(|p| match p {
            EventPayload::TidAnnounced { participant, tid } => Some((*participant, tid.clone())),
            _ => None,
        })
        .collect()
}

fn opened_tids(t: &Transcript) -> BTreeMap<usize, String> {
    t.payloads()
        .filter_map(|p| match p {
            EventPayload::TidOpened { participant, tid } => Some((*participant, tid.clone())),
            _ => None,
        })
        .collect()
}

fn cli_verify(t: &Transcript) -> i32 {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, t.to_json().unwrap()).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    run_cli(
        ["qlottery".into(), "verify".into(), path.into_os_string()],
        &mut out,
        &mut err,
    )
}

fn honest_end_to_end() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for scheme in [Scheme::Bb84, Scheme::Entangled, Scheme::SemiQuantum] {
        let config = RunConfig {
            scheme,
            participants: 5,
            ..RunConfig::default()
        };
        let start = Instant::now();
        let t = run_lottery(&config, 2024).unwrap();
        let elapsed = start.elapsed();
        let authenticated = t
            .payloads()
            .filter(|p| matches!(p, EventPayload::Authentication { accepted: true, .. }))
            .count();
        let expected_auth = if scheme == Scheme::SemiQuantum { 5 } else { 10 };
        let announced = public_tids(&t);
        let intact = opened_tids(&t) == announced && announced.len() == 5;
        let tids: Vec<BitString> = announced
            .values()
            .map(|h| BitString::from_hex(256, h).unwrap())
            .collect();
        let winner_ok = t.winner_hex == Some(xor_fold(tids.iter()).unwrap().to_hex());
        let deterministic = run_lottery(&config, 2024).unwrap().to_json().unwrap() == t.to_json().unwrap();
        let verify = cli_verify(&t);
        let ok = authenticated == expected_auth
            && t.accepted_participants().len() == 5
            && intact
            && winner_ok
            && deterministic
            && verify == 0
            && check_invariants(&t).is_empty()
            && elapsed < Duration::from_secs(10);
        pass &= ok;
        notes.push(format!("{scheme}: {} in {:.2}s", if ok { "ok" } else { "FAILED" }, elapsed.as_secs_f64()));
    }
    outcome(pass, notes.join(", "))
}

fn intercept_resend_detection() -> Outcome {
    let eve = Interception::full(EveBasis::Random);
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, semi) in [("bb84", false), ("semi-quantum", true)] {
        let params = if semi {
            quantum_lottery::keylink::semiquantum::default_params()
        } else {
            QkdParams::default()
        };
        let results: Vec<_> = (0..1000u64)
            .into_par_iter()
            .map(|k| {
                let rng = RandomStream::new(k, format!("accept/ir/{name}"));
                if semi {
                    semiquantum_qkd(&params, Some(&eve), &rng).unwrap()
                } else {
                    bb84_qkd(&params, Some(&eve), &rng).unwrap()
                }
            })
            .collect();
        let mut pooled = ErrorCount::default();
        for r in &results {
            pooled += r.sample();
        }
        let aborts = results.iter().filter(|r| !r.is_established()).count();
        let rate = pooled.rate();
        let ok = pooled.checked >= 10_000 && (rate - 0.25).abs() <= 0.02 && aborts as f64 / 1000.0 > 0.999;
        pass &= ok;
        notes.push(format!(
            "{name}: sifted error {rate:.4} over {} checked, aborts {aborts}/1000",
            pooled.checked
        ));
    }
    outcome(pass, notes.join("; "))
}

fn entangled_eavesdrop_check() -> Outcome {
    let eve = Interception::full(EveBasis::Random);
    let params = CheckParams::default();
    let attacked: Vec<_> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            bell_distribute_and_check(256, &params, [Some(&eve), None], &RandomStream::new(k, "accept/bell/eve"))
                .unwrap()
                .report()
        })
        .collect();
    let honest: Vec<_> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            bell_distribute_and_check(256, &params, [None, None], &RandomStream::new(k, "accept/bell/honest"))
                .unwrap()
        })
        .collect();
    let mut set1 = ErrorCount::default();
    let mut set2 = ErrorCount::default();
    for r in &attacked {
        set1 += r.sets[0];
        set2 += r.sets[1];
    }
    let honest_violations: usize = honest.iter().map(|o| o.report().sets.iter().map(|s| s.errors).sum::<usize>()).sum();
    let honest_proceed = honest.iter().all(|o| matches!(o, CheckOutcome::Proceed { .. }));
    let pass = (set1.rate() - 0.25).abs() <= 0.03 && set2.errors == 0 && honest_violations == 0 && honest_proceed;
    outcome(
        pass,
        format!(
            "attacked set rate {:.4} over {} checks, unattacked set {} violations, honest {} violations",
            set1.rate(),
            set1.checked,
            set2.errors,
            honest_violations
        ),
    )
}

/// Joint probability of participant outcome `p` and authority outcome `l`
/// after code `k` on `carrier`, straight from the statevector.
fn swap_cell(carrier: Carrier, k: u8, p: BellState, l: BellState) -> f64 {
    let pair = prepare_bell(BellState::PsiMinus);
    let register = pair.tensor(&pair).unwrap();
    let qubit = match carrier {
        Carrier::Set1 => 0,
        Carrier::Set2 => 2,
    };
    let encoded = apply_pauli(&register, qubit, PauliCode::new(k).unwrap()).unwrap();
    let first = bell_project(&encoded, 0, 2, p).unwrap();
    match first.residual {
        Some(rest) if first.probability > 1e-12 => {
            first.probability * bell_project(&rest, 0, 1, l).unwrap().probability
        }
        _ => 0.0,
    }
}

fn swapping_codec() -> Outcome {
    let table = SwapTable::global();
    let table_ok = table.is_bijective();
    // Full grid: code x participant outcome x authority outcome, per carrier.
    let mut grid_cells = 0;
    let mut grid_errors = 0;
    for carrier in [Carrier::Set1, Carrier::Set2] {
        for k in 0..4u8 {
            let mut total = 0.0;
            for p in BellState::ALL {
                for l in BellState::ALL {
                    let prob = swap_cell(carrier, k, p, l);
                    total += prob;
                    grid_cells += 1;
                    let reachable = prob > 1e-9;
                    if reachable && ((prob - 0.25).abs() > 1e-9 || table.lookup(carrier, p, l) != Some(k)) {
                        grid_errors += 1;
                    }
                    if !reachable && table.lookup(carrier, p, l) == Some(k) {
                        grid_errors += 1;
                    }
                }
            }
            if (total - 1.0).abs() > 1e-9 {
                grid_errors += 1;
            }
        }
    }
    let mut cases = std::collections::BTreeSet::new();
    let mut wrong = 0;
    // Sampled protocol path: sweep seeds until every reachable (code,
    // carrier, announced outcome) case has been decoded at least once.
    for seed in 0..10_000u64 {
        if cases.len() == 32 {
            break;
        }
        let rng = RandomStream::new(seed, "accept/codec");
        let mut session = match bell_distribute_and_check(16, &CheckParams::default(), [None, None], &rng).unwrap() {
            CheckOutcome::Proceed { session, .. } => session,
            CheckOutcome::Abort { .. } => unreachable!("noiseless"),
        };
        let mut r = rng.fork("sweep");
        let mut block = 0;
        for k in 0..4u8 {
            for carrier in [Carrier::Set1, Carrier::Set2] {
                let ann = encode_block_with(&mut session, block, k, carrier, &mut r).unwrap();
                let decoded = ent_decode_block(&mut session, &ann, &gate(), &mut r).unwrap();
                if decoded != k {
                    wrong += 1;
                }
                cases.insert((k, carrier as u8, ann.outcome.index()));
                block += 1;
            }
        }
    }
    let mut mismatched_tids = 0;
    let mut rng = RandomStream::new(4, "accept/codec/tids");
    for i in 0..100 {
        let tid = rng.bits(256).unwrap();
        let stream = RandomStream::new(i, "accept/codec/session");
        let mut session = match bell_distribute_and_check(256, &CheckParams::default(), [None, None], &stream).unwrap() {
            CheckOutcome::Proceed { session, .. } => session,
            CheckOutcome::Abort { .. } => unreachable!("noiseless"),
        };
        let (_, delivered) = ent_deliver_tid(&mut session, &tid, &gate(), &stream.fork("deliver")).unwrap();
        if delivered != tid {
            mismatched_tids += 1;
        }
    }
    let pass = table_ok
        && grid_cells == 128
        && grid_errors == 0
        && cases.len() == 32
        && wrong == 0
        && mismatched_tids == 0;
    outcome(
        pass,
        format!(
            "statevector grid 2x64 cells, {grid_errors} errors; sampled {} of 32 reachable (code, carrier, outcome) cases, {wrong} wrong decodes; {mismatched_tids}/100 TIDs mismatched; carrier invariant {}",
            cases.len(),
            table.carrier_invariant()
        ),
    )
}

fn forgery_rejection() -> Outcome {
    const L: usize = 256;
    const TRIALS: u64 = 10_000;
    let thr = qds::DEFAULT_MISMATCH_THRESHOLD;
    let min_pass = qds::DEFAULT_MIN_PASS_FRACTION;
    let bb84: Vec<(bool, bool, usize)> = (0..TRIALS)
        .into_par_iter()
        .map(|k| {
            let rng = RandomStream::new(k, "accept/forge/bb84");
            let reg = qds::register_bb84(L, L, &rng).unwrap();
            let forged = qds::SignatureDeclaration::random(L, &mut rng.fork("forger"));
            let (a, b) = qds::verify_bb84(&reg.lat1, &reg.lat2, &forged, thr).unwrap();
            let (h1, h2) = qds::verify_bb84(&reg.lat1, &reg.lat2, &reg.declaration, thr).unwrap();
            (
                !(a.accepted() && b.accepted()),
                h1.accepted() && h2.accepted(),
                h1.mismatches + h2.mismatches,
            )
        })
        .collect();
    let semi: Vec<(bool, bool, usize)> = (0..TRIALS)
        .into_par_iter()
        .map(|k| {
            let rng = RandomStream::new(k, "accept/forge/semi");
            let record = qds::register_semiquantum(L, L, &rng).unwrap();
            let forged = qds::random_actions(L, &mut rng.fork("forger"));
            let f = qds::verify_semiquantum(&record, &forged, thr, min_pass).unwrap();
            let h = qds::verify_semiquantum(&record, &record.actions(), thr, min_pass).unwrap();
            (!f.accepted(), h.accepted(), h.mismatches)
        })
        .collect();
    let summarize = |rows: &[(bool, bool, usize)]| {
        let rejected = rows.iter().filter(|r| r.0).count() as f64 / rows.len() as f64;
        let honest_ok = rows.iter().all(|r| r.1 && r.2 == 0);
        (rejected, honest_ok)
    };
    let (b_rej, b_honest) = summarize(&bb84);
    let (s_rej, s_honest) = summarize(&semi);
    let pass = b_rej >= 0.99 && s_rej >= 0.99 && b_honest && s_honest;
    outcome(
        pass,
        format!(
            "bb84 rejection {b_rej:.4}, semi-quantum rejection {s_rej:.4}, honest accepted with 0 mismatches: bb84 {b_honest}, semi-quantum {s_honest}"
        ),
    )
}

fn one_key_secrecy() -> Outcome {
    let mut rng = RandomStream::new(6, "accept/secrecy");
    let mut uniform = true;
    let mut checked = 0;
    for tid_value in 0..256u64 {
        let tid = BitString::from_u64(8, tid_value).unwrap();
        let k1 = rng.bits(8).unwrap();
        let k2 = rng.bits(8).unwrap();
        let pid = rng.bits(8).unwrap();
        let e = split_deliver(&tid, &k1, &k2, &pid).unwrap();
        for known in [&k1, &k2] {
            let counts = one_key_posterior(&e, known).unwrap();
            uniform &= counts.len() == 256 && counts.iter().all(|&c| c == counts[0]);
            checked += 1;
        }
    }
    outcome(
        uniform,
        format!("{checked} posteriors over 256 TIDs, all exactly uniform: {uniform}"),
    )
}

fn equiprobability() -> Outcome {
    const RUNS: usize = 100_000;
    let mut fixed = BTreeMap::new();
    fixed.insert(1, "a5".to_string());
    fixed.insert(2, "ff".to_string());
    let config = RunConfig {
        scheme: Scheme::Bb84,
        participants: 3,
        widths: Widths {
            tid: 8,
            pid: 16,
            signature_length: 64,
            min_signature_length: 64,
            qkd_raw: 96,
            semiquantum_raw: 128,
            qkd_sample: 8,
            bell_pairs: None,
        },
        adversary: AdversaryConfig::FixedTids { tids: fixed },
        ..RunConfig::default()
    };
    let winners: Vec<Option<u64>> = (0..RUNS)
        .into_par_iter()
        .map(|k| {
            let t = run_lottery(&config, trial_seed(77, k)).unwrap();
            t.winner_hex.map(|h| u64::from_str_radix(&h, 16).unwrap())
        })
        .collect();
    let mut counts = [0u64; 256];
    let mut missing = 0;
    for w in winners {
        match w {
            Some(v) => counts[v as usize] += 1,
            None => missing += 1,
        }
    }
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / 256.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(255.0).unwrap().cdf(chi2);
    outcome(
        p > 0.001 && missing == 0,
        format!("chi-square {chi2:.1} on 255 dof, p = {p:.4}, {missing} runs without winner"),
    )
}

fn binding_and_verifiability() -> Outcome {
    let base = RunConfig {
        participants: 4,
        ..RunConfig::default()
    };
    let mut swap_named = 0;
    let mut tamper_named = 0;
    let mut late_unaffected = 0;
    for trial in 0..100u64 {
        let target = (trial % 4) as usize;
        let seed = 1000 + trial;

        let mut c = base.clone();
        c.adversary = AdversaryConfig::PostHocTidSwap { participant: target };
        let t = run_lottery(&c, seed).unwrap();
        let v = verify_transcript(&t.public_view()).unwrap();
        if v.contains(&TranscriptVerdict::CommitmentMismatch { participant: target }) && cli_verify(&t) == 3 {
            swap_named += 1;
        }

        let mut c = base.clone();
        c.adversary = AdversaryConfig::CorruptAuthority {
            authority: if trial % 2 == 0 { Authority::Lat1 } else { Authority::Lat2 },
            participant: target,
        };
        let t = run_lottery(&c, seed).unwrap();
        let v = verify_transcript(&t.public_view()).unwrap();
        if v.contains(&TranscriptVerdict::AuthorityTamper { participant: target }) && cli_verify(&t) == 3 {
            tamper_named += 1;
        }

        let honest = run_lottery(&base, seed).unwrap();
        let mut c = base.clone();
        c.adversary = AdversaryConfig::LateTicket { participant: target };
        let t = run_lottery(&c, seed).unwrap();
        if t.winner_hex == honest.winner_hex && t.verdicts == honest.verdicts && check_invariants(&t).is_empty() {
            late_unaffected += 1;
        }
    }
    outcome(
        swap_named == 100 && tamper_named == 100 && late_unaffected == 100,
        format!(
            "post-hoc swap named {swap_named}/100, corrupt authority named {tamper_named}/100, late ticket without effect {late_unaffected}/100"
        ),
    )
}

fn random_config(rng: &mut RandomStream) -> RunConfig {
    let scheme = [Scheme::Bb84, Scheme::Entangled, Scheme::SemiQuantum][rng.below(3)];
    let participants = 1 + rng.below(6);
    let target = rng.below(participants);
    let adversary = match rng.below(7) {
        0 => AdversaryConfig::None,
        1 => AdversaryConfig::InterceptResend {
            participant: Some(target),
            link: [LinkTarget::Lat1, LinkTarget::Lat2, LinkTarget::Both][rng.below(3)],
            fraction: rng.random_range(0.0..=1.0),
            basis: EveBasis::Random,
        },
        2 => AdversaryConfig::ForgeDeclaration { participant: target },
        3 => AdversaryConfig::PostHocTidSwap { participant: target },
        4 => AdversaryConfig::SingleAuthorityOpen {
            authority: Authority::Lat2,
        },
        5 => AdversaryConfig::LateTicket { participant: target },
        _ => AdversaryConfig::CorruptAuthority {
            authority: Authority::Lat1,
            participant: target,
        },
    };
    RunConfig {
        scheme,
        participants,
        adversary,
        retries: rng.below(2),
        ..RunConfig::default()
    }
}

fn determinism() -> Outcome {
    let mut rng = RandomStream::new(31, "accept/determinism");
    let mut identical = 0;
    for _ in 0..50 {
        let config = random_config(&mut rng);
        let seed = rng.below(1 << 30) as u64;
        let a = run_lottery(&config, seed).unwrap().to_json().unwrap();
        let b = run_lottery(&config, seed).unwrap().to_json().unwrap();
        if a == b {
            identical += 1;
        }
    }
    outcome(identical == 50, format!("{identical}/50 configs byte-identical"))
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "honest end-to-end runs", 30, honest_end_to_end),
        (2, "intercept-resend detection", 60, intercept_resend_detection),
        (3, "entangled eavesdrop check", 60, entangled_eavesdrop_check),
        (4, "entanglement-swapping codec", 30, swapping_codec),
        (5, "signature forgery rejection", 60, forgery_rejection),
        (6, "one-key secrecy", 5, one_key_secrecy),
        (7, "equi-probability", 120, equiprobability),
        (8, "binding and verifiability", 30, binding_and_verifiability),
        (9, "determinism", 60, determinism),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed().as_secs_f64();
        let in_time = elapsed < budget as f64;
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id} [{}] {name}: {} ({elapsed:.1}s of {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criterion(s) failed");
        std::process::exit(1);
    }
}
