//! Small oracle fixtures with known answers, run against the library.

use std::collections::BTreeMap;

use ndarray::Array2;

use docforge::doctok::Vocab;
use docforge::embed::{approx_top_k, build_partitioned_index, exact_top_k, gaussian_unit, seeded_rng};
use docforge::fewshot::{sample_episode, EpisodeConfig};
use docforge::finetune::{bio_decode, bio_encode, EntitySpan, PrfCounts, PrfReport};
use docforge::pretrain::{mcm_loss, mmlm_loss, plan_masking, tt_loss};
use docforge::synth::{one_occurrence_corpus, random_unit_store};

use crate::params::{Failure, Outcome, Params};
use crate::record::Run;

type Check = (bool, String);

fn entity_table() -> Check {
    let counts: BTreeMap<String, PrfCounts> = [
        ("Question", (946, 1115, 1070)),
        ("Header", (67, 117, 119)),
        ("Answer", (706, 854, 809)),
    ]
    .into_iter()
    .map(|(t, (tp, predicted, gold))| (t.to_string(), PrfCounts { tp, predicted, gold }))
    .collect();
    let m = PrfReport::from_counts(counts).micro;
    let got = [100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1];
    let ok = got.iter().zip([82.41, 86.04, 84.18]).all(|(g, w)| (g - w).abs() <= 0.005);
    (ok, format!("entity metrics: micro {:.2}/{:.2}/{:.2}", got[0], got[1], got[2]))
}

fn masking() -> Check {
    let pool = Vocab::default_uncased().replacement_ids();
    let ok = (0..200).all(|seed| {
        plan_masking(100, seed, &pool)
            .map(|p| p.len() == 15 && !p.masked_positions.contains(&0))
            .unwrap_or(false)
    });
    (ok, "masking: 15 of 100 positions, [CLS] untouched, 200 seeds".into())
}

fn loss_values() -> Outcome<Check> {
    let v = 30522;
    let mmlm = mmlm_loss(Array2::zeros((3, v)).view(), &[0, 17, 2000])?;
    let tt = tt_loss(Array2::zeros((2, 6)).view(), &[[0; 6], [1, 0, 1, 0, 1, 0]])?;
    let x = Array2::from_shape_fn((4, 12), |(i, j)| (i * 12 + j) as f64 / 7.0);
    let mcm = mcm_loss(x.view(), x.view())?;
    let ok = (mmlm - (v as f64).ln()).abs() <= 1e-9 && (tt - 6.0 * 2f64.ln()).abs() <= 1e-9 && mcm == 0.0;
    Ok((ok, format!("losses: uniform MMLM {mmlm:.9}, zero-logit TT {tt:.9}, MCM {mcm}")))
}

fn bio_round_trip() -> Check {
    let spans = vec![
        EntitySpan::new("date", 0, 1),
        EntitySpan::new("total", 3, 3),
        EntitySpan::new("date", 5, 8),
    ];
    let ok = bio_encode(&spans, 10).map(|tags| bio_decode(&tags) == spans).unwrap_or(false);
    (ok, "BIO: encode then decode returns the spans".into())
}

fn retrieval() -> Outcome<Check> {
    let store = random_unit_store(2000, 32, 7);
    let index = build_partitioned_index(&store, 16, 7)?;
    let mut rng = seeded_rng(7, b"selfcheck-queries");
    let mut ok = true;
    for _ in 0..20 {
        let q = gaussian_unit(&mut rng, 32);
        ok &= approx_top_k(&q, &index, &store, 10, 16)? == exact_top_k(&q, &store, 10)?;
    }
    Ok((ok, "retrieval: probing every cell equals exact search on 20 queries".into()))
}

fn episodes() -> Outcome<Check> {
    let types: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
    let corpus = one_occurrence_corpus(&types, 12, 20, 3);
    let mut ok = true;
    for (n, k) in [(4, 2), (4, 4)] {
        for seed in 0..10 {
            let ep = sample_episode(&corpus, &types, &EpisodeConfig::new(n, k), seed)?;
            ok &= ep.support.len() == n * k && ep.counts.values().all(|&c| c == k);
        }
    }
    Ok((ok, "episodes: 4-way 2-shot has 8 support docs, 4-way 4-shot has 16".into()))
}

pub fn run(p: &mut Params) -> Outcome {
    let out = p.opt_path("out")?;
    let checks = vec![
        entity_table(),
        masking(),
        loss_values()?,
        bio_round_trip(),
        retrieval()?,
        episodes()?,
    ];
    let mut report = String::new();
    for (ok, msg) in &checks {
        report.push_str(&format!("{} {msg}\n", if *ok { "PASS" } else { "FAIL" }));
    }
    let failed = checks.iter().filter(|c| !c.0).count();
    report.push_str(&format!("{}/{} checks passed\n", checks.len() - failed, checks.len()));
    print!("{report}");
    if let Some(dir) = out {
        let mut run = Run::new(dir)?;
        run.write("selfcheck.txt", report.as_bytes())?;
        run.finish("selfcheck", p.resolved())?;
    }
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} self-checks failed")));
    }
    Ok(())
}
