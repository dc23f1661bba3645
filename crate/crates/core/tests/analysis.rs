use std::collections::BTreeSet;

use pgsum::analysis::*;
use pgsum::corpus::{generate_synthetic_corpus, Annotations, Document, Domain, NeTag, Subjectivity, TokenAnnotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn ann(pos: &str, ne: NeTag) -> TokenAnnotation {
    TokenAnnotation::new(pos, ne, Subjectivity::None)
}

/// 20 annotated documents (10 per domain).
fn fixture_docs() -> Vec<Document> {
    generate_synthetic_corpus(10, 3)
}

/// Random system outputs drawn from each document's own tokens plus noise,
/// and random attention traces.
fn fixture_outputs(docs: &[Document], seed: u64) -> (Vec<Vec<String>>, Vec<Vec<Vec<f64>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outputs = Vec::new();
    let mut traces = Vec::new();
    for d in docs {
        let n = rng.gen_range(1..12);
        let out: Vec<String> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => d.abstract_tokens[rng.gen_range(0..d.abstract_tokens.len())].clone(),
                1 => d.text_tokens[rng.gen_range(0..d.text_tokens.len())].clone(),
                _ => format!("noise{}", rng.gen_range(0..4)),
            })
            .collect();
        let trace: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                // coarse weights so ties happen
                let w: Vec<f64> = (0..d.text_tokens.len()).map(|_| rng.gen_range(0..4) as f64).collect();
                let s: f64 = w.iter().sum::<f64>().max(1.0);
                w.iter().map(|x| x / s).collect()
            })
            .collect();
        outputs.push(out);
        traces.push(trace);
    }
    (outputs, traces)
}

fn brute_argmax(w: &[f64]) -> usize {
    let mut best = 0;
    let mut i = 1;
    while i < w.len() {
        if w[i] > w[best] {
            best = i;
        }
        i += 1;
    }
    best
}

#[test]
fn reuse_rate_matches_recount() {
    let docs = fixture_docs();
    let mut reused = 0;
    let mut total = 0;
    for d in &docs {
        for a in &d.abstract_tokens {
            total += 1;
            if d.text_tokens.contains(a) {
                reused += 1;
            }
        }
    }
    assert_eq!(reuse_rate(&docs, None, None).unwrap(), reused as f64 / total as f64);

    let mut reused = 0;
    let mut total = 0;
    for d in &docs {
        let anns = &d.annotations.as_ref().unwrap().abstract_;
        for (i, a) in d.abstract_tokens.iter().enumerate() {
            if PosClass::from_tag(&anns[i].pos) == PosClass::Noun {
                total += 1;
                if d.text_tokens.contains(a) {
                    reused += 1;
                }
            }
        }
    }
    assert_eq!(
        reuse_rate(&docs, Some(PosClass::Noun), None).unwrap(),
        reused as f64 / total as f64
    );
}

#[test]
fn reuse_rate_hand_cases() {
    let d = Document::new("1", Domain::News, "", "x q r", "x y");
    assert_eq!(reuse_rate(&[d], None, None).unwrap(), 0.5);
    let d = Document::new("2", Domain::News, "", "x y z", "y x x");
    assert_eq!(reuse_rate(&[d.clone()], None, None).unwrap(), 1.0);
    assert!(reuse_rate(&[d], Some(PosClass::Noun), None).is_err());
}

#[test]
fn synthetic_news_reuse_is_high() {
    let news: Vec<Document> = generate_synthetic_corpus(50, 1)
        .into_iter()
        .filter(|d| d.domain == Domain::News)
        .collect();
    assert!(reuse_rate(&news, None, None).unwrap() >= 0.80);
}

#[test]
fn distribution_matches_recount() {
    let docs = fixture_docs();
    for (field, side) in [
        (Field::Pos, Side::Abstract),
        (Field::Pos, Side::Text),
        (Field::Ne, Side::Text),
        (Field::Subjectivity, Side::Text),
    ] {
        let got = distribution_by_category(&docs, field, side, None).unwrap();
        let mut labels: Vec<String> = Vec::new();
        for d in &docs {
            let a = d.annotations.as_ref().unwrap();
            let list = if side == Side::Abstract { &a.abstract_ } else { &a.text };
            for x in list {
                labels.push(match field {
                    Field::Pos => PosClass::from_tag(&x.pos).as_str().to_string(),
                    Field::Ne => x.ne.as_str().to_string(),
                    Field::Subjectivity => x.subjectivity.as_str().to_string(),
                });
            }
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        assert_eq!(got.len(), distinct.len());
        for label in distinct {
            let n = labels.iter().filter(|l| *l == label).count();
            assert_eq!(got[label], 100.0 * n as f64 / labels.len() as f64);
        }
        assert!((got.values().sum::<f64>() - 100.0).abs() < 0.1);
    }
}

#[test]
fn distribution_hand_cases() {
    let mut d = Document::new("1", Domain::News, "", "a b c d", "a b c d");
    let anns = vec![ann("NOUN", NeTag::None), ann("NOUN", NeTag::None), ann("NOUN", NeTag::None), ann("VERB", NeTag::None)];
    d.annotations = Some(Annotations {
        text: anns.clone(),
        abstract_: anns,
    });
    let got = distribution_by_category(&[d.clone()], Field::Pos, Side::Text, None).unwrap();
    assert_eq!(got.len(), 2);
    assert_eq!((got["Noun"], got["Verb"]), (75.0, 25.0));

    // 2 of 50 tokens are strong-subjective lexicon hits
    let text: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
    let mut s = Document::new("2", Domain::Opinion, "", &text.join(" "), "w0");
    let mut tanns: Vec<TokenAnnotation> = (0..50).map(|_| ann("NOUN", NeTag::None)).collect();
    tanns[3].subjectivity = Subjectivity::StrongPositive;
    tanns[9].subjectivity = Subjectivity::StrongNegative;
    s.annotations = Some(Annotations {
        text: tanns,
        abstract_: vec![ann("NOUN", NeTag::None)],
    });
    let got = distribution_by_category(&[s], Field::Subjectivity, Side::Text, None).unwrap();
    assert!((got["positive"] + got["negative"] - 4.0).abs() < 1e-12);

    d.annotations = None;
    assert!(distribution_by_category(&[d], Field::Pos, Side::Text, None).is_err());
}

#[test]
fn breakdown_matches_recount() {
    let docs = fixture_docs();
    let (outputs, _) = fixture_outputs(&docs, 11);
    // "training" abstracts: the first half of the fixture
    let seen: BTreeSet<String> = docs[..10].iter().flat_map(|d| d.abstract_tokens.clone()).collect();
    let gold: Vec<Vec<String>> = docs.iter().map(|d| d.abstract_tokens.clone()).collect();
    let inputs: Vec<Vec<String>> = docs.iter().map(|d| d.text_tokens.clone()).collect();
    let got = gold_token_breakdown(&gold, &outputs, &inputs, &seen).unwrap();

    let mut cells = [0usize; 6];
    let mut total = 0;
    for i in 0..gold.len() {
        let mut used = vec![false; outputs[i].len()];
        for w in &gold[i] {
            total += 1;
            let in_input = inputs[i].contains(w);
            if !seen.contains(w) {
                cells[if in_input { 4 } else { 5 }] += 1;
                continue;
            }
            let mut generated = false;
            for j in 0..outputs[i].len() {
                if !used[j] && outputs[i][j] == *w {
                    used[j] = true;
                    generated = true;
                    break;
                }
            }
            let k = if in_input { 0 } else { 2 } + if generated { 0 } else { 1 };
            cells[k] += 1;
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / total as f64;
    assert_eq!(got.gold_tokens, total);
    assert_eq!(got.seen_in_input_generated, pct(cells[0]));
    assert_eq!(got.seen_in_input_missed, pct(cells[1]));
    assert_eq!(got.seen_not_in_input_generated, pct(cells[2]));
    assert_eq!(got.seen_not_in_input_missed, pct(cells[3]));
    assert_eq!(got.unseen_in_input, pct(cells[4]));
    assert_eq!(got.unseen_not_in_input, pct(cells[5]));
    assert!(cells[4] + cells[5] > 0, "fixture exercises unseen tokens");
    assert!((got.total() - 100.0).abs() < 0.1);
}

#[test]
fn breakdown_hand_cases() {
    let seen: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    let r = gold_token_breakdown(&[t("a b")], &[t("a")], &[t("a x")], &seen).unwrap();
    assert_eq!(
        (r.seen_in_input_generated, r.seen_in_input_missed, r.seen_not_in_input_generated, r.seen_not_in_input_missed),
        (50.0, 0.0, 0.0, 50.0)
    );
    let r = gold_token_breakdown(&[t("a b")], &[t("a b")], &[t("a b")], &seen).unwrap();
    assert_eq!(r.seen_in_input_generated, 100.0);
    assert_eq!(r.total(), 100.0);
    let r = gold_token_breakdown(&[t("z")], &[t("z")], &[t("z")], &seen).unwrap();
    assert_eq!((r.unseen, r.seen_in_input_generated), (100.0, 0.0));
    // one output occurrence certifies one gold occurrence
    let r = gold_token_breakdown(&[t("a a")], &[t("a")], &[t("a")], &seen).unwrap();
    assert_eq!((r.seen_in_input_generated, r.seen_in_input_missed), (50.0, 50.0));
    assert!(gold_token_breakdown(&[t("a")], &[], &[t("a")], &seen).is_err());
}

#[test]
fn attention_categorize_matches_recount() {
    let docs = fixture_docs();
    let (_, traces) = fixture_outputs(&docs, 12);
    let anns: Vec<Vec<TokenAnnotation>> = docs.iter().map(|d| d.annotations.clone().unwrap().text).collect();
    let got = attention_categorize(&traces, &anns).unwrap();

    let mut c = [0usize; 7];
    let mut steps = 0;
    for d in 0..traces.len() {
        for step in &traces[d] {
            steps += 1;
            let a = &anns[d][brute_argmax(step)];
            let pos = PosClass::from_tag(&a.pos);
            if a.ne == NeTag::Person {
                c[0] += 1;
            }
            if a.ne == NeTag::Organization {
                c[1] += 1;
            }
            if a.ne != NeTag::None {
                c[2] += 1;
            }
            if pos == PosClass::Noun {
                c[3] += 1;
            }
            if pos == PosClass::Verb {
                c[4] += 1;
            }
            if a.subjectivity == Subjectivity::StrongPositive {
                c[5] += 1;
            }
            if a.subjectivity == Subjectivity::StrongNegative {
                c[6] += 1;
            }
        }
    }
    let pct = |x: usize| 100.0 * x as f64 / steps as f64;
    assert_eq!(got.steps, steps);
    assert_eq!(
        [got.person, got.organization, got.all_entities, got.noun, got.verb, got.positive, got.negative],
        c.map(pct)
    );
}

#[test]
fn attention_hand_cases() {
    let anns = vec![
        ann("NOUN", NeTag::None),
        ann("VERB", NeTag::None),
        ann("NOUN", NeTag::Person),
    ];
    let one = attention_categorize(&[vec![vec![0.1, 0.1, 0.8]]], &[anns.clone()]).unwrap();
    assert_eq!(one.person, 100.0);
    let trace = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.6, 0.3, 0.1],
        vec![0.2, 0.7, 0.1],
        vec![0.1, 0.2, 0.7],
    ];
    let r = attention_categorize(&[trace.clone()], &[anns.clone()]).unwrap();
    assert_eq!((r.noun, r.verb, r.person), (75.0, 25.0, 25.0));
    // rescaling a step leaves the argmax unchanged
    let scaled: Vec<Vec<f64>> = trace.iter().map(|s| s.iter().map(|w| w * 3.5).collect()).collect();
    assert_eq!(attention_categorize(&[scaled], &[anns.clone()]).unwrap(), r);
    let uniform = attention_categorize(&[vec![vec![1.0 / 3.0; 3]]], &[anns.clone()]).unwrap();
    assert_eq!((uniform.noun, uniform.person), (100.0, 0.0));
    assert!(attention_categorize(&[vec![vec![0.5, 0.5]]], &[anns]).is_err());
}

#[test]
fn summary_worthy_matches_recount() {
    let docs = fixture_docs();
    let (_, traces) = fixture_outputs(&docs, 13);
    let inputs: Vec<Vec<String>> = docs.iter().map(|d| d.text_tokens.clone()).collect();
    let gold: Vec<Vec<String>> = docs.iter().map(|d| d.abstract_tokens.clone()).collect();
    let got = summary_worthy_rate(&traces, &inputs, &gold).unwrap();
    let mut worthy = 0;
    let mut steps = 0;
    for d in 0..traces.len() {
        for step in &traces[d] {
            steps += 1;
            if gold[d].contains(&inputs[d][brute_argmax(step)]) {
                worthy += 1;
            }
        }
    }
    assert_eq!(got, worthy as f64 / steps as f64);
}

#[test]
fn summary_worthy_hand_cases() {
    let input = t("p q r s");
    let peaks = vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let r = summary_worthy_rate(&[peaks.clone()], &[input.clone()], &[t("q z")]).unwrap();
    assert_eq!(r, 0.25);
    assert_eq!(summary_worthy_rate(&[peaks.clone()], &[input.clone()], &[t("p q r s")]).unwrap(), 1.0);
    assert_eq!(summary_worthy_rate(&[peaks], &[input], &[t("z")]).unwrap(), 0.0);
}
