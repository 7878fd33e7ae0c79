use hearken_core::encoder::EncoderModel;

const FIXTURE: &str = include_str!("fixtures/paraphrases.tsv");

fn triples() -> Vec<[&'static str; 3]> {
    FIXTURE
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 3, "bad fixture line {l:?}");
            [f[0], f[1], f[2]]
        })
        .collect()
}

#[test]
fn paraphrases_score_closer_than_unrelated_sentences() {
    let triples = triples();
    assert_eq!(triples.len(), 50);
    let corpus: Vec<&str> = triples.iter().flatten().copied().collect();
    let model = EncoderModel::fit(&corpus, 512).unwrap();
    let wins = triples
        .iter()
        .filter(|[a, p, u]| {
            let a = model.encode(a);
            a.cosine(&model.encode(p)) > a.cosine(&model.encode(u))
        })
        .count();
    assert!(wins * 10 >= triples.len() * 9, "only {wins}/50 paraphrase pairs won");
}

#[test]
fn refitting_gives_the_same_encoder() {
    let corpus: Vec<&str> = triples().into_iter().flatten().collect();
    let a = EncoderModel::fit(&corpus, 256).unwrap();
    let b = EncoderModel::fit(&corpus, 256).unwrap();
    assert_eq!(a.fingerprint, b.fingerprint);
    for text in corpus.iter().take(20) {
        assert_eq!(a.encode(text), b.encode(text));
    }
}
