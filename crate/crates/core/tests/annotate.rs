mod common;

use common::{synth, WordSpec};
use prosolab::acoustics::FrameTrack;
use prosolab::corpus_io::{AudioBuffer, Token, Utterance};
use prosolab::prominence::{
    analyze_utterance, annotate_utterance, compose, cwt, extract_loma, word_prominence, AnnotationConfig,
    CompositeConfig, CompositeMode, ScaleGrid,
};

fn word_values(audio: &AudioBuffer, utt: &Utterance) -> Vec<f64> {
    analyze_utterance(audio, utt, &AnnotationConfig::default())
        .unwrap()
        .values
        .into_iter()
        .map(|v| v.unwrap())
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

#[test]
fn salient_word_scores_highest() {
    let (audio, utt) = common::five_word_fixture();
    let v = word_values(&audio, &utt);
    assert_eq!(argmax(&v), 2, "{v:?}");
    assert!(v.iter().enumerate().all(|(i, &x)| i == 2 || x < v[2]));
}

#[test]
fn flat_utterance_stays_flat() {
    let (audio, utt) = synth(&[WordSpec::PLAIN; 5]);
    let v = word_values(&audio, &utt);
    let max = v.iter().copied().fold(f64::MIN, f64::max);
    let min = v.iter().copied().fold(f64::MAX, f64::min);
    assert!(max > 0.0);
    assert!((max - min) / max <= 0.2, "{v:?}");
}

#[test]
fn louder_word_scores_higher() {
    let mut prev = None;
    for amp in [0.2, 0.3, 0.45] {
        let mut words = [WordSpec::PLAIN; 5];
        words[1].amp = amp;
        let (audio, utt) = synth(&words);
        let v = word_values(&audio, &utt)[1];
        if let Some(p) = prev {
            assert!(v > p, "amplitude {amp}: {v} <= {p}");
        }
        prev = Some(v);
    }
}

#[test]
fn silent_audio_scores_zero() {
    let (_, utt) = common::five_word_fixture();
    let audio = AudioBuffer::new(vec![0.0; 32_000], common::SR);
    let recs = annotate_utterance(&audio, &utt, &AnnotationConfig::default()).unwrap();
    assert!(recs.iter().all(|r| r.continuous == Some(0.0) && r.discrete == Some(0)));
}

#[test]
fn span_past_audio_names_the_utterance() {
    let (audio, _) = common::five_word_fixture();
    let utt = Utterance::new(
        "spk1_0042",
        "spk1",
        vec![Token::new("late", 0.2, audio.duration_s() + 1.0)],
    )
    .unwrap();
    let msg = analyze_utterance(&audio, &utt, &AnnotationConfig::default())
        .unwrap_err()
        .to_string();
    assert!(msg.contains("span outside audio") && msg.contains("spk1_0042"), "{msg}");
}

#[test]
fn punctuation_is_not_scored() {
    let (audio, mut utt) = common::five_word_fixture();
    let last = utt.tokens.last().unwrap().end_s;
    utt.tokens.push(Token::new(",", last, last));
    let recs = annotate_utterance(&audio, &utt, &AnnotationConfig::default()).unwrap();
    let comma = recs.last().unwrap();
    assert_eq!((comma.discrete, comma.continuous), (None, None));
    assert!(recs[..5].iter().all(|r| r.continuous.is_some()));
}

/// Three bumps of decreasing height shared by all streams.
fn three_bump_stream(heights: [f64; 3]) -> FrameTrack {
    let values = (0..900)
        .map(|i| {
            let t = i as f64 * 0.005;
            heights
                .iter()
                .zip([0.75, 2.25, 3.75])
                .map(|(h, c)| h * (-(t - c).powi(2) / (2.0 * 0.08f64.powi(2))).exp())
                .sum::<f64>()
        })
        .collect();
    FrameTrack::from_values(values, 0.005)
}

#[test]
fn sum_and_product_rank_alike() {
    let f0 = three_bump_stream([3.0, 2.0, 1.0]);
    let energy = three_bump_stream([2.5, 1.5, 0.5]);
    let dur = three_bump_stream([2.0, 1.2, 0.6]);
    let utt = Utterance::new(
        "bumps",
        "bumps",
        vec![
            Token::new("a", 0.0, 1.5),
            Token::new("b", 1.5, 3.0),
            Token::new("c", 3.0, 4.5),
        ],
    )
    .unwrap();
    let grid = ScaleGrid::default().fitted(4.5).unwrap();
    for mode in [CompositeMode::Sum, CompositeMode::Product] {
        let cfg = CompositeConfig {
            mode,
            ..CompositeConfig::default()
        };
        let comp = compose(&f0, &energy, &dur, &cfg).unwrap();
        let s = cwt(&comp, &grid).unwrap();
        let lomas = extract_loma(&s, AnnotationConfig::default().seeding);
        let mut v = [0.0; 3];
        for wp in word_prominence(&lomas, &utt, 0.005) {
            v[wp.token_index] = wp.value;
        }
        assert!(v[0] > v[1] && v[1] > v[2], "{mode}: {v:?}");
    }
}

#[test]
fn tracks_salience_levels() {
    let rhos: Vec<f64> = (0..8)
        .map(|seed| {
            let (audio, utt, levels) = common::random_fixture(seed);
            common::spearman(&levels, &word_values(&audio, &utt))
        })
        .collect();
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    assert!(mean >= 0.7, "{rhos:?}");
}
