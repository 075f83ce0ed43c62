use ppulse::corpus::{generate_synthetic, GeneratorParams};
use ppulse::scoring::{
    assess_corpus, conversation_scores, label_to_score, user_aggregates, TurnAssessment,
    UserAggregation, Window,
};
use ppulse::sentiment::{SentimentEngine, SentimentLabel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture() -> (ppulse::corpus::Corpus, Vec<TurnAssessment>) {
    let mut p = GeneratorParams::with_seed(21);
    p.n_users = 12;
    let corpus = generate_synthetic(&p).unwrap();
    let run = assess_corpus(&corpus, &SentimentEngine::lexicon_only());
    (corpus, run.assessments)
}

#[test]
fn scores_are_ordered_and_symmetric() {
    let scores: Vec<f64> = SentimentLabel::ALL.iter().map(|l| label_to_score(*l)).collect();
    assert_eq!(scores, [-1.0, -0.5, 0.0, 0.5, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn aggregates_ignore_assessment_order(seed in any::<u64>()) {
        let (corpus, assessments) = fixture();
        let mut shuffled = assessments.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(conversation_scores(&assessments), conversation_scores(&shuffled));
        for mode in [UserAggregation::Turns, UserAggregation::Conversations] {
            prop_assert_eq!(
                user_aggregates(&assessments, &corpus, Window::ALL, mode).unwrap(),
                user_aggregates(&shuffled, &corpus, Window::ALL, mode).unwrap()
            );
        }
    }

    #[test]
    fn conversation_means_stay_in_range(seed in 0u64..1000) {
        let mut p = GeneratorParams::with_seed(seed);
        p.n_users = 3;
        let corpus = generate_synthetic(&p).unwrap();
        let run = assess_corpus(&corpus, &SentimentEngine::lexicon_only());
        for s in conversation_scores(&run.assessments) {
            prop_assert!((-1.0..=1.0).contains(&s.mean_score));
            prop_assert!(s.n_assessed >= 1);
        }
    }
}
