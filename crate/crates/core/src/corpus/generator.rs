//! Seeded synthetic corpora with planted sentiment, explicit-feedback and
//! churn signals.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::{Deserialize, Serialize};

use super::model::{Author, Conversation, Corpus, CorpusMeta, Feedback, Turn};
use super::templates::TemplatePools;
use crate::scoring::label_to_score;
use crate::sentiment::{Polarity, SentimentLabel};

/// Default per-label mix of qualifying turns, ordered like
/// [`SentimentLabel::ALL`]. Chosen so that, over all user turns, roughly 7%
/// are negative, 1% positive, 0.2% extremely negative and 0.03% extremely
/// positive when 83% of user turns qualify.
pub const DEFAULT_SENTIMENT_MIX: [f64; 5] = [
    0.002 / 0.83,
    0.07 / 0.83,
    1.0 - (0.002 + 0.07 + 0.01 + 0.0003) / 0.83,
    0.01 / 0.83,
    0.0003 / 0.83,
];

/// `churn_link` that yields a point-biserial correlation of about 0.15
/// between initial-period mean score and return at the default parameters.
/// Found by simulation over seeds 1000..1040 with the lexicon backend; those
/// seeds are kept apart from the ones tests use.
pub const CALIBRATED_CHURN_LINK: f64 = 12.5;

/// Seconds between consecutive turns of a generated conversation.
pub const TURN_SPACING_SECS: i64 = 60;

/// Planted mean conversation lengths (all turns) per sentiment group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthProfile {
    pub negative: f64,
    pub neutral: f64,
    pub positive: f64,
    /// Probability of each group, ordered negative / neutral / positive.
    pub group_weights: [f64; 3],
}

impl LengthProfile {
    pub fn new(negative: f64, neutral: f64, positive: f64) -> Self {
        Self {
            negative,
            neutral,
            positive,
            group_weights: [0.25, 0.5, 0.25],
        }
    }

    fn mean_for(&self, group: Polarity) -> f64 {
        match group {
            Polarity::Negative => self.negative,
            Polarity::Neutral => self.neutral,
            Polarity::Positive => self.positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_users: usize,
    pub mean_conversations_per_user: f64,
    pub mean_user_turns_per_conversation: f64,
    /// Share of conversations that stop after the first user turn.
    pub single_turn_share: f64,
    pub sentiment_mix: [f64; 5],
    /// Coefficient of variation of each user's negativity multiplier; 0 makes
    /// every user share the same mix.
    pub user_heterogeneity: f64,
    /// Fraction of all user turns whose preceding AI turn gets a thumb.
    pub explicit_feedback_turn_rate: f64,
    /// Share of thumbs placed before non-neutral follow-ups.
    pub feedback_nonneutral_share: f64,
    /// Probability a thumb agrees in sign with the planted sentiment.
    pub feedback_concordance: f64,
    /// Share of neutral follow-ups rendered as pasted error logs, and of
    /// negative ones rendered as a remark plus a log.
    pub error_log_rate: f64,
    pub churn_link: f64,
    /// Return probability of a user whose planted mean equals the mix mean.
    pub base_return_rate: f64,
    pub length_profile: Option<LengthProfile>,
    pub window_start: DateTime<Utc>,
    pub window_weeks: u32,
    pub period_boundary: DateTime<Utc>,
    /// Every generated user makes more than this many requests.
    pub min_requests: usize,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_users: 372,
            mean_conversations_per_user: 17.0,
            mean_user_turns_per_conversation: 5.7,
            single_turn_share: 0.33,
            sentiment_mix: DEFAULT_SENTIMENT_MIX,
            user_heterogeneity: 0.7,
            explicit_feedback_turn_rate: 0.006,
            feedback_nonneutral_share: 0.16,
            feedback_concordance: 0.9,
            error_log_rate: 0.05,
            churn_link: CALIBRATED_CHURN_LINK,
            base_return_rate: 0.7,
            length_profile: None,
            window_start: Utc.with_ymd_and_hms(2025, 3, 10, 0, 0, 0).unwrap(),
            window_weeks: 9,
            period_boundary: Utc.with_ymd_and_hms(2025, 4, 14, 0, 0, 0).unwrap(),
            min_requests: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid generator parameters: {}", .0.join("; "))]
pub struct InvalidParams(pub Vec<String>);

impl GeneratorParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn window_end(&self) -> DateTime<Utc> {
        self.window_start + Duration::weeks(self.window_weeks as i64)
    }

    pub fn validate(&self) -> Result<(), InvalidParams> {
        let mut errs = Vec::new();
        if self.n_users == 0 {
            errs.push("n_users must be positive".to_string());
        }
        if !(self.mean_conversations_per_user >= 1.0) {
            errs.push("mean_conversations_per_user must be at least 1".into());
        }
        if !(self.mean_user_turns_per_conversation >= 1.0) {
            errs.push("mean_user_turns_per_conversation must be at least 1".into());
        }
        if self.sentiment_mix.iter().any(|p| !(*p >= 0.0)) {
            errs.push("sentiment_mix entries must be non-negative".into());
        }
        let total: f64 = self.sentiment_mix.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            errs.push(format!("sentiment_mix sums to {total}, not 1"));
        }
        for (name, v) in [
            ("single_turn_share", self.single_turn_share),
            ("explicit_feedback_turn_rate", self.explicit_feedback_turn_rate),
            ("feedback_nonneutral_share", self.feedback_nonneutral_share),
            ("feedback_concordance", self.feedback_concordance),
            ("error_log_rate", self.error_log_rate),
            ("base_return_rate", self.base_return_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.base_return_rate) || self.base_return_rate == 0.0 {
            errs.push("base_return_rate must lie strictly between 0 and 1".into());
        }
        if !(self.user_heterogeneity >= 0.0) {
            errs.push("user_heterogeneity must be non-negative".into());
        }
        if !self.churn_link.is_finite() {
            errs.push("churn_link must be finite".into());
        }
        if self.window_weeks == 0 {
            errs.push("window_weeks must be positive".into());
        }
        if let Some(lp) = &self.length_profile {
            for (name, v) in [("negative", lp.negative), ("neutral", lp.neutral), ("positive", lp.positive)] {
                if !(v >= 4.0) {
                    errs.push(format!("length_profile.{name} must be at least 4 turns"));
                }
            }
            if lp.group_weights.iter().any(|w| !(*w >= 0.0)) || lp.group_weights.iter().sum::<f64>() <= 0.0 {
                errs.push("length_profile.group_weights must be non-negative with a positive sum".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(InvalidParams(errs))
        }
    }
}

/// How a planted follow-up was rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rendering {
    Plain,
    /// Pasted machine output only; planted label is neutral.
    ErrorLog,
    /// Negative remark followed by machine output.
    MixedLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantedTurn {
    pub label: SentimentLabel,
    pub rendering: Rendering,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedUser {
    pub user_id: String,
    /// Expected score of one of this user's qualifying turns.
    pub planted_mean: f64,
    pub return_probability: f64,
    pub did_return: bool,
}

/// What the generator planted, for checking recovery.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// Keyed by (conversation id, user turn idx), qualifying turns only.
    pub turns: BTreeMap<(String, usize), PlantedTurn>,
    pub users: Vec<PlantedUser>,
    /// Planted group per conversation when a length profile is active.
    pub conversation_groups: BTreeMap<String, Polarity>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

/// Generates a corpus; identical parameters always give identical output.
pub fn generate_synthetic(params: &GeneratorParams) -> Result<Corpus, InvalidParams> {
    generate_with_truth(params).map(|s| s.corpus)
}

fn expected_score(mix: &[f64; 5]) -> f64 {
    SentimentLabel::ALL
        .iter()
        .zip(mix)
        .map(|(l, p)| label_to_score(*l) * p)
        .sum()
}

/// Scales the negative-family probabilities by `factor`, keeping the mix a
/// distribution by adjusting the neutral share.
fn scaled_mix(mix: &[f64; 5], factor: f64) -> [f64; 5] {
    let neg = mix[0] + mix[1];
    let pos = mix[3] + mix[4];
    let cap = (1.0 - pos).max(0.0);
    let factor = if neg * factor > cap && neg > 0.0 { cap / neg } else { factor };
    let mut out = *mix;
    out[0] *= factor;
    out[1] *= factor;
    out[2] = (1.0 - out[0] - out[1] - pos).max(0.0);
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct ConversationPlan {
    user_turns: usize,
    group: Option<Polarity>,
    start: DateTime<Utc>,
}

struct Shape {
    single_share: f64,
    extra_mean: f64,
}

// Single-turn share s and Poisson extra λ so that s·1 + (1−s)(2+λ) equals
// the requested mean.
fn conversation_shape(params: &GeneratorParams) -> Shape {
    let m = params.mean_user_turns_per_conversation;
    if m <= 1.0 {
        return Shape {
            single_share: 1.0,
            extra_mean: 0.0,
        };
    }
    let s = params.single_turn_share;
    let multi_mean = if s < 1.0 { (m - s) / (1.0 - s) } else { f64::INFINITY };
    if multi_mean >= 2.0 && s < 1.0 {
        Shape {
            single_share: s,
            extra_mean: multi_mean - 2.0,
        }
    } else {
        Shape {
            single_share: (2.0 - m).clamp(0.0, 1.0),
            extra_mean: 0.0,
        }
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
    pool.choose(rng).map(String::as_str).unwrap_or("")
}

fn uniform_time(rng: &mut ChaCha8Rng, lo: DateTime<Utc>, hi: DateTime<Utc>) -> DateTime<Utc> {
    let lo_s = lo.timestamp();
    let hi_s = hi.timestamp().max(lo_s);
    Utc.timestamp_opt(rng.gen_range(lo_s..=hi_s), 0).unwrap()
}

pub fn generate_with_truth(params: &GeneratorParams) -> Result<SyntheticCorpus, InvalidParams> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pools = TemplatePools::bundled();
    let shape = conversation_shape(params);
    let window_end = params.window_end();
    let mu_ref = expected_score(&params.sentiment_mix);
    let intercept = (params.base_return_rate / (1.0 - params.base_return_rate)).ln();
    let cv = params.user_heterogeneity;
    let multiplier = (cv > 0.0).then(|| Gamma::new(1.0 / (cv * cv), cv * cv).expect("valid gamma"));
    let conv_count = Poisson::new(params.mean_conversations_per_user).expect("mean ≥ 1");
    let group_pick = params
        .length_profile
        .as_ref()
        .map(|lp| WeightedIndex::new(lp.group_weights).expect("validated weights"));
    let extreme_neg_share = {
        let m = &params.sentiment_mix;
        if m[0] + m[1] > 0.0 { m[0] / (m[0] + m[1]) } else { 0.0 }
    };
    let extreme_pos_share = {
        let m = &params.sentiment_mix;
        if m[3] + m[4] > 0.0 { m[4] / (m[3] + m[4]) } else { 0.0 }
    };

    let mut conversations = Vec::new();
    let mut truth = GroundTruth::default();

    for u in 0..params.n_users {
        let user_id = format!("u{:04}", u + 1);
        let factor = multiplier.as_ref().map_or(1.0, |g| g.sample(&mut rng));
        let user_mix = scaled_mix(&params.sentiment_mix, factor);
        let planted_mean = expected_score(&user_mix);
        let return_probability = logistic(intercept + params.churn_link * (planted_mean - mu_ref));
        let did_return = rng.gen_bool(return_probability);
        let label_pick = WeightedIndex::new(user_mix).ok();

        let target = (conv_count.sample(&mut rng) as usize).max(1);
        let mut plans: Vec<ConversationPlan> = Vec::new();
        let mut requests = 0;
        while plans.len() < target || requests <= params.min_requests {
            let (user_turns, group) = match (&params.length_profile, &group_pick) {
                (Some(lp), Some(gp)) => {
                    let group = Polarity::ALL[gp.sample(&mut rng)];
                    let half = lp.mean_for(group) / 2.0;
                    (2 + poisson(&mut rng, half - 2.0), Some(group))
                }
                _ => {
                    if rng.gen_bool(shape.single_share) {
                        (1, None)
                    } else {
                        (2 + poisson(&mut rng, shape.extra_mean), None)
                    }
                }
            };
            let span = Duration::seconds(TURN_SPACING_SECS * (2 * user_turns as i64 - 1));
            let hi = if did_return { window_end } else { params.period_boundary } - span;
            let start = uniform_time(&mut rng, params.window_start, hi);
            requests += user_turns;
            plans.push(ConversationPlan {
                user_turns,
                group,
                start,
            });
        }
        if did_return && !plans.iter().any(|p| p.start >= params.period_boundary) {
            let last = plans.last_mut().expect("at least one plan");
            let span = Duration::seconds(TURN_SPACING_SECS * (2 * last.user_turns as i64 - 1));
            last.start = uniform_time(&mut rng, params.period_boundary, window_end - span);
        }
        plans.sort_by_key(|p| p.start);

        for (j, plan) in plans.iter().enumerate() {
            let conv_id = format!("{user_id}-c{:03}", j + 1);
            let qualifying = plan.user_turns - 1;
            let labels: Vec<SentimentLabel> = match plan.group {
                Some(group) => {
                    truth.conversation_groups.insert(conv_id.clone(), group);
                    let forced = if qualifying > 0 { rng.gen_range(0..qualifying) } else { 0 };
                    (0..qualifying)
                        .map(|q| {
                            let sentimental = group != Polarity::Neutral
                                && (q == forced || rng.gen_bool(0.5));
                            match (sentimental, group) {
                                (false, _) | (_, Polarity::Neutral) => SentimentLabel::Neutral,
                                (true, Polarity::Negative) => {
                                    if rng.gen_bool(extreme_neg_share) {
                                        SentimentLabel::ExtremelyNegative
                                    } else {
                                        SentimentLabel::Negative
                                    }
                                }
                                (true, Polarity::Positive) => {
                                    if rng.gen_bool(extreme_pos_share) {
                                        SentimentLabel::ExtremelyPositive
                                    } else {
                                        SentimentLabel::Positive
                                    }
                                }
                            }
                        })
                        .collect()
                }
                None => (0..qualifying)
                    .map(|_| match &label_pick {
                        Some(w) => SentimentLabel::ALL[w.sample(&mut rng)],
                        None => SentimentLabel::Neutral,
                    })
                    .collect(),
            };

            let mut turns = Vec::with_capacity(plan.user_turns * 2);
            for t in 0..plan.user_turns {
                let idx = 2 * t;
                let text = if t == 0 {
                    pick(&mut rng, &pools.opening).to_string()
                } else {
                    let label = labels[t - 1];
                    let rendering = match label {
                        SentimentLabel::Neutral if rng.gen_bool(params.error_log_rate) => Rendering::ErrorLog,
                        SentimentLabel::Negative if rng.gen_bool(params.error_log_rate) => Rendering::MixedLog,
                        _ => Rendering::Plain,
                    };
                    truth
                        .turns
                        .insert((conv_id.clone(), idx), PlantedTurn { label, rendering });
                    let pool = match rendering {
                        Rendering::Plain => pools.for_label(label),
                        Rendering::ErrorLog => &pools.error_log,
                        Rendering::MixedLog => &pools.negative_with_log,
                    };
                    pick(&mut rng, pool).to_string()
                };
                for (offset, author, text) in [
                    (0, Author::User, text),
                    (1, Author::Ai, pick(&mut rng, &pools.ai_reply).to_string()),
                ] {
                    turns.push(Turn {
                        idx: idx + offset,
                        author,
                        ts: plan.start + Duration::seconds(TURN_SPACING_SECS * (idx + offset) as i64),
                        text,
                        feedback: Feedback::None,
                    });
                }
            }
            conversations.push(Conversation {
                id: conv_id,
                user_id: user_id.clone(),
                turns,
            });
        }
        truth.users.push(PlantedUser {
            user_id,
            planted_mean,
            return_probability,
            did_return,
        });
    }

    plant_feedback(params, &mut rng, &mut conversations, &truth);
    let corpus = Corpus::new(
        conversations,
        CorpusMeta::Generated {
            params: params.clone(),
        },
    )
    .expect("generated ids are unique");
    Ok(SyntheticCorpus { corpus, truth })
}

fn plant_feedback(
    params: &GeneratorParams,
    rng: &mut ChaCha8Rng,
    conversations: &mut [Conversation],
    truth: &GroundTruth,
) {
    let total_user_turns: usize = conversations.iter().map(|c| c.user_turns().count()).sum();
    let non_neutral = truth.turns.values().filter(|t| t.label != SentimentLabel::Neutral).count();
    let neutral = truth.turns.len() - non_neutral;
    let target = params.explicit_feedback_turn_rate * total_user_turns as f64;
    let rate = |share: f64, pool: usize| {
        if pool == 0 { 0.0 } else { (target * share / pool as f64).min(1.0) }
    };
    let p_non_neutral = rate(params.feedback_nonneutral_share, non_neutral);
    let p_neutral = rate(1.0 - params.feedback_nonneutral_share, neutral);

    for conv in conversations.iter_mut() {
        for t in 1..conv.turns.len() {
            if !conv.turns[t].is_user() {
                continue;
            }
            let key = (conv.id.clone(), conv.turns[t].idx);
            let Some(planted) = truth.turns.get(&key) else { continue };
            let polarity = planted.label.polarity();
            let p = if polarity == Polarity::Neutral { p_neutral } else { p_non_neutral };
            if !rng.gen_bool(p) {
                continue;
            }
            let up = match polarity {
                Polarity::Neutral => rng.gen_bool(0.5),
                Polarity::Positive => rng.gen_bool(params.feedback_concordance),
                Polarity::Negative => !rng.gen_bool(params.feedback_concordance),
            };
            conv.turns[t - 1].feedback = if up { Feedback::Up } else { Feedback::Down };
        }
    }
}
