use log::{info, warn};

use crate::decision::{
    build_input, decide_multiclass, decide_multilabel, fuse_scores, hierarchical_decide, Decision,
    Flag, InputMode, ModelInput,
};
use crate::error::{Error, Result};
use crate::ingest::ArticleRecord;
use crate::scorer::{score_batch, LabelScores, ScoreRequest, Scorer};
use crate::taxonomy::{CategoryGroup, Mode, Strategy};
use crate::trends::{classify_stage, record_timing, Clock, StageTiming};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifyOptions {
    pub parallelism: usize,
    pub max_chars: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub decisions: Vec<Decision>,
    pub timing: StageTiming,
}

/// Texts to score for one record, and whether the title stood in for a missing abstract.
fn texts_for(
    record: &ArticleRecord,
    input: InputMode,
    max_chars: usize,
) -> Result<(Vec<String>, bool)> {
    if input.needs_abstract() && !record.has_abstract() && input != InputMode::Abstract {
        warn!(
            "record {} has no abstract; scoring its title under {input} mode",
            record.pmid
        );
        return match build_input(record, InputMode::Title, max_chars)? {
            ModelInput::Single(t) => Ok((vec![t], true)),
            ModelInput::Pair { .. } => unreachable!("title input is a single text"),
        };
    }
    Ok(match build_input(record, input, max_chars)? {
        ModelInput::Single(t) => (vec![t], false),
        ModelInput::Pair {
            abstract_text,
            title,
        } => (vec![abstract_text, title], false),
    })
}

/// Scorer requests for one text. Flat groups send every phrasing of every
/// label at once; hierarchical groups send one label-vs-not-label request per label.
fn requests_for(group: &CategoryGroup, text: &str) -> Vec<ScoreRequest> {
    match group.strategy {
        Strategy::Flat => vec![ScoreRequest {
            text: text.to_string(),
            label_phrases: group
                .labels
                .iter()
                .flat_map(|l| l.phrasings.iter().cloned())
                .collect(),
            multi_label: group.mode == Mode::Multilabel,
            template: group.template.clone(),
        }],
        Strategy::Hierarchical => group
            .labels
            .iter()
            .map(|l| {
                let mut phrases = l.phrasings.clone();
                phrases.push(l.negative_phrase());
                ScoreRequest {
                    text: text.to_string(),
                    label_phrases: phrases,
                    multi_label: false,
                    template: group.template.clone(),
                }
            })
            .collect(),
    }
}

/// Collapses the scores of one text's requests into one value per label.
///
/// Flat multiclass sums a label's phrasings (the vector stays a distribution);
/// flat multilabel takes their maximum. Hierarchical keeps the positive-class
/// mass of each binary request.
fn label_scores(group: &CategoryGroup, responses: &[LabelScores]) -> LabelScores {
    match group.strategy {
        Strategy::Flat => {
            let flat = responses[0].as_slice();
            let mut out = Vec::with_capacity(group.len());
            let mut at = 0;
            for label in &group.labels {
                let part = &flat[at..at + label.phrasings.len()];
                at += label.phrasings.len();
                out.push(match group.mode {
                    Mode::Multiclass => part.iter().sum(),
                    Mode::Multilabel => part.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                });
            }
            LabelScores(out)
        }
        Strategy::Hierarchical => LabelScores(
            group
                .labels
                .iter()
                .zip(responses)
                .map(|(label, r)| {
                    r.as_slice()[..label.phrasings.len()]
                        .iter()
                        .sum::<f64>()
                        .min(1.0)
                })
                .collect(),
        ),
    }
}

/// Label indices and flags for one record's final scores. `thresholds` is
/// aligned with the group's labels and ignored for multiclass groups.
pub fn decide(
    group: &CategoryGroup,
    scores: &LabelScores,
    thresholds: &[f64],
) -> Result<(Vec<usize>, Vec<Flag>)> {
    match (group.mode, group.strategy) {
        (Mode::Multiclass, _) => {
            let choice = decide_multiclass(scores);
            let flags = if choice.tied {
                vec![Flag::Tied]
            } else {
                vec![]
            };
            Ok((vec![choice.index], flags))
        }
        (Mode::Multilabel, strategy) => {
            let chosen = match strategy {
                Strategy::Flat => decide_multilabel(scores, thresholds),
                Strategy::Hierarchical => {
                    let pairs: Vec<Option<LabelScores>> = scores
                        .as_slice()
                        .iter()
                        .map(|&p| Some(LabelScores(vec![p, 1.0 - p])))
                        .collect();
                    hierarchical_decide(&pairs, &group.label_names(), thresholds)?
                }
            };
            let flags = if chosen.is_empty() {
                vec![Flag::Empty]
            } else {
                vec![]
            };
            Ok((chosen, flags))
        }
    }
}

/// Re-applies the decision rule to stored scores under new thresholds,
/// keeping any title-fallback flag.
pub fn redecide(
    group: &CategoryGroup,
    decisions: &[Decision],
    thresholds: &[f64],
) -> Result<Vec<Decision>> {
    decisions
        .iter()
        .map(|d| {
            let (chosen, mut flags) = decide(group, &d.scores, thresholds)?;
            if d.has_flag(Flag::TitleFallback) {
                flags.push(Flag::TitleFallback);
            }
            flags.sort();
            Ok(Decision {
                labels: chosen
                    .iter()
                    .map(|&i| group.labels[i].name.clone())
                    .collect(),
                flags,
                ..d.clone()
            })
        })
        .collect()
}

/// Classifies every record in `group` under one input mode.
///
/// Fused mode scores the abstract and the title separately and averages the
/// per-label scores. Appended and fused modes fall back to the title when a
/// record has no abstract and flag the decision; abstract mode fails instead.
/// Scorer failures name the record that caused them.
pub fn classify_group(
    records: &[ArticleRecord],
    group: &CategoryGroup,
    input: InputMode,
    scorer: &dyn Scorer,
    options: ClassifyOptions,
    clock: &dyn Clock,
) -> Result<Classification> {
    let started = clock.now();
    let per_text = match group.strategy {
        Strategy::Flat => 1,
        Strategy::Hierarchical => group.len(),
    };

    let mut requests = Vec::new();
    let mut owner = Vec::new();
    let mut plan = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        let (texts, fallback) = texts_for(record, input, options.max_chars)?;
        for text in &texts {
            requests.extend(requests_for(group, text));
            owner.extend(std::iter::repeat_n(r, per_text));
        }
        plan.push((texts.len(), fallback));
    }

    let responses = score_batch(scorer, &requests, options.parallelism).map_err(|e| match e {
        Error::Batch { index, source } => Error::Record {
            pmid: records[owner[index]].pmid.clone(),
            source,
        },
        other => other,
    })?;

    let thresholds = group.thresholds.resolve(&group.label_names());
    let mut decisions = Vec::with_capacity(records.len());
    let mut at = 0;
    for (record, &(texts, fallback)) in records.iter().zip(&plan) {
        let mut per_text_scores = Vec::with_capacity(texts);
        for _ in 0..texts {
            per_text_scores.push(label_scores(group, &responses[at..at + per_text]));
            at += per_text;
        }
        let scores = match per_text_scores.as_slice() {
            [one] => one.clone(),
            [a, b] => fuse_scores(a, b)?,
            _ => unreachable!("one or two texts per record"),
        };
        let (chosen, mut flags) = decide(group, &scores, &thresholds)?;
        if fallback {
            flags.push(Flag::TitleFallback);
        }
        flags.sort();
        decisions.push(Decision {
            pmid: record.pmid.clone(),
            group: group.name.clone(),
            mode: group.mode,
            input,
            labels: chosen
                .iter()
                .map(|&i| group.labels[i].name.clone())
                .collect(),
            scores,
            flags,
        });
    }

    let elapsed = clock.now().saturating_sub(started);
    info!(
        "classified {} records for {:?} ({input}) with {} scorer calls",
        records.len(),
        group.name,
        requests.len()
    );
    Ok(Classification {
        decisions,
        timing: record_timing(
            classify_stage(&group.name, input),
            elapsed,
            records.len() as u64,
        ),
    })
}
