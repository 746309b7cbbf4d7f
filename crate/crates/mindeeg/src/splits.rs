//! Experimental split protocols: subject-dependent trial splits in the three
//! dataset styles, and leave-one-subject-out cross-validation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::data::Dataset;
use crate::{Error, Result};

/// A named train/test split over dataset sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    /// Exhaustive disjointness audit: no index may sit on both sides and the
    /// test side must be non-empty.
    pub fn audit(&self) -> Result<()> {
        if self.test.is_empty() {
            return Err(Error::Protocol(format!("plan `{}`: empty test set", self.name)));
        }
        let train: BTreeSet<usize> = self.train.iter().copied().collect();
        for i in &self.test {
            if train.contains(i) {
                return Err(Error::Protocol(format!(
                    "plan `{}`: sample {i} appears in both train and test",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Trial-split style for the subject-dependent protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependentProtocol {
    /// The last two trials of each class are the test set (SEED-IV style,
    /// 24 trials of 4 classes).
    LastTwoPerClass,
    /// Three folds over the per-session trial sequence: first, middle and
    /// last third (SEED-V style, 15 trials per session in thirds of 5).
    ThreeFold,
    /// A fixed count of leading trials trains, the rest test (MPED style,
    /// 21 of 28 trials train).
    FirstTrialsTrain { train_trials: usize },
}

/// Session+trial key used for trial-level grouping.
type TrialKey = (u32, u32);

/// One plan per subject (or per subject and fold for the three-fold style).
/// Train and test are always disjoint at trial granularity.
pub fn split_subject_dependent(ds: &Dataset, protocol: DependentProtocol) -> Result<Vec<SplitPlan>> {
    let mut plans = Vec::new();
    for subject in ds.subjects() {
        let indices: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.samples[i].subject == subject)
            .collect();
        match protocol {
            DependentProtocol::LastTwoPerClass => {
                // per class, the two highest trial keys are held out
                let mut by_class: BTreeMap<u32, BTreeSet<TrialKey>> = BTreeMap::new();
                for &i in &indices {
                    let s = &ds.samples[i];
                    by_class
                        .entry(s.label)
                        .or_default()
                        .insert((s.session, s.trial));
                }
                let mut test_trials: BTreeSet<TrialKey> = BTreeSet::new();
                for (class, trials) in &by_class {
                    if trials.len() < 3 {
                        return Err(Error::Protocol(format!(
                            "subject {subject}, class {class}: {} trials, need at least 3 for a last-two split",
                            trials.len()
                        )));
                    }
                    test_trials.extend(trials.iter().rev().take(2));
                }
                let (train, test) = partition_by_trial(ds, &indices, &test_trials);
                plans.push(SplitPlan {
                    name: format!("subject{subject}"),
                    train,
                    test,
                });
            }
            DependentProtocol::ThreeFold => {
                // fold f holds out the f-th third of each session's trials
                let mut by_session: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
                for &i in &indices {
                    let s = &ds.samples[i];
                    by_session.entry(s.session).or_default().insert(s.trial);
                }
                for (session, trials) in &by_session {
                    if trials.len() % 3 != 0 {
                        return Err(Error::Protocol(format!(
                            "subject {subject}, session {session}: {} trials not divisible into 3 folds",
                            trials.len()
                        )));
                    }
                }
                for fold in 0..3 {
                    let mut test_trials: BTreeSet<TrialKey> = BTreeSet::new();
                    for (session, trials) in &by_session {
                        let per_fold = trials.len() / 3;
                        for t in trials.iter().skip(fold * per_fold).take(per_fold) {
                            test_trials.insert((*session, *t));
                        }
                    }
                    let (train, test) = partition_by_trial(ds, &indices, &test_trials);
                    plans.push(SplitPlan {
                        name: format!("subject{subject}_fold{fold}"),
                        train,
                        test,
                    });
                }
            }
            DependentProtocol::FirstTrialsTrain { train_trials } => {
                let mut trials: BTreeSet<TrialKey> = BTreeSet::new();
                for &i in &indices {
                    let s = &ds.samples[i];
                    trials.insert((s.session, s.trial));
                }
                if trials.len() <= train_trials {
                    return Err(Error::Protocol(format!(
                        "subject {subject}: {} trials, need more than {train_trials}",
                        trials.len()
                    )));
                }
                let test_trials: BTreeSet<TrialKey> =
                    trials.iter().skip(train_trials).copied().collect();
                let (train, test) = partition_by_trial(ds, &indices, &test_trials);
                plans.push(SplitPlan {
                    name: format!("subject{subject}"),
                    train,
                    test,
                });
            }
        }
    }
    for p in &plans {
        p.audit()?;
    }
    Ok(plans)
}

fn partition_by_trial(
    ds: &Dataset,
    indices: &[usize],
    test_trials: &BTreeSet<TrialKey>,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &i in indices {
        let s = &ds.samples[i];
        if test_trials.contains(&(s.session, s.trial)) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

/// Leave-one-subject-out: one plan per subject, pooling all of the held-out
/// subject's sessions into the test side.
pub fn split_loso(ds: &Dataset) -> Result<Vec<SplitPlan>> {
    let subjects = ds.subjects();
    if subjects.len() < 2 {
        return Err(Error::Protocol(
            "leave-one-subject-out needs at least 2 subjects".into(),
        ));
    }
    let mut plans = Vec::new();
    for held_out in subjects {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, s) in ds.samples.iter().enumerate() {
            if s.subject == held_out {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        plans.push(SplitPlan {
            name: format!("loso_subject{held_out}"),
            train,
            test,
        });
    }
    for p in &plans {
        p.audit()?;
    }
    Ok(plans)
}
