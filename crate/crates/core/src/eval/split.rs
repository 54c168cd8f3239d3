//! Train/test partitions for the authentication and intent protocols.
//!
//! Splits hold indices into a slice of window labels together with the class
//! each window takes in that split.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{Terminal, WindowLabel};

pub const TRAIN_SESSIONS: [&str; 2] = ["1", "2"];
pub const TEST_SESSION: &str = "3";
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub id: String,
    /// `(window index, positive)` pairs.
    pub train: Vec<(usize, bool)>,
    pub test: Vec<(usize, bool)>,
}

impl Split {
    pub fn positives(side: &[(usize, bool)]) -> usize {
        side.iter().filter(|(_, p)| *p).count()
    }
}

fn tap_meta(label: &WindowLabel) -> Option<(&str, &str, Terminal)> {
    match label {
        WindowLabel::Tap {
            user_id,
            session_id,
            terminal,
        } => Some((user_id, session_id, *terminal)),
        WindowLabel::NonTap { .. } => None,
    }
}

fn auth_split(
    labels: &[WindowLabel],
    target_user: &str,
    id: String,
    train_terminal: impl Fn(Terminal) -> bool,
    test_terminal: impl Fn(Terminal) -> bool,
) -> Result<Split> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let Some((user, session, terminal)) = tap_meta(label) else {
            continue;
        };
        let positive = user == target_user;
        if TRAIN_SESSIONS.contains(&session) && train_terminal(terminal) {
            train.push((i, positive));
        } else if session == TEST_SESSION && test_terminal(terminal) {
            test.push((i, positive));
        }
    }
    check_sides(&id, &train, &test)?;
    Ok(Split { id, train, test })
}

fn check_sides(id: &str, train: &[(usize, bool)], test: &[(usize, bool)]) -> Result<()> {
    let pos = Split::positives(train);
    if pos == 0 || pos == train.len() {
        return Err(Error::EmptySplit(format!("{id}: training side lacks a class")));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit(format!("{id}: test side is empty")));
    }
    Ok(())
}

/// Trains on sessions 1–2 at every terminal except `excluded`; tests on
/// session 3 at `excluded` only.
pub fn split_auth_terminal_agnostic(labels: &[WindowLabel], target_user: &str, excluded: Terminal) -> Result<Split> {
    if !excluded.is_fixed() {
        return Err(Error::InvalidConfig(format!("terminal {excluded} cannot be excluded")));
    }
    auth_split(
        labels,
        target_user,
        format!("{target_user}-x{excluded}"),
        |t| t != excluded,
        |t| t == excluded,
    )
}

/// Trains on sessions 1–2 and tests on session 3, both at `terminal` only.
pub fn split_auth_terminal_specific(labels: &[WindowLabel], target_user: &str, terminal: Terminal) -> Result<Split> {
    auth_split(
        labels,
        target_user,
        format!("{target_user}-t{terminal}"),
        |t| t == terminal,
        |t| t == terminal,
    )
}

/// Leave-one-user-out intent splits: every split trains on all other users'
/// windows (taps positive) and tests on one stratified fold of the target
/// user's windows.
///
/// The fold count is reduced to the smaller class count of the target user
/// when that is below `fold_count`.
pub fn split_intent_user_agnostic(labels: &[WindowLabel], target_user: &str, fold_count: usize) -> Result<Vec<Split>> {
    let mut train = Vec::new();
    let mut mine_pos = Vec::new();
    let mut mine_neg = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let positive = label.is_tap();
        if label.user_id() == target_user {
            if positive {
                mine_pos.push(i);
            } else {
                mine_neg.push(i);
            }
        } else {
            train.push((i, positive));
        }
    }
    let pos = Split::positives(&train);
    if pos == 0 || pos == train.len() {
        return Err(Error::EmptySplit(format!("{target_user}: other users lack a class")));
    }
    if mine_pos.is_empty() || mine_neg.is_empty() {
        return Err(Error::EmptySplit(format!("{target_user}: target user lacks a class")));
    }
    let k = fold_count.max(1).min(mine_pos.len()).min(mine_neg.len());
    let mut folds: Vec<Vec<(usize, bool)>> = vec![Vec::new(); k];
    // one running counter across both classes keeps fold sizes balanced
    for (j, (i, p)) in mine_pos
        .iter()
        .map(|&i| (i, true))
        .chain(mine_neg.iter().map(|&i| (i, false)))
        .enumerate()
    {
        folds[j % k].push((i, p));
    }
    Ok(folds
        .into_iter()
        .enumerate()
        .map(|(f, mut test)| {
            test.sort_unstable();
            Split {
                id: format!("{target_user}-k{f}"),
                train: train.clone(),
                test,
            }
        })
        .collect())
}

/// Keeps `size` positive training windows spread round-robin over the
/// terminals present, each terminal's windows taken in session then index
/// order. Negatives are untouched.
pub fn subsample_enrollment(labels: &[WindowLabel], split: &Split, size: usize) -> Result<Split> {
    let positives: Vec<usize> = split.train.iter().filter(|(_, p)| *p).map(|(i, _)| *i).collect();
    if size > positives.len() {
        return Err(Error::InsufficientEnrollment {
            requested: size,
            available: positives.len(),
        });
    }
    let mut by_terminal: BTreeMap<Option<Terminal>, Vec<(String, usize)>> = BTreeMap::new();
    for &i in &positives {
        let meta = tap_meta(&labels[i]);
        by_terminal
            .entry(meta.map(|m| m.2))
            .or_default()
            .push((meta.map(|m| m.1.to_string()).unwrap_or_default(), i));
    }
    for v in by_terminal.values_mut() {
        v.sort();
    }
    let queues: Vec<Vec<usize>> = by_terminal
        .into_values()
        .map(|v| v.into_iter().map(|(_, i)| i).collect())
        .collect();
    let mut keep = Vec::with_capacity(size);
    let mut round = 0;
    while keep.len() < size {
        for q in &queues {
            if keep.len() == size {
                break;
            }
            if let Some(&i) = q.get(round) {
                keep.push(i);
            }
        }
        round += 1;
    }
    keep.sort_unstable();
    let train = split
        .train
        .iter()
        .copied()
        .filter(|&(i, p)| !p || keep.binary_search(&i).is_ok())
        .collect();
    Ok(Split {
        id: split.id.clone(),
        train,
        test: split.test.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Activity;
    use proptest::prelude::*;

    fn tap(user: &str, session: &str, terminal: Terminal) -> WindowLabel {
        WindowLabel::Tap {
            user_id: user.into(),
            session_id: session.into(),
            terminal,
        }
    }

    fn corpus(users: usize) -> Vec<WindowLabel> {
        let mut v = Vec::new();
        for u in 0..users {
            for s in ["1", "2", "3"] {
                for t in Terminal::ALL {
                    v.push(tap(&format!("u{u}"), s, t));
                }
            }
            for a in Activity::ALL {
                for _ in 0..3 {
                    v.push(WindowLabel::NonTap { user_id: format!("u{u}"), activity: a });
                }
            }
        }
        v
    }

    #[test]
    fn ninety_six_agnostic_splits() {
        let labels = corpus(16);
        let mut n = 0;
        for u in 0..16 {
            for t in Terminal::FIXED {
                split_auth_terminal_agnostic(&labels, &format!("u{u}"), t).unwrap();
                n += 1;
            }
        }
        assert_eq!(n, 96);
    }

    #[test]
    fn excluded_terminal_absent_from_training() {
        let labels = corpus(3);
        let s = split_auth_terminal_agnostic(&labels, "u1", Terminal::Fixed(3)).unwrap();
        for (i, _) in &s.train {
            let (_, session, t) = tap_meta(&labels[*i]).unwrap();
            assert_ne!(t, Terminal::Fixed(3));
            assert_ne!(session, "3");
        }
        for (i, _) in &s.test {
            assert_eq!(tap_meta(&labels[*i]).unwrap().2, Terminal::Fixed(3));
        }
        assert!(split_auth_terminal_agnostic(&labels, "u1", Terminal::Freestyle).is_err());
    }

    #[test]
    fn specific_split_is_disjoint() {
        let labels = corpus(3);
        let s = split_auth_terminal_specific(&labels, "u0", Terminal::Freestyle).unwrap();
        assert!(s.train.iter().all(|(i, _)| !s.test.iter().any(|(j, _)| i == j)));
        assert_eq!(s.test.len(), 3);
        assert_eq!(Split::positives(&s.test), 1);
    }

    #[test]
    fn single_user_has_no_negatives() {
        let labels = corpus(1);
        assert!(matches!(
            split_auth_terminal_agnostic(&labels, "u0", Terminal::Fixed(1)),
            Err(Error::EmptySplit(_))
        ));
        assert!(matches!(split_intent_user_agnostic(&labels, "u0", 10), Err(Error::EmptySplit(_))));
    }

    #[test]
    fn intent_folds_partition_target() {
        let labels = corpus(4);
        let splits = split_intent_user_agnostic(&labels, "u2", 10).unwrap();
        // u2 has 21 taps and 12 non-taps
        assert_eq!(splits.len(), 10);
        let mut seen: Vec<usize> = splits.iter().flat_map(|s| s.test.iter().map(|t| t.0)).collect();
        seen.sort_unstable();
        let mine: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].user_id() == "u2").collect();
        assert_eq!(seen, mine);
        for s in &splits {
            assert!(s.train.iter().all(|(i, _)| labels[*i].user_id() != "u2"));
            let p = Split::positives(&s.test) as f64;
            let expected = 21.0 / 33.0 * s.test.len() as f64;
            assert!((p - expected).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn enrollment_round_robin() {
        let labels = corpus(3);
        let s = split_auth_terminal_agnostic(&labels, "u0", Terminal::Fixed(1)).unwrap();
        // six terminals remain, two sessions each
        assert_eq!(Split::positives(&s.train), 12);
        let e = subsample_enrollment(&labels, &s, 6).unwrap();
        assert_eq!(Split::positives(&e.train), 6);
        let mut terms: Vec<Terminal> = e
            .train
            .iter()
            .filter(|t| t.1)
            .map(|(i, _)| tap_meta(&labels[*i]).unwrap().2)
            .collect();
        terms.sort();
        terms.dedup();
        assert_eq!(terms.len(), 6);
        assert!(e.train.iter().filter(|t| t.1).all(|(i, _)| tap_meta(&labels[*i]).unwrap().1 == "1"));
        assert_eq!(e.train.len() - 6, s.train.len() - 12);
        assert_eq!(subsample_enrollment(&labels, &s, 12).unwrap(), s);
        assert!(matches!(
            subsample_enrollment(&labels, &s, 13),
            Err(Error::InsufficientEnrollment { requested: 13, available: 12 })
        ));
    }

    fn random_labels() -> impl Strategy<Value = Vec<WindowLabel>> {
        let label = (0u8..4, 1u8..4, 0usize..7, 0u8..5).prop_map(|(u, s, t, a)| {
            if a == 0 {
                WindowLabel::NonTap { user_id: format!("u{u}"), activity: Activity::ALL[t % 4] }
            } else {
                tap(&format!("u{u}"), &s.to_string(), Terminal::ALL[t])
            }
        });
        prop::collection::vec(label, 0..120)
    }

    proptest! {
        #[test]
        fn split_invariants(labels in random_labels(), u in 0u8..4, t in 0usize..6) {
            let user = format!("u{u}");
            if let Ok(s) = split_auth_terminal_agnostic(&labels, &user, Terminal::FIXED[t]) {
                for (i, p) in &s.train {
                    let (lu, ls, lt) = tap_meta(&labels[*i]).unwrap();
                    prop_assert!(TRAIN_SESSIONS.contains(&ls));
                    prop_assert!(lt != Terminal::FIXED[t]);
                    prop_assert_eq!(*p, lu == user);
                }
                for (i, _) in &s.test {
                    let (_, ls, lt) = tap_meta(&labels[*i]).unwrap();
                    prop_assert_eq!(ls, TEST_SESSION);
                    prop_assert_eq!(lt, Terminal::FIXED[t]);
                }
            }
            if let Ok(splits) = split_intent_user_agnostic(&labels, &user, 10) {
                for s in &splits {
                    prop_assert!(s.train.iter().all(|(i, _)| labels[*i].user_id() != user));
                    prop_assert!(s.test.iter().all(|(i, _)| labels[*i].user_id() == user));
                    prop_assert!(Split::positives(&s.test) > 0);
                    prop_assert!(Split::positives(&s.test) < s.test.len());
                }
            }
        }
    }
}
