use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::index::histogram_len;
use crate::linalg::SymmetricTensor;

/// Substring `Y` of a non-multilinear `X` whose slice `T(Y, ., .)` contains
/// `T(X)` at a position that becomes recoverable once all entries with more
/// distinct symbols are known.
///
/// * a symbol repeated at least 3 times: drop two copies of it;
/// * otherwise, two doubled symbols: drop one copy of each;
/// * otherwise exactly one doubled symbol: drop both copies (then `Y` is
///   multilinear and `T(X)` sits on the diagonal of the slice).
///
/// Ties pick the smallest symbols. The result is sorted.
pub fn parent_substring(x: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = x.to_vec();
    sorted.sort_unstable();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &s in &sorted {
        match runs.last_mut() {
            Some((sym, c)) if *sym == s => *c += 1,
            _ => runs.push((s, 1)),
        }
    }
    if runs.iter().all(|&(_, c)| c == 1) {
        return Err(Error::NoParentNeeded(sorted));
    }
    let remove: [usize; 2] = if let Some(&(s, _)) = runs.iter().find(|&&(_, c)| c >= 3) {
        [s, s]
    } else {
        let doubled: Vec<usize> = runs.iter().filter(|&&(_, c)| c == 2).map(|&(s, _)| s).collect();
        if doubled.len() >= 2 {
            [doubled[0], doubled[1]]
        } else {
            [doubled[0], doubled[0]]
        }
    };
    for r in remove {
        let pos = sorted.iter().position(|&s| s == r).expect("symbol present");
        sorted.remove(pos);
    }
    Ok(sorted)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEntry {
    pub index: Vec<usize>,
    pub parent: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleLevel {
    /// Number of distinct symbols of every entry at this level.
    pub level: usize,
    /// Missing entries at this level in lexicographic order.
    pub entries: Vec<ScheduledEntry>,
    /// Slices completed at this level, in processing order. Entries already
    /// covered by an earlier slice of the same level do not open a new one.
    pub slices: Vec<Vec<usize>>,
}

/// Order in which the missing entries of a tensor are recovered, from the
/// longest histograms (`m - 1`) down to 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionSchedule {
    pub order: usize,
    pub dim: usize,
    pub levels: Vec<ScheduleLevel>,
}

impl CompletionSchedule {
    /// Plans completion for the absent entries of `t`. Requires every
    /// multilinear entry to be present.
    pub fn plan(t: &SymmetricTensor) -> Result<Self> {
        let (m, n) = (t.order(), t.dim());
        if m >= 1 && n < m {
            return Err(Error::invalid(format!(
                "dimension {n} is below the order {m}: no multilinear entries exist"
            )));
        }
        let mut by_level: Vec<Vec<Vec<usize>>> = vec![Vec::new(); m + 1];
        for (idx, v) in t.entries() {
            let l = histogram_len(&idx);
            if l == m {
                if v.is_none() {
                    return Err(Error::invalid(format!("multilinear entry {idx:?} is absent")));
                }
                continue;
            }
            if v.is_none() {
                by_level[l].push(idx);
            }
        }

        let mut levels = Vec::new();
        for level in (1..m).rev() {
            let mut entries = Vec::with_capacity(by_level[level].len());
            let mut slices: Vec<Vec<usize>> = Vec::new();
            let mut covered = std::collections::HashSet::new();
            for idx in by_level[level].drain(..) {
                let parent = parent_substring(&idx)?;
                if !covered.contains(&idx) {
                    for member in slice_block(&parent, level, m, n) {
                        covered.insert(member);
                    }
                    slices.push(parent.clone());
                }
                entries.push(ScheduledEntry { index: idx, parent });
            }
            levels.push(ScheduleLevel {
                level,
                entries,
                slices,
            });
        }
        Ok(Self {
            order: m,
            dim: n,
            levels,
        })
    }

    pub fn slice_count(&self) -> usize {
        self.levels.iter().map(|l| l.slices.len()).sum()
    }

    pub fn entry_count(&self) -> usize {
        self.levels.iter().map(|l| l.entries.len()).sum()
    }
}

/// Sorted indices at histogram length `level` inside the slice of `parent`.
/// For the top level (`parent` multilinear) these are the diagonal entries
/// `Y . a . a` with `a` outside `Y`; below it, `Y . a . b` with `a, b` drawn
/// from the symbols of `Y`. Indices are returned whether or not they are
/// missing.
pub(crate) fn slice_block(parent: &[usize], level: usize, order: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut symbols = parent.to_vec();
    symbols.dedup();
    let mut out = Vec::new();
    if level + 1 == order {
        for a in (0..dim).filter(|a| !symbols.contains(a)) {
            let mut idx = parent.to_vec();
            idx.extend([a, a]);
            idx.sort_unstable();
            out.push(idx);
        }
        return out;
    }
    for (i, &a) in symbols.iter().enumerate() {
        for &b in &symbols[i..] {
            let mut idx = parent.to_vec();
            idx.push(a);
            idx.push(b);
            idx.sort_unstable();
            out.push(idx);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::index::{binomial, is_multilinear};

    #[test]
    fn parent_examples() {
        assert_eq!(parent_substring(&[1, 1, 1, 2]).unwrap(), vec![1, 2]);
        assert_eq!(parent_substring(&[1, 1, 2, 2]).unwrap(), vec![1, 2]);
        assert_eq!(parent_substring(&[3, 3, 5]).unwrap(), vec![5]);
        assert_eq!(parent_substring(&[4, 4, 4, 4]).unwrap(), vec![4, 4]);
        assert_eq!(parent_substring(&[2, 0, 2, 0, 1, 1]).unwrap(), vec![0, 1, 2, 2]);
        assert!(matches!(parent_substring(&[0, 1, 2]), Err(Error::NoParentNeeded(_))));
    }

    #[test]
    fn parent_of_diagonal_entry_contains_it_on_the_slice_diagonal() {
        // The slice T(Y, ., .) holds T(X) at (a, a) for X = Y . a . a.
        let x = [3, 3, 5];
        let y = parent_substring(&x).unwrap();
        let mut rebuilt = y.clone();
        rebuilt.extend([3, 3]);
        rebuilt.sort_unstable();
        assert_eq!(rebuilt, x);
    }

    fn multilinear_only(order: usize, dim: usize) -> SymmetricTensor {
        let mut t = SymmetricTensor::from_fn(order, dim, |_| 1.0);
        t.retain(is_multilinear);
        t
    }

    #[test]
    fn schedule_covers_every_non_multilinear_index_once() {
        for (m, n) in [(2, 4), (3, 5), (4, 6), (5, 6)] {
            let t = multilinear_only(m, n);
            let s = CompletionSchedule::plan(&t).unwrap();
            let mut seen = std::collections::HashSet::new();
            for level in &s.levels {
                for e in &level.entries {
                    assert_eq!(histogram_len(&e.index), level.level);
                    assert!(seen.insert(e.index.clone()), "duplicate {:?}", e.index);
                    if level.level + 1 == m {
                        assert!(is_multilinear(&e.parent));
                    } else {
                        assert_eq!(histogram_len(&e.parent), level.level);
                    }
                }
            }
            let non_multilinear = t.canonical_indices().filter(|i| !is_multilinear(i)).count();
            assert_eq!(seen.len(), non_multilinear);
            // at most one reduced slice per multilinear string of length m - 2
            // and one full slice per sorted string of length m - 2
            let bound = binomial(n, m - 2) + binomial(n + m - 3, m - 2);
            assert!(s.slice_count() as u64 <= bound);
            if m >= 4 {
                assert!(s.slice_count() <= n.pow(m as u32 - 2));
            }
            // each scheduled entry lies in the block of some slice of its level
            for level in &s.levels {
                let blocks: std::collections::HashSet<Vec<usize>> = level
                    .slices
                    .iter()
                    .flat_map(|y| slice_block(y, level.level, m, n))
                    .collect();
                assert!(level.entries.iter().all(|e| blocks.contains(&e.index)));
            }
        }
    }

    #[test]
    fn order_three_uses_one_slice_per_symbol() {
        let s = CompletionSchedule::plan(&multilinear_only(3, 6)).unwrap();
        // level 2: X = (a, a, b), one reduced slice per b
        assert_eq!(s.levels[0].slices.len(), 6);
        // level 1: X = (a, a, a) from slice (a), again one per symbol
        assert_eq!(s.levels[1].slices.len(), 6);
        assert_eq!(s.slice_count(), 12);
    }

    #[test]
    fn order_two_schedule_is_one_completion() {
        let s = CompletionSchedule::plan(&multilinear_only(2, 5)).unwrap();
        assert_eq!(s.levels.len(), 1);
        assert_eq!(s.levels[0].slices, vec![Vec::<usize>::new()]);
        assert_eq!(s.levels[0].entries.len(), 5);
    }

    #[test]
    fn plan_rejects_missing_multilinear_entries_and_tiny_dimensions() {
        let t = SymmetricTensor::empty(3, 4);
        assert!(CompletionSchedule::plan(&t).is_err());
        let t = SymmetricTensor::empty(4, 3);
        assert!(CompletionSchedule::plan(&t).is_err());
    }
}
