//! Simulated distributed layout: row ownership of `A`, ownership of the
//! Lagrange multipliers, and the communication that layout would cost.
//!
//! Multipliers are assigned by a sequential greedy sweep: multiplier `l`
//! goes to the process with the fewest multipliers so far among those that
//! own a row touched by column `l` of `B`, ties to the lowest index.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct RowPartition {
    pub n_procs: usize,
    pub owner_of_row: Vec<usize>,
    pub contiguous: bool,
    /// Rows moved by the refinement pass (0 when not requested).
    pub refined_moves: usize,
}

impl RowPartition {
    pub fn rows_per_proc(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_procs];
        for &o in &self.owner_of_row {
            c[o] += 1;
        }
        c
    }
}

/// Contiguous blocks; the first `n mod p` blocks get one extra row.
pub fn partition_rows(a: &SparseMatrix, n_procs: usize) -> Result<RowPartition> {
    let n = a.n_rows();
    if n_procs == 0 || n_procs > n {
        return Err(Error::InvalidParameter(format!(
            "n_procs must lie in [1, {n}], got {n_procs}"
        )));
    }
    let (base, extra) = (n / n_procs, n % n_procs);
    let mut owner = Vec::with_capacity(n);
    for p in 0..n_procs {
        let size = base + usize::from(p < extra);
        owner.extend(std::iter::repeat(p).take(size));
    }
    Ok(RowPartition {
        n_procs,
        owner_of_row: owner,
        contiguous: true,
        refined_moves: 0,
    })
}

/// Edges of the pattern of `a` whose endpoints have different owners.
pub fn edge_cut(a: &SparseMatrix, owner: &[usize]) -> usize {
    (0..a.n_rows())
        .flat_map(|i| a.row_cols(i).iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| i < j && owner[i] != owner[j])
        .count()
}

/// One greedy pass: a row moves to the neighbouring process holding most of
/// its neighbours when that strictly lowers its cut edges and keeps every
/// process within `⌈n/p⌉ + 1` rows and non-empty.
pub fn refine_partition(a: &SparseMatrix, rp: &RowPartition) -> RowPartition {
    let n = a.n_rows();
    let cap = n.div_ceil(rp.n_procs) + 1;
    let mut owner = rp.owner_of_row.clone();
    let mut sizes = rp.rows_per_proc();
    let mut moves = 0;
    for i in 0..n {
        let mut tally = vec![0usize; rp.n_procs];
        for &j in a.row_cols(i) {
            if j != i {
                tally[owner[j]] += 1;
            }
        }
        let cur = owner[i];
        let (best, &best_count) = tally
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
            .expect("n_procs >= 1");
        if best != cur && best_count > tally[cur] && sizes[best] < cap && sizes[cur] > 1 {
            sizes[cur] -= 1;
            sizes[best] += 1;
            owner[i] = best;
            moves += 1;
        }
    }
    RowPartition {
        n_procs: rp.n_procs,
        contiguous: moves == 0 && rp.contiguous,
        owner_of_row: owner,
        refined_moves: rp.refined_moves + moves,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MultiplierAssignment {
    pub owner_of_mult: Vec<usize>,
    pub counts: Vec<usize>,
    /// Produced by the per-chunk concurrent variant, not the sequential
    /// sweep.
    pub non_normative: bool,
}

impl MultiplierAssignment {
    /// CSV with header `multiplier_id,owner`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("multiplier_id,owner\n");
        for (l, o) in self.owner_of_mult.iter().enumerate() {
            let _ = writeln!(s, "{l},{o}");
        }
        s
    }
}

fn candidates(cols: &[Vec<usize>], rp: &RowPartition) -> Result<Vec<BTreeSet<usize>>> {
    cols.iter()
        .enumerate()
        .map(|(l, rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyColumn(l));
            }
            Ok(rows.iter().map(|&j| rp.owner_of_row[j]).collect())
        })
        .collect()
}

fn check_rows(b: &SparseMatrix, rp: &RowPartition) -> Result<()> {
    if rp.owner_of_row.len() != b.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "assign_multipliers",
            expected: b.n_rows(),
            got: rp.owner_of_row.len(),
        });
    }
    Ok(())
}

pub fn assign_multipliers(b: &SparseMatrix, rp: &RowPartition) -> Result<MultiplierAssignment> {
    check_rows(b, rp)?;
    let cand = candidates(&b.column_patterns(), rp)?;
    let mut counts = vec![0; rp.n_procs];
    let mut owner = Vec::with_capacity(cand.len());
    for c in &cand {
        let p = *c
            .iter()
            .min_by_key(|&&p| (counts[p], p))
            .expect("non-empty candidate set");
        counts[p] += 1;
        owner.push(p);
    }
    Ok(MultiplierAssignment {
        owner_of_mult: owner,
        counts,
        non_normative: false,
    })
}

/// Per-chunk variant: each process sweeps, in order, the multipliers whose
/// first nonzero row it owns, balancing only against its own tallies and
/// those of earlier processes. Results differ from the sequential sweep.
pub fn assign_multipliers_concurrent(
    b: &SparseMatrix,
    rp: &RowPartition,
) -> Result<MultiplierAssignment> {
    check_rows(b, rp)?;
    let cols = b.column_patterns();
    let cand = candidates(&cols, rp)?;
    let mut counts = vec![0; rp.n_procs];
    let mut owner = vec![0; cand.len()];
    for chunk in 0..rp.n_procs {
        // snapshot: a chunk sees only counts published before it started
        let seen = counts.clone();
        let mut local = vec![0; rp.n_procs];
        for (l, c) in cand.iter().enumerate() {
            if rp.owner_of_row[cols[l][0]] != chunk {
                continue;
            }
            let p = *c
                .iter()
                .min_by_key(|&&p| (seen[p] + local[p], p))
                .expect("non-empty candidate set");
            local[p] += 1;
            owner[l] = p;
        }
        for (c, x) in counts.iter_mut().zip(local) {
            *c += x;
        }
    }
    Ok(MultiplierAssignment {
        owner_of_mult: owner,
        counts,
        non_normative: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CommVolume {
    pub rows_exchanged: usize,
    pub balance_ratio: f64,
}

/// Distinct `(row, destination)` pairs where a multiplier's owner needs a
/// row of `A` held elsewhere; balance over processes that were candidates
/// for some multiplier.
pub fn comm_volume(
    b: &SparseMatrix,
    rp: &RowPartition,
    ma: &MultiplierAssignment,
) -> Result<CommVolume> {
    check_rows(b, rp)?;
    let cols = b.column_patterns();
    let mut pairs = BTreeSet::new();
    let mut is_candidate = vec![false; rp.n_procs];
    for (l, rows) in cols.iter().enumerate() {
        let dest = ma.owner_of_mult[l];
        for &j in rows {
            is_candidate[rp.owner_of_row[j]] = true;
            if rp.owner_of_row[j] != dest {
                pairs.insert((j, dest));
            }
        }
    }
    let active: Vec<usize> = (0..rp.n_procs)
        .filter(|&p| is_candidate[p])
        .map(|p| ma.counts[p])
        .collect();
    let max = active.iter().copied().max().unwrap_or(0);
    let min = active.iter().copied().min().unwrap_or(0);
    Ok(CommVolume {
        rows_exchanged: pairs.len(),
        balance_ratio: max as f64 / min.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> SparseMatrix {
        SparseMatrix::identity(n)
    }

    #[test]
    fn even_and_remainder_splits() {
        let rp = partition_rows(&rows(10), 2).unwrap();
        assert_eq!(rp.owner_of_row, [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(partition_rows(&rows(10), 3).unwrap().rows_per_proc(), [4, 3, 3]);
        assert!(partition_rows(&rows(10), 1).unwrap().owner_of_row.iter().all(|&o| o == 0));
        assert!(partition_rows(&rows(3), 4).is_err());
    }

    #[test]
    fn alternating_greedy() {
        // 4 rows on 2 procs; every column touches rows 1 (proc 0) and 2 (proc 1)
        let t: Vec<_> = (0..4).flat_map(|l| [(1, l, 1.0), (2, l, -1.0)]).collect();
        let b = SparseMatrix::from_triplets(4, 4, &t).unwrap();
        let rp = partition_rows(&rows(4), 2).unwrap();
        let ma = assign_multipliers(&b, &rp).unwrap();
        assert_eq!(ma.owner_of_mult, [0, 1, 0, 1]);
        assert_eq!(ma.counts, [2, 2]);
    }

    #[test]
    fn no_choice_and_single_proc() {
        let t: Vec<_> = (0..3).map(|l| (0, l, 1.0)).collect();
        let b = SparseMatrix::from_triplets(4, 3, &t).unwrap();
        let rp = partition_rows(&rows(4), 2).unwrap();
        let ma = assign_multipliers(&b, &rp).unwrap();
        assert_eq!(ma.counts, [3, 0]);
        assert_eq!(comm_volume(&b, &rp, &ma).unwrap().rows_exchanged, 0);
        let rp1 = partition_rows(&rows(4), 1).unwrap();
        assert_eq!(assign_multipliers(&b, &rp1).unwrap().counts, [3]);
    }

    #[test]
    fn single_remote_row() {
        // one multiplier on rows 0 (proc 0) and 3 (proc 1): owner 0, row 3 remote
        let b = SparseMatrix::from_triplets(4, 1, &[(0, 0, 1.0), (3, 0, -1.0)]).unwrap();
        let rp = partition_rows(&rows(4), 2).unwrap();
        let ma = assign_multipliers(&b, &rp).unwrap();
        assert_eq!(comm_volume(&b, &rp, &ma).unwrap().rows_exchanged, 1);
    }

    #[test]
    fn empty_column_rejected() {
        let b = SparseMatrix::from_triplets(4, 2, &[(0, 0, 1.0)]).unwrap();
        let rp = partition_rows(&rows(4), 2).unwrap();
        assert!(matches!(assign_multipliers(&b, &rp), Err(Error::EmptyColumn(1))));
    }

    #[test]
    fn refinement_reduces_cut() {
        // path graph with an interleaved initial owner map
        let mut t = Vec::new();
        for i in 0..8 {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(8, 8, &t).unwrap();
        let rp = RowPartition {
            n_procs: 2,
            owner_of_row: vec![0, 0, 0, 1, 0, 1, 1, 1],
            contiguous: false,
            refined_moves: 0,
        };
        let r = refine_partition(&a, &rp);
        assert!(edge_cut(&a, &r.owner_of_row) < edge_cut(&a, &rp.owner_of_row));
    }

    #[test]
    fn concurrent_variant_is_flagged() {
        let t: Vec<_> = (0..4).flat_map(|l| [(1, l, 1.0), (2, l, -1.0)]).collect();
        let b = SparseMatrix::from_triplets(4, 4, &t).unwrap();
        let rp = partition_rows(&rows(4), 2).unwrap();
        let ma = assign_multipliers_concurrent(&b, &rp).unwrap();
        assert!(ma.non_normative);
        assert_eq!(ma.counts.iter().sum::<usize>(), 4);
    }
}
