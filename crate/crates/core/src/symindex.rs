//! Indexing of lattice offsets modulo the hyperoctahedral group.
//!
//! Kernels of functions of `h0` are invariant under coordinate permutations
//! and sign flips, so a table over `[-L, L]^d` only needs the nondecreasing
//! tuples `0 <= a_1 <= ... <= a_d <= L`. Tuples are ranked with the
//! combinatorial number system on `b_j = a_j + j`.

#[derive(Clone, Debug)]
pub struct SymIndex {
    d: usize,
    radius: i64,
    binom: Vec<Vec<usize>>,
    count: usize,
}

impl SymIndex {
    pub fn new(d: usize, radius: i64) -> Self {
        assert!(d >= 1 && radius >= 0);
        let top = radius as usize + d + 1;
        let mut binom = vec![vec![0usize; d + 2]; top + 1];
        for n in 0..=top {
            binom[n][0] = 1;
            for k in 1..=(d + 1).min(n) {
                binom[n][k] = binom[n - 1][k - 1] + if k <= n - 1 { binom[n - 1][k] } else { 0 };
            }
        }
        let count = binom[radius as usize + d][d];
        SymIndex { d, radius, binom, count }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Number of orbit representatives.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Rank of an arbitrary offset, `None` outside the box.
    pub fn rank(&self, x: &[i64]) -> Option<usize> {
        debug_assert_eq!(x.len(), self.d);
        let mut a = [0i64; 16];
        let a = if self.d <= 16 {
            for (k, &c) in x.iter().enumerate() {
                a[k] = c.abs();
            }
            &mut a[..self.d]
        } else {
            unreachable!("dimension above 16 not supported")
        };
        a.sort_unstable();
        if a[self.d - 1] > self.radius {
            return None;
        }
        Some(self.rank_sorted(a))
    }

    /// Rank of a nondecreasing tuple of nonnegative entries.
    pub fn rank_sorted(&self, a: &[i64]) -> usize {
        let mut idx = 0;
        for (j, &aj) in a.iter().enumerate() {
            idx += self.binom[aj as usize + j][j + 1];
        }
        idx
    }

    /// All representatives, listed in rank order.
    pub fn representatives(&self) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::new(); self.count];
        let mut a = vec![0i64; self.d];
        loop {
            let r = self.rank_sorted(&a);
            out[r] = a.clone();
            // next nondecreasing tuple, first coordinate varying fastest
            let mut k = 0;
            loop {
                if k == self.d {
                    return out;
                }
                let cap = if k + 1 < self.d { a[k + 1] } else { self.radius };
                if a[k] < cap {
                    a[k] += 1;
                    for m in 0..k {
                        a[m] = 0;
                    }
                    break;
                }
                k += 1;
            }
        }
    }

    /// Size of the orbit of a representative under permutations and sign flips.
    pub fn orbit_size(a: &[i64]) -> usize {
        let d = a.len();
        let mut size: usize = (1..=d).product();
        let mut run = 1;
        for k in 1..=d {
            if k < d && a[k] == a[k - 1] {
                run += 1;
            } else {
                size /= (1..=run).product::<usize>();
                run = 1;
            }
        }
        let nonzero = a.iter().filter(|&&c| c != 0).count();
        size << nonzero
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ranks_are_a_bijection() {
        for d in 1..=5 {
            for radius in [0i64, 1, 3, 6] {
                let s = SymIndex::new(d, radius);
                let reps = s.representatives();
                assert_eq!(reps.len(), s.len());
                let mut seen = HashSet::new();
                for (i, a) in reps.iter().enumerate() {
                    assert!(a.windows(2).all(|w| w[0] <= w[1]));
                    assert_eq!(s.rank_sorted(a), i);
                    assert!(seen.insert(a.clone()));
                }
            }
        }
    }

    #[test]
    fn orbits_tile_the_box() {
        for d in 1..=4 {
            let radius = 3;
            let s = SymIndex::new(d, radius);
            let total: usize = s.representatives().iter().map(|a| SymIndex::orbit_size(a)).sum();
            assert_eq!(total, (2 * radius as usize + 1).pow(d as u32));
        }
    }

    #[test]
    fn symmetric_offsets_share_rank() {
        let s = SymIndex::new(3, 5);
        assert_eq!(s.rank(&[1, 0, 0]), s.rank(&[0, -1, 0]));
        assert_eq!(s.rank(&[2, -3, 1]), s.rank(&[-3, 1, -2]));
        assert_eq!(s.rank(&[6, 0, 0]), None);
    }
}
