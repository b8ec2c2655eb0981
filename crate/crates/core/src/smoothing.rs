//! Good-Turing count adjustment shared by the rule table and the language
//! model.

use alloc::collections::BTreeMap;

/// `N_c`: how many types were seen exactly `c` times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountOfCounts(BTreeMap<u64, u64>);

impl CountOfCounts {
    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Self {
        let mut m = BTreeMap::new();
        for c in counts {
            *m.entry(c).or_insert(0) += 1;
        }
        CountOfCounts(m)
    }

    pub fn n(&self, c: u64) -> u64 {
        self.0.get(&c).copied().unwrap_or(0)
    }

    /// `c* = (c+1) N_{c+1} / N_c`, or `c` itself when `N_{c+1}` or `N_c` is
    /// zero.
    pub fn adjusted(&self, c: u64) -> f64 {
        let nc = self.n(c);
        let next = self.n(c + 1);
        if nc == 0 || next == 0 {
            c as f64
        } else {
            (c + 1) as f64 * next as f64 / nc as f64
        }
    }
}

/// Good-Turing adjusted counts, one per input count.
pub fn good_turing_adjust(counts: &[u64]) -> alloc::vec::Vec<f64> {
    let coc = CountOfCounts::from_counts(counts.iter().copied());
    counts.iter().map(|&c| coc.adjusted(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        // {a:1, b:1, c:2}: N1=2, N2=1
        let adj = good_turing_adjust(&[1, 1, 2]);
        assert_eq!(adj, [1.0, 1.0, 2.0]);
        // all equal, no higher count: unchanged
        assert_eq!(good_turing_adjust(&[3, 3, 3]), [3.0, 3.0, 3.0]);
        assert_eq!(good_turing_adjust(&[1]), [1.0]);
        // N1=4, N2=1 -> c*(1) = 2 * 1/4
        assert_eq!(good_turing_adjust(&[1, 1, 1, 1, 2])[0], 0.5);
    }
}
