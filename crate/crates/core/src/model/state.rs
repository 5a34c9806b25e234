use std::fmt;

use super::VariableId;

const WORD_BITS: usize = 64;

/// Assignment of the domain's binary variables, stored as the set of
/// variables that are true.
///
/// The bitset always has `ceil(L / 64)` words for a domain with `L`
/// variables, so equality and hashing are canonical within a domain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkillState {
    words: Box<[u64]>,
}

impl SkillState {
    pub fn empty(num_vars: usize) -> Self {
        let n = num_vars.div_ceil(WORD_BITS);
        SkillState {
            words: vec![0; n].into_boxed_slice(),
        }
    }

    /// Panics if any variable is out of range for `num_vars`.
    pub fn from_vars<I>(num_vars: usize, vars: I) -> Self
    where
        I: IntoIterator<Item = VariableId>,
    {
        let mut s = Self::empty(num_vars);
        for v in vars {
            assert!(v < num_vars, "variable {v} out of range for {num_vars} variables");
            s.insert(v);
        }
        s
    }

    /// Every variable in `0..num_vars` set.
    pub fn full(num_vars: usize) -> Self {
        Self::from_vars(num_vars, 0..num_vars)
    }

    /// True iff this state belongs to a domain with `num_vars` variables.
    pub fn fits(&self, num_vars: usize) -> bool {
        self.words.len() == num_vars.div_ceil(WORD_BITS) && self.iter().all(|v| v < num_vars)
    }

    #[inline]
    pub fn contains(&self, v: VariableId) -> bool {
        self.words
            .get(v / WORD_BITS)
            .is_some_and(|w| w & (1u64 << (v % WORD_BITS)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, v: VariableId) {
        self.words[v / WORD_BITS] |= 1u64 << (v % WORD_BITS);
    }

    /// Copy of `self` with `v` also true.
    pub fn with(&self, v: VariableId) -> Self {
        let mut s = self.clone();
        s.insert(v);
        s
    }

    /// Number of true variables.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &SkillState) -> bool {
        self.words
            .iter()
            .zip(other.words.iter().chain(std::iter::repeat(&0)))
            .all(|(a, b)| a & !b == 0)
    }

    /// True variables in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * WORD_BITS + bit)
            })
        })
    }

    /// Variables true in `self` but not in `other`.
    pub fn difference<'a>(&'a self, other: &'a SkillState) -> impl Iterator<Item = VariableId> + 'a {
        self.iter().filter(move |&v| !other.contains(v))
    }
}

impl fmt::Display for SkillState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for SkillState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Serialized as the ascending list of true variables.
impl serde::Serialize for SkillState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}
