//! Finite words over the alphabet `{1, ..., N}`.
//!
//! Symbols are 1-based at every interface. Lexicographic positions are also
//! 1-based: over `N = 2` the word `11` has index 1 and `22` has index 4.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default cap on the number of terms any exhaustive enumeration may visit.
pub const DEFAULT_MAX_TERMS: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet(u32);

impl Alphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("alphabet size must be at least 2, got {size}")));
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> u32 {
        self.0
    }

    /// Number of words of length `n`, or `None` on u64 overflow.
    pub fn word_count(self, n: usize) -> Option<u64> {
        (self.0 as u64).checked_pow(u32::try_from(n).ok()?)
    }
}

/// Guard on exhaustive word-space work: `N^n` must not exceed `max_terms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_terms: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

impl Budget {
    pub fn new(max_terms: u64) -> Self {
        Budget { max_terms }
    }

    /// Checks that `count` terms fit. `count` is a float so callers can pass
    /// sizes that overflow integer types.
    pub fn check_terms(&self, count: f64, what: &str) -> Result<()> {
        if count > self.max_terms as f64 {
            return Err(Error::ResourceLimit {
                what: what.to_string(),
                requested: count,
                budget: self.max_terms,
            });
        }
        Ok(())
    }

    pub fn check_words(&self, alphabet: Alphabet, n: usize, what: &str) -> Result<()> {
        self.check_terms((alphabet.size() as f64).powi(n as i32), what)
    }
}

/// A nonempty word over `{1, ..., N}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    symbols: Vec<u32>,
    alphabet: Alphabet,
}

impl Word {
    pub fn new(symbols: Vec<u32>, alphabet: Alphabet) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("words must be nonempty"));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s == 0 || s > alphabet.size()) {
            return Err(Error::invalid(format!(
                "symbol {bad} outside alphabet {{1..{}}}",
                alphabet.size()
            )));
        }
        Ok(Word { symbols, alphabet })
    }

    /// Convenience constructor; panics on invalid input. Intended for tests
    /// and literals.
    pub fn from_symbols(symbols: &[u32], alphabet_size: u32) -> Self {
        Word::new(symbols.to_vec(), Alphabet::new(alphabet_size).expect("alphabet"))
            .expect("valid word")
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parses digit strings (`"1221"`, only for `N <= 9`) or comma-separated
    /// integers (`"1,12,3"`).
    pub fn parse(text: &str, alphabet: Alphabet) -> Result<Self> {
        let text = text.trim();
        let symbols = if text.contains(',') || alphabet.size() > 9 {
            text.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::invalid(format!("bad symbol {t:?} in word {text:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            text.chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| Error::invalid(format!("bad symbol {c:?} in word {text:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Word::new(symbols, alphabet)
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.alphabet != other.alphabet {
            return Err(Error::invalid(format!(
                "alphabet mismatch: {} vs {}",
                self.alphabet.size(),
                other.alphabet.size()
            )));
        }
        let mut symbols = Vec::with_capacity(self.len() + other.len());
        symbols.extend_from_slice(&self.symbols);
        symbols.extend_from_slice(&other.symbols);
        Ok(Word {
            symbols,
            alphabet: self.alphabet,
        })
    }

    pub fn power(&self, n: usize) -> Result<Word> {
        if n == 0 {
            return Err(Error::invalid("word powers start at 1"));
        }
        Ok(Word {
            symbols: self.symbols.repeat(n),
            alphabet: self.alphabet,
        })
    }

    /// 1-based position of the word among all words of its length in
    /// lexicographic order.
    pub fn lex_index(&self) -> u64 {
        let n = self.alphabet.size() as u64;
        self.symbols
            .iter()
            .fold(0u64, |acc, &s| acc * n + (s as u64 - 1))
            + 1
    }

    /// The 0-based lexicographic rank, convenient for array indexing.
    pub(crate) fn rank(&self) -> usize {
        (self.lex_index() - 1) as usize
    }

    /// Drops the first `k` symbols. Returns `None` if nothing would remain.
    pub fn drop_prefix(&self, k: usize) -> Option<Word> {
        if k >= self.len() {
            return None;
        }
        Some(Word {
            symbols: self.symbols[k..].to_vec(),
            alphabet: self.alphabet,
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alphabet.size() <= 9 {
            for s in &self.symbols {
                write!(f, "{s}")?;
            }
        } else {
            for (t, s) in self.symbols.iter().enumerate() {
                if t > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{s}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::invalid(format!("bad alphabet size {s:?}")))?;
        Alphabet::new(n)
    }
}

/// Inverse of [`Word::lex_index`].
pub fn lex_inverse(index: u64, alphabet: Alphabet, n: usize) -> Result<Word> {
    if n == 0 {
        return Err(Error::invalid("word length must be at least 1"));
    }
    let total = alphabet
        .word_count(n)
        .ok_or_else(|| Error::invalid("word space too large to index"))?;
    if index == 0 || index > total {
        return Err(Error::invalid(format!("index {index} outside [1, {total}]")));
    }
    Ok(word_from_rank(index - 1, alphabet, n))
}

pub(crate) fn word_from_rank(mut rank: u64, alphabet: Alphabet, n: usize) -> Word {
    let base = alphabet.size() as u64;
    let mut symbols = vec![0u32; n];
    for slot in symbols.iter_mut().rev() {
        *slot = (rank % base) as u32 + 1;
        rank /= base;
    }
    Word { symbols, alphabet }
}

/// Streams all `N^n` words of length `n` in lexicographic order.
pub fn enumerate_words(alphabet: Alphabet, n: usize, budget: &Budget) -> Result<WordIter> {
    if n == 0 {
        return Err(Error::invalid("word length must be at least 1"));
    }
    budget.check_words(alphabet, n, "word enumeration")?;
    Ok(WordIter {
        next: Some(vec![1; n]),
        alphabet,
        frozen: 0,
    })
}

/// Streams the words of length `n` that start with `prefix`, in lexicographic
/// order. Disjoint prefixes partition the word space.
pub fn enumerate_with_prefix(prefix: &Word, n: usize, budget: &Budget) -> Result<WordIter> {
    if n < prefix.len() {
        return Err(Error::invalid("prefix longer than requested word length"));
    }
    budget.check_words(prefix.alphabet(), n - prefix.len(), "word enumeration")?;
    let mut start = prefix.symbols.clone();
    start.resize(n, 1);
    Ok(WordIter {
        next: Some(start),
        alphabet: prefix.alphabet,
        frozen: prefix.len(),
    })
}

#[derive(Debug, Clone)]
pub struct WordIter {
    next: Option<Vec<u32>>,
    alphabet: Alphabet,
    // leading symbols that never change
    frozen: usize,
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let current = self.next.take()?;
        let top = self.alphabet.size();
        let mut succ = current.clone();
        let mut pos = succ.len();
        while pos > self.frozen {
            pos -= 1;
            if succ[pos] < top {
                succ[pos] += 1;
                self.next = Some(succ);
                break;
            }
            succ[pos] = 1;
        }
        Some(Word {
            symbols: current,
            alphabet: self.alphabet,
        })
    }
}

/// Block-recodes `w` over `N` into a word over `N^n`: the q-th output symbol is
/// the lexicographic index of the q-th length-`n` block.
pub fn recode_word(w: &Word, n: usize) -> Result<Word> {
    if n == 0 || !w.len().is_multiple_of(n) {
        return Err(Error::invalid(format!(
            "block length {n} does not divide word length {}",
            w.len()
        )));
    }
    let big = w
        .alphabet
        .word_count(n)
        .and_then(|c| u32::try_from(c).ok())
        .ok_or_else(|| Error::invalid("recoded alphabet too large"))?;
    let alphabet = Alphabet::new(big)?;
    let symbols = w
        .symbols
        .chunks(n)
        .map(|block| {
            Word {
                symbols: block.to_vec(),
                alphabet: w.alphabet,
            }
            .lex_index() as u32
        })
        .collect();
    Ok(Word { symbols, alphabet })
}
