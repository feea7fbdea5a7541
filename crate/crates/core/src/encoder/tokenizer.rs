//! Byte-level BPE with a leading-space word marker.
//!
//! Every word of a normalized title is encoded as `" " + word`; ids
//! `0..256` are raw bytes, so any input can be tokenized, and id `256 + r`
//! is the unit produced by merge rank `r`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::corpus::normalize_title;
use crate::error::{Error, Result};

pub const BYTE_UNITS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    merges: Vec<(u32, u32)>,
    ranks: HashMap<(u32, u32), u32>,
    units: Vec<Vec<u8>>,
}

type Pair = (u32, u32);

impl Tokenizer {
    /// Rebuilds a tokenizer from its ordered merge list.
    pub fn from_merges(merges: Vec<(u32, u32)>) -> Result<Self> {
        let mut units: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut ranks = HashMap::with_capacity(merges.len());
        for (r, &(a, b)) in merges.iter().enumerate() {
            let next = units.len() as u32;
            if a >= next || b >= next {
                return Err(Error::Format(format!("merge {r} references unit beyond {next}")));
            }
            if ranks.insert((a, b), r as u32).is_some() {
                return Err(Error::Format(format!("merge {r} repeats pair ({a}, {b})")));
            }
            let mut unit = units[a as usize].clone();
            unit.extend_from_slice(&units[b as usize]);
            units.push(unit);
        }
        Ok(Tokenizer { merges, ranks, units })
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Number of units; ids are dense in `0..vocab_size()`.
    pub fn vocab_size(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, id: u32) -> Option<&[u8]> {
        self.units.get(id as usize).map(Vec::as_slice)
    }

    /// Normalizes `text` and splits it into unit ids. Empty only when the
    /// normalized text is empty.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let norm = normalize_title(text);
        let mut out = Vec::new();
        for word in norm.split(' ').filter(|w| !w.is_empty()) {
            self.encode_word(word, &mut out);
        }
        out
    }

    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        let mut syms: Vec<u32> = std::iter::once(b' ').chain(word.bytes()).map(u32::from).collect();
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&r| (r, (w[0], w[1]))))
                .min();
            let Some((rank, pair)) = best else { break };
            merge_pair(&mut syms, pair, BYTE_UNITS as u32 + rank);
        }
        out.extend(syms);
    }

    /// Inverse of [`Tokenizer::tokenize`] on its output.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut bytes = Vec::new();
        for &id in ids {
            if let Some(u) = self.units.get(id as usize) {
                bytes.extend_from_slice(u);
            }
        }
        let s = String::from_utf8_lossy(&bytes);
        s.strip_prefix(' ').unwrap_or(&s).to_string()
    }
}

fn merge_pair(syms: &mut Vec<u32>, pair: Pair, new_id: u32) {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
            out.push(new_id);
            i += 2;
        } else {
            out.push(syms[i]);
            i += 1;
        }
    }
    *syms = out;
}

/// Learns up to `vocab_size - 256` merges from `titles`.
///
/// The most frequent adjacent pair is merged first; ties go to the
/// smallest pair. Pairs seen fewer than twice are never merged.
pub fn train_tokenizer<I, S>(titles: I, vocab_size: usize) -> Result<Tokenizer>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if vocab_size <= BYTE_UNITS {
        return Err(Error::Config(format!(
            "tokenizer vocab_size must be at least {}, got {vocab_size}",
            BYTE_UNITS + 1
        )));
    }
    let mut word_ids: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<(Vec<u32>, i64)> = Vec::new();
    let mut n_titles = 0;
    for t in titles {
        n_titles += 1;
        for w in normalize_title(t.as_ref()).split(' ').filter(|w| !w.is_empty()) {
            let idx = *word_ids.entry(w.to_string()).or_insert_with(|| {
                let syms = std::iter::once(b' ').chain(w.bytes()).map(u32::from).collect();
                words.push((syms, 0));
                words.len() - 1
            });
            words[idx].1 += 1;
        }
    }
    if n_titles == 0 {
        return Err(Error::Invalid("tokenizer needs at least one title".into()));
    }

    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (i, (syms, c)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let p = (w[0], w[1]);
            *counts.entry(p).or_insert(0) += c;
            where_.entry(p).or_default().insert(i);
        }
    }
    let mut heap: BinaryHeap<(i64, Reverse<Pair>)> = counts.iter().map(|(&p, &c)| (c, Reverse(p))).collect();

    let mut merges = Vec::new();
    while merges.len() < vocab_size - BYTE_UNITS {
        let Some((c, Reverse(pair))) = heap.pop() else { break };
        let current = counts.get(&pair).copied().unwrap_or(0);
        if c != current {
            if current > 0 {
                heap.push((current, Reverse(pair)));
            }
            continue;
        }
        if current < 2 {
            break;
        }
        let new_id = (BYTE_UNITS + merges.len()) as u32;
        merges.push(pair);

        let mut affected: Vec<usize> = where_.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        let mut touched: HashSet<Pair> = HashSet::new();
        for wi in affected {
            let (syms, wc) = &mut words[wi];
            if !syms.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            for w in syms.windows(2) {
                *counts.get_mut(&(w[0], w[1])).expect("counted pair") -= *wc;
            }
            merge_pair(syms, pair, new_id);
            for w in syms.windows(2) {
                let p = (w[0], w[1]);
                *counts.entry(p).or_insert(0) += *wc;
                where_.entry(p).or_default().insert(wi);
                touched.insert(p);
            }
        }
        counts.remove(&pair);
        let mut touched: Vec<Pair> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            let c = counts[&p];
            if c > 0 {
                heap.push((c, Reverse(p)));
            }
        }
    }
    Tokenizer::from_merges(merges)
}
