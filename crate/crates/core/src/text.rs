//! Text normalization and tokenization shared by every module.
//!
//! Normalization is Unicode NFC, trimmed, with internal whitespace runs
//! collapsed to a single ASCII space. There is no case folding: the source
//! corpus is Korean, and folding would corrupt mixed-script facts.

use unicode_normalization::UnicodeNormalization;

/// Normalizes `text` to NFC, trims it and collapses internal whitespace.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace tokens of the normalized form of `text`.
pub fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Number of whitespace tokens after normalization.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// 64-bit FNV-1a over `bytes`, mixed with `seed`.
///
/// Used wherever a hash must be stable across processes and toolchains
/// (feature hashing, per-pair noise draws).
pub fn stable_hash(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    // final avalanche (splitmix64 finalizer)
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize("  Has \t a\n\ndog  "), "Has a dog");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn composes_to_nfc() {
        // "e" + combining acute accent
        assert_eq!(normalize("cafe\u{301}"), "caf\u{e9}");
        // Hangul jamo sequence composes to a syllable
        assert_eq!(normalize("\u{1100}\u{1161}"), "\u{ac00}");
    }

    #[test]
    fn keeps_case() {
        assert_ne!(normalize("Dog"), normalize("dog"));
    }

    #[test]
    fn tokens_split_on_whitespace() {
        assert_eq!(tokens(" a  b\tc "), vec!["a", "b", "c"]);
        assert!(tokens("").is_empty());
    }

    #[test]
    fn stable_hash_is_seeded() {
        assert_eq!(stable_hash(1, b"abc"), stable_hash(1, b"abc"));
        assert_ne!(stable_hash(1, b"abc"), stable_hash(2, b"abc"));
        assert_ne!(stable_hash(1, b"abc"), stable_hash(1, b"abd"));
    }
}
