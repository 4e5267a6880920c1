//! Tokenization and stable feature hashing shared by all extraction models.

/// Lowercased alphanumeric word tokens, in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8], salt: u64) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64 ^ salt;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finaliser; spreads FNV output before bucketing.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn hash_str(s: &str, salt: u64) -> u64 {
    mix64(fnv1a(s.as_bytes(), salt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits_on_punctuation() {
        assert_eq!(
            tokenize("Sie haben das Recht, Ihre Einwilligung zu widerrufen."),
            [
                "sie",
                "haben",
                "das",
                "recht",
                "ihre",
                "einwilligung",
                "zu",
                "widerrufen"
            ]
        );
        assert_eq!(tokenize("Art. 15(1)(e) DSGVO"), ["art", "15", "1", "e", "dsgvo"]);
        assert!(tokenize("  -- ").is_empty());
    }

    #[test]
    fn umlauts_survive() {
        assert_eq!(tokenize("Löschung ÜBER"), ["löschung", "über"]);
    }

    #[test]
    fn fnv1a_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b"", 0), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a", 0), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a(b"foobar", 0), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn salt_changes_hash() {
        assert_ne!(hash_str("recht", 1), hash_str("recht", 2));
        assert_eq!(hash_str("recht", 1), hash_str("recht", 1));
    }
}
