use std::fmt;

use serde::{Deserialize, Serialize};

/// Version-free chart name used to relate different versions of one chart.
///
/// Built from the dash-separated components of an archive file name that
/// precede the first component starting with a digit, joined without a
/// separator. Never contains a dash.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StemName(String);

impl StemName {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for StemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for StemName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn starts_with_digit(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Derives the stem of a chart archive file name.
///
/// `magic-namespace-0.1.1-2.tgz` → `magicnamespace`. Scanning stops at the
/// first component that begins with a digit; that component and everything
/// after it belong to the version. When every component begins with a digit
/// the whole name with dashes removed is used instead, so the result is
/// never empty for a non-empty input.
pub fn mangle_stem(file_name: &str) -> StemName {
    let base = file_name.strip_suffix(".tgz").unwrap_or(file_name);
    let stem: String = base
        .split('-')
        .take_while(|c| !starts_with_digit(c))
        .collect();
    if !stem.is_empty() {
        return StemName(stem);
    }
    let fallback: String = base.chars().filter(|&c| c != '-').collect();
    if !fallback.is_empty() {
        return StemName(fallback);
    }
    StemName(file_name.chars().filter(|&c| c != '-').collect())
}

/// Splits `name-version[.tgz]` at the stem cut: the name is everything
/// before the first digit-leading component.
pub(crate) fn split_name_version(file_name: &str) -> (String, String) {
    let base = file_name.strip_suffix(".tgz").unwrap_or(file_name);
    let parts: Vec<&str> = base.split('-').collect();
    match parts.iter().position(|c| starts_with_digit(c)) {
        Some(0) | None => (base.to_string(), String::new()),
        Some(i) => (parts[..i].join("-"), parts[i..].join("-")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_examples() {
        assert_eq!(mangle_stem("magic-namespace-0.1.0.tgz").as_str(), "magicnamespace");
        assert_eq!(mangle_stem("magic-namespace-0.1.1-2.tgz").as_str(), "magicnamespace");
        assert_eq!(mangle_stem("redis-1.0.0.tgz").as_str(), "redis");
    }

    #[test]
    fn cut_is_transitive() {
        // `manager` follows a digit-leading component and is dropped too
        assert_eq!(mangle_stem("kafka-0.2.1-manager-1.0.tgz").as_str(), "kafka");
    }

    #[test]
    fn all_digit_fallback() {
        assert_eq!(mangle_stem("1-2-3.tgz").as_str(), "123");
        assert_eq!(mangle_stem("007.tgz").as_str(), "007");
    }

    #[test]
    fn suffix_is_optional() {
        assert_eq!(mangle_stem("nginx-ingress-0.9.1").as_str(), "nginxingress");
    }

    #[test]
    fn name_version_split() {
        assert_eq!(
            split_name_version("magic-namespace-0.1.1-2.tgz"),
            ("magic-namespace".to_string(), "0.1.1-2".to_string())
        );
        assert_eq!(split_name_version("redis.tgz"), ("redis".to_string(), String::new()));
    }
}
