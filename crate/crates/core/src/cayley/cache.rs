//! Versioned on-disk records of ball tables.
//!
//! ```text
//! rdlab-ball 1
//! descriptor Heisenberg
//! digest 3f0c...
//! radius 2
//! counts 1 4 12
//! checksum <sha256 of the record lines>
//! sphere 0
//! - - h(0,0,0)
//! sphere 1
//! 0 1 h(-1,0,0)
//! ...
//! end
//! ```
//!
//! Each record is `parent_index generator_index element`. Decoding re-checks
//! every record against the group law, so a file that decodes is a valid
//! table; anything else is reported and the caller rebuilds.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexSet;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ball::{build_ball, BallError, BallOptions, BallTable};
use crate::group::MarkedGroup;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rdlab-ball";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("cache is for a different group (digest {found}, expected {expected})")]
    WrongGroup { found: String, expected: String },
    #[error("unsupported cache format version {0}")]
    Version(String),
}

fn corrupt(line: usize, reason: impl Into<String>) -> CacheError {
    CacheError::Corrupt {
        line,
        reason: reason.into(),
    }
}

fn record_lines(table: &BallTable) -> Vec<String> {
    let mut lines = Vec::with_capacity(table.len() + table.radius() + 1);
    for n in 0..=table.radius() {
        lines.push(format!("sphere {n}"));
        for i in table.sphere_range(n) {
            let x = table.element(i);
            match table.parent(i) {
                None => lines.push(format!("- - {x}")),
                Some((p, g)) => lines.push(format!("{p} {g} {x}")),
            }
        }
    }
    lines
}

fn checksum(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn encode(table: &BallTable) -> String {
    let body = record_lines(table);
    let counts: Vec<String> = table
        .growth()
        .sphere_sizes()
        .iter()
        .map(|c| c.to_string())
        .collect();
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {FORMAT_VERSION}\n"));
    out.push_str(&format!("descriptor {}\n", table.group().descriptor()));
    out.push_str(&format!("digest {}\n", table.group().digest()));
    out.push_str(&format!("radius {}\n", table.radius()));
    out.push_str(&format!("counts {}\n", counts.join(" ")));
    out.push_str(&format!("checksum {}\n", checksum(&body)));
    for l in &body {
        out.push_str(l);
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str), CacheError> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| corrupt(0, format!("missing '{key}' line")))?;
    let value = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| corrupt(no, format!("expected '{key}'")))?;
    Ok((no, value))
}

/// Decode a cache file for `group`. Never panics on malformed input.
pub fn decode(bytes: &[u8], group: &MarkedGroup) -> Result<BallTable, CacheError> {
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt(0, "not UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (no, version) = header(&mut lines, MAGIC)?;
    if version != FORMAT_VERSION.to_string() {
        let _ = no;
        return Err(CacheError::Version(version.chars().take(16).collect()));
    }
    let (no, desc) = header(&mut lines, "descriptor")?;
    if desc != group.descriptor().to_string() {
        return Err(corrupt(no, "descriptor mismatch"));
    }
    let (_, digest) = header(&mut lines, "digest")?;
    if digest != group.digest() {
        return Err(CacheError::WrongGroup {
            found: digest.chars().take(64).collect(),
            expected: group.digest(),
        });
    }
    let (no, radius) = header(&mut lines, "radius")?;
    let radius: usize = radius.parse().map_err(|_| corrupt(no, "bad radius"))?;
    let (no, counts) = header(&mut lines, "counts")?;
    let counts: Vec<usize> = counts
        .split(' ')
        .map(|c| c.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| corrupt(no, "bad counts"))?;
    if counts.len() != radius + 1 || counts[0] != 1 {
        return Err(corrupt(no, "counts do not match radius"));
    }
    let total = counts
        .iter()
        .try_fold(0usize, |acc, &c| acc.checked_add(c))
        .ok_or_else(|| corrupt(no, "counts overflow"))?;
    if total > bytes.len() {
        return Err(corrupt(no, "counts exceed file size"));
    }
    let (no, expected_sum) = header(&mut lines, "checksum")?;
    let expected_sum = expected_sum.to_string();
    let sum_line = no;

    let kind = group.kind();
    let gens = group.generators();
    let mut elements: IndexSet<_> = IndexSet::with_capacity(total);
    let mut parents = Vec::with_capacity(total);
    let mut starts = vec![0usize];
    let mut body = Vec::with_capacity(total + radius + 1);
    for (n, &count) in counts.iter().enumerate() {
        let (no, tag) = lines.next().ok_or_else(|| corrupt(0, "truncated file"))?;
        if tag != format!("sphere {n}") {
            return Err(corrupt(no, format!("expected 'sphere {n}'")));
        }
        body.push(tag.to_string());
        let prev_start = if n == 0 { 0 } else { starts[n - 1] };
        let this_start = elements.len();
        for _ in 0..count {
            let (no, line) = lines.next().ok_or_else(|| corrupt(0, "truncated file"))?;
            let mut parts = line.splitn(3, ' ');
            let (p, g, key) = match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(g), Some(k)) => (p, g, k),
                _ => return Err(corrupt(no, "expected 'parent generator element'")),
            };
            let x = group
                .parse_element(key)
                .map_err(|e| corrupt(no, e.to_string()))?;
            let parent = if n == 0 {
                if p != "-" || g != "-" || !kind.is_identity(&x) {
                    return Err(corrupt(no, "sphere 0 must be the identity"));
                }
                (u32::MAX, u32::MAX)
            } else {
                let p: usize = p.parse().map_err(|_| corrupt(no, "bad parent index"))?;
                let g: usize = g.parse().map_err(|_| corrupt(no, "bad generator index"))?;
                if p < prev_start || p >= this_start || g >= gens.len() {
                    return Err(corrupt(no, "parent is not in the previous sphere"));
                }
                if kind.mul_unchecked(&elements[p], &gens[g]) != x {
                    return Err(corrupt(no, "element is not parent times generator"));
                }
                (p as u32, g as u32)
            };
            if elements.len() > this_start && elements[elements.len() - 1] >= x {
                return Err(corrupt(no, "sphere not sorted"));
            }
            if !elements.insert(x) {
                return Err(corrupt(no, "duplicate element"));
            }
            parents.push(parent);
            body.push(line.to_string());
        }
        starts.push(elements.len());
    }
    match lines.next() {
        Some((_, "end")) => {}
        Some((no, _)) => return Err(corrupt(no, "expected 'end'")),
        None => return Err(corrupt(0, "missing 'end'")),
    }
    if checksum(&body) != expected_sum {
        return Err(corrupt(sum_line, "checksum mismatch"));
    }
    Ok(BallTable::from_parts(
        group.clone(),
        elements,
        starts,
        parents,
    ))
}

pub fn cache_path(dir: &Path, group: &MarkedGroup, radius: usize) -> PathBuf {
    dir.join(format!("{}-r{radius}.ball", group.digest()))
}

/// Load the table from `dir` when a valid cache exists, otherwise build it and
/// write the cache. Unreadable or corrupt files are rebuilt silently.
pub fn load_or_build(
    group: &MarkedGroup,
    radius: usize,
    dir: Option<&Path>,
    opts: &BallOptions,
) -> Result<BallTable, BallError> {
    let Some(dir) = dir else {
        return build_ball(group, radius, opts);
    };
    let path = cache_path(dir, group, radius);
    if let Ok(bytes) = fs::read(&path) {
        match decode(&bytes, group) {
            Ok(t) if t.radius() == radius => return Ok(t),
            Ok(_) => log::debug!("cache {} has the wrong radius", path.display()),
            Err(e) => log::debug!("rebuilding {}: {e}", path.display()),
        }
    }
    let table = build_ball(group, radius, opts)?;
    if let Err(e) = fs::create_dir_all(dir).and_then(|_| fs::write(&path, encode(&table))) {
        log::warn!("could not write cache {}: {e}", path.display());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{catalog, Descriptor};

    fn group(text: &str) -> MarkedGroup {
        catalog(&Descriptor::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn decode_reproduces_table_exactly() {
        for text in [
            "Heisenberg",
            "BS1m m=2",
            "Lamplighter",
            "ZsdZ2",
            "Free rank=2",
        ] {
            let g = group(text);
            let t = build_ball(&g, 3, &BallOptions::default()).unwrap();
            let bytes = encode(&t);
            let back = decode(bytes.as_bytes(), &g).unwrap();
            assert!(t.elements().eq(back.elements()));
            assert_eq!(back, t);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn tampering_is_detected() {
        let g = group("Zn n=2");
        let t = build_ball(&g, 2, &BallOptions::default()).unwrap();
        let text = encode(&t);
        let swapped = text.replacen("z(-1,0)", "z(0,-1)", 1);
        assert!(decode(swapped.as_bytes(), &g).is_err());
        let truncated = &text[..text.len() - 10];
        assert!(decode(truncated.as_bytes(), &g).is_err());
        let other = group("Zn n=3");
        assert!(decode(text.as_bytes(), &other).is_err());
        let v2 = text.replacen("rdlab-ball 1", "rdlab-ball 2", 1);
        assert!(matches!(
            decode(v2.as_bytes(), &g),
            Err(CacheError::Version(_))
        ));
        assert!(decode(b"\xff\xfe", &g).is_err());
    }

    #[test]
    fn load_or_build_rebuilds_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = group("Heisenberg");
        let opts = BallOptions::default();
        let first = load_or_build(&g, 3, Some(dir.path()), &opts).unwrap();
        let path = cache_path(dir.path(), &g, 3);
        assert!(path.exists());
        let second = load_or_build(&g, 3, Some(dir.path()), &opts).unwrap();
        assert_eq!(encode(&first), encode(&second));
        fs::write(&path, "garbage").unwrap();
        let third = load_or_build(&g, 3, Some(dir.path()), &opts).unwrap();
        assert_eq!(encode(&first), encode(&third));
        assert_eq!(fs::read_to_string(&path).unwrap(), encode(&first));
    }
}
