use similar::TextDiff;

/// The single changed line range between two texts. Line numbers are
/// 1-based; a range with `end < start` is empty (pure insertion/removal).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditRegion {
    pub original_start: usize,
    pub original_end: usize,
    pub mutated_start: usize,
    pub mutated_end: usize,
}

/// Bounds the edit by the longest common line prefix and suffix. Any two
/// texts differ in at most one such region, so callers check that the
/// region lies where the mutation site says it should.
pub fn edit_region(original: &str, mutated: &str) -> Option<EditRegion> {
    if original == mutated {
        return None;
    }
    let a: Vec<&str> = original.split_inclusive('\n').collect();
    let b: Vec<&str> = mutated.split_inclusive('\n').collect();
    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let max_suffix = a.len().min(b.len()) - prefix;
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take(max_suffix)
        .take_while(|(x, y)| x == y)
        .count();
    Some(EditRegion {
        original_start: prefix + 1,
        original_end: a.len() - suffix,
        mutated_start: prefix + 1,
        mutated_end: b.len() - suffix,
    })
}

pub fn unified_diff(original: &str, mutated: &str, original_name: &str, mutated_name: &str) -> String {
    TextDiff::from_lines(original, mutated)
        .unified_diff()
        .context_radius(3)
        .header(original_name, mutated_name)
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_change() {
        let r = edit_region("a\nb\nc\n", "a\nB\nc\n").unwrap();
        assert_eq!((r.original_start, r.original_end), (2, 2));
        assert_eq!((r.mutated_start, r.mutated_end), (2, 2));
    }

    #[test]
    fn swap_is_one_region() {
        let r = edit_region("a\nb\nc\nd\n", "a\nc\nb\nd\n").unwrap();
        assert_eq!((r.original_start, r.original_end), (2, 3));
    }

    #[test]
    fn duplication_grows_the_mutated_side() {
        let r = edit_region("a\nb\nc\n", "a\nb\nb\nc\n").unwrap();
        assert!(r.mutated_end >= r.mutated_start);
        assert_eq!(r.mutated_end - r.mutated_start, r.original_end + 1 - r.original_start);
    }

    #[test]
    fn identical_texts_have_no_region() {
        assert!(edit_region("x\n", "x\n").is_none());
    }

    #[test]
    fn diff_has_headers() {
        let d = unified_diff("a\n", "b\n", "original.py", "mutant.py");
        assert!(d.starts_with("--- original.py\n+++ mutant.py\n"));
        assert!(d.contains("-a\n+b\n"));
    }
}
