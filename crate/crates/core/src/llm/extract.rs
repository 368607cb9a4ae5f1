use crate::model::defines_test_function;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extracted {
    pub tests: Vec<String>,
    /// Fenced blocks that failed to parse.
    pub dropped_unparsable: usize,
    /// Blocks that parsed but define no `test*` function.
    pub dropped_without_tests: usize,
}

/// Pulls test sources out of fenced code blocks. A block is kept when it
/// parses and defines at least one function whose name starts with `test`.
pub fn extract_tests(response_text: &str) -> Extracted {
    let mut out = Extracted::default();
    for block in fenced_blocks(response_text) {
        match defines_test_function(&block) {
            Some(true) => out.tests.push(block),
            Some(false) => out.dropped_without_tests += 1,
            None => out.dropped_unparsable += 1,
        }
    }
    out
}

/// Bodies of ``` fenced blocks. An unterminated final block runs to the end
/// of the text.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match current.as_mut() {
            None if is_fence => current = Some(String::new()),
            None => {}
            Some(_) if is_fence => blocks.push(current.take().expect("open block")),
            Some(body) => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    blocks.extend(current.filter(|b| !b.trim().is_empty()));
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_block() {
        let text = "Here you go:\n```python\ndef test_x():\n    assert 1\n```\nDone.";
        let e = extract_tests(text);
        assert_eq!(e.tests, ["def test_x():\n    assert 1\n"]);
        assert_eq!(e.dropped_unparsable, 0);
    }

    #[test]
    fn prose_only() {
        assert_eq!(extract_tests("No code here, sorry."), Extracted::default());
    }

    #[test]
    fn broken_block_is_counted() {
        let broken = "def test_bad(:\n    pass\n";
        let good = "import m\n\nclass TestM:\n    def test_ok(self):\n        assert m\n";
        let text = format!("```python\n{broken}```\ntext\n```\n{good}```\n```py\nx = 1\n```\n");
        let e = extract_tests(&text);
        // oracle: parse check per block
        assert!(!crate::model::is_valid_python(broken));
        assert!(crate::model::is_valid_python(good));
        assert_eq!(e.tests, [good]);
        assert_eq!(e.dropped_unparsable, 1);
        assert_eq!(e.dropped_without_tests, 1);
    }

    #[test]
    fn unterminated_block() {
        let e = extract_tests("```python\ndef test_tail():\n    pass\n");
        assert_eq!(e.tests.len(), 1);
    }
}
