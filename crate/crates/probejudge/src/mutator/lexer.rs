//! Single-pass lexical mask for C/C++ sources. The mutations are lexical, so
//! a full parse is out of proportion; we only need to know which bytes sit in
//! real code as opposed to comments and string/char literals.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    LineComment,
    BlockComment,
    Str,
    Char,
}

/// Returns a per-byte mask: `true` for bytes in code, `false` for bytes inside
/// comments or string/char literals (delimiters included).
pub fn code_mask(source: &str) -> Vec<bool> {
    let bytes = source.as_bytes();
    let mut mask = vec![true; bytes.len()];
    let mut state = State::Code;
    let mut i = 0;
    while i < bytes.len() {
        match state {
            State::Code => match bytes[i] {
                b'/' if bytes.get(i + 1) == Some(&b'/') => {
                    state = State::LineComment;
                    mask[i] = false;
                    mask[i + 1] = false;
                    i += 2;
                    continue;
                }
                b'/' if bytes.get(i + 1) == Some(&b'*') => {
                    state = State::BlockComment;
                    mask[i] = false;
                    mask[i + 1] = false;
                    i += 2;
                    continue;
                }
                b'"' => {
                    state = State::Str;
                    mask[i] = false;
                }
                b'\'' => {
                    state = State::Char;
                    mask[i] = false;
                }
                _ => {}
            },
            State::LineComment => {
                if bytes[i] == b'\n' {
                    state = State::Code;
                    // the newline itself counts as code
                } else {
                    mask[i] = false;
                }
            }
            State::BlockComment => {
                mask[i] = false;
                if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    mask[i + 1] = false;
                    state = State::Code;
                    i += 2;
                    continue;
                }
            }
            State::Str => {
                mask[i] = false;
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    mask[i + 1] = false;
                    i += 2;
                    continue;
                }
                if bytes[i] == b'"' {
                    state = State::Code;
                }
            }
            State::Char => {
                mask[i] = false;
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    mask[i + 1] = false;
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\'' {
                    state = State::Code;
                }
            }
        }
        i += 1;
    }
    mask
}

/// Byte positions of `needle` bytes in code position.
pub fn masked_positions(source: &str, needle: u8) -> Vec<usize> {
    let mask = code_mask(source);
    source
        .bytes()
        .enumerate()
        .filter(|&(i, b)| b == needle && mask[i])
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn braces_in_literals_are_masked() {
        let src = r#"char *s = "{"; char c = '{'; // { comment
int main() { /* { */ return 0; }
"#;
        let pos = masked_positions(src, b'{');
        assert_eq!(pos.len(), 1, "only the function brace counts: {pos:?}");
        assert_eq!(&src[pos[0]..pos[0] + 1], "{");
        assert!(src[..pos[0]].ends_with("main() "));
    }

    #[test]
    fn escaped_quote_does_not_end_string() {
        let src = r#"char *s = "a\"{b"; int x = 1;"#;
        assert!(masked_positions(src, b'{').is_empty());
    }

    #[test]
    fn block_comment_spans_lines() {
        let src = "/* {\n{ */\nint f() { return 1; }\n";
        assert_eq!(masked_positions(src, b'{').len(), 1);
    }
}
