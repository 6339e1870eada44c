//! Parser and canonical renderer for the pipeline notation.
//!
//! Grammar (codec names case- and whitespace-insensitive):
//!
//! ```text
//! pipeline := node EOF
//! node     := CODEC | CODEC "|" node | CODEC "|" "[" node ("," node)* "]"
//! CODEC    := name [ "(" key "=" value ("," key "=" value)* ")" ]
//! ```

use super::{allowed_options, nesting_sig, CodecSpec, PipeNode, PipelineError};
use crate::datamodel::CodecId;

struct Lexer<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expect(&mut self, c: u8) -> Result<(), PipelineError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("\"{}\"", c as char))),
        }
    }

    fn err(&self, expected: String) -> PipelineError {
        PipelineError::Parse {
            position: self.pos,
            expected,
        }
    }

    /// A run of characters up to a structural delimiter, trimmed.
    fn word(&mut self, what: &str) -> Result<(usize, String), PipelineError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && !b"|[](),=".contains(&self.text[self.pos]) {
            self.pos += 1;
        }
        let raw = std::str::from_utf8(&self.text[start..self.pos])
            .map_err(|_| self.err(format!("{what} (valid UTF-8)")))?;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(PipelineError::Parse {
                position: start,
                expected: what.to_string(),
            });
        }
        Ok((start, trimmed.to_string()))
    }
}

fn lookup_codec(name: &str) -> Option<CodecId> {
    let norm: String = name
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .collect::<String>()
        .to_ascii_lowercase();
    Some(match norm.as_str() {
        "bitpacking" | "bitpack" | "bp" => CodecId::BitPack,
        "deltaencoding" | "delta" => CodecId::Delta,
        "rle" | "runlength" | "runlengthencoding" => CodecId::Rle,
        "deltastride" => CodecId::DeltaStride,
        "dictionaryencoding" | "dictionary" | "dict" => CodecId::Dict,
        "float2int" | "f2i" => CodecId::Float2Int,
        "stringdictionary" | "stringdict" | "strdict" => CodecId::StrDict,
        "ans" | "rans" => CodecId::Ans,
        "raw" => CodecId::Raw,
        _ => return None,
    })
}

fn parse_codec(lex: &mut Lexer<'_>) -> Result<CodecSpec, PipelineError> {
    let (_, name) = lex.word("codec name")?;
    let codec = lookup_codec(&name).ok_or(PipelineError::UnknownCodec(name))?;
    let mut options: Vec<(String, String)> = Vec::new();
    if lex.peek() == Some(b'(') {
        lex.bump();
        loop {
            let (kpos, key) = lex.word("option key")?;
            lex.expect(b'=')?;
            let (_, value) = lex.word("option value")?;
            if !allowed_options(codec).contains(&key.as_str()) {
                return Err(PipelineError::UnknownOption { codec, key });
            }
            if options.iter().any(|(k, _)| *k == key) {
                return Err(PipelineError::Parse {
                    position: kpos,
                    expected: format!("unique option key (\"{key}\" repeats)"),
                });
            }
            options.push((key, value));
            match lex.bump() {
                Some(b',') => continue,
                Some(b')') => break,
                _ => return Err(lex.err("\",\" or \")\"".into())),
            }
        }
    }
    options.sort();
    Ok(CodecSpec { codec, options })
}

fn parse_node(lex: &mut Lexer<'_>) -> Result<PipeNode, PipelineError> {
    let spec = parse_codec(lex)?;
    if lex.peek() != Some(b'|') {
        return Ok(PipeNode::Leaf(spec));
    }
    lex.bump();
    let sig = nesting_sig(spec.codec);
    if lex.peek() == Some(b'[') {
        lex.bump();
        let mut kids = vec![parse_node(lex)?];
        loop {
            match lex.bump() {
                Some(b',') => kids.push(parse_node(lex)?),
                Some(b']') => break,
                _ => return Err(lex.err("\"]\" or \",\"".into())),
            }
        }
        if kids.len() != sig.bindable.len() {
            return Err(PipelineError::Arity {
                codec: spec.codec,
                expected: sig.bindable.len(),
                got: kids.len(),
            });
        }
        Ok(PipeNode::Fanout(spec, kids))
    } else {
        if spec.codec == CodecId::Raw {
            return Err(PipelineError::Arity {
                codec: CodecId::Raw,
                expected: 0,
                got: 1,
            });
        }
        let next = parse_node(lex)?;
        Ok(PipeNode::Seq(spec, Box::new(next)))
    }
}

pub fn parse_pipeline(text: &str) -> Result<PipeNode, PipelineError> {
    let mut lex = Lexer {
        text: text.as_bytes(),
        pos: 0,
    };
    let node = parse_node(&mut lex)?;
    if lex.peek().is_some() {
        return Err(lex.err("end of input".into()));
    }
    Ok(node)
}

fn canonical_name(codec: CodecId) -> &'static str {
    match codec {
        CodecId::BitPack => "Bit-packing",
        CodecId::Delta => "Delta encoding",
        CodecId::Rle => "RLE",
        CodecId::DeltaStride => "DeltaStride",
        CodecId::Dict => "Dictionary encoding",
        CodecId::Float2Int => "Float2Int",
        CodecId::StrDict => "String-dictionary",
        CodecId::Ans => "ANS",
        CodecId::Raw => "Raw",
    }
}

fn render_codec(spec: &CodecSpec, out: &mut String) {
    out.push_str(canonical_name(spec.codec));
    if !spec.options.is_empty() {
        out.push('(');
        for (i, (k, v)) in spec.options.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(k);
            out.push('=');
            out.push_str(v);
        }
        out.push(')');
    }
}

fn render_node(node: &PipeNode, out: &mut String) {
    match node {
        PipeNode::Leaf(spec) => render_codec(spec, out),
        PipeNode::Seq(spec, next) => {
            render_codec(spec, out);
            out.push_str(" | ");
            render_node(next, out);
        }
        PipeNode::Fanout(spec, kids) => {
            render_codec(spec, out);
            out.push_str(" | [");
            for (i, kid) in kids.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_node(kid, out);
            }
            out.push(']');
        }
    }
}

/// Canonical pipeline text; `parse_pipeline(render_pipeline(x)) == x`.
pub fn render_pipeline(node: &PipeNode) -> String {
    let mut out = String::new();
    render_node(node, &mut out);
    out
}

/// Reconstructs the pipeline notation of an artifact's codec tree, including
/// the recorded ANS options.
pub fn pipeline_of_tree(node: &crate::datamodel::CodecNode) -> PipeNode {
    use crate::datamodel::CodecParams;
    let mut spec = CodecSpec::bare(node.codec_id());
    if let CodecParams::Ans {
        chunk_size,
        table_log,
        ..
    } = &node.params
    {
        spec.options = vec![
            ("chunk_size".to_string(), chunk_size.to_string()),
            ("table_log".to_string(), table_log.to_string()),
        ];
    }
    if node.children.is_empty() {
        return PipeNode::Leaf(spec);
    }
    let sig = nesting_sig(spec.codec);
    let bound: Vec<&crate::datamodel::CodecNode> =
        sig.bindable.iter().map(|&i| &node.children[i]).collect();
    let non_raw = bound
        .iter()
        .filter(|c| c.codec_id() != crate::datamodel::CodecId::Raw)
        .count();
    if non_raw == 0 {
        PipeNode::Leaf(spec)
    } else if non_raw == 1
        && node.children[sig.primary].codec_id() != crate::datamodel::CodecId::Raw
    {
        PipeNode::Seq(
            spec,
            Box::new(pipeline_of_tree(&node.children[sig.primary])),
        )
    } else {
        PipeNode::Fanout(spec, bound.into_iter().map(pipeline_of_tree).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_style_seq() {
        let node = parse_pipeline("Dictionary | Bit-packing").unwrap();
        assert_eq!(
            node,
            PipeNode::Seq(
                CodecSpec::bare(CodecId::Dict),
                Box::new(PipeNode::Leaf(CodecSpec::bare(CodecId::BitPack)))
            )
        );
        // full canonical spelling and arbitrary case both work
        assert_eq!(
            parse_pipeline("dictionary ENCODING | bit-PACKING").unwrap(),
            node
        );
    }

    #[test]
    fn fanout_binds_children() {
        let node = parse_pipeline("RLE | [Bit-packing, Bit-packing]").unwrap();
        assert_eq!(
            node,
            PipeNode::Fanout(
                CodecSpec::bare(CodecId::Rle),
                vec![
                    PipeNode::Leaf(CodecSpec::bare(CodecId::BitPack)),
                    PipeNode::Leaf(CodecSpec::bare(CodecId::BitPack)),
                ]
            )
        );
    }

    #[test]
    fn unterminated_fanout_reports_position() {
        match parse_pipeline("RLE | [Bit-packing").unwrap_err() {
            PipelineError::Parse { position, expected } => {
                assert_eq!(position, 18);
                assert!(expected.contains(']'), "{expected}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_codec_named_in_error() {
        assert_eq!(
            parse_pipeline("LZ4").unwrap_err(),
            PipelineError::UnknownCodec("LZ4".into())
        );
    }

    #[test]
    fn wrong_fanout_arity_rejected() {
        assert_eq!(
            parse_pipeline("RLE | [Bit-packing, Bit-packing, Raw]").unwrap_err(),
            PipelineError::Arity {
                codec: CodecId::Rle,
                expected: 2,
                got: 3
            }
        );
        // DeltaStride binds (starts, counts)
        assert!(parse_pipeline("DeltaStride | [Raw, Raw]").is_ok());
        assert!(parse_pipeline("DeltaStride | [Raw, Raw, Raw]").is_err());
    }

    #[test]
    fn raw_cannot_continue() {
        assert!(matches!(
            parse_pipeline("Raw | ANS").unwrap_err(),
            PipelineError::Arity {
                codec: CodecId::Raw,
                ..
            }
        ));
    }

    #[test]
    fn options_parse_and_render() {
        let node = parse_pipeline("ANS(table_log=10, chunk_size=8192)").unwrap();
        match &node {
            PipeNode::Leaf(spec) => assert_eq!(
                spec.options,
                vec![
                    ("chunk_size".to_string(), "8192".to_string()),
                    ("table_log".to_string(), "10".to_string())
                ]
            ),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(render_pipeline(&node), "ANS(chunk_size=8192,table_log=10)");
    }

    #[test]
    fn unknown_option_rejected() {
        assert!(matches!(
            parse_pipeline("Bit-packing(width=3)").unwrap_err(),
            PipelineError::UnknownOption {
                codec: CodecId::BitPack,
                ..
            }
        ));
    }

    #[test]
    fn parse_render_identity_on_reference_pipelines() {
        let table = [
            "Bit-packing",
            "Dictionary encoding | Bit-packing",
            "Float2Int | Bit-packing",
            "RLE | [DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing], Bit-packing]",
            "DeltaStride | [Delta encoding | RLE | [Bit-packing, Bit-packing], Bit-packing]",
            "RLE | [DeltaStride, RLE]",
            "Delta encoding | Dictionary encoding | Bit-packing | Dictionary encoding | Bit-packing",
            "RLE",
            "ANS",
            "String-dictionary | Bit-packing | ANS",
        ];
        for text in table {
            let node = parse_pipeline(text).unwrap();
            let canon = render_pipeline(&node);
            assert_eq!(parse_pipeline(&canon).unwrap(), node, "for {text}");
            // canonical text is a fixpoint
            assert_eq!(render_pipeline(&parse_pipeline(&canon).unwrap()), canon);
        }
    }
}
