//! Parser for the closed markup subset used by mock-site pages.

use std::collections::{BTreeMap, BTreeSet};

use super::{DomDocument, DomError, Node};

pub const SUPPORTED_TAGS: &[&str] = &[
    "body", "div", "ul", "li", "span", "p", "h1", "h2", "h3", "h4", "h5", "h6", "td", "tr",
    "table", "button", "a", "label", "input", "select", "option", "menu",
];

const VOID_TAGS: &[&str] = &["input"];

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

struct Open {
    index: usize,
    text: Vec<String>,
}

pub(super) fn parse(source: &str, url: &str) -> Result<DomDocument, DomError> {
    let mut p = Parser { src: source, pos: 0 };
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack: Vec<Open> = Vec::new();
    let mut root_closed = false;
    let mut ids = BTreeSet::new();

    loop {
        if p.eof() {
            break;
        }
        if p.starts_with("<!--") {
            let end = p.src[p.pos..]
                .find("-->")
                .ok_or_else(|| p.err("unterminated comment"))?;
            p.pos += end + 3;
            continue;
        }
        if p.starts_with("</") {
            let at = p.pos;
            p.pos += 2;
            let tag = p.name();
            p.skip_ws();
            if !p.eat('>') {
                return Err(p.err_at(at, "expected '>' after closing tag"));
            }
            let open = stack
                .pop()
                .ok_or_else(|| p.err_at(at, "closing tag without an open element"))?;
            if nodes[open.index].tag != tag {
                return Err(p.err_at(
                    at,
                    &format!("</{}> does not close <{}>", tag, nodes[open.index].tag),
                ));
            }
            finish_text(&mut nodes[open.index], open.text);
            if stack.is_empty() {
                root_closed = true;
            }
            continue;
        }
        if p.starts_with("<") {
            let at = p.pos;
            p.pos += 1;
            let tag = p.name();
            if tag.is_empty() {
                return Err(p.err_at(at, "expected a tag name"));
            }
            if !SUPPORTED_TAGS.contains(&tag.as_str()) {
                return Err(p.err_at(at, &format!("unsupported tag <{tag}>")));
            }
            if root_closed {
                return Err(p.err_at(at, "content after the root element"));
            }
            if stack.is_empty() && (!nodes.is_empty() || tag != "body") {
                return Err(p.err_at(at, "document root must be a single <body>"));
            }
            let attributes = p.attributes()?;
            p.skip_ws();
            let self_closing = p.eat('/');
            if !p.eat('>') {
                return Err(p.err_at(at, "expected '>'"));
            }
            if let Some(id) = attributes.get("id") {
                if !ids.insert(id.clone()) {
                    return Err(p.err_at(at, &format!("duplicate id \"{id}\"")));
                }
            }
            let index = nodes.len();
            let parent = stack.last().map(|o| o.index);
            nodes.push(Node {
                tag: tag.clone(),
                attributes,
                text: String::new(),
                children: Vec::new(),
                parent,
            });
            if let Some(parent) = parent {
                nodes[parent].children.push(index);
            }
            if self_closing || VOID_TAGS.contains(&tag.as_str()) {
                if stack.is_empty() {
                    root_closed = true;
                }
            } else {
                stack.push(Open {
                    index,
                    text: Vec::new(),
                });
            }
            continue;
        }
        let at = p.pos;
        let end = p.src[p.pos..].find('<').map_or(p.src.len(), |i| p.pos + i);
        let raw = &p.src[p.pos..end];
        p.pos = end;
        if raw.trim().is_empty() {
            continue;
        }
        let open = stack
            .last_mut()
            .ok_or_else(|| p.err_at(at, "text outside the root element"))?;
        open.text.push(decode_entities(raw).map_err(|r| p.err_at(at, r))?);
    }

    if let Some(open) = stack.last() {
        return Err(p.err(&format!("unclosed <{}>", nodes[open.index].tag)));
    }
    if nodes.is_empty() {
        return Err(p.err("empty document"));
    }
    Ok(DomDocument::from_nodes(nodes, url))
}

fn finish_text(node: &mut Node, chunks: Vec<String>) {
    node.text = collapse_ws(&chunks.join(" "));
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(raw: &str) -> Result<String, &'static str> {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = tail.find(';').ok_or("unterminated entity")?;
        let ent = &tail[1..semi];
        let ch = match ent {
            "amp" => '&',
            "lt" => '<',
            "gt" => '>',
            "quot" => '"',
            "apos" | "#39" => '\'',
            "nbsp" => ' ',
            _ => return Err("unsupported entity"),
        };
        out.push(ch);
        rest = &tail[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl<'a> Parser<'a> {
    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':' {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.src[start..self.pos].to_ascii_lowercase()
    }

    fn attributes(&mut self) -> Result<BTreeMap<String, String>, DomError> {
        let mut attrs = BTreeMap::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(self.err("unterminated tag")),
                Some('>') | Some('/') => return Ok(attrs),
                _ => {}
            }
            let at = self.pos;
            let name = self.name();
            if name.is_empty() {
                return Err(self.err_at(at, "bad attribute name"));
            }
            self.skip_ws();
            let value = if self.eat('=') {
                self.skip_ws();
                self.attr_value()?
            } else {
                String::new()
            };
            if attrs.insert(name.clone(), value).is_some() {
                return Err(self.err_at(at, &format!("repeated attribute {name}")));
            }
        }
    }

    fn attr_value(&mut self) -> Result<String, DomError> {
        let at = self.pos;
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.pos += 1;
                let end = self.src[self.pos..]
                    .find(q)
                    .ok_or_else(|| self.err_at(at, "unterminated attribute value"))?;
                let raw = &self.src[self.pos..self.pos + end];
                self.pos += end + 1;
                decode_entities(raw).map_err(|r| self.err_at(at, r))
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '>' || c == '/' {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
                if start == self.pos {
                    return Err(self.err_at(at, "missing attribute value"));
                }
                Ok(self.src[start..self.pos].to_string())
            }
        }
    }

    fn err(&self, reason: &str) -> DomError {
        self.err_at(self.pos, reason)
    }

    fn err_at(&self, position: usize, reason: &str) -> DomError {
        DomError::MalformedMarkup {
            position,
            reason: reason.to_string(),
        }
    }
}
