//! Code skeletonization.
//!
//! Splits a source file into a tree of scopes (module, class, function,
//! method). Each unit's skeleton keeps its own lines but replaces the body
//! of every direct child with a single reference comment
//! `<prefix> -> node:<child-name>`, so a unit can be indexed and retrieved
//! without its descendants while the hierarchy stays navigable.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const MARKER: &str = "-> node:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Module,
    Class,
    Function,
    Method,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Module => "module",
            Scope::Class => "class",
            Scope::Function => "function",
            Scope::Method => "method",
        }
    }
}

/// Block-boundary rules for a family of languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LanguageProfile {
    /// `def` / `class` scopes delimited by indentation.
    Indented,
    /// `{ ... }` scopes opened by declarations such as `fn`, `class`,
    /// `struct`, `impl`, or a C-style `type name(args) {`.
    Braced,
}

impl LanguageProfile {
    pub fn comment_prefix(self) -> &'static str {
        match self {
            LanguageProfile::Indented => "#",
            LanguageProfile::Braced => "//",
        }
    }

    pub fn for_extension(ext: &str) -> Option<Self> {
        match ext {
            "py" | "pyi" => Some(LanguageProfile::Indented),
            "rs" | "c" | "h" | "cc" | "cpp" | "hpp" | "java" | "js" | "ts" | "go" | "cs"
            | "kt" | "swift" => Some(LanguageProfile::Braced),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub scope: Scope,
    /// Dotted path below the module (`Outer.method`); the module unit
    /// carries the module name.
    pub name: String,
    pub signature: String,
    pub skeleton_text: String,
    /// Line range `[start, end)` of the unit in the source.
    pub span: Range<usize>,
    /// Index of the parent unit in the returned list.
    pub parent: Option<usize>,
    /// Lines before the body (declaration) and after it (closing brace).
    pub header_lines: usize,
    pub footer_lines: usize,
}

#[derive(Debug)]
struct RawScope {
    scope: Scope,
    name: String,
    signature: String,
    header: Range<usize>,
    body: Range<usize>,
    footer: Range<usize>,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Builds the unit tree for `source`. Units are returned in pre-order with
/// the module at index 0.
pub fn skeletonize_code(
    module_name: &str,
    source: &str,
    profile: LanguageProfile,
) -> Result<Vec<CodeUnit>, IngestError> {
    let lines: Vec<&str> = source.split('\n').collect();
    let mut scopes = vec![RawScope {
        scope: Scope::Module,
        name: module_name.to_string(),
        signature: module_name.to_string(),
        header: 0..0,
        body: 0..lines.len(),
        footer: lines.len()..lines.len(),
        parent: None,
        children: Vec::new(),
    }];
    match profile {
        LanguageProfile::Indented => parse_indented(&lines, &mut scopes)?,
        LanguageProfile::Braced => parse_braced(&lines, &mut scopes)?,
    }
    for i in 1..scopes.len() {
        let p = scopes[i].parent.expect("non-root scopes have parents");
        scopes[p].children.push(i);
    }
    assign_qualified_names(&mut scopes);

    let prefix = profile.comment_prefix();
    // Scopes are created in source order, which is pre-order.
    Ok(scopes
        .iter()
        .map(|s| CodeUnit {
            scope: s.scope,
            name: s.name.clone(),
            signature: s.signature.clone(),
            skeleton_text: render(&lines, &scopes, s, prefix),
            span: s.header.start..s.footer.end,
            parent: s.parent,
            header_lines: s.header.len(),
            footer_lines: s.footer.len(),
        })
        .collect())
}

fn assign_qualified_names(scopes: &mut [RawScope]) {
    let mut used = BTreeSet::new();
    for i in 1..scopes.len() {
        let p = scopes[i].parent.unwrap();
        let base = if p == 0 {
            scopes[i].name.clone()
        } else {
            format!("{}.{}", scopes[p].name, scopes[i].name)
        };
        let mut name = base.clone();
        let mut n = 2;
        while !used.insert(name.clone()) {
            name = format!("{base}#{n}");
            n += 1;
        }
        scopes[i].name = name;
    }
}

fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

fn render(lines: &[&str], scopes: &[RawScope], s: &RawScope, prefix: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut cursor = s.header.start;
    for &c in &s.children {
        let child = &scopes[c];
        out.extend(lines[cursor..child.body.start].iter().map(|l| l.to_string()));
        let indent = lines[child.body.clone()]
            .iter()
            .find(|l| !l.trim().is_empty())
            .map(|l| indent_of(l).to_string())
            .unwrap_or_else(|| format!("{}    ", indent_of(lines[child.header.start])));
        out.push(format!("{indent}{prefix} {MARKER}{}", child.name));
        cursor = child.body.end;
    }
    out.extend(lines[cursor..s.footer.end].iter().map(|l| l.to_string()));
    out.join("\n")
}

/// Re-inlines every child skeleton at its reference comment, recovering
/// the original source from the unit list.
pub fn reassemble(units: &[CodeUnit]) -> String {
    fn expand(units: &[CodeUnit], idx: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut skip = 0;
        for line in units[idx].skeleton_text.split('\n') {
            if skip > 0 {
                skip -= 1;
                continue;
            }
            let child = line.trim_start().split_once(MARKER).and_then(|(head, name)| {
                let is_comment = head.trim() == "#" || head.trim() == "//";
                if !is_comment {
                    return None;
                }
                units
                    .iter()
                    .position(|u| u.parent == Some(idx) && u.name == name)
            });
            match child {
                Some(c) => {
                    let keep = out.len() - units[c].header_lines;
                    out.truncate(keep);
                    out.extend(expand(units, c));
                    skip = units[c].footer_lines;
                }
                None => out.push(line.to_string()),
            }
        }
        out
    }
    if units.is_empty() {
        return String::new();
    }
    expand(units, 0).join("\n")
}

// ---------------------------------------------------------------------------
// Indentation profile

#[derive(Default)]
struct PyLex {
    depth: i32,
    triple: Option<char>,
}

impl PyLex {
    fn continuing(&self) -> bool {
        self.depth > 0 || self.triple.is_some()
    }

    /// Consumes a line; returns the byte offset of the first `:` outside
    /// brackets, strings and comments.
    fn feed(&mut self, line: &str) -> Option<usize> {
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let at = |k: usize| chars.get(k).map(|x| x.1);
        let mut colon = None;
        let mut k = 0;
        while k < chars.len() {
            let (pos, c) = chars[k];
            if let Some(q) = self.triple {
                if c == '\\' {
                    k += 2;
                } else if c == q && at(k + 1) == Some(q) && at(k + 2) == Some(q) {
                    self.triple = None;
                    k += 3;
                } else {
                    k += 1;
                }
                continue;
            }
            match c {
                '#' => break,
                '"' | '\'' => {
                    if at(k + 1) == Some(c) && at(k + 2) == Some(c) {
                        self.triple = Some(c);
                        k += 3;
                        continue;
                    }
                    k += 1;
                    while k < chars.len() && chars[k].1 != c {
                        k += if chars[k].1 == '\\' { 2 } else { 1 };
                    }
                }
                '(' | '[' | '{' => self.depth += 1,
                ')' | ']' | '}' => self.depth -= 1,
                ':' if self.depth == 0 && colon.is_none() => colon = Some(pos),
                _ => {}
            }
            k += 1;
        }
        colon
    }
}

fn indent_width(line: &str) -> usize {
    let mut w = 0;
    for c in line.chars() {
        match c {
            ' ' => w += 1,
            '\t' => w = (w / 8 + 1) * 8,
            _ => break,
        }
    }
    w
}

fn ident_prefix(s: &str) -> &str {
    let end = s
        .char_indices()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
        .map_or(s.len(), |(i, _)| i);
    &s[..end]
}

fn py_header(stripped: &str) -> Option<(bool, &str)> {
    let rest = stripped.strip_prefix("async ").map(str::trim_start).unwrap_or(stripped);
    if let Some(r) = rest.strip_prefix("def ") {
        let name = ident_prefix(r.trim_start());
        return (!name.is_empty()).then_some((false, name));
    }
    if let Some(r) = rest.strip_prefix("class ") {
        let name = ident_prefix(r.trim_start());
        return (!name.is_empty()).then_some((true, name));
    }
    None
}

fn unbalanced(line: usize, message: &str) -> IngestError {
    IngestError::UnbalancedScopes {
        line: line + 1,
        message: message.to_string(),
    }
}

fn parse_indented(lines: &[&str], scopes: &mut Vec<RawScope>) -> Result<(), IngestError> {
    let mut lex = PyLex::default();
    let mut levels = vec![0usize];
    let mut open: Vec<(usize, usize)> = Vec::new();
    let mut last_content: Option<usize> = None;

    let close = |scopes: &mut Vec<RawScope>, s: usize, last: Option<usize>| {
        let start = scopes[s].header.end;
        let end = last.map_or(start, |l| (l + 1).max(start));
        scopes[s].body = start..end;
        scopes[s].footer = end..end;
    };

    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if lex.continuing() {
            lex.feed(line);
            if lex.depth < 0 {
                return Err(unbalanced(i, "unmatched closing bracket"));
            }
            last_content = Some(i);
            i += 1;
            continue;
        }
        let stripped = line.trim_start();
        if stripped.is_empty() || stripped.starts_with('#') {
            i += 1;
            continue;
        }

        let width = indent_width(line);
        if width > *levels.last().unwrap() {
            levels.push(width);
        } else {
            while width < *levels.last().unwrap() {
                levels.pop();
            }
            if width != *levels.last().unwrap() {
                return Err(unbalanced(i, "dedent does not match any outer indentation level"));
            }
        }
        while let Some(&(s, w)) = open.last() {
            if width > w {
                break;
            }
            close(scopes, s, last_content);
            open.pop();
        }

        if let Some((is_class, name)) = py_header(stripped) {
            let mut j = i;
            let colon = loop {
                let c = lex.feed(lines[j]);
                if lex.depth < 0 {
                    return Err(unbalanced(j, "unmatched closing bracket"));
                }
                if let Some(pos) = c {
                    break pos;
                }
                j += 1;
                if j >= lines.len() {
                    return Err(unbalanced(i, "declaration never reaches its `:`"));
                }
            };
            let parent = open.last().map_or(0, |&(s, _)| s);
            let scope = if is_class {
                Scope::Class
            } else if scopes[parent].scope == Scope::Class {
                Scope::Method
            } else {
                Scope::Function
            };
            let mut signature: Vec<&str> = lines[i..j].iter().map(|l| l.trim()).collect();
            signature.push(lines[j][..colon].trim());
            let tail = lines[j][colon + 1..].trim();
            let one_liner = !tail.is_empty() && !tail.starts_with('#');
            scopes.push(RawScope {
                scope,
                name: name.to_string(),
                signature: signature.join(" ").trim().to_string(),
                header: i..j + 1,
                body: j + 1..j + 1,
                footer: j + 1..j + 1,
                parent: Some(parent),
                children: Vec::new(),
            });
            let idx = scopes.len() - 1;
            if !one_liner {
                open.push((idx, width));
            }
            last_content = Some(j);
            i = j + 1;
            continue;
        }

        lex.feed(line);
        if lex.depth < 0 {
            return Err(unbalanced(i, "unmatched closing bracket"));
        }
        last_content = Some(i);
        i += 1;
    }
    if lex.continuing() {
        return Err(unbalanced(lines.len().saturating_sub(1), "unterminated bracket or string"));
    }
    while let Some((s, _)) = open.pop() {
        close(scopes, s, last_content);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Brace profile

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Semi,
}

#[derive(Default)]
struct BraceLex {
    block_comment: bool,
}

impl BraceLex {
    fn feed(&mut self, line: &str) -> Vec<(usize, Tok)> {
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let at = |k: usize| chars.get(k).map(|x| x.1);
        let mut out = Vec::new();
        let mut k = 0;
        while k < chars.len() {
            let (pos, c) = chars[k];
            if self.block_comment {
                if c == '*' && at(k + 1) == Some('/') {
                    self.block_comment = false;
                    k += 2;
                } else {
                    k += 1;
                }
                continue;
            }
            match c {
                '/' if at(k + 1) == Some('/') => break,
                '/' if at(k + 1) == Some('*') => {
                    self.block_comment = true;
                    k += 2;
                    continue;
                }
                '"' | '`' => {
                    k += 1;
                    while k < chars.len() && chars[k].1 != c {
                        k += if chars[k].1 == '\\' { 2 } else { 1 };
                    }
                }
                '\'' => {
                    // Character literal; a lone quote (lifetime) is ignored.
                    if at(k + 1) == Some('\\') {
                        k += 2;
                        while k < chars.len() && chars[k].1 != '\'' {
                            k += 1;
                        }
                    } else if at(k + 2) == Some('\'') {
                        k += 2;
                    }
                }
                '{' => out.push((pos, Tok::Open)),
                '}' => out.push((pos, Tok::Close)),
                ';' => out.push((pos, Tok::Semi)),
                _ => {}
            }
            k += 1;
        }
        out
    }
}

const MODIFIERS: &[&str] = &[
    "pub", "pub(crate)", "pub(super)", "public", "private", "protected", "internal", "static",
    "async", "export", "default", "unsafe", "extern", "final", "abstract", "virtual", "inline",
    "override", "const", "open", "sealed",
];
const CLASS_KW: &[&str] = &["class", "struct", "impl", "trait", "interface", "enum", "mod", "namespace"];
const FN_KW: &[&str] = &["fn", "function", "func", "def"];
const CONTROL: &[&str] = &[
    "if", "for", "while", "switch", "catch", "return", "else", "do", "sizeof", "match", "loop",
];

/// Classifies a declaration line: (is_class, name).
fn brace_header(stripped: &str) -> Option<(bool, String)> {
    let words: Vec<&str> = stripped.split_whitespace().collect();
    let mut w = 0;
    while w < words.len() && MODIFIERS.contains(&words[w]) {
        w += 1;
    }
    let first = words.get(w)?;
    let kw = first.split('<').next().unwrap_or(first);
    if CLASS_KW.contains(&kw) || FN_KW.contains(&kw) {
        let name = ident_prefix(words.get(w + 1)?);
        if name.is_empty() {
            return None;
        }
        return Some((CLASS_KW.contains(&kw), name.to_string()));
    }
    // C-style: `type name(args) {`
    let paren = stripped.find('(')?;
    let before: Vec<&str> = stripped[..paren].split_whitespace().collect();
    if before.len() < 2 {
        return None;
    }
    let name = before.last()?.trim_start_matches(['*', '&']);
    if name.is_empty()
        || ident_prefix(name) != name
        || CONTROL.contains(&name)
        || before.iter().any(|w| CONTROL.contains(w) || w.contains('='))
    {
        return None;
    }
    Some((false, name.to_string()))
}

fn parse_braced(lines: &[&str], scopes: &mut Vec<RawScope>) -> Result<(), IngestError> {
    let mut lex = BraceLex::default();
    let toks: Vec<Vec<(usize, Tok)>> = lines.iter().map(|l| lex.feed(l)).collect();

    // Match braces: (line, offset) of each `{` -> line of its `}`.
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut matching = std::collections::BTreeMap::new();
    let mut depth_at_start = vec![0usize; lines.len()];
    for (i, ts) in toks.iter().enumerate() {
        depth_at_start[i] = stack.len();
        for &(pos, t) in ts {
            match t {
                Tok::Open => stack.push((i, pos)),
                Tok::Close => {
                    let open = stack.pop().ok_or_else(|| unbalanced(i, "unmatched `}`"))?;
                    matching.insert(open, i);
                }
                Tok::Semi => {}
            }
        }
    }
    if let Some(&(line, _)) = stack.last() {
        return Err(unbalanced(line, "unclosed `{`"));
    }

    let mut open: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        while let Some(&s) = open.last() {
            if i >= scopes[s].body.end {
                open.pop();
            } else {
                break;
            }
        }
        let stripped = lines[i].trim_start();
        let header = if stripped.starts_with("//") || stripped.starts_with('*') {
            None
        } else {
            brace_header(stripped)
        };
        let Some((is_class, name)) = header else {
            i += 1;
            continue;
        };
        // Find the opening brace at this nesting level before any `;`.
        let base = depth_at_start[i];
        let mut found = None;
        'scan: for (j, ts) in toks.iter().enumerate().skip(i) {
            let mut depth = depth_at_start[j];
            for &(pos, t) in ts {
                match t {
                    Tok::Semi if depth == base => break 'scan,
                    Tok::Open if depth == base => {
                        found = Some((j, pos));
                        break 'scan;
                    }
                    Tok::Open => depth += 1,
                    Tok::Close => {
                        if depth == base {
                            break 'scan;
                        }
                        depth -= 1;
                    }
                    Tok::Semi => {}
                }
            }
        }
        let Some((j, pos)) = found else {
            i += 1;
            continue;
        };
        let k = matching[&(j, pos)];
        let parent = open.last().copied().unwrap_or(0);
        let scope = if is_class {
            Scope::Class
        } else if scopes[parent].scope == Scope::Class {
            Scope::Method
        } else {
            Scope::Function
        };
        let mut signature: Vec<&str> = lines[i..j].iter().map(|l| l.trim()).collect();
        signature.push(lines[j][..pos].trim());
        let (body, footer) = if k == j {
            (j + 1..j + 1, j + 1..j + 1)
        } else {
            (j + 1..k, k..k + 1)
        };
        scopes.push(RawScope {
            scope,
            name,
            signature: signature.join(" ").trim().to_string(),
            header: i..j + 1,
            body,
            footer,
            parent: Some(parent),
            children: Vec::new(),
        });
        if k > j {
            open.push(scopes.len() - 1);
        }
        i = j + 1;
    }
    Ok(())
}
