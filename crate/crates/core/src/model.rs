//! Relation schema, tuples, and conditional functional dependencies.
//!
//! Rules are always held in normal form: one RHS attribute and one pattern
//! tuple per [`CfdRule`]. A source line with several RHS attributes is split
//! by [`normalize`], and the pieces keep a `source_id` so that reporting (and
//! the joint-rule reading used by ranking) can regroup them.
//!
//! Rule file syntax, one source CFD per line:
//!
//! ```text
//! # ZIP codes determine city and state
//! p1: ZIP -> CT, STT : 46360 || Michigan City, IN
//! p5: STR, CT -> ZIP : -, Fort Wayne || -
//! ```
//!
//! `-` is the wildcard, `\-` a literal hyphen, and `\` escapes `,` `|` `#` `:`
//! inside values. The pattern part may be omitted, which makes every position
//! a wildcard (a plain FD).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of an attribute in the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrId(pub usize);

impl AttrId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Stable, opaque tuple identifier (the `__id` column, or the row number).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(pub String);

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TupleId {
    fn from(s: &str) -> Self {
        TupleId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    relation: String,
    attributes: Vec<String>,
    lookup: HashMap<String, AttrId>,
}

impl Schema {
    pub fn new<S: Into<String>>(relation: impl Into<String>, attributes: Vec<S>) -> Result<Self> {
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        let mut lookup = HashMap::with_capacity(attributes.len());
        for (i, name) in attributes.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::InvalidSchema(format!("attribute {i} has an empty name")));
            }
            if lookup.insert(name.clone(), AttrId(i)).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate attribute `{name}`")));
            }
        }
        Ok(Schema {
            relation: relation.into(),
            attributes,
            lookup,
        })
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attr(&self, name: &str) -> Option<AttrId> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, attr: AttrId) -> &str {
        &self.attributes[attr.0]
    }

    pub fn attr_ids(&self) -> impl Iterator<Item = AttrId> {
        (0..self.attributes.len()).map(AttrId)
    }

    /// Same attribute names in the same order; the relation name is ignored.
    pub fn compatible_with(&self, other: &Schema) -> bool {
        self.attributes == other.attributes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub id: TupleId,
    pub cells: Vec<String>,
    pub weight: f64,
}

impl Tuple {
    pub fn new(id: impl Into<String>, cells: Vec<String>) -> Self {
        Tuple {
            id: TupleId(id.into()),
            cells,
            weight: 1.0,
        }
    }

    pub fn get(&self, attr: AttrId) -> &str {
        &self.cells[attr.0]
    }
}

/// A relation instance. Rows are addressed internally by their position,
/// externally by [`TupleId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    tuples: Vec<Tuple>,
    by_id: HashMap<TupleId, usize>,
}

const ID_COLUMN: &str = "__id";
const WEIGHT_COLUMN: &str = "__weight";

impl Dataset {
    pub fn new(schema: Schema, tuples: Vec<Tuple>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(tuples.len());
        for (row, t) in tuples.iter().enumerate() {
            if t.cells.len() != schema.len() {
                return Err(Error::InvalidData(format!(
                    "tuple `{}` has {} cells, schema has {} attributes",
                    t.id,
                    t.cells.len(),
                    schema.len()
                )));
            }
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "tuple `{}` has invalid weight {}",
                    t.id, t.weight
                )));
            }
            if by_id.insert(t.id.clone(), row).is_some() {
                return Err(Error::InvalidData(format!("duplicate tuple id `{}`", t.id)));
            }
        }
        Ok(Dataset { schema, tuples, by_id })
    }

    /// Builds a dataset from string rows; ids are `t1`, `t2`, ...
    pub fn from_rows(schema: Schema, rows: Vec<Vec<&str>>) -> Result<Self> {
        let tuples = rows
            .into_iter()
            .enumerate()
            .map(|(i, cells)| Tuple::new(format!("t{}", i + 1), cells.into_iter().map(String::from).collect()))
            .collect();
        Dataset::new(schema, tuples)
    }

    /// Reads CSV with a header row. `__id` and `__weight` columns are optional;
    /// without `__id` the zero-based row index is the id.
    pub fn from_csv_reader<R: Read>(relation: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut id_col = None;
        let mut weight_col = None;
        let mut attr_cols = Vec::new();
        let mut names = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            match h {
                ID_COLUMN => id_col = Some(i),
                WEIGHT_COLUMN => weight_col = Some(i),
                _ => {
                    attr_cols.push(i);
                    names.push(h.to_string());
                }
            }
        }
        let schema = Schema::new(relation, names)?;
        let mut tuples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let id = match id_col {
                Some(c) => record.get(c).unwrap_or_default().to_string(),
                None => row.to_string(),
            };
            let weight = match weight_col {
                Some(c) => {
                    let raw = record.get(c).unwrap_or_default().trim();
                    raw.parse::<f64>()
                        .map_err(|_| Error::InvalidData(format!("row {row}: bad weight `{raw}`")))?
                }
                None => 1.0,
            };
            let cells = attr_cols
                .iter()
                .map(|&c| record.get(c).unwrap_or_default().to_string())
                .collect();
            tuples.push(Tuple {
                id: TupleId(id),
                cells,
                weight,
            });
        }
        Dataset::new(schema, tuples)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let relation = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("relation")
            .to_string();
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(&relation, file)
    }

    /// Writes CSV with an `__id` column first; `__weight` is emitted only when
    /// some tuple carries a non-unit weight.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let weighted = self.tuples.iter().any(|t| t.weight != 1.0);
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = vec![ID_COLUMN];
        header.extend(self.schema.attributes().iter().map(String::as_str));
        if weighted {
            header.push(WEIGHT_COLUMN);
        }
        w.write_record(&header)?;
        for t in &self.tuples {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            rec.push(t.id.0.clone());
            rec.extend(t.cells.iter().cloned());
            if weighted {
                rec.push(t.weight.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn tuple(&self, row: usize) -> &Tuple {
        &self.tuples[row]
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn cell(&self, row: usize, attr: AttrId) -> &str {
        &self.tuples[row].cells[attr.0]
    }

    pub fn weight(&self, row: usize) -> f64 {
        self.tuples[row].weight
    }

    pub fn row_of(&self, id: &TupleId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub(crate) fn set_cell(&mut self, row: usize, attr: AttrId, value: String) -> String {
        std::mem::replace(&mut self.tuples[row].cells[attr.0], value)
    }

    /// Checks that `other` has the same attributes and the same tuple ids in
    /// the same order, the precondition for comparing a working copy with its
    /// ground truth.
    pub fn check_aligned(&self, other: &Dataset) -> Result<()> {
        if !self.schema.compatible_with(&other.schema) {
            return Err(Error::SchemaMismatch(format!(
                "attributes differ: [{}] vs [{}]",
                self.schema.attributes().join(","),
                other.schema.attributes().join(",")
            )));
        }
        if self.len() != other.len() {
            return Err(Error::SchemaMismatch(format!(
                "tuple counts differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.tuples.iter().zip(&other.tuples) {
            if a.id != b.id {
                return Err(Error::SchemaMismatch(format!(
                    "tuple ids differ: `{}` vs `{}`",
                    a.id, b.id
                )));
            }
        }
        Ok(())
    }

    /// Distinct values of a column with their multiplicities.
    pub fn domain(&self, attr: AttrId) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for t in &self.tuples {
            *out.entry(t.cells[attr.0].clone()).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternValue {
    Wildcard,
    Const(String),
}

impl PatternValue {
    pub fn matches(&self, value: &str) -> bool {
        match self {
            PatternValue::Wildcard => true,
            PatternValue::Const(c) => c == value,
        }
    }

    pub fn constant(&self) -> Option<&str> {
        match self {
            PatternValue::Wildcard => None,
            PatternValue::Const(c) => Some(c),
        }
    }
}

impl fmt::Display for PatternValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternValue::Wildcard => f.write_str("-"),
            PatternValue::Const(c) if c == "-" => f.write_str("\\-"),
            PatternValue::Const(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Constant,
    Variable,
}

/// A normalized CFD `(X -> A, t_p)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfdRule {
    pub id: String,
    pub source_id: String,
    pub lhs: Vec<AttrId>,
    pub rhs: AttrId,
    pub lhs_pattern: Vec<PatternValue>,
    pub rhs_pattern: PatternValue,
}

impl CfdRule {
    pub fn kind(&self) -> RuleKind {
        match self.rhs_pattern {
            PatternValue::Const(_) => RuleKind::Constant,
            PatternValue::Wildcard => RuleKind::Variable,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.kind() == RuleKind::Constant
    }

    pub fn mentions(&self, attr: AttrId) -> bool {
        self.rhs == attr || self.lhs.contains(&attr)
    }

    /// `X ∪ {A}` in lhs order followed by the rhs.
    pub fn attrs(&self) -> impl Iterator<Item = AttrId> + '_ {
        self.lhs.iter().copied().chain(std::iter::once(self.rhs))
    }

    pub fn lhs_position(&self, attr: AttrId) -> Option<usize> {
        self.lhs.iter().position(|&a| a == attr)
    }

    /// Whether the cells produced by `cell` fall in the rule's context.
    pub fn in_context<'a>(&self, cell: impl Fn(AttrId) -> &'a str) -> bool {
        self.lhs.iter().zip(&self.lhs_pattern).all(|(&a, p)| p.matches(cell(a)))
    }

    pub fn display(&self, schema: &Schema) -> String {
        let lhs: Vec<&str> = self.lhs.iter().map(|&a| schema.name(a)).collect();
        let pat: Vec<String> = self.lhs_pattern.iter().map(ToString::to_string).collect();
        format!(
            "{}: {} -> {} : {} || {}",
            self.id,
            lhs.join(", "),
            schema.name(self.rhs),
            pat.join(", "),
            self.rhs_pattern
        )
    }
}

/// `t[attrs] ≍ pattern`: every position is a wildcard or equals the cell.
pub fn matches_pattern(t: &Tuple, attrs: &[AttrId], pattern: &[PatternValue]) -> bool {
    debug_assert_eq!(attrs.len(), pattern.len());
    attrs.iter().zip(pattern).all(|(&a, p)| p.matches(t.get(a)))
}

/// Splits `X -> {A1, A2, ...}` into one rule per RHS attribute. A single-RHS
/// rule keeps its source id; otherwise ids are `<source>.<k>` with `k`
/// counting RHS positions from 1.
pub fn normalize(
    source_id: &str,
    lhs: &[AttrId],
    lhs_pattern: &[PatternValue],
    rhs: &[(AttrId, PatternValue)],
) -> Vec<CfdRule> {
    rhs.iter()
        .enumerate()
        .map(|(k, (attr, pat))| CfdRule {
            id: if rhs.len() == 1 {
                source_id.to_string()
            } else {
                format!("{}.{}", source_id, k + 1)
            },
            source_id: source_id.to_string(),
            lhs: lhs.to_vec(),
            rhs: *attr,
            lhs_pattern: lhs_pattern.to_vec(),
            rhs_pattern: pat.clone(),
        })
        .collect()
}

/// Normalized rule set plus per-attribute lookup.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<CfdRule>,
    source_text: String,
    by_attr: Vec<Vec<usize>>,
    sources: Vec<(String, Vec<usize>)>,
}

impl RuleSet {
    pub fn new(rules: Vec<CfdRule>, schema: &Schema, source_text: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateRule {
                    line: 0,
                    id: r.id.clone(),
                });
            }
        }
        let mut by_attr = vec![Vec::new(); schema.len()];
        for (i, r) in rules.iter().enumerate() {
            for a in r.attrs() {
                if a.0 >= schema.len() {
                    return Err(Error::InvalidSchema(format!(
                        "rule `{}` references attribute #{}",
                        r.id, a.0
                    )));
                }
                if !by_attr[a.0].contains(&i) {
                    by_attr[a.0].push(i);
                }
            }
        }
        let mut sources: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            match sources.iter_mut().find(|(s, _)| *s == r.source_id) {
                Some((_, members)) => members.push(i),
                None => sources.push((r.source_id.clone(), vec![i])),
            }
        }
        Ok(RuleSet {
            rules,
            source_text: source_text.into(),
            by_attr,
            sources,
        })
    }

    pub fn rules(&self) -> &[CfdRule] {
        &self.rules
    }

    pub fn rule(&self, idx: usize) -> &CfdRule {
        &self.rules[idx]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Indices of rules whose `X ∪ {A}` contains `attr`.
    pub fn mentioning(&self, attr: AttrId) -> &[usize] {
        &self.by_attr[attr.0]
    }

    /// Source rules (as written in the file) with the indices of their
    /// normalized pieces, in file order.
    pub fn sources(&self) -> &[(String, Vec<usize>)] {
        &self.sources
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }
}

/// Parses a rule file against `schema`.
pub fn parse_rules(text: &str, schema: &Schema) -> Result<RuleSet> {
    let mut rules = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_line(line, line_no, schema)?;
        if ids.contains_key(&parsed.id) {
            return Err(Error::DuplicateRule {
                line: line_no,
                id: parsed.id,
            });
        }
        ids.insert(parsed.id.clone(), line_no);
        let normalized = normalize(&parsed.id, &parsed.lhs, &parsed.lhs_pattern, &parsed.rhs);
        for r in &normalized {
            if ids.contains_key(&r.id) && r.id != parsed.id {
                return Err(Error::DuplicateRule {
                    line: line_no,
                    id: r.id.clone(),
                });
            }
        }
        for r in &normalized {
            ids.insert(r.id.clone(), line_no);
        }
        rules.extend(normalized);
    }
    RuleSet::new(rules, schema, text)
}

struct ParsedLine {
    id: String,
    lhs: Vec<AttrId>,
    lhs_pattern: Vec<PatternValue>,
    rhs: Vec<(AttrId, PatternValue)>,
}

fn strip_comment(line: &str) -> &str {
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' => escaped = true,
            '#' => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Byte offset of the first unescaped occurrence of `needle`.
fn find_unescaped(s: &str, needle: &str) -> Option<usize> {
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        if c == '\\' {
            escaped = true;
            continue;
        }
        if s[i..].starts_with(needle) {
            return Some(i);
        }
    }
    None
}

fn split_unescaped(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == sep {
            parts.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_value(token: &str, line: usize) -> Result<PatternValue> {
    let token = token.trim();
    if token.is_empty() {
        return Err(Error::RuleSyntax {
            line,
            message: "empty pattern value (use `-` for a wildcard)".into(),
        });
    }
    if token == "-" {
        return Ok(PatternValue::Wildcard);
    }
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(n) => out.push(n),
                None => {
                    return Err(Error::RuleSyntax {
                        line,
                        message: "dangling escape at end of value".into(),
                    })
                }
            }
        } else {
            out.push(c);
        }
    }
    Ok(PatternValue::Const(out))
}

fn parse_attrs(part: &str, line: usize, schema: &Schema) -> Result<Vec<AttrId>> {
    let mut out = Vec::new();
    for name in part.split(',') {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::RuleSyntax {
                line,
                message: "empty attribute name".into(),
            });
        }
        let attr = schema.attr(name).ok_or_else(|| Error::UnknownAttribute {
            line,
            name: name.to_string(),
        })?;
        if out.contains(&attr) {
            return Err(Error::RuleSyntax {
                line,
                message: format!("attribute `{name}` listed twice"),
            });
        }
        out.push(attr);
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize, schema: &Schema) -> Result<ParsedLine> {
    let syntax = |message: &str| Error::RuleSyntax {
        line: line_no,
        message: message.to_string(),
    };
    let colon = line.find(':').ok_or_else(|| syntax("expected `ID:` prefix"))?;
    let id = line[..colon].trim();
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(syntax("rule id must be a non-empty word"));
    }
    let rest = &line[colon + 1..];
    let arrow = rest.find("->").ok_or_else(|| syntax("expected `->`"))?;
    let lhs_part = &rest[..arrow];
    let after = &rest[arrow + 2..];
    let (rhs_part, pattern_part) = match find_unescaped(after, ":") {
        Some(p) => (&after[..p], Some(&after[p + 1..])),
        None => (after, None),
    };
    let lhs = parse_attrs(lhs_part, line_no, schema)?;
    let rhs_attrs = parse_attrs(rhs_part, line_no, schema)?;
    for &a in &rhs_attrs {
        if lhs.contains(&a) {
            return Err(Error::RhsInLhs {
                line: line_no,
                rule: id.to_string(),
                attribute: schema.name(a).to_string(),
            });
        }
    }
    let (lhs_pattern, rhs_pattern) = match pattern_part {
        None => (
            vec![PatternValue::Wildcard; lhs.len()],
            vec![PatternValue::Wildcard; rhs_attrs.len()],
        ),
        Some(p) => {
            let bar = find_unescaped(p, "||").ok_or_else(|| syntax("expected `||` between LHS and RHS patterns"))?;
            let lp = split_unescaped(&p[..bar], ',')
                .into_iter()
                .map(|t| parse_value(t, line_no))
                .collect::<Result<Vec<_>>>()?;
            let rp = split_unescaped(&p[bar + 2..], ',')
                .into_iter()
                .map(|t| parse_value(t, line_no))
                .collect::<Result<Vec<_>>>()?;
            if lp.len() != lhs.len() {
                return Err(syntax(&format!(
                    "LHS has {} attributes but {} pattern values",
                    lhs.len(),
                    lp.len()
                )));
            }
            if rp.len() != rhs_attrs.len() {
                return Err(syntax(&format!(
                    "RHS has {} attributes but {} pattern values",
                    rhs_attrs.len(),
                    rp.len()
                )));
            }
            (lp, rp)
        }
    };
    Ok(ParsedLine {
        id: id.to_string(),
        lhs,
        lhs_pattern,
        rhs: rhs_attrs.into_iter().zip(rhs_pattern).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer() -> Schema {
        Schema::new("Customer", vec!["Name", "SRC", "STR", "CT", "STT", "ZIP"]).unwrap()
    }

    #[test]
    fn multi_rhs_line_is_split() {
        let s = customer();
        let rs = parse_rules("p1: ZIP -> CT, STT : 46360 || Michigan City, IN", &s).unwrap();
        assert_eq!(rs.len(), 2);
        let (a, b) = (rs.rule(0), rs.rule(1));
        assert_eq!(a.id, "p1.1");
        assert_eq!(b.id, "p1.2");
        assert_eq!(a.rhs, s.attr("CT").unwrap());
        assert_eq!(a.rhs_pattern, PatternValue::Const("Michigan City".into()));
        assert_eq!(b.rhs_pattern, PatternValue::Const("IN".into()));
        assert_eq!(a.lhs_pattern, vec![PatternValue::Const("46360".into())]);
        assert!(a.is_constant() && b.is_constant());
        assert_eq!(rs.sources()[0], ("p1".to_string(), vec![0, 1]));
    }

    #[test]
    fn variable_rule_with_partial_pattern() {
        let s = customer();
        let rs = parse_rules("p5: STR, CT -> ZIP : -, Fort Wayne || -", &s).unwrap();
        let r = rs.rule(0);
        assert_eq!(r.id, "p5");
        assert_eq!(r.kind(), RuleKind::Variable);
        assert_eq!(
            r.lhs_pattern,
            vec![PatternValue::Wildcard, PatternValue::Const("Fort Wayne".into())]
        );
    }

    #[test]
    fn empty_and_comment_only_files() {
        let s = customer();
        assert!(parse_rules("", &s).unwrap().is_empty());
        assert!(parse_rules("# nothing\n\n   \n", &s).unwrap().is_empty());
    }

    #[test]
    fn comments_escapes_and_plain_fds() {
        let s = customer();
        let text = "fd: ZIP -> STT   # plain FD\nh: STR -> CT : \\- || a\\,b\\#c";
        let rs = parse_rules(text, &s).unwrap();
        assert_eq!(rs.rule(0).lhs_pattern, vec![PatternValue::Wildcard]);
        assert_eq!(rs.rule(0).rhs_pattern, PatternValue::Wildcard);
        assert_eq!(rs.rule(1).lhs_pattern, vec![PatternValue::Const("-".into())]);
        assert_eq!(rs.rule(1).rhs_pattern, PatternValue::Const("a,b#c".into()));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let s = customer();
        match parse_rules("\n\np: ZIP => CT", &s) {
            Err(Error::RuleSyntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_rules("p: ZAP -> CT", &s) {
            Err(Error::UnknownAttribute { line: 1, name }) => assert_eq!(name, "ZAP"),
            other => panic!("{other:?}"),
        }
        match parse_rules("p: ZIP, CT -> CT", &s) {
            Err(Error::RhsInLhs { attribute, .. }) => assert_eq!(attribute, "CT"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_rules("p: ZIP -> CT : 1, 2 || x", &s),
            Err(Error::RuleSyntax { .. })
        ));
        assert!(matches!(
            parse_rules("p: ZIP -> CT\np: ZIP -> STT", &s),
            Err(Error::DuplicateRule { line: 2, .. })
        ));
    }

    #[test]
    fn pattern_matching() {
        let s = customer();
        let t = Tuple::new(
            "t8",
            ["Sindy", "H2", "Sherden RD", "Fort Wayne", "IN", "46774"]
                .iter()
                .map(|x| x.to_string())
                .collect(),
        );
        let attrs = [s.attr("STR").unwrap(), s.attr("CT").unwrap(), s.attr("STT").unwrap()];
        let pat = [
            PatternValue::Wildcard,
            PatternValue::Const("Fort Wayne".into()),
            PatternValue::Wildcard,
        ];
        assert!(matches_pattern(&t, &attrs, &pat));
        let zip = [s.attr("ZIP").unwrap()];
        assert!(!matches_pattern(&t, &zip, &[PatternValue::Const("46360".into())]));
        assert!(matches_pattern(&t, &zip, &[PatternValue::Wildcard]));
        // case-sensitive
        assert!(!matches_pattern(
            &t,
            &[s.attr("CT").unwrap()],
            &[PatternValue::Const("FORT WAYNE".into())]
        ));
    }

    #[test]
    fn csv_round_trip_with_ids_and_weights() {
        let text = "__id,A,B,__weight\nx,1,2,0.5\ny,3,4,2\n";
        let d = Dataset::from_csv_reader("r", text.as_bytes()).unwrap();
        assert_eq!(d.schema().attributes(), &["A".to_string(), "B".to_string()]);
        assert_eq!(d.row_of(&TupleId::from("y")), Some(1));
        assert_eq!(d.weight(0), 0.5);
        let mut out = Vec::new();
        d.to_csv_writer(&mut out).unwrap();
        let back = Dataset::from_csv_reader("r", out.as_slice()).unwrap();
        assert_eq!(back, d);

        let plain = Dataset::from_csv_reader("r", "A\nfoo\nbar\n".as_bytes()).unwrap();
        assert_eq!(plain.tuple(1).id, TupleId::from("1"));
        assert_eq!(plain.weight(1), 1.0);
    }

    #[test]
    fn dataset_rejects_duplicate_ids_and_negative_weights() {
        assert!(Dataset::from_csv_reader("r", "__id,A\nx,1\nx,2\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("r", "A,__weight\n1,-1\n".as_bytes()).is_err());
        assert!(Schema::new("r", vec!["A", "A"]).is_err());
        assert!(Schema::new("r", vec!["A", " "]).is_err());
    }
}
