//! Pattern definitions and candidate role mappings.
//!
//! A pattern is a named, ordered list of roles; a candidate mapping binds
//! every role to one in-project type. Primary roles carry the pattern's
//! identity: two mappings that agree on all primary-role bindings describe
//! the same occurrence and collapse into one unique mapping, keyed by
//! [`CandidateMapping::unique_key`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asg::{Asg, TypeId, TypeKind};
use crate::error::{Error, Result};

/// The four detected patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Singleton,
    TemplateMethod,
    Composite,
    Decorator,
}

pub const ALL_PATTERNS: [Pattern; 4] = [
    Pattern::Singleton,
    Pattern::TemplateMethod,
    Pattern::Composite,
    Pattern::Decorator,
];

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Singleton => "singleton",
            Pattern::TemplateMethod => "template-method",
            Pattern::Composite => "composite",
            Pattern::Decorator => "decorator",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singleton" => Ok(Pattern::Singleton),
            "template-method" => Ok(Pattern::TemplateMethod),
            "composite" => Ok(Pattern::Composite),
            "decorator" => Ok(Pattern::Decorator),
            other => Err(Error::Schema(format!(
                "unknown pattern {other:?}; expected singleton, template-method, \
                 composite, or decorator"
            ))),
        }
    }
}

/// Role layout of one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternDef {
    pub pattern: Pattern,
    /// Role names; order fixes feature map column order.
    pub roles: &'static [&'static str],
    /// Indices into `roles` of the identity-carrying roles.
    pub primary: &'static [usize],
}

impl PatternDef {
    pub fn k(&self) -> usize {
        self.roles.len()
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }
}

const SINGLETON_DEF: PatternDef = PatternDef {
    pattern: Pattern::Singleton,
    roles: &["Singleton"],
    primary: &[0],
};

const TEMPLATE_METHOD_DEF: PatternDef = PatternDef {
    pattern: Pattern::TemplateMethod,
    roles: &["AbstractClass", "ConcreteClass"],
    primary: &[0],
};

const COMPOSITE_DEF: PatternDef = PatternDef {
    pattern: Pattern::Composite,
    roles: &["Component", "Composite", "Leaf"],
    primary: &[0],
};

const DECORATOR_DEF: PatternDef = PatternDef {
    pattern: Pattern::Decorator,
    roles: &["Component", "ConcreteComponent", "Decorator", "ConcreteDecorator"],
    primary: &[0, 2],
};

pub fn pattern_def(pattern: Pattern) -> &'static PatternDef {
    match pattern {
        Pattern::Singleton => &SINGLETON_DEF,
        Pattern::TemplateMethod => &TEMPLATE_METHOD_DEF,
        Pattern::Composite => &COMPOSITE_DEF,
        Pattern::Decorator => &DECORATOR_DEF,
    }
}

/// One candidate occurrence: a total binding of the pattern's roles to
/// in-project types, in role order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CandidateMapping {
    pub pattern: Pattern,
    pub project: String,
    /// Bound type per role, aligned with the pattern definition's role order.
    pub bindings: Vec<TypeId>,
}

impl CandidateMapping {
    /// Builds and validates a mapping against its graph: every role bound,
    /// every bound type in-project, and no two roles sharing a type unless
    /// the pattern has a single role.
    pub fn new(asg: &Asg, pattern: Pattern, bindings: Vec<TypeId>) -> Result<Self> {
        let mapping = Self::from_parts(pattern, asg.project(), bindings)?;
        for (role, id) in mapping.role_bindings() {
            if id.index() >= asg.types().len() {
                return Err(Error::Schema(format!(
                    "{pattern} role {role} binds unknown type id {id}"
                )));
            }
            if !asg.is_internal(id) {
                return Err(Error::Schema(format!(
                    "{pattern} role {role} binds external type {}",
                    asg.type_node(id).name
                )));
            }
        }
        Ok(mapping)
    }

    /// Rebuilds a mapping from stored parts, checking shape but not graph
    /// membership. Intended for deserializing artifacts that were validated
    /// when written; anything user-supplied should go through [`Self::new`].
    pub fn from_parts(pattern: Pattern, project: &str, bindings: Vec<TypeId>) -> Result<Self> {
        let def = pattern_def(pattern);
        if bindings.len() != def.k() {
            return Err(Error::Schema(format!(
                "{pattern} binds {} roles, got {}",
                def.k(),
                bindings.len()
            )));
        }
        if def.k() > 1 {
            let mut sorted = bindings.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != bindings.len() {
                return Err(Error::Schema(format!(
                    "{pattern} binds one type to two roles"
                )));
            }
        }
        Ok(CandidateMapping {
            pattern,
            project: project.to_string(),
            bindings,
        })
    }

    pub fn def(&self) -> &'static PatternDef {
        pattern_def(self.pattern)
    }

    pub fn binding(&self, role: &str) -> Option<TypeId> {
        self.def().role_index(role).map(|i| self.bindings[i])
    }

    /// Role name and bound type, in column order.
    pub fn role_bindings(&self) -> impl Iterator<Item = (&'static str, TypeId)> + '_ {
        self.def()
            .roles
            .iter()
            .copied()
            .zip(self.bindings.iter().copied())
    }

    /// Equivalence key over primary-role bindings. Two mappings of the same
    /// pattern in the same project get equal keys exactly when their primary
    /// roles bind the same types. Type ids are only unique within a project,
    /// so the project is part of the key.
    pub fn unique_key(&self) -> String {
        let def = self.def();
        let mut parts: Vec<String> = def
            .primary
            .iter()
            .map(|i| format!("{}={}", def.roles[*i], self.bindings[*i].0))
            .collect();
        parts.sort();
        format!("{}|{}|{}", self.pattern, self.project, parts.join(","))
    }
}

// ---------------------------------------------------------------------------
// Candidate dump
// ---------------------------------------------------------------------------

/// Kind of type bound to the `Component` role, recorded because the sampler
/// accepts interfaces, abstract classes, and concrete classes alike there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Interface,
    AbstractClass,
    ConcreteClass,
}

pub fn component_kind(asg: &Asg, id: TypeId) -> ComponentKind {
    let node = asg.type_node(id);
    match node.kind {
        TypeKind::Interface => ComponentKind::Interface,
        TypeKind::Class if node.is_abstract => ComponentKind::AbstractClass,
        TypeKind::Class => ComponentKind::ConcreteClass,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRecord {
    pattern: Pattern,
    project: String,
    bindings: BTreeMap<String, u32>,
    unique_key: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    component_kind: Option<ComponentKind>,
}

/// Writes candidates as line-delimited JSON, one record per mapping.
pub fn write_candidates(
    asg: &Asg,
    candidates: &[CandidateMapping],
    mut out: impl Write,
) -> Result<()> {
    for c in candidates {
        let record = CandidateRecord {
            pattern: c.pattern,
            project: c.project.clone(),
            bindings: c
                .role_bindings()
                .map(|(role, id)| (role.to_string(), id.0))
                .collect(),
            unique_key: c.unique_key(),
            component_kind: c.binding("Component").map(|id| component_kind(asg, id)),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_candidates(asg: &Asg, candidates: &[CandidateMapping], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_candidates(asg, candidates, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a candidate dump, revalidating each mapping against the graph.
pub fn load_candidates(asg: &Asg, path: &Path) -> Result<Vec<CandidateMapping>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CandidateRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("candidate dump line {}: {e}", lineno + 1)))?;
        let def = pattern_def(record.pattern);
        let mut bindings = Vec::with_capacity(def.k());
        for role in def.roles {
            let id = record.bindings.get(*role).ok_or_else(|| {
                Error::Schema(format!(
                    "candidate dump line {}: missing role {role:?}",
                    lineno + 1
                ))
            })?;
            bindings.push(TypeId(*id));
        }
        if record.bindings.len() != def.k() {
            return Err(Error::Schema(format!(
                "candidate dump line {}: extra roles for {}",
                lineno + 1,
                record.pattern
            )));
        }
        let mapping = CandidateMapping::new(asg, record.pattern, bindings)
            .map_err(|e| Error::Schema(format!("candidate dump line {}: {e}", lineno + 1)))?;
        if record.project != mapping.project {
            return Err(Error::Schema(format!(
                "candidate dump line {}: project {:?} does not match graph project {:?}",
                lineno + 1,
                record.project,
                mapping.project
            )));
        }
        if record.unique_key != mapping.unique_key() {
            return Err(Error::Schema(format!(
                "candidate dump line {}: stored unique_key {:?} disagrees with {:?}",
                lineno + 1,
                record.unique_key,
                mapping.unique_key()
            )));
        }
        out.push(mapping);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_sources;

    fn drawing() -> Asg {
        let text = include_str!("../tests/fixtures/drawing/Drawing.java");
        parse_sources("draw", &[("Drawing.java".to_string(), text.to_string())]).unwrap()
    }

    #[test]
    fn defs_have_expected_shapes() {
        assert_eq!(pattern_def(Pattern::Singleton).k(), 1);
        assert_eq!(pattern_def(Pattern::TemplateMethod).k(), 2);
        assert_eq!(pattern_def(Pattern::Composite).k(), 3);
        assert_eq!(pattern_def(Pattern::Decorator).k(), 4);
        for p in ALL_PATTERNS {
            let def = pattern_def(p);
            assert!(!def.primary.is_empty());
            assert!(def.primary.iter().all(|i| *i < def.k()));
        }
        assert_eq!(Pattern::TemplateMethod.to_string(), "template-method");
        assert_eq!(
            "template-method".parse::<Pattern>().unwrap(),
            Pattern::TemplateMethod
        );
        assert_eq!(
            serde_json::to_string(&Pattern::TemplateMethod).unwrap(),
            "\"template-method\""
        );
    }

    #[test]
    fn unique_key_collapses_secondary_roles() {
        let asg = drawing();
        let graphic = asg.find_type("draw.Graphic").unwrap();
        let picture = asg.find_type("draw.Picture").unwrap();
        let line = asg.find_type("draw.Line").unwrap();
        let rect = asg.find_type("draw.Rectangle").unwrap();

        let a =
            CandidateMapping::new(&asg, Pattern::Composite, vec![graphic, picture, line]).unwrap();
        let b =
            CandidateMapping::new(&asg, Pattern::Composite, vec![graphic, picture, rect]).unwrap();
        assert_eq!(a.unique_key(), b.unique_key());

        let c =
            CandidateMapping::new(&asg, Pattern::Composite, vec![picture, graphic, line]).unwrap();
        assert_ne!(a.unique_key(), c.unique_key());
    }

    #[test]
    fn unique_key_separates_patterns_and_projects() {
        let asg = drawing();
        let graphic = asg.find_type("draw.Graphic").unwrap();
        let picture = asg.find_type("draw.Picture").unwrap();

        let tm = CandidateMapping::new(&asg, Pattern::TemplateMethod, vec![graphic, picture])
            .unwrap();
        assert!(tm.unique_key().starts_with("template-method|draw|"));
        assert_eq!(tm.unique_key(), "template-method|draw|AbstractClass=0");

        let mut other = tm.clone();
        other.project = "other".to_string();
        assert_ne!(tm.unique_key(), other.unique_key());
    }

    #[test]
    fn decorator_key_uses_both_primaries() {
        let asg = drawing();
        let ids: Vec<TypeId> = ["draw.Graphic", "draw.Line", "draw.Picture", "draw.Rectangle"]
            .iter()
            .map(|n| asg.find_type(n).unwrap())
            .collect();
        let m = CandidateMapping::new(&asg, Pattern::Decorator, ids.clone()).unwrap();
        assert_eq!(
            m.unique_key(),
            format!("decorator|draw|Component={},Decorator={}", ids[0].0, ids[2].0)
        );
    }

    #[test]
    fn validation_rejects_bad_bindings() {
        let asg = drawing();
        let graphic = asg.find_type("draw.Graphic").unwrap();
        let picture = asg.find_type("draw.Picture").unwrap();

        // Wrong arity.
        assert!(CandidateMapping::new(&asg, Pattern::Composite, vec![graphic]).is_err());
        // Duplicate binding in a multi-role pattern.
        assert!(
            CandidateMapping::new(&asg, Pattern::TemplateMethod, vec![graphic, graphic]).is_err()
        );
        // Unknown id.
        assert!(CandidateMapping::new(&asg, Pattern::Singleton, vec![TypeId(99)]).is_err());
        // Self-binding is fine for the single-role pattern.
        assert!(CandidateMapping::new(&asg, Pattern::Singleton, vec![picture]).is_ok());
    }

    #[test]
    fn dump_round_trips_and_flags_component_kind() {
        let asg = drawing();
        let graphic = asg.find_type("draw.Graphic").unwrap();
        let picture = asg.find_type("draw.Picture").unwrap();
        let line = asg.find_type("draw.Line").unwrap();
        let candidates = vec![
            CandidateMapping::new(&asg, Pattern::Composite, vec![graphic, picture, line]).unwrap(),
            CandidateMapping::new(&asg, Pattern::Singleton, vec![picture]).unwrap(),
        ];

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("candidates.jsonl");
        save_candidates(&asg, &candidates, &path).unwrap();
        let back = load_candidates(&asg, &path).unwrap();
        assert_eq!(candidates, back);

        let text = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["component_kind"], "abstract_class");
        assert_eq!(first["pattern"], "composite");
        let second: serde_json::Value =
            serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert!(second.get("component_kind").is_none());
    }

    #[test]
    fn dump_rejects_tampered_keys() {
        let asg = drawing();
        let picture = asg.find_type("draw.Picture").unwrap();
        let candidates =
            vec![CandidateMapping::new(&asg, Pattern::Singleton, vec![picture]).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("candidates.jsonl");
        save_candidates(&asg, &candidates, &path).unwrap();
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replace("singleton|draw|Singleton=", "singleton|draw|Singleton=9");
        std::fs::write(&path, tampered).unwrap();
        assert!(load_candidates(&asg, &path).is_err());
    }
}
