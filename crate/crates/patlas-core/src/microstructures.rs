//! Micro-structure catalog and detection.
//!
//! A micro-structure is an elementary, role-typed design fragment: one type
//! inherits from another, a method delegates to a field's type, a constructor
//! is private, and so on. The catalog fixes an ordered list of such
//! predicates; the row order is part of the feature map geometry and must not
//! change between runs or releases.
//!
//! Detection is exhaustive and pure: for every catalog entry, every binding
//! of graph types to the entry's roles that satisfies the predicate is
//! reported, in ascending node id order. Two-role predicates may bind both
//! roles to the same type when the underlying relation genuinely holds
//! reflexively, for example a class holding a static field of its own type.
//! Such self-loops carry real signal and are folded into virtual role ids
//! during normalization.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asg::{Asg, EdgeKind, Member, MemberKind, TypeId, TypeKind, Visibility};
use crate::error::{Error, Result};

/// One catalog entry: a named predicate over one or two type roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsDef {
    /// Row index in the catalog, stable across runs.
    pub id: usize,
    pub name: &'static str,
    pub roles: &'static [&'static str],
}

/// The fixed detection catalog.
pub const CORE_CATALOG: [MsDef; 17] = [
    MsDef { id: 0, name: "PureType", roles: &["Type"] },
    MsDef { id: 1, name: "Inheritance", roles: &["Superclass", "Subclass"] },
    MsDef { id: 2, name: "InterfaceRealization", roles: &["Interface", "Implementer"] },
    MsDef { id: 3, name: "Aggregation", roles: &["Aggregator", "Aggregate"] },
    MsDef { id: 4, name: "Delegation", roles: &["Delegator", "Delegatee"] },
    MsDef { id: 5, name: "Redirection", roles: &["Redirecter", "Target"] },
    MsDef { id: 6, name: "Instantiation", roles: &["CreationSite", "TypeToCreate"] },
    MsDef { id: 7, name: "StaticField", roles: &["Holder", "FieldType"] },
    MsDef { id: 8, name: "StaticAccessor", roles: &["Provider", "ReturnedType"] },
    MsDef { id: 9, name: "PrivateConstructor", roles: &["Type"] },
    MsDef { id: 10, name: "AbstractHook", roles: &["Declarer", "Implementer"] },
    MsDef { id: 11, name: "CallsOwnAbstract", roles: &["Type"] },
    MsDef { id: 12, name: "Overriding", roles: &["Ancestor", "Overrider"] },
    MsDef { id: 13, name: "ParameterInjection", roles: &["Receiver", "ParameterType"] },
    MsDef { id: 14, name: "Production", roles: &["Producer", "Product"] },
    MsDef { id: 15, name: "SelfContained", roles: &["Type"] },
    MsDef { id: 16, name: "AbstractType", roles: &["Type"] },
];

/// Number of catalog rows.
pub const CATALOG_LEN: usize = CORE_CATALOG.len();

/// A satisfied predicate: the catalog entry plus one type per role, in the
/// entry's role order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MsInstance {
    pub ms_id: usize,
    pub nodes: Vec<TypeId>,
}

impl MsInstance {
    /// Pairs each role name with its bound type.
    pub fn bindings(&self) -> impl Iterator<Item = (&'static str, TypeId)> + '_ {
        CORE_CATALOG[self.ms_id]
            .roles
            .iter()
            .copied()
            .zip(self.nodes.iter().copied())
    }
}

/// All detected instances of one graph, indexed by catalog row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsDetections {
    per_row: Vec<Vec<MsInstance>>,
}

impl MsDetections {
    pub fn of(&self, ms_id: usize) -> &[MsInstance] {
        &self.per_row[ms_id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MsInstance> {
        self.per_row.iter().flatten()
    }

    pub fn total(&self) -> usize {
        self.per_row.iter().map(Vec::len).sum()
    }
}

/// Runs one catalog entry's detector over the graph.
///
/// Returns exactly the bindings that satisfy the predicate, sorted by bound
/// node ids. Detection reads the graph and nothing else, so repeated runs
/// return identical results.
pub fn detect_instances(asg: &Asg, def: &MsDef) -> Vec<MsInstance> {
    let mut found: BTreeSet<Vec<TypeId>> = BTreeSet::new();
    match def.id {
        0 => {
            for t in asg.types() {
                let no_fields = asg.fields_of(t.id).next().is_none();
                let all_abstract = asg.methods_of(t.id).all(|m| m.is_abstract);
                if no_fields && all_abstract {
                    found.insert(vec![t.id]);
                }
            }
        }
        1 => {
            for t in asg.types() {
                for sup in asg.extends_ancestors(t.id) {
                    found.insert(vec![*sup, t.id]);
                }
            }
        }
        2 => {
            for t in asg.types() {
                for a in asg.ancestors(t.id) {
                    if asg.type_node(*a).kind == TypeKind::Interface {
                        found.insert(vec![*a, t.id]);
                    }
                }
            }
        }
        3 => {
            for m in asg.members() {
                if m.kind == MemberKind::Field {
                    if let Some(t) = m.declared_type {
                        found.insert(vec![m.owner, t]);
                    }
                }
            }
        }
        4 => {
            for e in asg.edges() {
                if e.kind != EdgeKind::Calls {
                    continue;
                }
                let caller = asg.member(crate::asg::MemberId(e.src));
                let callee = asg.member(crate::asg::MemberId(e.dst));
                if caller.kind == MemberKind::Method
                    && callee.kind == MemberKind::Method
                    && caller.signature == callee.signature
                    && reaches_type(asg, caller, callee.owner)
                {
                    found.insert(vec![caller.owner, callee.owner]);
                }
            }
        }
        5 => {
            for e in asg.edges() {
                if e.kind != EdgeKind::Calls {
                    continue;
                }
                let caller = asg.member(crate::asg::MemberId(e.src));
                let callee = asg.member(crate::asg::MemberId(e.dst));
                if caller.kind == MemberKind::Method
                    && callee.kind == MemberKind::Method
                    && caller.name == callee.name
                    && caller.signature != callee.signature
                {
                    found.insert(vec![caller.owner, callee.owner]);
                }
            }
        }
        6 => {
            for e in asg.edges() {
                if e.kind == EdgeKind::Creates {
                    let site = asg.member(crate::asg::MemberId(e.src));
                    found.insert(vec![site.owner, TypeId(e.dst)]);
                }
            }
        }
        7 => {
            for m in asg.members() {
                if m.kind == MemberKind::Field && m.is_static {
                    if let Some(t) = m.declared_type {
                        found.insert(vec![m.owner, t]);
                    }
                }
            }
        }
        8 => {
            for m in asg.members() {
                if m.kind == MemberKind::Method && m.is_static {
                    if let Some(t) = m.declared_type {
                        found.insert(vec![m.owner, t]);
                    }
                }
            }
        }
        9 => {
            for t in asg.types() {
                let mut ctors = asg.constructors_of(t.id).peekable();
                if ctors.peek().is_some() && ctors.all(|c| c.visibility == Visibility::Private) {
                    found.insert(vec![t.id]);
                }
            }
        }
        10 => {
            for t in asg.types() {
                for hook in asg.methods_of(t.id).filter(|m| m.is_abstract) {
                    for sub in asg.subtypes(t.id) {
                        let implements = asg
                            .methods_of(*sub)
                            .any(|m| !m.is_abstract && m.signature == hook.signature);
                        if implements {
                            found.insert(vec![t.id, *sub]);
                        }
                    }
                }
            }
        }
        11 => {
            for t in asg.types() {
                for (src, dst) in asg.calls_from(t.id) {
                    let caller = asg.member(*src);
                    let callee = asg.member(*dst);
                    let own_or_ancestor =
                        callee.owner == t.id || asg.ancestors(t.id).contains(&callee.owner);
                    if caller.kind == MemberKind::Method
                        && !caller.is_abstract
                        && callee.is_abstract
                        && own_or_ancestor
                    {
                        found.insert(vec![t.id]);
                    }
                }
            }
        }
        12 => {
            for t in asg.types() {
                for base in asg.methods_of(t.id).filter(|m| !m.is_abstract) {
                    for sub in asg.subtypes(t.id) {
                        let redefines = asg
                            .methods_of(*sub)
                            .any(|m| !m.is_abstract && m.signature == base.signature);
                        if redefines {
                            found.insert(vec![t.id, *sub]);
                        }
                    }
                }
            }
        }
        13 => {
            for e in asg.edges() {
                if e.kind == EdgeKind::ParameterOfType {
                    let m = asg.member(crate::asg::MemberId(e.src));
                    if m.kind == MemberKind::Method {
                        found.insert(vec![m.owner, TypeId(e.dst)]);
                    }
                }
            }
        }
        14 => {
            for m in asg.members() {
                if m.kind == MemberKind::Method && !m.is_static {
                    if let Some(t) = m.declared_type {
                        found.insert(vec![m.owner, t]);
                    }
                }
            }
        }
        15 => {
            for t in asg.types() {
                if is_self_contained(asg, t.id) {
                    found.insert(vec![t.id]);
                }
            }
        }
        16 => {
            for t in asg.types() {
                if t.is_abstract {
                    found.insert(vec![t.id]);
                }
            }
        }
        other => panic!("unknown catalog entry {other}"),
    }
    found
        .into_iter()
        .map(|nodes| MsInstance {
            ms_id: def.id,
            nodes,
        })
        .collect()
}

/// A delegating call must go out through a field or parameter of the callee
/// owner's type; calls routed through untracked receivers do not count.
fn reaches_type(asg: &Asg, caller: &Member, target: TypeId) -> bool {
    let field = asg
        .fields_of(caller.owner)
        .any(|f| f.declared_type == Some(target));
    if field {
        return true;
    }
    asg.edges().iter().any(|e| {
        e.kind == EdgeKind::ParameterOfType && e.src == caller.id.0 && e.dst == target.0
    })
}

fn is_self_contained(asg: &Asg, t: TypeId) -> bool {
    let member_owned =
        |id: u32| asg.member(crate::asg::MemberId(id)).owner == t;
    for e in asg.edges() {
        let references = match e.kind {
            EdgeKind::FieldOfType
            | EdgeKind::ParameterOfType
            | EdgeKind::ReturnsType
            | EdgeKind::Creates => member_owned(e.src),
            _ => false,
        };
        if references {
            let dst = TypeId(e.dst);
            if dst != t && asg.is_internal(dst) {
                return false;
            }
        }
    }
    true
}

/// Runs the whole catalog. Entries are independent, so the union is stable
/// under any detection order; rows come back in catalog order regardless.
pub fn detect_all(asg: &Asg) -> MsDetections {
    MsDetections {
        per_row: CORE_CATALOG
            .iter()
            .map(|def| detect_instances(asg, def))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Instance dump
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    ms_id: usize,
    name: String,
    bindings: std::collections::BTreeMap<String, u32>,
}

/// Writes detections as line-delimited JSON records.
pub fn write_detections(detections: &MsDetections, mut out: impl Write) -> Result<()> {
    for inst in detections.iter() {
        let record = InstanceRecord {
            ms_id: inst.ms_id,
            name: CORE_CATALOG[inst.ms_id].name.to_string(),
            bindings: inst
                .bindings()
                .map(|(role, node)| (role.to_string(), node.0))
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_detections(detections: &MsDetections, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_detections(detections, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a detection dump produced by [`write_detections`].
pub fn load_detections(path: &Path) -> Result<MsDetections> {
    let file = fs::File::open(path)?;
    let mut per_row: Vec<Vec<MsInstance>> = vec![Vec::new(); CATALOG_LEN];
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("detection dump line {}: {e}", lineno + 1)))?;
        let def = CORE_CATALOG.get(record.ms_id).ok_or_else(|| {
            Error::Schema(format!(
                "detection dump line {}: unknown ms_id {}",
                lineno + 1,
                record.ms_id
            ))
        })?;
        if record.name != def.name {
            return Err(Error::Schema(format!(
                "detection dump line {}: ms_id {} is named {:?}, not {:?}",
                lineno + 1,
                record.ms_id,
                def.name,
                record.name
            )));
        }
        let mut nodes = Vec::with_capacity(def.roles.len());
        for role in def.roles {
            let id = record.bindings.get(*role).ok_or_else(|| {
                Error::Schema(format!(
                    "detection dump line {}: missing role {role:?}",
                    lineno + 1
                ))
            })?;
            nodes.push(TypeId(*id));
        }
        if record.bindings.len() != def.roles.len() {
            return Err(Error::Schema(format!(
                "detection dump line {}: extra roles for {:?}",
                lineno + 1,
                def.name
            )));
        }
        per_row[record.ms_id].push(MsInstance {
            ms_id: record.ms_id,
            nodes,
        });
    }
    for row in &mut per_row {
        row.sort();
        row.dedup();
    }
    Ok(MsDetections { per_row })
}
