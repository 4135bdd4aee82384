//! Abstract semantics graph.
//!
//! An [`Asg`] is a typed graph over the declarations of one project: type
//! nodes (classes and interfaces), their members (fields, methods,
//! constructors), and edges for the relations the rest of the pipeline
//! consumes. Types referenced but not declared in the project are represented
//! by stub nodes under the reserved project name [`EXTERNAL_PROJECT`], so
//! downstream consumers can skip them explicitly instead of tripping over
//! dangling references.
//!
//! Node ids are dense and assigned in declaration order, which makes graph
//! construction reproducible: parsing the same sources twice yields the same
//! ids, and serialized graphs compare byte for byte.
//!
//! Derived lookup structures (ancestor closures, subtype sets, field and call
//! indices) are computed once at construction and are pure functions of the
//! node and edge lists.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Project name given to stub nodes for types declared outside the project.
pub const EXTERNAL_PROJECT: &str = "external";

/// Identifier of a type node, dense within one graph.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct TypeId(pub u32);

/// Identifier of a member, dense within one graph and separate from type ids.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct MemberId(pub u32);

impl TypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl MemberId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeKind {
    Class,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Field,
    Method,
    Constructor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    Protected,
    Package,
    Private,
}

/// A class or interface declaration, or a stub for an external type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeNode {
    pub id: TypeId,
    /// Qualified name, unique within the graph.
    pub name: String,
    pub kind: TypeKind,
    #[serde(rename = "abstract")]
    pub is_abstract: bool,
    /// Declaring project, or [`EXTERNAL_PROJECT`] for stubs.
    pub project: String,
}

impl TypeNode {
    /// Last segment of the qualified name.
    pub fn simple_name(&self) -> &str {
        simple_name(&self.name)
    }
}

/// A field, method, or constructor owned by a type node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub id: MemberId,
    pub owner: TypeId,
    pub kind: MemberKind,
    pub name: String,
    /// Name plus arity plus parameter type ids; empty for fields.
    pub signature: String,
    #[serde(rename = "static")]
    pub is_static: bool,
    #[serde(rename = "abstract")]
    pub is_abstract: bool,
    pub visibility: Visibility,
    /// Field type or method return type. `None` for constructors, `void`
    /// methods, and primitive-typed declarations.
    pub declared_type: Option<TypeId>,
}

/// Relation kinds carried by edges. Each kind fixes the id spaces of its
/// endpoints: type to type, member to type, or member to member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Subtype to supertype, `src` extends `dst`.
    Extends,
    /// Implementer to interface, `src` implements `dst`.
    Implements,
    /// Field member to the type of its declaration.
    FieldOfType,
    /// Method or constructor member to one of its parameter types.
    ParameterOfType,
    /// Method member to its return type.
    ReturnsType,
    /// Caller member to the resolved callee member.
    Calls,
    /// Member containing a constructor call to the instantiated type.
    Creates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub kind: EdgeKind,
    pub src: u32,
    pub dst: u32,
}

/// Lookup structures derived from the node and edge lists.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Indices {
    /// Transitive supertypes over extends and implements edges, breadth
    /// first with neighbors in ascending id order, excluding the type itself.
    ancestors: Vec<Vec<TypeId>>,
    /// Like `ancestors` but following extends edges only.
    extends_ancestors: Vec<Vec<TypeId>>,
    /// Inverse of `ancestors`, ascending by id.
    subtypes: Vec<Vec<TypeId>>,
    /// Members grouped by owner in declaration order.
    members_of: Vec<Vec<MemberId>>,
    /// Field members whose declared type is the given node, ascending.
    fields_with_type: Vec<Vec<MemberId>>,
    /// Call edges grouped by the owner of the calling member.
    calls_by_owner: Vec<Vec<(MemberId, MemberId)>>,
}

/// One project's abstract semantics graph.
///
/// Construction always validates: dense ids, unique qualified names, edge
/// endpoints that exist and respect their kind's id spaces, acyclic
/// inheritance, and member flags that make sense for their kind.
#[derive(Debug, Clone)]
pub struct Asg {
    project: String,
    types: Vec<TypeNode>,
    members: Vec<Member>,
    edges: Vec<Edge>,
    indices: Indices,
}

impl PartialEq for Asg {
    fn eq(&self, other: &Self) -> bool {
        self.project == other.project
            && self.types == other.types
            && self.members == other.members
            && self.edges == other.edges
    }
}

impl Asg {
    /// Assembles and validates a graph from its parts.
    pub fn from_parts(
        project: String,
        types: Vec<TypeNode>,
        members: Vec<Member>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        validate(&project, &types, &members, &edges)?;
        let indices = Indices::build(&types, &members, &edges);
        Ok(Asg {
            project,
            types,
            members,
            edges,
            indices,
        })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn types(&self) -> &[TypeNode] {
        &self.types
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn type_node(&self, id: TypeId) -> &TypeNode {
        &self.types[id.index()]
    }

    pub fn member(&self, id: MemberId) -> &Member {
        &self.members[id.index()]
    }

    /// Whether the node is declared in this project rather than a stub.
    pub fn is_internal(&self, id: TypeId) -> bool {
        self.type_node(id).project == self.project
    }

    /// Transitive supertypes over extends and implements edges, in breadth
    /// first order, excluding `id` itself.
    pub fn ancestors(&self, id: TypeId) -> &[TypeId] {
        &self.indices.ancestors[id.index()]
    }

    /// Transitive supertypes following extends edges only.
    pub fn extends_ancestors(&self, id: TypeId) -> &[TypeId] {
        &self.indices.extends_ancestors[id.index()]
    }

    /// All types that have `id` among their ancestors, ascending by id.
    pub fn subtypes(&self, id: TypeId) -> &[TypeId] {
        &self.indices.subtypes[id.index()]
    }

    /// Members of `id` in declaration order.
    pub fn members_of(&self, id: TypeId) -> impl Iterator<Item = &Member> + '_ {
        self.indices.members_of[id.index()]
            .iter()
            .map(move |m| self.member(*m))
    }

    pub fn methods_of(&self, id: TypeId) -> impl Iterator<Item = &Member> + '_ {
        self.members_of(id).filter(|m| m.kind == MemberKind::Method)
    }

    pub fn fields_of(&self, id: TypeId) -> impl Iterator<Item = &Member> + '_ {
        self.members_of(id).filter(|m| m.kind == MemberKind::Field)
    }

    pub fn constructors_of(&self, id: TypeId) -> impl Iterator<Item = &Member> + '_ {
        self.members_of(id)
            .filter(|m| m.kind == MemberKind::Constructor)
    }

    /// Field members anywhere in the graph whose declared type is `id`.
    pub fn fields_with_type(&self, id: TypeId) -> impl Iterator<Item = &Member> + '_ {
        self.indices.fields_with_type[id.index()]
            .iter()
            .map(move |m| self.member(*m))
    }

    /// Call edges whose calling member is owned by `id`.
    pub fn calls_from(&self, id: TypeId) -> &[(MemberId, MemberId)] {
        &self.indices.calls_by_owner[id.index()]
    }

    /// Exact qualified name lookup over all nodes, stubs included.
    pub fn find_type(&self, name: &str) -> Option<TypeId> {
        self.types.iter().find(|t| t.name == name).map(|t| t.id)
    }

    /// Qualified name lookup restricted to types declared in this project.
    pub fn find_internal_type(&self, name: &str) -> Option<TypeId> {
        self.types
            .iter()
            .find(|t| t.name == name && t.project == self.project)
            .map(|t| t.id)
    }
}

/// Last segment of a dotted qualified name.
pub fn simple_name(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

/// Canonical signature string for a method or constructor: name, arity, and
/// the parameter type ids in order. Unresolved or primitive parameter types
/// appear as `-` so that arity still distinguishes overloads.
pub fn method_signature(name: &str, params: &[Option<TypeId>]) -> String {
    let mut out = String::with_capacity(name.len() + 4 + params.len() * 4);
    out.push_str(name);
    out.push('/');
    out.push_str(&params.len().to_string());
    out.push('(');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        match p {
            Some(t) => out.push_str(&t.0.to_string()),
            None => out.push('-'),
        }
    }
    out.push(')');
    out
}

impl Indices {
    fn build(types: &[TypeNode], members: &[Member], edges: &[Edge]) -> Indices {
        let n = types.len();

        let mut supertype_adj: Vec<Vec<TypeId>> = vec![Vec::new(); n];
        let mut extends_adj: Vec<Vec<TypeId>> = vec![Vec::new(); n];
        for e in edges {
            match e.kind {
                EdgeKind::Extends => {
                    supertype_adj[e.src as usize].push(TypeId(e.dst));
                    extends_adj[e.src as usize].push(TypeId(e.dst));
                }
                EdgeKind::Implements => supertype_adj[e.src as usize].push(TypeId(e.dst)),
                _ => {}
            }
        }
        for adj in supertype_adj.iter_mut().chain(extends_adj.iter_mut()) {
            adj.sort_unstable();
            adj.dedup();
        }

        let ancestors: Vec<Vec<TypeId>> = (0..n)
            .map(|t| bfs_closure(TypeId(t as u32), &supertype_adj))
            .collect();
        let extends_ancestors: Vec<Vec<TypeId>> = (0..n)
            .map(|t| bfs_closure(TypeId(t as u32), &extends_adj))
            .collect();

        let mut subtypes: Vec<Vec<TypeId>> = vec![Vec::new(); n];
        for (t, ancs) in ancestors.iter().enumerate() {
            for a in ancs {
                subtypes[a.index()].push(TypeId(t as u32));
            }
        }
        // Filled in ascending order of t already, but make the contract
        // explicit rather than implied by the fill loop.
        for s in &mut subtypes {
            s.sort_unstable();
        }

        let mut members_of: Vec<Vec<MemberId>> = vec![Vec::new(); n];
        for m in members {
            members_of[m.owner.index()].push(m.id);
        }

        let mut fields_with_type: Vec<Vec<MemberId>> = vec![Vec::new(); n];
        for m in members {
            if m.kind == MemberKind::Field {
                if let Some(t) = m.declared_type {
                    fields_with_type[t.index()].push(m.id);
                }
            }
        }

        let mut calls_by_owner: Vec<Vec<(MemberId, MemberId)>> = vec![Vec::new(); n];
        for e in edges {
            if e.kind == EdgeKind::Calls {
                let src = MemberId(e.src);
                let owner = members[src.index()].owner;
                calls_by_owner[owner.index()].push((src, MemberId(e.dst)));
            }
        }
        for c in &mut calls_by_owner {
            c.sort_unstable();
        }

        Indices {
            ancestors,
            extends_ancestors,
            subtypes,
            members_of,
            fields_with_type,
            calls_by_owner,
        }
    }
}

fn bfs_closure(start: TypeId, adj: &[Vec<TypeId>]) -> Vec<TypeId> {
    let mut seen = vec![false; adj.len()];
    seen[start.index()] = true;
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back(start);
    while let Some(t) = queue.pop_front() {
        for &p in &adj[t.index()] {
            if !seen[p.index()] {
                seen[p.index()] = true;
                order.push(p);
                queue.push_back(p);
            }
        }
    }
    order
}

fn validate(project: &str, types: &[TypeNode], members: &[Member], edges: &[Edge]) -> Result<()> {
    if project == EXTERNAL_PROJECT {
        return Err(Error::Ingest(format!(
            "project name {EXTERNAL_PROJECT:?} is reserved for stub nodes"
        )));
    }
    let mut names = BTreeSet::new();
    for (i, t) in types.iter().enumerate() {
        if t.id.index() != i {
            return Err(Error::Ingest(format!(
                "type ids must be dense and in order: index {i} holds id {}",
                t.id
            )));
        }
        if !names.insert(t.name.as_str()) {
            return Err(Error::Ingest(format!("duplicate type name {:?}", t.name)));
        }
        if t.kind == TypeKind::Interface && !t.is_abstract {
            return Err(Error::Ingest(format!(
                "interface {:?} must be abstract",
                t.name
            )));
        }
        if t.project != project && t.project != EXTERNAL_PROJECT {
            return Err(Error::Ingest(format!(
                "type {:?} belongs to unknown project {:?}",
                t.name, t.project
            )));
        }
    }

    for (i, m) in members.iter().enumerate() {
        if m.id.index() != i {
            return Err(Error::Ingest(format!(
                "member ids must be dense and in order: index {i} holds id {}",
                m.id.0
            )));
        }
        let owner = types.get(m.owner.index()).ok_or_else(|| {
            Error::Ingest(format!("member {:?} owned by missing type {}", m.name, m.owner))
        })?;
        match m.kind {
            MemberKind::Constructor => {
                if m.name != owner.simple_name() {
                    return Err(Error::Ingest(format!(
                        "constructor {:?} of {:?} must carry the type's simple name",
                        m.name, owner.name
                    )));
                }
                if m.declared_type.is_some() || m.is_abstract || m.is_static {
                    return Err(Error::Ingest(format!(
                        "constructor of {:?} may not be static, abstract, or typed",
                        owner.name
                    )));
                }
                if owner.kind == TypeKind::Interface {
                    return Err(Error::Ingest(format!(
                        "interface {:?} may not declare a constructor",
                        owner.name
                    )));
                }
            }
            MemberKind::Field => {
                if m.is_abstract {
                    return Err(Error::Ingest(format!(
                        "field {:?}.{} may not be abstract",
                        owner.name, m.name
                    )));
                }
            }
            MemberKind::Method => {}
        }
        if let Some(t) = m.declared_type {
            if t.index() >= types.len() {
                return Err(Error::Ingest(format!(
                    "member {:?}.{} declares missing type {t}",
                    owner.name, m.name
                )));
            }
        }
    }

    for e in edges {
        let type_ok = |id: u32| (id as usize) < types.len();
        let member_ok = |id: u32| (id as usize) < members.len();
        let bad = |what: &str| {
            Error::Ingest(format!(
                "{what} edge {} -> {} references a missing node",
                e.src, e.dst
            ))
        };
        match e.kind {
            EdgeKind::Extends | EdgeKind::Implements => {
                if !type_ok(e.src) || !type_ok(e.dst) {
                    return Err(bad("inheritance"));
                }
                if e.src == e.dst {
                    return Err(Error::Ingest(format!(
                        "type {:?} cannot inherit from itself",
                        types[e.src as usize].name
                    )));
                }
            }
            EdgeKind::FieldOfType => {
                if !member_ok(e.src) || !type_ok(e.dst) {
                    return Err(bad("field_of_type"));
                }
                let m = &members[e.src as usize];
                if m.kind != MemberKind::Field || m.declared_type != Some(TypeId(e.dst)) {
                    return Err(Error::Ingest(format!(
                        "field_of_type edge {} -> {} disagrees with the member declaration",
                        e.src, e.dst
                    )));
                }
            }
            EdgeKind::ParameterOfType => {
                if !member_ok(e.src) || !type_ok(e.dst) {
                    return Err(bad("parameter_of_type"));
                }
                if members[e.src as usize].kind == MemberKind::Field {
                    return Err(Error::Ingest(format!(
                        "parameter_of_type edge {} -> {} starts at a field",
                        e.src, e.dst
                    )));
                }
            }
            EdgeKind::ReturnsType => {
                if !member_ok(e.src) || !type_ok(e.dst) {
                    return Err(bad("returns_type"));
                }
                let m = &members[e.src as usize];
                if m.kind != MemberKind::Method || m.declared_type != Some(TypeId(e.dst)) {
                    return Err(Error::Ingest(format!(
                        "returns_type edge {} -> {} disagrees with the member declaration",
                        e.src, e.dst
                    )));
                }
            }
            EdgeKind::Calls => {
                if !member_ok(e.src) || !member_ok(e.dst) {
                    return Err(bad("calls"));
                }
                if members[e.src as usize].kind == MemberKind::Field
                    || members[e.dst as usize].kind != MemberKind::Method
                {
                    return Err(Error::Ingest(format!(
                        "calls edge {} -> {} must run from a method or constructor to a method",
                        e.src, e.dst
                    )));
                }
            }
            EdgeKind::Creates => {
                if !member_ok(e.src) || !type_ok(e.dst) {
                    return Err(bad("creates"));
                }
            }
        }
    }

    check_acyclic(types, edges)?;
    Ok(())
}

/// Kahn's algorithm over extends and implements edges.
fn check_acyclic(types: &[TypeNode], edges: &[Edge]) -> Result<()> {
    let n = types.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for e in edges {
        if matches!(e.kind, EdgeKind::Extends | EdgeKind::Implements) {
            adj[e.src as usize].push(e.dst as usize);
            indegree[e.dst as usize] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&t| indegree[t] == 0).collect();
    let mut done = 0usize;
    while let Some(t) = queue.pop_front() {
        done += 1;
        for &p in &adj[t] {
            indegree[p] -= 1;
            if indegree[p] == 0 {
                queue.push_back(p);
            }
        }
    }
    if done != n {
        let culprit = indegree
            .iter()
            .position(|&d| d > 0)
            .map(|t| types[t].name.as_str())
            .unwrap_or("?");
        return Err(Error::Ingest(format!(
            "inheritance cycle involving {culprit:?}"
        )));
    }
    Ok(())
}

/// Incremental construction of an [`Asg`].
///
/// The builder assigns ids in call order and derives the declaration edges
/// (`field_of_type`, `parameter_of_type`, `returns_type`) from the declared
/// types it is given, so callers only state intent once. `calls` and
/// `creates` edges are added explicitly.
#[derive(Debug)]
pub struct AsgBuilder {
    project: String,
    types: Vec<TypeNode>,
    members: Vec<Member>,
    edges: BTreeSet<Edge>,
}

impl AsgBuilder {
    pub fn new(project: &str) -> Self {
        AsgBuilder {
            project: project.to_string(),
            types: Vec::new(),
            members: Vec::new(),
            edges: BTreeSet::new(),
        }
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    /// Looks up a previously added type by qualified name.
    pub fn lookup(&self, name: &str) -> Option<TypeId> {
        self.types.iter().find(|t| t.name == name).map(|t| t.id)
    }

    fn push_type(&mut self, name: &str, kind: TypeKind, is_abstract: bool, project: &str) -> TypeId {
        let id = TypeId(self.types.len() as u32);
        self.types.push(TypeNode {
            id,
            name: name.to_string(),
            kind,
            is_abstract,
            project: project.to_string(),
        });
        id
    }

    pub fn add_class(&mut self, name: &str, is_abstract: bool) -> TypeId {
        let project = self.project.clone();
        self.push_type(name, TypeKind::Class, is_abstract, &project)
    }

    pub fn add_interface(&mut self, name: &str) -> TypeId {
        let project = self.project.clone();
        self.push_type(name, TypeKind::Interface, true, &project)
    }

    /// Adds a stub node for a type declared outside the project. Stubs are
    /// concrete classes by convention; nothing more is known about them.
    pub fn add_external(&mut self, name: &str) -> TypeId {
        self.push_type(name, TypeKind::Class, false, EXTERNAL_PROJECT)
    }

    pub fn add_field(
        &mut self,
        owner: TypeId,
        name: &str,
        declared_type: Option<TypeId>,
        is_static: bool,
        visibility: Visibility,
    ) -> MemberId {
        let id = MemberId(self.members.len() as u32);
        self.members.push(Member {
            id,
            owner,
            kind: MemberKind::Field,
            name: name.to_string(),
            signature: String::new(),
            is_static,
            is_abstract: false,
            visibility,
            declared_type,
        });
        if let Some(t) = declared_type {
            self.edges.insert(Edge {
                kind: EdgeKind::FieldOfType,
                src: id.0,
                dst: t.0,
            });
        }
        id
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_method(
        &mut self,
        owner: TypeId,
        name: &str,
        params: &[Option<TypeId>],
        returns: Option<TypeId>,
        is_static: bool,
        is_abstract: bool,
        visibility: Visibility,
    ) -> MemberId {
        let id = MemberId(self.members.len() as u32);
        self.members.push(Member {
            id,
            owner,
            kind: MemberKind::Method,
            name: name.to_string(),
            signature: method_signature(name, params),
            is_static,
            is_abstract,
            visibility,
            declared_type: returns,
        });
        self.push_param_edges(id, params);
        if let Some(t) = returns {
            self.edges.insert(Edge {
                kind: EdgeKind::ReturnsType,
                src: id.0,
                dst: t.0,
            });
        }
        id
    }

    pub fn add_constructor(
        &mut self,
        owner: TypeId,
        params: &[Option<TypeId>],
        visibility: Visibility,
    ) -> MemberId {
        let name = self.types[owner.index()].simple_name().to_string();
        let id = MemberId(self.members.len() as u32);
        self.members.push(Member {
            id,
            owner,
            kind: MemberKind::Constructor,
            name: name.clone(),
            signature: method_signature(&name, params),
            is_static: false,
            is_abstract: false,
            visibility,
            declared_type: None,
        });
        self.push_param_edges(id, params);
        id
    }

    fn push_param_edges(&mut self, member: MemberId, params: &[Option<TypeId>]) {
        for t in params.iter().flatten() {
            self.edges.insert(Edge {
                kind: EdgeKind::ParameterOfType,
                src: member.0,
                dst: t.0,
            });
        }
    }

    pub fn extends(&mut self, sub: TypeId, sup: TypeId) {
        self.edges.insert(Edge {
            kind: EdgeKind::Extends,
            src: sub.0,
            dst: sup.0,
        });
    }

    pub fn implements(&mut self, sub: TypeId, interface: TypeId) {
        self.edges.insert(Edge {
            kind: EdgeKind::Implements,
            src: sub.0,
            dst: interface.0,
        });
    }

    pub fn calls(&mut self, caller: MemberId, callee: MemberId) {
        self.edges.insert(Edge {
            kind: EdgeKind::Calls,
            src: caller.0,
            dst: callee.0,
        });
    }

    pub fn creates(&mut self, site: MemberId, ty: TypeId) {
        self.edges.insert(Edge {
            kind: EdgeKind::Creates,
            src: site.0,
            dst: ty.0,
        });
    }

    pub fn member_signature(&self, id: MemberId) -> &str {
        &self.members[id.index()].signature
    }

    pub fn finish(self) -> Result<Asg> {
        Asg::from_parts(
            self.project,
            self.types,
            self.members,
            self.edges.into_iter().collect(),
        )
    }
}
