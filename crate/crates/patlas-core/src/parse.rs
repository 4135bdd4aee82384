//! Source front end for a Java-like subset.
//!
//! The parser understands enough of the language to recover the structure the
//! graph needs: package declarations, top-level class and interface
//! declarations with `extends`/`implements` clauses, fields, methods,
//! constructors, `new` expressions, and method calls whose receiver is
//! `this`, `super`, a field, a parameter, or a type name (static calls).
//! Everything else inside method bodies is tokenized and skipped.
//!
//! Deliberate simplifications, chosen to keep the front end predictable:
//!
//! * Generics are erased to the raw type and array types to their element
//!   type, so `List<Graphic>` reads as `List` and `Graphic[]` as `Graphic`.
//! * Imports are skipped; simple names resolve first inside the declaring
//!   package, then to a unique project-wide match, and otherwise to an
//!   external stub node under the name as written.
//! * Calls are resolved by name and arity, walking the ancestor chain from
//!   the receiver type. Unresolvable calls are dropped rather than guessed.
//! * Local variables are not tracked, so calls on locals produce no edge.
//!
//! Ids are assigned in declaration order (files in the order given, types in
//! file order), then stubs in first-reference order, which makes parsing
//! reproducible down to the serialized bytes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use crate::asg::{simple_name, Asg, AsgBuilder, MemberId, TypeId, TypeKind, Visibility};
use crate::error::{Error, Result};

/// Parses already-loaded sources. Each entry is a display name (used in
/// errors) plus the file text.
pub fn parse_sources(project: &str, files: &[(String, String)]) -> Result<Asg> {
    let mut parsed = Vec::new();
    for (name, text) in files {
        let tokens = lex(name, text)?;
        let unit = parse_unit(name, &tokens)?;
        parsed.push(unit);
    }
    resolve_units(project, parsed)
}

/// Reads and parses source files from disk.
pub fn parse_source_files(project: &str, paths: &[impl AsRef<Path>]) -> Result<Asg> {
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::Ingest(format!("reading {}: {e}", p.display())))?;
        files.push((p.display().to_string(), text));
    }
    parse_sources(project, &files)
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(char),
    /// String, char, or numeric literal. The payload is irrelevant to graph
    /// construction and is dropped.
    Literal,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
}

fn lex(file: &str, text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line: u32 = 1;

    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            '/' => match chars.peek() {
                Some('/') => {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            break;
                        }
                    }
                }
                Some('*') => {
                    chars.next();
                    let mut prev = ' ';
                    let mut closed = false;
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                        }
                        if prev == '*' && c == '/' {
                            closed = true;
                            break;
                        }
                        prev = c;
                    }
                    if !closed {
                        return Err(parse_err(file, line, "unterminated block comment"));
                    }
                }
                _ => out.push(Token {
                    tok: Tok::Punct('/'),
                    line,
                }),
            },
            '"' | '\'' => {
                let quote = c;
                let start = line;
                let mut escaped = false;
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                    }
                    if escaped {
                        escaped = false;
                    } else if c == '\\' {
                        escaped = true;
                    } else if c == quote {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(parse_err(file, start, "unterminated literal"));
                }
                out.push(Token {
                    tok: Tok::Literal,
                    line: start,
                });
            }
            c if c.is_ascii_digit() => {
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '.' || n == '_' {
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Literal,
                    line,
                });
            }
            c if c.is_alphabetic() || c == '_' || c == '$' => {
                let mut ident = String::new();
                ident.push(c);
                while let Some(&n) = chars.peek() {
                    if n.is_alphanumeric() || n == '_' || n == '$' {
                        ident.push(n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(ident),
                    line,
                });
            }
            c => out.push(Token {
                tok: Tok::Punct(c),
                line,
            }),
        }
    }
    Ok(out)
}

fn parse_err(file: &str, line: u32, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Per-file parsing into raw declarations
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct RawUnit {
    file: String,
    package: String,
    types: Vec<RawType>,
}

#[derive(Debug)]
struct RawType {
    simple: String,
    kind: TypeKind,
    is_abstract: bool,
    extends: Vec<String>,
    implements: Vec<String>,
    members: Vec<RawMember>,
}

#[derive(Debug, PartialEq, Eq)]
enum RawMemberKind {
    Field,
    Method,
    Constructor,
}

#[derive(Debug)]
struct RawMember {
    kind: RawMemberKind,
    name: String,
    is_static: bool,
    is_abstract: bool,
    visibility: Visibility,
    /// Field type or method return type as written; `None` for primitives,
    /// `void`, and constructors.
    declared: Option<String>,
    /// Parameter types as written, `None` for primitives.
    params: Vec<(Option<String>, String)>,
    /// Method or constructor body, or a field initializer expression.
    body: Vec<Token>,
}

struct Cursor<'a> {
    file: &'a str,
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn line(&self) -> u32 {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|t| t.line)
            .unwrap_or(0)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if let Some(Tok::Ident(w)) = self.peek() {
            if w == word {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect_punct(&mut self, c: char, context: &str) -> Result<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(parse_err(
                self.file,
                self.line(),
                format!("expected '{c}' {context}"),
            ))
        }
    }

    fn expect_ident(&mut self, context: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(parse_err(
                self.file,
                self.line(),
                format!("expected identifier {context}"),
            )),
        }
    }

    /// Dotted identifier path, e.g. `javax.swing.JPanel`.
    fn qualified_name(&mut self, context: &str) -> Result<String> {
        let mut name = self.expect_ident(context)?;
        while self.peek() == Some(&Tok::Punct('.')) && matches!(self.peek_at(1), Some(Tok::Ident(_)))
        {
            self.pos += 1;
            name.push('.');
            name.push_str(&self.expect_ident(context)?);
        }
        Ok(name)
    }

    /// Skips a balanced `<...>` group if one starts here.
    fn skip_generics(&mut self) {
        if self.peek() != Some(&Tok::Punct('<')) {
            return;
        }
        let mut depth = 0usize;
        while let Some(t) = self.bump() {
            match t.tok {
                Tok::Punct('<') => depth += 1,
                Tok::Punct('>') => {
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                _ => {}
            }
        }
    }

    /// Skips one `@Annotation` or `@Annotation(...)`.
    fn skip_annotation(&mut self) -> Result<()> {
        self.qualified_name("after '@'")?;
        if self.peek() == Some(&Tok::Punct('(')) {
            self.skip_balanced('(', ')')?;
        }
        Ok(())
    }

    fn skip_balanced(&mut self, open: char, close: char) -> Result<()> {
        let start = self.line();
        let mut depth = 0usize;
        while let Some(t) = self.bump() {
            match t.tok {
                Tok::Punct(c) if c == open => depth += 1,
                Tok::Punct(c) if c == close => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
        Err(parse_err(
            self.file,
            start,
            format!("unbalanced '{open}'"),
        ))
    }

    /// Collects the tokens of a `{ ... }` block, without the outer braces.
    fn collect_block(&mut self) -> Result<Vec<Token>> {
        let start = self.line();
        self.expect_punct('{', "to open a body")?;
        let mut depth = 1usize;
        let mut body = Vec::new();
        while let Some(t) = self.bump() {
            match t.tok {
                Tok::Punct('{') => depth += 1,
                Tok::Punct('}') => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(body);
                    }
                }
                _ => {}
            }
            body.push(t.clone());
        }
        Err(parse_err(self.file, start, "unbalanced '{'"))
    }
}

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short",
];

/// Reserved words that can precede `(` without being a call.
const NON_CALL_WORDS: &[&str] = &[
    "assert",
    "break",
    "case",
    "catch",
    "continue",
    "default",
    "do",
    "else",
    "finally",
    "for",
    "if",
    "instanceof",
    "new",
    "return",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "try",
    "while",
];

fn parse_unit(file: &str, tokens: &[Token]) -> Result<RawUnit> {
    let mut c = Cursor {
        file,
        tokens,
        pos: 0,
    };
    let mut package = String::new();
    if c.eat_ident("package") {
        package = c.qualified_name("after 'package'")?;
        c.expect_punct(';', "after package declaration")?;
    }
    while c.eat_ident("import") {
        c.eat_ident("static");
        c.qualified_name("after 'import'")?;
        // Wildcard imports end in `.*`.
        if c.eat_punct('.') {
            c.expect_punct('*', "in import")?;
        }
        c.expect_punct(';', "after import")?;
    }

    let mut types = Vec::new();
    while c.peek().is_some() {
        while c.eat_punct('@') {
            c.skip_annotation()?;
        }
        if c.eat_punct(';') {
            continue;
        }
        types.push(parse_type_decl(&mut c)?);
    }
    Ok(RawUnit {
        file: file.to_string(),
        package,
        types,
    })
}

fn parse_type_decl(c: &mut Cursor) -> Result<RawType> {
    let line = c.line();
    let mut is_abstract = false;
    loop {
        if c.eat_ident("abstract") {
            is_abstract = true;
        } else if c.eat_ident("public")
            || c.eat_ident("final")
            || c.eat_ident("strictfp")
            || c.eat_ident("static")
        {
        } else {
            break;
        }
    }

    let kind = if c.eat_ident("class") {
        TypeKind::Class
    } else if c.eat_ident("interface") {
        TypeKind::Interface
    } else {
        let found = match c.peek() {
            Some(Tok::Ident(w)) => format!("'{w}'"),
            _ => "end of file".to_string(),
        };
        return Err(parse_err(
            c.file,
            c.line(),
            format!("expected 'class' or 'interface', found {found}"),
        ));
    };
    if kind == TypeKind::Interface {
        is_abstract = true;
    }

    let simple = c.expect_ident("as type name")?;
    c.skip_generics();

    let mut extends = Vec::new();
    let mut implements = Vec::new();
    if c.eat_ident("extends") {
        loop {
            let name = c.qualified_name("after 'extends'")?;
            c.skip_generics();
            extends.push(name);
            if !c.eat_punct(',') {
                break;
            }
        }
    }
    if c.eat_ident("implements") {
        if kind == TypeKind::Interface {
            return Err(parse_err(
                c.file,
                c.line(),
                "an interface cannot implement",
            ));
        }
        loop {
            let name = c.qualified_name("after 'implements'")?;
            c.skip_generics();
            implements.push(name);
            if !c.eat_punct(',') {
                break;
            }
        }
    }
    if kind == TypeKind::Class && extends.len() > 1 {
        return Err(parse_err(
            c.file,
            line,
            format!("class {simple} may extend a single type"),
        ));
    }

    c.expect_punct('{', "to open the type body")?;
    let mut members = Vec::new();
    loop {
        match c.peek() {
            None => return Err(parse_err(c.file, line, format!("unclosed body of {simple}"))),
            Some(Tok::Punct('}')) => {
                c.bump();
                break;
            }
            Some(Tok::Punct(';')) => {
                c.bump();
            }
            _ => members.extend(parse_member(c, &simple, kind)?),
        }
    }

    Ok(RawType {
        simple,
        kind,
        is_abstract,
        extends,
        implements,
        members,
    })
}

/// Parses one member declaration. A field declaration with several
/// declarators yields several members; initializer blocks yield none.
fn parse_member(c: &mut Cursor, type_name: &str, owner_kind: TypeKind) -> Result<Vec<RawMember>> {
    let mut is_static = false;
    let mut is_abstract = false;
    let mut visibility = if owner_kind == TypeKind::Interface {
        Visibility::Public
    } else {
        Visibility::Package
    };

    loop {
        while c.eat_punct('@') {
            c.skip_annotation()?;
        }
        if c.eat_ident("public") {
            visibility = Visibility::Public;
        } else if c.eat_ident("protected") {
            visibility = Visibility::Protected;
        } else if c.eat_ident("private") {
            visibility = Visibility::Private;
        } else if c.eat_ident("static") {
            is_static = true;
        } else if c.eat_ident("abstract") {
            is_abstract = true;
        } else if c.eat_ident("final")
            || c.eat_ident("native")
            || c.eat_ident("synchronized")
            || c.eat_ident("transient")
            || c.eat_ident("volatile")
            || c.eat_ident("strictfp")
            || c.eat_ident("default")
        {
        } else {
            break;
        }
    }

    // Static or instance initializer block.
    if c.peek() == Some(&Tok::Punct('{')) {
        c.collect_block()?;
        return Ok(Vec::new());
    }

    // Constructor: the type's own name immediately followed by '('.
    if let (Some(Tok::Ident(w)), Some(Tok::Punct('('))) = (c.peek(), c.peek_at(1)) {
        if w == type_name {
            let name = c.expect_ident("as constructor name")?;
            let params = parse_params(c)?;
            let body = c.collect_block()?;
            return Ok(vec![RawMember {
                kind: RawMemberKind::Constructor,
                name,
                is_static: false,
                is_abstract: false,
                visibility,
                declared: None,
                params,
                body,
            }]);
        }
    }

    let declared = parse_type_ref(c, "as member type")?;
    let name = c.expect_ident("as member name")?;

    if c.peek() == Some(&Tok::Punct('(')) {
        let params = parse_params(c)?;
        while c.eat_ident("throws") {
            c.qualified_name("after 'throws'")?;
            while c.eat_punct(',') {
                c.qualified_name("in throws clause")?;
            }
        }
        let body = if c.eat_punct(';') {
            is_abstract = true;
            Vec::new()
        } else {
            c.collect_block()?
        };
        return Ok(vec![RawMember {
            kind: RawMemberKind::Method,
            name,
            is_static,
            is_abstract,
            visibility,
            declared,
            params,
            body,
        }]);
    }

    // Field declaration, possibly with several declarators sharing the type.
    let mut members = Vec::new();
    let mut current_name = name;
    loop {
        // Array suffix on the declarator itself, e.g. `Graphic children[];`.
        while c.eat_punct('[') {
            c.expect_punct(']', "in array declarator")?;
        }
        let mut init = Vec::new();
        if c.eat_punct('=') {
            let mut depth = 0usize;
            loop {
                match c.peek() {
                    None => return Err(parse_err(c.file, c.line(), "unterminated field initializer")),
                    Some(Tok::Punct(p @ ('(' | '[' | '{'))) => {
                        depth += 1;
                        init.push(Token {
                            tok: Tok::Punct(*p),
                            line: c.line(),
                        });
                        c.bump();
                    }
                    Some(Tok::Punct(p @ (')' | ']' | '}'))) => {
                        depth = depth.checked_sub(1).ok_or_else(|| {
                            parse_err(c.file, c.line(), "unbalanced field initializer")
                        })?;
                        init.push(Token {
                            tok: Tok::Punct(*p),
                            line: c.line(),
                        });
                        c.bump();
                    }
                    Some(Tok::Punct(',' | ';')) if depth == 0 => break,
                    Some(_) => {
                        init.push(c.bump().unwrap().clone());
                    }
                }
            }
        }
        members.push(RawMember {
            kind: RawMemberKind::Field,
            name: current_name,
            // Interface fields are constants and implicitly static.
            is_static: is_static || owner_kind == TypeKind::Interface,
            is_abstract: false,
            visibility,
            declared: declared.clone(),
            params: Vec::new(),
            body: init,
        });
        if c.eat_punct(',') {
            current_name = c.expect_ident("as field name")?;
        } else {
            c.expect_punct(';', "after field declaration")?;
            break;
        }
    }
    Ok(members)
}

fn parse_params(c: &mut Cursor) -> Result<Vec<(Option<String>, String)>> {
    c.expect_punct('(', "to open the parameter list")?;
    let mut params = Vec::new();
    if c.eat_punct(')') {
        return Ok(params);
    }
    loop {
        while c.eat_punct('@') {
            c.skip_annotation()?;
        }
        c.eat_ident("final");
        let ty = parse_type_ref(c, "as parameter type")?;
        // Varargs read as an array of the element type.
        while c.eat_punct('.') {}
        let name = c.expect_ident("as parameter name")?;
        while c.eat_punct('[') {
            c.expect_punct(']', "in parameter array suffix")?;
        }
        params.push((ty, name));
        if c.eat_punct(')') {
            return Ok(params);
        }
        c.expect_punct(',', "between parameters")?;
    }
}

/// Parses a type reference. Returns `None` for primitives and `void`.
/// Generics are erased and array suffixes reduce to the element type.
fn parse_type_ref(c: &mut Cursor, context: &str) -> Result<Option<String>> {
    let name = c.qualified_name(context)?;
    c.skip_generics();
    while c.eat_punct('[') {
        c.expect_punct(']', "in array type")?;
    }
    if name == "void" || PRIMITIVES.contains(&name.as_str()) {
        Ok(None)
    } else {
        Ok(Some(name))
    }
}

// ---------------------------------------------------------------------------
// Resolution into the graph
// ---------------------------------------------------------------------------

fn qualify(package: &str, simple: &str) -> String {
    if package.is_empty() {
        simple.to_string()
    } else {
        format!("{package}.{simple}")
    }
}

/// Name resolution state. Internal types are declared up front; references
/// that stay unresolved become external stub nodes, created in the order the
/// references are first seen.
struct Resolver {
    builder: AsgBuilder,
    by_qualified: BTreeMap<String, TypeId>,
    by_simple: BTreeMap<String, Vec<TypeId>>,
    stubs: BTreeMap<String, TypeId>,
}

impl Resolver {
    fn new(project: &str) -> Self {
        Resolver {
            builder: AsgBuilder::new(project),
            by_qualified: BTreeMap::new(),
            by_simple: BTreeMap::new(),
            stubs: BTreeMap::new(),
        }
    }

    fn declare(
        &mut self,
        file: &str,
        qname: &str,
        kind: TypeKind,
        is_abstract: bool,
    ) -> Result<TypeId> {
        if self.by_qualified.contains_key(qname) {
            return Err(Error::Ingest(format!(
                "duplicate type {qname:?} (second declaration in {file})"
            )));
        }
        let id = match kind {
            TypeKind::Class => self.builder.add_class(qname, is_abstract),
            TypeKind::Interface => self.builder.add_interface(qname),
        };
        self.by_qualified.insert(qname.to_string(), id);
        self.by_simple
            .entry(simple_name(qname).to_string())
            .or_default()
            .push(id);
        Ok(id)
    }

    /// Resolves to an internal type if possible, without creating stubs.
    fn try_internal(&self, name: &str, package: &str) -> Option<TypeId> {
        if name.contains('.') {
            return self.by_qualified.get(name).copied();
        }
        if let Some(id) = self.by_qualified.get(&qualify(package, name)) {
            return Some(*id);
        }
        match self.by_simple.get(name) {
            Some(ids) if ids.len() == 1 => Some(ids[0]),
            _ => None,
        }
    }

    /// Resolves a reference, minting an external stub when nothing internal
    /// matches. Stubs are keyed by the reference exactly as written.
    fn resolve(&mut self, name: &str, package: &str) -> TypeId {
        if let Some(id) = self.try_internal(name, package) {
            return id;
        }
        if let Some(id) = self.stubs.get(name) {
            return *id;
        }
        let id = self.builder.add_external(name);
        self.stubs.insert(name.to_string(), id);
        id
    }
}

/// Per-type lookup scope used while resolving member bodies.
#[derive(Default)]
struct TypeScope {
    parents: Vec<TypeId>,
    fields: BTreeMap<String, Option<TypeId>>,
    methods: BTreeMap<(String, usize), MemberId>,
}

struct PendingBody {
    member: MemberId,
    owner: TypeId,
    params: Vec<(String, Option<TypeId>)>,
    tokens: Vec<Token>,
    /// Field initializers only contribute `creates` edges; call edges start
    /// at methods and constructors.
    calls_allowed: bool,
}

fn resolve_units(project: &str, units: Vec<RawUnit>) -> Result<Asg> {
    let mut r = Resolver::new(project);

    // Declare every internal type first so ids follow declaration order.
    let mut declared: Vec<Vec<TypeId>> = Vec::with_capacity(units.len());
    for unit in &units {
        let mut ids = Vec::with_capacity(unit.types.len());
        for rt in &unit.types {
            let qname = qualify(&unit.package, &rt.simple);
            ids.push(r.declare(&unit.file, &qname, rt.kind, rt.is_abstract)?);
        }
        declared.push(ids);
    }

    // Supertype clauses, then members, then bodies. Stubs appear in the
    // order references are first encountered by these passes.
    let mut scopes: BTreeMap<TypeId, TypeScope> = BTreeMap::new();
    for (unit, ids) in units.iter().zip(&declared) {
        for (rt, id) in unit.types.iter().zip(ids) {
            let mut scope = TypeScope::default();
            for sup in &rt.extends {
                let sup_id = r.resolve(sup, &unit.package);
                r.builder.extends(*id, sup_id);
                scope.parents.push(sup_id);
            }
            for iface in &rt.implements {
                let if_id = r.resolve(iface, &unit.package);
                r.builder.implements(*id, if_id);
                scope.parents.push(if_id);
            }
            scopes.insert(*id, scope);
        }
    }

    let mut bodies: Vec<PendingBody> = Vec::new();
    for (unit, ids) in units.iter().zip(&declared) {
        for (rt, id) in unit.types.iter().zip(ids) {
            for rm in &rt.members {
                let declared_type = rm
                    .declared
                    .as_ref()
                    .map(|n| r.resolve(n, &unit.package));
                match rm.kind {
                    RawMemberKind::Field => {
                        let mid = r.builder.add_field(
                            *id,
                            &rm.name,
                            declared_type,
                            rm.is_static,
                            rm.visibility,
                        );
                        let scope = scopes.get_mut(id).expect("scope exists");
                        scope.fields.entry(rm.name.clone()).or_insert(declared_type);
                        let _ = mid;
                        if !rm.body.is_empty() {
                            bodies.push(PendingBody {
                                member: mid,
                                owner: *id,
                                params: Vec::new(),
                                tokens: rm.body.clone(),
                                calls_allowed: false,
                            });
                        }
                    }
                    RawMemberKind::Method | RawMemberKind::Constructor => {
                        let params: Vec<(String, Option<TypeId>)> = rm
                            .params
                            .iter()
                            .map(|(ty, name)| {
                                (name.clone(), ty.as_ref().map(|t| r.resolve(t, &unit.package)))
                            })
                            .collect();
                        let param_types: Vec<Option<TypeId>> =
                            params.iter().map(|(_, t)| *t).collect();
                        let mid = match rm.kind {
                            RawMemberKind::Method => r.builder.add_method(
                                *id,
                                &rm.name,
                                &param_types,
                                declared_type,
                                rm.is_static,
                                rm.is_abstract,
                                rm.visibility,
                            ),
                            _ => r.builder.add_constructor(*id, &param_types, rm.visibility),
                        };
                        if rm.kind == RawMemberKind::Method {
                            let scope = scopes.get_mut(id).expect("scope exists");
                            scope
                                .methods
                                .entry((rm.name.clone(), rm.params.len()))
                                .or_insert(mid);
                        }
                        if !rm.body.is_empty() {
                            bodies.push(PendingBody {
                                member: mid,
                                owner: *id,
                                params,
                                tokens: rm.body.clone(),
                                calls_allowed: true,
                            });
                        }
                    }
                }
            }
        }
    }

    // Packages by type id, for resolving references inside bodies.
    let mut package_of: BTreeMap<TypeId, String> = BTreeMap::new();
    for (unit, ids) in units.iter().zip(&declared) {
        for id in ids {
            package_of.insert(*id, unit.package.clone());
        }
    }

    for body in &bodies {
        let package = package_of.get(&body.owner).cloned().unwrap_or_default();
        scan_body(&mut r, &scopes, body, &package);
    }

    r.builder.finish()
}

/// Breadth-first walk over a type's internal ancestors, self included when
/// `include_self` is set. Stubs have no scope and end the walk on their path.
fn scope_chain(
    scopes: &BTreeMap<TypeId, TypeScope>,
    start: TypeId,
    include_self: bool,
) -> Vec<TypeId> {
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start);
    if include_self {
        order.push(start);
    }
    queue.push_back(start);
    while let Some(t) = queue.pop_front() {
        if let Some(scope) = scopes.get(&t) {
            for p in &scope.parents {
                if seen.insert(*p) {
                    order.push(*p);
                    queue.push_back(*p);
                }
            }
        }
    }
    order
}

fn lookup_field(
    scopes: &BTreeMap<TypeId, TypeScope>,
    owner: TypeId,
    name: &str,
) -> Option<Option<TypeId>> {
    for t in scope_chain(scopes, owner, true) {
        if let Some(scope) = scopes.get(&t) {
            if let Some(ty) = scope.fields.get(name) {
                return Some(*ty);
            }
        }
    }
    None
}

fn lookup_method(
    scopes: &BTreeMap<TypeId, TypeScope>,
    receiver: TypeId,
    include_self: bool,
    name: &str,
    arity: usize,
) -> Option<MemberId> {
    for t in scope_chain(scopes, receiver, include_self) {
        if let Some(scope) = scopes.get(&t) {
            if let Some(m) = scope.methods.get(&(name.to_string(), arity)) {
                return Some(*m);
            }
        }
    }
    None
}

/// Reads a dotted identifier path starting at `i`. Returns the path and the
/// index of the first token after it.
fn read_qualified_tokens(tokens: &[Token], i: usize) -> Option<(String, usize)> {
    let mut name = match tokens.get(i)?.tok {
        Tok::Ident(ref w) => w.clone(),
        _ => return None,
    };
    let mut j = i + 1;
    while matches!(tokens.get(j).map(|t| &t.tok), Some(Tok::Punct('.')))
        && matches!(tokens.get(j + 1).map(|t| &t.tok), Some(Tok::Ident(_)))
    {
        if let Tok::Ident(w) = &tokens[j + 1].tok {
            name.push('.');
            name.push_str(w);
        }
        j += 2;
    }
    Some((name, j))
}

/// Skips a balanced `<...>` group in a token slice, returning the index after
/// it, or `i` unchanged if none starts there.
fn skip_generics_tokens(tokens: &[Token], i: usize) -> usize {
    if !matches!(tokens.get(i).map(|t| &t.tok), Some(Tok::Punct('<'))) {
        return i;
    }
    let mut depth = 0usize;
    let mut j = i;
    while let Some(t) = tokens.get(j) {
        match t.tok {
            Tok::Punct('<') => depth += 1,
            Tok::Punct('>') => {
                depth -= 1;
                if depth == 0 {
                    return j + 1;
                }
            }
            _ => {}
        }
        j += 1;
    }
    i
}

/// Counts arguments of a call whose opening parenthesis sits at `open`.
fn count_arguments(tokens: &[Token], open: usize) -> usize {
    debug_assert!(matches!(tokens[open].tok, Tok::Punct('(')));
    let mut paren = 0usize;
    let mut square = 0usize;
    let mut brace = 0usize;
    let mut args = 0usize;
    let mut any = false;
    let mut j = open;
    while let Some(t) = tokens.get(j) {
        match t.tok {
            Tok::Punct('(') => paren += 1,
            Tok::Punct(')') => {
                paren -= 1;
                if paren == 0 {
                    break;
                }
            }
            Tok::Punct('[') => square += 1,
            Tok::Punct(']') => square = square.saturating_sub(1),
            Tok::Punct('{') => brace += 1,
            Tok::Punct('}') => brace = brace.saturating_sub(1),
            Tok::Punct(',') if paren == 1 && square == 0 && brace == 0 => args += 1,
            _ => any = true,
        }
        if j > open && paren >= 1 {
            any = true;
        }
        j += 1;
    }
    if !any && args == 0 {
        0
    } else {
        args + 1
    }
}

/// Walks backwards from the `]` at `close` to its matching `[`, returning the
/// index of the token before the bracket group.
fn matching_open_bracket(tokens: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0isize;
    let mut j = close;
    loop {
        match tokens.get(j).map(|t| &t.tok) {
            Some(Tok::Punct(']')) => depth += 1,
            Some(Tok::Punct('[')) => {
                depth -= 1;
                if depth == 0 {
                    return j.checked_sub(1);
                }
            }
            _ => {}
        }
        j = j.checked_sub(1)?;
    }
}

/// Scans one member body for `new` expressions and resolvable call sites.
fn scan_body(
    r: &mut Resolver,
    scopes: &BTreeMap<TypeId, TypeScope>,
    body: &PendingBody,
    package: &str,
) {
    let tokens = &body.tokens;
    let mut i = 0;
    while i < tokens.len() {
        if let Tok::Ident(w) = &tokens[i].tok {
            if w == "new" {
                if let Some((name, after)) = read_qualified_tokens(tokens, i + 1) {
                    let after = skip_generics_tokens(tokens, after);
                    // `new T(...)` instantiates T; `new T[...]` creates an
                    // array and instantiates nothing.
                    if matches!(tokens.get(after).map(|t| &t.tok), Some(Tok::Punct('('))) {
                        let is_primitive = PRIMITIVES.contains(&name.as_str());
                        if !is_primitive {
                            let ty = r.resolve(&name, package);
                            r.builder.creates(body.member, ty);
                        }
                    }
                    i = after;
                    continue;
                }
            } else if body.calls_allowed
                && !NON_CALL_WORDS.contains(&w.as_str())
                && matches!(tokens.get(i + 1).map(|t| &t.tok), Some(Tok::Punct('(')))
            {
                let arity = count_arguments(tokens, i + 1);
                if let Some(callee) = resolve_call(r, scopes, body, package, tokens, i, w, arity) {
                    r.builder.calls(body.member, callee);
                }
            }
        }
        i += 1;
    }
}

/// Works out the receiver of the call at token `i` and resolves the callee.
/// Unresolvable receivers (locals, chained calls, unknown names) yield
/// `None`, which drops the call on the floor by design.
#[allow(clippy::too_many_arguments)]
fn resolve_call(
    r: &Resolver,
    scopes: &BTreeMap<TypeId, TypeScope>,
    body: &PendingBody,
    package: &str,
    tokens: &[Token],
    i: usize,
    name: &str,
    arity: usize,
) -> Option<MemberId> {
    let own = body.owner;
    if i == 0 {
        return lookup_method(scopes, own, true, name, arity);
    }
    match &tokens[i - 1].tok {
        Tok::Punct('.') => {
            if i < 2 {
                return None;
            }
            match &tokens[i - 2].tok {
                Tok::Ident(x) if x == "this" => lookup_method(scopes, own, true, name, arity),
                Tok::Ident(x) if x == "super" => lookup_method(scopes, own, false, name, arity),
                Tok::Ident(x) => {
                    // If x is itself preceded by a dot it sits mid-chain:
                    // either a package-qualified type path (all identifiers)
                    // or a navigation we do not track.
                    if i >= 3 && matches!(tokens[i - 3].tok, Tok::Punct('.')) {
                        if i >= 4 && matches!(tokens[i - 4].tok, Tok::Ident(_)) {
                            let path = read_backward_path(tokens, i - 2);
                            return r
                                .try_internal(&path, package)
                                .and_then(|t| lookup_method(scopes, t, true, name, arity));
                        }
                        return None;
                    }
                    if let Some(field_ty) = lookup_field(scopes, own, x) {
                        return field_ty.and_then(|t| lookup_method(scopes, t, true, name, arity));
                    }
                    if let Some((_, ty)) = body.params.iter().find(|(p, _)| p == x) {
                        return ty.and_then(|t| lookup_method(scopes, t, true, name, arity));
                    }
                    r.try_internal(x, package)
                        .and_then(|t| lookup_method(scopes, t, true, name, arity))
                }
                // `xs[k].m(...)`: recover the array expression's base name.
                Tok::Punct(']') => {
                    let before = matching_open_bracket(tokens, i - 2)?;
                    if before >= 1
                        && matches!(tokens[before - 1].tok, Tok::Punct('.' | ']' | ')'))
                    {
                        return None;
                    }
                    match &tokens[before].tok {
                        Tok::Ident(x) => {
                            let base = lookup_field(scopes, own, x)
                                .or_else(|| {
                                    body.params
                                        .iter()
                                        .find(|(p, _)| p == x)
                                        .map(|(_, t)| *t)
                                })?;
                            base.and_then(|t| lookup_method(scopes, t, true, name, arity))
                        }
                        _ => None,
                    }
                }
                _ => None,
            }
        }
        _ => lookup_method(scopes, own, true, name, arity),
    }
}

/// Reads a dotted path backwards, ending at the identifier at `end`.
fn read_backward_path(tokens: &[Token], end: usize) -> String {
    let mut parts = Vec::new();
    let mut j = end;
    while let Some(Tok::Ident(w)) = tokens.get(j).map(|t| &t.tok) {
        parts.push(w.clone());
        if j >= 2
            && matches!(tokens[j - 1].tok, Tok::Punct('.'))
            && matches!(tokens[j - 2].tok, Tok::Ident(_))
        {
            j -= 2;
        } else {
            break;
        }
    }
    parts.reverse();
    parts.join(".")
}
