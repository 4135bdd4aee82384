//! Synthetic corpora with known ground truth.
//!
//! The generator plants pattern instances whose role mappings are recorded
//! exactly, surrounded by near-miss structures that the sampler picks up
//! but that a sound model must reject: shared-instance holders with public
//! constructors, hook hierarchies whose base never calls its own hooks,
//! containers that hold children without forwarding to them, and wrappers
//! that never delegate. Everything is emitted as source text so the whole
//! pipeline, parser included, gets exercised.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::asg::{Asg, AsgBuilder, TypeId, Visibility};
use crate::error::{Error, Result};
use crate::parse::parse_sources;
use crate::pattern::{pattern_def, CandidateMapping, Pattern};
use crate::rng;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Number of generated projects; folds need at least two.
    pub projects: usize,
    /// Planted instances per pattern, spread round-robin over projects.
    pub planted_per_pattern: usize,
    /// Near-miss shared-instance classes per project.
    pub singleton_lures: usize,
    /// Hook hierarchies per project (one base, several implementers each).
    pub hook_hierarchies: usize,
    /// Container hierarchies per project (holders that never forward).
    pub container_hierarchies: usize,
    /// Wrapper hierarchies per project (wrappers that never forward).
    pub wrapper_hierarchies: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // Sized so each pattern keeps a negative pool of 250+ candidates
        // over four projects, enough for ten negatives per positive
        // without clamping.
        SynthConfig {
            projects: 4,
            planted_per_pattern: 25,
            singleton_lures: 64,
            hook_hierarchies: 8,
            container_hierarchies: 4,
            wrapper_hierarchies: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedInstance {
    pub pattern: Pattern,
    pub project: String,
    /// (role, type name) in the pattern's role order.
    pub roles: Vec<(String, String)>,
}

impl PlantedInstance {
    /// Resolves the recorded names against the parsed project graph.
    pub fn mapping(&self, asg: &Asg) -> Result<CandidateMapping> {
        let mut bindings = Vec::with_capacity(self.roles.len());
        for (role, name) in &self.roles {
            let id = asg.find_internal_type(name).ok_or_else(|| {
                Error::Ingest(format!(
                    "planted {role} type {name} missing from {}",
                    asg.project()
                ))
            })?;
            bindings.push(id);
        }
        CandidateMapping::new(asg, self.pattern, bindings)
    }
}

#[derive(Debug, Clone)]
pub struct SynthProject {
    pub name: String,
    /// (path, source text) pairs ready for the parser.
    pub files: Vec<(String, String)>,
}

impl SynthProject {
    pub fn parse(&self) -> Result<Asg> {
        parse_sources(&self.name, &self.files)
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub projects: Vec<SynthProject>,
    pub planted: Vec<PlantedInstance>,
}

impl SynthCorpus {
    /// Label rows for the planted instances, one line per bound role.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("instance,project,pattern,role,type_name\n");
        for (i, p) in self.planted.iter().enumerate() {
            for (role, name) in &p.roles {
                out.push_str(&format!(
                    "{}-{i},{},{},{role},{name}\n",
                    p.pattern, p.project, p.pattern
                ));
            }
        }
        out
    }
}

fn pick<'a>(rng: &mut ChaCha20Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

/// Package shared by all generated sources; planted role names are
/// recorded fully qualified under it.
const PACKAGE: &str = "synth";

struct ProjectWriter {
    name: String,
    classes: Vec<String>,
    planted: Vec<PlantedInstance>,
}

impl ProjectWriter {
    fn plant(&mut self, pattern: Pattern, roles: &[(&str, String)]) {
        let def = pattern_def(pattern);
        assert_eq!(def.roles.len(), roles.len());
        self.planted.push(PlantedInstance {
            pattern,
            project: self.name.clone(),
            roles: roles
                .iter()
                .map(|(role, name)| (role.to_string(), format!("{PACKAGE}.{name}")))
                .collect(),
        });
    }
}

fn plant_singleton(w: &mut ProjectWriter, rng: &mut ChaCha20Rng, i: usize) {
    let name = format!("Keeper{i}");
    let accessor = pick(rng, &["current", "shared", "obtain", "fetch"]);
    let mutator = pick(rng, &["touch", "reset", "mark", "bump"]);
    w.classes.push(format!(
        "class {name} {{\n\
         \x20   private static {name} instance;\n\
         \x20   private int uses;\n\
         \x20   private {name}() {{ uses = 0; }}\n\
         \x20   public static {name} {accessor}() {{ return instance; }}\n\
         \x20   public void {mutator}() {{ uses = uses + 1; }}\n\
         }}\n"
    ));
    w.plant(Pattern::Singleton, &[("Singleton", name)]);
}

fn plant_template_method(w: &mut ProjectWriter, rng: &mut ChaCha20Rng, i: usize) {
    let base = format!("Flow{i}Base");
    let steps = format!("Flow{i}Steps");
    let driver = pick(rng, &["run", "execute", "process", "cycle"]);
    let (first, second) = match rng.random_range(0..3) {
        0 => ("prepare", "commit"),
        1 => ("setup", "teardown"),
        _ => ("open", "close"),
    };
    let two_hooks = rng.random_range(0..3) > 0;
    let second_call = if two_hooks {
        format!("        this.{second}();\n")
    } else {
        String::new()
    };
    let second_decl = if two_hooks {
        format!("    protected abstract void {second}();\n")
    } else {
        String::new()
    };
    let second_impl = if two_hooks {
        format!("    protected void {second}() {{}}\n")
    } else {
        String::new()
    };
    w.classes.push(format!(
        "abstract class {base} {{\n\
         \x20   public void {driver}() {{\n\
         \x20       this.{first}();\n\
         {second_call}\
         \x20   }}\n\
         \x20   protected abstract void {first}();\n\
         {second_decl}\
         }}\n"
    ));
    w.classes.push(format!(
        "class {steps} extends {base} {{\n\
         \x20   protected void {first}() {{}}\n\
         {second_impl}\
         }}\n"
    ));
    w.plant(
        Pattern::TemplateMethod,
        &[("AbstractClass", base), ("ConcreteClass", steps)],
    );
}

fn plant_composite(w: &mut ProjectWriter, rng: &mut ChaCha20Rng, i: usize) {
    let node = format!("Tree{i}Node");
    let bundle = format!("Tree{i}Bundle");
    let tip = format!("Tree{i}Tip");
    let op = pick(rng, &["render", "pack", "visit", "total"]);
    let adder = pick(rng, &["adopt", "add", "attach"]);
    w.classes.push(format!(
        "abstract class {node} {{\n\
         \x20   public abstract void {op}();\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class {tip} extends {node} {{\n\
         \x20   public void {op}() {{}}\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class {bundle} extends {node} {{\n\
         \x20   private {node} first;\n\
         \x20   public void {adder}({node} n) {{ first = n; }}\n\
         \x20   public void {op}() {{ first.{op}(); }}\n\
         }}\n"
    ));
    w.plant(
        Pattern::Composite,
        &[("Component", node), ("Composite", bundle), ("Leaf", tip)],
    );
}

fn plant_decorator(w: &mut ProjectWriter, rng: &mut ChaCha20Rng, i: usize) {
    let base = format!("Wrap{i}Base");
    let plain = format!("Wrap{i}Plain");
    let shell = format!("Wrap{i}Shell");
    let glossy = format!("Wrap{i}Glossy");
    let op = pick(rng, &["apply", "draw", "describe", "cost"]);
    w.classes.push(format!(
        "abstract class {base} {{\n\
         \x20   public abstract void {op}();\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class {plain} extends {base} {{\n\
         \x20   public void {op}() {{}}\n\
         }}\n"
    ));
    w.classes.push(format!(
        "abstract class {shell} extends {base} {{\n\
         \x20   private {base} inner;\n\
         \x20   public {shell}({base} b) {{ inner = b; }}\n\
         \x20   public void {op}() {{ inner.{op}(); }}\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class {glossy} extends {shell} {{\n\
         \x20   public void {op}() {{ this.polish(); }}\n\
         \x20   private void polish() {{}}\n\
         }}\n"
    ));
    w.plant(
        Pattern::Decorator,
        &[
            ("Component", base),
            ("ConcreteComponent", plain),
            ("Decorator", shell),
            ("ConcreteDecorator", glossy),
        ],
    );
}

/// Classes the singleton sketch flags that are not singletons: a shared
/// field next to a public constructor, a static factory minting fresh
/// objects, and a private-constructor class with no shared instance.
fn singleton_lure(w: &mut ProjectWriter, j: usize) {
    let source = match j % 3 {
        0 => format!(
            "class Cache{j} {{\n\
             \x20   private static Cache{j} shared;\n\
             \x20   public Cache{j}() {{}}\n\
             \x20   public void refresh() {{}}\n\
             }}\n"
        ),
        1 => format!(
            "class Pool{j} {{\n\
             \x20   public Pool{j}() {{}}\n\
             \x20   public static Pool{j} make() {{ return new Pool{j}(); }}\n\
             \x20   public void drain() {{}}\n\
             }}\n"
        ),
        _ => format!(
            "class Vault{j} {{\n\
             \x20   private Vault{j}() {{}}\n\
             \x20   public void seal() {{}}\n\
             }}\n"
        ),
    };
    w.classes.push(source);
}

/// An abstract base with hooks nobody orchestrates; every implementer is a
/// hook-pair candidate but no template method exists.
fn hook_lure(w: &mut ProjectWriter, j: usize, implementers: usize) {
    w.classes.push(format!(
        "abstract class Hook{j}Base {{\n\
         \x20   public abstract void handle();\n\
         \x20   public void shutdown() {{}}\n\
         }}\n"
    ));
    for k in 0..implementers {
        w.classes.push(format!(
            "class Hook{j}Impl{k} extends Hook{j}Base {{\n\
             \x20   public void handle() {{}}\n\
             }}\n"
        ));
    }
}

/// Holders that aggregate the base type but never forward to it, crossed
/// with plain items: plenty of container-shaped candidates, zero delegation.
fn container_lure(w: &mut ProjectWriter, j: usize, holders: usize, items: usize) {
    w.classes.push(format!(
        "abstract class Bin{j}Root {{\n\
         \x20   public abstract void pack();\n\
         }}\n"
    ));
    for k in 0..holders {
        w.classes.push(format!(
            "class Bin{j}Hold{k} extends Bin{j}Root {{\n\
             \x20   private Bin{j}Root load;\n\
             \x20   public void stash(Bin{j}Root r) {{ load = r; }}\n\
             \x20   public void pack() {{}}\n\
             }}\n"
        ));
    }
    for k in 0..items {
        w.classes.push(format!(
            "class Bin{j}Item{k} extends Bin{j}Root {{\n\
             \x20   public void pack() {{}}\n\
             }}\n"
        ));
    }
}

/// An abstract wrapper holding its base without forwarding, extended by
/// several concrete coats, next to several plain implementations.
fn wrapper_lure(w: &mut ProjectWriter, j: usize, coats: usize, flats: usize) {
    w.classes.push(format!(
        "abstract class Skin{j}Base {{\n\
         \x20   public abstract void coat();\n\
         }}\n"
    ));
    w.classes.push(format!(
        "abstract class Skin{j}Film extends Skin{j}Base {{\n\
         \x20   private Skin{j}Base core;\n\
         \x20   public Skin{j}Film(Skin{j}Base b) {{ core = b; }}\n\
         \x20   public void coat() {{}}\n\
         }}\n"
    ));
    for k in 0..coats {
        w.classes.push(format!(
            "class Skin{j}Coat{k} extends Skin{j}Film {{\n\
             \x20   public void coat() {{}}\n\
             }}\n"
        ));
    }
    for k in 0..flats {
        w.classes.push(format!(
            "class Skin{j}Flat{k} extends Skin{j}Base {{\n\
             \x20   public void coat() {{}}\n\
             }}\n"
        ));
    }
}

/// Inert bystanders: an interface with one implementation and a utility.
fn distractors(w: &mut ProjectWriter, j: usize) {
    w.classes.push(format!(
        "interface Port{j} {{\n\
         \x20   void send();\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class Socket{j} implements Port{j} {{\n\
         \x20   public void send() {{}}\n\
         }}\n"
    ));
    w.classes.push(format!(
        "class Util{j} {{\n\
         \x20   public static int clamp(int v) {{ return v; }}\n\
         }}\n"
    ));
}

/// Generates the full corpus for `cfg`, deterministically per seed.
pub fn corpus(cfg: &SynthConfig) -> SynthCorpus {
    assert!(cfg.projects >= 2, "folds need at least two projects");
    let mut writers: Vec<ProjectWriter> = (0..cfg.projects)
        .map(|p| ProjectWriter {
            name: format!("synth{p}"),
            classes: Vec::new(),
            planted: Vec::new(),
        })
        .collect();
    let mut rngs: Vec<ChaCha20Rng> = (0..cfg.projects)
        .map(|p| rng::substream_indexed(cfg.seed, "project", p as u64))
        .collect();

    // Round-robin keeps per-project planted counts within one of each
    // other, so every fold sees positives of every pattern.
    for i in 0..cfg.planted_per_pattern {
        let p = i % cfg.projects;
        plant_singleton(&mut writers[p], &mut rngs[p], i);
    }
    for i in 0..cfg.planted_per_pattern {
        let p = i % cfg.projects;
        plant_template_method(&mut writers[p], &mut rngs[p], i);
    }
    for i in 0..cfg.planted_per_pattern {
        let p = i % cfg.projects;
        plant_composite(&mut writers[p], &mut rngs[p], i);
    }
    for i in 0..cfg.planted_per_pattern {
        let p = i % cfg.projects;
        plant_decorator(&mut writers[p], &mut rngs[p], i);
    }

    for (p, w) in writers.iter_mut().enumerate() {
        for j in 0..cfg.singleton_lures {
            singleton_lure(w, p * cfg.singleton_lures + j);
        }
        for j in 0..cfg.hook_hierarchies {
            hook_lure(w, p * cfg.hook_hierarchies + j, 8);
        }
        for j in 0..cfg.container_hierarchies {
            container_lure(w, p * cfg.container_hierarchies + j, 3, 6);
        }
        for j in 0..cfg.wrapper_hierarchies {
            wrapper_lure(w, p * cfg.wrapper_hierarchies + j, 4, 4);
        }
        distractors(w, p);
    }

    let mut planted = Vec::new();
    let projects = writers
        .into_iter()
        .map(|w| {
            planted.extend(w.planted);
            let mut source = format!("package {PACKAGE};\n\n");
            source.push_str(&w.classes.join("\n"));
            SynthProject {
                name: w.name,
                files: vec![("src/Types.java".to_string(), source)],
            }
        })
        .collect();
    // Group by pattern, then generation order; matches label files that
    // list one pattern at a time.
    planted.sort_by_key(|p| (p.pattern, p.roles[0].1.clone()));
    SynthCorpus { projects, planted }
}

/// A random well-formed graph of at most `max_types` internal types, for
/// differential testing of the detectors.
pub fn random_asg(rng: &mut ChaCha20Rng, max_types: usize) -> Asg {
    let mut b = AsgBuilder::new("rnd");
    let n = rng.random_range(1..=max_types.max(1));
    let mut interfaces: Vec<TypeId> = Vec::new();
    let mut all: Vec<TypeId> = Vec::new();
    let mut can_be_abstract: Vec<bool> = Vec::new();
    for i in 0..n {
        let id = if rng.random_range(0..4) == 0 {
            let id = b.add_interface(&format!("rnd.I{i}"));
            interfaces.push(id);
            can_be_abstract.push(true);
            id
        } else {
            let is_abstract = rng.random_range(0..10) < 3;
            can_be_abstract.push(is_abstract);
            b.add_class(&format!("rnd.C{i}"), is_abstract)
        };
        all.push(id);
    }
    for _ in 0..rng.random_range(0..3) {
        all.push(b.add_external(&format!("ext.X{}", all.len())));
    }

    // Supertypes only among earlier nodes keeps the hierarchy acyclic.
    for i in 1..n {
        let sub = all[i];
        let sub_is_interface = interfaces.contains(&sub);
        if rng.random_range(0..2) == 0 {
            let pool: Vec<TypeId> = all[..i]
                .iter()
                .copied()
                .filter(|t| interfaces.contains(t) == sub_is_interface)
                .collect();
            if !pool.is_empty() {
                b.extends(sub, pool[rng.random_range(0..pool.len())]);
            }
        }
        if !sub_is_interface && rng.random_range(0..5) < 2 {
            let pool: Vec<TypeId> = interfaces.iter().copied().filter(|t| t.0 < sub.0).collect();
            if !pool.is_empty() {
                b.implements(sub, pool[rng.random_range(0..pool.len())]);
            }
        }
    }

    let method_names = ["run", "poke", "fill", "emit", "grab"];
    let visibilities = [Visibility::Public, Visibility::Private, Visibility::Protected];
    let mut methods = Vec::new();
    let mut concrete_callers = Vec::new();
    for (i, owner) in all[..n].iter().copied().enumerate() {
        let is_interface = interfaces.contains(&owner);
        let abstract_allowed = can_be_abstract[i];

        for _ in 0..rng.random_range(0..=4u32) {
            match rng.random_range(0..6) {
                // Fields lean on random declared types, self included, so
                // shared-instance and aggregation shapes appear naturally.
                0 | 1 => {
                    let declared = if rng.random_range(0..5) < 4 {
                        Some(all[rng.random_range(0..all.len())])
                    } else {
                        None
                    };
                    let is_static = rng.random_range(0..3) == 0;
                    b.add_field(
                        owner,
                        &format!("f{}", methods.len()),
                        declared,
                        is_static || is_interface,
                        if is_interface {
                            Visibility::Public
                        } else {
                            visibilities[rng.random_range(0..3)]
                        },
                    );
                }
                2 if !is_interface => {
                    b.add_constructor(
                        owner,
                        &random_params(rng, &all),
                        visibilities[rng.random_range(0..3)],
                    );
                }
                _ => {
                    let is_static = !is_interface && rng.random_range(0..5) == 0;
                    let is_abstract = abstract_allowed && !is_static && rng.random_range(0..2) == 0;
                    let returns = if rng.random_range(0..5) < 2 {
                        Some(all[rng.random_range(0..all.len())])
                    } else {
                        None
                    };
                    let m = b.add_method(
                        owner,
                        pick(rng, &method_names),
                        &random_params(rng, &all),
                        returns,
                        is_static,
                        is_abstract,
                        if is_interface {
                            Visibility::Public
                        } else {
                            visibilities[rng.random_range(0..3)]
                        },
                    );
                    methods.push(m);
                    if !is_abstract {
                        concrete_callers.push(m);
                    }
                }
            }
        }
    }

    if !methods.is_empty() && !concrete_callers.is_empty() {
        for _ in 0..rng.random_range(0..=methods.len()) {
            let caller = concrete_callers[rng.random_range(0..concrete_callers.len())];
            let callee = methods[rng.random_range(0..methods.len())];
            b.calls(caller, callee);
        }
        for _ in 0..rng.random_range(0..=2) {
            let site = concrete_callers[rng.random_range(0..concrete_callers.len())];
            let ty = all[rng.random_range(0..all.len())];
            b.creates(site, ty);
        }
    }
    b.finish().expect("generated graph is well formed")
}

fn random_params(rng: &mut ChaCha20Rng, pool: &[TypeId]) -> Vec<Option<TypeId>> {
    (0..rng.random_range(0..=2u32))
        .map(|_| {
            if rng.random_range(0..3) < 2 {
                Some(pool[rng.random_range(0..pool.len())])
            } else {
                None
            }
        })
        .collect()
}
