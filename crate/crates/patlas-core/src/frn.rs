//! Feature-role normalization.
//!
//! Detected micro-structure instances form a ragged, unordered space: a
//! candidate's classes may participate in any number of instances, in any
//! role. Normalization presses that space into a fixed matrix with one row
//! per catalog entry and one column per pattern role, so every candidate of
//! a pattern yields the same shape regardless of how much structure matched.
//!
//! Each cell describes how the column's bound type participates in the row's
//! relation, as a registry code:
//!
//! - instances touching the candidate through fewer than two role slots are
//!   noise and are dropped (single-role rows only need their one slot);
//! - a cell whose surviving instances assign one role holds that role's id;
//! - a cell collecting several roles holds a virtual id for the set, which
//!   also covers reflexive instances binding both roles to the same type.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::asg::{Asg, TypeId};
use crate::error::{Error, Result};
use crate::microstructures::{MsDetections, CATALOG_LEN, CORE_CATALOG};
use crate::pattern::{CandidateMapping, Pattern};
use crate::registry::RoleRegistry;

/// A normalized candidate: fixed-shape matrix of registry codes plus enough
/// context to interpret and audit it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    pub pattern: Pattern,
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell codes, `rows * cols` long, 0 for empty.
    pub cells: Vec<u32>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub candidate: CandidateMapping,
    pub label: Option<bool>,
}

impl FeatureMap {
    pub fn cell(&self, row: usize, col: usize) -> u32 {
        self.cells[row * self.cols + col]
    }

    /// Row-major linearization; index `i * cols + j` holds cell `(i, j)`.
    pub fn flatten(&self) -> &[u32] {
        &self.cells
    }

    pub fn unique_key(&self) -> String {
        self.candidate.unique_key()
    }
}

/// Normalizes one candidate against the graph's detections.
///
/// Allocates registry ids on first encounter, so the same candidate stream
/// against the same registry yields bitwise-identical maps.
pub fn normalize(
    asg: &Asg,
    detections: &MsDetections,
    candidate: &CandidateMapping,
    registry: &mut RoleRegistry,
) -> Result<FeatureMap> {
    let def = candidate.def();
    let cols = def.k();

    // Column lookup: a type may legally appear once per column only, but the
    // map is keyed by type because instances bind types, not columns.
    let mut columns_of: BTreeMap<TypeId, Vec<usize>> = BTreeMap::new();
    for (col, id) in candidate.bindings.iter().enumerate() {
        if id.index() >= asg.types().len() {
            return Err(Error::FeatureMap(format!(
                "candidate binds type id {id} outside the graph"
            )));
        }
        columns_of.entry(*id).or_default().push(col);
    }

    let mut role_sets: Vec<BTreeSet<&'static str>> = vec![BTreeSet::new(); CATALOG_LEN * cols];
    for inst in detections.iter() {
        let def_ms = &CORE_CATALOG[inst.ms_id];
        for node in &inst.nodes {
            if node.index() >= asg.types().len() {
                return Err(Error::FeatureMap(format!(
                    "detected instance of {} references type id {node} outside the graph",
                    def_ms.name
                )));
            }
        }
        // Count role slots landing on candidate columns; multi-role rows
        // need at least two to be about this candidate rather than about
        // one of its classes and a bystander.
        let slots = inst
            .nodes
            .iter()
            .filter(|n| columns_of.contains_key(n))
            .count();
        let required = if def_ms.roles.len() == 1 { 1 } else { 2 };
        if slots < required {
            continue;
        }
        for (slot, node) in inst.nodes.iter().enumerate() {
            if let Some(cols_hit) = columns_of.get(node) {
                for col in cols_hit {
                    role_sets[inst.ms_id * cols + col].insert(def_ms.roles[slot]);
                }
            }
        }
    }

    let mut cells = vec![0u32; CATALOG_LEN * cols];
    for (ms_id, _) in CORE_CATALOG.iter().enumerate() {
        for col in 0..cols {
            let set = &role_sets[ms_id * cols + col];
            cells[ms_id * cols + col] = match set.len() {
                0 => 0,
                1 => registry.role_id(ms_id, set.iter().next().unwrap()),
                _ => {
                    let owned: BTreeSet<String> =
                        set.iter().map(|r| r.to_string()).collect();
                    registry.virtual_role_id(ms_id, &owned)
                }
            };
        }
    }

    Ok(FeatureMap {
        pattern: candidate.pattern,
        rows: CATALOG_LEN,
        cols,
        cells,
        row_labels: CORE_CATALOG.iter().map(|d| d.name.to_string()).collect(),
        col_labels: def.roles.iter().map(|r| r.to_string()).collect(),
        candidate: candidate.clone(),
        label: None,
    })
}

// ---------------------------------------------------------------------------
// Feature map file
// ---------------------------------------------------------------------------

/// Serializes a map as CSV: `key,value` header lines, then a `cells` marker,
/// then one row of integers per catalog entry.
pub fn feature_map_to_csv(fm: &FeatureMap, registry: &RoleRegistry) -> String {
    let mut out = String::new();
    out.push_str("format,patlas-fm-v1\n");
    out.push_str(&format!("pattern,{}\n", fm.pattern));
    out.push_str(&format!("project,{}\n", fm.candidate.project));
    out.push_str(&format!("rows,{}\n", fm.rows));
    out.push_str(&format!("cols,{}\n", fm.cols));
    out.push_str(&format!(
        "label,{}\n",
        match fm.label {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        }
    ));
    out.push_str(&format!("unique_key,{}\n", fm.unique_key()));
    let bindings: Vec<String> = fm
        .candidate
        .role_bindings()
        .map(|(role, id)| format!("{role}={}", id.0))
        .collect();
    out.push_str(&format!("candidate,{}\n", bindings.join(";")));
    out.push_str(&format!("registry_fingerprint,{}\n", registry.fingerprint()));
    out.push_str(&format!("registry_max_id,{}\n", registry.max_id()));
    out.push_str(&format!("row_labels,{}\n", fm.row_labels.join(",")));
    out.push_str(&format!("col_labels,{}\n", fm.col_labels.join(",")));
    out.push_str("cells\n");
    for row in 0..fm.rows {
        let line: Vec<String> = (0..fm.cols)
            .map(|col| fm.cell(row, col).to_string())
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn save_feature_map(fm: &FeatureMap, registry: &RoleRegistry, path: &Path) -> Result<()> {
    fs::write(path, feature_map_to_csv(fm, registry))?;
    Ok(())
}

/// Parses a map written by [`feature_map_to_csv`]. The graph is needed to
/// revalidate the candidate; the registry is needed to check code closure.
pub fn feature_map_from_csv(
    text: &str,
    asg: &Asg,
    registry: &RoleRegistry,
) -> Result<FeatureMap> {
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut cell_rows: Vec<Vec<u32>> = Vec::new();
    let mut in_cells = false;
    for (lineno, line) in &mut lines {
        let fail = |msg: String| Error::FeatureMap(format!("line {}: {msg}", lineno + 1));
        if line.is_empty() {
            continue;
        }
        if in_cells {
            let row: Vec<u32> = line
                .split(',')
                .map(|c| c.parse::<u32>().map_err(|e| fail(format!("bad cell {c:?}: {e}"))))
                .collect::<Result<_>>()?;
            cell_rows.push(row);
        } else if line == "cells" {
            in_cells = true;
        } else {
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| fail("expected key,value".to_string()))?;
            header.insert(key.to_string(), value.to_string());
        }
    }
    let get = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| Error::FeatureMap(format!("missing header {key:?}")))
    };
    if get("format")? != "patlas-fm-v1" {
        return Err(Error::FeatureMap(format!(
            "unsupported format {:?}",
            get("format")?
        )));
    }
    let pattern: Pattern = get("pattern")?.parse()?;
    let rows: usize = get("rows")?
        .parse()
        .map_err(|e| Error::FeatureMap(format!("bad rows: {e}")))?;
    let cols: usize = get("cols")?
        .parse()
        .map_err(|e| Error::FeatureMap(format!("bad cols: {e}")))?;
    let label = match get("label")?.as_str() {
        "" => None,
        "true" => Some(true),
        "false" => Some(false),
        other => {
            return Err(Error::FeatureMap(format!("bad label {other:?}")));
        }
    };
    let mut bindings = Vec::new();
    for part in get("candidate")?.split(';') {
        let (_, id) = part
            .split_once('=')
            .ok_or_else(|| Error::FeatureMap(format!("bad candidate binding {part:?}")))?;
        bindings.push(TypeId(id.parse().map_err(|e| {
            Error::FeatureMap(format!("bad candidate binding {part:?}: {e}"))
        })?));
    }
    let candidate = CandidateMapping::new(asg, pattern, bindings)
        .map_err(|e| Error::FeatureMap(format!("stored candidate invalid: {e}")))?;
    if *get("project")? != candidate.project {
        return Err(Error::FeatureMap(format!(
            "project {:?} does not match graph project {:?}",
            get("project")?,
            candidate.project
        )));
    }
    if *get("unique_key")? != candidate.unique_key() {
        return Err(Error::FeatureMap("stored unique_key disagrees".to_string()));
    }
    if cell_rows.len() != rows || cell_rows.iter().any(|r| r.len() != cols) {
        return Err(Error::FeatureMap(format!(
            "cell block is not {rows}x{cols}"
        )));
    }
    let cells: Vec<u32> = cell_rows.into_iter().flatten().collect();
    for code in cells.iter().filter(|c| **c != 0) {
        if registry.describe(*code).is_none() {
            return Err(Error::FeatureMap(format!(
                "cell code {code} is not in the registry"
            )));
        }
    }
    Ok(FeatureMap {
        pattern,
        rows,
        cols,
        cells,
        row_labels: get("row_labels")?.split(',').map(String::from).collect(),
        col_labels: get("col_labels")?.split(',').map(String::from).collect(),
        candidate,
        label,
    })
}

pub fn load_feature_map(path: &Path, asg: &Asg, registry: &RoleRegistry) -> Result<FeatureMap> {
    feature_map_from_csv(&fs::read_to_string(path)?, asg, registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asg::AsgBuilder;
    use crate::microstructures::detect_all;
    use crate::parse::parse_sources;
    use crate::sample::{sample, DEFAULT_ANCHOR_CAP};

    fn row(name: &str) -> usize {
        CORE_CATALOG.iter().find(|d| d.name == name).unwrap().id
    }

    /// Candidate geometry after the worked noise and collision example: a
    /// three-class Composite candidate where the Composite both delegates to
    /// the Component and is delegated to by an outsider subclass of the Leaf,
    /// and the Leaf inherits from a class outside the candidate.
    fn collision_fixture() -> (Asg, CandidateMapping) {
        use crate::asg::Visibility::{Private, Public};
        let mut b = AsgBuilder::new("shapes");
        let g = b.add_class("G", true);
        let p = b.add_class("P", false);
        let l = b.add_class("L", false);
        let x = b.add_class("X", false);
        b.extends(p, g);
        b.extends(x, l);

        let g_draw = b.add_method(g, "draw", &[], None, false, true, Public);
        b.add_field(p, "children", Some(g), false, Private);
        let p_draw = b.add_method(p, "draw", &[], None, false, false, Public);
        b.calls(p_draw, g_draw);

        let l_draw = b.add_method(l, "draw", &[], None, false, false, Public);
        // L delegates draw() to P, so inside the candidate P is both a
        // delegator (toward G) and a delegatee (from L). X also delegates to
        // P, but X is outside the candidate and only adds one-slot noise.
        b.add_field(l, "parent", Some(p), false, Private);
        b.calls(l_draw, p_draw);
        b.add_field(x, "peer", Some(p), false, Private);
        let x_draw = b.add_method(x, "draw", &[], None, false, false, Public);
        b.calls(x_draw, p_draw);

        let asg = b.finish().unwrap();
        let candidate = CandidateMapping::new(&asg, Pattern::Composite, vec![g, p, l]).unwrap();
        (asg, candidate)
    }

    #[test]
    fn worked_noise_and_collision_example() {
        let (asg, candidate) = collision_fixture();
        let det = detect_all(&asg);
        let mut registry = RoleRegistry::new();
        let fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();

        assert_eq!(fm.rows, CATALOG_LEN);
        assert_eq!(fm.cols, 3);
        let col = |role: &str| fm.col_labels.iter().position(|r| r == role).unwrap();

        // Inheritance: P extends G inside the candidate; L's own subclass X
        // is outside, so the Leaf column stays silent.
        let inh = row("Inheritance");
        assert_eq!(
            fm.cell(inh, col("Component")),
            registry.lookup_role(inh, "Superclass").unwrap()
        );
        assert_eq!(
            fm.cell(inh, col("Composite")),
            registry.lookup_role(inh, "Subclass").unwrap()
        );
        assert_eq!(fm.cell(inh, col("Leaf")), 0);

        // Delegation: P delegates to G (Delegator) and receives L's
        // delegation (Delegatee); the cell gets the virtual id of both.
        let del = row("Delegation");
        let both = registry
            .describe(fm.cell(del, col("Composite")))
            .expect("collision cell allocates a registry id");
        assert_eq!(
            both,
            (del, vec!["Delegatee".to_string(), "Delegator".to_string()])
        );
        assert_eq!(
            fm.cell(del, col("Component")),
            registry.lookup_role(del, "Delegatee").unwrap()
        );
        assert_eq!(
            fm.cell(del, col("Leaf")),
            registry.lookup_role(del, "Delegator").unwrap()
        );
    }

    #[test]
    fn singleton_self_creation_yields_virtual_id() {
        let asg = parse_sources(
            "app",
            &[(
                "Config.java".to_string(),
                r#"
                class Config {
                    private static Config instance;
                    private Config() {}
                    public static Config get() {
                        if (instance == null) {
                            instance = new Config();
                        }
                        return instance;
                    }
                }
                "#
                .to_string(),
            )],
        )
        .unwrap();
        let det = detect_all(&asg);
        let config = asg.find_type("Config").unwrap();
        let candidate = CandidateMapping::new(&asg, Pattern::Singleton, vec![config]).unwrap();
        let mut registry = RoleRegistry::new();
        let fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();

        let inst = row("Instantiation");
        assert_eq!(
            registry.describe(fm.cell(inst, 0)),
            Some((
                inst,
                vec!["CreationSite".to_string(), "TypeToCreate".to_string()]
            ))
        );
        let sf = row("StaticField");
        assert_eq!(
            registry.describe(fm.cell(sf, 0)),
            Some((sf, vec!["FieldType".to_string(), "Holder".to_string()]))
        );
        let pc = row("PrivateConstructor");
        assert_eq!(
            fm.cell(pc, 0),
            registry.lookup_role(pc, "Type").unwrap()
        );
    }

    #[test]
    fn unmatched_candidate_is_all_zero() {
        let mut b = AsgBuilder::new("empty");
        let a = b.add_class("A", false);
        let c = b.add_class("B", false);
        b.extends(c, a);
        let asg = b.finish().unwrap();
        let det = detect_all(&asg);
        // Bind TemplateMethod roles to two unrelated concrete classes; no
        // hook exists, and single-column instances like SelfContained(A) do
        // fill their rows, so restrict the check to multi-role rows that
        // need two slots.
        let candidate =
            CandidateMapping::new(&asg, Pattern::TemplateMethod, vec![a, c]).unwrap();
        let mut registry = RoleRegistry::new();
        let fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();
        assert_eq!(fm.cells.len(), CATALOG_LEN * 2);
        let hook = row("AbstractHook");
        assert!(fm.cells[hook * 2..hook * 2 + 2].iter().all(|c| *c == 0));
        let del = row("Delegation");
        assert!(fm.cells[del * 2..del * 2 + 2].iter().all(|c| *c == 0));
    }

    #[test]
    fn normalize_is_idempotent_with_warm_registry() {
        let (asg, candidate) = collision_fixture();
        let det = detect_all(&asg);
        let mut registry = RoleRegistry::new();
        let first = normalize(&asg, &det, &candidate, &mut registry).unwrap();
        let snapshot = registry.clone();
        let second = normalize(&asg, &det, &candidate, &mut registry).unwrap();
        assert_eq!(first, second);
        assert_eq!(registry, snapshot);
    }

    #[test]
    fn flatten_is_row_major() {
        let (asg, candidate) = collision_fixture();
        let det = detect_all(&asg);
        let mut registry = RoleRegistry::new();
        let fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();
        let flat = fm.flatten();
        assert_eq!(flat.len(), fm.rows * fm.cols);
        for i in 0..fm.rows {
            for j in 0..fm.cols {
                assert_eq!(flat[i * fm.cols + j], fm.cell(i, j));
            }
        }
    }

    #[test]
    fn registry_closure_holds_for_sampled_candidates() {
        let text = include_str!("../tests/fixtures/drawing/Drawing.java");
        let asg =
            parse_sources("draw", &[("Drawing.java".to_string(), text.to_string())]).unwrap();
        let det = detect_all(&asg);
        let mut registry = RoleRegistry::new();
        for pattern in crate::pattern::ALL_PATTERNS {
            for candidate in sample(&asg, &det, pattern, DEFAULT_ANCHOR_CAP) {
                let fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();
                for code in fm.cells.iter().filter(|c| **c != 0) {
                    assert!(registry.describe(*code).is_some());
                }
            }
        }
    }

    #[test]
    fn csv_round_trips() {
        let (asg, candidate) = collision_fixture();
        let det = detect_all(&asg);
        let mut registry = RoleRegistry::new();
        let mut fm = normalize(&asg, &det, &candidate, &mut registry).unwrap();
        fm.label = Some(true);

        let text = feature_map_to_csv(&fm, &registry);
        let back = feature_map_from_csv(&text, &asg, &registry).unwrap();
        assert_eq!(fm, back);

        // Decoding against a registry that lacks the cell codes must fail.
        assert!(feature_map_from_csv(&text, &asg, &RoleRegistry::new()).is_err());
    }
}
