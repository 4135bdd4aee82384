//! Heuristic candidate sampling.
//!
//! Checking every k-tuple of types against a pattern would be quadratic to
//! quartic in the type count, so each pattern gets a cheap structural sketch
//! that walks out from anchor types (the inheritance roots a pattern hangs
//! off) and enumerates only tuples that could plausibly fit. Sketches err
//! toward recall: they admit far more false candidates than true ones and
//! leave precision to the classifier.
//!
//! Output is canonically sorted and deterministic. Per anchor, the candidate
//! cross product is capped; truncation keeps the smallest binding tuples so
//! a cap change never reorders survivors.

use std::collections::BTreeSet;

use crate::asg::{Asg, TypeId};
use crate::microstructures::{MsDetections, CORE_CATALOG};
use crate::pattern::{CandidateMapping, Pattern};

/// Default per-anchor candidate cap.
pub const DEFAULT_ANCHOR_CAP: usize = 512;

/// Samples candidate mappings for one pattern.
///
/// `detections` must come from `detect_all` on the same graph; the sketches
/// reuse its Aggregation, AbstractHook, StaticField, StaticAccessor, and
/// PrivateConstructor rows. `anchor_cap` bounds the candidates kept per
/// anchor type (0 means unlimited).
pub fn sample(
    asg: &Asg,
    detections: &MsDetections,
    pattern: Pattern,
    anchor_cap: usize,
) -> Vec<CandidateMapping> {
    let groups = match pattern {
        Pattern::Singleton => sample_singleton(asg, detections),
        Pattern::TemplateMethod => sample_template_method(asg, detections),
        Pattern::Composite => sample_composite(asg, detections),
        Pattern::Decorator => sample_decorator(asg, detections),
    };
    let mut out = Vec::new();
    for mut group in groups {
        group.sort();
        group.dedup();
        if anchor_cap > 0 && group.len() > anchor_cap {
            log::warn!(
                "{pattern} anchor produced {} candidates in {}; keeping the first {anchor_cap}",
                group.len(),
                asg.project()
            );
            group.truncate(anchor_cap);
        }
        out.extend(group);
    }
    let mut mappings: Vec<CandidateMapping> = out
        .into_iter()
        .map(|bindings| {
            CandidateMapping::new(asg, pattern, bindings)
                .expect("sketches only bind distinct in-project types")
        })
        .collect();
    mappings.sort();
    mappings.dedup();
    mappings
}

/// Samples all four patterns at once, keyed by pattern.
pub fn sample_all(
    asg: &Asg,
    detections: &MsDetections,
    anchor_cap: usize,
) -> Vec<(Pattern, Vec<CandidateMapping>)> {
    crate::pattern::ALL_PATTERNS
        .iter()
        .map(|p| (*p, sample(asg, detections, *p, anchor_cap)))
        .collect()
}

fn row(name: &str) -> usize {
    CORE_CATALOG
        .iter()
        .find(|d| d.name == name)
        .expect("catalog row")
        .id
}

fn internal(asg: &Asg, id: TypeId) -> bool {
    asg.is_internal(id)
}

/// Types with at least one static self-typed field, a static self-returning
/// accessor, or only private constructors.
fn sample_singleton(asg: &Asg, det: &MsDetections) -> Vec<Vec<Vec<TypeId>>> {
    let mut hits: BTreeSet<TypeId> = BTreeSet::new();
    for inst in det.of(row("StaticField")).iter().chain(det.of(row("StaticAccessor"))) {
        if inst.nodes[0] == inst.nodes[1] {
            hits.insert(inst.nodes[0]);
        }
    }
    for inst in det.of(row("PrivateConstructor")) {
        hits.insert(inst.nodes[0]);
    }
    hits.retain(|t| internal(asg, *t));
    hits.into_iter().map(|t| vec![vec![t]]).collect()
}

/// Every (abstract type, subtype implementing one of its hooks) pair.
fn sample_template_method(asg: &Asg, det: &MsDetections) -> Vec<Vec<Vec<TypeId>>> {
    let mut by_anchor: Vec<Vec<Vec<TypeId>>> = Vec::new();
    let mut current: Option<(TypeId, Vec<Vec<TypeId>>)> = None;
    for inst in det.of(row("AbstractHook")) {
        let (a, c) = (inst.nodes[0], inst.nodes[1]);
        if !asg.type_node(a).is_abstract || !internal(asg, a) || !internal(asg, c) {
            continue;
        }
        match &mut current {
            Some((anchor, group)) if *anchor == a => group.push(vec![a, c]),
            _ => {
                if let Some((_, group)) = current.take() {
                    by_anchor.push(group);
                }
                current = Some((a, vec![vec![a, c]]));
            }
        }
    }
    if let Some((_, group)) = current {
        by_anchor.push(group);
    }
    by_anchor
}

/// Subtypes of an anchor split by whether they aggregate it.
struct Fanout {
    aggregating: Vec<TypeId>,
    plain: Vec<TypeId>,
}

fn fanout(asg: &Asg, det: &MsDetections, anchor: TypeId) -> Fanout {
    let aggregates: BTreeSet<(TypeId, TypeId)> = det
        .of(row("Aggregation"))
        .iter()
        .map(|i| (i.nodes[0], i.nodes[1]))
        .collect();
    let mut out = Fanout {
        aggregating: Vec::new(),
        plain: Vec::new(),
    };
    for sub in asg.subtypes(anchor) {
        if !internal(asg, *sub) {
            continue;
        }
        if aggregates.contains(&(*sub, anchor)) {
            out.aggregating.push(*sub);
        } else {
            out.plain.push(*sub);
        }
    }
    out
}

/// The three-step procedure: super-types become Component anchors, their
/// aggregating subtypes Composites, the rest Leaves, crossed per anchor.
fn sample_composite(asg: &Asg, det: &MsDetections) -> Vec<Vec<Vec<TypeId>>> {
    let mut groups = Vec::new();
    for t in asg.types() {
        if !internal(asg, t.id) || asg.subtypes(t.id).is_empty() {
            continue;
        }
        let fan = fanout(asg, det, t.id);
        let mut group = Vec::new();
        for composite in &fan.aggregating {
            for leaf in &fan.plain {
                group.push(vec![t.id, *composite, *leaf]);
            }
        }
        if !group.is_empty() {
            groups.push(group);
        }
    }
    groups
}

/// Component anchors again; a Decorator is an aggregating subtype that is
/// abstract or extended further, its subtypes are ConcreteDecorators, and
/// subtypes outside the decorator limb that do not aggregate are
/// ConcreteComponents.
fn sample_decorator(asg: &Asg, det: &MsDetections) -> Vec<Vec<Vec<TypeId>>> {
    let mut groups = Vec::new();
    for t in asg.types() {
        if !internal(asg, t.id) || asg.subtypes(t.id).is_empty() {
            continue;
        }
        let fan = fanout(asg, det, t.id);
        let mut group = Vec::new();
        for decorator in &fan.aggregating {
            let extended = !asg.subtypes(*decorator).is_empty();
            if !asg.type_node(*decorator).is_abstract && !extended {
                continue;
            }
            let limb: BTreeSet<TypeId> = asg
                .subtypes(*decorator)
                .iter()
                .copied()
                .chain([*decorator])
                .collect();
            for concrete_decorator in asg.subtypes(*decorator) {
                if !internal(asg, *concrete_decorator) {
                    continue;
                }
                for concrete_component in &fan.plain {
                    if limb.contains(concrete_component) {
                        continue;
                    }
                    group.push(vec![
                        t.id,
                        *concrete_component,
                        *decorator,
                        *concrete_decorator,
                    ]);
                }
            }
        }
        if !group.is_empty() {
            groups.push(group);
        }
    }
    groups
}
