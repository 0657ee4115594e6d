//! Off-chain lineage engine: trace (ancestry), verify (licence compliance),
//! replay (reproduction plan) and account (who did what).
//!
//! The committed registry records are the single source of truth; this module
//! is a read-only view rebuilt from `export_records` / `list_identities`
//! calls, cached per block height and invalidated whenever the chain grows.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::contracts::identity::IdentityRecord;
use crate::contracts::registry::{DependencyRef, ExportedDataset, OperationStep};
use crate::crypto::{Address, Hash32};
use crate::error::{Error, ErrorCode, Result};
use crate::ledger::Node;
use crate::runtime::{identity_registry_address, registry_factory_address};
use crate::tx::CallEnvelope;

/// One lineage node: a specific version of a specific dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub uuid: String,
    pub version: u32,
}

impl NodeKey {
    pub fn new(uuid: impl Into<String>, version: u32) -> NodeKey {
        NodeKey {
            uuid: uuid.into(),
            version,
        }
    }
}

impl std::fmt::Display for NodeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.uuid, self.version)
    }
}

/// Flattened registry record used to build lineage structures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineageRecord {
    pub key: NodeKey,
    pub file_name: String,
    pub licence: String,
    pub creator: Address,
    pub created_at_height: u64,
    pub content_hash: Hash32,
    pub dependencies: Vec<NodeKey>,
    pub history: Vec<OperationStep>,
    pub data_paths: Vec<String>,
}

/// All records of one registry (or a merged view), keyed by node.
#[derive(Debug, Clone, Default)]
pub struct LineageData {
    pub records: BTreeMap<NodeKey, LineageRecord>,
}

impl LineageData {
    pub fn from_exports(exports: &[ExportedDataset]) -> LineageData {
        let mut records = BTreeMap::new();
        for dataset in exports {
            for version in &dataset.versions {
                let key = NodeKey::new(dataset.uuid.clone(), version.version_number);
                records.insert(
                    key.clone(),
                    LineageRecord {
                        key,
                        file_name: dataset.file_name.clone(),
                        licence: version.licence.clone(),
                        creator: version.creator,
                        created_at_height: version.created_at_height,
                        content_hash: version.content_hash,
                        dependencies: version
                            .dependencies
                            .iter()
                            .map(|d: &DependencyRef| NodeKey::new(d.uuid.clone(), d.version))
                            .collect(),
                        history: version.history.clone(),
                        data_paths: version.data_paths.clone(),
                    },
                );
            }
        }
        LineageData { records }
    }

    pub fn get(&self, key: &NodeKey) -> Result<&LineageRecord> {
        self.records.get(key).ok_or_else(|| {
            Error::new(
                ErrorCode::NoSuchVersion,
                format!("no record for {key}"),
            )
        })
    }

    /// Ancestor closure of the target, including the target itself.
    pub fn trace(&self, target: &NodeKey) -> Result<LineageGraph> {
        self.get(target)?;
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut queue = VecDeque::from([target.clone()]);
        while let Some(key) = queue.pop_front() {
            if !nodes.insert(key.clone()) {
                continue;
            }
            let record = self.get(&key)?;
            for parent in &record.dependencies {
                edges.insert(LineageEdge {
                    child: key.clone(),
                    parent: parent.clone(),
                });
                queue.push_back(parent.clone());
            }
        }
        let annotations = nodes
            .iter()
            .map(|key| {
                let record = self.get(key).expect("closure nodes resolve");
                (
                    key.clone(),
                    NodeAnnotation {
                        licence: record.licence.clone(),
                        creator: record.creator,
                        created_at_height: record.created_at_height,
                    },
                )
            })
            .collect();
        Ok(LineageGraph {
            nodes,
            edges,
            annotations,
        })
    }

    /// Topologically sorted reproduction plan over the ancestor closure.
    /// Deterministic tie-break: (created_at_height, uuid, version).
    pub fn replay_plan(&self, target: &NodeKey) -> Result<ReplayPlan> {
        let graph = self.trace(target)?;
        let mut unprocessed_parents: BTreeMap<&NodeKey, usize> =
            graph.nodes.iter().map(|n| (n, 0)).collect();
        let mut children: BTreeMap<&NodeKey, Vec<&NodeKey>> = BTreeMap::new();
        for edge in &graph.edges {
            *unprocessed_parents.get_mut(&edge.child).expect("closure node") += 1;
            children.entry(&edge.parent).or_default().push(&edge.child);
        }

        let sort_key = |key: &NodeKey| {
            let record = self.get(key).expect("closure nodes resolve");
            (record.created_at_height, key.uuid.clone(), key.version)
        };
        let mut ready: BTreeSet<(u64, String, u32)> = unprocessed_parents
            .iter()
            .filter(|(_, n)| **n == 0)
            .map(|(k, _)| sort_key(k))
            .collect();

        let mut steps = Vec::with_capacity(graph.nodes.len());
        while let Some(entry) = ready.iter().next().cloned() {
            ready.remove(&entry);
            let key = NodeKey::new(entry.1.clone(), entry.2);
            let record = self.get(&key)?;
            steps.push(PlanStep {
                node: key.clone(),
                dependencies: record.dependencies.clone(),
                history: record.history.clone(),
            });
            if let Some(kids) = children.get(&key) {
                for child in kids {
                    let n = unprocessed_parents.get_mut(*child).expect("closure node");
                    *n -= 1;
                    if *n == 0 {
                        ready.insert(sort_key(child));
                    }
                }
            }
        }
        debug_assert_eq!(steps.len(), graph.nodes.len(), "closure is acyclic");
        Ok(ReplayPlan { steps })
    }

    /// Evaluates every lineage edge against the licence matrix.
    pub fn verify_licences(
        &self,
        target: &NodeKey,
        matrix: &LicenceMatrix,
    ) -> Result<ComplianceReport> {
        let graph = self.trace(target)?;
        for node in &graph.nodes {
            let licence = &graph.annotations[node].licence;
            if !matrix.knows(licence) {
                return Err(Error::new(
                    ErrorCode::UnknownLicence,
                    format!("licence {licence} of {node} is outside the matrix domain"),
                ));
            }
        }
        let mut violations = Vec::new();
        let mut obligations = Vec::new();
        for edge in &graph.edges {
            let upstream = &graph.annotations[&edge.parent].licence;
            let downstream = &graph.annotations[&edge.child].licence;
            let verdict = matrix.lookup(upstream, downstream)?;
            let entry = EdgeVerdict {
                child: edge.child.clone(),
                parent: edge.parent.clone(),
                upstream: upstream.clone(),
                downstream: downstream.clone(),
                verdict,
            };
            match verdict {
                LicenceVerdict::Forbidden => violations.push(entry),
                LicenceVerdict::AllowedWithAttribution => obligations.push(entry),
                LicenceVerdict::Allowed => {}
            }
        }
        Ok(ComplianceReport {
            target: target.clone(),
            compliant: violations.is_empty(),
            violations,
            obligations,
        })
    }

    /// Joins every step of the target's full ancestor history with the
    /// resolved on-chain identity of its actor, in plan order.
    pub fn account(
        &self,
        target: &NodeKey,
        identities: &BTreeMap<Address, IdentityRecord>,
    ) -> Result<Vec<AccountEntry>> {
        let plan = self.replay_plan(target)?;
        let mut entries = Vec::new();
        for step in &plan.steps {
            for op in &step.history {
                let identity = identities.get(&op.actor).ok_or_else(|| {
                    Error::new(
                        ErrorCode::UnresolvedActor,
                        format!("actor {} of {} has no identity record", op.actor, step.node),
                    )
                })?;
                entries.push(AccountEntry {
                    node: step.node.clone(),
                    step: op.clone(),
                    identity: identity.clone(),
                });
            }
        }
        Ok(entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineageEdge {
    pub child: NodeKey,
    pub parent: NodeKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAnnotation {
    pub licence: String,
    pub creator: Address,
    pub created_at_height: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineageGraph {
    pub nodes: BTreeSet<NodeKey>,
    pub edges: BTreeSet<LineageEdge>,
    pub annotations: BTreeMap<NodeKey, NodeAnnotation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStep {
    pub node: NodeKey,
    pub dependencies: Vec<NodeKey>,
    pub history: Vec<OperationStep>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayPlan {
    pub steps: Vec<PlanStep>,
}

impl ReplayPlan {
    /// True when every parent precedes every child.
    pub fn is_topologically_valid(&self) -> bool {
        let mut seen = BTreeSet::new();
        for step in &self.steps {
            if !step.dependencies.iter().all(|d| seen.contains(d)) {
                return false;
            }
            seen.insert(step.node.clone());
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LicenceVerdict {
    Allowed,
    AllowedWithAttribution,
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeVerdict {
    pub child: NodeKey,
    pub parent: NodeKey,
    pub upstream: String,
    pub downstream: String,
    pub verdict: LicenceVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub target: NodeKey,
    pub compliant: bool,
    pub violations: Vec<EdgeVerdict>,
    pub obligations: Vec<EdgeVerdict>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccountEntry {
    pub node: NodeKey,
    pub step: OperationStep,
    pub identity: IdentityRecord,
}

/// Pairwise licence compatibility. The shipped table is synthetic: the
/// platform checks structure, not law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LicenceMatrix {
    pub licences: BTreeSet<String>,
    /// `"UPSTREAM->DOWNSTREAM"` -> verdict.
    pub rules: BTreeMap<String, LicenceVerdict>,
}

impl LicenceMatrix {
    /// Default matrix over {CC0, CC-BY, PROPRIETARY}: nine explicit entries.
    pub fn default_matrix() -> LicenceMatrix {
        use LicenceVerdict::*;
        let entries = [
            ("CC0", "CC0", Allowed),
            ("CC0", "CC-BY", Allowed),
            ("CC0", "PROPRIETARY", Allowed),
            ("CC-BY", "CC0", Forbidden),
            ("CC-BY", "CC-BY", AllowedWithAttribution),
            ("CC-BY", "PROPRIETARY", AllowedWithAttribution),
            ("PROPRIETARY", "CC0", Forbidden),
            ("PROPRIETARY", "CC-BY", Forbidden),
            ("PROPRIETARY", "PROPRIETARY", Allowed),
        ];
        LicenceMatrix {
            licences: entries.iter().map(|(u, _, _)| u.to_string()).collect(),
            rules: entries
                .iter()
                .map(|(u, d, v)| (format!("{u}->{d}"), *v))
                .collect(),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<LicenceMatrix> {
        let data = std::fs::read(path)?;
        let matrix: LicenceMatrix = serde_json::from_slice(&data).map_err(|e| {
            Error::new(
                ErrorCode::BadArgs,
                format!("bad licence matrix {}: {e}", path.display()),
            )
        })?;
        matrix.validate()?;
        Ok(matrix)
    }

    /// Total over the licence set; identical licences never map to FORBIDDEN.
    pub fn validate(&self) -> Result<()> {
        for up in &self.licences {
            for down in &self.licences {
                match self.rules.get(&format!("{up}->{down}")) {
                    Some(LicenceVerdict::Forbidden) if up == down => {
                        return Err(Error::new(
                            ErrorCode::BadArgs,
                            format!("matrix forbids {up} -> {up}; identical licences must be allowed"),
                        ));
                    }
                    Some(_) => {}
                    None if up == down => {} // implicit reflexive ALLOWED
                    None => {
                        return Err(Error::new(
                            ErrorCode::BadArgs,
                            format!("matrix is not total: missing {up} -> {down}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn knows(&self, licence: &str) -> bool {
        self.licences.contains(licence)
    }

    pub fn lookup(&self, upstream: &str, downstream: &str) -> Result<LicenceVerdict> {
        if !self.knows(upstream) || !self.knows(downstream) {
            return Err(Error::new(
                ErrorCode::UnknownLicence,
                format!("licence pair ({upstream}, {downstream}) outside matrix domain"),
            ));
        }
        match self.rules.get(&format!("{upstream}->{downstream}")) {
            Some(verdict) => Ok(*verdict),
            None if upstream == downstream => Ok(LicenceVerdict::Allowed),
            None => Err(Error::new(
                ErrorCode::UnknownLicence,
                format!("matrix has no entry {upstream} -> {downstream}"),
            )),
        }
    }
}

/// Snapshot of lineage-relevant chain state at one height.
#[derive(Clone)]
pub struct LineageSnapshot {
    pub height: u64,
    pub data: Arc<LineageData>,
    pub identities: Arc<BTreeMap<Address, IdentityRecord>>,
}

/// Height-cached view over a node's committed registries.
pub struct LineageEngine {
    node: Arc<Node>,
    cache: Mutex<Option<LineageSnapshot>>,
}

impl LineageEngine {
    pub fn new(node: Arc<Node>) -> LineageEngine {
        LineageEngine {
            node,
            cache: Mutex::new(None),
        }
    }

    /// Returns the cached snapshot, rebuilding it when new blocks landed.
    pub fn snapshot(&self) -> Result<LineageSnapshot> {
        let height = self.node.height();
        {
            let cache = self.cache.lock();
            if let Some(snap) = cache.as_ref() {
                if snap.height == height {
                    return Ok(snap.clone());
                }
            }
        }
        let snap = self.rebuild(height)?;
        *self.cache.lock() = Some(snap.clone());
        Ok(snap)
    }

    fn rebuild(&self, height: u64) -> Result<LineageSnapshot> {
        let descriptors = self.node.query(
            registry_factory_address(),
            &CallEnvelope::new("list_registries", vec![serde_json::Value::Null]),
        )?;
        let descriptors: Vec<crate::contracts::factory::RegistryDescriptor> =
            serde_json::from_value(descriptors)
                .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad descriptor list: {e}")))?;
        let mut exports: Vec<ExportedDataset> = Vec::new();
        for descriptor in &descriptors {
            let value = self.node.query(
                descriptor.registry_address,
                &CallEnvelope::new("export_records", vec![]),
            )?;
            let mut records: Vec<ExportedDataset> = serde_json::from_value(value)
                .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad export: {e}")))?;
            exports.append(&mut records);
        }
        let identities_value = self.node.query(
            identity_registry_address(),
            &CallEnvelope::new("list_identities", vec![]),
        )?;
        let identity_list: Vec<IdentityRecord> = serde_json::from_value(identities_value)
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad identity list: {e}")))?;
        Ok(LineageSnapshot {
            height,
            data: Arc::new(LineageData::from_exports(&exports)),
            identities: Arc::new(
                identity_list
                    .into_iter()
                    .map(|r| (r.address, r))
                    .collect(),
            ),
        })
    }

    pub fn trace(&self, uuid: &str, version: u32) -> Result<LineageGraph> {
        self.snapshot()?.data.trace(&NodeKey::new(uuid, version))
    }

    pub fn verify_licences(
        &self,
        uuid: &str,
        version: u32,
        matrix: &LicenceMatrix,
    ) -> Result<ComplianceReport> {
        self.snapshot()?
            .data
            .verify_licences(&NodeKey::new(uuid, version), matrix)
    }

    pub fn replay_plan(&self, uuid: &str, version: u32) -> Result<ReplayPlan> {
        self.snapshot()?
            .data
            .replay_plan(&NodeKey::new(uuid, version))
    }

    pub fn account(&self, uuid: &str, version: u32) -> Result<Vec<AccountEntry>> {
        let snap = self.snapshot()?;
        snap.data
            .account(&NodeKey::new(uuid, version), &snap.identities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(
        uuid: &str,
        version: u32,
        licence: &str,
        height: u64,
        deps: &[(&str, u32)],
    ) -> LineageRecord {
        LineageRecord {
            key: NodeKey::new(uuid, version),
            file_name: format!("{uuid}.csv"),
            licence: licence.to_string(),
            creator: Address::ZERO,
            created_at_height: height,
            content_hash: Hash32::of(format!("{uuid}:{version}").as_bytes()),
            dependencies: deps.iter().map(|(u, v)| NodeKey::new(*u, *v)).collect(),
            history: vec![],
            data_paths: vec![format!("file:///{uuid}")],
        }
    }

    fn data(records: Vec<LineageRecord>) -> LineageData {
        LineageData {
            records: records.into_iter().map(|r| (r.key.clone(), r)).collect(),
        }
    }

    const A: &str = "0a000000-0000-4000-8000-000000000001";
    const B: &str = "0b000000-0000-4000-8000-000000000002";
    const M: &str = "0c000000-0000-4000-8000-000000000003";

    #[test]
    fn origin_trace_is_single_node() {
        let d = data(vec![record(A, 1, "CC0", 1, &[])]);
        let g = d.trace(&NodeKey::new(A, 1)).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn missing_target_is_no_such_version() {
        let d = data(vec![]);
        let err = d.trace(&NodeKey::new(A, 1)).unwrap_err();
        assert_eq!(err.code, ErrorCode::NoSuchVersion);
    }

    #[test]
    fn merged_trace_covers_both_ancestor_chains() {
        let d = data(vec![
            record(A, 1, "CC0", 1, &[]),
            record(A, 2, "CC0", 2, &[(A, 1)]),
            record(B, 1, "CC0", 1, &[]),
            record(M, 1, "CC0", 3, &[(A, 2), (B, 1)]),
        ]);
        let g = d.trace(&NodeKey::new(M, 1)).unwrap();
        // Oracle: brute-force transitive closure over raw dependency lists.
        let mut closure: BTreeSet<NodeKey> = BTreeSet::from([NodeKey::new(M, 1)]);
        loop {
            let before = closure.len();
            for (key, rec) in &d.records {
                if closure.contains(key) {
                    for dep in &rec.dependencies {
                        closure.insert(dep.clone());
                    }
                }
            }
            if closure.len() == before {
                break;
            }
        }
        assert_eq!(g.nodes, closure);
        assert_eq!(g.nodes.len(), 4);
    }

    #[test]
    fn self_version_dependency_traces_both() {
        let d = data(vec![
            record(A, 1, "CC0", 1, &[]),
            record(A, 2, "CC0", 2, &[(A, 1)]),
        ]);
        let g = d.trace(&NodeKey::new(A, 2)).unwrap();
        assert!(g.nodes.contains(&NodeKey::new(A, 1)));
        assert!(g.nodes.contains(&NodeKey::new(A, 2)));
    }

    #[test]
    fn replay_plan_is_topological_and_deterministic() {
        let d = data(vec![
            record(A, 1, "CC0", 1, &[]),
            record(B, 1, "CC0", 1, &[]),
            record(M, 1, "CC0", 3, &[(A, 1), (B, 1)]),
        ]);
        let p1 = d.replay_plan(&NodeKey::new(M, 1)).unwrap();
        let p2 = d.replay_plan(&NodeKey::new(M, 1)).unwrap();
        assert!(p1.is_topologically_valid());
        let order1: Vec<NodeKey> = p1.steps.iter().map(|s| s.node.clone()).collect();
        let order2: Vec<NodeKey> = p2.steps.iter().map(|s| s.node.clone()).collect();
        assert_eq!(order1, order2);
        // Tie between (A,1) and (B,1) at height 1 resolves by uuid.
        assert_eq!(order1[0], NodeKey::new(A, 1));
        assert_eq!(order1[1], NodeKey::new(B, 1));
    }

    #[test]
    fn all_cc0_chain_is_compliant_without_obligations() {
        let d = data(vec![
            record(A, 1, "CC0", 1, &[]),
            record(A, 2, "CC0", 2, &[(A, 1)]),
        ]);
        let report = d
            .verify_licences(&NodeKey::new(A, 2), &LicenceMatrix::default_matrix())
            .unwrap();
        assert!(report.compliant);
        assert!(report.violations.is_empty());
        assert!(report.obligations.is_empty());
    }

    #[test]
    fn proprietary_parent_public_child_is_violation() {
        let d = data(vec![
            record(A, 1, "PROPRIETARY", 1, &[]),
            record(B, 1, "CC0", 2, &[(A, 1)]),
        ]);
        let report = d
            .verify_licences(&NodeKey::new(B, 1), &LicenceMatrix::default_matrix())
            .unwrap();
        // Oracle: one edge, matrix says PROPRIETARY->CC0 is FORBIDDEN.
        assert!(!report.compliant);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].verdict, LicenceVerdict::Forbidden);
    }

    #[test]
    fn ccby_chain_yields_one_attribution_obligation() {
        let d = data(vec![
            record(A, 1, "CC-BY", 1, &[]),
            record(A, 2, "CC-BY", 2, &[(A, 1)]),
        ]);
        let report = d
            .verify_licences(&NodeKey::new(A, 2), &LicenceMatrix::default_matrix())
            .unwrap();
        assert!(report.compliant);
        assert_eq!(report.obligations.len(), 1);
        assert_eq!(
            report.obligations[0].verdict,
            LicenceVerdict::AllowedWithAttribution
        );
    }

    #[test]
    fn licence_outside_matrix_domain_errors() {
        let d = data(vec![record(A, 1, "WTFPL", 1, &[])]);
        let err = d
            .verify_licences(&NodeKey::new(A, 1), &LicenceMatrix::default_matrix())
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownLicence);
    }

    #[test]
    fn default_matrix_is_total_and_reflexively_allowed() {
        let matrix = LicenceMatrix::default_matrix();
        matrix.validate().unwrap();
        assert_eq!(matrix.rules.len(), 9);
        for licence in &matrix.licences {
            assert_ne!(
                matrix.lookup(licence, licence).unwrap(),
                LicenceVerdict::Forbidden
            );
        }
    }

    #[test]
    fn account_requires_resolvable_actors() {
        let mut rec = record(A, 1, "CC0", 1, &[]);
        rec.history.push(OperationStep {
            op_kind: "INGEST".into(),
            parameters: BTreeMap::new(),
            actor: Address::from_bytes([7u8; 20]),
            timestamp_ms: 0,
        });
        let d = data(vec![rec]);
        let err = d
            .account(&NodeKey::new(A, 1), &BTreeMap::new())
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::UnresolvedActor);
    }
}
