//! Reference implementations of the recorded operations, used to replay a
//! reproduction plan against artifact fixtures.
//!
//! Artifacts are plain delimited text: newline-separated rows of
//! comma-separated cells. These transforms define what each operation kind
//! means for fixtures; they make replay checkable, they are not claims about
//! real scientific pipelines.
//!
//! - `INGEST`: load the origin artifact bytes.
//! - `SUBSET {from_row, to_row}`: keep rows in `[from_row, to_row)`.
//! - `RECHUNK {chunk_rows}`: split into chunks of `chunk_rows` rows and
//!   concatenate the chunks in reverse order.
//! - `MERGE`: concatenate all parent artifacts in dependency order.
//! - `QA_QC` / `CORRECTION` `{edits: "row:col:value;..."}`: cell edits.

use std::collections::BTreeMap;

use crate::contracts::registry::{op_kinds, OperationStep};
use crate::crypto::Hash32;
use crate::error::{Error, ErrorCode, Result};
use crate::lineage::{LineageData, NodeKey, ReplayPlan};

fn rows(bytes: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(bytes);
    let mut rows: Vec<String> = text.split('\n').map(str::to_string).collect();
    if rows.last().is_some_and(String::is_empty) {
        rows.pop();
    }
    rows
}

fn join_rows(rows: &[String]) -> Vec<u8> {
    let mut out = String::new();
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out.into_bytes()
}

fn param<'a>(step: &'a OperationStep, name: &str) -> Result<&'a str> {
    step.parameters.get(name).map(String::as_str).ok_or_else(|| {
        Error::new(
            ErrorCode::BadArgs,
            format!("operation {} is missing parameter {name}", step.op_kind),
        )
    })
}

fn int_param(step: &OperationStep, name: &str) -> Result<usize> {
    param(step, name)?.parse().map_err(|e| {
        Error::new(
            ErrorCode::BadArgs,
            format!("operation {} parameter {name}: {e}", step.op_kind),
        )
    })
}

pub fn subset(bytes: &[u8], from_row: usize, to_row: usize) -> Vec<u8> {
    let all = rows(bytes);
    let to = to_row.min(all.len());
    let from = from_row.min(to);
    join_rows(&all[from..to])
}

pub fn rechunk(bytes: &[u8], chunk_rows: usize) -> Vec<u8> {
    let all = rows(bytes);
    if chunk_rows == 0 {
        return join_rows(&all);
    }
    let mut chunks: Vec<&[String]> = all.chunks(chunk_rows).collect();
    chunks.reverse();
    let reordered: Vec<String> = chunks.into_iter().flatten().cloned().collect();
    join_rows(&reordered)
}

pub fn merge(parents: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::new();
    for parent in parents {
        out.extend(join_rows(&rows(parent)));
    }
    out
}

/// Edits encoded as `"row:col:value"` entries separated by `;`.
pub fn apply_cell_edits(bytes: &[u8], edits: &str) -> Result<Vec<u8>> {
    let mut all = rows(bytes);
    for edit in edits.split(';').filter(|e| !e.is_empty()) {
        let mut parts = edit.splitn(3, ':');
        let (row, col, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(r), Some(c), Some(v)) => (r, c, v),
            _ => {
                return Err(Error::new(
                    ErrorCode::BadArgs,
                    format!("bad edit spec {edit:?}, want row:col:value"),
                ))
            }
        };
        let row: usize = row
            .parse()
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad edit row: {e}")))?;
        let col: usize = col
            .parse()
            .map_err(|e| Error::new(ErrorCode::BadArgs, format!("bad edit col: {e}")))?;
        if let Some(line) = all.get_mut(row) {
            let mut cells: Vec<&str> = line.split(',').collect();
            if col < cells.len() {
                cells[col] = value;
                *line = cells.join(",");
            }
        }
    }
    Ok(join_rows(&all))
}

/// Derives one node's bytes from already-derived parent material plus its
/// recorded history.
pub fn derive_node_bytes(
    key: &NodeKey,
    dependencies: &[NodeKey],
    history: &[OperationStep],
    materials: &BTreeMap<NodeKey, Vec<u8>>,
    origins: &BTreeMap<NodeKey, Vec<u8>>,
) -> Result<Vec<u8>> {
    let parent_bytes = |dep: &NodeKey| -> Result<Vec<u8>> {
        materials.get(dep).cloned().ok_or_else(|| {
            Error::new(
                ErrorCode::DanglingDependency,
                format!("parent {dep} has no derived bytes"),
            )
        })
    };
    let mut current = if dependencies.is_empty() {
        origins.get(key).cloned().ok_or_else(|| {
            Error::new(
                ErrorCode::NoMetadata,
                format!("origin node {key} has no fixture bytes"),
            )
        })?
    } else {
        parent_bytes(&dependencies[0])?
    };
    for step in history {
        current = match step.op_kind.as_str() {
            op_kinds::INGEST => origins.get(key).cloned().unwrap_or(current),
            op_kinds::SUBSET => subset(
                &current,
                int_param(step, "from_row")?,
                int_param(step, "to_row")?,
            ),
            op_kinds::RECHUNK => rechunk(&current, int_param(step, "chunk_rows")?),
            op_kinds::MERGE => {
                let parents: Vec<Vec<u8>> = dependencies
                    .iter()
                    .map(parent_bytes)
                    .collect::<Result<_>>()?;
                merge(&parents)
            }
            op_kinds::QA_QC | op_kinds::CORRECTION => {
                apply_cell_edits(&current, param(step, "edits")?)?
            }
            other => {
                return Err(Error::new(
                    ErrorCode::UnknownOperation,
                    format!("no reference implementation for operation {other}"),
                ))
            }
        };
    }
    Ok(current)
}

/// Executes a reproduction plan from origin artifacts, returning the derived
/// bytes of every node in the plan.
pub fn execute_plan(
    plan: &ReplayPlan,
    origins: &BTreeMap<NodeKey, Vec<u8>>,
) -> Result<BTreeMap<NodeKey, Vec<u8>>> {
    let mut materials: BTreeMap<NodeKey, Vec<u8>> = BTreeMap::new();
    for step in &plan.steps {
        let bytes = derive_node_bytes(
            &step.node,
            &step.dependencies,
            &step.history,
            &materials,
            origins,
        )?;
        materials.insert(step.node.clone(), bytes);
    }
    Ok(materials)
}

/// Replays the plan for `target` and checks the reproduced bytes hash to the
/// recorded content hash.
pub fn reproduce_and_check(
    data: &LineageData,
    target: &NodeKey,
    origins: &BTreeMap<NodeKey, Vec<u8>>,
) -> Result<bool> {
    let plan = data.replay_plan(target)?;
    let materials = execute_plan(&plan, origins)?;
    let produced = materials.get(target).ok_or_else(|| {
        Error::new(ErrorCode::NoSuchVersion, format!("plan skipped {target}"))
    })?;
    let recorded = data.get(target)?.content_hash;
    Ok(Hash32::of(produced) == recorded)
}
