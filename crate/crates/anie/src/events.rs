//! Ingestion and validation of dynamic-network event data.
//!
//! An [`EventStream`] is the canonical in-memory form consumed by every
//! downstream stage: a validated, time-ordered list of `(u, v, t)`
//! interaction events on nodes `0..N` over a horizon `[0, T]`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a stream keeps events as given or mirrors each off-diagonal event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Directed,
    /// Every event (u, v, t) with u != v is duplicated as (v, u, t).
    UndirectedSymmetrized,
}

/// One interaction event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub u: u32,
    pub v: u32,
    pub t: f64,
}

/// Validated, time-ordered interaction events on `[0, horizon]`.
///
/// Immutable after construction; cheap to share across readers.
#[derive(Debug, Clone)]
pub struct EventStream {
    n_nodes: usize,
    horizon: f64,
    events: Vec<Event>,
    directedness: Directedness,
    self_loops: usize,
    reordered: bool,
    relabeling: Option<Vec<u64>>,
}

/// Options controlling [`load_events`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Node count override; inferred as `1 + max id` when absent.
    pub n_nodes: Option<usize>,
    /// Horizon override; inferred as the last timestamp when absent
    /// (1.0 for an empty file).
    pub horizon: Option<f64>,
    pub directedness: Option<Directedness>,
    /// Compact arbitrary non-negative integer ids to `0..K`; the mapping from
    /// new id to original id is recorded on the stream.
    pub relabel: bool,
}

/// JSON sidecar accompanying the canonical CSV format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n_nodes: usize,
    pub horizon: f64,
    pub directed: bool,
}

impl EventStream {
    /// Builds a stream from raw events: validates ids and timestamps, sorts
    /// stably by time, and mirrors off-diagonal events when undirected.
    pub fn new(
        n_nodes: usize,
        horizon: f64,
        mut events: Vec<Event>,
        directedness: Directedness,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Validation("n_nodes must be positive".into()));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::DegenerateHorizon(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        for e in &events {
            if (e.u as usize) >= n_nodes || (e.v as usize) >= n_nodes {
                return Err(Error::Validation(format!(
                    "node id ({}, {}) outside [0, {})",
                    e.u, e.v, n_nodes
                )));
            }
            if !(0.0..=horizon).contains(&e.t) {
                return Err(Error::Validation(format!(
                    "timestamp {} outside [0, {}]",
                    e.t, horizon
                )));
            }
        }
        if directedness == Directedness::UndirectedSymmetrized {
            let mirrored: Vec<Event> = events
                .iter()
                .filter(|e| e.u != e.v)
                .map(|e| Event {
                    u: e.v,
                    v: e.u,
                    t: e.t,
                })
                .collect();
            events.extend(mirrored);
        }
        let reordered = events.windows(2).any(|w| w[0].t > w[1].t);
        // Stable: ties keep input order, which downstream sums never observe.
        events.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("validated timestamps"));
        let self_loops = events.iter().filter(|e| e.u == e.v).count();
        Ok(Self {
            n_nodes,
            horizon,
            events,
            directedness,
            self_loops,
            reordered,
            relabeling: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn directedness(&self) -> Directedness {
        self.directedness
    }

    /// Number of u == v events retained in the stream.
    pub fn self_loop_count(&self) -> usize {
        self.self_loops
    }

    /// True when the input rows were not already in time order.
    pub fn was_reordered(&self) -> bool {
        self.reordered
    }

    /// Map from dense id to original id, present when ids were compacted.
    pub fn relabeling(&self) -> Option<&[u64]> {
        self.relabeling.as_deref()
    }

    /// True when all timestamps live on the unit interval.
    pub fn is_normalized(&self) -> bool {
        self.horizon == 1.0
    }
}

/// Divides every timestamp by the horizon so the stream lives on `[0, 1]`.
///
/// Idempotent for streams that already have horizon 1.
pub fn rescale(stream: &EventStream) -> Result<EventStream> {
    if stream.horizon == 0.0 && !stream.events.is_empty() {
        return Err(Error::DegenerateHorizon(
            "cannot rescale a zero-length horizon with events".into(),
        ));
    }
    if stream.horizon == 1.0 {
        return Ok(stream.clone());
    }
    let t_max = stream.horizon;
    let events = stream
        .events
        .iter()
        .map(|e| Event {
            u: e.u,
            v: e.v,
            t: e.t / t_max,
        })
        .collect();
    Ok(EventStream {
        n_nodes: stream.n_nodes,
        horizon: 1.0,
        events,
        directedness: stream.directedness,
        self_loops: stream.self_loops,
        reordered: stream.reordered,
        relabeling: stream.relabeling.clone(),
    })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        let mut p = path.to_path_buf();
        p.set_extension("sidecar.json");
        p
    } else {
        path.with_extension("json")
    }
}

/// Reads an edge list CSV with header `u,v,t` into an [`EventStream`].
///
/// A JSON sidecar next to the file (same stem, `.json` extension) may supply
/// `n_nodes`, `horizon` and `directed`; explicit options take precedence.
pub fn load_events(path: &Path, options: &LoadOptions) -> Result<EventStream> {
    let sidecar: Option<Sidecar> = {
        let sc = sidecar_path(path);
        if sc.exists() {
            let text =
                std::fs::read_to_string(&sc).map_err(|e| Error::io(sc.display().to_string(), e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Schema {
                path: sc.display().to_string(),
                message: e.to_string(),
            })?)
        } else {
            None
        }
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let (cu, cv, ct) = (col("u")?, col("v")?, col("t")?);

    let mut raw: Vec<(u64, u64, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str> {
            record.get(c).ok_or_else(|| Error::Parse {
                line,
                message: "short row".into(),
            })
        };
        let parse_id = |s: &str| -> Result<u64> {
            s.trim()
                .parse::<i64>()
                .ok()
                .and_then(|x| u64::try_from(x).ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("invalid node id '{s}'"),
                })
        };
        let u = parse_id(field(cu)?)?;
        let v = parse_id(field(cv)?)?;
        let t: f64 = field(ct)?.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid timestamp '{}'", field(ct).unwrap_or("")),
        })?;
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Validation(format!(
                "line {line}: negative or non-finite timestamp {t}"
            )));
        }
        raw.push((u, v, t));
    }

    let mut relabeling = None;
    if options.relabel {
        let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v, _)| [u, v]).collect();
        ids.sort_unstable();
        ids.dedup();
        let lookup: std::collections::HashMap<u64, u64> = ids
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new as u64))
            .collect();
        for r in &mut raw {
            r.0 = lookup[&r.0];
            r.1 = lookup[&r.1];
        }
        relabeling = Some(ids);
    }

    let n_nodes = options
        .n_nodes
        .or(sidecar.as_ref().map(|s| s.n_nodes))
        .unwrap_or_else(|| raw.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0) as usize);
    if n_nodes == 0 {
        return Err(Error::Validation(
            "empty edge list with no n_nodes override".into(),
        ));
    }
    let horizon = options
        .horizon
        .or(sidecar.as_ref().map(|s| s.horizon))
        .unwrap_or_else(|| {
            raw.iter()
                .map(|&(_, _, t)| t)
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0)
        });
    let horizon = if horizon > 0.0 { horizon } else { 1.0 };
    let directedness = options
        .directedness
        .or(sidecar.as_ref().map(|s| {
            if s.directed {
                Directedness::Directed
            } else {
                Directedness::UndirectedSymmetrized
            }
        }))
        .unwrap_or(Directedness::Directed);

    let events = raw
        .into_iter()
        .map(|(u, v, t)| {
            let id_ok = (u as usize) < n_nodes && (v as usize) < n_nodes;
            if !id_ok {
                return Err(Error::Validation(format!(
                    "node id ({u}, {v}) outside [0, {n_nodes})"
                )));
            }
            Ok(Event {
                u: u as u32,
                v: v as u32,
                t,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stream = EventStream::new(n_nodes, horizon, events, directedness)?;
    stream.relabeling = relabeling;
    Ok(stream)
}

/// Writes the canonical CSV (`u,v,t` header) plus its JSON sidecar.
pub fn save_events(stream: &EventStream, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(b"u,v,t\n");
    for e in stream.events() {
        writeln!(out, "{},{},{}", e.u, e.v, e.t).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))?;

    let sidecar = Sidecar {
        n_nodes: stream.n_nodes(),
        horizon: stream.horizon(),
        directed: stream.directedness() == Directedness::Directed,
    };
    let sc = sidecar_path(path);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&sc, text).map_err(|e| Error::io(sc.display().to_string(), e))?;
    Ok(())
}
