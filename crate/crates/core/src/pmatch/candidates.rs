//! Candidate list sets, merging, and the candidate-set file.
//!
//! File layout: a header line `{"format":"prs-candidates","version":1}` then one
//! JSON object per list: `{"session":0,"source":"fpsa","items":[17,4,9,2],
//! "r_pv":..,"r_ipv":..,"r_sum":..}` with `items` given as item ids.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use super::fpsa::{BeamEntry, Reward};
use super::ScoredCandidate;
use crate::datamodel::ItemProfile;
use crate::error::{PrsError, Result};

pub const CANDIDATE_FORMAT: &str = "prs-candidates";
pub const CANDIDATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fpsa,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub entry: BeamEntry,
    pub source: Provenance,
}

/// Complete candidate lists of one request, all of length `n`, best `r_sum` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub n: usize,
    pub lists: Vec<CandidateList>,
}

impl CandidateSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            lists: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Wraps hand-built lists as an external set; rewards are filled in from `scores`.
    pub fn external(
        lists: Vec<Vec<usize>>,
        scores: &[ScoredCandidate],
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let n = lists.first().map_or(0, Vec::len);
        let lists = lists
            .into_iter()
            .map(|items| {
                if items.len() != n {
                    return Err(PrsError::Config("external lists differ in length".into()));
                }
                Ok(CandidateList {
                    entry: BeamEntry::from_items(items, scores, alpha, beta)?,
                    source: Provenance::External,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, lists })
    }
}

fn rank_lists(a: &CandidateList, b: &CandidateList) -> std::cmp::Ordering {
    b.entry
        .r_sum
        .total_cmp(&a.entry.r_sum)
        .then_with(|| a.entry.items.cmp(&b.entry.items))
}

/// Union of candidate sets with exact-sequence dedup (first occurrence wins).
///
/// Every list's reward is recomputed from `scores` so that lists from
/// different generators are comparable.
pub fn merge_candidates(
    sets: &[CandidateSet],
    scores: &[ScoredCandidate],
    alpha: f64,
    beta: f64,
) -> Result<CandidateSet> {
    let mut n = None;
    for set in sets.iter().filter(|s| !s.is_empty()) {
        if set.lists.iter().any(|l| l.entry.items.len() != set.n) {
            return Err(PrsError::Config(
                "candidate set holds lists of mixed length".into(),
            ));
        }
        match n {
            None => n = Some(set.n),
            Some(prev) if prev != set.n => {
                return Err(PrsError::Config(format!(
                    "cannot merge lists of length {prev} and {}",
                    set.n
                )))
            }
            _ => {}
        }
    }
    let n = n.unwrap_or_else(|| sets.first().map_or(0, |s| s.n));
    let mut seen = HashSet::new();
    let mut lists = Vec::new();
    for l in sets.iter().flat_map(|s| &s.lists) {
        if seen.insert(l.entry.items.clone()) {
            lists.push(CandidateList {
                entry: BeamEntry::from_items(l.entry.items.clone(), scores, alpha, beta)?,
                source: l.source,
            });
        }
    }
    lists.sort_by(rank_lists);
    Ok(CandidateSet { n, lists })
}

/// External generator: the top-`n` items by `P_ctr` in descending order.
pub fn greedy_ctr_list(
    scores: &[ScoredCandidate],
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<CandidateSet> {
    if n == 0 || n > scores.len() {
        return Err(PrsError::Config(format!(
            "greedy list of length {n} from {}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].p_ctr.total_cmp(&scores[a].p_ctr).then(a.cmp(&b)));
    order.truncate(n);
    CandidateSet::external(vec![order], scores, alpha, beta)
}

/// Candidate lists of one session, keyed by item id for storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCandidates {
    pub session: usize,
    pub lists: Vec<(Provenance, Vec<u32>, Reward)>,
}

impl SessionCandidates {
    pub fn from_set(session: usize, set: &CandidateSet, candidates: &[ItemProfile]) -> Self {
        Self {
            session,
            lists: set
                .lists
                .iter()
                .map(|l| {
                    let ids = l
                        .entry
                        .items
                        .iter()
                        .map(|&i| candidates[i].item_id)
                        .collect();
                    (l.source, ids, l.entry.reward())
                })
                .collect(),
        }
    }

    /// Maps item ids back to positions in `candidates`.
    pub fn to_set(
        &self,
        candidates: &[ItemProfile],
        scores: &[ScoredCandidate],
    ) -> Result<CandidateSet> {
        let n = self.lists.first().map_or(0, |l| l.1.len());
        let lists = self
            .lists
            .iter()
            .map(|(source, ids, reward)| {
                if ids.len() != n {
                    return Err(PrsError::Config("candidate lists of mixed length".into()));
                }
                let items = ids
                    .iter()
                    .map(|id| {
                        candidates
                            .iter()
                            .position(|c| c.item_id == *id)
                            .ok_or_else(|| {
                                PrsError::Lookup(format!(
                                    "item {id} not in session {}",
                                    self.session
                                ))
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let p_expose = items
                    .iter()
                    .map(|&i| scores.get(i).map_or(1.0, |s| s.p_next))
                    .product();
                Ok(CandidateList {
                    entry: BeamEntry {
                        items,
                        r_pv: reward.r_pv,
                        r_ipv: reward.r_ipv,
                        r_sum: reward.r_sum,
                        p_expose,
                    },
                    source: *source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateSet { n, lists })
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ListLine {
    session: usize,
    source: Provenance,
    items: Vec<u32>,
    r_pv: f64,
    r_ipv: f64,
    r_sum: f64,
}

pub fn write_candidate_file<W: Write>(sessions: &[SessionCandidates], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let header = FileHeader {
        format: CANDIDATE_FORMAT.into(),
        version: CANDIDATE_VERSION,
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for s in sessions {
        for (source, items, r) in &s.lists {
            let line = ListLine {
                session: s.session,
                source: *source,
                items: items.clone(),
                r_pv: r.r_pv,
                r_ipv: r.r_ipv,
                r_sum: r.r_sum,
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a candidate file; consecutive lines with the same session id form one session.
pub fn read_candidate_file<R: Read>(reader: R) -> Result<Vec<SessionCandidates>> {
    let mut lines = BufReader::new(reader).lines();
    let first = lines.next().transpose()?.ok_or_else(|| PrsError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header: FileHeader = serde_json::from_str(&first).map_err(|e| PrsError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.format != CANDIDATE_FORMAT || header.version != CANDIDATE_VERSION {
        return Err(PrsError::Format(format!(
            "unsupported candidate file {} v{}",
            header.format, header.version
        )));
    }
    let mut out: Vec<SessionCandidates> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: ListLine = serde_json::from_str(&line).map_err(|e| PrsError::Parse {
            line: idx + 2,
            message: e.to_string(),
        })?;
        let entry = (
            l.source,
            l.items,
            Reward {
                r_pv: l.r_pv,
                r_ipv: l.r_ipv,
                r_sum: l.r_sum,
            },
        );
        match out.last_mut() {
            Some(s) if s.session == l.session => s.lists.push(entry),
            _ => out.push(SessionCandidates {
                session: l.session,
                lists: vec![entry],
            }),
        }
    }
    Ok(out)
}
