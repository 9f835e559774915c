//! Executes the matrix and streams the outcome log.
//!
//! Workers pull (combo, request) jobs from a shared counter; rows go
//! through a channel to the calling thread, which writes them in job order.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use routebench_core::outcome::Observation;
use routebench_core::{assemble_request, ComboSpec, FailureClass, RequestOutcome, TaskPrompt};

use crate::error::{Error, Result};
use crate::gateway::{Backend, RequestContext};
use crate::log_file::{write_header, write_row, LogHeader};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub rows: usize,
    pub combos: usize,
    pub aborted_combos: Vec<usize>,
    pub taxonomy: BTreeMap<FailureClass, usize>,
}

/// Per-combo progress, reported once every row of the combo is written.
#[derive(Debug, Clone)]
pub struct ComboProgress<'a> {
    pub index: usize,
    pub total: usize,
    pub combo: &'a ComboSpec,
    pub ok_rows: usize,
    pub rows: usize,
    pub aborted: bool,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn aborted_observation() -> Observation {
    Observation {
        raw_text: String::new(),
        latency_ms: None,
        prompt_tokens: 0,
        completion_tokens: 0,
        http_status: None,
        transport: FailureClass::TransportError,
        attempt_count: 0,
        aborted: true,
    }
}

fn run_one(
    backend: &dyn Backend,
    combos: &[ComboSpec],
    pool: &[TaskPrompt],
    state_ranks: &[usize],
    seed: u64,
    job: usize,
    aborted: &[AtomicBool],
) -> RequestOutcome {
    let (ci, ri) = (job / pool.len(), job % pool.len());
    let combo = &combos[ci];
    let prompt = &pool[ri];
    let obs = if aborted[ci].load(Ordering::SeqCst) {
        aborted_observation()
    } else {
        match assemble_request(combo, prompt) {
            Ok(payload) => {
                let ctx = RequestContext {
                    seed,
                    combo_index: ci,
                    combo,
                    request_index: ri,
                    state_rank: state_ranks[ri],
                    prompt,
                };
                let obs = backend.complete(&payload, &ctx);
                if obs.aborted {
                    log::error!("combo {} aborted at request {ri}", combo.key());
                    aborted[ci].store(true, Ordering::SeqCst);
                }
                obs
            }
            Err(e) => {
                log::error!("cannot assemble request for {}: {e}", combo.key());
                aborted[ci].store(true, Ordering::SeqCst);
                aborted_observation()
            }
        }
    };
    RequestOutcome::build(ci, combo, ri, prompt, obs, now_ms())
}

/// Runs every (combo, prompt) pair and writes the header plus one row per
/// pair to `out`, in (combo, prompt) order regardless of `workers`.
#[allow(clippy::too_many_arguments)]
pub fn run_matrix<W: Write>(
    combos: &[ComboSpec],
    pool: &[TaskPrompt],
    backend: &dyn Backend,
    seed: u64,
    workers: usize,
    header: &LogHeader,
    out: &mut W,
    mut progress: impl FnMut(&ComboProgress<'_>),
) -> Result<RunSummary> {
    if combos.is_empty() || pool.is_empty() {
        return Err(Error::Usage("nothing to run: empty matrix or pool".into()));
    }
    let io_err = |e| Error::io("<outcome log>", e);
    write_header(out, header).map_err(io_err)?;

    let total = combos.len() * pool.len();
    let state_ranks: Vec<usize> = pool
        .iter()
        .scan(0usize, |n, p| {
            let rank = *n;
            *n += usize::from(p.state_sensitive);
            Some(rank)
        })
        .collect();
    let next = AtomicUsize::new(0);
    let aborted: Vec<AtomicBool> = combos.iter().map(|_| AtomicBool::new(false)).collect();
    let mut summary = RunSummary {
        rows: 0,
        combos: combos.len(),
        aborted_combos: Vec::new(),
        taxonomy: FailureClass::ALL.into_iter().map(|c| (c, 0)).collect(),
    };

    std::thread::scope(|s| -> Result<()> {
        let (tx, rx) = mpsc::channel::<(usize, RequestOutcome)>();
        for _ in 0..workers.max(1) {
            let tx = tx.clone();
            let (next, aborted, state_ranks) = (&next, &aborted, &state_ranks);
            s.spawn(move || loop {
                let job = next.fetch_add(1, Ordering::SeqCst);
                if job >= total {
                    break;
                }
                let row = run_one(backend, combos, pool, state_ranks, seed, job, aborted);
                if tx.send((job, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending: HashMap<usize, RequestOutcome> = HashMap::new();
        let mut written = 0usize;
        let (mut combo_ok, mut combo_aborted) = (0usize, false);
        for (job, row) in rx {
            pending.insert(job, row);
            while let Some(row) = pending.remove(&written) {
                write_row(out, &row).map_err(io_err)?;
                *summary.taxonomy.entry(row.failure_class).or_default() += 1;
                combo_ok += usize::from(row.failure_class == FailureClass::Ok);
                combo_aborted |= row.aborted;
                written += 1;
                if written.is_multiple_of(pool.len()) {
                    let index = written / pool.len() - 1;
                    if combo_aborted {
                        summary.aborted_combos.push(index);
                    }
                    progress(&ComboProgress {
                        index,
                        total: combos.len(),
                        combo: &combos[index],
                        ok_rows: combo_ok,
                        rows: pool.len(),
                        aborted: combo_aborted,
                    });
                    combo_ok = 0;
                    combo_aborted = false;
                }
            }
        }
        summary.rows = written;
        Ok(())
    })?;
    out.flush().map_err(io_err)?;
    if summary.rows != total {
        return Err(Error::Gateway(format!("wrote {} of {total} rows", summary.rows)));
    }
    Ok(summary)
}
