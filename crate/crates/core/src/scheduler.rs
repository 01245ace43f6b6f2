//! Document-granular work stealing for the z-phase.
//!
//! Tasks are dealt to per-worker deques in contiguous blocks balanced by
//! cost. A worker pops from the front of its own deque; once empty it steals
//! one task from the back of the longest remaining deque. Each task is
//! executed exactly once and the call returns only after every task has
//! finished.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::par::Pool;

/// One unit of work. `cost` (token count for documents) only drives the
/// initial deal.
#[derive(Debug)]
pub struct Task<T> {
    pub id: usize,
    pub cost: usize,
    pub payload: T,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleStats {
    pub tasks_per_worker: Vec<usize>,
    pub steals: usize,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct WorkScheduler {
    workers: usize,
    pool: Pool,
}

impl WorkScheduler {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config {
                field: "workers",
                msg: "must be at least 1".into(),
            });
        }
        Ok(WorkScheduler {
            workers,
            pool: Pool::new(workers),
        })
    }

    pub fn sequential() -> Self {
        WorkScheduler::new(1).expect("one worker is valid")
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` on this scheduler's data-parallel pool (Φ-phase and alias
    /// rebuilds).
    pub fn install<R: Send, F: FnOnce() -> R + Send>(&self, f: F) -> R {
        self.pool.install(f)
    }

    /// Splits `costs` into `workers` contiguous blocks of roughly equal total
    /// cost; returns the block index of every item.
    pub fn deal(costs: &[usize], workers: usize) -> Vec<usize> {
        let total: usize = costs.iter().sum();
        let mut out = Vec::with_capacity(costs.len());
        let mut acc = 0usize;
        for &c in costs {
            // the block whose share contains the midpoint of this item
            let mid = acc as u128 * 2 + c as u128;
            let block = if total == 0 {
                0
            } else {
                ((mid * workers as u128) / (2 * total as u128)) as usize
            };
            out.push(block.min(workers - 1));
            acc += c;
        }
        out
    }

    /// Executes `body` once per task. `init(worker)` builds worker-local
    /// state which is returned, in worker order, for merging.
    pub fn run<T, W, I, B>(&self, tasks: Vec<Task<T>>, init: I, body: B) -> Result<(Vec<W>, ScheduleStats)>
    where
        T: Send,
        W: Send,
        I: Fn(usize) -> W + Sync,
        B: Fn(&mut W, T) -> Result<()> + Sync,
    {
        let start = Instant::now();
        let costs: Vec<usize> = tasks.iter().map(|t| t.cost).collect();
        let blocks = Self::deal(&costs, self.workers);
        let mut deques: Vec<VecDeque<Task<T>>> = (0..self.workers).map(|_| VecDeque::new()).collect();
        for (task, b) in tasks.into_iter().zip(blocks) {
            deques[b].push_back(task);
        }

        if self.workers == 1 || cfg!(not(feature = "parallel")) {
            return self.run_inline(deques, init, body, start);
        }

        let deques: Vec<Mutex<VecDeque<Task<T>>>> = deques.into_iter().map(Mutex::new).collect();
        let abort = AtomicBool::new(false);
        let steals = AtomicUsize::new(0);
        let failure: Mutex<Option<Error>> = Mutex::new(None);

        let results: Vec<(W, usize)> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..self.workers)
                .map(|me| {
                    let (deques, abort, steals, failure, init, body) =
                        (&deques, &abort, &steals, &failure, &init, &body);
                    scope.spawn(move || {
                        let mut local = init(me);
                        let mut done = 0usize;
                        while !abort.load(Ordering::Relaxed) {
                            // the own-deque guard must be released before stealing
                            let own = lock(&deques[me]).pop_front();
                            let task = match own {
                                Some(t) => t,
                                None => match steal(deques) {
                                    Some(t) => {
                                        steals.fetch_add(1, Ordering::Relaxed);
                                        t
                                    }
                                    None => break,
                                },
                            };
                            let id = task.id;
                            if let Err(e) = execute(&body, &mut local, task) {
                                abort.store(true, Ordering::Relaxed);
                                let mut f = lock(failure);
                                if f.is_none() {
                                    *f = Some(task_error(id, e));
                                }
                                break;
                            }
                            done += 1;
                        }
                        (local, done)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker loop does not panic outside tasks"))
                .collect()
        });

        if let Some(err) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
            return Err(err);
        }
        let (locals, tasks_per_worker): (Vec<W>, Vec<usize>) = results.into_iter().unzip();
        Ok((
            locals,
            ScheduleStats {
                tasks_per_worker,
                steals: steals.into_inner(),
                elapsed: start.elapsed(),
            },
        ))
    }

    fn run_inline<T, W, I, B>(
        &self,
        deques: Vec<VecDeque<Task<T>>>,
        init: I,
        body: B,
        start: Instant,
    ) -> Result<(Vec<W>, ScheduleStats)>
    where
        I: Fn(usize) -> W,
        B: Fn(&mut W, T) -> Result<()>,
    {
        let mut locals = Vec::with_capacity(deques.len());
        let mut tasks_per_worker = Vec::with_capacity(deques.len());
        for (me, deque) in deques.into_iter().enumerate() {
            let mut local = init(me);
            let n = deque.len();
            for task in deque {
                let id = task.id;
                execute(&body, &mut local, task).map_err(|e| task_error(id, e))?;
            }
            locals.push(local);
            tasks_per_worker.push(n);
        }
        Ok((
            locals,
            ScheduleStats {
                tasks_per_worker,
                steals: 0,
                elapsed: start.elapsed(),
            },
        ))
    }
}

/// Convenience wrapper: one task per item with ids `0..n`.
pub fn schedule_sweep<T, W, I, B>(
    sched: &WorkScheduler,
    items: Vec<(usize, T)>,
    init: I,
    body: B,
) -> Result<(Vec<W>, ScheduleStats)>
where
    T: Send,
    W: Send,
    I: Fn(usize) -> W + Sync,
    B: Fn(&mut W, T) -> Result<()> + Sync,
{
    let tasks = items
        .into_iter()
        .enumerate()
        .map(|(id, (cost, payload))| Task { id, cost, payload })
        .collect();
    sched.run(tasks, init, body)
}

enum Failure {
    Err(Error),
    Panic(String),
}

fn execute<T, W, B>(body: &B, local: &mut W, task: Task<T>) -> std::result::Result<(), Failure>
where
    B: Fn(&mut W, T) -> Result<()>,
{
    match catch_unwind(AssertUnwindSafe(|| body(local, task.payload))) {
        Ok(Ok(())) => Ok(()),
        Ok(Err(e)) => Err(Failure::Err(e)),
        Err(p) => Err(Failure::Panic(panic_message(p))),
    }
}

fn task_error(id: usize, f: Failure) -> Error {
    match f {
        Failure::Err(Error::TaskFailed { doc, msg }) => Error::TaskFailed { doc, msg },
        Failure::Err(e) => Error::TaskFailed {
            doc: id,
            msg: e.to_string(),
        },
        Failure::Panic(msg) => Error::TaskFailed { doc: id, msg },
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "task panicked".into()
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn steal<T>(deques: &[Mutex<VecDeque<Task<T>>>]) -> Option<Task<T>> {
    loop {
        let (victim, len) = deques
            .iter()
            .enumerate()
            .map(|(i, d)| (i, lock(d).len()))
            .max_by_key(|&(i, len)| (len, std::cmp::Reverse(i)))?;
        if len == 0 {
            return None;
        }
        if let Some(t) = lock(&deques[victim]).pop_back() {
            return Some(t);
        }
        // lost the race for the last task; look again
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    #[test]
    fn deal_is_contiguous_and_balanced() {
        let blocks = WorkScheduler::deal(&[1; 8], 4);
        assert_eq!(blocks, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        let blocks = WorkScheduler::deal(&[10, 1, 1, 1, 1], 2);
        assert_eq!(blocks, vec![0, 1, 1, 1, 1]);
        assert!(WorkScheduler::deal(&[3, 5, 1], 1).iter().all(|&b| b == 0));
    }

    #[test]
    fn single_worker_runs_in_deque_order() {
        let sched = WorkScheduler::sequential();
        let items: Vec<(usize, usize)> = (0..10).map(|i| (1, i)).collect();
        let (locals, stats) =
            schedule_sweep(&sched, items, |_| Vec::new(), |v: &mut Vec<usize>, i| {
                v.push(i);
                Ok(())
            })
            .unwrap();
        assert_eq!(locals, vec![(0..10).collect::<Vec<_>>()]);
        assert_eq!(stats.steals, 0);
    }

    #[test]
    fn every_task_runs_exactly_once() {
        let sched = WorkScheduler::new(8).unwrap();
        let hits: Vec<AtomicU32> = (0..500).map(|_| AtomicU32::new(0)).collect();
        let items: Vec<(usize, usize)> = (0..500).map(|i| ((i * 7) % 13 + 1, i)).collect();
        let (_, stats) = schedule_sweep(&sched, items, |_| (), |_, i| {
            hits[i].fetch_add(1, Ordering::Relaxed);
            Ok(())
        })
        .unwrap();
        assert!(hits.iter().all(|h| h.load(Ordering::Relaxed) == 1));
        assert_eq!(stats.tasks_per_worker.iter().sum::<usize>(), 500);
    }

    #[test]
    fn one_task_many_workers() {
        let sched = WorkScheduler::new(8).unwrap();
        let count = AtomicU32::new(0);
        schedule_sweep(&sched, vec![(5, ())], |_| (), |_, ()| {
            count.fetch_add(1, Ordering::Relaxed);
            Ok(())
        })
        .unwrap();
        assert_eq!(count.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn failing_task_reports_its_id() {
        for workers in [1, 4] {
            let sched = WorkScheduler::new(workers).unwrap();
            let items: Vec<(usize, usize)> = (0..20).map(|i| (1, i)).collect();
            let err = schedule_sweep(&sched, items, |_| (), |_, i| {
                if i == 13 {
                    Err(Error::domain("boom"))
                } else {
                    Ok(())
                }
            })
            .unwrap_err();
            assert!(matches!(err, Error::TaskFailed { doc: 13, .. }), "{err}");
        }
    }

    #[test]
    fn panicking_task_reports_its_id() {
        let sched = WorkScheduler::new(3).unwrap();
        let items: Vec<(usize, usize)> = (0..9).map(|i| (1, i)).collect();
        let err = schedule_sweep(&sched, items, |_| (), |_, i| {
            if i == 4 {
                panic!("bad document");
            }
            Ok(())
        })
        .unwrap_err();
        match err {
            Error::TaskFailed { doc, msg } => {
                assert_eq!(doc, 4);
                assert!(msg.contains("bad document"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(WorkScheduler::new(0).is_err());
    }
}
