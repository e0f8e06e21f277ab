//! Running viewing sessions: one world, one command queue and one tick loop each.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::time::Duration;

use serde::Serialize;
use tokio::sync::watch;
use vignette_core::runtime::{CommandKind, Record, Status, World, WorldState};

use crate::store::{SessionMeta, Store};

struct Inner {
    world: World,
    queue: Vec<CommandKind>,
    /// Records already appended to the session log on disk.
    flushed: usize,
}

pub struct LiveSession {
    pub meta: SessionMeta,
    inner: Mutex<Inner>,
    tick_tx: watch::Sender<u64>,
    closed: AtomicBool,
    store: Store,
}

/// Records for ticks `since..tick` and the world at `tick`.
#[derive(Debug, Clone, Serialize)]
pub struct Delta {
    pub session_id: String,
    pub tick: u64,
    pub status: Status,
    pub closed: bool,
    pub state: WorldState,
    pub records: Vec<Record>,
    /// Pass as `since_tick` on the next poll.
    pub next_since: u64,
}

impl LiveSession {
    pub fn new(meta: SessionMeta, world: World, store: Store) -> Arc<Self> {
        let (tick_tx, _) = watch::channel(world.tick());
        let flushed = world.log().len();
        if let Err(e) = store.append_records(&meta.id, world.log().records()) {
            tracing::error!(session = %meta.id, "writing session log: {e}");
        }
        Arc::new(Self { meta, inner: Mutex::new(Inner { world, queue: Vec::new(), flushed }), tick_tx, closed: AtomicBool::new(false), store })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Closed by the client, or the vignette has ended.
    pub fn finished(&self) -> bool {
        self.closed.load(Ordering::SeqCst) || self.lock().world.status() == Status::Ended
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.tick_tx.send_modify(|_| {});
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    /// Queues a command for the next tick. Returns the tick it will be applied at.
    pub fn enqueue(&self, command: CommandKind) -> Option<u64> {
        let mut inner = self.lock();
        if self.is_closed() || inner.world.status() == Status::Ended {
            return None;
        }
        inner.queue.push(command);
        Some(inner.world.tick())
    }

    /// Runs one tick with the queued commands and appends the new records to the store.
    pub fn step(&self) -> (u64, Status) {
        let mut inner = self.lock();
        if self.is_closed() || inner.world.status() == Status::Ended {
            return (inner.world.tick(), inner.world.status());
        }
        let commands = std::mem::take(&mut inner.queue);
        inner.world.step(&commands);
        let fresh = &inner.world.log().records()[inner.flushed..];
        if let Err(e) = self.store.append_records(&self.meta.id, fresh) {
            tracing::error!(session = %self.meta.id, "writing session log: {e}");
        }
        inner.flushed = inner.world.log().len();
        let (tick, status) = (inner.world.tick(), inner.world.status());
        drop(inner);
        self.tick_tx.send_replace(tick);
        (tick, status)
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.tick_tx.subscribe()
    }

    pub fn delta(&self, since: u64) -> Delta {
        let inner = self.lock();
        let tick = inner.world.tick();
        let records = inner.world.log().since_tick(since).iter().take_while(|r| r.tick < tick).cloned().collect();
        Delta {
            session_id: self.meta.id.clone(),
            tick,
            status: inner.world.status(),
            closed: self.is_closed(),
            state: inner.world.snapshot(),
            records,
            next_since: tick.max(since),
        }
    }

    /// The runtime's full log.
    pub fn log(&self) -> Vec<Record> {
        self.lock().world.log().records().to_vec()
    }

    /// Waits until the tick passes `since`, the session finishes, or `timeout` elapses.
    pub async fn wait_past(&self, since: u64, timeout: Duration) {
        let mut rx = self.subscribe();
        if *rx.borrow() > since || self.finished() {
            return;
        }
        let _ = tokio::time::timeout(timeout, async {
            loop {
                if rx.changed().await.is_err() || *rx.borrow() > since || self.finished() {
                    break;
                }
            }
        })
        .await;
    }
}

/// Steps the session every `interval` on its own thread until it finishes or is dropped.
pub fn spawn_clock(session: &Arc<LiveSession>, interval: Duration) {
    let weak: Weak<LiveSession> = Arc::downgrade(session);
    let name = format!("tick-{}", session.meta.id);
    let spawned = std::thread::Builder::new().name(name).spawn(move || loop {
        std::thread::sleep(interval);
        let Some(s) = weak.upgrade() else { break };
        if s.is_closed() {
            break;
        }
        let (_, status) = s.step();
        if status == Status::Ended {
            break;
        }
    });
    if let Err(e) = spawned {
        tracing::error!("starting tick loop: {e}");
    }
}
