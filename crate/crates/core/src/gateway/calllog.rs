//! Buffered hand-off of call records to the store.
//!
//! Request handlers enqueue and move on; a dedicated thread drains the queue
//! and writes each batch in one transaction. [`CallLogger::flush`] waits
//! until everything enqueued before it is durable.

use std::sync::Arc;
use std::thread::JoinHandle;

use parking_lot::Mutex;
use tokio::sync::{mpsc, oneshot};

use crate::persistence::{ApiCallRecord, Store};

const MAX_BATCH: usize = 256;

enum Msg {
    Record(ApiCallRecord),
    Flush(oneshot::Sender<()>),
}

#[derive(Clone)]
pub struct CallLogger {
    tx: mpsc::UnboundedSender<Msg>,
    thread: Arc<Mutex<Option<JoinHandle<()>>>>,
}

impl CallLogger {
    pub fn spawn(store: Arc<Store>) -> Self {
        let (tx, rx) = mpsc::unbounded_channel();
        let thread = std::thread::Builder::new()
            .name("call-log-writer".into())
            .spawn(move || writer_loop(store, rx))
            .expect("spawn call log writer");
        Self {
            tx,
            thread: Arc::new(Mutex::new(Some(thread))),
        }
    }

    pub fn log(&self, record: ApiCallRecord) {
        if self.tx.send(Msg::Record(record)).is_err() {
            tracing::error!("call log writer has stopped; record dropped");
        }
    }

    pub async fn flush(&self) {
        let (done, wait) = oneshot::channel();
        if self.tx.send(Msg::Flush(done)).is_ok() {
            let _ = wait.await;
        }
    }

    /// Blocking variant of [`CallLogger::flush`] for non-async callers.
    pub fn flush_blocking(&self) {
        let (done, wait) = oneshot::channel();
        if self.tx.send(Msg::Flush(done)).is_ok() {
            let _ = wait.blocking_recv();
        }
    }
}

fn writer_loop(store: Arc<Store>, mut rx: mpsc::UnboundedReceiver<Msg>) {
    let mut batch = Vec::with_capacity(MAX_BATCH);
    let mut waiters = Vec::new();
    while let Some(first) = rx.blocking_recv() {
        let mut next = Some(first);
        while let Some(msg) = next.take() {
            match msg {
                Msg::Record(r) => batch.push(r),
                Msg::Flush(done) => waiters.push(done),
            }
            if batch.len() >= MAX_BATCH {
                break;
            }
            next = rx.try_recv().ok();
        }
        write_batch(&store, &mut batch);
        for done in waiters.drain(..) {
            let _ = done.send(());
        }
    }
    write_batch(&store, &mut batch);
}

fn write_batch(store: &Store, batch: &mut Vec<ApiCallRecord>) {
    if batch.is_empty() {
        return;
    }
    if let Err(e) = store.record_api_calls(batch) {
        // One bad row must not cost the rest of the batch.
        tracing::warn!(error = %e, "batched call log write failed; retrying row by row");
        for record in batch.iter() {
            if let Err(e) = store.record_api_call(record) {
                tracing::error!(error = %e, api = %record.api_name, "call record lost");
            }
        }
    }
    batch.clear();
}

impl Drop for CallLogger {
    fn drop(&mut self) {
        // Last handle: close the channel and wait for the writer to drain.
        if Arc::strong_count(&self.thread) == 1 {
            let (tx, _) = mpsc::unbounded_channel();
            drop(std::mem::replace(&mut self.tx, tx));
            if let Some(handle) = self.thread.lock().take() {
                let _ = handle.join();
            }
        }
    }
}
