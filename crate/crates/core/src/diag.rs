//! Non-fatal warnings. Each warning is logged and also collected so the CLI
//! can record them in the run manifest.

use std::sync::Mutex;

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

pub fn warn(msg: impl Into<String>) {
    let msg = msg.into();
    log::warn!("{msg}");
    if let Ok(mut w) = WARNINGS.lock() {
        w.push(msg);
    }
}

/// Drain collected warnings, sorted and deduplicated.
pub fn take_warnings() -> Vec<String> {
    let mut w = WARNINGS.lock().map(|mut w| std::mem::take(&mut *w)).unwrap_or_default();
    w.sort();
    w.dedup();
    w
}
