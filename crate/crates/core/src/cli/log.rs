use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

/// JSON-lines event log. Each line is one object with an `event` name, the
/// caller's fields and a `meta` object holding the wall-clock timestamp, so
/// two runs differ only inside `meta`.
pub struct JsonLog {
    sink: Box<dyn Write>,
    stamp: bool,
}

impl JsonLog {
    pub fn new(sink: Box<dyn Write>) -> Self {
        Self { sink, stamp: true }
    }

    /// A log without timestamps; `meta` is still present but empty.
    pub fn unstamped(sink: Box<dyn Write>) -> Self {
        Self { sink, stamp: false }
    }

    pub fn stderr() -> Self {
        Self::new(Box::new(std::io::stderr()))
    }

    pub fn event(&mut self, name: &str, fields: Value) {
        let mut obj = Map::new();
        obj.insert("event".into(), Value::from(name));
        if let Value::Object(m) = fields {
            obj.extend(m);
        }
        let meta = if self.stamp {
            let ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64);
            json!({ "unix_ms": ms })
        } else {
            json!({})
        };
        obj.insert("meta".into(), meta);
        let line = serde_json::to_string(&Value::Object(obj)).expect("log line serializes");
        let _ = writeln!(self.sink, "{line}");
        let _ = self.sink.flush();
    }
}

/// Drops the `meta` field of every line.
pub fn strip_meta(log: &str) -> Vec<Value> {
    log.lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .map(|mut v| {
            if let Value::Object(m) = &mut v {
                m.remove("meta");
            }
            v
        })
        .collect()
}
