use crate::delivery::ChatEnvelope;
use crate::interpreter::VitalEstimate;
use crate::store::Storage;

/// Default silence before a no-data reminder: six hours.
pub const NO_DATA_INTERVAL_S: i64 = 6 * 3600;

/// The estimate with the greatest burst timestamp. When several share it,
/// the one stored last wins.
pub fn latest_vitals(store: &dyn Storage, user: &str) -> Option<VitalEstimate> {
    store.recent_vitals(user, 1).pop()
}

/// A reminder when the newest estimate is strictly older than `interval_s`
/// (or there is none). An estimate exactly `interval_s` old still counts.
pub fn fire_no_data_check(store: &dyn Storage, user: &str, now: i64, interval_s: i64) -> Option<ChatEnvelope> {
    let stale = match latest_vitals(store, user) {
        None => true,
        Some(v) => now - v.burst_ts > interval_s,
    };
    stale.then(|| {
        let hours = interval_s as f64 / 3600.0;
        ChatEnvelope::outbound_text(
            user,
            now,
            &format!(
                "I haven't received any readings from your band in the last {hours:.0} hours. \
                 Is it charged and on your wrist? Uploads resume automatically once it reconnects."
            ),
        )
    })
}
