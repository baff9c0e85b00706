//! Output formatting: versioned CSV with comment lines for metadata.
//!
//! Data rows never contain run-dependent content; timestamps live in a
//! `#` comment line, so replaying a seeded run reproduces the data rows
//! byte for byte.

use rmab_core::ActionSet;

/// 17 significant digits: round-trips every f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt_bool(value: Option<bool>) -> String {
    match value {
        Some(true) => "true".to_string(),
        Some(false) => "false".to_string(),
        None => "indeterminate".to_string(),
    }
}

/// Channels joined by `+`: `{0, 2}` prints as `0+2`.
pub fn fmt_action(action: &ActionSet) -> String {
    action
        .channels()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("+")
}

/// Action sets joined by `;`.
pub fn fmt_action_list(actions: &[ActionSet]) -> String {
    actions
        .iter()
        .map(fmt_action)
        .collect::<Vec<_>>()
        .join(";")
}

/// Quote a CSV field when it holds a separator, quote or newline.
pub fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn timestamp_comment() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_at_unix={now}")
}
