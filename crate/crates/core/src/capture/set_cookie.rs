//! Set-Cookie response-header parsing.
//!
//! Only the attributes the census consumes are modeled: Domain, Path,
//! Expires, Max-Age, Secure, HttpOnly. Max-Age takes precedence over
//! Expires and is evaluated relative to the response time. A header whose
//! cookie name would be empty is discarded rather than recorded.

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};

use super::CookieRecord;

/// Parse one Set-Cookie header value observed at `at` on a response from
/// `request_host`. The host supplies the cookie domain when the header
/// carries no Domain attribute (host-only cookie).
pub fn parse_set_cookie(
    header: &str,
    request_host: &str,
    at: DateTime<Utc>,
) -> Option<CookieRecord> {
    let mut parts = header.split(';');
    let pair = parts.next()?.trim();
    let (name, value) = match pair.split_once('=') {
        Some((n, v)) => (n.trim(), v.trim()),
        None => return None,
    };
    if name.is_empty() {
        return None;
    }

    let mut domain = String::new();
    let mut path = "/".to_string();
    let mut expires: Option<DateTime<Utc>> = None;
    let mut max_age: Option<i64> = None;
    let mut secure = false;
    let mut http_only = false;

    for attr in parts {
        let attr = attr.trim();
        let (key, val) = match attr.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (attr, ""),
        };
        match key.to_ascii_lowercase().as_str() {
            "domain" => {
                let d = val.trim_start_matches('.').to_lowercase();
                if !d.is_empty() {
                    domain = d;
                }
            }
            "path" => {
                if val.starts_with('/') {
                    path = val.to_string();
                }
            }
            "expires" => expires = parse_cookie_date(val),
            "max-age" => max_age = val.parse::<i64>().ok(),
            "secure" => secure = true,
            "httponly" => http_only = true,
            _ => {}
        }
    }

    if domain.is_empty() {
        domain = request_host.trim_start_matches('.').to_lowercase();
    }
    if domain.is_empty() {
        return None;
    }
    let expiry = match max_age {
        Some(secs) => Some(at + chrono::Duration::seconds(secs)),
        None => expires,
    };
    Some(CookieRecord {
        name: name.to_string(),
        value: value.trim_matches('"').to_string(),
        domain,
        path,
        expiry,
        secure,
        http_only,
    })
}

/// Cookie Expires dates in the wild span RFC 1123, the dash-separated
/// Netscape form, and two-digit years; try each in turn.
fn parse_cookie_date(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc2822(s) {
        return Some(dt.with_timezone(&Utc));
    }
    const FORMATS: &[&str] = &[
        "%a, %d-%b-%Y %H:%M:%S GMT",
        "%a, %d-%b-%y %H:%M:%S GMT",
        "%a, %d %b %Y %H:%M:%S GMT",
        "%A, %d-%b-%y %H:%M:%S GMT",
    ];
    for fmt in FORMATS {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&naive));
        }
    }
    None
}
