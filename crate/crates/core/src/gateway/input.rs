//! Turning `imgraw` / `imgurl` parameters into image bytes.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use url::Url;

use super::api::GatewayError;

/// Decodes a standard base-64 `imgraw` field, rejecting empty or oversized payloads.
pub fn decode_imgraw(field: &str, max_bytes: usize) -> Result<Vec<u8>, GatewayError> {
    if field.is_empty() {
        return Err(GatewayError::BadRequest("imgraw is empty".into()));
    }
    // Every 4 encoded characters carry at most 3 bytes.
    if field.len() / 4 * 3 > max_bytes + 3 {
        return Err(GatewayError::BadRequest(format!(
            "imgraw exceeds {max_bytes} bytes"
        )));
    }
    let bytes = STANDARD
        .decode(field)
        .map_err(|e| GatewayError::BadRequest(format!("imgraw is not valid base-64: {e}")))?;
    if bytes.is_empty() {
        return Err(GatewayError::BadRequest("imgraw decodes to no bytes".into()));
    }
    if bytes.len() > max_bytes {
        return Err(GatewayError::BadRequest(format!(
            "imgraw is {} bytes, limit is {max_bytes}",
            bytes.len()
        )));
    }
    Ok(bytes)
}

pub fn encode_imgraw(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

/// Parses an absolute http(s) URL.
pub fn parse_image_url(raw: &str) -> Result<Url, GatewayError> {
    let url = Url::parse(raw).map_err(|e| GatewayError::BadRequest(format!("invalid imgurl: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
        return Err(GatewayError::BadRequest(format!(
            "imgurl must be an absolute http or https URL, got {raw:?}"
        )));
    }
    Ok(url)
}

/// GETs `raw` and returns the body of a 200 response.
///
/// Fails with `UpstreamFetchFailed` on any non-200 status, transport error,
/// timeout or a body larger than `max_bytes`.
pub async fn fetch_image_url(
    client: &reqwest::Client,
    raw: &str,
    timeout: Duration,
    max_bytes: usize,
) -> Result<Vec<u8>, GatewayError> {
    let url = parse_image_url(raw)?;
    let fetch = async {
        let mut resp = client
            .get(url)
            .send()
            .await
            .map_err(|e| GatewayError::UpstreamFetchFailed(e.to_string()))?;
        if resp.status() != reqwest::StatusCode::OK {
            return Err(GatewayError::UpstreamFetchFailed(format!(
                "upstream answered {}",
                resp.status()
            )));
        }
        if resp.content_length().is_some_and(|len| len > max_bytes as u64) {
            return Err(GatewayError::UpstreamFetchFailed(format!(
                "upstream body exceeds {max_bytes} bytes"
            )));
        }
        let mut body = Vec::new();
        while let Some(chunk) = resp
            .chunk()
            .await
            .map_err(|e| GatewayError::UpstreamFetchFailed(e.to_string()))?
        {
            if body.len() + chunk.len() > max_bytes {
                return Err(GatewayError::UpstreamFetchFailed(format!(
                    "upstream body exceeds {max_bytes} bytes"
                )));
            }
            body.extend_from_slice(&chunk);
        }
        if body.is_empty() {
            return Err(GatewayError::UpstreamFetchFailed("upstream body is empty".into()));
        }
        Ok(body)
    };
    tokio::time::timeout(timeout, fetch)
        .await
        .unwrap_or_else(|_| Err(GatewayError::UpstreamFetchFailed(format!("timed out after {timeout:?}"))))
}
