use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Blocking JSON POST. Any non-200 status or undecodable body is an error.
pub(crate) fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    url: &str,
    body: &Req,
    timeout: Duration,
    bearer: Option<&str>,
) -> Result<Resp, String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.post(url).header("Content-Type", "application/json");
    if let Some(token) = bearer {
        request = request.header("Authorization", format!("Bearer {token}"));
    }
    let mut response = request.send_json(body).map_err(|e| e.to_string())?;
    let status = response.status().as_u16();
    if status != 200 {
        return Err(format!("HTTP {status} from {url}"));
    }
    response
        .body_mut()
        .read_json::<Resp>()
        .map_err(|e| format!("bad response body from {url}: {e}"))
}
