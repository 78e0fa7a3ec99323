//! Prompt construction and reply parsing for chat-style rating endpoints.

use serde_json::{json, Value};

use super::{ensure_permutation, OracleError, SortRequest, WindowRequest};

/// The window-rating prompt. `{n}`, `{info}` and `{story_last}` are the
/// frame count, video background and previous running summary.
pub const RATING_TEMPLATE: &str = r#"I have uploaded {n} frames, each representing a video chunk of 1 second.
You first extract the frame number attached below the image content.
These frames exhibit a continuous {n} seconds video clip.
The original video background for title and category are {info}.
Before this video clip, the periodical video summary is: {story_last}.

Your task is as follows:

1. Based on the frames, periodical summary and background, summarize what story this video has conveyed so far and output your answer as "story_total". (No more than 100 words)

2. Based on the summary and frames, on a scale of integer (0,100), rate all the {n} frames such that higher score exhibits higher interestingness score. Different frames can yield the same scores.

Your answer must be a json format like this:

```json
[
    {"story_partial": "xxx"},
    {"story_total": "xxx"},
    [
        {"frame": xxx, "rating": xxx},
        {"frame": xxx, "rating": xxx},
        {"frame": xxx, "rating": xxx}
    ]
]
```"#;

pub const SORTING_TEMPLATE: &str = r#"I have uploaded {n} frames from the same video, each representing a video chunk of 1 second.
You first extract the frame number attached below the image content.
The overall video summary is: {summary}.

Based on the summary and frames, sort all the {n} frames from the most interesting to the least interesting. Every frame must appear exactly once.

Your answer must be a json format like this:

```json
{"ranking": [xxx, xxx, xxx]}
```"#;

pub fn rating_prompt(req: &WindowRequest) -> String {
    RATING_TEMPLATE
        .replace("{n}", &req.frame_indices.len().to_string())
        .replace("{info}", &req.video_info)
        .replace("{story_last}", &req.prev_summary)
}

pub fn sorting_prompt(req: &SortRequest) -> String {
    SORTING_TEMPLATE
        .replace("{n}", &req.candidate_indices.len().to_string())
        .replace("{summary}", &req.global_summary)
}

fn frame_list(frames: &[usize]) -> String {
    let labels: Vec<String> = frames.iter().map(|f| f.to_string()).collect();
    format!("Frame numbers, in upload order: {}", labels.join(", "))
}

/// Chat-completions request body: the prompt, then the frame labels.
pub fn chat_body(model: &str, prompt: &str, frames: &[usize]) -> Value {
    json!({
        "model": model,
        "temperature": 0,
        "messages": [
            {"role": "user", "content": prompt},
            {"role": "user", "content": frame_list(frames)},
        ],
    })
}

/// Extracts `choices[0].message.content` from a chat-completions reply.
pub fn chat_content(reply: &Value) -> Result<&str, OracleError> {
    reply
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| OracleError::MalformedReply("no choices[0].message.content".into()))
}

/// Parses the JSON payload out of model text that may be wrapped in a code
/// fence or surrounded by prose.
fn extract_json(text: &str) -> Result<Value, OracleError> {
    let start = text
        .find(['[', '{'])
        .ok_or_else(|| OracleError::MalformedReply("reply contains no JSON".into()))?;
    let end = text
        .rfind([']', '}'])
        .filter(|&e| e >= start)
        .ok_or_else(|| OracleError::MalformedReply("unterminated JSON".into()))?;
    serde_json::from_str(&text[start..=end])
        .map_err(|e| OracleError::MalformedReply(format!("invalid JSON: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRating {
    pub story_partial: String,
    pub story_total: String,
    /// Ratings aligned with the request's frame order.
    pub ratings: Vec<u8>,
}

fn as_integer(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn collect_rating_parts(
    v: &Value,
    partial: &mut Option<String>,
    total: &mut Option<String>,
    pairs: &mut Vec<(Value, Value)>,
) {
    match v {
        Value::Array(items) => items
            .iter()
            .for_each(|i| collect_rating_parts(i, partial, total, pairs)),
        Value::Object(map) => {
            if let Some(s) = map.get("story_partial").and_then(Value::as_str) {
                partial.get_or_insert_with(|| s.to_string());
            }
            if let Some(s) = map.get("story_total").and_then(Value::as_str) {
                total.get_or_insert_with(|| s.to_string());
            }
            if let (Some(f), Some(r)) = (map.get("frame"), map.get("rating")) {
                pairs.push((f.clone(), r.clone()));
            }
            map.iter()
                .filter(|(_, val)| val.is_array() || val.is_object())
                .for_each(|(_, val)| collect_rating_parts(val, partial, total, pairs));
        }
        _ => {}
    }
}

/// Parses a rating reply and checks it against the request: every frame
/// rated exactly once, every rating an integer in `[0, 100]`.
pub fn parse_rating_reply(text: &str, req: &WindowRequest) -> Result<ParsedRating, OracleError> {
    let value = extract_json(text)?;
    let (mut partial, mut total, mut pairs) = (None, None, Vec::new());
    collect_rating_parts(&value, &mut partial, &mut total, &mut pairs);

    let total = total.ok_or_else(|| OracleError::MalformedReply("missing story_total".into()))?;
    let mut ratings: Vec<Option<u8>> = vec![None; req.frame_indices.len()];
    for (f, r) in pairs {
        let frame = as_integer(&f)
            .ok_or_else(|| OracleError::MalformedReply(format!("bad frame label {f}")))?;
        let slot = req
            .frame_indices
            .iter()
            .position(|&i| i as i64 == frame)
            .ok_or_else(|| OracleError::MalformedReply(format!("unrequested frame {frame}")))?;
        let rating = as_integer(&r)
            .filter(|x| (0..=100).contains(x))
            .ok_or_else(|| {
                OracleError::MalformedReply(format!("rating {r} for frame {frame} not in [0, 100]"))
            })?;
        if ratings[slot].replace(rating as u8).is_some() {
            return Err(OracleError::MalformedReply(format!(
                "frame {frame} rated twice"
            )));
        }
    }
    let ratings = ratings
        .into_iter()
        .zip(&req.frame_indices)
        .map(|(r, f)| r.ok_or_else(|| OracleError::MalformedReply(format!("frame {f} missing"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ParsedRating {
        story_partial: partial.unwrap_or_default(),
        story_total: total,
        ratings,
    })
}

/// Parses a sorting reply: either `{"ranking": [...]}` or a bare array.
pub fn parse_sort_reply(text: &str, req: &SortRequest) -> Result<Vec<usize>, OracleError> {
    let value = extract_json(text)?;
    let list = match &value {
        Value::Object(map) => map.get("ranking"),
        Value::Array(_) => Some(&value),
        _ => None,
    }
    .and_then(Value::as_array)
    .ok_or_else(|| OracleError::MalformedReply("no ranking array".into()))?;
    let order = list
        .iter()
        .map(|v| {
            as_integer(v)
                .filter(|&i| i >= 0)
                .map(|i| i as usize)
                .ok_or_else(|| OracleError::MalformedReply(format!("bad frame label {v}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ensure_permutation(req, &order)?;
    Ok(order)
}
