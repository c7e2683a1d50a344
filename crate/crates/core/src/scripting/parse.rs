use super::{Scene, ScriptError, ScriptSource, VideoScript};

/// If `line` opens a scene (`SCENE <n>:` after optional leading
/// whitespace), returns the number and the text after the colon.
pub fn scene_marker(line: &str) -> Option<(usize, &str)> {
    let rest = line.trim_start().strip_prefix("SCENE ")?;
    let digits = rest.len() - rest.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let text = rest[digits..].strip_prefix(':')?;
    let number = rest[..digits].parse().ok()?;
    Some((number, text))
}

/// Extracts the scenes following the last `BEGIN SCRIPT` in `raw`.
///
/// Each scene runs from its `SCENE <n>:` line to the next marker, an
/// `END SCRIPT` line, or the end of input. Lines are trimmed and joined with
/// single spaces.
pub fn parse_script(raw: &str, expected_scenes: usize) -> Result<VideoScript, ScriptError> {
    let start = raw.rfind("BEGIN SCRIPT").ok_or(ScriptError::MissingBeginMarker)?;
    let body = &raw[start + "BEGIN SCRIPT".len()..];
    // The rest of the marker line is not scene text.
    let body = body.split_once('\n').map_or("", |(_, rest)| rest);

    let mut scenes: Vec<(usize, Vec<&str>)> = Vec::new();
    for line in body.lines() {
        if line.trim_start().starts_with("END SCRIPT") {
            break;
        }
        if let Some((number, text)) = scene_marker(line) {
            scenes.push((number, vec![text]));
        } else if let Some((_, parts)) = scenes.last_mut() {
            parts.push(line);
        }
    }

    if scenes.len() != expected_scenes {
        return Err(ScriptError::SceneCountMismatch {
            found: scenes.len(),
            expected: expected_scenes,
        });
    }
    if let Some((position, (found, _))) = scenes
        .iter()
        .enumerate()
        .find(|(i, (n, _))| *n != i + 1)
    {
        return Err(ScriptError::NonContiguousNumbering {
            position: position + 1,
            found: *found,
        });
    }
    let scenes = scenes
        .into_iter()
        .map(|(number, parts)| Scene {
            number,
            description: parts
                .iter()
                .map(|p| p.trim())
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join(" "),
        })
        .collect();
    Ok(VideoScript {
        scenes,
        raw_response: raw.to_string(),
        source: ScriptSource::ClapPipeline,
    })
}
