use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("no extractable code in model response")]
pub struct ExtractionError;

const C_LIKE_PREFIXES: [&str; 5] = ["/*@", "#include", "int", "void", "/*"];

/// Pulls the candidate program out of a model response.
///
/// 1. the longest fenced block containing both `/*@` and `{`;
/// 2. otherwise the longest fenced block;
/// 3. otherwise the whole trimmed response if it starts like C;
/// 4. otherwise an error.
///
/// Blank fenced blocks are ignored. Ties go to the earliest block.
pub fn extract_code(response: &str) -> Result<String, ExtractionError> {
    let blocks: Vec<String> = fenced_blocks(response)
        .into_iter()
        .filter(|b| !b.trim().is_empty())
        .collect();

    let longest = |pred: &dyn Fn(&str) -> bool| {
        blocks
            .iter()
            .filter(|b| pred(b))
            .fold(None::<&String>, |best, b| match best {
                Some(cur) if cur.len() >= b.len() => Some(cur),
                _ => Some(b),
            })
            .cloned()
    };

    if let Some(b) = longest(&|b| b.contains("/*@") && b.contains('{')) {
        return Ok(b);
    }
    if let Some(b) = longest(&|_| true) {
        return Ok(b);
    }
    let trimmed = response.trim();
    if C_LIKE_PREFIXES.iter().any(|p| trimmed.starts_with(p)) {
        return Ok(trimmed.to_string());
    }
    Err(ExtractionError)
}

/// Interiors of ``` fences. An unterminated fence runs to end of input.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.split('\n') {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(lines), true) => {
                blocks.push(lines.join("\n"));
                current = None;
            }
            (Some(lines), false) => lines.push(line),
            (None, false) => {}
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}
