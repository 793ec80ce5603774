use std::path::Path;

use forgecut::circuit::{parse_circuit, PartitionedCircuit};
use forgecut::Error;
use serde_json::Value;

pub const INPUT: u8 = 2;
pub const VERIFY: u8 = 3;
pub const TRANSPORT: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: INPUT,
            message: message.into(),
        }
    }

    pub fn verify(message: impl Into<String>) -> Failure {
        Failure {
            code: VERIFY,
            message: message.into(),
        }
    }

    pub fn transport(message: impl Into<String>) -> Failure {
        Failure {
            code: TRANSPORT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Io(_) | Error::Protocol(_) | Error::Aborted(_) => TRANSPORT,
            Error::Consistency(_) | Error::TraceNotUnit(_) | Error::IllConditioned(_) => VERIFY,
            _ => INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub fn read_circuit(path: &Path) -> Result<PartitionedCircuit, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    parse_circuit(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json(path: Option<&Path>, value: &Value) -> Result<(), Failure> {
    if let Some(path) = path {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Fixed-precision formatting that never prints `-0`.
pub fn fmt(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}
