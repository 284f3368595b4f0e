//! Trajectory CSV.

use std::fmt::{self, Write as _};

use crate::sim::TraceRecord;

pub const TRACE_HEADER: &str = "t,p_x,p_z,eps,z,s,u_x,u_z,u_mag,v_x,v_z,saturated";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trace line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for TraceError {}

/// Floats use `Display`, which prints the shortest decimal that parses
/// back to the same value.
pub fn write_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(160 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.p_x,
            r.p_z,
            r.eps,
            r.z,
            r.s,
            r.u_x,
            r.u_z,
            r.u_mag,
            r.v_x,
            r.v_z,
            u8::from(r.saturated)
        );
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRACE_HEADER => {}
        Some(_) => {
            return Err(TraceError {
                line: 1,
                message: format!("header must be `{TRACE_HEADER}`"),
            })
        }
        None => {
            return Err(TraceError {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TraceError {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(err(format!("expected 12 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 11];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| err(format!("`{field}` is not a number")))?;
        }
        let saturated = match fields[11] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(err(format!("`{other}` is not a flag"))),
        };
        out.push(TraceRecord {
            t: v[0],
            p_x: v[1],
            p_z: v[2],
            eps: v[3],
            z: v[4],
            s: v[5],
            u_x: v[6],
            u_z: v[7],
            u_mag: v[8],
            v_x: v[9],
            v_z: v[10],
            saturated,
        });
    }
    if out.is_empty() {
        return Err(TraceError {
            line: 2,
            message: "no rows".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            p_x: 0.1 + t,
            p_z: -0.04,
            eps: -0.04,
            z: 0.1 + t,
            s: 1e-20,
            u_x: 17.592_918_860_102_84,
            u_z: 0.0,
            u_mag: 17.592_918_860_102_84,
            v_x: 1.0 / 3.0,
            v_z: -0.0,
            saturated: t > 0.0,
        }
    }

    #[test]
    fn round_trips_bit_exactly() {
        let trace = vec![row(0.0), row(0.001)];
        let text = write_trace(&trace);
        assert!(text.starts_with("t,p_x,p_z,eps,z,s,u_x,u_z,u_mag,v_x,v_z,saturated\n"));
        let back = parse_trace(&text).unwrap();
        for (a, b) in trace.iter().zip(&back) {
            assert_eq!(a.v_x.to_bits(), b.v_x.to_bits());
            assert_eq!(a.s.to_bits(), b.s.to_bits());
            assert_eq!(a.saturated, b.saturated);
        }
        assert_eq!(write_trace(&back), text);
    }

    #[test]
    fn malformed_rows_rejected() {
        assert_eq!(parse_trace("t,x\n").unwrap_err().line, 1);
        let bad = format!("{TRACE_HEADER}\n0,1,2\n");
        assert_eq!(parse_trace(&bad).unwrap_err().line, 2);
        let bad = format!("{TRACE_HEADER}\n0,0,0,0,0,0,0,0,0,0,0,maybe\n");
        assert!(parse_trace(&bad).is_err());
        assert!(parse_trace(&format!("{TRACE_HEADER}\n")).is_err());
    }
}
