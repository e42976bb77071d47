//! Remote sampler client.
//!
//! Wire protocol: one HTTP POST per solve. The request body is the text
//! serialization of the instance (header line `NK nnz`, then one
//! `row col value` line per upper-triangular non-zero); `num_reads` rides
//! as a query parameter. The response is one `energy multiplicity bitstring`
//! line per sample, bitstring given as `0`/`1` characters with variable 0
//! first. Reported energies are advisory: every sample is re-scored
//! locally and the local value wins.

use std::time::{Duration, Instant};

use crate::qubo::QuboInstance;
use crate::solver::{result_from_samples, Backend, Sample, SolveError, SolveResult};

/// Text form of an instance: `NK nnz` header, then `row col value` lines
/// in deterministic (row, col) order.
pub fn serialize_qubo(instance: &QuboInstance) -> String {
    let mut out = format!("{} {}\n", instance.size(), instance.nnz());
    for ((row, col), value) in instance.entries() {
        out.push_str(&format!("{row} {col} {value}\n"));
    }
    out
}

/// Parses `energy multiplicity bitstring` sample lines. Energies are
/// parsed but discarded by the caller in favor of local evaluation.
pub fn parse_sample_lines(text: &str, size: usize) -> Result<Vec<(f64, usize, Vec<bool>)>, SolveError> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |msg: String| SolveError::RemoteMalformed { line: lineno, msg };
        let mut fields = line.split_whitespace();
        let energy: f64 = fields
            .next()
            .ok_or_else(|| malformed("missing energy".into()))?
            .parse()
            .map_err(|e| malformed(format!("bad energy: {e}")))?;
        let multiplicity: usize = fields
            .next()
            .ok_or_else(|| malformed("missing multiplicity".into()))?
            .parse()
            .map_err(|e| malformed(format!("bad multiplicity: {e}")))?;
        let bitstring = fields.next().ok_or_else(|| malformed("missing bitstring".into()))?;
        if fields.next().is_some() {
            return Err(malformed("trailing fields".into()));
        }
        if bitstring.len() != size {
            return Err(malformed(format!(
                "bitstring length {} does not match instance size {size}",
                bitstring.len()
            )));
        }
        let bits: Vec<bool> = bitstring
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(malformed(format!("bad bit {other:?}"))),
            })
            .collect::<Result<_, _>>()?;
        samples.push((energy, multiplicity, bits));
    }
    if samples.is_empty() {
        return Err(SolveError::RemoteEmpty);
    }
    Ok(samples)
}

/// Submits the instance to `endpoint` and returns locally re-scored
/// samples. Transport failures, HTTP error statuses and malformed bodies
/// surface as explicit errors; there is no silent fallback to another
/// backend.
pub fn solve_remote(
    instance: &QuboInstance,
    num_reads: usize,
    endpoint: &str,
    timeout: Duration,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let body = serialize_qubo(instance);

    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .new_agent();
    let mut response = agent
        .post(endpoint)
        .query("num_reads", num_reads.to_string())
        .content_type("text/plain")
        .send(body.as_bytes())
        .map_err(|e| SolveError::RemoteTransport(e.to_string()))?;
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| SolveError::RemoteTransport(e.to_string()))?;

    let parsed = parse_sample_lines(&text, instance.size())?;
    let samples = parsed
        .into_iter()
        .map(|(reported, multiplicity, bits)| {
            let energy = instance.objective(&bits)?;
            if (energy - reported).abs() > 1e-9 {
                log::warn!(
                    "remote sample energy {reported} disagrees with local evaluation {energy}; keeping local"
                );
            }
            Ok(Sample { bits, energy, multiplicity })
        })
        .collect::<Result<Vec<_>, SolveError>>()?;

    Ok(result_from_samples(samples, Backend::Remote, started))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> QuboInstance {
        QuboInstance::from_entries(
            3,
            1,
            [((0, 0), -1.0), ((1, 1), 2.0), ((0, 2), -3.0), ((2, 2), 0.5)],
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn serialization_format() {
        let text = serialize_qubo(&instance());
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("3 4"));
        assert_eq!(lines.next(), Some("0 0 -1"));
        assert_eq!(lines.next(), Some("0 2 -3"));
        assert_eq!(lines.next(), Some("1 1 2"));
        assert_eq!(lines.next(), Some("2 2 0.5"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn parses_samples() {
        let parsed = parse_sample_lines("-3.5 2 101\n0 1 000\n", 3).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].1, 2);
        assert_eq!(parsed[0].2, vec![true, false, true]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            parse_sample_lines("nope 1 101\n", 3),
            Err(SolveError::RemoteMalformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_sample_lines("-1 1 10\n", 3),
            Err(SolveError::RemoteMalformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_sample_lines("-1 1 102\n", 3),
            Err(SolveError::RemoteMalformed { line: 1, .. })
        ));
        assert!(matches!(parse_sample_lines("", 3), Err(SolveError::RemoteEmpty)));
    }
}
