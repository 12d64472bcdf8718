//! Plain-text sequence dumps.
//!
//! ```text
//! # period=15 n=5
//! 0	3
//! 1	4
//! ```
//!
//! One header line `# period=<τ|none> n=<N>`, then one `t<TAB>channel` line
//! per slot starting at slot 0.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::channel::ChannelSet;
use crate::sequence::ChSequence;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDump {
    pub period: Option<u64>,
    pub n: u32,
    pub channels: Vec<u32>,
}

impl SequenceDump {
    pub fn capture(seq: &ChSequence, slots: u64) -> Self {
        SequenceDump {
            period: seq.period(),
            n: seq.channels().n(),
            channels: seq.take(slots).into_iter().map(|c| c.get()).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.channels.len() * 6 + 32);
        let period = self.period.map_or_else(|| "none".to_string(), |p| p.to_string());
        let _ = writeln!(out, "# period={period} n={}", self.n);
        for (t, c) in self.channels.iter().enumerate() {
            let _ = writeln!(out, "{t}\t{c}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DumpError> {
        let malformed = |line: usize, reason: &str| DumpError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| malformed(1, "missing header"))?;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| malformed(1, "header must start with '# '"))?;
        let (mut period, mut n) = (None, None);
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("period", "none")) => period = Some(None),
                Some(("period", v)) => {
                    let p = v.parse::<u64>().map_err(|_| malformed(1, "bad period"))?;
                    period = Some(Some(p));
                }
                Some(("n", v)) => n = Some(v.parse::<u32>().map_err(|_| malformed(1, "bad n"))?),
                _ => return Err(malformed(1, "unknown header field")),
            }
        }
        let period = period.ok_or_else(|| malformed(1, "missing period"))?;
        let n = n.ok_or_else(|| malformed(1, "missing n"))?;
        if n == 0 {
            return Err(malformed(1, "n must be positive"));
        }

        let mut channels = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (t, c) = line
                .split_once('\t')
                .ok_or_else(|| malformed(lineno, "expected t<TAB>channel"))?;
            let t: usize = t.parse().map_err(|_| malformed(lineno, "bad slot"))?;
            let c: u32 = c.trim_end().parse().map_err(|_| malformed(lineno, "bad channel"))?;
            if t != channels.len() {
                return Err(malformed(lineno, "slots must be consecutive from 0"));
            }
            if c == 0 || c > n {
                return Err(malformed(lineno, "channel outside 1..=n"));
            }
            channels.push(c);
        }
        Ok(SequenceDump { period, n, channels })
    }

    /// Replays the dump as a periodic sequence over its recorded slots.
    pub fn to_sequence(&self) -> Option<ChSequence> {
        let set = ChannelSet::new(self.n).ok()?;
        (!self.channels.is_empty()).then(|| ChSequence::periodic(set, self.channels.clone()))
    }
}
