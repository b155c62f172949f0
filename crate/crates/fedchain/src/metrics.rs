//! Metrics CSV and event log writers.
//!
//! The CSV starts with a `# seed=<n>` comment line, then the header. Both
//! writers flush after every record so an aborted run keeps its prefix.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::simnet::{Event, RoundMetrics, Sink};

pub const HEADER: [&str; 8] = [
    "episode",
    "round",
    "hospitals",
    "grads_per_hospital",
    "global_accuracy",
    "global_loss",
    "wall_time_ms",
    "confirmed_tx",
];

fn record(m: &RoundMetrics) -> [String; 8] {
    [
        m.episode.to_string(),
        m.round.to_string(),
        m.hospitals.to_string(),
        m.grads_per_hospital.to_string(),
        m.global_accuracy.to_string(),
        m.global_loss.to_string(),
        m.wall_time_ms.to_string(),
        m.confirmed_tx.to_string(),
    ]
}

/// Streams metrics rows as CSV.
pub struct MetricsWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    /// Write the seed comment and header.
    pub fn new(mut inner: W, seed: u64) -> io::Result<Self> {
        writeln!(inner, "# seed={seed}")?;
        let mut csv = csv::Writer::from_writer(inner);
        csv.write_record(HEADER)?;
        csv.flush()?;
        Ok(MetricsWriter { csv })
    }

    pub fn write(&mut self, m: &RoundMetrics) -> io::Result<()> {
        self.csv.write_record(record(m))?;
        self.csv.flush()
    }

    pub fn into_inner(self) -> io::Result<W> {
        self.csv.into_inner().map_err(|e| e.into_error())
    }
}

/// Write a whole series.
pub fn emit_metrics<W: Write>(series: &[RoundMetrics], seed: u64, sink: W) -> io::Result<W> {
    let mut w = MetricsWriter::new(sink, seed)?;
    for m in series {
        w.write(m)?;
    }
    w.into_inner()
}

pub fn event_line(e: &Event) -> String {
    serde_json::to_string(e).expect("events serialize")
}

/// Parse metrics CSV text back into rows; the seed comment is skipped.
pub fn read_metrics(text: &str) -> Result<Vec<RoundMetrics>, csv::Error> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |i: usize| {
            csv::Error::from(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("bad value {:?} in column {}", field(i), HEADER[i]),
            ))
        };
        out.push(RoundMetrics {
            episode: field(0).parse().map_err(|_| bad(0))?,
            round: field(1).parse().map_err(|_| bad(1))?,
            hospitals: field(2).parse().map_err(|_| bad(2))?,
            grads_per_hospital: field(3).parse().map_err(|_| bad(3))?,
            global_accuracy: field(4).parse().map_err(|_| bad(4))?,
            global_loss: field(5).parse().map_err(|_| bad(5))?,
            wall_time_ms: field(6).parse().map_err(|_| bad(6))?,
            confirmed_tx: field(7).parse().map_err(|_| bad(7))?,
        });
    }
    Ok(out)
}

/// Sink writing `metrics.csv` and `events.jsonl` style files.
pub struct FileSink {
    metrics: MetricsWriter<BufWriter<File>>,
    events: BufWriter<File>,
}

impl FileSink {
    pub fn create(metrics: &Path, events: &Path, seed: u64) -> io::Result<Self> {
        Ok(FileSink {
            metrics: MetricsWriter::new(BufWriter::new(File::create(metrics)?), seed)?,
            events: BufWriter::new(File::create(events)?),
        })
    }

    pub fn finish(self) -> io::Result<()> {
        self.metrics.into_inner()?.flush()?;
        let mut events = self.events;
        events.flush()
    }
}

impl Sink for FileSink {
    fn round(&mut self, metrics: &RoundMetrics) -> io::Result<()> {
        self.metrics.write(metrics)
    }

    fn event(&mut self, event: &Event) -> io::Result<()> {
        writeln!(self.events, "{}", event_line(event))?;
        self.events.flush()
    }
}
