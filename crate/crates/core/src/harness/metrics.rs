use std::collections::VecDeque;
use std::io::{Read, Write};

use crate::ppo::EpisodeRecord;

use super::HarnessError;

/// Column order of the metrics CSV.
pub const METRICS_HEADER: [&str; 10] = [
    "frames",
    "updates",
    "return_mean",
    "return_max",
    "episode_len_mean",
    "invalid_action_count",
    "duplicate_pickup_count",
    "policy_loss",
    "value_loss",
    "entropy",
];

/// One row per PPO update.
///
/// Returns and lengths summarise the last [`RETURN_WINDOW`] finished episodes
/// (zero before the first one ends). The two counters are the events of this
/// update's rollout only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub frames: u64,
    pub updates: u64,
    pub return_mean: f64,
    pub return_max: f64,
    pub episode_len_mean: f64,
    pub invalid_action_count: u64,
    pub duplicate_pickup_count: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub const RETURN_WINDOW: usize = 100;

/// Trailing window over the most recent finished episodes.
#[derive(Debug, Clone, Default)]
pub struct EpisodeWindow {
    episodes: VecDeque<EpisodeRecord>,
}

impl EpisodeWindow {
    pub fn push(&mut self, record: EpisodeRecord) {
        if self.episodes.len() == RETURN_WINDOW {
            self.episodes.pop_front();
        }
        self.episodes.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn return_mean(&self) -> f64 {
        self.mean(|e| e.total_return)
    }

    pub fn return_max(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.total_return)
            .reduce(f64::max)
            .unwrap_or(0.0)
    }

    pub fn length_mean(&self) -> f64 {
        self.mean(|e| e.length as f64)
    }

    fn mean(&self, f: impl Fn(&EpisodeRecord) -> f64) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(f).sum::<f64>() / self.episodes.len() as f64
    }
}

impl MetricsRow {
    fn fields(&self) -> [String; 10] {
        [
            self.frames.to_string(),
            self.updates.to_string(),
            self.return_mean.to_string(),
            self.return_max.to_string(),
            self.episode_len_mean.to_string(),
            self.invalid_action_count.to_string(),
            self.duplicate_pickup_count.to_string(),
            self.policy_loss.to_string(),
            self.value_loss.to_string(),
            self.entropy.to_string(),
        ]
    }
}

/// Streams rows to a CSV sink, header first.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W) -> Result<Self, HarnessError> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(METRICS_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<(), HarnessError> {
        self.inner.write_record(row.fields())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), HarnessError> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics<R: Read>(source: R) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(HarnessError::Format(format!("unexpected metrics header {header:?}")));
    }
    let bad = |column: &str, value: &str| {
        HarnessError::Format(format!("bad {column} value `{value}`"))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let int = |i: usize| record[i].parse::<u64>().map_err(|_| bad(METRICS_HEADER[i], &record[i]));
        let real = |i: usize| record[i].parse::<f64>().map_err(|_| bad(METRICS_HEADER[i], &record[i]));
        rows.push(MetricsRow {
            frames: int(0)?,
            updates: int(1)?,
            return_mean: real(2)?,
            return_max: real(3)?,
            episode_len_mean: real(4)?,
            invalid_action_count: int(5)?,
            duplicate_pickup_count: int(6)?,
            policy_loss: real(7)?,
            value_loss: real(8)?,
            entropy: real(9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(total_return: f64, length: usize) -> EpisodeRecord {
        EpisodeRecord {
            total_return,
            length,
            invalid_actions: 0,
            duplicate_pickups: 0,
        }
    }

    #[test]
    fn window_keeps_latest_hundred() {
        let mut w = EpisodeWindow::default();
        assert_eq!((w.return_mean(), w.return_max(), w.length_mean()), (0.0, 0.0, 0.0));
        for i in 0..150 {
            w.push(record(i as f64, 2));
        }
        assert_eq!(w.len(), 100);
        assert_eq!(w.return_max(), 149.0);
        assert_eq!(w.return_mean(), (50..150).sum::<i32>() as f64 / 100.0);
        assert_eq!(w.length_mean(), 2.0);
    }

    #[test]
    fn negative_returns_have_correct_max() {
        let mut w = EpisodeWindow::default();
        w.push(record(-3.0, 1));
        w.push(record(-1.0, 1));
        assert_eq!(w.return_max(), -1.0);
        assert!(w.return_max() >= w.return_mean());
    }

    #[test]
    fn csv_round_trip() {
        let row = MetricsRow {
            frames: 512,
            updates: 1,
            return_mean: 0.1 + 0.2,
            return_max: 1.5,
            episode_len_mean: 12.25,
            invalid_action_count: 3,
            duplicate_pickup_count: 0,
            policy_loss: -0.015625,
            value_loss: 2.0e-7,
            entropy: 3.4,
        };
        let mut bytes = Vec::new();
        {
            let mut w = MetricsWriter::new(&mut bytes).unwrap();
            w.write(&row).unwrap();
            w.flush().unwrap();
        }
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("frames,updates,return_mean,return_max,episode_len_mean,invalid_action_count,duplicate_pickup_count,policy_loss,value_loss,entropy\n"));
        assert_eq!(read_metrics(&bytes[..]).unwrap(), vec![row]);
    }
}
