use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and population standard deviation of one keyword's retrieval
/// distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub keyword: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn distance_stats(distances: &[f64], keyword: &str) -> Result<DistanceStats> {
    if distances.is_empty() {
        return Err(Error::invalid(format!("no distances for keyword {keyword:?}")));
    }
    // Welford's update.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &d) in distances.iter().enumerate() {
        if !(-1.0..=1.0).contains(&d) {
            return Err(Error::invalid(format!("distance {d} outside [-1, 1]")));
        }
        let delta = d - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (d - mean);
    }
    Ok(DistanceStats {
        keyword: keyword.to_string(),
        mean,
        std: (m2 / distances.len() as f64).max(0.0).sqrt(),
        count: distances.len(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV with header `keyword,mean,std,count`; rates printed with 6 decimals.
pub fn write_stats_csv<W: Write>(mut w: W, stats: &[DistanceStats]) -> std::io::Result<()> {
    writeln!(w, "keyword,mean,std,count")?;
    for s in stats {
        writeln!(
            w,
            "{},{:.6},{:.6},{}",
            csv_field(&s.keyword),
            s.mean,
            s.std,
            s.count
        )?;
    }
    Ok(())
}
