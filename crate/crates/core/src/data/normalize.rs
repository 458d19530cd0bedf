use super::TimeSeries;
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-column mean and standard deviation of a training series.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(train: &TimeSeries) -> Result<Self> {
        let t = train.len();
        if t < 2 {
            return Err(Error::Data(format!(
                "normalization needs at least 2 rows, got {t}"
            )));
        }
        let (mean, std) = (0..train.dim())
            .map(|c| {
                let m = train.column(c).sum::<f64>() / t as f64;
                let var = train.column(c).map(|v| (v - m) * (v - m)).sum::<f64>() / t as f64;
                (m, var.sqrt().max(STD_FLOOR))
            })
            .unzip();
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, series: &TimeSeries) -> Result<TimeSeries> {
        if series.dim() != self.mean.len() {
            return Err(Error::Data(format!(
                "series has {} columns, statistics have {}",
                series.dim(),
                self.mean.len()
            )));
        }
        Ok(series.map_values(|c, v| (v - self.mean[c]) / self.std[c]))
    }

    /// `mean,std` rows, one per column, exact round trip.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mean,std\n");
        for (m, d) in self.mean.iter().zip(&self.std) {
            s.push_str(&format!("{m},{d}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut stats = NormStats {
            mean: Vec::new(),
            std: Vec::new(),
        };
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::Data(format!("normalization line {}: {line:?}", i + 1));
            let (m, d) = line.split_once(',').ok_or_else(bad)?;
            let m: f64 = m.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            if !m.is_finite() || !(d >= STD_FLOOR) {
                return Err(bad());
            }
            stats.mean.push(m);
            stats.std.push(d);
        }
        Ok(stats)
    }
}
