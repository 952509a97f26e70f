//! The four simulation tables, at full or reduced replication counts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::config::{DRule, SimConfig, VSpec};
use super::study::run_study;
use crate::error::{Error, Result};
use crate::weights::WeightScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    /// Per-level errors against the covariance inflation.
    T1,
    /// `K^B / K` for `d = n^{1/5}`.
    T2,
    /// `K^B` over sample sizes and dimension rules.
    T3,
    /// `K^B` by weight scheme.
    T4,
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t1" => Ok(TableId::T1),
            "t2" => Ok(TableId::T2),
            "t3" => Ok(TableId::T3),
            "t4" => Ok(TableId::T4),
            other => Err(Error::InvalidArgument(format!("unknown table '{other}' (t1..t4)"))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TableId::T1 => "t1",
            TableId::T2 => "t2",
            TableId::T3 => "t3",
            TableId::T4 => "t4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// `R = B = 5000` (`B = 2000` for the weight table).
    Paper,
    /// Paper counts divided by ten, with a noise-band column.
    Desk,
    Custom { mc_reps: usize, boot_reps: usize },
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::InvalidArgument(format!("unknown scale '{other}' (desk or paper)"))),
        }
    }
}

impl Scale {
    fn counts(self, which: TableId) -> (usize, usize) {
        let (r, b) = match which {
            TableId::T4 => (5000, 2000),
            _ => (5000, 5000),
        };
        match self {
            Scale::Paper => (r, b),
            Scale::Desk => (r / 10, b / 10),
            Scale::Custom { mc_reps, boot_reps } => (mc_reps, boot_reps),
        }
    }

    fn noise_column(self) -> bool {
        !matches!(self, Scale::Paper)
    }
}

pub const TABLE_NS: [usize; 5] = [250, 500, 1000, 2000, 3000];
pub const TABLE1_EPS: [f64; 8] = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pct(x: f64) -> String {
    format!("{:.3}", 100.0 * x)
}

fn power_label(num: u32, den: u32) -> String {
    format!("d=n^{num}/{den}")
}

/// Builds one table. Every cell is an independent study sharing `seed`.
pub fn run_table(which: TableId, scale: Scale, seed: u64) -> Result<Table> {
    let (mc_reps, boot_reps) = scale.counts(which);
    let base = SimConfig {
        mc_reps,
        boot_reps,
        seed,
        ..SimConfig::default()
    };
    let noise = {
        let levels = base.levels.levels();
        levels
            .iter()
            .map(|a| (a * (1.0 - a) / mc_reps as f64).sqrt())
            .fold(0.0, f64::max)
    };
    let with_noise = |mut header: Vec<String>, mut rows: Vec<Vec<String>>| {
        if scale.noise_column() {
            header.push("noise_band".into());
            rows.iter_mut().for_each(|r| r.push(pct(noise)));
        }
        Table { header, rows }
    };

    match which {
        TableId::T1 => {
            let mut header = vec!["a".to_string()];
            header.extend(TABLE1_EPS.iter().map(|e| format!("eps={e}")));
            let studies = TABLE1_EPS
                .iter()
                .map(|&eps| {
                    run_study(&SimConfig {
                        n: 500,
                        d_rule: DRule::Fixed(3),
                        v_spec: VSpec::Inflate(eps),
                        ..base.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = base
                .levels
                .levels()
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let mut row = vec![format!("{a:.3}")];
                    row.extend(studies.iter().map(|s| pct(s.per_level_errors[k])));
                    row
                })
                .collect();
            Ok(with_noise(header, rows))
        }
        TableId::T2 => {
            let mut header = vec!["statistic".to_string()];
            header.extend(TABLE_NS.iter().map(|n| format!("n={n}")));
            let studies = TABLE_NS
                .iter()
                .map(|&n| {
                    run_study(&SimConfig {
                        n,
                        d_rule: DRule::Power { num: 1, den: 5 },
                        ..base.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut ratio = vec!["kb/k".to_string()];
            ratio.extend(studies.iter().map(|s| format!("{:.3}", s.kb / s.k_chisq)));
            let mut rows = vec![ratio];
            if scale.noise_column() {
                let mut kb = vec!["100*kb".to_string()];
                kb.extend(studies.iter().map(|s| pct(s.kb)));
                let mut k = vec!["100*k".to_string()];
                k.extend(studies.iter().map(|s| pct(s.k_chisq)));
                rows.push(kb);
                rows.push(k);
            }
            Ok(with_noise(header, rows))
        }
        TableId::T3 => {
            let mut header = vec!["n".to_string()];
            header.extend(DRule::POWERS.iter().map(|&(a, b)| power_label(a, b)));
            let rows = TABLE_NS
                .iter()
                .map(|&n| {
                    let mut row = vec![n.to_string()];
                    for &(num, den) in &DRule::POWERS {
                        let s = run_study(&SimConfig {
                            n,
                            d_rule: DRule::Power { num, den },
                            ..base.clone()
                        })?;
                        row.push(pct(s.kb));
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(with_noise(header, rows))
        }
        TableId::T4 => {
            let mut header = vec!["n".to_string()];
            header.extend(WeightScheme::ALL.iter().map(|s| s.token().to_string()));
            let rows = TABLE_NS
                .iter()
                .map(|&n| {
                    let mut row = vec![n.to_string()];
                    for scheme in WeightScheme::ALL {
                        let s = run_study(&SimConfig {
                            n,
                            d_rule: DRule::Power { num: 1, den: 5 },
                            scheme,
                            ..base.clone()
                        })?;
                        row.push(pct(s.kb));
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(with_noise(header, rows))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_layout() {
        let t = run_table(TableId::T1, Scale::Custom { mc_reps: 4, boot_reps: 10 }, 1).unwrap();
        assert_eq!(t.header.len(), 1 + 8 + 1);
        assert_eq!(t.header[1], "eps=0");
        assert_eq!(t.header[8], "eps=28");
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }

    #[test]
    fn paper_counts() {
        assert_eq!(Scale::Paper.counts(TableId::T4), (5000, 2000));
        assert_eq!(Scale::Desk.counts(TableId::T1), (500, 500));
        assert_eq!(Scale::Desk.counts(TableId::T4), (500, 200));
        assert!("huge".parse::<Scale>().is_err());
        assert!("t5".parse::<TableId>().is_err());
    }
}
