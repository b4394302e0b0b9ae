//! Observational records `(T, Z, Y)` and their CSV form `t,z,y1..yp`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::filtration::{outcome_columns, parse_f64, PointCloud};

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    /// Treatment arm, 0 or 1.
    pub t: u8,
    /// Stratum label.
    pub z: u32,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationalSample {
    dim: usize,
    records: Vec<Record>,
}

impl ObservationalSample {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.y.len())
            .ok_or_else(|| Error::InvalidCloud("empty observational sample".into()))?;
        if dim == 0 {
            return Err(Error::InvalidCloud("outcomes must have dimension >= 1".into()));
        }
        for r in &records {
            if r.t > 1 {
                return Err(Error::InvalidCloud(format!("treatment must be 0 or 1, got {}", r.t)));
            }
            if r.y.len() != dim {
                return Err(Error::InvalidCloud("inconsistent outcome dimension".into()));
            }
            if r.y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCloud("non-finite outcome".into()));
            }
        }
        Ok(Self { dim, records })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strata(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.z).collect()
    }

    pub fn cell_count(&self, t: u8, z: u32) -> usize {
        self.records.iter().filter(|r| r.t == t && r.z == z).count()
    }

    /// Outcomes of the `(t, z)` cell in record order, or a positivity error
    /// when the cell has fewer than `min` records.
    pub fn cell_cloud(&self, t: u8, z: u32, min: usize) -> Result<PointCloud> {
        self.cloud_where(|r| r.t == t && r.z == z)
            .filter(|c| c.len() >= min)
            .ok_or_else(|| Error::Positivity {
                t,
                z,
                count: self.cell_count(t, z),
                min,
            })
    }

    /// All outcomes of arm `t`, pooled over strata.
    pub fn arm_cloud(&self, t: u8, min: usize) -> Result<PointCloud> {
        self.cloud_where(|r| r.t == t)
            .filter(|c| c.len() >= min)
            .ok_or_else(|| Error::ArmTooSmall {
                t,
                count: self.records.iter().filter(|r| r.t == t).count(),
                min,
            })
    }

    fn cloud_where(&self, keep: impl Fn(&Record) -> bool) -> Option<PointCloud> {
        let coords: Vec<f64> = self
            .records
            .iter()
            .filter(|r| keep(r))
            .flat_map(|r| r.y.iter().copied())
            .collect();
        PointCloud::from_flat(self.dim, coords).ok()
    }

    /// Empirical law of Z: pooled stratum size over N.
    pub fn stratum_weights(&self) -> BTreeMap<u32, f64> {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.z).or_default() += 1;
        }
        let n = self.records.len() as f64;
        counts.into_iter().map(|(z, c)| (z, c as f64 / n)).collect()
    }

    /// The same sample with treatment labels flipped.
    pub fn swapped_arms(&self) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| Record {
                t: 1 - r.t,
                ..r.clone()
            })
            .collect();
        Self {
            dim: self.dim,
            records,
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
        };
        let (tc, zc) = (find("t")?, find("z")?);
        let columns = outcome_columns(&headers)?;
        let mut records = Vec::new();
        for row in r.records() {
            let row = row?;
            let t = row[tc]
                .trim()
                .parse::<u8>()
                .map_err(|e| Error::Parse(format!("t = {:?}: {e}", &row[tc])))?;
            let z = row[zc]
                .trim()
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("z = {:?}: {e}", &row[zc])))?;
            let y = columns
                .iter()
                .map(|&c| parse_f64(&row[c]))
                .collect::<Result<Vec<_>>>()?;
            records.push(Record { t, z, y });
        }
        Self::new(records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "z".to_string()];
        header.extend((1..=self.dim).map(|k| format!("y{k}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.t.to_string(), r.z.to_string()];
            row.extend(r.y.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u8, z: u32, y: f64) -> Record {
        Record { t, z, y: vec![y] }
    }

    #[test]
    fn validation() {
        assert!(ObservationalSample::new(vec![]).is_err());
        assert!(ObservationalSample::new(vec![rec(2, 0, 0.0)]).is_err());
        assert!(ObservationalSample::new(vec![
            rec(0, 0, 0.0),
            Record { t: 1, z: 0, y: vec![1.0, 2.0] }
        ])
        .is_err());
    }

    #[test]
    fn weights_and_cells() {
        let s = ObservationalSample::new(vec![
            rec(0, 0, 0.0),
            rec(1, 0, 1.0),
            rec(0, 1, 2.0),
            rec(0, 1, 3.0),
        ])
        .unwrap();
        let w = s.stratum_weights();
        assert_eq!(w[&0], 0.5);
        assert_eq!(w[&1], 0.5);
        assert_eq!(s.cell_cloud(0, 1, 2).unwrap().len(), 2);
        assert!(matches!(
            s.cell_cloud(1, 1, 1),
            Err(Error::Positivity { t: 1, z: 1, count: 0, .. })
        ));
        assert_eq!(s.arm_cloud(0, 1).unwrap().len(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let csv = "t,z,y1,y2\n0,0,1.5,-2\n1,3,0.25,4\n";
        let s = ObservationalSample::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.records()[1], Record { t: 1, z: 3, y: vec![0.25, 4.0] });
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,z,y1,y2\n0,0,1.5,-2\n1,3,0.25,4\n");
        assert!(ObservationalSample::read_csv("z,y1\n0,1\n".as_bytes()).is_err());
    }
}
