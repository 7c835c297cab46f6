use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DemandError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub origin: usize,
    pub dest: usize,
    pub time_s: u64,
    pub riders: u32,
}

/// Individual ride requests ordered by request time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestStream {
    pub requests: Vec<Request>,
}

impl RequestStream {
    pub fn new(mut requests: Vec<Request>) -> Self {
        requests.sort_by_key(|r| (r.time_s, r.id));
        Self { requests }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn total_riders(&self) -> u64 {
        self.requests.iter().map(|r| r.riders as u64).sum()
    }

    pub fn validate(&self, zones: usize) -> Result<(), DemandError> {
        for (k, r) in self.requests.iter().enumerate() {
            if r.origin >= zones || r.dest >= zones {
                return Err(DemandError::InvalidStream(format!("request {} references zone outside 0..{zones}", r.id)));
            }
            if k > 0 && self.requests[k - 1].time_s > r.time_s {
                return Err(DemandError::InvalidStream(format!("request {} is out of time order", r.id)));
            }
        }
        Ok(())
    }

    /// Writes `id,origin,dest,time_s,riders` with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), DemandError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.requests {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, DemandError> {
        let mut rd = csv::Reader::from_reader(input);
        let requests = rd.deserialize().collect::<Result<Vec<Request>, _>>()?;
        Ok(Self { requests })
    }

    pub fn save(&self, path: &Path) -> Result<(), DemandError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, DemandError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_reads_back() {
        let s = RequestStream::new(vec![
            Request { id: 1, origin: 0, dest: 1, time_s: 30, riders: 1 },
            Request { id: 0, origin: 1, dest: 1, time_s: 10, riders: 2 },
        ]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,origin,dest,time_s,riders\n0,1,1,10,2\n"));
        assert_eq!(RequestStream::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn validate_catches_bad_zone_and_order() {
        let bad_zone = RequestStream { requests: vec![Request { id: 0, origin: 3, dest: 0, time_s: 0, riders: 1 }] };
        assert!(bad_zone.validate(2).is_err());
        let unordered = RequestStream {
            requests: vec![
                Request { id: 0, origin: 0, dest: 0, time_s: 9, riders: 1 },
                Request { id: 1, origin: 0, dest: 0, time_s: 3, riders: 1 },
            ],
        };
        assert!(unordered.validate(2).is_err());
    }
}
