use std::borrow::Borrow;
use std::io::{self, Read, Write};

use thiserror::Error;

use super::record::{EventRecord, RunHeader, FORMAT_VERSION, MAGIC, RECORD_SIZE};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?} at byte 0, expected \"VIP2\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {version} at byte {offset}")]
    UnsupportedVersion { version: u16, offset: u64 },
    #[error("invalid header at byte {offset}: {reason}")]
    InvalidHeader { offset: u64, reason: String },
    #[error("truncated {} at byte {offset}", match .record { Some(i) => format!("record {i}"), None => "header".to_owned() })]
    Truncated { offset: u64, record: Option<u64> },
    #[error("invalid record {record} at byte {offset}: {reason}")]
    InvalidRecord { offset: u64, record: u64, reason: String },
    #[error("{count} bytes of trailing data at byte {offset}")]
    TrailingData { offset: u64, count: u64 },
    #[error("record {record}: timestamp {timestamp_ns} ns precedes its predecessor")]
    Unsorted { record: u64, timestamp_ns: u64 },
    #[error("header declares {declared} events but {actual} were supplied")]
    CountMismatch { declared: u64, actual: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Total file size for a header and its declared events.
pub fn encoded_len(header: &RunHeader) -> u64 {
    (4 + 2 + header.payload_len()) as u64 + header.event_count * RECORD_SIZE as u64
}

/// Writes a complete run file and returns the number of bytes written.
///
/// Records are validated as they stream through, so on error the sink may hold
/// a partial file.
pub fn write_run<I, W>(header: &RunHeader, events: I, mut sink: W) -> Result<u64, FormatError>
where
    I: IntoIterator,
    I::Item: Borrow<EventRecord>,
    W: Write,
{
    let header_error = |reason: String| FormatError::InvalidHeader { offset: 0, reason };
    if header.format_version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            version: header.format_version,
            offset: 4,
        });
    }
    header.check().map_err(header_error)?;

    let mut head = Vec::with_capacity(6 + header.payload_len());
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&header.format_version.to_le_bytes());
    head.extend_from_slice(&(header.run_id.len() as u16).to_le_bytes());
    head.extend_from_slice(header.run_id.as_bytes());
    head.extend_from_slice(&header.current_ma.to_le_bytes());
    head.extend_from_slice(&header.live_time_s.to_le_bytes());
    head.push(u8::from(header.current_on));
    head.extend_from_slice(&header.event_count.to_le_bytes());
    sink.write_all(&head)?;
    let mut written = head.len() as u64;

    let mut buf = [0u8; RECORD_SIZE];
    let mut count = 0u64;
    let mut last_ts = 0u64;
    for event in events {
        let event = event.borrow();
        let offset = written;
        if count >= header.event_count {
            return Err(FormatError::CountMismatch {
                declared: header.event_count,
                actual: count + 1,
            });
        }
        event.check().map_err(|reason| FormatError::InvalidRecord {
            offset,
            record: count,
            reason,
        })?;
        if event.timestamp_ns < last_ts {
            return Err(FormatError::Unsorted {
                record: count,
                timestamp_ns: event.timestamp_ns,
            });
        }
        last_ts = event.timestamp_ns;
        event.encode(&mut buf);
        sink.write_all(&buf)?;
        written += RECORD_SIZE as u64;
        count += 1;
    }
    if count != header.event_count {
        return Err(FormatError::CountMismatch {
            declared: header.event_count,
            actual: count,
        });
    }
    sink.flush()?;
    Ok(written)
}

/// Parses the header and returns a lazy reader over the records.
pub fn read_run<R: Read>(source: R) -> Result<(RunHeader, RunReader<R>), FormatError> {
    let mut src = Tracked { inner: source, offset: 0 };

    let mut magic = [0u8; 4];
    src.read_header_bytes(&mut magic)?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic });
    }
    let version_offset = src.offset;
    let format_version = u16::from_le_bytes(src.read_header_array()?);
    if format_version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            version: format_version,
            offset: version_offset,
        });
    }
    let id_offset = src.offset;
    let id_len = u16::from_le_bytes(src.read_header_array()?);
    let mut id = vec![0u8; usize::from(id_len)];
    src.read_header_bytes(&mut id)?;
    let run_id = String::from_utf8(id).map_err(|_| FormatError::InvalidHeader {
        offset: id_offset,
        reason: "run_id is not UTF-8".into(),
    })?;
    let current_ma = u32::from_le_bytes(src.read_header_array()?);
    let live_time_s = u64::from_le_bytes(src.read_header_array()?);
    let flag_offset = src.offset;
    let [flag] = src.read_header_array()?;
    let current_on = match flag {
        0 => false,
        1 => true,
        other => {
            return Err(FormatError::InvalidHeader {
                offset: flag_offset,
                reason: format!("current_on byte {other} is neither 0 nor 1"),
            })
        }
    };
    let event_count = u64::from_le_bytes(src.read_header_array()?);
    let header = RunHeader {
        format_version,
        run_id,
        current_ma,
        live_time_s,
        current_on,
        event_count,
    };
    header.check().map_err(|reason| FormatError::InvalidHeader {
        offset: flag_offset,
        reason,
    })?;

    let reader = RunReader {
        src,
        remaining: event_count,
        index: 0,
        last_ts: 0,
        done: false,
    };
    Ok((header, reader))
}

/// Reads a whole run into memory.
pub fn read_run_all<R: Read>(source: R) -> Result<(RunHeader, Vec<EventRecord>), FormatError> {
    let (header, reader) = read_run(source)?;
    let events = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, events))
}

struct Tracked<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Tracked<R> {
    /// Fills `buf` completely; returns how many bytes arrived before EOF.
    fn fill(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        self.offset += got as u64;
        Ok(got)
    }

    fn read_header_bytes(&mut self, buf: &mut [u8]) -> Result<(), FormatError> {
        if self.fill(buf)? < buf.len() {
            return Err(FormatError::Truncated {
                offset: self.offset,
                record: None,
            });
        }
        Ok(())
    }

    fn read_header_array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut buf = [0u8; N];
        self.read_header_bytes(&mut buf)?;
        Ok(buf)
    }
}

/// Lazy record iterator. Yields exactly `event_count` records, then checks
/// for trailing bytes. Stops after the first error.
pub struct RunReader<R> {
    src: Tracked<R>,
    remaining: u64,
    index: u64,
    last_ts: u64,
    done: bool,
}

impl<R: Read> RunReader<R> {
    fn next_record(&mut self) -> Result<Option<EventRecord>, FormatError> {
        if self.remaining == 0 {
            let mut probe = [0u8; 64];
            let offset = self.src.offset;
            let extra = self.src.fill(&mut probe)?;
            if extra > 0 {
                let mut count = extra as u64;
                loop {
                    let n = self.src.fill(&mut probe)?;
                    if n == 0 {
                        break;
                    }
                    count += n as u64;
                }
                return Err(FormatError::TrailingData { offset, count });
            }
            return Ok(None);
        }
        let offset = self.src.offset;
        let mut buf = [0u8; RECORD_SIZE];
        if self.src.fill(&mut buf)? < RECORD_SIZE {
            return Err(FormatError::Truncated {
                offset,
                record: Some(self.index),
            });
        }
        let record = EventRecord::decode(&buf);
        let invalid = |reason: String| FormatError::InvalidRecord {
            offset,
            record: self.index,
            reason,
        };
        record.check().map_err(invalid)?;
        if record.timestamp_ns < self.last_ts {
            return Err(invalid(format!(
                "timestamp {} ns precedes previous {} ns",
                record.timestamp_ns, self.last_ts
            )));
        }
        self.last_ts = record.timestamp_ns;
        self.remaining -= 1;
        self.index += 1;
        Ok(Some(record))
    }

    /// Records successfully read so far.
    pub fn records_read(&self) -> u64 {
        self.index
    }
}

impl<R: Read> Iterator for RunReader<R> {
    type Item = Result<EventRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
