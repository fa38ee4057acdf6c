use super::{MidiError, NoteEvent, Score, TempoEvent, TimeSigEvent, DEFAULT_BPM, DEFAULT_TIME_SIG};

/// Counters for irregularities repaired while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub tracks: usize,
    pub unpaired_note_ons: usize,
    pub truncated_overlaps: usize,
    pub dropped_zero_length: usize,
}

/// Parses a format 0 or format 1 Standard MIDI File.
pub fn parse_midi(bytes: &[u8]) -> Result<Score, MidiError> {
    parse_midi_with_report(bytes).map(|(score, _)| score)
}

pub fn parse_midi_with_report(bytes: &[u8]) -> Result<(Score, ParseReport), MidiError> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4)? != b"MThd" {
        return Err(malformed("missing MThd header"));
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return Err(malformed("header chunk shorter than 6 bytes"));
    }
    let header = cur.take(header_len)?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let ntracks = u16::from_be_bytes([header[2], header[3]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    match format {
        0 | 1 => {}
        2 => {
            return Err(MidiError::UnsupportedFormat(
                "SMF format 2 has no shared timeline".into(),
            ))
        }
        f => return Err(MidiError::UnsupportedFormat(format!("SMF format {f}"))),
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedFormat(
            "SMPTE time division".into(),
        ));
    }
    if division == 0 {
        return Err(malformed("zero ticks per quarter note"));
    }

    let mut events = Vec::new();
    let mut track_ends = Vec::new();
    let mut track = 0usize;
    while track < ntracks as usize && !cur.is_empty() {
        let id = cur.take(4)?;
        let len = cur.u32()? as usize;
        let body = cur.take(len)?;
        if id != b"MTrk" {
            // unknown chunk types are skipped
            continue;
        }
        let end = read_track(body, track, &mut events)?;
        track_ends.push(end);
        track += 1;
    }

    // merge tracks on one timeline; stable so within-track order survives
    events.sort_by_key(|e| e.tick);
    let mut report = ParseReport {
        tracks: track,
        ..Default::default()
    };
    let score = assemble(division, &events, &track_ends, &mut report);
    Ok((score, report))
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8 },
    Program { channel: u8, program: u8 },
    Tempo { micros: u32 },
    TimeSig { numerator: u8, denominator: u8 },
}

#[derive(Debug, Clone, Copy)]
struct RawEvent {
    tick: u64,
    track: usize,
    kind: Kind,
}

fn read_track(body: &[u8], track: usize, out: &mut Vec<RawEvent>) -> Result<u64, MidiError> {
    let mut cur = Cursor::new(body);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while !cur.is_empty() {
        tick += cur.varlen()? as u64;
        let mut status = cur.u8()?;
        let first_data = if status < 0x80 {
            let first = status;
            status = running.ok_or_else(|| malformed("data byte without running status"))?;
            Some(first)
        } else {
            None
        };
        match status {
            0xff => {
                let kind = cur.u8()?;
                let len = cur.varlen()? as usize;
                let data = cur.take(len)?;
                match kind {
                    0x2f => return Ok(tick),
                    0x51 if len >= 3 => {
                        let micros = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if micros > 0 {
                            out.push(RawEvent {
                                tick,
                                track,
                                kind: Kind::Tempo { micros },
                            });
                        }
                    }
                    0x58 if len >= 2
                        && data[0] > 0 && data[1] < 8 => {
                            out.push(RawEvent {
                                tick,
                                track,
                                kind: Kind::TimeSig {
                                    numerator: data[0],
                                    denominator: 1 << data[1],
                                },
                            });
                        }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                let len = cur.varlen()? as usize;
                cur.take(len)?;
                running = None;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let mut first_data = first_data;
                let mut next = |cur: &mut Cursor| -> Result<u8, MidiError> {
                    match first_data.take() {
                        Some(b) => Ok(b),
                        None => cur.u8(),
                    }
                };
                match status & 0xf0 {
                    0x80 => {
                        let pitch = next(&mut cur)? & 0x7f;
                        next(&mut cur)?;
                        out.push(RawEvent {
                            tick,
                            track,
                            kind: Kind::NoteOff { channel, pitch },
                        });
                    }
                    0x90 => {
                        let pitch = next(&mut cur)? & 0x7f;
                        let velocity = next(&mut cur)? & 0x7f;
                        let kind = if velocity == 0 {
                            Kind::NoteOff { channel, pitch }
                        } else {
                            Kind::NoteOn {
                                channel,
                                pitch,
                                velocity,
                            }
                        };
                        out.push(RawEvent { tick, track, kind });
                    }
                    0xc0 => {
                        let program = next(&mut cur)? & 0x7f;
                        out.push(RawEvent {
                            tick,
                            track,
                            kind: Kind::Program { channel, program },
                        });
                    }
                    0xd0 => {
                        next(&mut cur)?;
                    }
                    // 0xa0 aftertouch, 0xb0 control change, 0xe0 pitch bend
                    _ => {
                        next(&mut cur)?;
                        next(&mut cur)?;
                    }
                }
            }
            // system common / realtime messages have no place inside a track
            s => return Err(malformed(&format!("unexpected status byte {s:#04x}"))),
        }
    }
    // tolerate a missing end-of-track meta event
    Ok(tick)
}

fn assemble(division: u16, events: &[RawEvent], track_ends: &[u64], report: &mut ParseReport) -> Score {
    struct Open {
        onset: u64,
        velocity: u8,
        program: u8,
        track: usize,
    }
    let mut open: Vec<Option<Open>> = (0..16 * 128).map(|_| None).collect();
    let mut programs = [0u8; 16];
    let mut notes = Vec::new();
    let mut tempos: Vec<TempoEvent> = Vec::new();
    let mut timesigs: Vec<TimeSigEvent> = Vec::new();

    let mut close = |o: Open, end: u64, channel: u8, pitch: u8, report: &mut ParseReport| {
        if end > o.onset {
            notes.push(NoteEvent {
                onset_ticks: o.onset,
                duration_ticks: end - o.onset,
                pitch,
                velocity: o.velocity,
                channel,
                program: o.program,
            });
        } else {
            report.dropped_zero_length += 1;
        }
    };

    for e in events {
        match e.kind {
            Kind::NoteOn {
                channel,
                pitch,
                velocity,
            } => {
                let slot = channel as usize * 128 + pitch as usize;
                if let Some(prev) = open[slot].take() {
                    report.truncated_overlaps += 1;
                    close(prev, e.tick, channel, pitch, report);
                }
                open[slot] = Some(Open {
                    onset: e.tick,
                    velocity,
                    program: programs[channel as usize],
                    track: e.track,
                });
            }
            Kind::NoteOff { channel, pitch } => {
                let slot = channel as usize * 128 + pitch as usize;
                if let Some(prev) = open[slot].take() {
                    close(prev, e.tick, channel, pitch, report);
                }
            }
            Kind::Program { channel, program } => programs[channel as usize] = program,
            Kind::Tempo { micros } => {
                let ev = TempoEvent {
                    at_ticks: e.tick,
                    bpm: (60_000_000.0 / micros as f64).clamp(1.0, 1000.0),
                };
                match tempos.last_mut() {
                    Some(last) if last.at_ticks == e.tick => *last = ev,
                    _ => tempos.push(ev),
                }
            }
            Kind::TimeSig {
                numerator,
                denominator,
            } => {
                let ev = TimeSigEvent {
                    at_ticks: e.tick,
                    numerator,
                    denominator,
                };
                match timesigs.last_mut() {
                    Some(last) if last.at_ticks == e.tick => *last = ev,
                    _ => timesigs.push(ev),
                }
            }
        }
    }

    for (slot, o) in open.into_iter().enumerate() {
        if let Some(o) = o {
            report.unpaired_note_ons += 1;
            let end = track_ends.get(o.track).copied().unwrap_or(o.onset);
            close(o, end, (slot / 128) as u8, (slot % 128) as u8, report);
        }
    }

    if tempos.first().is_none_or(|t| t.at_ticks > 0) {
        tempos.insert(
            0,
            TempoEvent {
                at_ticks: 0,
                bpm: DEFAULT_BPM,
            },
        );
    }
    if timesigs.first().is_none_or(|t| t.at_ticks > 0) {
        timesigs.insert(
            0,
            TimeSigEvent {
                at_ticks: 0,
                numerator: DEFAULT_TIME_SIG.0,
                denominator: DEFAULT_TIME_SIG.1,
            },
        );
    }

    let mut score = Score {
        ticks_per_quarter: division,
        notes,
        tempos,
        timesigs,
    };
    score.sort_notes();
    score
}

fn malformed(msg: &str) -> MidiError {
    MidiError::MalformedFile(msg.to_string())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.data.len())
            .ok_or_else(|| malformed("truncated chunk"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u32, MidiError> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(malformed("variable-length quantity longer than 4 bytes"))
    }
}
