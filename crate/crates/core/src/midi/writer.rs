use super::Score;

/// Serializes a score as a format 0 SMF with a single track.
///
/// Running status is never emitted. At equal ticks the writer orders meta
/// events first, then note-offs, then program changes paired with their
/// note-ons, so that back-to-back notes of one pitch re-read unchanged.
pub fn write_midi(score: &Score) -> Vec<u8> {
    // (tick, order class, sequence, bytes)
    let mut events: Vec<(u64, u8, usize, Vec<u8>)> = Vec::new();
    let mut seq = 0usize;
    let mut push = |events: &mut Vec<_>, tick: u64, class: u8, bytes: Vec<u8>| {
        events.push((tick, class, seq, bytes));
        seq += 1;
    };

    for ts in &score.timesigs {
        let dd = ts.denominator.trailing_zeros() as u8;
        push(
            &mut events,
            ts.at_ticks,
            0,
            vec![0xff, 0x58, 0x04, ts.numerator, dd, 24, 8],
        );
    }
    for t in &score.tempos {
        let us = t.micros_per_quarter().to_be_bytes();
        push(&mut events, t.at_ticks, 0, vec![0xff, 0x51, 0x03, us[1], us[2], us[3]]);
    }

    let mut programs = [0u8; 16];
    for n in &score.notes {
        let ch = n.channel & 0x0f;
        push(&mut events, n.end_ticks(), 1, vec![0x80 | ch, n.pitch, 0]);
        if programs[ch as usize] != n.program {
            programs[ch as usize] = n.program;
            push(&mut events, n.onset_ticks, 2, vec![0xc0 | ch, n.program]);
        }
        push(&mut events, n.onset_ticks, 2, vec![0x90 | ch, n.pitch, n.velocity]);
    }
    events.sort_by_key(|e| (e.0, e.1, e.2));

    let mut track = Vec::new();
    let mut now = 0u64;
    for (tick, _, _, bytes) in &events {
        write_varlen(&mut track, (tick - now) as u32);
        track.extend_from_slice(bytes);
        now = *tick;
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&score.ticks_per_quarter.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

fn write_varlen(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 5];
    let mut i = buf.len() - 1;
    buf[i] = (value & 0x7f) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = 0x80 | (value & 0x7f) as u8;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}
