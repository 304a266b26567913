use super::{
    crc16_ccitt_false, SensorBurst, WireError, ACCEL_SAMPLES, DEVICE_ID_LEN, PACKET_LEN,
    PPG_SAMPLES, TEMP_SAMPLES,
};

/// Serializes a burst into the fixed 1350-byte packet.
pub fn encode(burst: &SensorBurst) -> Result<Vec<u8>, WireError> {
    burst.validate()?;
    let mut out = Vec::with_capacity(PACKET_LEN);
    out.extend_from_slice(&burst.ts.to_le_bytes());
    let mut id = [0u8; DEVICE_ID_LEN];
    id[..burst.device_id.len()].copy_from_slice(burst.device_id.as_bytes());
    out.extend_from_slice(&id);
    for axis in [&burst.accel_x, &burst.accel_y, &burst.accel_z] {
        for s in axis {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    for chan in [&burst.ir, &burst.red, &burst.temp_wrist, &burst.temp_ambient] {
        for s in chan {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    let crc = crc16_ccitt_false(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    debug_assert_eq!(out.len(), PACKET_LEN);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        a
    }

    fn i16s(&mut self, n: usize) -> Vec<i16> {
        (0..n).map(|_| i16::from_le_bytes(self.take())).collect()
    }

    fn u16s(&mut self, n: usize) -> Vec<u16> {
        (0..n).map(|_| u16::from_le_bytes(self.take())).collect()
    }
}

/// Parses a packet, verifying length and CRC.
pub fn decode(bytes: &[u8]) -> Result<SensorBurst, WireError> {
    if bytes.len() < PACKET_LEN {
        return Err(WireError::TruncatedPacket {
            actual: bytes.len(),
        });
    }
    if bytes.len() > PACKET_LEN {
        return Err(WireError::TrailingBytes {
            actual: bytes.len(),
        });
    }
    let body = &bytes[..PACKET_LEN - 2];
    let carried = u16::from_le_bytes([bytes[PACKET_LEN - 2], bytes[PACKET_LEN - 1]]);
    let computed = crc16_ccitt_false(body);
    if computed != carried {
        return Err(WireError::ChecksumMismatch { computed, carried });
    }

    let mut r = Reader { buf: body, pos: 0 };
    let ts = u32::from_le_bytes(r.take());
    let id: [u8; DEVICE_ID_LEN] = r.take();
    let id_len = id.iter().position(|&b| b == 0).unwrap_or(DEVICE_ID_LEN);
    let device_id = String::from_utf8_lossy(&id[..id_len]).into_owned();
    let burst = SensorBurst {
        ts,
        device_id,
        accel_x: r.i16s(ACCEL_SAMPLES),
        accel_y: r.i16s(ACCEL_SAMPLES),
        accel_z: r.i16s(ACCEL_SAMPLES),
        ir: r.u16s(PPG_SAMPLES),
        red: r.u16s(PPG_SAMPLES),
        temp_wrist: r.u16s(TEMP_SAMPLES),
        temp_ambient: r.u16s(TEMP_SAMPLES),
    };
    // A CRC-valid packet can still carry a malformed id field.
    burst.validate()?;
    Ok(burst)
}
