//! Encode, decode and account for an instance message.

use coopercept::wire::{decode, encode, read_msgdump, write_msgdump, Accounting, AgentMessage, InstanceRecord, WireError};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 8;
    let records = (0..3)
        .map(|i| InstanceRecord {
            feature: (0..d).map(|j| (i * d + j) as f32 * 0.125).collect(),
            grid_x: 320 + i as i32,
            grid_y: -110,
            score: 0.9 - 0.1 * i as f32,
        })
        .collect();
    let msg = AgentMessage::new(1, 42, d, records)?;
    let bytes = encode(&msg);
    println!("encoded {} records of d={} into {} bytes", msg.records.len(), d, bytes.len());
    println!("feature-only accounting: {} bytes", Accounting::FeatureOnly.bytes(&msg));
    assert_eq!(decode(&bytes)?, msg);

    match decode(&bytes[..bytes.len() - 1]) {
        Err(WireError::LengthMismatch { expected, actual }) => println!("truncated: expected {expected}, got {actual}"),
        other => println!("unexpected: {other:?}"),
    }
    let mut bumped = bytes.clone();
    bumped[0] = 9;
    println!("bad version: {}", decode(&bumped).unwrap_err());

    let mut dump = Vec::new();
    write_msgdump(&mut dump, &[msg.clone(), msg])?;
    println!("msgdump with 2 messages: {} bytes, read back {}", dump.len(), read_msgdump(&dump[..])?.len());
    Ok(())
}
