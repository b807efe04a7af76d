//! Minimal LZ4 frame writer: stored blocks or literal-only sequences.
//! Produces valid frames without any match finding.

const MAGIC: u32 = 0x184D_2204;
// stays under the 64 KiB block limit even with literal-run overhead
const BLOCK_MAX: usize = 60 * 1024;

fn xxh32(input: &[u8], seed: u32) -> u32 {
    const P1: u32 = 2_654_435_761;
    const P2: u32 = 2_246_822_519;
    const P3: u32 = 3_266_489_917;
    const P4: u32 = 668_265_263;
    const P5: u32 = 374_761_393;
    assert!(input.len() < 16, "descriptor checksum only");
    let mut h = seed.wrapping_add(P5).wrapping_add(input.len() as u32);
    let mut rest = input;
    while rest.len() >= 4 {
        let w = u32::from_le_bytes(rest[..4].try_into().unwrap());
        h = h.wrapping_add(w.wrapping_mul(P3)).rotate_left(17).wrapping_mul(P4);
        rest = &rest[4..];
    }
    for &b in rest {
        h = h.wrapping_add((b as u32).wrapping_mul(P5)).rotate_left(11).wrapping_mul(P1);
    }
    h ^= h >> 15;
    h = h.wrapping_mul(P2);
    h ^= h >> 13;
    h = h.wrapping_mul(P3);
    h ^= h >> 16;
    h
}

fn frame_header(out: &mut Vec<u8>) {
    out.extend_from_slice(&MAGIC.to_le_bytes());
    // version 01, independent blocks, no checksums; 64 KiB max block
    let descriptor = [0x60u8, 0x40];
    out.extend_from_slice(&descriptor);
    out.push(((xxh32(&descriptor, 0) >> 8) & 0xff) as u8);
}

/// Frame whose blocks are all stored uncompressed.
pub fn frame_stored(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    frame_header(&mut out);
    for block in data.chunks(BLOCK_MAX) {
        out.extend_from_slice(&(block.len() as u32 | 0x8000_0000).to_le_bytes());
        out.extend_from_slice(block);
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    out
}

/// Frame whose blocks are "compressed" as a single literal run each.
pub fn frame_literals(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    frame_header(&mut out);
    for block in data.chunks(BLOCK_MAX) {
        let mut body = Vec::with_capacity(block.len() + 8);
        let n = block.len();
        if n >= 15 {
            body.push(0xf0);
            let mut rem = n - 15;
            while rem >= 255 {
                body.push(255);
                rem -= 255;
            }
            body.push(rem as u8);
        } else {
            body.push((n as u8) << 4);
        }
        body.extend_from_slice(block);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    out
}
