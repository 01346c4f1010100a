//! Deterministic media generators.
//!
//! Each generator assembles a file byte by byte from a seed and reports the
//! text fields it planted (keyed the way `metascan` names fields) together
//! with the offset where the payload that must never change begins.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub bytes: Vec<u8>,
    /// Planted text fields as `(key, value)`, first occurrence per key.
    pub expected: Vec<(String, String)>,
    /// Start of the scan data (JPEG), audio (MP3) or `mdat` box (MP4).
    pub payload_offset: usize,
    pub payload_len: usize,
}

impl Fixture {
    pub fn payload(&self) -> &[u8] {
        &self.bytes[self.payload_offset..self.payload_offset + self.payload_len]
    }

    fn plant(&mut self, key: String, value: String) {
        if !self.expected.iter().any(|(k, _)| *k == key) {
            self.expected.push((key, value));
        }
    }
}

const WORDS: &[&str] =
    &["Bonn", "Test", "Köln", "Zürich", "harbour", "sunset", "<b>", "a&b", "\"quoted\"", "日本", "42", "x", ""];

fn text(rng: &mut StdRng, ascii_only: bool) -> String {
    let n = rng.gen_range(0..4);
    let mut parts = Vec::new();
    for _ in 0..n {
        let w = *WORDS.choose(rng).unwrap();
        if ascii_only && !w.is_ascii() {
            parts.push("plain");
        } else {
            parts.push(w);
        }
    }
    parts.join(" ")
}

fn random_bytes(rng: &mut StdRng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill(&mut v[..]);
    v
}

fn jpeg_segment(marker: u8, payload: &[u8]) -> Vec<u8> {
    let mut v = vec![0xFF, marker];
    v.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    v.extend_from_slice(payload);
    v
}

fn bim_block(id: u16, data: &[u8]) -> Vec<u8> {
    let mut v = b"8BIM".to_vec();
    v.extend_from_slice(&id.to_be_bytes());
    v.extend_from_slice(&[0, 0]); // empty name, padded to even
    v.extend_from_slice(&(data.len() as u32).to_be_bytes());
    v.extend_from_slice(data);
    if data.len() % 2 == 1 {
        v.push(0);
    }
    v
}

const IPTC_TEXT: &[u8] = &[5, 25, 40, 80, 90, 92, 95, 101, 105, 110, 115, 116, 120];

pub fn jpeg(seed: u64) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fx = Fixture {
        name: format!("gen-{seed}.jpg"),
        bytes: vec![0xFF, 0xD8],
        expected: vec![],
        payload_offset: 0,
        payload_len: 0,
    };
    fx.bytes.extend(jpeg_segment(0xE0, b"JFIF\0\x01\x01\x00\x00\x01\x00\x01\x00\x00"));
    if rng.gen_bool(0.3) {
        let mut exif = b"Exif\0\0".to_vec();
        let n = rng.gen_range(10..300);
        exif.extend(random_bytes(&mut rng, n));
        fx.bytes.extend(jpeg_segment(0xE1, &exif));
    }
    if rng.gen_bool(0.75) {
        let mut iim = vec![0x1C, 2, 0, 0, 2, 0, 4];
        for _ in 0..rng.gen_range(0..6) {
            let ds = *IPTC_TEXT.choose(&mut rng).unwrap();
            let value = text(&mut rng, false);
            iim.extend_from_slice(&[0x1C, 2, ds]);
            iim.extend_from_slice(&(value.len() as u16).to_be_bytes());
            iim.extend_from_slice(value.as_bytes());
            fx.plant(format!("iptc:2:{ds}"), value);
        }
        let mut app13 = b"Photoshop 3.0\0".to_vec();
        if rng.gen_bool(0.5) {
            app13.extend(bim_block(0x03ED, &random_bytes(&mut rng, 16)));
        }
        app13.extend(bim_block(0x0404, &iim));
        fx.bytes.extend(jpeg_segment(0xED, &app13));
    }
    let mut dqt = vec![0x00];
    dqt.extend(random_bytes(&mut rng, 64));
    fx.bytes.extend(jpeg_segment(0xDB, &dqt));
    fx.bytes.extend(jpeg_segment(0xC0, &[8, 0, 16, 0, 16, 1, 1, 0x11, 0]));
    let mut dht = vec![0x00];
    dht.extend(random_bytes(&mut rng, 28));
    fx.bytes.extend(jpeg_segment(0xC4, &dht));
    fx.bytes.extend(jpeg_segment(0xDA, &[1, 1, 0, 0, 0x3F, 0]));

    fx.payload_offset = fx.bytes.len();
    let mut rst = 0u8;
    for _ in 0..rng.gen_range(16..600) {
        let b: u8 = rng.gen();
        fx.bytes.push(b);
        if b == 0xFF {
            if rng.gen_bool(0.8) {
                fx.bytes.push(0x00);
            } else {
                fx.bytes.push(0xD0 + rst);
                rst = (rst + 1) % 8;
            }
        }
    }
    fx.payload_len = fx.bytes.len() - fx.payload_offset;
    fx.bytes.extend_from_slice(&[0xFF, 0xD9]);
    if rng.gen_bool(0.2) {
        let n = rng.gen_range(1..40);
        fx.bytes.extend(random_bytes(&mut rng, n));
    }
    fx
}

fn syncsafe(n: usize) -> [u8; 4] {
    [(n >> 21) as u8 & 0x7F, (n >> 14) as u8 & 0x7F, (n >> 7) as u8 & 0x7F, n as u8 & 0x7F]
}

fn encode_text(rng: &mut StdRng, version: u8, value: &str) -> Vec<u8> {
    let latin1 = value.chars().all(|c| (c as u32) < 0x100);
    let mut choices = vec![1u8];
    if latin1 {
        choices.push(0);
    }
    if version == 4 {
        choices.push(3);
    }
    let enc = *choices.choose(rng).unwrap();
    let mut out = vec![enc];
    match enc {
        0 => out.extend(value.chars().map(|c| c as u8)),
        1 => {
            out.extend_from_slice(&[0xFF, 0xFE]);
            out.extend(value.encode_utf16().flat_map(|u| u.to_le_bytes()));
        }
        _ => out.extend_from_slice(value.as_bytes()),
    }
    out
}

pub fn mp3(seed: u64) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fx =
        Fixture { name: format!("gen-{seed}.mp3"), bytes: vec![], expected: vec![], payload_offset: 0, payload_len: 0 };
    if rng.gen_bool(0.75) {
        let version = if rng.gen_bool(0.5) { 3 } else { 4 };
        let mut frames = Vec::new();
        for _ in 0..rng.gen_range(0..6) {
            let id = *["TIT2", "TPE1", "TALB", "TCON", "TYER", "COMM", "PRIV"].choose(&mut rng).unwrap();
            let value = text(&mut rng, false);
            let body = match id {
                "PRIV" => {
                    let mut b = b"owner\0".to_vec();
                    b.extend(random_bytes(&mut rng, 12));
                    b
                }
                "COMM" => {
                    let enc = encode_text(&mut rng, version, &value);
                    let mut b = vec![enc[0]];
                    b.extend_from_slice(b"eng");
                    // Empty description, terminated per encoding.
                    if enc[0] == 1 {
                        b.extend_from_slice(&[0xFF, 0xFE, 0, 0]);
                    } else {
                        b.push(0);
                    }
                    b.extend_from_slice(&enc[1..]);
                    fx.plant(format!("id3:{id}"), value);
                    b
                }
                _ => {
                    let b = encode_text(&mut rng, version, &value);
                    fx.plant(format!("id3:{id}"), value);
                    b
                }
            };
            frames.extend_from_slice(id.as_bytes());
            if version == 4 {
                frames.extend_from_slice(&syncsafe(body.len()));
            } else {
                frames.extend_from_slice(&(body.len() as u32).to_be_bytes());
            }
            frames.extend_from_slice(&[0, 0]);
            frames.extend(body);
        }
        let padding = rng.gen_range(0..64);
        frames.extend(std::iter::repeat_n(0, padding));
        fx.bytes.extend_from_slice(b"ID3");
        fx.bytes.extend_from_slice(&[version, 0, 0]);
        fx.bytes.extend_from_slice(&syncsafe(frames.len()));
        fx.bytes.extend(frames);
    }
    fx.payload_offset = fx.bytes.len();
    for _ in 0..rng.gen_range(1..5) {
        fx.bytes.extend_from_slice(&[0xFF, 0xFB, 0x90, 0x64]);
        fx.bytes.extend(random_bytes(&mut rng, 413));
    }
    fx.payload_len = fx.bytes.len() - fx.payload_offset;
    fx
}

fn mp4_box(kind: &[u8; 4], payload: &[u8]) -> Vec<u8> {
    let mut v = ((payload.len() + 8) as u32).to_be_bytes().to_vec();
    v.extend_from_slice(kind);
    v.extend_from_slice(payload);
    v
}

fn latin1_code(code: &str) -> [u8; 4] {
    let v: Vec<u8> = code.chars().map(|c| c as u8).collect();
    v.try_into().unwrap()
}

fn moov(rng: &mut StdRng, fx: &mut Fixture, chunk_offsets: &[u32]) -> Vec<u8> {
    let mut stco = vec![0, 0, 0, 0];
    stco.extend_from_slice(&(chunk_offsets.len() as u32).to_be_bytes());
    for off in chunk_offsets {
        stco.extend_from_slice(&off.to_be_bytes());
    }
    let stbl = [mp4_box(b"stsd", &random_bytes(rng, 24)), mp4_box(b"stco", &stco)].concat();
    let minf = mp4_box(b"stbl", &stbl);
    let mdia = [
        mp4_box(b"mdhd", &random_bytes(rng, 24)),
        mp4_box(b"hdlr", b"\0\0\0\0\0\0\0\0soun\0\0\0\0\0\0\0\0\0\0\0\0\0"),
        mp4_box(b"minf", &minf),
    ]
    .concat();
    let trak = [mp4_box(b"tkhd", &random_bytes(rng, 84)), mp4_box(b"mdia", &mdia)].concat();
    let mut body = [mp4_box(b"mvhd", &random_bytes(rng, 100)), mp4_box(b"trak", &trak)].concat();

    if rng.gen_bool(0.7) {
        let mut items = Vec::new();
        for _ in 0..rng.gen_range(0..5) {
            let code = *["©nam", "©ART", "©alb", "©cmt", "©day", "covr"].choose(rng).unwrap();
            if code == "covr" {
                let mut data = 13u32.to_be_bytes().to_vec();
                data.extend_from_slice(&[0; 4]);
                data.extend(random_bytes(rng, 20));
                items.extend(mp4_box(b"covr", &mp4_box(b"data", &data)));
                continue;
            }
            let value = text(rng, false);
            let mut data = 1u32.to_be_bytes().to_vec();
            data.extend_from_slice(&[0; 4]);
            data.extend_from_slice(value.as_bytes());
            items.extend(mp4_box(&latin1_code(code), &mp4_box(b"data", &data)));
            fx.plant(format!("mp4:{code}"), value);
        }
        let mut meta = vec![0, 0, 0, 0];
        meta.extend(mp4_box(b"hdlr", b"\0\0\0\0\0\0\0\0mdirappl\0\0\0\0\0\0\0\0\0"));
        meta.extend(mp4_box(b"ilst", &items));
        let mut udta = mp4_box(b"meta", &meta);
        if rng.gen_bool(0.3) {
            udta.extend(mp4_box(b"name", b"clip"));
        }
        body.extend(mp4_box(b"udta", &udta));
    }
    mp4_box(b"moov", &body)
}

pub fn mp4(seed: u64) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fx =
        Fixture { name: format!("gen-{seed}.mp4"), bytes: vec![], expected: vec![], payload_offset: 0, payload_len: 0 };
    fx.bytes.extend(mp4_box(b"ftyp", b"isom\0\0\x02\0isomiso2mp41"));
    let mdat_len = rng.gen_range(64..2048);
    let mdat_body = random_bytes(&mut rng, mdat_len);
    let chunks = rng.gen_range(1..6) as u32;
    let offsets_in_mdat: Vec<u32> = (0..chunks).map(|i| 8 + i * (mdat_len as u32 / chunks)).collect();

    if rng.gen_bool(0.5) {
        // Fast-start layout: moov before mdat. The chunk offsets depend on
        // moov's length, so build it twice.
        let mut probe = rng.clone();
        let mut scratch = fx.clone();
        let len = moov(&mut probe, &mut scratch, &offsets_in_mdat).len();
        let base = (fx.bytes.len() + len) as u32;
        let abs: Vec<u32> = offsets_in_mdat.iter().map(|o| o + base).collect();
        let m = moov(&mut rng, &mut fx, &abs);
        fx.bytes.extend(m);
        fx.payload_offset = fx.bytes.len();
        fx.bytes.extend(mp4_box(b"mdat", &mdat_body));
    } else {
        fx.payload_offset = fx.bytes.len();
        fx.bytes.extend(mp4_box(b"mdat", &mdat_body));
        let base = fx.payload_offset as u32;
        let abs: Vec<u32> = offsets_in_mdat.iter().map(|o| o + base).collect();
        let m = moov(&mut rng, &mut fx, &abs);
        fx.bytes.extend(m);
    }
    fx.payload_len = mdat_len + 8;
    fx
}

/// Chunk offsets of every `stco` table, found by a flat byte search.
pub fn stco_offsets(bytes: &[u8]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut i = 4;
    while i + 12 <= bytes.len() {
        if &bytes[i..i + 4] == b"stco" {
            let count = u32::from_be_bytes(bytes[i + 8..i + 12].try_into().unwrap()) as usize;
            for k in 0..count {
                let at = i + 12 + 4 * k;
                if at + 4 > bytes.len() {
                    break;
                }
                out.push(u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()));
            }
        }
        i += 1;
    }
    out
}

/// `count` fixtures of each format, in a fixed order.
pub fn corpus(count: u64) -> Vec<Fixture> {
    let mut out = Vec::new();
    for seed in 0..count {
        out.push(jpeg(seed));
        out.push(mp3(seed));
        out.push(mp4(seed));
    }
    out
}

/// One random mutation of `seed_file`: noise, truncation, byte flips, an
/// extreme value over a possible length field, a splice or a deletion.
pub fn mutate(rng: &mut StdRng, seed_file: &[u8]) -> Vec<u8> {
    let mut v = seed_file.to_vec();
    match rng.gen_range(0..6) {
        0 => {
            let n = rng.gen_range(0..256);
            (0..n).map(|_| rng.gen()).collect()
        }
        1 => {
            let cut = rng.gen_range(0..=v.len());
            v.truncate(cut);
            v
        }
        2 => {
            for _ in 0..rng.gen_range(1..8) {
                if !v.is_empty() {
                    let i = rng.gen_range(0..v.len());
                    v[i] = rng.gen();
                }
            }
            v
        }
        3 => {
            // Overwrite what may be a length or size field with an extreme value.
            if v.len() >= 4 {
                let i = rng.gen_range(0..v.len() - 3);
                let val: [u8; 4] = *[[0xFF; 4], [0; 4], [0, 0, 0, 1], [0x7F, 0xFF, 0xFF, 0xFF], [0, 0, 0, 7]]
                    .get(rng.gen_range(0..5))
                    .unwrap();
                v[i..i + 4].copy_from_slice(&val);
            }
            v
        }
        4 => {
            if !v.is_empty() {
                let a = rng.gen_range(0..v.len());
                let b = rng.gen_range(a..=v.len());
                let chunk = v[a..b].to_vec();
                let at = rng.gen_range(0..=v.len());
                v.splice(at..at, chunk);
            }
            v
        }
        _ => {
            if !v.is_empty() {
                let a = rng.gen_range(0..v.len());
                let b = rng.gen_range(a..=v.len());
                v.drain(a..b);
            }
            v
        }
    }
}
