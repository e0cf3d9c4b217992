//! Adaptive context-model arithmetic coding of reconstruction sequences.
//!
//! Symbols are coded left to right with a 32-bit range coder (carry
//! propagation through a cached byte, as in LZMA). Each context owns an
//! add-half estimator: every symbol starts at count 1/2 and gains 1 per
//! occurrence. Counts are stored doubled so they stay integral.
//!
//! Plain streams use the order-`k` past of the sequence, truncated at the
//! start. Conditional streams code `w` with contexts
//! `(w_{i-k}^{i-1}, y_{i-k1}^{i+k1}, z_{i-k1}^{i+k1})`; the `y`/`z` windows wrap
//! cyclically since the decoder holds both side sequences in full.
//!
//! # Wire format
//!
//! All integers little-endian:
//!
//! ```text
//! "MDSC" | version u8 | role u8 | n u32 | k u8 | k1 u8 | A u8 | bit_len u64 | payload
//! ```
//!
//! The payload is `ceil(bit_len / 8)` bytes. It ends with a 16-bit check
//! value coded after the last symbol, so a wrong `n` or a damaged payload is
//! reported instead of silently decoding garbage.

use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::stats::{Sequence, StatsError, Symbol};

pub const MAGIC: [u8; 4] = *b"MDSC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;

const TOP: u32 = 1 << 24;
const MAX_TOTAL: u32 = 1 << 16;
const CHECK_VALUE: u32 = 0xA5C3;
/// Zero bytes the encoder leaves off the end of every payload.
const IMPLICIT_TAIL: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("stream truncated")]
    Truncated,

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// What a stream describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamRole {
    Plain = 0,
    Side1 = 1,
    Side2 = 2,
    Refinement = 3,
}

impl TryFrom<u8> for StreamRole {
    type Error = CodecError;

    fn try_from(v: u8) -> Result<Self> {
        Ok(match v {
            0 => StreamRole::Plain,
            1 => StreamRole::Side1,
            2 => StreamRole::Side2,
            3 => StreamRole::Refinement,
            _ => return Err(CodecError::HeaderMismatch(format!("unknown role {v}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub role: StreamRole,
    pub n: u32,
    pub k: u8,
    pub k1: u8,
    pub alphabet: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    pub header: StreamHeader,
    pub payload: Vec<u8>,
    pub bit_len: u64,
}

impl Bitstream {
    pub fn with_role(mut self, role: StreamRole) -> Self {
        self.header.role = role;
        self
    }

    /// Payload bits per source symbol.
    pub fn payload_rate(&self) -> f64 {
        self.bit_len as f64 / self.header.n as f64
    }

    /// Header plus payload bits.
    pub fn total_bits(&self) -> u64 {
        8 * HEADER_LEN as u64 + self.bit_len
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        let h = &self.header;
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(h.role as u8);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&[h.k, h.k1, h.alphabet]);
        out.extend_from_slice(&self.bit_len.to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses one stream from the front of `bytes`; returns it with the
    /// number of bytes consumed.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Truncated);
        }
        if bytes[..4] != MAGIC {
            return Err(CodecError::HeaderMismatch("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(CodecError::HeaderMismatch(format!("version {}", bytes[4])));
        }
        let role = StreamRole::try_from(bytes[5])?;
        let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let (k, k1, alphabet) = (bytes[10], bytes[11], bytes[12]);
        let bit_len = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
        let len = bit_len.div_ceil(8) as usize;
        let end = HEADER_LEN
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or(CodecError::Truncated)?;
        Ok((
            Self {
                header: StreamHeader {
                    role,
                    n,
                    k,
                    k1,
                    alphabet,
                },
                payload: bytes[HEADER_LEN..end].to_vec(),
                bit_len,
            },
            end,
        ))
    }

    /// Parses a buffer holding exactly one stream.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (b, used) = Self::parse(bytes)?;
        if used != bytes.len() {
            return Err(CodecError::HeaderMismatch(format!(
                "{} trailing bytes",
                bytes.len() - used
            )));
        }
        Ok(b)
    }
}

struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl RangeEncoder {
    fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        let r = self.range / total;
        self.low += r as u64 * cum as u64;
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Terminates with the multiple of 2^24 inside `[low, low + range)`, so
    /// its 3 low bytes are zero and left implicit. The first byte out is
    /// always zero (`low + range` starts below 2^32, so no carry reaches it)
    /// and is dropped too.
    fn finish(mut self) -> Vec<u8> {
        self.low = (self.low + 0xFF_FFFF) & !0xFF_FFFF;
        for _ in 0..2 {
            self.shift_low();
        }
        debug_assert_eq!(self.out[0], 0);
        self.out.remove(0);
        self.out
    }
}

struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    /// Bytes past the payload read as the encoder's implicit zeros.
    fn next_byte(&mut self) -> Result<u8> {
        if self.pos >= self.data.len() + IMPLICIT_TAIL {
            return Err(CodecError::Truncated);
        }
        let b = self.data.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        Ok(b)
    }

    /// Target frequency in `[0, total)`.
    fn peek(&self, total: u32) -> Result<(u32, u32)> {
        let r = self.range / total;
        let v = self.code / r;
        if v >= total {
            return Err(CodecError::DecodeFailure("code outside coder range".into()));
        }
        Ok((v, r))
    }

    fn consume(&mut self, r: u32, cum: u32, freq: u32) -> Result<()> {
        self.code -= r * cum;
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.data.len() + IMPLICIT_TAIL {
            return Err(CodecError::DecodeFailure(format!(
                "decoder stopped {} bytes from the payload end",
                self.data.len() as isize + IMPLICIT_TAIL as isize - self.pos as isize
            )));
        }
        Ok(())
    }
}

/// Per-context adaptive symbol counts (doubled add-half estimator).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextModel {
    alphabet: usize,
    counts: FxHashMap<u64, SmallVec<[u32; 4]>>,
}

impl ContextModel {
    pub fn new(alphabet: usize) -> Self {
        Self {
            alphabet,
            counts: FxHashMap::default(),
        }
    }

    fn column(&mut self, context: u64) -> &mut SmallVec<[u32; 4]> {
        let a = self.alphabet;
        self.counts
            .entry(context)
            .or_insert_with(|| SmallVec::from_elem(1, a))
    }

    /// Probability estimate of `symbol` in `context`.
    pub fn probability(&self, context: u64, symbol: Symbol) -> f64 {
        match self.counts.get(&context) {
            Some(col) => col[symbol as usize] as f64 / col.iter().sum::<u32>() as f64,
            None => 1.0 / self.alphabet as f64,
        }
    }

    /// Occurrence counts of a context (add-half offsets removed, before any
    /// rescaling).
    pub fn occurrences(&self, context: u64) -> Option<Vec<f64>> {
        self.counts
            .get(&context)
            .map(|col| col.iter().map(|&c| (c as f64 - 1.0) / 2.0).collect())
    }

    pub fn contexts(&self) -> usize {
        self.counts.len()
    }

    fn update(col: &mut SmallVec<[u32; 4]>, symbol: Symbol) {
        col[symbol as usize] += 2;
        if col.iter().sum::<u32>() > MAX_TOTAL {
            for c in col.iter_mut() {
                *c = c.div_ceil(2);
            }
        }
    }

    fn encode(&mut self, enc: &mut RangeEncoder, context: u64, symbol: Symbol) {
        let col = self.column(context);
        let cum: u32 = col[..symbol as usize].iter().sum();
        let total: u32 = col.iter().sum();
        enc.encode(cum, col[symbol as usize], total);
        Self::update(col, symbol);
    }

    fn decode(&mut self, dec: &mut RangeDecoder<'_>, context: u64) -> Result<Symbol> {
        let col = self.column(context);
        let total: u32 = col.iter().sum();
        let (target, r) = dec.peek(total)?;
        let mut cum = 0;
        let mut symbol = 0;
        for (s, &c) in col.iter().enumerate() {
            if target < cum + c {
                symbol = s;
                break;
            }
            cum += c;
        }
        dec.consume(r, cum, col[symbol])?;
        Self::update(col, symbol as Symbol);
        Ok(symbol as Symbol)
    }
}

fn encode_check(enc: &mut RangeEncoder) {
    enc.encode(CHECK_VALUE, 1, 1 << 16);
}

fn decode_check(dec: &mut RangeDecoder<'_>) -> Result<()> {
    let (got, r) = dec.peek(1 << 16)?;
    if got != CHECK_VALUE {
        return Err(CodecError::DecodeFailure("end-of-stream check failed".into()));
    }
    dec.consume(r, CHECK_VALUE, 1)
}

/// Context keys for a plain order-`k` stream.
struct PastContext {
    k: usize,
    alphabet: u64,
}

impl PastContext {
    fn new(k: usize, alphabet: usize) -> Result<Self> {
        let fits = (alphabet as u64)
            .checked_pow(k as u32)
            .and_then(|v| v.checked_mul(k as u64 + 1))
            .is_some();
        if !fits {
            return Err(CodecError::Unsupported(format!("order {k} too large for alphabet {alphabet}")));
        }
        Ok(Self {
            k,
            alphabet: alphabet as u64,
        })
    }

    /// Key of the truncated past `s[i-L..i]`, `L = min(i, k)`.
    #[inline]
    fn key(&self, s: &[Symbol], i: usize) -> u64 {
        let len = i.min(self.k);
        let packed = s[i - len..i]
            .iter()
            .fold(0u64, |key, &b| key * self.alphabet + b as u64);
        packed * (self.k as u64 + 1) + len as u64
    }
}

struct SideContext<'a> {
    past: PastContext,
    y: &'a Sequence,
    z: &'a Sequence,
    k1: usize,
    scale: u64,
}

impl<'a> SideContext<'a> {
    fn new(y: &'a Sequence, z: &'a Sequence, k: usize, k1: usize) -> Result<Self> {
        let a = y.alphabet_size();
        let past = PastContext::new(k, a)?;
        let win = 2 * k1 + 1;
        let scale = (a as u64)
            .checked_pow(win as u32)
            .filter(|&s| {
                (a as u64)
                    .checked_pow(k as u32)
                    .and_then(|p| p.checked_mul(k as u64 + 1))
                    .and_then(|p| p.checked_mul(s))
                    .and_then(|p| p.checked_mul(s))
                    .is_some()
            })
            .ok_or_else(|| CodecError::Unsupported(format!("context k={k}, k1={k1} too wide")))?;
        Ok(Self {
            past,
            y,
            z,
            k1,
            scale,
        })
    }

    #[inline]
    fn key(&self, w: &[Symbol], i: usize) -> u64 {
        let a = self.past.alphabet;
        let start = i as isize - self.k1 as isize;
        let window = |s: &Sequence| {
            (0..2 * self.k1 as isize + 1).fold(0u64, |key, j| key * a + s.at(start + j) as u64)
        };
        (self.past.key(w, i) * self.scale + window(self.y)) * self.scale + window(self.z)
    }
}

fn header_for(role: StreamRole, n: usize, k: usize, k1: usize, alphabet: usize) -> Result<StreamHeader> {
    let n = u32::try_from(n).map_err(|_| CodecError::Unsupported(format!("length {n}")))?;
    let narrow = |v: usize, what: &str| {
        u8::try_from(v).map_err(|_| CodecError::Unsupported(format!("{what} = {v}")))
    };
    Ok(StreamHeader {
        role,
        n,
        k: narrow(k, "k")?,
        k1: narrow(k1, "k1")?,
        alphabet: narrow(alphabet, "alphabet size")?,
    })
}

fn finish_stream(header: StreamHeader, enc: RangeEncoder) -> Bitstream {
    let payload = enc.finish();
    Bitstream {
        header,
        bit_len: 8 * payload.len() as u64,
        payload,
    }
}

fn check_header(b: &Bitstream, k: usize, k1: usize) -> Result<()> {
    let h = &b.header;
    if h.k as usize != k || h.k1 as usize != k1 {
        return Err(CodecError::HeaderMismatch(format!(
            "stream orders ({}, {}) differ from requested ({k}, {k1})",
            h.k, h.k1
        )));
    }
    if h.alphabet < 2 || h.n == 0 {
        return Err(CodecError::HeaderMismatch("empty stream parameters".into()));
    }
    if b.bit_len.div_ceil(8) != b.payload.len() as u64 {
        return Err(CodecError::HeaderMismatch("bit length disagrees with payload".into()));
    }
    Ok(())
}

pub(crate) fn encode_sequence_traced(
    s: &Sequence,
    k: usize,
    observe: &mut dyn FnMut(usize, &ContextModel),
) -> Result<Bitstream> {
    let header = header_for(StreamRole::Plain, s.len(), k, 0, s.alphabet_size())?;
    let ctx = PastContext::new(k, s.alphabet_size())?;
    let mut model = ContextModel::new(s.alphabet_size());
    let mut enc = RangeEncoder::new();
    let symbols = s.symbols();
    for (i, &sym) in symbols.iter().enumerate() {
        model.encode(&mut enc, ctx.key(symbols, i), sym);
        observe(i + 1, &model);
    }
    encode_check(&mut enc);
    Ok(finish_stream(header, enc))
}

pub(crate) fn decode_sequence_traced(
    b: &Bitstream,
    k: usize,
    observe: &mut dyn FnMut(usize, &ContextModel),
) -> Result<Sequence> {
    check_header(b, k, 0)?;
    if b.header.role == StreamRole::Refinement {
        return Err(CodecError::HeaderMismatch("refinement stream needs side information".into()));
    }
    let (n, alphabet) = (b.header.n as usize, b.header.alphabet as usize);
    let ctx = PastContext::new(k, alphabet)?;
    let mut model = ContextModel::new(alphabet);
    let mut dec = RangeDecoder::new(&b.payload)?;
    let mut symbols = Vec::with_capacity(n);
    for i in 0..n {
        let sym = model.decode(&mut dec, ctx.key(&symbols, i))?;
        symbols.push(sym);
        observe(i + 1, &model);
    }
    decode_check(&mut dec)?;
    dec.finish()?;
    Ok(Sequence::new(symbols, alphabet)?)
}

/// Codes `s` with an adaptive order-`k` context model.
pub fn encode_sequence(s: &Sequence, k: usize) -> Result<Bitstream> {
    encode_sequence_traced(s, k, &mut |_, _| {})
}

pub fn decode_sequence(b: &Bitstream, k: usize) -> Result<Sequence> {
    decode_sequence_traced(b, k, &mut |_, _| {})
}

fn check_side(y: &Sequence, z: &Sequence, n: usize, alphabet: usize, k1: usize) -> Result<()> {
    if y.len() != n || z.len() != n {
        return Err(StatsError::LengthMismatch(vec![n, y.len(), z.len()]).into());
    }
    if y.alphabet_size() != alphabet || z.alphabet_size() != alphabet {
        return Err(StatsError::AlphabetMismatch(vec![alphabet, y.alphabet_size(), z.alphabet_size()]).into());
    }
    if 2 * k1 + 1 > n {
        return Err(StatsError::InvalidOrder { k: 0, k1, n }.into());
    }
    Ok(())
}

/// Codes `w` given side sequences `y` and `z`.
pub fn encode_conditional(w: &Sequence, y: &Sequence, z: &Sequence, k: usize, k1: usize) -> Result<Bitstream> {
    check_side(y, z, w.len(), w.alphabet_size(), k1)?;
    let header = header_for(StreamRole::Refinement, w.len(), k, k1, w.alphabet_size())?;
    let ctx = SideContext::new(y, z, k, k1)?;
    let mut model = ContextModel::new(w.alphabet_size());
    let mut enc = RangeEncoder::new();
    let symbols = w.symbols();
    for (i, &sym) in symbols.iter().enumerate() {
        model.encode(&mut enc, ctx.key(symbols, i), sym);
    }
    encode_check(&mut enc);
    Ok(finish_stream(header, enc))
}

pub fn decode_conditional(b: &Bitstream, y: &Sequence, z: &Sequence, k: usize, k1: usize) -> Result<Sequence> {
    check_header(b, k, k1)?;
    if b.header.role != StreamRole::Refinement {
        return Err(CodecError::HeaderMismatch(format!("role {:?} is not a refinement", b.header.role)));
    }
    let (n, alphabet) = (b.header.n as usize, b.header.alphabet as usize);
    check_side(y, z, n, alphabet, k1).map_err(|e| CodecError::HeaderMismatch(e.to_string()))?;
    let ctx = SideContext::new(y, z, k, k1)?;
    let mut model = ContextModel::new(alphabet);
    let mut dec = RangeDecoder::new(&b.payload)?;
    let mut symbols = Vec::with_capacity(n);
    for i in 0..n {
        let sym = model.decode(&mut dec, ctx.key(&symbols, i))?;
        symbols.push(sym);
    }
    decode_check(&mut dec)?;
    dec.finish()?;
    Ok(Sequence::new(symbols, alphabet)?)
}
