//! Two-description block code built on the annealer and the lossless coders.
//!
//! The encoder anneals a triple `(x̂1, x̂2, x̂0)`, codes `x̂1` into message 1
//! and `x̂2` into message 2, then codes `x̂0` conditionally on both side
//! reconstructions. That refinement stream is cut at bit `⌈θ·L⌉`: the head
//! rides in message 1 and the tail in message 2. Side decoders ignore the
//! fragment; the central decoder rejoins the two halves.
//!
//! # Message layout
//!
//! All integers little-endian:
//!
//! ```text
//! role u8 | θ numerator u32 | θ denominator u32 | fragment index u8
//!   | refinement digest [u8; 4] | side Bitstream
//!   | fragment bit-length u32 | fragment bytes
//! ```
//!
//! The digest is the first 4 bytes of the SHA-256 of the whole refinement
//! stream; it ties the two fragments to one encoding.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anneal::{anneal, AnnealError, AnnealReport, AnnealSchedule};
use crate::codec::{
    decode_conditional, decode_sequence, encode_conditional, encode_sequence, Bitstream,
    CodecError, StreamRole,
};
use crate::energy::{average_distortion, DistortionMeasure, EnergyError, LagrangianWeights};
use crate::stats::{CountMatrix, JointCountMatrix, Sequence, StatsError};

/// Fixed bytes of a message container outside its side stream and fragment.
pub const CONTAINER_LEN: usize = 1 + 4 + 4 + 1 + 4 + 4;
pub const THETA_DENOMINATOR: u32 = 1_000_000;

/// Tolerance of the rate lower-bound check.
pub const RATE_CHECK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Anneal(#[from] AnnealError),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("fragment mismatch: {0}")]
    FragmentMismatch(String),

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("split fraction must lie in [0, 1], got {0}")]
    InvalidTheta(f64),

    #[error("expected message {expected}, got message {got}")]
    WrongMessage { expected: u8, got: u8 },

    #[error("refinement stream of {0} bits exceeds the 2^32-bit fragment limit")]
    RefinementTooLarge(u64),
}

impl From<EnergyError> for PipelineError {
    fn from(e: EnergyError) -> Self {
        PipelineError::Anneal(e.into())
    }
}

impl From<StatsError> for PipelineError {
    fn from(e: StatsError) -> Self {
        PipelineError::Anneal(EnergyError::from(e).into())
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Everything the encoder needs besides the source block.
#[derive(Debug, Clone, PartialEq)]
pub struct MdParams {
    pub weights: LagrangianWeights,
    pub distortion: DistortionMeasure,
    pub k: usize,
    pub k1: usize,
    pub schedule: AnnealSchedule,
    pub iterations: u64,
    pub theta: f64,
    pub seed: u64,
}

/// A bit-aligned slice of the refinement stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub bytes: Vec<u8>,
    pub bit_len: u32,
}

fn bit(bytes: &[u8], i: u64) -> bool {
    bytes[(i / 8) as usize] >> (7 - i % 8) & 1 == 1
}

fn collect_bits(bits: impl Iterator<Item = bool>, len: u64) -> Fragment {
    let mut bytes = vec![0u8; len.div_ceil(8) as usize];
    let len = u32::try_from(len).expect("length checked by caller");
    for (i, b) in bits.enumerate() {
        if b {
            bytes[i / 8] |= 0x80 >> (i % 8);
        }
    }
    Fragment { bytes, bit_len: len }
}

/// Splits `bytes` (as an MSB-first bit string) after `head` bits.
fn split_bits(bytes: &[u8], head: u64) -> (Fragment, Fragment) {
    let total = 8 * bytes.len() as u64;
    (
        collect_bits((0..head).map(|i| bit(bytes, i)), head),
        collect_bits((head..total).map(|i| bit(bytes, i)), total - head),
    )
}

fn join_bits(a: &Fragment, b: &Fragment) -> Vec<u8> {
    let bits = (0..a.bit_len)
        .map(|i| bit(&a.bytes, i as u64))
        .chain((0..b.bit_len).map(|i| bit(&b.bytes, i as u64)));
    collect_bits(bits, a.bit_len as u64 + b.bit_len as u64).bytes
}

fn digest(bytes: &[u8]) -> [u8; 4] {
    let hash = Sha256::digest(bytes);
    hash[..4].try_into().expect("sha256 is 32 bytes")
}

/// One of the two descriptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdMessage {
    /// 1 or 2.
    pub role: u8,
    pub theta_num: u32,
    pub theta_den: u32,
    /// 0 for the head of the refinement stream, 1 for the tail.
    pub fragment_index: u8,
    pub refinement_digest: [u8; 4],
    pub side: Bitstream,
    pub fragment: Fragment,
}

impl MdMessage {
    /// Container, side stream and fragment bits; excludes the padding of the
    /// fragment's last byte.
    pub fn bits(&self) -> u64 {
        8 * CONTAINER_LEN as u64 + self.side.total_bits() + self.fragment.bit_len as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.role);
        out.extend_from_slice(&self.theta_num.to_le_bytes());
        out.extend_from_slice(&self.theta_den.to_le_bytes());
        out.push(self.fragment_index);
        out.extend_from_slice(&self.refinement_digest);
        self.side.write_to(&mut out);
        out.extend_from_slice(&self.fragment.bit_len.to_le_bytes());
        out.extend_from_slice(&self.fragment.bytes);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |m: &str| PipelineError::Malformed(m.to_string());
        let fixed = CONTAINER_LEN - 4;
        if bytes.len() < fixed {
            return Err(malformed("message shorter than its header"));
        }
        let u32_at = |b: &[u8], i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let role = bytes[0];
        if role != 1 && role != 2 {
            return Err(malformed("role must be 1 or 2"));
        }
        let (theta_num, theta_den) = (u32_at(bytes, 1), u32_at(bytes, 5));
        if theta_den == 0 || theta_num > theta_den {
            return Err(malformed("split fraction outside [0, 1]"));
        }
        let fragment_index = bytes[9];
        let refinement_digest = bytes[10..14].try_into().unwrap();
        let (side, used) = Bitstream::parse(&bytes[fixed..])?;
        let rest = &bytes[fixed + used..];
        if rest.len() < 4 {
            return Err(malformed("missing fragment length"));
        }
        let bit_len = u32_at(rest, 0);
        if rest.len() - 4 != bit_len.div_ceil(8) as usize {
            return Err(malformed("fragment length disagrees with its bytes"));
        }
        Ok(Self {
            role,
            theta_num,
            theta_den,
            fragment_index,
            refinement_digest,
            side,
            fragment: Fragment {
                bytes: rest[4..].to_vec(),
                bit_len,
            },
        })
    }
}

/// Realised rates and the empirical quantities they are compared against.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateReport {
    pub n: usize,
    /// Bits per symbol of message 1, headers included.
    pub r1: f64,
    pub r2: f64,
    pub h1: f64,
    pub h2: f64,
    /// `H_{k,k1}(x̂0 | x̂1, x̂2)`.
    pub h0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d0: f64,
    /// `R1 + R2 − (h1 + h2 + h0)`.
    pub slack: f64,
}

/// Margins of `R1 ≥ H(x̂1)`, `R2 ≥ H(x̂2)`, `R1 + R2 ≥ H(x̂1) + H(x̂2) + H(x̂0|x̂1,x̂2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateCheck {
    pub passed: bool,
    pub margin_r1: f64,
    pub margin_r2: f64,
    pub margin_sum: f64,
}

impl RateCheck {
    pub fn margins(&self) -> [f64; 3] {
        [self.margin_r1, self.margin_r2, self.margin_sum]
    }
}

/// Realised rates may never undercut the empirical entropies they code.
pub fn check_rate_lower_bounds(report: &RateReport) -> RateCheck {
    let margin_r1 = report.r1 - report.h1;
    let margin_r2 = report.r2 - report.h2;
    let margin_sum = report.r1 + report.r2 - (report.h1 + report.h2 + report.h0);
    RateCheck {
        passed: [margin_r1, margin_r2, margin_sum]
            .iter()
            .all(|&m| m >= -RATE_CHECK_EPS),
        margin_r1,
        margin_r2,
        margin_sum,
    }
}

#[derive(Debug, Clone)]
pub struct MdEncoding {
    pub m1: MdMessage,
    pub m2: MdMessage,
    pub anneal: AnnealReport,
    pub rates: RateReport,
}

fn theta_fraction(theta: f64) -> Result<(u32, u32)> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(PipelineError::InvalidTheta(theta));
    }
    Ok(((theta * THETA_DENOMINATOR as f64).round() as u32, THETA_DENOMINATOR))
}

fn head_bits(total: u64, num: u32, den: u32) -> u64 {
    (total as u128 * num as u128).div_ceil(den as u128) as u64
}

/// Anneals `x` and packages the resulting triple into two messages.
pub fn md_encode(x: &Sequence, params: &MdParams) -> Result<MdEncoding> {
    let report = anneal(
        x,
        &params.weights,
        &params.distortion,
        params.k,
        params.k1,
        &params.schedule,
        params.iterations,
        params.seed,
    )?;
    let (m1, m2, rates) = package_triple(
        x,
        &report.y,
        &report.z,
        &report.w,
        &params.distortion,
        params.k,
        params.k1,
        params.theta,
    )?;
    Ok(MdEncoding {
        m1,
        m2,
        anneal: report,
        rates,
    })
}

/// Codes a given triple into two messages and reports the realised rates.
#[allow(clippy::too_many_arguments)]
pub fn package_triple(
    x: &Sequence,
    x1: &Sequence,
    x2: &Sequence,
    x0: &Sequence,
    distortion: &DistortionMeasure,
    k: usize,
    k1: usize,
    theta: f64,
) -> Result<(MdMessage, MdMessage, RateReport)> {
    let (theta_num, theta_den) = theta_fraction(theta)?;
    let side1 = encode_sequence(x1, k)?.with_role(StreamRole::Side1);
    let side2 = encode_sequence(x2, k)?.with_role(StreamRole::Side2);
    let refinement = encode_conditional(x0, x1, x2, k, k1)?.to_bytes();
    let total = 8 * refinement.len() as u64;
    if total > u32::MAX as u64 {
        return Err(PipelineError::RefinementTooLarge(total));
    }
    let (head, tail) = split_bits(&refinement, head_bits(total, theta_num, theta_den));
    let refinement_digest = digest(&refinement);
    let message = |role: u8, side: Bitstream, fragment: Fragment| MdMessage {
        role,
        theta_num,
        theta_den,
        fragment_index: role - 1,
        refinement_digest,
        side,
        fragment,
    };
    let m1 = message(1, side1, head);
    let m2 = message(2, side2, tail);

    let n = x.len();
    let h1 = CountMatrix::build(x1, k)?.conditional_entropy();
    let h2 = CountMatrix::build(x2, k)?.conditional_entropy();
    let h0 = JointCountMatrix::build(x0, x1, x2, k, k1)?.conditional_entropy();
    let r1 = m1.bits() as f64 / n as f64;
    let r2 = m2.bits() as f64 / n as f64;
    let rates = RateReport {
        n,
        r1,
        r2,
        h1,
        h2,
        h0,
        d1: average_distortion(x, x1, distortion)?,
        d2: average_distortion(x, x2, distortion)?,
        d0: average_distortion(x, x0, distortion)?,
        slack: r1 + r2 - (h1 + h2 + h0),
    };
    Ok((m1, m2, rates))
}

/// Side decoder: recovers `x̂1` from message 1 or `x̂2` from message 2.
pub fn md_decode_side(message: &MdMessage, which: u8) -> Result<Sequence> {
    if message.role != which {
        return Err(PipelineError::WrongMessage {
            expected: which,
            got: message.role,
        });
    }
    let expected_role = if which == 1 {
        StreamRole::Side1
    } else {
        StreamRole::Side2
    };
    if message.side.header.role != expected_role {
        return Err(CodecError::HeaderMismatch(format!(
            "side stream tagged {:?}",
            message.side.header.role
        ))
        .into());
    }
    Ok(decode_sequence(&message.side, message.side.header.k as usize)?)
}

/// Central decoder: both side reconstructions, then the refinement.
pub fn md_decode_central(m1: &MdMessage, m2: &MdMessage) -> Result<Sequence> {
    let mismatch = |m: &str| Err(PipelineError::FragmentMismatch(m.to_string()));
    if (m1.role, m2.role) != (1, 2) || (m1.fragment_index, m2.fragment_index) != (0, 1) {
        return mismatch("messages are not a (head, tail) pair");
    }
    if (m1.theta_num, m1.theta_den) != (m2.theta_num, m2.theta_den) {
        return mismatch("split fractions differ");
    }
    if m1.refinement_digest != m2.refinement_digest {
        return mismatch("messages come from different encodings");
    }
    let total = m1.fragment.bit_len as u64 + m2.fragment.bit_len as u64;
    if !total.is_multiple_of(8) || m1.fragment.bit_len as u64 != head_bits(total, m1.theta_num, m1.theta_den) {
        return mismatch("fragment lengths do not partition the refinement stream");
    }
    let joined = join_bits(&m1.fragment, &m2.fragment);
    if digest(&joined) != m1.refinement_digest {
        return mismatch("reassembled refinement fails its digest");
    }
    let x1 = md_decode_side(m1, 1)?;
    let x2 = md_decode_side(m2, 2)?;
    let refinement = Bitstream::from_bytes(&joined)?;
    let (k, k1) = (refinement.header.k as usize, refinement.header.k1 as usize);
    Ok(decode_conditional(&refinement, &x1, &x2, k, k1)?)
}
