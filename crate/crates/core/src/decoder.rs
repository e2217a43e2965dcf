use serde::Serialize;

use crate::error::DecodeError;
use crate::hdrg::{hdrg_decode, hdrg_decode_traced, HdrgTrace, RegionParams};
use crate::init::{enhanced_hdrg_decode, init_step};
use crate::lattice::{ErrorConfig, NoiseParams, SyndromeSet};
use crate::sdrg::{sdrg_decode_traced, sdrg_decode_with, SdrgConfig, SdrgTrace};

/// A decoder and its options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Decoder {
    Hdrg,
    EnhancedHdrg { depth: RegionParams },
    Sdrg { bp_rounds: usize },
}

impl Decoder {
    /// Plain HDRG when `depth` is `None`.
    pub fn hdrg_with_init(depth: Option<RegionParams>) -> Self {
        match depth {
            Some(depth) => Decoder::EnhancedHdrg { depth },
            None => Decoder::Hdrg,
        }
    }

    pub fn decode(&self, w: &SyndromeSet, noise: NoiseParams) -> Result<ErrorConfig, DecodeError> {
        match *self {
            Decoder::Hdrg => hdrg_decode(w),
            Decoder::EnhancedHdrg { depth } => enhanced_hdrg_decode(w, Some(depth)),
            Decoder::Sdrg { bp_rounds } => sdrg_decode_with(w, noise, SdrgConfig { bp_rounds }),
        }
    }

    /// Like `decode`, also returning the decoder's internal levels. For the
    /// enhanced decoder the trace covers the HDRG run after initialization.
    pub fn decode_traced(&self, w: &SyndromeSet, noise: NoiseParams) -> Result<(ErrorConfig, DecodeTrace), DecodeError> {
        match *self {
            Decoder::Hdrg => hdrg_decode_traced(w).map(|(c, t)| (c, DecodeTrace::Hdrg(t))),
            Decoder::EnhancedHdrg { depth } => {
                let (residual, mut acc) = init_step(w, depth);
                let (rest, trace) = hdrg_decode_traced(&residual)?;
                acc.add_assign(&rest)?;
                Ok((acc, DecodeTrace::Hdrg(trace)))
            }
            Decoder::Sdrg { bp_rounds } => {
                sdrg_decode_traced(w, noise, SdrgConfig { bp_rounds }).map(|(c, t)| (c, DecodeTrace::Sdrg(t)))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Decoder::Hdrg => "hdrg".into(),
            Decoder::EnhancedHdrg { depth } => format!("hdrg+init({},{})", depth.r(), depth.s()),
            Decoder::Sdrg { bp_rounds } => format!("sdrg(bp={bp_rounds})"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeTrace {
    Hdrg(HdrgTrace),
    Sdrg(SdrgTrace),
}
