//! Genome encoding of the layer-level backbone search space and decoding
//! into concrete architectures.
//!
//! Each of the 16 tunable backbone blocks carries four discrete decisions:
//! layer type (IBN or fused IBN), kernel size, output channel multiplier,
//! and expansion ratio. The full space has `32^16 = 2^80` points. Smaller
//! truncated skeletons are available for enumeration-based testing.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("genome key has {found} block tokens, expected {expected}")]
    WrongBlockCount { expected: usize, found: usize },
    #[error("malformed block token `{token}` at block {index}: {reason}")]
    BadToken {
        index: usize,
        token: String,
        reason: String,
    },
}

/// Block flavor: standard inverted bottleneck or its fused variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerType {
    Ibn,
    FusedIbn,
}

impl LayerType {
    pub const OPTIONS: [LayerType; 2] = [LayerType::Ibn, LayerType::FusedIbn];

    fn code(self) -> char {
        match self {
            LayerType::Ibn => 'I',
            LayerType::FusedIbn => 'F',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    K3,
    K5,
}

impl Kernel {
    pub const OPTIONS: [Kernel; 2] = [Kernel::K3, Kernel::K5];

    pub fn size(self) -> u32 {
        match self {
            Kernel::K3 => 3,
            Kernel::K5 => 5,
        }
    }
}

/// Output channel multiplier, stored as an exact rational so that
/// `base_channels * multiplier` is always computed in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelMultiplier {
    X0_50,
    X0_75,
    X1_00,
    X1_50,
}

impl ChannelMultiplier {
    pub const OPTIONS: [ChannelMultiplier; 4] = [
        ChannelMultiplier::X0_50,
        ChannelMultiplier::X0_75,
        ChannelMultiplier::X1_00,
        ChannelMultiplier::X1_50,
    ];

    /// (numerator, denominator); every denominator divides 8, so all
    /// multiple-of-8 base channel counts scale to exact integers.
    pub fn ratio(self) -> (u32, u32) {
        match self {
            ChannelMultiplier::X0_50 => (1, 2),
            ChannelMultiplier::X0_75 => (3, 4),
            ChannelMultiplier::X1_00 => (1, 1),
            ChannelMultiplier::X1_50 => (3, 2),
        }
    }

    pub fn as_f64(self) -> f64 {
        let (n, d) = self.ratio();
        f64::from(n) / f64::from(d)
    }

    fn code(self) -> &'static str {
        match self {
            ChannelMultiplier::X0_50 => "050",
            ChannelMultiplier::X0_75 => "075",
            ChannelMultiplier::X1_00 => "100",
            ChannelMultiplier::X1_50 => "150",
        }
    }

    pub fn apply(self, base_channels: u32) -> u32 {
        let (n, d) = self.ratio();
        debug_assert_eq!(base_channels * n % d, 0);
        base_channels * n / d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expansion {
    E3,
    E6,
}

impl Expansion {
    pub const OPTIONS: [Expansion; 2] = [Expansion::E3, Expansion::E6];

    pub fn ratio(self) -> u32 {
        match self {
            Expansion::E3 => 3,
            Expansion::E6 => 6,
        }
    }
}

/// The four per-block search decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerChoice {
    pub layer_type: LayerType,
    pub kernel: Kernel,
    pub multiplier: ChannelMultiplier,
    pub expansion: Expansion,
}

impl LayerChoice {
    /// Number of distinct decision fields per block.
    pub const FIELDS: usize = 4;
    /// Number of distinct choices per block (2 * 2 * 4 * 2).
    pub const CARDINALITY: u128 = 32;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        LayerChoice {
            layer_type: *LayerType::OPTIONS.choose(rng).unwrap(),
            kernel: *Kernel::OPTIONS.choose(rng).unwrap(),
            multiplier: *ChannelMultiplier::OPTIONS.choose(rng).unwrap(),
            expansion: *Expansion::OPTIONS.choose(rng).unwrap(),
        }
    }

    /// Resample field `field` (0..4) from its other values; never a no-op.
    fn mutate_field<R: Rng + ?Sized>(&mut self, field: usize, rng: &mut R) {
        match field {
            0 => {
                let alts: Vec<_> = LayerType::OPTIONS
                    .iter()
                    .copied()
                    .filter(|v| *v != self.layer_type)
                    .collect();
                self.layer_type = *alts.choose(rng).unwrap();
            }
            1 => {
                let alts: Vec<_> = Kernel::OPTIONS
                    .iter()
                    .copied()
                    .filter(|v| *v != self.kernel)
                    .collect();
                self.kernel = *alts.choose(rng).unwrap();
            }
            2 => {
                let alts: Vec<_> = ChannelMultiplier::OPTIONS
                    .iter()
                    .copied()
                    .filter(|v| *v != self.multiplier)
                    .collect();
                self.multiplier = *alts.choose(rng).unwrap();
            }
            3 => {
                let alts: Vec<_> = Expansion::OPTIONS
                    .iter()
                    .copied()
                    .filter(|v| *v != self.expansion)
                    .collect();
                self.expansion = *alts.choose(rng).unwrap();
            }
            _ => unreachable!("field index out of range"),
        }
    }

    fn token(&self) -> String {
        format!(
            "{}{}m{}e{}",
            self.layer_type.code(),
            self.kernel.size(),
            self.multiplier.code(),
            self.expansion.ratio()
        )
    }

    fn parse_token(index: usize, token: &str) -> Result<Self, KeyError> {
        let bad = |reason: &str| KeyError::BadToken {
            index,
            token: token.to_string(),
            reason: reason.to_string(),
        };
        let bytes = token.as_bytes();
        if bytes.len() != 8 {
            return Err(bad("expected 8 characters, e.g. F3m100e6"));
        }
        let layer_type = match bytes[0] {
            b'I' => LayerType::Ibn,
            b'F' => LayerType::FusedIbn,
            _ => return Err(bad("layer type must be I or F")),
        };
        let kernel = match bytes[1] {
            b'3' => Kernel::K3,
            b'5' => Kernel::K5,
            _ => return Err(bad("kernel must be 3 or 5")),
        };
        if bytes[2] != b'm' {
            return Err(bad("expected `m` before multiplier"));
        }
        let multiplier = match &token[3..6] {
            "050" => ChannelMultiplier::X0_50,
            "075" => ChannelMultiplier::X0_75,
            "100" => ChannelMultiplier::X1_00,
            "150" => ChannelMultiplier::X1_50,
            _ => return Err(bad("multiplier must be 050, 075, 100, or 150")),
        };
        if bytes[6] != b'e' {
            return Err(bad("expected `e` before expansion"));
        }
        let expansion = match bytes[7] {
            b'3' => Expansion::E3,
            b'6' => Expansion::E6,
            _ => return Err(bad("expansion must be 3 or 6")),
        };
        Ok(LayerChoice {
            layer_type,
            kernel,
            multiplier,
            expansion,
        })
    }
}

/// A point in the search space: one `LayerChoice` per tunable block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    choices: Vec<LayerChoice>,
}

impl Genome {
    pub fn new(choices: Vec<LayerChoice>) -> Self {
        Genome { choices }
    }

    pub fn choices(&self) -> &[LayerChoice] {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// Canonical injective key, one 8-char token per block joined by `-`.
    pub fn key(&self) -> String {
        self.choices
            .iter()
            .map(LayerChoice::token)
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parse_key(key: &str, expected_blocks: usize) -> Result<Self, KeyError> {
        let tokens: Vec<&str> = key.split('-').collect();
        if tokens.len() != expected_blocks {
            return Err(KeyError::WrongBlockCount {
                expected: expected_blocks,
                found: tokens.len(),
            });
        }
        let choices = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| LayerChoice::parse_token(i + 1, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Genome { choices })
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Fixed per-block backbone constants: base output channels and strides,
/// plus the stem convolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSkeleton {
    base_channels: Vec<u32>,
    strides: Vec<u32>,
}

/// Stem: Conv2D, stride 2, kernel 3, 32 filters.
pub const STEM_STRIDE: u32 = 2;
pub const STEM_KERNEL: u32 = 3;
pub const STEM_FILTERS: u32 = 32;

const FULL_BASE_CHANNELS: [u32; 16] = [
    16, 24, 24, 40, 40, 80, 80, 80, 112, 112, 112, 192, 192, 192, 192, 320,
];
const FULL_STRIDES: [u32; 16] = [1, 2, 1, 2, 1, 2, 1, 1, 1, 1, 1, 2, 1, 1, 1, 1];

impl BackboneSkeleton {
    /// The 16-block backbone skeleton.
    pub fn full() -> Self {
        BackboneSkeleton {
            base_channels: FULL_BASE_CHANNELS.to_vec(),
            strides: FULL_STRIDES.to_vec(),
        }
    }

    /// First `blocks` blocks of the full skeleton; test hook for
    /// enumerable spaces.
    pub fn truncated(blocks: usize) -> Self {
        assert!((1..=16).contains(&blocks), "blocks must be in 1..=16");
        BackboneSkeleton {
            base_channels: FULL_BASE_CHANNELS[..blocks].to_vec(),
            strides: FULL_STRIDES[..blocks].to_vec(),
        }
    }

    pub fn blocks(&self) -> usize {
        self.base_channels.len()
    }

    pub fn base_channels(&self) -> &[u32] {
        &self.base_channels
    }

    pub fn strides(&self) -> &[u32] {
        &self.strides
    }

    /// Exact cardinality of the genome space over this skeleton.
    pub fn space_size(&self) -> u128 {
        LayerChoice::CARDINALITY.pow(self.blocks() as u32)
    }

    /// Sample every decision field independently and uniformly.
    pub fn random_genome<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        Genome {
            choices: (0..self.blocks()).map(|_| LayerChoice::sample(rng)).collect(),
        }
    }

    /// Resample exactly one decision field, chosen uniformly among all
    /// `4 * blocks` fields, from that field's other values.
    pub fn mutate<R: Rng + ?Sized>(&self, parent: &Genome, rng: &mut R) -> Genome {
        assert_eq!(parent.len(), self.blocks(), "genome/skeleton block mismatch");
        let mut child = parent.clone();
        let field_count = self.blocks() * LayerChoice::FIELDS;
        let which = rng.gen_range(0..field_count);
        let block = which / LayerChoice::FIELDS;
        let field = which % LayerChoice::FIELDS;
        child.choices[block].mutate_field(field, rng);
        child
    }

    /// Decode into a concrete architecture. The stem is prepended, strides
    /// come from the skeleton, filters are exact products, and the first
    /// block's expansion is forced to 1 regardless of the genome.
    pub fn decode(&self, genome: &Genome) -> Architecture {
        assert_eq!(genome.len(), self.blocks(), "genome/skeleton block mismatch");
        let mut rows = Vec::with_capacity(self.blocks() + 1);
        rows.push(ArchRow {
            index: 0,
            layer: LayerKind::Conv2d,
            stride: STEM_STRIDE,
            kernel: STEM_KERNEL,
            filters: STEM_FILTERS,
            expansion: None,
        });
        for (i, choice) in genome.choices.iter().enumerate() {
            let expansion = if i == 0 { 1 } else { choice.expansion.ratio() };
            rows.push(ArchRow {
                index: i + 1,
                layer: match choice.layer_type {
                    LayerType::Ibn => LayerKind::Ibn,
                    LayerType::FusedIbn => LayerKind::FusedIbn,
                },
                stride: self.strides[i],
                kernel: choice.kernel.size(),
                filters: choice.multiplier.apply(self.base_channels[i]),
                expansion: Some(expansion),
            });
        }
        Architecture { rows }
    }

    /// Iterate the whole space in lexicographic order; only sensible for
    /// small truncated skeletons.
    pub fn enumerate(&self) -> impl Iterator<Item = Genome> + '_ {
        let blocks = self.blocks();
        let total = self.space_size();
        assert!(total <= 1 << 20, "space too large to enumerate");
        (0..total as u64).map(move |mut n| {
            let mut choices = Vec::with_capacity(blocks);
            for _ in 0..blocks {
                let lt = LayerType::OPTIONS[(n % 2) as usize];
                n /= 2;
                let k = Kernel::OPTIONS[(n % 2) as usize];
                n /= 2;
                let m = ChannelMultiplier::OPTIONS[(n % 4) as usize];
                n /= 4;
                let e = Expansion::OPTIONS[(n % 2) as usize];
                n /= 2;
                choices.push(LayerChoice {
                    layer_type: lt,
                    kernel: k,
                    multiplier: m,
                    expansion: e,
                });
            }
            Genome { choices }
        })
    }
}

/// Concrete layer kind in a decoded architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d,
    Ibn,
    FusedIbn,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "Conv2D",
            LayerKind::Ibn => "IBN",
            LayerKind::FusedIbn => "FusedIBN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Conv2D" => Some(LayerKind::Conv2d),
            "IBN" => Some(LayerKind::Ibn),
            "FusedIBN" => Some(LayerKind::FusedIbn),
            _ => None,
        }
    }
}

/// One decoded layer row with the six published columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchRow {
    pub index: usize,
    pub layer: LayerKind,
    pub stride: u32,
    pub kernel: u32,
    pub filters: u32,
    pub expansion: Option<u32>,
}

/// A decoded backbone: the stem row followed by one row per block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub rows: Vec<ArchRow>,
}

impl Architecture {
    /// Structured-text export: header plus one comma-separated record per
    /// row; empty expansion field for the stem.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,layer,stride,kernel,filters,expansion\n");
        for row in &self.rows {
            let exp = row.expansion.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.index,
                row.layer.name(),
                row.stride,
                row.kernel,
                row.filters,
                exp
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty architecture file")?;
        if header.trim() != "index,layer,stride,kernel,filters,expansion" {
            return Err(format!("unexpected architecture header `{header}`"));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(format!("line {}: expected 6 fields", lineno + 2));
            }
            let parse_u32 = |s: &str, what: &str| {
                s.parse::<u32>()
                    .map_err(|_| format!("line {}: bad {what} `{s}`", lineno + 2))
            };
            let expansion = if fields[5].is_empty() {
                None
            } else {
                Some(parse_u32(fields[5], "expansion")?)
            };
            rows.push(ArchRow {
                index: fields[0]
                    .parse()
                    .map_err(|_| format!("line {}: bad index `{}`", lineno + 2, fields[0]))?,
                layer: LayerKind::parse(fields[1])
                    .ok_or_else(|| format!("line {}: bad layer `{}`", lineno + 2, fields[1]))?,
                stride: parse_u32(fields[2], "stride")?,
                kernel: parse_u32(fields[3], "kernel")?,
                filters: parse_u32(fields[4], "filters")?,
                expansion,
            });
        }
        Ok(Architecture { rows })
    }
}
