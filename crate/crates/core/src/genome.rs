//! Fixed-length binary direct encoding of body and brain.
//!
//! Layout (all fields unsigned, most significant bit first):
//!
//! | bits      | field                                       |
//! |-----------|---------------------------------------------|
//! | 0..3      | module count header: `2 + (value mod 8)`    |
//! | 3 + 36 i  | slot `i` for module `i`, `i` in `0..9`      |
//!
//! Each 36-bit slot:
//!
//! | offset | width | field                                   |
//! |--------|-------|-----------------------------------------|
//! | 0      | 4     | parent (`value mod i`)                  |
//! | 4      | 3     | parent face                             |
//! | 7      | 2     | orientation (`value mod 3`)             |
//! | 9      | 3     | actuation face                          |
//! | 12     | 8     | frequency, `value / 255` Hz             |
//! | 20     | 8     | amplitude, `value / 255`                |
//! | 28     | 8     | phase, `value / 256` of a period        |
//!
//! The root's parent, face and orientation fields are ignored. Slots past the
//! module count are carried along untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlGene;
use crate::error::{Error, Result};
use crate::geometry::{ModuleSpec, ATTACH_FACE, FACE_COUNT};

pub const HEADER_BITS: usize = 3;
pub const SLOT_BITS: usize = 36;
pub const MIN_MODULES: usize = 2;
pub const MAX_MODULES: usize = 9;
pub const GENOME_BITS: usize = HEADER_BITS + MAX_MODULES * SLOT_BITS;

const PARENT: (usize, usize) = (0, 4);
const FACE: (usize, usize) = (4, 3);
const ORIENTATION: (usize, usize) = (7, 2);
const ACTUATION: (usize, usize) = (9, 3);
const FREQUENCY: (usize, usize) = (12, 8);
const AMPLITUDE: (usize, usize) = (20, 8);
const PHASE: (usize, usize) = (28, 8);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome {
    bits: Vec<bool>,
}

/// Raw integer fields of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotGenes {
    pub parent_raw: u32,
    pub face_raw: u32,
    pub orientation_raw: u32,
    pub actuation_raw: u32,
    pub frequency_raw: u32,
    pub amplitude_raw: u32,
    pub phase_raw: u32,
}

impl Genome {
    pub fn zeros() -> Self {
        Self {
            bits: vec![false; GENOME_BITS],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.len() != GENOME_BITS {
            return Err(Error::InvalidArgument(format!(
                "genome must have {GENOME_BITS} bits, got {}",
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn hamming_distance(&self, other: &Genome) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    fn field(&self, start: usize, width: usize) -> u32 {
        self.bits[start..start + width]
            .iter()
            .fold(0, |acc, &b| (acc << 1) | u32::from(b))
    }

    fn set_field(&mut self, start: usize, width: usize, value: u32) {
        for k in 0..width {
            self.bits[start + k] = (value >> (width - 1 - k)) & 1 == 1;
        }
    }

    pub fn header(&self) -> u32 {
        self.field(0, HEADER_BITS)
    }

    pub fn set_header(&mut self, value: u32) {
        self.set_field(0, HEADER_BITS, value);
    }

    pub fn slot(&self, index: usize) -> SlotGenes {
        let base = HEADER_BITS + index * SLOT_BITS;
        let get = |(offset, width): (usize, usize)| self.field(base + offset, width);
        SlotGenes {
            parent_raw: get(PARENT),
            face_raw: get(FACE),
            orientation_raw: get(ORIENTATION),
            actuation_raw: get(ACTUATION),
            frequency_raw: get(FREQUENCY),
            amplitude_raw: get(AMPLITUDE),
            phase_raw: get(PHASE),
        }
    }

    /// Writes a slot; values wider than their field are truncated to the low bits.
    pub fn set_slot(&mut self, index: usize, genes: &SlotGenes) {
        let base = HEADER_BITS + index * SLOT_BITS;
        for ((offset, width), value) in [
            (PARENT, genes.parent_raw),
            (FACE, genes.face_raw),
            (ORIENTATION, genes.orientation_raw),
            (ACTUATION, genes.actuation_raw),
            (FREQUENCY, genes.frequency_raw),
            (AMPLITUDE, genes.amplitude_raw),
            (PHASE, genes.phase_raw),
        ] {
            self.set_field(base + offset, width, value);
        }
    }

    pub fn module_count(&self) -> usize {
        MIN_MODULES + (self.header() as usize % 8)
    }

    /// Lowercase hex, bits packed most significant first, zero padded to a
    /// whole number of bytes.
    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(8)
            .map(|chunk| {
                let byte = chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << (7 - k)));
                format!("{byte:02x}")
            })
            .collect()
    }

    pub fn from_hex(hex: &str) -> Result<Self> {
        let expected = GENOME_BITS.div_ceil(8) * 2;
        if hex.len() != expected || !hex.is_ascii() {
            return Err(Error::InvalidArgument(format!(
                "genome hex must be {expected} characters, got {}",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(expected * 4);
        for pair in hex.as_bytes().chunks(2) {
            let text = std::str::from_utf8(pair).expect("ascii");
            let byte = u8::from_str_radix(text, 16)
                .map_err(|_| Error::InvalidArgument(format!("invalid hex digits {text:?}")))?;
            bits.extend((0..8).map(|k| (byte >> (7 - k)) & 1 == 1));
        }
        if bits[GENOME_BITS..].iter().any(|&b| b) {
            return Err(Error::InvalidArgument("genome hex has non-zero padding bits".into()));
        }
        bits.truncate(GENOME_BITS);
        Ok(Self { bits })
    }
}

/// Robot described by a genome after repair.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRobot {
    pub modules: Vec<ModuleSpec>,
    pub control: Vec<ControlGene>,
}

impl DecodedRobot {
    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    /// Distance of each module from the root in the module tree.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.modules.len()];
        for (i, m) in self.modules.iter().enumerate() {
            if let Some(p) = m.parent {
                depth[i] = depth[p] + 1;
            }
        }
        depth
    }
}

/// Decodes a genome into a valid module tree plus one control gene per module.
///
/// Total: an occupied parent face is replaced by the next free face in
/// increasing order (mod 8); a parent with no free face at all passes the
/// request on to the next module (mod slot index). Module 0 always has a free
/// face, so the search ends.
pub fn decode(genome: &Genome) -> DecodedRobot {
    let count = genome.module_count();
    let mut occupied = [[false; FACE_COUNT]; MAX_MODULES];
    let mut modules = Vec::with_capacity(count);
    let mut control = Vec::with_capacity(count);
    for i in 0..count {
        let raw = genome.slot(i);
        let actuation_face = raw.actuation_raw as usize;
        control.push(ControlGene {
            frequency: f64::from(raw.frequency_raw) / 255.0,
            amplitude: f64::from(raw.amplitude_raw) / 255.0,
            phase: f64::from(raw.phase_raw) / 256.0,
        });
        if i == 0 {
            modules.push(ModuleSpec {
                parent: None,
                parent_face: 0,
                orientation: 0,
                actuation_face,
            });
            continue;
        }
        let mut parent = raw.parent_raw as usize % i;
        let face = loop {
            let free = (0..FACE_COUNT)
                .map(|k| (raw.face_raw as usize + k) % FACE_COUNT)
                .find(|&f| !occupied[parent][f]);
            match free {
                Some(f) => break f,
                None => parent = (parent + 1) % i,
            }
        };
        occupied[parent][face] = true;
        occupied[i][ATTACH_FACE] = true;
        modules.push(ModuleSpec {
            parent: Some(parent),
            parent_face: face,
            orientation: raw.orientation_raw as usize % 3,
            actuation_face,
        });
    }
    DecodedRobot { modules, control }
}

/// Genome of independent fair coin flips from `rng`.
pub fn random_genome_with(rng: &mut impl Rng) -> Genome {
    Genome {
        bits: (0..GENOME_BITS).map(|_| rng.random::<bool>()).collect(),
    }
}

pub fn random_genome(seed: u64) -> Genome {
    random_genome_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Flips each bit independently with probability `per_bit_rate`.
///
/// Always draws exactly one uniform number per bit, so the generator advances
/// by the same amount whatever the rate.
pub fn mutate(genome: &Genome, per_bit_rate: f64, rng: &mut impl Rng) -> Genome {
    Genome {
        bits: genome
            .bits
            .iter()
            .map(|&b| b ^ (rng.random::<f64>() < per_bit_rate))
            .collect(),
    }
}

/// One-point crossover: the children exchange everything from `cut` on.
pub fn crossover_at(a: &Genome, b: &Genome, cut: usize) -> (Genome, Genome) {
    let mut first = a.bits[..cut].to_vec();
    first.extend_from_slice(&b.bits[cut..]);
    let mut second = b.bits[..cut].to_vec();
    second.extend_from_slice(&a.bits[cut..]);
    (Genome { bits: first }, Genome { bits: second })
}

/// One-point crossover with the cut drawn uniformly from `1..=326`.
pub fn crossover(a: &Genome, b: &Genome, rng: &mut impl Rng) -> (Genome, Genome) {
    let cut = rng.random_range(1..GENOME_BITS);
    crossover_at(a, b, cut)
}
