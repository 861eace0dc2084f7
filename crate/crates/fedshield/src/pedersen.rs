//! Pedersen commitments over a prime-order subgroup of `Z*_P`, with the
//! additive homomorphism `C(m, r) * C(m', r') = C(m + m', r + r')` used by
//! the aggregate-consistency check.
//!
//! Model vectors are committed element-wise: slot `i` becomes
//! `g^{m_i} h^{r_i} mod P`. Slot values must stay far below the subgroup
//! order `q` so that sums over users never wrap; parameter generation
//! enforces nothing here — the protocol layer checks
//! `q >= 2^(element_bits + log2 n_users)` before committing.
//!
//! `h` is derived by hashing `g` into the subgroup, so no discrete-log
//! relation between the generators is known to anyone.

use crate::error::{Error, Result};
use crate::math::{gen_prime, is_probable_prime, rng_from_seed, ModCtx};
use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Group description plus fixed-base tables for the two generators.
#[derive(Debug, Clone)]
pub struct PedersenParams {
    /// group prime P
    pub modulus: BigUint,
    /// prime order q of the subgroup, q | P - 1
    pub order: BigUint,
    pub g: BigUint,
    pub h: BigUint,
    ctx: ModCtx,
    g_table: FixedBase,
    h_table: FixedBase,
}

/// 4-bit fixed-window table: `table[w][d-1] = base^(d * 16^w)`.
#[derive(Debug, Clone)]
struct FixedBase {
    table: Vec<Vec<BigUint>>,
}

impl FixedBase {
    fn build(base: &BigUint, max_exp_bits: u64, ctx: &ModCtx) -> Self {
        let windows = max_exp_bits.div_ceil(4) as usize;
        let mut table = Vec::with_capacity(windows);
        let mut cur = base.clone();
        for _ in 0..windows {
            let mut row = Vec::with_capacity(15);
            row.push(cur.clone());
            for d in 1..15 {
                let next = ctx.mul(&row[d - 1], &cur);
                row.push(next);
            }
            // advance cur to base^(16^{w+1}) = row[14] * cur
            cur = ctx.mul(&row[14], &cur);
            table.push(row);
        }
        FixedBase { table }
    }

    fn pow(&self, exp: &BigUint, ctx: &ModCtx) -> BigUint {
        let mut acc = BigUint::one();
        let digits = exp.to_u32_digits();
        for (w, row) in self.table.iter().enumerate() {
            let bit = w * 4;
            let word = digits.get(bit / 32).copied().unwrap_or(0);
            let d = ((word >> (bit % 32)) & 0xf) as usize;
            if d != 0 {
                acc = ctx.mul(&acc, &row[d - 1]);
            }
        }
        acc
    }
}

impl PedersenParams {
    /// Deterministically generate a group: a `q_bits` prime order `q`, a
    /// `p_bits` prime `P = q c + 1`, and hash-derived generators of the
    /// order-`q` subgroup.
    pub fn generate(p_bits: u64, q_bits: u64, seed: [u8; 32]) -> Result<Self> {
        if q_bits + 16 > p_bits {
            return Err(Error::Config("subgroup order too close to group size".into()));
        }
        let mut rng = rng_from_seed(seed);
        let order = gen_prime(q_bits, 40, &mut rng);
        let modulus = loop {
            let mut c = rng.gen_biguint(p_bits - q_bits);
            c.set_bit(p_bits - q_bits - 1, true);
            c.set_bit(0, false); // even cofactor keeps P odd
            let p = &order * &c + BigUint::one();
            if p.bits() == p_bits && is_probable_prime(&p, 40, &mut rng) {
                break p;
            }
        };
        let cofactor = (&modulus - BigUint::one()) / &order;
        let ctx = ModCtx::new(&modulus);
        let g = subgroup_element(b"fedshield.pedersen.g", &seed, &cofactor, &ctx)?;
        let mut h_input = g.to_bytes_be();
        h_input.extend_from_slice(&seed);
        let h = subgroup_element(b"fedshield.pedersen.h", &h_input, &cofactor, &ctx)?;
        if g == h {
            return Err(Error::KeyGen("generator collision".into()));
        }
        let g_table = FixedBase::build(&g, q_bits + 1, &ctx);
        let h_table = FixedBase::build(&h, q_bits + 1, &ctx);
        Ok(PedersenParams { modulus, order, g, h, ctx, g_table, h_table })
    }

    /// `g^m h^r mod P` with exponents reduced mod q.
    pub fn commit_value(&self, m: &BigUint, r: &BigUint) -> BigUint {
        let m = m % &self.order;
        let r = r % &self.order;
        self.ctx.mul(&self.g_table.pow(&m, &self.ctx), &self.h_table.pow(&r, &self.ctx))
    }

    pub(crate) fn ctx(&self) -> &ModCtx {
        &self.ctx
    }

    /// Element byte width used by the serialized form.
    pub fn element_bytes(&self) -> usize {
        (self.modulus.bits() as usize + 7) / 8
    }
}

/// Map a hash stream into the order-q subgroup (value^cofactor), skipping
/// the identity.
fn subgroup_element(
    tag: &[u8],
    input: &[u8],
    cofactor: &BigUint,
    ctx: &ModCtx,
) -> Result<BigUint> {
    for counter in 0u32..1000 {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(input);
        h.update(counter.to_be_bytes());
        let mut bytes = Vec::new();
        // expand enough bytes to cover the modulus
        let blocks = (ctx.modulus().bits() as usize + 255) / 256 + 1;
        let digest = h.finalize();
        for b in 0..blocks {
            let mut h2 = Sha256::new();
            h2.update(digest);
            h2.update((b as u32).to_be_bytes());
            bytes.extend_from_slice(&h2.finalize());
        }
        let candidate = BigUint::from_bytes_be(&bytes) % ctx.modulus();
        let g = ctx.pow(&candidate, cofactor);
        if !g.is_one() && !g.is_zero() {
            return Ok(g);
        }
    }
    Err(Error::KeyGen("failed to derive subgroup generator".into()))
}

/// Per-chunk commitments to a vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitmentVector {
    pub elements: Vec<BigUint>,
    pub chunk_bits: u32,
}

/// The values and randomness that open a [`CommitmentVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub chunks: Vec<BigUint>,
    pub randomness: Vec<BigUint>,
}

impl Opening {
    /// Embed plain u64 slot values with fresh randomness.
    pub fn random(values: &[u64], params: &PedersenParams, rng: &mut ChaCha20Rng) -> Self {
        Opening {
            chunks: values.iter().map(|&v| BigUint::from(v)).collect(),
            randomness: (0..values.len())
                .map(|_| rng.gen_biguint_below(&params.order))
                .collect(),
        }
    }

    /// Slot-wise sum of openings mod q (valid opening of the combined
    /// commitment).
    pub fn sum(openings: &[&Opening], params: &PedersenParams) -> Result<Opening> {
        let len = openings.first().map(|o| o.chunks.len()).unwrap_or(0);
        let mut chunks = vec![BigUint::zero(); len];
        let mut randomness = vec![BigUint::zero(); len];
        for o in openings {
            if o.chunks.len() != len || o.randomness.len() != len {
                return Err(Error::LengthMismatch { expected: len, got: o.chunks.len() });
            }
            for i in 0..len {
                chunks[i] = (&chunks[i] + &o.chunks[i]) % &params.order;
                randomness[i] = (&randomness[i] + &o.randomness[i]) % &params.order;
            }
        }
        Ok(Opening { chunks, randomness })
    }
}

/// Commit to `chunks` with per-chunk randomness `r`.
pub fn commit(
    params: &PedersenParams,
    chunks: &[BigUint],
    r: &[BigUint],
    chunk_bits: u32,
) -> Result<CommitmentVector> {
    if chunks.len() != r.len() {
        return Err(Error::LengthMismatch { expected: chunks.len(), got: r.len() });
    }
    let elements = chunks
        .iter()
        .zip(r)
        .map(|(m, rr)| params.commit_value(m, rr))
        .collect();
    Ok(CommitmentVector { elements, chunk_bits })
}

/// Accept iff recomputing the commitments from the opening reproduces `cv`
/// element-wise.
pub fn verify_open(
    params: &PedersenParams,
    cv: &CommitmentVector,
    chunks: &[BigUint],
    r: &[BigUint],
) -> bool {
    if chunks.len() != cv.elements.len() || r.len() != cv.elements.len() {
        return false;
    }
    cv.elements
        .iter()
        .zip(chunks.iter().zip(r))
        .all(|(e, (m, rr))| *e == params.commit_value(m, rr))
}

/// Element-wise modular product: the commitment to the slot-wise sum.
pub fn combine(params: &PedersenParams, cvs: &[&CommitmentVector]) -> Result<CommitmentVector> {
    let first = cvs.first().ok_or(Error::LengthMismatch { expected: 1, got: 0 })?;
    let len = first.elements.len();
    let mut elements = vec![BigUint::one(); len];
    for cv in cvs {
        if cv.elements.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: cv.elements.len() });
        }
        for i in 0..len {
            elements[i] = params.ctx().mul(&elements[i], &cv.elements[i]);
        }
    }
    Ok(CommitmentVector { elements, chunk_bits: first.chunk_bits })
}
