//! Ciphertext compression for model vectors.
//!
//! Two routes, both preserving additive homomorphism:
//!
//! * **Polynomial packing** — a length-`m` vector of `b`-bit slots becomes
//!   one big integer `sum x_i 2^{ib}`, so big-integer addition is slot-wise
//!   vector addition. `b` includes `slack_bits` of headroom so user sums
//!   cannot carry across slots. [`choose_level`] picks the smallest
//!   ciphertext level whose plaintext space holds the packed value;
//!   [`plan_chunks`] caps the per-ciphertext level and splits long vectors
//!   across several ciphertexts (with a smaller tail level) so encryption
//!   cost stays linear in `m`.
//!
//! * **KEM-DEM hybrid** — for the Paillier path (`s = 1`), where plaintexts
//!   must stay below the key size. The user sends one homomorphic encryption
//!   of a symmetric key `k` plus the vector masked by the keystream
//!   `ks_i = k * (IV || i) mod p`. The server lifts each masked slot back
//!   into the homomorphic domain and injects the keystream as
//!   `E(k)^{IV || i}`; since that exponent is not reduced mod `p`, recovered
//!   plaintexts carry a multiple of `p`, which [`kem_decode`] strips. A
//!   1-bit carry hint per slot lets the server undo the user-side mod-`p`
//!   wrap exactly, and `p > 2 * range_bound` keeps two-party sums decodable.

use crate::error::{Error, Result};
use crate::he::{Ciphertext, HePublicKey};
use crate::math;
use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Slot layout for polynomial packing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingParams {
    /// total bits per slot, including slack
    pub element_bits: u32,
    /// number of slots
    pub vector_len: usize,
    /// per-user elements live in [0, range_bound)
    pub range_bound: u64,
    /// headroom so sums over users cannot carry into the next slot
    pub slack_bits: u32,
}

impl PackingParams {
    /// Slot width is `ceil(log2 range_bound) + ceil(log2 n_users)`.
    pub fn new(range_bound: u64, vector_len: usize, n_users: usize) -> Result<Self> {
        if range_bound < 2 {
            return Err(Error::Config("range_bound must be at least 2".into()));
        }
        if vector_len == 0 || vector_len > u32::MAX as usize {
            return Err(Error::Config("vector_len out of range".into()));
        }
        let value_bits = 64 - (range_bound - 1).leading_zeros();
        let slack_bits = usize::BITS - (n_users.max(1) - 1).leading_zeros();
        let element_bits = value_bits + slack_bits;
        if element_bits > 63 {
            return Err(Error::Config("slot width exceeds 63 bits".into()));
        }
        Ok(PackingParams { element_bits, vector_len, range_bound, slack_bits })
    }

    /// Largest per-element value accepted by [`pack`].
    pub fn element_limit(&self) -> u64 {
        1u64 << (self.element_bits - self.slack_bits)
    }

    /// Largest per-slot value representable after summation.
    pub fn slot_limit(&self) -> u64 {
        1u64 << self.element_bits
    }
}

/// Pack a vector into one big integer with `element_bits`-wide slots.
pub fn pack(x: &[u64], params: &PackingParams) -> Result<BigUint> {
    if x.len() > params.vector_len {
        return Err(Error::CapacityExceeded(format!(
            "{} elements exceed vector_len {}",
            x.len(),
            params.vector_len
        )));
    }
    let limit = params.element_limit();
    for (i, &v) in x.iter().enumerate() {
        if v >= limit {
            return Err(Error::ElementOutOfRange { index: i, bound: limit });
        }
    }
    Ok(pack_raw(x, params.element_bits))
}

/// Pack without the per-element range check; slots may use the full width.
/// Used for aggregated values that already include carries.
pub fn pack_raw(x: &[u64], element_bits: u32) -> BigUint {
    let b = element_bits as usize;
    let total_bits = x.len() * b;
    let mut words = vec![0u64; total_bits / 64 + 2];
    for (i, &v) in x.iter().enumerate() {
        let bitpos = i * b;
        let (w, off) = (bitpos / 64, bitpos % 64);
        let wide = (v as u128) << off;
        words[w] |= wide as u64;
        words[w + 1] |= (wide >> 64) as u64;
    }
    let digits: Vec<u32> = words
        .iter()
        .flat_map(|&w| [w as u32, (w >> 32) as u32])
        .collect();
    BigUint::new(digits)
}

/// Inverse of [`pack`]: slot-wise base-2^b digits.
pub fn unpack(v: &BigUint, params: &PackingParams) -> Result<Vec<u64>> {
    unpack_raw(v, params.element_bits, params.vector_len)
}

pub fn unpack_raw(v: &BigUint, element_bits: u32, len: usize) -> Result<Vec<u64>> {
    let b = element_bits as usize;
    if v.bits() as usize > len * b {
        return Err(Error::CapacityExceeded(format!(
            "value has {} bits, capacity is {}",
            v.bits(),
            len * b
        )));
    }
    let digits = v.to_u32_digits();
    let word = |idx: usize| -> u64 {
        let lo = digits.get(2 * idx).copied().unwrap_or(0) as u64;
        let hi = digits.get(2 * idx + 1).copied().unwrap_or(0) as u64;
        lo | (hi << 32)
    };
    let mask = if b == 64 { u64::MAX } else { (1u64 << b) - 1 };
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let bitpos = i * b;
        let (w, off) = (bitpos / 64, bitpos % 64);
        let wide = (word(w) as u128 >> off) | ((word(w + 1) as u128) << (64 - off));
        out.push(wide as u64 & mask);
    }
    Ok(out)
}

/// Smallest level `s` with `s * key_bits >= m * b`.
pub fn choose_level(m: usize, b: u32, key_bits: u64) -> u32 {
    let need = m as u64 * b as u64;
    (need.div_ceil(key_bits)).max(1) as u32
}

/// One ciphertext's worth of slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSpec {
    pub offset: usize,
    pub len: usize,
    pub level: u32,
}

/// Split an `m`-slot vector into ciphertext chunks with per-chunk level at
/// most `max_level`. The tail chunk gets the smallest level that holds it,
/// which keeps the measured expansion factor close to the single-ciphertext
/// ideal while bounding the cost of any one exponentiation.
pub fn plan_chunks(m: usize, b: u32, key_bits: u64, max_level: u32) -> Vec<ChunkSpec> {
    assert!(max_level >= 1);
    let full = choose_level(m, b, key_bits);
    if full <= max_level {
        return vec![ChunkSpec { offset: 0, len: m, level: full }];
    }
    let slots = (max_level as u64 * key_bits / b as u64) as usize;
    let mut chunks = Vec::new();
    let mut offset = 0;
    while offset < m {
        let len = slots.min(m - offset);
        let level = if len == slots { max_level } else { choose_level(len, b, key_bits) };
        chunks.push(ChunkSpec { offset, len, level });
        offset += len;
    }
    chunks
}

// ---------------------------------------------------------------------------
// KEM-DEM hybrid
// ---------------------------------------------------------------------------

/// Symmetric key material for the keystream DEM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KemDemKey {
    /// symmetric key, a unit mod p
    pub k: u64,
    /// keystream modulus, an l-bit prime
    pub p: u64,
    /// nonce; must be fresh per encryption under a given k
    pub iv: u64,
    /// bit length of p (and of the transmitted slots)
    pub l: u32,
}

/// An `l`-bit prime keystream modulus with `p > 2 * range_bound`. The
/// modulus is a public protocol parameter shared by every user.
pub fn shared_keystream_modulus(l: u32, range_bound: u64, rng: &mut ChaCha20Rng) -> Result<u64> {
    if !(8..=64).contains(&l) {
        return Err(Error::Config("keystream modulus size must be 8..=64 bits".into()));
    }
    let p = math::gen_prime_u64(l, rng);
    if range_bound > p / 2 {
        return Err(Error::Config(format!(
            "keystream modulus {p} not larger than 2 * range_bound"
        )));
    }
    Ok(p)
}

impl KemDemKey {
    /// Fresh key with its own `l`-bit prime modulus `p > 2 * range_bound`.
    pub fn generate(l: u32, range_bound: u64, rng: &mut ChaCha20Rng) -> Result<Self> {
        let p = shared_keystream_modulus(l, range_bound, rng)?;
        Self::with_modulus(p, l, rng)
    }

    /// Fresh secret key and nonce under a shared public modulus.
    pub fn with_modulus(p: u64, l: u32, rng: &mut ChaCha20Rng) -> Result<Self> {
        if p < 3 || !math::is_prime_u64(p) {
            return Err(Error::Config("keystream modulus must be prime".into()));
        }
        let k = rng.gen_range(1..p);
        let iv: u64 = rng.gen();
        Ok(KemDemKey { k, p, iv, l })
    }

    /// `ks_i = k * (IV || i) mod p` with 1-based slot index `i`.
    pub fn keystream(&self, i: usize) -> u64 {
        let tweak = tweak_96(self.iv, i) % self.p as u128;
        ((self.k as u128 * tweak) % self.p as u128) as u64
    }
}

/// `IV || i`: the 64-bit IV and the 32-bit 1-based slot index concatenated
/// big-endian into a 96-bit integer.
fn tweak_96(iv: u64, i: usize) -> u128 {
    ((iv as u128) << 32) | (i as u128 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemDemCiphertext {
    pub iv: u64,
    pub encrypted_key: Ciphertext,
    /// per-slot (x_i - ks_i) mod p
    pub masked: Vec<u64>,
    /// per-slot wrap indicator: 1 when x_i < ks_i
    pub hints: Vec<u8>,
    pub l: u32,
}

/// Mask a vector under the keystream and encrypt the key homomorphically.
/// Requires the Paillier path (`pk.s == 1`) and elements below `p`.
pub fn kem_encrypt(
    pk: &HePublicKey,
    x: &[u64],
    key: &KemDemKey,
    rng: &mut ChaCha20Rng,
) -> Result<KemDemCiphertext> {
    if pk.s != 1 {
        return Err(Error::Config("KEM-DEM requires level s = 1".into()));
    }
    if x.len() >= u32::MAX as usize {
        return Err(Error::CapacityExceeded("too many slots".into()));
    }
    let mut masked = Vec::with_capacity(x.len());
    let mut hints = Vec::with_capacity(x.len());
    for (i, &v) in x.iter().enumerate() {
        if v >= key.p {
            return Err(Error::ElementOutOfRange { index: i, bound: key.p });
        }
        let ks = key.keystream(i);
        if v >= ks {
            masked.push(v - ks);
            hints.push(0);
        } else {
            masked.push(v + key.p - ks);
            hints.push(1);
        }
    }
    let encrypted_key = pk.encrypt(&BigUint::from(key.k), rng)?;
    Ok(KemDemCiphertext { iv: key.iv, encrypted_key, masked, hints, l: key.l })
}

/// Lift each masked slot back into a homomorphic ciphertext of `x_i` plus a
/// keystream-dependent multiple of `p` (stripped later by [`kem_decode`]).
/// The keystream modulus `p` is a public parameter shared out of band,
/// like the encryption key itself.
///
/// Slot `i` is `E(masked_i - hint_i * p) * E(k)^{IV || i}`, which decrypts to
/// `x_i + floor(k * (IV || i) / p) * p`.
pub fn kem_recover(pk: &HePublicKey, ct: &KemDemCiphertext, p: u64) -> Result<Vec<Ciphertext>> {
    if pk.s != 1 {
        return Err(Error::Config("KEM-DEM requires level s = 1".into()));
    }
    if ct.masked.len() != ct.hints.len() {
        return Err(Error::LengthMismatch { expected: ct.masked.len(), got: ct.hints.len() });
    }
    let ns = pk.plaintext_modulus();
    let mut out = Vec::with_capacity(ct.masked.len());
    for (i, (&m, &hint)) in ct.masked.iter().zip(&ct.hints).enumerate() {
        // lift masked - hint*p into the plaintext ring (may be negative)
        let lifted = if hint == 0 {
            BigUint::from(m) % ns
        } else {
            let wrap = p - m; // hint*p - masked, positive
            ns - (BigUint::from(wrap) % ns)
        };
        let base = pk.trivial_encrypt(&lifted)?;
        let keystream_ct = pk.scale(&ct.encrypted_key, &BigUint::from(tweak_96(ct.iv, i)))?;
        out.push(pk.hom_add(&base, &keystream_ct)?);
    }
    Ok(out)
}

/// Strip the keystream-carry multiples of `p` from a decrypted slot value.
/// Exact whenever the underlying plaintext sum is below `p`.
pub fn kem_decode(plaintext: &BigUint, p: u64) -> u64 {
    use num_traits::ToPrimitive;
    (plaintext % BigUint::from(p)).to_u64().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::he;
    use crate::math::{derive_seed, gen_prime, rng_from_seed};
    use num_bigint::RandBigInt;

    fn test_rng(tag: u64) -> ChaCha20Rng {
        rng_from_seed(derive_seed(&[5u8; 32], "encoding-test", tag))
    }

    fn keys(s: u32, tag: u64) -> (he::HePublicKey, he::HeSecretKey) {
        let mut rng = test_rng(tag);
        let p = gen_prime(96, 24, &mut rng);
        let q = gen_prime(96, 24, &mut rng);
        he::from_primes(&p, &q, s, &mut rng).unwrap()
    }

    #[test]
    fn pack_examples() {
        let params = PackingParams::new(200, 3, 1).unwrap();
        assert_eq!(params.element_bits, 8);
        assert_eq!(pack(&[0, 0, 0], &params).unwrap(), BigUint::zero());
        // 1 + 2*256 + 3*65536
        assert_eq!(pack(&[1, 2, 3], &params).unwrap(), BigUint::from(197121u32));
        assert_eq!(
            unpack(&BigUint::from(197121u32), &params).unwrap(),
            vec![1, 2, 3]
        );
        assert_eq!(unpack(&BigUint::zero(), &params).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn pack_rejects_out_of_range() {
        let params = PackingParams::new(16, 4, 4).unwrap();
        // element_bits = 4 + 2 slack
        assert_eq!(params.element_bits, 6);
        assert!(matches!(
            pack(&[0, 16, 0, 0], &params),
            Err(Error::ElementOutOfRange { index: 1, .. })
        ));
        assert!(matches!(pack(&[0; 5], &params), Err(Error::CapacityExceeded(_))));
        let too_big = BigUint::from(1u32) << 25; // 4 slots * 6 bits = 24
        assert!(matches!(unpack(&too_big, &params), Err(Error::CapacityExceeded(_))));
    }

    #[test]
    fn pack_roundtrip_random() {
        let mut rng = test_rng(1);
        for _ in 0..50 {
            let m = rng.gen_range(1..200usize);
            let params = PackingParams::new(1u64 << 20, m, 8).unwrap();
            let x: Vec<u64> = (0..m).map(|_| rng.gen_range(0..params.range_bound)).collect();
            let packed = pack(&x, &params).unwrap();
            assert_eq!(unpack(&packed, &params).unwrap(), x);
        }
    }

    #[test]
    fn packing_is_linear_without_overflow() {
        let mut rng = test_rng(2);
        let params = PackingParams::new(1u64 << 16, 40, 4).unwrap();
        let x: Vec<u64> = (0..40).map(|_| rng.gen_range(0..params.range_bound)).collect();
        let y: Vec<u64> = (0..40).map(|_| rng.gen_range(0..params.range_bound)).collect();
        let sum: Vec<u64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = pack(&x, &params).unwrap() + pack(&y, &params).unwrap();
        assert_eq!(unpack_raw(&lhs, params.element_bits, 40).unwrap(), sum);
    }

    #[test]
    fn choose_level_examples() {
        assert_eq!(choose_level(100_000, 24, 2048), 1172);
        assert_eq!(choose_level(64, 32, 2048), 1); // m*b == key_bits exactly
        assert_eq!(choose_level(1, 8, 2048), 1);
        // expansion factor of the uncapped formula stays under 1.1 once the
        // payload is at least 20 keys wide ((r+2)/r <= 1.1 for r >= 20)
        for (m, b, kb) in [(2000usize, 24u32, 2048u64), (5000, 16, 1024), (640, 32, 1024)] {
            assert!(m as u64 * b as u64 >= 20 * kb);
            let s = choose_level(m, b, kb) as u64;
            let factor = ((s + 1) * kb) as f64 / (m as u64 * b as u64) as f64;
            assert!(factor <= 1.1, "factor {factor}");
        }
    }

    #[test]
    fn chunk_plan_covers_vector() {
        let plan = plan_chunks(100_000, 24, 2048, 256);
        assert!(plan.len() > 1);
        let mut cursor = 0;
        for c in &plan {
            assert_eq!(c.offset, cursor);
            assert!(c.level <= 256);
            assert!(choose_level(c.len, 24, 2048) <= c.level);
            cursor += c.len;
        }
        assert_eq!(cursor, 100_000);
        // tail is right-sized
        let tail = plan.last().unwrap();
        assert_eq!(tail.level, choose_level(tail.len, 24, 2048));

        let single = plan_chunks(100, 24, 2048, 256);
        assert_eq!(single, vec![ChunkSpec { offset: 0, len: 100, level: 2 }]);
    }

    #[test]
    fn packed_encryption_roundtrip() {
        let (pk, sk) = keys(3, 3);
        let mut rng = test_rng(4);
        let params = PackingParams::new(1 << 12, 30, 4).unwrap();
        let x: Vec<u64> = (0..30).map(|_| rng.gen_range(0..params.range_bound)).collect();
        let packed = pack(&x, &params).unwrap();
        assert!(packed < *pk.plaintext_modulus());
        let ct = pk.encrypt(&packed, &mut rng).unwrap();
        let back = sk.decrypt(&ct).unwrap();
        assert_eq!(unpack(&back, &params).unwrap(), x);
    }

    #[test]
    fn keystream_is_injective_and_nonzero_tweaked() {
        let mut rng = test_rng(5);
        let key = KemDemKey::generate(32, 1000, &mut rng).unwrap();
        let m = 500;
        let ks: Vec<u64> = (0..m).map(|i| key.keystream(i)).collect();
        let uniq: std::collections::BTreeSet<_> = ks.iter().collect();
        assert_eq!(uniq.len(), m, "keystream must be injective over slots");
    }

    #[test]
    fn identical_elements_mask_differently() {
        let mut rng = test_rng(6);
        let (pk, _) = keys(1, 7);
        let key = KemDemKey::generate(32, 1 << 10, &mut rng).unwrap();
        let x = vec![77u64; 64];
        let ct = kem_encrypt(&pk, &x, &key, &mut rng).unwrap();
        let uniq: std::collections::BTreeSet<_> = ct.masked.iter().collect();
        assert!(uniq.len() > 60, "masked slots should rarely collide");
    }

    #[test]
    fn kem_roundtrip_slot_exact() {
        let mut rng = test_rng(8);
        let (pk, sk) = keys(1, 9);
        let key = KemDemKey::generate(32, 1 << 10, &mut rng).unwrap();
        let x: Vec<u64> = (0..100).map(|_| rng.gen_range(0..1 << 10)).collect();
        let ct = kem_encrypt(&pk, &x, &key, &mut rng).unwrap();
        let recovered = kem_recover(&pk, &ct, key.p).unwrap();
        for (i, c) in recovered.iter().enumerate() {
            let plain = sk.decrypt(c).unwrap();
            assert_eq!(kem_decode(&plain, key.p), x[i], "slot {i}");
        }
    }

    #[test]
    fn kem_all_zero_vector() {
        let mut rng = test_rng(10);
        let (pk, sk) = keys(1, 11);
        let key = KemDemKey::generate(32, 4, &mut rng).unwrap();
        let x = vec![0u64; 16];
        let ct = kem_encrypt(&pk, &x, &key, &mut rng).unwrap();
        for c in kem_recover(&pk, &ct, key.p).unwrap() {
            assert_eq!(kem_decode(&sk.decrypt(&c).unwrap(), key.p), 0);
        }
    }

    #[test]
    fn kem_sums_two_users() {
        let mut rng = test_rng(12);
        let (pk, sk) = keys(1, 13);
        // p > 2 * range_bound makes two-user sums decodable
        let bound = 1u64 << 14;
        let p = shared_keystream_modulus(32, bound, &mut rng).unwrap();
        let key_a = KemDemKey::with_modulus(p, 32, &mut rng).unwrap();
        let key_b = KemDemKey::with_modulus(p, 32, &mut rng).unwrap();
        let xa: Vec<u64> = (0..40).map(|_| rng.gen_range(0..bound)).collect();
        let xb: Vec<u64> = (0..40).map(|_| rng.gen_range(0..bound)).collect();
        let ca = kem_encrypt(&pk, &xa, &key_a, &mut rng).unwrap();
        let cb = kem_encrypt(&pk, &xb, &key_b, &mut rng).unwrap();
        let ra = kem_recover(&pk, &ca, key_a.p).unwrap();
        let rb = kem_recover(&pk, &cb, key_b.p).unwrap();
        for i in 0..40 {
            let sum = pk.hom_add(&ra[i], &rb[i]).unwrap();
            let plain = sk.decrypt(&sum).unwrap();
            assert_eq!(kem_decode(&plain, key_a.p), xa[i] + xb[i]);
        }
    }

    #[test]
    fn kem_rejects_oversized_elements_and_levels() {
        let mut rng = test_rng(14);
        let (pk1, _) = keys(1, 15);
        let (pk2, _) = keys(2, 16);
        let key = KemDemKey::generate(16, 100, &mut rng).unwrap();
        assert!(matches!(
            kem_encrypt(&pk1, &[key.p], &key, &mut rng),
            Err(Error::ElementOutOfRange { .. })
        ));
        assert!(matches!(kem_encrypt(&pk2, &[1], &key, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn kem_key_generation_checks_bound() {
        let mut rng = test_rng(17);
        assert!(KemDemKey::generate(16, 1 << 20, &mut rng).is_err());
    }

    // exercise wide random packed values against the ring boundary
    #[test]
    fn pack_fills_plaintext_space() {
        let (pk, sk) = keys(2, 18);
        let mut rng = test_rng(19);
        let bits = pk.plaintext_modulus().bits() - 1;
        let v = rng.gen_biguint(bits);
        let ct = pk.encrypt(&v, &mut rng).unwrap();
        assert_eq!(sk.decrypt(&ct).unwrap(), v);
    }
}
