//! Damgård–Jurik cryptosystem (generalized Paillier) with additive
//! homomorphism and `(t, n)`-threshold decryption.
//!
//! Plaintexts live in `Z_{n^s}`, ciphertexts in `Z*_{n^{s+1}}`, with
//! `E(m) = g^m r^{n^s} mod n^{s+1}` and `g = 1 + n`. Paillier is the `s = 1`
//! special case. The fixed base `g = 1 + n` makes decryption a closed-form
//! discrete-log extraction (see [`crate::math::dlog_one_plus_n`]).
//!
//! Two implementation choices worth knowing about:
//!
//! * Encryption randomizers are `h^alpha` for a short random `alpha`, where
//!   `h = w^{n^s}` is precomputed by the dealer at key generation. This is
//!   the standard short-exponent speedup; a full-width `r^{n^s}` at high
//!   levels would cost millions of multiplications per encryption. The
//!   dealer computes `h` via CRT and Teichmüller lifts, so even key
//!   generation never performs an `n^s`-sized exponentiation.
//! * The decryption exponent `d` satisfies `d = 1 mod n^s` and
//!   `d = 0 mod lcm(p-1, q-1)`, the threshold-friendly form: `c^d` lands in
//!   the cyclic group generated by `1 + n` and extraction applies directly.
//!
//! Decryption and share combining are total functions: garbage input yields
//! an arbitrary ring element. Detecting tampered ciphertexts is the job of
//! the commitment-consistency check in [`crate::protocol`], since every
//! group element is a valid ciphertext here.
//!
//! Nothing in this module is constant-time.

use crate::error::{Error, Result};
use crate::math::{
    self, dlog_one_plus_n, exact_div, factorial, inv_mod_prime_power, mod_inverse, padic_log,
    teichmuller_lift, ModCtx,
};
use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha20Rng;

/// Bit length of the short randomizer exponent.
const RANDOMIZER_BITS: u64 = 256;

/// Levels up to this bound compute `h = w^{n^s}` directly; larger levels go
/// through the CRT/Teichmüller route.
const DIRECT_RANDOMIZER_LEVEL: u32 = 8;

pub const ALLOWED_KEY_BITS: [u64; 4] = [1024, 2048, 3072, 4096];

#[derive(Debug, Clone)]
pub struct HePublicKey {
    /// public modulus, product of two primes
    pub n: BigUint,
    /// fixed base g = 1 + n
    pub g: BigUint,
    /// level: plaintext space Z_{n^s}
    pub s: u32,
    /// bit length of n
    pub key_bits: u64,
    /// precomputed randomizer base, an n^s-th residue
    pub h: BigUint,
    ns: BigUint,
    ns1: BigUint,
    ctx: ModCtx,
}

#[derive(Debug, Clone)]
pub struct HeSecretKey {
    /// decryption exponent: d = 1 mod n^s, d = 0 mod lcm(p-1, q-1)
    pub d: BigUint,
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    n: BigUint,
    s: u32,
}

/// One user's Shamir share of the decryption exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyShare {
    /// 1-based share index
    pub index: usize,
    /// share value f(index) over Z_{n^s * lambda}
    pub value: BigUint,
    pub threshold: usize,
    pub n_shares: usize,
    /// delta = n_shares!, the scaling that keeps Lagrange coefficients
    /// integral for every share subset
    pub delta: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub value: BigUint,
    pub s: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialDecryption {
    pub index: usize,
    pub value: BigUint,
    pub delta: BigUint,
}

#[derive(Debug, Clone, Copy)]
pub struct KeyGenOpts {
    pub key_bits: u64,
    pub s: u32,
    pub safe_primes: bool,
    pub mr_rounds: u32,
}

impl KeyGenOpts {
    pub fn new(key_bits: u64, s: u32) -> Self {
        KeyGenOpts { key_bits, s, safe_primes: false, mr_rounds: 40 }
    }
}

/// Generate a keypair. `key_bits` must be one of [`ALLOWED_KEY_BITS`] and
/// `s >= 1`. Deterministic for a fixed RNG state.
pub fn keygen(opts: KeyGenOpts, rng: &mut ChaCha20Rng) -> Result<(HePublicKey, HeSecretKey)> {
    if !ALLOWED_KEY_BITS.contains(&opts.key_bits) {
        return Err(Error::KeyGen(format!("unsupported key size {}", opts.key_bits)));
    }
    if opts.s == 0 {
        return Err(Error::KeyGen("level s must be >= 1".into()));
    }
    keygen_unchecked(opts, rng)
}

/// Key generation without the `key_bits` allow-list; used by tests and
/// benchmarks that trade key size for speed.
pub fn keygen_unchecked(
    opts: KeyGenOpts,
    rng: &mut ChaCha20Rng,
) -> Result<(HePublicKey, HeSecretKey)> {
    let half = opts.key_bits / 2;
    for _attempt in 0..64 {
        let (p, q) = if opts.safe_primes {
            (
                math::gen_safe_prime(half, opts.mr_rounds, rng),
                math::gen_safe_prime(opts.key_bits - half, opts.mr_rounds, rng),
            )
        } else {
            (
                math::gen_prime(half, opts.mr_rounds, rng),
                math::gen_prime(opts.key_bits - half, opts.mr_rounds, rng),
            )
        };
        if p == q {
            continue;
        }
        match build_keypair(&p, &q, opts.s, rng) {
            Ok(pair) => return Ok(pair),
            Err(_) => continue,
        }
    }
    Err(Error::KeyGen("prime generation failed after bounded retries".into()))
}

/// Construct a keypair from given primes (dealer/test entry point).
pub fn from_primes(
    p: &BigUint,
    q: &BigUint,
    s: u32,
    rng: &mut ChaCha20Rng,
) -> Result<(HePublicKey, HeSecretKey)> {
    if p == q {
        return Err(Error::KeyGen("p == q".into()));
    }
    build_keypair(p, q, s, rng)
}

fn build_keypair(
    p: &BigUint,
    q: &BigUint,
    s: u32,
    rng: &mut ChaCha20Rng,
) -> Result<(HePublicKey, HeSecretKey)> {
    let one = BigUint::one();
    let n = p * q;
    let lambda = (p - &one).lcm(&(q - &one));
    if n.gcd(&lambda) != one {
        return Err(Error::KeyGen("gcd(n, lambda) != 1".into()));
    }
    let ns = n.pow(s);
    let ns1 = &ns * &n;
    // d = lambda * (lambda^{-1} mod n^s): 0 mod lambda, 1 mod n^s
    let lam_inv = mod_inverse(&(&lambda % &ns), &ns)
        .ok_or_else(|| Error::KeyGen("lambda not invertible mod n^s".into()))?;
    let d = &lambda * lam_inv;
    let h = randomizer_base(p, q, &n, &ns, &ns1, s, rng);
    let ctx = ModCtx::new(&ns1);
    let pk = HePublicKey {
        g: &one + &n,
        key_bits: n.bits(),
        s,
        h,
        ns,
        ns1,
        ctx,
        n: n.clone(),
    };
    let sk = HeSecretKey { d, p: p.clone(), q: q.clone(), lambda, n, s };
    Ok((pk, sk))
}

/// `h = w^{n^s} mod n^{s+1}` for a random unit `w`.
///
/// For small levels this is a direct exponentiation. For large levels the
/// full `n^s`-bit exponent is far too expensive, so the dealer works per
/// prime power: `w^{n^s} mod p^{s+1}` equals the Teichmüller lift of
/// `w^{q^s mod (p-1)} mod p`, because raising to `p^s` kills the `1 + p`
/// component and fixes the roots of unity.
fn randomizer_base(
    p: &BigUint,
    q: &BigUint,
    n: &BigUint,
    ns: &BigUint,
    ns1: &BigUint,
    s: u32,
    rng: &mut ChaCha20Rng,
) -> BigUint {
    let one = BigUint::one();
    let w = loop {
        let cand = rng.gen_biguint_below(n);
        if cand.gcd(n) == one && cand > one {
            break cand;
        }
    };
    if s <= DIRECT_RANDOMIZER_LEVEL {
        let ctx = ModCtx::new(ns1);
        return ctx.pow(&w, ns);
    }
    let lift = |r: &BigUint, other: &BigUint| -> BigUint {
        let rho = other.modpow(&BigUint::from(s), &(r - &one));
        let vbar = (&w % r).modpow(&rho, r);
        teichmuller_lift(&vbar, r, s + 1)
    };
    let hp = lift(p, q);
    let hq = lift(q, p);
    math::crt_pair(&hp, &p.pow(s + 1), &hq, &q.pow(s + 1)) % ns1
}

impl HePublicKey {
    pub fn plaintext_modulus(&self) -> &BigUint {
        &self.ns
    }

    pub fn ciphertext_modulus(&self) -> &BigUint {
        &self.ns1
    }

    pub(crate) fn ctx(&self) -> &ModCtx {
        &self.ctx
    }

    /// Serialized size of one ciphertext under this key, in bytes.
    pub fn ciphertext_bytes(&self) -> usize {
        4 + (self.ns1.bits() as usize + 7) / 8
    }

    /// `(1 + n)^m mod n^{s+1}` by binomial expansion: `sum C(m, k) n^k` for
    /// `k <= s`. Costs O(s) multiplications instead of an `|m|`-bit
    /// exponentiation.
    fn g_pow(&self, m: &BigUint) -> BigUint {
        let mut acc = BigUint::one();
        let mut term = BigUint::one(); // C(m, k) * n^k mod n^{s+1}
        let mut k = BigUint::zero();
        for step in 1..=self.s {
            let kb = BigUint::from(step);
            if m < &kb {
                break;
            }
            // term *= (m - k) * n / (k + 1)
            let factor = m - &k;
            term = self.ctx.mul(&term, &factor);
            term = self.ctx.mul(&term, &self.n);
            let kinv = mod_inverse(&kb, &self.ns1).expect("k coprime to n");
            term = self.ctx.mul(&term, &kinv);
            acc = self.ctx.add(&acc, &term);
            k = kb;
        }
        acc
    }

    /// Encrypt `m in Z_{n^s}` with a fresh randomizer.
    pub fn encrypt(&self, m: &BigUint, rng: &mut ChaCha20Rng) -> Result<Ciphertext> {
        if m >= &self.ns {
            return Err(Error::MessageOutOfRange);
        }
        let alpha = rng.gen_biguint(RANDOMIZER_BITS);
        let r = self.ctx.pow(&self.h, &alpha);
        let value = self.ctx.mul(&self.g_pow(m), &r);
        Ok(Ciphertext { value, s: self.s })
    }

    /// Textbook encryption `g^m r^{n^s}` with caller-chosen randomness.
    /// Performs the full-width exponentiation; intended for small levels
    /// and cross-checking against the defining formula.
    pub fn encrypt_with_randomness(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if m >= &self.ns {
            return Err(Error::MessageOutOfRange);
        }
        let rn = self.ctx.pow(r, &self.ns);
        let value = self.ctx.mul(&self.g_pow(m), &rn);
        Ok(Ciphertext { value, s: self.s })
    }

    /// Deterministic encryption with the identity randomizer. Ciphertexts
    /// produced this way are not hiding; they exist so a server can lift
    /// known values into the homomorphic domain (see the KEM-DEM recovery).
    pub fn trivial_encrypt(&self, m: &BigUint) -> Result<Ciphertext> {
        if m >= &self.ns {
            return Err(Error::MessageOutOfRange);
        }
        Ok(Ciphertext { value: self.g_pow(m), s: self.s })
    }

    /// Homomorphic addition: the product of ciphertexts encrypts the sum of
    /// the plaintexts mod n^s.
    pub fn hom_add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        if a.s != b.s || a.s != self.s {
            return Err(Error::LevelMismatch);
        }
        Ok(Ciphertext { value: self.ctx.mul(&a.value, &b.value), s: self.s })
    }

    /// Multiply the encrypted value by a public scalar (ciphertext power).
    pub fn scale(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext> {
        if c.s != self.s {
            return Err(Error::LevelMismatch);
        }
        Ok(Ciphertext { value: self.ctx.pow(&c.value, k), s: self.s })
    }
}

impl HeSecretKey {
    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    /// Reference (non-threshold) decryption via CRT with small exponents:
    /// `c^{p-1} mod p^{s+1}` lands in the cyclic `1 + n` subgroup, where the
    /// exponent is extracted by the truncated p-adic logarithm.
    ///
    /// Total: malformed ciphertexts decrypt to an arbitrary ring element.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        if c.s != self.s {
            return Err(Error::LevelMismatch);
        }
        let m_p = self.decrypt_branch(&self.p, c);
        let m_q = self.decrypt_branch(&self.q, c);
        let ps = self.p.pow(self.s);
        let qs = self.q.pow(self.s);
        Ok(math::crt_pair(&m_p, &ps, &m_q, &qs) % self.n.pow(self.s))
    }

    fn decrypt_branch(&self, r: &BigUint, c: &Ciphertext) -> BigUint {
        let one = BigUint::one();
        let s = self.s;
        let re1 = r.pow(s + 1);
        let rs = r.pow(s);
        let ctx = ModCtx::new(&re1);
        let rm1 = r - &one;
        let z = ctx.pow(&(&c.value % &re1), &rm1);
        // log z = m (r-1) log(1+n); both logs divisible by exactly one power of r
        let log_z = padic_log(&z, s, &ctx);
        let log_g = padic_log(&((&one + &self.n) % &re1), s, &ctx);
        let num = exact_div(&log_z, r) % &rs;
        let den = exact_div(&log_g, r) % &rs;
        let den_inv = match inv_mod_prime_power(&den, r, s) {
            Some(v) => v,
            None => return BigUint::zero(),
        };
        let rm1_inv = match inv_mod_prime_power(&rm1, r, s) {
            Some(v) => v,
            None => return BigUint::zero(),
        };
        ((num * den_inv) % &rs) * rm1_inv % &rs
    }

    /// Shamir-split the decryption exponent over `Z_{n^s * lambda}` with a
    /// degree `t-1` polynomial. Any `t` shares can decrypt; fewer cannot.
    pub fn split(
        &self,
        t: usize,
        n_shares: usize,
        rng: &mut ChaCha20Rng,
    ) -> Result<Vec<KeyShare>> {
        if t < 1 || t > n_shares {
            return Err(Error::BadThreshold { t, n: n_shares });
        }
        let modulus = self.n.pow(self.s) * &self.lambda;
        let coeffs: Vec<BigUint> = (1..t).map(|_| rng.gen_biguint_below(&modulus)).collect();
        let delta = factorial(n_shares as u64);
        let shares = (1..=n_shares)
            .map(|i| {
                let x = BigUint::from(i);
                let mut acc = self.d.clone() % &modulus;
                let mut xp = BigUint::one();
                for c in &coeffs {
                    xp = (&xp * &x) % &modulus;
                    acc = (acc + c * &xp) % &modulus;
                }
                KeyShare {
                    index: i,
                    value: acc,
                    threshold: t,
                    n_shares,
                    delta: delta.clone(),
                }
            })
            .collect();
        Ok(shares)
    }
}

impl KeyShare {
    /// `c^{2 * delta * s_u} mod n^{s+1}` — this user's contribution to a
    /// threshold decryption.
    pub fn partial_decrypt(&self, pk: &HePublicKey, c: &Ciphertext) -> PartialDecryption {
        let exp = BigUint::from(2u32) * &self.delta * &self.value;
        PartialDecryption {
            index: self.index,
            value: pk.ctx().pow(&c.value, &exp),
            delta: self.delta.clone(),
        }
    }
}

/// Combine at least `t` partial decryptions into the plaintext.
///
/// Uses integer Lagrange coefficients `2 * delta * l_i(0)` (integral for
/// every share subset because `delta = n_shares!`), then extracts the
/// `1 + n` discrete log and divides by `4 delta^2 mod n^s`. Matches the
/// non-threshold [`HeSecretKey::decrypt`] on every valid subset.
pub fn combine_shares(
    partials: &[PartialDecryption],
    pk: &HePublicKey,
    t: usize,
) -> Result<BigUint> {
    if partials.len() < t || t == 0 {
        return Err(Error::NotEnoughShares { t, got: partials.len() });
    }
    let chosen = &partials[..t];
    let mut seen = std::collections::BTreeSet::new();
    for p in chosen {
        if !seen.insert(p.index) {
            return Err(Error::DuplicateShare(p.index));
        }
    }
    let delta = &chosen[0].delta;
    let delta_int = BigInt::from(delta.clone());
    let mut combined = BigUint::one();
    for pi in chosen {
        // lambda'_{0,i} = delta * prod_{j != i} (-j) / (i - j)
        let mut num = delta_int.clone();
        let mut den = BigInt::one();
        for pj in chosen {
            if pj.index == pi.index {
                continue;
            }
            num *= -BigInt::from(pj.index);
            den *= BigInt::from(pi.index as i64 - pj.index as i64);
        }
        let (lam, rem) = num.div_rem(&den);
        debug_assert!(rem.is_zero(), "scaled Lagrange coefficient not integral");
        let exp = BigInt::from(2) * lam;
        let e_abs = exp.abs().to_biguint().unwrap();
        let base = if exp.is_negative() {
            match mod_inverse(&pi.value, pk.ciphertext_modulus()) {
                Some(v) => v,
                None => return Ok(BigUint::zero()),
            }
        } else {
            pi.value.clone()
        };
        combined = pk.ctx().mul(&combined, &pk.ctx().pow(&base, &e_abs));
    }
    // combined = (1+n)^{4 delta^2 m mod n^s}
    let a = dlog_one_plus_n(&combined, &pk.n, pk.s, pk.ctx());
    let ns = pk.plaintext_modulus();
    let four_d2 = (BigUint::from(4u32) * delta * delta) % ns;
    match mod_inverse(&four_d2, ns) {
        Some(inv) => Ok((a * inv) % ns),
        None => Ok(BigUint::zero()),
    }
}
