//! Big-integer utilities shared by the cryptographic modules: Barrett
//! modular contexts, deterministic prime generation, CRT combination,
//! truncated p-adic logarithms (used to extract discrete logs of `1 + n`),
//! and Teichmüller lifts (used by the dealer to precompute the randomizer
//! base without a full-width exponentiation).
//!
//! `num-bigint`'s built-in `modpow` switches to Montgomery arithmetic whose
//! reduction is quadratic in the modulus size with a poor constant at the
//! multi-megabit moduli used by high-level ciphertexts. The [`ModCtx`]
//! Barrett context reduces with two multiplications instead, which keeps the
//! large-`s` paths usable.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a master seed, a label and an index.
pub fn derive_seed(master: &[u8; 32], label: &str, idx: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fedshield.seed");
    h.update(master);
    h.update(label.as_bytes());
    h.update(idx.to_be_bytes());
    h.finalize().into()
}

pub fn rng_from_seed(seed: [u8; 32]) -> ChaCha20Rng {
    use rand::SeedableRng;
    ChaCha20Rng::from_seed(seed)
}

/// Barrett reduction context for a fixed odd modulus.
#[derive(Debug, Clone)]
pub struct ModCtx {
    modulus: BigUint,
    /// bit length k of the modulus
    k: u64,
    /// floor(2^{2k} / modulus)
    mu: BigUint,
}

impl ModCtx {
    pub fn new(modulus: &BigUint) -> Self {
        assert!(!modulus.is_zero(), "zero modulus");
        let k = modulus.bits();
        let mu = (BigUint::one() << (2 * k)) / modulus;
        ModCtx { modulus: modulus.clone(), k, mu }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// Reduce `x < modulus^2` (in particular any product of two reduced
    /// values) to `x mod modulus`.
    pub fn reduce(&self, x: BigUint) -> BigUint {
        debug_assert!(x.bits() <= 2 * self.k);
        let q = ((&x >> (self.k - 1)) * &self.mu) >> (self.k + 1);
        let mut r = x - q * &self.modulus;
        while r >= self.modulus {
            r -= &self.modulus;
        }
        r
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.reduce(a * b)
    }

    pub fn sqr(&self, a: &BigUint) -> BigUint {
        self.reduce(a * a)
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.modulus {
            s - &self.modulus
        } else {
            s
        }
    }

    pub fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            a + &self.modulus - b
        }
    }

    /// Left-to-right 4-bit windowed exponentiation.
    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        if exp.is_zero() {
            return BigUint::one();
        }
        let base = base % &self.modulus;
        // table[i] = base^i for i in 0..16
        let mut table = Vec::with_capacity(16);
        table.push(BigUint::one());
        table.push(base.clone());
        for i in 2..16 {
            let t = self.mul(&table[i - 1], &base);
            table.push(t);
        }
        let nibbles: Vec<u8> = {
            let bytes = exp.to_bytes_be();
            let mut v = Vec::with_capacity(bytes.len() * 2);
            for b in bytes {
                v.push(b >> 4);
                v.push(b & 0xf);
            }
            v
        };
        let mut acc = BigUint::one();
        let mut started = false;
        for w in nibbles {
            if started {
                acc = self.sqr(&acc);
                acc = self.sqr(&acc);
                acc = self.sqr(&acc);
                acc = self.sqr(&acc);
            }
            if w != 0 {
                acc = self.mul(&acc, &table[w as usize]);
                started = true;
            } else if started {
                // nothing to multiply
            }
        }
        if started {
            acc
        } else {
            BigUint::one()
        }
    }

    pub fn pow_u64(&self, base: &BigUint, exp: u64) -> BigUint {
        self.pow(base, &BigUint::from(exp))
    }
}

/// Modular inverse via extended Euclid. Returns `None` when gcd != 1.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a % m);
    let m_int = BigInt::from(m.clone());
    let e = a.extended_gcd(&m_int);
    if !e.gcd.is_one() {
        return None;
    }
    let mut x = e.x % &m_int;
    if x.is_negative() {
        x += &m_int;
    }
    Some(x.to_biguint().unwrap())
}

/// Inverse of `a` modulo `p^e` for odd prime `p`, via Newton lifting from
/// the inverse mod `p`. Much cheaper than extended gcd at large `e`.
pub fn inv_mod_prime_power(a: &BigUint, p: &BigUint, e: u32) -> Option<BigUint> {
    let inv_p = mod_inverse(&(a % p), p)?;
    let mut prec: u32 = 1;
    let mut inv = inv_p;
    let two = BigUint::from(2u32);
    while prec < e {
        prec = (2 * prec).min(e);
        let modulus = p.pow(prec);
        let ctx = ModCtx::new(&modulus);
        let ai = ctx.mul(&(a % &modulus), &inv);
        let corr = ctx.sub(&two, &ai);
        inv = ctx.mul(&inv, &corr);
    }
    Some(inv)
}

/// CRT combine: the unique `x mod m1*m2` with `x = r1 mod m1`, `x = r2 mod m2`.
/// `m1` and `m2` must be coprime.
pub fn crt_pair(r1: &BigUint, m1: &BigUint, r2: &BigUint, m2: &BigUint) -> BigUint {
    let inv = mod_inverse(&(m1 % m2), m2).expect("CRT moduli not coprime");
    let diff = if r2 >= r1 {
        (r2 - r1) % m2
    } else {
        m2 - ((r1 - r2) % m2)
    };
    r1 + m1 * ((diff * inv) % m2)
}

/// Exact integer division; for honest inputs the remainder is zero.
/// Garbage inputs yield the floor quotient so callers stay total.
pub fn exact_div(x: &BigUint, d: &BigUint) -> BigUint {
    x / d
}

// ---------------------------------------------------------------------------
// p-adic logarithm and discrete logs of (1 + n)
// ---------------------------------------------------------------------------

/// Truncated p-adic logarithm of `z` modulo the context modulus `M`:
/// `sum_{k=1}^{s} (-1)^{k+1} (z-1)^k / k  (mod M)`.
///
/// Valid whenever `z = 1 mod r` for the prime(s) `r` underlying `M = r^{s+1}`
/// (or a product of such prime powers): terms beyond `k = s` vanish mod `M`
/// and the small `k` are invertible because every prime factor of `M` is
/// astronomically larger than `s`.
pub fn padic_log(z: &BigUint, s: u32, ctx: &ModCtx) -> BigUint {
    let one = BigUint::one();
    let zm1 = ctx.sub(&(z % ctx.modulus()), &one);
    let mut term = zm1.clone(); // (z-1)^k
    let mut acc = BigUint::zero();
    for k in 1..=s {
        let kinv = mod_inverse(&BigUint::from(k), ctx.modulus())
            .unwrap_or_else(BigUint::zero);
        let contrib = ctx.mul(&term, &kinv);
        if k % 2 == 1 {
            acc = ctx.add(&acc, &contrib);
        } else {
            acc = ctx.sub(&acc, &contrib);
        }
        if k < s {
            term = ctx.mul(&term, &zm1);
        }
    }
    acc
}

/// Extract `a` from `(1+n)^a mod n^{s+1}` with `a < n^s`.
///
/// Uses `log((1+n)^a) = a * log(1+n)`; both logs are divisible by `n`, and
/// `log(1+n)/n` is a unit mod `n^s`. Total on garbage input (returns an
/// arbitrary ring element rather than failing).
pub fn dlog_one_plus_n(value: &BigUint, n: &BigUint, s: u32, ctx_ns1: &ModCtx) -> BigUint {
    let ns = n.pow(s);
    let log_v = padic_log(value, s, ctx_ns1);
    let log_g = padic_log(&(BigUint::one() + n), s, ctx_ns1);
    let lv = exact_div(&log_v, n) % &ns;
    let lg = exact_div(&log_g, n) % &ns;
    match mod_inverse(&lg, &ns) {
        Some(inv) => (lv * inv) % &ns,
        None => BigUint::zero(),
    }
}

// ---------------------------------------------------------------------------
// Teichmüller lift
// ---------------------------------------------------------------------------

/// The Teichmüller lift of `v` to `Z_{p^e}`: the unique solution of
/// `X^{p-1} = 1 (mod p^e)` with `X = v (mod p)`. Requires `v != 0 mod p`.
///
/// Newton iteration on `f(X) = X^{p-1} - 1` with doubling precision; the
/// inverses of `X` and `f'(X)` are maintained by Newton lifting as well, so
/// each step costs one `(p-1)`-exponentiation plus a handful of products.
pub fn teichmuller_lift(v: &BigUint, p: &BigUint, e: u32) -> BigUint {
    assert!(e >= 1);
    let one = BigUint::one();
    let pm1 = p - &one;
    let mut x = v % p;
    assert!(!x.is_zero(), "teichmuller_lift: input divisible by p");
    if e == 1 {
        return x;
    }
    let mut xinv = mod_inverse(&x, p).expect("unit mod p");
    // u = f'(x)^{-1} = ((p-1) * x^{p-2})^{-1} mod p
    let ctx1 = ModCtx::new(p);
    let fp1 = ctx1.mul(&(&pm1 % p), &ctx1.pow(&x, &(&pm1 - &one)));
    let mut u = mod_inverse(&fp1, p).expect("f' unit mod p");
    let two = BigUint::from(2u32);

    let mut prec: u32 = 1;
    while prec < e {
        prec = (2 * prec).min(e);
        let modulus = p.pow(prec);
        let ctx = ModCtx::new(&modulus);
        // lift xinv to the new precision (x unchanged so far)
        xinv = {
            let ai = ctx.mul(&x, &xinv);
            ctx.mul(&xinv, &ctx.sub(&two, &ai))
        };
        let x_pm1 = ctx.pow(&x, &pm1);
        // f'(x) = (p-1) * x^{p-1} * x^{-1}
        let fp = ctx.mul(&ctx.mul(&(&pm1 % &modulus), &x_pm1), &xinv);
        // lift u to the new precision against the freshly computed f'
        u = {
            let ai = ctx.mul(&fp, &u);
            ctx.mul(&u, &ctx.sub(&two, &ai))
        };
        // Newton step: x <- x - f(x) * u
        let fx = ctx.sub(&x_pm1, &one);
        x = ctx.sub(&(x % &modulus), &ctx.mul(&fx, &u));
    }
    x
}

// ---------------------------------------------------------------------------
// Prime generation
// ---------------------------------------------------------------------------

const SMALL_PRIMES: [u32; 60] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283,
];

/// Miller-Rabin with `rounds` random bases.
pub fn is_probable_prime(n: &BigUint, rounds: u32, rng: &mut ChaCha20Rng) -> bool {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for sp in SMALL_PRIMES {
        let spb = BigUint::from(sp);
        if *n == spb {
            return true;
        }
        if (n % &spb).is_zero() {
            return false;
        }
    }
    if n.is_even() {
        return *n == two;
    }
    let nm1 = n - &one;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    let ctx = ModCtx::new(n);
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &nm1);
        let mut x = ctx.pow(&a, &d);
        if x.is_one() || x == nm1 {
            continue 'witness;
        }
        for _ in 0..s.saturating_sub(1) {
            x = ctx.sqr(&x);
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Deterministically (given the RNG state) generate a prime of exactly
/// `bits` bits with the top two bits set.
pub fn gen_prime(bits: u64, rounds: u32, rng: &mut ChaCha20Rng) -> BigUint {
    assert!(bits >= 8);
    loop {
        let mut cand = rng.gen_biguint(bits);
        cand.set_bit(bits - 1, true);
        cand.set_bit(bits - 2, true);
        cand.set_bit(0, true);
        if SMALL_PRIMES.iter().any(|&p| (&cand % p).is_zero()) {
            continue;
        }
        if is_probable_prime(&cand, rounds, rng) {
            return cand;
        }
    }
}

/// Generate a safe prime `p = 2q + 1` with both `p` and `q` prime.
pub fn gen_safe_prime(bits: u64, rounds: u32, rng: &mut ChaCha20Rng) -> BigUint {
    loop {
        let q = gen_prime(bits - 1, rounds, rng);
        let p = (&q << 1u32) + BigUint::one();
        if p.bits() == bits && is_probable_prime(&p, rounds, rng) {
            return p;
        }
    }
}

/// Deterministic Miller-Rabin for u64 (exact for this range with the
/// standard witness set).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let pow_mod = |b: u64, mut e: u64, m: u64| -> u64 {
        let mut acc: u128 = 1;
        let mut bb: u128 = (b % m) as u128;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * bb % m as u128;
            }
            bb = bb * bb % m as u128;
            e >>= 1;
        }
        acc as u64
    };
    'w: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue 'w;
        }
        for _ in 0..s - 1 {
            x = (x as u128 * x as u128 % n as u128) as u64;
            if x == n - 1 {
                continue 'w;
            }
        }
        return false;
    }
    true
}

/// Random prime with exactly `bits` bits (2..=64) for the keystream modulus.
pub fn gen_prime_u64(bits: u32, rng: &mut ChaCha20Rng) -> u64 {
    use rand::Rng;
    assert!((2..=64).contains(&bits));
    loop {
        let mut cand: u64 = rng.gen();
        if bits < 64 {
            cand &= (1u64 << bits) - 1;
        }
        cand |= 1u64 << (bits - 1);
        cand |= 1;
        if is_prime_u64(cand) {
            return cand;
        }
    }
}

pub fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}
