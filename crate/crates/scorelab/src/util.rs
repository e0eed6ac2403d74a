//! Small numeric utilities shared across modules: compensated summation,
//! splittable hash mixing, dense symmetric operator norms, least squares,
//! and a content hash for run manifests.

/// Kahan-compensated sum. Used wherever an acceptance tolerance sits near
/// 1e-10 of the summand scale (traces, second moments, W2 accumulations).
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// SplitMix64 step: the standard finalizing mix, used for deriving
/// substream identifiers and call-indexed noise seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a sequence of words into a single 64-bit value (splitmix chaining).
pub fn mix_words(words: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64; // arbitrary non-zero start
    for &w in words {
        acc = splitmix64(acc ^ w);
    }
    acc
}

/// Two i.i.d. standard normals from a 64-bit counter state via Box-Muller.
/// Deterministic function of the state; used by the call-indexed score
/// perturbation so concurrent evaluation stays race-free.
pub fn counter_normal_pair(state: u64) -> (f64, f64) {
    let a = splitmix64(state);
    let b = splitmix64(a);
    // map to (0,1]: avoid u1 = 0 for the log
    let u1 = ((a >> 11) as f64 + 1.0) / (9_007_199_254_740_992.0 + 1.0);
    let u2 = (b >> 11) as f64 / 9_007_199_254_740_992.0;
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Operator norm (largest |eigenvalue|) of a dense symmetric d x d matrix
/// stored row-major, by power iteration. Exact for d = 1; for the probe
/// dimensions used here (d <= 4) a few dozen iterations reach 1e-12.
pub fn sym_opnorm(m: &[f64], d: usize) -> f64 {
    assert_eq!(m.len(), d * d);
    if d == 1 {
        return m[0].abs();
    }
    // start from a fixed deterministic vector with nonzero overlap
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.3 * (i as f64 + 1.0)).collect();
    let mut w = vec![0.0; d];
    let mut lambda = 0.0f64;
    for _ in 0..200 {
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += m[i * d + j] * v[j];
            }
            w[i] = acc;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lambda = norm;
        for i in 0..d {
            v[i] = w[i] / norm;
        }
        if (new_lambda - lambda).abs() <= 1e-14 * new_lambda.max(1.0) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    // Power iteration on a symmetric matrix converges to max |lambda|, but a
    // sign-symmetric spectrum ({+a, -a}) can stall; squaring the matrix once
    // resolves it. Detect by checking the Rayleigh quotient residual.
    let mut rayleigh = 0.0;
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += m[i * d + j] * v[j];
        }
        rayleigh += v[i] * acc;
    }
    if (rayleigh.abs() - lambda).abs() > 1e-9 * lambda.max(1.0) {
        // iterate on M^2 and take the square root of its dominant eigenvalue
        let mut m2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[i * d + k] * m[k * d + j];
                }
                m2[i * d + j] = acc;
            }
        }
        return sym_opnorm(&m2, d).sqrt();
    }
    lambda
}

/// Ordinary least squares slope of y against x, with the leave-one-out
/// spread of the slope as a crude confidence measure.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let slope = ols_slope_only(x, y);
    let n = x.len();
    if n <= 2 {
        return (slope, 0.0);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for drop in 0..n {
        let xs: Vec<f64> = (0..n).filter(|&i| i != drop).map(|i| x[i]).collect();
        let ys: Vec<f64> = (0..n).filter(|&i| i != drop).map(|i| y[i]).collect();
        let s = ols_slope_only(&xs, &ys);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (slope, (hi - lo) / 2.0)
}

fn ols_slope_only(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = kahan_sum(x.iter().copied()) / n;
    let my = kahan_sum(y.iter().copied()) / n;
    let sxx = kahan_sum(x.iter().map(|&v| (v - mx) * (v - mx)));
    let sxy = kahan_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    sxy / sxx
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0);
    let mean = kahan_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = kahan_sum(values.iter().map(|&v| (v - mean) * (v - mean))) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

// ---------------------------------------------------------------------------
// SHA-1 content hash (git blob convention) for run manifests and CSV rows.
// ---------------------------------------------------------------------------

/// SHA-1 digest of raw bytes, hex-encoded.
pub fn sha1_hex(data: &[u8]) -> String {
    let mut h: [u32; 5] = [0x6745_2301, 0xefcd_ab89, 0x98ba_dcfe, 0x1032_5476, 0xc3d2_e1f0];
    let ml = (data.len() as u64).wrapping_mul(8);
    let mut msg = data.to_vec();
    msg.push(0x80);
    while msg.len() % 64 != 56 {
        msg.push(0);
    }
    msg.extend_from_slice(&ml.to_be_bytes());

    let mut w = [0u32; 80];
    for chunk in msg.chunks_exact(64) {
        for (i, word) in chunk.chunks_exact(4).enumerate() {
            w[i] = u32::from_be_bytes([word[0], word[1], word[2], word[3]]);
        }
        for i in 16..80 {
            w[i] = (w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16]).rotate_left(1);
        }
        let (mut a, mut b, mut c, mut d, mut e) = (h[0], h[1], h[2], h[3], h[4]);
        for (i, &wi) in w.iter().enumerate() {
            let (f, k) = match i {
                0..=19 => ((b & c) | ((!b) & d), 0x5a82_7999),
                20..=39 => (b ^ c ^ d, 0x6ed9_eba1),
                40..=59 => ((b & c) | (b & d) | (c & d), 0x8f1b_bcdc),
                _ => (b ^ c ^ d, 0xca62_c1d6),
            };
            let tmp = a
                .rotate_left(5)
                .wrapping_add(f)
                .wrapping_add(e)
                .wrapping_add(k)
                .wrapping_add(wi);
            e = d;
            d = c;
            c = b.rotate_left(30);
            b = a;
            a = tmp;
        }
        h[0] = h[0].wrapping_add(a);
        h[1] = h[1].wrapping_add(b);
        h[2] = h[2].wrapping_add(c);
        h[3] = h[3].wrapping_add(d);
        h[4] = h[4].wrapping_add(e);
    }
    h.iter().map(|x| format!("{x:08x}")).collect()
}

/// Git-style content hash: `sha1("blob <len>\0" + content)`.
pub fn content_hash(content: &str) -> String {
    let mut buf = format!("blob {}\0", content.len()).into_bytes();
    buf.extend_from_slice(content.as_bytes());
    sha1_hex(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_handles_cancellation() {
        // 1 + 1e-16 repeated: naive summation loses the small terms
        let mut vals = vec![1.0];
        vals.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = kahan_sum(vals.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn sha1_known_vectors() {
        assert_eq!(sha1_hex(b"abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
        assert_eq!(sha1_hex(b""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
        // git blob hash of "hello\n" (well-known)
        assert_eq!(
            content_hash("hello\n"),
            "ce013625030ba8dba906f756967f9e9ca394464a"
        );
    }

    #[test]
    fn opnorm_matches_hand_eigenvalues() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let m = [2.0, 1.0, 1.0, 2.0];
        assert!((sym_opnorm(&m, 2) - 3.0).abs() < 1e-10);
        // [[0,1],[1,0]] has eigenvalues +-1 (sign-symmetric spectrum)
        let flip = [0.0, 1.0, 1.0, 0.0];
        assert!((sym_opnorm(&flip, 2) - 1.0).abs() < 1e-9);
        // negative dominant eigenvalue
        let neg = [-5.0, 0.0, 0.0, 2.0];
        assert!((sym_opnorm(&neg, 2) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (slope, spread) = ols_slope(&x, &y);
        assert!((slope - 2.5).abs() < 1e-12);
        assert!(spread < 1e-12);
    }

    #[test]
    fn counter_normals_are_deterministic_and_standardish() {
        let (a1, b1) = counter_normal_pair(42);
        let (a2, b2) = counter_normal_pair(42);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        // crude moment check over many counters
        let n = 200_000u64;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..n {
            let (x, y) = counter_normal_pair(i);
            sum += x + y;
            sq += x * x + y * y;
        }
        let m = sum / (2.0 * n as f64);
        let v = sq / (2.0 * n as f64) - m * m;
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }
}
