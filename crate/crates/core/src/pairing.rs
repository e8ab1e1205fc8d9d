//! Cantor pairing and its iterated n-ary extension.
//!
//! `pair(x, y) = (x + y)(x + y + 1) / 2 + y`. The n-ary code of
//! `(x_0, ..., x_{n-1})` nests to the right:
//! `<x_0> = x_0`, `<x_0, ..., x_{n-1}> = pair(x_0, <x_1, ..., x_{n-1}>)`.
//! The empty tuple codes as 0. All arithmetic is checked; codes that do not
//! fit in a `u64` are reported as `None`.

pub fn pair(x: u64, y: u64) -> Option<u64> {
    let s = x.checked_add(y)?;
    let t = if s % 2 == 0 {
        (s / 2).checked_mul(s.checked_add(1)?)?
    } else {
        s.checked_mul((s + 1) / 2)?
    };
    t.checked_add(y)
}

pub fn unpair(z: u64) -> (u64, u64) {
    // largest w with w(w+1)/2 <= z
    let mut w = (((8.0 * z as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while tri(w + 1).map_or(false, |t| t <= z) {
        w += 1;
    }
    while tri(w).map_or(true, |t| t > z) {
        w -= 1;
    }
    let y = z - tri(w).unwrap();
    (w - y, y)
}

fn tri(w: u64) -> Option<u64> {
    if w % 2 == 0 {
        (w / 2).checked_mul(w.checked_add(1)?)
    } else {
        w.checked_mul((w + 1) / 2)
    }
}

pub fn encode(xs: &[u64]) -> Option<u64> {
    match xs {
        [] => Some(0),
        [x] => Some(*x),
        [x, rest @ ..] => pair(*x, encode(rest)?),
    }
}

pub fn decode(n: usize, code: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut z = code;
    for k in 0..n {
        if k + 1 == n {
            out.push(z);
        } else {
            let (x, rest) = unpair(z);
            out.push(x);
            z = rest;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_values() {
        assert_eq!(pair(0, 0), Some(0));
        assert_eq!(pair(1, 0), Some(1));
        assert_eq!(pair(0, 1), Some(2));
        assert_eq!(pair(2, 0), Some(3));
        assert_eq!(encode(&[1, 2, 3]), pair(1, pair(2, 3).unwrap()));
        assert_eq!(encode(&[]), Some(0));
        assert_eq!(pair(u64::MAX, 1), None);
    }

    #[test]
    fn pairing_is_a_bijection_on_an_initial_segment() {
        let mut seen = vec![false; 5050];
        for x in 0..100u64 {
            for y in 0..(100 - x) {
                let z = pair(x, y).unwrap() as usize;
                assert!(!seen[z]);
                seen[z] = true;
            }
        }
        assert!(seen.iter().all(|b| *b));
    }

    proptest! {
        #[test]
        fn tuples_round_trip(xs in proptest::collection::vec(0u64..200, 1..4)) {
            let code = encode(&xs).unwrap();
            prop_assert_eq!(decode(xs.len(), code), xs);
        }
    }
}
