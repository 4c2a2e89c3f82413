//! Index maps between matrix entries, `vec`/`vech` positions, and the
//! strict-lower-triangle pair space used by the padding operator.
//!
//! Conventions (all zero-based):
//! - `vec` is column-major: entry `(r, c)` of an `n x n` matrix lands at
//!   position `c * n + r`.
//! - `vech` stacks the lower triangle column by column: `(0,0), (1,0), ...,
//!   (n-1,0), (1,1), ...`.
//! - Pair indices always take the two coordinates in increasing order.
//!
//! Getting these maps wrong silently corrupts coefficient recovery, so every
//! map has an exhaustive unit test against hand-expanded small cases.

/// Length of `vech` for an `n x n` symmetric matrix: n(n+1)/2.
#[inline]
pub fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Number of strictly-lower-triangle pairs: n(n-1)/2.
#[inline]
pub fn pair_len(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Source dimension `n` from a vech length `d = n(n+1)/2`, if `d` is valid.
pub fn n_from_vech_len(d: usize) -> Option<usize> {
    let n = ((((8 * d + 1) as f64).sqrt() as usize) + 1) / 2;
    for cand in n.saturating_sub(2)..=n + 2 {
        if vech_len(cand) == d {
            return Some(cand);
        }
    }
    None
}

/// Side `n` from a vec length `n^2`, if the length is a perfect square.
pub fn n_from_vec_len(len: usize) -> Option<usize> {
    let n = (len as f64).sqrt().round() as usize;
    (n * n == len).then_some(n)
}

/// Position of entry `(r, c)` in column-major `vec`.
#[inline]
pub fn vec_index(n: usize, r: usize, c: usize) -> usize {
    debug_assert!(r < n && c < n);
    c * n + r
}

/// Position of lower-triangle entry `(r, c)`, `r >= c`, in `vech`.
#[inline]
pub fn vech_index(n: usize, r: usize, c: usize) -> usize {
    debug_assert!(c <= r && r < n);
    c * (2 * n - c + 1) / 2 + (r - c)
}

/// `vech` position of the unordered pair `{u, v}` with `u <= v`.
///
/// Same map as [`vech_index`] with the roles of the coordinates fixed so
/// callers can pass pairs in increasing order.
#[inline]
pub fn kappa(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u <= v);
    vech_index(n, v, u)
}

/// Position of the strict pair `{u, v}`, `u < v`, in the g = n(n-1)/2
/// pair space (column-major over the strict lower triangle).
#[inline]
pub fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

/// Inverse of [`vech_index`]: the `(r, c)` entry (`r >= c`) at vech position `q`.
pub fn vech_entry(n: usize, q: usize) -> (usize, usize) {
    debug_assert!(q < vech_len(n));
    let mut c = 0;
    let mut offset = 0;
    while offset + (n - c) <= q {
        offset += n - c;
        c += 1;
    }
    (c + (q - offset), c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vech_index_matches_enumeration() {
        for n in 1..=8 {
            let mut q = 0;
            for c in 0..n {
                for r in c..n {
                    assert_eq!(vech_index(n, r, c), q);
                    assert_eq!(vech_entry(n, q), (r, c));
                    q += 1;
                }
            }
            assert_eq!(q, vech_len(n));
        }
    }

    #[test]
    fn pair_index_matches_enumeration() {
        for n in 2..=8 {
            let mut q = 0;
            for u in 0..n {
                for v in u + 1..n {
                    assert_eq!(pair_index(n, u, v), q);
                    q += 1;
                }
            }
            assert_eq!(q, pair_len(n));
        }
    }

    #[test]
    fn kappa_hand_table_n3() {
        // pairs in vech order for n = 3: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
        assert_eq!(kappa(3, 0, 0), 0);
        assert_eq!(kappa(3, 0, 1), 1);
        assert_eq!(kappa(3, 0, 2), 2);
        assert_eq!(kappa(3, 1, 1), 3);
        assert_eq!(kappa(3, 1, 2), 4);
        assert_eq!(kappa(3, 2, 2), 5);
    }

    #[test]
    fn n_recovery() {
        for n in 1..=12 {
            assert_eq!(n_from_vech_len(vech_len(n)), Some(n));
            assert_eq!(n_from_vec_len(n * n), Some(n));
        }
        assert_eq!(n_from_vech_len(4), None);
        assert_eq!(n_from_vec_len(5), None);
    }
}
