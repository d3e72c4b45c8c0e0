//! Fast Walsh-Hadamard transform over F_2^n.

/// Unnormalized in-place transform; applying it twice multiplies by `len`.
pub fn wht_in_place(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// Inverse of [`wht_in_place`].
pub fn iwht_in_place(data: &mut [f64]) {
    wht_in_place(data);
    let scale = 1.0 / data.len() as f64;
    data.iter_mut().for_each(|x| *x *= scale);
}

/// XOR convolution `c[z] = sum_{x ^ y = z} a[x] b[y]` of two equal-length
/// power-of-two slices.
pub fn xor_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    wht_in_place(&mut fa);
    wht_in_place(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    iwht_in_place(&mut fa);
    fa
}
