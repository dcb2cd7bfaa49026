//! Flat-index arithmetic for row-major tensor products (first wire most significant).

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for w in (0..dims.len().saturating_sub(1)).rev() {
        s[w] = s[w + 1] * dims[w + 1];
    }
    s
}

pub(crate) fn total(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// For every flat index of the new ordering, the flat index in the old ordering.
/// `order[p]` is the old position of the wire that ends up at position `p`.
pub(crate) fn permutation_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let n = total(dims);
    let mut map = vec![0usize; n];
    let mut digits = vec![0usize; order.len()];
    for (flat, slot) in map.iter_mut().enumerate() {
        let mut rem = flat;
        for p in (0..order.len()).rev() {
            digits[p] = rem % new_dims[p];
            rem /= new_dims[p];
        }
        *slot = order
            .iter()
            .zip(&digits)
            .map(|(&o, &dg)| dg * old_strides[o])
            .sum();
    }
    map
}

/// Splits each flat index into the part carried by `selected` wires and the remainder.
/// Returns (selected_offset, rest_offset) per flat index, both in the original strides.
pub(crate) fn split_offsets(dims: &[usize], selected: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let st = strides(dims);
    let n = total(dims);
    let mut sel = vec![0usize; n];
    let mut rest = vec![0usize; n];
    for i in 0..n {
        let mut s = 0;
        for &w in selected {
            s += ((i / st[w]) % dims[w]) * st[w];
        }
        sel[i] = s;
        rest[i] = i - s;
    }
    (sel, rest)
}

/// Offsets of all multi-indices over `wires` (in the given order) inside the full index space.
pub(crate) fn sub_offsets(dims: &[usize], wires: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let sub_dims: Vec<usize> = wires.iter().map(|&w| dims[w]).collect();
    let n = total(&sub_dims);
    let mut out = Vec::with_capacity(n);
    let mut digits = vec![0usize; wires.len()];
    for flat in 0..n {
        let mut rem = flat;
        for p in (0..wires.len()).rev() {
            digits[p] = rem % sub_dims[p];
            rem /= sub_dims[p];
        }
        out.push(wires.iter().zip(&digits).map(|(&w, &dg)| dg * st[w]).sum());
    }
    out
}
