use crate::model::LayerConfig;

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn period(vars_per_row: &[usize], stride: usize) -> usize {
    vars_per_row
        .iter()
        .filter(|&&n| n > stride)
        .fold(1, |acc, &n| lcm(acc, n))
}

/// Stash-variable sequences for each secondary-unrolled iteration.
///
/// Stash indices are numbered row-major across rows. Iteration 0 is the
/// plain row-major order; every later iteration rotates each row holding
/// more than `stride` variables left by `stride`, and leaves narrower rows
/// untouched. The number of iterations is the lcm of the rotating row widths.
pub fn alloc_rotation(vars_per_row: &[usize], stride: usize) -> Vec<Vec<usize>> {
    let n = period(vars_per_row, stride);
    (0..n)
        .map(|un| {
            let mut seq = Vec::with_capacity(vars_per_row.iter().sum());
            let mut first = 0;
            for &m in vars_per_row {
                for c in 0..m {
                    let shift = if m > stride { (c + un * stride) % m } else { c };
                    seq.push(first + shift);
                }
                first += m;
            }
            seq
        })
        .collect()
}

/// Per-row variable counts of an input stash covering the first `num_in_stash`
/// window positions row-major (rows without stashed positions omitted).
pub fn stash_rows(layer: &LayerConfig, num_in_stash: usize) -> Vec<usize> {
    let covered = num_in_stash.min(layer.window());
    (0..layer.fh)
        .map(|r| covered.saturating_sub(r * layer.fw).min(layer.fw))
        .filter(|&m| m > 0)
        .collect()
}

pub fn secondary_unroll_factor(layer: &LayerConfig, num_in_stash: usize, stride: usize) -> usize {
    period(&stash_rows(layer, num_in_stash), stride)
}
