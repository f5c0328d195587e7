/// Face-connected digital line between two voxels, endpoints included.
///
/// Steps are interleaved Bresenham-style: at each step the axis that lags
/// furthest behind the ideal straight segment advances by one. The result has
/// exactly `|dz| + |dy| + |dx| + 1` voxels and consecutive voxels share a face.
pub fn digital_line(from: [usize; 3], to: [usize; 3]) -> Vec<[usize; 3]> {
    let span: [u64; 3] = std::array::from_fn(|a| from[a].abs_diff(to[a]) as u64);
    let step: [isize; 3] = std::array::from_fn(|a| if to[a] >= from[a] { 1 } else { -1 });
    let total: u64 = span.iter().sum();

    let mut taken = [0u64; 3];
    let mut cur = from;
    let mut out = Vec::with_capacity(total as usize + 1);
    out.push(cur);
    for _ in 0..total {
        // Axis `a` wants its next step at parameter (2k+1) / (2n). Pick the
        // smallest, comparing fractions by cross-multiplication.
        let mut best: Option<usize> = None;
        for a in 0..3 {
            if taken[a] == span[a] {
                continue;
            }
            best = match best {
                None => Some(a),
                Some(b) if (2 * taken[a] + 1) * span[b] < (2 * taken[b] + 1) * span[a] => Some(a),
                keep => keep,
            };
        }
        let a = best.expect("remaining steps imply a movable axis");
        taken[a] += 1;
        cur[a] = cur[a].wrapping_add_signed(step[a]);
        out.push(cur);
    }
    debug_assert_eq!(cur, to);
    out
}
