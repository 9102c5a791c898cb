//! Symmetric-decreasing rearrangement of nodal values.

use super::Grid;

/// Returns `f*`: the radially nonincreasing field equimeasurable with `|f|`.
///
/// On uniform grids the sorted values are placed on nodes in order of
/// increasing `|x|`, which preserves the distribution exactly. On weighted
/// radial grids each node takes the value at the midpoint of its measure
/// interval. In both cases a nonincreasing input is returned unchanged.
pub fn rearrange_decreasing(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let radii = grid.radii();
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(a.cmp(&b)));

    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&a, &b| f[b].abs().total_cmp(&f[a].abs()).then(a.cmp(&b)));

    let mut out = vec![0.0; n];
    match grid {
        Grid::Periodic(_) => {
            for (slot, src) in rank.iter().zip(&sorted) {
                out[*slot] = f[*src].abs();
            }
        }
        Grid::Radial(g) => {
            let w = g.weights();
            let mut cum = 0.0;
            let mut k = 0;
            let mut upper = w[sorted[0]];
            for &slot in &rank {
                let target = cum + 0.5 * w[slot];
                cum += w[slot];
                while upper < target && k + 1 < n {
                    k += 1;
                    upper += w[sorted[k]];
                }
                out[slot] = f[sorted[k]].abs();
            }
        }
    }
    out
}

/// Replaces each value by the mean over nodes at the same distance from the
/// origin. On uniform grids this removes the tie-breaking asymmetry of
/// [`rearrange_decreasing`] between mirror nodes; radial grids are returned
/// unchanged.
pub fn symmetrize_ties(grid: &Grid, f: &[f64]) -> Vec<f64> {
    if grid.is_radial() {
        return f.to_vec();
    }
    let radii = grid.radii();
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut out = vec![0.0; f.len()];
    let mut start = 0;
    while start < order.len() {
        let r = radii[order[start]];
        let mut end = start + 1;
        while end < order.len() && (radii[order[end]] - r).abs() <= 1e-12 * r.max(1.0) {
            end += 1;
        }
        let mean = order[start..end].iter().map(|&i| f[i]).sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            out[i] = mean;
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::Grid;
    use super::*;

    #[test]
    fn monotone_input_is_fixed() {
        let g = Grid::radial_spectral(3, 40, 10.0).unwrap();
        let f: Vec<f64> = g.radii().iter().map(|r| (-r).exp()).collect();
        assert_eq!(rearrange_decreasing(&g, &f), f);
        let g = Grid::periodic(1, 64, 5.0).unwrap();
        let f: Vec<f64> = g.radii().iter().map(|r| 1.0 / (1.0 + r * r)).collect();
        let once = rearrange_decreasing(&g, &f);
        assert_eq!(rearrange_decreasing(&g, &once), once);
    }

    #[test]
    fn shifted_bump_is_centred() {
        let g = Grid::periodic(1, 128, 10.0).unwrap();
        let x = g.coordinates(0);
        let f: Vec<f64> = x.iter().map(|x| (-(x - 2.0) * (x - 2.0)).exp()).collect();
        let s = rearrange_decreasing(&g, &f);
        let imax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(x[imax], 0.0);
    }

    #[test]
    fn tie_average_is_even() {
        let g = Grid::periodic(1, 64, 5.0).unwrap();
        let x = g.coordinates(0);
        let f: Vec<f64> = x.iter().map(|x| (-(x - 0.3) * (x - 0.3)).exp()).collect();
        let s = symmetrize_ties(&g, &rearrange_decreasing(&g, &f));
        for i in 1..32 {
            assert_eq!(s[32 + i], s[32 - i]);
        }
    }
}
