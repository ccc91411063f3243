//! Linear assignment by shortest augmenting paths, with exact uniform
//! sampling over the set of optimal permutations.

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::permutation::Permutation;
use crate::rng::RngHandle;

/// Tight-graph counting is exact up to this size; beyond it ties are broken
/// by a random secondary cost restricted to optimal edges.
pub const EXACT_TIE_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentResult {
    /// Row `i` is assigned to column `permutation.apply(i)`.
    pub permutation: Permutation,
    /// Mean cost `(1/n) Σ cost[i][σ(i)]`.
    pub cost: f64,
    pub multiple_optima: bool,
}

/// Optimal assignment and the dual potentials certifying it.
struct Solved {
    row_to_col: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn check_square(cost: &[Vec<f64>]) -> Result<usize> {
    let n = cost.len();
    if n == 0 {
        return domain("assignment needs at least one row");
    }
    if cost.iter().any(|r| r.len() != n) {
        return domain("assignment cost matrix must be square");
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return domain("assignment costs must be finite");
    }
    Ok(n)
}

/// O(n³) Hungarian method with potentials.
fn hungarian(cost: &[Vec<f64>]) -> Solved {
    let n = cost.len();
    // 1-based arrays; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    Solved {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

fn tolerance(cost: &[Vec<f64>]) -> f64 {
    let scale = cost.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    1e-9 * scale
}

/// Edges of zero reduced cost: exactly the edges used by some optimum.
fn tight_graph(cost: &[Vec<f64>], s: &Solved) -> Vec<Vec<bool>> {
    let tol = tolerance(cost);
    let n = cost.len();
    (0..n)
        .map(|i| (0..n).map(|j| cost[i][j] - s.u[i] - s.v[j] <= tol).collect())
        .collect()
}

fn mean_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / perm.len() as f64
}

/// An alternating cycle through the matching in the tight graph exists iff
/// the optimum is not unique.
fn has_alternative(tight: &[Vec<bool>], row_to_col: &[usize]) -> bool {
    let n = tight.len();
    let mut col_to_row = vec![0; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    // Directed graph on rows: i -> col_to_row[j] for tight non-matching (i, j).
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| tight[i][j] && j != row_to_col[i])
                .map(|j| col_to_row[j])
                .collect()
        })
        .collect();
    // 0 = unvisited, 1 = on stack, 2 = done.
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < succ[node].len() {
                let m = succ[node][*next];
                *next += 1;
                match state[m] {
                    0 => {
                        state[m] = 1;
                        stack.push((m, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    false
}

/// Deterministic optimal assignment minimising `Σ cost[i][σ(i)]`.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    check_square(cost)?;
    let s = hungarian(cost);
    let tight = tight_graph(cost, &s);
    Ok(AssignmentResult {
        cost: mean_cost(cost, &s.row_to_col),
        multiple_optima: has_alternative(&tight, &s.row_to_col),
        permutation: Permutation::from_vec_unchecked(s.row_to_col),
    })
}

/// `ways[mask]`: perfect matchings of rows `popcount(mask)..n` into the
/// columns outside `mask`, using tight edges only.
fn matching_table(tight: &[Vec<bool>]) -> Vec<u128> {
    let n = tight.len();
    let full = (1usize << n) - 1;
    let mut ways = vec![0u128; 1 << n];
    ways[full] = 1;
    for mask in (0..full).rev() {
        let row = mask.count_ones() as usize;
        let mut total = 0u128;
        for j in 0..n {
            if mask & (1 << j) == 0 && tight[row][j] {
                total += ways[mask | (1 << j)];
            }
        }
        ways[mask] = total;
    }
    ways
}

/// Number of optimal permutations (exact for `n ≤ EXACT_TIE_MAX_N`).
pub fn count_optimal_assignments(cost: &[Vec<f64>]) -> Result<u128> {
    let n = check_square(cost)?;
    if n > EXACT_TIE_MAX_N {
        return Err(crate::Error::Resource(format!(
            "counting optimal assignments is limited to n ≤ {EXACT_TIE_MAX_N}"
        )));
    }
    let s = hungarian(cost);
    Ok(matching_table(&tight_graph(cost, &s))[0])
}

/// An optimal assignment drawn uniformly from the set of all optimal
/// permutations. Above [`EXACT_TIE_MAX_N`] the draw is an optimum chosen by
/// random secondary costs on tight edges; it is optimal but not exactly
/// uniform.
pub fn sample_optimal_assignment(cost: &[Vec<f64>], rng: &mut RngHandle) -> Result<AssignmentResult> {
    let n = check_square(cost)?;
    let s = hungarian(cost);
    let tight = tight_graph(cost, &s);
    let multiple = has_alternative(&tight, &s.row_to_col);
    if !multiple {
        return Ok(AssignmentResult {
            cost: mean_cost(cost, &s.row_to_col),
            multiple_optima: false,
            permutation: Permutation::from_vec_unchecked(s.row_to_col),
        });
    }
    let perm = if n <= EXACT_TIE_MAX_N {
        let ways = matching_table(&tight);
        let mut mask = 0usize;
        let mut perm = Vec::with_capacity(n);
        for row in 0..n {
            let mut pick = rng.random_range(0..ways[mask]);
            let mut chosen = n;
            for j in 0..n {
                if mask & (1 << j) == 0 && tight[row][j] {
                    let w = ways[mask | (1 << j)];
                    if pick < w {
                        chosen = j;
                        break;
                    }
                    pick -= w;
                }
            }
            debug_assert!(chosen < n);
            perm.push(chosen);
            mask |= 1 << chosen;
        }
        perm
    } else {
        let secondary: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if tight[i][j] { rng.random::<f64>() } else { 1e6 })
                    .collect()
            })
            .collect();
        hungarian(&secondary).row_to_col
    };
    Ok(AssignmentResult {
        cost: mean_cost(cost, &perm),
        multiple_optima: true,
        permutation: Permutation::from_vec_unchecked(perm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;

    fn brute(cost: &[Vec<f64>]) -> (f64, usize) {
        let n = cost.len();
        let mut best = f64::INFINITY;
        let mut count = 0;
        for p in Permutation::all(n) {
            let c = mean_cost(cost, p.images());
            if c < best - 1e-12 {
                best = c;
                count = 1;
            } else if (c - best).abs() <= 1e-12 {
                count += 1;
            }
        }
        (best, count)
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = RngHandle::new(11, 0);
        for trial in 0..200 {
            let n = 1 + trial % 7;
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| (rng.random_range(0..4) as f64) * 0.25).collect())
                .collect();
            let r = solve_assignment(&cost).unwrap();
            let (best, count) = brute(&cost);
            assert!((r.cost - best).abs() < 1e-12);
            assert_eq!(r.multiple_optima, count > 1, "{cost:?}");
            assert_eq!(count_optimal_assignments(&cost).unwrap(), count as u128);
        }
    }

    #[test]
    fn uniform_over_ties() {
        // All-zero 3×3 costs: every permutation optimal.
        let cost = vec![vec![0.0; 3]; 3];
        let all: Vec<Permutation> = Permutation::all(3).collect();
        let mut rng = RngHandle::new(3, 3);
        let mut counts = vec![0u64; 6];
        for _ in 0..30_000 {
            let r = sample_optimal_assignment(&cost, &mut rng).unwrap();
            counts[all.binary_search(&r.permutation).unwrap()] += 1;
        }
        assert!(chi_square_gof(&counts, &[1.0 / 6.0; 6]).unwrap().p_value > 0.001);
    }

    #[test]
    fn large_ties_are_still_optimal() {
        let n = 24;
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| ((i % 3) as f64 - (j % 3) as f64).abs()).collect())
            .collect();
        let det = solve_assignment(&cost).unwrap();
        let mut rng = RngHandle::new(1, 0);
        let r = sample_optimal_assignment(&cost, &mut rng).unwrap();
        assert!((r.cost - det.cost).abs() < 1e-12);
        assert!(r.multiple_optima);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_assignment(&[]).is_err());
        assert!(solve_assignment(&[vec![1.0, 2.0]]).is_err());
    }
}
