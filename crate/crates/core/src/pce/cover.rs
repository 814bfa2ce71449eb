/// Differences within this distance of `eps` count as equal to it, so the
/// strict comparisons treat decimal boundaries like `|0.5 - 0.6|` exactly.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// `|v_ij - v_ii| < eps` and `|v_ij - v_jj| < eps`.
pub fn cnd(v_ij: f64, v_ii: f64, v_jj: f64, epsilon: f64) -> bool {
    let limit = epsilon - BOUNDARY_TOL;
    (v_ij - v_ii).abs() < limit && (v_ij - v_jj).abs() < limit
}

/// `A[i][j]`: pair `j` covers task `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl CoverMatrix {
    /// Square matrix from row-major cells.
    pub fn from_cells(n: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), n * n, "cover matrix must be square");
        Self { n, cells }
    }

    /// `values[i * n + j]` is the estimated value of policy `j` on task `i`.
    pub fn from_values(n: usize, values: &[f64], epsilon: f64) -> Self {
        assert_eq!(values.len(), n * n, "value grid must be square");
        let mut cells = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                cells[i * n + j] = cnd(
                    values[i * n + j],
                    values[i * n + i],
                    values[j * n + j],
                    epsilon,
                );
            }
        }
        Self { n, cells }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn diagonal_holds(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i))
    }
}

/// Greedy cover: repeatedly take the column covering the most uncovered rows
/// (lowest index on ties) until at least `(1 - 3 delta) N` rows are covered.
/// Returns columns in pick order.
pub fn greedy_cover(matrix: &CoverMatrix, delta: f64) -> Vec<usize> {
    let n = matrix.size();
    let target = (1.0 - 3.0 * delta) * n as f64 - 1e-9;
    let mut uncovered = vec![true; n];
    let mut chosen = vec![false; n];
    let mut picks = Vec::new();
    let mut covered = 0usize;
    while picks.is_empty() || (covered as f64) < target {
        let mut best = None;
        let mut best_count = 0;
        for j in (0..n).filter(|j| !chosen[*j]) {
            let count = (0..n)
                .filter(|i| uncovered[*i] && matrix.get(*i, j))
                .count();
            if best.is_none() || count > best_count {
                best = Some(j);
                best_count = count;
            }
        }
        let Some(j) = best else { break };
        chosen[j] = true;
        for i in 0..n {
            if uncovered[i] && matrix.get(i, j) {
                uncovered[i] = false;
            }
        }
        covered += best_count;
        picks.push(j);
    }
    picks
}
