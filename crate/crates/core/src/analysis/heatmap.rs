use crate::metrics::{column_f1, ResponseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapCell {
    pub variability_bin: usize,
    pub rarity_bin: usize,
    /// Mean per-question F1; `None` marks an empty (flagged) cell.
    pub value: Option<f64>,
    /// Questions that contributed.
    pub questions: usize,
}

/// 5 × 5 grid, row-major by variability bin then rarity bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub cells: Vec<HeatmapCell>,
}

impl Heatmap {
    pub fn cell(&self, variability_bin: usize, rarity_bin: usize) -> &HeatmapCell {
        &self.cells[variability_bin * 5 + rarity_bin]
    }

    pub fn flagged(&self) -> usize {
        self.cells.iter().filter(|c| c.value.is_none()).count()
    }
}

/// Cell (v, r) averages, over the questions in variability bin `v`, each
/// question's weighted F1 computed only on respondents in rarity bin `r`.
/// Averaging over questions keeps cells with many rows from dominating.
///
/// `variability_bins` is per column (`None` for unscored questions) and
/// `rarity_bins` per row (`None` for respondents without answers).
pub fn heatmap_matrix(
    x: &ResponseMatrix,
    xhat: &ResponseMatrix,
    variability_bins: &[Option<usize>],
    rarity_bins: &[Option<usize>],
) -> Heatmap {
    let rows_in: Vec<Vec<usize>> = (0..5)
        .map(|b| (0..x.n_rows()).filter(|&r| rarity_bins[r] == Some(b)).collect())
        .collect();
    let mut cells = Vec::with_capacity(25);
    for v in 0..5 {
        let cols: Vec<usize> = (0..x.n_cols()).filter(|&c| variability_bins[c] == Some(v)).collect();
        for (r, rows) in rows_in.iter().enumerate() {
            let scores: Vec<f64> = cols.iter().filter_map(|&c| column_f1(x, xhat, c, rows)).collect();
            cells.push(HeatmapCell {
                variability_bin: v,
                rarity_bin: r,
                value: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
                questions: scores.len(),
            });
        }
    }
    Heatmap { cells }
}
