use crate::masking::MeasurementMask;

/// Measured pixels bucketed into square cells for nearest-neighbour queries.
pub(crate) struct MeasuredIndex {
    cell: usize,
    cells_h: usize,
    cells_w: usize,
    /// Row-major pixel indices per cell, ascending.
    buckets: Vec<Vec<usize>>,
    width: usize,
}

/// A neighbour: squared distance and row-major pixel index.
pub(crate) type Neighbour = (usize, usize);

impl MeasuredIndex {
    pub fn new(mask: &MeasurementMask) -> Self {
        let (h, w) = (mask.height(), mask.width());
        let spacing = ((h * w) as f64 / mask.n_measured().max(1) as f64).sqrt();
        let cell = (spacing.round() as usize).clamp(1, h.max(w).max(1));
        let cells_h = h.div_ceil(cell);
        let cells_w = w.div_ceil(cell);
        let mut buckets = vec![Vec::new(); cells_h * cells_w];
        for ((i, j), &b) in mask.bits().indexed_iter() {
            if b {
                buckets[(i / cell) * cells_w + j / cell].push(i * w + j);
            }
        }
        Self {
            cell,
            cells_h,
            cells_w,
            buckets,
            width: w,
        }
    }

    /// The `k` nearest measured pixels to `(i, j)` ordered by distance, ties
    /// by row-major index.
    pub fn nearest(&self, i: usize, j: usize, k: usize, out: &mut Vec<Neighbour>) {
        out.clear();
        if k == 0 {
            return;
        }
        let (ci, cj) = ((i / self.cell) as isize, (j / self.cell) as isize);
        let max_ring = self.cells_h.max(self.cells_w) as isize;
        for ring in 0..=max_ring {
            for di in -ring..=ring {
                let on_edge_row = di.abs() == ring;
                let step = if on_edge_row { 1 } else { (2 * ring).max(1) };
                let mut dj = -ring;
                while dj <= ring {
                    self.visit(ci + di, cj + dj, i, j, k, out);
                    dj += step;
                }
            }
            // every cell beyond this ring is at least ring·cell + 1 away
            if out.len() == k {
                let bound = (ring as usize * self.cell) as f64;
                if (out[k - 1].0 as f64).sqrt() <= bound {
                    return;
                }
            }
        }
    }

    fn visit(&self, ci: isize, cj: isize, i: usize, j: usize, k: usize, out: &mut Vec<Neighbour>) {
        if ci < 0 || cj < 0 || ci as usize >= self.cells_h || cj as usize >= self.cells_w {
            return;
        }
        for &p in &self.buckets[ci as usize * self.cells_w + cj as usize] {
            let (pi, pj) = (p / self.width, p % self.width);
            let d2 = pi.abs_diff(i).pow(2) + pj.abs_diff(j).pow(2);
            let cand = (d2, p);
            if out.len() == k && cand >= out[k - 1] {
                continue;
            }
            let pos = out.partition_point(|&c| c < cand);
            out.insert(pos, cand);
            out.truncate(k);
        }
    }
}
