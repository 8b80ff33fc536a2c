use super::{dot, SpectralDecomposition, C64};
use crate::error::{Result, SpecError};

/// Outcome of [`align_eigenvectors`].
#[derive(Debug, Clone)]
pub struct Alignment {
    /// `cur` with columns permuted and rotated to follow `prev`.
    pub decomp: SpectralDecomposition,
    /// `permutation[k]` is the column of `cur` placed at position `k`.
    pub permutation: Vec<usize>,
    /// Phases applied to the permuted columns.
    pub phases: Vec<C64>,
    /// `|<prev_k, aligned_k>|` for each position.
    pub overlaps: Vec<f64>,
    /// Two candidate overlaps were within `AMBIGUITY` of each other somewhere.
    pub ambiguous: bool,
}

pub const AMBIGUITY: f64 = 1e-6;

/// Permutes and phase-rotates the columns of `cur` so each has maximal
/// overlap with the matching column of `prev`, and that overlap is real
/// nonnegative. Pairs are assigned greedily by decreasing overlap; ties go to
/// the smaller index.
pub fn align_eigenvectors(prev: &SpectralDecomposition, cur: &SpectralDecomposition) -> Result<Alignment> {
    let n = prev.dim();
    if cur.dim() != n {
        return Err(SpecError::DimensionMismatch { expected: n, got: cur.dim() });
    }
    let pv: Vec<Vec<C64>> = (0..n).map(|k| prev.vector(k)).collect();
    let cv: Vec<Vec<C64>> = (0..n).map(|k| cur.vector(k)).collect();
    let ov: Vec<Vec<C64>> = pv.iter().map(|p| cv.iter().map(|c| dot(p, c)).collect()).collect();

    let mut ambiguous = false;
    for row in &ov {
        let mut mags: Vec<f64> = row.iter().map(|x| x.norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        if n > 1 && mags[0] - mags[1] < AMBIGUITY {
            ambiguous = true;
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |j| (k, j))).collect();
    pairs.sort_by(|a, b| {
        ov[b.0][b.1].norm().total_cmp(&ov[a.0][a.1].norm()).then(a.cmp(b))
    });
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (k, j) in pairs {
        if perm[k] == usize::MAX && !used[j] {
            perm[k] = j;
            used[j] = true;
        }
    }

    let mut out = cur.clone();
    let mut phases = Vec::with_capacity(n);
    let mut overlaps = Vec::with_capacity(n);
    for k in 0..n {
        let j = perm[k];
        let o = ov[k][j];
        let ph = if o.norm() > 0.0 { o.conj() / o.norm() } else { C64::new(1.0, 0.0) };
        let col: Vec<C64> = cv[j].iter().map(|x| x * ph).collect();
        out.vectors.set_column(k, &col);
        out.eigenvalues[k] = cur.eigenvalues[j];
        out.labels[k] = cur.labels[j];
        phases.push(ph);
        overlaps.push(o.norm());
    }
    Ok(Alignment { decomp: out, permutation: perm, phases, overlaps, ambiguous })
}
