use crate::graph::MolGraph;

/// Promotes a perfect matching of `needs_double` atoms over the aromatic
/// bonds to double bonds. Returns an unmatched atom on failure.
pub(super) fn kekulize(g: &mut MolGraph, needs_double: &[bool], aromatic_bonds: &[(usize, usize)]) -> Result<(), usize> {
    let n = g.atom_count();
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in aromatic_bonds {
        if needs_double[a] && needs_double[b] {
            candidates[a].push(b);
            candidates[b].push(a);
        }
    }
    let mut mate = vec![usize::MAX; n];
    if !match_all(&candidates, needs_double, &mut mate) {
        let stuck = (0..n)
            .find(|&v| needs_double[v] && candidates[v].is_empty())
            .or_else(|| (0..n).find(|&v| needs_double[v]))
            .unwrap_or(0);
        return Err(stuck);
    }
    for v in 0..n {
        let w = mate[v];
        if w != usize::MAX && v < w {
            g.set_bond_order(v, w, 2);
        }
    }
    Ok(())
}

fn match_all(candidates: &[Vec<usize>], needs: &[bool], mate: &mut [usize]) -> bool {
    // Most constrained unmatched atom first.
    let next = (0..needs.len())
        .filter(|&v| needs[v] && mate[v] == usize::MAX)
        .min_by_key(|&v| candidates[v].iter().filter(|&&w| mate[w] == usize::MAX).count());
    let Some(v) = next else {
        return true;
    };
    for i in 0..candidates[v].len() {
        let w = candidates[v][i];
        if mate[w] != usize::MAX {
            continue;
        }
        mate[v] = w;
        mate[w] = v;
        if match_all(candidates, needs, mate) {
            return true;
        }
        mate[v] = usize::MAX;
        mate[w] = usize::MAX;
    }
    false
}
