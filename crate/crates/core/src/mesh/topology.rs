use std::collections::{BTreeSet, HashMap, HashSet};

use super::TriMesh;
use crate::{Error, Result};

/// Unique undirected edges `(a, b)` with `a < b`, sorted.
pub fn edges(mesh: &TriMesh) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

/// Sorted neighbor lists per vertex.
pub fn vertex_neighbors(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); mesh.num_vertices()];
    for (a, b) in edges(mesh) {
        nb[a].push(b);
        nb[b].push(a);
    }
    for n in nb.iter_mut() {
        n.sort_unstable();
    }
    nb
}

/// The single boundary cycle of a disk-like mesh, following face orientation
/// (counterclockwise for counterclockwise faces), starting at its lowest index.
///
/// A closed mesh yields an empty list.
pub fn boundary_loop(mesh: &TriMesh) -> Result<Vec<usize>> {
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for f in &mesh.faces {
        for k in 0..3 {
            directed.insert((f[k], f[(k + 1) % 3]));
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) && next.insert(a, b).is_some() {
            return Err(Error::InvalidMesh(format!(
                "vertex {a} has two outgoing boundary edges"
            )));
        }
    }
    if next.is_empty() {
        return Ok(Vec::new());
    }

    let mut remaining: BTreeSet<usize> = next.keys().copied().collect();
    let mut loops = Vec::new();
    while let Some(&start) = remaining.iter().next() {
        let mut cycle = vec![start];
        remaining.remove(&start);
        let mut cur = next[&start];
        while cur != start {
            if !remaining.remove(&cur) {
                return Err(Error::InvalidMesh("boundary edges do not close".into()));
            }
            cycle.push(cur);
            cur = *next
                .get(&cur)
                .ok_or_else(|| Error::InvalidMesh("open boundary chain".into()))?;
        }
        loops.push(cycle);
    }
    if loops.len() > 1 {
        return Err(Error::MultipleBoundaryLoops(loops.len()));
    }
    Ok(loops.pop().unwrap())
}
