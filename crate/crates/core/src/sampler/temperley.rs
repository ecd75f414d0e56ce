//! Temperley's bijection: a uniform spanning tree of the primal sublattice (Wilson's
//! algorithm, rooted at the removed black) determines the cover; the dual tree is read off
//! from the unused whites.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::RngCore;

use super::DimerCover;
use crate::lattice::{LatticeDomain, Site};

pub fn sample_temperley<R: RngCore>(domain: &Arc<LatticeDomain>, rng: &mut R) -> DimerCover {
    let (x0, y0, w, h) = domain.grid_box();
    let n = (w * h) as usize;
    let idx = |s: Site| ((s.y - y0) * w + (s.x - x0)) as usize;
    let site = |k: usize| Site::new(x0 + (k as i32 % w), y0 + (k as i32 / w));
    let root = domain.root().expect("Temperleyan domain has a root");
    let tree_sub = domain.tree_sublattice().expect("Temperleyan domain has a tree sublattice");

    let mut white_in = vec![false; n];
    for &s in domain.whites() {
        white_in[idx(s)] = true;
    }
    let off: [isize; 4] = [1, w as isize, -1, -(w as isize)];

    // 0 = not visited, 1 = in tree
    let mut state = vec![0u8; n];
    let mut next = vec![0u8; n];
    state[idx(root)] = 1;
    let mut bits = 0u64;
    let mut nbits = 0u32;
    let primal: Vec<usize> = domain.blacks().iter().filter(|b| b.sublattice() == Some(tree_sub)).map(|&b| idx(b)).collect();
    for &v in &primal {
        let mut u = v;
        while state[u] == 0 {
            loop {
                if nbits < 2 {
                    bits = rng.next_u64();
                    nbits = 64;
                }
                let d = (bits & 3) as usize;
                bits >>= 2;
                nbits -= 2;
                let wk = (u as isize + off[d]) as usize;
                if white_in[wk] {
                    next[u] = d as u8;
                    u = (u as isize + 2 * off[d]) as usize;
                    break;
                }
            }
        }
        let mut u = v;
        while state[u] == 0 {
            state[u] = 1;
            u = (u as isize + 2 * off[next[u] as usize]) as usize;
        }
    }

    let mut partner = vec![u32::MAX; domain.whites().len()];
    let mut white_used = vec![false; n];
    for &v in &primal {
        let wk = (v as isize + off[next[v] as usize]) as usize;
        white_used[wk] = true;
        let wi = domain.white_index(site(wk)).expect("tree white in domain");
        partner[wi] = domain.black_index(site(v)).expect("primal black in domain") as u32;
    }

    // Dual tree on the remaining whites, explored from the outer face.
    let mut dual_seen = vec![false; n];
    let mut queue = VecDeque::new();
    for (wi, &ws) in domain.whites().iter().enumerate() {
        let wk = idx(ws);
        if white_used[wk] {
            continue;
        }
        for d in 0..4 {
            let a = (wk as isize + off[d]) as usize;
            let b = (wk as isize - off[d]) as usize;
            let (sa, sb) = (site(a), site(b));
            if sa.sublattice() == Some(tree_sub) || domain.black_index(sa).is_some() == domain.black_index(sb).is_some() {
                continue;
            }
            if domain.black_index(sa).is_none() {
                // a is the outer face, b the inner dual vertex
                if !dual_seen[b] {
                    dual_seen[b] = true;
                    white_used[wk] = true;
                    partner[wi] = domain.black_index(sb).unwrap() as u32;
                    queue.push_back(b);
                }
                break;
            }
        }
    }
    while let Some(dv) = queue.pop_front() {
        for o in off {
            let wk = (dv as isize + o) as usize;
            if !white_in[wk] || white_used[wk] {
                continue;
            }
            let other = (dv as isize + 2 * o) as usize;
            let so = site(other);
            if let Some(bj) = domain.black_index(so) {
                if !dual_seen[other] {
                    dual_seen[other] = true;
                    white_used[wk] = true;
                    partner[domain.white_index(site(wk)).unwrap()] = bj as u32;
                    queue.push_back(other);
                }
            }
        }
    }
    debug_assert!(partner.iter().all(|&p| p != u32::MAX), "Temperley bijection left a white unmatched");
    DimerCover::new(domain.clone(), partner)
}
