//! Sequential conditional sampler for small domains: the first unmatched vertex in row-major
//! order is paired with a later neighbour with probability |det K_rest| / |det K_current|.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::{DimerCover, SamplerError};
use crate::kasteleyn::edge_weight;
use crate::lattice::{LatticeDomain, Site};
use crate::linalg::dense::det_or_zero;

fn count(domain: &LatticeDomain, alive_w: &[bool], alive_b: &[bool]) -> f64 {
    let ws: Vec<Site> = domain.whites().iter().zip(alive_w).filter(|(_, a)| **a).map(|(s, _)| *s).collect();
    let bs: Vec<Site> = domain.blacks().iter().zip(alive_b).filter(|(_, a)| **a).map(|(s, _)| *s).collect();
    if ws.len() != bs.len() {
        return 0.0;
    }
    if ws.is_empty() {
        return 1.0;
    }
    let m = DMatrix::from_fn(ws.len(), bs.len(), |i, j| {
        let (w, b) = (ws[i], bs[j]);
        if (w.x - b.x).abs() + (w.y - b.y).abs() == 1 {
            edge_weight(w, b)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    det_or_zero(m).norm()
}

pub fn sample_determinantal<R: Rng>(domain: &Arc<LatticeDomain>, rng: &mut R) -> Result<DimerCover, SamplerError> {
    let d = domain.as_ref();
    let mut alive_w = vec![true; d.whites().len()];
    let mut alive_b = vec![true; d.blacks().len()];
    let mut current = count(d, &alive_w, &alive_b);
    if current < 0.5 {
        return Err(SamplerError::NoPerfectMatching);
    }
    let mut order: Vec<Site> = d.whites().iter().chain(d.blacks()).copied().collect();
    order.sort_by_key(|s| (s.y, s.x));
    let mut partner = vec![u32::MAX; d.whites().len()];
    for v in order {
        let alive = |s: Site, aw: &[bool], ab: &[bool]| {
            if s.is_black() {
                d.black_index(s).map(|j| ab[j]).unwrap_or(false)
            } else {
                d.white_index(s).map(|i| aw[i]).unwrap_or(false)
            }
        };
        if !alive(v, &alive_w, &alive_b) {
            continue;
        }
        let mut options = Vec::new();
        for u in v.neighbors() {
            if !alive(u, &alive_w, &alive_b) {
                continue;
            }
            let (w, b) = if v.is_black() { (u, v) } else { (v, u) };
            let (i, j) = (d.white_index(w).unwrap(), d.black_index(b).unwrap());
            alive_w[i] = false;
            alive_b[j] = false;
            let c = count(d, &alive_w, &alive_b);
            alive_w[i] = true;
            alive_b[j] = true;
            if c > 0.5 {
                options.push((i, j, c.round()));
            }
        }
        let total: f64 = options.iter().map(|o| o.2).sum();
        if options.is_empty() || (total - current.round()).abs() > 0.5 {
            return Err(SamplerError::NoPerfectMatching);
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = options[options.len() - 1];
        for o in &options {
            if r < o.2 {
                pick = *o;
                break;
            }
            r -= o.2;
        }
        alive_w[pick.0] = false;
        alive_b[pick.1] = false;
        partner[pick.0] = pick.1 as u32;
        current = pick.2;
    }
    Ok(DimerCover::new(domain.clone(), partner))
}
