//! Exact uniform dimer covers, double-dimer superposition, loops, height and nesting.

mod determinantal;
mod double;
mod temperley;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{DomainKind, LatticeDomain, Site};

pub use determinantal::sample_determinantal;
pub use double::{superimpose, DoubleDimerConfig, HeightField, Loop};
pub use temperley::sample_temperley;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("domain has no perfect matching")]
    NoPerfectMatching,
    #[error("covers belong to different domains")]
    DomainMismatch,
    #[error("face {0:?} is outside the domain")]
    FaceOutsideDomain(Site),
}

/// A perfect matching, stored as white index → black index.
#[derive(Debug, Clone)]
pub struct DimerCover {
    domain: Arc<LatticeDomain>,
    partner: Vec<u32>,
}

impl DimerCover {
    pub fn new(domain: Arc<LatticeDomain>, partner: Vec<u32>) -> Self {
        DimerCover { domain, partner }
    }
    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }
    /// Black partner index of white `i`.
    pub fn partner_of_white(&self, i: usize) -> usize {
        self.partner[i] as usize
    }
    pub fn partners(&self) -> &[u32] {
        &self.partner
    }
    /// Dimers as (white, black) pairs.
    pub fn dimers(&self) -> Vec<(Site, Site)> {
        let d = &self.domain;
        self.partner.iter().enumerate().map(|(i, &j)| (d.whites()[i], d.blacks()[j as usize])).collect()
    }
    /// Bijection onto the blacks with every pair adjacent.
    pub fn is_valid(&self) -> bool {
        let d = &self.domain;
        if self.partner.len() != d.whites().len() || d.whites().len() != d.blacks().len() {
            return false;
        }
        let mut seen = vec![false; d.blacks().len()];
        for (i, &j) in self.partner.iter().enumerate() {
            let (w, b) = (d.whites()[i], d.blacks()[j as usize]);
            if seen[j as usize] || (w.x - b.x).abs() + (w.y - b.y).abs() != 1 {
                return false;
            }
            seen[j as usize] = true;
        }
        true
    }
}

impl PartialEq for DimerCover {
    fn eq(&self, other: &Self) -> bool {
        self.partner == other.partner && self.domain.blacks() == other.domain.blacks()
    }
}

#[derive(Serialize)]
struct CoverDto {
    dimers: Vec<(Site, Site)>,
}

impl DimerCover {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CoverDto { dimers: self.dimers() }).expect("serializable")
    }
}

/// Generator for stream `stream` of `seed`; independent of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform cover: spanning-tree bijection for Temperleyan domains, determinantal conditioning otherwise.
pub fn sample_cover(domain: &Arc<LatticeDomain>, seed: u64) -> Result<DimerCover, SamplerError> {
    sample_cover_stream(domain, seed, 0)
}

pub fn sample_cover_stream(domain: &Arc<LatticeDomain>, seed: u64, stream: u64) -> Result<DimerCover, SamplerError> {
    let mut rng = stream_rng(seed, stream);
    match domain.kind() {
        DomainKind::Temperleyan | DomainKind::HalfPlaneBox => Ok(sample_temperley(domain, &mut rng)),
        DomainKind::Block => sample_determinantal(domain, &mut rng),
    }
}

/// Sample `i` of a double-dimer run: two independent covers on streams 2i and 2i+1.
pub fn sample_double(domain: &Arc<LatticeDomain>, seed: u64, i: u64) -> Result<DoubleDimerConfig, SamplerError> {
    let d1 = sample_cover_stream(domain, seed, 2 * i)?;
    let d2 = sample_cover_stream(domain, seed, 2 * i + 1)?;
    superimpose(&d1, &d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn temperley_covers_are_perfect_matchings() {
        let d = Arc::new(LatticeDomain::build_halfplane_box(1.0, 15, 11).unwrap());
        for s in 0..5 {
            let c = sample_cover(&d, s).unwrap();
            assert!(c.is_valid());
        }
        assert_eq!(sample_cover(&d, 9).unwrap(), sample_cover(&d, 9).unwrap());
        assert_ne!(sample_cover(&d, 9).unwrap(), sample_cover(&d, 10).unwrap());
    }

    #[test]
    fn determinantal_covers_are_perfect_matchings() {
        let d = Arc::new(LatticeDomain::block(1.0, 4, 4, Site::new(0, 0)).unwrap());
        for s in 0..5 {
            assert!(sample_cover(&d, s).unwrap().is_valid());
        }
        let odd = Arc::new(LatticeDomain::block(1.0, 3, 3, Site::new(0, 0)).unwrap());
        assert_eq!(sample_cover(&odd, 0).unwrap_err(), SamplerError::NoPerfectMatching);
    }

    #[test]
    fn superposition_invariants() {
        let d = Arc::new(LatticeDomain::build_halfplane_box(1.0, 9, 9).unwrap());
        let a = sample_cover(&d, 1).unwrap();
        let same = superimpose(&a, &a).unwrap();
        assert!(same.loops.is_empty());
        assert!(same.height().values().iter().all(|&h| h == 0));
        for i in 0..10 {
            let c = sample_double(&d, 3, i).unwrap();
            let mut deg: HashMap<Site, usize> = HashMap::new();
            for l in &c.loops {
                for v in &l.vertices {
                    *deg.entry(*v).or_default() += 2;
                }
                for k in 0..l.len() {
                    let (p, q) = (l.vertices[k], l.vertices[(k + 1) % l.len()]);
                    assert_eq!((p.x - q.x).abs() + (p.y - q.y).abs(), 1);
                }
            }
            for (w, b) in &c.doubled_edges {
                *deg.entry(*w).or_default() += 2;
                *deg.entry(*b).or_default() += 2;
            }
            assert_eq!(deg.len(), d.vertex_count());
            assert!(deg.values().all(|&k| k == 2));
            let hf = c.height();
            for &f in d.faces() {
                assert_eq!(hf.get(f), c.height_at(f));
                let n = c.nesting_number(&[f]).unwrap();
                assert_eq!(hf.nesting(f) as usize, n);
                assert!(hf.get(f).unsigned_abs() as usize <= n);
            }
        }
    }

    #[test]
    fn two_by_two_loop_and_height() {
        let d = Arc::new(LatticeDomain::block(1.0, 2, 2, Site::new(0, 0)).unwrap());
        // whites (1,0), (0,1); blacks (0,0), (1,1)
        let horiz = DimerCover::new(d.clone(), vec![d.black_index(Site::new(0, 0)).unwrap() as u32, d.black_index(Site::new(1, 1)).unwrap() as u32]);
        let vert = DimerCover::new(d.clone(), vec![d.black_index(Site::new(1, 1)).unwrap() as u32, d.black_index(Site::new(0, 0)).unwrap() as u32]);
        assert!(horiz.is_valid() && vert.is_valid());
        let c = superimpose(&horiz, &vert).unwrap();
        assert_eq!(c.loops.len(), 1);
        assert_eq!(c.loops[0].len(), 4);
        let f = Site::new(0, 0);
        let inside = c.height_at(f);
        assert_eq!(inside, c.loops[0].sign());
        let ccw = c.with_orientations(&[1]);
        assert_eq!(ccw.height_at(f), -1);
        assert_eq!(c.nesting_number(&[f]).unwrap(), 1);
        assert!(c.nesting_number(&[Site::new(5, 5)]).is_err());
    }
}
