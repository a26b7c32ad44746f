//! Shallow Fourier networks `sum_s u_s exp(i (sum_j s_j w_j) . x)` with
//! frequencies kept as integer multi-indices over a generating set.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::ln_binom;
use crate::uniapprox::{TrigPoly, UniPoly};

pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FourierError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("projected atom count {projected:.3e} exceeds the cap {cap}")]
    BudgetExceeded { projected: f64, cap: usize },
    #[error("json: {0}")]
    Json(String),
}

pub type MultiIndex = Vec<i32>;

/// Fourier net over an ambient dimension `dim`. Atoms are sorted by
/// multi-index and never repeat one.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierNet {
    dim: usize,
    basis: Vec<Vec<f64>>,
    atoms: Vec<(MultiIndex, Complex64)>,
    freqs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    s: Vec<i32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct NetJson {
    #[serde(default)]
    dim: Option<usize>,
    basis: Vec<Vec<f64>>,
    atoms: Vec<AtomJson>,
}

impl Serialize for FourierNet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        NetJson {
            dim: Some(self.dim),
            basis: self.basis.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|(s, u)| AtomJson {
                    s: s.clone(),
                    re: u.re,
                    im: u.im,
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierNet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = NetJson::deserialize(de)?;
        let dim = match (raw.dim, raw.basis.first()) {
            (Some(d), _) => d,
            (None, Some(b)) => b.len(),
            (None, None) => {
                return Err(serde::de::Error::custom(
                    "empty basis needs an explicit dim",
                ))
            }
        };
        let atoms = raw
            .atoms
            .into_iter()
            .map(|a| (a.s, Complex64::new(a.re, a.im)))
            .collect();
        FourierNet::from_parts(dim, raw.basis, atoms).map_err(serde::de::Error::custom)
    }
}

impl FourierNet {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            basis: Vec::new(),
            atoms: Vec::new(),
            freqs: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::from_parts(dim, Vec::new(), vec![(Vec::new(), c)])
            .expect("constant net is well formed")
    }

    /// Builds a net, merging repeated multi-indices and dropping exact zeros.
    pub fn from_parts(
        dim: usize,
        basis: Vec<Vec<f64>>,
        atoms: Vec<(MultiIndex, Complex64)>,
    ) -> Result<Self, FourierError> {
        for b in &basis {
            if b.len() != dim {
                return Err(FourierError::Shape {
                    expected: dim,
                    got: b.len(),
                });
            }
        }
        let width = basis.len();
        let mut map: HashMap<MultiIndex, Complex64> = HashMap::with_capacity(atoms.len());
        for (mut s, u) in atoms {
            if s.len() > width {
                return Err(FourierError::Shape {
                    expected: width,
                    got: s.len(),
                });
            }
            s.resize(width, 0);
            *map.entry(s).or_default() += u;
        }
        Ok(Self::from_map(dim, basis, map))
    }

    fn from_map(dim: usize, basis: Vec<Vec<f64>>, map: HashMap<MultiIndex, Complex64>) -> Self {
        let mut atoms: Vec<_> = map
            .into_iter()
            .filter(|(_, u)| *u != Complex64::new(0.0, 0.0))
            .collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut net = Self {
            dim,
            basis,
            atoms,
            freqs: Vec::new(),
        };
        net.freqs = net.compute_freqs();
        net
    }

    fn compute_freqs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.atoms.len() * self.dim];
        for (a, (s, _)) in self.atoms.iter().enumerate() {
            let row = &mut out[a * self.dim..(a + 1) * self.dim];
            for (sj, bj) in s.iter().zip(&self.basis) {
                if *sj != 0 {
                    for (r, b) in row.iter_mut().zip(bj) {
                        *r += *sj as f64 * b;
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn atoms(&self) -> &[(MultiIndex, Complex64)] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Frequency vector of atom `i`.
    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.freqs[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest `|u_s|`.
    pub fn coeff_bound(&self) -> f64 {
        self.atoms.iter().map(|(_, u)| u.norm()).fold(0.0, f64::max)
    }

    /// Sum of `|u_s|`, a bound on `sup |f|`.
    pub fn coeff_l1(&self) -> f64 {
        self.atoms.iter().map(|(_, u)| u.norm()).sum()
    }

    /// Largest `|w_s . x|` over the ball `|x|_2 <= radius`.
    pub fn freq_bound_l2(&self, radius: f64) -> f64 {
        (0..self.atoms.len())
            .map(|i| self.frequency(i).iter().map(|v| v * v).sum::<f64>().sqrt() * radius)
            .fold(0.0, f64::max)
    }

    /// Largest `|w_s . x|` over the cube `|x|_inf <= radius`.
    pub fn freq_bound_linf(&self, radius: f64) -> f64 {
        (0..self.atoms.len())
            .map(|i| self.frequency(i).iter().map(|v| v.abs()).sum::<f64>() * radius)
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64, FourierError> {
        if x.len() != self.dim {
            return Err(FourierError::Shape {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, (_, u))| {
                let phase: f64 = self.frequency(i).iter().zip(x).map(|(w, v)| w * v).sum();
                u * Complex64::from_polar(1.0, phase)
            })
            .sum())
    }

    /// Evaluates at many points using per-basis phase tables.
    pub fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Complex64>, FourierError> {
        if let Some(p) = points.iter().find(|p| p.len() != self.dim) {
            return Err(FourierError::Shape {
                expected: self.dim,
                got: p.len(),
            });
        }
        let width = self.basis.len();
        let mut lo = vec![0i32; width];
        let mut hi = vec![0i32; width];
        for (s, _) in &self.atoms {
            for j in 0..width {
                lo[j] = lo[j].min(s[j]);
                hi[j] = hi[j].max(s[j]);
            }
        }
        let sparse: Vec<(Vec<(usize, i32)>, Complex64)> = self
            .atoms
            .iter()
            .map(|(s, u)| {
                (
                    s.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0)
                        .map(|(j, v)| (j, *v))
                        .collect(),
                    *u,
                )
            })
            .collect();
        Ok(points
            .par_iter()
            .map(|x| {
                let tables: Vec<Vec<Complex64>> = (0..width)
                    .map(|j| {
                        let theta: f64 = self.basis[j].iter().zip(x).map(|(w, v)| w * v).sum();
                        (lo[j]..=hi[j])
                            .map(|k| Complex64::from_polar(1.0, k as f64 * theta))
                            .collect()
                    })
                    .collect();
                sparse
                    .iter()
                    .map(|(entries, u)| {
                        entries
                            .iter()
                            .fold(*u, |acc, (j, k)| acc * tables[*j][(*k - lo[*j]) as usize])
                    })
                    .sum()
            })
            .collect())
    }

    /// Re-expresses the net over a larger basis given by `map[j]` = new index of old basis `j`.
    fn reindexed(&self, width: usize, map: &[usize]) -> Vec<(MultiIndex, Complex64)> {
        self.atoms
            .iter()
            .map(|(s, u)| {
                let mut t = vec![0; width];
                for (j, v) in s.iter().enumerate() {
                    t[map[j]] = *v;
                }
                (t, *u)
            })
            .collect()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let atoms = self.atoms.iter().map(|(s, u)| (s.clone(), u * c)).collect();
        let mut net = Self {
            dim: self.dim,
            basis: self.basis.clone(),
            atoms,
            freqs: Vec::new(),
        };
        if c == Complex64::new(0.0, 0.0) {
            net.atoms.clear();
        }
        net.freqs = net.compute_freqs();
        net
    }

    pub fn to_json_string(&self) -> Result<String, FourierError> {
        serde_json::to_string(self).map_err(|e| FourierError::Json(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self, FourierError> {
        serde_json::from_str(s).map_err(|e| FourierError::Json(e.to_string()))
    }
}

// Union of bases by exact bit equality; returns the union and per-net index maps.
fn union_basis(nets: &[&FourierNet]) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
    let maps = nets
        .iter()
        .map(|n| {
            n.basis
                .iter()
                .map(|b| {
                    let key: Vec<u64> = b
                        .iter()
                        .map(|v| if *v == 0.0 { 0 } else { v.to_bits() })
                        .collect();
                    *keys.entry(key).or_insert_with(|| {
                        basis.push(b.clone());
                        basis.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    (basis, maps)
}

fn check_dims(nets: &[&FourierNet]) -> Result<usize, FourierError> {
    let dim = nets
        .first()
        .map(|n| n.dim)
        .ok_or_else(|| FourierError::Domain("no nets given".into()))?;
    for n in nets {
        if n.dim != dim {
            return Err(FourierError::Shape {
                expected: dim,
                got: n.dim,
            });
        }
    }
    Ok(dim)
}

/// `sum_i c_i net_i` over the union of the generating sets.
pub fn fn_linear_combine(
    coeffs: &[Complex64],
    nets: &[FourierNet],
) -> Result<FourierNet, FourierError> {
    if coeffs.len() != nets.len() {
        return Err(FourierError::Shape {
            expected: nets.len(),
            got: coeffs.len(),
        });
    }
    let refs: Vec<&FourierNet> = nets.iter().collect();
    let dim = check_dims(&refs)?;
    let (basis, maps) = union_basis(&refs);
    let width = basis.len();
    let mut map: HashMap<MultiIndex, Complex64> = HashMap::new();
    for ((net, c), m) in nets.iter().zip(coeffs).zip(&maps) {
        if *c == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (s, u) in net.reindexed(width, m) {
            *map.entry(s).or_default() += u * c;
        }
    }
    Ok(FourierNet::from_map(dim, basis, map))
}

/// `x -> q(u . x)`: registers `omega u` as the single base frequency.
pub fn fn_from_trigpoly(q: &TrigPoly, direction: &[f64]) -> FourierNet {
    let basis = vec![direction.iter().map(|v| v * q.omega).collect()];
    let atoms = q.terms().map(|(k, b)| (vec![k as i32], b)).collect();
    FourierNet::from_parts(direction.len(), basis, atoms)
        .expect("single-direction net is well formed")
}

/// Upper bound on the atoms of `p(f)` for `deg p = deg` and `f` with `n` atoms:
/// the smaller of `binom(n + deg, deg)` and the lattice box reached by the indices.
pub fn projected_atoms(net: &FourierNet, deg: usize, include_lower: bool) -> f64 {
    let n = net.atom_count() as f64;
    let d = deg as f64;
    let binom = if include_lower {
        ln_binom(n + d, d)
    } else {
        ln_binom(n + d - 1.0, d)
    }
    .exp();
    let width = net.basis.len();
    let mut log_box = 0.0;
    for j in 0..width {
        let (lo, hi) = net.atoms.iter().fold((0i64, 0i64), |(l, h), (s, _)| {
            (l.min(s[j] as i64), h.max(s[j] as i64))
        });
        log_box += ((d * (hi - lo) as f64) + 1.0).ln();
    }
    binom.min(log_box.exp())
}

fn check_budget(projected: f64, cap: usize) -> Result<(), FourierError> {
    if projected > cap as f64 {
        Err(FourierError::BudgetExceeded { projected, cap })
    } else {
        Ok(())
    }
}

fn add_index(a: &[i32], b: &[i32]) -> MultiIndex {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn merge_in_order(
    dim: usize,
    basis: Vec<Vec<f64>>,
    shards: Vec<HashMap<MultiIndex, Complex64>>,
) -> FourierNet {
    let mut total: HashMap<MultiIndex, Complex64> = HashMap::new();
    for shard in shards {
        let mut entries: Vec<_> = shard.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (s, u) in entries {
            *total.entry(s).or_default() += u;
        }
    }
    FourierNet::from_map(dim, basis, total)
}

/// Pointwise product of two nets.
pub fn fn_mul(a: &FourierNet, b: &FourierNet, cap: usize) -> Result<FourierNet, FourierError> {
    let dim = check_dims(&[a, b])?;
    let (basis, maps) = union_basis(&[a, b]);
    let width = basis.len();
    let left = a.reindexed(width, &maps[0]);
    let right = b.reindexed(width, &maps[1]);
    const SHARD: usize = 64;
    let shards: Vec<HashMap<MultiIndex, Complex64>> = left
        .par_chunks(SHARD)
        .map(|chunk| {
            let mut m: HashMap<MultiIndex, Complex64> = HashMap::new();
            for (s, u) in chunk {
                for (t, v) in &right {
                    *m.entry(add_index(s, t)).or_default() += u * v;
                }
            }
            m
        })
        .collect();
    let out = merge_in_order(dim, basis, shards);
    check_budget(out.atom_count() as f64, cap)?;
    Ok(out)
}

// All compositions of k into n parts, lexicographically decreasing in the first part.
fn compositions(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() + 1 == n {
        prefix.push(k);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for a in (0..=k).rev() {
        prefix.push(a);
        compositions(n, k - a, prefix, out);
        prefix.pop();
    }
}

/// `f^k` by the multinomial formula.
pub fn fn_pow(net: &FourierNet, k: i64, cap: usize) -> Result<FourierNet, FourierError> {
    if k < 0 {
        return Err(FourierError::Domain(format!(
            "power must be non-negative, got {k}"
        )));
    }
    let k = k as usize;
    if k == 0 {
        return Ok(FourierNet::constant(net.dim, Complex64::new(1.0, 0.0)));
    }
    let n = net.atom_count();
    if n == 0 {
        return Ok(FourierNet::zero(net.dim));
    }
    check_budget(projected_atoms(net, k, false), cap)?;
    let width = net.basis.len();
    // Shards by the exponent of the first atom; merged in that fixed order.
    let shards: Vec<HashMap<MultiIndex, Complex64>> = (0..=k)
        .rev()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|a0| {
            let mut comps = Vec::new();
            if n == 1 {
                if a0 == k {
                    comps.push(vec![k]);
                }
            } else {
                let mut prefix = vec![a0];
                compositions(n, k - a0, &mut prefix, &mut comps);
            }
            let mut m: HashMap<MultiIndex, Complex64> = HashMap::new();
            for comp in comps {
                let mut coeff = Complex64::new(1.0, 0.0);
                let mut multinom = 1.0;
                let mut running = 0usize;
                let mut idx = vec![0i32; width];
                for (i, a) in comp.iter().enumerate() {
                    if *a == 0 {
                        continue;
                    }
                    running += a;
                    multinom *= ln_binom(running as f64, *a as f64).exp();
                    let (s, u) = &net.atoms[i];
                    coeff *= u.powi(*a as i32);
                    for (x, y) in idx.iter_mut().zip(s) {
                        *x += *a as i32 * y;
                    }
                }
                *m.entry(idx).or_default() += coeff * multinom;
            }
            m
        })
        .collect();
    Ok(merge_in_order(net.dim, net.basis.clone(), shards))
}

/// `p(f(x))` by Horner's scheme on nets.
pub fn fn_compose_poly(
    p: &UniPoly,
    net: &FourierNet,
    cap: usize,
) -> Result<FourierNet, FourierError> {
    let coeffs = p
        .coeffs()
        .map_err(|e| FourierError::Domain(e.to_string()))?;
    let deg = coeffs.len() - 1;
    check_budget(projected_atoms(net, deg, true), cap)?;
    let constant = |c: f64| {
        FourierNet::from_parts(
            net.dim,
            net.basis.clone(),
            vec![(Vec::new(), Complex64::new(c, 0.0))],
        )
        .expect("constant over an existing basis")
    };
    let mut acc = constant(coeffs[deg]);
    for c in coeffs[..deg].iter().rev() {
        let prod = fn_mul(&acc, net, cap)?;
        acc = fn_linear_combine(
            &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            &[prod, constant(*c)],
        )?;
    }
    Ok(acc)
}

/// One real trigonometric term `c cos(theta) + s sin(theta)` with
/// `theta = (sum_j idx_j w_j) . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub index: MultiIndex,
    pub freq: Vec<f64>,
    pub cos_coef: f64,
    pub sin_coef: f64,
}

impl TrigTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let th: f64 = self.freq.iter().zip(x).map(|(w, v)| w * v).sum();
        self.cos_coef * th.cos() + self.sin_coef * th.sin()
    }
}

/// `f = f_c + i f_s` with both parts real trigonometric sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPair {
    pub real: Vec<TrigTerm>,
    pub imag: Vec<TrigTerm>,
}

impl TrigPair {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let re = self.real.iter().map(|t| t.eval(x)).sum();
        let im = self.imag.iter().map(|t| t.eval(x)).sum();
        Complex64::new(re, im)
    }
}

/// Splits a net into real and imaginary trigonometric sums. Atoms at `s`
/// and `-s` fold onto the representative whose first nonzero entry is positive.
pub fn fn_to_trig_pair(net: &FourierNet) -> TrigPair {
    let mut real: Vec<TrigTerm> = Vec::new();
    let mut imag: Vec<TrigTerm> = Vec::new();
    let mut slot: HashMap<MultiIndex, usize> = HashMap::new();
    for (i, (s, u)) in net.atoms.iter().enumerate() {
        let flip = s.iter().find(|v| **v != 0).is_some_and(|v| *v < 0);
        let sign = if flip { -1.0 } else { 1.0 };
        let key: MultiIndex = if flip {
            s.iter().map(|v| -v).collect()
        } else {
            s.clone()
        };
        let freq: Vec<f64> = net.frequency(i).iter().map(|w| sign * w).collect();
        // u e^{i th} = (a cos th - b sin th) + i (b cos th + a sin th); th -> -th flips the sines.
        let (rc, rs) = (u.re, -u.im * sign);
        let (ic, is) = (u.im, u.re * sign);
        let pos = *slot.entry(key.clone()).or_insert_with(|| {
            real.push(TrigTerm {
                index: key.clone(),
                freq: freq.clone(),
                cos_coef: 0.0,
                sin_coef: 0.0,
            });
            imag.push(TrigTerm {
                index: key.clone(),
                freq: freq.clone(),
                cos_coef: 0.0,
                sin_coef: 0.0,
            });
            real.len() - 1
        });
        real[pos].cos_coef += rc;
        real[pos].sin_coef += rs;
        imag[pos].cos_coef += ic;
        imag[pos].sin_coef += is;
    }
    let keep = |t: &TrigTerm| t.cos_coef != 0.0 || t.sin_coef != 0.0;
    TrigPair {
        real: real.into_iter().filter(keep).collect(),
        imag: imag.into_iter().filter(keep).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_net() -> FourierNet {
        FourierNet::from_parts(
            2,
            vec![vec![1.0, 0.5], vec![-0.3, 2.0]],
            vec![
                (vec![1, 0], c(0.5, 0.1)),
                (vec![0, -2], c(-0.2, 0.3)),
                (vec![1, 1], c(0.1, 0.0)),
                (vec![0, 0], c(0.4, 0.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_and_constant() {
        assert_eq!(
            FourierNet::zero(3).eval(&[1.0, 2.0, 3.0]).unwrap(),
            c(0.0, 0.0)
        );
        let one = FourierNet::constant(2, c(1.0, 0.0));
        assert_eq!(one.eval(&[5.0, -1.0]).unwrap(), c(1.0, 0.0));
        assert!(matches!(one.eval(&[1.0]), Err(FourierError::Shape { .. })));
    }

    #[test]
    fn dedup_merges_and_sorts() {
        let net = FourierNet::from_parts(
            1,
            vec![vec![1.0]],
            vec![
                (vec![2], c(1.0, 0.0)),
                (vec![-1], c(1.0, 0.0)),
                (vec![2], c(0.5, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(net.atom_count(), 2);
        assert_eq!(net.atoms()[0].0, vec![-1]);
        assert_eq!(net.atoms()[1].1, c(1.5, 0.0));
    }

    #[test]
    fn batch_matches_naive() {
        let net = fn_pow(&sample_net(), 3, DEFAULT_ATOM_CAP).unwrap();
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![0.1 * i as f64, -0.05 * i as f64 + 0.3])
            .collect();
        let batch = net.eval_batch(&pts).unwrap();
        for (p, b) in pts.iter().zip(batch) {
            assert!((net.eval(p).unwrap() - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_atom_power() {
        let net = FourierNet::from_parts(1, vec![vec![0.7]], vec![(vec![1], c(0.5, 0.5))]).unwrap();
        let cube = fn_pow(&net, 3, 10).unwrap();
        assert_eq!(cube.atom_count(), 1);
        assert_eq!(cube.atoms()[0].0, vec![3]);
        assert!((cube.atoms()[0].1 - c(0.5, 0.5).powi(3)).norm() < 1e-15);
        assert!(fn_pow(&net, -1, 10).is_err());
    }

    #[test]
    fn power_matches_direct() {
        let net = sample_net();
        let p = fn_pow(&net, 4, DEFAULT_ATOM_CAP).unwrap();
        assert!(p.atom_count() as f64 <= ln_binom(7.0, 4.0).exp().round());
        for i in 0..30 {
            let x = [0.3 * i as f64 - 4.0, (i as f64).sin()];
            let direct = net.eval(&x).unwrap().powi(4);
            assert!((p.eval(&x).unwrap() - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let net = sample_net();
        assert!(matches!(
            fn_pow(&net, 5, 3),
            Err(FourierError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn compose_identity_constant_and_quadratic() {
        let net = sample_net();
        let id =
            fn_compose_poly(&UniPoly::monomial(vec![0.0, 1.0]), &net, DEFAULT_ATOM_CAP).unwrap();
        assert_eq!(id, net);
        let k = fn_compose_poly(&UniPoly::monomial(vec![2.0]), &net, DEFAULT_ATOM_CAP).unwrap();
        assert_eq!(k.atom_count(), 1);
        assert_eq!(k.atoms()[0].1, c(2.0, 0.0));
        let q = fn_compose_poly(
            &UniPoly::monomial(vec![1.0, 0.0, 1.0]),
            &net,
            DEFAULT_ATOM_CAP,
        )
        .unwrap();
        let x = [0.2, -1.3];
        let v = net.eval(&x).unwrap();
        assert!((q.eval(&x).unwrap() - (v * v + 1.0)).norm() < 1e-12);
    }

    #[test]
    fn combine_and_trigpoly() {
        let net = sample_net();
        let zero = fn_linear_combine(&[c(0.0, 0.0)], &[net.clone()]).unwrap();
        assert_eq!(zero.atom_count(), 0);
        let k = fn_from_trigpoly(&TrigPoly::constant(3.0), &[1.0, 2.0]);
        assert_eq!(k.atom_count(), 1);
        assert!(k.frequency(0).iter().all(|v| *v == 0.0));
        let both =
            fn_linear_combine(&[c(2.0, 0.0), c(0.0, 1.0)], &[net.clone(), k.clone()]).unwrap();
        let x = [0.7, 0.1];
        let expect = net.eval(&x).unwrap() * 2.0 + k.eval(&x).unwrap() * c(0.0, 1.0);
        assert!((both.eval(&x).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn shared_basis_vectors_are_unified() {
        let a = FourierNet::from_parts(1, vec![vec![2.0]], vec![(vec![1], c(1.0, 0.0))]).unwrap();
        let b = FourierNet::from_parts(1, vec![vec![2.0]], vec![(vec![1], c(1.0, 0.0))]).unwrap();
        let s = fn_linear_combine(&[c(1.0, 0.0), c(1.0, 0.0)], &[a, b]).unwrap();
        assert_eq!(s.basis().len(), 1);
        assert_eq!(s.atom_count(), 1);
    }

    #[test]
    fn trig_pair_recombines() {
        let net = sample_net();
        let pair = fn_to_trig_pair(&net);
        for i in 0..10 {
            let x = [0.4 * i as f64, 1.0 - 0.2 * i as f64];
            assert!((pair.eval(&x) - net.eval(&x).unwrap()).norm() < 1e-13);
        }
        let single =
            FourierNet::from_parts(1, vec![vec![1.0]], vec![(vec![1], c(1.0, 0.0))]).unwrap();
        let p = fn_to_trig_pair(&single);
        assert_eq!(p.real.len(), 1);
        assert_eq!(p.imag.len(), 1);
    }

    #[test]
    fn json_roundtrip() {
        let net = sample_net();
        let s = net.to_json_string().unwrap();
        assert!(s.contains("\"basis\"") && s.contains("\"atoms\""));
        assert_eq!(FourierNet::from_json_str(&s).unwrap(), net);
    }
}
