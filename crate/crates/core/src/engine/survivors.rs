//! Run-length survivor sets and the exact elimination kernel.
//!
//! A set lives inside a window cube `W` and stores cubes `depth` levels below
//! it. Cubes are grouped into rows sharing their first `d − 1` relative
//! coordinates; each row keeps sorted, non-adjacent inclusive runs on the last
//! axis.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use super::DyadicCube;
use crate::forms::LinearForm;
use crate::numerics::{big, pow2, ExactRational};
use crate::{Error, Result};

/// Deepest supported level below a window.
pub const MAX_DEPTH: u32 = 62;

/// Runs handled by one parallel task.
const CHUNK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurvivorSet {
    window: DyadicCube,
    depth: u32,
    prefixes: Vec<u64>,
    starts: Vec<usize>,
    runs: Vec<[u64; 2]>,
}

impl SurvivorSet {
    /// Every cube `depth` levels below `window`.
    pub fn full(window: DyadicCube, depth: u32) -> Result<Self> {
        check_depth(depth)?;
        let d = window.dim();
        let side = 1u64 << depth;
        let rows = 1u128 << (depth as u128 * (d as u128 - 1));
        if rows > (1 << 28) {
            return Err(Error::BudgetExceeded(format!(
                "a full set at depth {depth} in d = {d} has {rows} rows"
            )));
        }
        let mut set = Self::empty(window, depth);
        let mut p = vec![0u64; d - 1];
        for _ in 0..rows {
            set.prefixes.extend_from_slice(&p);
            set.runs.push([0, side - 1]);
            set.starts.push(set.runs.len());
            for x in p.iter_mut().rev() {
                *x += 1;
                if *x < side {
                    break;
                }
                *x = 0;
            }
        }
        Ok(set)
    }

    pub fn empty(window: DyadicCube, depth: u32) -> Self {
        Self {
            window,
            depth,
            prefixes: Vec::new(),
            starts: vec![0],
            runs: Vec::new(),
        }
    }

    /// Builds a set from relative coordinate vectors (any order, duplicates
    /// allowed).
    pub fn from_cubes(window: DyadicCube, depth: u32, cubes: &[Vec<u64>]) -> Result<Self> {
        check_depth(depth)?;
        let d = window.dim();
        let mut sorted: Vec<&Vec<u64>> = cubes.iter().collect();
        if sorted.iter().any(|c| c.len() != d || c.iter().any(|&x| x >> depth != 0)) {
            return Err(Error::InvalidArgument("cube outside the window".into()));
        }
        sorted.sort();
        sorted.dedup();
        let mut set = Self::empty(window, depth);
        for c in sorted {
            set.push_cell(&c[..d - 1], c[d - 1]);
        }
        Ok(set)
    }

    fn push_cell(&mut self, prefix: &[u64], c: u64) {
        let new_row = self.rows() == 0 || self.prefix(self.rows() - 1) != prefix;
        if new_row {
            self.prefixes.extend_from_slice(prefix);
            self.runs.push([c, c]);
            self.starts.push(self.runs.len());
        } else {
            let last = self.runs.last_mut().expect("row has runs");
            if last[1] + 1 == c {
                last[1] = c;
            } else {
                self.runs.push([c, c]);
            }
            *self.starts.last_mut().unwrap() = self.runs.len();
        }
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn window(&self) -> &DyadicCube {
        &self.window
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Absolute dyadic level of the stored cubes.
    pub fn level(&self) -> u32 {
        self.window.level() + self.depth
    }

    pub fn rows(&self) -> usize {
        self.starts.len() - 1
    }

    fn prefix(&self, row: usize) -> &[u64] {
        let k = self.dim() - 1;
        &self.prefixes[row * k..(row + 1) * k]
    }

    fn row_runs(&self, row: usize) -> &[[u64; 2]] {
        &self.runs[self.starts[row]..self.starts[row + 1]]
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of stored cubes.
    pub fn count(&self) -> u128 {
        self.runs.iter().map(|r| (r[1] - r[0] + 1) as u128).sum()
    }

    /// Storage entries (rows plus runs); the quantity bounded by the budget.
    pub fn entries(&self) -> u128 {
        (self.rows() + self.runs.len()) as u128
    }

    /// Entries after refining `k` more levels.
    pub fn projected_entries(&self, k: u32) -> u128 {
        let fan = 1u128.checked_shl(k * (self.dim() as u32 - 1)).unwrap_or(u128::MAX);
        self.entries().saturating_mul(fan)
    }

    /// Exact Lebesgue measure `count · 2^{-d·level}`.
    pub fn measure(&self) -> ExactRational {
        big(self.count()) * pow2(-(self.level() as i64) * self.dim() as i64)
    }

    /// Measure relative to the window, `count · 2^{-d·depth}`.
    pub fn window_fraction(&self) -> ExactRational {
        big(self.count()) * pow2(-(self.depth as i64) * self.dim() as i64)
    }

    /// All cubes as relative coordinates, in lexicographic order.
    pub fn cubes(&self) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        for row in 0..self.rows() {
            for r in self.row_runs(row) {
                for c in r[0]..=r[1] {
                    let mut v = self.prefix(row).to_vec();
                    v.push(c);
                    out.push(v);
                }
            }
        }
        out
    }

    /// Lazy version of [`Self::cubes`].
    pub fn iter_cubes(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.rows()).flat_map(move |row| {
            self.row_runs(row).iter().flat_map(move |r| {
                (r[0]..=r[1]).map(move |c| {
                    let mut v = self.prefix(row).to_vec();
                    v.push(c);
                    v
                })
            })
        })
    }

    /// The `idx`-th cube in lexicographic order.
    pub fn cube_at(&self, mut idx: u128) -> Option<Vec<u64>> {
        for row in 0..self.rows() {
            for r in self.row_runs(row) {
                let len = (r[1] - r[0]) as u128 + 1;
                if idx < len {
                    let mut v = self.prefix(row).to_vec();
                    v.push(r[0] + idx as u64);
                    return Some(v);
                }
                idx -= len;
            }
        }
        None
    }

    /// Lexicographically smallest cube.
    pub fn first_cube(&self) -> Option<DyadicCube> {
        if self.is_empty() {
            return None;
        }
        let mut rel = self.prefix(0).to_vec();
        rel.push(self.runs[0][0]);
        Some(self.window.descendant(self.depth, &rel))
    }

    pub fn contains_cube(&self, cube: &DyadicCube) -> bool {
        if cube.level() != self.level() {
            return false;
        }
        let Some(rel) = self.window.relative(cube) else {
            return false;
        };
        let d = self.dim();
        (0..self.rows())
            .filter(|&r| self.prefix(r) == &rel[..d - 1])
            .any(|r| self.row_runs(r).iter().any(|x| x[0] <= rel[d - 1] && rel[d - 1] <= x[1]))
    }

    /// Replaces each cube by its `2^{d(level − self.level)}` children.
    pub fn refine(&self, to_level: u32) -> Result<Self> {
        if to_level < self.level() {
            return Err(Error::InvalidArgument(format!(
                "cannot refine from level {} down to {to_level}",
                self.level()
            )));
        }
        let k = to_level - self.level();
        let depth = self.depth + k;
        check_depth(depth)?;
        if k == 0 {
            return Ok(self.clone());
        }
        let d = self.dim();
        let scaled: Vec<[u64; 2]> = self
            .runs
            .iter()
            .map(|r| [r[0] << k, (r[1] << k) | ((1u64 << k) - 1)])
            .collect();
        if d == 1 {
            return Ok(Self {
                window: self.window.clone(),
                depth,
                prefixes: Vec::new(),
                starts: self.starts.clone(),
                runs: scaled,
            });
        }
        let fan = 1u64 << (k * (d as u32 - 1));
        let mut rows: Vec<(Vec<u64>, usize)> = Vec::new();
        for row in 0..self.rows() {
            let p = self.prefix(row);
            for j in 0..fan {
                let mut child = Vec::with_capacity(d - 1);
                for (i, x) in p.iter().enumerate() {
                    let shift = k * (d as u32 - 2 - i as u32);
                    child.push((x << k) | ((j >> shift) & ((1u64 << k) - 1)));
                }
                rows.push((child, row));
            }
        }
        if d > 2 {
            rows.sort();
        }
        let mut out = Self::empty(self.window.clone(), depth);
        for (p, row) in rows {
            out.prefixes.extend_from_slice(&p);
            out.runs
                .extend_from_slice(&scaled[self.starts[row]..self.starts[row + 1]]);
            out.starts.push(out.runs.len());
        }
        Ok(out)
    }

    /// Removes every cube whose closure meets `{‖L‖ < δ}`. `form` acts on the
    /// coordinates of the whole unit cube; the window is handled internally.
    /// Returns the survivors and the number of removed cubes.
    pub fn eliminate(&self, form: &LinearForm, delta: &ExactRational) -> Result<(Self, u128)> {
        let kernel = Kernel::new(form, &self.window, self.depth, delta)?;
        let tasks = self.tasks();
        let results: Vec<(Vec<[u64; 2]>, u128)> = tasks
            .par_iter()
            .map(|&(row, lo, hi)| {
                let mut kept = Vec::new();
                let removed = kernel.row(self.prefix(row), &self.runs[lo..hi], &mut |a, b| {
                    kept.push([a, b])
                });
                (kept, removed)
            })
            .collect();
        let mut out = Self::empty(self.window.clone(), self.depth);
        let mut removed = 0u128;
        let mut current_row = usize::MAX;
        for (&(row, _, _), (kept, rem)) in tasks.iter().zip(results) {
            removed += rem;
            if kept.is_empty() {
                continue;
            }
            if row != current_row {
                out.prefixes.extend_from_slice(self.prefix(row));
                out.starts.push(out.runs.len());
                current_row = row;
            }
            out.runs.extend_from_slice(&kept);
            *out.starts.last_mut().unwrap() = out.runs.len();
        }
        Ok((out, removed))
    }

    /// Number of cubes that [`SurvivorSet::eliminate`] would remove.
    pub fn count_bad(&self, form: &LinearForm, delta: &ExactRational) -> Result<u128> {
        let kernel = Kernel::new(form, &self.window, self.depth, delta)?;
        Ok(self
            .tasks()
            .par_iter()
            .map(|&(row, lo, hi)| kernel.row(self.prefix(row), &self.runs[lo..hi], &mut |_, _| {}))
            .sum())
    }

    fn tasks(&self) -> Vec<(usize, usize, usize)> {
        let mut tasks = Vec::new();
        for row in 0..self.rows() {
            let (mut lo, hi) = (self.starts[row], self.starts[row + 1]);
            while lo < hi {
                let end = (lo + CHUNK).min(hi);
                tasks.push((row, lo, end));
                lo = end;
            }
        }
        tasks
    }

    /// Cube counts grouped by ancestor `k` levels below the window.
    pub fn counts_by_ancestor(&self, k: u32) -> BTreeMap<Vec<u64>, u128> {
        assert!(k <= self.depth);
        let s = self.depth - k;
        let mut out: BTreeMap<Vec<u64>, u128> = BTreeMap::new();
        for row in 0..self.rows() {
            let head: Vec<u64> = self.prefix(row).iter().map(|x| x >> s).collect();
            for r in self.row_runs(row) {
                let mut c = r[0];
                while c <= r[1] {
                    let anc = c >> s;
                    let block_end = ((anc + 1) << s) - 1;
                    let end = block_end.min(r[1]);
                    let mut key = head.clone();
                    key.push(anc);
                    *out.entry(key).or_default() += (end - c + 1) as u128;
                    if end == u64::MAX {
                        break;
                    }
                    c = end + 1;
                }
            }
        }
        out
    }

    /// The part of the set inside the sub-window `k` levels below the window
    /// with relative coordinates `q`, re-expressed relative to that sub-window.
    pub fn restrict(&self, k: u32, q: &[u64]) -> Self {
        assert!(k <= self.depth && q.len() == self.dim());
        let d = self.dim();
        let s = self.depth - k;
        let window = self.window.descendant(k, q);
        let mut out = Self::empty(window, s);
        let lo_c = q[d - 1] << s;
        let hi_c = lo_c + ((1u64 << s) - 1);
        for row in 0..self.rows() {
            let p = self.prefix(row);
            if p.iter().zip(q).any(|(x, y)| x >> s != *y) {
                continue;
            }
            let clipped: Vec<[u64; 2]> = self
                .row_runs(row)
                .iter()
                .filter(|r| r[1] >= lo_c && r[0] <= hi_c)
                .map(|r| [r[0].max(lo_c) - lo_c, r[1].min(hi_c) - lo_c])
                .collect();
            if clipped.is_empty() {
                continue;
            }
            out.prefixes
                .extend(p.iter().zip(q).map(|(x, y)| x - (y << s)));
            out.runs.extend_from_slice(&clipped);
            out.starts.push(out.runs.len());
        }
        out
    }

    /// Sub-window `k` levels down holding the most cubes; ties go to the
    /// lexicographically smallest.
    pub fn densest_subwindow(&self, k: u32) -> Option<(Vec<u64>, u128)> {
        let mut best: Option<(Vec<u64>, u128)> = None;
        for (key, n) in self.counts_by_ancestor(k) {
            if best.as_ref().is_none_or(|(_, b)| n > *b) {
                best = Some((key, n));
            }
        }
        best
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::BudgetExceeded(format!(
            "relative depth {depth} exceeds {MAX_DEPTH}"
        )));
    }
    Ok(())
}

/// Integer form of one elimination stage. All quantities are scaled by
/// `M = D·2^depth`, where `D` clears the denominators of the window-local
/// coefficients, offset and δ.
struct Kernel {
    coeffs: Vec<BigInt>,
    offset: BigInt,
    delta: BigInt,
    m: BigInt,
}

impl Kernel {
    fn new(form: &LinearForm, window: &DyadicCube, depth: u32, delta: &ExactRational) -> Result<Self> {
        if form.dim() != window.dim() {
            return Err(Error::Dimension {
                expected: window.dim(),
                got: form.dim(),
            });
        }
        if !delta.is_positive() {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        // θ = (w + t)/2^L with t in the unit cube.
        let s = window.side();
        let local_a: Vec<ExactRational> = form.a.iter().map(|a| a * &s).collect();
        let local_b = form
            .a
            .iter()
            .zip(window.coords())
            .fold(form.b.clone(), |acc, (a, w)| acc + a * big(w.clone()) * &s);
        let mut den = delta.denom().clone();
        for x in local_a.iter().chain(std::iter::once(&local_b)) {
            den = den.lcm(x.denom());
        }
        let scale = |x: &ExactRational| x.numer() * (&den / x.denom());
        let two_r = BigInt::from(1u8) << depth as usize;
        Ok(Self {
            coeffs: local_a.iter().map(scale).collect(),
            offset: scale(&local_b) * &two_r,
            delta: scale(delta) * &two_r,
            m: den * two_r,
        })
    }

    /// Processes runs of one row, passing surviving sub-runs to `keep` and
    /// returning the number of removed cubes.
    fn row(&self, prefix: &[u64], runs: &[[u64; 2]], keep: &mut dyn FnMut(u64, u64)) -> u128 {
        let d = self.coeffs.len();
        let mut lo_p = self.offset.clone();
        let mut hi_p = self.offset.clone();
        for (a, &p) in self.coeffs[..d - 1].iter().zip(prefix) {
            let at = a * BigInt::from(p);
            let next = &at + a;
            if a.is_negative() {
                lo_p += next;
                hi_p += at;
            } else {
                lo_p += at;
                hi_p += next;
            }
        }
        let a = &self.coeffs[d - 1];
        if a.is_zero() {
            // The row's range [lo_p, hi_p] does not depend on the last axis.
            let k = (&lo_p - &self.delta).div_floor(&self.m) + 1;
            let bad = k * &self.m < &hi_p + &self.delta;
            if bad {
                return runs.iter().map(|r| (r[1] - r[0] + 1) as u128).sum();
            }
            for r in runs {
                keep(r[0], r[1]);
            }
            return 0;
        }
        let (a, lo_p, hi_p) = if a.is_negative() {
            (-a, -hi_p, -lo_p)
        } else {
            (a.clone(), lo_p, hi_p)
        };
        // Cube c is bad for integer k iff cmin(k) <= c <= cmax(k), where
        // cmin(k) = ⌊(kM − hi_p − Δ)/a⌋ and cmax(k) = ⌈(kM − lo_p + Δ)/a⌉ − 1.
        let start_min = -&hi_p - &self.delta;
        let start_max = -&lo_p + &self.delta;
        let mut cursor: Option<(Progression, Progression)> = None;
        let mut removed = 0u128;
        for r in runs {
            let (lo, hi) = (r[0] as i128, r[1] as i128);
            let mut reseed = true;
            if let Some((cmin, cmax)) = cursor.as_mut() {
                let mut steps = 0;
                while cmax.ceil_minus_one() < lo && steps < 32 {
                    cmin.advance();
                    cmax.advance();
                    steps += 1;
                }
                reseed = cmax.ceil_minus_one() < lo;
            }
            if reseed {
                // Smallest k with cmax(k) >= lo.
                let k = (&a * BigInt::from(r[0]) + &lo_p - &self.delta).div_floor(&self.m) + 1;
                cursor = Some((
                    Progression::new(&start_min, &self.m, &a, &k),
                    Progression::new(&start_max, &self.m, &a, &k),
                ));
            }
            let (cmin, cmax) = cursor.as_mut().unwrap();
            let mut cur = lo;
            loop {
                let cm = cmin.floor();
                if cm > hi {
                    break;
                }
                let cx = cmax.ceil_minus_one();
                if cx >= cur {
                    let from = cm.max(cur);
                    if from > cur {
                        keep(cur as u64, (from - 1) as u64);
                    }
                    let to = cx.min(hi);
                    removed += (to - from + 1) as u128;
                    cur = to + 1;
                    if cx >= hi {
                        break;
                    }
                }
                cmin.advance();
                cmax.advance();
            }
            if cur <= hi {
                keep(cur as u64, hi as u64);
            }
        }
        removed
    }
}

/// `⌊(start + k·step)/den⌋` for consecutive integers `k`, updated by
/// additions only.
struct Progression {
    q: BigInt,
    r: BigInt,
    dq: BigInt,
    dr: BigInt,
    den: BigInt,
}

impl Progression {
    fn new(start: &BigInt, step: &BigInt, den: &BigInt, k: &BigInt) -> Self {
        let (q, r) = (start + step * k).div_mod_floor(den);
        let (dq, dr) = step.div_mod_floor(den);
        Self {
            q,
            r,
            dq,
            dr,
            den: den.clone(),
        }
    }

    fn advance(&mut self) {
        self.q += &self.dq;
        self.r += &self.dr;
        if self.r >= self.den {
            self.r -= &self.den;
            self.q += 1u8;
        }
    }

    fn floor(&self) -> i128 {
        saturate(&self.q)
    }

    fn ceil_minus_one(&self) -> i128 {
        if self.r.is_zero() {
            saturate(&self.q) - 1
        } else {
            saturate(&self.q)
        }
    }
}

fn saturate(x: &BigInt) -> i128 {
    x.to_i128().unwrap_or(if x.is_negative() {
        i128::MIN / 2
    } else {
        i128::MAX / 2
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::cube_meets_bad;
    use crate::numerics::{int, rat};
    use proptest::prelude::*;

    fn unit(d: usize) -> DyadicCube {
        DyadicCube::unit(d)
    }

    #[test]
    fn refine_examples() {
        let s = SurvivorSet::full(unit(1), 0).unwrap().refine(2).unwrap();
        assert_eq!(s.count(), 4);
        assert_eq!(s.measure(), int(1));
        let e = SurvivorSet::empty(unit(1), 0).refine(5).unwrap();
        assert!(e.is_empty());
        let one = SurvivorSet::from_cubes(unit(2), 1, &[vec![1, 0]]).unwrap();
        let r = one.refine(2).unwrap();
        assert_eq!(r.count(), 4);
        assert_eq!(r.measure(), rat(1, 4));
        assert_eq!(r.cubes(), vec![vec![2, 0], vec![2, 1], vec![3, 0], vec![3, 1]]);
        assert!(one.refine(0).is_err());
    }

    #[test]
    fn refine_keeps_lexicographic_order_in_three_dimensions() {
        let cubes = vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 1, 1]];
        let s = SurvivorSet::from_cubes(unit(3), 1, &cubes).unwrap();
        let r = s.refine(2).unwrap();
        let got = r.cubes();
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(got, sorted);
        assert_eq!(r.count(), 24);
    }

    #[test]
    fn eliminate_two_theta() {
        let form = LinearForm::new(vec![int(2)], int(0)).unwrap();
        let s = SurvivorSet::full(unit(1), 3).unwrap();
        let (out, removed) = s.eliminate(&form, &rat(1, 4)).unwrap();
        // ‖2θ‖ >= 1/4 on the closed cube keeps [1/8, 3/8] and [5/8, 7/8].
        assert_eq!(out.cubes(), vec![vec![1], vec![2], vec![5], vec![6]]);
        assert_eq!(removed, 4);
        let (none, all) = s.eliminate(&form, &rat(3, 5)).unwrap();
        assert!(none.is_empty());
        assert_eq!(all, 8);
    }

    #[test]
    fn restrict_and_densest() {
        let s = SurvivorSet::from_cubes(unit(2), 2, &[vec![0, 0], vec![2, 3], vec![3, 2], vec![3, 3]])
            .unwrap();
        let (q, n) = s.densest_subwindow(1).unwrap();
        assert_eq!((q.clone(), n), (vec![1, 1], 3));
        let r = s.restrict(1, &q);
        assert_eq!(r.level(), 2);
        assert_eq!(r.cubes(), vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(r.window(), &DyadicCube::new(1, vec![1, 1]).unwrap());
    }

    fn brute(form: &LinearForm, set: &SurvivorSet, delta: &ExactRational) -> Vec<Vec<u64>> {
        set.cubes()
            .into_iter()
            .filter(|c| {
                let cube = set.window().descendant(set.depth(), c);
                !cube_meets_bad(form, &cube, delta).unwrap()
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn kernel_matches_cube_predicate(
            a in proptest::collection::vec((-40i64..40, 1i64..7), 1..=3),
            b in (-9i64..9, 1i64..9),
            delta in (1i64..40, 2i64..80),
            depth in 0u32..5,
            wlevel in 0u32..3,
            wseed in 0u64..64,
            mask in proptest::collection::vec(any::<bool>(), 64),
        ) {
            let d = a.len();
            let form = LinearForm::new(a.iter().map(|&(n, q)| rat(n, q)).collect(), rat(b.0, b.1)).unwrap();
            let delta = rat(delta.0, delta.1);
            let wc: Vec<u64> = (0..d).map(|i| (wseed >> (2 * i)) % (1 << wlevel)).collect();
            let window = DyadicCube::new(wlevel, wc).unwrap();
            let full = SurvivorSet::full(window.clone(), depth).unwrap();
            let picked: Vec<Vec<u64>> = full
                .cubes()
                .into_iter()
                .enumerate()
                .filter(|(i, _)| mask[i % 64])
                .map(|(_, c)| c)
                .collect();
            let set = SurvivorSet::from_cubes(window, depth, &picked).unwrap();
            let (out, removed) = set.eliminate(&form, &delta).unwrap();
            let oracle = brute(&form, &set, &delta);
            prop_assert_eq!(out.cubes(), oracle.clone());
            prop_assert_eq!(removed, set.count() - oracle.len() as u128);
            prop_assert_eq!(set.count_bad(&form, &delta).unwrap(), removed);
        }

        #[test]
        fn refine_preserves_measure(
            cubes in proptest::collection::vec(proptest::collection::vec(0u64..4, 2), 0..10),
            k in 0u32..3,
        ) {
            let s = SurvivorSet::from_cubes(unit(2), 2, &cubes).unwrap();
            let r = s.refine(2 + k).unwrap();
            prop_assert_eq!(r.measure(), s.measure());
            let total: u128 = r.counts_by_ancestor(2).values().sum();
            prop_assert_eq!(total, r.count());
        }
    }
}
