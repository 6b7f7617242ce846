//! Two-level minimization: Quine–McCluskey prime generation, essential
//! primes, then Petrick's method for the remaining minterms.

use std::collections::{BTreeMap, BTreeSet};

use super::{BoolExpr, BooleanEqnsIr, Cell, KMapIr, MAX_TABLE_VARS};

/// A product term. Bits set in `mask` are absent from the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Implicant {
    pub value: u32,
    pub mask: u32,
}

impl Implicant {
    pub fn covers(&self, m: u32) -> bool {
        (m & !self.mask) == (self.value & !self.mask)
    }

    pub fn literals(&self, nvars: usize) -> usize {
        nvars - (self.mask.count_ones() as usize)
    }

    /// `{-,0,1}` string, most significant variable first.
    pub fn pattern(&self, nvars: usize) -> String {
        (0..nvars)
            .rev()
            .map(|i| {
                if self.mask >> i & 1 == 1 {
                    '-'
                } else if self.value >> i & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

/// A sum of products over named variables (first name = most significant bit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub vars: Vec<String>,
    pub terms: Vec<Implicant>,
}

impl Cover {
    pub fn eval(&self, m: u32) -> bool {
        self.terms.iter().any(|t| t.covers(m))
    }

    fn literal_list(&self, t: &Implicant) -> Vec<(bool, &str)> {
        let n = self.vars.len();
        (0..n).filter(|i| t.mask >> (n - 1 - i) & 1 == 0).map(|i| (t.value >> (n - 1 - i) & 1 == 1, self.vars[i].as_str())).collect()
    }

    /// Text form, e.g. `(a AND NOT b) OR (NOT a AND b)`, `NOT a`, `0`, `1`.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let several = self.terms.len() > 1;
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let lits: Vec<String> = self.literal_list(t).into_iter().map(|(pos, v)| if pos { v.to_string() } else { format!("NOT {v}") }).collect();
                match lits.len() {
                    0 => "1".to_string(),
                    1 => lits[0].clone(),
                    _ if several => format!("({})", lits.join(" AND ")),
                    _ => lits.join(" AND "),
                }
            })
            .collect();
        parts.join(" OR ")
    }

    pub fn to_expr(&self) -> BoolExpr {
        let mut sum: Option<BoolExpr> = None;
        for t in &self.terms {
            let mut prod: Option<BoolExpr> = None;
            for (pos, v) in self.literal_list(t) {
                let lit = if pos { BoolExpr::Var(v.into()) } else { BoolExpr::Not(Box::new(BoolExpr::Var(v.into()))) };
                prod = Some(match prod {
                    None => lit,
                    Some(p) => BoolExpr::And(Box::new(p), Box::new(lit)),
                });
            }
            let prod = prod.unwrap_or(BoolExpr::Const(true));
            sum = Some(match sum {
                None => prod,
                Some(s) => BoolExpr::Or(Box::new(s), Box::new(prod)),
            });
        }
        sum.unwrap_or(BoolExpr::Const(false))
    }
}

/// All prime implicants of the function with the given on-set and don't-cares.
pub fn prime_implicants(ones: &[u32], dont_cares: &[u32]) -> Vec<Implicant> {
    let mut level: BTreeSet<Implicant> = ones.iter().chain(dont_cares).map(|&m| Implicant { value: m, mask: 0 }).collect();
    let mut primes = BTreeSet::new();
    while !level.is_empty() {
        let items: Vec<Implicant> = level.iter().copied().collect();
        let mut used = vec![false; items.len()];
        let mut next = BTreeSet::new();
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let (a, b) = (items[i], items[j]);
                if a.mask != b.mask {
                    continue;
                }
                let diff = (a.value ^ b.value) & !a.mask;
                if diff.count_ones() == 1 {
                    used[i] = true;
                    used[j] = true;
                    next.insert(Implicant { value: a.value & !diff, mask: a.mask | diff });
                }
            }
        }
        for (i, it) in items.iter().enumerate() {
            if !used[i] {
                primes.insert(Implicant { value: it.value & !it.mask, mask: it.mask });
            }
        }
        level = next;
    }
    primes.into_iter().collect()
}

/// Minimum prime cover of `ones` (don't-cares may be absorbed).
///
/// Among covers with the fewest implicants, fewer literals wins, then the
/// lexicographically smallest sorted list of implicant patterns.
pub fn minimize(vars: &[String], ones: &[u32], dont_cares: &[u32]) -> Cover {
    let n = vars.len();
    assert!(n <= MAX_TABLE_VARS + 2, "minimize supports at most {} variables", MAX_TABLE_VARS + 2);
    let ones: BTreeSet<u32> = ones.iter().copied().collect();
    let dcs: Vec<u32> = dont_cares.iter().copied().filter(|m| !ones.contains(m)).collect();
    let ones: Vec<u32> = ones.into_iter().collect();
    let primes = prime_implicants(&ones, &dcs);

    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    for &m in &ones {
        let covering: Vec<usize> = (0..primes.len()).filter(|&i| primes[i].covers(m)).collect();
        if covering.len() == 1 {
            chosen.insert(covering[0]);
        }
    }
    let remaining: Vec<u32> = ones.iter().copied().filter(|&m| !chosen.iter().any(|&i| primes[i].covers(m))).collect();

    if !remaining.is_empty() {
        // Petrick: product over minterms of (sum of covering primes), kept
        // as a set of absorbed products.
        let candidates: Vec<usize> = (0..primes.len()).filter(|i| !chosen.contains(i) && remaining.iter().any(|&m| primes[*i].covers(m))).collect();
        let mut products: BTreeSet<BTreeSet<usize>> = BTreeSet::from([BTreeSet::new()]);
        for &m in &remaining {
            let clause: Vec<usize> = candidates.iter().copied().filter(|&i| primes[i].covers(m)).collect();
            let mut next: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
            for p in &products {
                if clause.iter().any(|i| p.contains(i)) {
                    next.insert(p.clone());
                    continue;
                }
                for &i in &clause {
                    let mut q = p.clone();
                    q.insert(i);
                    next.insert(q);
                }
            }
            products = absorb(next);
        }
        let key = |s: &BTreeSet<usize>| {
            let lits: usize = s.iter().map(|&i| primes[i].literals(n)).sum();
            let mut pats: Vec<String> = s.iter().map(|&i| primes[i].pattern(n)).collect();
            pats.sort();
            (s.len(), lits, pats)
        };
        let best = products.iter().min_by_key(|s| key(s)).expect("Petrick product is never empty");
        chosen.extend(best.iter().copied());
    }

    let mut terms: Vec<Implicant> = chosen.into_iter().map(|i| primes[i]).collect();
    terms.sort_by_key(|t| t.pattern(n));
    Cover { vars: vars.to_vec(), terms }
}

fn absorb(set: BTreeSet<BTreeSet<usize>>) -> BTreeSet<BTreeSet<usize>> {
    let mut by_size: Vec<&BTreeSet<usize>> = set.iter().collect();
    by_size.sort_by_key(|s| s.len());
    let mut keep: Vec<&BTreeSet<usize>> = Vec::new();
    for s in by_size {
        if !keep.iter().any(|k| k.is_subset(s)) {
            keep.push(s);
        }
    }
    keep.into_iter().cloned().collect()
}

/// Minterm and don't-care sets of a K-map.
pub fn kmap_sets(k: &KMapIr) -> (Vec<u32>, Vec<u32>) {
    let mut ones = Vec::new();
    let mut dcs = Vec::new();
    for (r, row) in k.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            match cell {
                Cell::One => ones.push(k.minterm(r, c)),
                Cell::DontCare => dcs.push(k.minterm(r, c)),
                Cell::Zero => {}
            }
        }
    }
    ones.sort_unstable();
    dcs.sort_unstable();
    (ones, dcs)
}

pub fn minimize_kmap_cover(k: &KMapIr) -> Cover {
    let (ones, dcs) = kmap_sets(k);
    minimize(&k.vars(), &ones, &dcs)
}

/// Minimized sum-of-products for a K-map, as Boolean equations.
pub fn minimize_kmap(k: &KMapIr) -> BooleanEqnsIr {
    let cover = minimize_kmap_cover(k);
    let out = k.output.clone().unwrap_or_else(|| "out".to_string());
    BooleanEqnsIr { inputs: k.vars(), outputs: vec![out.clone()], expressions: BTreeMap::from([(out, cover.to_text())]) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        ["a", "b", "c", "d", "e", "f"][..n].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_negated_literal() {
        // 1s at a=0,b=0 and a=0,b=1
        let c = minimize(&names(2), &[0, 1], &[]);
        assert_eq!(c.to_text(), "NOT a");
    }

    #[test]
    fn checkerboard_is_xor() {
        let c = minimize(&names(2), &[1, 2], &[]);
        assert_eq!(c.terms.len(), 2);
        assert_eq!(c.to_text(), "(NOT a AND b) OR (a AND NOT b)");
    }

    #[test]
    fn constants() {
        assert_eq!(minimize(&names(3), &[], &[1, 2]).to_text(), "0");
        assert_eq!(minimize(&names(2), &[0, 1, 2, 3], &[]).to_text(), "1");
        assert_eq!(minimize(&names(2), &[0, 3], &[1, 2]).to_text(), "1");
    }

    #[test]
    fn cyclic_core_needs_petrick() {
        // f = sum m(0,1,2,5,6,7) has no essential primes
        let c = minimize(&names(3), &[0, 1, 2, 5, 6, 7], &[]);
        assert_eq!(c.terms.len(), 3);
        for m in 0..8 {
            assert_eq!(c.eval(m), [0, 1, 2, 5, 6, 7].contains(&m));
        }
    }

    #[test]
    fn dont_cares_are_absorbed() {
        let c = minimize(&names(4), &[1, 3, 7, 11, 15], &[0, 2, 5]);
        // a'd and a'b' tie on size; the '-' pattern sorts first
        assert_eq!(c.to_text(), "(c AND d) OR (NOT a AND d)");
    }

    #[test]
    fn pattern_strings() {
        let t = Implicant { value: 0b100, mask: 0b010 };
        assert_eq!(t.pattern(3), "1-0");
        assert_eq!(t.literals(3), 2);
    }
}
