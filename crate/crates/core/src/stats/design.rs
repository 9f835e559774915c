//! Treatment-coded factorial designs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::linalg::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    /// Level names; the first level is the reference.
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(name: &str, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            levels: levels.iter().map(|l| String::from(*l)).collect(),
        }
    }
}

/// A model term: a main effect (one factor) or an interaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    /// Indices into the model's factors, ascending.
    pub factors: Vec<usize>,
}

impl Term {
    pub fn main(f: usize) -> Self {
        Self {
            factors: alloc::vec![f],
        }
    }

    pub fn interaction(fs: &[usize]) -> Self {
        let mut factors = fs.to_vec();
        factors.sort_unstable();
        factors.dedup();
        Self { factors }
    }

    /// True if every factor of `other` appears in `self`.
    pub fn contains(&self, other: &Term) -> bool {
        other.factors.iter().all(|f| self.factors.contains(f))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorialModel {
    pub factors: Vec<Factor>,
    pub terms: Vec<Term>,
}

impl FactorialModel {
    /// `response ~ backend * mode + constraint + transport`, with factors in
    /// that order.
    pub fn routing(backends: &[&str], modes: &[&str], constraints: &[&str], transports: &[&str]) -> Self {
        Self {
            factors: alloc::vec![
                Factor::new("backend", backends),
                Factor::new("mode", modes),
                Factor::new("constraint", constraints),
                Factor::new("transport", transports),
            ],
            terms: alloc::vec![
                Term::main(0),
                Term::main(1),
                Term::interaction(&[0, 1]),
                Term::main(2),
                Term::main(3),
            ],
        }
    }

    pub fn term_name(&self, term: &Term) -> String {
        term.factors
            .iter()
            .map(|&f| self.factors[f].name.as_str())
            .collect::<Vec<_>>()
            .join(":")
    }

    /// Number of treatment-coded columns of a term.
    pub fn term_df(&self, term: &Term) -> usize {
        term.factors
            .iter()
            .map(|&f| self.factors[f].levels.len().saturating_sub(1))
            .product()
    }

    /// Full-model parameter count including the intercept.
    pub fn rank(&self) -> usize {
        1 + self.terms.iter().map(|t| self.term_df(t)).sum::<usize>()
    }

    fn check_rows(&self, rows: &[Vec<usize>]) -> Result<()> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != self.factors.len() {
                return Err(Error::Dimension(format!(
                    "observation {i} has {} levels, model has {} factors",
                    row.len(),
                    self.factors.len()
                )));
            }
            for (f, &l) in row.iter().enumerate() {
                if l >= self.factors[f].levels.len() {
                    return Err(Error::Dimension(format!(
                        "observation {i}: level {l} out of range for `{}`",
                        self.factors[f].name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds the design matrix for the intercept plus the given terms.
    pub fn design(&self, rows: &[Vec<usize>], terms: &[&Term]) -> Result<DesignMatrix> {
        self.check_rows(rows)?;
        let mut names = alloc::vec![String::from("(intercept)")];
        let mut cells: Vec<(usize, Vec<usize>)> = Vec::new();
        for (ti, term) in terms.iter().enumerate() {
            for combo in self.level_combos(term) {
                let name = term
                    .factors
                    .iter()
                    .zip(&combo)
                    .map(|(&f, &l)| format!("{}[{}]", self.factors[f].name, self.factors[f].levels[l]))
                    .collect::<Vec<_>>()
                    .join(":");
                names.push(name);
                cells.push((ti, combo));
            }
        }
        let mut x = DesignMatrix::new(rows.len(), names);
        for (r, row) in rows.iter().enumerate() {
            x.set(r, 0, 1.0);
            for (c, (ti, combo)) in cells.iter().enumerate() {
                let hit = terms[*ti].factors.iter().zip(combo).all(|(&f, &l)| row[f] == l);
                if hit {
                    x.set(r, c + 1, 1.0);
                }
            }
        }
        Ok(x)
    }

    /// Non-reference level combinations of a term, in lexicographic order.
    fn level_combos(&self, term: &Term) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = alloc::vec![Vec::new()];
        for &f in &term.factors {
            let k = self.factors[f].levels.len();
            let mut next = Vec::new();
            for prefix in &out {
                for l in 1..k {
                    let mut p = prefix.clone();
                    p.push(l);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }
}
