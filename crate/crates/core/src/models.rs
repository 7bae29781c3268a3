//! Model Hamiltonians, Pauli observables and matrix files.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli, random::rng, ComplexMatrix, C64};

pub const MAX_QUBITS: usize = 10;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::ParameterOutOfRange(format!("n_qubits = {n} must lie in 1..={MAX_QUBITS}")));
    }
    Ok(())
}

fn site_pair(p: char, q: char, i: usize, j: usize, n: usize) -> Result<ComplexMatrix> {
    Ok(&pauli::on_site(p, i, n)? * &pauli::on_site(q, j, n)?)
}

/// Open-chain transverse-field Ising model `-sum Z_i Z_{i+1} - g sum X_i`.
pub fn tfim(n: usize, g: f64) -> Result<ComplexMatrix> {
    check_qubits(n)?;
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for i in 0..n.saturating_sub(1) {
        h.axpy(C64::new(-1.0, 0.0), &site_pair('Z', 'Z', i, i + 1, n)?);
    }
    for i in 0..n {
        h.axpy(C64::new(-g, 0.0), &pauli::on_site('X', i, n)?);
    }
    Ok(h)
}

/// Open-chain Heisenberg model `sum (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1})`.
pub fn heisenberg(n: usize) -> Result<ComplexMatrix> {
    check_qubits(n)?;
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for i in 0..n.saturating_sub(1) {
        for p in ['X', 'Y', 'Z'] {
            h += &site_pair(p, p, i, i + 1, n)?;
        }
    }
    Ok(h)
}

/// Nearest-neighbour chain with every one- and two-site Pauli term weighted by a
/// coefficient drawn uniformly from `[-1, 1]`.
pub fn random_2local(n: usize, seed: u64) -> Result<ComplexMatrix> {
    check_qubits(n)?;
    let mut r = rng(seed);
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for i in 0..n {
        for p in ['X', 'Y', 'Z'] {
            h.axpy(C64::new(r.gen_range(-1.0..=1.0), 0.0), &pauli::on_site(p, i, n)?);
        }
    }
    for i in 0..n.saturating_sub(1) {
        for p in ['X', 'Y', 'Z'] {
            for q in ['X', 'Y', 'Z'] {
                h.axpy(C64::new(r.gen_range(-1.0..=1.0), 0.0), &site_pair(p, q, i, i + 1, n)?);
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub pauli: String,
}

/// `sum_j coeff_j P_j` over Pauli strings of equal length.
pub fn pauli_sum(terms: &[PauliTerm]) -> Result<ComplexMatrix> {
    let first = terms.first().ok_or_else(|| Error::Config("empty Pauli sum".into()))?;
    let n = first.pauli.chars().count();
    check_qubits(n)?;
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d, d);
    for t in terms {
        if t.pauli.chars().count() != n {
            return Err(Error::Config(format!("Pauli string '{}' has length != {n}", t.pauli)));
        }
        h.axpy(C64::new(t.coeff, 0.0), &parse_pauli(&t.pauli)?);
    }
    Ok(h)
}

/// Pauli string such as `"XIZ"`; the first character acts on the leading tensor factor.
pub fn parse_pauli(s: &str) -> Result<ComplexMatrix> {
    let s = s.trim().to_ascii_uppercase();
    if s.is_empty() || s.chars().any(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
        return Err(Error::Config(format!("invalid Pauli string '{s}'")));
    }
    check_qubits(s.len())?;
    pauli::string(&s)
}

/// Dense matrix in JSON form: `{"re": [[..]], "im": [[..]]}` with `im` optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixFile {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.re.len();
        if n == 0 || self.re.iter().any(|row| row.len() != n) {
            return Err(Error::Config("matrix file must hold a nonempty square `re` array".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != n || im.iter().any(|row| row.len() != n) {
                return Err(Error::Config("`im` must match the shape of `re`".into()));
            }
        }
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        });
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(C64) -> f64| (0..m.rows()).map(|i| (0..m.cols()).map(|j| f(m[(i, j)])).collect()).collect();
        let im: Vec<Vec<f64>> = rows(|z| z.im);
        let has_im = im.iter().flatten().any(|x| *x != 0.0);
        Self { re: rows(|z| z.re), im: has_im.then_some(im) }
    }
}

pub fn load_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let file: MatrixFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    file.to_matrix()
}

/// Every single-site Pauli `X_i, Y_i, Z_i` on `n` qubits.
pub fn single_site_paulis(n: usize) -> Result<Vec<ComplexMatrix>> {
    check_qubits(n)?;
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        for p in ['X', 'Y', 'Z'] {
            out.push(pauli::on_site(p, i, n)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::herm_eig;

    #[test]
    fn tfim_two_sites() {
        let h = tfim(2, 1.0).unwrap();
        let vals = herm_eig(&h).unwrap().values;
        // -ZZ - X1 - X2 has ground energy -sqrt(5).
        assert!((vals[0] + 5f64.sqrt()).abs() < 1e-12);
        assert!(h.is_hermitian(1e-14));
    }

    #[test]
    fn heisenberg_singlet() {
        let vals = herm_eig(&heisenberg(2).unwrap()).unwrap().values;
        assert!((vals[0] + 3.0).abs() < 1e-12);
        assert!((vals[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_model_is_seeded() {
        let a = random_2local(3, 4).unwrap();
        assert_eq!(a, random_2local(3, 4).unwrap());
        assert_ne!(a, random_2local(3, 5).unwrap());
        assert!(a.is_hermitian(1e-14));
    }

    #[test]
    fn pauli_inputs() {
        let zx = pauli_sum(&[PauliTerm { coeff: 0.5, pauli: "ZI".into() }, PauliTerm { coeff: 0.5, pauli: "IX".into() }]).unwrap();
        assert_eq!(zx.rows(), 4);
        assert!(parse_pauli("xq").is_err());
        assert!(parse_pauli("").is_err());
        assert!(tfim(11, 1.0).is_err());
        assert_eq!(single_site_paulis(2).unwrap().len(), 6);
    }

    #[test]
    fn matrix_file_round_trip() {
        let y = pauli::y();
        let f = MatrixFile::from_matrix(&y);
        assert_eq!(f.to_matrix().unwrap(), y);
        let json = serde_json::to_string(&MatrixFile::from_matrix(&pauli::z())).unwrap();
        assert!(!json.contains("im"));
        let bad = MatrixFile { re: vec![vec![1.0, 0.0]], im: None };
        assert!(bad.to_matrix().is_err());
    }
}
