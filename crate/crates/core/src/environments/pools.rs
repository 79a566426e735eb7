use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{solve, SpdMatrix};

use super::ActionSetSampler;

/// Contexts split by binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPools {
    pub dim: usize,
    pub positive: Vec<Vec<f64>>,
    pub negative: Vec<Vec<f64>>,
}

impl ContextPools {
    /// All rows with their labels (1 for positive, 0 for negative).
    pub fn labelled_rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let features = self.positive.iter().chain(&self.negative).cloned().collect();
        let labels = std::iter::repeat_n(1.0, self.positive.len())
            .chain(std::iter::repeat_n(0.0, self.negative.len()))
            .collect();
        (features, labels)
    }

    pub fn into_sampler(self) -> ActionSetSampler {
        ActionSetSampler::TwoPool {
            positive: self.positive,
            negative: self.negative,
        }
    }
}

struct Row {
    features: Vec<f64>,
    label: bool,
}

fn read_rows(path: &Path) -> Result<(usize, Vec<Row>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    let ncols = header.len();
    if ncols < 2 || header.get(ncols - 1).map(str::trim) != Some("label") {
        return Err(Error::Parse {
            row: 1,
            message: "header must be `f1,...,fd,label`".into(),
        });
    }
    let dim = ncols - 1;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row: line,
            message: e.to_string(),
        })?;
        let field = |j: usize| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    message: format!("column {} is not a finite number: `{raw}`", j + 1),
                })
        };
        let features = (0..dim).map(field).collect::<Result<Vec<_>>>()?;
        let label = match field(dim)? {
            l if l == 1.0 => true,
            l if l == 0.0 => false,
            l => {
                return Err(Error::Parse {
                    row: line,
                    message: format!("label must be 0 or 1, got {l}"),
                })
            }
        };
        rows.push(Row { features, label });
    }
    Ok((dim, rows))
}

/// Reads one CSV (`f1,...,fd,label`) and splits its rows by label.
pub fn load_context_pools(path: impl AsRef<Path>) -> Result<ContextPools> {
    let (dim, rows) = read_rows(path.as_ref())?;
    let (pos, neg): (Vec<Row>, Vec<Row>) = rows.into_iter().partition(|r| r.label);
    finish(
        dim,
        pos.into_iter().map(|r| r.features).collect(),
        neg.into_iter().map(|r| r.features).collect(),
    )
}

/// Reads one CSV per class. The label column is ignored; membership comes
/// from the file.
pub fn load_context_pool_files(
    positive: impl AsRef<Path>,
    negative: impl AsRef<Path>,
) -> Result<ContextPools> {
    let (dp, pos) = read_rows(positive.as_ref())?;
    let (dn, neg) = read_rows(negative.as_ref())?;
    if dp != dn {
        return Err(Error::dim(dp, dn));
    }
    finish(
        dp,
        pos.into_iter().map(|r| r.features).collect(),
        neg.into_iter().map(|r| r.features).collect(),
    )
}

fn finish(dim: usize, positive: Vec<Vec<f64>>, negative: Vec<Vec<f64>>) -> Result<ContextPools> {
    if positive.is_empty() {
        return Err(Error::EmptyPool("positive".into()));
    }
    if negative.is_empty() {
        return Err(Error::EmptyPool("negative".into()));
    }
    Ok(ContextPools {
        dim,
        positive,
        negative,
    })
}

/// Ridge regression `(XᵀX + ridge·I)⁻¹ Xᵀy`.
pub fn fit_theta_star(features: &[Vec<f64>], labels: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    if features.len() != labels.len() {
        return Err(Error::dim(features.len(), labels.len()));
    }
    let dim = features
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::EmptyPool("regression rows".into()))?;
    let gram = SpdMatrix::gram(dim, features.iter().map(|x| (x.as_slice(), 1.0)), ridge)?;
    let mut xty = vec![0.0; dim];
    for (x, &y) in features.iter().zip(labels) {
        for (acc, &xi) in xty.iter_mut().zip(x) {
            *acc += xi * y;
        }
    }
    solve(&gram, &xty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_row_pools() {
        let f = write("f1,f2,label\n0.5,0.1,1\n-0.2,0.3,0\n");
        let pools = load_context_pools(f.path()).unwrap();
        assert_eq!(pools.dim, 2);
        let sampler = pools.into_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            assert_eq!(
                sampler.sample(&mut rng),
                vec![vec![0.5, 0.1], vec![-0.2, 0.3]]
            );
        }
    }

    #[test]
    fn two_files() {
        let p = write("f1,label\n1.0,1\n2.0,1\n");
        let n = write("f1,label\n-1.0,0\n");
        let pools = load_context_pool_files(p.path(), n.path()).unwrap();
        assert_eq!(pools.positive.len(), 2);
        assert_eq!(pools.negative, vec![vec![-1.0]]);
    }

    #[test]
    fn parse_errors_carry_row() {
        let f = write("f1,f2,label\n0.5,0.1,1\n0.5,abc,0\n");
        match load_context_pools(f.path()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write("f1,f2,label\n0.5,0.1,2\n");
        assert!(matches!(load_context_pools(f.path()), Err(Error::Parse { row: 2, .. })));
        let f = write("f1,f2,class\n0.5,0.1,1\n");
        assert!(matches!(load_context_pools(f.path()), Err(Error::Parse { row: 1, .. })));
        let f = write("f1,f2,label\n0.5,0.1,1\n");
        assert!(matches!(load_context_pools(f.path()), Err(Error::EmptyPool(_))));
        assert!(matches!(
            load_context_pools("/nonexistent/pools.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn regression_recovers_linear_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = vec![0.3, -1.2, 0.7, 2.0];
        let features: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<f64> = features.iter().map(|x| dot(x, &truth)).collect();
        let fit = fit_theta_star(&features, &labels, 0.0).unwrap();
        for (a, b) in fit.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-8, "{fit:?}");
        }
        let shrunk = fit_theta_star(&features, &labels, 1e12).unwrap();
        assert!(shrunk.iter().all(|v| v.abs() < 1e-9));
        assert!(fit_theta_star(&features, &labels, -1.0).is_err());
    }
}
