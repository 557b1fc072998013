use crate::dataset::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Squared Euclidean distance, accumulated in `f64`. Callers check lengths.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.widen() - y.widen();
            d * d
        })
        .sum()
}

pub fn euclidean_distance<T: Scalar>(a: &FeatureVector<T>, b: &FeatureVector<T>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(squared_distance(a.as_slice(), b.as_slice()).sqrt())
}

/// Index and distance of the pool element closest to `f`. Ties go to the
/// lowest index.
pub fn nearest<T, P>(f: &[T], pool: &[P]) -> Result<(usize, f64)>
where
    T: Scalar,
    P: AsRef<[T]>,
{
    let (index, sq) = nearest_squared(f, pool)?;
    Ok((index, sq.sqrt()))
}

/// Same as [`nearest`] but returns the squared distance.
pub fn nearest_squared<T, P>(f: &[T], pool: &[P]) -> Result<(usize, f64)>
where
    T: Scalar,
    P: AsRef<[T]>,
{
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut best = (0, f64::INFINITY);
    for (i, p) in pool.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != f.len() {
            return Err(Error::DimensionMismatch {
                left: f.len(),
                right: p.len(),
            });
        }
        let d = squared_distance(f, p);
        // strict comparison keeps the first index on ties
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}
