use std::sync::OnceLock;

use crate::error::{Error, Result};

const BITS: usize = 32;
const TABLE: &str = include_str!("joe_kuo_1024.txt");

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = 1024;

fn table() -> &'static [[u32; BITS]] {
    static DIRECTIONS: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    DIRECTIONS.get_or_init(|| {
        let mut out = Vec::with_capacity(MAX_DIMENSION);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        out.push(first);
        for line in TABLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let fields: Vec<u32> = line.split_whitespace().map(|t| t.parse().expect("direction table")).collect();
            let (s, a) = (fields[1] as usize, fields[2]);
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                v[k] = if k < s {
                    m[k] << (BITS - 1 - k)
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    x
                };
            }
            out.push(v);
        }
        out
    })
}

/// Direction numbers `v_1..v_32` of one coordinate, scaled by `2^32`.
pub fn direction_numbers(dim: usize) -> Result<&'static [u32; BITS]> {
    table().get(dim).ok_or(Error::SobolDimension { requested: dim + 1, available: MAX_DIMENSION })
}

/// Gray-code Sobol generator. Index 0 is the all-zero point.
#[derive(Debug, Clone)]
pub struct SobolStream {
    directions: &'static [[u32; BITS]],
    state: Vec<u32>,
    index: u64,
}

impl SobolStream {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::SobolDimension { requested: dim, available: MAX_DIMENSION });
        }
        Ok(Self { directions: &table()[..dim], state: vec![0; dim], index: 0 })
    }

    pub fn dimension(&self) -> usize {
        self.state.len()
    }

    /// Index of the point the next call to [`Self::next_bits`] returns.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Next point as 32-bit fractions.
    pub fn next_bits(&mut self) -> Vec<u32> {
        let out = self.state.clone();
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol stream exhausted");
        for (x, v) in self.state.iter_mut().zip(self.directions) {
            *x ^= v[c];
        }
        self.index += 1;
        out
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.next_bits().into_iter().map(|b| b as f64 / 4294967296.0).collect()
    }

    pub fn skip(&mut self, n: u64) {
        for _ in 0..n {
            self.next_bits();
        }
    }
}

/// `count` Sobol points in `[0,1)^dim`, dropping the zero point and then
/// `skip` further points.
pub fn sobol_points(dim: usize, count: usize, skip: u64) -> Result<Vec<Vec<f64>>> {
    let mut s = SobolStream::new(dim)?;
    s.skip(1 + skip);
    Ok((0..count).map(|_| s.next_point()).collect())
}
