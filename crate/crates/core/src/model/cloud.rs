use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;

use super::MarkovModel;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{Domain, StreamFactory};

/// Law of the starting point `X_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// Uniform on `center + [-half_width, half_width]^d`.
    Box { center: Vec<f64>, half_width: f64 },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Point(p) => p.len(),
            InitialLaw::Box { center, .. } => center.len(),
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, InitialLaw::Point(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::Point(p) if p.iter().all(|v| v.is_finite()) => Ok(()),
            InitialLaw::Point(_) => Err(Error::param("x0", "must be finite")),
            InitialLaw::Box { center, half_width } => {
                if !center.iter().all(|v| v.is_finite()) {
                    return Err(Error::param("x0", "must be finite"));
                }
                if !(*half_width >= 0.0 && half_width.is_finite()) {
                    return Err(Error::param("x0_half_width", "must be finite and >= 0"));
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InitialLaw::Point(p) => out.copy_from_slice(p),
            InitialLaw::Box { center, half_width } => {
                for (o, c) in out.iter_mut().zip(center) {
                    let u: f64 = rng.random();
                    *o = c + half_width * (2.0 * u - 1.0);
                }
            }
        }
    }
}

/// `M` independent rows `(X_i, …, X_N; H^{(i)}_{i+1}, …, H^{(i)}_N)` used by
/// the regressions at time index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationCloud {
    index: usize,
    rows: usize,
    dim: usize,
    weight_dim: usize,
    steps: usize,
    seed: u64,
    x: Vec<f64>,
    h: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"MWLSCLD1";

impl SimulationCloud {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight_dim(&self) -> usize {
        self.weight_dim
    }

    /// Number of future steps `N - i`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `X_{i+r}` on row `m`.
    pub fn state(&self, m: usize, r: usize) -> &[f64] {
        let stride = (self.steps + 1) * self.dim;
        let at = m * stride + r * self.dim;
        &self.x[at..at + self.dim]
    }

    /// `H^{(i)}_{i+r}` on row `m`, for `r >= 1`.
    pub fn weight(&self, m: usize, r: usize) -> &[f64] {
        debug_assert!(r >= 1);
        let stride = self.steps * self.weight_dim;
        let at = m * stride + (r - 1) * self.weight_dim;
        &self.h[at..at + self.weight_dim]
    }

    /// Writes the cloud as a little-endian binary table: an 8-byte tag, the
    /// header `(index, rows, d, q, steps, seed)` as `u64`, then for each row
    /// its state block followed by its weight block as `f64`.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [
            self.index as u64,
            self.rows as u64,
            self.dim as u64,
            self.weight_dim as u64,
            self.steps as u64,
            self.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        let xs = (self.steps + 1) * self.dim;
        let hs = self.steps * self.weight_dim;
        let mut buf = Vec::with_capacity(8 * (xs + hs));
        for m in 0..self.rows {
            buf.clear();
            for v in self.x[m * xs..(m + 1) * xs]
                .iter()
                .chain(&self.h[m * hs..(m + 1) * hs])
            {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads a cloud written by [`SimulationCloud::dump`].
    pub fn restore<R: Read>(mut r: R) -> Result<Self> {
        let mut tag = [0u8; 8];
        r.read_exact(&mut tag)
            .map_err(|_| Error::CloudFormat("missing header".into()))?;
        if &tag != MAGIC {
            return Err(Error::CloudFormat("unknown file tag".into()));
        }
        let mut header = [0u64; 6];
        for v in &mut header {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)
                .map_err(|_| Error::CloudFormat("truncated header".into()))?;
            *v = u64::from_le_bytes(b);
        }
        let [index, rows, dim, weight_dim, steps, seed] = header;
        let to_usize = |v: u64, what: &str| {
            usize::try_from(v).map_err(|_| Error::CloudFormat(format!("{what} too large")))
        };
        let (index, rows, dim, weight_dim, steps) = (
            to_usize(index, "index")?,
            to_usize(rows, "rows")?,
            to_usize(dim, "d")?,
            to_usize(weight_dim, "q")?,
            to_usize(steps, "steps")?,
        );
        if dim == 0 || weight_dim == 0 || steps == 0 {
            return Err(Error::CloudFormat("zero dimension in header".into()));
        }
        let xs = (steps + 1)
            .checked_mul(dim)
            .ok_or_else(|| Error::CloudFormat("state block too large".into()))?;
        let hs = steps
            .checked_mul(weight_dim)
            .ok_or_else(|| Error::CloudFormat("weight block too large".into()))?;
        let mut x = Vec::new();
        let mut h = Vec::new();
        let mut b = [0u8; 8];
        let mut read = |out: &mut Vec<f64>, count: usize| -> Result<()> {
            for _ in 0..count {
                r.read_exact(&mut b)
                    .map_err(|_| Error::CloudFormat("truncated body".into()))?;
                out.push(f64::from_le_bytes(b));
            }
            Ok(())
        };
        for _ in 0..rows {
            read(&mut x, xs)?;
            read(&mut h, hs)?;
        }
        Ok(Self {
            index,
            rows,
            dim,
            weight_dim,
            steps,
            seed,
            x,
            h,
        })
    }
}

/// Generates the cloud for time index `i` with `m` rows. Row `r` draws from
/// its own stream `(Cloud or Evaluation, i, r)`, so the result is independent
/// of the thread count and bitwise reproducible.
pub fn sample_cloud(
    model: &dyn MarkovModel,
    grid: &TimeGrid,
    initial: &InitialLaw,
    i: usize,
    m: usize,
    streams: &StreamFactory,
    domain: Domain,
) -> Result<SimulationCloud> {
    let n = grid.len();
    if i >= n {
        return Err(Error::IndexOutOfRange {
            index: i,
            expected: format!("0 <= i < {n}"),
        });
    }
    if m == 0 {
        return Err(Error::param("M", "cloud size must be at least 1"));
    }
    initial.validate()?;
    let d = model.dim();
    let q = model.weight_dim();
    if initial.dim() != d {
        return Err(Error::param(
            "x0",
            format!("dimension {} does not match the model dimension {d}", initial.dim()),
        ));
    }
    let steps = n - i;
    let xs = (steps + 1) * d;
    let hs = steps * q;
    let mut x = vec![0.0; m * xs];
    let mut h = vec![0.0; m * hs];
    x.par_chunks_mut(xs)
        .zip(h.par_chunks_mut(hs))
        .enumerate()
        .try_for_each(|(row, (xr, hr))| {
            let mut rng = streams.stream(domain, i, row);
            let mut x0 = vec![0.0; d];
            initial.sample(&mut rng, &mut x0);
            model.sample_row(grid, i, &x0, row, &mut rng, xr, hr)
        })?;
    Ok(SimulationCloud {
        index: i,
        rows: m,
        dim: d,
        weight_dim: q,
        steps,
        seed: streams.seed(),
        x,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BrownianModel;

    fn cloud(i: usize, seed: u64) -> SimulationCloud {
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let m = BrownianModel::new(1).unwrap();
        let law = InitialLaw::Box {
            center: vec![0.0],
            half_width: 1.0,
        };
        sample_cloud(&m, &g, &law, i, 64, &StreamFactory::new(seed), Domain::Cloud).unwrap()
    }

    #[test]
    fn reproducible() {
        assert_eq!(cloud(2, 11), cloud(2, 11));
        assert_ne!(cloud(2, 11).state(0, 0), cloud(2, 12).state(0, 0));
        assert_ne!(cloud(2, 11).state(0, 0), cloud(3, 11).state(0, 0));
    }

    #[test]
    fn dump_restore_round_trip() {
        let c = cloud(1, 5);
        let mut buf = Vec::new();
        c.dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 48 + 64 * 8 * (5 + 4));
        let back = SimulationCloud::restore(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(SimulationCloud::restore(&buf[..buf.len() - 1]).is_err());
        assert!(SimulationCloud::restore(&b"nonsense"[..]).is_err());
    }

    #[test]
    fn index_and_size_checked() {
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let m = BrownianModel::new(1).unwrap();
        let law = InitialLaw::Point(vec![0.0]);
        let f = StreamFactory::new(0);
        assert!(sample_cloud(&m, &g, &law, 5, 10, &f, Domain::Cloud).is_err());
        assert!(sample_cloud(&m, &g, &law, 0, 0, &f, Domain::Cloud).is_err());
        let bad = InitialLaw::Point(vec![0.0, 1.0]);
        assert!(sample_cloud(&m, &g, &bad, 0, 10, &f, Domain::Cloud).is_err());
    }
}
