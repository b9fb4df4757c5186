//! Stream semantic registers: affine address generators of up to four
//! nested dimensions with per-item repetition.

use crate::error::IsaError;

/// Number of loop dimensions an SSR supports.
pub const DIMS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsrConfig {
    pub base: u64,
    /// Byte stride per dimension, innermost first.
    pub strides: [i64; DIMS],
    /// Iteration count per dimension, innermost first. Unused dimensions are 1.
    pub bounds: [u32; DIMS],
    /// Extra deliveries of each address.
    pub repeat: u32,
}

impl SsrConfig {
    /// One-dimensional stream over `count` items.
    pub fn linear(base: u64, stride: i64, count: u32) -> Self {
        SsrConfig {
            base,
            strides: [stride, 0, 0, 0],
            bounds: [count, 1, 1, 1],
            repeat: 0,
        }
    }

    pub fn validate(&self) -> Result<(), IsaError> {
        if self.bounds.contains(&0) {
            return Err(IsaError::InvalidStream("zero bound".into()));
        }
        Ok(())
    }

    /// Number of reads the stream serves before it is exhausted.
    pub fn len(&self) -> u64 {
        self.bounds.iter().map(|&b| u64::from(b)).product::<u64>() * (u64::from(self.repeat) + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Highest dimension with a bound above one, plus one (at least one).
    pub fn programmed_dims(&self) -> usize {
        self.bounds
            .iter()
            .rposition(|&b| b > 1)
            .map_or(1, |d| d + 1)
    }

    /// Configuration register writes: bound and stride per programmed
    /// dimension plus the base pointer write that arms it.
    pub fn config_writes(&self) -> usize {
        3 * self.programmed_dims()
    }

    pub fn stream(&self) -> SsrStream {
        SsrStream {
            config: self.clone(),
            index: [0; DIMS],
            rep: 0,
            done: self.is_empty(),
        }
    }
}

/// Iterator state of a configured stream.
#[derive(Clone, Debug)]
pub struct SsrStream {
    config: SsrConfig,
    index: [u32; DIMS],
    rep: u32,
    done: bool,
}

impl SsrStream {
    pub fn config(&self) -> &SsrConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Next address, and whether the stream is now exhausted.
    pub fn ssr_next(&mut self) -> Result<(u64, bool), IsaError> {
        if self.done {
            return Err(IsaError::StreamExhausted);
        }
        let offset: i64 = (0..DIMS)
            .map(|d| i64::from(self.index[d]) * self.config.strides[d])
            .sum();
        let addr = self.config.base.wrapping_add_signed(offset);

        if self.rep < self.config.repeat {
            self.rep += 1;
        } else {
            self.rep = 0;
            self.done = true;
            for d in 0..DIMS {
                self.index[d] += 1;
                if self.index[d] < self.config.bounds[d] {
                    self.done = false;
                    break;
                }
                self.index[d] = 0;
            }
        }
        Ok((addr, self.done))
    }
}

impl Iterator for SsrStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.ssr_next().ok().map(|(a, _)| a)
    }
}
