//! Saturating fixed-point arithmetic for the hardware-style backend, plus
//! the policy that derives word formats from problem and run parameters.
//!
//! Values are two's-complement words of `total_bits` with `frac_bits`
//! fractional bits; all arithmetic saturates (never wraps) and rounds to
//! nearest-even. Saturation is silent but counted by the engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{compute_c0, C0Policy, SolverConfig};
use crate::ising::IsingModel;

#[derive(Debug, Error)]
pub enum FixedPointError {
    #[error("total bits must be in [4, 63] and frac bits in [0, total-1]; got ({total_bits}, {frac_bits})")]
    InvalidFormat { total_bits: u32, frac_bits: u32 },
    #[error("J[{row}][{col}] = {value} is not an integer; rescale couplings before the fixed backend")]
    JNotInteger { row: usize, col: usize, value: f64 },
    #[error("J[{row}][{col}] = {value} does not fit in {j_bits}-bit two's complement")]
    JOutOfRange {
        row: usize,
        col: usize,
        value: f64,
        j_bits: u32,
    },
    #[error("J word width must be in [2, 32], got {0}")]
    BadJBits(u32),
    #[error("derived word of {required} bits exceeds the 63-bit limit")]
    WordTooWide { required: u32 },
    #[error("accumulator exceeded {acc_bits} bits")]
    AccumulatorOverflow { acc_bits: u32 },
    #[error("pump increment a0/n_steps quantizes to zero in the chosen format")]
    PumpIncrementUnderflow,
    #[error("coupling scale c0 quantizes to zero in the chosen format")]
    C0Underflow,
}

/// Two's-complement fixed-point word format.
///
/// Representable range is `[-2^(t-1-f), 2^(t-1-f) - 2^-f]` with resolution
/// `2^-f`. Arithmetic saturates on overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl FixedFormat {
    /// `total_bits` is capped at 63 so products fit an `i128` intermediate.
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, FixedPointError> {
        if !(4..=63).contains(&total_bits) || frac_bits > total_bits - 1 {
            return Err(FixedPointError::InvalidFormat {
                total_bits,
                frac_bits,
            });
        }
        Ok(Self {
            total_bits,
            frac_bits,
        })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn resolution(&self) -> f64 {
        f64::from(-(self.frac_bits as i32)).exp2()
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    pub fn max_value(&self) -> f64 {
        self.to_value(self.max_raw())
    }

    pub fn min_value(&self) -> f64 {
        self.to_value(self.min_raw())
    }

    pub fn to_value(&self, raw: i64) -> f64 {
        raw as f64 * self.resolution()
    }

    /// Round-to-nearest-even at the format resolution, then saturate.
    pub fn quantize(&self, v: f64) -> Quantized {
        let scaled = (v * (self.frac_bits as f64).exp2()).round_ties_even();
        self.saturate_i128(scaled as i128)
    }

    /// Saturates a raw value (already at this format's scale) into range.
    pub fn saturate_i128(&self, raw: i128) -> Quantized {
        let max = self.max_raw() as i128;
        let min = self.min_raw() as i128;
        if raw > max {
            Quantized {
                raw: max as i64,
                saturated: true,
            }
        } else if raw < min {
            Quantized {
                raw: min as i64,
                saturated: true,
            }
        } else {
            Quantized {
                raw: raw as i64,
                saturated: false,
            }
        }
    }

    /// Fixed-point product: full `i128` multiply, round-to-nearest-even
    /// shift back to this scale, saturate.
    pub fn mul(&self, a: i64, b: i64) -> Quantized {
        let p = a as i128 * b as i128;
        self.saturate_i128(rshift_round_even(p, self.frac_bits))
    }

    /// Saturating add of two raw values at this scale.
    pub fn add(&self, a: i64, b: i64) -> Quantized {
        self.saturate_i128(a as i128 + b as i128)
    }
}

/// A quantized raw word plus whether saturation occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    pub raw: i64,
    pub saturated: bool,
}

/// Arithmetic right shift with round-half-to-even.
fn rshift_round_even(p: i128, shift: u32) -> i128 {
    if shift == 0 {
        return p;
    }
    let floor = p >> shift;
    let rem = p - (floor << shift); // in [0, 2^shift)
    let half = 1i128 << (shift - 1);
    if rem > half {
        floor + 1
    } else if rem < half {
        floor
    } else if floor & 1 == 1 {
        floor + 1
    } else {
        floor
    }
}

/// Exact signed accumulation `sum_j (+|-) j_row[j]` in a widened integer
/// accumulator; no rounding happens before the later c0 multiply. Errors if
/// the running value leaves `acc_bits` two's complement range.
pub fn fixed_mac<T: Copy + Into<i64>>(
    j_row: &[T],
    signs: &[i8],
    acc_bits: u32,
) -> Result<i64, FixedPointError> {
    debug_assert_eq!(j_row.len(), signs.len());
    let max = (1i64 << (acc_bits - 1)) - 1;
    let min = -(1i64 << (acc_bits - 1));
    let mut acc = 0i64;
    for (&j, &s) in j_row.iter().zip(signs) {
        // branchless negate: signs are unpredictable in the hot loop
        let mask = i64::from(s >> 7);
        acc += (j.into() ^ mask) - mask;
        if acc > max || acc < min {
            return Err(FixedPointError::AccumulatorOverflow { acc_bits });
        }
    }
    Ok(acc)
}

/// Accumulator width that provably holds any row sum.
pub fn mac_acc_bits(n: usize, j_bits: u32) -> u32 {
    j_bits + usize::BITS - n.leading_zeros() + 1
}

/// Unchecked MAC for hot loops whose accumulator width was already sized by
/// [`mac_acc_bits`]: same exact integer semantics as [`fixed_mac`], with the
/// loop-carried range check traded for independent lanes the compiler can
/// vectorize. Integer addition is order-independent, so the lane split does
/// not affect results.
pub(crate) fn fixed_mac_unchecked<T: Copy + Into<i64>>(row: &[T], signs: &[i8]) -> i64 {
    let mut acc = [0i64; 4];
    let mut rc = row.chunks_exact(4);
    let mut sc = signs.chunks_exact(4);
    for (r, s) in (&mut rc).zip(&mut sc) {
        for l in 0..4 {
            let mask = i64::from(s[l] >> 7);
            acc[l] += (r[l].into() ^ mask) - mask;
        }
    }
    let mut tail = 0i64;
    for (&j, &s) in rc.remainder().iter().zip(sc.remainder()) {
        let mask = i64::from(s >> 7);
        tail += (j.into() ^ mask) - mask;
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Word formats chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedFormats {
    pub x: FixedFormat,
    pub y: FixedFormat,
    pub j_bits: u32,
}

/// Extra fractional bits kept below the leading bit of c0 so the coupling
/// scale survives quantization.
pub const C0_GUARD_BITS: u32 = 8;

/// Smallest `f` with `2^f >= x`.
fn bits_for_ratio(x: f64) -> u32 {
    let mut f = 0u32;
    while (f64::from(f)).exp2() < x && f < 63 {
        f += 1;
    }
    f
}

/// Derives x/y word formats from the problem and run parameters.
///
/// Fractional bits must resolve both the pump increment `a0 / n_steps` and
/// the coupling scale `c0` (with [`C0_GUARD_BITS`] of headroom); integer
/// bits must hold the worst-case momentum increment
/// `max_i sum_j |J[i][j]| * c0 + a0`, doubled once for accumulation
/// headroom. `J` entries must already be integers representable in
/// `j_bits` two's complement.
pub fn derive_format(
    model: &IsingModel,
    config: &SolverConfig,
) -> Result<DerivedFormats, FixedPointError> {
    let j_bits = config.fixed_j_bits().unwrap_or(8);
    check_j_bits(j_bits)?;
    check_j_integral(model, j_bits)?;

    // c0 as the run would see it; a degenerate (constant) J contributes
    // nothing to the width derivation and fails later in the solver.
    let c0 = match config.c0_policy {
        C0Policy::Fixed(v) => v,
        C0Policy::Auto => compute_c0(model).unwrap_or(0.0),
    };

    let mut frac = bits_for_ratio(f64::from(config.n_steps) / config.a0);
    if c0 > 0.0 {
        frac = frac.max(bits_for_ratio(1.0 / c0) + C0_GUARD_BITS);
    }

    let worst = model.max_abs_row_sum() * c0 + config.a0;
    let int_bits = bits_for_ratio(worst.max(1.0)) + 1;

    let total = 1 + int_bits + frac;
    if total > 63 {
        return Err(FixedPointError::WordTooWide { required: total });
    }
    let fmt = FixedFormat::new(total.max(4), frac)?;
    Ok(DerivedFormats {
        x: fmt,
        y: fmt,
        j_bits,
    })
}

/// Checks that every coupling is an integer representable in `j_bits` two's
/// complement, as the fixed backend stores them.
pub fn validate_couplings(model: &IsingModel, j_bits: u32) -> Result<(), FixedPointError> {
    check_j_bits(j_bits)?;
    check_j_integral(model, j_bits)
}

fn check_j_bits(j_bits: u32) -> Result<(), FixedPointError> {
    if !(2..=32).contains(&j_bits) {
        return Err(FixedPointError::BadJBits(j_bits));
    }
    Ok(())
}

fn check_j_integral(model: &IsingModel, j_bits: u32) -> Result<(), FixedPointError> {
    let max = ((1u64 << (j_bits - 1)) - 1) as f64;
    let min = -((1u64 << (j_bits - 1)) as f64);
    let n = model.n();
    for row in 0..n {
        for (col, &value) in model.coupling_row(row).iter().enumerate() {
            if value.fract() != 0.0 {
                return Err(FixedPointError::JNotInteger { row, col, value });
            }
            if value > max || value < min {
                return Err(FixedPointError::JOutOfRange {
                    row,
                    col,
                    value,
                    j_bits,
                });
            }
        }
    }
    Ok(())
}

/// Rescales couplings onto the `j_bits` integer grid: returns the scaled
/// model and the factor `rho` with `J_scaled = round(rho * J)`. Models whose
/// couplings are already in-range integers pass through with `rho = 1`.
pub fn scale_to_integer_grid(
    model: &IsingModel,
    j_bits: u32,
) -> Result<(IsingModel, f64), FixedPointError> {
    check_j_bits(j_bits)?;
    debug_assert!(!model.has_field(), "scale couplings after field embedding");
    if check_j_integral(model, j_bits).is_ok() {
        return Ok((model.clone(), 1.0));
    }
    let max_abs = model
        .coupling()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let rho = (((1u64 << (j_bits - 1)) - 1) as f64) / max_abs;
    let n = model.n();
    let j: Vec<f64> = model.coupling().iter().map(|v| (v * rho).round()).collect();
    let scaled = IsingModel::from_parts_unchecked(n, j, vec![0.0; n], model.offset());
    check_j_integral(&scaled, j_bits)?;
    Ok((scaled, rho))
}
