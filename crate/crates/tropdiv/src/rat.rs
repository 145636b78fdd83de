//! Exact rational arithmetic helpers.
//!
//! Every length, offset and firing amount in this crate is a [`Rat`]. There is
//! no floating point anywhere: equality of lengths and positions is decidable,
//! which the reduction and search routines rely on.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational number. Always stored normalized (positive denominator,
/// coprime numerator/denominator) by the underlying representation.
pub type Rat = num_rational::BigRational;

/// `p` as a rational.
pub fn rat_int(p: i64) -> Rat {
    Rat::from_integer(BigInt::from(p))
}

/// `p/q` as a rational. Panics if `q == 0`; use [`parse_rat`] for user input.
pub fn rat(p: i64, q: i64) -> Rat {
    assert!(q != 0, "zero denominator");
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p"`, `"p/q"` or `"-p/q"`. Rejects zero denominators.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), Some(b.trim())),
        None => (s, None),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| format!("invalid integer `{num}`"))?;
    let d: BigInt = match den {
        Some(b) => b.parse().map_err(|_| format!("invalid integer `{b}`"))?,
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(format!("zero denominator in `{s}`"));
    }
    Ok(Rat::new(n, d))
}

/// Renders without spaces: `3`, `-3/4`.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_positive(r: &Rat) -> bool {
    r.is_positive()
}

/// True if `r` is an integer.
pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

/// `r` as i64 when it is a small integer.
pub fn to_i64(r: &Rat) -> Option<i64> {
    if !is_integer(r) {
        return None;
    }
    let n = r.numer();
    i64::try_from(n.clone()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat(" -6/8 ").unwrap(), rat(-3, 4));
        assert_eq!(parse_rat("5").unwrap(), rat_int(5));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("a/2").is_err());
        assert_eq!(format_rat(&rat(6, 4)), "3/2");
        assert_eq!(format_rat(&rat_int(-7)), "-7");
    }

    #[test]
    fn exactness() {
        let third = rat(1, 3);
        let sum = &third + &third + &third;
        assert_eq!(sum, rat_int(1));
    }
}
