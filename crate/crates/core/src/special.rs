//! Log-factorial tables and signed log-space summation helpers shared by the
//! series evaluations in `fisher` and `receiver`.

/// Largest `n` with `n!` representable in f64.
pub const MAX_EXACT_FACTORIAL: usize = 170;

const LN_FACT_LEN: usize = 8192;

fn build_ln_fact() -> Vec<f64> {
    let mut t = vec![0.0_f64; LN_FACT_LEN];
    // exact f64 factorials up to 170!, then incremental ln with compensation
    let mut f = 1.0_f64;
    for n in 1..=MAX_EXACT_FACTORIAL {
        f *= n as f64;
        t[n] = f.ln();
    }
    let mut acc = t[MAX_EXACT_FACTORIAL];
    let mut comp = 0.0_f64;
    for n in (MAX_EXACT_FACTORIAL + 1)..LN_FACT_LEN {
        let y = (n as f64).ln() - comp;
        let s = acc + y;
        comp = (s - acc) - y;
        acc = s;
        t[n] = acc;
    }
    t
}

#[allow(dead_code)]
fn build_fact() -> Vec<f64> {
    let mut t = vec![1.0_f64; MAX_EXACT_FACTORIAL + 1];
    for n in 1..=MAX_EXACT_FACTORIAL {
        t[n] = t[n - 1] * n as f64;
    }
    t
}

static LN_FACT: std::sync::LazyLock<Vec<f64>> = std::sync::LazyLock::new(build_ln_fact);
#[allow(dead_code)]
static FACT: std::sync::LazyLock<Vec<f64>> = std::sync::LazyLock::new(build_fact);

/// `ln(n!)` for `n < 8192`; Stirling's series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_LEN {
        return LN_FACT[n];
    }
    let x = (n + 1) as f64;
    // Stirling series for ln Gamma(x)
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// `n!` as f64, panics for `n > 170`.
#[allow(dead_code)] // test oracles
pub fn factorial(n: usize) -> f64 {
    FACT[n]
}

/// A real number stored as (sign, ln|x|); sign is -1, 0, or +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn new(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign, ln_abs }
        }
    }

    #[allow(dead_code)] // test oracles
    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: x.signum(),
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0.0
    }
}

/// Sum of signed log-space terms, rescaled by the maximum magnitude.
pub fn signed_logsumexp(terms: &[LogSigned]) -> LogSigned {
    let m = terms
        .iter()
        .map(|t| t.ln_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return LogSigned::ZERO;
    }
    let mut acc = 0.0_f64;
    let mut comp = 0.0_f64;
    for t in terms {
        if t.sign == 0.0 {
            continue;
        }
        let y = t.sign * (t.ln_abs - m).exp() - comp;
        let s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    if acc == 0.0 {
        return LogSigned::ZERO;
    }
    LogSigned::new(acc.signum(), m + acc.abs().ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_exact() {
        for n in [0usize, 1, 2, 10, 50, 170] {
            let exact: f64 = (1..=n).map(|i| i as f64).product::<f64>().ln();
            let exact = if n == 0 { 0.0 } else { exact };
            assert!(
                (ln_factorial(n) - exact).abs() < 1e-10 * exact.abs().max(1.0),
                "n={n}"
            );
        }
    }

    #[test]
    fn ln_factorial_stirling_handoff() {
        // values just below/above the table boundary should be smooth
        let a = ln_factorial(8191);
        let b = ln_factorial(8192);
        let step = (8192.0_f64).ln();
        assert!((b - a - step).abs() < 1e-8);
    }

    #[test]
    fn signed_sum_cancels() {
        let terms = [
            LogSigned::from_value(1.5e10),
            LogSigned::from_value(-1.5e10),
            LogSigned::from_value(2.0),
        ];
        let s = signed_logsumexp(&terms);
        assert!((s.value() - 2.0).abs() < 1e-5);
    }
}
