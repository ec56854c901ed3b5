//! Likelihood-ratio G-test and Kendall's tau-b on 2×2 tables.

use crate::classify::ContingencyTable2x2;

use super::chi2::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTest {
    pub g: f64,
    pub p: f64,
    /// A zero row or column margin; G = 0 and p = 1.
    pub degenerate: bool,
}

/// G = 2 Σ O ln(O/E), referred to chi-square with one degree of freedom.
pub fn g_test(table: &ContingencyTable2x2) -> GTest {
    let n = table.n();
    let rows = table.row_totals();
    let cols = table.col_totals();
    if n == 0 || rows.contains(&0) || cols.contains(&0) {
        return GTest {
            g: 0.0,
            p: 1.0,
            degenerate: true,
        };
    }
    let expected = table.expected();
    let mut g = 0.0;
    for (obs_row, exp_row) in table.cells().iter().zip(&expected) {
        for (&o, &e) in obs_row.iter().zip(exp_row) {
            if o > 0 {
                let o = o as f64;
                g += o * (o / e).ln();
            }
        }
    }
    // rounding can leave a tiny negative sum when O == E
    let g = (2.0 * g).max(0.0);
    GTest {
        g,
        p: chi_square_sf(g).expect("G is non-negative"),
        degenerate: false,
    }
}

/// Williams' correction divisor for a 2×2 table.
pub fn williams_q(table: &ContingencyTable2x2) -> f64 {
    let n = table.n() as f64;
    let inv_sum = |t: [u64; 2]| t.iter().map(|&x| 1.0 / x as f64).sum::<f64>();
    let r = inv_sum(table.row_totals());
    let c = inv_sum(table.col_totals());
    1.0 + (n * r - 1.0) * (n * c - 1.0) / (6.0 * n)
}

/// G-test with Williams' correction, G / q.
pub fn g_test_williams(table: &ContingencyTable2x2) -> GTest {
    let raw = g_test(table);
    if raw.degenerate {
        return raw;
    }
    let g = raw.g / williams_q(table);
    GTest {
        g,
        p: chi_square_sf(g).expect("G is non-negative"),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauB {
    pub tau: f64,
    /// Some margin is zero; tau is reported as 0.
    pub degenerate: bool,
}

/// Kendall's tau-b for a 2×2 table, (ad − bc) / √((a+b)(c+d)(a+c)(b+d)).
pub fn kendall_tau_b_2x2(table: &ContingencyTable2x2) -> TauB {
    let [r0, r1] = table.row_totals();
    let [c0, c1] = table.col_totals();
    if r0 == 0 || r1 == 0 || c0 == 0 || c1 == 0 {
        return TauB {
            tau: 0.0,
            degenerate: true,
        };
    }
    let num = table.a as f64 * table.d as f64 - table.b as f64 * table.c as f64;
    let den = (r0 as f64 * r1 as f64 * c0 as f64 * c1 as f64).sqrt();
    TauB {
        tau: (num / den).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Outcome of one dichotomized association analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub table: ContingencyTable2x2,
    pub g_statistic: f64,
    pub p_value: f64,
    pub tau_b: f64,
    pub degenerate: bool,
    /// p < alpha.
    pub significant: bool,
}

pub fn associate(table: ContingencyTable2x2, alpha: f64, williams: bool) -> AssociationResult {
    let g = if williams {
        g_test_williams(&table)
    } else {
        g_test(&table)
    };
    let tau = kendall_tau_b_2x2(&table);
    AssociationResult {
        g_statistic: g.g,
        p_value: g.p,
        tau_b: tau.tau,
        degenerate: g.degenerate || tau.degenerate,
        significant: g.p < alpha,
        table,
    }
}
