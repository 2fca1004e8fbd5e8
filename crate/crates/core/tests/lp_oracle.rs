//! Randomized comparison of the simplex solver against brute-force vertex
//! enumeration on small boxed LPs.

use musel::lp::{solve_lp, LinearProgram, LpMethod, LpOptions, LpStatus};
use proptest::prelude::*;

/// Solves a square system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all vertices, or `None` when no vertex is feasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Every constraint as `row·x ≤ rhs`.
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    // Equalities enter as opposing inequality pairs so rank-deficient
    // systems still expose their vertices.
    for c in &lp.eq {
        cons.push((c.row.clone(), c.rhs));
        cons.push((c.row.iter().map(|v| -v).collect(), -c.rhs));
    }
    for c in &lp.ineq {
        cons.push((c.row.clone(), c.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        cons.push((e, -lp.lower[j]));
    }
    let mut best: Option<f64> = None;
    for active in combinations(cons.len(), n) {
        let a: Vec<Vec<f64>> = active.iter().map(|&i| cons[i].0.clone()).collect();
        let b: Vec<f64> = active.iter().map(|&i| cons[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let ok = cons.iter().all(|(row, rhs)| {
            let lhs: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
            lhs <= rhs + 1e-8
        });
        if ok {
            let obj = lp.objective_at(&x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=5, 0usize..=6, 0usize..=2)
        .prop_flat_map(|(n, n_le, n_eq)| {
            let coef = -3i32..=3;
            (
                prop::collection::vec(coef.clone(), n),
                prop::collection::vec((prop::collection::vec(coef.clone(), n), -6i32..=8), n_le),
                prop::collection::vec((prop::collection::vec(coef, n), -4i32..=4), n_eq.min(n)),
                prop::collection::vec(prop::bool::ANY, n),
            )
        })
        .prop_map(|(c, le, eq, neg_lower)| {
            let mut lp = LinearProgram::new(c.into_iter().map(f64::from).collect());
            for (j, neg) in neg_lower.into_iter().enumerate() {
                lp.set_bounds(j, if neg { -5.0 } else { 0.0 }, 10.0);
            }
            for (row, rhs) in le {
                lp.add_le(row.into_iter().map(f64::from).collect(), f64::from(rhs));
            }
            for (row, rhs) in eq {
                lp.add_eq(row.into_iter().map(f64::from).collect(), f64::from(rhs));
            }
            lp
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in small_lp()) {
        let oracle = vertex_oracle(&lp);
        for method in [LpMethod::Auto, LpMethod::Primal] {
            let sol = solve_lp(&lp, &LpOptions { method, ..LpOptions::default() }).unwrap();
            match oracle {
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!((sol.objective_value - best).abs() <= 1e-7 * (1.0 + best.abs()),
                        "solver {} vs oracle {}", sol.objective_value, best);
                    prop_assert!(sol.max_violation <= 1e-9 * 10.0);
                }
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            }
        }
    }

    #[test]
    fn solves_are_bitwise_deterministic(lp in small_lp()) {
        let a = solve_lp(&lp, &LpOptions::default()).unwrap();
        let b = solve_lp(&lp, &LpOptions::default()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.x), bits(&b.x));
        prop_assert_eq!(a.status, b.status);
    }
}
