/// `p` dominates `q` on `(cost, return)`: no worse on both, strictly better
/// on one. Lower cost and higher return are better.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 <= q.0 && p.1 >= q.1 && (p.0 < q.0 || p.1 > q.1)
}

/// Splits `points` (as `(cost, return)`) into non-dominated fronts, best
/// first. Indices within a front are ascending.
pub fn non_dominated_sort(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(points[i], points[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(points[j], points[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Peel off the set of points no remaining point dominates, repeatedly.
    fn brute_force(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(points[j], points[i])))
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn examples() {
        assert_eq!(non_dominated_sort(&[(0.0, 5.0)]), vec![vec![0]]);
        assert_eq!(
            non_dominated_sort(&[(0.0, 1.0), (1.0, 2.0), (0.0, 2.0)]),
            vec![vec![2], vec![0, 1]]
        );
        assert!(non_dominated_sort(&[]).is_empty());
        // Duplicates never dominate each other.
        assert_eq!(non_dominated_sort(&[(1.0, 1.0), (1.0, 1.0)]), vec![vec![0, 1]]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(points in prop::collection::vec((0u8..6, -5i8..5), 0..60)) {
            // Coarse integer grid to force many ties.
            let pts: Vec<(f64, f64)> = points.iter().map(|&(c, r)| (c as f64, r as f64)).collect();
            let fronts = non_dominated_sort(&pts);
            prop_assert_eq!(&fronts, &brute_force(&pts));
            let mut seen: Vec<usize> = fronts.concat();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
        }
    }
}
