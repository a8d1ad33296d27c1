//! Exact counting and enumeration of subsets and permutations.

pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc · (n − i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

pub fn factorial(n: u64) -> Option<u64> {
    (1..=n).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

/// `(Σ parts)! / ∏ parts!`.
pub fn multinomial(parts: &[u64]) -> Option<u64> {
    let mut total = 0u64;
    let mut acc = 1u64;
    for &p in parts {
        total = total.checked_add(p)?;
        acc = acc.checked_mul(binomial(total, p)?)?;
    }
    Some(acc)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets_lex(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// All `k`-subsets of `0..n` in colexicographic order (by largest element first).
pub fn subsets_colex(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = subsets_lex(n, k);
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Rearranges `v` into the next lexicographic permutation; `false` at the last one.
pub fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Distinct permutations of a multiset in lexicographic order.
pub fn multiset_permutations<T: Ord + Clone>(items: &[T]) -> Vec<Vec<T>> {
    let mut cur = items.to_vec();
    cur.sort();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    multiset_permutations(&(0..k).collect::<Vec<_>>())
}

/// Sorts `v` ascending and returns the permutation sign, or 0 when an entry repeats.
pub fn sort_with_sign(v: &mut [usize]) -> i32 {
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        0
    } else {
        sign
    }
}
