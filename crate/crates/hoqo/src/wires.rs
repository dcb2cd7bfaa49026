//! Register naming: slot inputs `I`/`I1…`, slot outputs `O`/`O1…`, target `F`,
//! reference `A`, memory `M`.

pub const TARGET: &str = "F";
pub const REFERENCE: &str = "A";
pub const MEMORY: &str = "M";

/// Input wire of slot `j` (0-based) in a `k`-slot supermap.
pub fn input(j: usize, k: usize) -> String {
    if k == 1 {
        "I".to_string()
    } else {
        format!("I{}", j + 1)
    }
}

pub fn output(j: usize, k: usize) -> String {
    if k == 1 {
        "O".to_string()
    } else {
        format!("O{}", j + 1)
    }
}

pub fn memory(j: usize, k: usize) -> String {
    if k == 1 {
        MEMORY.to_string()
    } else {
        format!("M{}", j + 1)
    }
}

pub fn inputs(k: usize) -> Vec<String> {
    (0..k).map(|j| input(j, k)).collect()
}

pub fn outputs(k: usize) -> Vec<String> {
    (0..k).map(|j| output(j, k)).collect()
}

/// Sort key realizing the canonical order I…, O…, F, A, M, other.
pub fn canonical_key(label: &str) -> (u8, usize, String) {
    let role = match label.chars().next() {
        Some('I') => 0,
        Some('O') => 1,
        Some('F') => 2,
        Some('A') => 3,
        Some('M') => 4,
        _ => 5,
    };
    let idx = label
        .get(1..)
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(0);
    (role, idx, label.to_string())
}

/// Borrowed view helper for APIs taking `&[&str]`.
pub fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
