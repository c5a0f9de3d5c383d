//! Bundled example problems.

/// `(name, json)` for every bundled problem.
pub const CORPUS: &[(&str, &str)] = &[
    ("dissipative", include_str!("../../corpus/dissipative.json")),
    ("exp-class", include_str!("../../corpus/exp-class.json")),
    ("lienard", include_str!("../../corpus/lienard.json")),
    ("log-class", include_str!("../../corpus/log-class.json")),
    ("moebius", include_str!("../../corpus/moebius.json")),
    ("homogeneous", include_str!("../../corpus/homogeneous.json")),
    ("conservative", include_str!("../../corpus/conservative.json")),
    ("rayleigh", include_str!("../../corpus/rayleigh.json")),
];

/// Resolve `name`, `name.json` or `corpus/name.json`.
pub fn bundled(name: &str) -> Option<&'static str> {
    let stem = name
        .trim_start_matches("./")
        .trim_start_matches("corpus/")
        .trim_end_matches(".json");
    CORPUS.iter().find(|(n, _)| *n == stem).map(|(_, j)| *j)
}

/// Explanations attached to bundled problems with surprising outcomes.
pub fn note(name: &str) -> Option<&'static str> {
    match name {
        "dissipative" => Some(
            "The force form shipped with this problem is the projection of the Lagrange \
             defect onto d_J L, not the defect itself: it satisfies the proportionality \
             condition, but the dynamics are not those of sqrt(L). Expect \
             sigma-consistency and verify to fail.",
        ),
        "exp-class" => Some(
            "Phi(L) is affine in the inner quadratic form, which is linear in y3, so the \
             deformed fiber Hessian has rank 2: the deformed Lagrangian is singular.",
        ),
        "lienard" => Some(
            "Condition (ii) gives f = +1/(2L) here, not -1/(2L). Phi(L) is \
             proportional to L^(3/2).",
        ),
        "log-class" => Some(
            "With f = g = exp the Lagrangian has fiber rank 2 and ln L has rank 1. The \
             coefficient in front of the expanded ln L is c(...).",
        ),
        "rayleigh" => Some(
            "Linear friction x'' = -k x' with Rayleigh dissipation D = -k|y|^2/2; \
             sqrt(L) is a conserved alternative Lagrangian.",
        ),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_forms() {
        assert!(bundled("dissipative").is_some());
        assert!(bundled("corpus/moebius.json").is_some());
        assert!(bundled("lienard.json").is_some());
        assert!(bundled("missing").is_none());
    }
}
