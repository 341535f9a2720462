use ndcompute::{Scalar, Tape, Var};

/// Variance hinge: mean over dims of max(0, 1 - std_j(x)).
pub fn variance_hinge<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    let std = tape.col_std(x).expect("col_std");
    // 1 - std, then relu, then mean.
    let neg = tape.affine(std, -T::one(), T::one());
    let hinge = tape.relu(neg);
    tape.mean(hinge)
}

/// Off-diagonal covariance penalty, normalized by feature dim.
pub fn covariance_penalty<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Var {
    tape.cov_penalty(x).expect("cov_penalty")
}

/// Sum scalar loss terms with coefficients, skipping zero coefficients.
pub fn weighted_sum<T: Scalar>(tape: &mut Tape<T>, terms: &[(f64, Var)]) -> Var {
    let mut acc: Option<Var> = None;
    for &(c, v) in terms {
        if c == 0.0 {
            continue;
        }
        let scaled = tape.affine(v, T::from_f64c(c), T::zero());
        acc = Some(match acc {
            Some(a) => tape.add(a, scaled).expect("loss add"),
            None => scaled,
        });
    }
    acc.expect("at least one nonzero loss term")
}
