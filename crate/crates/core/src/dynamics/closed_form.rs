use crate::scalar::Real;

/// Probability that a leaf is infected at time `t` given that the star's
/// center stayed infected on `[0, t]` and the leaf started healthy:
/// `lambda / (lambda + 1) * (1 - exp(-(lambda + 1) t))`.
pub fn p0_closed_form<R: Real>(lambda: R, t: R) -> R {
    let rate = lambda + R::one();
    lambda / rate * (R::one() - (-rate * t).exp())
}

/// Lower bound `(e^-1 (1 - e^-lambda) e^-1)^m` on the chance that infection
/// at one end of a path with `m` edges reaches the other end by time `m`.
pub fn path_transfer_bound<R: Real>(lambda: R, m: u32) -> R {
    let e_inv = (-R::one()).exp();
    let per_edge = e_inv * (R::one() - (-lambda).exp()) * e_inv;
    per_edge.powi(m as i32)
}

/// `P(N = j) = (1 / (lambda + 1))^j * lambda / (lambda + 1)`.
pub fn shifted_geometric_pmf<R: Real>(lambda: R, j: u32) -> R {
    let q = R::one() / (lambda + R::one());
    q.powi(j as i32) * lambda * q
}
