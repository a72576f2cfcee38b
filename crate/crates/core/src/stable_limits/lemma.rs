/// `y^{⟨a⟩} = sgn(y)|y|^a`.
pub fn signed_power(y: f64, a: f64) -> f64 {
    y.signum() * y.abs().powf(a)
}

/// `|(x+y)^{⟨1+β⟩} − x^{⟨1+β⟩} − y^{⟨1+β⟩}| / (|x||y|^β + |x|^β|y|)`, or 0 when
/// either argument vanishes (the numerator is then zero too).
pub fn lemma_ratio(x: f64, y: f64, beta: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let a = 1.0 + beta;
    let num = (signed_power(x + y, a) - signed_power(x, a) - signed_power(y, a)).abs();
    let den = x.abs() * y.abs().powf(beta) + x.abs().powf(beta) * y.abs();
    num / den
}

/// Largest ratio over the integer grid `{−r..r}²`.
pub fn lemma_grid_constant(beta: f64, r: i32) -> f64 {
    let mut c = 0.0f64;
    for i in -r..=r {
        for j in -r..=r {
            c = c.max(lemma_ratio(i as f64, j as f64, beta));
        }
    }
    c
}
