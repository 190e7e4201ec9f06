use super::Domain;

/// Vertices of a regular simplex centred on the box whose inscribed ball has
/// radius `scale` times the radius of the ball circumscribing the box.
pub fn regular_bounding_simplex(domain: &Domain, scale: f64) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let df = d as f64;
    // e_1..e_d plus alpha*(1,..,1) is regular with edge sqrt(2).
    let alpha = (1.0 - (df + 1.0).sqrt()) / df;
    let centroid = (1.0 + alpha) / (df + 1.0);
    let mut unit: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { 1.0 - centroid } else { -centroid })
                .collect()
        })
        .collect();
    unit.push(vec![alpha - centroid; d]);

    let unit_circumradius = unit[0].iter().map(|x| x * x).sum::<f64>().sqrt();
    // inradius of a regular d-simplex is circumradius / d
    let target_circumradius = scale * domain.circumradius() * df;
    let factor = target_circumradius / unit_circumradius;
    let center = domain.center();
    unit.into_iter()
        .map(|v| v.iter().zip(&center).map(|(x, c)| c + factor * x).collect())
        .collect()
}
