use serde::Serialize;

use crate::problem::Point;

/// A sampled point together with the quantity it witnesses (a ratio, a margin or a value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Point,
    pub value: f64,
}

impl Witness {
    pub fn new(point: &[f64], value: f64) -> Self {
        Witness { point: Point::from_vec(point.to_vec()), value }
    }
}
