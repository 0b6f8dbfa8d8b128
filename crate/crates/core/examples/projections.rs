//! Projections and distances for the built-in constraint sets.
//!
//! ```text
//! cargo run --example projections
//! ```

use panalm::sets::default_y_set;
use panalm::ConstraintSet;

fn show(name: &str, set: &ConstraintSet, x: &[f64]) -> panalm::Result<()> {
    let p = set.projection(x)?;
    println!("{name:<24} {x:?} -> {p:?}  (dist {:.4})", set.distance(x)?);
    Ok(())
}

fn main() -> panalm::Result<()> {
    show("Euclidean ball r=1", &ConstraintSet::ball2(None, 1.0)?, &[3.0, 4.0])?;
    show("Euclidean ball at (1,1)", &ConstraintSet::ball2(Some(vec![1.0, 1.0]), 0.5)?, &[3.0, 1.0])?;
    show("∞-ball r=1", &ConstraintSet::ball_inf(None, 1.0)?, &[2.0, -0.5, -3.0])?;
    show("box", &ConstraintSet::rectangle(vec![0.0, f64::NEG_INFINITY], vec![1.0, 0.0])?, &[2.0, 5.0])?;
    show("{0}", &ConstraintSet::Zero, &[1.0, -2.0])?;
    show("finite set", &ConstraintSet::finite_set(vec![vec![0.0, 0.0], vec![1.0, 1.0]])?, &[0.8, 0.4])?;
    show("second-order cone α=1", &ConstraintSet::second_order_cone(1.0)?, &[3.0, 0.0, 1.0])?;

    // U = ball in the first two coordinates × box on the third
    let product = ConstraintSet::cartesian_product(vec![
        (2, ConstraintSet::ball2(None, 1.0)?),
        (3, ConstraintSet::rectangle(vec![-1.0], vec![1.0])?),
    ])?;
    show("ball × box", &product, &[3.0, 4.0, 7.0])?;

    // the compact multiplier box chosen when Y is not given
    let c = ConstraintSet::rectangle(vec![0.0, f64::NEG_INFINITY], vec![0.0, 0.0])?;
    println!("default Y for {{0}} × (−∞, 0]: {:?}", default_y_set(&c, 2)?);
    Ok(())
}
