//! Sample GUE matrices and compare the count on [r, inf) with the Poisson-binomial law
//! built from the Gram restriction.

use dpplab::dpp::{self, GramFamily};
use dpplab::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, r, reps) = (8, 0.5, 20_000);
    let samples: Vec<Vec<f64>> = rng::replicas(1, reps, |g, _| dpp::gue_eigenvalues(n, g)).into_iter().collect::<Result<_, _>>()?;
    let counts: Vec<usize> = samples.iter().map(|s| s.iter().filter(|&&x| x >= r).count()).collect();
    let law = dpp::counting_law(&dpp::gram_restriction(GramFamily::Hermite, n, r)?)?;
    let emp = dpp::empirical_law(&counts, n + 1);
    for k in 0..=n {
        println!("P(count = {k}) = {:.4}  (Bernoulli sum {:.4})", emp[k], law.pmf[k]);
    }
    println!("TV = {:.4}", dpp::total_variation(&emp, &law.pmf));
    Ok(())
}
