use super::Environment;

/// Rewards for one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewards {
    /// Individual reward per UAM, zeroed when the UAM is within the collision threshold of another.
    pub individual: Vec<f64>,
    /// Common reward shared by every UAM: deliveries this step over J.
    pub common: f64,
    /// `individual[j] + common`, what each agent is trained on.
    pub per_agent: Vec<f64>,
    /// Team scalar `Σ individual + common` used by the centralized critic.
    pub team: f64,
}

/// Reward of the transition `prev → next`, with deliveries read off the
/// serviced-passenger indicators.
pub fn compute_reward(prev: &Environment, next: &Environment) -> Rewards {
    let delivered: Vec<usize> = prev
        .served()
        .iter()
        .zip(next.served())
        .map(|(before, after)| after.iter().filter(|&&b| b).count() - before.iter().filter(|&&b| b).count())
        .collect();
    rewards_for(next, &delivered)
}

pub(super) fn rewards_for(env: &Environment, delivered: &[usize]) -> Rewards {
    let j_count = env.num_uams();
    let half = env.config().half_extent_m / 2.0;
    let individual: Vec<f64> = (0..j_count)
        .map(|j| {
            if env.in_collision(j) {
                return 0.0;
            }
            let served = env.served()[j].iter().filter(|&&b| b).count() as f64;
            let visited = env.visited()[j].iter().filter(|&&b| b).count() as f64;
            // Empty seats (−1) contribute nothing to the penalty.
            let penalty: f64 = env
                .seat_target_distances(j)
                .into_iter()
                .filter(|&d| d >= 0.0)
                .map(|d| d / half)
                .sum();
            let energy = env.uams()[j].energy.fraction(env.battery());
            served + visited - penalty + energy
        })
        .collect();
    let common = delivered.iter().sum::<usize>() as f64 / j_count as f64;
    let per_agent = individual.iter().map(|r| r + common).collect();
    let team = individual.iter().sum::<f64>() + common;
    Rewards {
        individual,
        common,
        per_agent,
        team,
    }
}
