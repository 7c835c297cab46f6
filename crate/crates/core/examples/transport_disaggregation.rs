//! Turn raw outbound/inbound predictions into a zone-to-zone relocation plan.

use ridehail::config::ScenarioConfig;
use ridehail::geometry::travel_for_config;
use ridehail::proxy::{restore_feasibility, AggRelocation};
use ridehail::rng::Rng;
use ridehail::transport::{certify_optimality, solve_transport, TransportProblem};

fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig::default();
    let travel = travel_for_config(&cfg)?;
    let idle = [5, 0, 2, 7, 1, 0];
    // What a learner might emit: fractional, negative, oversized.
    let raw = AggRelocation { outbound: vec![2.6, 1.4, -0.3, 9.0, 0.2, 0.0], inbound: vec![0.0, 3.7, 1.1, -2.0, 0.9, 2.2] };
    let restored = restore_feasibility(&raw, &idle, &mut Rng::new(3).substream("restoration"));
    println!("idle now   {idle:?}");
    println!("outbound   {:?}", restored.outbound);
    println!("inbound    {:?}", restored.inbound);

    let problem = TransportProblem::for_relocation(&restored.outbound, &restored.inbound, &travel.seconds)?;
    let plan = solve_transport(&problem)?;
    println!("plan (with self-loops kept on the diagonal):\n{}", plan.flow);
    println!("cost {:.1} s, certified optimal: {}", plan.cost(&problem), certify_optimality(&problem, &plan));
    println!("dispatched vehicles:\n{}", plan.without_diagonal());
    Ok(())
}
