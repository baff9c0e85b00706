// Two hand-checkable counterexamples to the closed-form optimality claim.
use rmab_core::*;

fn show(name: &str, inst: &Instance) {
    let report = evaluate_conditions(inst).unwrap();
    let value = optimal_value(inst).unwrap();
    let myopic = myopic_value(inst).unwrap();
    println!("{name}:");
    println!("  condition lhs={} rhs={} holds={:?}", report.theorem1_lhs, report.theorem1_rhs, report.theorem1_holds);
    println!("  theorem2 bound={} holds={:?}", report.theorem2_beta_bound, report.theorem2_holds);
    println!("  V*={} via {:?}, V_myopic={}, gap={}",
        value.value,
        value.first_actions.iter().map(|a| a.channels().to_vec()).collect::<Vec<_>>(),
        myopic, value.value - myopic);
}

fn main() {
    let a = Instance::new(
        vec![ChannelModel::new(0.3, 0.4).unwrap(), ChannelModel::new(0.1, 0.9).unwrap()],
        SensingModel::perfect(), 1, Horizon::new(2, 1.0).unwrap(),
        RegularReward::linear(0.0).unwrap(),
        BeliefVector::new(vec![0.41, 0.40]).unwrap(),
    ).unwrap();
    show("counterexample A (gap 0.8)", &a);
    // hand: V(sense 0) = 0.41 + 0.41*0.42 + 0.59*0.42 = 0.83
    //       V(sense 1) = 0.40 + 0.40*0.90 + 0.60*0.341 = 0.9646

    let b = Instance::new(
        vec![ChannelModel::new(0.30, 0.42).unwrap(), ChannelModel::new(0.05, 0.55).unwrap()],
        SensingModel::perfect(), 1, Horizon::new(2, 1.0).unwrap(),
        RegularReward::linear(0.0).unwrap(),
        BeliefVector::new(vec![0.41, 0.40]).unwrap(),
    ).unwrap();
    show("counterexample B (all gaps <= 0.5)", &b);
    // hand: V(sense 0) = 0.41 + 0.41*0.42 + 0.59*0.30 = 0.7592
    //       V(sense 1) = 0.40 + 0.40*0.55 + 0.60*0.3492 = 0.8295
}
