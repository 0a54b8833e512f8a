use boseloc::detector::{ScreeningThresholds, StateClass};
use boseloc::dynamics::{
    project_onto_initial_eigenstates, propagate, run_protocol, ExtendedLattice, ProtocolKind, ProtocolSchedule,
    TimeDependentHamiltonian,
};
use boseloc::model::ModelParams;
use boseloc::spectral::eigh;

fn lattice(u: f64, kind: ProtocolKind) -> ExtendedLattice {
    ExtendedLattice::for_kind(&ModelParams::quarter_superlattice(12, 3, u, 10.0), kind).unwrap()
}

#[test]
fn correlated_loading_lands_in_self_localized_states() {
    let lat = lattice(20.0, ProtocolKind::Correlated);
    let s = ProtocolSchedule::correlated();
    let out = run_protocol(&lat, &s).unwrap();
    assert!(out.transfer_efficiency >= 0.99, "transfer {}", out.transfer_efficiency);
    assert!(out.norm_drift() < 1e-8);
    assert!(out.energy_drift < 1e-8);
    assert_eq!(out.record.times.first(), Some(&0.0));
    assert_eq!(out.record.times.last(), Some(&184.0));

    let tab = project_onto_initial_eigenstates(&out.state_t2, &lat, &s, &ScreeningThresholds::default(), 1e-3).unwrap();
    assert!((tab.total() - 1.0).abs() < 1e-8);
    assert!(tab.self_localized() >= 0.8, "{}", tab.self_localized());
    // the smaller dominant contributions sit at these eigenvalues
    for e in [40.1080, 40.1622, 40.503] {
        let hit = tab.entries[..6].iter().find(|x| (x.energy - e).abs() < 1e-3).expect("dominant state");
        assert_eq!(hit.class, Some(StateClass::CorrelatedALL));
    }
    // the pair stays on its loading site during the free evolution
    let i2 = out.record.times.iter().position(|&t| t >= s.t2).unwrap();
    for d in &out.record.densities[i2..] {
        assert!(d[7] > 1.7, "site 8 density {}", d[7]);
    }
}

#[test]
fn correlated_localization_needs_interaction() {
    let s = ProtocolSchedule::correlated().with_t3(3104.0);
    let with = run_protocol(&lattice(20.0, ProtocolKind::Correlated), &s).unwrap();
    let without = run_protocol(&lattice(0.0, ProtocolKind::Correlated), &s).unwrap();
    assert!(without.transfer_efficiency >= 0.99);
    assert!(with.retention >= 2.0 * without.retention, "{} vs {}", with.retention, without.retention);
    assert!(with.norm_drift() < 1e-8 && without.norm_drift() < 1e-8);
}

#[test]
fn independent_loading() {
    let s = ProtocolSchedule::independent();
    let lat = lattice(20.0, ProtocolKind::Independent);
    let out = run_protocol(&lat, &s.clone().with_t3(3104.0)).unwrap();
    assert!(out.transfer_efficiency >= 0.99, "transfer {}", out.transfer_efficiency);
    assert!(out.norm_drift() < 1e-8);
    let tab = project_onto_initial_eigenstates(&out.state_t2, &lat, &s, &ScreeningThresholds::default(), 1e-3).unwrap();
    assert!((tab.total() - 1.0).abs() < 1e-8);
    assert!(tab.entries[..4].iter().any(|x| (x.energy + 20.3075).abs() < 1e-3));
    assert_eq!(tab.entries[0].class, Some(StateClass::IndependentALL));

    let free = run_protocol(&lattice(0.0, ProtocolKind::Independent), &s.with_t3(3104.0)).unwrap();
    assert!(out.retention > free.retention, "{} vs {}", out.retention, free.retention);
}

#[test]
fn loading_is_converged_in_dt() {
    let lat = lattice(20.0, ProtocolKind::Correlated);
    let s = ProtocolSchedule::correlated();
    let eig = eigh(&lat.dense(s.va(0.0), 0.0)).unwrap();
    let psi0 = lat.initial_state(s.walk_start_site).unwrap();
    let psi1 = boseloc::dynamics::evolve_exact(&lat, &eig, psi0.coefficients(), 0.0, s.t1, 100.0).unwrap().final_state;
    let h = TimeDependentHamiltonian::new(&lat, |t| s.va(t), |t| s.j_prime_at(t)).unwrap();
    let a = propagate(&h, &psi1, s.t1, s.t2, s.dt, 100.0).unwrap().final_state;
    let b = propagate(&h, &psi1, s.t1, s.t2, s.dt / 2.0, 100.0).unwrap().final_state;
    let f: f64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<boseloc::Complex64>().norm();
    assert!(f > 1.0 - 1e-6, "fidelity {f}");
}

#[test]
fn walker_spreads_before_loading() {
    let lat = lattice(20.0, ProtocolKind::Correlated);
    let s = ProtocolSchedule::correlated();
    let out = run_protocol(&lat, &s).unwrap();
    let i1 = out.record.times.iter().position(|&t| t == s.t1).unwrap();
    let d = &out.record.densities[i1];
    assert!((d[12] - 2.0).abs() < 1e-12);
    for cell in 0..3 {
        let w: f64 = d[4 * cell..4 * cell + 4].iter().sum();
        assert!(w > 0.05, "cell {cell} holds {w}");
    }
    let mut csv = Vec::new();
    out.record.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,site,density\n0,1,"));
    assert_eq!(text.lines().count(), 1 + 13 * out.record.times.len());
}
