use vdc_core::interaction::DissipativeElement;
use vdc_core::sim::{run_scenario, Scenario};

fn run(m_d: f64, ke: f64, sigma: f64) {
    let mut s = Scenario::contact(2.0, ke, DissipativeElement::VaryingMass { m_d });
    s.force_noise_sigma = sigma;
    let log = run_scenario(&s).expect("config ok");
    let sm = log.summary();
    println!(
        "ke={ke:>7} m_d={m_d:.2} sigma={sigma}: outcome={:?} minEc={:+.3e} passive={}",
        log.outcome, sm.min_contact_energy, sm.passive
    );
}

#[test]
fn probe_corner_variants() {
    run(1.68, 20000.0, 0.1);
    run(1.68, 10000.0, 0.1);
    run(1.68, 500.0, 0.1);
    run(1.54, 20000.0, 0.1);
    run(0.14, 20000.0, 0.1);
}
