use std::time::Instant;
use swnd::energy;
use swnd::state::SwSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn profile() {
    let sysm = SwSystem::new(8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let st = sysm.random_state(1, 0.1, &mut rng);
    let t0 = Instant::now();
    let r = energy::residual_energy(&sysm, &st);
    eprintln!("residual_energy: {:.2?} (total {})", t0.elapsed(), r.total());
    let t0 = Instant::now();
    let b = energy::energy(&sysm, &st);
    eprintln!("energy:          {:.2?} (total {})", t0.elapsed(), b.total);
    let t0 = Instant::now();
    let g = energy::grad_energy(&sysm, &st);
    eprintln!("grad_energy:     {:.2?} (|g|^2 {})", t0.elapsed(), energy::tangent_inner(&g, &g));
    // raw synthesis cost
    let t0 = Instant::now();
    let mut acc = 0.0;
    for r in 0..8 { acc += st.phi.comp(r).to_grid(5).sup_abs(); }
    eprintln!("8x to_grid(5):   {:.2?} ({acc:.3})", t0.elapsed());
    let t0 = Instant::now();
    let g5 = st.phi.comp(0).to_grid(5);
    let back = swnd::torus::ModeField::from_grid(&g5, 2);
    eprintln!("1x from_grid(5): {:.2?} ({:.3})", t0.elapsed(), back.norm_sqr());
}
