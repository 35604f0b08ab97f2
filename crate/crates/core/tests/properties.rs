mod common;

use grfswarm::bonding::{bond_partition, sense_all, sense_neighbors, TickView};
use grfswarm::geom::Vec2;
use grfswarm::metrics::{count_molecules, remaining_bonds, velocity_consensus_error, Estimate};
use grfswarm::potentials::{coulomb_buckingham, LocalEnergy, PotentialParams};
use grfswarm::sampler::{sample_velocity, SamplerParams};
use grfswarm::scenario::{presets, Scenario};
use grfswarm::world::{init_world, WorldState};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn chemistry(k: usize) -> Scenario {
    [presets::water, presets::methane, presets::polyamines, presets::oxocarbon][k % 4]()
}

fn world_for(s: &Scenario, seed: u64, n: usize, size: f64) -> WorldState {
    random_world(&mut rng(seed), n, s.species.len(), size)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn partition_matches_reference(seed in any::<u64>(), n in 1usize..=31) {
        let mut r = rng(seed);
        let table = random_table(&mut r);
        let world = random_world(&mut r, n, table.len(), 0.6);
        let observer = r.random_range(0..n);
        let nbhd = neighborhood_of(&world, observer, 0.5);
        let si = world.robots[observer].species;
        let got: Vec<(f64, Vec<usize>)> = bond_partition(&nbhd, si, &table)
            .groups
            .iter()
            .map(|g| (g.charge, g.members.iter().map(|m| m.id).collect()))
            .collect();
        prop_assert_eq!(got, reference_partition(&nbhd, si, &table));
    }

    #[test]
    fn partition_respects_caps_and_order(seed in any::<u64>(), n in 1usize..=31) {
        let mut r = rng(seed);
        let table = random_table(&mut r);
        let world = random_world(&mut r, n, table.len(), 0.8);
        for nbhd in sense_all(&world, 0.5) {
            let si = world.robots[nbhd.observer].species;
            let p = bond_partition(&nbhd, si, &table);
            prop_assert!(p.len() <= table.total_cap[si] as usize);
            for s in 0..table.len() {
                let k = p.members().filter(|m| m.species == s).count();
                prop_assert!(k <= table.pair_cap[si][s] as usize);
            }
            for w in p.groups.windows(2) {
                prop_assert!(w[0].charge > w[1].charge);
            }
            for g in &p.groups {
                prop_assert!(!g.members.is_empty());
                for w in g.members.windows(2) {
                    prop_assert!(w[0].distance <= w[1].distance);
                }
            }
        }
    }

    #[test]
    fn sensing_is_symmetric_and_sorted(seed in any::<u64>(), n in 1usize..=40) {
        let world = random_world(&mut rng(seed), n, 2, 2.0);
        let all = sense_all(&world, 0.5);
        for i in 0..n {
            let single = sense_neighbors(&world, i, 0.5);
            prop_assert_eq!(&single, &all[i]);
            for w in single.entries.windows(2) {
                prop_assert!(w[0].distance < w[1].distance || (w[0].distance == w[1].distance && w[0].id < w[1].id));
            }
            for e in &single.entries {
                prop_assert!(e.id != i && e.distance <= 0.5);
                prop_assert!(all[e.id].entries.iter().any(|b| b.id == i));
            }
        }
    }

    #[test]
    fn bond_graph_is_mutual_and_capped(seed in any::<u64>(), k in 0usize..4, n in 2usize..=60) {
        let s = chemistry(k);
        let world = world_for(&s, seed, n, 1.5);
        let view = TickView::build(&world, &s);
        let g = view.graph(s.bond_threshold());
        for &(a, b) in &g.edges {
            prop_assert!(a < b);
            prop_assert!(view.partitions[a].contains(b) && view.partitions[b].contains(a));
            prop_assert!((world.robots[a].pose - world.robots[b].pose).norm() <= s.bond_threshold());
        }
        for r in &world.robots {
            prop_assert!(g.degree(r.id) <= s.species[r.species].total_cap as usize);
        }
    }

    #[test]
    fn handshake_identity(seed in any::<u64>(), k in 0usize..4, n in 2usize..=60) {
        let s = chemistry(k);
        let table = s.species_table();
        let world = world_for(&s, seed, n, 1.5);
        let g = grfswarm::bond_graph(&world, &s);
        let caps: u64 = world.robots.iter().map(|r| table.total_cap[r.species] as u64).sum();
        prop_assert_eq!(remaining_bonds(&world, &g, &table, true) + 2 * g.edges.len() as u64, caps);
    }

    #[test]
    fn molecules_match_bfs(seed in any::<u64>(), n in 1usize..=30, p in 0.0f64..0.3) {
        let mut r = rng(seed);
        let table = random_table(&mut r);
        let world = random_world(&mut r, n, table.len(), 1.0);
        let g = random_graph(&mut r, n, p);
        let caps: Vec<usize> = world.robots.iter().map(|x| table.total_cap[x.species] as usize).collect();
        let (expected, _) = bfs_molecules(n, &g.edges, &caps);
        let (got, hist) = count_molecules(&world, &g, &table);
        prop_assert_eq!(got, expected);
        prop_assert_eq!(hist.values().sum::<usize>(), got);
    }

    #[test]
    fn translation_leaves_bonding_and_energy_unchanged(seed in any::<u64>(), k in 0usize..4, n in 2usize..=30) {
        let mut s = chemistry(k);
        s.world.width = 64.0;
        s.world.height = 64.0;
        let mut world = world_for(&s, seed, n, 1.5);
        world.bounds = s.bounds();
        for r in &mut world.robots {
            r.pose += Vec2::new(20.0, 20.0);
        }
        let mut moved = world.clone();
        for r in &mut moved.robots {
            r.pose += Vec2::new(8.0, -4.0);
        }
        let a = TickView::build(&world, &s);
        let b = TickView::build(&moved, &s);
        for i in 0..n {
            prop_assert_eq!(a.partitions[i].ids(), b.partitions[i].ids());
            let ea = LocalEnergy::new(&a, i, &s).energy(Vec2::new(0.1, -0.2));
            let eb = LocalEnergy::new(&b, i, &s).energy(Vec2::new(0.1, -0.2));
            prop_assert!((ea - eb).abs() <= 1e-9 * (1.0 + ea.abs()), "{} vs {}", ea, eb);
        }
        prop_assert_eq!(a.graph(s.bond_threshold()).edges, b.graph(s.bond_threshold()).edges);
    }

    #[test]
    fn pair_energy_is_finite_and_bounded_below(r in 0.0f64..5.0, product in -16.0f64..16.0) {
        let p = PotentialParams::default();
        let e = coulomb_buckingham(r, product, &p);
        prop_assert!(e.is_finite());
        if product >= 0.0 {
            prop_assert!(e >= -p.epsilon - 1e-12);
        }
    }

    #[test]
    fn sampler_stays_in_speed_disk(seed in any::<u64>(), vx in -2.0f64..2.0, vy in -2.0f64..2.0, v_max in 0.0f64..2.0, a in -5.0f64..5.0) {
        let cfg = SamplerParams { iterations: 40, ..Default::default() }.resolve(v_max);
        let out = sample_velocity(Vec2::new(vx, vy), |v: Vec2| a * v.x + v.norm_sq(), &cfg, &mut rng(seed));
        prop_assert!(out.velocity.norm() <= v_max + 1e-12);
        prop_assert!(out.accepted <= cfg.iterations);
    }

    #[test]
    fn velocity_error_nonnegative_and_zero_on_consensus(seed in any::<u64>(), k in 0usize..4, n in 2usize..=40) {
        let s = chemistry(k);
        let mut world = world_for(&s, seed, n, 1.5);
        let g = grfswarm::bond_graph(&world, &s);
        prop_assert!(velocity_consensus_error(&world, &g) >= 0.0);
        for r in &mut world.robots {
            r.velocity = Vec2::new(0.2, 0.1);
        }
        prop_assert!(velocity_consensus_error(&world, &g) < 1e-15);
    }

    #[test]
    fn interval_brackets_mean(xs in prop::collection::vec(0.0f64..100.0, 1..20)) {
        let e = Estimate::from_samples(&xs);
        match e.ci {
            Some((lo, hi)) => prop_assert!(lo <= e.mean && e.mean <= hi),
            None => prop_assert_eq!(xs.len(), 1),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scenario_round_trips(k in 0usize..5, seed in any::<u64>(), v_max in 0.1f64..3.0, stride in 1u64..50) {
        let mut s = if k == 4 { presets::bridge() } else { chemistry(k) };
        s.rng_seed = seed;
        s.v_max = v_max;
        s.metrics_stride = stride;
        let back = Scenario::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn init_is_reproducible_and_separated(k in 0usize..4, seed in any::<u64>()) {
        let mut s = chemistry(k);
        s.world.width = 4.0;
        s.world.height = 4.0;
        for v in s.population.values_mut() {
            *v = (*v / 5).max(1);
        }
        let a = init_world(&s, seed).unwrap();
        prop_assert_eq!(&a, &init_world(&s, seed).unwrap());
        let sep = s.initial_separation();
        for i in 0..a.len() {
            prop_assert_eq!(a.robots[i].velocity, Vec2::ZERO);
            prop_assert!(s.bounds().contains(a.robots[i].pose));
            for j in (i + 1)..a.len() {
                prop_assert!((a.robots[i].pose - a.robots[j].pose).norm() >= sep);
            }
        }
    }
}
