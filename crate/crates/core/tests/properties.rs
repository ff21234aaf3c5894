use proptest::prelude::*;
use rand::Rng as _;

use wrmlab::cluster::{
    boolean_graph, cloud_cluster_at, clusters, geometric_graph, gilbert_graph, lattice_graph, region_area,
};
use wrmlab::env::{build_half_lattice, build_thickened_lattice, sample_bernoulli_field, sample_ppp};
use wrmlab::experiments::half_lattice_exact;
use wrmlab::gnz::lattice_specification;
use wrmlab::rng::{rng_from_seed, Rng};
use wrmlab::wrm_continuum::{chi_density, feasible_continuum, MarkedPoint};
use wrmlab::wrm_lattice::{
    exact_marginal, h_ratio, z_enum, z_ratio_sites, z_sites, PapConvention, Spin, TransferGrid, SPINS,
};
use wrmlab::{
    DiskRegion, LatticeBox, LatticeConfig, LatticeEnv, MarkedPointCloud, Rule, Site, SpinWeights, WRPointConfig,
    Window,
};

fn animal(size: usize, seed: u64) -> Vec<Site> {
    let mut rng = rng_from_seed(seed);
    let steps = [[1, 0], [-1, 0], [0, 1], [0, -1]];
    let mut sites: Vec<Site> = vec![vec![0, 0]];
    while sites.len() < size {
        let base = &sites[rng.random_range(0..sites.len())];
        let d = steps[rng.random_range(0..4)];
        let next = vec![base[0] + d[0], base[1] + d[1]];
        if !sites.contains(&next) {
            sites.push(next);
        }
    }
    sites.sort();
    sites
}

fn weights() -> impl Strategy<Value = SpinWeights> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| SpinWeights::new(a, b, c).unwrap())
}

fn normalized(w: &SpinWeights) -> SpinWeights {
    let (p, m, z) = w.normalized();
    SpinWeights::new(p, m, z).unwrap()
}

fn cloud(rng: &mut Rng, n: usize, side: f64, max_mark: f64) -> MarkedPointCloud {
    let mut c = MarkedPointCloud::empty(2, true);
    for _ in 0..n {
        let x = [side * rng.random::<f64>(), side * rng.random::<f64>()];
        c.push(&x, Some(max_mark * rng.random::<f64>())).unwrap();
    }
    c
}

fn for_rule(c: &MarkedPointCloud, rule: Rule) -> MarkedPointCloud {
    match rule {
        Rule::Boolean(_) => c.clone(),
        _ => MarkedPointCloud::from_points(2, &c.points().map(<[f64]>::to_vec).collect::<Vec<_>>()).unwrap(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samplers_are_pure_functions_of_seed(seed in any::<u64>(), beta in 0.1f64..3.0, q in 0.05f64..0.95) {
        let w = Window::cube(2, 4.0).unwrap();
        prop_assert_eq!(sample_ppp(&w, beta, seed).unwrap(), sample_ppp(&w, beta, seed).unwrap());
        let b = LatticeBox::rect(6, 5).unwrap();
        prop_assert_eq!(sample_bernoulli_field(&b, q, seed).unwrap(), sample_bernoulli_field(&b, q, seed).unwrap());
    }

    #[test]
    fn half_lattice_mirror_and_degrees(n in 1usize..=8) {
        let g = build_half_lattice(n).unwrap();
        let mut mirrored: Vec<Site> = g.lambda_minus.iter().map(|s| vec![-s[0], s[1]]).collect();
        mirrored.sort();
        prop_assert_eq!(&mirrored, &g.lambda_plus);
        let env = LatticeEnv::from_sites(g.zeta_prime.clone()).unwrap();
        for x in [&g.o, &g.z_n] {
            prop_assert_eq!(wrmlab::cluster::lattice_neighbors(&env, x).len(), 2);
        }
    }

    #[test]
    fn thickened_quotient_is_lattice_adjacency(
        k in 1usize..=5,
        eps in 0.01f64..0.17,
        size in 1usize..=6,
        seed in any::<u64>(),
    ) {
        let sites = animal(size, seed);
        let mut rng = rng_from_seed(seed ^ 0x5eed);
        let kappa: Vec<[f64; 2]> = (0..k)
            .map(|_| {
                let r = 0.49 * eps * rng.random::<f64>().sqrt();
                let t = std::f64::consts::TAU * rng.random::<f64>();
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let cloud = build_thickened_lattice(&sites, &kappa, 1.0 - eps).unwrap();
        let g = gilbert_graph(&cloud, 1.0).unwrap();
        for i in 0..sites.len() {
            for j in 0..sites.len() {
                let l1 = (sites[i][0] - sites[j][0]).abs() + (sites[i][1] - sites[j][1]).abs();
                for a in 0..k {
                    for b in 0..k {
                        if i == j && a == b {
                            continue;
                        }
                        prop_assert_eq!(g.has_edge(i * k + a, j * k + b), l1 <= 1);
                    }
                }
            }
        }
    }

    #[test]
    fn cluster_partition_is_label_independent(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let c = cloud(&mut rng, n, 5.0, 0.3);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = c.select(&perm);
        for rule in [Rule::Gilbert(1.0), Rule::Boolean(0.2)] {
            let d1 = clusters(&geometric_graph(&for_rule(&c, rule), rule).unwrap());
            let d2 = clusters(&geometric_graph(&for_rule(&shuffled, rule), rule).unwrap());
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(
                        d1.label(perm[i]) == d1.label(perm[j]),
                        d2.label(i) == d2.label(j)
                    );
                }
            }
        }
    }

    #[test]
    fn cluster_at_matches_component_after_insertion(n in 0usize..30, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let c = cloud(&mut rng, n, 5.0, 0.3);
        let x = [5.0 * rng.random::<f64>(), 5.0 * rng.random::<f64>()];
        let mx = 0.3 * rng.random::<f64>();
        for rule in [Rule::Gilbert(1.0), Rule::Boolean(0.2)] {
            let c = for_rule(&c, rule);
            let merged = cloud_cluster_at(&c, rule, &x, mx).unwrap();
            let mut with_x = c.clone();
            with_x.push(&x, c.is_marked().then_some(mx)).unwrap();
            let dec = clusters(&geometric_graph(&with_x, rule).unwrap());
            let mut component: Vec<usize> = dec.cluster_of(n).iter().copied().filter(|&i| i != n).collect();
            component.sort();
            prop_assert_eq!(merged, component);
        }
    }

    #[test]
    fn union_area_monotone_and_subadditive(n in 1usize..8, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let tol = 1e-9;
        let mut region = DiskRegion::new(2);
        let mut prev = 0.0;
        for _ in 0..n {
            let center = [3.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>()];
            let r = 0.1 + rng.random::<f64>();
            let mut single = DiskRegion::new(2);
            single.push(&center, r).unwrap();
            region.push(&center, r).unwrap();
            let area = region_area(&region, tol).unwrap();
            prop_assert!(area + 2.0 * tol >= prev);
            prop_assert!(area <= prev + region_area(&single, tol).unwrap() + 2.0 * tol);
            prev = area;
        }
    }

    #[test]
    fn boolean_with_zero_marks_is_gilbert(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let c = cloud(&mut rng, n, 5.0, 0.0);
        let b = boolean_graph(&c, 0.5).unwrap();
        let g = gilbert_graph(&for_rule(&c, Rule::Gilbert(1.0)), 1.0).unwrap();
        prop_assert_eq!(b.edges(), g.edges());
    }

    #[test]
    fn transfer_matches_enumeration(size in 1usize..=12, seed in any::<u64>(), w in weights()) {
        let sites = animal(size, seed);
        let env = LatticeEnv::from_sites(sites.clone()).unwrap();
        let verts: Vec<usize> = (0..env.len()).collect();
        let e = z_enum(&verts, &lattice_graph(&env), &w).unwrap();
        let t = TransferGrid::from_sites(&sites).unwrap().z(&w).value();
        prop_assert!(rel(e, t) <= 1e-12);
    }

    #[test]
    fn adding_a_site_ratio_is_bracketed(size in 1usize..=10, seed in any::<u64>(), w in weights()) {
        let w = normalized(&w);
        let sites = animal(size, seed);
        let mut rng = rng_from_seed(seed ^ 7);
        let base = &sites[rng.random_range(0..sites.len())];
        let d = [[1, 0], [-1, 0], [0, 1], [0, -1]][rng.random_range(0..4)];
        let x = vec![base[0] + d[0], base[1] + d[1]];
        prop_assume!(!sites.contains(&x));
        let mut bigger = sites.clone();
        bigger.push(x);
        let ratio = z_ratio_sites(&bigger, &sites, &w).unwrap();
        prop_assert!(ratio >= w.zero * (1.0 - 1e-12) && ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetric_marginals_are_flip_invariant(size in 2usize..=9, seed in any::<u64>(), p in 0.01f64..0.5) {
        let sites = animal(size, seed);
        let env = LatticeEnv::from_sites(sites.clone()).unwrap();
        let marked: Vec<Site> = sites.iter().take(3).cloned().collect();
        let table = exact_marginal(&env, &SpinWeights::symmetric(p).unwrap(), &marked).unwrap();
        let flipped = table.flipped();
        for (spins, prob) in &table.entries {
            prop_assert!((flipped.prob(spins) - prob).abs() <= 1e-14);
        }
    }

    #[test]
    fn partition_function_factorizes(a in 1usize..=8, b in 1usize..=8, seed in any::<u64>(), w in weights()) {
        let first = animal(a, seed);
        let second: Vec<Site> = animal(b, seed ^ 1).into_iter().map(|s| vec![s[0] + 50, s[1]]).collect();
        let union: Vec<Site> = first.iter().chain(&second).cloned().collect();
        let product = z_sites(&first, &w).unwrap() * z_sites(&second, &w).unwrap();
        prop_assert!(rel(z_sites(&union, &w).unwrap(), product) <= 1e-12);
    }

    #[test]
    fn h_ratio_is_partition_ratio(size in 1usize..=10, seed in any::<u64>(), w in weights()) {
        let sites = animal(size, seed);
        let env = LatticeEnv::from_sites(sites.clone()).unwrap();
        let o = vec![sites[0][0] - 1, sites[0][1]];
        let mut bigger = sites.clone();
        bigger.push(o.clone());
        let direct = z_ratio_sites(&bigger, &sites, &w).unwrap();
        prop_assert!(rel(h_ratio(&env, &o, &w).unwrap(), direct) <= 1e-12);
    }

    #[test]
    fn feasibility_is_hereditary(n in 0usize..20, seed in any::<u64>(), a in 0.05f64..0.5) {
        let mut rng = rng_from_seed(seed);
        let pts = |rng: &mut Rng| -> Vec<[f64; 2]> {
            (0..n).map(|_| [4.0 * rng.random::<f64>(), 4.0 * rng.random::<f64>()]).collect()
        };
        let cfg = WRPointConfig::new(pts(&mut rng), pts(&mut rng)).unwrap();
        prop_assume!(feasible_continuum(&cfg, a));
        let keep = |v: &[[f64; 2]], rng: &mut Rng| -> Vec<[f64; 2]> {
            v.iter().copied().filter(|_| rng.random::<bool>()).collect()
        };
        let plus = keep(&cfg.plus, &mut rng);
        let minus = keep(&cfg.minus, &mut rng);
        let sub = WRPointConfig::new(plus, minus).unwrap();
        prop_assert!(feasible_continuum(&sub, a));
    }

    #[test]
    fn chi_is_one_without_overlap(n in 0usize..6, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let x = MarkedPoint::bare([0.0, 0.0], 0.5).unwrap();
        let mut env = MarkedPointCloud::empty(2, true);
        for _ in 0..n {
            let d = 0.5 + 0.3 + 0.01 + 2.0 * rng.random::<f64>();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            env.push(&[d * t.cos(), d * t.sin()], Some(0.3)).unwrap();
        }
        let est = chi_density(&x, &env, 1.0, 2.0, 50, seed).unwrap();
        prop_assert_eq!((est.value, est.se), (1.0, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn specification_is_order_independent(seed in any::<u64>(), w in weights(), q in 0.05f64..0.95) {
        let window = LatticeBox::rect(3, 3).unwrap();
        let mut rng = rng_from_seed(seed);
        let boundary = LatticeConfig::new(LatticeEnv::new(window.clone(), Vec::<Site>::new()).unwrap(), Default::default()).unwrap();
        let mut free = window.sites();
        let points: Vec<(Site, Spin)> = (0..4)
            .map(|_| (free.swap_remove(rng.random_range(0..free.len())), SPINS[rng.random_range(0..3)]))
            .collect();
        let forward = lattice_specification(&window, &boundary, &points, q, &w, PapConvention::ExplicitWeight).unwrap();
        let mut reversed = points.clone();
        reversed.reverse();
        let backward = lattice_specification(&window, &boundary, &reversed, q, &w, PapConvention::ExplicitWeight).unwrap();
        prop_assert!(rel(forward, backward) <= 1e-12);
    }

    #[test]
    fn symmetric_half_lattice_joint_is_flip_invariant(p in 0.01f64..0.5, n in 1usize..=2) {
        let cell = half_lattice_exact(&SpinWeights::symmetric(p).unwrap(), n).unwrap();
        // Rows and columns in [0, +, -]; the flip swaps indices 1 and 2.
        let flip = [0, 2, 1];
        for a in 0..3 {
            for c in 0..3 {
                prop_assert!(rel(cell.joint[a][c], cell.joint[flip[a]][flip[c]]) <= 1e-14);
            }
        }
        prop_assert!(rel(cell.gap_cov, cell.gap_direct) <= 1e-10);
    }
}
