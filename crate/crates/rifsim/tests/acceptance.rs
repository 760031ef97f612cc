//! Acceptance gate: one test per shipped claim, each printing a PASS/FAIL
//! line (visible with --nocapture). Tolerances are part of the contract and
//! are not to be loosened to make a run green.

use rifsim::benchmarks::kappa_closed_form_reference;
use rifsim::config::{default_config, Placement, Variant, WeightingMode};
use rifsim::measure::{leaf_masses, mass_heatmap_bins, node_weights, scale_matrix};
use rifsim::rng::Stream;
use rifsim::spectrum::{
    convexity_report, estimate_spectrum, tau_fit, tau_via_kappa, ConvexityVerdict, MassSource,
    MeshMode, QGrid,
};
use rifsim::stats::pairwise_sum;
use rifsim::tangent::tangent_equivalence_test;
use rifsim::tree::grow;
use rifsim::{Config64, ContractionLaw64, OffspringLaw, QGrid64};

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance [{criterion}]: {verdict} — {detail}");
    assert!(pass, "acceptance [{criterion}] failed: {detail}");
}

/// Seed-averaged kappa-hat for the reference two-point cascade.
fn mean_kappa_hat(depth: usize, seeds: u64, grid: &QGrid64, mesh: MeshMode) -> Vec<f64> {
    let mut acc = vec![0.0f64; grid.values().len()];
    for s in 0..seeds {
        let cfg = Config64::worked_example(depth, 1 + s);
        let real = grow(cfg.clone()).unwrap();
        let matrix = scale_matrix(&real, &cfg.weighting).unwrap();
        let est = tau_fit(&matrix, grid, mesh, MassSource::Mass, 3).unwrap();
        for (a, k) in acc.iter_mut().zip(&est.kappa_hat) {
            *a += k / seeds as f64;
        }
    }
    acc
}

#[test]
fn criterion_1_reference_benchmark() {
    // q in {-1, -0.5, ..., 3}; QGrid validation caps the step for Legendre
    // use, so build the coarse grid literally.
    let grid = QGrid {
        q_min: -1.0f64,
        q_max: 3.0,
        q_step: 0.5,
    };
    let qs = grid.values();
    let kappa = mean_kappa_hat(14, 20, &grid, MeshMode::GeoMean);

    let mut worst = 0.0f64;
    for (&q, &k) in qs.iter().zip(&kappa) {
        worst = worst.max((k - kappa_closed_form_reference(q)).abs());
    }
    let i0 = qs.iter().position(|&q| q == 0.0).unwrap();
    let i1 = qs.iter().position(|&q| q == 1.0).unwrap();
    let exact0 = (kappa[i0] - 2.0f64.ln()).abs();
    let exact1 = kappa[i1].abs();
    report(
        "1 reference kappa benchmark",
        worst <= 0.05 && exact0 <= 1e-9 && exact1 <= 1e-9,
        &format!("worst |kappa_hat - kappa| = {worst:.5} (tol 0.05); |kappa(0)-log2| = {exact0:.2e}, |kappa(1)| = {exact1:.2e} (tol 1e-9)"),
    );
}

#[test]
fn criterion_2_dyadic_oracle() {
    let cfg = Config64::dyadic(10, 3);
    let real = grow(cfg.clone()).unwrap();
    let matrix = scale_matrix(&real, &cfg.weighting).unwrap();
    let grid = QGrid64::new(-2.0, 4.0, 0.1).unwrap();
    let est = estimate_spectrum(&matrix, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let tk = tau_via_kappa(&matrix, &grid, MassSource::Mass, 3).unwrap();

    let mut worst_fit = 0.0f64;
    let mut worst_kappa = 0.0f64;
    for ((&q, &t), &t2) in est.q.iter().zip(&est.tau).zip(&tk) {
        worst_fit = worst_fit.max((t - (q - 1.0)).abs());
        worst_kappa = worst_kappa.max((t2 - (q - 1.0)).abs());
    }
    let point = est
        .alpha
        .iter()
        .zip(&est.f)
        .all(|(&a, &f)| (a - 1.0).abs() < 1e-6 && (f - 1.0).abs() < 1e-6);
    report(
        "2 dyadic exact cascade",
        worst_fit <= 1e-9 && worst_kappa <= 1e-9 && point,
        &format!("|tau - (q-1)|: fit {worst_fit:.2e}, kappa-route {worst_kappa:.2e} (tol 1e-9); point spectrum at (1,1): {point}"),
    );
}

#[test]
fn criterion_3_binomial_oracle() {
    let mut cfg = Config64::dyadic(12, 4);
    cfg.weighting = WeightingMode::Explicit(vec![0.25, 0.75]);
    let real = grow(cfg.clone()).unwrap();
    let matrix = scale_matrix(&real, &cfg.weighting).unwrap();

    let exact = |q: f64| -(0.25f64.powf(q) + 0.75f64.powf(q)).log2();
    let grid = QGrid64::new(-2.0, 4.0, 0.1).unwrap();
    let est = tau_fit(&matrix, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let mut worst = 0.0f64;
    for (&q, &t) in est.q.iter().zip(&est.tau) {
        worst = worst.max((t - exact(q)).abs());
    }

    // alpha endpoints on an extended grid approach [log2(4/3), 2]
    let wide = QGrid64::new(-8.0, 8.0, 0.25).unwrap();
    let wide_est =
        estimate_spectrum(&matrix, &wide, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let a_hi = *wide_est.alpha.first().unwrap();
    let a_lo = *wide_est.alpha.last().unwrap();
    let lo_err = (a_lo - 0.415).abs();
    let hi_err = (a_hi - 2.0).abs();
    report(
        "3 binomial cascade oracle",
        worst <= 0.02 && lo_err <= 0.05 && hi_err <= 0.05,
        &format!("worst |tau - closed form| = {worst:.2e} (tol 0.02); alpha endpoints ({a_lo:.4}, {a_hi:.4}) vs (0.415, 2.0) (tol 0.05)"),
    );
}

#[test]
fn criterion_4_degeneracy_collapse() {
    let grid = QGrid64::new(-2.0, 4.0, 0.1).unwrap();

    let mut cfg = Config64::dyadic(12, 5);
    cfg.placement = Placement::Free;
    let real = grow(cfg.clone()).unwrap();
    let matrix = scale_matrix(&real, &cfg.weighting).unwrap();
    let est = estimate_spectrum(&matrix, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let rep = convexity_report(&est.tau, &est.q).unwrap();
    let affine_ok = rep.verdict == ConvexityVerdict::Affine;
    let alpha_width = est.alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - est.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let point_ok = alpha_width < 1e-6;

    let cfg2 = Config64::worked_example(14, 5);
    let real2 = grow(cfg2.clone()).unwrap();
    let matrix2 = scale_matrix(&real2, &cfg2.weighting).unwrap();
    let est2 = tau_fit(&matrix2, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let rep2 = convexity_report(&est2.tau, &est2.q).unwrap();
    let strict_ok = rep2.verdict == ConvexityVerdict::StrictlyConvex && rep2.min > 0.0;

    report(
        "4 degeneracy collapse",
        affine_ok && point_ok && strict_ok,
        &format!("constant ratio: verdict {:?}, max |d2| = {:.2e} (tol 1e-6), alpha width {alpha_width:.2e}; two-point: verdict {:?}, min d2 = {:.2e} (> 0)",
            rep.verdict, rep.min.abs().max(rep.max.abs()), rep2.verdict, rep2.min),
    );
}

#[test]
fn criterion_5_structural_invariants() {
    let mut rng = Stream::from_raw_seed(0xacce97);
    let mut checked = 0usize;
    for trial in 0..120 {
        // random offspring law over 0..=3 children
        let mut probs: Vec<f64> = (0..4).map(|_| rng.next_unit_open()).collect();
        if trial % 3 == 0 {
            probs[0] = 0.0; // sometimes extinction-free
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        // exact renormalization so validation's 1e-12 gate holds
        let rest: f64 = probs[1..].iter().sum();
        probs[0] = (1.0 - rest).max(0.0);
        let offspring = OffspringLaw::new(probs).unwrap();

        let placement = if rng.next_unit() < 0.5 {
            Placement::Free
        } else {
            Placement::DisjointPack
        };
        // keep DisjointPack feasible: 3 children at ratio < 1/3 always fit
        let hi_cap = if placement == Placement::DisjointPack {
            0.32
        } else {
            0.85
        };
        let contraction = match (trial + 1) % 3 {
            0 => ContractionLaw64::Constant(0.05 + 0.2 * rng.next_unit()),
            1 => ContractionLaw64::TwoPoint {
                r1: 0.05 + 0.1 * rng.next_unit(),
                r2: 0.2 + (hi_cap - 0.2) * rng.next_unit(),
                p: rng.next_unit_open(),
            },
            _ => {
                let lo = 0.05 + 0.1 * rng.next_unit();
                ContractionLaw64::Uniform {
                    lo,
                    hi: lo + (hi_cap - lo) * rng.next_unit_open(),
                }
            }
        };
        let variant = if rng.next_unit() < 0.5 {
            Variant::Anchored
        } else {
            Variant::NonAnchored
        };
        let cfg = Config64 {
            offspring,
            contraction,
            variant,
            placement,
            weighting: WeightingMode::Canonical {
                beta: 0.5 + 1.5 * rng.next_unit(),
            },
            subtree_height: 1 + (rng.next_u64() % 2) as usize,
            max_depth: 6,
            master_seed: rng.next_u64(),
        };
        let real = grow(cfg.clone()).unwrap();
        checked += 1;

        // nestedness, strict diameter decrease, anchored left equality
        real.validate_structure().unwrap();

        // per-depth mass conservation
        let rows = leaf_masses(&real, &cfg.weighting).unwrap();
        for row in &rows {
            let total: f64 = pairwise_sum(row);
            assert!((total - 1.0).abs() <= 1e-9, "mass total {total}");
        }

        // parent mass equals sum of children (canonical weighting)
        let w = node_weights(&real, &cfg.weighting).unwrap();
        for node in &real.nodes {
            if node.children.is_empty() {
                continue;
            }
            let child_sum: f64 = node.children.iter().map(|&c| w[c]).sum();
            assert!((w[node.id] - child_sum).abs() <= 1e-12);
        }

        // anchored collapse: min left endpoint 0 at every surviving depth
        if cfg.variant == Variant::Anchored {
            for row in real.leaves_by_depth.iter().filter(|r| !r.is_empty()) {
                let min_left = row
                    .iter()
                    .map(|&id| real.nodes[id].left)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(min_left, 0.0);
            }
        }
    }
    report(
        "5 structural invariants",
        checked >= 100,
        &format!("{checked} random configs: nestedness, mass conservation (1e-9), parent-sum (1e-12), anchored collapse all hold"),
    );
}

#[test]
fn criterion_6_tangent_equivalence() {
    let cfg = Config64::worked_example(12, 0);
    let matching = tangent_equivalence_test(&cfg, 100, 6, 6, 11, 40, None).unwrap();

    let control_baseline = Config64 {
        contraction: ContractionLaw64::Constant(0.5),
        ..cfg.clone()
    };
    let control =
        tangent_equivalence_test(&cfg, 100, 6, 6, 11, 40, Some(&control_baseline)).unwrap();

    report(
        "6 tangent equivalence",
        matching.pass && !control.pass,
        &format!(
            "matching law: KS mass {:.4} <= {:.4}, KS diameter {:.4} <= {:.4}; mismatched control rejected: {}",
            matching.ks_mass,
            matching.critical_mass,
            matching.ks_diameter,
            matching.critical_diameter,
            !control.pass
        ),
    );
}

#[test]
fn criterion_7_figure_pipeline() {
    let cfg: Config64 = default_config();
    let real = grow(cfg.clone()).unwrap();
    let matrix = scale_matrix(&real, &cfg.weighting).unwrap();

    let heat = mass_heatmap_bins(&matrix, &real, 64).unwrap();
    let rows_ok = heat.iter().all(|row| {
        let total: f64 = pairwise_sum(row);
        (total - 1.0).abs() <= 1e-9
    });

    let grid = QGrid64::default_grid();
    let est = estimate_spectrum(&matrix, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    // strict concavity of f along the curve: alpha strictly decreasing in q
    // (then df/dalpha = q is strictly increasing as alpha decreases)
    let alpha_decreasing = est.alpha.windows(2).all(|w| w[1] < w[0]);
    let width = est.alpha.first().unwrap() - est.alpha.last().unwrap();

    // leaf count vs the offspring law's mean-growth band over seeds
    let m = cfg.offspring.mean();
    let trials = 50;
    let mut mean_ratio = 0.0;
    for s in 0..trials {
        let mut c = cfg.clone();
        c.master_seed = 100 + s as u64;
        let r = grow(c).unwrap();
        let leaves = r.leaves_by_depth.get(20).map_or(0, Vec::len);
        mean_ratio += leaves as f64 / m.powi(20) / trials as f64;
    }
    let band_ok = mean_ratio > 1.0 / 3.0 && mean_ratio < 3.0;

    report(
        "7 figure pipeline",
        rows_ok && alpha_decreasing && width > 0.05 && band_ok,
        &format!("heatmap rows sum to 1: {rows_ok}; f strictly concave with alpha width {width:.3}; mean leaf count / m^20 = {mean_ratio:.3} in [1/3, 3]"),
    );
}

#[test]
fn criterion_8_estimator_cross_validation() {
    let grid = QGrid {
        q_min: -1.0f64,
        q_max: 3.0,
        q_step: 0.25,
    };
    let qs = grid.values();

    // (a) tau_fit vs tau_via_kappa on one realization
    let cfg = Config64::worked_example(14, 2);
    let real = grow(cfg.clone()).unwrap();
    let matrix = scale_matrix(&real, &cfg.weighting).unwrap();
    let fit = tau_fit(&matrix, &grid, MeshMode::GeoMean, MassSource::Mass, 3).unwrap();
    let via = tau_via_kappa(&matrix, &grid, MassSource::Mass, 3).unwrap();
    let mut route_gap = 0.0f64;
    for (&a, &b) in fit.tau.iter().zip(&via) {
        route_gap = route_gap.max((a - b).abs());
    }

    // (b) mesh-mode agreement, seed-averaged over 20 seeds
    let seeds = 20u64;
    let mut tau_by_mesh = Vec::new();
    for mesh in [MeshMode::Max, MeshMode::GeoMean, MeshMode::Median] {
        let mut acc = vec![0.0f64; qs.len()];
        for s in 0..seeds {
            let cfg = Config64::worked_example(14, 1 + s);
            let real = grow(cfg.clone()).unwrap();
            let matrix = scale_matrix(&real, &cfg.weighting).unwrap();
            let est = tau_fit(&matrix, &grid, mesh, MassSource::Mass, 3).unwrap();
            for (a, t) in acc.iter_mut().zip(&est.tau) {
                *a += t / seeds as f64;
            }
        }
        tau_by_mesh.push((mesh, acc));
    }
    let gap = |i: usize, j: usize| -> f64 {
        tau_by_mesh[i]
            .1
            .iter()
            .zip(&tau_by_mesh[j].1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let max_geo = gap(0, 1);
    let geo_median = gap(1, 2);
    let max_median = gap(0, 2);

    // NOTE: the Max mesh tracks the largest leaf, whose decay rate is the
    // extremal (not typical) branching-random-walk speed; for the two-point
    // law those rates differ by a factor ~1.85, so tau under Max cannot
    // agree with GeoMean/Median to 0.05 at any depth. The assertion is kept
    // as specified and is expected to fail; see the decisions ledger.
    report(
        "8 estimator cross-validation",
        route_gap <= 0.02 && max_geo <= 0.05 && geo_median <= 0.05 && max_median <= 0.05,
        &format!("tau_fit vs tau_via_kappa gap {route_gap:.4} (tol 0.02); mesh gaps Max-GeoMean {max_geo:.4}, GeoMean-Median {geo_median:.4}, Max-Median {max_median:.4} (tol 0.05)"),
    );
}
