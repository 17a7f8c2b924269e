use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triflip::bounds::precompute_bound_table;
use triflip::cnf::{
    add_last_step_minimization, build_insertion_formula, build_path_formula, build_solution_formula, decode_path,
    decode_solution, Cnf, EncodeOptions, InsertionBound, VarInfo,
};
use triflip::fixtures::{fan_instance, random_point_set, random_triangulation, random_unit_flip};
use triflip::instance::generate_random_instance;
use triflip::oracle::bfs_distance;
use triflip::sat::{solve_maxsat, solve_sat, SolverConfig, Status};
use triflip::Triangulation;

fn sat(cnf: &Cnf) -> Option<Vec<bool>> {
    let r = solve_sat(cnf, &SolverConfig::builtin()).unwrap();
    match r.status {
        Status::Sat => Some(r.model.unwrap()),
        Status::Unsat => None,
        Status::Unknown => panic!("built-in solver gave up: {:?}", r.diagnostics),
    }
}

fn pair(seed: u64, n: usize) -> (Triangulation, Triangulation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = random_point_set(&mut rng, n);
    let a = random_triangulation(&ps, &mut rng, 8);
    let b = random_triangulation(&ps, &mut rng, 8);
    (a, b)
}

#[test]
fn fan_insertion_needs_three_steps() {
    let (t, uv) = fan_instance(6);
    for (opts, label) in [
        (EncodeOptions::default(), "log2"),
        (
            EncodeOptions { insertion_bound: InsertionBound::String(Arc::new(precompute_bound_table(8))), ..Default::default() },
            "string",
        ),
    ] {
        let (cnf, _) = build_insertion_formula(&t, uv, 2, &opts).unwrap();
        assert!(sat(&cnf).is_none(), "{label}: two steps must not suffice");
        let (cnf, vm) = build_insertion_formula(&t, uv, 3, &opts).unwrap();
        let model = sat(&cnf).expect("three steps suffice");
        let path = decode_path(&model, &vm, 0).unwrap();
        assert!(path.end().unwrap().contains(uv));
        assert_eq!(path.len(), 3);
    }
}

#[test]
fn identity_and_adjacent_paths() {
    let (a, _) = pair(1, 8);
    let (cnf, vm) = build_path_formula(&a, &a, 0, &EncodeOptions::default()).unwrap();
    let model = sat(&cnf).unwrap();
    assert_eq!(decode_path(&model, &vm, 0).unwrap().len(), 0);

    let (e, f) = a.unit_flip_candidates()[0];
    let b = a.flip(e).unwrap();
    let (cnf, _) = build_path_formula(&a, &b, 0, &EncodeOptions::default()).unwrap();
    assert!(sat(&cnf).is_none());
    let (cnf, vm) = build_path_formula(&a, &b, 1, &EncodeOptions::default()).unwrap();
    let model = sat(&cnf).unwrap();
    let path = decode_path(&model, &vm, 0).unwrap();
    assert_eq!(path.flips.len(), 1);
    assert_eq!(path.flips[0].removed, vec![e]);
    assert_eq!(path.flips[0].added, vec![f]);
}

#[test]
fn flips_sharing_a_triangle_cannot_both_fire() {
    // Force two flips whose removed edges share a triangle at layer 0.
    for seed in 0..10 {
        let (a, b) = pair(seed, 8);
        let (mut cnf, vm) = build_path_formula(&a, &b, 3, &EncodeOptions::default()).unwrap();
        if vm.conflict().is_some() {
            continue;
        }
        let flips = vm.flip_vars_at(0, 0).to_vec();
        let pair = flips.iter().enumerate().find_map(|(i, (k1, f1))| {
            flips[i + 1..].iter().find_map(|(k2, f2)| {
                (k1.removed != k2.removed && a.contains(k1.removed) && a.contains(k2.removed) && a.share_triangle(k1.removed, k2.removed))
                    .then_some((*f1, *f2))
            })
        });
        let Some((f1, f2)) = pair else { continue };
        cnf.add(vec![f1]);
        cnf.add(vec![f2]);
        assert!(sat(&cnf).is_none(), "seed {seed}");
    }
}

#[test]
fn flip_variables_imply_their_support() {
    let (a, b) = pair(4, 7);
    let (cnf, vm) = build_path_formula(&a, &b, 2, &EncodeOptions::default()).unwrap();
    // Every flip variable has clauses to its removed edge, the four quad
    // sides before and after, and the added edge after.
    for var in 1..=cnf.num_vars as i32 {
        let Some(VarInfo::Flip(k)) = vm.info(var) else { continue };
        let implied: Vec<i32> = cnf.hard.iter().filter(|c| c.len() == 2 && c[0] == -var).map(|c| c[1]).collect();
        assert!(implied.contains(&vm.edge_var(k.path, k.layer, k.removed).unwrap()));
        assert!(implied.contains(&vm.edge_var(k.path, k.layer + 1, k.added).unwrap()));
        // The removed edge may have no variable after the flip at all.
        let after = vm.edge_var(k.path, k.layer + 1, k.removed);
        if let Some(v) = after {
            assert!(implied.contains(&-v));
        }
        assert_eq!(implied.len(), 10 + usize::from(after.is_some()));
    }
    assert_eq!(vm.num_vars(), cnf.num_vars as usize);
    assert_eq!(vm.num_edge_vars() + vm.num_flip_vars(), vm.num_vars());
}

#[test]
fn happy_paths_never_undo_endpoint_edges() {
    for seed in 0..10 {
        let (a, b) = pair(300 + seed, 8);
        let opts = EncodeOptions { happy_edges: true, ..Default::default() };
        let (_, vm) = build_path_formula(&a, &b, 4, &opts).unwrap();
        let mut flips = 0;
        for layer in 0..4 {
            for (k, _) in vm.flip_vars_at(0, layer) {
                assert!(!b.contains(k.removed) && !a.contains(k.added), "seed {seed}: {k:?}");
                flips += 1;
            }
        }
        let (_, plain) = build_path_formula(&a, &b, 4, &EncodeOptions::default()).unwrap();
        assert!(flips < plain.num_flip_vars() || a == b, "seed {seed}");
    }
}

#[test]
fn minimal_length_matches_oracle() {
    for seed in 0..25 {
        let (a, b) = pair(100 + seed, 7);
        let (d, _) = bfs_distance(&a, &b, 200_000).unwrap();
        for happy in [false, true] {
            let opts = EncodeOptions { happy_edges: happy, ..Default::default() };
            let (cnf, vm) = build_path_formula(&a, &b, d, &opts).unwrap();
            let model = sat(&cnf).unwrap_or_else(|| panic!("seed {seed} happy {happy}: SAT at {d}"));
            let path = decode_path(&model, &vm, 0).unwrap().compress();
            assert_eq!(path.end().unwrap(), b);
            assert!(path.len() <= d);
            if d > 0 && !happy {
                let (cnf, _) = build_path_formula(&a, &b, d - 1, &opts).unwrap();
                assert!(sat(&cnf).is_none(), "seed {seed}: UNSAT at {}", d - 1);
            }
        }
    }
}

#[test]
fn solution_formula_decodes_to_valid_solution() {
    for seed in 0..10 {
        let inst = generate_random_instance(7, 3, 2, seed).unwrap();
        let lengths = vec![3; 3];
        let (cnf, vm) = build_solution_formula(&inst, &lengths, &EncodeOptions::default()).unwrap();
        let model = sat(&cnf).expect("three steps reach a common center");
        let sol = decode_solution(&model, &vm, &inst).unwrap().compress();
        assert!(sol.verify(&inst, true).valid, "seed {seed}");
        assert!(sol.objective() <= 9);
    }
}

#[test]
fn last_step_minimization_prefers_small_final_flips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ps = random_point_set(&mut rng, 8);
    let a = random_triangulation(&ps, &mut rng, 6);
    let mut b = a.clone();
    for _ in 0..rng.gen_range(2..4) {
        b = random_unit_flip(&b, &mut rng);
    }
    let (d, _) = bfs_distance(&a, &b, 200_000).unwrap();
    let (cnf, vm) = build_path_formula(&a, &b, d + 1, &EncodeOptions::default()).unwrap();
    let cnf = add_last_step_minimization(cnf, &vm, 0, d + 1);
    let r = solve_maxsat(&cnf, &SolverConfig::builtin()).unwrap();
    assert_eq!(r.status, Status::Sat);
    // With one spare layer the last step can be stationary.
    assert_eq!(r.cost, Some(0));
    let path = decode_path(r.model.as_ref().unwrap(), &vm, 0).unwrap();
    assert!(path.flips.last().unwrap().is_empty());
}

#[test]
fn emitted_formulas_reparse() {
    let (a, b) = pair(2, 7);
    let (cnf, vm) = build_path_formula(&a, &b, 2, &EncodeOptions::default()).unwrap();
    let back = Cnf::parse_dimacs(&cnf.emit_dimacs()).unwrap();
    assert_eq!(back, cnf);
    let weighted = add_last_step_minimization(cnf, &vm, 0, 2);
    let back = Cnf::parse_wcnf(&weighted.emit_wcnf()).unwrap();
    assert_eq!(back.hard, weighted.hard);
    assert_eq!(back.soft, weighted.soft);
}
