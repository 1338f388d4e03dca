use std::collections::BTreeSet;
use std::sync::Arc;

use dimer_core::enumerate::{Domino, Orientation, Tiling};
use dimer_core::height::{height_function_with, parse_csv, to_csv, RegionLayout, Traversal};

#[test]
fn brick_strip_matches_golden() {
    let cells: BTreeSet<(i32, i32)> = (0..6).flat_map(|i| (0..2).map(move |j| (i, j))).collect();
    let tiling = Tiling::new(
        (0..3)
            .flat_map(|k| (0..2).map(move |j| Domino::new((2 * k, j), Orientation::H)))
            .collect(),
    );
    tiling.validate(&cells).unwrap();
    let layout = Arc::new(RegionLayout::new(&cells, None, 1.0));
    let field = height_function_with(&layout, &tiling, Traversal::BreadthFirst).unwrap();
    assert!(field.face_rule_holds());
    assert!(field.boundary_rule_holds());
    let golden = include_str!("golden/strip_2x6_horizontal.csv");
    assert_eq!(to_csv(&field), golden);
    assert_eq!(parse_csv(golden).unwrap().len(), 21);
}
