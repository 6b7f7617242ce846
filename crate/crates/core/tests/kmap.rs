use aot_core::ir::minimize::minimize_kmap_cover;
use aot_core::ir::{minimize_kmap, parse_bool, Cell, KMapIr, KMapOrder};
use proptest::prelude::*;

const VARS: [&str; 4] = ["a", "b", "c", "d"];
const GRAY: [u32; 4] = [0, 1, 3, 2];

/// Builds a Gray-ordered map over the first `nr + nc` variables, with
/// cells listed in minterm order.
fn map(nr: usize, nc: usize, by_minterm: &[Cell]) -> KMapIr {
    let cells = (0..1usize << nr).map(|r| (0..1usize << nc).map(|c| by_minterm[((GRAY[r] << nc) | GRAY[c]) as usize]).collect()).collect();
    KMapIr {
        row_vars: VARS[..nr].iter().map(|s| s.to_string()).collect(),
        col_vars: VARS[nr..nr + nc].iter().map(|s| s.to_string()).collect(),
        cells,
        output: Some("f".into()),
        order: KMapOrder::Gray,
    }
}

fn minterm_env(m: u32, n: usize) -> impl Fn(&str) -> bool {
    move |name: &str| {
        let i = VARS.iter().position(|v| *v == name).expect("known variable");
        m >> (n - 1 - i) & 1 == 1
    }
}

/// The minimized equation, reparsed, matches every specified cell.
fn check_agrees(k: &KMapIr, by_minterm: &[Cell], n: usize) {
    let eq = minimize_kmap(k);
    let e = parse_bool(&eq.expressions["f"]).unwrap();
    for (m, cell) in by_minterm.iter().enumerate() {
        let got = e.eval(&minterm_env(m as u32, n));
        match cell {
            Cell::One => assert!(got, "minterm {m} should be 1 in {}", eq.expressions["f"]),
            Cell::Zero => assert!(!got, "minterm {m} should be 0 in {}", eq.expressions["f"]),
            Cell::DontCare => {}
        }
    }
}

/// Fewest product terms covering `ones` without touching `zeros`, by
/// exhaustive search over every cube.
fn brute_force_min(n: usize, ones: &[u32], zeros: &[u32]) -> usize {
    let mut cubes = Vec::new();
    for code in 0..3u32.pow(n as u32) {
        let (mut value, mut mask, mut c) = (0u32, 0u32, code);
        for bit in 0..n {
            match c % 3 {
                0 => {}
                1 => value |= 1 << bit,
                _ => mask |= 1 << bit,
            }
            c /= 3;
        }
        let covers = move |m: u32| (m & !mask) == value;
        if !zeros.iter().any(|&z| covers(z)) {
            cubes.push(ones.iter().filter(|&&o| covers(o)).fold(0u32, |acc, &o| acc | 1 << o));
        }
    }
    let target = ones.iter().fold(0u32, |acc, &o| acc | 1 << o);
    fn search(cubes: &[u32], start: usize, left: usize, have: u32, target: u32) -> bool {
        if have & target == target {
            return true;
        }
        left > 0 && (start..cubes.len()).any(|i| search(cubes, i + 1, left - 1, have | cubes[i], target))
    }
    (0..=cubes.len()).find(|&size| search(&cubes, 0, size, 0, target)).unwrap()
}

fn exhaustive(nr: usize, nc: usize) {
    let n = nr + nc;
    for f in 0u32..1 << (1 << n) {
        let cells: Vec<Cell> = (0..1 << n).map(|m| if f >> m & 1 == 1 { Cell::One } else { Cell::Zero }).collect();
        let k = map(nr, nc, &cells);
        check_agrees(&k, &cells, n);
        let ones: Vec<u32> = (0..1 << n).filter(|m| f >> m & 1 == 1).collect();
        let zeros: Vec<u32> = (0..1 << n).filter(|m| f >> m & 1 == 0).collect();
        let terms = minimize_kmap_cover(&k).terms.len();
        assert!(terms <= brute_force_min(n, &ones, &zeros), "function {f:#b}: {terms} terms");
    }
}

#[test]
fn every_two_variable_map() {
    exhaustive(1, 1);
}

#[test]
fn every_three_variable_map() {
    exhaustive(1, 2);
}

#[test]
fn binary_order_reads_cells_in_plain_order() {
    let k = KMapIr {
        row_vars: vec!["a".into(), "b".into()],
        col_vars: vec!["c".into()],
        cells: vec![vec![Cell::Zero, Cell::Zero], vec![Cell::Zero, Cell::Zero], vec![Cell::Zero, Cell::Zero], vec![Cell::One, Cell::Zero]],
        output: None,
        order: KMapOrder::Binary,
    };
    assert_eq!(minimize_kmap(&k).expressions["out"], "a AND b AND NOT c");
}

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![Just(Cell::Zero), Just(Cell::One), Just(Cell::DontCare)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn four_variable_maps_with_dont_cares(cells in proptest::collection::vec(cell(), 16)) {
        check_agrees(&map(2, 2, &cells), &cells, 4);
    }

    #[test]
    fn three_variable_maps_with_dont_cares_are_minimal(cells in proptest::collection::vec(cell(), 8)) {
        let k = map(1, 2, &cells);
        check_agrees(&k, &cells, 3);
        let ones: Vec<u32> = (0..8).filter(|&m| cells[m as usize] == Cell::One).collect();
        let zeros: Vec<u32> = (0..8).filter(|&m| cells[m as usize] == Cell::Zero).collect();
        prop_assert_eq!(minimize_kmap_cover(&k).terms.len(), brute_force_min(3, &ones, &zeros));
    }
}
