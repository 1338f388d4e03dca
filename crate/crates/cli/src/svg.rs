//! Deterministic SVG pictures of tilings.

use std::fmt::Write;

use dimer_core::enumerate::{Orientation, Tiling};
use dimer_core::height::HeightField;
use dimer_core::lattice::{bounding_box, CellRegion};

const UNIT: i32 = 24;
const MARGIN: i32 = 12;

/// Dominoes as rectangles over the region's cells, optionally labelling vertex heights.
pub fn render_tiling_svg<R: CellRegion + ?Sized>(region: &R, tiling: &Tiling, heights: Option<&HeightField>) -> String {
    let cells = region.cells();
    let Some((lo, hi)) = bounding_box(cells) else {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"0\" height=\"0\" viewBox=\"0 0 0 0\"></svg>\n".into();
    };
    let (w, h) = ((hi.0 - lo.0 + 1) * UNIT + 2 * MARGIN, (hi.1 - lo.1 + 1) * UNIT + 2 * MARGIN);
    // lattice y grows upward, SVG y downward
    let px = |x: i32| (x - lo.0) * UNIT + MARGIN;
    let py = |y: i32| (hi.1 + 1 - y) * UNIT + MARGIN;
    let mut s = String::new();
    let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
    let _ = writeln!(s, "<g class=\"cells\" fill=\"#eeeeee\" stroke=\"#cccccc\" stroke-width=\"0.5\">");
    for &(i, j) in cells {
        let _ = writeln!(s, "<rect x=\"{}\" y=\"{}\" width=\"{UNIT}\" height=\"{UNIT}\"/>", px(i), py(j + 1));
    }
    s.push_str("</g>\n<g class=\"dominoes\" stroke=\"#222222\" stroke-width=\"1.5\">\n");
    for d in tiling.dominoes() {
        let (i, j) = d.cell;
        let (dw, dh, fill) = match d.orientation {
            Orientation::H => (2 * UNIT, UNIT, "#8fb8de"),
            Orientation::V => (UNIT, 2 * UNIT, "#f2b880"),
        };
        let top = match d.orientation {
            Orientation::H => j + 1,
            Orientation::V => j + 2,
        };
        let _ = writeln!(
            s,
            "<rect class=\"domino\" x=\"{}\" y=\"{}\" width=\"{dw}\" height=\"{dh}\" fill=\"{fill}\"/>",
            px(i),
            py(top)
        );
    }
    s.push_str("</g>\n");
    if let Some(field) = heights {
        s.push_str("<g class=\"heights\" font-family=\"monospace\" font-size=\"8\" text-anchor=\"middle\">\n");
        for (k, &(x, y)) in field.layout().vertices().iter().enumerate() {
            let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", px(x), py(y) - 2, field.values()[k]);
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use dimer_core::enumerate::enumerate_tilings;
    use dimer_core::height::height_function;
    use dimer_core::lattice::{build_even_rectangle, make_temperleyan};
    use std::collections::BTreeSet;

    #[test]
    fn empty_region_gives_empty_canvas() {
        let s = render_tiling_svg(&BTreeSet::new(), &Tiling::default(), None);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(!s.contains("<rect"));
    }

    #[test]
    fn three_by_three_has_four_dominoes_and_is_deterministic() {
        let r = make_temperleyan(build_even_rectangle(3, 3, 1.0).unwrap(), (0, 0)).unwrap();
        for t in enumerate_tilings(&r).unwrap() {
            let h = height_function(&r, &t).unwrap();
            let a = render_tiling_svg(&r, &t, Some(&h));
            assert_eq!(a.matches("class=\"domino\"").count(), 4);
            assert_eq!(a.matches("<text").count(), h.values().len());
            assert_eq!(a, render_tiling_svg(&r, &t, Some(&h)));
        }
    }
}
