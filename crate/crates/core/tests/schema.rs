use std::collections::{BTreeMap, BTreeSet};

use geoforge_core::geom::{relative_area, Point, PointLabel};
use geoforge_core::schema::{
    canonical_serialize, parse_plotcode, resolve_circle, Annotations, CircleForm, CircleSpec, ParseMode, PlotCode,
    Segment,
};
use proptest::prelude::*;

const LABELS: [&str; 6] = ["A", "B", "C", "D", "E", "O"];

fn l(s: &str) -> PointLabel {
    PointLabel::new(s).unwrap()
}

fn coord() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn circle_form(n: usize) -> impl Strategy<Value = CircleForm> {
    let lab = move || (0..n).prop_map(|i| l(LABELS[i]));
    prop_oneof![
        (lab(), 0.1..20.0f64).prop_map(|(center, radius)| CircleForm::CenterRadius { center, radius }),
        (lab(), lab())
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(center, through)| CircleForm::CenterPoint { center, through }),
        (lab(), lab()).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| CircleForm::Diameter(a, b)),
    ]
}

fn plotcode() -> impl Strategy<Value = PlotCode> {
    (3..=LABELS.len()).prop_flat_map(|n| {
        (
            prop::collection::vec((coord(), coord()), n),
            prop::collection::vec((0..n, 0..n), 0..6),
            prop::collection::vec(circle_form(n), 0..3),
            prop::collection::vec((0..n, 0..n, 0..n), 0..3),
            prop::collection::vec((0..n, 0..n, "[0-9a-z\\\\{}() ]{1,8}"), 0..3),
            prop::collection::vec("[a-z_]{1,6}\\([A-E, ]{0,8}\\)", 0..3),
        )
            .prop_map(move |(xy, segs, circles, rights, lengths, quantities)| {
                let points: BTreeMap<PointLabel, Point> =
                    xy.iter().enumerate().map(|(i, &(x, y))| (l(LABELS[i]), Point::new(x, y))).collect();
                let segments: BTreeSet<Segment> =
                    segs.iter().filter_map(|&(a, b)| Segment::new(l(LABELS[a]), l(LABELS[b]))).collect();
                let circles = circles
                    .into_iter()
                    .enumerate()
                    .map(|(i, form)| CircleSpec {
                        id: format!("C{}", i + 1),
                        form,
                    })
                    .collect();
                let annotations = Annotations {
                    right_angles: rights
                        .iter()
                        .map(|&(a, b, c)| [l(LABELS[a]), l(LABELS[b]), l(LABELS[c])])
                        .collect(),
                    length_of_line: lengths
                        .into_iter()
                        .filter(|(a, b, _)| a != b)
                        .map(|(a, b, v)| ([l(LABELS[a]), l(LABELS[b])], v))
                        .collect(),
                    measure_of_angle: Vec::new(),
                };
                PlotCode {
                    points,
                    segments,
                    circles,
                    annotations,
                    quantities,
                }
            })
    })
}

proptest! {
    #[test]
    fn three_point_center_is_equidistant(
        a in (coord(), coord()), b in (coord(), coord()), c in (coord(), coord())
    ) {
        let (pa, pb, pc) = (Point::new(a.0, a.1), Point::new(b.0, b.1), Point::new(c.0, c.1));
        prop_assume!(relative_area(pa, pb, pc) > 1e-3);
        let points = BTreeMap::from([(l("A"), pa), (l("B"), pb), (l("C"), pc)]);
        let spec = CircleSpec { id: "C1".into(), form: CircleForm::ThreePoints(l("A"), l("B"), l("C")) };
        let r = resolve_circle(&spec, &points).unwrap();
        for p in [pa, pb, pc] {
            prop_assert!((r.center.dist(p) - r.radius).abs() <= 1e-9 * r.radius);
        }
    }

    #[test]
    fn parse_is_total_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_plotcode(&bytes, ParseMode::Strict);
        let _ = parse_plotcode(&bytes, ParseMode::Lenient);
    }

    #[test]
    fn parse_is_total_on_near_miss_json(pc in plotcode(), cut in 0usize..400, junk in "[\\[\\]{}\",:0-9A-Za-z()-]{0,6}") {
        let text = String::from_utf8(canonical_serialize(&pc)).unwrap();
        let cut = cut.min(text.len());
        let mangled = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
        let _ = parse_plotcode(mangled.as_bytes(), ParseMode::Strict);
        let _ = parse_plotcode(mangled.as_bytes(), ParseMode::Lenient);
    }

    #[test]
    fn canonical_serialization_is_a_normal_form(pc in plotcode()) {
        let once = canonical_serialize(&pc);
        let parsed = parse_plotcode(&once, ParseMode::Lenient).unwrap();
        prop_assert_eq!(&parsed, &pc);
        prop_assert_eq!(canonical_serialize(&parsed), once);
    }
}
