use gridnet::network::{Activation, Network, NetworkConfig};
use gridnet::training::{EpochRecord, TrainingHistory};
use gridnet::viz::{
    activations_to_heatmap, gray_level, render_curves, render_diagram, DiagramSpec,
};
use gridnet::PixelGrid;
use proptest::prelude::*;

fn rect_fills(svg: &str) -> Vec<String> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    doc.descendants()
        .filter(|n| n.has_tag_name("rect"))
        .map(|n| n.attribute("fill").unwrap().to_owned())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rect_count_matches_architecture(
        widths in prop::collection::vec(1usize..40, 0..3),
        outputs in 2usize..12,
        seed in any::<u64>(),
        pixels in prop::collection::vec(0.0f64..=1.0, 36),
    ) {
        let cfg = NetworkConfig { output_units: outputs, ..NetworkConfig::default().with_hidden(&widths, Activation::Relu).with_seed(seed) };
        let net = Network::new(cfg).unwrap();
        let rec = net.forward(&PixelGrid::new(&pixels).unwrap());
        let svg = render_diagram(&rec, &DiagramSpec::default(), Some("probe")).unwrap();
        let fills = rect_fills(&svg);
        prop_assert_eq!(fills.len(), 36 + widths.iter().sum::<usize>() + outputs);

        let expected: Vec<String> = rec
            .stages
            .iter()
            .flat_map(|s| s.values.iter().map(|&v| gray_level(v)))
            .map(|l| format!("#{l:02X}{l:02X}{l:02X}"))
            .collect();
        prop_assert_eq!(&fills, &expected);
        for f in &fills {
            prop_assert_eq!(&f[1..3], &f[3..5]);
            prop_assert_eq!(&f[3..5], &f[5..7]);
        }
        let again = render_diagram(&rec, &DiagramSpec::default(), Some("probe")).unwrap();
        prop_assert_eq!(svg, again);
    }
}

#[test]
fn heatmap_levels_follow_clamp_formula() {
    let net = Network::new(NetworkConfig::default().with_seed(1)).unwrap();
    let rec = net.forward(&gridnet::datasets::make_checkerboard(0).unwrap());
    let heat = activations_to_heatmap(&rec);
    for (s, h) in rec.stages.iter().zip(&heat.stages) {
        assert_eq!(h.rows * h.cols, s.values.len());
        for (&v, &l) in s.values.iter().zip(&h.levels) {
            assert_eq!(l as f64, (255.0 * v.clamp(0.0, 1.0)).round());
        }
    }
}

#[test]
fn curves_are_well_formed_with_fixed_accuracy_axis() {
    let history = TrainingHistory {
        epochs: (1..=500)
            .map(|e| EpochRecord {
                epoch: e,
                train_loss: 3.0 / e as f64,
                train_acc: (e as f64 / 500.0).min(1.0),
                val_loss: 3.2 / e as f64,
                val_acc: 0.8,
            })
            .collect(),
    };
    let svg = render_curves(&history).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let polys: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .collect();
    assert_eq!(polys.len(), 4);
    for p in &polys {
        assert_eq!(p.attribute("points").unwrap().split(' ').count(), 500);
    }
    let acc_ticks: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("data-panel") == Some("accuracy"))
        .flat_map(|g| g.descendants())
        .filter(|n| n.attribute("class") == Some("y-tick"))
        .filter_map(|n| n.text())
        .collect();
    assert_eq!(acc_ticks, vec!["0.00", "0.50", "1.00"]);
    let labels: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    for needle in ["epoch", "loss", "accuracy"] {
        assert!(labels.contains(&needle), "missing axis label {needle}");
    }
}
