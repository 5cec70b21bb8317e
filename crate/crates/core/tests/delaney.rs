use helixforge_core::learners::{train_models, ModelFamily, ModelSpec, ParamValue, TrainOptions};
use helixforge_core::preprocess::{build_pipeline, PreprocessConfig};
use helixforge_core::tabular::{ingest_csv, IngestOptions, SplitPlan};

fn delaney() -> helixforge_core::Dataset {
    let f = std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/delaney.csv")).unwrap();
    let opts = IngestOptions { name: "delaney".into(), target_name: Some("logS".into()), ..Default::default() };
    ingest_csv(f, &opts).unwrap().0
}

fn mlrem_grid() -> ModelSpec {
    let f = |v: f64| ParamValue::Float(v);
    ModelSpec::new(ModelFamily::Mlrem)
        .with("alpha", vec![f(0.05), f(0.1), f(0.5), f(0.8)])
        .with("max_beta", vec![f(40.0)])
        .with("weight_threshold", vec![f(0.001)])
        .with("max_iterations", vec![ParamValue::Int(300)])
        .with("tolerance", vec![f(0.01)])
}

#[test]
fn mlrem_reproduces_published_fit() {
    let ds = delaney();
    assert_eq!((ds.n_rows(), ds.n_features()), (1128, 6));
    // recorded preprocessing: LASSO selection at 0.05, no normalisation
    let mut cfg = PreprocessConfig::default();
    cfg.selection.use_lasso = true;
    let pipe = build_pipeline(&cfg, &ds).unwrap();
    assert_eq!(pipe.surviving_features.len(), 6);
    let opts = TrainOptions { models: vec![mlrem_grid()], ..TrainOptions::default() };
    let out = train_models(&ds, &pipe, &SplitPlan::holdout(0.2, 1221), &opts).unwrap();
    let m = &out.models[0];
    assert_eq!(m.grid.len(), 4);
    let r2 = m.test_metrics["R2"].mean;
    assert!((r2 - 0.720).abs() <= 0.05, "test R2 {r2}");
    let coef = &m.coefficients.as_ref().unwrap()[0].coef;
    let sign = |name: &str| coef[m.feature_names.iter().position(|f| f == name).unwrap()].signum();
    for (name, s) in [
        ("polar_surface_area", 1.0),
        ("h_bond_donors", 1.0),
        ("minimum_degree", -1.0),
        ("rotatable_bonds", -1.0),
        ("rings", -1.0),
        ("molecular_weight", -1.0),
    ] {
        assert_eq!(sign(name), s, "{name}");
    }
}
