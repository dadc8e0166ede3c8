use arsent::bundle::ModelBundle;
use arsent::synthetic::{generate, SyntheticSpec};
use arsent::{ClassifierKind, NgramRange, Pipeline, PipelineConfig, TrainConfig, WeightingScheme};

/// A bundle applies the same preprocessing at serving time as at training time,
/// so featurizing a training text matches the row built by hand.
#[test]
fn serving_matches_training_features() {
    let corpus = generate(&SyntheticSpec::three_class(200, 8));
    let cfg = PipelineConfig { min_stem_length: 4, ..Default::default() };
    let pipeline = Pipeline::new(cfg.clone()).unwrap();
    let bundle = ModelBundle::fit(
        &corpus,
        pipeline.clone(),
        NgramRange::UNI_BI,
        WeightingScheme::TfIdf,
        ClassifierKind::LogReg,
        &TrainConfig::default(),
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.json");
    bundle.save(&path).unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    assert_eq!(loaded.pipeline().config(), &cfg);

    for doc in corpus.documents().iter().take(50) {
        let tokens = pipeline.run(&doc.text);
        let want = bundle.vocabulary().vectorize(&tokens, NgramRange::UNI_BI, WeightingScheme::TfIdf).unwrap();
        assert_eq!(loaded.featurize(&doc.text), want);
        assert_eq!(loaded.predict_text(&doc.text).unwrap(), bundle.predict_text(&doc.text).unwrap());
    }
}
