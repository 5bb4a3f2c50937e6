import pytest

import vcoder


def two_groups():
    rows = []
    for g, rel, hub in (("a", "r0", "x"), ("b", "r1", "y")):
        for i in range(8):
            rows.append((f"{g}{i}", rel, f"{g}{(i + 1) % 8}"))
            rows.append((f"{g}{i}", f"near_{hub}", f"hub_{hub}"))
    return vcoder.from_triples(rows)


def relation_id(store, name):
    return next(r for r in range(store.num_relations) if store.relation_name(r) == name)


def small_config(seed=1):
    cfg = vcoder.TrainConfig()
    cfg.hidden_dim = 8
    cfg.learning_rate = 0.003
    cfg.batch_size = 16
    cfg.eps_decay = 0.01
    cfg.epochs_per_round = 5
    cfg.min_samples = 2
    cfg.seed = seed
    return cfg


def test_store_and_encoding():
    store = two_groups()
    assert store.num_entities == 18
    assert store.num_relations == 4
    assert store.input_width == 8
    t = store.triples()[0]
    x = vcoder.triple_input(store, t)
    assert len(x) == store.input_width
    assert set(x) <= {0.0, 1.0}


def test_model_reconstruct_and_split():
    store = two_groups()
    model = vcoder.create_model(store, hidden_dim=6, seed=3)
    x = vcoder.triple_input(store, store.triples()[0])
    z, loss = model.reconstruct(x, 0)
    assert len(z) == len(x)
    assert loss == pytest.approx(sum((a - b) ** 2 for a, b in zip(z, x)))
    twin = model.split(0)
    assert twin == store.num_relations
    assert model.units == store.num_relations + 1
    assert model.reconstruct(x, twin) == model.reconstruct(x, 0)
    assert model.lineage()[twin] == (0, 1)


def test_trainer_is_deterministic():
    store = two_groups()
    runs = []
    for _ in range(2):
        trainer = vcoder.Trainer(store, small_config())
        epochs = trainer.run_round()
        runs.append([e["mean_loss"] for e in epochs])
        assert len(epochs) == 5
    assert runs[0] == runs[1]


def test_recovery_and_linkpred():
    store = two_groups()
    r = vcoder.recovery_experiment(store, relation_id(store, "r0"), relation_id(store, "r1"), small_config())
    assert 0.5 <= r["average"] <= 1.0
    assert sum(map(sum, r["confusion"])) == 16

    model = vcoder.linkpred.train(store, dim=4, epochs=2, seed=1)
    metrics = vcoder.linkpred.evaluate_filtered(model, store, store.triples()[:4])
    assert metrics.count == 8
    assert 0.0 < metrics.mrr <= 1.0
    assert metrics.hits1 <= metrics.hits10


def test_errors_surface_as_vcoder_error():
    with pytest.raises(vcoder.VCoderError):
        vcoder.parse_config("hidden_dim = -1\n")
    store = two_groups()
    with pytest.raises(vcoder.VCoderError):
        vcoder.merge_relations(store, 0, 0)
