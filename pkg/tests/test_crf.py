"""Linear-chain CRF: oracle equivalence, gradients, training, serialization."""

import itertools
import math

import numpy as np
import pytest

from yidkit import crf
from yidkit.crf import (
    ChecksumMismatch,
    CrfError,
    CrfModel,
    Instance,
    LengthMismatch,
    StaticProvider,
    TokenFileProvider,
    TokenVectorMisalignment,
    TrainingConfig,
    UnknownTag,
    build_lookup_vocab,
    emission_scores,
    load_model,
    log_partition,
    log_partition_backward,
    lr_at,
    make_instances,
    marginals,
    nll_and_gradient,
    nll_and_parameter_gradients,
    predict,
    read_token_vectors,
    save_model,
    score_sentence,
    token_accuracy,
    train,
    viterbi,
    write_token_vectors,
)
from yidkit.embeddings import EmbeddingTable


def _random_model(K, dim, seed, hidden=0, vocab=None):
    model = CrfModel.create([f"T{k}" for k in range(K)], dim, hidden=hidden,
                            lookup_vocab=vocab, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    for key in model.params:
        model.params[key] = rng.normal(scale=0.5, size=model.params[key].shape)
    return model


def _enumerate_scores(model, emissions):
    """Score of every tag path, by direct summation over the parameters."""
    T, K = emissions.shape
    trans = model.params["trans"]
    scores = {}
    for path in itertools.product(range(K), repeat=T):
        s = trans[model.bos, path[0]]
        for t in range(T):
            s += emissions[t, path[t]]
            if t + 1 < T:
                s += trans[path[t], path[t + 1]]
        s += trans[path[-1], model.eos]
        scores[path] = s
    return scores


# -- sentence scores -----------------------------------------------------------


def test_score_hand_example():
    model = CrfModel.create(["T0", "T1"], dim=2, seed=0)
    model.params["trans"][:] = 0.0
    model.params["trans"][model.bos, 0] = 0.5
    model.params["trans"][0, 1] = 0.25
    emissions = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert score_sentence(model, emissions, np.array([0, 1])) == pytest.approx(2.75)


def test_score_single_position_zero_model():
    model = CrfModel.create(["T0"], dim=1, seed=0)
    assert score_sentence(model, np.zeros((1, 1)), np.array([0])) == 0.0


def test_score_length_mismatch():
    model = CrfModel.create(["T0", "T1"], dim=2, seed=0)
    with pytest.raises(LengthMismatch):
        score_sentence(model, np.zeros((2, 2)), np.array([0]))


def test_score_shift_linearity():
    model = _random_model(3, 2, seed=4)
    emissions = np.random.default_rng(0).normal(size=(4, 3))
    shifted = emissions.copy()
    shifted[2] += 1.5
    for path in itertools.product(range(3), repeat=4):
        base = score_sentence(model, emissions, np.array(path))
        assert score_sentence(model, shifted, np.array(path)) == pytest.approx(base + 1.5)


# -- partition function ----------------------------------------------------------


def test_log_partition_two_equal_paths():
    model = CrfModel.create(["T0", "T1"], dim=2, seed=0)
    model.params["trans"][:] = 0.0
    assert log_partition(model, np.zeros((1, 2))) == pytest.approx(math.log(2.0))


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(1)
    for trial in range(20):
        K = int(rng.integers(1, 5))
        T = int(rng.integers(1, 6))
        model = _random_model(K, 2, seed=trial)
        emissions = rng.normal(size=(T, K))
        oracle = math.log(sum(math.exp(s) for s in
                              _enumerate_scores(model, emissions).values()))
        assert log_partition(model, emissions) == pytest.approx(oracle, abs=1e-10)
        assert log_partition_backward(model, emissions) == pytest.approx(oracle, abs=1e-10)


def test_path_probabilities_sum_to_one():
    model = _random_model(3, 2, seed=9)
    emissions = np.random.default_rng(3).normal(size=(4, 3))
    logz = log_partition(model, emissions)
    total = sum(math.exp(s - logz) for s in _enumerate_scores(model, emissions).values())
    assert total == pytest.approx(1.0, abs=1e-10)
    assert all(s <= logz + 1e-12 for s in _enumerate_scores(model, emissions).values())


def test_marginals_match_enumeration_and_sum_to_one():
    model = _random_model(3, 2, seed=2)
    rng = np.random.default_rng(5)
    emissions = rng.normal(size=(4, 3))
    logz, unary, pairwise = marginals(model, emissions)
    scores = _enumerate_scores(model, emissions)
    probs = {p: math.exp(s - logz) for p, s in scores.items()}
    for t in range(4):
        assert unary[t].sum() == pytest.approx(1.0, abs=1e-8)
        for k in range(3):
            oracle = sum(pr for p, pr in probs.items() if p[t] == k)
            assert unary[t, k] == pytest.approx(oracle, abs=1e-10)
    for t in range(3):
        for a in range(3):
            for b in range(3):
                oracle = sum(pr for p, pr in probs.items()
                             if p[t] == a and p[t + 1] == b)
                assert pairwise[t, a, b] == pytest.approx(oracle, abs=1e-10)


# -- viterbi ----------------------------------------------------------------------


def test_viterbi_matches_enumeration():
    rng = np.random.default_rng(7)
    for trial in range(20):
        K = int(rng.integers(1, 5))
        T = int(rng.integers(1, 6))
        model = _random_model(K, 2, seed=100 + trial)
        emissions = rng.normal(size=(T, K))
        path, score = viterbi(model, emissions)
        scores = _enumerate_scores(model, emissions)
        best = max(scores.values())
        assert score == pytest.approx(best, abs=1e-10)
        assert scores[tuple(path)] == pytest.approx(best, abs=1e-10)
        assert score_sentence(model, emissions, path) == pytest.approx(score, abs=1e-10)


def test_viterbi_all_zero_ties_break_low():
    model = CrfModel.create(["T0", "T1", "T2"], dim=2, seed=0)
    model.params["trans"][:] = 0.0
    path, score = viterbi(model, np.zeros((4, 3)))
    assert list(path) == [0, 0, 0, 0]
    assert score == 0.0


def test_viterbi_single_tag():
    model = CrfModel.create(["T0"], dim=1, seed=0)
    path, score = viterbi(model, np.array([[2.0], [3.0]]))
    assert list(path) == [0, 0]
    assert score == pytest.approx(5.0 + model.params["trans"].sum() * 0)
    # single tag: every path is the argmax, so viterbi score equals log_partition
    assert score == pytest.approx(log_partition(model, np.array([[2.0], [3.0]])))


def test_viterbi_invariant_under_position_shift():
    model = _random_model(3, 2, seed=12)
    rng = np.random.default_rng(8)
    emissions = rng.normal(size=(5, 3))
    path, _ = viterbi(model, emissions)
    shifted = emissions.copy()
    shifted[3] += 42.0
    path2, _ = viterbi(model, shifted)
    assert list(path) == list(path2)


def test_viterbi_score_never_exceeds_log_partition():
    rng = np.random.default_rng(21)
    for trial in range(10):
        model = _random_model(3, 2, seed=trial)
        emissions = rng.normal(size=(4, 3))
        _, score = viterbi(model, emissions)
        assert score <= log_partition(model, emissions) + 1e-12


# -- gradients ----------------------------------------------------------------------


def test_nll_on_dominant_gold_path_is_tiny():
    model = CrfModel.create(["T0", "T1"], dim=2, seed=0)
    model.params["trans"][:] = 0.0
    emissions = np.array([[1e3, 0.0], [0.0, 1e3], [1e3, 0.0]])
    nll, _ = nll_and_gradient(model, emissions, np.array([0, 1, 0]))
    assert nll < 1e-6


def test_uniform_model_transition_gradient():
    model = CrfModel.create(["a", "b", "c"], dim=2, seed=0)
    model.params["trans"][:] = 0.0
    _, grads = nll_and_gradient(model, np.zeros((2, 3)), np.array([0, 1]))
    # every interior bigram is equally likely: expectation 1/K^2
    assert grads["trans"][0, 1] == pytest.approx(1 / 9 - 1)
    assert grads["trans"][1, 2] == pytest.approx(1 / 9)


def test_emission_gradient_matches_finite_differences():
    model = _random_model(3, 2, seed=31)
    rng = np.random.default_rng(31)
    emissions = rng.normal(size=(4, 3))
    gold = np.array([0, 2, 1, 1])
    _, grads = nll_and_gradient(model, emissions, gold)
    h = 1e-6
    for t in range(4):
        for k in range(3):
            up = emissions.copy(); up[t, k] += h
            dn = emissions.copy(); dn[t, k] -= h
            fd = (nll_and_gradient(model, up, gold)[0]
                  - nll_and_gradient(model, dn, gold)[0]) / (2 * h)
            assert grads["emissions"][t, k] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def _check_parameter_gradients(model, inst, rel=1e-4):
    _, grads = nll_and_parameter_gradients(model, inst)
    h = 1e-5
    for key, grad in grads.items():
        flat = model.params[key].reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.linspace(0, flat.size - 1, num=min(flat.size, 12), dtype=int)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = nll_and_parameter_gradients(model, inst)[0]
            flat[i] = orig - h
            dn = nll_and_parameter_gradients(model, inst)[0]
            flat[i] = orig
            fd = (up - dn) / (2 * h)
            assert gflat[i] == pytest.approx(fd, rel=rel, abs=1e-7), key


def test_parameter_gradients_static_features():
    model = _random_model(3, 5, seed=41)
    rng = np.random.default_rng(41)
    inst = Instance(["a", "b", "c", "d"], np.array([0, 2, 1, 0]),
                    X=rng.normal(size=(4, 5)))
    _check_parameter_gradients(model, inst)


def test_parameter_gradients_trainable_lookup():
    vocab = ["<unk>", "a", "b", "c"]
    model = _random_model(3, 4, seed=42, vocab=vocab)
    inst = Instance(["a", "b", "zz", "c"], np.array([1, 0, 2, 1]),
                    token_ids=np.array([1, 2, 0, 3]))
    _check_parameter_gradients(model, inst)


def test_parameter_gradients_recurrent_layer():
    model = _random_model(3, 4, seed=43, hidden=3)
    rng = np.random.default_rng(43)
    inst = Instance(["a", "b", "c"], np.array([0, 1, 2]), X=rng.normal(size=(3, 4)))
    _check_parameter_gradients(model, inst)


# -- model construction and instances --------------------------------------------


def test_create_validates_shapes():
    with pytest.raises(CrfError):
        CrfModel(["T0"], 2, {"emission_w": np.zeros((1, 3)),
                             "emission_b": np.zeros(1),
                             "trans": np.zeros((3, 3))})
    with pytest.raises(CrfError):
        CrfModel(["T0"], 2, {"emission_w": np.full((1, 2), np.nan),
                             "emission_b": np.zeros(1),
                             "trans": np.zeros((3, 3))})


def test_build_lookup_vocab_sorted_with_unk_first():
    vocab = build_lookup_vocab([["b", "a"], ["c", "a"]])
    assert vocab == ["<unk>", "a", "b", "c"]


def test_make_instances_maps_oov_to_unk_row():
    vocab = build_lookup_vocab([["a", "b"]])
    model = CrfModel.create(["T0"], dim=3, lookup_vocab=vocab, seed=0)
    insts = make_instances(model, [["a", "zz", "b"]])
    assert list(insts[0].token_ids) == [model.lookup_index["a"], 0,
                                        model.lookup_index["b"]]


def test_make_instances_unknown_tag_location():
    model = CrfModel.create(["T0"], dim=2, seed=0)
    provider = StaticProvider(EmbeddingTable(["a"], np.zeros((1, 2))))
    with pytest.raises(UnknownTag) as err:
        make_instances(model, [["a"], ["a"]], [["T0"], ["BAD"]], provider=provider)
    assert err.value.tag == "BAD"
    assert "sentence 1" in str(err.value)


def test_make_instances_length_mismatch():
    model = CrfModel.create(["T0"], dim=2, seed=0)
    provider = StaticProvider(EmbeddingTable(["a"], np.zeros((1, 2))))
    with pytest.raises(LengthMismatch):
        make_instances(model, [["a", "a"]], [["T0"]], provider=provider)


def test_token_file_provider_validates_alignment():
    blocks = [(["a", "b"], np.zeros((2, 3)))]
    provider = TokenFileProvider(blocks)
    assert provider.features(["a", "b"], 0).shape == (2, 3)
    with pytest.raises(TokenVectorMisalignment):
        provider.features(["a"], 0)
    with pytest.raises(TokenVectorMisalignment):
        provider.features(["a", "x"], 0)
    with pytest.raises(TokenVectorMisalignment):
        provider.features(["a", "b"], 1)


def test_token_vector_file_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    sents = [(["a", "b"], rng.normal(size=(2, 3))), (["c"], rng.normal(size=(1, 3)))]
    p = tmp_path / "vecs.tsv"
    write_token_vectors(p, sents)
    again = read_token_vectors(p)
    assert [t for t, _ in again] == [["a", "b"], ["c"]]
    for (_, got), (_, want) in zip(again, sents):
        assert np.allclose(got, want)


# -- learning-rate schedule ---------------------------------------------------------


def test_lr_schedule_warmup_and_decay():
    total, base = 100, 1.0
    assert lr_at(0, total, base, 0.1) == pytest.approx(0.1)
    assert lr_at(9, total, base, 0.1) == pytest.approx(1.0)
    assert lr_at(total - 1, total, base, 0.1) > 0.0
    assert lr_at(total, total, base, 0.1) == pytest.approx(0.0)
    mid = lr_at(54, total, base, 0.1)  # halfway down the decay slope + rounding
    assert 0.0 < mid < 1.0
    ramp = [lr_at(s, total, base, 0.1) for s in range(10)]
    assert ramp == sorted(ramp)
    tail = [lr_at(s, total, base, 0.1) for s in range(9, 100)]
    assert tail == sorted(tail, reverse=True)


# -- training --------------------------------------------------------------------


def _toy_task(n=30, seed=0):
    rng = np.random.default_rng(seed)
    vocab_by_tag = {"D": ["der", "di"], "N": ["hunt", "kats"], "V": ["zet", "hert"]}
    tags = ["D", "N", "V"]
    sents, golds = [], []
    for _ in range(n):
        length = int(rng.integers(2, 5))
        g = [tags[int(rng.integers(3))] for _ in range(length)]
        w = [vocab_by_tag[t][int(rng.integers(2))] for t in g]
        sents.append(w)
        golds.append(g)
    return sents, golds, tags


def test_zero_epochs_returns_initial_model():
    sents, golds, tags = _toy_task()
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=4, lookup_vocab=vocab, seed=3)
    before = {k: v.copy() for k, v in model.params.items()}
    insts = make_instances(model, sents, golds)
    history = train(model, insts, insts, TrainingConfig(max_epochs=0, seed=0))
    assert history.rows == []
    for k in before:
        assert np.array_equal(model.params[k], before[k])


def test_training_learns_separable_task():
    sents, golds, tags = _toy_task(40)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=6, lookup_vocab=vocab, seed=1)
    insts = make_instances(model, sents, golds)
    history = train(model, insts, insts,
                    TrainingConfig(learning_rate=0.05, batch_size=8,
                                   max_epochs=12, seed=1))
    assert history.best_val_accuracy >= 0.95
    assert token_accuracy(model, insts) >= 0.95


def test_training_is_seed_deterministic():
    sents, golds, tags = _toy_task(20)
    cfg = TrainingConfig(learning_rate=0.05, batch_size=4, max_epochs=4, seed=5)
    runs = []
    for _ in range(2):
        vocab = build_lookup_vocab(sents)
        model = CrfModel.create(tags, dim=4, lookup_vocab=vocab, seed=2)
        insts = make_instances(model, sents, golds)
        history = train(model, insts, insts, cfg)
        runs.append((history.rows, {k: v.copy() for k, v in model.params.items()}))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert np.array_equal(runs[0][1][k], runs[1][1][k])


def test_training_restores_best_epoch_parameters():
    sents, golds, tags = _toy_task(20, seed=3)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=4, lookup_vocab=vocab, seed=0)
    insts = make_instances(model, sents, golds)
    history = train(model, insts, insts,
                    TrainingConfig(learning_rate=0.05, batch_size=4,
                                   max_epochs=6, seed=0))
    assert history.best_val_accuracy == pytest.approx(
        max(r["val_accuracy"] for r in history.rows))
    assert token_accuracy(model, insts) == pytest.approx(history.best_val_accuracy)


def test_history_rows_schema():
    sents, golds, tags = _toy_task(10)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=3, lookup_vocab=vocab, seed=0)
    insts = make_instances(model, sents, golds)
    history = train(model, insts, insts, TrainingConfig(max_epochs=2, seed=0))
    assert len(history.rows) == 2
    assert set(history.rows[0]) == {"epoch", "train_nll", "val_accuracy", "learning_rate"}


def test_unknown_optimizer_rejected():
    sents, golds, tags = _toy_task(4)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=3, lookup_vocab=vocab, seed=0)
    insts = make_instances(model, sents, golds)
    with pytest.raises(CrfError):
        train(model, insts, insts, TrainingConfig(optimizer="sgdm", max_epochs=1))


def test_plain_sgd_also_learns():
    sents, golds, tags = _toy_task(30, seed=6)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=6, lookup_vocab=vocab, seed=1)
    insts = make_instances(model, sents, golds)
    history = train(model, insts, insts,
                    TrainingConfig(learning_rate=0.5, batch_size=8, max_epochs=15,
                                   optimizer="plain-sgd", seed=1))
    assert history.best_val_accuracy >= 0.9


# -- tagging and serialization --------------------------------------------------------


def _trained_toy():
    sents, golds, tags = _toy_task(40)
    vocab = build_lookup_vocab(sents)
    model = CrfModel.create(tags, dim=6, lookup_vocab=vocab, seed=1)
    insts = make_instances(model, sents, golds)
    train(model, insts, insts, TrainingConfig(learning_rate=0.05, batch_size=8,
                                              max_epochs=12, seed=1))
    return model, sents, golds


def test_tag_reproduces_training_data():
    model, sents, golds = _trained_toy()
    tagged = crf.tag(model, sents)
    assert len(tagged) == len(sents)
    correct = sum(tok.tag == g for s, gs in zip(tagged, golds)
                  for tok, g in zip(s, gs))
    total = sum(len(g) for g in golds)
    assert correct / total >= 0.95
    assert all(tok.route == "model" for s in tagged for tok in s)


def test_tag_empty_input():
    model, _, _ = _trained_toy()
    assert crf.tag(model, []) == []


def test_save_load_round_trip(tmp_path):
    model, sents, _ = _trained_toy()
    p = tmp_path / "model.bin"
    save_model(model, p, embedding_source={"kind": "trainable-lookup"},
               inventory_checksum="abc123")
    loaded, meta = load_model(p, inventory_checksum="abc123")
    assert meta["embedding_source"] == {"kind": "trainable-lookup"}
    assert loaded.tags == model.tags
    assert loaded.lookup_vocab == model.lookup_vocab
    for k in model.params:
        assert np.array_equal(loaded.params[k], model.params[k])
    before = [[t.tag for t in s] for s in crf.tag(model, sents)]
    after = [[t.tag for t in s] for s in crf.tag(loaded, sents)]
    assert before == after


def test_load_checksum_mismatch(tmp_path):
    model, _, _ = _trained_toy()
    p = tmp_path / "model.bin"
    save_model(model, p, embedding_source={"kind": "trainable-lookup"},
               inventory_checksum="abc123")
    with pytest.raises(ChecksumMismatch):
        load_model(p, inventory_checksum="zzz")
    loaded, _ = load_model(p)  # no check requested
    assert loaded.tags == model.tags


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not a model file at all")
    with pytest.raises(CrfError):
        load_model(p)


def test_predict_uses_viterbi():
    model, sents, _ = _trained_toy()
    insts = make_instances(model, sents[:5])
    preds = predict(model, insts)
    for inst, tags in zip(insts, preds):
        path, _ = viterbi(model, emission_scores(model, inst))
        assert tags == [model.tags[i] for i in path]
