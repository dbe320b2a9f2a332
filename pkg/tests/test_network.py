"""Stack wiring: shortcuts, embedding, head split, state threading."""

import datetime as dt

import numpy as np
import pytest

from loadcast.cells import cell_step, new_state
from loadcast.errors import ConfigError
from loadcast.gradcheck import random_day_inputs
from loadcast.network import (
    DILATIONS,
    HEAD_SIZE,
    HORIZON,
    ModelConfig,
    embed_calendar,
    model_build,
    model_new_state,
    model_step,
    model_unroll,
    validate_calendar,
)
from loadcast.preprocess import CodingVariables, DailyPattern, TrainingSample
from loadcast.tape import Tape


def small_config(variant="drnn", **kw):
    kw.setdefault("hidden_size", 3)
    kw.setdefault("out_size", 3)
    kw.setdefault("embed_size", 4)
    return ModelConfig(cell_variant=variant, **kw)


def zero_all(named_arrays):
    for _, arr in named_arrays:
        arr[:] = 0.0


def make_samples(inputs, start=dt.date(2024, 3, 4), series_id="s1", skip=()):
    samples = []
    for i, ext in enumerate(inputs):
        if i in skip:
            continue
        samples.append(TrainingSample(
            input=ext, target=DailyPattern(np.zeros(HORIZON)),
            coding=CodingVariables(1000.0, 100.0), series_id=series_id,
            target_date=start + dt.timedelta(days=i)))
    return samples


@pytest.mark.parametrize("variant", ["lstm1", "gru2", "dlstm", "drnn", "adrnn"])
def test_step_matches_composition_of_tested_parts(variant):
    rng = np.random.default_rng(1)
    model = model_build(small_config(variant), seed=11)
    inputs = random_day_inputs(rng, 9)

    states = model_new_state(model)
    tape = Tape()
    got = [model_step(model, states, ext, tape) for ext in inputs]

    # independent re-composition from the individually tested pieces
    ref_states = [new_state(c, d) for c, d in zip(model.cells, DILATIONS)]
    ref_tape = Tape()
    for ext, out in zip(inputs, got):
        u1 = np.concatenate([ext.week.values, [ext.level],
                             model.embedding @ ext.calendar_vector()])
        y1 = cell_step(model.cells[0], ref_states[0], ref_tape.leaf(u1), 2)
        y2 = cell_step(model.cells[1], ref_states[1], y1, 4) + y1
        y3 = cell_step(model.cells[2], ref_states[2], y2, 7) + y2
        head = model.head_w @ y3.value + model.head_b
        np.testing.assert_array_equal(out.point.value, head[:HORIZON])
        np.testing.assert_array_equal(out.lower.value, head[HORIZON:2 * HORIZON])
        np.testing.assert_array_equal(out.upper.value, head[2 * HORIZON:])


def test_zero_head_gives_zero_output():
    model = model_build(small_config("adrnn"), seed=3)
    model.head_w[:] = 0.0
    model.head_b[:] = 0.0
    states = model_new_state(model)
    for ext in random_day_inputs(np.random.default_rng(2), 4):
        out = model_step(model, states, ext)
        np.testing.assert_array_equal(out.point.value, 0.0)
        np.testing.assert_array_equal(out.lower.value, 0.0)
        np.testing.assert_array_equal(out.upper.value, 0.0)


def test_zeroed_upper_cells_reduce_to_layer1_plus_head():
    # zero-parameter dilated cells emit zero from zero states, so both
    # shortcuts turn layers 2 and 3 into identities
    model = model_build(small_config("drnn"), seed=4)
    zero_all(model.cells[1].named_arrays())
    zero_all(model.cells[2].named_arrays())
    inputs = random_day_inputs(np.random.default_rng(5), 6)

    states = model_new_state(model)
    ref_state = new_state(model.cells[0], DILATIONS[0])
    tape = Tape()
    for ext in inputs:
        out = model_step(model, states, ext)
        u1 = np.concatenate([ext.week.values, [ext.level],
                             model.embedding @ ext.calendar_vector()])
        y1 = cell_step(model.cells[0], ref_state, tape.leaf(u1), DILATIONS[0])
        head = model.head_w @ y1.value + model.head_b
        np.testing.assert_array_equal(out.point.value, head[:HORIZON])


def test_removing_shortcuts_changes_outputs():
    model = model_build(small_config("drnn"), seed=6)
    inputs = random_day_inputs(np.random.default_rng(7), 3)
    states = model_new_state(model)
    with_short = [model_step(model, states, ext).point.value for ext in inputs]

    bare_states = [new_state(c, d) for c, d in zip(model.cells, DILATIONS)]
    tape = Tape()
    without = []
    for ext in inputs:
        u1 = np.concatenate([ext.week.values, [ext.level],
                             model.embedding @ ext.calendar_vector()])
        y1 = cell_step(model.cells[0], bare_states[0], tape.leaf(u1), 2)
        y2 = cell_step(model.cells[1], bare_states[1], y1, 4)
        y3 = cell_step(model.cells[2], bare_states[2], y2, 7)
        without.append((model.head_w @ y3.value + model.head_b)[:HORIZON])
    diffs = [np.max(np.abs(a - b)) for a, b in zip(with_short, without)]
    assert max(diffs) > 1e-6


def test_unroll_window_of_one_equals_step():
    model = model_build(small_config("dlstm"), seed=8)
    inputs = random_day_inputs(np.random.default_rng(9), 1)
    samples = make_samples(inputs)
    outs, tape = model_unroll(model, model_new_state(model), samples)
    ref = model_step(model, model_new_state(model), inputs[0])
    assert len(outs) == 1
    np.testing.assert_array_equal(outs[0].point.value, ref.point.value)
    np.testing.assert_array_equal(outs[0].upper.value, ref.upper.value)
    assert len(tape) > 0


def test_unroll_rejects_gaps_and_mixed_series():
    model = model_build(small_config(), seed=10)
    inputs = random_day_inputs(np.random.default_rng(10), 5)
    gappy = make_samples(inputs, skip=(2,))
    with pytest.raises(ValueError, match="not contiguous"):
        model_unroll(model, model_new_state(model), gappy)
    mixed = make_samples(inputs)
    object.__setattr__(mixed[3], "series_id", "other")
    with pytest.raises(ValueError, match="series"):
        model_unroll(model, model_new_state(model), mixed)


def test_dilation_reach_through_layer3_buffer():
    model = model_build(small_config(), seed=12)
    inputs = random_day_inputs(np.random.default_rng(13), 10)
    states = model_new_state(model)
    layer3_h = []
    for ext in inputs[:9]:
        model_step(model, states, ext)
        layer3_h.append(np.array(states.layers[2].h_lag(1), copy=True))
    # at the next step the top layer's delayed read is the step-3 state
    delayed = states.layers[2].h_lag(7)
    np.testing.assert_array_equal(delayed, layer3_h[2])


@pytest.mark.parametrize("variant", ["gru1", "drnn", "adrnn"])
def test_each_step_advances_every_layer_once(variant):
    model = model_build(small_config(variant), seed=14)
    states = model_new_state(model)
    inputs = random_day_inputs(np.random.default_rng(15), 8)
    for k, ext in enumerate(inputs, start=1):
        model_step(model, states, ext)
        for layer_state, d in zip(states.layers, DILATIONS):
            assert len(layer_state) == min(k, max(1, d))


def test_same_seed_builds_identical_model():
    a = model_build(small_config("adrnn"), seed=77)
    b = model_build(small_config("adrnn"), seed=77)
    c = model_build(small_config("adrnn"), seed=78)
    for (na, xa), (nb, xb) in zip(a.named_arrays(), b.named_arrays()):
        assert na == nb
        np.testing.assert_array_equal(xa, xb)
    assert any(not np.array_equal(xa, xc)
               for (_, xa), (_, xc) in zip(a.named_arrays(), c.named_arrays()))


def test_reference_and_desk_sizes():
    full = model_build(ModelConfig(), seed=0)
    assert full.config.effective_out_size == 125
    assert full.cells[0].upper.cell_size == 250  # upper hidden + out
    assert full.cells[1].lower.cell_size == 125 + 125  # hidden + input
    assert full.cells[0].lower.cell_size == 125 + (168 + 1 + 16)
    assert full.head_w.shape == (HEAD_SIZE, 125)
    assert full.embedding.shape == (16, 90)

    desk = model_build(ModelConfig(hidden_size=16, embed_size=8), seed=0)
    assert desk.cells[0].upper.cell_size == 32
    assert desk.cells[0].lower.input_size == 168 + 1 + 8

    split = model_build(ModelConfig(cell_variant="dlstm", hidden_size=125), seed=0)
    assert split.cells[1].cell_size == 250
    assert split.cells[1].input_size == 125


def test_config_validation():
    with pytest.raises(ConfigError, match="variant"):
        ModelConfig(cell_variant="rnn")
    with pytest.raises(ConfigError, match="hidden_size"):
        ModelConfig(cell_variant="lstm1", hidden_size=8, out_size=9)
    with pytest.raises(ConfigError):
        ModelConfig(hidden_size=0)
    with pytest.raises(ConfigError):
        ModelConfig(dilations=(2, 4))
    with pytest.raises(ConfigError):
        ModelConfig(dilations=(2, 0, 7))


def test_embedding_is_column_sum_of_one_hots():
    model = model_build(small_config(), seed=16)
    day = dt.date(2024, 5, 15)  # Wednesday, day 15, ISO week 20
    inputs = random_day_inputs(np.random.default_rng(0), 1, start=day)
    cal = inputs[0].calendar_vector()
    emb = embed_calendar(model, cal)
    expected = (model.embedding[:, 2] + model.embedding[:, 7 + 14]
                + model.embedding[:, 38 + 19])
    np.testing.assert_allclose(emb, expected, rtol=0, atol=1e-15)


def test_calendar_validation():
    good = np.zeros(90)
    good[[3, 7 + 10, 38 + 5]] = 1.0
    validate_calendar(good)
    with pytest.raises(ValueError):
        validate_calendar(np.zeros(89))
    bad_value = good.copy()
    bad_value[0] = 2.0
    with pytest.raises(ValueError):
        validate_calendar(bad_value)
    double = good.copy()
    double[4] = 1.0
    with pytest.raises(ValueError):
        validate_calendar(double)
    empty_block = good.copy()
    empty_block[3] = 0.0
    with pytest.raises(ValueError):
        validate_calendar(empty_block)


def test_unroll_tape_supports_backward():
    model = model_build(small_config("adrnn"), seed=17)
    inputs = random_day_inputs(np.random.default_rng(18), 5)
    outs, tape = model_unroll(model, model_new_state(model), make_samples(inputs))
    seeds = [(o.point, np.ones(HORIZON)) for o in outs]
    grads = tape.backward(seeds)
    g_head = grads.of_array(model.head_w)
    assert g_head.shape == model.head_w.shape
    assert np.any(g_head != 0.0)
    g_embed = grads.of_array(model.embedding)
    assert np.any(g_embed != 0.0)
