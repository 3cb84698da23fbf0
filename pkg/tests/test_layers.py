import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vner import numerics as nx
from vner.layers import EmbeddingTable, HighwayUnit, Linear, LstmCell, dropout, embed, highway, lstm_step, \
    run_lstm
from vner.numerics import Tensor
from vner.training import AdamState, adam_step

from conftest import grad_of, leaf, max_fd_error


def zero_cell(d_in, h):
    cell = LstmCell(d_in, h, np.random.default_rng(0), forget_bias=0.0)
    cell.W.data[:] = 0
    cell.b.data[:] = 0
    return cell


class TestLstm:
    def test_zero_weights_zero_state(self):
        cell = zero_cell(3, 2)
        z = Tensor(np.zeros((1, 2)))
        h, c = lstm_step(cell, Tensor(np.ones((1, 3))), z, z)
        np.testing.assert_array_equal(h.data, 0)
        np.testing.assert_array_equal(c.data, 0)

    def test_zero_weights_carry_half_cell(self):
        cell = zero_cell(3, 2)
        v = np.array([[0.7, -1.3]])
        h, c = lstm_step(cell, Tensor(np.ones((1, 3))), Tensor(np.zeros((1, 2))), Tensor(v))
        np.testing.assert_allclose(c.data, 0.5 * v, rtol=1e-15)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * v), rtol=1e-15)

    def test_three_chained_steps_gradcheck(self, rng):
        cell = LstmCell(3, 4, rng)
        cell.b.data += rng.normal(scale=0.1, size=cell.b.shape)
        xs = [leaf(rng, 2, 3) for _ in range(3)]
        w = Tensor(rng.normal(size=(2, 4)))
        loss = lambda: nx.sum_all(nx.mul(run_lstm(cell, xs)[-1], w))
        assert max_fd_error(loss, [cell.W, cell.b, *xs]) <= 1e-4

    def test_weight_shapes(self, rng):
        cell = LstmCell(5, 3, rng)
        assert cell.W.shape == (8, 12) and cell.b.shape == (12,)
        np.testing.assert_array_equal(cell.b.data[3:6], 1.0)

    def test_hidden_in_open_interval(self, rng):
        cell = LstmCell(4, 6, rng)
        cell.W.data *= 10
        hs = run_lstm(cell, [Tensor(rng.normal(scale=5, size=(3, 4))) for _ in range(6)])
        for h in hs:
            assert np.all(np.abs(h.data) < 1)

    def test_masked_rows_keep_state(self, rng):
        cell = LstmCell(2, 3, rng)
        xs = [Tensor(rng.normal(size=(2, 2))) for _ in range(3)]
        mask = np.array([[True, True], [True, False], [True, False]])
        hs = run_lstm(cell, xs, mask)
        np.testing.assert_array_equal(hs[2].data[1], hs[0].data[1])
        alone = run_lstm(cell, [nx.rows(x, 1, 2) for x in xs[:1]])
        np.testing.assert_allclose(hs[0].data[1], alone[0].data[0], rtol=1e-14)

    def test_reverse_with_padding_matches_unpadded(self, rng):
        cell = LstmCell(2, 3, rng)
        data = rng.normal(size=(3, 2, 2))
        mask = np.array([[True, True], [True, True], [True, False]])
        padded = run_lstm(cell, [Tensor(d) for d in data], mask, reverse=True)
        short = run_lstm(cell, [Tensor(d[1:2]) for d in data[:2]], reverse=True)
        for t in range(2):
            np.testing.assert_allclose(padded[t].data[1], short[t].data[0], rtol=1e-14)

    def test_shape_error(self, rng):
        cell = LstmCell(2, 3, rng)
        z = Tensor(np.zeros((1, 3)))
        with pytest.raises(nx.ShapeError):
            lstm_step(cell, Tensor(np.zeros((1, 4))), z, z)


def direct_highway(x, W_H, b_H, W_T, b_T, phi=np.tanh):
    t = 1.0 / (1.0 + np.exp(-(x @ W_T + b_T)))
    return t * phi(x @ W_H + b_H)


class TestHighway:
    def test_zero_parameters_zero_output(self):
        unit = HighwayUnit(4, np.random.default_rng(0))
        for p in unit.named_parameters().values():
            p.data[:] = 0
        np.testing.assert_array_equal(highway(unit, Tensor(np.ones((2, 4)))).data, 0)

    def test_saturated_gate_passes_transform(self, rng):
        unit = HighwayUnit(5, rng)
        unit.b_T.data[:] = 30.0
        unit.W_T.data[:] = 0.0
        x = rng.normal(size=(3, 5))
        np.testing.assert_allclose(highway(unit, Tensor(x)).data, np.tanh(x @ unit.W_H.data + unit.b_H.data),
                                   rtol=0, atol=1e-10)

    def test_matches_direct_and_gradcheck(self, rng):
        unit = HighwayUnit(4, rng)
        unit.b_H.data += rng.normal(size=4)
        unit.b_T.data += rng.normal(size=4)
        x = leaf(rng, 3, 4)
        p = unit
        np.testing.assert_allclose(highway(unit, x).data,
                                   direct_highway(x.data, p.W_H.data, p.b_H.data, p.W_T.data, p.b_T.data),
                                   rtol=1e-13, atol=1e-15)
        w = Tensor(rng.normal(size=(3, 4)))
        params = [x, *unit.named_parameters().values()]
        assert max_fd_error(lambda: nx.sum_all(nx.mul(highway(unit, x), w)), params) <= 1e-4

    def test_carry_variant(self, rng):
        unit = HighwayUnit(3, rng, carry=True)
        x = rng.normal(size=(2, 3))
        t = 1 / (1 + np.exp(-(x @ unit.W_T.data)))
        expect = t * np.tanh(x @ unit.W_H.data) + (1 - t) * x
        np.testing.assert_allclose(highway(unit, Tensor(x)).data, expect, rtol=1e-13)

    @pytest.mark.parametrize("activation,phi", [("relu", lambda v: np.maximum(v, 0)), ("identity", lambda v: v)])
    def test_other_activations(self, rng, activation, phi):
        unit = HighwayUnit(3, rng, activation=activation)
        x = rng.normal(size=(2, 3))
        p = unit
        np.testing.assert_allclose(highway(unit, Tensor(x)).data,
                                   direct_highway(x, p.W_H.data, p.b_H.data, p.W_T.data, p.b_T.data, phi),
                                   rtol=1e-13)

    def test_dimension_preserving_and_gate_range(self, rng):
        unit = HighwayUnit(6, rng)
        x = Tensor(rng.normal(scale=3, size=(10, 6)))
        assert highway(unit, x).shape == (10, 6)
        assert unit.W_H.shape == unit.W_T.shape == (6, 6)
        t = unit.gate(x).data
        assert np.all((t > 0) & (t < 1))

    def test_wrong_width(self, rng):
        with pytest.raises(nx.ShapeError):
            highway(HighwayUnit(3, rng), Tensor(np.ones((1, 4))))


class TestDropout:
    def test_rate_zero_identity(self, rng):
        x = Tensor(rng.normal(size=(3, 3)))
        assert dropout(x, 0.0, True, rng) is x
        assert dropout(x, 0.0, False) is x

    def test_eval_identity(self, rng):
        x = Tensor(rng.normal(size=(3, 3)))
        assert dropout(x, 0.6, False) is x

    def test_inverted_scaling_preserves_mean(self):
        x = Tensor(np.ones((100_000, 1)))
        y = dropout(x, 0.6, True, np.random.default_rng(7)).data
        assert abs(y.mean() - 1.0) < 0.02
        assert set(np.unique(y)) <= {0.0, 2.5}

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(2)), 1.0, True, 0)


class TestEmbedding:
    def test_lookup(self):
        v = np.array([1.0, 2.0, 3.0])
        table = EmbeddingTable(Tensor(np.vstack([v, np.zeros(3)]), requires_grad=True))
        np.testing.assert_array_equal(embed(table, [0]).data, [v])

    def test_repeated_ids_accumulate(self, rng):
        table = EmbeddingTable.random(4, 3, rng)
        (g,) = grad_of(lambda: nx.sum_all(embed(table, [2, 2])), [table.weight])
        np.testing.assert_array_equal(g[2], 2.0)
        np.testing.assert_array_equal(g[[0, 1, 3]], 0.0)

    def test_out_of_range(self, rng):
        with pytest.raises(IndexError):
            embed(EmbeddingTable.random(4, 3, rng), [4])

    def test_frozen_table_unchanged_by_optimizer_step(self, rng):
        table = EmbeddingTable.random(4, 3, rng)
        table.freeze()
        lin = Linear(3, 2, rng)
        before = table.weight.data.copy()
        params = {k: v for k, v in {"emb": table.weight, **lin.named_parameters()}.items()
                  if v.requires_grad}
        grads = grad_of(lambda: nx.sum_all(lin(embed(table, [0, 1, 3]))), list(params.values()))
        adam_step({k: p.data for k, p in params.items()}, dict(zip(params, grads)), AdamState(), 0.1)
        assert "emb" not in params
        assert table.weight.data.tobytes() == before.tobytes()


class TestLinear:
    def test_bias_free(self, rng):
        lin = Linear(3, 2, rng, bias=False)
        assert set(lin.named_parameters()) == {"W"}
        x = rng.normal(size=(4, 3))
        np.testing.assert_allclose(lin(Tensor(x)).data, x @ lin.W.data)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(0, 10_000))
    def test_gradcheck_any_shape(self, d_in, d_out, n, seed):
        rng = np.random.default_rng(seed)
        lin = Linear(d_in, d_out, rng)
        x = leaf(rng, n, d_in)
        assert max_fd_error(lambda: nx.sum_all(nx.tanh(lin(x))), [x, lin.W, lin.b]) <= 1e-6
