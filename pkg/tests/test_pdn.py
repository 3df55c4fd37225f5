import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import powertree as pt

MODEL = pt.PdnModel()  # 5 phases, 0.1 W fixed, 0.02 ohm, 1 V


class TestInputPower:
    def test_hand_values_light_load(self):
        assert pt.input_power(MODEL, 1.0, 1) == pytest.approx(1.12, rel=1e-12)
        assert pt.input_power(MODEL, 1.0, 5) == pytest.approx(1.504, rel=1e-12)
        assert pt.efficiency(MODEL, 1.0, 1) == pytest.approx(1 / 1.12, rel=1e-12)

    def test_hand_values_heavy_load(self):
        assert pt.input_power(MODEL, 20.0, 1) == pytest.approx(28.1, rel=1e-12)
        assert pt.input_power(MODEL, 20.0, 5) == pytest.approx(22.1, rel=1e-12)

    def test_zero_load(self):
        assert pt.input_power(MODEL, 0.0, 3) == pytest.approx(0.3, rel=1e-12)
        assert pt.efficiency(MODEL, 0.0, 3) == 0.0

    def test_input_exceeds_load(self):
        for n in range(1, 6):
            for load in (0.0, 0.5, 5.0, 20.0):
                assert pt.input_power(MODEL, load, n) > load

    def test_phase_out_of_range(self):
        with pytest.raises(ValueError):
            pt.input_power(MODEL, 1.0, 0)
        with pytest.raises(ValueError):
            pt.input_power(MODEL, 1.0, 6)

    def test_negative_load_rejected(self):
        with pytest.raises(ValueError):
            pt.input_power(MODEL, -1.0, 1)


class TestBuildLut:
    def test_single_phase_model(self):
        model = pt.PdnModel(max_phases=1)
        lut = pt.build_lut(model, [0.5, 10.0, 20.0])
        assert lut.phases == (1,)
        assert lut.breakpoints == (0.5,)

    def test_matches_brute_force_argmax_everywhere(self):
        grid = np.linspace(0.5, 20.0, 79)
        lut = pt.build_lut(MODEL, grid)
        for p in grid:
            best = max(range(1, 6), key=lambda n: (pt.efficiency(MODEL, p, n), -n))
            assert lut.lookup(p) == best

    def test_light_and_heavy_endpoints(self):
        lut = pt.build_lut(MODEL, np.linspace(0.5, 20.0, 79))
        assert lut.lookup(1.0) == 1
        assert lut.lookup(20.0) == 5

    def test_optimal_phases_non_decreasing_in_load(self):
        loads = np.linspace(0.01, 40.0, 400)
        decisions = [pt.optimal_phases(MODEL, p) for p in loads]
        assert all(b >= a for a, b in zip(decisions, decisions[1:]))

    def test_non_ascending_grid_rejected(self):
        with pytest.raises(ValueError):
            pt.build_lut(MODEL, [1.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            pt.build_lut(MODEL, [5.0])


class TestShed:
    def _lut(self):
        return pt.build_lut(MODEL, np.linspace(0.5, 25.0, 99))

    def test_always_max_phases_improves_nothing(self):
        # heavy loads keep all 5 phases optimal, so savings are zero
        lut = self._lut()
        powers = [20.0, 22.0, 24.0]
        assert all(lut.lookup(p) == 5 for p in powers)
        _, eff = pt.shed(MODEL, lut, powers)
        assert eff == pytest.approx(0.0, abs=1e-15)

    def test_two_period_hand_value(self):
        lut = self._lut()
        decisions, eff = pt.shed(MODEL, lut, [1.0, 20.0])
        assert decisions == [1, 5]
        expect = 1.0 - (1.12 + 22.1) / (1.504 + 22.1)
        assert eff == pytest.approx(expect, rel=1e-9)

    @given(st.lists(st.floats(0.0, 25.0), min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_without_transition_loss(self, powers):
        lut = self._lut()
        _, eff = pt.shed(MODEL, lut, powers)
        assert eff >= -1e-12

    def test_transition_loss_charged_per_change(self):
        model = pt.PdnModel(transition_loss=0.5)
        lut = pt.build_lut(model, np.linspace(0.5, 25.0, 99))
        powers = [1.0, 20.0, 1.0]
        decisions, eff = pt.shed(model, lut, powers)
        assert decisions == [1, 5, 1]
        opt = (pt.input_power(model, 1.0, 1) + pt.input_power(model, 20.0, 5)
               + pt.input_power(model, 1.0, 1) + 2 * 0.5)
        mx = (pt.input_power(model, 1.0, 5) + pt.input_power(model, 20.0, 5)
              + pt.input_power(model, 1.0, 5))
        assert eff == pytest.approx(1.0 - opt / mx, rel=1e-12)

    def test_causal_decisions(self):
        lut = self._lut()
        a, _ = pt.shed(MODEL, lut, [1.0, 5.0, 20.0])
        b, _ = pt.shed(MODEL, lut, [1.0, 5.0, 3.0])
        assert a[:2] == b[:2]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pt.shed(MODEL, self._lut(), [])

    def test_rows_cumulative_improvement(self):
        lut = self._lut()
        powers = [1.0, 20.0, 2.0, 18.0]
        rows = pt.shed_rows(MODEL, lut, powers)
        assert [r[0] for r in rows] == [0, 1, 2, 3]
        _, eff = pt.shed(MODEL, lut, powers)
        assert rows[-1][3] == pytest.approx(eff, rel=1e-12)
        text = pt.shed_table_text(rows)
        assert text.splitlines()[0] == "period,power_w,phases,cumulative_eff_impv"


class TestPersistence:
    def test_model_round_trip(self, tmp_path):
        model = pt.PdnModel(max_phases=4, per_phase_fixed_loss=0.2,
                            conduction_resistance=0.05, output_voltage=0.9,
                            transition_loss=0.01, nominal_power=15.0)
        pt.save_pdn_model(model, tmp_path / "pdn.json")
        assert pt.load_pdn_model(tmp_path / "pdn.json") == model

    def test_lut_round_trip(self, tmp_path):
        lut = pt.build_lut(MODEL, np.linspace(0.5, 25.0, 99))
        pt.save_lut(lut, tmp_path / "lut.json")
        assert pt.load_lut(tmp_path / "lut.json") == lut

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            pt.PdnModel(max_phases=0)
        with pytest.raises(ValueError):
            pt.PdnModel(per_phase_fixed_loss=-0.1)
        with pytest.raises(ValueError):
            pt.PhaseLut((1.0, 0.5), (1, 2))
