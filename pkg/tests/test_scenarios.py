import numpy as np
import pytest

from usc_qed import correlations as corr
from usc_qed.models import GaugeChoice, ModelParams
from usc_qed.scenarios import (Scenario, Truncation, eigenvalue_sweep, figS6_analytic_tables,
                               figure_scenarios, find_level_crossing, ncav_sweep,
                               prepare_model, prepare_scenario, strengths_sweep)


def test_truncation_validation():
    Truncation(8, 16)
    with pytest.raises(ValueError):
        Truncation(8, 17)
    with pytest.raises(ValueError):
        Truncation(1, 1)


def test_prepare_model_small():
    pm = prepare_model(GaugeChoice("dipole", True),
                       ModelParams.from_g_units(0.3, kappa_g=0.25),
                       Truncation(10, 6))
    assert pm.basis.n_keep == 6
    assert pm.x_plus.matrix.shape == (6, 6)
    total = sum(comp for _, comp in pm.resolved_jumps)
    assert np.array_equal(total, pm.x_plus.matrix)


def test_eigenvalue_sweep_shapes_and_growth():
    etas = [0.0, 0.1, 0.2]
    ev = eigenvalue_sweep(etas, n_levels=4, n_fock=40)
    assert ev.shape == (3, 4)
    assert np.all(ev[:, 0] == 0.0)
    # polariton splitting grows with eta
    assert ev[2, 2] - ev[2, 1] > ev[1, 2] - ev[1, 1]


def test_find_level_crossing_location():
    eta_star = find_level_crossing(n_fock=40)
    assert 0.35 <= eta_star <= 0.45
    assert eta_star == pytest.approx(np.sqrt(3) / 4, abs=2e-3)


def test_strengths_sweep_continuity_across_crossing():
    etas = np.arange(0.38, 0.481, 0.01)
    st = strengths_sweep(etas, corrected=True, truncation=Truncation(40, 12))
    for lab in ("I", "II", "III"):
        steps = np.abs(np.diff(st[lab]))
        assert steps.max() < 0.02  # no label-swap jumps through eta* ~ 0.433


def test_ncav_sweep_small():
    vals = ncav_sweep([0.1, 0.2], corrected=True, truncation=Truncation(16, 10))
    assert vals.shape == (2,)
    assert np.all(vals > 0)


def test_scenario_validation_errors():
    with pytest.raises(ValueError):
        Scenario(name="s", outputs=("nonsense",)).validate()
    with pytest.raises(ValueError):
        Scenario(name="s", pump="banana").validate()
    with pytest.raises(ValueError):
        Scenario(name="s", outputs=()).validate()
    with pytest.raises(ValueError):
        Scenario(name="s", omega_points=1).validate()
    with pytest.raises(ValueError):
        Scenario(name="s", outputs=("n_cav",), eta_values=(0.3, 0.2)).validate()
    Scenario(name="ok").validate()


def test_scenario_hash_deterministic():
    a = Scenario(name="x", eta=0.4)
    b = Scenario(name="x", eta=0.4)
    c = Scenario(name="x", eta=0.5)
    assert a.scenario_hash() == b.scenario_hash()
    assert a.scenario_hash() != c.scenario_hash()


def test_scenario_run_eigenvalues_table():
    s = Scenario(name="eig", gauge="jc", outputs=("eigenvalues",),
                 eta_values=(0.05, 0.1), n_fock=10, n_keep=6)
    tables = s.run()
    assert len(tables) == 1
    t = tables[0]
    assert t.independent[0] == "eta"
    assert len(t.series) == 6
    assert t.name == "eig_eigenvalues"


def test_scenario_run_spectrum_small():
    s = Scenario(name="tiny", eta=0.4, kappa_g=0.3, pump="incoherent", P_inc_g=0.01,
                 n_fock=10, n_keep=6, outputs=("spectrum",), omega_points=101)
    tables = s.run()
    assert len(tables) == 1
    grid = tables[0].independent[1]
    vals = tables[0].series[0][1]
    assert len(grid) == 101 and np.all(vals >= 0) and vals.max() > 0


def test_figure_scenarios_registry():
    for fig in ("fig1", "fig2", "fig3", "figS2", "figS3", "figS4", "figS6"):
        bundle = figure_scenarios(fig)
        assert bundle
        for s in bundle:
            s.validate()
    assert len(figure_scenarios("fig2")) == 8
    with pytest.raises(KeyError):
        figure_scenarios("fig7")


def test_figS6_analytic_tables():
    tables = figS6_analytic_tables()
    assert len(tables) == 4
    for t in tables:
        assert len(t.independent[1]) == len(t.series[0][1])
        assert np.all(t.series[0][1] >= 0)


def test_prepare_scenario_none_pump_gives_ground():
    pm = prepare_model(GaugeChoice("dipole", True),
                       ModelParams.from_g_units(0.3, kappa_g=0.25),
                       Truncation(10, 6))
    sc = prepare_scenario(pm)
    assert sc.rho_ss is not None
    assert sc.rho_ss[0, 0].real == pytest.approx(1.0, abs=1e-10)
    assert corr.n_cav(sc.rho_ss, pm.x_plus) < 1e-10
