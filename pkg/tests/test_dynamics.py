import json

import numpy as np
import pytest

from spinbath.bathgen import Bath, BathSpin, Partition, cluster_bath, generate_bath
from spinbath.constants import GAMMA_C13_HZ_PER_G, GAMMA_E_HZ_PER_G
from spinbath.dynamics import (
    EchoCurve,
    SimulationConfig,
    bath_signal,
    ensemble_signal,
    field_scan,
    group_signal,
    scan_csv,
)
from spinbath.hamiltonians import (
    BareElectron,
    NVCenter,
    P1Center,
    build_system_hamiltonian,
    hyperfine_tensor,
)
from spinbath.pulses import compile_schedule, expand_preset, parse_sequence
from spinbath.spinops import evolve, two_level_unitary


def _spin(x, y, z):
    return BathSpin(position=(x, y, z))


def _eseem_closed_form(position, b, tau):
    """Two-frequency echo modulation of one carbon, secular hyperfine."""
    a = hyperfine_tensor(position, GAMMA_E_HZ_PER_G, GAMMA_C13_HZ_PER_G).a[2, :]
    f_l = GAMMA_C13_HZ_PER_G * b
    w_up = np.array([a[0] / 2.0, a[1] / 2.0, -f_l + a[2] / 2.0])
    w_dn = np.array([-a[0] / 2.0, -a[1] / 2.0, -f_l - a[2] / 2.0])
    nu_up = np.linalg.norm(w_up)
    nu_dn = np.linalg.norm(w_dn)
    k = np.linalg.norm(np.cross(w_up / nu_up, w_dn / nu_dn)) ** 2
    return (1.0 - 2.0 * k * np.sin(np.pi * nu_up * tau) ** 2
            * np.sin(np.pi * nu_dn * tau) ** 2)


@pytest.mark.parametrize("name,n", [("hahn", None), ("cpmg", 2), ("xy8", 1)])
def test_zero_delay_signal_is_unity(name, n):
    group = [_spin(0.5, 0.2, 0.4), _spin(-0.4, 0.6, 0.1)]
    sched = compile_schedule(expand_preset(name, n), tau=0.0)
    for central in (P1Center(), NVCenter(), BareElectron()):
        assert group_signal(central, group, sched, 72.0) == pytest.approx(
            1.0, abs=1e-12)


def test_empty_group_keeps_full_coherence():
    sched = compile_schedule(expand_preset("hahn"), tau=7e-6)
    assert group_signal(NVCenter(), [], sched, 72.0) == pytest.approx(
        1.0, abs=1e-12)


def test_single_carbon_echo_matches_closed_form():
    rng = np.random.default_rng(31)
    taus = np.linspace(0.0, 50e-6, 26)
    prog = expand_preset("hahn")
    for _ in range(6):
        pos = rng.uniform(-1.0, 1.0, size=3)
        if np.linalg.norm(pos) < 0.3:
            pos = pos + 0.5
        b = float(rng.uniform(30.0, 110.0))
        spin = BathSpin(position=tuple(pos))
        for tau in taus:
            got = group_signal(BareElectron(), [spin],
                               compile_schedule(prog, tau), b,
                               secular_hyperfine=True)
            want = _eseem_closed_form(pos, b, tau)
            assert abs(got - want) < 1e-6, (pos, b, tau)


def test_engine_agrees_with_direct_density_matrix_evolution():
    """Replay a schedule by brute force on the full density matrix."""
    central = P1Center()
    group = [_spin(0.5, 0.3, 0.2), _spin(-0.3, 0.4, 0.6)]
    b = 72.0
    nb = 4

    hc = central.hamiltonian(b)
    wc, vc = np.linalg.eigh(hc)
    ia, ib = central.level_pair(wc, vc)
    a_vec, b_vec = vc[:, ia], vc[:, ib]
    h = build_system_hamiltonian(central, group, b)

    pair = np.stack([a_vec, b_vec], axis=1)
    rho0 = np.kron(np.outer(a_vec, a_vec.conj()), np.eye(nb)) / nb
    proj = np.kron(np.outer(a_vec, a_vec.conj()), np.eye(nb))

    for name, n in [("hahn", None), ("cpmg", 2)]:
        prog = expand_preset(name, n)
        sched = compile_schedule(prog, tau=4.7e-6)
        u = np.eye(6 * nb, dtype=complex)
        u_pair0 = np.eye(2, dtype=complex)
        for event in sched.events:
            if hasattr(event, "axis"):
                u2 = two_level_unitary(event.axis, event.angle_rad)
                uc = np.eye(6, dtype=complex) + pair @ (u2 - np.eye(2)) @ pair.conj().T
                u = np.kron(uc, np.eye(nb)) @ u
                u_pair0 = u2 @ u_pair0
            else:
                u = evolve(h, event.duration_s) @ u
        rho = u @ rho0 @ u.conj().T
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        raw = 2.0 * np.trace(proj @ rho).real - 1.0
        eta = -1.0 if (2.0 * abs(u_pair0[0, 0]) ** 2 - 1.0) < -0.99 else 1.0
        want = eta * raw
        got = group_signal(central, group, sched, b)
        assert got == pytest.approx(want, abs=1e-10), name


def test_detached_groups_factorize():
    # two carbons far apart: the joint signal approximately factorizes
    s1, s2 = _spin(0.6, 0.0, 0.4), _spin(-8.0, 7.0, -9.0)
    sched = compile_schedule(expand_preset("hahn"), tau=9e-6)
    joint = group_signal(NVCenter(), [s1, s2], sched, 72.0, include_nn=False)
    split = (group_signal(NVCenter(), [s1], sched, 72.0)
             * group_signal(NVCenter(), [s2], sched, 72.0))
    assert joint == pytest.approx(split, abs=1e-6)


def test_secular_factorization_is_exact():
    # with only S_z I terms every group commutes, so even two nearby
    # carbons factorize to rounding (carbon-carbon coupling off)
    s1, s2 = _spin(0.6, 0.0, 0.4), _spin(0.1, 0.8, -0.3)
    sched = compile_schedule(expand_preset("hahn"), tau=9e-6)
    kw = dict(include_nn=False, secular_hyperfine=True)
    joint = group_signal(BareElectron(), [s1, s2], sched, 72.0, **kw)
    split = (group_signal(BareElectron(), [s1], sched, 72.0, **kw)
             * group_signal(BareElectron(), [s2], sched, 72.0, **kw))
    assert joint == pytest.approx(split, abs=1e-12)


def test_decoupled_bath_shows_no_decay():
    group = [_spin(0.4, 0.2, 0.3), _spin(-0.2, 0.5, 0.1)]
    for tau in (3e-6, 11e-6, 27e-6):
        sched = compile_schedule(expand_preset("hahn"), tau)
        got = group_signal(P1Center(), group, sched, 72.0,
                           hyperfine_scale=0.0)
        assert got == pytest.approx(1.0, abs=1e-12)


def test_signal_stays_in_physical_range():
    rng = np.random.default_rng(8)
    bath = generate_bath(seed=77, n_spins=12)
    part = cluster_bath(bath, g=3)
    for _ in range(5):
        tau = float(rng.uniform(0.0, 40e-6))
        sched = compile_schedule(expand_preset("hahn"), tau)
        for central in (P1Center(), NVCenter()):
            s = bath_signal(central, bath, part, sched, 72.0)
            assert -1.0 - 1e-9 <= s <= 1.0 + 1e-9


def test_thermal_nitrogen_averages_the_projections():
    group = [_spin(0.5, 0.3, 0.2)]
    sched = compile_schedule(expand_preset("hahn"), tau=6e-6)
    fixed = [group_signal(P1Center(m_i=m), group, sched, 72.0)
             for m in (-1, 0, 1)]
    thermal = group_signal(P1Center(m_i=None), group, sched, 72.0)
    assert thermal == pytest.approx(np.mean(fixed), abs=1e-12)
    # the projections genuinely differ, so the average is a real constraint
    assert np.ptp(fixed) > 1e-6


def test_thermal_nitrogen_products_before_averaging():
    # one shared nitrogen: S_T is the product at fixed projection, then the
    # projection average; averaging each group first would be a different
    # (wrong) number
    bath = Bath(spins=(_spin(0.5, 0.3, 0.2), _spin(-0.4, 0.1, 0.5)), seed=0)
    part = Partition(groups=((0,), (1,)), g=1, n_spins=2)
    sched = compile_schedule(expand_preset("hahn"), tau=9e-6)
    got = bath_signal(P1Center(m_i=None), bath, part, sched, 72.0)
    per_m = []
    for m in (-1, 0, 1):
        center = P1Center(m_i=m)
        per_m.append(np.prod([
            group_signal(center, [s], sched, 72.0) for s in bath.spins]))
    assert got == pytest.approx(np.mean(per_m), abs=1e-12)
    wrong = np.prod([
        np.mean([group_signal(P1Center(m_i=m), [s], sched, 72.0)
                 for m in (-1, 0, 1)])
        for s in bath.spins])
    assert abs(got - wrong) > 1e-4


def test_bath_signal_checks_partition_coverage():
    bath = Bath(spins=(_spin(0.5, 0.3, 0.2), _spin(-0.4, 0.1, 0.5)), seed=0)
    part = Partition(groups=((0,),), g=1, n_spins=1)
    sched = compile_schedule(expand_preset("hahn"), tau=1e-6)
    with pytest.raises(ValueError):
        bath_signal(P1Center(), bath, part, sched, 72.0)


def test_target_pulses_are_rejected_by_the_engine():
    sched = compile_schedule(expand_preset("deer"), tau=1e-6)
    with pytest.raises(ValueError, match="target"):
        group_signal(P1Center(), [_spin(0.5, 0.3, 0.2)], sched, 72.0)


def test_ensemble_is_deterministic_and_worker_invariant():
    grid = tuple(np.linspace(0.0, 20e-6, 7))
    base = SimulationConfig(central=NVCenter(), n_spins=10, n_baths=3,
                            tau_grid=grid, master_seed=5)
    c1 = ensemble_signal(base)
    c2 = ensemble_signal(base)
    assert c1.signal == c2.signal
    c4 = ensemble_signal(SimulationConfig(central=NVCenter(), n_spins=10,
                                          n_baths=3, tau_grid=grid,
                                          master_seed=5, workers=4))
    assert c1.signal == c4.signal
    assert c1.per_bath == c4.per_bath
    # different master seed, different baths
    c5 = ensemble_signal(SimulationConfig(central=NVCenter(), n_spins=10,
                                          n_baths=3, tau_grid=grid,
                                          master_seed=6))
    assert c1.signal != c5.signal


def test_ensemble_average_is_bath_mean():
    grid = (0.0, 8e-6, 16e-6)
    curve = ensemble_signal(SimulationConfig(n_spins=8, n_baths=4,
                                             tau_grid=grid, master_seed=2))
    assert len(curve.per_bath) == 4
    mean = np.mean(curve.per_bath, axis=0)
    assert curve.signal == pytest.approx(tuple(mean), abs=1e-15)
    assert curve.signal[0] == pytest.approx(1.0, abs=1e-12)


def test_small_p1_ensemble_revives_at_the_larmor_period():
    # tiny bath, one period: the echo collapses and substantially recovers
    t_l = 1.0 / (GAMMA_C13_HZ_PER_G * 72.0)
    grid = (0.5 * t_l, 0.97 * t_l, t_l, 1.03 * t_l)
    curve = ensemble_signal(SimulationConfig(n_spins=14, n_baths=3,
                                             tau_grid=grid, master_seed=3))
    collapse = curve.signal[0]
    revival = max(curve.signal[1:])
    assert revival > collapse + 0.2
    assert revival > 0.5


def test_field_scan_rows_match_single_runs():
    grid = (0.0, 5e-6, 10e-6)
    config = SimulationConfig(n_spins=8, n_baths=2, tau_grid=grid,
                              master_seed=11)
    curves = field_scan(config, [47.0, 72.0])
    assert len(curves) == 2
    for b, curve in zip((47.0, 72.0), curves):
        single = ensemble_signal(
            SimulationConfig(n_spins=8, n_baths=2, tau_grid=grid,
                             master_seed=11, b_field=(0.0, 0.0, b)))
        assert curve.signal == single.signal
        assert curve.metadata["b_field_gauss"] == [0.0, 0.0, b]
    with pytest.raises(ValueError):
        field_scan(config, [])


def test_scan_csv_long_format():
    grid = (0.0, 5e-6)
    config = SimulationConfig(n_spins=6, n_baths=2, tau_grid=grid,
                              master_seed=1)
    curves = field_scan(config, [47.0, 72.0])
    text = scan_csv(curves)
    lines = text.strip().split("\n")
    assert lines[0] == "b_gauss,tau_us,signal"
    assert len(lines) == 1 + 2 * 2
    first = lines[1].split(",")
    assert float(first[0]) == 47.0
    assert float(first[1]) == 0.0
    assert float(first[2]) == pytest.approx(1.0, abs=1e-9)


def test_simulation_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(tau_grid=(2e-6, 1e-6))
    with pytest.raises(ValueError):
        SimulationConfig(tau_grid=(-1e-6,))
    with pytest.raises(ValueError):
        SimulationConfig(n_baths=0)
    with pytest.raises(ValueError):
        SimulationConfig(g=0)
    with pytest.raises(ValueError):
        SimulationConfig(workers=0)
    with pytest.raises(ValueError):
        SimulationConfig(n_spins=-2)
    assert SimulationConfig(b_field=72.0).b_field == (0.0, 0.0, 72.0)


def test_config_describe_round_trips_to_json():
    config = SimulationConfig(central=P1Center(m_i=None),
                              sequence=expand_preset("cpmg", 2))
    info = json.loads(json.dumps(config.describe()))
    assert info["schema_version"] == 1
    assert info["central"]["type"] == "P1Center"
    assert info["central"]["m_i"] is None
    assert info["central"]["jt_label"] == "off-axis-1"
    assert info["sequence"] == "pi/2(x) - [tau - pi(y) - tau]^2 - pi/2(x)"
    assert info["sequence_name"] == "cpmg"
    nv = SimulationConfig(central=NVCenter()).describe()
    assert nv["central"]["levels"] == [0, -1]


def test_echo_curve_validation_and_serialization():
    with pytest.raises(ValueError):
        EchoCurve(tau=(0.0, 1e-6), signal=(1.0,))
    with pytest.raises(ValueError):
        EchoCurve(tau=(0.0,), signal=(1.5,))
    with pytest.raises(ValueError):
        EchoCurve(tau=(0.0, 1e-6), signal=(1.0, 0.5), per_bath=((1.0,),))

    curve = EchoCurve(tau=(0.0, 2e-6), signal=(1.0, -0.25),
                      per_bath=((1.0, -0.5), (1.0, 0.0)),
                      metadata={"b_field_gauss": [0.0, 0.0, 72.0]})
    assert curve.tau_us == pytest.approx((0.0, 2.0))

    text = curve.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "tau_us,signal"
    assert [float(x) for x in lines[2].split(",")] == [2.0, -0.25]

    wide = curve.to_csv(include_baths=True)
    header = wide.strip().split("\n")[0].split(",")
    assert header == ["tau_us", "signal", "bath_00", "bath_01"]

    payload = json.loads(curve.to_json())
    assert payload["tau_us"] == [0.0, 2.0]
    assert payload["signal"] == [1.0, -0.25]
    assert payload["per_bath"] == [[1.0, -0.5], [1.0, 0.0]]
    assert payload["metadata"]["b_field_gauss"] == [0.0, 0.0, 72.0]


def test_parsed_and_preset_sequences_give_identical_dynamics():
    group = [_spin(0.5, 0.3, 0.2)]
    text = parse_sequence("pi/2(x) - tau - pi(x) - tau - pi/2(x)")
    for tau in (3e-6, 9e-6):
        a = group_signal(P1Center(), group, compile_schedule(text, tau), 72.0)
        b = group_signal(P1Center(), group,
                         compile_schedule(expand_preset("hahn"), tau), 72.0)
        assert a == b
