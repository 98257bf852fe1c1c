"""Disjoint-cluster echo dynamics: group signals, bath products, ensembles.

The engine evolves the central spin together with one carbon group at a
time.  For each group the full Hamiltonian is diagonalized once; the
initial state |a><a| (x) 1/2^g (probed central eigenstate, fully mixed
carbons) is carried as a slab of pure-state columns in the eigenbasis, so
free evolution is a diagonal phase multiply and each pulse a small cached
matrix.  The group signal is

    S_G = 2 Tr[P_a rho_final] - 1,

with P_a the projector onto the initially populated central eigenstate.
Group signals multiply into the bath signal S_T and average over seeded
baths into S_ave.

Pulses are ideal rotations of the probed two-level pair in the frame
resonant with that transition.  The resonant offset enters free evolution
only as a global phase of the relevant block and cancels in S_G, so the
lab-frame Hamiltonian is used directly.  A sequence whose zero-delay
composition returns the population inverted (CPMG, XY8) has its sign
normalized so S(0) = 1 for every echo-type sequence.

tau is the per-arm delay: a Hahn echo at tau evolves for 2*tau in total.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bathgen import Bath, Partition, child_seed, cluster_bath, generate_bath
from .constants import DIAMOND_BOND_NM
from .hamiltonians import NVCenter, P1Center, build_system_hamiltonian
from .pulses import (
    Interval,
    PulseProgram,
    Rotation,
    Schedule,
    canonical_text,
    compile_schedule,
    expand_preset,
)
from .spinops import two_level_unitary

__all__ = [
    "SimulationConfig",
    "EchoCurve",
    "group_signal",
    "bath_signal",
    "ensemble_signal",
    "field_scan",
    "scan_csv",
]

_SCHEMA_VERSION = 1


def _field_tuple(b) -> tuple[float, float, float]:
    arr = np.atleast_1d(np.asarray(b, dtype=float))
    if arr.shape == (1,):
        return (0.0, 0.0, float(arr[0]))
    if arr.shape != (3,):
        raise ValueError("b_field must be a scalar (along z) or a 3-vector, in G")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class SimulationConfig:
    """Everything an ensemble run needs; immutable and fully seeding."""

    central: object = field(default_factory=P1Center)
    b_field: tuple[float, float, float] = (0.0, 0.0, 72.0)
    n_spins: int = 125
    abundance: float = 0.011
    g: int = 3
    n_baths: int = 20
    tau_grid: tuple[float, ...] = ()
    sequence: PulseProgram = field(default_factory=lambda: expand_preset("hahn"))
    master_seed: int = 0
    min_radius: float = DIAMOND_BOND_NM
    lattice: bool = True
    include_nn: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "b_field", _field_tuple(self.b_field))
        grid = tuple(float(t) for t in self.tau_grid)
        if any(t < 0.0 for t in grid):
            raise ValueError("tau_grid entries must be non-negative")
        if any(t2 < t1 for t1, t2 in zip(grid, grid[1:])):
            raise ValueError("tau_grid must be sorted ascending")
        object.__setattr__(self, "tau_grid", grid)
        if self.n_baths < 1:
            raise ValueError("n_baths must be at least 1")
        if self.g < 1:
            raise ValueError("g must be at least 1")
        if self.n_spins < 0:
            raise ValueError("n_spins must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def describe(self) -> dict:
        """JSON-ready echo of the configuration."""
        central = self.central
        info: dict = {"type": type(central).__name__}
        if isinstance(central, P1Center):
            info.update(m_i=central.m_i, jt_label=central.jt.label,
                        jt_axis=list(central.jt.axis),
                        gamma_e_mhz_per_g=central.params.gamma_e,
                        a_par_mhz=central.params.a_par,
                        a_perp_mhz=central.params.a_perp,
                        q_mhz=central.params.q)
        elif isinstance(central, NVCenter):
            info.update(levels=list(central.levels),
                        d_zfs_mhz=central.params.d_zfs,
                        gamma_e_mhz_per_g=central.params.gamma_e)
        else:
            info.update(gamma_e_mhz_per_g=central.gamma_e)
        return {
            "schema_version": _SCHEMA_VERSION,
            "central": info,
            "b_field_gauss": list(self.b_field),
            "n_spins": self.n_spins,
            "abundance": self.abundance,
            "g": self.g,
            "n_baths": self.n_baths,
            "master_seed": self.master_seed,
            "min_radius_nm": self.min_radius,
            "lattice": self.lattice,
            "include_nn": self.include_nn,
            "sequence": canonical_text(self.sequence),
            "sequence_name": self.sequence.name,
        }


@dataclass(frozen=True)
class EchoCurve:
    """Ensemble-averaged echo signal on a tau grid, carrying its config."""

    tau: tuple[float, ...]
    signal: tuple[float, ...]
    per_bath: tuple[tuple[float, ...], ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        signal = tuple(float(s) for s in self.signal)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "signal", signal)
        if len(tau) != len(signal):
            raise ValueError("tau and signal must have equal length")
        if any(abs(s) > 1.0 + 1e-9 for s in signal):
            raise ValueError("signal outside [-1, 1]")
        if self.per_bath is not None:
            pb = tuple(tuple(float(s) for s in row) for row in self.per_bath)
            if any(len(row) != len(tau) for row in pb):
                raise ValueError("per-bath rows must match the tau grid")
            object.__setattr__(self, "per_bath", pb)

    @property
    def tau_us(self) -> tuple[float, ...]:
        return tuple(t * 1e6 for t in self.tau)

    def to_csv(self, include_baths: bool = False) -> str:
        out = io.StringIO()
        header = ["tau_us", "signal"]
        rows = self.per_bath if (include_baths and self.per_bath) else ()
        header += [f"bath_{i:02d}" for i in range(len(rows))]
        out.write(",".join(header) + "\n")
        for k, (t, s) in enumerate(zip(self.tau_us, self.signal)):
            cells = [f"{t:.17g}", f"{s:.17g}"]
            cells += [f"{row[k]:.17g}" for row in rows]
            out.write(",".join(cells) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        import json

        payload = {
            "metadata": self.metadata,
            "tau_us": list(self.tau_us),
            "signal": list(self.signal),
        }
        if self.per_bath is not None:
            payload["per_bath"] = [list(row) for row in self.per_bath]
        return json.dumps(payload, indent=2)


def scan_csv(curves: list[EchoCurve]) -> str:
    """Long-format CSV (b_gauss, tau_us, signal) for a field scan."""
    out = io.StringIO()
    out.write("b_gauss,tau_us,signal\n")
    for curve in curves:
        b = float(np.linalg.norm(curve.metadata.get("b_field_gauss", (0, 0, 0))))
        for t, s in zip(curve.tau_us, curve.signal):
            out.write(f"{b:.17g},{t:.17g},{s:.17g}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# group engine

class _GroupEngine:
    """One central spin + one carbon group, diagonalized once, run many times."""

    def __init__(self, central, group, b_field, *, include_nn=True,
                 secular_hyperfine=False, hyperfine_scale=1.0):
        self.central = central
        self.nb = 1 << len(group)
        hc = central.hamiltonian(b_field)
        wc, vc = np.linalg.eigh(hc)
        ia, ib = central.level_pair(wc, vc)
        self.a = np.ascontiguousarray(vc[:, ia])
        self.b = np.ascontiguousarray(vc[:, ib])
        dc = hc.shape[0]

        h = build_system_hamiltonian(central, group, b_field,
                                     include_nn=include_nn,
                                     secular_hyperfine=secular_hyperfine,
                                     hyperfine_scale=hyperfine_scale)
        self.w, self.v = np.linalg.eigh(h)
        eye_b = np.eye(self.nb, dtype=complex)
        base = np.kron(self.a.reshape(dc, 1), eye_b)
        self.m0 = self.v.conj().T @ base            # initial slab, eigenbasis
        self.row = np.kron(self.a.conj().reshape(1, dc), eye_b) @ self.v
        self._rot_cache: dict = {}
        self._eta_cache: dict = {}

    def _rotation(self, event: Rotation) -> np.ndarray:
        if event.target != "probe":
            raise ValueError(
                f"sequence addresses target {event.target!r}, but this model "
                "evolves only the probed central spin")
        key = (event.axis, event.angle_deg)
        cached = self._rot_cache.get(key)
        if cached is None:
            u2 = two_level_unitary(event.axis, event.angle_rad)
            p = np.stack([self.a, self.b], axis=1)
            uc = np.eye(len(self.a), dtype=complex) \
                + p @ (u2 - np.eye(2)) @ p.conj().T
            ufull = np.kron(uc, np.eye(self.nb, dtype=complex))
            cached = self.v.conj().T @ ufull @ self.v
            self._rot_cache[key] = cached
        return cached

    def _eta(self, schedule: Schedule) -> float:
        # sign normalization from the zero-delay composition on the pair
        pulses = tuple((e.axis, e.angle_deg) for e in schedule.rotations())
        eta = self._eta_cache.get(pulses)
        if eta is None:
            u = np.eye(2, dtype=complex)
            for axis, angle_deg in pulses:
                u = two_level_unitary(axis, np.radians(angle_deg)) @ u
            raw0 = 2.0 * abs(u[0, 0]) ** 2 - 1.0
            eta = -1.0 if raw0 < -0.99 else 1.0
            self._eta_cache[pulses] = eta
        return eta

    def run(self, schedule: Schedule) -> float:
        m = self.m0.copy()
        for event in schedule.events:
            if isinstance(event, Rotation):
                m = self._rotation(event) @ m
            elif isinstance(event, Interval):
                phases = np.exp(-2j * np.pi * self.w * event.duration_s)
                m = phases[:, None] * m
            else:  # pragma: no cover
                raise TypeError(f"unknown schedule event {event!r}")
        amp = self.row @ m
        raw = 2.0 / self.nb * float(np.linalg.norm(amp) ** 2) - 1.0
        return self._eta(schedule) * raw


def _thermal_variants(central):
    """(weight, central) pairs; a thermal nitrogen averages its projections."""
    if isinstance(central, P1Center) and central.m_i is None:
        return [(1.0 / 3.0, replace(central, m_i=m)) for m in (-1, 0, 1)]
    return [(1.0, central)]


def group_signal(central, group, schedule: Schedule, b_field, *,
                 include_nn: bool = True, secular_hyperfine: bool = False,
                 hyperfine_scale: float = 1.0) -> float:
    """Echo signal of the central spin coupled to one carbon group."""
    total = 0.0
    for weight, variant in _thermal_variants(central):
        engine = _GroupEngine(variant, group, b_field, include_nn=include_nn,
                              secular_hyperfine=secular_hyperfine,
                              hyperfine_scale=hyperfine_scale)
        total += weight * engine.run(schedule)
    return total


def bath_signal(central, bath: Bath, partition: Partition,
                schedule: Schedule, b_field, *,
                include_nn: bool = True) -> float:
    """Product of group signals over a partition of the bath.

    With a thermal nitrogen the product is formed per projection and then
    averaged (one physical nitrogen is shared by every group).
    """
    if partition.n_spins != len(bath):
        raise ValueError("partition does not cover this bath")
    total = 0.0
    for weight, variant in _thermal_variants(central):
        product = 1.0
        for grp in partition:
            spins = [bath.spins[i] for i in grp]
            engine = _GroupEngine(variant, spins, b_field,
                                  include_nn=include_nn)
            product *= engine.run(schedule)
        total += weight * product
    return total


def _bath_curve(central, bath: Bath, partition: Partition,
                sequence: PulseProgram, tau_grid, b_field, *,
                include_nn: bool = True) -> np.ndarray:
    """S_T over the tau grid, reusing each group's diagonalization."""
    schedules = [compile_schedule(sequence, tau) for tau in tau_grid]
    total = np.zeros(len(schedules))
    for weight, variant in _thermal_variants(central):
        engines = [
            _GroupEngine(variant, [bath.spins[i] for i in grp], b_field,
                         include_nn=include_nn)
            for grp in partition
        ]
        product = np.ones(len(schedules))
        for engine in engines:
            product *= np.array([engine.run(s) for s in schedules])
        total += weight * product
    return total


def _make_baths(config: SimulationConfig):
    baths = []
    for index in range(config.n_baths):
        seed = child_seed(config.master_seed, index)
        bath = generate_bath(seed, config.n_spins, config.abundance,
                             config.min_radius, lattice=config.lattice)
        baths.append((bath, cluster_bath(bath, config.g)))
    return baths


def _ensemble_curve(config: SimulationConfig, baths) -> EchoCurve:
    rows = [None] * len(baths)

    def work(index: int):
        bath, partition = baths[index]
        rows[index] = _bath_curve(config.central, bath, partition,
                                  config.sequence, config.tau_grid,
                                  config.b_field,
                                  include_nn=config.include_nn)

    if config.workers == 1:
        for index in range(len(baths)):
            work(index)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, range(len(baths))))

    per_bath = np.vstack(rows) if rows else np.zeros((0, len(config.tau_grid)))
    signal = per_bath.mean(axis=0) if len(rows) else np.zeros(0)
    return EchoCurve(
        tau=config.tau_grid,
        signal=tuple(float(s) for s in signal),
        per_bath=tuple(tuple(float(v) for v in row) for row in per_bath),
        metadata=config.describe(),
    )


def ensemble_signal(config: SimulationConfig) -> EchoCurve:
    """Average S_T over n_baths seeded baths; deterministic in master_seed.

    Bath b uses child_seed(master_seed, b), so any bath is replayable in
    isolation.  Worker count changes scheduling only, never the result.
    """
    return _ensemble_curve(config, _make_baths(config))


def field_scan(config: SimulationConfig, b_list) -> list[EchoCurve]:
    """One EchoCurve per field magnitude (G, along z), on shared baths.

    The same seeded baths are reused across fields so rows differ only
    through the field, and each row is bit-identical to a single-field
    run at the same configuration.
    """
    b_values = [float(b) for b in b_list]
    if not b_values:
        raise ValueError("b_list must be non-empty")
    baths = _make_baths(config)
    curves = []
    for b in b_values:
        curves.append(_ensemble_curve(replace(config, b_field=(0.0, 0.0, b)),
                                      baths))
    return curves
