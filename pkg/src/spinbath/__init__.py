"""Central-spin decoherence in dilute nuclear-spin baths.

Simulates spin-echo decay of single paramagnetic defects (substitutional
nitrogen and NV centers in diamond) coupled to a random carbon-13 bath,
using the disjoint-cluster factorization, plus the spectroscopy and
statistics helpers needed to interpret such measurements.
"""

from .bathgen import (
    Bath,
    BathSpin,
    Partition,
    child_seed,
    cluster_bath,
    generate_bath,
    pair_coupling,
)
from .constants import (
    GAMMA_C13_HZ_PER_G,
    GAMMA_E_MHZ_PER_G,
    GAMMA_N14_HZ_PER_G,
)
from .dynamics import (
    EchoCurve,
    SimulationConfig,
    bath_signal,
    ensemble_signal,
    field_scan,
    group_signal,
    scan_csv,
)
from .hamiltonians import (
    BareElectron,
    HyperfineTensor,
    JtOrientation,
    NVCenter,
    NVParams,
    P1Center,
    P1Params,
    build_nv_hamiltonian,
    build_p1_hamiltonian,
    build_system_hamiltonian,
    hyperfine_tensor,
)
from .pulses import (
    ParseError,
    PulseProgram,
    Schedule,
    canonical_text,
    compile_schedule,
    expand_preset,
    parse_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "Bath",
    "BathSpin",
    "Partition",
    "child_seed",
    "cluster_bath",
    "generate_bath",
    "pair_coupling",
    "GAMMA_C13_HZ_PER_G",
    "GAMMA_E_MHZ_PER_G",
    "GAMMA_N14_HZ_PER_G",
    "EchoCurve",
    "SimulationConfig",
    "bath_signal",
    "ensemble_signal",
    "field_scan",
    "group_signal",
    "scan_csv",
    "BareElectron",
    "HyperfineTensor",
    "JtOrientation",
    "NVCenter",
    "NVParams",
    "P1Center",
    "P1Params",
    "build_nv_hamiltonian",
    "build_p1_hamiltonian",
    "build_system_hamiltonian",
    "hyperfine_tensor",
    "ParseError",
    "PulseProgram",
    "Schedule",
    "canonical_text",
    "compile_schedule",
    "expand_preset",
    "parse_sequence",
    "__version__",
]
