"""Simulation and estimation of polarization-qubit tomography with chromatic aberration."""

from .states import (
    DensityMatrix,
    Operator,
    StateVector,
    density_from_state,
    fidelity_pure,
    haar_random_state,
    tensor,
)
from .optics import (
    DispersionModel,
    SpectralGrid,
    WavePlateSetting,
    WavePlateSpec,
    basis_unitary,
    birefringence,
    idler_wavelength,
    load_dispersion,
    optical_thickness,
    plate_thickness,
    quartz,
    save_dispersion,
    spectral_grid,
    waveplate_unitary,
)
from .protocols import (
    Arm,
    MeasurementProtocol,
    POVMElement,
    ProtocolSetting,
    angles_for_direction,
    build_protocol,
    fuzzy_povm,
    ideal_projectors,
    make_arm,
    protocol_digest,
    protocol_directions,
    protocol_to_json,
)
from .tomography import (
    CountData,
    ReconstructionResult,
    chi_square_adequacy,
    mle_reconstruct,
    outcome_probabilities,
    sample_counts,
    simulate_counts,
    split_exposures,
)
from .analysis import (
    ExperimentConfig,
    ExperimentResult,
    InfidelityDistribution,
    InformationMatrix,
    PairedComparison,
    efficiency,
    infidelity_distribution,
    information_matrix,
    loss,
    paired_model_comparison,
    protocol_for,
    run_campaign,
    summarize,
    theory_infidelity_samples,
)

__version__ = "0.1.0"
