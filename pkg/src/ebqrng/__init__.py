"""Self-testing quantum random number generation under an energy bound.

Simulates a prepare-and-measure interferometric setup, checks the observed
click correlations against the classical limit implied by a mean-photon
bound, certifies smooth min-entropy per block through a linear witness with
finite-size corrections, and extracts near-uniform bits with seeded
Toeplitz hashing. Hot kernels run in a compiled extension when available,
with a bit-identical numpy fallback.
"""
from .backend import available_backends, get_backend, set_backend
from .boundary import (classical_bound, classical_lhs, classical_max_lhs,
                       is_violation, scan_violation_region, setup_inequality)
from .certify import (binary_entropy, certified_min_entropy,
                      correlator_certificate, device_shannon_entropy,
                      finite_size_rate, honest_entropy_heatmap,
                      honest_shannon_entropy, pass_test,
                      soundness_accounting, witness_sigma, witness_value)
from .extractor import (output_length, read_packed_bits, seed_length,
                        toeplitz_extract, write_packed_bits)
from .model import (CertificateError, CertifiedBlock, CorrelationCounts,
                    DeviceParams, EnergyBounds, FrequencyTable, RoundRecord,
                    WitnessCertificate, counts_to_frequencies,
                    load_device_params, load_energy_bounds,
                    load_witness_certificate, validate_certificate)
from .optics import (DriftModel, conditional_probabilities,
                     correlation_function, correlation_sigma,
                     mean_photon_number, no_click_probability, sample_block,
                     scan_correlation_vs_phase)
from .pipeline import (MonitorRecord, MonitorResult, ProtocolConfig,
                       ProtocolResult, certify_counts, emit_figures,
                       ingest_round_log, load_config, monitor,
                       nominal_rates, run_protocol, write_output_bits,
                       write_report)
from .roundlog import RoundLog, RoundLogError, RoundLogReader, scan_counts

__version__ = "0.1.0"

__all__ = [
    "available_backends", "get_backend", "set_backend",
    "classical_bound", "classical_lhs", "classical_max_lhs", "is_violation",
    "scan_violation_region", "setup_inequality",
    "binary_entropy", "certified_min_entropy", "correlator_certificate",
    "device_shannon_entropy", "finite_size_rate", "honest_entropy_heatmap",
    "honest_shannon_entropy", "pass_test", "soundness_accounting",
    "witness_sigma", "witness_value",
    "output_length", "read_packed_bits", "seed_length", "toeplitz_extract",
    "write_packed_bits",
    "CertificateError", "CertifiedBlock", "CorrelationCounts",
    "DeviceParams", "EnergyBounds", "FrequencyTable", "RoundRecord",
    "WitnessCertificate", "counts_to_frequencies", "load_device_params",
    "load_energy_bounds", "load_witness_certificate", "validate_certificate",
    "DriftModel", "conditional_probabilities", "correlation_function",
    "correlation_sigma", "mean_photon_number", "no_click_probability",
    "sample_block", "scan_correlation_vs_phase",
    "MonitorRecord", "MonitorResult", "ProtocolConfig", "ProtocolResult",
    "certify_counts", "emit_figures", "ingest_round_log", "load_config",
    "monitor", "nominal_rates", "run_protocol", "write_output_bits",
    "write_report",
    "RoundLog", "RoundLogError", "RoundLogReader", "scan_counts",
    "__version__",
]
