"""Reduced-rank pilot-aided channel estimation for large-scale MIMO uplinks."""
from .bases import (Basis, TruncatedBasis, basis_dct2, basis_dft, basis_klt, basis_polynomial,
                    coding_gain, make_basis, truncate)
from .channel import (ArrayGeometry, ChannelRealization, ClusterSpec, LargeScaleFading,
                      PilotBlock, SpatialCorrelation, correlation_analytic, correlation_ensemble,
                      draw_channel, make_pilot, steering_vector, synthesize_rx)
from .errors import ConfigError, DomainError, InfeasibleSupportError
from .estimators import (EstimationReport, MatchedFilterOutput, estimate_correlation,
                         estimate_ls, estimate_mmse, estimate_rr_lpm, estimate_rr_regular,
                         matched_filter, search_mean_aoa)
from .rank import Alg2Params, ImodResult, aoa_search_fast, asymptotic_rank, imod
from .spectrum import (ChannelSpectrum, DominantSupport, LpmOperator, bias_matrix,
                       dominant_support, imag_leakage, lpm, optimal_order, theoretical_bias,
                       theoretical_mse, theoretical_variance)

__version__ = "0.1.0"
