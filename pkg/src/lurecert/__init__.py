"""Certification toolkit for positive linear plants under neural feedback."""

from .certify import (AizermanROA, AizermanVerdict, LinearCertificate, NNCertification,
                      QuadCertificate, RhoSchedule, SublevelResult, aizerman_check,
                      aizerman_roa, linear_certificate, nn_aizerman_certify,
                      quad_certificate, sector_limits, sublevel_roa, vdot)
from .errors import (CertificationFailure, DimensionError, NoSolutionError,
                     NumericalError, SystemFormatError)
from .model import (ACTIVATIONS, FeedforwardNet, LureSystem, PositiveLTI,
                    SectorInterval, demo_plant, demo_system, fixture_net,
                    load_system, nn_eval, save_system, system_from_dict,
                    system_to_dict, write_demo_system)
from .nnbound import (LayerInterval, NetworkSector, SectorBoundState, gamma_search,
                      preactivation_intervals, propagate_sector, relax_activation)
from .numcore import (ConeVector, cone_vector_max_ratio, is_hurwitz, is_metzler,
                      lyapunov_solve, signed_split, spectral_abscissa)
from .sim import (EllipsoidRegion, HalfSpaceRegion, RoaClassification, Trajectory,
                  classify_roa, gamma_scan, integrate, roa_samples_csv,
                  sample_region, trajectory_csv)

__version__ = "0.1.0"
