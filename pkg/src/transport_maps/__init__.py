"""Transports along maps in fibre bundles, with numerical checks."""

from .base import ChartDomain, ParamDomain, SmoothMap, identity_map
from .composite import CompositeDomain, FiniteDomain, factorize, reconstruct
from .core import (
    AxiomReport,
    FactorFamily,
    FibreModel,
    Section,
    TransportFamily,
    TransportedSection,
    check_groupoid,
    from_factor_maps,
    gauge_transform,
)
from .density import TensorDensity, density_derivative
from .errors import (
    AxiomError,
    DomainError,
    GaugeError,
    HermiticityError,
    IntegrationError,
    NumericError,
    SignatureError,
    SingularFactorError,
    SmoothnessError,
    TransportError,
)
from .linear import Connection, GammaField, LinearTransportRep, derive_section, gamma_from_H, transport_from_gamma
from .metric import HermitianMetric, metric_from_transport, transport_from_metric
from .morphisms import BundleMorphism, build_consistent_morphism, check_consistency, natural_transport

__version__ = "0.1.0"
