"""Numerical lab for equivariant Szegő kernels on products of projective spaces."""

__version__ = "0.1.0"

from . import lie_groups, model_geometry, hardy, reduction, asymptotics, immersion  # noqa: E402
from .model_geometry import QuantizedModel, torus_action, su2_action  # noqa: E402
from .hardy import isotype_basis, equivariant_kernel, equivariant_kernel_by_characters  # noqa: E402
from .reduction import locus_point  # noqa: E402

__all__ = [
    "lie_groups", "model_geometry", "hardy", "reduction", "asymptotics", "immersion",
    "QuantizedModel", "torus_action", "su2_action", "isotype_basis", "equivariant_kernel",
    "equivariant_kernel_by_characters", "locus_point", "__version__",
]
