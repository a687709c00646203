"""Finite elements for free fluid flow coupled to a deformable porous medium.

A Stokes region and a linearized poroelastic region (relative fluid
velocity, solid displacement and velocity, pore pressure) exchange mass and
momentum across an interface through a Lagrange multiplier, with slip of
Beavers-Joseph-Saffman type. Time stepping is backward Euler with a direct
sparse solver.
"""
from .errors import (
    ArgumentError,
    BCConflict,
    FormatError,
    FPSIError,
    GeometryError,
    MeshInvalid,
    MeshTangled,
    NumericError,
    OutputError,
    SingularMatrix,
)
from .mesh import Marker, Mesh2D, Region, build_channel_mesh, build_two_block_mesh, load_mesh, move_nodes, refine_uniform, save_mesh
from .quadrature import QuadratureRule, edge_rule, triangle_rule
from .fespace import FunctionSpace, build_space, dirichlet_bcs, evaluate, interpolate
from .assembly import CoupledSpaces, CoupledSystem, MaterialFields, Sources, assemble_load, assemble_system, build_coupled_spaces
from .system import BackwardEuler, EnergyFunctional, Factorization, TransientState, backward_euler_step, factorize

__version__ = "0.1.0"
