"""Fictitious-domain finite element solver for fluid-structure interaction.

A 2D saddle-point FEM code coupling an incompressible fluid on a fixed
background box with an immersed elastic solid through a distributed
Lagrange multiplier.  The solid lives on its own mesh; the coupling
matrix is assembled either exactly (by clipping the mapped solid mesh
against the fluid mesh) or inexactly (one quadrature rule per solid
element).  Experiment drivers reproduce shift-robustness, convergence,
condition-number scaling, and a dynamic relaxation benchmark.
"""

__version__ = "0.1.0"
