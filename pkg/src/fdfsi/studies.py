"""Experiment drivers: shift robustness, convergence, conditioning, dynamics.

Every driver writes CSV with full-precision scientific notation (17
significant digits) under a configurable output directory, with stable
filenames:

    shift.csv                              sigma,kind,mode,err_u,err_p,err_X,err_lambda,cond
    converge_<case>_<kind>_<mode>.csv      level,h,err_u,err_p,err_X,err_lambda,cond
    cond_<case>.csv                        level,h,kind,mode,cond   (+ slope summary rows)
    energy.csv                             n,t,E,E_ratio
    cutcells.csv                           n,t,area  (tracked element in the header comment)

Outputs are deterministic for a fixed configuration, seeds included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (
    AssemblyMode,
    CouplingKind,
    assemble_divergence_block,
    assemble_fluid_block,
    assemble_fluid_coupling,
    assemble_rhs,
    assemble_solid_block,
    assemble_solid_coupling,
    combine_blocks,
    BlockSystem,
)
from .cases import ManufacturedCase, get_case, registry
from .femspace import build_dof_map, interpolate
from .geometry import build_background_grid, build_intersection_table
from .solver import (
    FieldErrors,
    error_norms,
    estimate_cond2,
    factorize,
    fit_rate,
    reduce_system,
    solve,
)
from .timestepping import (
    DynamicProblem,
    PhysicalParams,
    advance,
    energy,
    init_state,
    track_cut_cells,
)

PAPER_SHIFTS = (0.0,) + tuple(
    s * 10.0**-j for j in range(3, 16) for s in (1.0, -1.0)
)

KINDS = {"c0": CouplingKind.C0, "c1": CouplingKind.C1}
MODES = {"exact": AssemblyMode.EXACT, "inexact": AssemblyMode.INEXACT}


@dataclass
class StudyConfig:
    """Knobs shared by all study drivers; unused fields are ignored."""

    case: str = "square"
    kind: str = "c0"
    mode: str = "exact"
    levels: int = 4
    sigma: float = 0.0
    sigmas: tuple[float, ...] = PAPER_SHIFTS
    nx: int = 32
    dt: float = 0.1
    t_final: float = 4.0
    out_dir: Path = Path(".")
    seed: int = 0
    with_cond: bool = False
    pressure_fix: str = "augment"
    snapshot_times: tuple[float, ...] = (0.5, 1.0, 4.0)
    cond_max_iter: int = 40000

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if not self.sigmas:
            raise ValueError("the shift list must not be empty")
        if self.kind not in KINDS or self.mode not in MODES:
            raise ValueError("kind must be c0/c1 and mode exact/inexact")


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "nan"
    return f"{v:.16e}"


def _write_csv(path: Path, header: str, rows, comments=()) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for line in comments:
            f.write(f"# {line}\n")
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")
    return path


def level_for_grid(nx: int) -> int:
    """Refinement level whose pressure grid has nx cells per side."""
    level = int(round(math.log2(nx / 8))) + 1
    if nx != 8 * 2 ** (level - 1) or level < 1:
        raise ValueError("grid size must be 8 * 2^k")
    return level


@dataclass
class LevelWorkspace:
    """Meshes, maps, and map-independent matrices for one case level."""

    case: ManufacturedCase
    level: int
    coarse: object = field(init=False)
    half: object = field(init=False)
    solid: object = field(init=False)
    maps: dict = field(init=False)
    grid: object = field(init=False)
    base_blocks: dict = field(init=False)

    def __post_init__(self):
        self.coarse, self.half = self.case.build_fluid(self.level)
        self.solid = self.case.build_solid(self.level)
        self.maps = {
            "velocity": build_dof_map(self.half, "velocity"),
            "pressure": build_dof_map(self.coarse, "pressure"),
            "deformation": build_dof_map(self.solid, "deformation"),
            "multiplier": build_dof_map(self.solid, "multiplier"),
        }
        self.grid = build_background_grid(self.half)
        self.base_blocks = {
            "a_f": assemble_fluid_block(self.half, self.maps["velocity"], self.case.params),
            "a_s": assemble_solid_block(self.solid, self.maps["deformation"], self.case.params),
            "b_f": assemble_divergence_block(
                self.half, self.coarse, self.maps["velocity"], self.maps["pressure"]
            ),
        }
        self._c_s = {}

    def coupling_solid(self, kind: CouplingKind):
        if kind not in self._c_s:
            self._c_s[kind] = assemble_solid_coupling(
                self.solid, self.maps["multiplier"], self.maps["deformation"], kind
            )
        return self._c_s[kind]

    def system(self, case: ManufacturedCase, kind: CouplingKind, mode: AssemblyMode) -> BlockSystem:
        """Assemble the full system for a (possibly shifted) variant of the case."""
        xbar = interpolate(case.xbar, self.maps["deformation"], self.solid)
        table = build_intersection_table(self.solid, xbar.nodal(), self.half, self.grid)
        c_f = assemble_fluid_coupling(
            self.solid, xbar, self.half, self.maps["multiplier"], self.maps["velocity"],
            kind, mode, table=table, grid=self.grid,
        )
        c_s = self.coupling_solid(kind)
        matrix = combine_blocks(
            self.base_blocks["a_f"], self.base_blocks["a_s"], self.base_blocks["b_f"], c_s, c_f
        )
        rhs = assemble_rhs(case, self.half, self.solid, self.maps, xbar, table, kind)
        u_bc = interpolate(case.u, self.maps["velocity"], self.half).values.copy()
        u_bc[~self.maps["velocity"].constrained] = 0.0
        return BlockSystem(
            self.base_blocks["a_f"], self.base_blocks["a_s"], self.base_blocks["b_f"],
            c_s, c_f, matrix, rhs,
            self.maps["velocity"], self.maps["pressure"],
            self.maps["deformation"], self.maps["multiplier"], u_bc,
        )


def run_point(
    workspace: LevelWorkspace,
    case: ManufacturedCase,
    kind: CouplingKind,
    mode: AssemblyMode,
    pressure_fix: str = "augment",
    with_cond: bool = False,
    cond_seed: int = 0,
    cond_max_iter: int = 40000,
) -> tuple[FieldErrors, float]:
    """Solve one configuration; optionally estimate its condition number."""
    system = workspace.system(case, kind, mode)
    reduced = reduce_system(system, workspace.coarse, pressure_fix)
    factor = factorize(reduced.matrix, reduced.border)
    sol = solve(reduced, factor=factor)
    errors = error_norms(sol, case, workspace.coarse, workspace.half, workspace.solid, kind)
    cond = float("nan")
    if with_cond:
        est = estimate_cond2(
            reduced.matrix, factor=factor, seed=cond_seed, max_iter=cond_max_iter
        )
        cond = est.cond2
    return errors, cond


def run_shift_study(config: StudyConfig) -> Path:
    """Errors and conditioning of the shifted square across interface shifts.

    All four (kind, mode) combinations run at a fixed grid for each
    shift; the point of the study is that none of the reported numbers
    depend on the shift.
    """
    level = level_for_grid(config.nx)
    base = get_case("square")
    workspace = LevelWorkspace(base, level)
    rows = []
    for sigma in config.sigmas:
        case = get_case("square", sigma=sigma)
        for kind_name, kind in KINDS.items():
            for mode_name, mode in MODES.items():
                errors, cond = run_point(
                    workspace, case, kind, mode,
                    pressure_fix=config.pressure_fix, with_cond=True,
                    cond_seed=config.seed, cond_max_iter=config.cond_max_iter,
                )
                rows.append(
                    (
                        _fmt(sigma), kind_name, mode_name,
                        _fmt(errors.u), _fmt(errors.p), _fmt(errors.X), _fmt(errors.lam),
                        _fmt(cond),
                    )
                )
    return _write_csv(
        config.out_dir / "shift.csv",
        "sigma,kind,mode,err_u,err_p,err_X,err_lambda,cond",
        rows,
    )


def run_convergence_study(config: StudyConfig) -> Path:
    """Errors per refinement level for one case / kind / mode."""
    case = get_case(config.case, sigma=config.sigma)
    kind = KINDS[config.kind]
    mode = MODES[config.mode]
    rows = []
    for level in range(1, config.levels + 1):
        workspace = LevelWorkspace(case, level)
        errors, cond = run_point(
            workspace, case, kind, mode,
            pressure_fix=config.pressure_fix, with_cond=config.with_cond,
            cond_seed=config.seed, cond_max_iter=config.cond_max_iter,
        )
        rows.append(
            (
                str(level), _fmt(case.fluid_h(level)),
                _fmt(errors.u), _fmt(errors.p), _fmt(errors.X), _fmt(errors.lam),
                _fmt(cond),
            )
        )
    name = f"converge_{config.case}_{config.kind}_{config.mode}.csv"
    return _write_csv(
        config.out_dir / name,
        "level,h,err_u,err_p,err_X,err_lambda,cond",
        rows,
    )


def run_cond_study(config: StudyConfig) -> Path:
    """Condition number vs mesh size for all four coupling variants.

    One summary row per (kind, mode) carries the fitted log-log slope.
    """
    case = get_case(config.case)
    rows = []
    values: dict[tuple[str, str], list[float]] = {}
    hs = []
    for level in range(1, config.levels + 1):
        workspace = LevelWorkspace(case, level)
        h = case.fluid_h(level)
        hs.append(h)
        for kind_name, kind in KINDS.items():
            for mode_name, mode in MODES.items():
                system = workspace.system(case, kind, mode)
                reduced = reduce_system(system, workspace.coarse, config.pressure_fix)
                est = estimate_cond2(
                    reduced.matrix, border=reduced.border,
                    seed=config.seed, max_iter=config.cond_max_iter,
                )
                values.setdefault((kind_name, mode_name), []).append(est.cond2)
                rows.append((str(level), _fmt(h), kind_name, mode_name, _fmt(est.cond2)))
    for (kind_name, mode_name), conds in values.items():
        if len(conds) >= 3:
            slope = fit_rate(conds, hs)
            rows.append(("slope", "nan", kind_name, mode_name, _fmt(slope)))
    return _write_csv(
        config.out_dir / f"cond_{config.case}.csv",
        "level,h,kind,mode,cond",
        rows,
    )


def run_time_study(config: StudyConfig) -> tuple[Path, Path]:
    """Dynamic annulus benchmark: energy trace, cut-cell areas, snapshots.

    The step-0 energy row follows the reporting convention of zeroing
    the (undefined) previous deformation, which front-loads the solid
    kinetic term; later rows use the actual history.  The tracked solid
    element is drawn from the recorded seed.
    """
    params = PhysicalParams(dt=config.dt, t_final=config.t_final)
    problem = DynamicProblem.build(
        params, n=config.nx, kind=KINDS[config.kind], mode=MODES[config.mode],
        pressure_fix=config.pressure_fix,
    )
    rng = np.random.default_rng(config.seed)
    tracked = int(rng.integers(problem.solid.n_triangles))

    state = init_state(problem)
    n_steps = int(round(config.t_final / config.dt))
    snap_left = sorted(t for t in config.snapshot_times if t <= config.t_final + 1e-12)

    e0 = energy(problem, state, zero_history=True)
    energy_rows = [("0", _fmt(0.0), _fmt(e0), _fmt(1.0))]
    cut_rows = [("0", _fmt(0.0), _fmt(a)) for a in track_cut_cells(state, tracked)]

    def maybe_snapshot(state):
        while snap_left and state.time >= snap_left[0] - 0.5 * config.dt:
            t = snap_left.pop(0)
            tag = f"{t:g}".replace(".", "p")
            for name, vec in (("u", state.u), ("p", state.p), ("X", state.X)):
                np.savetxt(
                    config.out_dir / f"snapshot_t{tag}_{name}.txt",
                    vec.values,
                    header=f"{name} coefficients at t={state.time:.17g}",
                )

    config.out_dir.mkdir(parents=True, exist_ok=True)
    maybe_snapshot(state)
    for _ in range(n_steps):
        state = advance(problem, state)
        e = energy(problem, state)
        energy_rows.append((str(state.step), _fmt(state.time), _fmt(e), _fmt(e / e0)))
        cut_rows.extend(
            (str(state.step), _fmt(state.time), _fmt(a))
            for a in track_cut_cells(state, tracked)
        )
        maybe_snapshot(state)

    energy_path = _write_csv(config.out_dir / "energy.csv", "n,t,E,E_ratio", energy_rows)
    cut_path = _write_csv(
        config.out_dir / "cutcells.csv",
        "n,t,area",
        cut_rows,
        comments=(f"seed={config.seed} element={tracked}",),
    )
    return energy_path, cut_path


def describe_cases() -> str:
    lines = []
    for case in registry():
        p = case.params
        lines.append(
            f"{case.name:8s} alpha={p.alpha:g} beta={p.beta:g} gamma={p.gamma:g} "
            f"nu={p.nu:g}  {case.solid_geometry.kind.value}  ({case.notes})"
        )
    return "\n".join(lines)
