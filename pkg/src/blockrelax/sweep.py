"""Deterministic experiment sweeps over instance grids.

A sweep config is a flat key = value text file; a key given several times
spans a grid axis, and cells are the cartesian product in a fixed key order.
Every trial's randomness is derived from (seed, cell, trial) alone, so results
are independent of worker count and any single trial can be replayed from its
CSV coordinates.  CSV files start with a '# schema=1' comment; wall_time is
always the last column and is the only one allowed to differ between runs.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import success_prob_block_relaxation
from .generate import (
    GenConfig,
    build_instance,
    derive_seed,
    sample_guess_column,
    sample_planted_vector,
    sample_sensing_matrix,
    sample_support,
    substream,
)
from .oracle import ENUMERATION_GUARD, enumerate_selectors
from .solver import (
    SolveOptions,
    certificate_for_instance,
    recovery_check,
    solve_instance,
    solve_weighted_bp,
)

__all__ = [
    "parse_config",
    "SweepPlan",
    "CellResult",
    "run_sweep",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
    "run_comparison",
    "write_comparison_csv",
    "COMPARISON_COLUMNS",
    "wilson_interval",
    "block_match_probability",
    "replay_trial",
]

SCHEMA_COMMENT = "# schema=1"

# grid axes in cell-enumeration order; remaining keys are scalars
_GRID_KEYS = ("m", "n", "theta", "r", "s", "guess_density", "p", "sensing_kind", "support_mode")


def parse_config(text: str) -> dict[str, list[str]]:
    """Flat key = value lines; repeated keys accumulate into grid axes."""
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        k, _, v = line.partition("=")
        out.setdefault(k.strip(), []).append(v.strip())
    return out


def _scalar(cfg: dict[str, list[str]], key: str, default=None) -> str | None:
    vals = cfg.get(key)
    if not vals:
        return default
    if len(vals) > 1:
        raise ValueError(f"key {key!r} must not repeat")
    return vals[0]


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial rate."""
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1.0 + z * z / n
    center = phat + z * z / (2 * n)
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n))
    return (center - half) / denom, (center + half) / denom


@dataclass(frozen=True)
class SweepCell:
    index: int
    gen: GenConfig
    p: float
    trials: int
    seed: int
    oracle: bool
    options: SolveOptions


@dataclass(frozen=True)
class SweepPlan:
    cells: tuple[SweepCell, ...]
    master_seed: int


def _parse_alphabet(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def build_sweep_plan(
    cfg: dict[str, list[str]], seed: int | None = None, trials: int | None = None
) -> SweepPlan:
    """Expand a parsed config into ordered cells.

    ``guess_density`` accepts the literal 's/n' to couple the density to the
    cell's support fraction.
    """
    master_seed = seed if seed is not None else int(_scalar(cfg, "seed", "0"))
    n_trials = trials if trials is not None else int(_scalar(cfg, "trials", "100"))
    oracle = _scalar(cfg, "oracle", "0") in ("1", "true", "on", "yes")
    opts = SolveOptions(
        tol_feas=float(_scalar(cfg, "tol_feas", "1e-8")),
        tol_opt=float(_scalar(cfg, "tol_opt", "1e-8")),
        max_iter=int(_scalar(cfg, "max_iter", "20000")),
    )
    alphabet = _parse_alphabet(_scalar(cfg, "alphabet", "-1,-0.5,0.5,1"))
    guess_law = _scalar(cfg, "guess_law", "ternary")

    axes = []
    for key in _GRID_KEYS:
        if key == "n" and "n" not in cfg:
            axes.append([None])  # n defaults to m per cell
        elif key in cfg:
            axes.append(cfg[key])
        else:
            defaults = {
                "theta": ["2"],
                "r": ["4"],
                "s": ["4"],
                "guess_density": ["0.25"],
                "p": ["0.5"],
                "sensing_kind": ["orthonormal-blocks"],
                "support_mode": ["equidistributed"],
            }
            if key not in defaults:
                raise ValueError(f"config is missing required key {key!r}")
            axes.append(defaults[key])

    cells = []
    for idx, combo in enumerate(itertools.product(*axes)):
        vals = dict(zip(_GRID_KEYS, combo))
        m = int(vals["m"])
        n = int(vals["n"]) if vals["n"] is not None else m
        s = int(vals["s"])
        gd = vals["guess_density"]
        nu = s / n if gd == "s/n" else float(gd)
        gen = GenConfig(
            m=m,
            n=n,
            theta=int(vals["theta"]),
            r=int(vals["r"]),
            s=s,
            sensing_kind=vals["sensing_kind"],
            planted_alphabet=alphabet,
            guess_density=nu,
            support_mode=vals["support_mode"],
            guess_law=guess_law,
            master_seed=0,
        )
        cells.append(
            SweepCell(
                index=idx,
                gen=gen,
                p=float(vals["p"]),
                trials=n_trials,
                seed=derive_seed(master_seed, "cell", idx),
                oracle=oracle,
                options=opts,
            )
        )
    return SweepPlan(cells=tuple(cells), master_seed=master_seed)


@dataclass(frozen=True)
class CellResult:
    cell: SweepCell
    n_exact: int
    n_support_match: int
    n_fail: int
    n_certified: int
    n_error: int
    n_oracle_unique: int | None
    n_oracle_agree: int | None
    wall_time: float

    @property
    def rate_exact(self) -> float:
        return self.n_exact / self.cell.trials

    @property
    def rate_certified(self) -> float:
        return self.n_certified / self.cell.trials


def _sweep_trial(args) -> tuple[int, int, dict]:
    """One trial of one cell; module-level so worker processes can import it."""
    cell, trial = args
    t0 = time.perf_counter()
    out = {
        "exact": 0,
        "support_match": 0,
        "fail": 0,
        "certified": 0,
        "error": 0,
        "oracle_unique": 0,
        "oracle_agree": 0,
        "message": "",
    }
    try:
        gen = cell.gen.with_seed(derive_seed(cell.seed, "trial", trial))
        instance = build_instance(gen)
        result = solve_instance(instance, cell.p, cell.options)
        cert = certificate_for_instance(instance, cell.p)
        verdict = recovery_check(instance, result)
        out[verdict.replace("-", "_")] += 1
        if cert.holds:
            out["certified"] = 1
        if cell.oracle and cell.gen.r**cell.gen.theta <= ENUMERATION_GUARD:
            oracle_res = enumerate_selectors(instance, cell.p, cell.options.tol_feas)
            if oracle_res.unique:
                out["oracle_unique"] = 1
                planted = tuple(int(k) for k in instance.X.planted_cols)
                solver_combo = _support_to_combo(result.detected_support, cell.gen.r, cell.gen.theta)
                if cert.holds and oracle_res.best_combos[0] == planted == solver_combo:
                    out["oracle_agree"] = 1
    except Exception as exc:  # failures are data, not crashes
        out["error"] = 1
        out["message"] = f"{type(exc).__name__}: {exc}"
    out["time"] = time.perf_counter() - t0
    return cell.index, trial, out


def _support_to_combo(support, r: int, theta: int):
    """Detected support as one column per block, or None when not selector-shaped."""
    per_block = [[] for _ in range(theta)]
    for g in support:
        per_block[g // r].append(g % r)
    if any(len(b) != 1 for b in per_block):
        return None
    return tuple(b[0] for b in per_block)


def run_sweep(plan: SweepPlan, jobs: int = 1) -> list[CellResult]:
    """Execute all cells; results do not depend on ``jobs``."""
    work = [(cell, t) for cell in plan.cells for t in range(cell.trials)]
    if jobs <= 1:
        raw = [_sweep_trial(item) for item in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_sweep_trial, work, chunksize=8))
    raw.sort(key=lambda item: (item[0], item[1]))

    results = []
    for cell in plan.cells:
        rows = [out for ci, _, out in raw if ci == cell.index]
        total_time = sum(row["time"] for row in rows)
        results.append(
            CellResult(
                cell=cell,
                n_exact=sum(r["exact"] for r in rows),
                n_support_match=sum(r["support_match"] for r in rows),
                n_fail=sum(r["fail"] for r in rows),
                n_certified=sum(r["certified"] for r in rows),
                n_error=sum(r["error"] for r in rows),
                n_oracle_unique=sum(r["oracle_unique"] for r in rows) if cell.oracle else None,
                n_oracle_agree=sum(r["oracle_agree"] for r in rows) if cell.oracle else None,
                wall_time=total_time,
            )
        )
    return results


SWEEP_COLUMNS = [
    "cell",
    "m",
    "n",
    "theta",
    "r",
    "s",
    "nu",
    "p",
    "sensing_kind",
    "support_mode",
    "guess_law",
    "trials",
    "cell_seed",
    "n_exact",
    "n_support_match",
    "n_fail",
    "n_certified",
    "n_error",
    "n_oracle_unique",
    "n_oracle_agree",
    "rate_exact",
    "exact_lo",
    "exact_hi",
    "rate_cert",
    "cert_lo",
    "cert_hi",
    "wall_time",
]


def _f(v: float) -> str:
    return format(v, ".12g")


def write_sweep_csv(results: list[CellResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for res in results:
            cell = res.cell
            ex_lo, ex_hi = wilson_interval(res.n_exact, cell.trials)
            ct_lo, ct_hi = wilson_interval(res.n_certified, cell.trials)
            writer.writerow(
                [
                    cell.index,
                    cell.gen.m,
                    cell.gen.n,
                    cell.gen.theta,
                    cell.gen.r,
                    cell.gen.s,
                    _f(cell.gen.nu),
                    _f(cell.p),
                    cell.gen.sensing_kind,
                    cell.gen.support_mode,
                    cell.gen.guess_law,
                    cell.trials,
                    cell.seed,
                    res.n_exact,
                    res.n_support_match,
                    res.n_fail,
                    res.n_certified,
                    res.n_error,
                    "" if res.n_oracle_unique is None else res.n_oracle_unique,
                    "" if res.n_oracle_agree is None else res.n_oracle_agree,
                    _f(res.rate_exact),
                    _f(ex_lo),
                    _f(ex_hi),
                    _f(res.rate_certified),
                    _f(ct_lo),
                    _f(ct_hi),
                    _f(res.wall_time),
                ]
            )


def replay_trial(plan: SweepPlan, cell_index: int, trial: int):
    """Re-run a single sweep trial and return its full artifacts."""
    cell = plan.cells[cell_index]
    gen = cell.gen.with_seed(derive_seed(cell.seed, "trial", trial))
    instance = build_instance(gen)
    result = solve_instance(instance, cell.p, cell.options)
    cert = certificate_for_instance(instance, cell.p)
    verdict = recovery_check(instance, result)
    return instance, result, cert, verdict


# -- comparison against the repeated-guessing baseline ------------------------


def block_match_probability(gen: GenConfig) -> float:
    """Probability that one (nonzero-conditioned) guess column equals a hidden block.

    Needs an ensemble whose nonzero guess values are uniform over the planted
    alphabet; with equidistributed supports every block has s hidden entries,
    giving ((nu/|alphabet|)^s (1-nu)^(n-s)) / (1 - (1-nu)^n).
    """
    if gen.support_mode != "equidistributed":
        raise ValueError("analytic match probability needs equidistributed supports")
    if gen.guess_law == "ternary" and any(abs(a) != 1.0 for a in gen.planted_alphabet):
        raise ValueError(
            "ternary guesses can never match alphabet values off {-1, 1}; "
            "use guess_law = alphabet"
        )
    k = 2 if gen.guess_law == "ternary" else len(gen.planted_alphabet)
    nu, n, s = gen.nu, gen.n, gen.s
    p_uncond = (nu / k) ** s * (1.0 - nu) ** (n - s)
    return p_uncond / -math.expm1(n * math.log1p(-nu))


@dataclass(frozen=True)
class ComparisonCell:
    index: int
    gen: GenConfig
    p: float
    trials: int
    seed: int
    options: SolveOptions


@dataclass(frozen=True)
class ComparisonResult:
    cell: ComparisonCell
    p_l: float
    p_select: float
    n_certified: int
    formula_exact: float
    formula_taylor: float
    n_relax: int
    n_bestof: int
    wall_time: float

    @property
    def rate_relax(self) -> float:
        return self.n_relax / self.cell.trials

    @property
    def rate_bestof(self) -> float:
        return self.n_bestof / self.cell.trials

    @property
    def sigma_joint(self) -> float:
        t = self.cell.trials
        v1 = self.rate_relax * (1 - self.rate_relax) / t
        v2 = self.rate_bestof * (1 - self.rate_bestof) / t
        return math.sqrt(v1 + v2)


def build_comparison_plan(
    cfg: dict[str, list[str]], seed: int | None = None, trials: int | None = None
) -> list[ComparisonCell]:
    master_seed = seed if seed is not None else int(_scalar(cfg, "seed", "0"))
    n_trials = trials if trials is not None else int(_scalar(cfg, "trials", "400"))
    opts = SolveOptions(
        tol_feas=float(_scalar(cfg, "tol_feas", "1e-8")),
        tol_opt=float(_scalar(cfg, "tol_opt", "1e-8")),
        max_iter=int(_scalar(cfg, "max_iter", "20000")),
    )
    alphabet = _parse_alphabet(_scalar(cfg, "alphabet", "-1,1"))
    thetas = cfg.get("theta", ["1"])
    rs = cfg.get("r", ["2"])
    cells = []
    for idx, (theta_s, r_s) in enumerate(itertools.product(thetas, rs)):
        m = int(_scalar(cfg, "m", "4"))
        n = int(_scalar(cfg, "n", str(m)))
        gen = GenConfig(
            m=m,
            n=n,
            theta=int(theta_s),
            r=int(r_s),
            s=int(_scalar(cfg, "s", "2")),
            sensing_kind=_scalar(cfg, "sensing_kind", "orthonormal-blocks"),
            planted_alphabet=alphabet,
            guess_density=float(_scalar(cfg, "guess_density", "0.5")),
            support_mode="equidistributed",
            guess_law="alphabet",
            master_seed=0,
        )
        cells.append(
            ComparisonCell(
                index=idx,
                gen=gen,
                p=float(_scalar(cfg, "p", "0.5")),
                trials=n_trials,
                seed=derive_seed(master_seed, "compare-cell", idx),
                options=opts,
            )
        )
    return cells


def _comparison_cell(cell: ComparisonCell) -> ComparisonResult:
    t0 = time.perf_counter()
    gen, p, seed = cell.gen, cell.p, cell.seed
    n, r, theta = gen.n, gen.r, gen.theta
    p_l = block_match_probability(gen)

    n_relax = 0
    for t in range(cell.trials):
        support = sample_support(gen, substream(seed, "rel-support", t))
        x = sample_planted_vector(support, gen, substream(seed, "rel-x", t))
        A = sample_sensing_matrix(gen, substream(seed, "rel-A", t))
        rng = substream(seed, "rel-X", t)
        blocks = [
            np.column_stack([sample_guess_column(gen, rng) for _ in range(r)])
            for _ in range(theta)
        ]
        y = A.matvec(x)
        B = np.hstack([A.blocks[l] @ blocks[l] for l in range(theta)])
        w = np.concatenate([np.sum(np.abs(b) ** p, axis=0) for b in blocks])
        try:
            res = solve_weighted_bp(B, w, y, cell.options)
        except ValueError:
            continue
        # success means the relaxation SELECTS the hidden blocks: the solution
        # must be one column per block and those columns must equal x exactly.
        # Reconstruction alone would also count sign flips (z_l = -1 on a column
        # storing -x^l) and accidental span hits, events the per-column match
        # probability p_l deliberately does not model.
        combo = _support_to_combo(res.detected_support, r, theta)
        if combo is not None and all(
            np.array_equal(blocks[l][:, k], x[l * n : (l + 1) * n])
            for l, k in enumerate(combo)
        ):
            n_relax += 1

    n_bestof = 0
    for t in range(cell.trials):
        support = sample_support(gen, substream(seed, "base-support", t))
        x = sample_planted_vector(support, gen, substream(seed, "base-x", t))
        rng = substream(seed, "base-guess", t)
        hit = False
        for _ in range(r):
            guess = np.concatenate([sample_guess_column(gen, rng) for _ in range(theta)])
            if np.array_equal(guess, x):
                hit = True
        if hit:
            n_bestof += 1

    n_cert = 0
    for t in range(cell.trials):
        inst = build_instance(gen.with_seed(derive_seed(seed, "select", t)))
        if certificate_for_instance(inst, p).holds:
            n_cert += 1
    p_select = n_cert / cell.trials

    return ComparisonResult(
        cell=cell,
        p_l=p_l,
        p_select=p_select,
        n_certified=n_cert,
        formula_exact=success_prob_block_relaxation(p_l, r, theta, p_select),
        formula_taylor=success_prob_block_relaxation(p_l, r, theta, p_select, taylor=True),
        n_relax=n_relax,
        n_bestof=n_bestof,
        wall_time=time.perf_counter() - t0,
    )


def run_comparison(cells: list[ComparisonCell], jobs: int = 1) -> list[ComparisonResult]:
    if jobs <= 1:
        return [_comparison_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_comparison_cell, cells))


COMPARISON_COLUMNS = [
    "cell",
    "m",
    "n",
    "theta",
    "r",
    "s",
    "nu",
    "p",
    "trials",
    "cell_seed",
    "p_l",
    "p_select",
    "formula_exact",
    "formula_taylor",
    "n_relax",
    "rate_relax",
    "n_bestof",
    "rate_bestof",
    "sigma_joint",
    "wall_time",
]


def write_comparison_csv(results: list[ComparisonResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_COMMENT + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for res in results:
            cell = res.cell
            writer.writerow(
                [
                    cell.index,
                    cell.gen.m,
                    cell.gen.n,
                    cell.gen.theta,
                    cell.gen.r,
                    cell.gen.s,
                    _f(cell.gen.nu),
                    _f(cell.p),
                    cell.trials,
                    cell.seed,
                    _f(res.p_l),
                    _f(res.p_select),
                    _f(res.formula_exact),
                    _f(res.formula_taylor),
                    res.n_relax,
                    _f(res.rate_relax),
                    res.n_bestof,
                    _f(res.rate_bestof),
                    _f(res.sigma_joint),
                    _f(res.wall_time),
                ]
            )
