"""Batch front-end: JSON problem files in, JSON + text reports out.

Exit codes: 0 success (a verified NON_CSL witness is a success), 2 input
validation, 3 indeterminate results (NON_CSL_SUSPECTED enumeration), 4
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .algebra import ambient_algebra, close_algebra
from .errors import LatticeNotEnumerable, NestlabError
from .factorization import (
    Nest,
    has_factorization_fd,
    logmodularity_gap,
    nest_cholesky,
    triangularize,
    witness_generator,
)
from .lattice import NEST, NON_CSL, NON_CSL_SUSPECTED, compute_lat
from .numerics import ToleranceConfig
from .reflexivity import alg_of, hull_of_lattice, is_reflexive, masa_check
from .twoproj import commutes_iff_no_generic, halmos_decompose

TASKS = (
    "lat",
    "alg",
    "hull",
    "reflexive",
    "factorize",
    "gap",
    "triangularize",
    "halmos",
    "witness",
    "diagnose",
)

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nestlab problem file",
    "type": "object",
    "required": ["version", "ambient", "matrices", "task", "params"],
    "additionalProperties": False,
    "properties": {
        "version": {"type": "string"},
        "ambient": {
            "type": "object",
            "required": ["dim"],
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "block_dims": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "integer", "minimum": 1},
                },
            },
        },
        "matrices": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "minItems": 2,
                        "maxItems": 2,
                        "items": {"type": "number"},
                    },
                },
            },
        },
        "task": {"enum": list(TASKS)},
        "params": {"type": "object"},
    },
}


class ProblemError(Exception):
    """Input validation failure, annotated with a JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def decode_matrix(raw, path: str, dim: int | None = None) -> np.ndarray:
    rows = len(raw)
    cols = len(raw[0])
    for i, row in enumerate(raw):
        if len(row) != cols:
            raise ProblemError(f"{path}[{i}]", f"ragged row: {len(row)} entries, expected {cols}")
    m = np.array([[complex(e[0], e[1]) for e in row] for row in raw], dtype=np.complex128)
    if dim is not None and m.shape != (dim, dim):
        raise ProblemError(path, f"expected a {dim}x{dim} matrix, got {rows}x{cols}")
    return m


def encode_matrix(m: np.ndarray):
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(e.real), float(e.imag)] for e in row] for row in m]


class Problem:
    def __init__(self, raw: dict, tol: ToleranceConfig):
        self.raw = raw
        self.task = raw["task"]
        self.params = raw["params"]
        dim = raw["ambient"]["dim"]
        block_dims = raw["ambient"].get("block_dims", [dim])
        if sum(block_dims) != dim:
            raise ProblemError("$.ambient.block_dims", f"block dims sum to {sum(block_dims)}, not {dim}")
        self.ambient = ambient_algebra(block_dims, tol)
        self.matrices = {}
        for name, raw_m in raw["matrices"].items():
            self.matrices[name] = decode_matrix(raw_m, f"$.matrices.{name}", dim)

    def matrix(self, name, path: str) -> np.ndarray:
        if not isinstance(name, str) or name not in self.matrices:
            raise ProblemError(path, f"undefined matrix name {name!r}")
        return self.matrices[name]

    def matrix_list(self, key: str, required: bool = True):
        names = self.params.get(key)
        if names is None:
            if required:
                raise ProblemError(f"$.params.{key}", "missing required parameter")
            return []
        return [self.matrix(nm, f"$.params.{key}[{i}]") for i, nm in enumerate(names)]

    def projection_list(self, key: str):
        """Projections given by matrix names or coordinate index sets."""
        entries = self.params.get(key)
        if entries is None:
            raise ProblemError(f"$.params.{key}", "missing required parameter")
        n = self.ambient.dim
        out = []
        for i, entry in enumerate(entries):
            path = f"$.params.{key}[{i}]"
            if isinstance(entry, str):
                out.append(self.matrix(entry, path))
            elif isinstance(entry, list):
                p = np.zeros((n, n), dtype=np.complex128)
                for j in entry:
                    if not isinstance(j, int) or not (0 <= j < n):
                        raise ProblemError(path, f"coordinate index {j!r} out of range 0..{n - 1}")
                    p[j, j] = 1.0
                out.append(p)
            else:
                raise ProblemError(path, "expected a matrix name or a list of coordinate indices")
        return out


def load_problem(path: str, tol: ToleranceConfig) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ProblemError("$", f"cannot read input file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemError("$", f"malformed JSON: {exc}") from exc
    validator = Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ProblemError(err.json_path, err.message)
    return Problem(raw, tol)


# ---------------------------------------------------------------------------
# task execution


def _lattice_section(lat):
    section = {
        "classification": lat.classification,
        "complete": lat.complete,
        "element_ranks": [p.rank for p in lat.elements],
        "elements": [encode_matrix(p.matrix) for p in lat.elements],
    }
    if lat.witness is not None:
        section["witness"] = [encode_matrix(w.matrix) for w in lat.witness]
        a, b = lat.witness
        section["witness_commutator_norm"] = float(
            np.linalg.norm(a.matrix @ b.matrix - b.matrix @ a.matrix)
        )
    return section


def _maximal_chain(lat):
    """A maximal chain of the lattice, bottom to top (greedy by rank)."""
    chain = [lat.elements[0]]
    rest = list(lat.elements[1:])
    while rest:
        above = [p for p in rest if chain[-1].leq(p)]
        if not above:
            break
        nxt = min(above, key=lambda p: p.rank)
        chain.append(nxt)
        rest = [p for p in rest if not p.close_to(nxt)]
    return chain


def _algebra_section(algebra):
    return {
        "dimension": algebra.dim,
        "basis": [encode_matrix(b) for b in algebra.basis],
    }


def run_task(problem: Problem, seed: int, budget: int, gap_iters: int, gap_starts: int):
    """Execute the task; returns (result dict, exit code)."""
    task = problem.task
    ambient = problem.ambient

    if task == "lat":
        algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
        lat = compute_lat(algebra, seed=seed, budget=budget)
        code = 3 if lat.classification == NON_CSL_SUSPECTED else 0
        return {"lattice": _lattice_section(lat), "algebra_dimension": algebra.dim}, code

    if task == "alg":
        ps = problem.projection_list("projections")
        algebra = alg_of(ps, ambient)
        return {"algebra": _algebra_section(algebra)}, 0

    if task == "hull":
        algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
        lat = compute_lat(algebra, seed=seed, budget=budget)
        if lat.classification in (NON_CSL, NON_CSL_SUSPECTED):
            return {
                "lattice": _lattice_section(lat),
                "reason": "lattice is not an enumerable CSL; hull not computed",
            }, 3
        hull = hull_of_lattice(algebra, lat)
        return {
            "lattice": _lattice_section(lat),
            "algebra_dimension": algebra.dim,
            "hull": _algebra_section(hull),
        }, 0

    if task == "reflexive":
        algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
        report = is_reflexive(algebra, seed=seed, budget=budget)
        result = {
            "verdict": report.status,
            "extra_dimension": report.extra_dim,
            "lattice": _lattice_section(report.lattice),
        }
        if report.lattice.classification == NON_CSL_SUSPECTED:
            return result, 3
        return result, 0

    if task == "factorize":
        x = problem.matrix(problem.params.get("x"), "$.params.x")
        nest = Nest.from_projections(problem.projection_list("nest"), ambient.tol)
        report = nest_cholesky(x, nest, ambient)
        return {
            "status": report.status,
            "factor": encode_matrix(report.factor),
            "residual": report.residual,
            "membership_residual": report.membership_residual,
            "nest_ranks": nest.ranks(),
        }, 0

    if task == "gap":
        x = problem.matrix(problem.params.get("x"), "$.params.x")
        algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
        report = logmodularity_gap(x, algebra, seed=seed, max_iter=gap_iters, starts=gap_starts)
        result = {
            "status": report.status,
            "residual": report.residual,
            "gap": report.gap,
            "iterations": report.iterations,
            "trace": report.trace,
        }
        if report.factor is not None:
            result["factor"] = encode_matrix(report.factor)
        return result, 0

    if task == "triangularize":
        algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
        u, nest = triangularize(algebra, seed=seed, budget=budget)
        return {
            "unitary": encode_matrix(u),
            "nest_ranks": nest.ranks(),
            "atom_dimensions": nest.atom_dims(),
        }, 0

    if task == "halmos":
        p = problem.matrix(problem.params.get("p"), "$.params.p")
        q = problem.matrix(problem.params.get("q"), "$.params.q")
        dec = halmos_decompose(p, q, ambient.tol)
        commutes = commutes_iff_no_generic(p, q, ambient.tol)
        return {
            "corner_ranks": list(dec.corner_ranks()),
            "generic_dimension": dec.generic_dim,
            "adapted_basis": encode_matrix(dec.adapted_basis),
            "cos_factor": encode_matrix(dec.cos_factor),
            "sin_factor": encode_matrix(dec.sin_factor),
            "commutes": commutes,
        }, 0

    if task == "witness":
        p = problem.matrix(problem.params.get("p"), "$.params.p")
        q = problem.matrix(problem.params.get("q"), "$.params.q")
        mode = problem.params.get("mode")
        if mode not in ("ORTHOGONAL", "COMMUTING", "GENERIC"):
            raise ProblemError("$.params.mode", f"unknown mode {mode!r}")
        epsilon = float(problem.params.get("epsilon", 0.25))
        alpha = float(problem.params.get("alpha", 1.0))
        z, v = witness_generator(p, q, ambient, mode, epsilon=epsilon, alpha=alpha)
        return {
            "witness": encode_matrix(z),
            "partial_isometry": encode_matrix(v),
            "mode": mode,
            "epsilon": epsilon,
            "alpha": alpha,
        }, 0

    if task == "diagnose":
        return run_diagnose(problem, seed, budget, gap_iters, gap_starts)

    raise ProblemError("$.task", f"unknown task {problem.task!r}")


def run_diagnose(problem: Problem, seed: int, budget: int, gap_iters: int, gap_starts: int):
    ambient = problem.ambient
    algebra = close_algebra(problem.matrix_list("generators", required=False), ambient)
    lat = compute_lat(algebra, seed=seed, budget=budget)
    result = {
        "algebra_dimension": algebra.dim,
        "lattice": _lattice_section(lat),
    }
    if lat.classification == NON_CSL_SUSPECTED:
        result["verdict_line"] = "UNRESOLVED (lattice enumeration did not settle)"
        return result, 3
    if lat.classification == NON_CSL:
        result["verdict_line"] = "NON-CSL LATTICE (witness found; factorization: NO)"
        result["factorization"] = {"status": "NO"}
        return result, 0

    hull = hull_of_lattice(algebra, lat)
    reflexive = hull.dim == algebra.dim
    result["hull_dimension"] = hull.dim
    result["reflexive"] = reflexive
    has_masa, masa = masa_check(algebra, seed=seed)
    result["contains_masa"] = has_masa
    if has_masa:
        result["masa_rank_one_projections"] = len(masa)

    verdict = has_factorization_fd(algebra, seed=seed, budget=budget)
    result["factorization"] = {"status": verdict.status, "reason": verdict.reason}

    if lat.classification == NEST:
        nest = Nest.from_projections(lat.elements, ambient.tol)
        u = nest.adapted_basis(ambient.block_dims, ambient.tol)
        result["triangularization"] = {
            "unitary": encode_matrix(u),
            "atom_dimensions": nest.atom_dims(),
        }

    if verdict.verdict:
        # sample factorization along a maximal chain of the lattice
        chain = _maximal_chain(lat)
        nest = Nest.from_projections(chain, ambient.tol)
        rng = np.random.default_rng(seed)
        n = ambient.dim
        h = np.zeros((n, n), dtype=np.complex128)
        for sl in ambient.block_slices():
            d = sl.stop - sl.start
            b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            h[sl, sl] = (b + b.conj().T) / 2.0
        h /= max(np.linalg.norm(h, 2), 1.0)
        x = np.eye(n, dtype=np.complex128) + 0.5 * h
        rep = nest_cholesky(x, nest, ambient)
        result["sample_factorization"] = {
            "residual": rep.residual,
            "membership_residual": rep.membership_residual,
        }

    kind = "NEST ALGEBRA" if lat.classification == NEST else "CSL ALGEBRA"
    result["verdict_line"] = f"{kind} (factorization: {verdict.status})"
    code = 3 if verdict.status == "INDETERMINATE" else 0
    return result, code


# ---------------------------------------------------------------------------
# rendering


def render_text(report: dict) -> str:
    lines = [f"nestlab {report['library_version']}  task={report['task']}  seed={report['seed']}"]
    result = report.get("result", {})
    if "verdict_line" in result:
        lines.append(result["verdict_line"])
    for key in ("status", "classification", "verdict", "reflexive", "contains_masa"):
        if key in result:
            lines.append(f"{key}: {result[key]}")
    lat = result.get("lattice")
    if lat:
        lines.append(
            f"lattice: {lat['classification']} with {len(lat['element_ranks'])} elements, "
            f"ranks {lat['element_ranks']}"
        )
    for key in ("residual", "membership_residual", "gap", "extra_dimension",
                "algebra_dimension", "hull_dimension", "generic_dimension",
                "corner_ranks", "atom_dimensions", "nest_ranks"):
        if key in result and result[key] is not None:
            lines.append(f"{key}: {result[key]}")
    fact = result.get("factorization")
    if fact:
        lines.append(f"factorization: {fact['status']}")
    sample = result.get("sample_factorization")
    if sample:
        lines.append(f"sample factorization residual: {sample['residual']:.3e}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestlab",
        description="Invariant lattices, nest-Cholesky factorization, and "
        "logmodularity diagnostics for matrix algebras.",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} task from a problem file")
        p.add_argument("--input", required=True, help="JSON problem file")
        p.add_argument("--seed", type=int, default=None, help="seed (default: NESTLAB_SEED or 0)")
        p.add_argument("--eq-tol", type=float, default=None, help="override eq_tol")
        p.add_argument("--budget", type=int, default=None, help="sampling budget for compute_lat")
        p.add_argument("--json", dest="json_out", default=None, help="write the JSON report here")
        p.add_argument("--quiet", action="store_true", help="suppress the text report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tol = ToleranceConfig() if args.eq_tol is None else ToleranceConfig(eq_tol=args.eq_tol)

    try:
        problem = load_problem(args.input, tol)
        if problem.task != args.task:
            raise ProblemError("$.task", f"file says {problem.task!r} but subcommand is {args.task!r}")
    except ProblemError as exc:
        print(f"nestlab: input error at {exc.path}: {exc}", file=sys.stderr)
        return 2

    if args.seed is not None:
        seed = args.seed
    elif problem.params.get("seed") is not None:
        seed = int(problem.params["seed"])
    else:
        seed = int(os.environ.get("NESTLAB_SEED", "0"))
    budget = args.budget if args.budget is not None else int(problem.params.get("budget", 64))
    gap_iters = int(problem.params.get("max_iter", 500))
    gap_starts = int(problem.params.get("starts", 8))

    try:
        result, code = run_task(problem, seed, budget, gap_iters, gap_starts)
    except ProblemError as exc:
        print(f"nestlab: input error at {exc.path}: {exc}", file=sys.stderr)
        return 2
    except LatticeNotEnumerable as exc:
        print(f"nestlab: {exc}", file=sys.stderr)
        return 3
    except (NestlabError, np.linalg.LinAlgError) as exc:
        print(f"nestlab: numerical failure: {exc}", file=sys.stderr)
        return 4

    report = {
        "library_version": __version__,
        "task": problem.task,
        "seed": seed,
        "budget": budget,
        "tolerances": {
            "eq_tol": tol.eq_tol,
            "rank_tol": tol.rank_tol,
            "psd_tol": tol.psd_tol,
            "rank_floor": tol.rank_floor,
        },
        "ambient": {
            "dim": problem.ambient.dim,
            "block_dims": list(problem.ambient.block_dims),
        },
        "result": result,
    }
    payload = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    if not args.quiet:
        print(render_text(report))
        if not args.json_out:
            print(payload, end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
