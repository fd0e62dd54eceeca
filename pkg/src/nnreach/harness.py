"""Experiment drivers behind the CLI: comparison sweeps, theory checks, arm demo."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .arm import JOINT_BOX, fit_arm_network
from .errors import UndefinedErrorMetric
from .geometry import Shape, estimate_error
from .network import Box, Network, load_network, random_network, rng_from_seed, save_network, truth_samples
from .partition import AnalyzerConfig, Partitioner, analyze
from .propagators import Propagator
from .theory import SplitSpec, optimal_ratio_scan, repeated_split_reduction, vred_brute, vred_closed_form

log = logging.getLogger(__name__)

TRUTH_SAMPLES = 10_000
TRUTH_SEED_OFFSET = 1_000_003
CONTAIN_TOL = 1e-9


def truth_seed(seed: int) -> int:
    """Seed for the dense reference sample, disjoint from the [u_sim] seed."""
    return seed + TRUTH_SEED_OFFSET


def parse_box(text: str) -> Box:
    """Parse ``"lo,hi;lo,hi;..."`` into a Box."""
    try:
        intervals = [[float(v) for v in dim.split(",")] for dim in text.strip().split(";") if dim.strip()]
    except ValueError as exc:
        raise ValueError(f"bad box {text!r}: {exc}") from exc
    if not intervals or any(len(iv) != 2 for iv in intervals):
        raise ValueError(f"bad box {text!r}: expected 'lo,hi;lo,hi;...'")
    return Box.from_intervals(intervals)


def safe_error(estimate, truth, shape) -> Optional[float]:
    try:
        return estimate_error(estimate, truth, shape)
    except UndefinedErrorMetric:
        return None


# -- comparison sweeps -------------------------------------------------------

@dataclass(frozen=True)
class CompareSpec:
    pairs: tuple
    seeds: tuple
    budgets: tuple
    input_box: Box
    shape: Shape = Shape.CONVEX_HULL
    budget_axis: str = "calls"
    net_path: Optional[str] = None
    random_sizes: Optional[tuple] = None
    activation: str = "relu"
    samples: int = 1000
    truth_samples: int = TRUTH_SAMPLES
    eps: Optional[float] = None
    uniform_k: int = 4

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("compare spec needs at least one (propagator, partitioner) pair")
        if not self.seeds:
            raise ValueError("compare spec needs at least one seed")
        if not self.budgets:
            raise ValueError("compare spec needs at least one budget")
        if self.budget_axis not in ("calls", "time"):
            raise ValueError("budget_axis must be 'calls' or 'time'")
        if (self.net_path is None) == (self.random_sizes is None):
            raise ValueError("compare spec needs exactly one of a network path or a random architecture")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "CompareSpec":
        net = data.get("net")
        net_path = random_sizes = None
        activation = "relu"
        if isinstance(net, str):
            net_path = str((base_dir / net).resolve())
        elif isinstance(net, dict) and "random" in net:
            random_sizes = tuple(int(s) for s in net["random"])
            activation = net.get("activation", "relu")
        else:
            raise ValueError('"net" must be a path or {"random": [sizes...]}')
        box = data.get("input_box", [[0, 1], [0, 1]])
        box = parse_box(box) if isinstance(box, str) else Box.from_intervals(box)
        pairs = tuple((Propagator(p), Partitioner(q)) for p, q in data.get("pairs", []))
        return cls(
            pairs=pairs,
            seeds=tuple(int(s) for s in data.get("seeds", [])),
            budgets=tuple(int(b) for b in data.get("budgets", [500])),
            input_box=box,
            shape=Shape.parse(data.get("shape", "convex-hull")),
            budget_axis=data.get("budget_axis", "calls"),
            net_path=net_path,
            random_sizes=random_sizes,
            activation=activation,
            samples=int(data.get("samples", 1000)),
            truth_samples=int(data.get("truth_samples", TRUTH_SAMPLES)),
            eps=data.get("eps"),
            uniform_k=int(data.get("uniform_k", 4)),
        )

    def network(self, seed: int) -> Network:
        if self.net_path is not None:
            return load_network(self.net_path)
        return random_network(self.random_sizes, self.activation, seed)


CSV_FIELDS = ["pair", "propagator", "partitioner", "seed", "budget", "calls", "partitions", "error", "time_ms"]


def run_compare(spec: CompareSpec) -> list[dict]:
    rows = []
    for seed in spec.seeds:
        net = spec.network(seed)
        truth = truth_samples(net, spec.input_box, spec.truth_samples, truth_seed(seed))
        for (prop, part), budget in itertools.product(spec.pairs, spec.budgets):
            budget_kw = {"budget_calls": budget} if spec.budget_axis == "calls" else {"budget_time_ms": budget}
            cfg = AnalyzerConfig(prop, part, spec.shape, num_samples=spec.samples, sample_seed=seed,
                                 eps=spec.eps, uniform_k=spec.uniform_k, **budget_kw)
            result = analyze(net, spec.input_box, cfg)
            rows.append({
                "pair": f"{prop.value}+{part.value}",
                "propagator": prop.value,
                "partitioner": part.value,
                "seed": seed,
                "budget": budget,
                "calls": result.propagator_calls,
                "partitions": result.partitions,
                "error": safe_error(result.estimate, truth, spec.shape),
                "time_ms": result.wall_time_ms,
            })
    rows.sort(key=lambda r: (r["pair"], r["seed"], r["budget"]))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_FIELDS})
    return buf.getvalue()


# -- theory sweep ------------------------------------------------------------

REL_TOL = 1e-9
ABS_FLOOR = 1e-12
FIXED_V = [[2.0, 1.0], [3.0, 1.0]]
EPS = float(np.finfo(np.float64).eps)
TWO_OUTPUT_ULPS = 4


def close_enough(a: float, b: float, rel=REL_TOL, floor=ABS_FLOOR) -> bool:
    return abs(a - b) <= max(floor, rel * max(abs(a), abs(b)))


def _case(V, spec: SplitSpec) -> dict:
    closed = vred_closed_form(V, spec)
    brute = vred_brute(V, spec)
    return {
        "V": np.asarray(V, dtype=float).tolist(),
        "dim_index": spec.dim_index,
        "r": spec.ratio,
        "closed_form": closed,
        "brute": brute,
        "abs_diff": abs(closed - brute),
        "ok": close_enough(closed, brute) and closed >= -ABS_FLOOR and brute >= -ABS_FLOOR,
    }


def theory_sweep(trials: int = 100, seed: int = 0, dims=(2, 3, 4), halving_rounds: int = 20) -> dict:
    """Randomized closed-form vs brute-force check plus two-output, optimal-ratio and halving-limit checks."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dims = tuple(int(d) for d in dims)
    rng = rng_from_seed(seed)
    cases = []
    for _ in range(trials):
        n_out, n_in = int(rng.choice(dims)), int(rng.choice(dims))
        V = rng.normal(size=(n_out, n_in))
        cases.append(_case(V, SplitSpec(int(rng.integers(n_in)), float(rng.random()))))

    fixed = _case(FIXED_V, SplitSpec(0, 0.5))

    two_output = []
    for _ in range(trials):
        V = rng.normal(size=(2, int(rng.choice(dims))))
        r = float(rng.random())
        scale = abs(V[0, 0]) * abs(V[1, 0])
        value = vred_closed_form(V, SplitSpec(0, r))
        # a few ulps of the unit-scale product; the (1 - r^2 - (1-r)^2) weight cancels near r = 0, 1
        two_output.append(abs(value - 2 * r * (1 - r) * scale) <= TWO_OUTPUT_ULPS * EPS * scale)

    ratios = []
    for i in range(20):
        n_out = 2 if i % 2 == 0 else 3
        ratios.append(optimal_ratio_scan(rng.normal(size=(n_out, int(rng.choice(dims)))), 1000))

    per_round, cumulative = repeated_split_reduction(FIXED_V, halving_rounds)
    limit = abs(FIXED_V[0][0] * FIXED_V[1][0])
    failing = [c for c in cases + [fixed] if not c["ok"]]
    summary = {
        "two_output_case": {"cases": len(two_output), "all_match": all(two_output)},
        "optimal_ratio": {"cases": len(ratios), "values": ratios, "all_half": all(r == 0.5 for r in ratios)},
        "repeated_split": {
            "rounds": halving_rounds,
            "per_round": per_round,
            "cumulative": cumulative,
            "limit": limit,
            "abs_diff": abs(cumulative - limit),
            "ok": abs(cumulative - limit) <= 1e-5,
        },
    }
    passed = (not failing and summary["two_output_case"]["all_match"] and summary["optimal_ratio"]["all_half"]
              and summary["repeated_split"]["ok"])
    return {
        "seed": seed,
        "trials": trials,
        "dims": list(dims),
        "tolerance": {"relative": REL_TOL, "absolute_floor": ABS_FLOOR},
        "cases": cases,
        "fixed_case": fixed,
        "max_abs_diff": max(c["abs_diff"] for c in cases + [fixed]),
        "checks": summary,
        "failing": failing,
        "passed": passed,
    }


# -- robot arm demo ----------------------------------------------------------

ARM_PROPAGATORS = (Propagator.IBP, Propagator.FASTLIN, Propagator.CROWN)
ARM_PARTITIONERS = (Partitioner.SG, Partitioner.GSG, Partitioner.AGSG)


def arm_network(seed: int, cache: Optional[Path] = None) -> Network:
    if cache is not None and Path(cache).exists():
        return load_network(cache)
    net = fit_arm_network(25, 20_000, seed)
    if cache is not None:
        save_network(net, cache)
    return net


def arm_demo(budget_calls: int = 600, seed: int = 3, net: Optional[Network] = None, samples: int = 1000):
    """Run every propagator x partitioner pair on the arm network.

    Returns ``(rows, results, truth)`` where rows carry error, calls,
    partitions and a soundness flag against the dense reference sample.
    """
    net = net if net is not None else arm_network(seed)
    box = JOINT_BOX
    truth = truth_samples(net, box, TRUTH_SAMPLES, truth_seed(seed))
    rows, results = [], {}
    for prop, part in itertools.product(ARM_PROPAGATORS, ARM_PARTITIONERS):
        cfg = AnalyzerConfig(prop, part, Shape.CONVEX_HULL, num_samples=samples, sample_seed=seed,
                             budget_calls=budget_calls)
        result = analyze(net, box, cfg)
        results[(prop.value, part.value)] = result
        rows.append({
            "propagator": prop.value,
            "partitioner": part.value,
            "error": safe_error(result.estimate, truth, Shape.CONVEX_HULL),
            "calls": result.propagator_calls,
            "partitions": result.partitions,
            "sound": bool(np.all(result.estimate.contains(truth.points, CONTAIN_TOL))),
        })
    return rows, results, truth


_DISPLAY = {"ibp": "IBP", "fastlin": "Fast-Lin", "crown": "CROWN", "sg": "SG", "gsg": "GSG", "agsg": "AGSG"}


def format_arm_table(rows) -> str:
    lines = [f"{'Algorithm':<18} {'Error':>8} {'Prop. Calls':>12} {'Partitions':>11} {'Sound':>6}"]
    for row in rows:
        name = f"{_DISPLAY[row['propagator']]} + {_DISPLAY[row['partitioner']]}"
        err = "undef" if row["error"] is None else f"{row['error']:.3f}"
        lines.append(f"{name:<18} {err:>8} {row['calls']:>12d} {row['partitions']:>11d} {str(row['sound']):>6}")
    return "\n".join(lines) + "\n"
