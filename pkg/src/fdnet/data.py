"""Trajectory dataset generation, splitting, batching, and on-disk format.

A dataset is a family of exact heat-equation trajectories sampled on a fixed
space-time lattice.  Initial-condition coefficients are drawn per trajectory;
the four named cases differ only in the time step, in multiplicative
measurement noise, and in the presence of a source term:

    stable    dt = 1,   exact samples
    unstable  dt = 200, exact samples (same solutions on a coarser time axis)
    noisy     dt = 1,   samples scaled by (1 + gamma * eps)
    forcing   dt = 1,   one shared source-coefficient vector per dataset

All randomness derives from a single master seed through fixed-order child
streams (initial conditions, forcing, noise, split), so any two cases built
from the same seed share their initial-condition coefficients.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from fdnet.heat import Grid, HeatProblem, apply_noise, exact_solution
from fdnet.model import Batch

__all__ = [
    "CASES",
    "CaseSpec",
    "TrajectorySet",
    "TrainTuples",
    "generate",
    "train_tuples",
    "sample_minibatch",
    "save_dataset",
    "load_dataset",
    "dataset_fingerprint",
]

CASES = ("stable", "unstable", "noisy", "forcing")

_FORMAT = "fdnet-dataset-v1"


@dataclass(frozen=True)
class CaseSpec:
    """Everything needed to regenerate a dataset deterministically."""

    case: str
    seed: int
    beta: float = 2e-4
    length: float = math.pi
    spacing: float = 0.1
    dt: float | None = None
    horizon: float = 1000.0
    n_ics: int = 200
    n_train: int = 150
    n_modes: int = 10
    noise_gamma: float | None = None

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}, expected one of {CASES}")
        if self.dt is None:
            object.__setattr__(self, "dt", 200.0 if self.case == "unstable" else 1.0)
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of dt")
        if not 0 < self.n_train < self.n_ics:
            raise ValueError("need 0 < n_train < n_ics")
        if self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        if self.case == "noisy":
            if self.noise_gamma is None or self.noise_gamma <= 0:
                raise ValueError("noisy case requires a positive noise_gamma")
        elif self.noise_gamma is not None:
            raise ValueError("noise_gamma only applies to the noisy case")

    @property
    def time_count(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    @property
    def grid(self) -> Grid:
        return Grid.from_length(self.length, self.spacing)


@dataclass
class TrajectorySet:
    """Generated trajectories plus the split and the coefficients behind them."""

    spec: CaseSpec
    grid: Grid
    times: np.ndarray  # (time_count,)
    values: np.ndarray  # (n_ics, time_count, grid_points)
    ic_coeffs: np.ndarray  # (n_ics, n_modes)
    forcing_coeffs: np.ndarray | None
    train_idx: np.ndarray
    test_idx: np.ndarray

    def problem(self, ic: int) -> HeatProblem:
        return HeatProblem(
            beta=self.spec.beta,
            length=self.spec.length,
            ic_coeffs=self.ic_coeffs[ic],
            forcing_coeffs=self.forcing_coeffs,
        )


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    # fixed spawn order keeps sibling cases aligned on shared streams
    ic_ss, forcing_ss, noise_ss, split_ss = np.random.SeedSequence(seed).spawn(4)
    return (
        np.random.default_rng(ic_ss),
        np.random.default_rng(forcing_ss),
        np.random.default_rng(noise_ss),
        np.random.default_rng(split_ss),
    )


def generate(spec: CaseSpec) -> TrajectorySet:
    """Sample the exact solutions for every trajectory in ``spec``.

    Values are exact_solution evaluations on the grid-by-times lattice; the
    noisy case then applies multiplicative noise to every sample.  The split
    is a seeded permutation: first ``n_train`` indices train, the rest test.
    """
    ic_rng, forcing_rng, noise_rng, split_rng = _streams(spec.seed)
    grid = spec.grid
    coeffs = ic_rng.standard_normal((spec.n_ics, spec.n_modes))
    forcing = forcing_rng.standard_normal(spec.n_modes) if spec.case == "forcing" else None
    times = np.arange(spec.time_count) * spec.dt
    x = grid.points
    values = np.empty((spec.n_ics, spec.time_count, grid.point_count))
    for s in range(spec.n_ics):
        prob = HeatProblem(
            beta=spec.beta, length=spec.length, ic_coeffs=coeffs[s], forcing_coeffs=forcing
        )
        values[s] = exact_solution(prob, x, times[:, None])
    if spec.case == "noisy":
        eps = noise_rng.standard_normal(values.shape)
        values = apply_noise(values, spec.noise_gamma, eps)
    perm = split_rng.permutation(spec.n_ics)
    train_idx = np.sort(perm[: spec.n_train])
    test_idx = np.sort(perm[spec.n_train :])
    return TrajectorySet(
        spec=spec,
        grid=grid,
        times=times,
        values=values,
        ic_coeffs=coeffs,
        forcing_coeffs=forcing,
        train_idx=train_idx,
        test_idx=test_idx,
    )


class TrainTuples:
    """Flat view of all one-step (u(t), u(t+dt)) pairs of the training split."""

    def __init__(self, values: np.ndarray, train_idx: np.ndarray):
        self._values = values
        steps = values.shape[1] - 1
        self._ic = np.repeat(np.asarray(train_idx, dtype=int), steps)
        self._t = np.tile(np.arange(steps), len(train_idx))

    def __len__(self) -> int:
        return self._ic.size

    def batch(self, indices: np.ndarray) -> Batch:
        ic = self._ic[indices]
        t = self._t[indices]
        return Batch(inputs=self._values[ic, t], targets=self._values[ic, t + 1])

    def all(self) -> Batch:
        return self.batch(np.arange(len(self)))


def train_tuples(ts: TrajectorySet) -> TrainTuples:
    return TrainTuples(ts.values, ts.train_idx)


def sample_minibatch(tuples: TrainTuples, batch_size: int, rng: np.random.Generator) -> Batch:
    """Draw ``batch_size`` distinct tuples; advances ``rng``."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if batch_size > len(tuples):
        raise ValueError(
            f"batch_size {batch_size} exceeds the {len(tuples)} available tuples"
        )
    return tuples.batch(rng.choice(len(tuples), size=batch_size, replace=False))


# -- persistence ---------------------------------------------------------------


def _meta_dict(ts: TrajectorySet) -> dict:
    spec = ts.spec
    return {
        "format": _FORMAT,
        "case": spec.case,
        "seed": spec.seed,
        "beta": spec.beta,
        "length": spec.length,
        "spacing": spec.spacing,
        "grid_points": ts.grid.point_count,
        "dt": spec.dt,
        "horizon": spec.horizon,
        "time_count": spec.time_count,
        "n_ics": spec.n_ics,
        "n_train": spec.n_train,
        "n_modes": spec.n_modes,
        "noise_gamma": spec.noise_gamma,
        "ic_coeffs": ts.ic_coeffs.tolist(),
        "forcing_coeffs": None if ts.forcing_coeffs is None else ts.forcing_coeffs.tolist(),
    }


def dataset_fingerprint(ts: TrajectorySet) -> str:
    """Short stable hash of the metadata (spec plus drawn coefficients)."""
    blob = json.dumps(_meta_dict(ts), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_dataset(ts: TrajectorySet, directory: str | os.PathLike) -> None:
    """Write meta.json, data.bin (little-endian float64, C order), split.csv."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(_meta_dict(ts), fh, indent=1)
        fh.write("\n")
    with open(os.path.join(directory, "data.bin"), "wb") as fh:
        fh.write(np.ascontiguousarray(ts.values, dtype="<f8").tobytes())
    train = set(ts.train_idx.tolist())
    with open(os.path.join(directory, "split.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ic_index", "role"])
        for s in range(ts.spec.n_ics):
            writer.writerow([s, "train" if s in train else "test"])


def load_dataset(directory: str | os.PathLike) -> TrajectorySet:
    """Read a dataset written by ``save_dataset``, validating shapes and split."""
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    if meta.get("format") != _FORMAT:
        raise ValueError(f"unrecognized dataset format {meta.get('format')!r}")
    spec = CaseSpec(
        case=meta["case"],
        seed=meta["seed"],
        beta=meta["beta"],
        length=meta["length"],
        spacing=meta["spacing"],
        dt=meta["dt"],
        horizon=meta["horizon"],
        n_ics=meta["n_ics"],
        n_train=meta["n_train"],
        n_modes=meta["n_modes"],
        noise_gamma=meta["noise_gamma"],
    )
    grid = spec.grid
    if grid.point_count != meta["grid_points"]:
        raise ValueError("grid_points in meta.json inconsistent with length/spacing")
    if spec.time_count != meta["time_count"]:
        raise ValueError("time_count in meta.json inconsistent with horizon/dt")
    shape = (spec.n_ics, spec.time_count, grid.point_count)
    raw = np.fromfile(os.path.join(directory, "data.bin"), dtype="<f8")
    if raw.size != math.prod(shape):
        raise ValueError(
            f"data.bin holds {raw.size} values, expected {math.prod(shape)}"
        )
    values = raw.astype(float).reshape(shape)
    coeffs = np.asarray(meta["ic_coeffs"], dtype=float)
    if coeffs.shape != (spec.n_ics, spec.n_modes):
        raise ValueError("ic_coeffs shape inconsistent with n_ics/n_modes")
    forcing = meta["forcing_coeffs"]
    forcing = None if forcing is None else np.asarray(forcing, dtype=float)
    roles: dict[int, str] = {}
    with open(os.path.join(directory, "split.csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            roles[int(row["ic_index"])] = row["role"]
    if sorted(roles) != list(range(spec.n_ics)):
        raise ValueError("split.csv must cover every ic_index exactly once")
    if not all(r in ("train", "test") for r in roles.values()):
        raise ValueError("split.csv roles must be 'train' or 'test'")
    train_idx = np.array(sorted(s for s, r in roles.items() if r == "train"), dtype=int)
    test_idx = np.array(sorted(s for s, r in roles.items() if r == "test"), dtype=int)
    if train_idx.size != spec.n_train:
        raise ValueError("split.csv train count disagrees with n_train")
    return TrajectorySet(
        spec=spec,
        grid=grid,
        times=np.arange(spec.time_count) * spec.dt,
        values=values,
        ic_coeffs=coeffs,
        forcing_coeffs=forcing,
        train_idx=train_idx,
        test_idx=test_idx,
    )
