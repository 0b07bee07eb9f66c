"""Monte-Carlo comparison of the myriad-filter and EM iteration counts.

For each (nu, Sigma) cell the harness draws ``trials`` independent sample
sets, runs both estimators on identical data, and records the number of
iterations each needed to reach the stopping tolerance.  Results go to a
CSV (fixed header, deterministic row order) and optionally to a matplotlib
figure rendered next to it.

Per-trial seeds derive from the master seed via ``numpy.random.SeedSequence
(entropy=seed, spawn_key=(cell_index, trial_index))``, so changing the trial
count never shifts the streams of earlier trials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure, MyriadkitError
from .distributions import StudentTParams, sample_student_t
from .estimators import EstimatorOptions, em_estimate, gmmf_estimate
from .numkernel import SpdMatrix

__all__ = ["BenchConfig", "BenchRow", "run_table1", "emit_csv", "plot_rows"]

CSV_HEADER = "nu,sigma,mean_gmmf,std_gmmf,mean_em,std_em,failures"


def _default_sigmas():
    return [("I", np.eye(2))]


@dataclass
class BenchConfig:
    d: int = 2
    n: int = 100
    trials: int = 1000
    nus: list = field(default_factory=lambda: [1.0, 5.0, 10.0, 100.0])
    sigmas: list = field(default_factory=_default_sigmas)  # (label, matrix) pairs
    mu: np.ndarray | None = None
    tol: float = 1e-6
    max_iter: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 2 or self.trials < 1:
            raise ValueError("d, n and trials must be positive (n >= 2)")
        if not self.nus:
            raise ValueError("need at least one nu")
        if self.mu is None:
            self.mu = np.zeros(self.d)
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        if self.mu.shape[0] != self.d:
            raise ValueError("mu dimension disagrees with d")
        self.sigmas = [
            (str(label), m if isinstance(m, SpdMatrix) else SpdMatrix(m))
            for label, m in self.sigmas
        ]
        for _, m in self.sigmas:
            if m.dim != self.d:
                raise ValueError("sigma dimension disagrees with d")


@dataclass(frozen=True)
class BenchRow:
    nu: float
    sigma_label: str
    mean_iter_gmmf: float
    std_iter_gmmf: float
    mean_iter_em: float
    std_iter_em: float
    failures: int


def _trial_seed(master: int, cell: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=(cell, trial))


def run_table1(cfg: BenchConfig) -> list[BenchRow]:
    """Run the full sweep; rows ordered by (nu, sigma label)."""
    opts = EstimatorOptions(tol=cfg.tol, max_iter=cfg.max_iter)
    rows = []
    cells = [(nu, label, m) for nu in cfg.nus for label, m in cfg.sigmas]
    for cell_index, (nu, label, sigma) in enumerate(cells):
        params = StudentTParams(cfg.mu, sigma, nu)
        g_iters, e_iters = [], []
        failures = 0
        for t in range(cfg.trials):
            seed = int(_trial_seed(cfg.seed, cell_index, t).generate_state(1)[0])
            data = sample_student_t(params, cfg.n, seed)
            try:
                rg = gmmf_estimate(data, None, nu, opts, check=False)
                re = em_estimate(data, None, nu, opts, check=False)
            except MyriadkitError:
                failures += 1
                continue
            if not (rg.converged and re.converged):
                failures += 1
                continue
            g_iters.append(rg.iterations)
            e_iters.append(re.iterations)
        if g_iters:
            row = BenchRow(
                nu=nu,
                sigma_label=label,
                mean_iter_gmmf=float(np.mean(g_iters)),
                std_iter_gmmf=float(np.std(g_iters)),
                mean_iter_em=float(np.mean(e_iters)),
                std_iter_em=float(np.std(e_iters)),
                failures=failures,
            )
        else:
            row = BenchRow(nu, label, float("nan"), float("nan"),
                           float("nan"), float("nan"), failures)
        rows.append(row)
    rows.sort(key=lambda r: (r.nu, r.sigma_label))
    return rows


def emit_csv(rows, path) -> None:
    """Write rows with the fixed header; deterministic byte-for-byte."""
    lines = [CSV_HEADER]
    for r in sorted(rows, key=lambda r: (r.nu, r.sigma_label)):
        lines.append(
            f"{r.nu:g},{r.sigma_label},{r.mean_iter_gmmf:.6f},"
            f"{r.std_iter_gmmf:.6f},{r.mean_iter_em:.6f},{r.std_iter_em:.6f},"
            f"{r.failures}"
        )
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def plot_rows(rows, path) -> None:
    """Render mean iteration counts (one line per scatter label, both
    estimators) with std error bars to an image file next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    labels = sorted({r.sigma_label for r in rows})
    for label in labels:
        sub = sorted((r for r in rows if r.sigma_label == label), key=lambda r: r.nu)
        nus = [r.nu for r in sub]
        ax.errorbar(
            nus,
            [r.mean_iter_gmmf for r in sub],
            yerr=[r.std_iter_gmmf for r in sub],
            marker="o",
            capsize=3,
            label=f"myriad, sigma={label}",
        )
        ax.errorbar(
            nus,
            [r.mean_iter_em for r in sub],
            yerr=[r.std_iter_em for r in sub],
            marker="s",
            linestyle="--",
            capsize=3,
            label=f"EM, sigma={label}",
        )
    ax.set_xscale("log")
    ax.set_xlabel("degrees of freedom")
    ax.set_ylabel("iterations to tolerance")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=150)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    finally:
        plt.close(fig)
