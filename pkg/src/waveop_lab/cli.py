"""``waveop-lab <verb> --config <path> [--out <dir>] [--threads <n>]``.

Tables go to CSV (17 significant digits) and pass/fail results to
``summary.json``. Wall-clock timings are printed, never written, so that
identical configs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

VERBS = ("phase-shifts", "smatrix", "waveop", "remainder", "levinson", "verify-all")
# acceptance checks evaluated by each verb
VERB_CHECKS = {
    "phase-shifts": (1, 2),
    "smatrix": (3,),
    "waveop": (4, 9),
    "remainder": (5, 11),
    "levinson": (10,),
    "verify-all": tuple(range(1, 12)),
}
T_WINDOW_TEXT = "t ∈ (5/2, σ−5/2)"


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class PotentialConfig:
    kind: str = "square_well"
    depth: float = 4.0
    param: float = 1.0
    sigma_decay: float | None = None


@dataclass
class EnergyGridConfig:
    n: int = 256
    lam_min: float = 1e-3
    lam_max: float = 1e3


@dataclass
class RadialGridConfig:
    numerov_step: float = 1e-3
    eigen_step: float = 0.02
    time_step: float = 0.005
    dt: float = 0.02
    panel: float | None = None


@dataclass
class MomentumConfig:
    k_min: float = 0.3
    k_max: float = 5.0
    n: int = 40


@dataclass
class RunConfig:
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    ell_max: int = 2
    radial: RadialGridConfig = field(default_factory=RadialGridConfig)
    energy: EnergyGridConfig = field(default_factory=EnergyGridConfig)
    momenta: MomentumConfig = field(default_factory=MomentumConfig)
    t_weight: float | None = None
    seed: int = 20240607
    packet_count: int = 6
    packet_width: float = 0.3
    time_dependent_centres: list = field(default_factory=lambda: [4.0, 6.0, 9.0])
    experiments: list = field(default_factory=lambda: ["verify-all"])
    output_dir: str = "waveop_out"

    def build_potential(self):
        from .potentials import REGISTRY, Potential, exponential, gaussian, square_well, zero

        pc = self.potential
        kw = {} if pc.sigma_decay is None else {"sigma_decay": pc.sigma_decay}
        makers = {"square_well": square_well, "gaussian": gaussian, "exponential": exponential}
        if pc.kind == "zero" or (pc.kind in makers and pc.depth == 0):
            return zero()
        if pc.kind in REGISTRY:
            return REGISTRY[pc.kind]
        if pc.kind not in makers:
            raise ConfigError(f"potential.kind: unknown kind {pc.kind!r}")
        p = makers[pc.kind](pc.depth, pc.param, **kw)
        assert isinstance(p, Potential)
        return p

    def validate(self) -> None:
        if self.ell_max < 0 or self.ell_max > 12:
            raise ConfigError("ell_max: must lie in [0, 12]")
        if self.potential.param <= 0:
            raise ConfigError("potential.param: must be positive")
        e = self.energy
        if e.n < 16:
            raise ConfigError("energy.n: need at least 16 nodes")
        if not 0 < e.lam_min < e.lam_max:
            raise ConfigError("energy.lam_min/lam_max: need 0 < lam_min < lam_max")
        m = self.momenta
        if not 0 < m.k_min < m.k_max or m.n < 2:
            raise ConfigError("momenta: need 0 < k_min < k_max and n >= 2")
        for name in ("numerov_step", "eigen_step", "time_step", "dt"):
            if getattr(self.radial, name) <= 0:
                raise ConfigError(f"radial.{name}: must be positive")
        for verb in self.experiments:
            if verb not in VERBS:
                raise ConfigError(f"experiments: unknown experiment {verb!r}; choose from {', '.join(VERBS)}")
        p = self.build_potential()
        sigma = p.sigma_eff
        if not p.is_zero and sigma <= 7:
            warnings.warn(f"potential decays like <r>^-{sigma:g}; the wave-operator formula is established "
                          "for sigma > 7, results outside that range are exploratory", stacklevel=2)
        if self.t_weight is not None and not p.is_zero and not 2.5 < self.t_weight < sigma - 2.5:
            raise ConfigError(f"t_weight: {self.t_weight} violates {T_WINDOW_TEXT} = (2.5, {sigma - 2.5:g})")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown field(s): {', '.join(sorted(extra))}")
        nested = {"potential": PotentialConfig, "radial": RadialGridConfig, "energy": EnergyGridConfig,
                  "momenta": MomentumConfig}
        for name, typ in nested.items():
            if name in d:
                sub = d[name]
                if isinstance(sub, str) and name == "potential":
                    sub = {"kind": sub}
                if not isinstance(sub, dict):
                    raise ConfigError(f"{name}: expected an object")
                bad = set(sub) - set(typ.__dataclass_fields__)
                if bad:
                    raise ConfigError(f"{name}.{sorted(bad)[0]}: unknown field")
                try:
                    d[name] = typ(**sub)
                except TypeError as exc:
                    raise ConfigError(f"{name}: {exc}") from None
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        _check_types(cfg)
        return cfg


def _check_types(cfg: RunConfig) -> None:
    def num(path, v, allow_none=False):
        if v is None and allow_none:
            return
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{path}: expected a finite number, got {v!r}")

    num("t_weight", cfg.t_weight, allow_none=True)
    for sub in ("potential", "radial", "energy", "momenta"):
        obj = getattr(cfg, sub)
        for k, v in asdict(obj).items():
            if isinstance(v, str):
                continue
            num(f"{sub}.{k}", v, allow_none=k in ("panel", "sigma_decay"))
    for k in ("ell_max", "seed", "packet_count"):
        if not isinstance(getattr(cfg, k), int) or isinstance(getattr(cfg, k), bool):
            raise ConfigError(f"{k}: expected an integer")
    if not isinstance(cfg.energy.n, int) or not isinstance(cfg.momenta.n, int):
        raise ConfigError("energy.n / momenta.n: expected integers")
    if not isinstance(cfg.experiments, list):
        raise ConfigError("experiments: expected a list")


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    cfg = RunConfig.from_dict(data)
    cfg.validate()
    return cfg


# --- output helpers ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    try:
        import numpy as np

        if isinstance(x, np.floating):
            return format(float(x), ".17g")
        if isinstance(x, np.integer):
            return str(int(x))
    except ImportError:  # pragma: no cover
        pass
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


# --- experiments -------------------------------------------------------------------


class Runner:
    """Executes verbs for one config; check results are cached so verify-all never repeats work."""

    def __init__(self, cfg: RunConfig, out: Path):
        import numpy as np

        from . import experiments as ex
        from .grids import make_log_energy_grid

        self.np = np
        self.ex = ex
        self.cfg = cfg
        self.out = out
        self.p = cfg.build_potential()
        e = cfg.energy
        self.grid_E = make_log_energy_grid(e.n, e.lam_min, e.lam_max)
        m = cfg.momenta
        self.k = np.linspace(m.k_min, m.k_max, m.n)
        self.results: dict[int, object] = {}
        self._studies = None

    @property
    def lam_range(self):
        return (self.cfg.energy.lam_min, self.cfg.energy.lam_max)

    def studies(self):
        if self._studies is None:
            n = self.cfg.energy.n
            kw = {"lam_range": self.lam_range, "t_weight": self.cfg.t_weight}
            self._studies = (self.ex.remainder_study(self.p, 0, n, **kw),
                             self.ex.remainder_study(self.p, 0, 2 * n, **kw))
        return self._studies

    # one method per criterion, parameterised by the config
    def check(self, c: int):
        if c in self.results:
            return self.results[c]
        ex, cfg, p = self.ex, self.cfg, self.p
        n = cfg.energy.n
        if c == 1:
            r = ex.check_cross_solver([p], cfg.ell_max, self.k, cfg.radial.numerov_step, cfg.radial.panel)
        elif c == 2:
            r = ex.check_closed_form(p, 20)
        elif c == 3:
            r = ex.check_unitarity([p], cfg.ell_max, [p], self.grid_E)
        elif c == 4:
            step = cfg.radial.eigen_step
            r = ex.check_exact_vs_eigen(p, 0, (n, step), (2 * n, step / 2))
        elif c == 5:
            r = ex.check_remainder(p, 0, n, studies=self.studies())
        elif c == 6:
            r = ex.check_functional_calculus(n, self.lam_range)
        elif c == 7:
            r = ex.check_commutator_rank((n, 2 * n, 4 * n), self.lam_range)
        elif c == 8:
            r = ex.check_trace_bounds(cfg.ell_max, 2.0, n, self.lam_range)
        elif c == 9:
            r = ex.check_time_dependent(p, 0, tuple(cfg.time_dependent_centres), cfg.packet_width, n,
                                        cfg.radial.time_step, cfg.radial.dt)
        elif c == 10:
            r = ex.check_levinson([p], min(cfg.ell_max, 2))
        elif c == 11:
            r = ex.check_w_plus(p, 0, n, studies=self.studies())
        else:
            raise ValueError(c)
        print(r.line(), flush=True)
        self.results[c] = r
        return r

    def phase_shifts(self):
        tab = self.ex.phase_table(self.p, range(self.cfg.ell_max + 1), self.k, self.cfg.radial.numerov_step,
                                  self.cfg.radial.panel)
        rows = []
        for ell, row in tab.items():
            diff = self.ex.phase_difference(row["numerov"], row["ls"])
            rows += [(ell, k, a, b, d) for k, a, b, d in zip(self.k, row["numerov"], row["ls"], diff)]
        write_csv(self.out / "phase_shifts.csv", ["ell", "k", "delta_numerov", "delta_ls", "abs_diff_mod_pi"], rows)

    def smatrix(self):
        from .lippmann_schwinger import ls_grid, phase_from_s, s_matrix_channel

        grid_r = ls_grid(self.p, self.grid_E.lam_max, self.cfg.radial.panel)
        rows = []
        for ell in range(self.cfg.ell_max + 1):
            s = s_matrix_channel(self.p, ell, self.grid_E, grid_r)
            d = phase_from_s(s)
            rows += [(ell, lam, v.real, v.imag, abs(v) - 1, dd) for lam, v, dd in zip(self.grid_E.nodes, s, d)]
        write_csv(self.out / "s_matrix.csv", ["ell", "lambda", "re_s", "im_s", "abs_s_minus_1", "delta"], rows)

    def waveop(self):
        from .wave_operators import (assemble_exact, assemble_ra_formula, channel_problem, eigenfunction_waveop,
                                     isometry_defect, packet_corpus)

        gE = self.grid_E
        cp = channel_problem(self.p, 0, gE, self.cfg.t_weight, self.cfg.radial.panel)
        exact = assemble_exact(0, cp.M_op, cp.theta, cp.B_op)
        formula = assemble_ra_formula(0, cp.s, cp.theta)
        eig = eigenfunction_waveop(0, self.p, gE, step=self.cfg.radial.eigen_step)
        packets = packet_corpus(gE, self.cfg.packet_count, self.cfg.packet_width, self.cfg.seed)
        rows = []
        for i, v in enumerate(packets):
            centre = float(gE.nodes[int(self.np.argmax(abs(v)))])
            a = exact.apply(v)
            rows.append((0, i, centre, gE.norm(a - eig.apply(v)), gE.norm(a - formula.apply(v)),
                         isometry_defect(exact, v[None, :])))
        write_csv(self.out / "waveop_packets.csv",
                  ["ell", "packet", "centre_lambda", "exact_vs_eigen", "exact_vs_formula", "isometry_defect"], rows)

    def remainder(self):
        coarse, _ = self.studies()
        sv, sw = coarse.svals_full, coarse.svals_window
        top, topw = max(sv[0], 1e-300), max(sw[0], 1e-300)
        rows = [(0, i + 1, s, s / top, "full") for i, s in enumerate(sv)]
        rows += [(0, i + 1, s, s / topw, "window") for i, s in enumerate(sw)]
        write_csv(self.out / "remainder_svals.csv", ["ell", "index", "sigma", "sigma_over_sigma1", "domain"], rows)
        write_csv(self.out / "remainder_decay.csv", ["ell", "n", "norm_K_fn"],
                  [(0, i, d) for i, d in enumerate(coarse.decay)])

    def levinson(self):
        r = self.check(10)
        write_json(self.out / "levinson.json", self.ex._jsonable(r.details))

    def run(self, verb: str):
        tables = {"phase-shifts": self.phase_shifts, "smatrix": self.smatrix, "waveop": self.waveop,
                  "remainder": self.remainder, "levinson": self.levinson}
        if verb == "verify-all":
            for v in ("phase-shifts", "smatrix", "waveop", "remainder", "levinson"):
                tables[v]()
        else:
            tables[verb]()
        for c in VERB_CHECKS[verb]:
            self.check(c)

    def summary(self) -> dict:
        keys = {}
        failures = []
        for c in sorted(self.results):
            r = self.results[c]
            keys[r.key] = r.as_json()
            if r.passed is False:
                failures.append(r.key)
        return {"config": _config_echo(self.cfg), "criteria": keys, "failures": failures}


def _config_echo(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("output_dir")
    return d


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads: must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="waveop-lab", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--threads", type=int, help="BLAS threads")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"waveop-lab: invalid config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = Runner(cfg, out)
    try:
        runner.run(args.verb)
    except Exception as exc:
        print(f"waveop-lab: experiment {args.verb!r} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = runner.summary()
    write_json(out / "summary.json", summary)
    print(f"failures: {summary['failures']}")
    return 0 if not summary["failures"] else 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
