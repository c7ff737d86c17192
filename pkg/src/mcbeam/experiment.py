"""Experiment configuration, seeded runs and CSV/JSON output."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import csv
import io
import json
import math
from pathlib import Path
import time

import numpy as np

from . import __version__
from .baselines import channel_matched, in_cell_zero_forcing, time_sharing_rate
from .distributed import BeamformingGame, overhead_report
from .game import network_utility
from .network import ScenarioConfig, make_scenario
from .solver import SolverParams
from .utility import ALPHA_FAIR, KINDS, RATE, Utility, default_utility

GAME_SCHEMES = ("priced_game", "noncoop")
BEAM_SCHEMES = ("cm", "iczf")
SCHEMES = GAME_SCHEMES + BEAM_SCHEMES + ("time_sharing",)

RESULT_COLUMNS = ("seed", "snr_db", "scheme", "utility_kind", "final_network_utility",
                  "outer_rounds", "accepted_updates", "total_scalars_exchanged",
                  "wall_time_seconds")
SUMMARY_COLUMNS = ("snr_db", "scheme", "utility_kind", "trials", "mean_utility", "stderr_utility")
TRACE_COLUMNS = ("outer_round", "active_bs", "inner_event_index", "network_utility", "accepted")


class ConfigError(ValueError):
    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


@dataclass(frozen=True)
class GameSettings:
    max_outer: int = 50
    rel_utility_tol: float = 1e-4
    init: str = "cm"
    acceptance: str = "out_cell"


@dataclass(frozen=True)
class UtilitySettings:
    kind: str = RATE
    alpha: float = 2.0
    theta: float = 1.0
    weight: float | None = None   # None: 1/(NM), with 1/ln 2 for the log families

    def build(self, N, M):
        if self.weight is None:
            return default_utility(self.kind, N, M, alpha=self.alpha, theta=self.theta)
        return Utility(self.kind, self.weight, alpha=self.alpha, theta=self.theta)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    utility: UtilitySettings = field(default_factory=UtilitySettings)
    scheme: tuple = ("priced_game",)
    solver: SolverParams = field(default_factory=SolverParams)
    game: GameSettings = field(default_factory=GameSettings)
    sweep: tuple = (0.0, 10.0, 20.0, 30.0)
    trials: int = 50
    out_dir: str = "results"
    workers: int = 1
    record_timing: bool = False
    dump_beams: bool = False

    def make_utility(self):
        return self.utility.build(self.scenario.N, self.scenario.M)

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "utility": asdict(self.utility),
            "scheme": list(self.scheme),
            "solver": asdict(self.solver),
            "game": asdict(self.game),
            "sweep": list(self.sweep),
            "trials": self.trials,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "record_timing": self.record_timing,
            "dump_beams": self.dump_beams,
        }


# -- validation ------------------------------------------------------------

_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)}
_TOP_KEYS = {"scenario", "utility", "scheme", "solver", "game", "sweep", "trials",
             "out_dir", "workers", "record_timing", "dump_beams"}


def _number(path, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and not float(v).is_integer():
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return int(v) if integer else float(v)


def _section(path, raw, cls, ints=(), bools=(), strings=()):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name for f in fields(cls)}
    kw = {}
    for key, v in raw.items():
        sub = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(sub, "unknown key")
        if key in bools:
            if not isinstance(v, bool):
                raise ConfigError(sub, "expected true/false")
            kw[key] = v
        elif key in strings:
            if not isinstance(v, str):
                raise ConfigError(sub, "expected a string")
            kw[key] = v
        elif v is None:
            kw[key] = None
        elif key == "coordinated":
            if not isinstance(v, list) or not v:
                raise ConfigError(sub, "expected a non-empty list of cell ids")
            kw[key] = tuple(_number(f"{sub}[{i}]", c, integer=True) for i, c in enumerate(v))
        else:
            kw[key] = _number(sub, v, integer=key in ints)
    try:
        return cls(**kw)
    except ValueError as exc:
        head = str(exc).replace("=", " ").split()[0] if str(exc) else ""
        if head in known:
            path = f"{path}.{head}" if path else head
        raise ConfigError(path, str(exc)) from exc


def _schemes(path, v):
    names = [v] if isinstance(v, str) else v
    if not isinstance(names, list) or not names:
        raise ConfigError(path, "expected a scheme name or a non-empty list")
    out = []
    for i, s in enumerate(names):
        if s == "all":
            out.extend(SCHEMES)
        elif s in SCHEMES:
            out.append(s)
        else:
            raise ConfigError(f"{path}[{i}]" if isinstance(v, list) else path,
                              f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
    return tuple(dict.fromkeys(out))


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig` from parsed JSON, applying defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a JSON object")
    scen_raw = {}
    for key, v in raw.items():
        if key in _SCENARIO_KEYS:
            scen_raw[key] = v
        elif key not in _TOP_KEYS:
            raise ConfigError(key, "unknown key")
    if "scenario" in raw:
        if not isinstance(raw["scenario"], dict):
            raise ConfigError("scenario", "expected an object")
        dup = set(raw["scenario"]) & set(scen_raw)
        if dup:
            raise ConfigError(sorted(dup)[0], "given both at top level and under scenario")
        scen_raw.update(raw["scenario"])
    path_of = (lambda k: f"scenario.{k}") if "scenario" in raw else (lambda k: k)
    for key in scen_raw:
        if key not in _SCENARIO_KEYS:
            raise ConfigError(path_of(key), "unknown key")
    q, t = scen_raw.get("Q", ScenarioConfig.Q), scen_raw.get("T", ScenarioConfig.T)
    if isinstance(q, (int, float)) and isinstance(t, (int, float)) and q > t:
        raise ConfigError(path_of("Q"), f"Q={q} > T={t}; in-cell zero forcing and the "
                                         "scenario both need Q <= T")
    scenario = _section("scenario" if "scenario" in raw else "", scen_raw, ScenarioConfig,
                        ints=("M_total", "M", "N", "T", "Q", "seed"),
                        bools=("pathloss_on_amplitude",))

    u_raw = raw.get("utility", {})
    if isinstance(u_raw, str):
        u_raw = {"kind": u_raw}
    if isinstance(u_raw, dict) and u_raw.get("kind", RATE) not in KINDS:
        raise ConfigError("utility.kind", f"unknown utility {u_raw.get('kind')!r}")
    utility = _section("utility", u_raw, UtilitySettings, strings=("kind",))
    try:
        utility.build(scenario.N, scenario.M)
    except ValueError as exc:
        key = "alpha" if utility.kind == ALPHA_FAIR else "theta" if utility.kind == RATE else "weight"
        raise ConfigError(f"utility.{key}", str(exc)) from exc

    solver = _section("solver", raw.get("solver", {}), SolverParams,
                      ints=("inner_max_sweeps", "max_doublings", "polish_max_sweeps", "refine_max"))
    game = _section("game", raw.get("game", {}), GameSettings, ints=("max_outer",),
                    strings=("init", "acceptance"))
    if game.init not in ("cm", "iczf"):
        raise ConfigError("game.init", "expected 'cm' or 'iczf'")
    if game.acceptance not in ("out_cell", "full"):
        raise ConfigError("game.acceptance", "expected 'out_cell' or 'full'")
    if game.max_outer < 0:
        raise ConfigError("game.max_outer", "must be >= 0")
    if not game.rel_utility_tol > 0:
        raise ConfigError("game.rel_utility_tol", "must be positive")

    kw = {"scenario": scenario, "utility": utility, "solver": solver, "game": game}
    if "scheme" in raw:
        kw["scheme"] = _schemes("scheme", raw["scheme"])
    if "sweep" in raw:
        sw = raw["sweep"]
        if not isinstance(sw, list) or not sw:
            raise ConfigError("sweep", "expected a non-empty list of SNR values in dB")
        kw["sweep"] = tuple(_number(f"sweep[{i}]", v) for i, v in enumerate(sw))
    for key in ("trials", "workers"):
        if key in raw:
            kw[key] = _number(key, raw[key], integer=True)
            if kw[key] < 1:
                raise ConfigError(key, "must be >= 1")
    for key in ("record_timing", "dump_beams"):
        if key in raw:
            if not isinstance(raw[key], bool):
                raise ConfigError(key, "expected true/false")
            kw[key] = raw[key]
    if "out_dir" in raw:
        if not isinstance(raw["out_dir"], str):
            raise ConfigError("out_dir", "expected a string")
        kw["out_dir"] = raw["out_dir"]
    cfg = ExperimentConfig(**kw)
    check_feasible(cfg)
    return cfg


def check_feasible(cfg):
    sc = cfg.scenario
    if "time_sharing" in cfg.scheme and cfg.utility.kind != RATE:
        raise ConfigError("scheme", "time_sharing is defined only for the rate utility")
    if sc.Q > sc.T and ("iczf" in cfg.scheme or cfg.game.init == "iczf"):
        raise ConfigError("Q", f"Q={sc.Q} > T={sc.T} is infeasible for in-cell zero forcing")


def validate_config(text):
    """Parse JSON text into a validated :class:`ExperimentConfig`."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    return config_from_dict(raw)


def override(cfg, seed=None, scheme=None, utility=None, snr_db=None, out_dir=None,
             dump_beams=None):
    """Apply command-line overrides and re-check feasibility."""
    if seed is not None:
        cfg = replace(cfg, scenario=cfg.scenario.with_(seed=int(seed)))
    if scheme is not None:
        cfg = replace(cfg, scheme=_schemes("--scheme", scheme))
    if utility is not None:
        if utility not in KINDS:
            raise ConfigError("--utility", f"unknown utility {utility!r}")
        cfg = replace(cfg, utility=replace(cfg.utility, kind=utility))
    if snr_db is not None:
        snrs = tuple(float(v) for v in snr_db)
        cfg = replace(cfg, sweep=snrs, scenario=cfg.scenario.with_(snr_db=snrs[0]))
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    if dump_beams is not None:
        cfg = replace(cfg, dump_beams=dump_beams)
    check_feasible(cfg)
    return cfg


# -- running -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else r
        w.writerow([_fmt(v) for v in vals])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def _write_meta(out, cfg, extra=None):
    meta = {"library": "mcbeam", "version": __version__, "config": cfg.to_dict()}
    if extra:
        meta.update(extra)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def make_game(cfg, scenario, scheme="priced_game"):
    u = cfg.make_utility()
    return BeamformingGame(scenario.channels, u, scenario.P, params=cfg.solver,
                           pricing=scheme == "priced_game", acceptance=cfg.game.acceptance)


def dump_beams(path, scenario, u, W):
    np.savez(path, W=W, h=scenario.channels.h, eta=scenario.channels.eta, P=scenario.P,
             utility=json.dumps(u.describe()))


def utility_from_dump(path):
    """Recompute the network utility from a ``--dump-beams`` file."""
    with np.load(path) as z:
        d = json.loads(str(z["utility"]))
        u = Utility(d["kind"], d["weight"], alpha=d.get("alpha", 2.0), theta=d.get("theta", 1.0))
        return network_utility(u, z["W"], z["h"])


def run_convergence(cfg, out_dir=None):
    """Single seeded run of the game; writes ``trace.csv``, ``messages.csv``
    and ``metadata.json``. Returns the final game state."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scheme = cfg.scheme[0]
    if scheme not in GAME_SCHEMES:
        raise ConfigError("scheme", f"converge needs a game scheme ({', '.join(GAME_SCHEMES)})")
    scenario = make_scenario(cfg.scenario)
    game = make_game(cfg, scenario, scheme)
    st = game.initialize(cfg.game.init)
    st = game.run(st, cfg.game.max_outer, cfg.game.rel_utility_tol, record_inner=True)
    write_csv(out / "trace.csv", TRACE_COLUMNS, trace_rows(st))
    write_csv(out / "messages.csv", ("sender", "receiver", "round", "price", "interference",
                                     "channel_complex"),
              [(s, r, rnd, *map(int, v)) for (s, r, rnd), v in sorted(st.messages.counts.items())])
    rep = overhead_report(st.messages, game.Q, game.T)
    rep["per_round"] = {str(k): v for k, v in rep["per_round"].items()}
    _write_meta(out, cfg, {"scheme": scheme, "stop_reason": st.stop_reason,
                           "outer_rounds": st.outer_iteration,
                           "accepted_updates": st.accepted_updates,
                           "final_network_utility": st.utility, "overhead": rep})
    if cfg.dump_beams:
        dump_beams(out / "beams.npz", scenario, game.u, st.W)
    return st


def trace_rows(st):
    """Rows of the convergence trace: decision rows carry ``inner_event_index``
    0 and an accepted flag; inner rows (1..Q) show the candidate filling in
    one user slot at a time and leave ``accepted`` empty."""
    inner = {}
    for rnd, m, idx, util in st.inner_trace:
        inner.setdefault((rnd, m), []).append((idx, util))
    rows = []
    for rnd, m, accepted, util in st.utility_trace:
        for idx, iu in inner.get((rnd, m), []):
            rows.append((rnd, m, idx, iu, ""))
        rows.append((rnd, m, 0, util, int(bool(accepted))))
    return rows


def run_trial(cfg, snr_db, trial):
    """All schemes of one (SNR, trial) pair on a common channel draw."""
    scen_cfg = cfg.scenario.with_(snr_db=snr_db, seed=cfg.scenario.seed + trial)
    scenario = make_scenario(scen_cfg)
    u = cfg.make_utility()
    rows, beams = [], {}
    for scheme in cfg.scheme:
        t0 = time.perf_counter()
        rounds = accepted = scalars = 0
        if scheme in GAME_SCHEMES:
            game = make_game(cfg, scenario, scheme)
            st = game.run(game.initialize(cfg.game.init), cfg.game.max_outer,
                          cfg.game.rel_utility_tol)
            value, W = st.utility, st.W
            rounds, accepted, scalars = st.outer_iteration, st.accepted_updates, st.messages.round_scalars()
        elif scheme == "time_sharing":
            value, W = time_sharing_rate(scenario.channels, scenario.P, u), None
        else:
            maker = channel_matched if scheme == "cm" else in_cell_zero_forcing
            W = maker(scenario.channels, scenario.P)
            value = network_utility(u, W, scenario.channels)
        elapsed = time.perf_counter() - t0
        rows.append({
            "seed": scen_cfg.seed, "snr_db": float(snr_db), "scheme": scheme,
            "utility_kind": u.kind, "final_network_utility": float(value),
            "outer_rounds": rounds, "accepted_updates": accepted,
            "total_scalars_exchanged": scalars,
            "wall_time_seconds": elapsed if cfg.record_timing else "",
        })
        if W is not None:
            beams[scheme] = W
    return rows, beams, scenario


def _trial_job(args):
    cfg, snr_db, trial = args
    rows, beams, scenario = run_trial(cfg, snr_db, trial)
    if cfg.dump_beams:
        out = Path(cfg.out_dir) / "beams"
        out.mkdir(parents=True, exist_ok=True)
        u = cfg.make_utility()
        for scheme, W in beams.items():
            dump_beams(out / f"snr{snr_db:g}_seed{scenario.cfg.seed}_{scheme}.npz", scenario, u, W)
    return rows


def summarize(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["snr_db"], r["scheme"], r["utility_kind"]), []).append(
            r["final_network_utility"])
    out = []
    for (snr, scheme, kind), vals in groups.items():
        v = np.asarray(vals, dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        out.append({"snr_db": snr, "scheme": scheme, "utility_kind": kind, "trials": v.size,
                    "mean_utility": float(v.mean()), "stderr_utility": se})
    return out


def run_sweep(cfg, out_dir=None):
    """Utility versus SNR for every configured scheme; writes ``results.csv``,
    ``summary.csv`` and ``metadata.json``. Returns ``(rows, summary)``."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = replace(cfg, out_dir=str(out))
    jobs = [(cfg, snr, t) for snr in cfg.sweep for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    summary = summarize(rows)
    write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    _write_meta(out, cfg)
    return rows, summary


def run_nash_check(cfg, out_dir=None, eps=1e-4):
    """Run the game, then re-solve each BS against the final state."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scheme = cfg.scheme[0]
    if scheme not in GAME_SCHEMES:
        raise ConfigError("scheme", f"nash-check needs a game scheme ({', '.join(GAME_SCHEMES)})")
    scenario = make_scenario(cfg.scenario)
    game = make_game(cfg, scenario, scheme)
    st = game.run(game.initialize(cfg.game.init), cfg.game.max_outer, cfg.game.rel_utility_tol)
    rep = game.verify_nash(st, eps)
    rows = [(m, float(rep.payoffs[m]), float(rep.improvements[m]), float(rep.relative[m]),
             int(rep.relative[m] <= eps)) for m in range(game.M)]
    write_csv(out / "nash.csv", ("bs", "payoff", "improvement", "relative_improvement",
                                 "certified"), rows)
    _write_meta(out, cfg, {"scheme": scheme, "stop_reason": st.stop_reason,
                           "outer_rounds": st.outer_iteration, "eps": eps,
                           "certified": rep.certified, "final_network_utility": st.utility})
    if cfg.dump_beams:
        dump_beams(out / "beams.npz", scenario, game.u, st.W)
    return st, rep
